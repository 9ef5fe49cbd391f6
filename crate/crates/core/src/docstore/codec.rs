//! Canonical little-endian binary encoding of values and documents. Used by
//! checkpoints, content hashing and transfer-size accounting.

use super::value::{Document, Value};

const NULL: u8 = 0;
const FALSE: u8 = 1;
const TRUE: u8 = 2;
const UINT: u8 = 3;
const INT: u8 = 4;
const FLOAT: u8 = 5;
const STR: u8 = 6;
const LIST: u8 = 7;
const DOC: u8 = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed encoding: {0}")]
pub struct DecodeError(pub String);

pub fn encode_value(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Null => out.push(NULL),
        Value::Bool(false) => out.push(FALSE),
        Value::Bool(true) => out.push(TRUE),
        Value::UInt(v) => {
            out.push(UINT);
            out.extend_from_slice(&v.to_le_bytes());
        }
        Value::Int(v) => {
            out.push(INT);
            out.extend_from_slice(&v.to_le_bytes());
        }
        Value::Float(v) => {
            out.push(FLOAT);
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        Value::Str(s) => {
            out.push(STR);
            encode_str(s, out);
        }
        Value::List(items) => {
            out.push(LIST);
            out.extend_from_slice(&(items.len() as u32).to_le_bytes());
            items.iter().for_each(|v| encode_value(v, out));
        }
        Value::Doc(d) => {
            out.push(DOC);
            encode_fields(d, out);
        }
    }
}

pub fn encode_document(doc: &Document, out: &mut Vec<u8>) {
    encode_fields(doc, out);
}

pub fn encode_str(s: &str, out: &mut Vec<u8>) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn encode_fields(doc: &Document, out: &mut Vec<u8>) {
    out.extend_from_slice(&(doc.len() as u32).to_le_bytes());
    for (k, v) in doc.iter() {
        encode_str(k, out);
        encode_value(v, out);
    }
}

/// Size in bytes of the canonical encoding.
pub fn encoded_len(doc: &Document) -> usize {
    fn value_len(v: &Value) -> usize {
        1 + match v {
            Value::Null | Value::Bool(_) => 0,
            Value::UInt(_) | Value::Int(_) | Value::Float(_) => 8,
            Value::Str(s) => 4 + s.len(),
            Value::List(items) => 4 + items.iter().map(value_len).sum::<usize>(),
            Value::Doc(d) => fields_len(d),
        }
    }
    fn fields_len(d: &Document) -> usize {
        4 + d.iter().map(|(k, v)| 4 + k.len() + value_len(v)).sum::<usize>()
    }
    fields_len(doc)
}

/// Cursor over an encoded buffer.
pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() < n {
            return Err(DecodeError(format!("needed {n} bytes, {} left", self.buf.len())));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn str(&mut self) -> Result<String, DecodeError> {
        let n = self.u32()? as usize;
        let bytes = self.bytes(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|e| DecodeError(e.to_string()))
    }

    pub fn value(&mut self) -> Result<Value, DecodeError> {
        Ok(match self.u8()? {
            NULL => Value::Null,
            FALSE => Value::Bool(false),
            TRUE => Value::Bool(true),
            UINT => Value::UInt(self.u64()?),
            INT => Value::Int(self.u64()? as i64),
            FLOAT => Value::Float(f64::from_bits(self.u64()?)),
            STR => Value::Str(self.str()?),
            LIST => {
                let n = self.u32()? as usize;
                let mut items = Vec::with_capacity(n.min(1 << 16));
                for _ in 0..n {
                    items.push(self.value()?);
                }
                Value::List(items)
            }
            DOC => Value::Doc(self.document()?),
            tag => return Err(DecodeError(format!("unknown value tag {tag}"))),
        })
    }

    pub fn document(&mut self) -> Result<Document, DecodeError> {
        let n = self.u32()? as usize;
        let mut doc = Document::new();
        for _ in 0..n {
            let k = self.str()?;
            let v = self.value()?;
            doc.insert(k, v);
        }
        Ok(doc)
    }
}
