//! Checkpoint file: `"CHRN"`, a little-endian `u16` format version, then
//! records of `u32 length | payload | u32 crc32(payload)`. The last record
//! is an end marker carrying counts, so a file cut at a record boundary is
//! still detected.

use std::fs;
use std::io::Write;
use std::path::Path;

use imbl::OrdMap;

use super::codec::{encode_document, encode_str, Reader};
use super::{Collection, CollectionSpec, IndexDef, StoreError, StoreState};

const MAGIC: &[u8; 4] = b"CHRN";
const VERSION: u16 = 1;

const REC_COLLECTION: u8 = 1;
const REC_DOCUMENT: u8 = 2;
const REC_END: u8 = 3;

pub(super) fn encode_spec(spec: &CollectionSpec, out: &mut Vec<u8>) {
    encode_str(&spec.name, out);
    out.extend_from_slice(&(spec.key_fields.len() as u32).to_le_bytes());
    spec.key_fields.iter().for_each(|f| encode_str(f, out));
    out.extend_from_slice(&(spec.indexes.len() as u32).to_le_bytes());
    for idx in &spec.indexes {
        encode_str(&idx.name, out);
        out.extend_from_slice(&(idx.fields.len() as u32).to_le_bytes());
        idx.fields.iter().for_each(|f| encode_str(f, out));
        out.push(idx.multikey as u8);
    }
}

fn decode_spec(r: &mut Reader<'_>) -> Result<CollectionSpec, super::codec::DecodeError> {
    let name = r.str()?;
    let nkeys = r.u32()?;
    let key_fields = (0..nkeys).map(|_| r.str()).collect::<Result<Vec<_>, _>>()?;
    let nidx = r.u32()?;
    let mut indexes = Vec::new();
    for _ in 0..nidx {
        let name = r.str()?;
        let nf = r.u32()?;
        let fields = (0..nf).map(|_| r.str()).collect::<Result<Vec<_>, _>>()?;
        let multikey = r.u8()? != 0;
        indexes.push(IndexDef { name, fields, multikey });
    }
    Ok(CollectionSpec { name, key_fields, indexes })
}

fn push_record(out: &mut Vec<u8>, payload: &[u8]) {
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
}

pub(super) fn encode(state: &StoreState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let mut payload = Vec::new();
    let mut ndocs = 0u64;
    for coll in state.collections.values() {
        payload.clear();
        payload.push(REC_COLLECTION);
        encode_spec(coll.spec(), &mut payload);
        push_record(&mut out, &payload);
        for (_, doc) in coll.iter() {
            payload.clear();
            payload.push(REC_DOCUMENT);
            encode_str(coll.name(), &mut payload);
            encode_document(doc, &mut payload);
            push_record(&mut out, &payload);
            ndocs += 1;
        }
    }
    payload.clear();
    payload.push(REC_END);
    payload.extend_from_slice(&(state.collections.len() as u64).to_le_bytes());
    payload.extend_from_slice(&ndocs.to_le_bytes());
    payload.extend_from_slice(&state.version.to_le_bytes());
    push_record(&mut out, &payload);
    out
}

pub(super) fn write(state: &StoreState, path: &Path) -> Result<(), StoreError> {
    let bytes = encode(state);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| StoreError::Io(e.error))?;
    Ok(())
}

pub(super) fn read(path: &Path) -> Result<StoreState, StoreError> {
    decode(&fs::read(path)?)
}

fn corrupt(msg: impl Into<String>) -> StoreError {
    StoreError::CorruptCheckpoint(msg.into())
}

pub(super) fn decode(bytes: &[u8]) -> Result<StoreState, StoreError> {
    if bytes.len() < 6 || &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let mut collections: OrdMap<String, Collection> = OrdMap::new();
    let mut r = Reader::new(&bytes[6..]);
    let mut ndocs = 0u64;
    loop {
        if r.is_empty() {
            return Err(corrupt("truncated: missing end record"));
        }
        let len = r.u32().map_err(|_| corrupt("truncated record header"))? as usize;
        let payload = r.bytes(len).map_err(|_| corrupt("truncated record payload"))?;
        let crc = r.u32().map_err(|_| corrupt("truncated record checksum"))?;
        if crc32fast::hash(payload) != crc {
            return Err(corrupt("record checksum mismatch"));
        }
        let mut p = Reader::new(payload);
        let bad = |e: super::codec::DecodeError| corrupt(e.0);
        match p.u8().map_err(bad)? {
            REC_COLLECTION => {
                let spec = decode_spec(&mut p).map_err(bad)?;
                if collections.contains_key(&spec.name) {
                    return Err(corrupt(format!("duplicate collection {:?}", spec.name)));
                }
                let coll = Collection::new(spec).map_err(|e| corrupt(e.to_string()))?;
                collections.insert(coll.name().to_owned(), coll);
            }
            REC_DOCUMENT => {
                let name = p.str().map_err(bad)?;
                let doc = p.document().map_err(bad)?;
                let coll = collections
                    .get_mut(&name)
                    .ok_or_else(|| corrupt(format!("document for undeclared collection {name:?}")))?;
                coll.upsert(doc).map_err(|e| corrupt(e.to_string()))?;
                ndocs += 1;
            }
            REC_END => {
                let ncoll = p.u64().map_err(bad)?;
                let expected_docs = p.u64().map_err(bad)?;
                let version = p.u64().map_err(bad)?;
                if ncoll != collections.len() as u64 || expected_docs != ndocs {
                    return Err(corrupt("record counts do not match end marker"));
                }
                if !r.is_empty() {
                    return Err(corrupt("trailing bytes after end record"));
                }
                return Ok(StoreState { version, collections });
            }
            tag => return Err(corrupt(format!("unknown record type {tag}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docstore::{Document, Store, WriteBatch};

    fn sample() -> Store {
        let s = Store::new();
        s.create_collection(CollectionSpec::new("a", ["k"]).index(IndexDef::new("v", ["v"]))).unwrap();
        let mut b = WriteBatch::new();
        for k in 0..20u64 {
            b.upsert("a", Document::new().with("k", k).with("v", k % 3));
        }
        s.commit_batch(b).unwrap();
        s
    }

    #[test]
    fn roundtrip_preserves_content() {
        let s = sample();
        let bytes = encode(&s.snapshot());
        let back = decode(&bytes).unwrap();
        assert_eq!(back.content_hash(), s.content_hash());
        assert_eq!(back.collection("a").unwrap().index_len("v"), Some(20));
        assert!(back.verify_indexes().is_empty());
    }

    #[test]
    fn empty_store_roundtrip() {
        let s = Store::new();
        let back = decode(&encode(&s.snapshot())).unwrap();
        assert_eq!(back.total_documents(), 0);
        assert_eq!(back.content_hash(), s.content_hash());
    }

    #[test]
    fn detects_corruption() {
        let bytes = encode(&sample().snapshot());
        for cut in [3, 6, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut]), Err(StoreError::CorruptCheckpoint(_))), "cut at {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[20] ^= 0x40;
        assert!(matches!(decode(&flipped), Err(StoreError::CorruptCheckpoint(_))));
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(matches!(decode(&magic), Err(StoreError::CorruptCheckpoint(_))));
    }
}
