use std::cmp::Ordering;

use crate::temporal::Interval;

use super::value::{Document, Value};
use super::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ge => ord != Ordering::Less,
            CmpOp::Gt => ord == Ordering::Greater,
        }
    }
}

/// Filter evaluated inside the store. Evaluation is pure.
///
/// Comparisons are existential over every value a path resolves to, and
/// values of a different class than the literal never match.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    True,
    False,
    Cmp { path: String, op: CmpOp, value: Value },
    /// The `[start, end)` interval stored at the two paths overlaps `interval`.
    Overlaps { start: String, end: String, interval: Interval },
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    /// Some element of the list at `path` satisfies the inner predicate,
    /// evaluated relative to that element.
    Any { path: String, pred: Box<Predicate> },
}

impl Predicate {
    pub fn cmp(path: impl Into<String>, op: CmpOp, value: impl Into<Value>) -> Self {
        Predicate::Cmp { path: path.into(), op, value: value.into() }
    }

    pub fn eq(path: impl Into<String>, value: impl Into<Value>) -> Self {
        Self::cmp(path, CmpOp::Eq, value)
    }

    pub fn overlaps(start: impl Into<String>, end: impl Into<String>, interval: Interval) -> Self {
        Predicate::Overlaps { start: start.into(), end: end.into(), interval }
    }

    pub fn any(path: impl Into<String>, pred: Predicate) -> Self {
        Predicate::Any { path: path.into(), pred: Box::new(pred) }
    }

    /// Static well-formedness check run before a scan starts.
    pub fn validate(&self) -> Result<(), StoreError> {
        fn check_path(p: &str) -> Result<(), StoreError> {
            if p.is_empty() || p.split('.').any(str::is_empty) {
                return Err(StoreError::PredicateType(format!("malformed field path {p:?}")));
            }
            Ok(())
        }
        match self {
            Predicate::True | Predicate::False => Ok(()),
            Predicate::Cmp { path, value, .. } => {
                check_path(path)?;
                if !value.is_scalar() {
                    return Err(StoreError::PredicateType(format!(
                        "cannot compare {path} against a {}",
                        value.kind()
                    )));
                }
                Ok(())
            }
            Predicate::Overlaps { start, end, .. } => {
                check_path(start)?;
                check_path(end)
            }
            Predicate::And(ps) | Predicate::Or(ps) => ps.iter().try_for_each(Predicate::validate),
            Predicate::Any { path, pred } => {
                check_path(path)?;
                pred.validate()
            }
        }
    }

    pub fn eval(&self, doc: &Document) -> bool {
        match self {
            Predicate::True => true,
            Predicate::False => false,
            Predicate::Cmp { path, op, value } => doc
                .resolve(path)
                .into_iter()
                .any(|v| same_class(v, value) && op.holds(v.cmp(value))),
            Predicate::Overlaps { start, end, interval } => {
                let s = doc.resolve(start).first().and_then(|v| v.as_u64());
                let e = doc.resolve(end).first().and_then(|v| v.as_u64());
                match (s, e) {
                    (Some(s), Some(e)) => s < interval.end() && interval.start() < e,
                    _ => false,
                }
            }
            Predicate::And(ps) => ps.iter().all(|p| p.eval(doc)),
            Predicate::Or(ps) => ps.iter().any(|p| p.eval(doc)),
            Predicate::Any { path, pred } => doc
                .resolve(path)
                .into_iter()
                .any(|v| v.as_doc().is_some_and(|d| pred.eval(d))),
        }
    }
}

fn same_class(a: &Value, b: &Value) -> bool {
    a.kind() == b.kind()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal::ALIVE_END;

    fn life(s: u64, e: u64) -> Document {
        Document::new().with("start", s).with("end", e)
    }

    #[test]
    fn overlap_filter() {
        let q = Interval::new(3, 7).unwrap();
        let p = Predicate::overlaps("start", "end", q);
        let hits: Vec<bool> = [life(0, 2), life(5, 9), life(8, 10)].iter().map(|d| p.eval(d)).collect();
        assert_eq!(hits, vec![false, true, false]);
        assert!(p.eval(&life(6, ALIVE_END)));
    }

    #[test]
    fn cross_class_comparison_never_matches() {
        let d = Document::new().with("a", 5u64);
        assert!(!Predicate::eq("a", "5").eval(&d));
        assert!(Predicate::cmp("a", CmpOp::Ge, 5i64).eval(&d));
    }

    #[test]
    fn any_is_relative_to_element() {
        let d = Document::new().with(
            "out",
            vec![Value::Doc(life(0, 2)), Value::Doc(life(4, 6))],
        );
        let p = Predicate::any("out", Predicate::overlaps("start", "end", Interval::new(5, 6).unwrap()));
        assert!(p.eval(&d));
        let p = Predicate::any("out", Predicate::overlaps("start", "end", Interval::new(2, 4).unwrap()));
        assert!(!p.eval(&d));
    }

    #[test]
    fn validation_rejects_bad_literals() {
        assert!(Predicate::eq("a", Value::List(vec![])).validate().is_err());
        assert!(Predicate::eq("a..b", 1u64).validate().is_err());
        assert!(Predicate::And(vec![Predicate::True, Predicate::eq("x", 1u64)]).validate().is_ok());
    }
}
