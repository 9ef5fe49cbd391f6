use std::collections::BTreeMap;

use ::chronostore::docstore::Value;
use ::chronostore::ingest;
use ::chronostore::layout::LayoutKind;
use ::chronostore::mutation::{ErrorPolicy, Graph as CoreGraph, PropTarget};
use ::chronostore::query::{self, GlobalQuery, GlobalQueryKind, QueryMode, QueryOptions};
use ::chronostore::temporal::{Interval, ALIVE_END};
use ::chronostore::verify::verify;
use pyo3::exceptions::{PyIOError, PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyInt, PyList, PyString, PyTuple};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value as J;
    Ok(match v {
        J::Null => py.None(),
        J::Bool(b) => PyBool::new(py, *b).to_owned().into_any().unbind(),
        J::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_pyobject(py)?.into_any().unbind(),
            (_, Some(i)) => i.into_pyobject(py)?.into_any().unbind(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind(),
        },
        J::String(s) => PyString::new(py, s).into_any().unbind(),
        J::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        J::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn json_to_py(py: Python<'_>, v: impl serde::Serialize) -> PyResult<Py<PyAny>> {
    to_py(py, &serde_json::to_value(v).map_err(value_err)?)
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    if obj.is_none() {
        Ok(Value::Null)
    } else if obj.is_instance_of::<PyBool>() {
        Ok(Value::Bool(obj.extract()?))
    } else if obj.is_instance_of::<PyInt>() {
        match obj.extract::<u64>() {
            Ok(u) => Ok(Value::UInt(u)),
            Err(_) => Ok(Value::Int(obj.extract()?)),
        }
    } else if obj.is_instance_of::<PyFloat>() {
        Ok(Value::Float(obj.extract()?))
    } else if obj.is_instance_of::<PyString>() {
        Ok(Value::Str(obj.extract()?))
    } else if let Ok(list) = obj.cast::<PyList>() {
        list.iter().map(|x| from_py(&x)).collect::<PyResult<_>>().map(Value::List)
    } else {
        Err(PyTypeError::new_err("property values must be None, bool, int, float, str or list"))
    }
}

/// An int names a vertex, a `(src, dst)` tuple names an edge.
fn target(obj: &Bound<'_, PyAny>) -> PyResult<PropTarget> {
    if let Ok(t) = obj.cast::<PyTuple>() {
        let (s, d): (u64, u64) = t.extract()?;
        return Ok(PropTarget::Edge(s, d));
    }
    Ok(PropTarget::Node(obj.extract()?))
}

fn interval(start: u64, end: Option<u64>) -> PyResult<Interval> {
    Interval::new(start, end.unwrap_or(ALIVE_END)).map_err(value_err)
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(PyValueError::new_err)
}

/// A temporal graph held in an in-memory document store.
#[pyclass(module = "chronostore")]
struct Graph {
    inner: CoreGraph,
}

#[pymethods]
impl Graph {
    #[new]
    #[pyo3(signature = (layout = "st"))]
    fn new(layout: &str) -> PyResult<Self> {
        Ok(Self { inner: CoreGraph::new(parse::<LayoutKind>(layout)?).map_err(value_err)? })
    }

    /// Opens a checkpoint written by `save`.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        CoreGraph::load_checkpoint(path).map(|inner| Self { inner }).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.persist_checkpoint(path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn convert(&self, layout: &str) -> PyResult<Self> {
        Ok(Self { inner: self.inner.convert(parse(layout)?).map_err(value_err)? })
    }

    #[getter]
    fn layout(&self) -> String {
        self.inner.layout().kind().to_string()
    }

    #[getter]
    fn clock(&self) -> u64 {
        self.inner.clock()
    }

    fn insert_node(&mut self, vid: u64, t: u64) -> PyResult<()> {
        self.inner.insert_node(vid, t).map_err(value_err)
    }

    fn delete_node(&mut self, vid: u64, t: u64) -> PyResult<()> {
        self.inner.delete_node(vid, t).map_err(value_err)
    }

    fn insert_edge(&mut self, src: u64, dst: u64, t: u64) -> PyResult<()> {
        self.inner.insert_edge(src, dst, t).map_err(value_err)
    }

    fn delete_edge(&mut self, src: u64, dst: u64, t: u64) -> PyResult<()> {
        self.inner.delete_edge(src, dst, t).map_err(value_err)
    }

    fn insert_property(&mut self, owner: &Bound<'_, PyAny>, name: &str, value: &Bound<'_, PyAny>, t: u64) -> PyResult<()> {
        self.inner.insert_property(target(owner)?, name, from_py(value)?, t).map_err(value_err)
    }

    fn delete_property(&mut self, owner: &Bound<'_, PyAny>, name: &str, t: u64) -> PyResult<()> {
        self.inner.delete_property(target(owner)?, name, t).map_err(value_err)
    }

    /// Applies an event-stream file; returns applied and error counts per kind.
    #[pyo3(signature = (path, skip_errors = false))]
    fn load_events(&mut self, py: Python<'_>, path: &str, skip_errors: bool) -> PyResult<Py<PyAny>> {
        let policy = if skip_errors { ErrorPolicy::SkipAndCount } else { ErrorPolicy::FailFast };
        let stats = ingest::load_event_stream(&mut self.inner, path.as_ref(), policy).map_err(value_err)?;
        json_to_py(py, &stats)
    }

    fn stats(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        json_to_py(py, &self.inner.stats().map_err(value_err)?)
    }

    #[pyo3(signature = (vid, start = 0, end = None))]
    fn one_hop(&self, vid: u64, start: u64, end: Option<u64>) -> PyResult<Vec<u64>> {
        let q = interval(start, end)?;
        let out = query::one_hop(&self.inner.snapshot(), self.inner.layout(), vid, &q).map_err(value_err)?;
        Ok(out.into_iter().collect())
    }

    /// The vertex restricted to `[start, end)`, or None if it never existed there.
    #[pyo3(signature = (vid, start = 0, end = None))]
    fn vertex_history(&self, py: Python<'_>, vid: u64, start: u64, end: Option<u64>) -> PyResult<Py<PyAny>> {
        let q = interval(start, end)?;
        let node = query::vertex_history(&self.inner.snapshot(), self.inner.layout(), vid, &q).map_err(value_err)?;
        json_to_py(py, &node)
    }

    fn snapshot(&self, py: Python<'_>, t: u64) -> PyResult<Py<PyAny>> {
        json_to_py(py, &query::snapshot_at(&self.inner.snapshot(), self.inner.layout(), t).map_err(value_err)?)
    }

    /// Per-bucket `{degree: count}` histograms; returns `(rows, metrics)`.
    #[pyo3(signature = (start = 0, end = None, granularity = 1, mode = "id", batch_size = 64))]
    fn degree_distribution(
        &self,
        py: Python<'_>,
        start: u64,
        end: Option<u64>,
        granularity: u64,
        mode: &str,
        batch_size: usize,
    ) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
        self.global(py, GlobalQueryKind::DegreeDistribution, start, end, granularity, mode, batch_size)
    }

    #[pyo3(signature = (start = 0, end = None, granularity = 1, mode = "id", batch_size = 64))]
    fn average_degree(
        &self,
        py: Python<'_>,
        start: u64,
        end: Option<u64>,
        granularity: u64,
        mode: &str,
        batch_size: usize,
    ) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
        self.global(py, GlobalQueryKind::AverageDegree, start, end, granularity, mode, batch_size)
    }

    /// Runs every invariant check; the dict's `passed` is False on any violation.
    fn verify(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let report = verify(&self.inner.snapshot(), self.inner.layout());
        let mut v = serde_json::to_value(&report).map_err(value_err)?;
        v["passed"] = report.passed().into();
        to_py(py, &v)
    }

    fn __repr__(&self) -> String {
        format!("Graph(layout={:?}, clock={})", self.layout(), self.inner.clock())
    }
}

impl Graph {
    #[allow(clippy::too_many_arguments)]
    fn global(
        &self,
        py: Python<'_>,
        kind: GlobalQueryKind,
        start: u64,
        end: Option<u64>,
        granularity: u64,
        mode: &str,
        batch_size: usize,
    ) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
        let q = query::clamp_interval(&interval(start, end)?, self.inner.clock().saturating_add(1)).map_err(value_err)?;
        let gq = GlobalQuery { kind, interval: q, granularity };
        let (result, metrics) = query::execute_global(
            &self.inner.snapshot(),
            self.inner.layout(),
            &gq,
            parse::<QueryMode>(mode)?,
            &QueryOptions { batch_size },
        )
        .map_err(value_err)?;
        let mut buf = Vec::new();
        result.write_json_lines(&mut buf).map_err(value_err)?;
        let rows: Vec<serde_json::Value> = buf
            .split(|b| *b == b'\n')
            .filter(|l| !l.is_empty())
            .map(serde_json::from_slice)
            .collect::<Result<_, _>>()
            .map_err(value_err)?;
        Ok((json_to_py(py, &rows)?, json_to_py(py, &metrics)?))
    }
}

/// Transforms an LDBC-style CSV dump into an event-stream file; returns the
/// transform counters.
#[pyfunction]
#[pyo3(signature = (input_dir, out, filter = "Person,Forum,knows,hasMember"))]
fn transform_ldbc(py: Python<'_>, input_dir: &str, out: &str, filter: &str) -> PyResult<Py<PyAny>> {
    let opts = ingest::LdbcOptions { filter: ingest::SchemaFilter::parse(filter).map_err(value_err)?, ..Default::default() };
    let (events, stats) = ingest::transform_ldbc_dump(input_dir.as_ref(), &opts).map_err(value_err)?;
    ingest::write_event_file(out.as_ref(), &ingest::TickMapping::ldbc(), &events).map_err(value_err)?;
    let mut counts: BTreeMap<&str, serde_json::Value> = BTreeMap::new();
    counts.insert("events", events.len().into());
    counts.insert("stats", serde_json::to_value(&stats).map_err(value_err)?);
    json_to_py(py, &counts)
}

#[pymodule]
fn chronostore(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_function(wrap_pyfunction!(transform_ldbc, m)?)?;
    m.add("ALIVE_END", ALIVE_END)?;
    Ok(())
}
