//! Python extension module; see python/smoke_test.py for usage.
//!
//! Wraps parsing, validation, the synchronous semantics, the property
//! checkers, compatibility, gateway composition, and the fuzz campaign.
//! Verdict documents cross the boundary as plain dicts and lists.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};
use serde_json::Value;

use cfsm_core::{
    build_semantics_with, check_compatibility, check_implication_chain, compose_systems,
    export_dot_lts, find_deadlocks, find_locks, fuzz_report_to_json, normalize_outputs,
    parse_machines_raw, parse_system_file, report_to_json, run_preservation_fuzz,
    serialize_composed, serialize_system, BuildOptions, Cfsm, Error, FuzzParams, Participant,
    ProjectionVerdict, PropertyReport, SemLts,
};

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn participant(name: &str) -> PyResult<Participant> {
    Participant::new(name).map_err(err)
}

fn value_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(value_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, value_to_py(py, val)?)?;
            }
            dict.into_any()
        }
    })
}

/// A validated system of communicating machines.
#[pyclass(frozen, name = "System")]
struct PySystem {
    inner: cfsm_core::System,
}

#[pymethods]
impl PySystem {
    /// Parse and validate the textual format; raises ValueError on either.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PySystem {
            inner: parse_system_file(text).map_err(err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    fn participants(&self) -> Vec<String> {
        self.inner.machines().keys().map(|p| p.to_string()).collect()
    }

    fn machine_states(&self, participant_name: &str) -> PyResult<Vec<String>> {
        let p = participant(participant_name)?;
        let m = self.inner.machine(&p).map_err(err)?;
        Ok(m.fsa().states().iter().map(|s| s.to_string()).collect())
    }

    /// Canonical textual form; parsing it back yields an equal system.
    fn serialize(&self) -> String {
        serialize_system(&self.inner)
    }

    /// Explore all reachable configurations of the synchronous product.
    #[pyo3(signature = (max_configs=None))]
    fn semantics(&self, max_configs: Option<usize>) -> PyResult<PySemantics> {
        let mut opts = BuildOptions::default();
        if let Some(n) = max_configs {
            opts.max_configs = n;
        }
        let lts = build_semantics_with(&self.inner, opts).map_err(err)?;
        Ok(PySemantics {
            sys: self.inner.clone(),
            lts,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "System({}, {} machines)",
            self.inner.name(),
            self.inner.machines().len()
        )
    }
}

/// The explored synchronous semantics of one system.
#[pyclass(frozen, name = "Semantics")]
struct PySemantics {
    sys: cfsm_core::System,
    lts: SemLts,
}

#[pymethods]
impl PySemantics {
    #[getter]
    fn num_configurations(&self) -> usize {
        self.lts.configurations().len()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.lts.edges().len()
    }

    fn initial(&self) -> BTreeMap<String, String> {
        config_map(self.lts.initial_configuration())
    }

    fn configurations(&self) -> Vec<BTreeMap<String, String>> {
        self.lts.configurations().iter().map(config_map).collect()
    }

    /// Check "deadlock", "lock", or "strong-lock"; returns the verdict with
    /// its witnesses as a dict.
    fn check<'py>(&self, py: Python<'py>, property: &str) -> PyResult<Bound<'py, PyAny>> {
        let report: PropertyReport = match property {
            "deadlock" => find_deadlocks(&self.sys, &self.lts),
            "lock" => find_locks(&self.sys, &self.lts),
            "strong-lock" => cfsm_core::check_strong_lock_freedom(&self.sys, &self.lts),
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown property {other:?}; expected deadlock, lock, or strong-lock"
                )))
            }
        }
        .map_err(err)?;
        value_to_py(py, &report_to_json(&report, &self.lts))
    }

    /// True when the three property verdicts are mutually consistent.
    fn implication_chain_holds(&self) -> PyResult<bool> {
        check_implication_chain(&self.sys, &self.lts).map_err(err)
    }

    fn to_dot(&self) -> String {
        export_dot_lts(&self.lts)
    }

    fn __repr__(&self) -> String {
        format!(
            "Semantics({} configurations, {} edges)",
            self.lts.configurations().len(),
            self.lts.edges().len()
        )
    }
}

fn config_map(c: &cfsm_core::Configuration) -> BTreeMap<String, String> {
    c.entries()
        .map(|(p, s)| (p.to_string(), s.to_string()))
        .collect()
}

/// Two systems joined through a pair of relay gateways.
#[pyclass(frozen, name = "Composed")]
struct PyComposed {
    inner: cfsm_core::ComposedSystem,
}

#[pymethods]
impl PyComposed {
    #[getter]
    fn system(&self) -> PySystem {
        PySystem {
            inner: self.inner.system().clone(),
        }
    }

    #[getter]
    fn forced(&self) -> bool {
        self.inner.forced()
    }

    /// Whether every reachable configuration projects onto reachable
    /// configurations of the two components. Raises ValueError when the
    /// preconditions for the projection argument do not hold.
    #[pyo3(signature = (max_configs=None))]
    fn projection_holds(&self, max_configs: Option<usize>) -> PyResult<bool> {
        let mut opts = BuildOptions::default();
        if let Some(n) = max_configs {
            opts.max_configs = n;
        }
        let lts = build_semantics_with(self.inner.system(), opts).map_err(err)?;
        match cfsm_core::verify_projection_lemma(&self.inner, &lts).map_err(err)? {
            ProjectionVerdict::Verified { holds, .. } => Ok(holds),
            ProjectionVerdict::PreconditionFailed { reasons } => {
                Err(PyValueError::new_err(reasons.join("; ")))
            }
        }
    }

    /// Textual form with the gateway provenance in comments.
    fn serialize(&self) -> String {
        serialize_composed(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Composed({}, forced={})",
            self.inner.system().name(),
            self.inner.forced()
        )
    }
}

#[pyfunction]
fn parse_system(text: &str) -> PyResult<PySystem> {
    PySystem::parse(text)
}

/// Rewrite bare outputs into committed outputs, then validate.
#[pyfunction]
fn normalize(text: &str) -> PyResult<PySystem> {
    let (name, raws) = parse_machines_raw(text).map_err(err)?;
    let mut machines: BTreeMap<Participant, Cfsm> = BTreeMap::new();
    for raw in raws {
        let m = normalize_outputs(&raw.fsa, &raw.subject).map_err(err)?;
        machines.insert(raw.subject, m);
    }
    Ok(PySystem {
        inner: cfsm_core::System::new(name, machines).map_err(err)?,
    })
}

/// Decide compatibility of two interface machines; returns the verdict and
/// the witnessing list of related state pairs.
#[pyfunction]
fn compatible(
    s1: &PySystem,
    p1: &str,
    s2: &PySystem,
    p2: &str,
) -> PyResult<(bool, Vec<(String, String)>)> {
    let m1 = s1.inner.machine(&participant(p1)?).map_err(err)?;
    let m2 = s2.inner.machine(&participant(p2)?).map_err(err)?;
    let (ok, rel) = check_compatibility(m1, m2);
    let pairs = rel
        .pairs()
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    Ok((ok, pairs))
}

/// Join two systems by replacing the named interface machines with
/// gateways. Raises ValueError with the reasons when the pair is not
/// composable, unless force is given.
#[pyfunction]
#[pyo3(signature = (s1, h, s2, k, force=false))]
fn compose(s1: &PySystem, h: &str, s2: &PySystem, k: &str, force: bool) -> PyResult<PyComposed> {
    match compose_systems(&s1.inner, &participant(h)?, &s2.inner, &participant(k)?, force) {
        Ok(inner) => Ok(PyComposed { inner }),
        Err(Error::NotComposable { reasons }) => Err(PyValueError::new_err(format!(
            "not composable: {}",
            reasons.join("; ")
        ))),
        Err(e) => Err(err(e)),
    }
}

/// Run the randomized composition-theorem campaign; returns the report as
/// a dict (see the "clean" and "violations" keys).
#[pyfunction]
#[pyo3(signature = (seed=None, iterations=None, sequential=false))]
fn fuzz<'py>(
    py: Python<'py>,
    seed: Option<u64>,
    iterations: Option<usize>,
    sequential: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let mut params = FuzzParams::default();
    if let Some(s) = seed {
        params.seed = s;
    }
    if let Some(i) = iterations {
        params.iterations = i;
    }
    params.require_sequential_gateways = sequential;
    let report = run_preservation_fuzz(&params).map_err(err)?;
    value_to_py(py, &fuzz_report_to_json(&report))
}

#[pyfunction]
fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

#[pymodule]
fn cfsm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_class::<PySemantics>()?;
    m.add_class::<PyComposed>()?;
    m.add_function(wrap_pyfunction!(parse_system, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(compatible, m)?)?;
    m.add_function(wrap_pyfunction!(compose, m)?)?;
    m.add_function(wrap_pyfunction!(fuzz, m)?)?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    Ok(())
}
