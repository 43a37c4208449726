//! Python bindings: topology loading, the admission engine, request
//! generation and the fragmentation metric, driven through the same
//! pipeline as the command line.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use abacus_eon::harness::{AdmissionEngine, ExperimentConfig, Routing};
use abacus_eon::metrics::average_fragmentation;
use abacus_eon::model::ObjectiveKind;
use abacus_eon::network::{ConnectionId, SlotMask, Topology as CoreTopology};
use abacus_eon::traffic::{generate_trace, TrafficMode};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Network graph with per-link distances and per-node fiber I/O counts.
#[pyclass(name = "Topology", frozen)]
struct PyTopology {
    inner: Arc<CoreTopology>,
}

#[pymethods]
impl PyTopology {
    /// Bundled networks: "six_node" or "nsfnet14".
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        let inner = match name {
            "six_node" => CoreTopology::six_node(),
            "nsfnet14" => CoreTopology::nsfnet14(),
            other => return Err(err(format!("unknown builtin topology `{other}`"))),
        };
        Ok(PyTopology {
            inner: Arc::new(inner),
        })
    }

    /// Loads an `i j distance_km` edge-list file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyTopology {
            inner: Arc::new(CoreTopology::load(path).map_err(err)?),
        })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_links(&self) -> usize {
        self.inner.num_arcs() / 2
    }

    /// Node labels.
    fn nodes(&self) -> Vec<u32> {
        (0..self.inner.num_nodes())
            .map(|i| self.inner.label(i))
            .collect()
    }

    /// Undirected links as (u, v, distance_km) tuples.
    fn links(&self) -> Vec<(u32, u32, f64)> {
        self.inner
            .arcs()
            .iter()
            .filter(|f| f.from < f.to)
            .map(|f| {
                (
                    self.inner.label(f.from),
                    self.inner.label(f.to),
                    f.distance_km,
                )
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(nodes={}, links={})",
            self.inner.num_nodes(),
            self.inner.num_arcs() / 2
        )
    }
}

/// Sequential admission simulator over one network.
#[pyclass(name = "Simulator")]
struct PySimulator {
    engine: AdmissionEngine,
}

#[pymethods]
impl PySimulator {
    /// Builds a simulator. `objective` is "abacus" or "jo"; `routing` is
    /// "joint", "ksp2" or "ksp3"; with `pli=True` admissions carry full
    /// impairment constraints, otherwise the distance-adaptive reach rule.
    #[new]
    #[pyo3(signature = (topology, slots, objective="abacus", routing="joint", pli=false))]
    fn new(
        topology: &PyTopology,
        slots: usize,
        objective: &str,
        routing: &str,
        pli: bool,
    ) -> PyResult<Self> {
        let config = ExperimentConfig {
            n_slots: slots,
            objective: match objective {
                "abacus" => ObjectiveKind::Abacus,
                "jo" => ObjectiveKind::Jo,
                other => return Err(err(format!("unknown objective `{other}`"))),
            },
            routing: match routing {
                "joint" => Routing::Joint,
                "ksp2" => Routing::Ksp(2),
                "ksp3" => Routing::Ksp(3),
                other => return Err(err(format!("unknown routing `{other}`"))),
            },
            pli_enabled: pli,
            audit_qot: pli,
            ..ExperimentConfig::default()
        };
        let engine = AdmissionEngine::with_topology(config, topology.inner.clone()).map_err(err)?;
        Ok(PySimulator { engine })
    }

    /// Admits one request; returns a dict describing the allocation or
    /// None when the request blocks.
    fn admit(
        &mut self,
        py: Python<'_>,
        source: u32,
        dest: u32,
        rate_gbps: f64,
    ) -> PyResult<Option<Py<PyDict>>> {
        let topo = self.engine.state().topology.clone();
        let s = topo.index_of(source).map_err(err)?;
        let d = topo.index_of(dest).map_err(err)?;
        let admission = self.engine.admit(s, d, rate_gbps, 0).map_err(err)?;
        match admission {
            None => Ok(None),
            Some(a) => {
                let dict = PyDict::new(py);
                dict.set_item("id", a.id.0)?;
                let path: Vec<u32> = a.path.iter().map(|&n| topo.label(n)).collect();
                dict.set_item("path", path)?;
                dict.set_item("modulation", a.modulation)?;
                dict.set_item("start_slot", a.start_slot)?;
                dict.set_item("num_slots", a.num_slots)?;
                dict.set_item("objective", a.objective)?;
                Ok(Some(dict.unbind()))
            }
        }
    }

    /// Releases an admitted connection.
    fn release(&mut self, id: u64) -> PyResult<()> {
        self.engine.release(ConnectionId(id)).map_err(err)
    }

    #[getter]
    fn fsus_in_use(&self) -> usize {
        self.engine.state().fsus_in_use()
    }

    #[getter]
    fn active_connections(&self) -> usize {
        self.engine.state().num_records()
    }

    /// Mean external fragmentation over all directed links.
    fn fragmentation(&self) -> f64 {
        average_fragmentation(self.engine.state())
    }

    /// From-scratch impairment audit; one dict per active connection.
    fn audit(&self, py: Python<'_>) -> PyResult<Py<PyList>> {
        let list = PyList::empty(py);
        for report in self.engine.audit() {
            let dict = PyDict::new(py);
            dict.set_item("id", report.id.0)?;
            dict.set_item("pass", report.pass)?;
            dict.set_item("worst_margin_db", report.worst_margin_db)?;
            list.append(dict)?;
        }
        Ok(list.unbind())
    }
}

/// Slots needed to carry `rate_gbps` at modulation level `m`.
#[pyfunction]
fn slots_required(rate_gbps: f64, m: usize) -> PyResult<usize> {
    abacus_eon::slots_required(rate_gbps, m).map_err(err)
}

/// External fragmentation of a `0`/`1` occupancy string (1 = occupied).
#[pyfunction]
fn link_fragmentation(pattern: &str) -> f64 {
    abacus_eon::metrics::link_fragmentation(&SlotMask::from_pattern(pattern))
}

/// Writes a seeded request trace; returns the number of requests.
#[pyfunction]
#[pyo3(signature = (topology, path, seed, count, mode="static-batch", load_gbps=10000.0))]
fn write_trace(
    topology: &PyTopology,
    path: &str,
    seed: u64,
    count: usize,
    mode: &str,
    load_gbps: f64,
) -> PyResult<usize> {
    let mode = TrafficMode::parse(mode).map_err(err)?;
    let trace = generate_trace(&topology.inner, seed, mode, load_gbps, count).map_err(err)?;
    trace.save(&topology.inner, path).map_err(err)?;
    Ok(trace.requests.len())
}

#[pymodule]
fn abacus_eon_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyTopology>()?;
    m.add_class::<PySimulator>()?;
    m.add_function(wrap_pyfunction!(slots_required, m)?)?;
    m.add_function(wrap_pyfunction!(link_fragmentation, m)?)?;
    m.add_function(wrap_pyfunction!(write_trace, m)?)?;
    Ok(())
}
