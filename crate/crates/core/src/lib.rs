//! Elastic-optical-network admission engine.
//!
//! Admits dynamic connection requests by solving, per request, a joint
//! routing / modulation / spectrum-assignment binary program over a slotted
//! spectrum, with either a distance-adaptive reach rule or full
//! physical-layer impairment constraints (in-band crosstalk, Gaussian-model
//! nonlinear interference, LO-ASE beat noise) guaranteeing end-to-end
//! signal quality for new and established connections alike.
//!
//! The crate is organized along the pipeline:
//!
//! * [`network`] — graph, slot occupancy, modulation tables, connections;
//! * [`traffic`] — seeded request generation and trace files;
//! * [`model`] — the solver-neutral integer program and its builder;
//! * [`pli`] — impairment coefficient tables, SINR bookkeeping, audits;
//! * [`solver`] — structured exact backend, LP-file adapter, oracle;
//! * [`baselines`] — k-shortest-path restricted comparison schemes;
//! * [`metrics`] — fragmentation, blocking, ledgers;
//! * [`harness`] — experiment configuration and the admission loop;
//! * [`lp`] — LP-format model interchange.

pub mod baselines;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod lp;
pub mod metrics;
pub mod model;
pub mod network;
pub mod pli;
pub mod solver;
pub mod traffic;
pub mod units;

pub use error::{Error, Result};
pub use harness::{run_experiment, ExperimentConfig, RunOutput};
pub use model::{IlpModel, ModelBuilder, ObjectiveKind};
pub use network::{slots_required, ConnectionRecord, ModulationTable, NetworkState, Topology};
pub use pli::{verify_qot, PliCoefficients, PliParams};
pub use solver::{brute_force_rmlsa, solve, Backend, SolveOptions, SolveResult, SolveStatus};
