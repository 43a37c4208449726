//! Experiment orchestration: configuration files, the admission loop, and
//! run comparison.
//!
//! A run processes one request trace in time order. Each arrival is solved
//! as a fresh model against the current spectrum snapshot; an optimal
//! solution is re-verified row by row, decoded and committed, anything else
//! blocks the request (one-shot admission, no queueing or retry).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc as Rc;
use std::time::Duration;

use crate::baselines::k_shortest_paths;
use crate::error::{Error, Result};
use crate::metrics::{average_fragmentation, fsus_saved_percent, LedgerRow, MetricsLedger};
use crate::model::{decode_assignment, IlpModel, ModelBuilder, ObjectiveKind};
use crate::network::{ConnectionId, ModulationLevel, ModulationTable, NetworkState, Topology};
use crate::pli::{verify_qot, PliCoefficients, PliParams, SinrLimits};
use crate::solver::{solve, Backend, SolveOptions, SolveStatus};
use crate::traffic::{generate_trace, TrafficMode, TrafficTrace};

/// Routing search space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Routing {
    /// Path formation left to the model: every simple path competes.
    Joint,
    /// Restricted to the k shortest distance-ranked paths.
    Ksp(usize),
}

/// Where the topology comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologySource {
    Builtin(String),
    File(PathBuf),
}

/// Where the trace comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TrafficSource {
    Generate {
        mode: TrafficMode,
        seed: u64,
        count: usize,
        load_gbps: f64,
    },
    File(PathBuf),
}

/// Full experiment configuration; parsed from the sectioned key-value file
/// and overridable key by key from the command line.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub topology: TopologySource,
    pub n_slots: usize,
    /// Pre-occupied spectrum: (from-label, to-label, first slot, last slot).
    pub prefill: Vec<(u32, u32, usize, usize)>,
    pub traffic: TrafficSource,
    pub mods: ModulationTable,
    pub objective: ObjectiveKind,
    pub routing: Routing,
    pub pli_enabled: bool,
    pub audit_qot: bool,
    pub pli: PliParams,
    pub backend: Backend,
    pub time_limit: Duration,
    pub candidate_cap: u64,
    pub ledger_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
    pub series_dir: Option<PathBuf>,
    pub dump_model_dir: Option<PathBuf>,
    pub deterministic_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: TopologySource::Builtin("nsfnet14".into()),
            n_slots: 40,
            prefill: Vec::new(),
            traffic: TrafficSource::Generate {
                mode: TrafficMode::StaticBatch,
                seed: 1,
                count: 50,
                load_gbps: 20_000.0,
            },
            mods: ModulationTable::default_four(),
            objective: ObjectiveKind::Abacus,
            routing: Routing::Joint,
            pli_enabled: false,
            audit_qot: false,
            pli: PliParams::nsfnet(),
            backend: Backend::Builtin,
            time_limit: Duration::from_secs(60),
            candidate_cap: 20_000_000,
            ledger_path: None,
            summary_path: None,
            series_dir: None,
            dump_model_dir: None,
            deterministic_timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path)?;
        let base = path.as_ref().parent().map(Path::to_path_buf);
        Self::parse(&text, base.as_deref())
    }

    /// Parses the sectioned `key = value` format. Relative file references
    /// resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        let mut mod_levels: Vec<ModulationLevel> = Vec::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_ascii_lowercase();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(format!(
                    "config line {}: expected key = value",
                    lineno + 1
                )));
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            config.apply_keyed(&section, &key, value, base_dir, &mut mod_levels)?;
        }
        if !mod_levels.is_empty() {
            config.mods = ModulationTable::new(mod_levels)?;
        }
        Ok(config)
    }

    /// Applies one `section.key=value` override, same syntax as the file.
    pub fn apply_override(&mut self, dotted: &str, value: &str) -> Result<()> {
        let (section, key) = dotted
            .split_once('.')
            .ok_or_else(|| Error::invalid(format!("override `{dotted}` needs section.key")))?;
        let mut levels = Vec::new();
        self.apply_keyed(
            &section.to_ascii_lowercase(),
            &key.to_ascii_lowercase(),
            value,
            None,
            &mut levels,
        )?;
        if !levels.is_empty() {
            return Err(Error::invalid(
                "modulation levels cannot be overridden one at a time",
            ));
        }
        Ok(())
    }

    fn apply_keyed(
        &mut self,
        section: &str,
        key: &str,
        value: &str,
        base_dir: Option<&Path>,
        mod_levels: &mut Vec<ModulationLevel>,
    ) -> Result<()> {
        let resolve = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_relative() {
                if let Some(base) = base_dir {
                    return base.join(p);
                }
            }
            p
        };
        let bad = |what: &str| Error::parse(format!("bad {section}.{key} value `{what}`"));
        match (section, key) {
            ("topology", "source") => {
                self.topology = match value.strip_prefix("builtin:") {
                    Some(name) => TopologySource::Builtin(name.to_string()),
                    None => TopologySource::File(resolve(value)),
                };
            }
            ("topology", "slots") => self.n_slots = value.parse().map_err(|_| bad(value))?,
            ("topology", "prefill") => {
                let text = std::fs::read_to_string(resolve(value))?;
                self.prefill = parse_prefill(&text)?;
            }
            ("traffic", "source") => {
                if value != "generate" {
                    self.traffic = TrafficSource::File(resolve(value));
                }
            }
            ("traffic", "mode") => {
                let mode = TrafficMode::parse(value)?;
                if let TrafficSource::Generate { mode: m, .. } = &mut self.traffic {
                    *m = mode;
                }
            }
            ("traffic", "seed") => {
                if let TrafficSource::Generate { seed, .. } = &mut self.traffic {
                    *seed = value.parse().map_err(|_| bad(value))?;
                }
            }
            ("traffic", "count") => {
                if let TrafficSource::Generate { count, .. } = &mut self.traffic {
                    *count = value.parse().map_err(|_| bad(value))?;
                }
            }
            ("traffic", "load_gbps") => {
                if let TrafficSource::Generate { load_gbps, .. } = &mut self.traffic {
                    *load_gbps = value.parse().map_err(|_| bad(value))?;
                }
            }
            ("modulations", "level") => {
                let fields: Vec<&str> = value.split_whitespace().collect();
                if fields.len() != 3 {
                    return Err(bad("expected `name sinr_db reach_km`"));
                }
                mod_levels.push(ModulationLevel {
                    name: fields[0].to_string(),
                    sinr_threshold_db: fields[1].parse().map_err(|_| bad(value))?,
                    reach_km: fields[2].parse().map_err(|_| bad(value))?,
                });
            }
            ("mode", "name") => match value {
                "abacus" => {
                    self.objective = ObjectiveKind::Abacus;
                    self.routing = Routing::Joint;
                }
                "jo" => {
                    self.objective = ObjectiveKind::Jo;
                    self.routing = Routing::Joint;
                }
                "ksp2" => {
                    self.objective = ObjectiveKind::Jo;
                    self.routing = Routing::Ksp(2);
                }
                "ksp3" => {
                    self.objective = ObjectiveKind::Jo;
                    self.routing = Routing::Ksp(3);
                }
                other => return Err(bad(other)),
            },
            ("mode", "objective") => {
                self.objective = match value {
                    "abacus" => ObjectiveKind::Abacus,
                    "jo" => ObjectiveKind::Jo,
                    other => return Err(bad(other)),
                }
            }
            ("mode", "routing") => {
                self.routing = match value {
                    "joint" => Routing::Joint,
                    "ksp2" => Routing::Ksp(2),
                    "ksp3" => Routing::Ksp(3),
                    other => {
                        let k = other
                            .strip_prefix("ksp")
                            .and_then(|k| k.parse().ok())
                            .ok_or_else(|| bad(other))?;
                        Routing::Ksp(k)
                    }
                }
            }
            ("pli", "enabled") => self.pli_enabled = parse_bool(value).ok_or_else(|| bad(value))?,
            ("pli", "audit") => self.audit_qot = parse_bool(value).ok_or_else(|| bad(value))?,
            ("pli", "p_lo_dbm") => self.pli.p_lo_dbm = value.parse().map_err(|_| bad(value))?,
            ("pli", "p_r_dbm") => self.pli.p_r_dbm = value.parse().map_err(|_| bad(value))?,
            ("pli", "responsivity") => {
                self.pli.responsivity = value.parse().map_err(|_| bad(value))?
            }
            ("pli", "carrier_freq_hz") => {
                self.pli.carrier_freq_hz = value.parse().map_err(|_| bad(value))?
            }
            ("pli", "n_sp") => self.pli.n_sp = value.parse().map_err(|_| bad(value))?,
            ("pli", "attenuation_db_per_km") => {
                self.pli.attenuation_db_per_km = value.parse().map_err(|_| bad(value))?
            }
            ("pli", "wss_loss_db") => {
                self.pli.wss_loss_db = value.parse().map_err(|_| bad(value))?
            }
            ("pli", "tap_loss_db") => {
                self.pli.tap_loss_db = value.parse().map_err(|_| bad(value))?
            }
            ("pli", "span_km") => self.pli.span_km = value.parse().map_err(|_| bad(value))?,
            ("pli", "g_in_db") => self.pli.g_in_db = value.parse().map_err(|_| bad(value))?,
            ("pli", "g_out_db") => {
                self.pli.g_out_db_default = value.parse().map_err(|_| bad(value))?
            }
            ("pli", "g_out_db_node") => {
                let fields: Vec<&str> = value.split_whitespace().collect();
                if fields.len() != 2 {
                    return Err(bad("expected `node_label db`"));
                }
                let node: u32 = fields[0].parse().map_err(|_| bad(value))?;
                let db: f64 = fields[1].parse().map_err(|_| bad(value))?;
                self.pli.g_out_db_overrides.insert(node, db);
            }
            ("pli", "crosstalk_factor_db") => {
                self.pli.crosstalk_factor_db = value.parse().map_err(|_| bad(value))?
            }
            ("pli", "gamma") => self.pli.gamma = value.parse().map_err(|_| bad(value))?,
            ("pli", "beta2_ps2_per_km") => {
                self.pli.beta2_ps2_per_km = value.parse().map_err(|_| bad(value))?
            }
            ("pli", "elec_bandwidth_hz") => {
                self.pli.elec_bandwidth_hz = value.parse().map_err(|_| bad(value))?
            }
            ("pli", "planck") => self.pli.planck = value.parse().map_err(|_| bad(value))?,
            ("pli", "slot_width_hz") => {
                self.pli.slot_width_hz = value.parse().map_err(|_| bad(value))?
            }
            ("solver", "backend") => {
                self.backend = match value {
                    "builtin" => Backend::Builtin,
                    "command" => Backend::bundled_command(),
                    other => return Err(bad(other)),
                }
            }
            ("solver", "command") => {
                self.backend = Backend::Command {
                    template: value.to_string(),
                    workdir: None,
                    keep_files: false,
                }
            }
            ("solver", "time_limit_s") => {
                self.time_limit = Duration::from_secs(value.parse().map_err(|_| bad(value))?)
            }
            ("solver", "candidate_cap") => {
                self.candidate_cap = value.parse().map_err(|_| bad(value))?
            }
            ("output", "ledger") => self.ledger_path = Some(resolve(value)),
            ("output", "summary") => self.summary_path = Some(resolve(value)),
            ("output", "series_dir") => self.series_dir = Some(resolve(value)),
            ("output", "dump_models") => self.dump_model_dir = Some(resolve(value)),
            ("output", "deterministic_timing") => {
                self.deterministic_timing = parse_bool(value).ok_or_else(|| bad(value))?
            }
            _ => return Err(Error::parse(format!("unknown config key {section}.{key}"))),
        }
        Ok(())
    }

    pub fn load_topology(&self) -> Result<Rc<Topology>> {
        match &self.topology {
            TopologySource::Builtin(name) => match name.as_str() {
                "six_node" => Ok(Rc::new(Topology::six_node())),
                "nsfnet14" => Ok(Rc::new(Topology::nsfnet14())),
                other => Err(Error::NotFound(format!("builtin topology `{other}`"))),
            },
            TopologySource::File(path) => Ok(Rc::new(Topology::load(path)?)),
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

fn parse_prefill(text: &str) -> Result<Vec<(u32, u32, usize, usize)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(format!(
                "prefill line {}: expected `from to first_slot last_slot`",
                lineno + 1
            )));
        }
        let bad = || Error::parse(format!("prefill line {}", lineno + 1));
        out.push((
            fields[0].parse().map_err(|_| bad())?,
            fields[1].parse().map_err(|_| bad())?,
            fields[2].parse().map_err(|_| bad())?,
            fields[3].parse().map_err(|_| bad())?,
        ));
    }
    Ok(out)
}

/// What happened to one arrival.
#[derive(Debug, Clone)]
pub enum RequestOutcome {
    Admitted {
        id: ConnectionId,
        path: Vec<usize>,
        modulation: usize,
        start_slot: usize,
        num_slots: usize,
        objective: f64,
    },
    Blocked,
}

/// Everything a run produces.
#[derive(Debug)]
pub struct RunOutput {
    pub ledger: MetricsLedger,
    pub summary: String,
    pub admitted: usize,
    pub blocked: usize,
    /// Connections that failed the impairment audit at least once.
    pub qot_ever_failed: usize,
    pub outcomes: Vec<RequestOutcome>,
    pub final_state: NetworkState,
}

/// Builds the admission model for one request under the configured mode.
pub fn build_admission_model(
    config: &ExperimentConfig,
    state: &NetworkState,
    source: usize,
    dest: usize,
    rate_gbps: f64,
    path_cache: &mut HashMap<(usize, usize, usize), Vec<Vec<usize>>>,
) -> Result<IlpModel> {
    let mut builder = ModelBuilder::new(
        state.topology.clone(),
        state.n_slots(),
        &config.mods,
        source,
        dest,
        rate_gbps,
    )?;
    match config.objective {
        ObjectiveKind::Abacus => {
            builder.objective_abacus()?;
        }
        ObjectiveKind::Jo => {
            builder.objective_jo();
        }
    }
    builder.linkage_constraints();
    builder.path_constraints();
    builder.spectrum_constraints()?;
    builder.nonoverlap_and_capacity(state.spectrum())?;
    if config.pli_enabled {
        let coeffs = PliCoefficients::compute(state, &config.pli);
        let limits = SinrLimits::from_table(&config.mods);
        builder.pli_constraints(&coeffs, &limits, state)?;
    } else {
        builder.reach_constraint(&config.mods.reach_km())?;
    }
    if let Routing::Ksp(k) = config.routing {
        let paths = path_cache
            .entry((source, dest, k))
            .or_insert_with(|| {
                k_shortest_paths(&state.topology, source, dest, k)
                    .map(|set| set.paths)
                    .unwrap_or_default()
            })
            .clone();
        if paths.is_empty() {
            return Err(Error::NotFound("no candidate paths".into()));
        }
        builder.restrict_to_paths(&paths)?;
    }
    Ok(builder.finish())
}

enum Event {
    Departure { time: f64, id: ConnectionId },
    Arrival { time: f64, index: usize },
}

impl Event {
    fn time(&self) -> f64 {
        match self {
            Event::Departure { time, .. } => *time,
            Event::Arrival { time, .. } => *time,
        }
    }
    /// Departures before arrivals at equal times.
    fn order(&self) -> u8 {
        match self {
            Event::Departure { .. } => 0,
            Event::Arrival { .. } => 1,
        }
    }
}

/// One granted admission.
#[derive(Debug, Clone)]
pub struct Admission {
    pub id: ConnectionId,
    pub path: Vec<usize>,
    pub modulation: usize,
    pub start_slot: usize,
    pub num_slots: usize,
    pub objective: f64,
}

/// Stateful admission pipeline: per request it builds the configured model
/// against the current spectrum snapshot, solves it, re-verifies the
/// solution row by row, decodes and commits it, maintaining the impairment
/// snapshots of every established connection. The experiment runner and the
/// language bindings both drive this type.
pub struct AdmissionEngine {
    config: ExperimentConfig,
    state: NetworkState,
    options: SolveOptions,
    path_cache: HashMap<(usize, usize, usize), Vec<Vec<usize>>>,
    track_snapshots: bool,
}

impl AdmissionEngine {
    /// Loads the topology, applies the prefill occupancy and prepares an
    /// empty connection registry.
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let topology = config.load_topology()?;
        Self::with_topology(config, topology)
    }

    /// Same as [`AdmissionEngine::new`] but over an already-built graph,
    /// ignoring the configured topology source.
    pub fn with_topology(config: ExperimentConfig, topology: Rc<Topology>) -> Result<Self> {
        let mut state = NetworkState::new(topology.clone(), config.n_slots);
        for &(u, v, k0, k1) in &config.prefill {
            let (ui, vi) = (topology.index_of(u)?, topology.index_of(v)?);
            let arc = topology
                .arc_between(ui, vi)
                .ok_or_else(|| Error::NotFound(format!("prefill arc {u}->{v}")))?;
            if k0 < 1 || k1 < k0 || k1 > config.n_slots {
                return Err(Error::invalid(format!(
                    "prefill range {k0}..{k1} out of bounds"
                )));
            }
            state.occupy_raw(arc, k0, k1 - k0 + 1)?;
        }
        if let Some(dir) = &config.dump_model_dir {
            std::fs::create_dir_all(dir)?;
        }
        let options = SolveOptions {
            time_limit: config.time_limit,
            candidate_cap: config.candidate_cap,
        };
        let track_snapshots = config.pli_enabled || config.audit_qot;
        if track_snapshots {
            // the switch-loss bound on output gains is advisory
            for warning in config.pli.g_out_warnings(&topology) {
                eprintln!("warning: {warning}");
            }
        }
        Ok(AdmissionEngine {
            config,
            state,
            options,
            path_cache: HashMap::new(),
            track_snapshots,
        })
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn track_snapshots(&self) -> bool {
        self.track_snapshots
    }

    /// Solves one request. `Ok(None)` is a blocking event (no feasible
    /// allocation, or the solver gave up within its budget).
    pub fn admit(
        &mut self,
        source: usize,
        dest: usize,
        rate_gbps: f64,
        tag: u64,
    ) -> Result<Option<Admission>> {
        let topology = self.state.topology.clone();
        let model = match build_admission_model(
            &self.config,
            &self.state,
            source,
            dest,
            rate_gbps,
            &mut self.path_cache,
        ) {
            Err(Error::InfeasibleDemand(_)) | Err(Error::NotFound(_)) => return Ok(None),
            Err(e) => return Err(e),
            Ok(model) => model,
        };
        if let Some(dir) = &self.config.dump_model_dir {
            std::fs::write(
                dir.join(format!("model-{tag}.lp")),
                crate::lp::write_lp(&model),
            )?;
        }
        let result = solve(&model, &self.config.backend, &self.options)?;
        if result.status != SolveStatus::Optimal {
            return Ok(None);
        }
        let violations = model.verify(&result.assignment);
        if !violations.is_empty() {
            return Err(Error::SolverUnavailable(format!(
                "solver returned an infeasible optimum ({} violations)",
                violations.len()
            )));
        }
        let mut record = decode_assignment(&model, &result.assignment, rate_gbps)?;
        let rec_arcs = record.arcs(&topology);
        if self.track_snapshots {
            let coeffs = PliCoefficients::compute(&self.state, &self.config.pli);
            record.inv_sinr =
                coeffs.candidate_inv_sinr(&rec_arcs, record.start_slot, record.num_slots);
            let existing: Vec<ConnectionId> = self.state.records().map(|r| r.id).collect();
            for rid in existing {
                let rec = self.state.record(rid).unwrap().clone();
                let delta = coeffs.increments_for(
                    &topology,
                    &rec,
                    &rec_arcs,
                    record.start_slot,
                    record.num_slots,
                );
                self.state.update_record(rid, |r| {
                    for (v, d) in r.inv_sinr.iter_mut().zip(&delta) {
                        *v += d;
                    }
                })?;
            }
        }
        let admission = Admission {
            id: ConnectionId(0),
            path: record.path.clone(),
            modulation: record.modulation,
            start_slot: record.start_slot,
            num_slots: record.num_slots,
            objective: result.objective,
        };
        let id = self.state.commit_connection(record)?;
        Ok(Some(Admission { id, ..admission }))
    }

    /// Tears a connection down and removes its interference contributions
    /// from the remaining snapshots.
    pub fn release(&mut self, id: ConnectionId) -> Result<()> {
        let topology = self.state.topology.clone();
        let departing = self.state.release_connection(id)?;
        if self.track_snapshots {
            let coeffs = PliCoefficients::compute(&self.state, &self.config.pli);
            let dep_arcs = departing.arcs(&topology);
            let remaining: Vec<ConnectionId> = self.state.records().map(|r| r.id).collect();
            for rid in remaining {
                let rec = self.state.record(rid).unwrap().clone();
                let delta = coeffs.increments_for(
                    &topology,
                    &rec,
                    &dep_arcs,
                    departing.start_slot,
                    departing.num_slots,
                );
                self.state.update_record(rid, |r| {
                    for (v, d) in r.inv_sinr.iter_mut().zip(&delta) {
                        *v -= d;
                    }
                })?;
            }
        }
        Ok(())
    }

    /// From-scratch impairment audit of every active connection.
    pub fn audit(&self) -> Vec<crate::pli::QotReport> {
        verify_qot(&self.state, &self.config.pli, &self.config.mods)
    }
}

/// Runs a full experiment: solve every arrival in time order, commit or
/// block, maintain impairment snapshots, audit, and record the ledger.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut engine = AdmissionEngine::new(config.clone())?;
    let topology = engine.state().topology.clone();

    let trace = match &config.traffic {
        TrafficSource::Generate {
            mode,
            seed,
            count,
            load_gbps,
        } => generate_trace(&topology, *seed, *mode, *load_gbps, *count)?,
        TrafficSource::File(path) => TrafficTrace::load(path, &topology)?,
    };

    let mut ledger = MetricsLedger::default();
    let mut outcomes = Vec::with_capacity(trace.requests.len());
    let mut departures: Vec<Event> = Vec::new();
    let mut admitted = 0usize;
    let mut blocked = 0usize;
    let mut ever_failed: std::collections::BTreeSet<u64> = Default::default();

    let mut pending: Vec<Event> = trace
        .requests
        .iter()
        .enumerate()
        .map(|(i, r)| Event::Arrival {
            time: r.arrival,
            index: i,
        })
        .collect();
    let mut i_arr = 0usize;
    pending.sort_by(|a, b| a.time().total_cmp(&b.time()));

    while i_arr < pending.len() || !departures.is_empty() {
        let next_arrival_time = if i_arr < pending.len() {
            pending[i_arr].time()
        } else {
            f64::INFINITY
        };
        let dep_idx = departures
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.time()
                    .total_cmp(&b.time())
                    .then(a.order().cmp(&b.order()))
            })
            .map(|(i, _)| i);
        let take_departure = match dep_idx {
            Some(i) => departures[i].time() <= next_arrival_time,
            None => false,
        };

        if take_departure {
            let Event::Departure { id, .. } = departures.remove(dep_idx.unwrap()) else {
                unreachable!()
            };
            engine.release(id)?;
            continue;
        }
        if i_arr >= pending.len() {
            break;
        }
        let Event::Arrival { time, index } = pending[i_arr] else {
            unreachable!()
        };
        i_arr += 1;
        let request = &trace.requests[index];

        let solve_started = std::time::Instant::now();
        let admission =
            engine.admit(request.source, request.dest, request.rate_gbps, request.id)?;
        let solve_ms = solve_started.elapsed().as_secs_f64() * 1e3;

        let outcome = match admission {
            Some(a) => {
                if request.holding.is_finite() {
                    departures.push(Event::Departure {
                        time: time + request.holding,
                        id: a.id,
                    });
                }
                RequestOutcome::Admitted {
                    id: a.id,
                    path: a.path,
                    modulation: a.modulation,
                    start_slot: a.start_slot,
                    num_slots: a.num_slots,
                    objective: a.objective,
                }
            }
            None => RequestOutcome::Blocked,
        };

        let mut qot_failures = 0u64;
        if engine.track_snapshots() {
            for r in engine.audit() {
                if !r.pass {
                    qot_failures += 1;
                    ever_failed.insert(r.id.0);
                }
            }
            if config.pli_enabled && qot_failures > 0 {
                return Err(Error::InvalidArgument(format!(
                    "impairment-constrained admission left {qot_failures} connections below \
                     threshold at t={time}"
                )));
            }
        }

        let is_blocked = matches!(outcome, RequestOutcome::Blocked);
        if is_blocked {
            blocked += 1;
        } else {
            admitted += 1;
        }
        ledger.push(LedgerRow {
            time,
            fsus_in_use: engine.state().fsus_in_use() as u64,
            avg_fragmentation: average_fragmentation(engine.state()),
            offered_gbps: request.rate_gbps,
            blocked_gbps: if is_blocked { request.rate_gbps } else { 0.0 },
            qot_failures,
            solve_ms: if config.deterministic_timing {
                0.0
            } else {
                solve_ms
            },
        });
        outcomes.push(outcome);
    }

    let state = engine.state().clone();

    let mut summary = String::new();
    let _ = writeln!(summary, "requests           {}", trace.requests.len());
    let _ = writeln!(summary, "admitted           {admitted}");
    let _ = writeln!(summary, "blocked            {blocked}");
    let _ = writeln!(
        summary,
        "blocking_ratio     {:.6}",
        ledger.bandwidth_blocking()
    );
    let _ = writeln!(summary, "final_fsus_in_use  {}", ledger.final_fsus_in_use());
    let _ = writeln!(
        summary,
        "mean_fragmentation {:.9}",
        ledger.mean_fragmentation()
    );
    let _ = writeln!(summary, "qot_ever_failed    {}", ever_failed.len());
    let _ = writeln!(
        summary,
        "qot_failed_pct     {:.3}",
        if admitted > 0 {
            100.0 * ever_failed.len() as f64 / admitted as f64
        } else {
            0.0
        }
    );
    let _ = writeln!(summary, "mean_solve_ms      {:.3}", ledger.mean_solve_ms());

    if let Some(path) = &config.ledger_path {
        ledger.save_csv(path)?;
    }
    if let Some(path) = &config.summary_path {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, &summary)?;
    }
    if let Some(dir) = &config.series_dir {
        std::fs::create_dir_all(dir)?;
        type Render = Box<dyn Fn(&LedgerRow) -> String>;
        let series: [(&str, Render); 5] = [
            ("fsus_in_use", Box::new(|r| format!("{}", r.fsus_in_use))),
            (
                "avg_fragmentation",
                Box::new(|r| format!("{:.9}", r.avg_fragmentation)),
            ),
            (
                "blocked_gbps",
                Box::new(|r| format!("{:.6}", r.blocked_gbps)),
            ),
            ("qot_failures", Box::new(|r| format!("{}", r.qot_failures))),
            ("solve_ms", Box::new(|r| format!("{:.3}", r.solve_ms))),
        ];
        for (name, render) in &series {
            let mut text = String::new();
            for row in &ledger.rows {
                let _ = writeln!(text, "{:.6} {}", row.time, render(row));
            }
            std::fs::write(dir.join(format!("{name}.txt")), text)?;
        }
    }

    Ok(RunOutput {
        ledger,
        summary,
        admitted,
        blocked,
        qot_ever_failed: ever_failed.len(),
        outcomes,
        final_state: state,
    })
}

/// Side-by-side comparison of recorded runs: per-ledger aggregates plus
/// FSU savings of each run against the first.
pub fn compare_runs(paths: &[PathBuf]) -> Result<String> {
    if paths.len() < 2 {
        return Err(Error::invalid("compare needs at least two ledgers"));
    }
    let ledgers: Vec<(String, MetricsLedger)> = paths
        .iter()
        .map(|p| MetricsLedger::load_csv(p).map(|l| (p.display().to_string(), l)))
        .collect::<Result<_>>()?;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<40} {:>8} {:>12} {:>12} {:>10} {:>10} {:>12}",
        "ledger", "events", "final_fsus", "mean_frag", "blocking", "qot_fail", "fsus_saved%"
    );
    let baseline = &ledgers[0].1;
    for (name, ledger) in &ledgers {
        let saved = if ledger.rows.len() == baseline.rows.len() {
            // sign convention: positive means this run used fewer slots
            fsus_saved_percent(ledger, baseline)?
        } else {
            f64::NAN
        };
        let qot: u64 = ledger
            .rows
            .iter()
            .map(|r| r.qot_failures)
            .max()
            .unwrap_or(0);
        let _ = writeln!(
            out,
            "{:<40} {:>8} {:>12} {:>12.6} {:>10.6} {:>10} {:>12.3}",
            name,
            ledger.rows.len(),
            ledger.final_fsus_in_use(),
            ledger.mean_fragmentation(),
            ledger.bandwidth_blocking(),
            qot,
            saved,
        );
    }
    Ok(out)
}
