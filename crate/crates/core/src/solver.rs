//! Exact optimization of admission models.
//!
//! Two backends sit behind one entry point:
//!
//! * [`Backend::Builtin`] — a structured exact solver. It enumerates the
//!   path-shaped assignments (one simple path, one modulation, one start
//!   slot), checks each candidate against the model's own rows, and scores
//!   it with the model's own objective. Optimal assignments of these models
//!   are always path-shaped — extra arcs or slots can only raise the
//!   objective or tighten the impairment rows — so exhaustive enumeration
//!   over candidates is exact. Ordering is fixed, which makes reruns
//!   reproduce identical incumbents.
//! * [`Backend::Command`] — a file-based adapter: the model is written as
//!   LP text, an external command is run on it, and its solution file is
//!   read back, re-verified against every row and re-scored. The bundled
//!   `abacus-lp-solve` binary fills this role when no commercial solver is
//!   installed.
//!
//! [`brute_force_rmlsa`] is the independent oracle: it never looks at a
//! model, deriving feasibility and cost straight from network state and the
//! closed-form objective. Differential agreement between the two paths is
//! what certifies the ILP encoding.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use crate::baselines::all_simple_paths;
use crate::error::{Error, Result};
use crate::lp;
use crate::model::{candidate_assignment, Assignment, IlpModel, ModelView, ObjectiveKind, VarId};
use crate::network::{slots_required, ArcId, ModulationTable, NetworkState};
use crate::pli::{PliCoefficients, PliParams, SinrLimits};

/// Outcome class of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Timeout,
}

/// Result of one solve. When `status` is `Optimal` the assignment satisfies
/// every row within tolerance and `objective` equals its recomputation.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    pub assignment: Assignment,
    pub solve_time: Duration,
    pub candidates_examined: u64,
}

/// Which solving machinery to use.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Builtin,
    /// Shell out through LP files. `{model}` and `{solution}` placeholders
    /// in the template are substituted with file paths, `{time_limit}` with
    /// whole seconds.
    Command {
        template: String,
        workdir: Option<PathBuf>,
        keep_files: bool,
    },
}

impl Backend {
    /// The bundled solver helper, resolved next to the current executable
    /// when present so experiments work without an installed copy.
    pub fn bundled_command() -> Backend {
        let name = "abacus-lp-solve";
        let program = std::env::current_exe()
            .ok()
            .and_then(|p| p.parent().map(|d| d.join(name)))
            .filter(|p| p.exists())
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| name.to_string());
        Backend::Command {
            template: format!("{program} {{model}} {{solution}} --time-limit {{time_limit}}"),
            workdir: None,
            keep_files: false,
        }
    }
}

/// Tunables shared by both backends.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub time_limit: Duration,
    /// Enumeration guard: candidates examined beyond this abort the solve.
    pub candidate_cap: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit: Duration::from_secs(60),
            candidate_cap: 20_000_000,
        }
    }
}

/// Solves a model to proven optimality over its binaries.
pub fn solve(model: &IlpModel, backend: &Backend, options: &SolveOptions) -> Result<SolveResult> {
    match backend {
        Backend::Builtin => builtin_solve(model, options),
        Backend::Command {
            template,
            workdir,
            keep_files,
        } => command_solve(model, template, workdir.as_deref(), *keep_files, options),
    }
}

// ---------------------------------------------------------------------------
// builtin structured backend

/// Lazy row checker: only rows adjacent to a candidate's set variables are
/// evaluated exactly; rows untouched by the candidate were screened once at
/// the all-zero assignment, and rows sharing a noise expression are covered
/// by a per-expression bound with an exact fallback.
struct LazyChecker<'m> {
    model: &'m IlpModel,
    adjacency: Vec<Vec<u32>>,
    zero_violated: Vec<u32>,
    shared_by_var: Vec<Vec<(u32, f64)>>,
    shared_rows: Vec<Vec<u32>>,
    shared_floor: Vec<f64>,
    stamp: u64,
    var_stamp: Vec<u64>,
    row_stamp: Vec<u64>,
    shared_vals: Vec<f64>,
    shared_stamp: Vec<u64>,
}

impl<'m> LazyChecker<'m> {
    fn new(model: &'m IlpModel) -> LazyChecker<'m> {
        let nv = model.num_vars();
        let mut adjacency = vec![Vec::new(); nv];
        let mut zero_violated = Vec::new();
        let mut shared_rows = vec![Vec::new(); model.shared.len()];
        let mut shared_floor = vec![f64::INFINITY; model.shared.len()];
        for (i, row) in model.rows.iter().enumerate() {
            for (v, _) in &row.terms {
                adjacency[v.0 as usize].push(i as u32);
            }
            if let Some(s) = row.shared {
                shared_rows[s as usize].push(i as u32);
                shared_floor[s as usize] = shared_floor[s as usize].min(row.rhs);
            } else if !row.cmp.holds(0.0, row.rhs) {
                zero_violated.push(i as u32);
            }
        }
        let mut shared_by_var = vec![Vec::new(); nv];
        for (s, expr) in model.shared.iter().enumerate() {
            for (v, c) in expr {
                shared_by_var[v.0 as usize].push((s as u32, *c));
            }
        }
        LazyChecker {
            model,
            adjacency,
            zero_violated,
            shared_by_var,
            shared_rows,
            shared_floor,
            stamp: 0,
            var_stamp: vec![0; nv],
            row_stamp: vec![0; model.rows.len()],
            shared_vals: vec![0.0; model.shared.len()],
            shared_stamp: vec![0; model.shared.len()],
        }
    }

    fn shared_val(&self, s: u32) -> f64 {
        if self.shared_stamp[s as usize] == self.stamp {
            self.shared_vals[s as usize]
        } else {
            0.0
        }
    }

    fn is_feasible(&mut self, ones: &[VarId]) -> bool {
        self.stamp += 1;
        let stamp = self.stamp;
        for v in ones {
            self.var_stamp[v.0 as usize] = stamp;
        }
        for v in ones {
            for &(s, c) in &self.shared_by_var[v.0 as usize] {
                if self.shared_stamp[s as usize] != stamp {
                    self.shared_stamp[s as usize] = stamp;
                    self.shared_vals[s as usize] = 0.0;
                }
                self.shared_vals[s as usize] += c;
            }
        }

        // exact check of every row touching a set variable
        for v in ones {
            for ri in &self.adjacency[v.0 as usize] {
                let ri = *ri as usize;
                if self.row_stamp[ri] == stamp {
                    continue;
                }
                self.row_stamp[ri] = stamp;
                let row = &self.model.rows[ri];
                let mut lhs: f64 = row
                    .terms
                    .iter()
                    .filter(|(tv, _)| self.var_stamp[tv.0 as usize] == stamp)
                    .map(|(_, c)| c)
                    .sum();
                if let Some(s) = row.shared {
                    lhs += self.shared_val(s);
                }
                if !row.cmp.holds(lhs, row.rhs) {
                    return false;
                }
            }
        }

        // rows that fail at all-zero must have been touched (and passed)
        for ri in &self.zero_violated {
            if self.row_stamp[*ri as usize] != stamp {
                return false;
            }
        }

        // rows gated on a shared expression and untouched by the candidate
        // have exactly the shared value as left-hand side
        for s in 0..self.shared_rows.len() {
            let val = self.shared_val(s as u32);
            if val <= self.shared_floor[s] + crate::model::FEASIBILITY_TOL {
                continue;
            }
            for ri in &self.shared_rows[s] {
                let ri = *ri as usize;
                if self.row_stamp[ri] == stamp {
                    continue;
                }
                let row = &self.model.rows[ri];
                if !row.cmp.holds(val, row.rhs) {
                    return false;
                }
            }
        }
        true
    }
}

struct BuiltinSearch<'m> {
    model: &'m IlpModel,
    view: ModelView,
    checker: LazyChecker<'m>,
    options: SolveOptions,
    started: Instant,
    best: Option<(f64, Assignment)>,
    candidates: u64,
    /// Cheapest possible contribution of any single arc to the objective.
    min_arc_cost: f64,
    /// Per-arc cheapest objective contribution.
    arc_floor: Vec<f64>,
    hops_to_dest: Vec<usize>,
    /// Shortest completion distance to the destination, km.
    dist_to_dest: Vec<f64>,
    /// Largest reach any usable modulation allows; infinite without the
    /// distance rows.
    max_reach: f64,
    /// Per-arc unavoidable noise ratio read off the shared expressions, and
    /// its cheapest completion to the destination.
    arc_noise_floor: Vec<f64>,
    noise_to_dest: Vec<f64>,
    /// Largest noise any candidate row tolerates on a used slot; infinite
    /// without impairment rows.
    noise_cap: f64,
    timed_out: bool,
}

impl<'m> BuiltinSearch<'m> {
    fn new(model: &'m IlpModel, options: &SolveOptions) -> BuiltinSearch<'m> {
        let topo = &model.hints.topology;
        let view = ModelView::of(model);
        let n = model.hints.n_slots;

        // objective floor per arc: the cheapest feasible block on it, over
        // modulations and windows; valid because all coefficients are >= 0
        let nonneg = model.objective.iter().all(|c| *c >= 0.0);
        let mut arc_floor = vec![0.0f64; topo.num_arcs()];
        if nonneg {
            for (a, floor_slot) in arc_floor.iter_mut().enumerate() {
                let mut best = f64::INFINITY;
                for (mi, &rho) in model.hints.demand_slots.iter().enumerate() {
                    if rho > n {
                        continue;
                    }
                    for k in 1..=n + 1 - rho {
                        let cost: f64 = (k..k + rho)
                            .map(|t| model.objective[view.slot_var(ArcId(a), t, mi + 1).0 as usize])
                            .sum();
                        best = best.min(cost);
                    }
                }
                *floor_slot = if best.is_finite() { best } else { 0.0 };
            }
        }
        let min_arc_cost = arc_floor
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
            .max(0.0);

        // unweighted BFS distance to the destination for depth pruning
        let mut hops = vec![usize::MAX; topo.num_nodes()];
        let mut queue = std::collections::VecDeque::new();
        hops[model.hints.dest] = 0;
        queue.push_back(model.hints.dest);
        while let Some(node) = queue.pop_front() {
            for arc in topo.in_arcs(node) {
                let prev = topo.arc(*arc).from;
                if hops[prev] == usize::MAX {
                    hops[prev] = hops[node] + 1;
                    queue.push_back(prev);
                }
            }
        }

        // distance pruning: a candidate on path P carries a start variable
        // on every arc, so the distance rows reject P for modulation m once
        // path length exceeds reach[m]; past the largest usable reach no
        // modulation survives
        let max_reach = match &model.hints.reach_km {
            Some(reach) => reach
                .iter()
                .zip(&model.hints.demand_slots)
                .filter(|(_, &rho)| rho <= n)
                .map(|(d, _)| *d)
                .fold(f64::NEG_INFINITY, f64::max),
            None => f64::INFINITY,
        };
        let dist_to_dest = reverse_dijkstra(topo, model.hints.dest, |a| topo.arc(a).distance_km);

        // impairment pruning: every shared noise expression carries a
        // non-negative per-arc coefficient on the link variable (amplifier
        // noise at least), and a used slot's row tolerates at most
        // rhs - big-M of noise; summing per-arc minima along a path is a
        // sound lower bound on the noise of every slot
        let mut arc_noise_floor = vec![0.0f64; topo.num_arcs()];
        let mut noise_cap = f64::INFINITY;
        if !model.shared.is_empty() {
            let mut floor = vec![f64::INFINITY; topo.num_arcs()];
            for expr in &model.shared {
                for (v, c) in expr {
                    let idx = v.0 as usize;
                    if idx < topo.num_arcs() {
                        floor[idx] = floor[idx].min(*c);
                    }
                }
            }
            for (a, f) in floor.into_iter().enumerate() {
                arc_noise_floor[a] = if f.is_finite() { f.max(0.0) } else { 0.0 };
            }
            let mut cap = f64::NEG_INFINITY;
            for row in &model.rows {
                if row.shared.is_some() && row.terms.len() == 1 {
                    cap = cap.max(row.rhs - row.terms[0].1);
                }
            }
            if cap.is_finite() {
                noise_cap = cap;
            }
        }
        let noise_to_dest = reverse_dijkstra(topo, model.hints.dest, |a| arc_noise_floor[a.0]);

        BuiltinSearch {
            model,
            view,
            checker: LazyChecker::new(model),
            options: options.clone(),
            started: Instant::now(),
            best: None,
            candidates: 0,
            min_arc_cost: if min_arc_cost.is_finite() {
                min_arc_cost
            } else {
                0.0
            },
            arc_floor,
            hops_to_dest: hops,
            dist_to_dest,
            max_reach,
            arc_noise_floor,
            noise_to_dest,
            noise_cap,
            timed_out: false,
        }
    }

    fn out_of_budget(&mut self) -> bool {
        if self.timed_out {
            return true;
        }
        if self.started.elapsed() >= self.options.time_limit {
            self.timed_out = true;
            return true;
        }
        false
    }

    fn try_path(&mut self, path: &[usize]) -> Result<()> {
        let hints = &self.model.hints;
        let topo = &hints.topology;
        let n = hints.n_slots;
        let distance: f64 = path
            .windows(2)
            .map(|w| topo.arc(topo.arc_between(w[0], w[1]).unwrap()).distance_km)
            .sum();
        for (mi, &rho) in hints.demand_slots.iter().enumerate() {
            if rho > n {
                continue;
            }
            if let Some(reach) = &hints.reach_km {
                if distance > reach[mi] + crate::model::FEASIBILITY_TOL {
                    continue;
                }
            }
            for k in 1..=n + 1 - rho {
                self.candidates += 1;
                if self.candidates > self.options.candidate_cap {
                    return Err(Error::TooLarge(format!(
                        "candidate cap {} exceeded",
                        self.options.candidate_cap
                    )));
                }
                let assignment = candidate_assignment(self.model, &self.view, path, mi + 1, k);
                let objective = self.model.objective_value(&assignment);
                if let Some((best_obj, _)) = &self.best {
                    if objective >= *best_obj {
                        continue;
                    }
                }
                if self.checker.is_feasible(&assignment.ones) {
                    self.best = Some((objective, assignment));
                }
            }
        }
        Ok(())
    }

    fn dfs(
        &mut self,
        node: usize,
        floor_so_far: f64,
        dist_so_far: f64,
        noise_so_far: f64,
        path: &mut Vec<usize>,
        on_path: &mut Vec<bool>,
    ) -> Result<()> {
        if self.out_of_budget() {
            return Ok(());
        }
        if node == self.model.hints.dest {
            self.try_path(&path.clone())?;
            return Ok(());
        }
        let topo = self.model.hints.topology.clone();
        for arc in topo.out_arcs(node) {
            let fiber = topo.arc(*arc);
            if on_path[fiber.to] {
                continue;
            }
            if self.hops_to_dest[fiber.to] == usize::MAX {
                continue;
            }
            let next_dist = dist_so_far + fiber.distance_km;
            if next_dist + self.dist_to_dest[fiber.to]
                > self.max_reach + crate::model::FEASIBILITY_TOL
            {
                continue;
            }
            let next_noise = noise_so_far + self.arc_noise_floor[arc.0];
            if next_noise + self.noise_to_dest[fiber.to]
                > self.noise_cap + crate::model::FEASIBILITY_TOL
            {
                continue;
            }
            let next_floor = floor_so_far + self.arc_floor[arc.0];
            if let Some((best_obj, _)) = &self.best {
                let remaining = self.hops_to_dest[fiber.to];
                let bound = next_floor + remaining as f64 * self.min_arc_cost;
                if bound >= *best_obj {
                    continue;
                }
            }
            on_path[fiber.to] = true;
            path.push(fiber.to);
            self.dfs(fiber.to, next_floor, next_dist, next_noise, path, on_path)?;
            path.pop();
            on_path[fiber.to] = false;
        }
        Ok(())
    }
}

/// Cheapest completion cost from every node to `dest` under a non-negative
/// per-arc weight.
fn reverse_dijkstra(
    topo: &crate::network::Topology,
    dest: usize,
    weight: impl Fn(ArcId) -> f64,
) -> Vec<f64> {
    #[derive(PartialEq)]
    struct Entry(f64, usize);
    impl Eq for Entry {}
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
        }
    }
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    let mut dist = vec![f64::INFINITY; topo.num_nodes()];
    dist[dest] = 0.0;
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(Entry(0.0, dest));
    let mut settled = vec![false; topo.num_nodes()];
    while let Some(Entry(_, node)) = heap.pop() {
        if settled[node] {
            continue;
        }
        settled[node] = true;
        for arc in topo.in_arcs(node) {
            let prev = topo.arc(*arc).from;
            let cand = dist[node] + weight(*arc);
            if cand < dist[prev] {
                dist[prev] = cand;
                heap.push(Entry(cand, prev));
            }
        }
    }
    dist
}

fn builtin_solve(model: &IlpModel, options: &SolveOptions) -> Result<SolveResult> {
    let started = Instant::now();
    let mut search = BuiltinSearch::new(model, options);

    if let Some(paths) = model.hints.restricted_paths.clone() {
        for p in &paths {
            if search.out_of_budget() {
                break;
            }
            search.try_path(p)?;
        }
    } else {
        let source = model.hints.source;
        let mut on_path = vec![false; model.hints.topology.num_nodes()];
        on_path[source] = true;
        let mut path = vec![source];
        search.dfs(source, 0.0, 0.0, 0.0, &mut path, &mut on_path)?;
    }

    let candidates = search.candidates;
    let timed_out = search.timed_out;
    let result = match search.best {
        Some((objective, assignment)) => SolveResult {
            status: if timed_out {
                SolveStatus::Timeout
            } else {
                SolveStatus::Optimal
            },
            objective,
            assignment,
            solve_time: started.elapsed(),
            candidates_examined: candidates,
        },
        None => SolveResult {
            status: if timed_out {
                SolveStatus::Timeout
            } else {
                SolveStatus::Infeasible
            },
            objective: f64::NAN,
            assignment: Assignment::default(),
            solve_time: started.elapsed(),
            candidates_examined: candidates,
        },
    };
    Ok(result)
}

// ---------------------------------------------------------------------------
// external command backend

static SOLVE_COUNTER: AtomicU64 = AtomicU64::new(0);

fn command_solve(
    model: &IlpModel,
    template: &str,
    workdir: Option<&std::path::Path>,
    keep_files: bool,
    options: &SolveOptions,
) -> Result<SolveResult> {
    let started = Instant::now();
    let serial = SOLVE_COUNTER.fetch_add(1, Ordering::Relaxed);
    let dir = workdir.map(PathBuf::from).unwrap_or_else(|| {
        std::env::temp_dir().join(format!("abacus-eon-{}-{serial}", std::process::id()))
    });
    std::fs::create_dir_all(&dir)?;
    let model_path = dir.join(format!("model-{serial}.lp"));
    let solution_path = dir.join(format!("solution-{serial}.txt"));
    std::fs::write(&model_path, lp::write_lp(model))?;

    let cmd_line = template
        .replace("{model}", &model_path.display().to_string())
        .replace("{solution}", &solution_path.display().to_string())
        .replace(
            "{time_limit}",
            &options.time_limit.as_secs().max(1).to_string(),
        );
    let mut parts = cmd_line.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| Error::SolverUnavailable("empty solver command".into()))?;
    let output = std::process::Command::new(program)
        .args(parts)
        .output()
        .map_err(|e| Error::SolverUnavailable(format!("cannot run `{program}`: {e}")))?;
    if !output.status.success() {
        return Err(Error::SolverUnavailable(format!(
            "solver command failed ({}): {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }

    let text = std::fs::read_to_string(&solution_path)
        .map_err(|e| Error::SolverUnavailable(format!("solver produced no solution file: {e}")))?;
    let (status, _reported_obj, assignment) = lp::parse_solution(&text, model)?;

    if !keep_files {
        let _ = std::fs::remove_file(&model_path);
        let _ = std::fs::remove_file(&solution_path);
        if workdir.is_none() {
            let _ = std::fs::remove_dir(&dir);
        }
    }

    let status = match status.as_str() {
        "optimal" => SolveStatus::Optimal,
        "infeasible" => SolveStatus::Infeasible,
        "timeout" => SolveStatus::Timeout,
        other => {
            return Err(Error::SolverUnavailable(format!(
                "unknown solver status `{other}`"
            )))
        }
    };
    if status == SolveStatus::Optimal {
        let violations = model.verify(&assignment);
        if !violations.is_empty() {
            return Err(Error::SolverUnavailable(format!(
                "external solution violates {} rows (first: {:?})",
                violations.len(),
                violations[0]
            )));
        }
    }
    let objective = if status == SolveStatus::Infeasible {
        f64::NAN
    } else {
        model.objective_value(&assignment)
    };
    Ok(SolveResult {
        status,
        objective,
        assignment,
        solve_time: started.elapsed(),
        candidates_examined: 0,
    })
}

// ---------------------------------------------------------------------------
// brute-force oracle

/// Feasibility rule the oracle applies to a candidate.
#[derive(Debug, Clone, Copy)]
pub enum QotRule<'a> {
    /// Distance-adaptive reach per modulation, no impairment math.
    Reach(&'a [f64]),
    /// Full impairment evaluation against the given parameters.
    Pli(&'a PliParams),
}

/// Oracle inputs: network snapshot plus the experiment mode.
#[derive(Clone)]
pub struct OracleInstance<'a> {
    pub state: &'a NetworkState,
    pub mods: &'a ModulationTable,
    pub objective: ObjectiveKind,
    pub rule: QotRule<'a>,
    /// Candidate paths when routing is restricted.
    pub restricted: Option<&'a [Vec<usize>]>,
    /// Explosion guard over (path, modulation, start) triples.
    pub candidate_cap: u64,
}

/// The oracle's winning candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleChoice {
    pub path: Vec<usize>,
    pub modulation: usize,
    pub start_slot: usize,
    pub objective: f64,
}

/// Exhaustive enumeration over (simple path, modulation, start slot),
/// scored with the closed-form objective: slot count plus log-index sum for
/// the balanced objective, zero-based index sum for the linear one.
/// `None` means the request is blocked.
pub fn brute_force_rmlsa(
    instance: &OracleInstance,
    source: usize,
    dest: usize,
    rate_gbps: f64,
) -> Result<Option<OracleChoice>> {
    let state = instance.state;
    let topo = &state.topology;
    let n = state.n_slots();
    let owned_paths;
    let paths: &[Vec<usize>] = match instance.restricted {
        Some(p) => p,
        None => {
            owned_paths = all_simple_paths(topo, source, dest, 1_000_000)?;
            &owned_paths
        }
    };

    let pli = match instance.rule {
        QotRule::Pli(params) => Some((
            PliCoefficients::compute(state, params),
            SinrLimits::from_table(instance.mods),
        )),
        QotRule::Reach(_) => None,
    };

    let mut examined = 0u64;
    let mut best: Option<OracleChoice> = None;
    let ln_n = (n as f64).ln();

    for path in paths {
        let arcs = topo.path_arcs(path)?;
        let distance: f64 = arcs.iter().map(|a| topo.arc(*a).distance_km).sum();
        let hops = arcs.len() as f64;
        for m in 1..=instance.mods.count() {
            let rho = slots_required(rate_gbps, m)?;
            if rho > n {
                continue;
            }
            if let QotRule::Reach(reach) = instance.rule {
                if distance > reach[m - 1] + crate::model::FEASIBILITY_TOL {
                    continue;
                }
            }
            for k in 1..=n + 1 - rho {
                examined += 1;
                if examined > instance.candidate_cap {
                    return Err(Error::TooLarge(format!(
                        "oracle candidate cap {} exceeded",
                        instance.candidate_cap
                    )));
                }
                if !arcs
                    .iter()
                    .all(|a| state.spectrum().arc(*a).is_free_range(k, rho))
                {
                    continue;
                }
                if let Some((coeffs, limits)) = &pli {
                    let limit = limits.inv_threshold[m - 1];
                    let inv = coeffs.candidate_inv_sinr(&arcs, k, rho);
                    if inv.iter().any(|v| *v > limit + crate::model::FEASIBILITY_TOL) {
                        continue;
                    }
                    // the big-M rows also bound unused (slot, modulation)
                    // pairs on the chosen path
                    let tightest =
                        limits.inv_threshold.iter().cloned().fold(f64::INFINITY, f64::min);
                    if coeffs.max_noise_ratio(&arcs, k, rho)
                        > limits.big_m + tightest + crate::model::FEASIBILITY_TOL
                    {
                        continue;
                    }
                    let mut harms_existing = false;
                    for record in state.records() {
                        let delta = coeffs.increments_for(topo, record, &arcs, k, rho);
                        let rec_limit = limits.inv_threshold[record.modulation - 1];
                        if record
                            .inv_sinr
                            .iter()
                            .zip(&delta)
                            .any(|(inv, d)| inv + d > rec_limit + crate::model::FEASIBILITY_TOL)
                        {
                            harms_existing = true;
                            break;
                        }
                    }
                    if harms_existing {
                        continue;
                    }
                }

                let objective = match instance.objective {
                    ObjectiveKind::Abacus => {
                        let log_sum: f64 = (k..k + rho).map(|t| (t as f64).ln() / ln_n).sum();
                        hops * (rho as f64 + log_sum)
                    }
                    ObjectiveKind::Jo => {
                        let idx_sum: f64 = (k..k + rho).map(|t| (t - 1) as f64).sum();
                        hops * idx_sum
                    }
                };
                let better = match &best {
                    None => true,
                    Some(b) => objective < b.objective,
                };
                if better {
                    best = Some(OracleChoice {
                        path: path.clone(),
                        modulation: m,
                        start_slot: k,
                        objective,
                    });
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelBuilder;
    use crate::network::Topology;
    use std::sync::Arc as Rc;

    fn simple_model() -> IlpModel {
        let topo = Rc::new(Topology::from_edges(&[(1, 2, 100.0)], &[]).unwrap());
        let mods = crate::network::ModulationTable::new(vec![crate::network::ModulationLevel {
            name: "bpsk".into(),
            sinr_threshold_db: 12.6,
            reach_km: 4000.0,
        }])
        .unwrap();
        let mut b = ModelBuilder::new(topo.clone(), 4, &mods, 0, 1, 60.0).unwrap();
        b.objective_abacus().unwrap();
        b.linkage_constraints();
        b.path_constraints();
        b.spectrum_constraints().unwrap();
        let spectrum = crate::network::SpectrumState::new(topo.num_arcs(), 4);
        b.nonoverlap_and_capacity(&spectrum).unwrap();
        b.finish()
    }

    #[test]
    fn two_node_model_solves_to_first_slots() {
        let model = simple_model();
        let result = solve(&model, &Backend::Builtin, &SolveOptions::default()).unwrap();
        assert_eq!(result.status, SolveStatus::Optimal);
        // slots {1,2} on the single arc: 2 + (ln1 + ln2)/ln4
        let expect = 2.0 + 2f64.ln() / 4f64.ln();
        assert!((result.objective - expect).abs() < 1e-9);
        assert!(model.verify(&result.assignment).is_empty());
        let decoded = crate::model::decode_assignment(&model, &result.assignment, 60.0).unwrap();
        assert_eq!(decoded.path, vec![0, 1]);
        assert_eq!(decoded.start_slot, 1);
        assert_eq!(decoded.num_slots, 2);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut model = simple_model();
        // force X_0 = 1 and X_0 = 0 simultaneously
        let v = VarId(0);
        model.rows.push(crate::model::Row {
            terms: vec![(v, 1.0)],
            shared: None,
            cmp: crate::model::Cmp::Ge,
            rhs: 1.0,
            tag: crate::model::RowTag::Parsed,
        });
        model.rows.push(crate::model::Row {
            terms: vec![(v, 1.0)],
            shared: None,
            cmp: crate::model::Cmp::Le,
            rhs: 0.0,
            tag: crate::model::RowTag::Parsed,
        });
        let result = solve(&model, &Backend::Builtin, &SolveOptions::default()).unwrap();
        assert_eq!(result.status, SolveStatus::Infeasible);
    }

    #[test]
    fn oracle_on_empty_two_node_network() {
        let topo = Rc::new(Topology::from_edges(&[(1, 2, 100.0)], &[]).unwrap());
        let state = NetworkState::new(topo, 4);
        let mods = crate::network::ModulationTable::new(vec![crate::network::ModulationLevel {
            name: "bpsk".into(),
            sinr_threshold_db: 12.6,
            reach_km: 4000.0,
        }])
        .unwrap();
        let reach = mods.reach_km();
        let instance = OracleInstance {
            state: &state,
            mods: &mods,
            objective: ObjectiveKind::Abacus,
            rule: QotRule::Reach(&reach),
            restricted: None,
            candidate_cap: 10_000,
        };
        let choice = brute_force_rmlsa(&instance, 0, 1, 30.0).unwrap().unwrap();
        assert_eq!(choice.path, vec![0, 1]);
        assert_eq!(choice.start_slot, 1);
        assert_eq!(choice.modulation, 1);
    }
}
