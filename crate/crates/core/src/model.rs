//! Solver-neutral integer-program representation and the joint
//! routing / modulation / spectrum-assignment model builder.
//!
//! One admission request becomes one binary program over three variable
//! families per directed arc:
//!
//! * `X_(i,j)` — the arc lies on the chosen path,
//! * `X_(i,j,k,m)` — slot `k` is used on the arc with modulation `m`,
//! * `Z_(i,j,k,m)` — slot `k` is the first slot of the block on the arc.
//!
//! Start variables exist only where a block of the required length fits
//! (`k <= N - rho_m + 1`); the pruned domain is solution-preserving and
//! shrinks the model.
//!
//! Impairment rows share one per-slot noise expression between all arcs and
//! modulations, kept in a shared-expression table instead of being copied
//! into every row.

use std::collections::HashMap;
use std::sync::Arc as Rc;

use crate::error::{Error, Result};
use crate::network::{
    slots_required, ArcId, ConnectionRecord, ModulationTable, NetworkState, SpectrumState, Topology,
};
use crate::pli::{PliCoefficients, SinrLimits};

/// Absolute residual tolerance when checking a constraint row.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Index of a variable inside one [`IlpModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

/// What a variable stands for. Slot and modulation indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Link { arc: ArcId },
    Slot { arc: ArcId, k: usize, m: usize },
    Start { arc: ArcId, k: usize, m: usize },
    PathChoice { index: usize },
}

impl VarKind {
    /// Canonical text name, stable across the LP writer and parser.
    pub fn name(&self, topology: &Topology) -> String {
        let arc_name = |arc: &ArcId| {
            let f = topology.arc(*arc);
            (topology.label(f.from), topology.label(f.to))
        };
        match self {
            VarKind::Link { arc } => {
                let (u, v) = arc_name(arc);
                format!("X_{u}_{v}")
            }
            VarKind::Slot { arc, k, m } => {
                let (u, v) = arc_name(arc);
                format!("XS_{u}_{v}_{k}_{m}")
            }
            VarKind::Start { arc, k, m } => {
                let (u, v) = arc_name(arc);
                format!("ZS_{u}_{v}_{k}_{m}")
            }
            VarKind::PathChoice { index } => format!("PATH_{index}"),
        }
    }

    /// Inverse of [`VarKind::name`].
    pub fn parse(name: &str, topology: &Topology) -> Result<VarKind> {
        let err = || Error::parse(format!("unrecognized variable `{name}`"));
        let fields: Vec<&str> = name.split('_').collect();
        let arc_of = |u: &str, v: &str| -> Result<ArcId> {
            let ui = topology.index_of(u.parse().map_err(|_| err())?)?;
            let vi = topology.index_of(v.parse().map_err(|_| err())?)?;
            topology.arc_between(ui, vi).ok_or_else(err)
        };
        match fields.as_slice() {
            ["X", u, v] => Ok(VarKind::Link { arc: arc_of(u, v)? }),
            ["XS", u, v, k, m] => Ok(VarKind::Slot {
                arc: arc_of(u, v)?,
                k: k.parse().map_err(|_| err())?,
                m: m.parse().map_err(|_| err())?,
            }),
            ["ZS", u, v, k, m] => Ok(VarKind::Start {
                arc: arc_of(u, v)?,
                k: k.parse().map_err(|_| err())?,
                m: m.parse().map_err(|_| err())?,
            }),
            ["PATH", r] => Ok(VarKind::PathChoice {
                index: r.parse().map_err(|_| err())?,
            }),
            _ => Err(err()),
        }
    }
}

/// Row comparator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

impl Cmp {
    pub fn symbol(&self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "=",
        }
    }

    /// True when `lhs cmp rhs` holds within [`FEASIBILITY_TOL`].
    pub fn holds(&self, lhs: f64, rhs: f64) -> bool {
        match self {
            Cmp::Le => lhs <= rhs + FEASIBILITY_TOL,
            Cmp::Ge => lhs >= rhs - FEASIBILITY_TOL,
            Cmp::Eq => (lhs - rhs).abs() <= FEASIBILITY_TOL,
        }
    }
}

/// Which constraint family a row belongs to; used for counting and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowTag {
    Linkage,
    SourceOut,
    DestIn,
    FlowConservation,
    OneOutgoing,
    OneIncoming,
    NoOpposite,
    StartUnique,
    Contiguity,
    SlotCap,
    StartContinuity,
    NonOverlap,
    LinkCapacity,
    Reach,
    SinrCandidate,
    SinrExisting,
    PathChoice,
    /// Rows read back from LP text, where the original family is unknown.
    Parsed,
}

/// One linear constraint. `shared` points into the model's shared-expression
/// table; the row's left-hand side is `terms + shared_expr`.
#[derive(Debug, Clone)]
pub struct Row {
    pub terms: Vec<(VarId, f64)>,
    pub shared: Option<u32>,
    pub cmp: Cmp,
    pub rhs: f64,
    pub tag: RowTag,
}

/// Everything the structured exact backend needs to enumerate candidate
/// solutions of a model without re-deriving it from the builder inputs.
#[derive(Debug, Clone)]
pub struct StructuralHints {
    pub topology: Rc<Topology>,
    pub source: usize,
    pub dest: usize,
    pub n_slots: usize,
    /// Slots required per modulation level (index `m - 1`).
    pub demand_slots: Vec<usize>,
    /// Candidate node paths when routing is restricted; `None` for the joint
    /// model where all simple paths compete.
    pub restricted_paths: Option<Vec<Vec<usize>>>,
    /// Per-modulation reach when the distance rows are present, for search
    /// pruning that mirrors exactly what those rows reject.
    pub reach_km: Option<Vec<f64>>,
    pub pli: bool,
}

/// A sparse set of binary variables fixed to one; everything else is zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment {
    pub ones: Vec<VarId>,
}

impl Assignment {
    pub fn new(mut ones: Vec<VarId>) -> Self {
        ones.sort_unstable();
        ones.dedup();
        Assignment { ones }
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.ones.binary_search(&v).is_ok()
    }
}

/// A violated row, reported by the standalone checker.
#[derive(Debug, Clone)]
pub struct Violation {
    pub row: usize,
    pub tag: RowTag,
    pub lhs: f64,
    pub cmp: Cmp,
    pub rhs: f64,
}

/// Binary linear program with a minimization objective.
#[derive(Debug, Clone)]
pub struct IlpModel {
    vars: Vec<VarKind>,
    lookup: HashMap<VarKind, VarId>,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub shared: Vec<Vec<(VarId, f64)>>,
    pub hints: StructuralHints,
}

/// The canonical variable order every model uses: link variables in arc
/// order, then slot variables by (arc, k, m), then the pruned start
/// variables by (arc, m, k), then path selectors.
pub(crate) fn canonical_variables(
    topology: &Topology,
    n_slots: usize,
    demand_slots: &[usize],
    num_path_choices: usize,
) -> Vec<VarKind> {
    let mut vars = Vec::new();
    for a in 0..topology.num_arcs() {
        vars.push(VarKind::Link { arc: ArcId(a) });
    }
    for a in 0..topology.num_arcs() {
        for k in 1..=n_slots {
            for m in 1..=demand_slots.len() {
                vars.push(VarKind::Slot {
                    arc: ArcId(a),
                    k,
                    m,
                });
            }
        }
    }
    for a in 0..topology.num_arcs() {
        for (mi, &rho) in demand_slots.iter().enumerate() {
            for k in 1..=(n_slots + 1).saturating_sub(rho) {
                vars.push(VarKind::Start {
                    arc: ArcId(a),
                    k,
                    m: mi + 1,
                });
            }
        }
    }
    for i in 0..num_path_choices {
        vars.push(VarKind::PathChoice { index: i });
    }
    vars
}

impl IlpModel {
    pub(crate) fn from_parts(
        vars: Vec<VarKind>,
        lookup: HashMap<VarKind, VarId>,
        objective: Vec<f64>,
        rows: Vec<Row>,
        shared: Vec<Vec<(VarId, f64)>>,
        hints: StructuralHints,
    ) -> IlpModel {
        IlpModel {
            vars,
            lookup,
            objective,
            rows,
            shared,
            hints,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_kind(&self, v: VarId) -> VarKind {
        self.vars[v.0 as usize]
    }

    pub fn var_id(&self, kind: VarKind) -> Option<VarId> {
        self.lookup.get(&kind).copied()
    }

    pub fn var_kinds(&self) -> &[VarKind] {
        &self.vars
    }

    pub fn count_rows(&self, tag: RowTag) -> usize {
        self.rows.iter().filter(|r| r.tag == tag).count()
    }

    /// Objective value of an assignment.
    pub fn objective_value(&self, assignment: &Assignment) -> f64 {
        assignment
            .ones
            .iter()
            .map(|v| self.objective[v.0 as usize])
            .sum()
    }

    /// Evaluates every row of the model against an assignment and returns
    /// the violations. Independent of any solving path.
    pub fn verify(&self, assignment: &Assignment) -> Vec<Violation> {
        let mut dense = vec![false; self.vars.len()];
        for v in &assignment.ones {
            dense[v.0 as usize] = true;
        }
        let shared_vals: Vec<f64> = self
            .shared
            .iter()
            .map(|expr| {
                expr.iter()
                    .filter(|(v, _)| dense[v.0 as usize])
                    .map(|(_, c)| c)
                    .sum()
            })
            .collect();
        let mut violations = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            let mut lhs: f64 = row
                .terms
                .iter()
                .filter(|(v, _)| dense[v.0 as usize])
                .map(|(_, c)| c)
                .sum();
            if let Some(s) = row.shared {
                lhs += shared_vals[s as usize];
            }
            if !row.cmp.holds(lhs, row.rhs) {
                violations.push(Violation {
                    row: i,
                    tag: row.tag,
                    lhs,
                    cmp: row.cmp,
                    rhs: row.rhs,
                });
            }
        }
        violations
    }
}

/// Incrementally assembles the admission model for one request.
#[derive(Debug)]
pub struct ModelBuilder {
    topology: Rc<Topology>,
    mods: ModulationTable,
    n_slots: usize,
    source: usize,
    dest: usize,
    demand_slots: Vec<usize>,
    vars: Vec<VarKind>,
    lookup: HashMap<VarKind, VarId>,
    objective: Vec<f64>,
    rows: Vec<Row>,
    shared: Vec<Vec<(VarId, f64)>>,
    restricted_paths: Option<Vec<Vec<usize>>>,
    reach_km: Option<Vec<f64>>,
    pli: bool,
    // dense index bases for O(1) variable lookup
    slot_base: usize,
    start_base: usize,
    start_m_offset: Vec<usize>,
    start_per_arc: usize,
}

impl ModelBuilder {
    /// Declares the full variable set for a request of `rate_gbps` from
    /// `source` to `dest`. Fails fast when the demand cannot fit on a link
    /// with any modulation.
    pub fn new(
        topology: Rc<Topology>,
        n_slots: usize,
        mods: &ModulationTable,
        source: usize,
        dest: usize,
        rate_gbps: f64,
    ) -> Result<Self> {
        if source == dest {
            return Err(Error::invalid("source and destination must differ"));
        }
        if source >= topology.num_nodes() || dest >= topology.num_nodes() {
            return Err(Error::invalid("endpoint outside the topology"));
        }
        let demand_slots: Vec<usize> = (1..=mods.count())
            .map(|m| slots_required(rate_gbps, m))
            .collect::<Result<_>>()?;
        if demand_slots.iter().all(|&rho| rho > n_slots) {
            return Err(Error::InfeasibleDemand(format!(
                "{rate_gbps} Gbps needs more than {n_slots} slots at every modulation"
            )));
        }

        let num_arcs = topology.num_arcs();
        let m_count = mods.count();
        let vars = canonical_variables(&topology, n_slots, &demand_slots, 0);
        let slot_base = num_arcs;
        let start_base = num_arcs + num_arcs * n_slots * m_count;
        let valid_starts: Vec<usize> = demand_slots
            .iter()
            .map(|&rho| (n_slots + 1).saturating_sub(rho))
            .collect();
        let mut start_m_offset = vec![0usize; m_count];
        let mut acc = 0usize;
        for m in 0..m_count {
            start_m_offset[m] = acc;
            acc += valid_starts[m];
        }
        let start_per_arc = acc;

        let lookup: HashMap<VarKind, VarId> = vars
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, VarId(i as u32)))
            .collect();
        let objective = vec![0.0; vars.len()];

        Ok(ModelBuilder {
            topology,
            mods: mods.clone(),
            n_slots,
            source,
            dest,
            demand_slots,
            vars,
            lookup,
            objective,
            rows: Vec::new(),
            shared: Vec::new(),
            restricted_paths: None,
            reach_km: None,
            pli: false,
            slot_base,
            start_base,
            start_m_offset,
            start_per_arc,
        })
    }

    pub fn demand_slots(&self) -> &[usize] {
        &self.demand_slots
    }

    #[inline]
    pub fn link_var(&self, arc: ArcId) -> VarId {
        VarId(arc.0 as u32)
    }

    #[inline]
    pub fn slot_var(&self, arc: ArcId, k: usize, m: usize) -> VarId {
        debug_assert!(k >= 1 && k <= self.n_slots && m >= 1 && m <= self.mods.count());
        let m_count = self.mods.count();
        VarId(
            (self.slot_base + arc.0 * self.n_slots * m_count + (k - 1) * m_count + (m - 1)) as u32,
        )
    }

    /// Start variable, if slot `k` leaves room for the block of level `m`.
    #[inline]
    pub fn start_var(&self, arc: ArcId, k: usize, m: usize) -> Option<VarId> {
        let valid = (self.n_slots + 1).saturating_sub(self.demand_slots[m - 1]);
        if k < 1 || k > valid {
            return None;
        }
        Some(VarId(
            (self.start_base + arc.0 * self.start_per_arc + self.start_m_offset[m - 1] + (k - 1))
                as u32,
        ))
    }

    fn valid_starts(&self, m: usize) -> usize {
        (self.n_slots + 1).saturating_sub(self.demand_slots[m - 1])
    }

    fn push(&mut self, tag: RowTag, terms: Vec<(VarId, f64)>, cmp: Cmp, rhs: f64) {
        self.rows.push(Row {
            terms,
            shared: None,
            cmp,
            rhs,
            tag,
        });
    }

    /// Objective `sum (log_N k + 1) * X_(i,j,k,m)`: the unit part counts
    /// slots used over all links, the log part steers equal-slot-count
    /// solutions toward low indices. Coefficients stay in [1, 2].
    pub fn objective_abacus(&mut self) -> Result<&mut Self> {
        if self.n_slots < 2 {
            return Err(Error::invalid(
                "log-weighted objective needs at least 2 slots",
            ));
        }
        let ln_n = (self.n_slots as f64).ln();
        for a in 0..self.topology.num_arcs() {
            for k in 1..=self.n_slots {
                let coeff = (k as f64).ln() / ln_n + 1.0;
                for m in 1..=self.mods.count() {
                    let v = self.slot_var(ArcId(a), k, m);
                    self.objective[v.0 as usize] = coeff;
                }
            }
        }
        Ok(self)
    }

    /// Linear-sum objective of the comparison scheme: slot `k` costs its
    /// zero-based index, so the weight of `X_(i,j,k,m)` is `k - 1`.
    pub fn objective_jo(&mut self) -> &mut Self {
        for a in 0..self.topology.num_arcs() {
            for k in 1..=self.n_slots {
                for m in 1..=self.mods.count() {
                    let v = self.slot_var(ArcId(a), k, m);
                    self.objective[v.0 as usize] = (k - 1) as f64;
                }
            }
        }
        self
    }

    /// `Z <= X_slot <= X_link` for every arc, slot and modulation.
    pub fn linkage_constraints(&mut self) -> &mut Self {
        for a in 0..self.topology.num_arcs() {
            let arc = ArcId(a);
            let link = self.link_var(arc);
            for k in 1..=self.n_slots {
                for m in 1..=self.mods.count() {
                    let slot = self.slot_var(arc, k, m);
                    if let Some(start) = self.start_var(arc, k, m) {
                        self.push(
                            RowTag::Linkage,
                            vec![(start, 1.0), (slot, -1.0)],
                            Cmp::Le,
                            0.0,
                        );
                    }
                    self.push(
                        RowTag::Linkage,
                        vec![(slot, 1.0), (link, -1.0)],
                        Cmp::Le,
                        0.0,
                    );
                }
            }
        }
        self
    }

    /// Unit out-flow at the source, unit in-flow at the destination, flow
    /// conservation at intermediates, at most one outgoing/incoming arc per
    /// node and no use of both directions of a fiber.
    pub fn path_constraints(&mut self) -> &mut Self {
        let topo = self.topology.clone();
        let (s, d) = (self.source, self.dest);

        // Link variable ids equal the arc index by construction.
        fn out_terms(topo: &Topology, node: usize, skip_to: Option<usize>) -> Vec<(VarId, f64)> {
            topo.out_arcs(node)
                .iter()
                .filter(|a| Some(topo.arc(**a).to) != skip_to)
                .map(|a| (VarId(a.0 as u32), 1.0))
                .collect()
        }
        fn in_terms(topo: &Topology, node: usize, skip_from: Option<usize>) -> Vec<(VarId, f64)> {
            topo.in_arcs(node)
                .iter()
                .filter(|a| Some(topo.arc(**a).from) != skip_from)
                .map(|a| (VarId(a.0 as u32), 1.0))
                .collect()
        }

        self.push(RowTag::SourceOut, out_terms(&topo, s, None), Cmp::Eq, 1.0);
        self.push(RowTag::DestIn, in_terms(&topo, d, None), Cmp::Eq, 1.0);

        for j in 0..topo.num_nodes() {
            if j == s || j == d {
                continue;
            }
            let mut terms = in_terms(&topo, j, Some(d));
            for (v, c) in out_terms(&topo, j, Some(s)) {
                terms.push((v, -c));
            }
            self.push(RowTag::FlowConservation, terms, Cmp::Eq, 0.0);
        }
        for i in 0..topo.num_nodes() {
            if i != d {
                self.push(RowTag::OneOutgoing, out_terms(&topo, i, None), Cmp::Le, 1.0);
            }
        }
        for j in 0..topo.num_nodes() {
            if j != s {
                self.push(RowTag::OneIncoming, in_terms(&topo, j, None), Cmp::Le, 1.0);
            }
        }
        for a in 0..topo.num_arcs() {
            let f = topo.arc(ArcId(a));
            if f.from < f.to {
                let rev = topo.reverse(ArcId(a));
                self.push(
                    RowTag::NoOpposite,
                    vec![(self.link_var(ArcId(a)), 1.0), (self.link_var(rev), 1.0)],
                    Cmp::Le,
                    1.0,
                );
            }
        }
        self
    }

    /// Spectrum assignment: one start on the first hop, the required number
    /// of contiguous slots wherever a block starts, a per-link cap at
    /// `rho_m`, and start-slot continuity along the path.
    pub fn spectrum_constraints(&mut self) -> Result<&mut Self> {
        if self.demand_slots.iter().all(|&rho| rho > self.n_slots) {
            return Err(Error::InfeasibleDemand(
                "demand exceeds link capacity at every modulation".into(),
            ));
        }
        let topo = self.topology.clone();
        let (s, d) = (self.source, self.dest);

        let mut start_terms = Vec::new();
        for a in topo.out_arcs(s) {
            for m in 1..=self.mods.count() {
                for k in 1..=self.valid_starts(m) {
                    start_terms.push((self.start_var(*a, k, m).unwrap(), 1.0));
                }
            }
        }
        self.push(RowTag::StartUnique, start_terms, Cmp::Eq, 1.0);

        for a in 0..topo.num_arcs() {
            let arc = ArcId(a);
            for m in 1..=self.mods.count() {
                let rho = self.demand_slots[m - 1];
                for k in 1..=self.valid_starts(m) {
                    let start = self.start_var(arc, k, m).unwrap();
                    let mut terms: Vec<(VarId, f64)> = (k..k + rho)
                        .map(|t| (self.slot_var(arc, t, m), 1.0))
                        .collect();
                    terms.push((start, -(rho as f64)));
                    self.push(RowTag::Contiguity, terms, Cmp::Ge, 0.0);
                }
                let cap_terms: Vec<(VarId, f64)> = (1..=self.n_slots)
                    .map(|k| (self.slot_var(arc, k, m), 1.0))
                    .collect();
                self.push(RowTag::SlotCap, cap_terms, Cmp::Le, rho as f64);
            }
        }

        for j in 0..topo.num_nodes() {
            if j == s || j == d {
                continue;
            }
            for m in 1..=self.mods.count() {
                for k in 1..=self.valid_starts(m) {
                    let mut terms: Vec<(VarId, f64)> = Vec::new();
                    for a in topo.in_arcs(j) {
                        if topo.arc(*a).from != d {
                            terms.push((self.start_var(*a, k, m).unwrap(), 1.0));
                        }
                    }
                    for a in topo.out_arcs(j) {
                        if topo.arc(*a).to != s {
                            terms.push((self.start_var(*a, k, m).unwrap(), -1.0));
                        }
                    }
                    self.push(RowTag::StartContinuity, terms, Cmp::Eq, 0.0);
                }
            }
        }
        Ok(self)
    }

    /// Slots occupied by earlier connections stay off limits, at most one
    /// modulation per (arc, slot), and at most `N` slots per link.
    pub fn nonoverlap_and_capacity(&mut self, spectrum: &SpectrumState) -> Result<&mut Self> {
        if spectrum.n_slots() != self.n_slots {
            return Err(Error::invalid(
                "spectrum state dimension differs from the model",
            ));
        }
        for a in 0..self.topology.num_arcs() {
            let arc = ArcId(a);
            for k in 1..=self.n_slots {
                let occupied = spectrum.arc(arc).get(k);
                let terms: Vec<(VarId, f64)> = (1..=self.mods.count())
                    .map(|m| (self.slot_var(arc, k, m), 1.0))
                    .collect();
                self.push(
                    RowTag::NonOverlap,
                    terms,
                    Cmp::Le,
                    if occupied { 0.0 } else { 1.0 },
                );
            }
            let mut cap = Vec::with_capacity(self.n_slots * self.mods.count());
            for k in 1..=self.n_slots {
                for m in 1..=self.mods.count() {
                    cap.push((self.slot_var(arc, k, m), 1.0));
                }
            }
            self.push(RowTag::LinkCapacity, cap, Cmp::Le, self.n_slots as f64);
        }
        Ok(self)
    }

    /// Distance-adaptive reach for the impairment-free mode: the summed
    /// distance of start-carrying arcs (equal to the path length, since the
    /// start propagates along the whole path) may not exceed `D_m`.
    pub fn reach_constraint(&mut self, reach_km: &[f64]) -> Result<&mut Self> {
        if reach_km.len() != self.mods.count() {
            return Err(Error::invalid(
                "reach table length must match the modulation table",
            ));
        }
        let topo = self.topology.clone();
        for m in 1..=self.mods.count() {
            let mut terms = Vec::new();
            for a in 0..topo.num_arcs() {
                let dist = topo.arc(ArcId(a)).distance_km;
                for k in 1..=self.valid_starts(m) {
                    terms.push((self.start_var(ArcId(a), k, m).unwrap(), dist));
                }
            }
            self.push(RowTag::Reach, terms, Cmp::Le, reach_km[m - 1]);
        }
        self.reach_km = Some(reach_km.to_vec());
        Ok(self)
    }

    /// Impairment rows: per-slot SINR for the candidate (big-M gated by the
    /// slot variable) plus protection of every existing connection against
    /// the crosstalk and nonlinear-interference increments the candidate
    /// would add.
    pub fn pli_constraints(
        &mut self,
        coeffs: &PliCoefficients,
        limits: &SinrLimits,
        state: &NetworkState,
    ) -> Result<&mut Self> {
        if coeffs.n_slots != self.n_slots {
            return Err(Error::invalid(
                "impairment tables built for a different slot count",
            ));
        }
        if limits.inv_threshold.len() != self.mods.count() {
            return Err(Error::invalid(
                "SINR limit table length must match modulations",
            ));
        }
        let topo = self.topology.clone();
        let num_arcs = topo.num_arcs();
        let m_count = self.mods.count();

        // One shared noise expression per slot: crosstalk + span-scaled SCI
        // and cross-channel terms + amplifier noise, all divided by the
        // received channel power so rows compare against 1/SINR directly.
        let shared_base = self.shared.len();
        for k in 1..=self.n_slots {
            let mut expr: Vec<(VarId, f64)> = Vec::new();
            for a in 0..num_arcs {
                let arc = ArcId(a);
                let link_coeff = coeffs.xt_ratio[a][k - 1]
                    + coeffs.spans[a] * (coeffs.sci_ratio + coeffs.oc_ratio[a][k - 1])
                    + coeffs.ase_arc_ratio[a];
                expr.push((self.link_var(arc), link_coeff));
                for k2 in 1..=self.n_slots {
                    let kern = coeffs.spans[a] * coeffs.kernel_ratio[k.abs_diff(k2)];
                    if kern != 0.0 {
                        for m in 1..=m_count {
                            expr.push((self.slot_var(arc, k2, m), kern));
                        }
                    }
                }
            }
            self.shared.push(expr);
        }

        for a in 0..num_arcs {
            for k in 1..=self.n_slots {
                for m in 1..=m_count {
                    let slot = self.slot_var(ArcId(a), k, m);
                    self.rows.push(Row {
                        terms: vec![(slot, limits.big_m)],
                        shared: Some((shared_base + k - 1) as u32),
                        cmp: Cmp::Le,
                        rhs: limits.big_m + limits.inv_threshold[m - 1],
                        tag: RowTag::SinrCandidate,
                    });
                }
            }
        }

        // Existing-connection protection, one row per (record, slot).
        for record in state.records() {
            if record.inv_sinr.len() != record.num_slots {
                return Err(Error::invalid(format!(
                    "connection {} has no SINR snapshot; impairment mode needs one",
                    record.id
                )));
            }
            let rec_arcs = record.arcs(&topo);
            let limit = limits.inv_threshold[record.modulation - 1];
            for k in record.slots() {
                let mut acc: std::collections::BTreeMap<VarId, f64> = Default::default();
                for &ra in &rec_arcs {
                    let fiber = topo.arc(ra);
                    let reverse = topo.reverse(ra);
                    for &b in topo.in_arcs(fiber.from) {
                        if b == reverse || b == ra {
                            continue;
                        }
                        for m in 1..=m_count {
                            *acc.entry(self.slot_var(b, k, m)).or_insert(0.0) += coeffs.c_x_ratio;
                        }
                    }
                    for k2 in 1..=self.n_slots {
                        let kern = coeffs.spans[ra.0] * coeffs.kernel_ratio[k.abs_diff(k2)];
                        if kern != 0.0 {
                            for m in 1..=m_count {
                                *acc.entry(self.slot_var(ra, k2, m)).or_insert(0.0) += kern;
                            }
                        }
                    }
                }
                let inv = record.inv_sinr[k - record.start_slot];
                self.rows.push(Row {
                    terms: acc.into_iter().collect(),
                    shared: None,
                    cmp: Cmp::Le,
                    rhs: limit - inv,
                    tag: RowTag::SinrExisting,
                });
            }
        }
        self.pli = true;
        Ok(self)
    }

    /// Fixes routing to a candidate path set: a selector binary per path,
    /// exactly one selected, arcs outside every candidate forced to zero and
    /// the selected path's arcs forced on.
    pub fn restrict_to_paths(&mut self, paths: &[Vec<usize>]) -> Result<&mut Self> {
        if paths.is_empty() {
            return Err(Error::invalid(
                "path restriction needs at least one candidate",
            ));
        }
        let topo = self.topology.clone();
        let mut selectors = Vec::new();
        for (i, path) in paths.iter().enumerate() {
            if path.first() != Some(&self.source) || path.last() != Some(&self.dest) {
                return Err(Error::invalid(
                    "candidate path endpoints differ from the request",
                ));
            }
            topo.path_arcs(path)?;
            let kind = VarKind::PathChoice { index: i };
            let id = VarId(self.vars.len() as u32);
            self.vars.push(kind);
            self.lookup.insert(kind, id);
            self.objective.push(0.0);
            selectors.push(id);
        }

        self.push(
            RowTag::PathChoice,
            selectors.iter().map(|&v| (v, 1.0)).collect(),
            Cmp::Eq,
            1.0,
        );

        let mut covering: Vec<Vec<VarId>> = vec![Vec::new(); topo.num_arcs()];
        for (i, path) in paths.iter().enumerate() {
            for arc in topo.path_arcs(path)? {
                covering[arc.0].push(selectors[i]);
                self.push(
                    RowTag::PathChoice,
                    vec![(self.link_var(arc), 1.0), (selectors[i], -1.0)],
                    Cmp::Ge,
                    0.0,
                );
            }
        }
        for (a, sels) in covering.iter().enumerate() {
            let mut terms = vec![(self.link_var(ArcId(a)), 1.0)];
            for &sel in sels {
                terms.push((sel, -1.0));
            }
            self.push(RowTag::PathChoice, terms, Cmp::Le, 0.0);
        }

        self.restricted_paths = Some(paths.to_vec());
        Ok(self)
    }

    pub fn finish(self) -> IlpModel {
        IlpModel {
            vars: self.vars,
            lookup: self.lookup,
            objective: self.objective,
            rows: self.rows,
            shared: self.shared,
            hints: StructuralHints {
                topology: self.topology,
                source: self.source,
                dest: self.dest,
                n_slots: self.n_slots,
                demand_slots: self.demand_slots,
                restricted_paths: self.restricted_paths,
                reach_km: self.reach_km,
                pli: self.pli,
            },
        }
    }
}

/// Builds the canonical assignment for a `(path, modulation, start)`
/// candidate: link vars on the path arcs, the slot block and the start
/// variable on every path arc, plus the selector when routing is restricted.
pub fn candidate_assignment(
    model: &IlpModel,
    builder_view: &ModelView,
    path: &[usize],
    m: usize,
    start: usize,
) -> Assignment {
    let topo = &model.hints.topology;
    let rho = model.hints.demand_slots[m - 1];
    let mut ones = Vec::new();
    for arc in topo.path_arcs(path).expect("candidate path exists") {
        ones.push(builder_view.link_var(arc));
        ones.push(builder_view.start_var(arc, start, m).expect("valid start"));
        for k in start..start + rho {
            ones.push(builder_view.slot_var(arc, k, m));
        }
    }
    if let Some(paths) = &model.hints.restricted_paths {
        let idx = paths
            .iter()
            .position(|p| p == path)
            .expect("restricted candidate comes from the hint set");
        ones.push(
            model
                .var_id(VarKind::PathChoice { index: idx })
                .expect("selector exists"),
        );
    }
    Assignment::new(ones)
}

/// Read-only index math over a finished model, mirroring the builder's
/// variable layout.
pub struct ModelView {
    n_slots: usize,
    m_count: usize,
    slot_base: usize,
    start_base: usize,
    start_m_offset: Vec<usize>,
    start_per_arc: usize,
    demand_slots: Vec<usize>,
}

impl ModelView {
    pub fn of(model: &IlpModel) -> ModelView {
        let num_arcs = model.hints.topology.num_arcs();
        let n = model.hints.n_slots;
        let demand = model.hints.demand_slots.clone();
        let m_count = demand.len();
        let valid: Vec<usize> = demand
            .iter()
            .map(|&rho| (n + 1).saturating_sub(rho))
            .collect();
        let mut start_m_offset = vec![0usize; m_count];
        let mut acc = 0usize;
        for m in 0..m_count {
            start_m_offset[m] = acc;
            acc += valid[m];
        }
        ModelView {
            n_slots: n,
            m_count,
            slot_base: num_arcs,
            start_base: num_arcs + num_arcs * n * m_count,
            start_m_offset,
            start_per_arc: acc,
            demand_slots: demand,
        }
    }

    #[inline]
    pub fn link_var(&self, arc: ArcId) -> VarId {
        VarId(arc.0 as u32)
    }

    #[inline]
    pub fn slot_var(&self, arc: ArcId, k: usize, m: usize) -> VarId {
        VarId(
            (self.slot_base
                + arc.0 * self.n_slots * self.m_count
                + (k - 1) * self.m_count
                + (m - 1)) as u32,
        )
    }

    #[inline]
    pub fn start_var(&self, arc: ArcId, k: usize, m: usize) -> Option<VarId> {
        let valid = (self.n_slots + 1).saturating_sub(self.demand_slots[m - 1]);
        if k < 1 || k > valid {
            return None;
        }
        Some(VarId(
            (self.start_base + arc.0 * self.start_per_arc + self.start_m_offset[m - 1] + (k - 1))
                as u32,
        ))
    }
}

/// Objective and routing mode of one admission model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Abacus,
    Jo,
}

/// Decodes a feasible assignment into a connection record: walk the link
/// variables from the source (ignoring any cost-free junk arcs a solver may
/// have left on), then read modulation and start slot from the start
/// variables of the first hop.
pub fn decode_assignment(
    model: &IlpModel,
    assignment: &Assignment,
    rate_gbps: f64,
) -> Result<ConnectionRecord> {
    let topo = &model.hints.topology;
    let view = ModelView::of(model);
    let mut path = vec![model.hints.source];
    let mut current = model.hints.source;
    while current != model.hints.dest {
        let mut next = None;
        for arc in topo.out_arcs(current) {
            if assignment.contains(view.link_var(*arc)) {
                next = Some(topo.arc(*arc).to);
                break;
            }
        }
        let Some(n) = next else {
            return Err(Error::invalid("assignment does not contain an s->d path"));
        };
        if path.contains(&n) {
            return Err(Error::invalid("assignment path revisits a node"));
        }
        path.push(n);
        current = n;
    }

    let first_arc = topo.arc_between(path[0], path[1]).unwrap();
    let mut found = None;
    for m in 1..=model.hints.demand_slots.len() {
        for k in 1..=model.hints.n_slots {
            if let Some(z) = view.start_var(first_arc, k, m) {
                if assignment.contains(z) {
                    if found.is_some() {
                        return Err(Error::invalid("assignment sets more than one start"));
                    }
                    found = Some((m, k));
                }
            }
        }
    }
    let Some((m, start)) = found else {
        return Err(Error::invalid(
            "assignment sets no start variable on the first hop",
        ));
    };

    Ok(ConnectionRecord {
        id: crate::network::ConnectionId(0),
        source: model.hints.source,
        dest: model.hints.dest,
        path,
        modulation: m,
        start_slot: start,
        num_slots: model.hints.demand_slots[m - 1],
        rate_gbps,
        inv_sinr: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ModulationLevel;

    fn two_mods() -> ModulationTable {
        ModulationTable::new(vec![
            ModulationLevel {
                name: "a".into(),
                sinr_threshold_db: 12.6,
                reach_km: 4000.0,
            },
            ModulationLevel {
                name: "b".into(),
                sinr_threshold_db: 15.6,
                reach_km: 2000.0,
            },
        ])
        .unwrap()
    }

    fn builder(n: usize, rate: f64) -> ModelBuilder {
        let topo = Rc::new(Topology::six_node());
        let s = topo.index_of(1).unwrap();
        let d = topo.index_of(6).unwrap();
        ModelBuilder::new(topo, n, &two_mods(), s, d, rate).unwrap()
    }

    #[test]
    fn abacus_coefficients_hit_endpoints_exactly() {
        let mut b = builder(110, 120.0);
        b.objective_abacus().unwrap();
        let arc = ArcId(0);
        let first = b.objective[b.slot_var(arc, 1, 1).0 as usize];
        let last = b.objective[b.slot_var(arc, 110, 1).0 as usize];
        assert_eq!(first, 1.0);
        assert_eq!(last, 2.0);
        // interior value: 1 + ln 10 / ln 110
        let k10 = b.objective[b.slot_var(arc, 10, 2).0 as usize];
        assert!((k10 - (1.0 + 10f64.ln() / 110f64.ln())).abs() < 1e-12);
        assert!((k10 - 1.4898).abs() < 1e-4);
        for k in 1..=110 {
            let c = b.objective[b.slot_var(arc, k, 1).0 as usize];
            assert!((1.0..=2.0).contains(&c));
        }
    }

    #[test]
    fn abacus_needs_two_slots() {
        let topo = Rc::new(Topology::six_node());
        let mut b = ModelBuilder::new(topo, 1, &two_mods(), 0, 1, 20.0).unwrap();
        assert!(b.objective_abacus().is_err());
    }

    #[test]
    fn jo_coefficients_are_zero_based_indices() {
        let mut b = builder(10, 120.0);
        b.objective_jo();
        let arc = ArcId(3);
        assert_eq!(b.objective[b.slot_var(arc, 1, 1).0 as usize], 0.0);
        assert_eq!(b.objective[b.slot_var(arc, 10, 2).0 as usize], 9.0);
    }

    #[test]
    fn variable_count_matches_layout() {
        let b = builder(10, 120.0);
        // |E| = 18 arcs; slots 18*10*2; starts pruned to N+1-rho per m.
        // rate 120: rho_1 = 4, rho_2 = 2 -> 7 + 9 valid starts per arc.
        let expect = 18 + 18 * 10 * 2 + 18 * (7 + 9);
        assert_eq!(b.vars.len(), expect);
        // layout lookup agrees with the hash map
        for (i, kind) in b.vars.iter().enumerate() {
            let computed = match *kind {
                VarKind::Link { arc } => b.link_var(arc),
                VarKind::Slot { arc, k, m } => b.slot_var(arc, k, m),
                VarKind::Start { arc, k, m } => b.start_var(arc, k, m).unwrap(),
                VarKind::PathChoice { .. } => unreachable!(),
            };
            assert_eq!(computed.0 as usize, i);
        }
    }

    #[test]
    fn linkage_row_count() {
        let mut b = builder(10, 120.0);
        b.linkage_constraints();
        // one Xs<=Xl per (arc,k,m) plus one Z<=Xs per existing start
        let expect = 18 * 10 * 2 + 18 * (7 + 9);
        assert_eq!(b.rows.len(), expect);
        assert!(b.rows.iter().all(|r| r.tag == RowTag::Linkage));
    }

    #[test]
    fn infeasible_demand_is_reported_before_solving() {
        let topo = Rc::new(Topology::six_node());
        // 700 Gbps with only BPSK-like level on a 5-slot link: rho = 24 > 5
        let mods = ModulationTable::new(vec![ModulationLevel {
            name: "bpsk".into(),
            sinr_threshold_db: 12.6,
            reach_km: 4000.0,
        }])
        .unwrap();
        let err = ModelBuilder::new(topo, 5, &mods, 0, 1, 700.0).unwrap_err();
        assert!(matches!(err, Error::InfeasibleDemand(_)));
    }

    #[test]
    fn start_domain_is_pruned_at_the_tail() {
        let b = builder(5, 120.0);
        // rho_2 = 2: start at k=5 would overflow -> no variable
        assert!(b.start_var(ArcId(0), 4, 2).is_some());
        assert!(b.start_var(ArcId(0), 5, 2).is_none());
        // rho_1 = 4: starts only at k=1,2
        assert!(b.start_var(ArcId(0), 2, 1).is_some());
        assert!(b.start_var(ArcId(0), 3, 1).is_none());
    }

    #[test]
    fn model_view_matches_builder_layout() {
        let mut b = builder(7, 120.0);
        b.objective_abacus().unwrap();
        b.linkage_constraints();
        let model = b.finish();
        let view = ModelView::of(&model);
        for (i, kind) in model.var_kinds().iter().enumerate() {
            let computed = match *kind {
                VarKind::Link { arc } => view.link_var(arc),
                VarKind::Slot { arc, k, m } => view.slot_var(arc, k, m),
                VarKind::Start { arc, k, m } => view.start_var(arc, k, m).unwrap(),
                VarKind::PathChoice { .. } => continue,
            };
            assert_eq!(computed.0 as usize, i);
        }
    }

    #[test]
    fn verify_flags_violations() {
        let topo = Rc::new(Topology::six_node());
        let s = topo.index_of(1).unwrap();
        let d = topo.index_of(6).unwrap();
        let mut b = ModelBuilder::new(topo, 5, &two_mods(), s, d, 60.0).unwrap();
        b.objective_abacus().unwrap();
        b.linkage_constraints();
        b.path_constraints();
        b.spectrum_constraints().unwrap();
        let model = b.finish();
        // empty assignment violates the source-out equality
        let violations = model.verify(&Assignment::default());
        assert!(violations.iter().any(|v| v.tag == RowTag::SourceOut));
    }
}
