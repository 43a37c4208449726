//! Physical-layer impairments: in-band crosstalk, Gaussian-noise-model
//! nonlinear interference (self- and cross-channel) and local-oscillator/ASE
//! beat noise.
//!
//! Everything here is precomputed against a spectrum snapshot before a
//! request is solved, so the SINR constraints handed to the model builder
//! are linear in the decision variables. All quantities are kept as
//! dimensionless noise-to-received-power ratios: a per-slot ratio is exactly
//! `1/SINR`, directly comparable against the inverse modulation thresholds.
//!
//! Unit conventions: powers in watts, distances in km, frequencies in Hz,
//! dispersion converted from ps^2/km to s^2/km. Slot separations inside the
//! cross-channel kernel are expressed in slot-width units, so the kernel
//! ratio is `(dk + 1/2) / (dk - 1/2)` and the self term at `dk = 0`
//! vanishes exactly. Decibel values appear only in the parameter block.

use std::collections::BTreeMap;

use crate::network::{
    ArcId, ConnectionId, ConnectionRecord, ModulationTable, NetworkState, SlotMask, Topology,
};
use crate::units::{attenuation_per_km, db_to_linear, dbm_to_watts};

/// Simulation parameters. Defaults follow the standard parameter table;
/// every field is overridable from the experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PliParams {
    pub p_lo_dbm: f64,
    pub p_r_dbm: f64,
    /// Receiver responsivity, A/W.
    pub responsivity: f64,
    pub carrier_freq_hz: f64,
    pub n_sp: f64,
    pub attenuation_db_per_km: f64,
    pub wss_loss_db: f64,
    pub tap_loss_db: f64,
    /// EDFA spacing / fiber span length, km.
    pub span_km: f64,
    pub g_in_db: f64,
    pub g_out_db_default: f64,
    /// Per-node output-gain overrides keyed by external node label.
    pub g_out_db_overrides: BTreeMap<u32, f64>,
    pub crosstalk_factor_db: f64,
    /// Fiber nonlinear coefficient, 1/(W km).
    pub gamma: f64,
    /// Fiber dispersion, ps^2/km (sign kept as configured; magnitude used).
    pub beta2_ps2_per_km: f64,
    pub elec_bandwidth_hz: f64,
    pub planck: f64,
    pub slot_width_hz: f64,
}

impl Default for PliParams {
    fn default() -> Self {
        PliParams {
            p_lo_dbm: 0.0,
            p_r_dbm: -12.0,
            responsivity: 0.7,
            carrier_freq_hz: 193.1e12,
            n_sp: 2.0,
            attenuation_db_per_km: 0.2,
            wss_loss_db: 2.0,
            tap_loss_db: 1.0,
            span_km: 80.0,
            g_in_db: 18.0,
            g_out_db_default: 8.0,
            g_out_db_overrides: BTreeMap::new(),
            crosstalk_factor_db: -40.0,
            gamma: 1.33,
            beta2_ps2_per_km: -21.7,
            elec_bandwidth_hz: 7e9,
            planck: 6.62e-34,
            slot_width_hz: 37.5e9,
        }
    }
}

impl PliParams {
    /// Defaults plus the NSFNET output-gain exceptions (5 dB at the two
    /// degree-two nodes 7 and 10).
    pub fn nsfnet() -> Self {
        let mut p = PliParams::default();
        p.g_out_db_overrides.insert(7, 5.0);
        p.g_out_db_overrides.insert(10, 5.0);
        p
    }

    pub fn g_out_db(&self, node_label: u32) -> f64 {
        self.g_out_db_overrides
            .get(&node_label)
            .copied()
            .unwrap_or(self.g_out_db_default)
    }

    /// Broadcast-and-select switch loss floor: `3 ceil(log2 Q) + L_WSS` dB.
    pub fn switch_loss_bound_db(&self, q: u32) -> f64 {
        let bits = if q <= 1 {
            0
        } else {
            (q as f64).log2().ceil() as u32
        };
        3.0 * bits as f64 + self.wss_loss_db
    }

    /// Checks the configured output gains against the switch-loss bound.
    /// The bound is advisory: violations are reported, not rejected.
    pub fn g_out_warnings(&self, topology: &Topology) -> Vec<String> {
        let mut warnings = Vec::new();
        for node in 0..topology.num_nodes() {
            let label = topology.label(node);
            let bound = self.switch_loss_bound_db(topology.degree_io(node));
            let g = self.g_out_db(label);
            if g < bound {
                warnings.push(format!(
                    "node {label}: G_out {g} dB below switch-loss bound {bound} dB (Q={})",
                    topology.degree_io(node)
                ));
            }
        }
        warnings
    }

    pub fn received_power_w(&self) -> f64 {
        dbm_to_watts(self.p_r_dbm)
    }

    /// Interfering-signal power at a node: received power times the
    /// crosstalk factor.
    pub fn crosstalk_power_w(&self) -> f64 {
        self.received_power_w() * db_to_linear(self.crosstalk_factor_db)
    }

    /// Power spectral density of one slot, W/Hz. Power is assumed uniform
    /// across slots, which keeps every table independent of the modulation.
    pub fn psd(&self) -> f64 {
        self.received_power_w() / self.slot_width_hz
    }

    fn omega(&self) -> f64 {
        let alpha = attenuation_per_km(self.attenuation_db_per_km);
        let beta2_abs = self.beta2_ps2_per_km.abs() * 1e-24; // s^2/km
        3.0 * self.gamma * self.gamma / (2.0 * std::f64::consts::PI * alpha * beta2_abs)
    }

    /// Self-channel interference power per span, W.
    pub fn nli_sci_w(&self) -> f64 {
        let alpha = attenuation_per_km(self.attenuation_db_per_km);
        let beta2_abs = self.beta2_ps2_per_km.abs() * 1e-24;
        let g = self.psd();
        let df = self.slot_width_hz;
        let log_arg = std::f64::consts::PI.powi(2) * beta2_abs * df * df / alpha;
        self.omega() * df * g.powi(3) * log_arg.abs().ln()
    }

    /// Cross-channel interference kernel per span, W, indexed by slot
    /// separation. `kernel[0] == 0` exactly and the kernel decreases with
    /// the separation.
    pub fn xci_kernel_w(&self, n_slots: usize) -> Vec<f64> {
        let pref = self.omega() * self.slot_width_hz * self.psd().powi(3);
        (0..=n_slots)
            .map(|dk| {
                let dk = dk as f64;
                let mu = (dk + 0.5).abs() / (dk - 0.5).abs();
                pref * mu.ln()
            })
            .collect()
    }

    /// LO-ASE prefactor `zeta = (R_a^2 / 2) P_lo 2 n_sp h f_c B_e`.
    pub fn zeta(&self) -> f64 {
        0.5 * self.responsivity
            * self.responsivity
            * dbm_to_watts(self.p_lo_dbm)
            * 2.0
            * self.n_sp
            * self.planck
            * self.carrier_freq_hz
            * self.elec_bandwidth_hz
    }

    /// Coherently received signal power `(R_a^2 / 2) P_lo P_r`.
    pub fn p_ch(&self) -> f64 {
        0.5 * self.responsivity
            * self.responsivity
            * dbm_to_watts(self.p_lo_dbm)
            * self.received_power_w()
    }
}

/// Inverse linear SINR thresholds per modulation plus the big-M constant
/// that deactivates a candidate SINR row when its slot variable is zero.
/// The big-M is pinned at twice the largest threshold inverse, which is
/// deterministic and comfortably above every per-modulation limit without
/// hurting numeric conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrLimits {
    /// `1 / SINR_threshold` (linear) per modulation level.
    pub inv_threshold: Vec<f64>,
    pub big_m: f64,
}

impl SinrLimits {
    pub fn from_table(mods: &ModulationTable) -> SinrLimits {
        let inv_threshold: Vec<f64> = mods
            .levels()
            .iter()
            .map(|l| 1.0 / db_to_linear(l.sinr_threshold_db))
            .collect();
        let max = inv_threshold.iter().cloned().fold(0.0f64, f64::max);
        SinrLimits { inv_threshold, big_m: 2.0 * max }
    }
}

/// Precomputed impairment tables for one spectrum snapshot. All entries are
/// noise-to-signal ratios (noise power over received channel power), so a
/// candidate's per-slot `1/SINR` is a plain sum of entries.
#[derive(Debug, Clone)]
pub struct PliCoefficients {
    pub n_slots: usize,
    /// Crosstalk ratio per (arc, slot): occupied interferer count at the
    /// arc's tail node times the linear crosstalk factor.
    pub xt_ratio: Vec<Vec<f64>>,
    /// Cross-channel interference from existing occupancy per (arc, slot),
    /// pre-span.
    pub oc_ratio: Vec<Vec<f64>>,
    /// Cross-channel kernel by slot separation, pre-span.
    pub kernel_ratio: Vec<f64>,
    /// Self-channel interference, pre-span.
    pub sci_ratio: f64,
    /// Linear crosstalk factor (one interferer's ratio).
    pub c_x_ratio: f64,
    /// Spans per arc: `ceil(distance / span_length)`.
    pub spans: Vec<f64>,
    /// LO-ASE ratio contributed by selecting an arc: inline-EDFA part
    /// `(G_in - 1) d / L` plus the tail node's output-EDFA part.
    pub ase_arc_ratio: Vec<f64>,
}

impl PliCoefficients {
    /// Builds every table against the current occupancy. Must be refreshed
    /// whenever the spectrum changes; tables never depend on decision
    /// variables.
    pub fn compute(state: &NetworkState, params: &PliParams) -> PliCoefficients {
        let topo = &state.topology;
        let n = state.n_slots();
        let p_r = params.received_power_w();
        let c_x_ratio = db_to_linear(params.crosstalk_factor_db);
        let kernel_w = params.xci_kernel_w(n);
        let kernel_ratio: Vec<f64> = kernel_w.iter().map(|w| w / p_r).collect();
        let sci_ratio = params.nli_sci_w() / p_r;
        let ase_unit =
            2.0 * params.n_sp * params.planck * params.carrier_freq_hz * params.elec_bandwidth_hz
                / p_r;
        let g_in = db_to_linear(params.g_in_db);

        let mut xt_ratio = Vec::with_capacity(topo.num_arcs());
        let mut oc_ratio = Vec::with_capacity(topo.num_arcs());
        let mut spans = Vec::with_capacity(topo.num_arcs());
        let mut ase_arc_ratio = Vec::with_capacity(topo.num_arcs());

        for a in 0..topo.num_arcs() {
            let arc = ArcId(a);
            let fiber = topo.arc(arc);
            let reverse = topo.reverse(arc);

            let mut xt_row = vec![0.0f64; n];
            for &b in topo.in_arcs(fiber.from) {
                if b == reverse {
                    continue;
                }
                let mask = state.spectrum().arc(b);
                for k in 1..=n {
                    if mask.get(k) {
                        xt_row[k - 1] += c_x_ratio;
                    }
                }
            }
            xt_ratio.push(xt_row);

            let mask = state.spectrum().arc(arc);
            let mut oc_row = vec![0.0f64; n];
            for k in 1..=n {
                let mut acc = 0.0;
                for k2 in 1..=n {
                    if mask.get(k2) {
                        acc += kernel_ratio[k.abs_diff(k2)];
                    }
                }
                oc_row[k - 1] = acc;
            }
            oc_ratio.push(oc_row);

            let span_count = (fiber.distance_km / params.span_km).ceil();
            spans.push(span_count);

            let g_out = db_to_linear(params.g_out_db(topo.label(fiber.from)));
            ase_arc_ratio.push(
                ase_unit * ((g_in - 1.0) * fiber.distance_km / params.span_km + (g_out - 1.0)),
            );
        }

        PliCoefficients {
            n_slots: n,
            xt_ratio,
            oc_ratio,
            kernel_ratio,
            sci_ratio,
            c_x_ratio,
            spans,
            ase_arc_ratio,
        }
    }

    /// Accumulated crosstalk ratio on slot `k` along a path.
    pub fn crosstalk_ratio_at(&self, arcs: &[ArcId], k: usize) -> f64 {
        arcs.iter().map(|a| self.xt_ratio[a.0][k - 1]).sum()
    }

    /// Accumulated nonlinear-interference ratio on slot `k` along a path
    /// whose own block occupies `own_start .. own_start + own_len`: span
    /// count times self-channel, existing-occupancy cross-channel, and the
    /// block's own cross-channel terms (the zero kernel at separation zero
    /// keeps the slot itself out).
    pub fn nli_ratio_at(&self, arcs: &[ArcId], own_start: usize, own_len: usize, k: usize) -> f64 {
        let mut own_pc = 0.0;
        for k2 in own_start..own_start + own_len {
            own_pc += self.kernel_ratio[k.abs_diff(k2)];
        }
        arcs.iter()
            .map(|a| self.spans[a.0] * (self.sci_ratio + self.oc_ratio[a.0][k - 1] + own_pc))
            .sum()
    }

    /// LO-ASE noise ratio of a path (slot-independent).
    pub fn ase_ratio(&self, arcs: &[ArcId]) -> f64 {
        arcs.iter().map(|a| self.ase_arc_ratio[a.0]).sum()
    }

    /// Total noise-to-signal ratio (`1/SINR`) on slot `k` for a candidate.
    pub fn noise_ratio_at(
        &self,
        arcs: &[ArcId],
        own_start: usize,
        own_len: usize,
        k: usize,
    ) -> f64 {
        self.crosstalk_ratio_at(arcs, k)
            + self.nli_ratio_at(arcs, own_start, own_len, k)
            + self.ase_ratio(arcs)
    }

    /// Scalar per-slot `1/SINR` over a candidate's own slot block, evaluated
    /// against the occupancy the tables were built from.
    pub fn candidate_inv_sinr(
        &self,
        arcs: &[ArcId],
        start_slot: usize,
        num_slots: usize,
    ) -> Vec<f64> {
        (start_slot..start_slot + num_slots)
            .map(|k| self.noise_ratio_at(arcs, start_slot, num_slots, k))
            .collect()
    }

    /// Largest per-slot noise ratio a candidate path can see on any slot;
    /// the big-M rows bound this even for unused (slot, modulation) pairs.
    pub fn max_noise_ratio(&self, arcs: &[ArcId], start_slot: usize, num_slots: usize) -> f64 {
        (1..=self.n_slots)
            .map(|k| self.noise_ratio_at(arcs, start_slot, num_slots, k))
            .fold(0.0, f64::max)
    }

    /// Per-slot `1/SINR` increments a committed candidate adds to one
    /// existing record: crosstalk where the candidate enters a tail node of
    /// the record's arcs at a shared slot index, plus cross-channel kernel
    /// terms on shared arcs.
    pub fn increments_for(
        &self,
        topology: &Topology,
        existing: &ConnectionRecord,
        cand_arcs: &[ArcId],
        cand_start: usize,
        cand_slots: usize,
    ) -> Vec<f64> {
        let rec_arcs = existing.arcs(topology);
        let cand_range = cand_start..cand_start + cand_slots;
        let mut out = vec![0.0f64; existing.num_slots];
        for (i, k) in existing.slots().enumerate() {
            let mut delta = 0.0;
            for &ra in &rec_arcs {
                let fiber = topology.arc(ra);
                let reverse = topology.reverse(ra);
                if cand_range.contains(&k) {
                    for &b in topology.in_arcs(fiber.from) {
                        if b != reverse && cand_arcs.contains(&b) {
                            delta += self.c_x_ratio;
                        }
                    }
                }
                if cand_arcs.contains(&ra) {
                    for k2 in cand_range.clone() {
                        delta += self.spans[ra.0] * self.kernel_ratio[k.abs_diff(k2)];
                    }
                }
            }
            out[i] = delta;
        }
        out
    }
}

/// Result of auditing one connection.
#[derive(Debug, Clone, PartialEq)]
pub struct QotReport {
    pub id: ConnectionId,
    pub pass: bool,
    /// Smallest per-slot margin over the modulation threshold, dB.
    pub worst_margin_db: f64,
}

/// Recomputes every active connection's per-slot SINR from scratch against
/// the current occupancy and checks it against the modulation threshold.
/// A connection's own occupancy is not crosstalk to itself, so its bits are
/// masked out of the interferer view; its own-block cross-channel terms are
/// what the kernel's zero center already encodes.
pub fn verify_qot(
    state: &NetworkState,
    params: &PliParams,
    mods: &ModulationTable,
) -> Vec<QotReport> {
    let limits = SinrLimits::from_table(mods);
    let mut reports = Vec::new();
    for record in state.records() {
        let mut masked = state.clone();
        let arcs = record.arcs(&state.topology);
        for &a in &arcs {
            masked
                .spectrum_mut_for_audit(a)
                .clear_range(record.start_slot, record.num_slots);
        }
        let coeffs = PliCoefficients::compute(&masked, params);
        let inv = coeffs.candidate_inv_sinr(&arcs, record.start_slot, record.num_slots);
        let limit = limits.inv_threshold[record.modulation - 1];
        let threshold_db = mods.level(record.modulation).sinr_threshold_db;
        let mut pass = true;
        let mut worst = f64::INFINITY;
        for v in &inv {
            if *v > limit * (1.0 + 1e-9) {
                pass = false;
            }
            let margin = -10.0 * v.log10() - threshold_db;
            worst = worst.min(margin);
        }
        reports.push(QotReport {
            id: record.id,
            pass,
            worst_margin_db: worst,
        });
    }
    reports
}

impl NetworkState {
    /// Audit access to raw occupancy, so the audit can build an interferer
    /// view with one record's own bits masked out.
    pub(crate) fn spectrum_mut_for_audit(&mut self, arc: ArcId) -> &mut SlotMask {
        self.spectrum_mut().arc_mut(arc)
    }
}
