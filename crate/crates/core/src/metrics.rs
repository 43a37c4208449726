//! Experiment metrics: external fragmentation, blocking, FSU usage and the
//! per-event ledger emitted as CSV.

use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{NetworkState, SlotMask};

/// External fragmentation of one occupancy row:
/// `1 - largest free run / total free slots`.
///
/// Both degenerate rows score zero: an all-free row is a single block, and a
/// row with no free slots is defined as unfragmented.
pub fn link_fragmentation(mask: &SlotMask) -> f64 {
    let free = mask.free_count();
    if free == 0 {
        return 0.0;
    }
    1.0 - mask.largest_free_run() as f64 / free as f64
}

/// Arithmetic mean of [`link_fragmentation`] over all directed arcs.
pub fn average_fragmentation(state: &NetworkState) -> f64 {
    average_fragmentation_of(state.spectrum().masks())
}

pub fn average_fragmentation_of(masks: &[SlotMask]) -> f64 {
    if masks.is_empty() {
        return 0.0;
    }
    masks.iter().map(link_fragmentation).sum::<f64>() / masks.len() as f64
}

/// Undirected averaging variant: the two directions of each fiber are
/// merged (a slot counts as busy when either direction uses it) and the
/// metric is averaged over fibers instead of arcs.
pub fn average_fragmentation_undirected(state: &NetworkState) -> f64 {
    let topo = &state.topology;
    let mut sum = 0.0;
    let mut fibers = 0usize;
    for a in 0..topo.num_arcs() {
        let fiber = topo.arc(crate::network::ArcId(a));
        if fiber.from >= fiber.to {
            continue;
        }
        let fwd = state.spectrum().arc(crate::network::ArcId(a));
        let rev = state.spectrum().arc(topo.reverse(crate::network::ArcId(a)));
        let mut merged = SlotMask::new(fwd.len());
        for k in 1..=fwd.len() {
            if fwd.get(k) || rev.get(k) {
                merged.set(k);
            }
        }
        sum += link_fragmentation(&merged);
        fibers += 1;
    }
    if fibers == 0 {
        0.0
    } else {
        sum / fibers as f64
    }
}

/// One ledger row, appended after every admission event.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub time: f64,
    pub fsus_in_use: u64,
    pub avg_fragmentation: f64,
    pub offered_gbps: f64,
    pub blocked_gbps: f64,
    pub qot_failures: u64,
    pub solve_ms: f64,
}

/// Time series of admission events for one experiment run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLedger {
    pub rows: Vec<LedgerRow>,
}

const CSV_HEADER: &str =
    "time,fsus_in_use,avg_fragmentation,offered_gbps,blocked_gbps,qot_failures,solve_ms";

impl MetricsLedger {
    pub fn push(&mut self, row: LedgerRow) {
        debug_assert!(row.blocked_gbps <= row.offered_gbps + 1e-9);
        debug_assert!((0.0..=1.0).contains(&row.avg_fragmentation));
        self.rows.push(row);
    }

    /// Blocked-over-offered bandwidth ratio across the whole ledger.
    /// Defined as zero when nothing was offered.
    pub fn bandwidth_blocking(&self) -> f64 {
        let offered: f64 = self.rows.iter().map(|r| r.offered_gbps).sum();
        if offered <= 0.0 {
            return 0.0;
        }
        let blocked: f64 = self.rows.iter().map(|r| r.blocked_gbps).sum();
        blocked / offered
    }

    pub fn final_fsus_in_use(&self) -> u64 {
        self.rows.last().map(|r| r.fsus_in_use).unwrap_or(0)
    }

    pub fn mean_fragmentation(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.avg_fragmentation).sum::<f64>() / self.rows.len() as f64
    }

    pub fn mean_solve_ms(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.solve_ms).sum::<f64>() / self.rows.len() as f64
    }

    /// Serializes to CSV with a fixed numeric format so identical runs
    /// produce byte-identical files.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{:.6},{},{:.9},{:.6},{:.6},{},{:.3}\n",
                r.time,
                r.fsus_in_use,
                r.avg_fragmentation,
                r.offered_gbps,
                r.blocked_gbps,
                r.qot_failures,
                r.solve_ms,
            ));
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        if let Some(parent) = path.as_ref().parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn parse_csv(text: &str) -> Result<MetricsLedger> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => {
                return Err(Error::SchemaMismatch(format!(
                    "expected ledger header `{CSV_HEADER}`, got `{}`",
                    other.unwrap_or("")
                )))
            }
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::SchemaMismatch(format!(
                    "ledger line {}: expected 7 fields",
                    lineno + 2
                )));
            }
            let bad = |w: &str| Error::parse(format!("ledger line {}: bad {w}", lineno + 2));
            rows.push(LedgerRow {
                time: fields[0].parse().map_err(|_| bad("time"))?,
                fsus_in_use: fields[1].parse().map_err(|_| bad("fsus"))?,
                avg_fragmentation: fields[2].parse().map_err(|_| bad("fragmentation"))?,
                offered_gbps: fields[3].parse().map_err(|_| bad("offered"))?,
                blocked_gbps: fields[4].parse().map_err(|_| bad("blocked"))?,
                qot_failures: fields[5].parse().map_err(|_| bad("qot"))?,
                solve_ms: fields[6].parse().map_err(|_| bad("solve_ms"))?,
            });
        }
        Ok(MetricsLedger { rows })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<MetricsLedger> {
        MetricsLedger::parse_csv(&std::fs::read_to_string(path)?)
    }
}

/// Percentage of FSUs saved by run `a` relative to run `b`, averaged over
/// matched event indices with nonzero usage in `b`. Positive means `a` used
/// fewer slots.
pub fn fsus_saved_percent(a: &MetricsLedger, b: &MetricsLedger) -> Result<f64> {
    if a.rows.len() != b.rows.len() {
        return Err(Error::invalid(format!(
            "ledger lengths differ: {} vs {}",
            a.rows.len(),
            b.rows.len()
        )));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        if rb.fsus_in_use > 0 {
            sum += 100.0 * (rb.fsus_in_use as f64 - ra.fsus_in_use as f64) / rb.fsus_in_use as f64;
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}
