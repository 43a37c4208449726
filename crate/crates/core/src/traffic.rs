//! Seeded generation of dynamic connection-request sequences.
//!
//! Source/destination pairs are uniform over ordered distinct pairs, data
//! rates uniform in [70, 700] Gbps. Two arrival models are provided:
//!
//! * `static-batch` — all requests arrive in sequence and never depart;
//!   aggregate load is the cumulative sum of admitted rates.
//! * `dynamic` — Poisson arrivals with exponentially distributed holding
//!   times; offered load is `arrival rate x mean holding x mean rate`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::Topology;

/// Lower bound of the uniform data-rate distribution (Gbps).
pub const RATE_MIN_GBPS: f64 = 70.0;
/// Upper bound of the uniform data-rate distribution (Gbps).
pub const RATE_MAX_GBPS: f64 = 700.0;
/// Mean of the uniform rate distribution.
pub const RATE_MEAN_GBPS: f64 = (RATE_MIN_GBPS + RATE_MAX_GBPS) / 2.0;

/// Arrival process of a generated trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrafficMode {
    StaticBatch,
    Dynamic,
}

impl TrafficMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "static-batch" | "static" => Ok(TrafficMode::StaticBatch),
            "dynamic" => Ok(TrafficMode::Dynamic),
            other => Err(Error::invalid(format!("unknown traffic mode `{other}`"))),
        }
    }
}

/// One connection request. Node fields are dense topology indices; the trace
/// file format uses external labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: u64,
    pub source: usize,
    pub dest: usize,
    pub rate_gbps: f64,
    pub arrival: f64,
    /// Holding time; `f64::INFINITY` for static-batch requests.
    pub holding: f64,
}

/// A time-ordered, reproducible request sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficTrace {
    pub seed: u64,
    pub requests: Vec<Request>,
    /// Static-batch: cumulative requested rate. Dynamic: configured target.
    pub offered_load_gbps: f64,
}

/// Generates a trace of `count` requests. `target_load_gbps` tunes the
/// Poisson arrival rate in dynamic mode (mean holding time is 1.0); it is
/// ignored for static batches, whose load is just the cumulative rate sum.
///
/// Per request the sampling order is fixed (pair, rate, holding) so traces
/// are reproducible from the seed alone.
pub fn generate_trace(
    topology: &Topology,
    seed: u64,
    mode: TrafficMode,
    target_load_gbps: f64,
    count: usize,
) -> Result<TrafficTrace> {
    if topology.num_nodes() < 2 {
        return Err(Error::invalid(
            "traffic generation needs at least two nodes",
        ));
    }
    if count == 0 {
        return Err(Error::invalid("request count must be at least 1"));
    }
    if mode == TrafficMode::Dynamic && !(target_load_gbps.is_finite() && target_load_gbps > 0.0) {
        return Err(Error::invalid("dynamic mode needs a positive target load"));
    }

    let n = topology.num_nodes();
    let num_pairs = n * (n - 1);
    let mean_holding = 1.0;
    let arrival_rate = target_load_gbps / (mean_holding * RATE_MEAN_GBPS);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut requests = Vec::with_capacity(count);
    let mut clock = 0.0f64;
    let mut rate_sum = 0.0f64;

    for id in 1..=count as u64 {
        let pair = rng.random_range(0..num_pairs);
        let source = pair / (n - 1);
        let mut dest = pair % (n - 1);
        if dest >= source {
            dest += 1;
        }
        let rate_gbps = rng.random_range(RATE_MIN_GBPS..=RATE_MAX_GBPS);
        rate_sum += rate_gbps;

        let (arrival, holding) = match mode {
            TrafficMode::StaticBatch => {
                clock += 1.0;
                (clock, f64::INFINITY)
            }
            TrafficMode::Dynamic => {
                clock += exponential(&mut rng, arrival_rate);
                (clock, exponential(&mut rng, 1.0 / mean_holding))
            }
        };
        requests.push(Request {
            id,
            source,
            dest,
            rate_gbps,
            arrival,
            holding,
        });
    }

    let offered_load_gbps = match mode {
        TrafficMode::StaticBatch => rate_sum,
        TrafficMode::Dynamic => target_load_gbps,
    };
    Ok(TrafficTrace {
        seed,
        requests,
        offered_load_gbps,
    })
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

impl TrafficTrace {
    /// Serializes the trace: one `id t_arrive t_hold s d rate_gbps` record
    /// per line, with node labels from the topology.
    pub fn to_text(&self, topology: &Topology) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# seed {} offered_gbps {:.6}\n",
            self.seed, self.offered_load_gbps
        ));
        for r in &self.requests {
            // floats in shortest round-trip form so parsing is lossless
            out.push_str(&format!(
                "{} {} {} {} {} {}\n",
                r.id,
                r.arrival,
                format_holding(r.holding),
                topology.label(r.source),
                topology.label(r.dest),
                r.rate_gbps,
            ));
        }
        out
    }

    pub fn save(&self, topology: &Topology, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text(topology))?;
        Ok(())
    }

    pub fn parse(text: &str, topology: &Topology) -> Result<TrafficTrace> {
        let mut seed = 0u64;
        let mut offered = 0.0f64;
        let mut requests = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if fields.len() == 4 && fields[0] == "seed" && fields[2] == "offered_gbps" {
                    seed = fields[1].parse().unwrap_or(0);
                    offered = fields[3].parse().unwrap_or(0.0);
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(Error::parse(format!(
                    "trace line {}: expected `id t_arrive t_hold s d rate_gbps`",
                    lineno + 1
                )));
            }
            let bad = |what: &str| Error::parse(format!("trace line {}: bad {what}", lineno + 1));
            let request = Request {
                id: fields[0].parse().map_err(|_| bad("id"))?,
                arrival: fields[1].parse().map_err(|_| bad("arrival"))?,
                holding: fields[2].parse().map_err(|_| bad("holding"))?,
                source: topology.index_of(fields[3].parse().map_err(|_| bad("source"))?)?,
                dest: topology.index_of(fields[4].parse().map_err(|_| bad("dest"))?)?,
                rate_gbps: fields[5].parse().map_err(|_| bad("rate"))?,
            };
            if request.source == request.dest {
                return Err(Error::invalid(format!("trace line {}: s == d", lineno + 1)));
            }
            requests.push(request);
        }
        if offered == 0.0 {
            offered = requests.iter().map(|r| r.rate_gbps).sum();
        }
        requests.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.id.cmp(&b.id)));
        Ok(TrafficTrace {
            seed,
            requests,
            offered_load_gbps: offered,
        })
    }

    pub fn load(path: impl AsRef<Path>, topology: &Topology) -> Result<TrafficTrace> {
        let text = std::fs::read_to_string(path)?;
        TrafficTrace::parse(&text, topology)
    }
}

fn format_holding(h: f64) -> String {
    if h.is_infinite() {
        "inf".to_string()
    } else {
        format!("{h}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo14() -> Topology {
        Topology::nsfnet14()
    }

    #[test]
    fn deterministic_for_same_seed() {
        let t = topo14();
        let a = generate_trace(&t, 42, TrafficMode::Dynamic, 5000.0, 200).unwrap();
        let b = generate_trace(&t, 42, TrafficMode::Dynamic, 5000.0, 200).unwrap();
        assert_eq!(a, b);
        let c = generate_trace(&t, 43, TrafficMode::Dynamic, 5000.0, 200).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mean_rate_close_to_385() {
        let t = topo14();
        let trace = generate_trace(&t, 7, TrafficMode::StaticBatch, 0.0, 10_000).unwrap();
        let mean: f64 =
            trace.requests.iter().map(|r| r.rate_gbps).sum::<f64>() / trace.requests.len() as f64;
        assert!((365.0..=405.0).contains(&mean), "mean rate {mean}");
        assert!(trace
            .requests
            .iter()
            .all(|r| (RATE_MIN_GBPS..=RATE_MAX_GBPS).contains(&r.rate_gbps)));
    }

    #[test]
    fn pairs_uniform_within_three_sigma() {
        let t = topo14();
        let trace = generate_trace(&t, 11, TrafficMode::StaticBatch, 0.0, 10_000).unwrap();
        let n = t.num_nodes();
        let pairs = (n * (n - 1)) as f64;
        let mut counts = vec![0usize; n * n];
        for r in &trace.requests {
            assert_ne!(r.source, r.dest);
            counts[r.source * n + r.dest] += 1;
        }
        let total = trace.requests.len() as f64;
        let p = 1.0 / pairs;
        let sigma = (total * p * (1.0 - p)).sqrt();
        for s in 0..n {
            for d in 0..n {
                if s == d {
                    assert_eq!(counts[s * n + d], 0);
                } else {
                    let dev = (counts[s * n + d] as f64 - total * p).abs();
                    assert!(
                        dev <= 3.0 * sigma,
                        "pair ({s},{d}) count {} deviates {dev:.1} (3 sigma = {:.1})",
                        counts[s * n + d],
                        3.0 * sigma
                    );
                }
            }
        }
    }

    #[test]
    fn dynamic_arrivals_are_ordered_with_finite_holdings() {
        let t = topo14();
        let trace = generate_trace(&t, 3, TrafficMode::Dynamic, 8000.0, 500).unwrap();
        for w in trace.requests.windows(2) {
            assert!(w[0].arrival < w[1].arrival);
        }
        assert!(trace
            .requests
            .iter()
            .all(|r| r.holding.is_finite() && r.holding > 0.0));
        assert_eq!(trace.offered_load_gbps, 8000.0);
    }

    #[test]
    fn trace_file_round_trip() {
        let t = topo14();
        for mode in [TrafficMode::StaticBatch, TrafficMode::Dynamic] {
            let trace = generate_trace(&t, 5, mode, 3000.0, 50).unwrap();
            let text = trace.to_text(&t);
            let back = TrafficTrace::parse(&text, &t).unwrap();
            assert_eq!(back.seed, trace.seed);
            // shortest round-trip float form makes this exact
            assert_eq!(back.requests, trace.requests);
        }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let t = Topology::from_edges(&[(1, 2, 10.0)], &[]).unwrap();
        assert!(generate_trace(&t, 1, TrafficMode::StaticBatch, 0.0, 0).is_err());
        assert!(generate_trace(&t, 1, TrafficMode::Dynamic, 0.0, 10).is_err());
        assert!(generate_trace(&t, 1, TrafficMode::Dynamic, f64::NAN, 10).is_err());
    }
}
