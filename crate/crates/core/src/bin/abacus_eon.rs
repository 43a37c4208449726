//! Experiment command line.
//!
//! ```text
//! abacus-eon run --config exp.conf [--section.key value ...]
//! abacus-eon compare a.csv b.csv [...]
//! abacus-eon gen-trace --topology builtin:nsfnet14 --seed 1 --count 100 --out t.trace
//! abacus-eon dump-model --config exp.conf --source 1 --dest 6 --rate 120 --out model.lp
//! ```
//!
//! Any configuration key can be overridden on the `run` and `dump-model`
//! command lines as `--section.key value`, taking precedence over the file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use abacus_eon::harness::{compare_runs, run_experiment, ExperimentConfig};
use abacus_eon::lp::write_lp;
use abacus_eon::traffic::{generate_trace, TrafficMode};

#[derive(Parser)]
#[command(
    name = "abacus-eon",
    about = "Elastic optical network admission experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare recorded run ledgers (first file is the baseline).
    Compare { ledgers: Vec<PathBuf> },
    /// Generate a request trace file.
    GenTrace {
        /// `builtin:six_node`, `builtin:nsfnet14` or a topology file path.
        #[arg(long, default_value = "builtin:nsfnet14")]
        topology: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "static-batch")]
        mode: String,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Target offered load for dynamic traces, Gbps.
        #[arg(long, default_value_t = 10000.0)]
        load_gbps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build one admission model and write it as LP text.
    DumpModel {
        #[arg(long)]
        config: PathBuf,
        /// Source node label.
        #[arg(long)]
        source: u32,
        /// Destination node label.
        #[arg(long)]
        dest: u32,
        /// Requested data rate, Gbps.
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Splits `--section.key value` overrides out of the raw argument list so
/// clap only sees the structural flags.
fn extract_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        if let Some(key) = arg.strip_prefix("--") {
            if key.contains('.') && i + 1 < args.len() {
                overrides.push((key.to_string(), args[i + 1].clone()));
                i += 2;
                continue;
            }
        }
        rest.push(arg.clone());
        i += 1;
    }
    (rest, overrides)
}

fn load_topology(spec: &str) -> abacus_eon::Result<std::sync::Arc<abacus_eon::Topology>> {
    use abacus_eon::Topology;
    let topo = match spec.strip_prefix("builtin:") {
        Some("six_node") => Topology::six_node(),
        Some("nsfnet14") => Topology::nsfnet14(),
        Some(other) => {
            return Err(abacus_eon::Error::NotFound(format!(
                "builtin topology `{other}`"
            )))
        }
        None => Topology::load(spec)?,
    };
    Ok(std::sync::Arc::new(topo))
}

fn run() -> abacus_eon::Result<()> {
    let (args, overrides) = extract_overrides(std::env::args().collect());
    let cli = Cli::parse_from(args);
    match cli.command {
        Command::Run { config } => {
            let mut config = ExperimentConfig::load(&config)?;
            for (key, value) in &overrides {
                config.apply_override(key, value)?;
            }
            let output = run_experiment(&config)?;
            print!("{}", output.summary);
            if let Some(path) = &config.ledger_path {
                eprintln!("ledger written to {}", path.display());
            }
        }
        Command::Compare { ledgers } => {
            let table = compare_runs(&ledgers)?;
            print!("{table}");
        }
        Command::GenTrace {
            topology,
            seed,
            mode,
            count,
            load_gbps,
            out,
        } => {
            let topo = load_topology(&topology)?;
            let mode = TrafficMode::parse(&mode)?;
            let trace = generate_trace(&topo, seed, mode, load_gbps, count)?;
            trace.save(&topo, &out)?;
            eprintln!(
                "wrote {} requests ({:.1} Gbps offered) to {}",
                trace.requests.len(),
                trace.offered_load_gbps,
                out.display()
            );
        }
        Command::DumpModel {
            config,
            source,
            dest,
            rate,
            out,
        } => {
            let mut config = ExperimentConfig::load(&config)?;
            for (key, value) in &overrides {
                config.apply_override(key, value)?;
            }
            let topology = config.load_topology()?;
            let state = abacus_eon::NetworkState::new(topology.clone(), config.n_slots);
            // prefill applies so dumped models reflect scenario occupancy
            let mut state = state;
            for &(u, v, k0, k1) in &config.prefill {
                let (ui, vi) = (topology.index_of(u)?, topology.index_of(v)?);
                let arc = topology
                    .arc_between(ui, vi)
                    .ok_or_else(|| abacus_eon::Error::NotFound(format!("prefill arc {u}->{v}")))?;
                state.occupy_raw(arc, k0, k1 - k0 + 1)?;
            }
            let mut cache = Default::default();
            let model = abacus_eon::harness::build_admission_model(
                &config,
                &state,
                topology.index_of(source)?,
                topology.index_of(dest)?,
                rate,
                &mut cache,
            )?;
            std::fs::write(&out, write_lp(&model))?;
            eprintln!(
                "wrote model with {} variables / {} rows to {}",
                model.num_vars(),
                model.rows.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("abacus-eon: {e}");
            ExitCode::FAILURE
        }
    }
}
