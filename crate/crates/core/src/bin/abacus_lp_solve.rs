//! Standalone LP-file solver: reads a model written by the engine's LP
//! dumper (structural hints included as comments), solves it exactly with
//! the structured backend, and writes a `status / objective / name value`
//! solution file. Drop-in target for the file-based solver adapter.

use std::process::ExitCode;
use std::time::Duration;

use abacus_eon::lp::{parse_lp, write_solution};
use abacus_eon::solver::{solve, Backend, SolveOptions, SolveStatus};

fn usage() -> &'static str {
    "usage: abacus-lp-solve MODEL.lp SOLUTION.txt [--time-limit SECS] [--candidate-cap N]"
}

fn run() -> Result<(), String> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut positional = Vec::new();
    let mut time_limit = Duration::from_secs(60);
    let mut candidate_cap = 20_000_000u64;
    let mut i = 0;
    while i < args.len() {
        match args[i].as_str() {
            "--time-limit" => {
                i += 1;
                let v = args.get(i).ok_or(usage())?;
                time_limit =
                    Duration::from_secs(v.parse().map_err(|_| format!("bad seconds `{v}`"))?);
            }
            "--candidate-cap" => {
                i += 1;
                let v = args.get(i).ok_or(usage())?;
                candidate_cap = v.parse().map_err(|_| format!("bad cap `{v}`"))?;
            }
            "--help" | "-h" => {
                println!("{}", usage());
                return Ok(());
            }
            other => positional.push(other.to_string()),
        }
        i += 1;
    }
    if positional.len() != 2 {
        return Err(usage().to_string());
    }

    let text = std::fs::read_to_string(&positional[0])
        .map_err(|e| format!("cannot read {}: {e}", positional[0]))?;
    let model = parse_lp(&text).map_err(|e| e.to_string())?;
    let options = SolveOptions {
        time_limit,
        candidate_cap,
    };
    let result = solve(&model, &Backend::Builtin, &options).map_err(|e| e.to_string())?;

    let status = match result.status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Timeout => "timeout",
    };
    let objective = if result.objective.is_nan() {
        0.0
    } else {
        result.objective
    };
    let out = write_solution(&model, status, objective, &result.assignment.ones);
    std::fs::write(&positional[1], out)
        .map_err(|e| format!("cannot write {}: {e}", positional[1]))?;
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("abacus-lp-solve: {msg}");
            ExitCode::FAILURE
        }
    }
}
