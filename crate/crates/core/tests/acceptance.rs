//! Acceptance gate: one test per criterion, each printing a PASS line with
//! the observed numbers. Run with `cargo test --test acceptance` (add
//! `-- --nocapture` to see the lines as they pass).

use std::path::{Path, PathBuf};
use std::sync::Arc as Rc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use abacus_eon::baselines::all_simple_paths;
use abacus_eon::harness::{run_experiment, ExperimentConfig, RequestOutcome, RunOutput};
use abacus_eon::metrics::link_fragmentation;
use abacus_eon::model::{
    candidate_assignment, IlpModel, ModelBuilder, ModelView, ObjectiveKind, RowTag, VarId,
};
use abacus_eon::network::{
    ConnectionId, ConnectionRecord, ModulationLevel, ModulationTable, NetworkState, SlotMask,
    Topology,
};
use abacus_eon::pli::{PliCoefficients, PliParams, SinrLimits};
use abacus_eon::solver::{
    brute_force_rmlsa, solve, Backend, OracleChoice, OracleInstance, QotRule, SolveOptions,
    SolveStatus,
};
use abacus_eon::Error;

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn run_fixture(name: &str) -> RunOutput {
    let config = ExperimentConfig::load(fixtures_dir().join(name)).unwrap();
    run_experiment(&config).unwrap()
}

fn admitted(out: &RunOutput) -> (Vec<u32>, usize, usize, usize, f64) {
    let config_topology = out.final_state.topology.clone();
    match &out.outcomes[0] {
        RequestOutcome::Admitted {
            path,
            modulation,
            start_slot,
            num_slots,
            objective,
            ..
        } => (
            path.iter().map(|&n| config_topology.label(n)).collect(),
            *modulation,
            *start_slot,
            *num_slots,
            *objective,
        ),
        RequestOutcome::Blocked => panic!("scenario request was blocked"),
    }
}

#[test]
fn criterion_1_scenario_reproduction() {
    let started = Instant::now();

    // Scenario 1, balanced objective: short path, 2 slots, high indices.
    let out = run_fixture("scenario1.conf");
    let (path, modulation, start, len, objective) = admitted(&out);
    assert_eq!(path, vec![1, 2, 6]);
    assert_eq!(modulation, 2);
    assert_eq!((start, len), (4, 2));
    let expect = 2.0 * (2.0 + (4f64.ln() + 5f64.ln()) / 5f64.ln());
    assert!(
        (objective - expect).abs() < 1e-9,
        "objective {objective} vs {expect}"
    );

    // Scenario 1, linear-sum objective: long path, 4 slots, low indices.
    let out = run_fixture("scenario1_jo.conf");
    let (path, modulation, start, len, objective) = admitted(&out);
    assert_eq!(path, vec![1, 3, 6]);
    assert_eq!(modulation, 1);
    assert_eq!((start, len), (1, 4));
    assert!((objective - 12.0).abs() < 1e-9, "objective {objective}");

    // Scenario 2: lowest-indexed block {1, 2} on either two-hop path.
    let out = run_fixture("scenario2.conf");
    let (path, _, start, len, _) = admitted(&out);
    assert_eq!((start, len), (1, 2));
    assert!(
        path == vec![5, 6, 3] || path == vec![5, 4, 3],
        "path {path:?}"
    );

    // Scenario 3: the joint model reaches a two-hop path the fixed
    // three-path restriction cannot.
    let out = run_fixture("scenario3_joint.conf");
    let (path, _, _, _, _) = admitted(&out);
    assert!(
        path == vec![4, 3, 6] || path == vec![4, 5, 6],
        "joint path {path:?}"
    );
    assert_eq!(path.len(), 3);

    let out = run_fixture("scenario3_ksp3.conf");
    let (path, _, _, _, _) = admitted(&out);
    assert!(
        path.len() > 3,
        "restricted path {path:?} should need 3+ hops"
    );
    assert!(path != vec![4, 3, 6] && path != vec![4, 5, 6]);

    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(10),
        "scenarios took {elapsed:?}"
    );
    println!("[acceptance] criterion 1 (scenario reproduction): PASS in {elapsed:?}");
}

// ---------------------------------------------------------------------------
// randomized differential testing

struct RandomInstance {
    state: NetworkState,
    mods: ModulationTable,
    source: usize,
    dest: usize,
    rate: f64,
    reach: Vec<f64>,
    pli: Option<PliParams>,
}

fn random_instance(rng: &mut ChaCha8Rng, with_pli: bool) -> RandomInstance {
    let n_nodes = rng.random_range(4..=6usize);
    let mut edges: Vec<(u32, u32, f64)> = Vec::new();
    for v in 1..n_nodes {
        let u = rng.random_range(0..v);
        edges.push((u as u32 + 1, v as u32 + 1, rng.random_range(50.0..400.0)));
    }
    for u in 0..n_nodes {
        for v in u + 1..n_nodes {
            let exists = edges.iter().any(|(a, b, _)| {
                (*a == u as u32 + 1 && *b == v as u32 + 1)
                    || (*a == v as u32 + 1 && *b == u as u32 + 1)
            });
            if !exists && rng.random::<f64>() < 0.35 {
                edges.push((u as u32 + 1, v as u32 + 1, rng.random_range(50.0..400.0)));
            }
        }
    }
    let topology = Rc::new(Topology::from_edges(&edges, &[]).unwrap());
    let n_slots = rng.random_range(5..=10usize);
    let mut state = NetworkState::new(topology.clone(), n_slots);

    // random occupancy
    for a in 0..topology.num_arcs() {
        for k in 1..=n_slots {
            if rng.random::<f64>() < 0.22 {
                state
                    .occupy_raw(abacus_eon::network::ArcId(a), k, 1)
                    .unwrap();
            }
        }
    }

    let m_count = rng.random_range(1..=2usize);
    let reach_1 = rng.random_range(500.0..1600.0);
    let mut levels = vec![ModulationLevel {
        name: "m1".into(),
        sinr_threshold_db: 12.6,
        reach_km: reach_1,
    }];
    if m_count == 2 {
        levels.push(ModulationLevel {
            name: "m2".into(),
            sinr_threshold_db: 15.6,
            reach_km: reach_1 - rng.random_range(50.0..250.0),
        });
    }
    let mods = ModulationTable::new(levels).unwrap();
    let reach = mods.reach_km();

    let source = rng.random_range(0..n_nodes);
    let mut dest = rng.random_range(0..n_nodes - 1);
    if dest >= source {
        dest += 1;
    }
    let rate = rng.random_range(30.0..320.0);

    let pli = with_pli.then(PliParams::default);

    // up to two pre-existing connections with SINR snapshots, admitted the
    // same way the harness would admit them
    if with_pli {
        let params = pli.as_ref().unwrap();
        for _ in 0..rng.random_range(0..=2usize) {
            let s2 = rng.random_range(0..n_nodes);
            let mut d2 = rng.random_range(0..n_nodes - 1);
            if d2 >= s2 {
                d2 += 1;
            }
            let instance = OracleInstance {
                state: &state,
                mods: &mods,
                objective: ObjectiveKind::Abacus,
                rule: QotRule::Pli(params),
                restricted: None,
                candidate_cap: 200_000,
            };
            let rate2 = rng.random_range(30.0..200.0);
            if let Ok(Some(choice)) = brute_force_rmlsa(&instance, s2, d2, rate2) {
                let coeffs = PliCoefficients::compute(&state, params);
                let arcs = topology.path_arcs(&choice.path).unwrap();
                let rho = abacus_eon::slots_required(rate2, choice.modulation).unwrap();
                let inv = coeffs.candidate_inv_sinr(&arcs, choice.start_slot, rho);
                let existing: Vec<ConnectionId> = state.records().map(|r| r.id).collect();
                for rid in existing {
                    let rec = state.record(rid).unwrap().clone();
                    let delta =
                        coeffs.increments_for(&topology, &rec, &arcs, choice.start_slot, rho);
                    state
                        .update_record(rid, |r| {
                            for (v, d) in r.inv_sinr.iter_mut().zip(&delta) {
                                *v += d;
                            }
                        })
                        .unwrap();
                }
                state
                    .commit_connection(ConnectionRecord {
                        id: ConnectionId(0),
                        source: s2,
                        dest: d2,
                        path: choice.path,
                        modulation: choice.modulation,
                        start_slot: choice.start_slot,
                        num_slots: rho,
                        rate_gbps: rate2,
                        inv_sinr: inv,
                    })
                    .unwrap();
            }
        }
    }

    RandomInstance {
        state,
        mods,
        source,
        dest,
        rate,
        reach,
        pli,
    }
}

fn build_instance_model(
    inst: &RandomInstance,
    objective: ObjectiveKind,
) -> Result<IlpModel, Error> {
    let mut builder = ModelBuilder::new(
        inst.state.topology.clone(),
        inst.state.n_slots(),
        &inst.mods,
        inst.source,
        inst.dest,
        inst.rate,
    )?;
    match objective {
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
    builder.nonoverlap_and_capacity(inst.state.spectrum())?;
    match &inst.pli {
        Some(params) => {
            let coeffs = PliCoefficients::compute(&inst.state, params);
            let limits = SinrLimits::from_table(&inst.mods);
            builder.pli_constraints(&coeffs, &limits, &inst.state)?;
        }
        None => {
            builder.reach_constraint(&inst.reach)?;
        }
    }
    Ok(builder.finish())
}

fn oracle_choice(inst: &RandomInstance, objective: ObjectiveKind) -> Option<OracleChoice> {
    let rule = match &inst.pli {
        Some(params) => QotRule::Pli(params),
        None => QotRule::Reach(&inst.reach),
    };
    let instance = OracleInstance {
        state: &inst.state,
        mods: &inst.mods,
        objective,
        rule,
        restricted: None,
        candidate_cap: 500_000,
    };
    brute_force_rmlsa(&instance, inst.source, inst.dest, inst.rate).unwrap()
}

#[test]
fn criterion_2_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_115);
    let options = SolveOptions::default();
    let mut solved = 0usize;
    let mut blocked = 0usize;

    for round in 0..520 {
        let with_pli = round % 5 >= 3; // 2 in 5 instances exercise impairments
        let objective = if round % 2 == 0 {
            ObjectiveKind::Abacus
        } else {
            ObjectiveKind::Jo
        };
        let inst = random_instance(&mut rng, with_pli);

        let model = match build_instance_model(&inst, objective) {
            Ok(m) => m,
            Err(Error::InfeasibleDemand(_)) => {
                // demand cannot fit at any modulation: the oracle must agree
                assert!(oracle_choice(&inst, objective).is_none(), "round {round}");
                blocked += 1;
                continue;
            }
            Err(e) => panic!("round {round}: {e}"),
        };
        let result = solve(&model, &Backend::Builtin, &options).unwrap();
        let oracle = oracle_choice(&inst, objective);

        match (&result.status, &oracle) {
            (SolveStatus::Optimal, Some(choice)) => {
                let rel =
                    (result.objective - choice.objective).abs() / choice.objective.abs().max(1.0);
                assert!(
                    rel <= 1e-9,
                    "round {round}: solver {} vs oracle {} (path {:?} m{} k{})",
                    result.objective,
                    choice.objective,
                    choice.path,
                    choice.modulation,
                    choice.start_slot
                );
                assert!(model.verify(&result.assignment).is_empty(), "round {round}");
                solved += 1;
            }
            (SolveStatus::Infeasible, None) => blocked += 1,
            (status, oracle) => panic!(
                "round {round}: solver status {status:?} vs oracle {}",
                if oracle.is_some() {
                    "feasible"
                } else {
                    "blocked"
                }
            ),
        }
    }

    let elapsed = started.elapsed();
    assert!(solved + blocked >= 520);
    assert!(
        solved >= 200,
        "want a healthy share of feasible instances, got {solved}"
    );
    assert!(blocked >= 20, "want some blocked instances, got {blocked}");
    assert!(
        elapsed < Duration::from_secs(300),
        "differential run took {elapsed:?}"
    );
    println!(
        "[acceptance] criterion 2 (oracle equivalence): PASS — {solved} optimal + {blocked} \
         blocked agree exactly in {elapsed:?}"
    );
}

#[test]
fn criterion_3_objective_coefficients() {
    for n in [2usize, 5, 40, 110] {
        let topo = Rc::new(Topology::six_node());
        let mods = ModulationTable::default_four();
        let mut b = ModelBuilder::new(topo, n, &mods, 0, 5, 60.0).unwrap();
        b.objective_abacus().unwrap();
        let model = b.finish();
        let view = ModelView::of(&model);
        let arc = abacus_eon::network::ArcId(0);
        let first = model.objective[view.slot_var(arc, 1, 1).0 as usize];
        let last = model.objective[view.slot_var(arc, n, 1).0 as usize];
        assert_eq!(first, 1.0, "N={n}: k=1 coefficient must be exactly 1.0");
        assert_eq!(last, 2.0, "N={n}: k=N coefficient must be exactly 2.0");
        for k in 1..=n {
            for m in 1..=4 {
                let c = model.objective[view.slot_var(arc, k, m).0 as usize];
                assert!(
                    (1.0..=2.0).contains(&c),
                    "N={n} k={k}: coefficient {c} outside [1,2]"
                );
            }
        }
    }
    println!(
        "[acceptance] criterion 3 (objective coefficients): PASS — endpoints exact, range [1,2]"
    );
}

#[test]
fn criterion_4_fragmentation_metric() {
    // both zero conventions
    assert_eq!(link_fragmentation(&SlotMask::new(16)), 0.0);
    let mut full = SlotMask::new(16);
    full.set_range(1, 16);
    assert_eq!(link_fragmentation(&full), 0.0);
    // direct evaluation on the documented pattern
    let m = SlotMask::from_pattern("10010");
    assert!((link_fragmentation(&m) - 1.0 / 3.0).abs() < 1e-12);

    // reversal invariance over randomized masks
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..2000 {
        let n = rng.random_range(1..=48usize);
        let mut fwd = SlotMask::new(n);
        let mut rev = SlotMask::new(n);
        for k in 1..=n {
            if rng.random::<f64>() < 0.4 {
                fwd.set(k);
                rev.set(n + 1 - k);
            }
        }
        let a = link_fragmentation(&fwd);
        let b = link_fragmentation(&rev);
        assert!(
            (a - b).abs() < 1e-12,
            "reversal changed fragmentation: {fwd} vs {rev}"
        );
        assert!((0.0..=1.0).contains(&a));
    }
    println!(
        "[acceptance] criterion 4 (fragmentation metric): PASS — conventions + reversal invariance"
    );
}

#[test]
fn criterion_5_pli_linearity_audit() {
    let topology = Rc::new(Topology::six_node());
    let n_slots = 6usize;
    let mut state = NetworkState::new(topology.clone(), n_slots);
    let params = PliParams::default();
    let mods = ModulationTable::new(vec![
        ModulationLevel {
            name: "m1".into(),
            sinr_threshold_db: 12.6,
            reach_km: 4000.0,
        },
        ModulationLevel {
            name: "m2".into(),
            sinr_threshold_db: 15.6,
            reach_km: 2000.0,
        },
    ])
    .unwrap();

    // seed the spectrum with raw interferers and two tracked connections
    let arc = |u: u32, v: u32| {
        topology
            .arc_between(topology.index_of(u).unwrap(), topology.index_of(v).unwrap())
            .unwrap()
    };
    state.occupy_raw(arc(2, 1), 3, 2).unwrap();
    state.occupy_raw(arc(6, 3), 1, 1).unwrap();
    for (s, d, path, k0, len) in [
        (4u32, 3u32, vec![4u32, 3], 1usize, 2usize),
        (5, 6, vec![5, 6], 4, 2),
    ] {
        let coeffs = PliCoefficients::compute(&state, &params);
        let path_idx: Vec<usize> = path
            .iter()
            .map(|&l| topology.index_of(l).unwrap())
            .collect();
        let arcs = topology.path_arcs(&path_idx).unwrap();
        let inv = coeffs.candidate_inv_sinr(&arcs, k0, len);
        state
            .commit_connection(ConnectionRecord {
                id: ConnectionId(0),
                source: topology.index_of(s).unwrap(),
                dest: topology.index_of(d).unwrap(),
                path: path_idx,
                modulation: 1,
                start_slot: k0,
                num_slots: len,
                rate_gbps: 60.0,
                inv_sinr: inv,
            })
            .unwrap();
    }

    let coeffs = PliCoefficients::compute(&state, &params);
    let limits = SinrLimits::from_table(&mods);
    assert_eq!(
        coeffs.kernel_ratio[0], 0.0,
        "kernel at zero separation must vanish exactly"
    );

    let source = topology.index_of(1).unwrap();
    let dest = topology.index_of(6).unwrap();
    let rate = 90.0; // 3 slots at m1, 2 at m2
    let mut builder =
        ModelBuilder::new(topology.clone(), n_slots, &mods, source, dest, rate).unwrap();
    builder.objective_abacus().unwrap();
    builder.linkage_constraints();
    builder.path_constraints();
    builder.spectrum_constraints().unwrap();
    builder.nonoverlap_and_capacity(state.spectrum()).unwrap();
    builder.pli_constraints(&coeffs, &limits, &state).unwrap();
    let model = builder.finish();
    let view = ModelView::of(&model);

    let eval_expr = |terms: &[(VarId, f64)], dense: &[bool]| -> f64 {
        terms
            .iter()
            .filter(|(v, _)| dense[v.0 as usize])
            .map(|(_, c)| c)
            .sum()
    };

    let rel_close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-30);

    let records: Vec<ConnectionRecord> = state.records().cloned().collect();
    let paths = all_simple_paths(&topology, source, dest, 10_000).unwrap();
    let mut assignments_checked = 0usize;
    for path in &paths {
        let arcs = topology.path_arcs(path).unwrap();
        for (mi, &rho) in model.hints.demand_slots.iter().enumerate() {
            for k0 in 1..=n_slots + 1 - rho {
                let assignment = candidate_assignment(&model, &view, path, mi + 1, k0);
                let mut dense = vec![false; model.num_vars()];
                for v in &assignment.ones {
                    dense[v.0 as usize] = true;
                }

                // shared per-slot noise expressions vs scalar formulas
                for k in 1..=n_slots {
                    let linear = eval_expr(&model.shared[k - 1], &dense);
                    let scalar = coeffs.noise_ratio_at(&arcs, k0, rho, k);
                    assert!(
                        rel_close(linear, scalar),
                        "noise expr k={k}: linear {linear} vs scalar {scalar}"
                    );
                    // family decomposition is consistent with the total
                    let families = coeffs.crosstalk_ratio_at(&arcs, k)
                        + coeffs.nli_ratio_at(&arcs, k0, rho, k)
                        + coeffs.ase_ratio(&arcs);
                    assert!(rel_close(scalar, families));
                }

                // existing-connection rows vs scalar increments
                let mut row_iter = model.rows.iter().filter(|r| r.tag == RowTag::SinrExisting);
                for record in &records {
                    let deltas = coeffs.increments_for(&topology, record, &arcs, k0, rho);
                    for (i, _k) in record.slots().enumerate() {
                        let row = row_iter.next().expect("one row per record slot");
                        let linear = eval_expr(&row.terms, &dense);
                        assert!(
                            rel_close(linear, deltas[i]),
                            "existing-connection increment: linear {linear} vs scalar {}",
                            deltas[i]
                        );
                    }
                }
                assignments_checked += 1;
            }
        }
    }
    assert!(
        assignments_checked >= 50,
        "only {assignments_checked} assignments enumerated"
    );
    println!(
        "[acceptance] criterion 5 (impairment linearity): PASS — {assignments_checked} \
         assignments, every expression within 1e-9"
    );
}

#[test]
fn criterion_6_qot_preservation() {
    // impairment-constrained run: the harness audits after every admission
    // and fails hard if any active connection drops below threshold
    let mut config = ExperimentConfig::default();
    config.n_slots = 12;
    config.traffic = abacus_eon::harness::TrafficSource::Generate {
        mode: abacus_eon::traffic::TrafficMode::StaticBatch,
        seed: 1,
        count: 30,
        load_gbps: 0.0,
    };
    config.pli_enabled = true;
    config.audit_qot = true;
    config.deterministic_timing = true;
    let with_pli = run_experiment(&config).expect("impairment-mode run must keep QoT at 100%");
    assert!(with_pli.admitted > 0, "impairment mode admitted nothing");
    assert_eq!(with_pli.qot_ever_failed, 0);

    // same trace admitted on reach rules only, then audited: failures appear
    let mut no_pli = config.clone();
    no_pli.pli_enabled = false;
    no_pli.audit_qot = true;
    let audited = run_experiment(&no_pli).unwrap();
    assert!(audited.admitted > 0);
    assert!(
        audited.qot_ever_failed > 0,
        "reach-only admission should produce audit failures at this load"
    );
    let pct = 100.0 * audited.qot_ever_failed as f64 / audited.admitted as f64;
    println!(
        "[acceptance] criterion 6 (QoT preservation): PASS — impairment mode 100% clean; \
         reach-only mode {pct:.1}% of {} admissions failed the audit",
        audited.admitted
    );
}

fn dominance_run(seed: u64, count: usize, mode: &str) -> RunOutput {
    let mut config = ExperimentConfig::default();
    config.n_slots = 40;
    config.traffic = abacus_eon::harness::TrafficSource::Generate {
        mode: abacus_eon::traffic::TrafficMode::StaticBatch,
        seed,
        count,
        load_gbps: 0.0,
    };
    // reach values sized so every NSFNET pair is reachable at BPSK: the
    // low-load battery must see capacity effects only, as in the regime
    // where no request blocks
    config.mods = ModulationTable::new(vec![
        ModulationLevel {
            name: "bpsk".into(),
            sinr_threshold_db: 12.6,
            reach_km: 9000.0,
        },
        ModulationLevel {
            name: "qam4".into(),
            sinr_threshold_db: 15.6,
            reach_km: 4500.0,
        },
        ModulationLevel {
            name: "qam8".into(),
            sinr_threshold_db: 19.2,
            reach_km: 2200.0,
        },
        ModulationLevel {
            name: "qam16".into(),
            sinr_threshold_db: 22.4,
            reach_km: 1100.0,
        },
    ])
    .unwrap();
    config.deterministic_timing = true;
    config.apply_override("mode.name", mode).unwrap();
    run_experiment(&config).unwrap()
}

#[test]
fn criterion_7_dominance_trends() {
    let started = Instant::now();
    let seeds: Vec<u64> = (1..=5).collect();

    // load low enough that nothing blocks: compare slots and fragmentation
    let mut fsus = [0.0f64; 3];
    let mut frag = [0.0f64; 3];
    for &seed in &seeds {
        for (i, mode) in ["abacus", "ksp2", "ksp3"].iter().enumerate() {
            let out = dominance_run(seed, 30, mode);
            assert_eq!(
                out.blocked, 0,
                "seed {seed} mode {mode} blocked at calibration load"
            );
            fsus[i] += out.ledger.final_fsus_in_use() as f64 / seeds.len() as f64;
            frag[i] += out.ledger.mean_fragmentation() / seeds.len() as f64;
        }
    }
    assert!(
        fsus[0] <= fsus[1] && fsus[0] <= fsus[2],
        "mean FSUs: abacus {} vs ksp2 {} / ksp3 {}",
        fsus[0],
        fsus[1],
        fsus[2]
    );
    assert!(
        frag[0] <= frag[1] && frag[0] <= frag[2],
        "mean fragmentation: abacus {} vs ksp2 {} / ksp3 {}",
        frag[0],
        frag[1],
        frag[2]
    );

    // moderate overload (~15% past the no-blocking knee, the regime the
    // reported blocking comparison uses): per-trace blocked bandwidth,
    // joint never worse
    let mut any_blocking = false;
    let mut blocking_rows = Vec::new();
    for &seed in &seeds {
        let a = dominance_run(seed, 60, "abacus");
        let k2 = dominance_run(seed, 60, "ksp2");
        let k3 = dominance_run(seed, 60, "ksp3");
        let (ba, b2, b3) = (
            a.ledger.bandwidth_blocking(),
            k2.ledger.bandwidth_blocking(),
            k3.ledger.bandwidth_blocking(),
        );
        assert!(
            ba <= b2 + 1e-12,
            "seed {seed}: joint blocking {ba} > ksp2 {b2}"
        );
        assert!(
            ba <= b3 + 1e-12,
            "seed {seed}: joint blocking {ba} > ksp3 {b3}"
        );
        any_blocking |= b2 > 0.0 || b3 > 0.0;
        blocking_rows.push((seed, ba, b2, b3));
    }
    assert!(
        any_blocking,
        "blocking comparison is vacuous: raise the load"
    );

    let saved2 = 100.0 * (fsus[1] - fsus[0]) / fsus[1];
    let saved3 = 100.0 * (fsus[2] - fsus[0]) / fsus[2];
    let frag_red2 = 100.0 * (frag[1] - frag[0]) / frag[1].max(1e-12);
    println!(
        "[acceptance] criterion 7 (dominance trends): PASS — FSUs saved vs ksp2 {saved2:.2}% / \
         ksp3 {saved3:.2}%, fragmentation reduced {frag_red2:.1}% vs ksp2; blocking per seed \
         {blocking_rows:?} ({:?})",
        started.elapsed()
    );
}

#[test]
fn criterion_8_determinism() {
    let dir = std::env::temp_dir().join(format!("abacus-accept8-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut config = ExperimentConfig::default();
    config.n_slots = 40;
    config.traffic = abacus_eon::harness::TrafficSource::Generate {
        mode: abacus_eon::traffic::TrafficMode::Dynamic,
        seed: 11,
        count: 25,
        load_gbps: 9000.0,
    };
    config.deterministic_timing = true;

    config.ledger_path = Some(dir.join("run_a.csv"));
    run_experiment(&config).unwrap();
    config.ledger_path = Some(dir.join("run_b.csv"));
    run_experiment(&config).unwrap();

    let a = std::fs::read(dir.join("run_a.csv")).unwrap();
    let b = std::fs::read(dir.join("run_b.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "ledger bytes differ between identical runs");
    println!(
        "[acceptance] criterion 8 (determinism): PASS — byte-identical ledgers ({} bytes)",
        a.len()
    );
}

#[test]
fn criterion_9_external_adapter_timing() {
    let topology = Rc::new(Topology::nsfnet14());
    let state = NetworkState::new(topology.clone(), 40);
    let mods = ModulationTable::default_four();
    let source = topology.index_of(1).unwrap();
    let dest = topology.index_of(12).unwrap();
    let mut builder = ModelBuilder::new(topology, 40, &mods, source, dest, 700.0).unwrap();
    builder.objective_abacus().unwrap();
    builder.linkage_constraints();
    builder.path_constraints();
    builder.spectrum_constraints().unwrap();
    builder.nonoverlap_and_capacity(state.spectrum()).unwrap();
    builder.reach_constraint(&mods.reach_km()).unwrap();
    let model = builder.finish();

    let backend = Backend::Command {
        template: format!(
            "{} {{model}} {{solution}} --time-limit {{time_limit}}",
            env!("CARGO_BIN_EXE_abacus-lp-solve")
        ),
        workdir: None,
        keep_files: false,
    };
    let started = Instant::now();
    let result = solve(
        &model,
        &backend,
        &SolveOptions {
            time_limit: Duration::from_secs(55),
            candidate_cap: 20_000_000,
        },
    )
    .unwrap();
    let elapsed = started.elapsed();

    assert_eq!(result.status, SolveStatus::Optimal);
    assert!(model.verify(&result.assignment).is_empty());
    assert!(
        elapsed < Duration::from_secs(60),
        "external-adapter solve took {elapsed:?}"
    );

    // the round trip through LP text changes nothing about the optimum
    let direct = solve(&model, &Backend::Builtin, &SolveOptions::default()).unwrap();
    assert!((direct.objective - result.objective).abs() <= 1e-9 * direct.objective.abs());
    println!(
        "[acceptance] criterion 9 (external adapter timing): PASS — {} vars solved through LP \
         files in {elapsed:?}",
        model.num_vars()
    );
}
