//! Acceptance gate. Every criterion prints one `[PASS]` or `[FAIL]` line to
//! stderr (uncaptured) and then asserts.
//!
//! Annealing budgets are reduced from the 1000-replica default so the
//! statistical criteria finish in minutes on a single core; thresholds are
//! unchanged.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qbnn::annealer::{anneal, AnnealConfig, Schedule, SweepOrder};
use qbnn::builder::{build, product_penalty, BuildParams};
use qbnn::dataset::{generate_canonical, Dataset, Sample, SIDE};
use qbnn::evaluator::TrainedNetwork;
use qbnn::mix_seed;
use qbnn::oracle::{activation_table, verify_equivalence, MAX_PARAMS};
use qbnn::qubo::QuboModel;
use qbnn::topology::{NodeId, NodeKind, Topology, BENCHMARK_NETWORKS};
use qbnn::trainer::{
    draw_drop_set, train_dropout, train_once, tuned_config, update_factors, DropoutParams, FactorState,
    TrainOutcome,
};

const STEPS: usize = 1000;
const REPLICAS: usize = 128;
const DROPOUT_REPLICAS: usize = 96;
const PILOT_REPLICAS: usize = 32;
const TUNE_BUDGET: usize = 30;
const NET10_RUNS: usize = 50;
const DROPOUT_RUNS: usize = 30;
const MASTER_SEED: u64 = 20_240_601;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] criterion {id} {name}: {detail}");
}

fn base_config(replicas: usize, seed: u64) -> AnnealConfig {
    AnnealConfig {
        n_replicas: replicas,
        schedule: Schedule::default_with_steps(STEPS),
        seed,
        sweep_order: SweepOrder::Randomized,
    }
}

fn dataset() -> Dataset {
    generate_canonical(0)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn criterion_1_encoding() {
    let start = Instant::now();
    let theorem = (1..=12).all(qbnn::oracle::verify_expansion_theorem);

    type Row = ([i8; 3], [u8; 3], i32, u32, [u8; 2], u8, i8);
    #[rustfmt::skip]
    let table: [Row; 8] = [
        ([-1, -1, -1], [0, 0, 0], -3, 0, [0, 0], 0, -1),
        ([-1, -1,  1], [0, 0, 1], -1, 1, [0, 1], 0, -1),
        ([-1,  1, -1], [0, 1, 0], -1, 1, [0, 1], 0, -1),
        ([-1,  1,  1], [0, 1, 1],  1, 2, [1, 0], 1,  1),
        ([ 1, -1, -1], [1, 0, 0], -1, 1, [0, 1], 0, -1),
        ([ 1, -1,  1], [1, 0, 1],  1, 2, [1, 0], 1,  1),
        ([ 1,  1, -1], [1, 1, 0],  1, 2, [1, 0], 1,  1),
        ([ 1,  1,  1], [1, 1, 1],  3, 3, [1, 1], 1,  1),
    ];
    let rows = activation_table();
    let table_ok = rows.len() == 8
        && rows.iter().zip(table.iter()).all(|(r, &(xb, bits, pi, rho, s, y3, x3))| {
            [r.x[0], r.x[1], r.b] == xb
                && [r.y[0], r.y[1], r.d] == bits
                && r.pi == pi
                && r.rho == rho
                && r.s == s
                && r.y3 == y3
                && r.x3 == x3
        });

    let mut truth_ok = true;
    for x in 0..2u8 {
        for y in 0..2u8 {
            for psi in 0..2u8 {
                let p = product_penalty(x, y, psi);
                truth_ok &= p >= 0 && (p == 0) == (psi == x & y);
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = theorem && table_ok && truth_ok && elapsed < Duration::from_secs(5);
    report(
        1,
        "encoding correctness",
        pass,
        &format!("theorem m<=12 {theorem}, activation table {table_ok}, product truth table {truth_ok}, {elapsed:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_2_model_sizes() {
    const TABLE: [(usize, usize, usize, usize, usize); 18] = [
        (43, 96, 246, 72, 200),
        (47, 136, 466, 88, 376),
        (36, 99, 146, 44, 116),
        (45, 198, 290, 80, 224),
        (40, 125, 296, 60, 236),
        (31, 72, 78, 24, 56),
        (35, 144, 154, 40, 104),
        (39, 168, 294, 56, 216),
        (28, 27, 42, 12, 20),
        (29, 54, 82, 16, 32),
        (30, 81, 122, 20, 44),
        (31, 108, 162, 24, 56),
        (32, 135, 202, 28, 68),
        (33, 162, 242, 32, 80),
        (34, 189, 282, 36, 92),
        (35, 216, 322, 40, 104),
        (36, 243, 362, 44, 116),
        (37, 270, 402, 48, 128),
    ];
    let start = Instant::now();
    let batch = dataset().train_samples();
    let mut mismatches = Vec::new();
    for (i, arch) in BENCHMARK_NETWORKS.iter().enumerate() {
        let t = arch.build(SIDE).unwrap();
        let (_, vm) = build(&t, &batch, &BuildParams::default()).unwrap();
        let c = vm.counts();
        let got = (t.active_node_count(), t.connections().len(), c.binary, c.integer, c.constraints);
        if got != TABLE[i] {
            mismatches.push(format!("net{i}: {got:?} != {:?}", TABLE[i]));
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches.is_empty() && elapsed < Duration::from_secs(1);
    report(
        2,
        "model-size reproduction",
        pass,
        &format!("18 architectures, {} mismatches {mismatches:?}, {elapsed:.2?}", mismatches.len()),
    );
    assert!(pass);
}

/// Random acyclic topology with at most `MAX_PARAMS` parameters.
fn random_tiny(rng: &mut ChaCha8Rng) -> (Topology, Vec<Sample>) {
    loop {
        let n_in = rng.gen_range(1..=3);
        let n_hidden = rng.gen_range(0..=2);
        let n_out = rng.gen_range(1..=2);
        let mut kinds = vec![NodeKind::Input; n_in];
        kinds.extend(std::iter::repeat_n(NodeKind::Hidden, n_hidden));
        kinds.extend(std::iter::repeat_n(NodeKind::Output, n_out));
        let mut edges = Vec::new();
        for dst in n_in..kinds.len() {
            let sources: Vec<usize> = (0..dst).filter(|&s| kinds[s] != NodeKind::Output).collect();
            let mut chosen: Vec<usize> = sources.iter().copied().filter(|_| rng.gen_bool(0.6)).collect();
            if chosen.is_empty() {
                chosen.push(*sources.choose(rng).unwrap());
            }
            edges.extend(chosen.into_iter().map(|s| (s, dst)));
        }
        let params = edges.len() + n_hidden + n_out;
        if params > MAX_PARAMS {
            continue;
        }
        let t = Topology::from_edges(kinds, &edges).unwrap();
        let k = rng.gen_range(2..=4);
        let bip = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { 1i8 } else { -1 };
        let batch = (0..k)
            .map(|_| Sample {
                inputs: (0..n_in).map(|_| bip(rng)).collect(),
                targets: (0..n_out).map(|_| bip(rng)).collect(),
            })
            .collect();
        return (t, batch);
    }
}

#[test]
fn criterion_3_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let instances: Vec<_> = (0..24).map(|_| random_tiny(&mut rng)).collect();
    let reports: Vec<_> = instances
        .par_iter()
        .map(|(t, b)| verify_equivalence(t, b).unwrap())
        .collect();
    let held = reports.iter().filter(|r| r.holds).count();
    let fits = reports.iter().filter(|r| r.exists_fit).count();
    let exhaustive = reports.iter().filter(|r| r.exhaustive).count();
    let elapsed = start.elapsed();
    let pass = held == reports.len() && elapsed < Duration::from_secs(120);
    report(
        3,
        "oracle equivalence",
        pass,
        &format!(
            "{held}/{} instances hold ({fits} fittable, {exhaustive} exhaustive), {elapsed:.2?}",
            reports.len()
        ),
    );
    assert!(pass);
}

struct Net10Runs {
    baseline: Vec<TrainOutcome>,
    margin: Vec<TrainOutcome>,
}

fn net10_cell(ds: &Dataset, t: &Topology, cell: u64, gamma: f64) -> Vec<TrainOutcome> {
    let base = base_config(REPLICAS, mix_seed(&[MASTER_SEED, cell]));
    let cfg = tuned_config(t, ds, gamma, &base, PILOT_REPLICAS, TUNE_BUDGET).unwrap();
    (0..NET10_RUNS)
        .into_par_iter()
        .map(|run| {
            let c = cfg.with_seed(mix_seed(&[MASTER_SEED, cell, run as u64]));
            train_once(t, ds, gamma, &c).unwrap()
        })
        .collect()
}

fn net10_runs() -> &'static Net10Runs {
    static RUNS: OnceLock<Net10Runs> = OnceLock::new();
    RUNS.get_or_init(|| {
        let ds = dataset();
        let t = BENCHMARK_NETWORKS[10].build(SIDE).unwrap();
        Net10Runs {
            baseline: net10_cell(&ds, &t, 0, 0.0),
            margin: net10_cell(&ds, &t, 1, 0.02),
        }
    })
}

#[test]
fn criterion_4_feasible_training() {
    let runs = &net10_runs().baseline;
    let good = runs
        .iter()
        .filter(|o| o.energy.abs() < 1e-9 && o.report.train_accuracy == 1.0)
        .count();
    let frac = good as f64 / runs.len() as f64;
    let pass = frac >= 0.9;
    report(
        4,
        "feasible training",
        pass,
        &format!("{good}/{} Net10 runs reach E=0 with train accuracy 1.0 ({:.0}%)", runs.len(), 100.0 * frac),
    );
    assert!(pass);
}

#[test]
fn criterion_5_margin_effect() {
    let r = net10_runs();
    let acc0 = mean(r.baseline.iter().map(|o| o.report.test_accuracy));
    let acc2 = mean(r.margin.iter().map(|o| o.report.test_accuracy));
    let s2_0 = mean(r.baseline.iter().map(|o| o.report.s2 as f64));
    let s2_2 = mean(r.margin.iter().map(|o| o.report.s2 as f64));
    let pass = acc2 - acc0 >= 0.05 && s2_2 > s2_0;
    report(
        5,
        "margin regularisation effect",
        pass,
        &format!("test accuracy {acc0:.3} -> {acc2:.3}, mean S2 {s2_0:.2} -> {s2_2:.2}"),
    );
    assert!(pass);
}

#[test]
fn criterion_6_margin_identity() {
    let ds = dataset();
    let batch = ds.train_samples();
    let r = net10_runs();
    let mut checked = 0;
    let mut failures = 0;
    for o in r.baseline.iter().chain(r.margin.iter()).filter(|o| o.feasible()) {
        checked += 1;
        let (_, s2) = o.net.margins(&batch).unwrap();
        let h_som = o.vm.h_som(&o.state).unwrap();
        let rows = o.net.abs_preactivations(&batch).unwrap();
        let terms = o.vm.margin_terms(&o.state).unwrap();
        let nodewise = terms.iter().all(|&(j, k, v)| {
            let row = rows.iter().find(|(n, _)| *n == j).unwrap();
            v == row.1[k] as f64
        });
        if h_som != s2 as f64 || !nodewise {
            failures += 1;
        }
    }
    let pass = checked > 0 && failures == 0;
    report(
        6,
        "margin identity",
        pass,
        &format!("{checked} feasible solutions checked, {failures} mismatches"),
    );
    assert!(pass);
}

#[test]
fn criterion_7_overweighted_margin() {
    let ds = dataset();
    let t = BENCHMARK_NETWORKS[10].build(SIDE).unwrap();
    let runs = net10_cell(&ds, &t, 2, 0.12);
    let unsat = mean(runs.iter().map(|o| o.report.unsat_fraction));
    let train = mean(runs.iter().map(|o| o.report.train_accuracy));
    let pass = unsat > 0.0 && train < 1.0;
    report(
        7,
        "over-weighted margin degradation",
        pass,
        &format!("{} runs at gamma 0.12: mean unsatisfied {:.2}%, mean train accuracy {train:.3}", runs.len(), 100.0 * unsat),
    );
    assert!(pass);
}

/// Applies a synthesized sequence of reduced networks with `β = 1` and
/// compares it with the plain sum `η·Σ p` over survivors.
fn beta_one_reduction_holds(seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = BENCHMARK_NETWORKS[12].build(SIDE).unwrap();
    let eta = 0.25;
    let mut damped = FactorState::zeros(&t);
    let mut plain = FactorState::zeros(&t);
    for _ in 0..10 {
        let drop: BTreeSet<NodeId> = draw_drop_set(&t, 5, 1, &mut rng);
        let reduced = t.remove_nodes(&drop).unwrap();
        let bip = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { 1i8 } else { -1 };
        let w: Vec<i8> = (0..t.group_count()).map(|_| bip(&mut rng)).collect();
        let b: Vec<i8> = (0..t.node_count()).map(|_| bip(&mut rng)).collect();
        let net = TrainedNetwork::new(t.clone(), w.clone(), b.clone()).unwrap();
        let n_usc = rng.gen_range(0..40);
        update_factors(&mut damped, &reduced, &net, eta, 1.0, n_usc);
        for g in reduced.active_groups() {
            plain.weights[g.0] += eta * w[g.0] as f64;
        }
        for j in reduced.neurons() {
            plain.biases[j.0] += eta * b[j.0] as f64;
        }
    }
    damped == plain
}

#[test]
fn criterion_8_dropout_pipeline() {
    let ds = dataset();
    let t = BENCHMARK_NETWORKS[12].build(SIDE).unwrap();
    let base = base_config(DROPOUT_REPLICAS, mix_seed(&[MASTER_SEED, 3]));
    let cfg = tuned_config(&t, &ds, 0.0, &base, PILOT_REPLICAS, TUNE_BUDGET).unwrap();
    let runs: Vec<TrainOutcome> = (0..DROPOUT_RUNS)
        .into_par_iter()
        .map(|run| {
            let seed = mix_seed(&[MASTER_SEED, 3, run as u64]);
            let dp = DropoutParams {
                eta: 0.01,
                beta: 0.1,
                iterations: 10,
                input_drop_count: 5,
                hidden_drop_count: 1,
                seed,
            };
            train_dropout(&t, &ds, &dp, &cfg.with_seed(seed)).unwrap()
        })
        .collect();
    let train = mean(runs.iter().map(|o| o.report.train_accuracy));
    let feasible = runs.iter().filter(|o| o.feasible()).count();
    let reduction = (0..20).all(beta_one_reduction_holds);
    let pass = train >= 0.95 && feasible as f64 >= 0.9 * runs.len() as f64 && reduction;
    report(
        8,
        "dropout pipeline",
        pass,
        &format!(
            "Net12 eta 0.01 n_drop 1: mean train {train:.3}, {feasible}/{} final phases feasible, beta=1 reduction {reduction}",
            runs.len()
        ),
    );
    assert!(pass);
}

fn flip_sequences_agree(q: &QuboModel, sequences: usize, flips: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = q.num_vars();
    let mut worst = 0.0f64;
    for _ in 0..sequences {
        let mut z: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let mut running = q.energy(&z).unwrap();
        for _ in 0..flips {
            let i = rng.gen_range(0..n);
            running += q.delta_energy(&z, i).unwrap();
            z[i] ^= 1;
        }
        let full = q.energy(&z).unwrap();
        worst = worst.max((running - full).abs() / full.abs().max(1.0));
    }
    worst
}

#[test]
fn criterion_9_determinism_and_bookkeeping() {
    let ds = dataset();
    let t = BENCHMARK_NETWORKS[10].build(SIDE).unwrap();
    let (q, _) = build(&t, &ds.train_samples(), &BuildParams::with_gamma(0.02)).unwrap();
    let cfg = AnnealConfig { n_replicas: 8, schedule: Schedule::default_with_steps(200), ..base_config(8, 99) };
    let run_in = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| anneal(&q, &cfg))
    };
    let one = run_in(1);
    let four = run_in(4);
    let again = run_in(4);
    let deterministic = one == four && four == again;
    let incremental = flip_sequences_agree(&q, 1000, 200, 7);
    let pass = deterministic && incremental <= 1e-6 && one.bookkeeping_error <= 1e-6;
    report(
        9,
        "annealer determinism and bookkeeping",
        pass,
        &format!(
            "1 vs 4 threads identical {deterministic}, worst flip-sequence error {incremental:.2e}, annealer bookkeeping {:.2e}",
            one.bookkeeping_error
        ),
    );
    assert!(pass);
}
