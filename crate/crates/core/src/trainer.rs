//! Experiment orchestration: single training runs (optionally margin
//! regularised), the iterative dropout scheme, and experiment matrices with
//! per-run and per-cell CSV output.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annealer::{
    anneal, tune_temperatures, AnnealConfig, Schedule, SweepOrder, DEFAULT_BETA_END, DEFAULT_BETA_START,
    DEFAULT_REPLICAS, DEFAULT_STEPS, DEFAULT_TUNE_BUDGET,
};
use crate::builder::{build, Audit, BuildParams, ExternalField, VariableMap};
use crate::dataset::{generate_canonical, Dataset};
use crate::error::{arg_err, Result};
use crate::evaluator::{decode, EvalReport, Provenance, TrainedNetwork};
use crate::mix_seed;
use crate::topology::{Architecture, NodeId, NodeKind, Topology};

/// The penalty scale on the product constraints is fixed.
pub const ALPHA: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: EvalReport,
    pub net: TrainedNetwork,
    pub audit: Audit,
    pub energy: f64,
    pub state: Vec<u8>,
    pub vm: VariableMap,
}

impl TrainOutcome {
    pub fn feasible(&self) -> bool {
        self.audit.is_feasible()
    }
}

fn solve_and_evaluate(
    t: &Topology,
    ds: &Dataset,
    params: &BuildParams,
    cfg: &AnnealConfig,
    provenance: Provenance,
) -> Result<TrainOutcome> {
    let (q, vm) = build(t, &ds.train_samples(), params)?;
    let out = anneal(&q, cfg);
    let audit = vm.audit(&out.best_state)?;
    let mut net = decode(&vm, &out.best_state);
    net.provenance = provenance;
    let report = net.evaluate(ds, &audit)?;
    Ok(TrainOutcome {
        report,
        net,
        audit,
        energy: out.best_energy,
        state: out.best_state,
        vm,
    })
}

/// Trains on the four training images by minimising `H1 + H2 − γ·H_som`
/// and evaluates on the whole dataset.
pub fn train_once(t: &Topology, ds: &Dataset, gamma: f64, cfg: &AnnealConfig) -> Result<TrainOutcome> {
    if gamma.is_nan() || gamma < 0.0 {
        return arg_err("gamma must be non-negative");
    }
    let params = BuildParams { alpha: ALPHA, gamma, ..Default::default() };
    let prov = Provenance { seed: cfg.seed, gamma, eta: 0.0, run: 0 };
    solve_and_evaluate(t, ds, &params, cfg, prov)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutParams {
    pub eta: f64,
    pub beta: f64,
    pub iterations: usize,
    pub input_drop_count: usize,
    pub hidden_drop_count: usize,
    pub seed: u64,
}

impl DropoutParams {
    fn validate(&self, t: &Topology) -> Result<()> {
        if self.eta.is_nan() || self.eta < 0.0 {
            return arg_err("eta must be non-negative");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return arg_err("beta must lie in (0, 1]");
        }
        if self.iterations == 0 {
            return arg_err("at least one dropout iteration is required");
        }
        if self.input_drop_count > t.inputs().len() {
            return arg_err("cannot drop more inputs than exist");
        }
        let hidden = t.active_nodes().filter(|&j| t.kind(j) == NodeKind::Hidden).count();
        if self.hidden_drop_count > hidden {
            return arg_err("cannot drop more hidden neurons than exist");
        }
        Ok(())
    }
}

/// Weight and bias factors accumulated by the dropout iterations.
pub type FactorState = ExternalField;

/// `c ← c + η·β^n_usc·p` for every parameter `p` that survives in `reduced`.
pub fn update_factors(
    factors: &mut FactorState,
    reduced: &Topology,
    net: &TrainedNetwork,
    eta: f64,
    beta: f64,
    n_usc: usize,
) {
    let step = eta * beta.powi(n_usc as i32);
    for g in reduced.active_groups() {
        factors.weights[g.0] += step * net.weights[g.0] as f64;
    }
    for j in reduced.neurons() {
        factors.biases[j.0] += step * net.biases[j.0] as f64;
    }
}

/// Uniform draw without replacement of inputs and hidden neurons to drop.
pub fn draw_drop_set(t: &Topology, inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> BTreeSet<NodeId> {
    let ins: Vec<NodeId> = t.inputs().iter().copied().filter(|&n| t.is_active(n)).collect();
    let hid: Vec<NodeId> = t.active_nodes().filter(|&j| t.kind(j) == NodeKind::Hidden).collect();
    ins.choose_multiple(rng, inputs)
        .chain(hid.choose_multiple(rng, hidden))
        .copied()
        .collect()
}

/// Iterative dropout training. Intermediate reduced networks are annealed
/// at the fixed default inverse temperatures; the final full-network phase
/// uses `cfg` as given.
pub fn train_dropout(t: &Topology, ds: &Dataset, dp: &DropoutParams, cfg: &AnnealConfig) -> Result<TrainOutcome> {
    dp.validate(t)?;
    let batch = ds.train_samples();
    let mut factors = FactorState::zeros(t);
    let mut rng = ChaCha8Rng::seed_from_u64(dp.seed);
    let fixed = Schedule::from_betas(DEFAULT_BETA_START, DEFAULT_BETA_END, cfg.schedule.n_steps)?;
    for i in 0..dp.iterations {
        let drop = draw_drop_set(t, dp.input_drop_count, dp.hidden_drop_count, &mut rng);
        let reduced = t.remove_nodes(&drop)?;
        let params = BuildParams { alpha: ALPHA, external: Some(factors.clone()), ..Default::default() };
        let (q, vm) = build(&reduced, &batch, &params)?;
        let icfg = AnnealConfig { schedule: fixed, seed: mix_seed(&[cfg.seed, dp.seed, i as u64 + 1]), ..*cfg };
        let out = anneal(&q, &icfg);
        let n_usc = vm.audit(&out.best_state)?.unsat();
        let net = decode(&vm, &out.best_state);
        update_factors(&mut factors, &reduced, &net, dp.eta, dp.beta, n_usc);
    }
    let params = BuildParams { alpha: ALPHA, external: Some(factors), ..Default::default() };
    let prov = Provenance { seed: cfg.seed, gamma: 0.0, eta: dp.eta, run: 0 };
    solve_and_evaluate(t, ds, &params, cfg, prov)
}

fn default_gammas() -> Vec<f64> {
    vec![0.0]
}

fn default_beta() -> f64 {
    0.1
}

fn default_iterations() -> usize {
    10
}

fn default_input_drop() -> usize {
    5
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropoutGrid {
    pub etas: Vec<f64>,
    pub n_drops: Vec<usize>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_input_drop")]
    pub input_drop_count: usize,
    /// Adds a cell trained without dropout for comparison.
    #[serde(default = "yes")]
    pub baseline: bool,
}

/// Annealer settings; unset fields fall back to the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealerOverrides {
    pub replicas: Option<usize>,
    pub steps: Option<usize>,
    pub t_max: Option<f64>,
    pub t_min: Option<f64>,
    pub sweep_order: Option<SweepOrder>,
    /// Tune temperatures once per cell with Nelder–Mead.
    #[serde(default)]
    pub tune: bool,
    pub tune_budget: Option<usize>,
    /// Replica count of the pilot runs used while tuning.
    pub tune_replicas: Option<usize>,
}

impl AnnealerOverrides {
    /// Fields set in `other` win.
    pub fn merged(&self, other: &AnnealerOverrides) -> AnnealerOverrides {
        AnnealerOverrides {
            replicas: other.replicas.or(self.replicas),
            steps: other.steps.or(self.steps),
            t_max: other.t_max.or(self.t_max),
            t_min: other.t_min.or(self.t_min),
            sweep_order: other.sweep_order.or(self.sweep_order),
            tune: self.tune || other.tune,
            tune_budget: other.tune_budget.or(self.tune_budget),
            tune_replicas: other.tune_replicas.or(self.tune_replicas),
        }
    }

    pub fn config(&self, seed: u64) -> Result<AnnealConfig> {
        let steps = self.steps.unwrap_or(DEFAULT_STEPS);
        let schedule = Schedule::new(
            self.t_max.unwrap_or(1.0 / DEFAULT_BETA_START),
            self.t_min.unwrap_or(1.0 / DEFAULT_BETA_END),
            steps,
        )?;
        Ok(AnnealConfig {
            n_replicas: self.replicas.unwrap_or(DEFAULT_REPLICAS),
            schedule,
            seed,
            sweep_order: self.sweep_order.unwrap_or(SweepOrder::Randomized),
        })
    }

    pub fn budget(&self) -> usize {
        self.tune_budget.unwrap_or(DEFAULT_TUNE_BUDGET)
    }
}

/// Tunes the schedule of `base` on the plain (or margin-augmented) training
/// model of `t`.
pub fn tuned_config(
    t: &Topology,
    ds: &Dataset,
    gamma: f64,
    base: &AnnealConfig,
    pilot_replicas: usize,
    budget: usize,
) -> Result<AnnealConfig> {
    let (q, _) = build(t, &ds.train_samples(), &BuildParams { alpha: ALPHA, gamma, ..Default::default() })?;
    let pilot = AnnealConfig { n_replicas: pilot_replicas, ..*base };
    Ok(base.with_schedule(tune_temperatures(&q, &pilot, budget)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub architectures: Vec<Architecture>,
    /// Margin factors; ignored when a dropout grid is present.
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub dropout: Option<DropoutGrid>,
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dataset_seed: u64,
    #[serde(default)]
    pub annealer: AnnealerOverrides,
}

impl ExperimentSpec {
    pub fn from_json(s: &str) -> Result<ExperimentSpec> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &arch in &self.architectures {
            match &self.dropout {
                None => {
                    for &gamma in &self.gammas {
                        cells.push(Cell { arch, gamma, eta: 0.0, n_drop: None });
                    }
                }
                Some(grid) => {
                    if grid.baseline {
                        cells.push(Cell { arch, gamma: 0.0, eta: 0.0, n_drop: None });
                    }
                    for &eta in &grid.etas {
                        for &n in &grid.n_drops {
                            cells.push(Cell { arch, gamma: 0.0, eta, n_drop: Some(n) });
                        }
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub arch: Architecture,
    pub gamma: f64,
    pub eta: f64,
    /// Hidden neurons dropped per iteration; `None` means no dropout.
    pub n_drop: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub network: String,
    pub gamma: f64,
    pub eta: f64,
    pub n_drop: Option<usize>,
    pub seed: u64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub s1: u64,
    pub s2: u64,
    pub unsat_frac: f64,
    pub energy: f64,
    pub feasible: bool,
}

impl RunRow {
    fn new(cell: &Cell, seed: u64, o: &TrainOutcome) -> RunRow {
        RunRow {
            network: cell.arch.to_string(),
            gamma: cell.gamma,
            eta: cell.eta,
            n_drop: cell.n_drop,
            seed,
            train_acc: o.report.train_accuracy,
            test_acc: o.report.test_accuracy,
            s1: o.report.s1,
            s2: o.report.s2,
            unsat_frac: o.report.unsat_fraction,
            energy: o.energy,
            feasible: o.feasible(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub network: String,
    pub gamma: f64,
    pub eta: f64,
    pub n_drop: Option<usize>,
    pub runs: usize,
    pub test_min: f64,
    pub test_max: f64,
    pub test_mean: f64,
    pub test_median: f64,
    pub train_mean: f64,
    /// Mean unsatisfied-constraint fraction, in percent.
    pub unsat_mean_pct: f64,
    pub s1_mean: f64,
    pub s2_mean: f64,
    pub feasible_frac: f64,
    pub t_max: f64,
    pub t_min: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Summary statistics of the rows of one cell.
pub fn summarize(cell: &Cell, rows: &[RunRow], schedule: &Schedule) -> SummaryRow {
    let tests: Vec<f64> = rows.iter().map(|r| r.test_acc).collect();
    SummaryRow {
        network: cell.arch.to_string(),
        gamma: cell.gamma,
        eta: cell.eta,
        n_drop: cell.n_drop,
        runs: rows.len(),
        test_min: tests.iter().cloned().fold(f64::INFINITY, f64::min),
        test_max: tests.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        test_mean: mean(tests.iter().cloned()),
        test_median: median(&tests),
        train_mean: mean(rows.iter().map(|r| r.train_acc)),
        unsat_mean_pct: 100.0 * mean(rows.iter().map(|r| r.unsat_frac)),
        s1_mean: mean(rows.iter().map(|r| r.s1 as f64)),
        s2_mean: mean(rows.iter().map(|r| r.s2 as f64)),
        feasible_frac: mean(rows.iter().map(|r| r.feasible as u8 as f64)),
        t_max: schedule.t_max,
        t_min: schedule.t_min,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixResults {
    pub rows: Vec<RunRow>,
    pub summaries: Vec<SummaryRow>,
}

impl MatrixResults {
    pub fn write_csv(&self, runs_path: impl AsRef<Path>, summary_path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(runs_path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(summary_path)?;
        for s in &self.summaries {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every cell of the matrix `spec.runs` times with seeds derived from
/// `(spec.seed, cell index, run index)`.
pub fn run_experiment_matrix(spec: &ExperimentSpec) -> Result<MatrixResults> {
    if spec.runs == 0 {
        return arg_err("runs must be at least 1");
    }
    let ds = generate_canonical(spec.dataset_seed);
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (ci, cell) in spec.cells().iter().enumerate() {
        let t = cell.arch.build(crate::dataset::SIDE)?;
        let base = spec.annealer.config(mix_seed(&[spec.seed, ci as u64]))?;
        let cfg = if spec.annealer.tune {
            let pilots = spec.annealer.tune_replicas.unwrap_or(base.n_replicas);
            tuned_config(&t, &ds, cell.gamma, &base, pilots, spec.annealer.budget())?
        } else {
            base
        };
        let cell_rows: Vec<RunRow> = (0..spec.runs)
            .into_par_iter()
            .map(|run| -> Result<RunRow> {
                let seed = mix_seed(&[spec.seed, ci as u64, run as u64]);
                let rcfg = cfg.with_seed(seed);
                let outcome = match (&spec.dropout, cell.n_drop) {
                    (Some(grid), Some(n_drop)) => {
                        let dp = DropoutParams {
                            eta: cell.eta,
                            beta: grid.beta,
                            iterations: grid.iterations,
                            input_drop_count: grid.input_drop_count,
                            hidden_drop_count: n_drop,
                            seed,
                        };
                        train_dropout(&t, &ds, &dp, &rcfg)?
                    }
                    _ => train_once(&t, &ds, cell.gamma, &rcfg)?,
                };
                Ok(RunRow::new(cell, seed, &outcome))
            })
            .collect::<Result<_>>()?;
        summaries.push(summarize(cell, &cell_rows, &cfg.schedule));
        rows.extend(cell_rows);
    }
    Ok(MatrixResults { rows, summaries })
}
