//! Replica-parallel simulated annealing with single-bit Metropolis moves and
//! a geometric cooling schedule.
//!
//! Every replica draws from its own ChaCha stream selected by the replica
//! index, so outcomes do not depend on how replicas are spread over threads.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::neldermead;
use crate::qubo::{Couplings, QuboModel};

/// Inverse temperatures used when no tuning is requested.
pub const DEFAULT_BETA_START: f64 = 0.2;
pub const DEFAULT_BETA_END: f64 = 8.6;
pub const DEFAULT_REPLICAS: usize = 1000;
pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_TUNE_BUDGET: usize = 30;
const PILOT_RUNS: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub t_max: f64,
    pub t_min: f64,
    pub n_steps: usize,
}

impl Schedule {
    pub fn new(t_max: f64, t_min: f64, n_steps: usize) -> Result<Schedule> {
        if !(t_max > 0.0 && t_min > 0.0 && t_min <= t_max && t_max.is_finite()) {
            return arg_err(format!("invalid temperatures t_max={t_max}, t_min={t_min}"));
        }
        if n_steps == 0 {
            return arg_err("schedule needs at least one step");
        }
        Ok(Schedule { t_max, t_min, n_steps })
    }

    /// Schedule from start/end inverse temperatures.
    pub fn from_betas(beta_start: f64, beta_end: f64, n_steps: usize) -> Result<Schedule> {
        Schedule::new(1.0 / beta_start, 1.0 / beta_end, n_steps)
    }

    pub fn default_with_steps(n_steps: usize) -> Schedule {
        Schedule::from_betas(DEFAULT_BETA_START, DEFAULT_BETA_END, n_steps).expect("default schedule is valid")
    }

    /// `T(t) = t_max·(t_min/t_max)^(t/(n_steps−1))`.
    pub fn temperature(&self, step: usize) -> f64 {
        if step == 0 || self.n_steps == 1 {
            return self.t_max;
        }
        if step >= self.n_steps - 1 {
            return self.t_min;
        }
        self.t_max * (self.t_min / self.t_max).powf(step as f64 / (self.n_steps - 1) as f64)
    }

    pub fn temperatures(&self) -> Vec<f64> {
        (0..self.n_steps).map(|t| self.temperature(t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepOrder {
    Randomized,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub n_replicas: usize,
    pub schedule: Schedule,
    pub seed: u64,
    pub sweep_order: SweepOrder,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            n_replicas: DEFAULT_REPLICAS,
            schedule: Schedule::default_with_steps(DEFAULT_STEPS),
            seed: 0,
            sweep_order: SweepOrder::Randomized,
        }
    }
}

impl AnnealConfig {
    pub fn with_seed(mut self, seed: u64) -> AnnealConfig {
        self.seed = seed;
        self
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> AnnealConfig {
        self.schedule = schedule;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealOutcome {
    pub best_state: Vec<u8>,
    pub best_energy: f64,
    /// Lowest energy seen by each replica, re-evaluated from scratch.
    pub per_replica_energies: Vec<f64>,
    pub replica_of_best: usize,
    /// Largest relative gap between the running energy and a full
    /// re-evaluation of the final state, over all replicas.
    pub bookkeeping_error: f64,
}

struct ReplicaResult {
    best_state: Vec<u8>,
    best_energy: f64,
    bookkeeping_error: f64,
}

/// Seed of the stream for replica `r`.
fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    rng
}

fn run_replica(c: &Couplings, temps: &[f64], order_kind: SweepOrder, seed: u64, replica: usize) -> ReplicaResult {
    let n = c.num_vars();
    let mut rng = replica_rng(seed, replica);
    let mut z: Vec<u8> = (0..n).map(|_| rng.gen::<bool>() as u8).collect();
    let mut fields = c.fields(&z);
    let mut energy = c.energy(&z);
    let mut best_energy = energy;
    let mut best_state = z.clone();
    let mut order: Vec<usize> = (0..n).collect();

    for &temp in temps {
        let beta = 1.0 / temp;
        if order_kind == SweepOrder::Randomized {
            order.shuffle(&mut rng);
        }
        for &i in &order {
            let delta = if z[i] == 0 { fields[i] } else { -fields[i] };
            let accept = delta <= 0.0 || {
                let x = delta * beta;
                // exp(-x) < 2^-64 can never beat a uniform draw
                x < 45.0 && rng.gen::<f64>() < (-x).exp()
            };
            if !accept {
                continue;
            }
            z[i] ^= 1;
            let sign = if z[i] == 1 { 1.0 } else { -1.0 };
            for k in c.offsets[i]..c.offsets[i + 1] {
                fields[c.neighbours[k] as usize] += sign * c.weights[k];
            }
            energy += delta;
            if energy < best_energy {
                best_energy = energy;
                best_state.copy_from_slice(&z);
            }
        }
    }

    let full = c.energy(&z);
    let bookkeeping_error = (energy - full).abs() / full.abs().max(1.0);
    ReplicaResult {
        best_energy: c.energy(&best_state),
        best_state,
        bookkeeping_error,
    }
}

/// Runs `cfg.n_replicas` independent annealing trajectories and returns the
/// lowest-energy state seen (ties go to the lowest replica index).
pub fn anneal(q: &QuboModel, cfg: &AnnealConfig) -> AnnealOutcome {
    let c = Couplings::new(q);
    let temps = cfg.schedule.temperatures();
    let results: Vec<ReplicaResult> = (0..cfg.n_replicas.max(1))
        .into_par_iter()
        .map(|r| run_replica(&c, &temps, cfg.sweep_order, cfg.seed, r))
        .collect();
    let mut replica_of_best = 0;
    for (r, res) in results.iter().enumerate() {
        if res.best_energy < results[replica_of_best].best_energy {
            replica_of_best = r;
        }
    }
    AnnealOutcome {
        best_state: results[replica_of_best].best_state.clone(),
        best_energy: results[replica_of_best].best_energy,
        per_replica_energies: results.iter().map(|r| r.best_energy).collect(),
        replica_of_best,
        bookkeeping_error: results.iter().map(|r| r.bookkeeping_error).fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub schedule: Schedule,
    /// Mean pilot best energy of the returned schedule.
    pub objective: f64,
    pub evaluations: usize,
}

fn pilot_seed(base: u64, i: u64) -> u64 {
    crate::mix_seed(&[base, 0x0070_696c_6f74, i])
}

/// Mean best energy over the fixed pilot seeds derived from `base.seed`.
pub fn pilot_objective(q: &QuboModel, base: &AnnealConfig, schedule: Schedule) -> f64 {
    (0..PILOT_RUNS)
        .map(|i| {
            let cfg = AnnealConfig { schedule, seed: pilot_seed(base.seed, i), ..*base };
            anneal(q, &cfg).best_energy
        })
        .sum::<f64>()
        / PILOT_RUNS as f64
}

/// Nelder–Mead over `(ln t_max, ln t_min)` starting from the base schedule.
/// The coordinates are sorted before use, so `t_min ≤ t_max` always holds.
pub fn tune_temperatures_detailed(q: &QuboModel, base: &AnnealConfig, budget: usize) -> TuneResult {
    let steps = base.schedule.n_steps;
    let to_schedule = |x: &[f64]| -> Schedule {
        let (hi, lo) = (x[0].max(x[1]), x[0].min(x[1]));
        let clamp = |v: f64| v.clamp(-30.0, 30.0).exp();
        Schedule { t_max: clamp(hi), t_min: clamp(lo), n_steps: steps }
    };
    let x0 = [base.schedule.t_max.ln(), base.schedule.t_min.ln()];
    let m = neldermead::minimize(|x| pilot_objective(q, base, to_schedule(x)), &x0, 1.0, budget.max(1));
    TuneResult {
        schedule: to_schedule(&m.x),
        objective: m.value,
        evaluations: m.evaluations,
    }
}

pub fn tune_temperatures(q: &QuboModel, base: &AnnealConfig, budget: usize) -> Schedule {
    tune_temperatures_detailed(q, base, budget).schedule
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize) -> QuboModel {
        let mut q = QuboModel::new(n);
        for i in 0..n {
            q.add_linear(i, 1.0);
        }
        q
    }

    fn small_cfg(replicas: usize, steps: usize) -> AnnealConfig {
        AnnealConfig {
            n_replicas: replicas,
            schedule: Schedule::default_with_steps(steps),
            seed: 5,
            sweep_order: SweepOrder::Randomized,
        }
    }

    #[test]
    fn schedule_endpoints_and_monotonicity() {
        let s = Schedule::from_betas(0.2, 8.6, 1000).unwrap();
        assert_eq!(s.temperature(0), 5.0);
        assert_eq!(s.temperature(999), 1.0 / 8.6);
        let ts = s.temperatures();
        assert!(ts.windows(2).all(|w| w[1] < w[0]));
        let mid = s.temperature(500);
        let expect = 5.0 * ((1.0 / 8.6) / 5.0f64).powf(500.0 / 999.0);
        assert!((mid - expect).abs() < 1e-12);
        assert!(Schedule::new(1.0, 2.0, 10).is_err());
        assert!(Schedule::new(1.0, 0.5, 0).is_err());
        assert_eq!(Schedule::new(3.0, 1.0, 1).unwrap().temperatures(), vec![3.0]);
    }

    #[test]
    fn separable_model_reaches_all_zeros() {
        let q = separable(40);
        for order in [SweepOrder::Randomized, SweepOrder::Sequential] {
            let cfg = AnnealConfig { sweep_order: order, ..small_cfg(4, 100) };
            let out = anneal(&q, &cfg);
            assert_eq!(out.best_energy, 0.0);
            assert!(out.best_state.iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn outcome_is_deterministic() {
        let q = separable(10);
        let cfg = small_cfg(8, 50);
        assert_eq!(anneal(&q, &cfg), anneal(&q, &cfg));
    }

    #[test]
    fn best_is_minimum_with_lowest_index() {
        let q = separable(3);
        let out = anneal(&q, &small_cfg(6, 30));
        let min = out.per_replica_energies.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_energy, min);
        assert_eq!(out.replica_of_best, out.per_replica_energies.iter().position(|&e| e == min).unwrap());
    }

    #[test]
    fn replica_streams_are_independent_of_count() {
        // replica r of a larger run reproduces replica r of a smaller run
        let mut q = QuboModel::new(6);
        for i in 0..6 {
            q.add_linear(i, -0.5 + i as f64 * 0.3);
            q.add_quadratic(i, (i + 1) % 6, 0.7);
        }
        let a = anneal(&q, &small_cfg(3, 5));
        let b = anneal(&q, &small_cfg(7, 5));
        assert_eq!(a.per_replica_energies[..], b.per_replica_energies[..3]);
    }

    #[test]
    fn tuning_on_easy_model_hits_zero() {
        let q = separable(12);
        let base = small_cfg(2, 60);
        let r = tune_temperatures_detailed(&q, &base, 10);
        assert_eq!(r.objective, 0.0);
        assert!(r.schedule.t_min <= r.schedule.t_max);
        assert!(r.evaluations <= 10);
        assert_eq!(pilot_objective(&q, &base, r.schedule), 0.0);
    }
}
