//! Brute-force reference for small instances.
//!
//! Everything here recomputes activations and residuals from first
//! principles instead of going through the builder's expressions, so the
//! two can be checked against each other.

use serde::{Deserialize, Serialize};

use crate::annealer::{anneal, AnnealConfig, Schedule, SweepOrder};
use crate::builder::{build, BuildParams, Symbol, VariableMap};
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::qubo::{Couplings, QuboModel};
use crate::topology::{BitWidth, GroupId, NodeId, NodeKind, Topology};

/// Largest number of bipolar parameters enumerated.
pub const MAX_PARAMS: usize = 22;
/// Largest QUBO enumerated bit-by-bit when searching for zero-energy states.
pub const MAX_EXHAUSTIVE_VARS: usize = 24;

/// Bit `s_n` of the `(n+1)`-bit expansion of `Σ (x_i+1)/2 + ⌊κ/2⌋` with
/// `n = ⌊log2 m⌋` and `κ = 2^(n+1) − (m+1)`.
pub fn expansion_top_bit(xs: &[i8]) -> bool {
    let m = xs.len() as u64;
    assert!(m >= 1, "expansion needs at least one term");
    let n = 63 - m.leading_zeros();
    let kappa = (1u64 << (n + 1)) - (m + 1);
    let y: u64 = xs.iter().filter(|&&x| x > 0).count() as u64;
    let value = y + kappa / 2;
    assert!(value < 1u64 << (n + 1), "expansion overflow");
    (value >> n) & 1 == 1
}

/// Checks the sign/top-bit equivalence for every `x ∈ {−1,1}^m`.
pub fn verify_expansion_theorem(m: usize) -> bool {
    (0..1u64 << m).all(|bits| {
        let xs: Vec<i8> = (0..m).map(|i| if (bits >> i) & 1 == 1 { 1 } else { -1 }).collect();
        let positive = xs.iter().map(|&x| x as i64).sum::<i64>() >= 1;
        expansion_top_bit(&xs) == positive
    })
}

/// One row of the two-predecessor activation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActivationRow {
    pub x: [i8; 2],
    pub b: i8,
    pub y: [u8; 2],
    pub d: u8,
    pub pi: i32,
    pub rho: u32,
    pub s: [u8; 2],
    pub y3: u8,
    pub x3: i8,
}

/// All eight rows for a neuron with two unit-weight predecessors.
pub fn activation_table() -> Vec<ActivationRow> {
    let w = BitWidth::for_in_degree(2);
    let mut rows = Vec::new();
    for x1 in [-1i8, 1] {
        for x2 in [-1i8, 1] {
            for b in [-1i8, 1] {
                let bit = |v: i8| u8::from(v > 0);
                let rho = (bit(x1) + bit(x2) + bit(b)) as u32;
                let value = rho + w.offset() as u32;
                let s1 = ((value >> 1) & 1) as u8;
                let s0 = (value & 1) as u8;
                rows.push(ActivationRow {
                    x: [x1, x2],
                    b,
                    y: [bit(x1), bit(x2)],
                    d: bit(b),
                    pi: (x1 + x2 + b) as i32,
                    rho,
                    s: [s1, s0],
                    y3: s1,
                    x3: 2 * s1 as i8 - 1,
                });
            }
        }
    }
    rows
}

/// Parameters enumerated by the oracle, in a fixed order.
struct ParamLayout {
    groups: Vec<GroupId>,
    neurons: Vec<NodeId>,
    order: Vec<NodeId>,
}

impl ParamLayout {
    fn new(t: &Topology) -> Result<ParamLayout> {
        let groups: Vec<GroupId> = t.active_groups().into_iter().collect();
        let neurons: Vec<NodeId> = t.neurons().collect();
        let params = groups.len() + neurons.len();
        if params > MAX_PARAMS {
            return Err(Error::Capacity { params, limit: MAX_PARAMS });
        }
        let order = t.topological_order().ok_or(Error::CyclicInference)?;
        Ok(ParamLayout { groups, neurons, order })
    }

    fn count(&self) -> usize {
        self.groups.len() + self.neurons.len()
    }

    fn unpack(&self, t: &Topology, bits: u64) -> (Vec<i8>, Vec<i8>) {
        let mut w = vec![-1i8; t.group_count()];
        let mut b = vec![-1i8; t.node_count()];
        for (i, g) in self.groups.iter().enumerate() {
            w[g.0] = if (bits >> i) & 1 == 1 { 1 } else { -1 };
        }
        let off = self.groups.len();
        for (i, j) in self.neurons.iter().enumerate() {
            b[j.0] = if (bits >> (off + i)) & 1 == 1 { 1 } else { -1 };
        }
        (w, b)
    }

    /// Returns activations and the binary pre-activation `ρ` per node.
    fn forward(&self, t: &Topology, w: &[i8], b: &[i8], inputs: &[i8]) -> (Vec<i8>, Vec<i64>) {
        let mut x = vec![0i8; t.node_count()];
        let mut rho = vec![0i64; t.node_count()];
        for (p, &node) in t.inputs().iter().enumerate() {
            x[node.0] = if inputs[p] > 0 { 1 } else { -1 };
        }
        for &j in &self.order {
            if t.kind(j) == NodeKind::Input {
                continue;
            }
            let mut r = i64::from(b[j.0] > 0);
            let mut pi = b[j.0] as i64;
            for &c in t.predecessors(j) {
                let conn = t.connection(c);
                let prod = w[conn.group.0] as i64 * x[conn.src.0] as i64;
                pi += prod;
                r += (prod + 1) / 2;
            }
            rho[j.0] = r;
            x[j.0] = if pi > 0 { 1 } else { -1 };
        }
        (x, rho)
    }

    fn fits(&self, t: &Topology, w: &[i8], b: &[i8], s: &Sample) -> bool {
        let (x, _) = self.forward(t, w, b, &s.inputs);
        t.outputs().iter().zip(s.targets.iter()).all(|(o, &target)| x[o.0] == target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub exists_fit: bool,
    pub best_train_accuracy: f64,
    pub fitting_assignments: u64,
}

/// Tries every bipolar parameter assignment on the batch.
pub fn enumerate_fit(t: &Topology, batch: &[Sample]) -> Result<FitSummary> {
    let layout = ParamLayout::new(t)?;
    if batch.is_empty() {
        return Ok(FitSummary { exists_fit: true, best_train_accuracy: 1.0, fitting_assignments: 1 << layout.count() });
    }
    let mut best = 0usize;
    let mut fitting = 0u64;
    for bits in 0..1u64 << layout.count() {
        let (w, b) = layout.unpack(t, bits);
        let hits = batch.iter().filter(|s| layout.fits(t, &w, &b, s)).count();
        best = best.max(hits);
        if hits == batch.len() {
            fitting += 1;
        }
    }
    Ok(FitSummary {
        exists_fit: fitting > 0,
        best_train_accuracy: best as f64 / batch.len() as f64,
        fitting_assignments: fitting,
    })
}

/// The unique full state induced by a parameter assignment: activations
/// from forward passes (outputs stay clamped), slack bits from the binary
/// expansion, products `ψ = v·y`. Also returns the oracle's own count of
/// violated activation equations.
fn induced_state(
    t: &Topology,
    vm: &VariableMap,
    layout: &ParamLayout,
    w: &[i8],
    b: &[i8],
    batch: &[Sample],
) -> (Vec<u8>, usize) {
    let mut z = vec![0u8; vm.num_vars()];
    let bit = |v: i8| u8::from(v > 0);
    for g in &layout.groups {
        z[vm.index_of(Symbol::Weight(*g)).unwrap()] = bit(w[g.0]);
    }
    for j in &layout.neurons {
        z[vm.index_of(Symbol::Bias(*j)).unwrap()] = bit(b[j.0]);
    }
    let mut violated = 0;
    for (k, s) in batch.iter().enumerate() {
        let (x, rho) = layout.forward(t, w, b, &s.inputs);
        for &j in &layout.neurons {
            let width = t.bit_width(j);
            let y = match vm.index_of(Symbol::Activation { node: j, k }) {
                Some(idx) => {
                    z[idx] = bit(x[j.0]);
                    z[idx]
                }
                None => vm.clamped(j, k).expect("neuron is either variable or clamped"),
            };
            // ρ + ⌊κ/2⌋ = 2^n·y + χ, with χ < 2^n
            let value = rho[j.0] + width.offset() as i64 - ((y as i64) << width.n);
            if y != bit(x[j.0]) || value < 0 || value >= 1 << width.n {
                violated += 1;
            }
            let chi = value.clamp(0, (1 << width.n) - 1);
            for l in 0..width.n {
                z[vm.index_of(Symbol::Slack { node: j, k, bit: l }).unwrap()] = ((chi >> l) & 1) as u8;
            }
        }
    }
    for (v, y, psi) in vm.products() {
        z[psi] = z[v] & z[y];
    }
    (z, violated)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub holds: bool,
    pub exists_fit: bool,
    pub fitting_assignments: u64,
    /// Zero-energy states found by the reverse search.
    pub zero_states: u64,
    /// True when the reverse search covered every bit vector.
    pub exhaustive: bool,
    pub audit_mismatches: u64,
}

/// Calls `visit(z, E(z))` on every bit vector in Gray-code order.
fn for_each_state(q: &QuboModel, mut visit: impl FnMut(&[u8], f64)) {
    let c = Couplings::new(q);
    let n = c.num_vars();
    let mut z = vec![0u8; n];
    let mut fields = c.fields(&z);
    let mut e = c.energy(&z);
    visit(&z, e);
    for step in 1u64..1u64 << n {
        let i = step.trailing_zeros() as usize;
        let delta = if z[i] == 0 { fields[i] } else { -fields[i] };
        z[i] ^= 1;
        let sign = if z[i] == 1 { 1.0 } else { -1.0 };
        for k in c.offsets[i]..c.offsets[i + 1] {
            fields[c.neighbours[k] as usize] += sign * c.weights[k];
        }
        e += delta;
        visit(&z, e);
    }
}

/// Checks that the batch has a fitting assignment exactly when the
/// training QUBO has a zero-energy state. Fitting assignments are mapped
/// to explicit zero-energy witnesses; zero-energy states (all of them when
/// the model is small enough, otherwise those found by annealing) must
/// decode to perfect fits.
pub fn verify_equivalence(t: &Topology, batch: &[Sample]) -> Result<EquivalenceReport> {
    let layout = ParamLayout::new(t)?;
    let (q, vm) = build(t, batch, &BuildParams::default())?;
    let mut holds = true;
    let mut fitting = 0u64;
    let mut audit_mismatches = 0u64;

    for bits in 0..1u64 << layout.count() {
        let (w, b) = layout.unpack(t, bits);
        let (z, violated) = induced_state(t, &vm, &layout, &w, &b, batch);
        let audit = vm.audit(&z)?;
        if audit.unsat_activation != violated || audit.unsat_product != 0 {
            audit_mismatches += 1;
        }
        let fit = batch.iter().all(|s| layout.fits(t, &w, &b, s));
        if fit {
            fitting += 1;
            if q.energy(&z)? != 0.0 || !audit.is_feasible() {
                holds = false;
            }
        }
    }
    holds &= audit_mismatches == 0;

    let decodes_to_fit = |z: &[u8]| -> bool {
        let net = crate::evaluator::decode(&vm, z);
        batch.iter().all(|s| layout.fits(t, &net.weights, &net.biases, s))
    };

    let exhaustive = vm.num_vars() <= MAX_EXHAUSTIVE_VARS;
    let mut zero_states = 0u64;
    if exhaustive {
        let mut bad = false;
        for_each_state(&q, |z, e| {
            if e.abs() < 1e-9 {
                zero_states += 1;
                if !decodes_to_fit(z) {
                    bad = true;
                }
            }
            if e < -1e-9 {
                bad = true;
            }
        });
        // each fit has exactly one completion to a zero-energy state
        holds &= !bad && zero_states == fitting;
    } else {
        let steps = 400;
        for seed in 0..4u64 {
            let cfg = AnnealConfig {
                n_replicas: 16,
                schedule: Schedule::default_with_steps(steps),
                seed,
                sweep_order: SweepOrder::Randomized,
            };
            let out = anneal(&q, &cfg);
            if out.best_energy == 0.0 {
                zero_states += 1;
                holds &= decodes_to_fit(&out.best_state);
            }
        }
        if fitting == 0 {
            holds &= zero_states == 0;
        }
    }

    Ok(EquivalenceReport {
        holds,
        exists_fit: fitting > 0,
        fitting_assignments: fitting,
        zero_states,
        exhaustive,
        audit_mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_theorem_small_m() {
        for m in 1..=10 {
            assert!(verify_expansion_theorem(m), "m = {m}");
        }
    }

    #[test]
    fn ceiling_offset_breaks_the_theorem() {
        // m = 4 terms, two of them positive: Σx = 0
        let w = BitWidth::for_in_degree(3);
        assert_eq!((w.n, w.kappa), (2, 3));
        assert!(!expansion_top_bit(&[1, 1, -1, -1]));
        let top = |offset: u64| ((2 + offset) >> w.n) & 1;
        assert_eq!(top(w.offset()), 0);
        assert_eq!(top(w.kappa.div_ceil(2)), 1);
    }

    #[test]
    fn activation_table_rows() {
        let rows = activation_table();
        let expect_pi = [-3, -1, -1, 1, -1, 1, 1, 3];
        let expect_rho = [0, 1, 1, 2, 1, 2, 2, 3];
        let expect_s = [[0, 0], [0, 1], [0, 1], [1, 0], [0, 1], [1, 0], [1, 0], [1, 1]];
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.pi, expect_pi[i]);
            assert_eq!(r.rho, expect_rho[i]);
            assert_eq!(r.s, expect_s[i]);
            assert_eq!(r.x3, if r.pi > 0 { 1 } else { -1 });
        }
    }

    fn tiny() -> Topology {
        use NodeKind::*;
        Topology::from_edges(vec![Input, Input, Hidden, Output], &[(0, 2), (1, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn and_like_labels_fit() {
        let batch: Vec<Sample> = [(-1, -1, -1), (-1, 1, -1), (1, -1, -1), (1, 1, 1)]
            .iter()
            .map(|&(a, b, y)| Sample { inputs: vec![a, b], targets: vec![y] })
            .collect();
        let f = enumerate_fit(&tiny(), &batch).unwrap();
        assert!(f.exists_fit);
        assert_eq!(f.best_train_accuracy, 1.0);
        let r = verify_equivalence(&tiny(), &batch[..2]).unwrap();
        assert!(r.holds && r.exists_fit && r.exhaustive, "{r:?}");
        assert_eq!(r.zero_states, r.fitting_assignments);
    }

    #[test]
    fn contradictory_labels_have_no_zero_state() {
        let batch = vec![
            Sample { inputs: vec![1, -1], targets: vec![1] },
            Sample { inputs: vec![1, -1], targets: vec![-1] },
        ];
        let f = enumerate_fit(&tiny(), &batch).unwrap();
        assert!(!f.exists_fit);
        assert_eq!(f.best_train_accuracy, 0.5);
        let r = verify_equivalence(&tiny(), &batch).unwrap();
        assert!(r.holds && !r.exists_fit);
        assert_eq!(r.zero_states, 0);
    }

    #[test]
    fn empty_batch_fits_trivially() {
        assert!(enumerate_fit(&tiny(), &[]).unwrap().exists_fit);
    }

    #[test]
    fn capacity_error() {
        let t = Topology::fully_connected(25, 1, 2).unwrap();
        assert!(matches!(enumerate_fit(&t, &[]), Err(Error::Capacity { params: 30, .. })));
    }
}
