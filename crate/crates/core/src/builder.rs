//! Compiles a topology and a training batch into a QUBO whose zero-energy
//! states are exactly the parameter sets that fit the batch.
//!
//! For every neuron `j` and datapoint `k` the activation residual
//!
//! ```text
//! r_jk = d_j + Σ_{i∈P_j} (2ψ_ijk − v_ij − y_ik + 1) − 2^n_j·y_jk − χ_jk + ⌊κ_j/2⌋
//! ```
//!
//! is squared into the energy, and each product `ψ = v·y` is enforced by the
//! penalty `v·y − 2(v·ψ + y·ψ) + 3ψ`. Input activations and output targets
//! are constants, so connections leaving an input contribute linearly and
//! need no product variable.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{arg_err, Result};
use crate::qubo::{LinExpr, QuboModel};
use crate::topology::{ConnId, GroupId, NodeId, NodeKind, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Weight(GroupId),
    Bias(NodeId),
    Activation { node: NodeId, k: usize },
    Slack { node: NodeId, k: usize, bit: u32 },
    Product { conn: ConnId, k: usize },
}

/// Linear pull on bipolar parameters: `Σ c_b·b + Σ c_w·w` is subtracted
/// from the energy. `weights` is indexed by group id, `biases` by node id
/// (entries of input nodes are ignored).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExternalField {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ExternalField {
    pub fn zeros(t: &Topology) -> ExternalField {
        ExternalField {
            weights: vec![0.0; t.group_count()],
            biases: vec![0.0; t.node_count()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().chain(self.biases.iter()).all(|&c| c == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildParams {
    pub alpha: f64,
    pub gamma: f64,
    pub external: Option<ExternalField>,
    pub single_precision: bool,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams {
            alpha: 1.0,
            gamma: 0.0,
            external: None,
            single_precision: false,
        }
    }
}

impl BuildParams {
    pub fn with_gamma(gamma: f64) -> BuildParams {
        BuildParams { gamma, ..Default::default() }
    }
}

/// Constraint audit of one state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Audit {
    pub unsat_activation: usize,
    pub unsat_product: usize,
    pub total_activation: usize,
    pub total_product: usize,
}

impl Audit {
    pub fn unsat(&self) -> usize {
        self.unsat_activation + self.unsat_product
    }

    pub fn total(&self) -> usize {
        self.total_activation + self.total_product
    }

    pub fn fraction(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.unsat() as f64 / self.total() as f64
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.unsat() == 0
    }
}

/// Model sizes in the units of the benchmark table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelCounts {
    /// Weights, biases, hidden activations and products.
    pub binary: usize,
    /// Slack groups, one per (neuron with predecessors, datapoint).
    pub integer: usize,
    pub slack_bits: usize,
    pub constraints: usize,
    /// Total QUBO variables: `binary + slack_bits`.
    pub qubo_vars: usize,
}

/// Either a QUBO variable or a value fixed by the batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Var(usize),
    Fixed(u8),
}

#[derive(Debug, Clone)]
pub struct VariableMap {
    topology: Topology,
    batch_len: usize,
    symbols: Vec<Symbol>,
    index: HashMap<Symbol, usize>,
    /// `activation[k][node]`
    activation: Vec<Vec<Slot>>,
}

impl VariableMap {
    pub fn new(t: &Topology, batch: &[Sample]) -> Result<VariableMap> {
        if batch.is_empty() {
            return arg_err("training batch is empty");
        }
        for (k, s) in batch.iter().enumerate() {
            if s.inputs.len() != t.inputs().len() {
                return arg_err(format!(
                    "datapoint {k} has {} inputs, topology has {}",
                    s.inputs.len(),
                    t.inputs().len()
                ));
            }
            if s.targets.len() != t.outputs().len() {
                return arg_err(format!(
                    "datapoint {k} has {} targets, topology has {} outputs",
                    s.targets.len(),
                    t.outputs().len()
                ));
            }
            if s.inputs.iter().chain(s.targets.iter()).any(|&x| x != 1 && x != -1) {
                return arg_err(format!("datapoint {k} has non-bipolar values"));
            }
        }

        let mut symbols = Vec::new();
        for g in t.active_groups() {
            symbols.push(Symbol::Weight(g));
        }
        for j in t.neurons() {
            symbols.push(Symbol::Bias(j));
        }
        let mut activation = Vec::with_capacity(batch.len());
        for (k, sample) in batch.iter().enumerate() {
            let mut slots = vec![Slot::Fixed(0); t.node_count()];
            for (p, &node) in t.inputs().iter().enumerate() {
                slots[node.0] = Slot::Fixed(bipolar_to_bit(sample.inputs[p]));
            }
            for (o, &node) in t.outputs().iter().enumerate() {
                slots[node.0] = Slot::Fixed(bipolar_to_bit(sample.targets[o]));
            }
            for j in t.active_nodes().filter(|&j| t.kind(j) == NodeKind::Hidden) {
                slots[j.0] = Slot::Var(symbols.len());
                symbols.push(Symbol::Activation { node: j, k });
            }
            for j in t.neurons() {
                for bit in 0..t.bit_width(j).n {
                    symbols.push(Symbol::Slack { node: j, k, bit });
                }
            }
            for (c, conn) in t.connections().iter().enumerate() {
                if matches!(slots[conn.src.0], Slot::Var(_)) {
                    symbols.push(Symbol::Product { conn: ConnId(c), k });
                }
            }
            activation.push(slots);
        }
        let index = symbols.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Ok(VariableMap {
            topology: t.clone(),
            batch_len: batch.len(),
            symbols,
            index,
            activation,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn batch_len(&self) -> usize {
        self.batch_len
    }

    pub fn num_vars(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn index_of(&self, s: Symbol) -> Option<usize> {
        self.index.get(&s).copied()
    }

    fn var(&self, s: Symbol) -> usize {
        self.index[&s]
    }

    /// Fixed activation bit of `node` at datapoint `k`, if it is clamped.
    pub fn clamped(&self, node: NodeId, k: usize) -> Option<u8> {
        match self.activation[k][node.0] {
            Slot::Fixed(b) => Some(b),
            Slot::Var(_) => None,
        }
    }

    pub fn activation_bit(&self, node: NodeId, k: usize, z: &[u8]) -> u8 {
        match self.activation[k][node.0] {
            Slot::Fixed(b) => b,
            Slot::Var(i) => z[i],
        }
    }

    pub fn counts(&self) -> ModelCounts {
        let t = &self.topology;
        let mut c = ModelCounts {
            binary: 0,
            integer: 0,
            slack_bits: 0,
            constraints: 0,
            qubo_vars: self.num_vars(),
        };
        let mut products = 0;
        for s in &self.symbols {
            match s {
                Symbol::Slack { .. } => c.slack_bits += 1,
                Symbol::Product { .. } => {
                    products += 1;
                    c.binary += 1
                }
                _ => c.binary += 1,
            }
        }
        let with_preds = t.neurons().filter(|&j| !t.predecessors(j).is_empty()).count();
        c.integer = with_preds * self.batch_len;
        c.constraints = t.neurons().count() * self.batch_len + products;
        c
    }

    /// Weighted sum `χ_jk` of the slack bits as an expression.
    fn chi_expr(&self, j: NodeId, k: usize, out: &mut LinExpr, scale: f64) {
        for bit in 0..self.topology.bit_width(j).n {
            out.add(self.var(Symbol::Slack { node: j, k, bit }), scale * (1u64 << bit) as f64);
        }
    }

    fn activation_expr(&self, j: NodeId, k: usize, out: &mut LinExpr, scale: f64) {
        match self.activation[k][j.0] {
            Slot::Fixed(b) => {
                out.add_constant(scale * b as f64);
            }
            Slot::Var(i) => {
                out.add(i, scale);
            }
        }
    }

    /// Activation residual of neuron `j` at datapoint `k`.
    pub fn residual(&self, j: NodeId, k: usize) -> LinExpr {
        let t = &self.topology;
        let w = t.bit_width(j);
        let mut r = LinExpr::constant(w.offset() as f64);
        r.add(self.var(Symbol::Bias(j)), 1.0);
        for &c in t.predecessors(j) {
            let conn = t.connection(c);
            let v = self.var(Symbol::Weight(conn.group));
            match self.activation[k][conn.src.0] {
                // 2·v·y − v − y + 1 with y fixed
                Slot::Fixed(y) => {
                    let y = y as f64;
                    r.add(v, 2.0 * y - 1.0).add_constant(1.0 - y);
                }
                Slot::Var(y) => {
                    r.add(self.var(Symbol::Product { conn: c, k }), 2.0).add(v, -1.0).add(y, -1.0).add_constant(1.0);
                }
            }
        }
        self.activation_expr(j, k, &mut r, -((1u64 << w.n) as f64));
        self.chi_expr(j, k, &mut r, -1.0);
        r.normalized()
    }

    /// `(2y_jk − 1)·(2(2^n·y_jk + χ_jk − ⌊κ/2⌋) − |P_j| − 1)` as two factors.
    fn margin_factors(&self, j: NodeId, k: usize) -> (LinExpr, LinExpr) {
        let t = &self.topology;
        let w = t.bit_width(j);
        let mut sign = LinExpr::constant(-1.0);
        self.activation_expr(j, k, &mut sign, 2.0);
        let mut pre = LinExpr::constant(-2.0 * w.offset() as f64 - t.predecessors(j).len() as f64 - 1.0);
        self.activation_expr(j, k, &mut pre, 2.0 * (1u64 << w.n) as f64);
        self.chi_expr(j, k, &mut pre, 2.0);
        (sign.normalized(), pre.normalized())
    }

    /// Index triples `(v, y, ψ)` of every product constraint.
    pub fn products(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.symbols.iter().enumerate().filter_map(move |(psi, s)| match *s {
            Symbol::Product { conn, k } => {
                let c = self.topology.connection(conn);
                let y = match self.activation[k][c.src.0] {
                    Slot::Var(y) => y,
                    Slot::Fixed(_) => unreachable!("products exist only for variable sources"),
                };
                Some((self.var(Symbol::Weight(c.group)), y, psi))
            }
            _ => None,
        })
    }

    fn check_state(&self, z: &[u8]) -> Result<()> {
        if z.len() != self.num_vars() {
            return arg_err(format!("state has {} bits, map has {} variables", z.len(), self.num_vars()));
        }
        Ok(())
    }

    pub fn audit(&self, z: &[u8]) -> Result<Audit> {
        self.check_state(z)?;
        let mut a = Audit::default();
        for k in 0..self.batch_len {
            for j in self.topology.neurons() {
                a.total_activation += 1;
                if self.residual(j, k).eval(z) != 0.0 {
                    a.unsat_activation += 1;
                }
            }
        }
        for (v, y, psi) in self.products() {
            a.total_product += 1;
            if z[psi] != z[v] & z[y] {
                a.unsat_product += 1;
            }
        }
        Ok(a)
    }

    pub fn h1(&self, z: &[u8]) -> Result<f64> {
        self.check_state(z)?;
        Ok((0..self.batch_len)
            .flat_map(|k| self.topology.neurons().map(move |j| (j, k)))
            .map(|(j, k)| self.residual(j, k).eval(z).powi(2))
            .sum())
    }

    pub fn h2(&self, z: &[u8]) -> Result<f64> {
        self.check_state(z)?;
        Ok(self
            .products()
            .map(|(v, y, psi)| product_penalty(z[v], z[y], z[psi]) as f64)
            .sum())
    }

    /// Per-(neuron, datapoint) summands of the margin term.
    pub fn margin_terms(&self, z: &[u8]) -> Result<Vec<(NodeId, usize, f64)>> {
        self.check_state(z)?;
        let mut out = Vec::new();
        for k in 0..self.batch_len {
            for j in self.topology.neurons() {
                let (s, p) = self.margin_factors(j, k);
                out.push((j, k, s.eval(z) * p.eval(z)));
            }
        }
        Ok(out)
    }

    pub fn h_som(&self, z: &[u8]) -> Result<f64> {
        Ok(self.margin_terms(z)?.iter().map(|t| t.2).sum())
    }
}

pub(crate) fn bipolar_to_bit(x: i8) -> u8 {
    u8::from(x > 0)
}

/// `x·y − 2(x·ψ + y·ψ) + 3ψ`; zero exactly when `ψ = x·y`.
pub fn product_penalty(x: u8, y: u8, psi: u8) -> i32 {
    let (x, y, psi) = (x as i32, y as i32, psi as i32);
    x * y - 2 * (x * psi + y * psi) + 3 * psi
}

/// Assembles `H1 + α·H2 − γ·H_som − H_ext` for the batch.
pub fn build(t: &Topology, batch: &[Sample], p: &BuildParams) -> Result<(QuboModel, VariableMap)> {
    if p.alpha.is_nan() || p.alpha < 0.0 || p.gamma.is_nan() || p.gamma < 0.0 {
        return arg_err("alpha and gamma must be non-negative");
    }
    let vm = VariableMap::new(t, batch)?;
    let mut q = QuboModel::new(vm.num_vars());
    for k in 0..vm.batch_len {
        for j in t.neurons() {
            q.add_square(&vm.residual(j, k), 1.0);
        }
    }
    if p.alpha != 0.0 {
        let triples: Vec<_> = vm.products().collect();
        for (v, y, psi) in triples {
            q.add_quadratic(v, y, p.alpha);
            q.add_quadratic(v, psi, -2.0 * p.alpha);
            q.add_quadratic(y, psi, -2.0 * p.alpha);
            q.add_linear(psi, 3.0 * p.alpha);
        }
    }
    add_margin_term(&mut q, &vm, p.gamma);
    if let Some(ext) = &p.external {
        add_external_bias(&mut q, &vm, ext)?;
    }
    if p.single_precision {
        q = q.to_single_precision();
    }
    Ok((q, vm))
}

/// Subtracts `γ·H_som`.
pub fn add_margin_term(q: &mut QuboModel, vm: &VariableMap, gamma: f64) {
    if gamma == 0.0 {
        return;
    }
    for k in 0..vm.batch_len {
        for j in vm.topology.neurons() {
            let (sign, pre) = vm.margin_factors(j, k);
            q.add_product(&sign, &pre, -gamma);
        }
    }
}

/// Subtracts `Σ c_b·(2d − 1) + Σ c_w·(2v − 1)` over parameters present in
/// the map.
pub fn add_external_bias(q: &mut QuboModel, vm: &VariableMap, ext: &ExternalField) -> Result<()> {
    let t = &vm.topology;
    if ext.weights.len() != t.group_count() || ext.biases.len() != t.node_count() {
        return arg_err(format!(
            "external field sizes ({}, {}) do not match topology ({}, {})",
            ext.weights.len(),
            ext.biases.len(),
            t.group_count(),
            t.node_count()
        ));
    }
    let mut push = |idx: usize, c: f64| {
        if c != 0.0 {
            q.add_linear(idx, -2.0 * c);
            q.add_constant(c);
        }
    };
    for g in t.active_groups() {
        push(vm.var(Symbol::Weight(g)), ext.weights[g.0]);
    }
    for j in t.neurons() {
        push(vm.var(Symbol::Bias(j)), ext.biases[j.0]);
    }
    Ok(())
}
