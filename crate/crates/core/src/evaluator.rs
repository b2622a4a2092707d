//! Decoding annealer states into bipolar networks, sign-activation inference,
//! accuracy and margin statistics.

use serde::{Deserialize, Serialize};

use crate::builder::{Audit, Symbol, VariableMap};
use crate::dataset::{outputs_to_label, Dataset, Image, Label, Sample};
use crate::error::{arg_err, Error, Result};
use crate::topology::{NodeId, NodeKind, Topology};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub gamma: f64,
    pub eta: f64,
    pub run: usize,
}

/// Bipolar parameters over a topology. Entries of groups or nodes that are
/// absent from the topology (removed, or inputs for biases) hold -1 and are
/// never read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedNetwork {
    pub topology: Topology,
    pub weights: Vec<i8>,
    pub biases: Vec<i8>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Activations {
    /// Bipolar activation per node id (0 for removed nodes).
    pub x: Vec<i8>,
    /// Pre-activation per node id (0 for inputs and removed nodes).
    pub pre: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub s1: u64,
    pub s2: u64,
    pub unsat_fraction: f64,
}

/// `w = 2v − 1`, `b = 2d − 1` for every parameter present in the map.
pub fn decode(vm: &VariableMap, z: &[u8]) -> TrainedNetwork {
    let t = vm.topology();
    let mut weights = vec![-1i8; t.group_count()];
    let mut biases = vec![-1i8; t.node_count()];
    for (i, s) in vm.symbols().iter().enumerate() {
        match *s {
            Symbol::Weight(g) => weights[g.0] = 2 * z[i] as i8 - 1,
            Symbol::Bias(j) => biases[j.0] = 2 * z[i] as i8 - 1,
            _ => {}
        }
    }
    TrainedNetwork {
        topology: t.clone(),
        weights,
        biases,
        provenance: Provenance::default(),
    }
}

fn sign(x: i32) -> i8 {
    if x > 0 {
        1
    } else {
        -1
    }
}

impl TrainedNetwork {
    pub fn new(topology: Topology, weights: Vec<i8>, biases: Vec<i8>) -> Result<TrainedNetwork> {
        if weights.len() != topology.group_count() || biases.len() != topology.node_count() {
            return arg_err("parameter vector sizes do not match the topology");
        }
        if weights.iter().chain(biases.iter()).any(|&v| v != 1 && v != -1) {
            return arg_err("parameters must be bipolar");
        }
        Ok(TrainedNetwork { topology, weights, biases, provenance: Provenance::default() })
    }

    /// Sign-activation forward pass in dependency order.
    pub fn forward(&self, inputs: &[i8]) -> Result<Activations> {
        let t = &self.topology;
        if inputs.len() != t.inputs().len() {
            return arg_err(format!("got {} inputs, topology has {}", inputs.len(), t.inputs().len()));
        }
        let order = t.topological_order().ok_or(Error::CyclicInference)?;
        let mut x = vec![0i8; t.node_count()];
        let mut pre = vec![0i32; t.node_count()];
        for (p, &node) in t.inputs().iter().enumerate() {
            x[node.0] = sign(inputs[p] as i32);
        }
        for j in order {
            if t.kind(j) == NodeKind::Input {
                continue;
            }
            let mut s = self.biases[j.0] as i32;
            for &c in t.predecessors(j) {
                let conn = t.connection(c);
                s += self.weights[conn.group.0] as i32 * x[conn.src.0] as i32;
            }
            pre[j.0] = s;
            x[j.0] = sign(s);
        }
        Ok(Activations { x, pre })
    }

    pub fn outputs(&self, inputs: &[i8]) -> Result<Vec<i8>> {
        let a = self.forward(inputs)?;
        Ok(self.topology.outputs().iter().map(|o| a.x[o.0]).collect())
    }

    /// Predicted label of an image; needs exactly two output neurons.
    pub fn predict(&self, image: &Image) -> Result<(Label, Activations)> {
        let outs = self.topology.outputs();
        if outs.len() != 2 {
            return arg_err(format!("label decoding needs 2 outputs, topology has {}", outs.len()));
        }
        let a = self.forward(&image.pixels)?;
        let label = outputs_to_label([a.x[outs[0].0], a.x[outs[1].0]]);
        Ok((label, a))
    }

    /// Fraction of samples whose outputs all match their targets.
    pub fn fit_accuracy(&self, samples: &[Sample]) -> Result<f64> {
        if samples.is_empty() {
            return Ok(1.0);
        }
        let mut hits = 0;
        for s in samples {
            if self.outputs(&s.inputs)? == s.targets {
                hits += 1;
            }
        }
        Ok(hits as f64 / samples.len() as f64)
    }

    pub fn accuracy(&self, images: &[Image]) -> Result<f64> {
        if images.is_empty() {
            return Ok(0.0);
        }
        let mut hits = 0;
        for img in images {
            if self.predict(img)?.0 == img.label {
                hits += 1;
            }
        }
        Ok(hits as f64 / images.len() as f64)
    }

    /// `|π_jk|` for every neuron `j` (rows) and sample `k` (columns).
    pub fn abs_preactivations(&self, batch: &[Sample]) -> Result<Vec<(NodeId, Vec<u32>)>> {
        let passes = batch.iter().map(|s| self.forward(&s.inputs)).collect::<Result<Vec<_>>>()?;
        Ok(self
            .topology
            .neurons()
            .map(|j| (j, passes.iter().map(|a| a.pre[j.0].unsigned_abs()).collect()))
            .collect())
    }

    /// `(S1, S2)`: per-neuron minimum and sum of `|π_jk|` over the batch,
    /// summed over neurons.
    pub fn margins(&self, batch: &[Sample]) -> Result<(u64, u64)> {
        if batch.is_empty() {
            return arg_err("margins need a non-empty batch");
        }
        let rows = self.abs_preactivations(batch)?;
        let s1 = rows.iter().map(|(_, r)| *r.iter().min().unwrap() as u64).sum();
        let s2 = rows.iter().map(|(_, r)| r.iter().map(|&v| v as u64).sum::<u64>()).sum();
        Ok((s1, s2))
    }

    pub fn evaluate(&self, ds: &Dataset, audit: &Audit) -> Result<EvalReport> {
        let (s1, s2) = self.margins(&ds.train_samples())?;
        Ok(EvalReport {
            train_accuracy: self.accuracy(&ds.train)?,
            test_accuracy: self.accuracy(&ds.test)?,
            s1,
            s2,
            unsat_fraction: audit.fraction(),
        })
    }
}
