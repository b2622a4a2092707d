//! Network graphs: nodes with input/hidden/output roles, directed
//! connections, and weight-sharing groups.
//!
//! Node and group identifiers are stable under [`Topology::remove_nodes`], so
//! parameters of a reduced network can be mapped back onto the full one.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};

/// Output layer width for the four-class task.
pub const OUTPUTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConnId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Input,
    Hidden,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Connection {
    pub src: NodeId,
    pub dst: NodeId,
    pub group: GroupId,
}

/// Expansion widths of one node: `n` slack bits below the activation bit and
/// the offset `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitWidth {
    pub n: u32,
    pub kappa: u64,
}

impl BitWidth {
    pub fn for_in_degree(preds: usize) -> BitWidth {
        let m = preds as u64 + 1;
        let n = 63 - m.leading_zeros();
        let kappa = (1u64 << (n + 1)) - preds as u64 - 2;
        BitWidth { n, kappa }
    }

    /// Constant offset in the activation residual, `floor(kappa / 2)`.
    pub fn offset(&self) -> u64 {
        self.kappa / 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitWidths(pub Vec<BitWidth>);

impl BitWidths {
    pub fn get(&self, node: NodeId) -> BitWidth {
        self.0[node.0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TopologyDoc", into = "TopologyDoc")]
pub struct Topology {
    kinds: Vec<NodeKind>,
    removed: Vec<bool>,
    conns: Vec<Connection>,
    n_groups: usize,
    inputs: Vec<NodeId>,
    outputs: Vec<NodeId>,
    preds: Vec<Vec<ConnId>>,
}

#[derive(Serialize, Deserialize)]
struct TopologyDoc {
    nodes: Vec<NodeKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    removed: Vec<usize>,
    groups: usize,
    edges: Vec<(usize, usize, usize)>,
}

impl From<Topology> for TopologyDoc {
    fn from(t: Topology) -> Self {
        TopologyDoc {
            nodes: t.kinds.clone(),
            removed: (0..t.kinds.len()).filter(|&i| t.removed[i]).collect(),
            groups: t.n_groups,
            edges: t.conns.iter().map(|c| (c.src.0, c.dst.0, c.group.0)).collect(),
        }
    }
}

impl TryFrom<TopologyDoc> for Topology {
    type Error = Error;

    fn try_from(doc: TopologyDoc) -> Result<Topology> {
        let conns = doc
            .edges
            .iter()
            .map(|&(s, d, g)| Connection {
                src: NodeId(s),
                dst: NodeId(d),
                group: GroupId(g),
            })
            .collect();
        let mut t = Topology::build(doc.nodes, conns, Some(doc.groups))?;
        for r in doc.removed {
            if r >= t.kinds.len() {
                return arg_err(format!("removed node {r} out of range"));
            }
            t.removed[r] = true;
        }
        Ok(t)
    }
}

impl Topology {
    /// Builds an arbitrary (possibly cyclic) topology. Group ids must be
    /// dense in `0..G`; a connection with its own group is unshared.
    pub fn new(kinds: Vec<NodeKind>, conns: Vec<Connection>) -> Result<Topology> {
        Topology::build(kinds, conns, None)
    }

    /// Convenience constructor where every edge has its own weight.
    pub fn from_edges(kinds: Vec<NodeKind>, edges: &[(usize, usize)]) -> Result<Topology> {
        let conns = edges
            .iter()
            .enumerate()
            .map(|(g, &(s, d))| Connection {
                src: NodeId(s),
                dst: NodeId(d),
                group: GroupId(g),
            })
            .collect();
        Topology::new(kinds, conns)
    }

    fn build(kinds: Vec<NodeKind>, conns: Vec<Connection>, groups: Option<usize>) -> Result<Topology> {
        let n = kinds.len();
        let mut seen = HashSet::new();
        let mut max_group = None;
        for c in &conns {
            if c.src.0 >= n || c.dst.0 >= n {
                return arg_err(format!("connection {}->{} references unknown node", c.src.0, c.dst.0));
            }
            if c.src == c.dst {
                return arg_err(format!("self-loop on node {}", c.src.0));
            }
            if kinds[c.dst.0] == NodeKind::Input {
                return arg_err(format!("input node {} has an incoming connection", c.dst.0));
            }
            if !seen.insert((c.src, c.dst)) {
                return arg_err(format!("duplicate connection {}->{}", c.src.0, c.dst.0));
            }
            max_group = Some(max_group.map_or(c.group.0, |m: usize| m.max(c.group.0)));
        }
        let n_groups = groups.unwrap_or(max_group.map_or(0, |m| m + 1));
        if let Some(m) = max_group {
            if m >= n_groups {
                return arg_err(format!("group {m} exceeds declared group count {n_groups}"));
            }
        }
        if groups.is_none() {
            let used: BTreeSet<_> = conns.iter().map(|c| c.group.0).collect();
            if used.len() != n_groups {
                return arg_err("weight group ids must be dense");
            }
        }
        let inputs: Vec<NodeId> = (0..n).filter(|&i| kinds[i] == NodeKind::Input).map(NodeId).collect();
        let outputs: Vec<NodeId> = (0..n).filter(|&i| kinds[i] == NodeKind::Output).map(NodeId).collect();
        if outputs.is_empty() {
            return arg_err("topology has no output nodes");
        }
        let mut t = Topology {
            removed: vec![false; n],
            kinds,
            conns,
            n_groups,
            inputs,
            outputs,
            preds: Vec::new(),
        };
        t.rebuild_preds();
        Ok(t)
    }

    fn rebuild_preds(&mut self) {
        let mut preds = vec![Vec::new(); self.kinds.len()];
        for (i, c) in self.conns.iter().enumerate() {
            preds[c.dst.0].push(ConnId(i));
        }
        self.preds = preds;
    }

    /// `inputs -> hidden -> outputs` with complete bipartite wiring between
    /// consecutive layers and no weight sharing.
    pub fn fully_connected(inputs: usize, hidden: usize, outputs: usize) -> Result<Topology> {
        if inputs == 0 || hidden == 0 || outputs == 0 {
            return arg_err("fully connected layer sizes must be at least 1");
        }
        let mut kinds = vec![NodeKind::Input; inputs];
        kinds.extend(std::iter::repeat_n(NodeKind::Hidden, hidden));
        kinds.extend(std::iter::repeat_n(NodeKind::Output, outputs));
        let mut b = ConnBuilder::default();
        for h in 0..hidden {
            for i in 0..inputs {
                b.fresh(i, inputs + h);
            }
        }
        for o in 0..outputs {
            for h in 0..hidden {
                b.fresh(inputs + h, inputs + hidden + o);
            }
        }
        Topology::new(kinds, b.conns)
    }

    /// Stride-1, unpadded convolution of `n_filters` square filters over a
    /// square input, an optional fully connected layer, and a fully connected
    /// output layer of [`OUTPUTS`] neurons. Each filter cell is one weight
    /// group shared by all positions; biases stay per neuron.
    pub fn convolutional(
        input_side: usize,
        filter: usize,
        n_filters: usize,
        fc_tail: Option<usize>,
    ) -> Result<Topology> {
        if filter == 0 || n_filters == 0 || input_side == 0 {
            return arg_err("convolution sizes must be at least 1");
        }
        if filter > input_side {
            return arg_err(format!("filter {filter} larger than input side {input_side}"));
        }
        if fc_tail == Some(0) {
            return arg_err("fully connected tail must have at least 1 neuron");
        }
        let positions = input_side - filter + 1;
        let n_inputs = input_side * input_side;
        let n_conv = n_filters * positions * positions;
        let n_tail = fc_tail.unwrap_or(0);

        let mut kinds = vec![NodeKind::Input; n_inputs];
        kinds.extend(std::iter::repeat_n(NodeKind::Hidden, n_conv + n_tail));
        kinds.extend(std::iter::repeat_n(NodeKind::Output, OUTPUTS));

        let mut b = ConnBuilder::default();
        for f in 0..n_filters {
            let base_group = b.reserve(filter * filter);
            for py in 0..positions {
                for px in 0..positions {
                    let dst = n_inputs + f * positions * positions + py * positions + px;
                    for fy in 0..filter {
                        for fx in 0..filter {
                            let src = (py + fy) * input_side + (px + fx);
                            b.shared(src, dst, base_group + fy * filter + fx);
                        }
                    }
                }
            }
        }
        let conv_nodes = n_inputs..n_inputs + n_conv;
        let last_layer: Vec<usize> = if n_tail > 0 {
            let tail = n_inputs + n_conv..n_inputs + n_conv + n_tail;
            for t in tail.clone() {
                for c in conv_nodes.clone() {
                    b.fresh(c, t);
                }
            }
            tail.collect()
        } else {
            conv_nodes.collect()
        };
        let out_base = n_inputs + n_conv + n_tail;
        for o in 0..OUTPUTS {
            for &h in &last_layer {
                b.fresh(h, out_base + o);
            }
        }
        Topology::new(kinds, b.conns)
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, node: NodeId) -> NodeKind {
        self.kinds[node.0]
    }

    pub fn is_active(&self, node: NodeId) -> bool {
        !self.removed[node.0]
    }

    /// Surviving nodes in id order.
    pub fn active_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.kinds.len()).filter(|&i| !self.removed[i]).map(NodeId)
    }

    /// Surviving non-input nodes; each carries a bias.
    pub fn neurons(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.active_nodes().filter(|&n| self.kinds[n.0] != NodeKind::Input)
    }

    /// All input nodes in input order, including removed ones, so that
    /// position `p` always reads sample input `p`.
    pub fn inputs(&self) -> &[NodeId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    pub fn connections(&self) -> &[Connection] {
        &self.conns
    }

    pub fn connection(&self, id: ConnId) -> &Connection {
        &self.conns[id.0]
    }

    pub fn predecessors(&self, node: NodeId) -> &[ConnId] {
        &self.preds[node.0]
    }

    pub fn group_count(&self) -> usize {
        self.n_groups
    }

    /// Groups that still own at least one connection.
    pub fn active_groups(&self) -> BTreeSet<GroupId> {
        self.conns.iter().map(|c| c.group).collect()
    }

    pub fn active_node_count(&self) -> usize {
        self.removed.iter().filter(|r| !**r).count()
    }

    pub fn bit_width(&self, node: NodeId) -> BitWidth {
        if self.removed[node.0] || self.kinds[node.0] == NodeKind::Input {
            BitWidth { n: 0, kappa: 0 }
        } else {
            BitWidth::for_in_degree(self.preds[node.0].len())
        }
    }

    pub fn bit_widths(&self) -> BitWidths {
        BitWidths((0..self.kinds.len()).map(|i| self.bit_width(NodeId(i))).collect())
    }

    /// Removes `drop` together with every incident connection. Widths and
    /// predecessor lists are recomputed on the reduced graph.
    pub fn remove_nodes(&self, drop: &BTreeSet<NodeId>) -> Result<Topology> {
        for &d in drop {
            if d.0 >= self.kinds.len() {
                return arg_err(format!("node {} out of range", d.0));
            }
            if self.kinds[d.0] == NodeKind::Output {
                return arg_err(format!("output node {} cannot be removed", d.0));
            }
        }
        let mut t = self.clone();
        for &d in drop {
            t.removed[d.0] = true;
        }
        t.conns.retain(|c| !drop.contains(&c.src) && !drop.contains(&c.dst));
        t.rebuild_preds();
        Ok(t)
    }

    /// Active nodes in dependency order, or `None` if the active subgraph
    /// has a cycle.
    pub fn topological_order(&self) -> Option<Vec<NodeId>> {
        let n = self.kinds.len();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.preds[i].len()).collect();
        let mut succ = vec![Vec::new(); n];
        for c in &self.conns {
            succ[c.src.0].push(c.dst.0);
        }
        let mut queue: Vec<usize> = (0..n).filter(|&i| !self.removed[i] && indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            order.push(NodeId(u));
            for &v in &succ[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    queue.push(v);
                }
            }
        }
        (order.len() == self.active_node_count()).then_some(order)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Topology> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Default)]
struct ConnBuilder {
    conns: Vec<Connection>,
    groups: usize,
}

impl ConnBuilder {
    fn reserve(&mut self, count: usize) -> usize {
        let base = self.groups;
        self.groups += count;
        base
    }

    fn fresh(&mut self, src: usize, dst: usize) {
        let g = self.reserve(1);
        self.shared(src, dst, g);
    }

    fn shared(&mut self, src: usize, dst: usize, group: usize) {
        self.conns.push(Connection {
            src: NodeId(src),
            dst: NodeId(dst),
            group: GroupId(group),
        });
    }
}

/// Architecture strings accepted on the command line: `fc3`, `conv4x4`,
/// `conv3x3x2`, `conv2x2+fc4`, or `net0`..`net17` for the benchmark table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Architecture {
    Fc { hidden: usize },
    Conv { filter: usize, filters: usize, fc_tail: Option<usize> },
}

/// The eighteen benchmark architectures, indexed by network number.
pub const BENCHMARK_NETWORKS: [Architecture; 18] = [
    Architecture::Conv { filter: 2, filters: 1, fc_tail: None },
    Architecture::Conv { filter: 2, filters: 1, fc_tail: Some(4) },
    Architecture::Conv { filter: 3, filters: 1, fc_tail: None },
    Architecture::Conv { filter: 3, filters: 2, fc_tail: None },
    Architecture::Conv { filter: 3, filters: 1, fc_tail: Some(4) },
    Architecture::Conv { filter: 4, filters: 1, fc_tail: None },
    Architecture::Conv { filter: 4, filters: 2, fc_tail: None },
    // 39 neurons, 168 connections
    Architecture::Conv { filter: 4, filters: 2, fc_tail: Some(4) },
    Architecture::Fc { hidden: 1 },
    Architecture::Fc { hidden: 2 },
    Architecture::Fc { hidden: 3 },
    Architecture::Fc { hidden: 4 },
    Architecture::Fc { hidden: 5 },
    Architecture::Fc { hidden: 6 },
    Architecture::Fc { hidden: 7 },
    Architecture::Fc { hidden: 8 },
    Architecture::Fc { hidden: 9 },
    Architecture::Fc { hidden: 10 },
];

impl Architecture {
    /// Instantiates the architecture on a square image input.
    pub fn build(&self, input_side: usize) -> Result<Topology> {
        match *self {
            Architecture::Fc { hidden } => Topology::fully_connected(input_side * input_side, hidden, OUTPUTS),
            Architecture::Conv { filter, filters, fc_tail } => {
                Topology::convolutional(input_side, filter, filters, fc_tail)
            }
        }
    }

    pub fn benchmark_index(&self) -> Option<usize> {
        BENCHMARK_NETWORKS.iter().position(|a| a == self)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Architecture::Fc { hidden } => write!(f, "fc{hidden}"),
            Architecture::Conv { filter, filters, fc_tail } => {
                write!(f, "conv{filter}x{filter}")?;
                if filters > 1 {
                    write!(f, "x{filters}")?;
                }
                if let Some(t) = fc_tail {
                    write!(f, "+fc{t}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Architecture> {
        let bad = || Error::Argument(format!("unrecognised architecture {s:?}"));
        let num = |t: &str| t.parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(bad);
        let s_lower = s.trim().to_ascii_lowercase();
        if let Some(idx) = s_lower.strip_prefix("net") {
            let i: usize = idx.parse().map_err(|_| bad())?;
            return BENCHMARK_NETWORKS.get(i).copied().ok_or_else(bad);
        }
        if let Some(h) = s_lower.strip_prefix("fc") {
            return Ok(Architecture::Fc { hidden: num(h)? });
        }
        let rest = s_lower.strip_prefix("conv").ok_or_else(bad)?;
        let (conv, tail) = match rest.split_once('+') {
            Some((c, t)) => (c, Some(num(t.strip_prefix("fc").ok_or_else(bad)?)?)),
            None => (rest, None),
        };
        let dims: Vec<&str> = conv.split('x').collect();
        let (filter, filters) = match dims.as_slice() {
            [a, b] if a == b => (num(a)?, 1),
            [a, b, c] if a == b => (num(a)?, num(c)?),
            _ => return Err(bad()),
        };
        Ok(Architecture::Conv { filter, filters, fc_tail: tail })
    }
}

impl TryFrom<String> for Architecture {
    type Error = Error;
    fn try_from(s: String) -> Result<Architecture> {
        s.parse()
    }
}

impl From<Architecture> for String {
    fn from(a: Architecture) -> String {
        a.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(t: &Topology) -> (usize, usize) {
        (t.active_node_count(), t.connections().len())
    }

    #[test]
    fn fully_connected_sizes() {
        assert_eq!(sizes(&Topology::fully_connected(25, 3, 2).unwrap()), (30, 81));
        assert_eq!(sizes(&Topology::fully_connected(25, 1, 2).unwrap()), (28, 27));
        assert_eq!(sizes(&Topology::fully_connected(25, 10, 2).unwrap()), (37, 270));
        assert!(Topology::fully_connected(25, 0, 2).is_err());
        assert!(Topology::fully_connected(0, 3, 2).is_err());
    }

    #[test]
    fn convolutional_sizes_and_sharing() {
        let t = Topology::convolutional(5, 4, 1, None).unwrap();
        assert_eq!(sizes(&t), (31, 72));
        let hidden_groups: BTreeSet<_> = t
            .connections()
            .iter()
            .filter(|c| t.kind(c.src) == NodeKind::Input)
            .map(|c| c.group)
            .collect();
        assert_eq!(hidden_groups.len(), 16);
        assert_eq!(t.group_count(), 24);

        assert_eq!(sizes(&Topology::convolutional(5, 3, 1, None).unwrap()), (36, 99));
        assert_eq!(sizes(&Topology::convolutional(5, 2, 1, Some(4)).unwrap()), (47, 136));
        assert_eq!(sizes(&Topology::convolutional(5, 4, 2, Some(4)).unwrap()), (39, 168));
        assert!(Topology::convolutional(5, 6, 1, None).is_err());
    }

    #[test]
    fn conv_shared_cell_connects_matching_offsets() {
        let t = Topology::convolutional(5, 2, 1, None).unwrap();
        // group 0 is the top-left filter cell: source = position itself
        for c in t.connections().iter().filter(|c| c.group == GroupId(0)) {
            let pos = c.dst.0 - 25;
            let (py, px) = (pos / 4, pos % 4);
            assert_eq!(c.src.0, py * 5 + px);
        }
    }

    #[test]
    fn bit_width_examples() {
        assert_eq!(BitWidth::for_in_degree(2), BitWidth { n: 1, kappa: 0 });
        assert_eq!(BitWidth::for_in_degree(0), BitWidth { n: 0, kappa: 0 });
        assert_eq!(BitWidth::for_in_degree(25), BitWidth { n: 4, kappa: 5 });
        assert_eq!(BitWidth::for_in_degree(20), BitWidth { n: 4, kappa: 10 });
        for p in 0..2000usize {
            let w = BitWidth::for_in_degree(p);
            assert!((1u64 << (w.n + 1)) > p as u64 + 1);
            assert!((1u64 << w.n) <= p as u64 + 1);
        }
    }

    #[test]
    fn remove_nodes_recomputes_widths() {
        let t = Topology::fully_connected(25, 3, 2).unwrap();
        assert_eq!(t.remove_nodes(&BTreeSet::new()).unwrap(), t);
        let drop: BTreeSet<_> = (0..5).map(NodeId).collect();
        let r = t.remove_nodes(&drop).unwrap();
        for h in 25..28 {
            assert_eq!(r.predecessors(NodeId(h)).len(), 20);
            assert_eq!(r.bit_width(NodeId(h)), BitWidth { n: 4, kappa: 10 });
        }
        assert_eq!(r.remove_nodes(&drop).unwrap(), r);
        let out: BTreeSet<_> = [NodeId(28)].into();
        assert!(t.remove_nodes(&out).is_err());
    }

    #[test]
    fn removal_commutes_on_disjoint_sets() {
        let t = Topology::fully_connected(25, 5, 2).unwrap();
        let a: BTreeSet<_> = [NodeId(1), NodeId(26)].into();
        let b: BTreeSet<_> = [NodeId(7), NodeId(28)].into();
        let ab = t.remove_nodes(&a).unwrap().remove_nodes(&b).unwrap();
        let ba = t.remove_nodes(&b).unwrap().remove_nodes(&a).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn cyclic_graphs_are_accepted() {
        use NodeKind::*;
        let t = Topology::from_edges(vec![Input, Hidden, Hidden, Output], &[(0, 1), (1, 2), (2, 1), (2, 3)]).unwrap();
        assert!(t.topological_order().is_none());
        assert_eq!(t.bit_width(NodeId(1)), BitWidth::for_in_degree(2));
    }

    #[test]
    fn invalid_graphs_rejected() {
        use NodeKind::*;
        assert!(Topology::from_edges(vec![Input, Output], &[(1, 0)]).is_err());
        assert!(Topology::from_edges(vec![Input, Hidden], &[(0, 1)]).is_err());
        assert!(Topology::from_edges(vec![Input, Output], &[(1, 1)]).is_err());
        assert!(Topology::from_edges(vec![Input, Output], &[(0, 1), (0, 1)]).is_err());
    }

    #[test]
    fn architecture_strings() {
        for (i, a) in BENCHMARK_NETWORKS.iter().enumerate() {
            let s = a.to_string();
            assert_eq!(s.parse::<Architecture>().unwrap(), *a);
            assert_eq!(format!("net{i}").parse::<Architecture>().unwrap(), *a);
        }
        assert_eq!(
            "conv2x2+fc4".parse::<Architecture>().unwrap(),
            Architecture::Conv { filter: 2, filters: 1, fc_tail: Some(4) }
        );
        assert!("conv2x3".parse::<Architecture>().is_err());
        assert!("fc0".parse::<Architecture>().is_err());
        assert!("mlp".parse::<Architecture>().is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = Topology::convolutional(5, 3, 1, Some(4)).unwrap();
        let r = t.remove_nodes(&[NodeId(3), NodeId(30)].into()).unwrap();
        for x in [t, r] {
            assert_eq!(Topology::from_json(&x.to_json().unwrap()).unwrap(), x);
        }
    }
}
