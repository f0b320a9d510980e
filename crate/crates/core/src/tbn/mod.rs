//! Tree-structured Bayesian networks over categorical characteristics.
//!
//! The structure is a Chow-Liu tree: a maximum-weight spanning tree of the
//! pairwise mutual-information graph, directed by [`orient_tree`]. CPTs are
//! Laplace-smoothed counts, and the target posterior is computed exactly by
//! message passing along the tree.

mod cpt;
mod inference;
mod structure;

pub use cpt::{learn_cpts, TrainingTable};
pub use structure::{
    max_spanning_tree, mutual_information_graph, orient_tree, spanning_tree_weight, total_weight,
    OrientationMode, OrientationScorer, PenalizedLikelihood, TotalWeightScorer, UndirectedTree,
    WeightedGraph, MAX_EXHAUSTIVE_NODES,
};

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Display name of the reserved state for values never seen in training.
pub const UNSEEN_STATE: &str = "<unseen>";

/// Tolerance for CPT row normalization.
pub const ROW_TOLERANCE: f64 = 1e-9;

/// A directed tree given as a parent map over named nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedTree {
    pub nodes: Vec<String>,
    pub parents: Vec<Option<usize>>,
}

impl DirectedTree {
    pub fn validate(&self) -> Result<()> {
        validate_parent_map(&self.nodes, &self.parents)
    }

    pub fn root(&self) -> Option<usize> {
        self.parents.iter().position(Option::is_none)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    /// (child, parent) index pairs.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents
            .iter()
            .enumerate()
            .filter_map(|(c, p)| p.map(|p| (c, p)))
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        self.edges()
            .filter(|&(_, p)| p == node)
            .map(|(c, _)| c)
            .collect()
    }

    /// Undirected skeleton as sorted name pairs, for structure comparison.
    pub fn skeleton(&self) -> Vec<(String, String)> {
        let mut edges: Vec<(String, String)> = self
            .edges()
            .map(|(c, p)| {
                let (a, b) = (&self.nodes[c], &self.nodes[p]);
                if a <= b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                }
            })
            .collect();
        edges.sort();
        edges
    }

    /// One-line parenthesized rendering, children sorted by name:
    /// `target(a(c) b)`.
    pub fn render(&self) -> String {
        fn go(t: &DirectedTree, node: usize, out: &mut String) {
            out.push_str(&t.nodes[node]);
            let mut kids = t.children(node);
            kids.sort_by(|&a, &b| t.nodes[a].cmp(&t.nodes[b]));
            if !kids.is_empty() {
                out.push('(');
                for (i, k) in kids.into_iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    go(t, k, out);
                }
                out.push(')');
            }
        }
        let mut out = String::new();
        if let Some(r) = self.root() {
            go(self, r, &mut out);
        }
        out
    }
}

fn validate_parent_map(nodes: &[String], parents: &[Option<usize>]) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::InvalidModel("tree has no nodes".into()));
    }
    if nodes.len() != parents.len() {
        return Err(Error::DimensionMismatch {
            left: nodes.len(),
            right: parents.len(),
        });
    }
    let mut names = std::collections::HashSet::new();
    for n in nodes {
        if !names.insert(n) {
            return Err(Error::InvalidModel(format!("duplicate node `{n}`")));
        }
    }
    let roots = parents.iter().filter(|p| p.is_none()).count();
    if roots != 1 {
        return Err(Error::InvalidModel(format!(
            "parent map must have exactly one root, found {roots}"
        )));
    }
    for (i, p) in parents.iter().enumerate() {
        if let Some(p) = *p {
            if p >= nodes.len() || p == i {
                return Err(Error::InvalidModel(format!(
                    "node `{}` has an invalid parent",
                    nodes[i]
                )));
            }
        }
        // With a single root, walking up from every node must reach it
        // within n steps or there is a cycle.
        let mut cur = i;
        let mut steps = 0;
        while let Some(p) = parents[cur] {
            cur = p;
            steps += 1;
            if steps > nodes.len() {
                return Err(Error::InvalidModel(format!(
                    "cycle through node `{}`",
                    nodes[i]
                )));
            }
        }
    }
    Ok(())
}

/// One variable of a [`TreeBayesNet`].
///
/// `cpt` has a single row for the root; otherwise one row per parent state
/// (including the parent's unseen state) and one column per own state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetNode {
    pub name: String,
    /// States seen in training, in index order.
    pub states: Vec<String>,
    /// Whether a trailing reserved state for unseen values follows `states`.
    pub unseen: bool,
    pub parent: Option<String>,
    pub cpt: Vec<Vec<f64>>,
}

impl NetNode {
    pub fn cardinality(&self) -> usize {
        self.states.len() + usize::from(self.unseen)
    }

    pub fn state_index(&self, value: &str) -> Option<usize> {
        self.states.iter().position(|s| s == value)
    }

    pub fn state_name(&self, index: usize) -> &str {
        self.states.get(index).map_or(UNSEEN_STATE, String::as_str)
    }
}

#[derive(Serialize, Deserialize)]
struct NetDocument {
    target: String,
    alpha: f64,
    nodes: Vec<NetNode>,
}

/// A directed-tree Bayesian network with a distinguished target node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetDocument", into = "NetDocument")]
pub struct TreeBayesNet {
    target: String,
    alpha: f64,
    nodes: Vec<NetNode>,
    parents: Vec<Option<usize>>,
    target_index: usize,
}

impl TryFrom<NetDocument> for TreeBayesNet {
    type Error = Error;

    fn try_from(doc: NetDocument) -> Result<Self> {
        TreeBayesNet::from_parts(doc.target, doc.alpha, doc.nodes)
    }
}

impl From<TreeBayesNet> for NetDocument {
    fn from(net: TreeBayesNet) -> Self {
        NetDocument {
            target: net.target,
            alpha: net.alpha,
            nodes: net.nodes,
        }
    }
}

impl TreeBayesNet {
    /// Builds and validates a network: the parent map must be a tree and
    /// every CPT row a distribution (non-negative, summing to 1 within
    /// [`ROW_TOLERANCE`]).
    pub fn from_parts(target: String, alpha: f64, nodes: Vec<NetNode>) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "invalid smoothing constant {alpha}"
            )));
        }
        let names: Vec<String> = nodes.iter().map(|n| n.name.clone()).collect();
        let lookup: HashMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let parents = nodes
            .iter()
            .map(|n| match &n.parent {
                None => Ok(None),
                Some(p) => lookup.get(p.as_str()).copied().map(Some).ok_or_else(|| {
                    Error::InvalidModel(format!("node `{}` has unknown parent `{p}`", n.name))
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        validate_parent_map(&names, &parents)?;
        let target_index = *lookup
            .get(target.as_str())
            .ok_or_else(|| Error::InvalidModel(format!("target `{target}` is not a node")))?;

        for (i, node) in nodes.iter().enumerate() {
            let card = node.cardinality();
            if card == 0 {
                return Err(Error::InvalidModel(format!(
                    "node `{}` has no states",
                    node.name
                )));
            }
            let rows = parents[i].map_or(1, |p| nodes[p].cardinality());
            if node.cpt.len() != rows {
                return Err(Error::InvalidModel(format!(
                    "CPT of `{}` has {} rows, expected {rows}",
                    node.name,
                    node.cpt.len()
                )));
            }
            for (r, row) in node.cpt.iter().enumerate() {
                if row.len() != card {
                    return Err(Error::InvalidModel(format!(
                        "CPT row {r} of `{}` has {} entries, expected {card}",
                        node.name,
                        row.len()
                    )));
                }
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "CPT row {r} of `{}` has an invalid probability",
                        node.name
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_TOLERANCE {
                    return Err(Error::InvalidModel(format!(
                        "CPT row {r} of `{}` sums to {sum}",
                        node.name
                    )));
                }
            }
        }
        Ok(TreeBayesNet {
            target,
            alpha,
            nodes,
            parents,
            target_index,
        })
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn target_node(&self) -> &NetNode {
        &self.nodes[self.target_index]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn nodes(&self) -> &[NetNode] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Option<&NetNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn parent_of(&self, node: usize) -> Option<usize> {
        self.parents[node]
    }

    pub fn structure(&self) -> DirectedTree {
        DirectedTree {
            nodes: self.nodes.iter().map(|n| n.name.clone()).collect(),
            parents: self.parents.clone(),
        }
    }

    /// Multi-line human-readable dump of structure and CPTs.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "target {} alpha {}", self.target, self.alpha);
        for node in &self.nodes {
            let _ = writeln!(
                out,
                "{} <- {} ({} states)",
                node.name,
                node.parent.as_deref().unwrap_or("-"),
                node.cardinality()
            );
        }
        out
    }
}
