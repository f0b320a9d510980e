use std::cmp::Ordering;
use std::collections::VecDeque;

use super::{DirectedTree, TrainingTable};
use crate::error::{Error, Result};
use crate::stats::{cross_tabulate, pairwise_mi};

/// Upper bound on tree size for exhaustive orientation search.
pub const MAX_EXHAUSTIVE_NODES: usize = 20;

/// Relative margin below which two orientation scores are equal.
pub const SCORE_TIE_TOLERANCE: f64 = 1e-12;

/// Complete undirected graph with symmetric, finite edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    nodes: Vec<String>,
    weights: Vec<f64>,
}

impl WeightedGraph {
    /// `weights[i][j]` must equal `weights[j][i]`; the diagonal is ignored.
    pub fn new(nodes: Vec<String>, weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = nodes.len();
        if weights.len() != n || weights.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(
                "weight matrix must be square over the nodes",
            ));
        }
        let mut flat = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = weights[i][j];
                if !w.is_finite() {
                    return Err(Error::invalid(format!(
                        "non-finite weight between {i} and {j}"
                    )));
                }
                if w != weights[j][i] {
                    return Err(Error::invalid(format!(
                        "asymmetric weights between `{}` and `{}`",
                        nodes[i], nodes[j]
                    )));
                }
                flat[i * n + j] = w;
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = nodes.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::invalid(format!("duplicate node `{dup}`")));
        }
        Ok(WeightedGraph {
            nodes,
            weights: flat,
        })
    }

    pub fn from_fn(nodes: Vec<String>, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let n = nodes.len();
        let mut w = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                w[i][j] = v;
                w[j][i] = v;
            }
        }
        Self::new(nodes, w)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.nodes.len() + j]
    }

    fn weight_by_name(&self, a: &str, b: &str) -> Result<f64> {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => Ok(self.weight(i, j)),
            _ => Err(Error::invalid(format!("edge `{a}`-`{b}` not in graph"))),
        }
    }
}

/// Pairwise mutual-information graph over the named columns of `table`.
pub fn mutual_information_graph(table: &TrainingTable, names: &[String]) -> Result<WeightedGraph> {
    let cols = names
        .iter()
        .map(|n| table.column(n))
        .collect::<Result<Vec<_>>>()?;
    let n = names.len();
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mi = pairwise_mi(cols[i], cols[j])?;
            w[i][j] = mi;
            w[j][i] = mi;
        }
    }
    WeightedGraph::new(names.to_vec(), w)
}

/// An undirected spanning tree over the nodes of a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedTree {
    pub nodes: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl UndirectedTree {
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Directs every edge away from `root`.
    pub fn rooted_at(&self, root: usize) -> DirectedTree {
        let adj = self.adjacency();
        let mut parents = vec![None; self.nodes.len()];
        let mut visited = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !visited[v] {
                    visited[v] = true;
                    parents[v] = Some(u);
                    queue.push_back(v);
                }
            }
        }
        DirectedTree {
            nodes: self.nodes.clone(),
            parents,
        }
    }

    /// Edges as sorted name pairs.
    pub fn skeleton(&self) -> Vec<(String, String)> {
        let mut e: Vec<_> = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (&self.nodes[a], &self.nodes[b]);
                if x <= y {
                    (x.clone(), y.clone())
                } else {
                    (y.clone(), x.clone())
                }
            })
            .collect();
        e.sort();
        e
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Maximum-weight spanning tree by Kruskal's algorithm.
///
/// Edges are considered by descending weight, then by the lexicographically
/// ordered endpoint-name pair, so equal-weight graphs give a fixed answer.
pub fn max_spanning_tree(graph: &WeightedGraph) -> Result<UndirectedTree> {
    let n = graph.len();
    if n == 0 {
        return Err(Error::invalid("spanning tree of an empty graph"));
    }
    let names = graph.nodes();
    let key = |i: usize, j: usize| {
        if names[i] <= names[j] {
            (names[i].as_str(), names[j].as_str())
        } else {
            (names[j].as_str(), names[i].as_str())
        }
    };
    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    candidates.sort_by(|&(a, b), &(c, d)| {
        graph
            .weight(c, d)
            .total_cmp(&graph.weight(a, b))
            .then_with(|| key(a, b).cmp(&key(c, d)))
    });

    let mut dsu = DisjointSet::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    for (a, b) in candidates {
        if dsu.union(a, b) {
            let (x, y) = if names[a] <= names[b] { (a, b) } else { (b, a) };
            edges.push((x, y));
            if edges.len() == n - 1 {
                break;
            }
        }
    }
    Ok(UndirectedTree {
        nodes: names.to_vec(),
        edges,
    })
}

pub fn spanning_tree_weight(tree: &UndirectedTree, graph: &WeightedGraph) -> Result<f64> {
    tree.edges
        .iter()
        .map(|&(a, b)| graph.weight_by_name(&tree.nodes[a], &tree.nodes[b]))
        .sum()
}

/// Sum of `W(child, parent)` over every node with a parent.
pub fn total_weight(tree: &DirectedTree, graph: &WeightedGraph) -> Result<f64> {
    tree.edges()
        .map(|(c, p)| graph.weight_by_name(&tree.nodes[c], &tree.nodes[p]))
        .sum()
}

/// Scores a candidate orientation; higher is better.
pub trait OrientationScorer {
    fn score(&self, tree: &DirectedTree) -> Result<f64>;
}

impl<F> OrientationScorer for F
where
    F: Fn(&DirectedTree) -> Result<f64>,
{
    fn score(&self, tree: &DirectedTree) -> Result<f64> {
        self(tree)
    }
}

/// Scores by [`total_weight`]. Constant over orientations when the weights
/// are symmetric.
pub struct TotalWeightScorer<'a>(pub &'a WeightedGraph);

impl OrientationScorer for TotalWeightScorer<'_> {
    fn score(&self, tree: &DirectedTree) -> Result<f64> {
        total_weight(tree, self.0)
    }
}

/// Maximum-likelihood log2-likelihood of the training data minus
/// `0.5 * free_parameters * log2(N)`.
pub struct PenalizedLikelihood<'a> {
    table: &'a TrainingTable,
}

impl<'a> PenalizedLikelihood<'a> {
    pub fn new(table: &'a TrainingTable) -> Self {
        PenalizedLikelihood { table }
    }
}

fn xlog2x_ratio(n: u64, d: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * (n as f64 / d as f64).log2()
    }
}

impl OrientationScorer for PenalizedLikelihood<'_> {
    fn score(&self, tree: &DirectedTree) -> Result<f64> {
        let mut loglik = 0.0;
        let mut params = 0usize;
        let seen = |counts: &[u64]| counts.iter().filter(|&&c| c > 0).count().max(1);
        for (i, name) in tree.nodes.iter().enumerate() {
            let col = self.table.column(name)?;
            match tree.parents[i] {
                None => {
                    let counts = col.counts();
                    let total: u64 = counts.iter().sum();
                    loglik += counts.iter().map(|&c| xlog2x_ratio(c, total)).sum::<f64>();
                    params += seen(&counts) - 1;
                }
                Some(p) => {
                    let parent = self.table.column(&tree.nodes[p])?;
                    let (t, _) = cross_tabulate(parent, col)?;
                    let row_totals = t.row_marginal();
                    for (r, &rt) in row_totals.iter().enumerate() {
                        for c in 0..t.cols().len() {
                            loglik += xlog2x_ratio(t.get(r, c), rt);
                        }
                    }
                    params += seen(&parent.counts()) * (seen(&col.counts()) - 1);
                }
            }
        }
        let n = self.table.len().max(1) as f64;
        Ok(loglik - 0.5 * params as f64 * n.log2())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrientationMode {
    /// Direct every edge away from the target.
    #[default]
    RootedAtTarget,
    /// Score every single-rooted orientation and keep the best.
    Exhaustive,
}

impl std::str::FromStr for OrientationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rooted" | "rooted-at-target" => Ok(OrientationMode::RootedAtTarget),
            "exhaustive" => Ok(OrientationMode::Exhaustive),
            other => Err(Error::invalid(format!(
                "unknown orientation mode `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for OrientationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OrientationMode::RootedAtTarget => "rooted-at-target",
            OrientationMode::Exhaustive => "exhaustive",
        })
    }
}

/// Directs an undirected tree.
///
/// Flipping edges of a tree one at a time yields parent maps with several
/// roots; the orientations that remain trees are exactly one per choice of
/// root, so exhaustive mode enumerates roots. Ties keep the target-rooted
/// orientation.
pub fn orient_tree(
    tree: &UndirectedTree,
    target: &str,
    mode: OrientationMode,
    scorer: &dyn OrientationScorer,
) -> Result<DirectedTree> {
    let t = tree
        .nodes
        .iter()
        .position(|n| n == target)
        .ok_or_else(|| Error::invalid(format!("target `{target}` is not a tree node")))?;
    let rooted = tree.rooted_at(t);
    match mode {
        OrientationMode::RootedAtTarget => Ok(rooted),
        OrientationMode::Exhaustive => {
            if tree.nodes.len() > MAX_EXHAUSTIVE_NODES {
                return Err(Error::invalid(format!(
                    "exhaustive orientation limited to {MAX_EXHAUSTIVE_NODES} nodes, got {}",
                    tree.nodes.len()
                )));
            }
            let mut best_score = scorer.score(&rooted)?;
            let mut best = rooted;
            for root in (0..tree.nodes.len()).filter(|&r| r != t) {
                let candidate = tree.rooted_at(root);
                let s = scorer.score(&candidate)?;
                // Scores that differ only by summation order count as ties.
                if s > best_score + SCORE_TIE_TOLERANCE * best_score.abs().max(1.0) {
                    best_score = s;
                    best = candidate;
                }
            }
            Ok(best)
        }
    }
}
