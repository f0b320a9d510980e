#![allow(dead_code)]

use attrfuse::ingest::{generate_synthetic, SyntheticConfig};
use attrfuse::stats::EncodedColumn;
use attrfuse::tbn::{
    max_spanning_tree, mutual_information_graph, NetNode, TrainingTable, TreeBayesNet,
    WeightedGraph,
};
use rand::Rng;

/// Parent map of a random recursive tree over a shuffled order.
pub fn random_parents(rng: &mut impl Rng, n: usize) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut parents = vec![None; n];
    for pos in 1..n {
        parents[order[pos]] = Some(order[rng.gen_range(0..pos)]);
    }
    parents
}

/// A probability vector with occasional near-zero entries.
pub fn random_row(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (0..k)
        .map(|_| {
            if rng.gen_bool(0.15) {
                1e-6
            } else {
                rng.gen::<f64>() + 1e-3
            }
        })
        .collect();
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= s);
    // Absorb rounding into the largest entry so rows sum to 1 exactly enough.
    let resid = 1.0 - row.iter().sum::<f64>();
    let i = row
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    row[i] += resid;
    row
}

/// Random network with `2..=max_nodes` nodes and `2..=max_states` states
/// per node; the root and the target are chosen independently.
pub fn random_net(rng: &mut impl Rng, max_nodes: usize, max_states: usize) -> TreeBayesNet {
    let n = rng.gen_range(2..=max_nodes);
    let parents = random_parents(rng, n);
    let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=max_states)).collect();
    let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let nodes = (0..n)
        .map(|i| {
            let rows = parents[i].map_or(1, |p| cards[p]);
            NetNode {
                name: names[i].clone(),
                states: (0..cards[i]).map(|s| format!("v{s}")).collect(),
                unseen: false,
                parent: parents[i].map(|p| names[p].clone()),
                cpt: (0..rows).map(|_| random_row(rng, cards[i])).collect(),
            }
        })
        .collect();
    let target = names[rng.gen_range(0..n)].clone();
    TreeBayesNet::from_parts(target, 0.0, nodes).unwrap()
}

/// Visits every joint configuration with its probability.
pub fn for_each_joint(net: &TreeBayesNet, mut f: impl FnMut(&[usize], f64)) {
    let nodes = net.nodes();
    let cards: Vec<usize> = nodes.iter().map(|n| n.cardinality()).collect();
    let mut x = vec![0usize; nodes.len()];
    loop {
        let mut p = 1.0;
        for (i, node) in nodes.iter().enumerate() {
            let row = net.parent_of(i).map_or(0, |q| x[q]);
            p *= node.cpt[row][x[i]];
        }
        f(&x, p);
        let mut i = 0;
        loop {
            if i == x.len() {
                return;
            }
            x[i] += 1;
            if x[i] < cards[i] {
                break;
            }
            x[i] = 0;
            i += 1;
        }
    }
}

/// Target posterior by summing the full joint.
pub fn brute_posterior(net: &TreeBayesNet, observed: &[Option<usize>]) -> Vec<f64> {
    let t = net.target_index();
    let mut post = vec![0.0; net.target_node().cardinality()];
    for_each_joint(net, |x, p| {
        let consistent = observed
            .iter()
            .enumerate()
            .all(|(i, o)| i == t || o.map_or(true, |s| s == x[i]));
        if consistent {
            post[x[t]] += p;
        }
    });
    let s: f64 = post.iter().sum();
    post.iter_mut().for_each(|p| *p /= s);
    post
}

pub fn random_graph(rng: &mut impl Rng, n: usize, integer: bool) -> WeightedGraph {
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = if integer {
                rng.gen_range(0..5) as f64
            } else {
                rng.gen::<f64>()
            };
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    WeightedGraph::new((0..n).map(|i| format!("n{i}")).collect(), w).unwrap()
}

/// Sum in descending order, so equal multisets give bit-identical totals.
pub fn sorted_sum(mut ws: Vec<f64>) -> f64 {
    ws.sort_by(|a, b| b.total_cmp(a));
    ws.iter().sum()
}

/// Maximum spanning-tree weight by enumerating every (n-1)-edge subset.
pub fn brute_max_spanning_weight(g: &WeightedGraph) -> f64 {
    let n = g.len();
    if n < 2 {
        return 0.0;
    }
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let mut best = f64::NEG_INFINITY;
    let mut pick = Vec::with_capacity(n - 1);
    fn rec(
        start: usize,
        need: usize,
        edges: &[(usize, usize)],
        pick: &mut Vec<usize>,
        n: usize,
        g: &WeightedGraph,
        best: &mut f64,
    ) {
        if pick.len() == need {
            let mut comp: Vec<usize> = (0..n).collect();
            fn find(c: &mut [usize], x: usize) -> usize {
                if c[x] != x {
                    let r = find(c, c[x]);
                    c[x] = r;
                }
                c[x]
            }
            let mut ws = Vec::with_capacity(need);
            for &e in pick.iter() {
                let (a, b) = edges[e];
                let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
                if ra == rb {
                    return;
                }
                comp[ra] = rb;
                ws.push(g.weight(a, b));
            }
            let w = sorted_sum(ws);
            if w > *best {
                *best = w;
            }
            return;
        }
        for e in start..edges.len() {
            pick.push(e);
            rec(e + 1, need, edges, pick, n, g, best);
            pick.pop();
        }
    }
    rec(0, n - 1, &edges, &mut pick, n, g, &mut best);
    best
}

/// Learned and true undirected skeletons over every column of a synthetic
/// catalog.
pub fn learned_skeleton(
    seed: u64,
    nodes: usize,
    samples: usize,
) -> (Vec<(String, String)>, Vec<(String, String)>) {
    let data = generate_synthetic(&SyntheticConfig {
        nodes,
        states: 3,
        samples,
        seed,
        descriptions: (0, 0),
        ..Default::default()
    })
    .unwrap();
    let mut names: Vec<String> = data.catalog.schema().to_vec();
    let mut columns: Vec<EncodedColumn> = names
        .iter()
        .map(|c| {
            let i = data.catalog.column_index(c).unwrap();
            EncodedColumn::encode(
                data.catalog
                    .records()
                    .iter()
                    .map(|r| r.locals[i].as_deref()),
            )
        })
        .collect();
    names.push(data.spec.name.clone());
    columns.push(
        EncodedColumn::encode_with(
            data.spec.states.clone(),
            data.catalog
                .records()
                .iter()
                .map(|r| data.labels.get(&r.id)),
        )
        .unwrap(),
    );
    let target = names.len() - 1;
    let table = TrainingTable::from_columns(names.clone(), columns, target).unwrap();
    let graph = mutual_information_graph(&table, &names).unwrap();
    let learned = max_spanning_tree(&graph).unwrap().skeleton();
    (learned, data.truth.structure().skeleton())
}
