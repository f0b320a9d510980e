//! Synthetic catalogs sampled from a random directed-tree network.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Catalog, GlobalAttributeSpec, LabelSet, ProductRecord};
use crate::error::{Error, Result};
use crate::tbn::{NetNode, TreeBayesNet};
use crate::uts::{jaro_winkler, normalize_label};

/// Filler words mixed into generated descriptions.
const FILLER: &[&str] = &[
    "can",
    "bottle",
    "330ml",
    "500ml",
    "1l",
    "2l",
    "pack",
    "6x",
    "4x",
    "promo",
    "multipack",
    "glass",
    "pet",
    "chilled",
    "original",
    "new",
    "offer",
    "value",
    "single",
    "case",
];

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "zu", "re", "ta", "vo", "ni", "shi", "bex", "dor", "fa", "gul", "pim", "qua",
    "sor", "tel", "wyn", "xer", "yol", "bri", "cam", "dex", "fro", "hul", "jin", "kor", "lum",
    "mox", "nef", "oru", "pel", "rav", "sel", "tov", "umb", "vek", "wol", "zan", "ith",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    /// Total network nodes, target included.
    pub nodes: usize,
    /// States per local characteristic.
    pub states: usize,
    /// States of the target; defaults to `states`.
    pub target_states: Option<usize>,
    pub samples: usize,
    /// Probability that a description omits the true label.
    pub description_noise: f64,
    /// Probability that a local cell is blanked.
    pub local_missing: f64,
    pub seed: u64,
    pub target_name: String,
    /// Inclusive range of descriptions per record.
    pub descriptions: (usize, usize),
    /// Range of the mass each CPT row puts on its preferred child state.
    pub dependence: (f64, f64),
    /// Emit records grouped by target state instead of in sampling order,
    /// so an ordered split sees only a few target states in training.
    pub group_by_target: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            nodes: 6,
            states: 3,
            target_states: None,
            samples: 1000,
            description_noise: 0.1,
            local_missing: 0.0,
            seed: 0,
            target_name: "category".into(),
            descriptions: (1, 3),
            dependence: (0.5, 0.8),
            group_by_target: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub catalog: Catalog,
    pub labels: LabelSet,
    pub spec: GlobalAttributeSpec,
    /// The generating network; the target is node 0, locals follow in
    /// schema order.
    pub truth: TreeBayesNet,
}

fn dirichlet_flat(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / s).collect()
}

fn sample_index(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn pseudo_word(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(2..=3);
    (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

/// Distinct, mutually dissimilar one- or two-word labels.
fn target_labels(rng: &mut impl Rng, k: usize) -> Vec<String> {
    let mut labels: Vec<String> = Vec::with_capacity(k);
    let mut threshold = 0.75;
    let mut attempts = 0;
    while labels.len() < k {
        let label = if rng.gen_bool(0.5) {
            pseudo_word(rng)
        } else {
            format!("{} {}", pseudo_word(rng), pseudo_word(rng))
        };
        let norm = normalize_label(&label);
        let clash = labels
            .iter()
            .any(|l| normalize_label(l) == norm || jaro_winkler(l, &label) > threshold);
        if !clash {
            labels.push(label);
        }
        attempts += 1;
        if attempts % 1000 == 0 {
            threshold += 0.05;
        }
    }
    labels
}

fn cpt_row(rng: &mut impl Rng, k: usize, preferred: usize, dependence: (f64, f64)) -> Vec<f64> {
    let beta = if dependence.1 > dependence.0 {
        rng.gen_range(dependence.0..dependence.1)
    } else {
        dependence.0
    };
    let noise = dirichlet_flat(rng, k);
    let mut row: Vec<f64> = noise.iter().map(|p| (1.0 - beta) * p).collect();
    row[preferred] += beta;
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= s);
    row
}

/// Samples a catalog, labels, and the generating network.
///
/// The tree is a random recursive tree over a shuffled node order, rooted at
/// the first node drawn. Every CPT row mixes a point mass on a preferred
/// child state (a random injection of parent states where possible) with a
/// flat Dirichlet draw. Deterministic in `seed`.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticData> {
    if config.nodes < 2 {
        return Err(Error::invalid("synthetic network needs at least 2 nodes"));
    }
    if config.samples == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let target_k = config.target_states.unwrap_or(config.states);
    if config.states < 2 || target_k < 2 {
        return Err(Error::invalid("every node needs at least 2 states"));
    }
    for (name, p) in [
        ("description noise", config.description_noise),
        ("local missing rate", config.local_missing),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("{name} must lie in [0, 1]")));
        }
    }
    let (dlo, dhi) = config.descriptions;
    if dlo > dhi {
        return Err(Error::invalid("description range is empty"));
    }
    let (blo, bhi) = config.dependence;
    if !(0.0..=1.0).contains(&blo) || !(0.0..=1.0).contains(&bhi) || blo > bhi {
        return Err(Error::invalid("dependence range must lie in [0, 1]"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.nodes;
    let width = n.to_string().len().max(2);
    let mut names = vec![config.target_name.clone()];
    names.extend((1..n).map(|i| format!("L{i:0width$}")));
    if names[1..].contains(&config.target_name) {
        return Err(Error::invalid(
            "target name collides with a generated local name",
        ));
    }
    let card = |i: usize| if i == 0 { target_k } else { config.states };

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut parents = vec![None; n];
    for pos in 1..n {
        let p = order[rng.gen_range(0..pos)];
        parents[order[pos]] = Some(p);
    }

    let spec_states = target_labels(&mut rng, target_k);
    let state_names = |i: usize| -> Vec<String> {
        if i == 0 {
            spec_states.clone()
        } else {
            (0..config.states).map(|s| format!("s{s}")).collect()
        }
    };

    let mut cpts: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n];
    for &i in &order {
        let k = card(i);
        cpts[i] = match parents[i] {
            None => {
                let flat = dirichlet_flat(&mut rng, k);
                vec![flat.iter().map(|p| 0.5 * p + 0.5 / k as f64).collect()]
            }
            Some(p) => {
                let kp = card(p);
                let mut targets: Vec<usize> = (0..k).collect();
                targets.shuffle(&mut rng);
                (0..kp)
                    .map(|s| cpt_row(&mut rng, k, targets[s % k], config.dependence))
                    .collect()
            }
        };
    }

    let nodes: Vec<NetNode> = (0..n)
        .map(|i| NetNode {
            name: names[i].clone(),
            states: state_names(i),
            unseen: false,
            parent: parents[i].map(|p| names[p].clone()),
            cpt: cpts[i].clone(),
        })
        .collect();
    let truth = TreeBayesNet::from_parts(config.target_name.clone(), 0.0, nodes)?;

    let id_width = config.samples.to_string().len();
    let mut samples: Vec<Vec<usize>> = Vec::with_capacity(config.samples);
    for _ in 0..config.samples {
        let mut x = vec![0usize; n];
        for &i in &order {
            let row = match parents[i] {
                None => &cpts[i][0],
                Some(p) => &cpts[i][x[p]],
            };
            x[i] = sample_index(&mut rng, row);
        }
        samples.push(x);
    }

    let local_names = state_names(1);
    let mut records = Vec::with_capacity(config.samples);
    for (r, x) in samples.iter().enumerate() {
        let locals = (1..n)
            .map(|i| (!rng.gen_bool(config.local_missing)).then(|| local_names[x[i]].clone()))
            .collect();
        let label = &spec_states[x[0]];
        let count = rng.gen_range(dlo..=dhi);
        let descriptions = (0..count)
            .map(|_| {
                let mut tokens: Vec<String> = (0..rng.gen_range(1..=3))
                    .map(|_| FILLER.choose(&mut rng).unwrap().to_string())
                    .collect();
                if !rng.gen_bool(config.description_noise) {
                    let at = rng.gen_range(0..=tokens.len());
                    tokens.insert(at, label.clone());
                }
                tokens.join(" ")
            })
            .collect();
        records.push((
            x[0],
            ProductRecord {
                id: format!("P{:0id_width$}", r + 1),
                locals,
                descriptions,
            },
        ));
    }
    if config.group_by_target {
        records.sort_by_key(|(t, _)| *t);
    }

    let mut catalog = Catalog::new(names[1..].to_vec())?;
    let mut labels = LabelSet::new(config.target_name.clone());
    for (t, record) in records {
        labels
            .labels
            .insert(record.id.clone(), spec_states[t].clone());
        catalog.push(record)?;
    }
    let spec = GlobalAttributeSpec::new(config.target_name.clone(), spec_states)?;
    Ok(SyntheticData {
        catalog,
        labels,
        spec,
        truth,
    })
}
