use super::{DirectedTree, NetNode, TreeBayesNet};
use crate::error::{Error, Result};
use crate::ingest::{Catalog, GlobalAttributeSpec, LabelSet};
use crate::stats::EncodedColumn;

/// Encoded training columns: the chosen local characteristics plus the
/// target, one row per training record.
///
/// Local columns use the sorted values seen in training as their states;
/// the target column uses the attribute's full state list.
#[derive(Debug, Clone)]
pub struct TrainingTable {
    names: Vec<String>,
    columns: Vec<EncodedColumn>,
    target: usize,
    rows: usize,
}

impl TrainingTable {
    pub fn from_catalog(
        catalog: &Catalog,
        labels: &LabelSet,
        ids: &[String],
        spec: &GlobalAttributeSpec,
        characteristics: &[String],
    ) -> Result<Self> {
        let records = ids
            .iter()
            .map(|id| {
                catalog
                    .get(id)
                    .ok_or_else(|| Error::invalid(format!("record `{id}` not in catalog")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut names = Vec::with_capacity(characteristics.len() + 1);
        let mut columns = Vec::with_capacity(characteristics.len() + 1);
        for name in characteristics {
            if name == &spec.name {
                return Err(Error::invalid(format!(
                    "characteristic `{name}` collides with the target name"
                )));
            }
            let c = catalog
                .column_index(name)
                .ok_or_else(|| Error::MissingCharacteristics(vec![name.clone()]))?;
            names.push(name.clone());
            columns.push(EncodedColumn::encode(
                records.iter().map(|r| r.locals[c].as_deref()),
            ));
        }
        names.push(spec.name.clone());
        columns.push(EncodedColumn::encode_with(
            spec.states.clone(),
            records.iter().map(|r| labels.get(&r.id)),
        )?);
        Ok(TrainingTable {
            target: names.len() - 1,
            names,
            columns,
            rows: records.len(),
        })
    }

    /// Builds a table from pre-encoded columns; `target` indexes `names`.
    pub fn from_columns(
        names: Vec<String>,
        columns: Vec<EncodedColumn>,
        target: usize,
    ) -> Result<Self> {
        if names.len() != columns.len() || target >= names.len() {
            return Err(Error::invalid(
                "column names, columns and target index disagree",
            ));
        }
        let rows = columns[0].len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::invalid("training columns have different lengths"));
        }
        Ok(TrainingTable {
            names,
            columns,
            target,
            rows,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn target_name(&self) -> &str {
        &self.names[self.target]
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn column(&self, name: &str) -> Result<&EncodedColumn> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::invalid(format!("no training column `{name}`")))
    }
}

fn smoothed_row(counts: &[u64], alpha: f64) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let denom = total as f64 + alpha * counts.len() as f64;
    if total == 0 || denom <= 0.0 {
        return vec![1.0 / counts.len() as f64; counts.len()];
    }
    counts.iter().map(|&c| (c as f64 + alpha) / denom).collect()
}

/// Learns Laplace-smoothed CPTs for `structure`:
/// `(count + alpha) / (row_total + alpha * cardinality)`, uniform for rows
/// with no observations.
///
/// Local nodes get one extra trailing state for values unseen in training;
/// the target keeps exactly its attribute states.
pub fn learn_cpts(
    structure: &DirectedTree,
    table: &TrainingTable,
    alpha: f64,
) -> Result<TreeBayesNet> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::invalid(format!(
            "smoothing constant must be >= 0, got {alpha}"
        )));
    }
    if table.is_empty() {
        return Err(Error::invalid("no training records"));
    }
    structure.validate()?;
    let target = table.target_name();
    if structure.index_of(target).is_none() {
        return Err(Error::invalid(format!(
            "target `{target}` missing from structure"
        )));
    }
    let cols = structure
        .nodes
        .iter()
        .map(|n| table.column(n))
        .collect::<Result<Vec<_>>>()?;
    let unseen: Vec<bool> = structure.nodes.iter().map(|n| n != target).collect();
    let card = |i: usize| cols[i].cardinality() + usize::from(unseen[i]);

    let nodes = structure
        .nodes
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let k = card(i);
            let cpt = match structure.parents[i] {
                None => {
                    let mut counts = cols[i].counts();
                    counts.resize(k, 0);
                    vec![smoothed_row(&counts, alpha)]
                }
                Some(p) => {
                    let mut counts = vec![vec![0u64; k]; card(p)];
                    for (x, y) in cols[p].codes.iter().zip(&cols[i].codes) {
                        if let (Some(x), Some(y)) = (x, y) {
                            counts[*x as usize][*y as usize] += 1;
                        }
                    }
                    counts.iter().map(|row| smoothed_row(row, alpha)).collect()
                }
            };
            NetNode {
                name: name.clone(),
                states: cols[i].states.clone(),
                unseen: unseen[i],
                parent: structure.parents[i].map(|p| structure.nodes[p].clone()),
                cpt,
            }
        })
        .collect();
    TreeBayesNet::from_parts(target.to_owned(), alpha, nodes)
}
