//! Categorical statistics: contingency tables, entropy and mutual information
//! in bits, and mutual-information relevance ranking.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Catalog, GlobalAttributeSpec, LabelSet};

/// A column of categorical values encoded as indices into `states`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedColumn {
    pub states: Vec<String>,
    pub codes: Vec<Option<u32>>,
}

impl EncodedColumn {
    /// Encodes values with a state list of the distinct observed values in
    /// lexicographic order.
    pub fn encode<'a, I>(values: I) -> Self
    where
        I: IntoIterator<Item = Option<&'a str>>,
    {
        let raw: Vec<Option<&str>> = values.into_iter().collect();
        let mut states: Vec<String> = raw.iter().flatten().map(|s| s.to_string()).collect();
        states.sort();
        states.dedup();
        let lookup: HashMap<&str, u32> = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as u32))
            .collect();
        let codes = raw.iter().map(|v| v.map(|s| lookup[s])).collect();
        EncodedColumn { states, codes }
    }

    /// Encodes values against a fixed state list; values outside it are
    /// rejected.
    pub fn encode_with<'a, I>(states: Vec<String>, values: I) -> Result<Self>
    where
        I: IntoIterator<Item = Option<&'a str>>,
    {
        let lookup: HashMap<&str, u32> = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as u32))
            .collect();
        let codes = values
            .into_iter()
            .map(|v| match v {
                None => Ok(None),
                Some(s) => lookup
                    .get(s)
                    .map(|&c| Some(c))
                    .ok_or_else(|| Error::invalid(format!("value `{s}` not in state list"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EncodedColumn { states, codes })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.states.len()];
        for c in self.codes.iter().flatten() {
            counts[*c as usize] += 1;
        }
        counts
    }
}

/// Joint counts of two categorical variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: Vec<String>,
    cols: Vec<String>,
    counts: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn new(rows: Vec<String>, cols: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                left: counts.len(),
                right: rows.len(),
            });
        }
        let mut flat = Vec::with_capacity(rows.len() * cols.len());
        for row in counts {
            if row.len() != cols.len() {
                return Err(Error::DimensionMismatch {
                    left: row.len(),
                    right: cols.len(),
                });
            }
            flat.extend(row);
        }
        let total = flat.iter().sum();
        Ok(ContingencyTable {
            rows,
            cols,
            counts: flat,
            total,
        })
    }

    /// Unlabeled table; states are named by index.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let r = counts.len();
        let c = counts.first().map_or(0, Vec::len);
        let names = |n: usize| (0..n).map(|i| i.to_string()).collect();
        Self::new(names(r), names(c), counts)
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn cols(&self) -> &[String] {
        &self.cols
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.counts[r * self.cols.len() + c]
    }

    pub fn row_marginal(&self) -> Vec<u64> {
        self.counts
            .chunks(self.cols.len().max(1))
            .map(|row| row.iter().sum())
            .take(self.rows.len())
            .collect()
    }

    pub fn col_marginal(&self) -> Vec<u64> {
        let mut m = vec![0; self.cols.len()];
        for (i, &n) in self.counts.iter().enumerate() {
            m[i % self.cols.len()] += n;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let (r, c) = (self.rows.len(), self.cols.len());
        let mut counts = vec![0; r * c];
        for i in 0..r {
            for j in 0..c {
                counts[j * r + i] = self.counts[i * c + j];
            }
        }
        ContingencyTable {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            counts,
            total: self.total,
        }
    }
}

/// Cross-tabulates two aligned columns with pairwise deletion. Returns the
/// table and the number of rows excluded for a missing value in either
/// column.
pub fn cross_tabulate(a: &EncodedColumn, b: &EncodedColumn) -> Result<(ContingencyTable, usize)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let cols = b.cardinality();
    let mut counts = vec![0u64; a.cardinality() * cols];
    let mut excluded = 0;
    for (x, y) in a.codes.iter().zip(&b.codes) {
        match (x, y) {
            (Some(x), Some(y)) => counts[*x as usize * cols + *y as usize] += 1,
            _ => excluded += 1,
        }
    }
    let total = counts.iter().sum();
    Ok((
        ContingencyTable {
            rows: a.states.clone(),
            cols: b.states.clone(),
            counts,
            total,
        },
        excluded,
    ))
}

/// Shannon entropy in bits of the distribution proportional to `counts`.
pub fn entropy(counts: &[u64]) -> Result<f64> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::invalid("entropy of an all-zero count vector"));
    }
    let n = n as f64;
    let h = -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}

/// Plug-in mutual information in bits.
///
/// Per-cell terms are summed in sorted order so the result does not depend
/// on how rows and columns are permuted or transposed.
pub fn mutual_information(table: &ContingencyTable) -> Result<f64> {
    if table.total == 0 {
        return Err(Error::invalid("mutual information of an empty table"));
    }
    let n = table.total as f64;
    let rows = table.row_marginal();
    let cols = table.col_marginal();
    let width = cols.len();
    let mut terms: Vec<f64> = table
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| {
            let (r, k) = (i / width, i % width);
            let c = c as f64;
            // n_a * n_b is formed in a fixed operand order so that
            // transposing the table yields bit-identical terms.
            let (ra, cb) = (rows[r] as f64, cols[k] as f64);
            let denom = if ra <= cb { ra * cb } else { cb * ra };
            (c / n) * (c * n / denom).log2()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    Ok(terms.iter().sum::<f64>().max(0.0))
}

/// MI of two aligned columns under pairwise deletion; zero when no row has
/// both values present.
pub fn pairwise_mi(a: &EncodedColumn, b: &EncodedColumn) -> Result<f64> {
    let (table, _) = cross_tabulate(a, b)?;
    if table.total() == 0 {
        return Ok(0.0);
    }
    mutual_information(&table)
}

/// A local characteristic with its MI against the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relevance {
    pub name: String,
    pub mi: f64,
}

/// Ranks characteristics by MI against `target`, descending, ties broken
/// by ascending name.
pub fn rank_by_relevance(
    target: &EncodedColumn,
    candidates: &[(String, EncodedColumn)],
) -> Result<Vec<Relevance>> {
    let mut ranked = candidates
        .iter()
        .map(|(name, col)| {
            Ok(Relevance {
                name: name.clone(),
                mi: pairwise_mi(col, target)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| match b.mi.total_cmp(&a.mi) {
        Ordering::Equal => a.name.cmp(&b.name),
        o => o,
    });
    Ok(ranked)
}

/// The `eta` local characteristics with the highest MI against the target,
/// computed over `train_ids` only.
pub fn select_relevant(
    catalog: &Catalog,
    labels: &LabelSet,
    train_ids: &[String],
    target: &GlobalAttributeSpec,
    eta: usize,
) -> Result<Vec<Relevance>> {
    if eta == 0 {
        return Err(Error::invalid("eta must be positive"));
    }
    if eta > catalog.schema().len() {
        return Err(Error::invalid(format!(
            "eta = {eta} exceeds the {} available characteristics",
            catalog.schema().len()
        )));
    }
    let records = train_ids
        .iter()
        .map(|id| {
            catalog
                .get(id)
                .ok_or_else(|| Error::invalid(format!("training id `{id}` not in catalog")))
        })
        .collect::<Result<Vec<_>>>()?;
    let target_col = EncodedColumn::encode_with(
        target.states.clone(),
        records.iter().map(|r| labels.get(&r.id)),
    )?;
    let candidates: Vec<(String, EncodedColumn)> = catalog
        .schema()
        .iter()
        .enumerate()
        .map(|(c, name)| {
            (
                name.clone(),
                EncodedColumn::encode(records.iter().map(|r| r.locals[c].as_deref())),
            )
        })
        .collect();
    let mut ranked = rank_by_relevance(&target_col, &candidates)?;
    ranked.truncate(eta);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ProductRecord;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn entropy_known_values() {
        assert_eq!(entropy(&[5, 5]).unwrap(), 1.0);
        assert_eq!(entropy(&[10]).unwrap(), 0.0);
        // -(0.75 log2 0.75 + 0.25 log2 0.25)
        let oracle = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!(close(entropy(&[3, 1]).unwrap(), oracle, 1e-15));
        assert!(close(oracle, 0.8113, 1e-4));
        assert!(entropy(&[0, 0]).is_err());
    }

    #[test]
    fn mi_known_values() {
        let indep = ContingencyTable::from_counts(vec![vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(mutual_information(&indep).unwrap(), 0.0);
        let dep = ContingencyTable::from_counts(vec![vec![3, 0], vec![0, 3]]).unwrap();
        assert!(close(mutual_information(&dep).unwrap(), 1.0, 1e-12));

        // Direct summation over the 2x2 joint: p(a,b) in {2/6, 1/6}, marginals 1/2.
        let oracle = 2.0 * (2.0 / 6.0) * ((2.0 / 6.0) / 0.25f64).log2()
            + 2.0 * (1.0 / 6.0) * ((1.0 / 6.0) / 0.25f64).log2();
        let t = ContingencyTable::from_counts(vec![vec![2, 1], vec![1, 2]]).unwrap();
        assert!(close(mutual_information(&t).unwrap(), oracle, 1e-12));
        assert!(close(oracle, 0.0817, 1e-4));
    }

    #[test]
    fn pairwise_deletion_accounts_for_every_row() {
        let a = EncodedColumn::encode([Some("x"), None, Some("y"), Some("x")]);
        let b = EncodedColumn::encode([Some("p"), Some("q"), None, Some("p")]);
        let (t, excluded) = cross_tabulate(&a, &b).unwrap();
        assert_eq!(t.total() as usize + excluded, 4);
        assert_eq!(excluded, 2);
    }

    fn catalog_with(
        columns: &[(&str, Vec<&str>)],
        target: Vec<&str>,
    ) -> (Catalog, LabelSet, Vec<String>) {
        let schema = columns.iter().map(|(n, _)| n.to_string()).collect();
        let mut cat = Catalog::new(schema).unwrap();
        let mut labels = LabelSet::new("g");
        let mut ids = Vec::new();
        for (i, t) in target.iter().enumerate() {
            let id = format!("r{i}");
            cat.push(ProductRecord {
                id: id.clone(),
                locals: columns
                    .iter()
                    .map(|(_, v)| Some(v[i].to_string()))
                    .collect(),
                descriptions: vec![],
            })
            .unwrap();
            labels.labels.insert(id.clone(), t.to_string());
            ids.push(id);
        }
        (cat, labels, ids)
    }

    #[test]
    fn exact_copy_ranks_first_and_ties_are_lexicographic() {
        let target = vec!["a", "b", "a", "b", "a", "b", "c", "c"];
        let (cat, labels, ids) = catalog_with(
            &[
                ("zeta", vec!["1", "2", "1", "2", "1", "2", "3", "3"]),
                ("alpha", vec!["k", "m", "k", "m", "k", "m", "n", "n"]),
                ("noise", vec!["u", "u", "v", "v", "u", "v", "u", "v"]),
            ],
            target,
        );
        let spec = GlobalAttributeSpec::new("g", vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let picked = select_relevant(&cat, &labels, &ids, &spec, 2).unwrap();
        let names: Vec<_> = picked.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, vec!["alpha", "zeta"]);
        let h = entropy(&[3, 3, 2]).unwrap();
        assert!(close(picked[0].mi, h, 1e-12));

        let all = select_relevant(&cat, &labels, &ids, &spec, 3).unwrap();
        assert_eq!(all.len(), 3);
        assert!(all.windows(2).all(|w| w[0].mi >= w[1].mi));

        assert!(select_relevant(&cat, &labels, &ids, &spec, 0).is_err());
        assert!(select_relevant(&cat, &labels, &ids, &spec, 4).is_err());
    }

    fn table_strategy() -> impl Strategy<Value = Vec<Vec<u64>>> {
        (1usize..5, 1usize..5).prop_flat_map(|(r, c)| {
            proptest::collection::vec(proptest::collection::vec(0u64..20, c), r)
                .prop_filter("non-empty", |t| t.iter().flatten().sum::<u64>() > 0)
        })
    }

    proptest! {
        #[test]
        fn mi_is_transpose_invariant_and_bounded(counts in table_strategy()) {
            let t = ContingencyTable::from_counts(counts).unwrap();
            let mi = mutual_information(&t).unwrap();
            prop_assert_eq!(mi, mutual_information(&t.transpose()).unwrap());
            let hr = entropy(&t.row_marginal()).unwrap();
            let hc = entropy(&t.col_marginal()).unwrap();
            prop_assert!(mi >= 0.0);
            prop_assert!(mi <= hr.min(hc) + 1e-12);
        }

        #[test]
        fn mi_with_copy_is_entropy(values in proptest::collection::vec(0u8..6, 1..60)) {
            let strs: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            let col = EncodedColumn::encode(strs.iter().map(|s| Some(s.as_str())));
            let mi = pairwise_mi(&col, &col).unwrap();
            let h = entropy(&col.counts()).unwrap();
            prop_assert!((mi - h).abs() <= 1e-12);
        }
    }
}
