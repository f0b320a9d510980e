//! Local catalogs, global attribute specs, label sets, and dataset splits.
//!
//! A catalog file is delimiter-separated text with a header
//! `id, <local characteristics...>, description` and one row per
//! (record, description) pair. Rows sharing an id are merged into a single
//! [`ProductRecord`]. An empty cell is a missing value; every other string,
//! including `NA`, is a value.

mod synth;

pub use synth::{generate_synthetic, SyntheticConfig, SyntheticData};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uts::normalize_label;

pub const ID_COLUMN: &str = "id";
pub const DESCRIPTION_COLUMN: &str = "description";

/// One product of the local database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductRecord {
    pub id: String,
    /// Local characteristic values, aligned with the owning catalog's schema.
    pub locals: Vec<Option<String>>,
    pub descriptions: Vec<String>,
}

/// An immutable-after-load set of products sharing one schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    schema: Vec<String>,
    records: Vec<ProductRecord>,
    index: HashMap<String, usize>,
}

impl Catalog {
    pub fn new(schema: Vec<String>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for name in &schema {
            if name.is_empty() || name == ID_COLUMN || name == DESCRIPTION_COLUMN {
                return Err(Error::invalid(format!(
                    "`{name}` is not a valid characteristic name"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("characteristic `{name}` repeated")));
            }
        }
        Ok(Catalog {
            schema,
            records: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn push(&mut self, record: ProductRecord) -> Result<()> {
        if record.locals.len() != self.schema.len() {
            return Err(Error::DimensionMismatch {
                left: record.locals.len(),
                right: self.schema.len(),
            });
        }
        if self.index.contains_key(&record.id) {
            return Err(Error::DuplicateId(record.id));
        }
        self.index.insert(record.id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn records(&self) -> &[ProductRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ProductRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c == name)
    }

    /// Value of characteristic `name` for `record`, `None` when missing or
    /// when the catalog has no such column.
    pub fn value<'a>(&self, record: &'a ProductRecord, name: &str) -> Option<&'a str> {
        self.column_index(name)
            .and_then(|c| record.locals[c].as_deref())
    }

    /// Records sorted by id; used for order-insensitive comparisons.
    pub fn sorted_records(&self) -> Vec<&ProductRecord> {
        let mut v: Vec<_> = self.records.iter().collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line());
    match (line, e.kind()) {
        (
            Some(line),
            csv::ErrorKind::UnequalLengths {
                expected_len, len, ..
            },
        ) => Error::Malformed {
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        (Some(line), csv::ErrorKind::Utf8 { .. }) => Error::Malformed {
            line,
            message: "invalid UTF-8".into(),
        },
        _ => Error::Csv(e),
    }
}

/// Loads a catalog file. With `schema = None` the characteristic columns are
/// taken from the header as-is.
pub fn load_catalog(path: impl AsRef<Path>, schema: Option<&[String]>) -> Result<Catalog> {
    read_catalog(open(path.as_ref())?, schema)
}

pub fn read_catalog<R: Read>(reader: R, schema: Option<&[String]>) -> Result<Catalog> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let header_ok = header.len() >= 2
        && header[0] == ID_COLUMN
        && header[header.len() - 1] == DESCRIPTION_COLUMN;
    let locals: Vec<String> = if header_ok {
        header[1..header.len() - 1].to_vec()
    } else {
        Vec::new()
    };
    if let Some(expected) = schema {
        if !header_ok || locals != expected {
            let mut full = vec![ID_COLUMN.to_owned()];
            full.extend(expected.iter().cloned());
            full.push(DESCRIPTION_COLUMN.to_owned());
            return Err(Error::Header {
                expected: full,
                found: header,
            });
        }
    } else if !header_ok {
        return Err(Error::Header {
            expected: vec![
                ID_COLUMN.to_owned(),
                "...".into(),
                DESCRIPTION_COLUMN.into(),
            ],
            found: header,
        });
    }

    let mut catalog = Catalog::new(locals)?;
    let width = catalog.schema.len();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = line_of(&row);
        let id = &row[0];
        if id.is_empty() {
            return Err(Error::Malformed {
                line,
                message: "empty id".into(),
            });
        }
        let values: Vec<Option<String>> = (0..width)
            .map(|c| {
                let cell = &row[c + 1];
                (!cell.is_empty()).then(|| cell.to_owned())
            })
            .collect();
        let description = &row[width + 1];

        match catalog.index.get(id) {
            Some(&i) => {
                let existing = &mut catalog.records[i];
                for (c, value) in values.into_iter().enumerate() {
                    match (&existing.locals[c], value) {
                        (_, None) => {}
                        (None, Some(v)) => existing.locals[c] = Some(v),
                        (Some(a), Some(b)) if *a == b => {}
                        (Some(a), Some(b)) => {
                            return Err(Error::ConflictingValues {
                                id: id.to_owned(),
                                column: catalog.schema[c].clone(),
                                first: a.clone(),
                                second: b,
                            })
                        }
                    }
                }
                if !description.is_empty() {
                    existing.descriptions.push(description.to_owned());
                }
            }
            None => {
                let descriptions = if description.is_empty() {
                    Vec::new()
                } else {
                    vec![description.to_owned()]
                };
                catalog.push(ProductRecord {
                    id: id.to_owned(),
                    locals: values,
                    descriptions,
                })?;
            }
        }
    }
    Ok(catalog)
}

pub fn write_catalog(catalog: &Catalog, path: impl AsRef<Path>) -> Result<()> {
    write_catalog_to(catalog, create(path.as_ref())?)
}

/// Writes one row per description; a record without descriptions gets a
/// single row with an empty description cell.
pub fn write_catalog_to<W: Write>(catalog: &Catalog, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![ID_COLUMN];
    header.extend(catalog.schema.iter().map(String::as_str));
    header.push(DESCRIPTION_COLUMN);
    w.write_record(&header)?;
    for record in &catalog.records {
        let mut row: Vec<&str> = Vec::with_capacity(header.len());
        row.push(&record.id);
        row.extend(record.locals.iter().map(|v| v.as_deref().unwrap_or("")));
        if record.descriptions.is_empty() {
            row.push("");
            w.write_record(&row)?;
        } else {
            for d in &record.descriptions {
                row.push(d);
                w.write_record(&row)?;
                row.pop();
            }
        }
    }
    w.flush().map_err(|e| Error::io("<catalog>", e))?;
    Ok(())
}

/// A global characteristic and its ordered states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalAttributeSpec {
    pub name: String,
    pub states: Vec<String>,
}

impl GlobalAttributeSpec {
    pub fn new(name: impl Into<String>, states: Vec<String>) -> Result<Self> {
        let spec = GlobalAttributeSpec {
            name: name.into(),
            states,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.len() < 2 {
            return Err(Error::invalid(format!(
                "attribute `{}` needs at least 2 states",
                self.name
            )));
        }
        let mut seen = BTreeMap::new();
        for s in &self.states {
            let norm = normalize_label(s);
            if norm.is_empty() {
                return Err(Error::invalid(format!(
                    "state `{s}` of `{}` is empty after normalization",
                    self.name
                )));
            }
            if let Some(prev) = seen.insert(norm, s) {
                return Err(Error::invalid(format!(
                    "states `{prev}` and `{s}` of `{}` collide after normalization",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

/// Reads one state label per line; blank lines are skipped.
pub fn load_states(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

pub fn write_states(states: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for s in states {
        text.push_str(s);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Training labels for one global attribute.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelSet {
    pub attribute: String,
    pub labels: BTreeMap<String, String>,
}

impl LabelSet {
    pub fn new(attribute: impl Into<String>) -> Self {
        LabelSet {
            attribute: attribute.into(),
            labels: BTreeMap::new(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn validate(&self, spec: &GlobalAttributeSpec) -> Result<()> {
        for (id, label) in &self.labels {
            if spec.index_of(label).is_none() {
                return Err(Error::UnknownLabel {
                    id: id.clone(),
                    label: label.clone(),
                    attribute: spec.name.clone(),
                });
            }
        }
        Ok(())
    }

    /// Distinct labels in sorted order.
    pub fn distinct(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.labels.values().collect();
        set.into_iter().cloned().collect()
    }
}

/// Attribute columns of a label file (everything after `id`).
pub fn label_attributes(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let mut rdr = csv::Reader::from_reader(open(path.as_ref())?);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.first().map(String::as_str) != Some(ID_COLUMN) || header.len() < 2 {
        return Err(Error::Header {
            expected: vec![ID_COLUMN.into(), "<attribute>".into()],
            found: header,
        });
    }
    Ok(header[1..].to_vec())
}

/// Loads the `attribute` column of a label file with header
/// `id, <attribute>[, <attribute>...]`. Empty cells mean "unlabeled".
pub fn load_labels(path: impl AsRef<Path>, attribute: &str) -> Result<LabelSet> {
    read_labels(open(path.as_ref())?, attribute)
}

pub fn read_labels<R: Read>(reader: R, attribute: &str) -> Result<LabelSet> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let column = match header.iter().position(|h| h == attribute) {
        Some(c) if c > 0 && header[0] == ID_COLUMN => c,
        _ => {
            return Err(Error::Header {
                expected: vec![ID_COLUMN.into(), attribute.into()],
                found: header,
            })
        }
    };
    let mut set = LabelSet::new(attribute);
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let (id, label) = (&row[0], &row[column]);
        if label.is_empty() {
            continue;
        }
        if let Some(prev) = set.labels.get(id) {
            if prev != label {
                return Err(Error::ConflictingValues {
                    id: id.to_owned(),
                    column: attribute.to_owned(),
                    first: prev.clone(),
                    second: label.to_owned(),
                });
            }
        }
        set.labels.insert(id.to_owned(), label.to_owned());
    }
    Ok(set)
}

/// Writes a single-attribute label file in the given id order.
pub fn write_labels<'a>(
    labels: &LabelSet,
    ids: impl IntoIterator<Item = &'a str>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path.as_ref())?);
    w.write_record([ID_COLUMN, labels.attribute.as_str()])?;
    for id in ids {
        if let Some(label) = labels.get(id) {
            w.write_record([id, label])?;
        }
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(())
}

/// Disjoint train/validation/test id lists over the labeled records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub ratios: [f64; 3],
    pub seed: u64,
    pub ordered: bool,
}

/// Which part of a [`DatasetSplit`] to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Validation,
    Test,
}

impl DatasetSplit {
    pub fn part(&self, part: SplitPart) -> &[String] {
        match part {
            SplitPart::Train => &self.train,
            SplitPart::Validation => &self.validation,
            SplitPart::Test => &self.test,
        }
    }
}

/// Splits the labeled records of `catalog`.
///
/// Validation and test sizes are `floor(n * ratio)`; the training split
/// absorbs the remainder. With `ordered` the splits follow catalog order
/// (train first), otherwise the ids are shuffled with a ChaCha8 stream
/// seeded by `seed`.
pub fn split_dataset(
    catalog: &Catalog,
    labels: &LabelSet,
    ratios: [f64; 3],
    seed: u64,
    ordered: bool,
) -> Result<DatasetSplit> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::invalid(format!(
            "split ratios out of range: {ratios:?}"
        )));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split ratios must sum to 1, got {sum}"
        )));
    }
    let mut ids: Vec<String> = catalog
        .records()
        .iter()
        .filter(|r| labels.get(&r.id).is_some())
        .map(|r| r.id.clone())
        .collect();
    let n = ids.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 labeled records to split, found {n}"
        )));
    }
    if !ordered {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ids.shuffle(&mut rng);
    }
    let floor = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
    let n_val = floor(ratios[1]);
    let n_test = floor(ratios[2]);
    let n_train = n - n_val - n_test;

    let test = ids.split_off(n_train + n_val);
    let validation = ids.split_off(n_train);
    Ok(DatasetSplit {
        train: ids,
        validation,
        test,
        ratios,
        seed,
        ordered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Vec<String> {
        vec!["flavor".into(), "brand".into()]
    }

    const SAMPLE: &str = "\
id,flavor,brand,description
p1,cola,acme,coke zero can
p1,cola,acme,coke zero bottle
p2,,acme,fanta orange
p3,NA,zest,
";

    #[test]
    fn merges_rows_by_id() {
        let cat = read_catalog(SAMPLE.as_bytes(), Some(&schema())).unwrap();
        assert_eq!(cat.len(), 3);
        let p1 = cat.get("p1").unwrap();
        assert_eq!(p1.descriptions, vec!["coke zero can", "coke zero bottle"]);
    }

    #[test]
    fn empty_cell_is_missing_and_na_is_a_value() {
        let cat = read_catalog(SAMPLE.as_bytes(), Some(&schema())).unwrap();
        let p2 = cat.get("p2").unwrap();
        assert_eq!(cat.value(p2, "flavor"), None);
        let p3 = cat.get("p3").unwrap();
        assert_eq!(cat.value(p3, "flavor"), Some("NA"));
        assert!(p3.descriptions.is_empty());
    }

    #[test]
    fn conflicting_values_name_the_id() {
        let text = "id,flavor,brand,description\nx9,cola,a,d1\nx9,lime,a,d2\n";
        let err = read_catalog(text.as_bytes(), Some(&schema())).unwrap_err();
        assert!(err.to_string().contains("x9"), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "id,flavor,brand,description\np1,cola,a,d1\np2,cola\n";
        match read_catalog(text.as_bytes(), Some(&schema())) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_must_match_schema() {
        let text = "id,brand,flavor,description\n";
        assert!(matches!(
            read_catalog(text.as_bytes(), Some(&schema())),
            Err(Error::Header { .. })
        ));
    }

    #[test]
    fn labels_validate_against_spec() {
        let spec = GlobalAttributeSpec::new("cat", vec!["cola".into(), "lime".into()]).unwrap();
        let labels = read_labels("id,cat\na,cola\nb,grape\n".as_bytes(), "cat").unwrap();
        let err = labels.validate(&spec).unwrap_err();
        assert!(err.to_string().contains("grape"));
    }

    #[test]
    fn spec_rejects_normalization_collisions() {
        assert!(
            GlobalAttributeSpec::new("g", vec!["Coke Zero".into(), "coke-zero".into()]).is_err()
        );
        assert!(GlobalAttributeSpec::new("g", vec!["only".into()]).is_err());
    }

    fn labeled(n: usize) -> (Catalog, LabelSet) {
        let mut cat = Catalog::new(vec!["a".into()]).unwrap();
        let mut labels = LabelSet::new("g");
        for i in 0..n {
            let id = format!("r{i:03}");
            cat.push(ProductRecord {
                id: id.clone(),
                locals: vec![Some("x".into())],
                descriptions: vec![],
            })
            .unwrap();
            labels.labels.insert(id, "s".into());
        }
        (cat, labels)
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let (cat, labels) = labeled(10);
        let s = split_dataset(&cat, &labels, [0.6, 0.2, 0.2], 7, false).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (6, 2, 2));
        let (cat, labels) = labeled(11);
        let s = split_dataset(&cat, &labels, [0.6, 0.2, 0.2], 7, false).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (7, 2, 2));
    }

    #[test]
    fn ordered_split_takes_file_order() {
        let (cat, labels) = labeled(10);
        let s = split_dataset(&cat, &labels, [0.2, 0.2, 0.6], 0, true).unwrap();
        assert_eq!(s.train, vec!["r000", "r001"]);
        assert_eq!(s.validation, vec!["r002", "r003"]);
        assert_eq!(s.test.len(), 6);
    }

    #[test]
    fn split_is_seeded() {
        let (cat, labels) = labeled(50);
        let a = split_dataset(&cat, &labels, [0.6, 0.2, 0.2], 42, false).unwrap();
        let b = split_dataset(&cat, &labels, [0.6, 0.2, 0.2], 42, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_errors() {
        let (cat, labels) = labeled(2);
        assert!(split_dataset(&cat, &labels, [0.6, 0.2, 0.2], 0, false).is_err());
        let (cat, labels) = labeled(10);
        assert!(split_dataset(&cat, &labels, [0.6, 0.2, 0.3], 0, false).is_err());
    }
}
