//! End-to-end training, prediction and reporting, in memory and over files.
//!
//! The `cmd_*` functions are what the command-line front end calls; each
//! reads its inputs from disk and writes delimiter-separated outputs with a
//! header row.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::bundle::{ModelBundle, Provenance, FORMAT_VERSION};
use crate::ensemble::{
    calibrate_tau, combine, evaluate, sweep, write_sweep, CalibrationReport, Metrics,
    PenaltyWeights, PredictionOutcome, ScoredPrediction, SweepRow,
};
use crate::error::{Error, Result, StageContext};
use crate::ingest::{
    generate_synthetic, label_attributes, load_catalog, load_labels, load_states, split_dataset,
    write_catalog, write_labels, write_states, Catalog, DatasetSplit, GlobalAttributeSpec,
    LabelSet, SplitPart, SyntheticConfig,
};
use crate::stats::select_relevant;
use crate::tbn::{
    learn_cpts, max_spanning_tree, mutual_information_graph, orient_tree, OrientationMode,
    PenalizedLikelihood, TrainingTable,
};
use crate::uts::TextModel;

/// Knobs for [`train`]. Defaults: `eta = 5`, `alpha = 1`, target-rooted
/// orientation, trigram text model at temperature 1, `tau = 0.5`,
/// penalties 2 / 0.25, grid step 0.05.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub eta: usize,
    pub alpha: f64,
    pub orientation: OrientationMode,
    pub text: TextModel,
    pub tau: f64,
    pub weights: PenaltyWeights,
    pub step: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            eta: 5,
            alpha: 1.0,
            orientation: OrientationMode::RootedAtTarget,
            text: TextModel::default(),
            tau: 0.5,
            weights: PenaltyWeights::default(),
            step: 0.05,
        }
    }
}

/// Learns the tree network on the training split and packages it with the
/// text-model parameters.
///
/// `eta` is capped at the number of local characteristics.
pub fn train(
    catalog: &Catalog,
    labels: &LabelSet,
    spec: &GlobalAttributeSpec,
    split: DatasetSplit,
    options: &TrainOptions,
    digests: (String, String),
) -> Result<ModelBundle> {
    labels.validate(spec).stage("labels")?;
    let eta = options.eta.min(catalog.schema().len());
    if eta < options.eta {
        log::warn!(
            "eta {} capped at {} available characteristics",
            options.eta,
            eta
        );
    }
    let train_ids = &split.train;
    let selected =
        select_relevant(catalog, labels, train_ids, spec, eta).stage("select_relevant")?;
    let names: Vec<String> = selected.iter().map(|r| r.name.clone()).collect();
    let table = TrainingTable::from_catalog(catalog, labels, train_ids, spec, &names)
        .stage("training_table")?;
    let mut nodes = names.clone();
    nodes.push(spec.name.clone());
    let graph = mutual_information_graph(&table, &nodes).stage("mi_graph")?;
    let skeleton = max_spanning_tree(&graph).stage("max_spanning_tree")?;
    let scorer = PenalizedLikelihood::new(&table);
    let structure =
        orient_tree(&skeleton, &spec.name, options.orientation, &scorer).stage("orient_tree")?;
    let network = learn_cpts(&structure, &table, options.alpha).stage("learn_cpts")?;

    let bundle = ModelBundle {
        format_version: FORMAT_VERSION,
        target: spec.clone(),
        eta_requested: options.eta,
        eta,
        selected,
        orientation: options.orientation.to_string(),
        network,
        text: options.text,
        tau: options.tau,
        weights: options.weights,
        step: options.step,
        provenance: Provenance {
            catalog_sha256: digests.0,
            labels_sha256: digests.1,
            split,
        },
    };
    bundle.validate().stage("bundle")?;
    Ok(bundle)
}

/// Which distribution drives the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelKind {
    #[default]
    Ensemble,
    /// Tree network posterior only.
    Sbm,
    /// Text similarity only.
    Uts,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ensemble" => Ok(ModelKind::Ensemble),
            "sbm" => Ok(ModelKind::Sbm),
            "uts" => Ok(ModelKind::Uts),
            other => Err(Error::invalid(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Predicts every record of `catalog` (or the listed ids, in order).
/// Records are scored in parallel; output order follows input order.
pub fn predict_catalog(
    bundle: &ModelBundle,
    catalog: &Catalog,
    ids: Option<&[String]>,
    tau: f64,
    kind: ModelKind,
) -> Result<Vec<PredictionOutcome>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!(
            "threshold must lie in [0, 1], got {tau}"
        )));
    }
    bundle.check_catalog(catalog)?;
    let net = &bundle.network;
    // Per network node: catalog column and value -> state lookup.
    let columns: Vec<Option<(usize, HashMap<&str, usize>)>> = net
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, node)| {
            if i == net.target_index() {
                return None;
            }
            let c = catalog.column_index(&node.name)?;
            let lookup = node
                .states
                .iter()
                .enumerate()
                .map(|(s, v)| (v.as_str(), s))
                .collect();
            Some((c, lookup))
        })
        .collect();

    let records = match ids {
        None => catalog.records().iter().collect::<Vec<_>>(),
        Some(ids) => ids
            .iter()
            .map(|id| {
                catalog
                    .get(id)
                    .ok_or_else(|| Error::invalid(format!("record `{id}` not in catalog")))
            })
            .collect::<Result<Vec<_>>>()?,
    };

    records
        .par_iter()
        .map(|record| {
            let observed: Vec<Option<usize>> = columns
                .iter()
                .map(|col| {
                    col.as_ref().and_then(|(c, lookup)| {
                        record.locals[*c]
                            .as_deref()
                            .and_then(|v| lookup.get(v).copied())
                    })
                })
                .collect();
            let p = net.posterior_indexed(&observed)?;
            let q = bundle
                .text
                .distribution(&record.descriptions, &bundle.target)?;
            let combined = match kind {
                ModelKind::Ensemble => combine(&p, &q)?,
                ModelKind::Sbm => p.clone(),
                ModelKind::Uts => q.clone(),
            };
            Ok(PredictionOutcome::from_combined(
                record.id.clone(),
                p,
                q,
                combined,
                tau,
            ))
        })
        .collect()
}

/// Pairs each outcome's CoP with whether its prediction matches the label.
pub fn score_outcomes(
    outcomes: &[PredictionOutcome],
    labels: &LabelSet,
    spec: &GlobalAttributeSpec,
) -> Result<Vec<ScoredPrediction>> {
    outcomes
        .iter()
        .map(|o| {
            let label = labels
                .get(&o.id)
                .ok_or_else(|| Error::invalid(format!("no label for record `{}`", o.id)))?;
            Ok(ScoredPrediction {
                cop: o.cop,
                correct: spec.states[o.predicted] == label,
            })
        })
        .collect()
}

/// Percent of outcomes whose predicted state matches the label.
pub fn accuracy(
    outcomes: &[PredictionOutcome],
    labels: &LabelSet,
    spec: &GlobalAttributeSpec,
) -> Result<f64> {
    Ok(evaluate(&score_outcomes(outcomes, labels, spec)?, 0.0)?.overall_accuracy_pct)
}

/// Picks the softmax temperature from `grid` that maximizes ensemble
/// accuracy on the labeled records `ids`. Ties keep the earliest grid
/// entry. Returns the temperature and its accuracy.
pub fn select_temperature(
    bundle: &ModelBundle,
    catalog: &Catalog,
    labels: &LabelSet,
    ids: &[String],
    grid: &[f64],
) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::invalid("temperature grid is empty"));
    }
    let mut candidate = bundle.clone();
    let mut best: Option<(f64, f64)> = None;
    for &t in grid {
        candidate.text.temperature = t;
        let outcomes = predict_catalog(&candidate, catalog, Some(ids), 0.0, ModelKind::Ensemble)?;
        let acc = accuracy(&outcomes, labels, &bundle.target)?;
        if best.map_or(true, |(_, a)| acc > a) {
            best = Some((t, acc));
        }
    }
    Ok(best.unwrap())
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub catalog: PathBuf,
    pub labels: PathBuf,
    pub target: String,
    /// One state per line; when absent the distinct labels are used.
    pub states: Option<PathBuf>,
    pub ratios: [f64; 3],
    pub seed: u64,
    pub ordered: bool,
    pub options: TrainOptions,
}

impl Default for TrainArgs {
    fn default() -> Self {
        TrainArgs {
            catalog: PathBuf::new(),
            labels: PathBuf::new(),
            target: String::new(),
            states: None,
            ratios: [0.6, 0.2, 0.2],
            seed: 0,
            ordered: false,
            options: TrainOptions::default(),
        }
    }
}

/// Trains one bundle from files and writes it to `out`.
pub fn cmd_train(args: &TrainArgs, out: &Path) -> Result<ModelBundle> {
    let catalog = load_catalog(&args.catalog, None).stage("load_catalog")?;
    let labels = load_labels(&args.labels, &args.target).stage("load_labels")?;
    let states = match &args.states {
        Some(p) => load_states(p).stage("load_states")?,
        None => labels.distinct(),
    };
    let spec = GlobalAttributeSpec::new(args.target.clone(), states).stage("target_spec")?;
    let split =
        split_dataset(&catalog, &labels, args.ratios, args.seed, args.ordered).stage("split")?;
    let digests = (
        sha256_file(&args.catalog).stage("digest")?,
        sha256_file(&args.labels).stage("digest")?,
    );
    let bundle = train(&catalog, &labels, &spec, split, &args.options, digests)?;
    bundle.save(out).stage("write_bundle")?;
    Ok(bundle)
}

/// Trains one bundle per attribute column of the label file, written to
/// `<out_dir>/<attribute>.json`. Per-attribute state files are not
/// supported here; states come from the labels.
pub fn cmd_train_all(args: &TrainArgs, out_dir: &Path) -> Result<Vec<(String, ModelBundle)>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let attributes = label_attributes(&args.labels).stage("load_labels")?;
    attributes
        .into_iter()
        .map(|attribute| {
            let a = TrainArgs {
                target: attribute.clone(),
                states: None,
                ..args.clone()
            };
            let bundle = cmd_train(&a, &out_dir.join(format!("{attribute}.json")))?;
            Ok((attribute, bundle))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictSummary {
    pub committed: usize,
    pub abstained: usize,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes committed predictions and the abstention queue.
///
/// Predictions: `id,predicted,cop,sbm_state,sbm_prob,uts_state,uts_prob`.
/// Queue: `id,descriptions_sha256,state_1,prob_1,state_2,prob_2,state_3,prob_3,cop`.
pub fn write_predictions(
    outcomes: &[PredictionOutcome],
    catalog: &Catalog,
    spec: &GlobalAttributeSpec,
    predictions: impl Write,
    queue: impl Write,
) -> Result<PredictSummary> {
    let mut pw = csv::Writer::from_writer(predictions);
    let mut qw = csv::Writer::from_writer(queue);
    pw.write_record([
        "id",
        "predicted",
        "cop",
        "sbm_state",
        "sbm_prob",
        "uts_state",
        "uts_prob",
    ])?;
    qw.write_record([
        "id",
        "descriptions_sha256",
        "state_1",
        "prob_1",
        "state_2",
        "prob_2",
        "state_3",
        "prob_3",
        "cop",
    ])?;
    let mut summary = PredictSummary {
        committed: 0,
        abstained: 0,
    };
    for o in outcomes {
        if o.abstained {
            let descriptions = catalog
                .get(&o.id)
                .map(|r| r.descriptions.join("\n"))
                .unwrap_or_default();
            let mut row = vec![
                o.id.clone(),
                hex::encode(Sha256::digest(descriptions.as_bytes())),
            ];
            let top = o.top(3);
            for k in 0..3 {
                let t = top.get(k).copied();
                row.push(t.map(|t| spec.states[t].clone()).unwrap_or_default());
                row.push(fmt_opt(t.map(|t| o.combined[t])));
            }
            row.push(o.cop.to_string());
            qw.write_record(&row)?;
            summary.abstained += 1;
        } else {
            let sbm = crate::ensemble::argmax(&o.sbm);
            let uts = crate::ensemble::argmax(&o.uts);
            pw.write_record([
                o.id.clone(),
                spec.states[o.predicted].clone(),
                o.cop.to_string(),
                spec.states[sbm].clone(),
                o.sbm[sbm].to_string(),
                spec.states[uts].clone(),
                o.uts[uts].to_string(),
            ])?;
            summary.committed += 1;
        }
    }
    pw.flush().map_err(|e| Error::io("<predictions>", e))?;
    qw.flush().map_err(|e| Error::io("<queue>", e))?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct PredictArgs {
    pub bundle: PathBuf,
    pub catalog: PathBuf,
    pub tau: Option<f64>,
    pub kind: ModelKind,
    pub predictions: PathBuf,
    pub queue: PathBuf,
}

pub fn cmd_predict(args: &PredictArgs) -> Result<PredictSummary> {
    let bundle = ModelBundle::load(&args.bundle).stage("load_bundle")?;
    let catalog = load_catalog(&args.catalog, None).stage("load_catalog")?;
    let tau = args.tau.unwrap_or(bundle.tau);
    let outcomes = predict_catalog(&bundle, &catalog, None, tau, args.kind).stage("predict")?;
    write_predictions(
        &outcomes,
        &catalog,
        &bundle.target,
        create(&args.predictions)?,
        create(&args.queue)?,
    )
    .stage("write_predictions")
}

/// Records evaluated by the reporting commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSet {
    Split(SplitPart),
    /// Every labeled record of the catalog.
    All,
}

impl std::str::FromStr for EvalSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(EvalSet::Split(SplitPart::Train)),
            "validation" => Ok(EvalSet::Split(SplitPart::Validation)),
            "test" => Ok(EvalSet::Split(SplitPart::Test)),
            "all" => Ok(EvalSet::All),
            other => Err(Error::invalid(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReportArgs {
    pub bundle: PathBuf,
    pub catalog: PathBuf,
    pub labels: PathBuf,
    pub set: EvalSet,
    pub kind: ModelKind,
    pub weights: Option<PenaltyWeights>,
    pub step: Option<f64>,
    pub tau: Option<f64>,
    /// Temperatures to choose from on the evaluated records before scoring;
    /// empty keeps the bundle's.
    pub temperatures: Vec<f64>,
}

struct Labeled {
    bundle: ModelBundle,
    scored: Vec<ScoredPrediction>,
}

fn labeled_outcomes(args: &ReportArgs) -> Result<Labeled> {
    let mut bundle = ModelBundle::load(&args.bundle).stage("load_bundle")?;
    let catalog = load_catalog(&args.catalog, None).stage("load_catalog")?;
    let labels = load_labels(&args.labels, &bundle.target.name).stage("load_labels")?;
    labels.validate(&bundle.target).stage("labels")?;
    let ids: Vec<String> = match args.set {
        EvalSet::Split(part) => bundle
            .provenance
            .split
            .part(part)
            .iter()
            .filter(|id| catalog.get(id).is_some())
            .cloned()
            .collect(),
        EvalSet::All => catalog
            .records()
            .iter()
            .filter(|r| labels.get(&r.id).is_some())
            .map(|r| r.id.clone())
            .collect(),
    };
    if ids.is_empty() {
        return Err(Error::invalid("no labeled records in the requested split"))
            .stage("select_records");
    }
    if !args.temperatures.is_empty() {
        let (t, _) = select_temperature(&bundle, &catalog, &labels, &ids, &args.temperatures)
            .stage("select_temperature")?;
        bundle.text.temperature = t;
    }
    let outcomes =
        predict_catalog(&bundle, &catalog, Some(&ids), 0.0, args.kind).stage("predict")?;
    let scored = score_outcomes(&outcomes, &labels, &bundle.target).stage("score")?;
    Ok(Labeled { bundle, scored })
}

/// Writes `tau,pc_pct,pi_pct,np_pct,accuracy_on_predicted_pct,overall_accuracy_pct,records`.
pub fn write_metrics(m: &Metrics, records: usize, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "tau",
        "pc_pct",
        "pi_pct",
        "np_pct",
        "accuracy_on_predicted_pct",
        "overall_accuracy_pct",
        "records",
    ])?;
    let c = &m.categories;
    w.write_record([
        c.tau.to_string(),
        c.pc_pct.to_string(),
        c.pi_pct.to_string(),
        c.np_pct.to_string(),
        m.accuracy_on_predicted_pct.to_string(),
        m.overall_accuracy_pct.to_string(),
        records.to_string(),
    ])?;
    w.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

pub fn cmd_evaluate(args: &ReportArgs, out: &Path) -> Result<Metrics> {
    let l = labeled_outcomes(args)?;
    let tau = args.tau.unwrap_or(l.bundle.tau);
    let metrics = evaluate(&l.scored, tau).stage("evaluate")?;
    write_metrics(&metrics, l.scored.len(), create(out)?).stage("write_metrics")?;
    Ok(metrics)
}

pub fn cmd_sweep(args: &ReportArgs, out: &Path) -> Result<Vec<SweepRow>> {
    let l = labeled_outcomes(args)?;
    let weights = args.weights.unwrap_or(l.bundle.weights);
    let step = args.step.unwrap_or(l.bundle.step);
    let rows = sweep(&l.scored, weights, step).stage("sweep")?;
    write_sweep(&rows, create(out)?).stage("write_sweep")?;
    Ok(rows)
}

/// Calibrates the threshold (after the temperature, when a grid is given),
/// writes the per-threshold report, and saves a copy of the bundle carrying
/// the selected values.
pub fn cmd_calibrate(
    args: &ReportArgs,
    report: &Path,
    bundle_out: &Path,
) -> Result<CalibrationReport> {
    let l = labeled_outcomes(args)?;
    let weights = args.weights.unwrap_or(l.bundle.weights);
    let step = args.step.unwrap_or(l.bundle.step);
    let calibration = calibrate_tau(&l.scored, weights, step).stage("calibrate")?;
    write_sweep(&calibration.rows, create(report)?).stage("write_report")?;
    let mut bundle = l.bundle;
    bundle.tau = calibration.selected_tau;
    bundle.weights = weights;
    bundle.step = step;
    bundle.save(bundle_out).stage("write_bundle")?;
    Ok(calibration)
}

/// Writes `catalog.csv`, `labels.csv`, `states.txt` and `truth.json` into
/// `out_dir`.
pub fn cmd_generate(config: &SyntheticConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let data = generate_synthetic(config).stage("generate")?;
    write_catalog(&data.catalog, out_dir.join("catalog.csv"))?;
    write_labels(
        &data.labels,
        data.catalog.records().iter().map(|r| r.id.as_str()),
        out_dir.join("labels.csv"),
    )?;
    write_states(&data.spec.states, out_dir.join("states.txt"))?;
    let truth = out_dir.join("truth.json");
    let mut json = serde_json::to_string_pretty(&data.truth)?;
    json.push('\n');
    std::fs::write(&truth, json).map_err(|e| Error::io(&truth, e))?;
    Ok(())
}
