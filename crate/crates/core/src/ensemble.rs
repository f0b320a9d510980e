//! Confidence-weighted combination of the two model distributions, the
//! confidence of prediction (CoP), abstention, threshold calibration, and
//! evaluation metrics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `1 - ||dist - onehot(t)||_2`, clamped below at 0.
///
/// The raw value reaches `1 - sqrt(2)` when all mass sits on another state;
/// negative weights would break the weighted sum in [`combine`].
pub fn confidence(dist: &[f64], t: usize) -> f64 {
    assert!(
        t < dist.len(),
        "state index {t} out of range for {} states",
        dist.len()
    );
    let sq: f64 = dist
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let d = if i == t { p - 1.0 } else { p };
            d * d
        })
        .sum();
    (1.0 - sq.sqrt()).max(0.0)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(dist: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    best
}

/// `P_t = C(p, t) p_t + C(q, t) q_t`, normalized; uniform when every term
/// vanishes.
pub fn combine(p: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    if p.is_empty() {
        return Err(Error::invalid("cannot combine empty distributions"));
    }
    let mut combined: Vec<f64> = (0..p.len())
        .map(|t| confidence(p, t) * p[t] + confidence(q, t) * q[t])
        .collect();
    let sum: f64 = combined.iter().sum();
    if sum > 0.0 {
        combined.iter_mut().for_each(|x| *x /= sum);
    } else {
        combined.fill(1.0 / p.len() as f64);
    }
    Ok(combined)
}

/// Per-record result of the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionOutcome {
    pub id: String,
    pub sbm: Vec<f64>,
    pub uts: Vec<f64>,
    pub combined: Vec<f64>,
    pub predicted: usize,
    pub cop: f64,
    pub abstained: bool,
}

impl PredictionOutcome {
    /// Builds an outcome from an already combined distribution.
    pub fn from_combined(
        id: String,
        sbm: Vec<f64>,
        uts: Vec<f64>,
        combined: Vec<f64>,
        tau: f64,
    ) -> Self {
        let predicted = argmax(&combined);
        let cop = confidence(&combined, predicted);
        PredictionOutcome {
            id,
            sbm,
            uts,
            combined,
            predicted,
            cop,
            abstained: cop <= tau,
        }
    }

    /// Indices of the `k` most probable combined states, best first.
    pub fn top(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.combined.len()).collect();
        idx.sort_by(|&a, &b| {
            self.combined[b]
                .total_cmp(&self.combined[a])
                .then(a.cmp(&b))
        });
        idx.truncate(k);
        idx
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!(
            "threshold must lie in [0, 1], got {tau}"
        )));
    }
    Ok(())
}

/// Combines `p` and `q` and abstains when `CoP <= tau`.
pub fn predict(
    id: impl Into<String>,
    p: Vec<f64>,
    q: Vec<f64>,
    tau: f64,
) -> Result<PredictionOutcome> {
    check_tau(tau)?;
    let combined = combine(&p, &q)?;
    Ok(PredictionOutcome::from_combined(
        id.into(),
        p,
        q,
        combined,
        tau,
    ))
}

/// The part of an outcome that evaluation needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPrediction {
    pub cop: f64,
    pub correct: bool,
}

/// Penalties on incorrect predictions and abstentions in the calibration
/// objective `J = P-C - lambda_pi * P-I - lambda_np * NP`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    pub lambda_pi: f64,
    pub lambda_np: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        PenaltyWeights {
            lambda_pi: 2.0,
            lambda_np: 0.25,
        }
    }
}

impl PenaltyWeights {
    pub fn objective(&self, row: &Categories) -> f64 {
        row.pc_pct - self.lambda_pi * row.pi_pct - self.lambda_np * row.np_pct
    }
}

/// Percentages of predicted-correct, predicted-incorrect, and not-predicted
/// records at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Categories {
    pub tau: f64,
    pub pc_pct: f64,
    pub pi_pct: f64,
    pub np_pct: f64,
}

pub fn categorize(scored: &[ScoredPrediction], tau: f64) -> Result<Categories> {
    if scored.is_empty() {
        return Err(Error::invalid("no outcomes to evaluate"));
    }
    let (mut pc, mut pi, mut np) = (0usize, 0usize, 0usize);
    for s in scored {
        if s.cop <= tau {
            np += 1;
        } else if s.correct {
            pc += 1;
        } else {
            pi += 1;
        }
    }
    let pct = |k: usize| 100.0 * k as f64 / scored.len() as f64;
    Ok(Categories {
        tau,
        pc_pct: pct(pc),
        pi_pct: pct(pi),
        np_pct: pct(np),
    })
}

/// Thresholds `0, step, 2 step, ...` up to and including 1.
pub fn tau_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid(format!(
            "grid step must lie in (0, 1], got {step}"
        )));
    }
    let n = (1.0 / step + 1e-9).floor() as usize;
    // Snap to 1e-9 so that 14 * 0.05 is 0.7 rather than 0.7000000000000001.
    let mut grid: Vec<f64> = (0..=n)
        .map(|i| ((i as f64 * step) * 1e9).round() / 1e9)
        .collect();
    if *grid.last().unwrap() < 1.0 - 1e-12 {
        grid.push(1.0);
    }
    Ok(grid)
}

/// One line of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub categories: Categories,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub rows: Vec<SweepRow>,
    pub selected_tau: f64,
    pub weights: PenaltyWeights,
    pub step: f64,
}

impl CalibrationReport {
    pub fn selected(&self) -> &SweepRow {
        self.rows
            .iter()
            .find(|r| r.categories.tau == self.selected_tau)
            .expect("selected threshold is a grid point")
    }
}

/// Category percentages and objective at every grid threshold.
pub fn sweep(
    scored: &[ScoredPrediction],
    weights: PenaltyWeights,
    step: f64,
) -> Result<Vec<SweepRow>> {
    tau_grid(step)?
        .into_iter()
        .map(|tau| {
            let categories = categorize(scored, tau)?;
            Ok(SweepRow {
                objective: weights.objective(&categories),
                categories,
            })
        })
        .collect()
}

/// Picks the grid threshold maximizing the objective; ties go to the
/// smallest threshold.
pub fn calibrate_tau(
    scored: &[ScoredPrediction],
    weights: PenaltyWeights,
    step: f64,
) -> Result<CalibrationReport> {
    let rows = sweep(scored, weights, step)?;
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.objective > rows[best].objective {
            best = i;
        }
    }
    Ok(CalibrationReport {
        selected_tau: rows[best].categories.tau,
        rows,
        weights,
        step,
    })
}

/// Evaluation summary at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub categories: Categories,
    /// `P-C / (P-C + P-I)` in percent; NaN when every record abstained.
    pub accuracy_on_predicted_pct: f64,
    /// Percent correct ignoring abstention.
    pub overall_accuracy_pct: f64,
}

pub fn evaluate(scored: &[ScoredPrediction], tau: f64) -> Result<Metrics> {
    let categories = categorize(scored, tau)?;
    let committed = categories.pc_pct + categories.pi_pct;
    let accuracy_on_predicted_pct = if committed > 0.0 {
        100.0 * categories.pc_pct / committed
    } else {
        f64::NAN
    };
    let correct = scored.iter().filter(|s| s.correct).count();
    Ok(Metrics {
        categories,
        accuracy_on_predicted_pct,
        overall_accuracy_pct: 100.0 * correct as f64 / scored.len() as f64,
    })
}

/// Writes `tau,pc_pct,pi_pct,np_pct,objective` rows.
pub fn write_sweep<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["tau", "pc_pct", "pi_pct", "np_pct", "objective"])?;
    for r in rows {
        let c = &r.categories;
        w.write_record([
            c.tau.to_string(),
            c.pc_pct.to_string(),
            c.pi_pct.to_string(),
            c.np_pct.to_string(),
            r.objective.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sweep>", e))?;
    Ok(())
}
