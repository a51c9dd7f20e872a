use crate::error::{Error, Result};
use crate::geometry::log0;
use crate::learning::{forecast, split_point};
use crate::network::Checkpoint;

use super::audit::at_model_kappa;
use super::dataset::TrajectoryDataset;

/// Floor of the MAPE denominator.
pub const MAPE_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    /// Percent.
    pub mape: f64,
    pub rmse: f64,
    pub horizon: usize,
}

/// Running sums for element-wise MAPE and RMSE.
#[derive(Clone, Copy, Debug, Default)]
pub struct MetricAccumulator {
    abs_pct: f64,
    sq: f64,
    count: usize,
}

impl MetricAccumulator {
    pub fn push(&mut self, pred: &[f64], target: &[f64]) {
        for (y_hat, y) in pred.iter().zip(target) {
            let err = y - y_hat;
            self.abs_pct += err.abs() / y.abs().max(MAPE_EPS);
            self.sq += err * err;
            self.count += 1;
        }
    }

    pub fn report(&self, horizon: usize) -> MetricReport {
        let n = self.count.max(1) as f64;
        MetricReport {
            mape: 100.0 * self.abs_pct / n,
            rmse: (self.sq / n).sqrt(),
            horizon,
        }
    }
}

/// Model metrics alongside the copy-last-observation baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub model: MetricReport,
    pub persistence: MetricReport,
}

impl Evaluation {
    pub const CSV_HEADER: &'static str = "predictor,mape,rmse,horizon";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for (name, r) in [("model", &self.model), ("persistence", &self.persistence)] {
            s.push_str(&format!("{name},{},{},{}\n", r.mape, r.rmse, r.horizon));
        }
        s
    }
}

/// Raw-space predictions for the `horizon` snapshots after the observed
/// window of one sequence.
#[derive(Clone, Debug)]
pub struct SequencePrediction {
    pub times: Vec<f64>,
    /// `[step][node][feature]`.
    pub raw: Vec<Vec<Vec<f64>>>,
    pub states: Vec<crate::dynamics::SystemState>,
}

/// Runs the model on every sequence of `dataset`.
pub fn predict(model: &Checkpoint, dataset: &TrajectoryDataset, horizon: usize) -> Result<Vec<SequencePrediction>> {
    if horizon == 0 {
        return Err(Error::domain("horizon must be at least 1"));
    }
    let dataset = at_model_kappa(model, dataset)?;
    let kappa = dataset.kappa;
    let mut out = Vec::with_capacity(dataset.sequences.len());
    for (k, seq) in dataset.sequences.iter().enumerate() {
        let at = split_point(seq.len(), model.config.split_ratio)
            .ok_or_else(|| Error::domain(format!("sequence {k} is too short to split")))?;
        if at + horizon > seq.len() {
            return Err(Error::domain(format!(
                "horizon {horizon} exceeds the {} held-out snapshots of sequence {k}",
                seq.len() - at
            )));
        }
        let times: Vec<f64> = seq[at..at + horizon].iter().map(|s| s.t).collect();
        let fc = forecast(&seq[..at], &times, &model.params, &model.config, kappa)?;
        let raw = fc
            .decoded
            .iter()
            .map(|step| step.iter().map(|p| log0(p.coords(), kappa)).collect())
            .collect();
        out.push(SequencePrediction {
            times,
            raw,
            states: fc.states,
        });
    }
    Ok(out)
}

/// MAPE and RMSE over all nodes, features and horizon steps, for the
/// model and for persistence.
pub fn evaluate(model: &Checkpoint, dataset: &TrajectoryDataset, horizon: usize) -> Result<Evaluation> {
    let preds = predict(model, dataset, horizon)?;
    let mut acc = MetricAccumulator::default();
    let mut base = MetricAccumulator::default();
    for (seq, pred) in dataset.sequences.iter().zip(&preds) {
        let at = split_point(seq.len(), model.config.split_ratio).expect("checked by predict");
        let last = &seq[at - 1].raw;
        for (step, target) in pred.raw.iter().zip(&seq[at..]) {
            for ((p, l), y) in step.iter().zip(last).zip(&target.raw) {
                acc.push(p, y);
                base.push(l, y);
            }
        }
    }
    Ok(Evaluation {
        model: acc.report(horizon),
        persistence: base.report(horizon),
    })
}
