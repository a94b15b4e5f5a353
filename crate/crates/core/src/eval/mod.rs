//! Evaluation stack: accuracy, normalized confusion matrices, per-pose
//! breakdowns, the information-density and pose-variance metrics, and
//! Grad-CAM heatmaps.

mod gradcam;
mod metrics;

pub use gradcam::{grad_cam, heatmap_to_png, GradCamTap, Heatmap};
pub use metrics::{information_density, matches_printed, pose_variance};

use serde::Serialize;

use crate::data::{batch_tensor, LabelSchema, Pose, Sample};
use crate::error::{Error, Result};
use crate::model::Model;

/// Raw prediction counts; rows are actual classes, columns predictions.
#[derive(Debug, Clone, Serialize)]
pub struct ConfusionMatrix {
    pub k: usize,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix { k, counts: vec![vec![0; k]; k] }
    }

    pub fn record(&mut self, actual: usize, predicted: usize) {
        self.counts[actual][predicted] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.k).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_support(&self, row: usize) -> usize {
        self.counts[row].iter().sum()
    }

    /// Rows rescaled to percentages (rows with no support stay zero).
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let support: usize = row.iter().sum();
                if support == 0 {
                    vec![0.0; self.k]
                } else {
                    row.iter().map(|&c| 100.0 * c as f64 / support as f64).collect()
                }
            })
            .collect()
    }

    /// Per-class recall in percent (the normalized diagonal).
    pub fn per_class_recall(&self) -> Vec<f64> {
        let norm = self.normalized();
        (0..self.k).map(|i| norm[i][i]).collect()
    }

    pub fn accuracy_pct(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            100.0 * self.correct() as f64 / total as f64
        }
    }

    /// Aligned-text rendering in the published table layout: actual classes
    /// down the rows, predictions across.
    pub fn to_text(&self, schema: &LabelSchema) -> String {
        let norm = self.normalized();
        let mut out = String::from("actual \\ predicted");
        for c in &schema.classes {
            out.push_str(&format!(" {:>8}", c));
        }
        out.push('\n');
        for (i, row) in norm.iter().enumerate() {
            out.push_str(&format!("{:<18}", schema.class_name(i)));
            for v in row {
                out.push_str(&format!(" {:>8.2}", v));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PoseBreakdownRow {
    pub pose: String,
    pub support: usize,
    pub accuracy_pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub sample_count: usize,
    pub overall_accuracy_pct: f64,
    pub per_class_recall_pct: Vec<f64>,
    pub per_pose: Vec<PoseBreakdownRow>,
    pub information_density: f64,
    /// Present when at least one tagged pose group exists.
    pub pose_variance: Option<f64>,
    pub param_count: usize,
}

pub struct Evaluation {
    pub report: MetricsReport,
    pub confusion: ConfusionMatrix,
    /// One confusion matrix per tagged pose group, in first-seen order.
    pub per_pose_confusion: Vec<(String, ConfusionMatrix)>,
}

/// Pure tallying of predictions against ground truth; the model-driven
/// [`evaluate`] and any stub classifier share this path.
pub fn tally(predictions: &[usize], samples: &[Sample], schema: &LabelSchema, param_count: usize) -> Result<Evaluation> {
    if predictions.len() != samples.len() {
        return Err(Error::data(format!(
            "{} predictions for {} samples",
            predictions.len(),
            samples.len()
        )));
    }
    let k = schema.num_classes();
    let mut confusion = ConfusionMatrix::new(k);
    let mut pose_order: Vec<Pose> = Vec::new();
    let mut per_pose: Vec<ConfusionMatrix> = Vec::new();
    for (s, &p) in samples.iter().zip(predictions) {
        if s.label >= k || p >= k {
            return Err(Error::data(format!(
                "sample {}: label {} / prediction {} outside the {k}-class schema",
                s.id, s.label, p
            )));
        }
        confusion.record(s.label, p);
        let slot = match pose_order.iter().position(|&q| q == s.pose) {
            Some(i) => i,
            None => {
                pose_order.push(s.pose);
                per_pose.push(ConfusionMatrix::new(k));
                pose_order.len() - 1
            }
        };
        per_pose[slot].record(s.label, p);
    }

    let overall = confusion.accuracy_pct();
    let mut pose_rows = Vec::new();
    let mut tagged_accs = Vec::new();
    for (pose, cm) in pose_order.iter().zip(&per_pose) {
        let acc = cm.accuracy_pct();
        pose_rows.push(PoseBreakdownRow { pose: pose.label(), support: cm.total(), accuracy_pct: acc });
        if matches!(pose, Pose::Deg(_)) {
            tagged_accs.push(acc);
        }
    }
    let pose_var = if tagged_accs.is_empty() { None } else { Some(pose_variance(&tagged_accs, overall)?) };

    let report = MetricsReport {
        sample_count: samples.len(),
        overall_accuracy_pct: overall,
        per_class_recall_pct: confusion.per_class_recall(),
        per_pose: pose_rows,
        information_density: information_density(overall, param_count)?,
        pose_variance: pose_var,
        param_count,
    };
    let per_pose_confusion = pose_order.iter().map(Pose::label).zip(per_pose).collect();
    Ok(Evaluation { report, confusion, per_pose_confusion })
}

/// Runs the model over the sample set in eval mode and tallies the results.
pub fn evaluate(model: &Model, samples: &[Sample], schema: &LabelSchema) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::data("evaluation needs a non-empty sample set"));
    }
    if schema.num_classes() != model.config.num_classes {
        return Err(Error::InvalidConfig(format!(
            "schema `{}` has {} classes, model has {}",
            schema.name,
            schema.num_classes(),
            model.config.num_classes
        )));
    }
    let mut predictions = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(32) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let x = batch_tensor(&refs)?;
        predictions.extend(model.predict_classes(&x)?);
    }
    tally(&predictions, samples, schema, model.trainable_param_count())
}
