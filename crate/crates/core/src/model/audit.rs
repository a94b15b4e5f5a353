//! Parameter audit: exact per-layer counts, per-block subtotals and the grand
//! total, reported against the published 358K reference with a ±10% band.

use serde::Serialize;

use super::Model;
use crate::tensor::Parameter;

/// Published parameter count this architecture is audited against.
pub const REFERENCE_PARAM_COUNT: usize = 358_000;

/// Acceptable relative deviation of the audited total from the reference.
pub const REFERENCE_BAND: f64 = 0.10;

#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    pub name: String,
    pub shape: Vec<usize>,
    pub count: usize,
    pub trainable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
    /// Totals per top-level module (block1..block4, classifier), trainable
    /// parameters only.
    pub block_totals: Vec<(String, usize)>,
    pub trainable_total: usize,
    /// Trainable plus frozen state (batch-norm running statistics).
    pub grand_total: usize,
    pub fusion_length: usize,
    pub reference_total: usize,
    /// Whether `trainable_total` lies within the ±10% reference band.
    pub within_reference_band: bool,
}

/// Walks the model's ordered parameter list and tallies it.
pub fn audit_parameters(model: &Model) -> AuditReport {
    let params = model.params();
    let rows: Vec<AuditRow> = params
        .iter()
        .map(|p| AuditRow {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            count: p.numel(),
            trainable: p.trainable,
        })
        .collect();

    let mut block_totals: Vec<(String, usize)> = Vec::new();
    for p in params.iter().filter(|p| p.trainable) {
        let prefix = p.name.split('.').next().unwrap_or("").to_string();
        match block_totals.iter_mut().find(|(name, _)| *name == prefix) {
            Some((_, total)) => *total += p.numel(),
            None => block_totals.push((prefix, p.numel())),
        }
    }

    let trainable_total: usize = params.iter().filter(|p| p.trainable).map(Parameter::numel).sum();
    let grand_total: usize = params.iter().map(Parameter::numel).sum();
    let lo = (REFERENCE_PARAM_COUNT as f64 * (1.0 - REFERENCE_BAND)) as usize;
    let hi = (REFERENCE_PARAM_COUNT as f64 * (1.0 + REFERENCE_BAND)) as usize;

    AuditReport {
        rows,
        block_totals,
        trainable_total,
        grand_total,
        fusion_length: model.config.fusion_length(),
        reference_total: REFERENCE_PARAM_COUNT,
        within_reference_band: (lo..=hi).contains(&trainable_total),
    }
}

impl AuditReport {
    /// Aligned text rendering, one row per parameter tensor.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let name_w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        out.push_str(&format!("{:<name_w$}  {:>12}  {:>10}  {}\n", "name", "shape", "count", "trainable"));
        for r in &self.rows {
            let shape = format!("{:?}", r.shape);
            out.push_str(&format!("{:<name_w$}  {:>12}  {:>10}  {}\n", r.name, shape, r.count, if r.trainable { "yes" } else { "no" }));
        }
        out.push('\n');
        for (name, total) in &self.block_totals {
            out.push_str(&format!("{:<name_w$}  {:>10}\n", name, total));
        }
        out.push_str(&format!("\nfusion length        {:>10}\n", self.fusion_length));
        out.push_str(&format!("trainable total      {:>10}\n", self.trainable_total));
        out.push_str(&format!("grand total          {:>10}\n", self.grand_total));
        out.push_str(&format!(
            "reference            {:>10}  (within ±{:.0}%: {})\n",
            self.reference_total,
            REFERENCE_BAND * 100.0,
            if self.within_reference_band { "yes" } else { "no" }
        ));
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("audit report serializes")
    }
}
