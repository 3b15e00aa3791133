use std::path::Path;

use penfit_core::{
    FamilyKind, PathFit, PathStep, PenaltySpec, StandardizationRecord,
};
use serde::{Deserialize, Serialize};

use crate::errors::{CliError, CliResult};
use crate::output::Meta;

/// On-disk form of a fitted path. The top-level arrays are user-facing and
/// on the raw data scale; `internal` carries the standardized-scale state
/// needed to recompute false discovery estimates without refitting.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitFile {
    pub meta: Meta,
    pub family: FamilyKind,
    pub penalty: PenaltySpec,
    pub n: usize,
    pub feature_names: Vec<String>,
    pub penalized: Vec<bool>,
    pub truncated: bool,
    /// Penalty levels, largest first.
    pub lambda: Vec<f64>,
    pub active_count: Vec<usize>,
    pub kkt_residual: Vec<f64>,
    pub sweeps: Vec<usize>,
    /// -(1/n) log-likelihood at each step.
    pub loss: Vec<f64>,
    /// Raw-scale intercept per step.
    pub intercept: Vec<f64>,
    /// Raw-scale coefficients per step, one inner array per lambda.
    pub coefficients: Vec<Vec<f64>>,
    pub internal: Internal,
}

/// Standardized-scale solver state, step-major where per-step.
#[derive(Debug, Serialize, Deserialize)]
pub struct Internal {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub constant: Vec<bool>,
    pub intercept: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    /// Curvature x_j' W x_j at each solution.
    pub v_hat: Vec<Vec<f64>>,
    pub active_set: Vec<Vec<usize>>,
    pub clamped: Vec<bool>,
}

impl FitFile {
    pub fn from_fit(fit: &PathFit, names: &[String], meta: Meta) -> FitFile {
        let mut intercept = Vec::with_capacity(fit.len());
        let mut coefficients = Vec::with_capacity(fit.len());
        for k in 0..fit.len() {
            let (b0, beta) = fit.coefficients_raw(k);
            intercept.push(b0);
            coefficients.push(beta);
        }
        FitFile {
            meta,
            family: fit.family,
            penalty: fit.penalty,
            n: fit.n,
            feature_names: names.to_vec(),
            penalized: fit.penalized.clone(),
            truncated: fit.truncated,
            lambda: fit.steps.iter().map(|s| s.lambda).collect(),
            active_count: fit.steps.iter().map(|s| s.active_set.len()).collect(),
            kkt_residual: fit.steps.iter().map(|s| s.kkt_residual).collect(),
            sweeps: fit.steps.iter().map(|s| s.sweeps).collect(),
            loss: fit.steps.iter().map(|s| s.loss).collect(),
            intercept,
            coefficients,
            internal: Internal {
                means: fit.record.means.clone(),
                scales: fit.record.scales.clone(),
                constant: fit.record.constant.clone(),
                intercept: fit.steps.iter().map(|s| s.intercept).collect(),
                beta: fit.steps.iter().map(|s| s.beta.clone()).collect(),
                v_hat: fit.steps.iter().map(|s| s.v_hat.clone()).collect(),
                active_set: fit.steps.iter().map(|s| s.active_set.clone()).collect(),
                clamped: fit.steps.iter().map(|s| s.clamped).collect(),
            },
        }
    }

    pub fn load(path: &Path) -> CliResult<FitFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        let file: FitFile = serde_json::from_str(&text)
            .map_err(|e| CliError::data(format!("{} is not a fit file: {e}", path.display())))?;
        file.check()?;
        Ok(file)
    }

    fn check(&self) -> CliResult<()> {
        let p = self.feature_names.len();
        let m = self.lambda.len();
        let ok = self.penalized.len() == p
            && self.internal.means.len() == p
            && self.internal.scales.len() == p
            && self.internal.constant.len() == p
            && [
                self.active_count.len(),
                self.kkt_residual.len(),
                self.sweeps.len(),
                self.loss.len(),
                self.intercept.len(),
                self.coefficients.len(),
                self.internal.intercept.len(),
                self.internal.beta.len(),
                self.internal.v_hat.len(),
                self.internal.active_set.len(),
                self.internal.clamped.len(),
            ]
            .iter()
            .all(|&len| len == m)
            && self.coefficients.iter().all(|c| c.len() == p)
            && self.internal.beta.iter().all(|b| b.len() == p)
            && self.internal.v_hat.iter().all(|v| v.len() == p);
        if ok {
            Ok(())
        } else {
            Err(CliError::data("fit file arrays have inconsistent lengths"))
        }
    }

    /// Rebuild the in-memory path. The linear predictor is not persisted;
    /// nothing downstream of a reloaded fit reads it.
    pub fn to_fit(&self) -> PathFit {
        let steps = (0..self.lambda.len())
            .map(|k| PathStep {
                lambda: self.lambda[k],
                intercept: self.internal.intercept[k],
                beta: self.internal.beta[k].clone(),
                eta: Vec::new(),
                v_hat: self.internal.v_hat[k].clone(),
                active_set: self.internal.active_set[k].clone(),
                kkt_residual: self.kkt_residual[k],
                sweeps: self.sweeps[k],
                loss: self.loss[k],
                clamped: self.internal.clamped[k],
                objective_trace: None,
            })
            .collect();
        PathFit {
            family: self.family,
            penalty: self.penalty,
            n: self.n,
            penalized: self.penalized.clone(),
            record: StandardizationRecord {
                means: self.internal.means.clone(),
                scales: self.internal.scales.clone(),
                constant: self.internal.constant.clone(),
            },
            steps,
            truncated: self.truncated,
        }
    }
}
