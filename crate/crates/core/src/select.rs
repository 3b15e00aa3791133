//! Choosing lambda: cross-validation and the mFDR rule.
//!
//! Folds are assigned by stratified dealing: indices are shuffled within each
//! stratum (response classes for logistic, event status for Cox) and dealt
//! round-robin, continuing the cycle across strata so fold sizes stay
//! balanced. Assignment depends only on the seed. Each training fold is
//! re-standardized, fit on the shared lambda grid, and scored on the held-out
//! rows through raw-scale coefficients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, Response};
use crate::error::{Error, Result};
use crate::family::{cox_log_partial_likelihood, log1p_exp};
use crate::mfdr::MfdrTable;
use crate::path::{fit_path, FitControls, LambdaGrid};
use crate::penalty::PenaltySpec;

/// Cross-validation error curve over a lambda grid.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    /// Mean held-out deviance per observation.
    pub cv_error: Vec<f64>,
    /// Standard error of the fold means.
    pub cv_se: Vec<f64>,
    /// Fold index per internal row of the dataset.
    pub fold_of: Vec<usize>,
    pub min_index: usize,
    pub one_se_index: usize,
}

impl CvResult {
    pub fn min_lambda(&self) -> f64 {
        self.lambdas[self.min_index]
    }

    /// Largest lambda whose error is within one standard error of the
    /// minimum.
    pub fn one_se_lambda(&self) -> f64 {
        self.lambdas[self.one_se_index]
    }
}

/// Deterministic stratified fold assignment; returns the fold of each
/// internal row.
pub(crate) fn stratified_assignment(
    dataset: &Dataset,
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = dataset.n();
    if folds < 2 {
        return Err(Error::data("at least two folds are required"));
    }
    if folds > n {
        return Err(Error::data(format!(
            "cannot split {n} observations into {folds} folds"
        )));
    }
    let strata: Vec<Vec<usize>> = match dataset.response() {
        Response::Continuous(_) => vec![(0..n).collect()],
        Response::Binary(y) => {
            let zeros = (0..n).filter(|&i| y[i] == 0).collect();
            let ones = (0..n).filter(|&i| y[i] == 1).collect();
            vec![zeros, ones]
        }
        Response::Survival { status, .. } => {
            let censored = (0..n).filter(|&i| status[i] == 0).collect();
            let events = (0..n).filter(|&i| status[i] == 1).collect();
            vec![censored, events]
        }
    };
    // Every training set must retain both classes (or at least one event),
    // which stratified dealing guarantees when each class has two members.
    match dataset.response() {
        Response::Binary(_) => {
            if strata.iter().any(|s| !s.is_empty() && s.len() < 2) {
                return Err(Error::data(
                    "cross-validation requires at least two observations in each response class",
                ));
            }
        }
        Response::Survival { .. } => {
            if strata[1].len() < 2 {
                return Err(Error::data(
                    "cross-validation requires at least two events",
                ));
            }
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; n];
    let mut cursor = 0usize;
    for mut stratum in strata {
        stratum.shuffle(&mut rng);
        for row in stratum {
            fold_of[row] = cursor % folds;
            cursor += 1;
        }
    }
    Ok(fold_of)
}

fn fold_deviance_sums(
    dataset: &Dataset,
    fold_of: &[usize],
    fold: usize,
    spec: &PenaltySpec,
    grid: &LambdaGrid,
    controls: &FitControls,
) -> Result<(Vec<f64>, usize)> {
    let n = dataset.n();
    let train_rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
    let test_rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
    let train = dataset.subset_rows(&train_rows)?;
    let fit = fit_path(&train, spec, grid, controls)?;
    if fit.len() < grid.len() {
        return Err(Error::data(
            "a training fold truncated the path; disable max_active for cross-validation",
        ));
    }
    let mut sums = Vec::with_capacity(grid.len());
    match dataset.response() {
        Response::Survival { time, status } => {
            // Held-out partial likelihood via the full-minus-train difference.
            let (t_time, t_status) = match train.response() {
                Response::Survival { time, status } => (time, status),
                _ => unreachable!(),
            };
            for k in 0..fit.len() {
                let (b0, beta_raw) = fit.coefficients_raw(k);
                let eta_full = dataset.linear_predictor_raw(b0, &beta_raw);
                let eta_train = train.linear_predictor_raw(b0, &beta_raw);
                let full = cox_log_partial_likelihood(time, status, &eta_full);
                let part = cox_log_partial_likelihood(t_time, t_status, &eta_train);
                sums.push(-2.0 * (full - part));
            }
        }
        _ => {
            let test = dataset.subset_rows(&test_rows)?;
            for k in 0..fit.len() {
                let (b0, beta_raw) = fit.coefficients_raw(k);
                let eta = test.linear_predictor_raw(b0, &beta_raw);
                let sum = match test.response() {
                    Response::Continuous(y) => y
                        .iter()
                        .zip(&eta)
                        .map(|(&yi, &ei)| (yi - ei) * (yi - ei))
                        .sum::<f64>(),
                    Response::Binary(y) => y
                        .iter()
                        .zip(&eta)
                        .map(|(&yi, &ei)| -2.0 * (yi as f64 * ei - log1p_exp(ei)))
                        .sum::<f64>(),
                    Response::Survival { .. } => unreachable!(),
                };
                sums.push(sum);
            }
        }
    }
    Ok((sums, test_rows.len()))
}

/// K-fold cross-validation over a fixed lambda grid.
pub fn cross_validate(
    dataset: &Dataset,
    spec: &PenaltySpec,
    grid: &LambdaGrid,
    controls: &FitControls,
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    spec.validate()?;
    let fold_of = stratified_assignment(dataset, folds, seed)?;
    let per_fold: Vec<(Vec<f64>, usize)> = (0..folds)
        .into_par_iter()
        .map(|fold| fold_deviance_sums(dataset, &fold_of, fold, spec, grid, controls))
        .collect::<Result<Vec<_>>>()?;

    let m = grid.len();
    let n = dataset.n() as f64;
    let mut cv_error = vec![0.0; m];
    let mut cv_se = vec![0.0; m];
    for k in 0..m {
        let total: f64 = per_fold.iter().map(|(sums, _)| sums[k]).sum();
        cv_error[k] = total / n;
        let means: Vec<f64> = per_fold
            .iter()
            .map(|(sums, size)| sums[k] / *size as f64)
            .collect();
        let mean = means.iter().sum::<f64>() / folds as f64;
        let var = means.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (folds as f64 - 1.0);
        cv_se[k] = (var / folds as f64).sqrt();
    }

    let min_index = cv_error
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .ok_or_else(|| Error::numerical("empty cross-validation curve"))?;
    let threshold = cv_error[min_index] + cv_se[min_index];
    let one_se_index = (0..m)
        .find(|&k| cv_error[k] <= threshold)
        .unwrap_or(min_index);

    Ok(CvResult {
        lambdas: grid.values().to_vec(),
        cv_error,
        cv_se,
        fold_of,
        min_index,
        one_se_index,
    })
}

/// Index of the smallest lambda whose estimated mFDR is at or below `alpha`
/// with at least one selection; `None` when no level qualifies.
pub fn select_by_mfdr(table: &MfdrTable, alpha: f64) -> Option<usize> {
    let mut choice: Option<usize> = None;
    for (k, row) in table.rows.iter().enumerate() {
        if row.selected == 0 {
            continue;
        }
        if let Some(m) = row.mfdr {
            if m <= alpha {
                choice = match choice {
                    Some(c) if table.rows[c].lambda <= row.lambda => Some(c),
                    _ => Some(k),
                };
            }
        }
    }
    choice
}
