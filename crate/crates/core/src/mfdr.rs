//! Marginal false discovery rate estimation along a fitted path.
//!
//! At penalty level lambda, the expected number of marginally independent
//! features crossing the selection threshold is
//!   sum_j 2 Phi(-n lambda / sqrt(v_j))
//! over penalized features, where v_j = x_j' W x_j at the solution. Dividing
//! by the number of selected features and capping at one gives the mFDR
//! estimate.

use crate::erf::normal_cdf;
use crate::error::{Error, Result};
use crate::path::PathFit;

/// One penalty level of the estimate table.
#[derive(Debug, Clone)]
pub struct MfdrRow {
    pub lambda: f64,
    /// Estimated number of false discoveries at this lambda.
    pub expected_false_discoveries: f64,
    /// Number of active penalized features.
    pub selected: usize,
    /// Estimated mFDR; absent when nothing is selected but false discoveries
    /// are still expected.
    pub mfdr: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MfdrTable {
    pub rows: Vec<MfdrRow>,
    /// Number of penalized, non-constant features contributing to the sum.
    pub penalized_features: usize,
}

/// Expected count of false selections among features with the given
/// curvatures. Every curvature must be strictly positive and finite.
pub fn expected_false_discoveries(v_hat: &[f64], n: usize, lambda: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::data("sample size must be positive"));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::data("lambda must be finite and non-negative"));
    }
    let mut total = 0.0;
    for (j, &v) in v_hat.iter().enumerate() {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::numerical(format!(
                "curvature for feature {j} is {v}; the false discovery estimate requires a \
                 positive value"
            )));
        }
        total += 2.0 * normal_cdf(-(n as f64) * lambda / v.sqrt());
    }
    Ok(total)
}

/// Estimate table for every step of a fitted path.
pub fn mfdr_path(path: &PathFit) -> Result<MfdrTable> {
    let n = path.n;
    let penalized: Vec<usize> = (0..path.penalized.len())
        .filter(|&j| path.penalized[j] && !path.record.constant[j])
        .collect();
    let mut rows = Vec::with_capacity(path.len());
    for step in &path.steps {
        let lambda = path.penalty.with_lambda(step.lambda).effective_lambda();
        // Features with zero curvature carry no information and cannot be
        // selected; their contribution is the limit value 0.
        let v_hat: Vec<f64> = penalized
            .iter()
            .map(|&j| step.v_hat[j])
            .filter(|&v| v > 0.0)
            .collect();
        for &j in &penalized {
            if !step.v_hat[j].is_finite() {
                return Err(Error::numerical(format!(
                    "curvature for feature {j} is not finite at lambda {lambda}"
                )));
            }
        }
        let fd = expected_false_discoveries(&v_hat, n, lambda)?;
        let selected = step.active_set.len();
        let mfdr = if selected > 0 {
            Some((fd / selected as f64).min(1.0))
        } else if fd == 0.0 {
            Some(0.0)
        } else {
            None
        };
        rows.push(MfdrRow {
            lambda: step.lambda,
            expected_false_discoveries: fd,
            selected,
            mfdr,
        });
    }
    Ok(MfdrTable {
        rows,
        penalized_features: penalized.len(),
    })
}
