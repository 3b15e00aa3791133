//! Likelihood families: working weights, score residuals, and deviance.
//!
//! Each family exposes its contribution to the penalized objective through a
//! [`FamilyState`]: the diagonal weights w of the quadratic approximation at
//! the current linear predictor, the score residuals s with x_j' s equal to
//! the gradient u_j, and the loss -(1/n) log-likelihood up to constants.
//!
//! Cox states use Breslow's partial likelihood for tied event times. Rows are
//! already sorted by time (see [`Dataset`]), so risk sets are suffixes and all
//! quantities come from suffix sums in O(n + events).

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Response};
use crate::error::{Error, Result};

/// Probabilities are kept inside [PI_CLAMP, 1 - PI_CLAMP] so that logistic
/// weights stay bounded away from zero near saturation.
const PI_CLAMP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Gaussian,
    Binomial,
    Cox,
}

impl FamilyKind {
    pub fn of(response: &Response) -> FamilyKind {
        match response {
            Response::Continuous(_) => FamilyKind::Gaussian,
            Response::Binary(_) => FamilyKind::Binomial,
            Response::Survival { .. } => FamilyKind::Cox,
        }
    }

    /// Cox models have no intercept; the baseline hazard absorbs it.
    pub fn has_intercept(self) -> bool {
        !matches!(self, FamilyKind::Cox)
    }
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Binomial => "binomial",
            FamilyKind::Cox => "cox",
        };
        f.write_str(s)
    }
}

/// Quadratic approximation of the loss at a fixed linear predictor.
#[derive(Debug, Clone)]
pub struct FamilyState {
    /// Diagonal working weights, length n.
    pub weights: Vec<f64>,
    /// Score residuals s; the gradient of the log-likelihood in beta_j is
    /// x_j' s.
    pub residuals: Vec<f64>,
    /// -(1/n) log-likelihood, up to additive constants.
    pub loss: f64,
    /// True when the logistic probability clamp was engaged anywhere.
    pub clamped: bool,
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(eta)) without overflow.
pub(crate) fn log1p_exp(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Risk-set boundaries for sorted survival data. Distinct event times are
/// indexed 0..m; the risk set of event time k is the suffix start[k]..n.
#[derive(Debug, Clone)]
pub(crate) struct RiskSetIndex {
    pub start: Vec<usize>,
    /// Event multiplicities d_k (Breslow handling of ties).
    pub count: Vec<f64>,
}

impl RiskSetIndex {
    pub fn new(time: &[f64], status: &[u8]) -> RiskSetIndex {
        let mut start = Vec::new();
        let mut count: Vec<f64> = Vec::new();
        let mut last_time = f64::NEG_INFINITY;
        for i in 0..time.len() {
            if status[i] == 1 {
                if start.is_empty() || time[i] > last_time {
                    start.push(i);
                    count.push(1.0);
                    last_time = time[i];
                } else {
                    *count.last_mut().unwrap() += 1.0;
                }
            }
        }
        RiskSetIndex { start, count }
    }

    pub fn len(&self) -> usize {
        self.start.len()
    }
}

fn gaussian_state(y: &[f64], eta: &[f64]) -> FamilyState {
    let n = y.len();
    let mut residuals = Vec::with_capacity(n);
    let mut loss = 0.0;
    for i in 0..n {
        let r = y[i] - eta[i];
        loss += r * r;
        residuals.push(r);
    }
    FamilyState {
        weights: vec![1.0; n],
        residuals,
        loss: loss / (2.0 * n as f64),
        clamped: false,
    }
}

fn binomial_state(y: &[u8], eta: &[f64]) -> FamilyState {
    let n = y.len();
    let mut weights = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut loss = 0.0;
    let mut clamped = false;
    for i in 0..n {
        let mut pi = sigmoid(eta[i]);
        if pi < PI_CLAMP {
            pi = PI_CLAMP;
            clamped = true;
        } else if pi > 1.0 - PI_CLAMP {
            pi = 1.0 - PI_CLAMP;
            clamped = true;
        }
        weights.push(pi * (1.0 - pi));
        residuals.push(y[i] as f64 - pi);
        loss -= y[i] as f64 * eta[i] - log1p_exp(eta[i]);
    }
    FamilyState {
        weights,
        residuals,
        loss: loss / n as f64,
        clamped,
    }
}

fn cox_state(time: &[f64], status: &[u8], eta: &[f64]) -> FamilyState {
    let n = time.len();
    let index = RiskSetIndex::new(time, status);
    let m = index.len();
    // Shift before exponentiating; every downstream ratio is shift-invariant.
    let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp_eta: Vec<f64> = eta.iter().map(|&e| (e - shift).exp()).collect();
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + exp_eta[i];
    }

    let mut loss = 0.0;
    for k in 0..m {
        loss += index.count[k] * suffix[index.start[k]].ln();
    }
    for i in 0..n {
        if status[i] == 1 {
            loss -= eta[i] - shift;
        }
    }

    let mut weights = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut cum1 = 0.0; // sum over passed event times of d_k / D_k
    let mut cum2 = 0.0; // sum of d_k / D_k^2
    let mut k = 0;
    for i in 0..n {
        while k < m && index.start[k] <= i {
            let d_big = suffix[index.start[k]];
            cum1 += index.count[k] / d_big;
            cum2 += index.count[k] / (d_big * d_big);
            k += 1;
        }
        let e = exp_eta[i];
        residuals.push(status[i] as f64 - e * cum1);
        weights.push((e * cum1 - e * e * cum2).max(0.0));
    }
    FamilyState {
        weights,
        residuals,
        loss: loss / n as f64,
        clamped: false,
    }
}

/// Working state of the dataset's family at the given linear predictor
/// (internal row order).
pub fn family_state(dataset: &Dataset, eta: &[f64]) -> Result<FamilyState> {
    if eta.len() != dataset.n() {
        return Err(Error::data(format!(
            "linear predictor has length {} but the dataset has {} rows",
            eta.len(),
            dataset.n()
        )));
    }
    let state = match dataset.response() {
        Response::Continuous(y) => gaussian_state(y, eta),
        Response::Binary(y) => binomial_state(y, eta),
        Response::Survival { time, status } => cox_state(time, status, eta),
    };
    if !state.loss.is_finite() {
        return Err(Error::numerical(
            "likelihood evaluation produced a non-finite loss",
        ));
    }
    Ok(state)
}

/// Total log partial likelihood (Breslow) at the given linear predictor.
pub fn cox_log_partial_likelihood(time: &[f64], status: &[u8], eta: &[f64]) -> f64 {
    let state = cox_state(time, status, eta);
    -state.loss * time.len() as f64
}

/// Exact curvature x_j' W x_j per feature for the Cox model, using the full
/// Hessian of the partial likelihood rather than its diagonal approximation.
/// Standardized columns; values on the unnormalized (n) scale.
pub fn cox_full_curvature(dataset: &Dataset, eta: &[f64]) -> Result<Vec<f64>> {
    let (time, status) = match dataset.response() {
        Response::Survival { time, status } => (time, status),
        _ => {
            return Err(Error::data(
                "full-curvature computation applies to survival data only",
            ))
        }
    };
    let n = dataset.n();
    let index = RiskSetIndex::new(time, status);
    let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp_eta: Vec<f64> = eta.iter().map(|&e| (e - shift).exp()).collect();
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + exp_eta[i];
    }
    let mut out = Vec::with_capacity(dataset.p());
    let mut sx = vec![0.0; n + 1];
    let mut sxx = vec![0.0; n + 1];
    for j in 0..dataset.p() {
        let col = dataset.column(j);
        for i in (0..n).rev() {
            sx[i] = sx[i + 1] + exp_eta[i] * col[i];
            sxx[i] = sxx[i + 1] + exp_eta[i] * col[i] * col[i];
        }
        let mut v = 0.0;
        for k in 0..index.len() {
            let s0 = suffix[index.start[k]];
            let mean = sx[index.start[k]] / s0;
            v += index.count[k] * (sxx[index.start[k]] / s0 - mean * mean);
        }
        out.push(v.max(0.0));
    }
    Ok(out)
}

/// Mean deviance of the dataset under raw-scale coefficients: mean squared
/// error (gaussian), mean binomial deviance, or -2/n times the log partial
/// likelihood (Cox).
pub fn deviance(dataset: &Dataset, intercept: f64, beta_raw: &[f64]) -> f64 {
    let eta = dataset.linear_predictor_raw(intercept, beta_raw);
    let n = dataset.n() as f64;
    match dataset.response() {
        Response::Continuous(y) => {
            y.iter()
                .zip(&eta)
                .map(|(&yi, &ei)| (yi - ei) * (yi - ei))
                .sum::<f64>()
                / n
        }
        Response::Binary(y) => {
            y.iter()
                .zip(&eta)
                .map(|(&yi, &ei)| -2.0 * (yi as f64 * ei - log1p_exp(ei)))
                .sum::<f64>()
                / n
        }
        Response::Survival { time, status } => {
            -2.0 * cox_log_partial_likelihood(time, status, &eta) / n
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn survival_dataset(time: Vec<f64>, status: Vec<u8>, p: usize) -> Dataset {
        let n = time.len();
        // Deterministic non-constant filler columns.
        let cols = (0..p)
            .map(|j| (0..n).map(|i| ((i * (j + 2)) % 7) as f64).collect())
            .collect();
        Dataset::from_columns(
            cols,
            Response::Survival { time, status },
            vec![true; p],
            None,
        )
        .unwrap()
    }

    #[test]
    fn gaussian_state_is_plain_residuals() {
        let ds = Dataset::from_columns(
            vec![vec![1.0, 2.0, 3.0, 4.0]],
            Response::Continuous(vec![1.0, 0.0, 2.0, -1.0]),
            vec![true],
            None,
        )
        .unwrap();
        let eta = vec![0.5, 0.5, 0.5, 0.5];
        let st = family_state(&ds, &eta).unwrap();
        assert_eq!(st.residuals, vec![0.5, -0.5, 1.5, -1.5]);
        assert!(st.weights.iter().all(|&w| w == 1.0));
        assert_abs_diff_eq!(st.loss, (0.25 + 0.25 + 2.25 + 2.25) / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn binomial_state_at_zero_eta() {
        let ds = Dataset::from_columns(
            vec![vec![1.0, 2.0, 3.0, 4.0]],
            Response::Binary(vec![1, 0, 1, 0]),
            vec![true],
            None,
        )
        .unwrap();
        let st = family_state(&ds, &[0.0; 4]).unwrap();
        for (i, &y) in [1u8, 0, 1, 0].iter().enumerate() {
            assert_abs_diff_eq!(st.residuals[i], y as f64 - 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(st.weights[i], 0.25, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(st.loss, 2.0_f64.ln(), epsilon = 1e-12);
        assert!(!st.clamped);
    }

    #[test]
    fn binomial_state_is_stable_at_extreme_eta() {
        let ds = Dataset::from_columns(
            vec![vec![1.0, 2.0, 3.0, 4.0]],
            Response::Binary(vec![1, 0, 1, 0]),
            vec![true],
            None,
        )
        .unwrap();
        let st = family_state(&ds, &[40.0, -40.0, 700.0, -700.0]).unwrap();
        assert!(st.clamped);
        assert!(st.loss.is_finite());
        for i in 0..4 {
            assert!(st.weights[i] >= PI_CLAMP * (1.0 - PI_CLAMP) - 1e-15);
            assert!(st.residuals[i].is_finite());
        }
    }

    #[test]
    fn cox_state_small_example_by_hand() {
        let ds = survival_dataset(vec![1.0, 2.0, 3.0], vec![1, 1, 1], 1);
        let st = family_state(&ds, &[0.0; 3]).unwrap();
        assert_abs_diff_eq!(st.residuals[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.residuals[1], 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.residuals[2], -5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.weights[0], 2.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.weights[1], 17.0 / 36.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.weights[2], 17.0 / 36.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.loss, 6.0_f64.ln() / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn cox_state_breslow_ties() {
        let ds = survival_dataset(vec![1.0, 1.0, 2.0], vec![1, 1, 1], 1);
        let st = family_state(&ds, &[0.0; 3]).unwrap();
        // d = 2 at t = 1 with D = 3; d = 1 at t = 2 with D = 1.
        assert_abs_diff_eq!(st.residuals[0], 1.0 - 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.residuals[1], 1.0 - 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.residuals[2], 1.0 - 2.0 / 3.0 - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.loss, 2.0 * 3.0_f64.ln() / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn censored_before_first_event_carries_no_information() {
        let ds = survival_dataset(vec![1.0, 2.0, 3.0], vec![0, 1, 1], 1);
        let st = family_state(&ds, &[0.3, -0.2, 0.1]).unwrap();
        assert_eq!(st.residuals[0], 0.0);
        assert_eq!(st.weights[0], 0.0);
    }

    #[test]
    fn cox_loss_is_shift_invariant() {
        let ds = survival_dataset(vec![2.0, 3.0, 5.0, 7.0, 11.0], vec![1, 0, 1, 1, 0], 2);
        let eta = vec![0.4, -1.1, 0.0, 2.2, -0.7];
        let shifted: Vec<f64> = eta.iter().map(|e| e + 123.0).collect();
        let a = family_state(&ds, &eta).unwrap();
        let b = family_state(&ds, &shifted).unwrap();
        assert_abs_diff_eq!(a.loss, b.loss, epsilon = 1e-9);
        for i in 0..5 {
            assert_abs_diff_eq!(a.residuals[i], b.residuals[i], epsilon = 1e-9);
            assert_abs_diff_eq!(a.weights[i], b.weights[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn null_binomial_deviance_is_two_log_two_per_observation() {
        let ds = Dataset::from_columns(
            vec![vec![1.0, 2.0, 3.0, 4.0]],
            Response::Binary(vec![1, 0, 1, 0]),
            vec![true],
            None,
        )
        .unwrap();
        // Balanced response: the null intercept is 0.
        let d = deviance(&ds, 0.0, &[0.0]);
        assert_abs_diff_eq!(d, 2.0 * 2.0_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn cox_deviance_decreases_with_signal() {
        // Strongly separated risk: high x fails early.
        let x = vec![vec![5.0, 4.0, 3.0, 2.0, 1.0, 0.0]];
        let ds = Dataset::from_columns(
            x,
            Response::Survival {
                time: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
                status: vec![1; 6],
            },
            vec![true],
            None,
        )
        .unwrap();
        let d0 = deviance(&ds, 0.0, &[0.0]);
        let d1 = deviance(&ds, 0.0, &[1.0]);
        assert!(d0.is_finite() && d1.is_finite());
        assert!(d1 < d0);
    }

    // Explicit O(n * events) recomputation of the Cox state from the
    // probability matrix pi[i][k] = exp(eta_i) / D_k.
    fn cox_state_explicit(
        time: &[f64],
        status: &[u8],
        eta: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let n = time.len();
        let mut event_times: Vec<f64> = Vec::new();
        let mut d: Vec<f64> = Vec::new();
        for i in 0..n {
            if status[i] == 1 {
                if event_times.last() != Some(&time[i]) {
                    event_times.push(time[i]);
                    d.push(1.0);
                } else {
                    *d.last_mut().unwrap() += 1.0;
                }
            }
        }
        let m = event_times.len();
        let mut pi = vec![vec![0.0; m]; n];
        for k in 0..m {
            let denom: f64 = (0..n)
                .filter(|&i| time[i] >= event_times[k])
                .map(|i| eta[i].exp())
                .sum();
            for i in 0..n {
                if time[i] >= event_times[k] {
                    pi[i][k] = eta[i].exp() / denom;
                }
            }
        }
        let mut s = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            s[i] = status[i] as f64;
            for k in 0..m {
                s[i] -= d[k] * pi[i][k];
                w[i] += d[k] * pi[i][k] * (1.0 - pi[i][k]);
            }
        }
        (s, w, pi)
    }

    proptest! {
        #[test]
        fn cox_suffix_sums_match_explicit_probability_matrix(
            seed in 0u64..500,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(3..12);
            let time: Vec<f64> = (0..n)
                .map(|_| (rng.gen_range(1..5) as f64) / 2.0)
                .collect();
            let mut status: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            if !status.contains(&1) {
                status[0] = 1;
            }
            let ds = Dataset::from_columns(
                vec![(0..n).map(|i| i as f64).collect()],
                Response::Survival { time, status },
                vec![true],
                None,
            )
            .unwrap();
            let eta: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let st = family_state(&ds, &eta).unwrap();
            let (time, status) = match ds.response() {
                Response::Survival { time, status } => (time.clone(), status.clone()),
                _ => unreachable!(),
            };
            let (s, w, pi) = cox_state_explicit(&time, &status, &eta);
            for i in 0..n {
                prop_assert!((st.residuals[i] - s[i]).abs() < 1e-9);
                prop_assert!((st.weights[i] - w[i]).abs() < 1e-9);
            }
            // Probabilities over each risk set sum to one.
            for k in 0..pi[0].len() {
                let total: f64 = (0..n).map(|i| pi[i][k]).sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
            // Score residuals always sum to zero for Cox.
            let sum: f64 = st.residuals.iter().sum();
            prop_assert!(sum.abs() < 1e-9);
        }
    }
}
