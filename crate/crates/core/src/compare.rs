//! Comparator selection methods: univariate testing and sample splitting,
//! both with Benjamini-Hochberg correction.

use crate::data::{Dataset, Response};
use crate::erf::normal_cdf;
use crate::error::{Error, Result};
use crate::family::FamilyKind;
use crate::glm_fit::{fit_small, SmallFit, SmallResponse};
use crate::path::{fit_path, make_lambda_grid, FitControls, LambdaGrid};
use crate::penalty::PenaltySpec;
use crate::select::stratified_assignment;

/// Stage-one selections are capped so the stage-two model stays well below
/// the sample size of the held-out half.
pub const DEFAULT_SCREEN_LIMIT: usize = 20;

/// Wald test outcome for one feature.
#[derive(Debug, Clone)]
pub struct TestResult {
    pub feature: usize,
    pub estimate: f64,
    /// Wald z statistic; 0 when the fit did not converge.
    pub statistic: f64,
    pub p_value: f64,
    pub discovery: bool,
    pub converged: bool,
}

/// Benjamini-Hochberg step-up procedure at level q. Non-finite p-values are
/// treated as 1.
pub fn benjamini_hochberg(p_values: &[f64], q: f64) -> Vec<bool> {
    let m = p_values.len();
    if m == 0 {
        return Vec::new();
    }
    let clean: Vec<f64> = p_values
        .iter()
        .map(|&p| if p.is_finite() { p } else { 1.0 })
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| clean[a].partial_cmp(&clean[b]).unwrap().then(a.cmp(&b)));
    let mut cutoff = 0;
    for (rank, &ix) in order.iter().enumerate() {
        if clean[ix] <= (rank + 1) as f64 * q / m as f64 {
            cutoff = rank + 1;
        }
    }
    let mut out = vec![false; m];
    for &ix in &order[..cutoff] {
        out[ix] = true;
    }
    out
}

fn failed_test(feature: usize) -> TestResult {
    TestResult {
        feature,
        estimate: 0.0,
        statistic: 0.0,
        p_value: 1.0,
        discovery: false,
        converged: false,
    }
}

fn wald_test(feature: usize, fit: &SmallFit, coef_index: usize) -> TestResult {
    let cov = match (&fit.covariance, fit.converged) {
        (Some(c), true) => c,
        _ => return failed_test(feature),
    };
    let var = cov[coef_index][coef_index];
    if !(var > 0.0) || !var.is_finite() {
        return failed_test(feature);
    }
    let estimate = fit.beta[coef_index];
    let z = estimate / var.sqrt();
    if !z.is_finite() {
        return failed_test(feature);
    }
    TestResult {
        feature,
        estimate,
        statistic: z,
        p_value: 2.0 * normal_cdf(-z.abs()),
        discovery: false,
        converged: true,
    }
}

/// Base design shared by all tests: an intercept column (except Cox) plus
/// every usable unpenalized feature.
fn base_design(dataset: &Dataset) -> Vec<Vec<f64>> {
    let mut design = Vec::new();
    if FamilyKind::of(dataset.response()).has_intercept() {
        design.push(vec![1.0; dataset.n()]);
    }
    for j in 0..dataset.p() {
        if !dataset.is_penalized(j) && !dataset.is_constant(j) {
            design.push(dataset.column(j).to_vec());
        }
    }
    design
}

fn small_response(dataset: &Dataset) -> SmallResponse<'_> {
    match dataset.response() {
        Response::Continuous(y) => SmallResponse::Gaussian(y),
        Response::Binary(y) => SmallResponse::Binomial(y),
        Response::Survival { time, status } => SmallResponse::Cox { time, status },
    }
}

/// Fit one unpenalized model per penalized feature and correct the Wald
/// p-values with Benjamini-Hochberg at level q.
pub fn univariate_screen(dataset: &Dataset, q: f64) -> Result<Vec<TestResult>> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::data("the false discovery level must lie in [0, 1]"));
    }
    let base = base_design(dataset);
    let resp = small_response(dataset);
    let mut results = Vec::new();
    for j in dataset.usable_penalized() {
        let mut design = base.clone();
        design.push(dataset.column(j).to_vec());
        let fit = fit_small(&design, &resp, 25);
        results.push(wald_test(j, &fit, design.len() - 1));
    }
    let p_values: Vec<f64> = results.iter().map(|t| t.p_value).collect();
    let flags = benjamini_hochberg(&p_values, q);
    for (t, d) in results.iter_mut().zip(flags) {
        t.discovery = d;
    }
    Ok(results)
}

/// Outcome of the two-stage sample splitting procedure.
#[derive(Debug, Clone)]
pub struct SampleSplitResult {
    /// Features entering the stage-one lasso path, in order of entry.
    pub screened: Vec<usize>,
    /// One Wald test per screened feature, from the held-out half.
    pub tests: Vec<TestResult>,
    /// Internal rows used for stage one.
    pub screen_rows: Vec<usize>,
}

impl SampleSplitResult {
    pub fn discoveries(&self) -> impl Iterator<Item = usize> + '_ {
        self.tests
            .iter()
            .filter(|t| t.discovery)
            .map(|t| t.feature)
    }
}

/// Split the data in half (stratified), screen features with a lasso path on
/// one half, then test the screened features with an unpenalized fit and
/// Benjamini-Hochberg correction on the other half.
pub fn sample_split(
    dataset: &Dataset,
    q: f64,
    screen_limit: usize,
    seed: u64,
    controls: &FitControls,
) -> Result<SampleSplitResult> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::data("the false discovery level must lie in [0, 1]"));
    }
    if screen_limit == 0 {
        return Err(Error::data("the screening limit must be positive"));
    }
    let halves = stratified_assignment(dataset, 2, seed)?;
    let screen_rows: Vec<usize> = (0..dataset.n()).filter(|&i| halves[i] == 0).collect();
    let test_rows: Vec<usize> = (0..dataset.n()).filter(|&i| halves[i] == 1).collect();
    let screen_ds = dataset.subset_rows(&screen_rows)?;
    let test_ds = dataset.subset_rows(&test_rows)?;

    let grid = make_lambda_grid(
        &screen_ds,
        LambdaGrid::DEFAULT_COUNT,
        LambdaGrid::default_ratio(screen_ds.n(), screen_ds.p()),
    )?;
    let path = fit_path(&screen_ds, &PenaltySpec::lasso(0.0), &grid, controls)?;
    let mut screened: Vec<usize> = Vec::new();
    'steps: for step in &path.steps {
        for &j in &step.active_set {
            if !screened.contains(&j) {
                screened.push(j);
                if screened.len() == screen_limit {
                    break 'steps;
                }
            }
        }
    }

    if screened.is_empty() {
        return Ok(SampleSplitResult {
            screened,
            tests: Vec::new(),
            screen_rows,
        });
    }

    let base = base_design(&test_ds);
    let offset = base.len();
    let mut tests: Vec<TestResult>;
    if offset + screened.len() >= test_ds.n() {
        // Too many parameters for the held-out half: every test is
        // uninformative.
        tests = screened.iter().map(|&j| failed_test(j)).collect();
    } else {
        let mut design = base;
        for &j in &screened {
            design.push(test_ds.column(j).to_vec());
        }
        let resp = small_response(&test_ds);
        let fit = fit_small(&design, &resp, 25);
        tests = screened
            .iter()
            .enumerate()
            .map(|(k, &j)| wald_test(j, &fit, offset + k))
            .collect();
    }
    let p_values: Vec<f64> = tests.iter().map(|t| t.p_value).collect();
    let flags = benjamini_hochberg(&p_values, q);
    for (t, d) in tests.iter_mut().zip(flags) {
        t.discovery = d;
    }
    Ok(SampleSplitResult {
        screened,
        tests,
        screen_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bh_step_up_reference_case() {
        let p = vec![0.01, 0.02, 0.03, 0.5, 0.9];
        let flags = benjamini_hochberg(&p, 0.1);
        assert_eq!(flags, vec![true, true, true, false, false]);
    }

    #[test]
    fn bh_edge_cases() {
        assert!(benjamini_hochberg(&[], 0.1).is_empty());
        let none = benjamini_hochberg(&[0.5, 0.8, 0.9], 0.1);
        assert!(none.iter().all(|&d| !d));
        let all = benjamini_hochberg(&[0.001, 0.002], 0.1);
        assert!(all.iter().all(|&d| d));
        // The step-up property can rescue larger p-values.
        let rescued = benjamini_hochberg(&[0.04, 0.04, 0.04, 0.04], 0.1);
        assert!(rescued.iter().all(|&d| d));
        let nan = benjamini_hochberg(&[f64::NAN, 0.001], 0.1);
        assert_eq!(nan, vec![false, true]);
    }

    fn gaussian_with_signal(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 1.5 * cols[0][i] + rng.gen_range(-0.5..0.5))
            .collect();
        Dataset::from_columns(cols, Response::Continuous(y), vec![true; p], None).unwrap()
    }

    #[test]
    fn univariate_screen_finds_the_signal() {
        let ds = gaussian_with_signal(150, 8, 12);
        let results = univariate_screen(&ds, 0.1).unwrap();
        assert_eq!(results.len(), 8);
        let first = &results[0];
        assert_eq!(first.feature, 0);
        assert!(first.converged);
        assert!(first.discovery);
        assert!(first.statistic > 5.0);
        assert!(first.p_value < 1e-8);
    }

    #[test]
    fn univariate_statistic_matches_hand_ols() {
        // Small fixed case checked against the closed-form simple-regression
        // Wald statistic (normal reference).
        let x = vec![-2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        let y = vec![0.2, 0.8, 1.1, 2.3, 2.9, 3.1];
        let ds = Dataset::from_columns(
            vec![x.clone()],
            Response::Continuous(y.clone()),
            vec![true],
            None,
        )
        .unwrap();
        let results = univariate_screen(&ds, 0.1).unwrap();
        let xs = ds.column(0);
        let n = 6.0;
        let ybar = y.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|v| v * v).sum();
        let sxy: f64 = xs.iter().zip(&y).map(|(&v, &w)| v * (w - ybar)).sum();
        let slope = sxy / sxx;
        let rss: f64 = xs
            .iter()
            .zip(&y)
            .map(|(&v, &w)| {
                let e = w - ybar - slope * v;
                e * e
            })
            .sum();
        let se = (rss / (n - 2.0) / sxx).sqrt();
        assert_abs_diff_eq!(results[0].statistic, slope / se, epsilon = 1e-8);
        assert_abs_diff_eq!(
            results[0].p_value,
            2.0 * normal_cdf(-(slope / se).abs()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn univariate_screen_controls_for_unpenalized_features() {
        // x1 is a confounder included unpenalized; x2 duplicates it and
        // should lose its apparent effect once x1 is in the base design.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200;
        let confounder: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let near_copy: Vec<f64> = confounder
            .iter()
            .map(|&v| v + rng.gen_range(-0.05..0.05))
            .collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 2.0 * confounder[i] + rng.gen_range(-0.3..0.3))
            .collect();
        let ds = Dataset::from_columns(
            vec![confounder, near_copy, noise],
            Response::Continuous(y),
            vec![false, true, true],
            None,
        )
        .unwrap();
        let results = univariate_screen(&ds, 0.1).unwrap();
        assert_eq!(results.len(), 2);
        // Conditional on the confounder, the near-copy is null.
        assert!(results[0].p_value > 1e-4);
        assert!(!results[0].discovery);
    }

    #[test]
    fn univariate_screen_flags_separated_fits() {
        let n = 30;
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 15.0).collect();
        let y: Vec<u8> = (0..n).map(|i| u8::from(i >= 15)).collect();
        let ds = Dataset::from_columns(vec![x], Response::Binary(y), vec![true], None).unwrap();
        let results = univariate_screen(&ds, 0.1).unwrap();
        assert!(!results[0].converged);
        assert_eq!(results[0].p_value, 1.0);
        assert!(!results[0].discovery);
    }

    #[test]
    fn sample_split_is_deterministic_and_finds_signal() {
        let ds = gaussian_with_signal(240, 12, 77);
        let controls = FitControls::default();
        let a = sample_split(&ds, 0.1, DEFAULT_SCREEN_LIMIT, 5, &controls).unwrap();
        let b = sample_split(&ds, 0.1, DEFAULT_SCREEN_LIMIT, 5, &controls).unwrap();
        assert_eq!(a.screened, b.screened);
        assert_eq!(a.screen_rows, b.screen_rows);
        assert!(a.screened.len() <= DEFAULT_SCREEN_LIMIT);
        // The strong feature enters first and survives the held-out test.
        assert_eq!(a.screened[0], 0);
        assert!(a.discoveries().any(|j| j == 0));
        // Exactly half the rows go to stage one.
        assert_eq!(a.screen_rows.len(), 120);
    }

    #[test]
    fn sample_split_with_cox_response() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 120;
        let cols: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let time: Vec<f64> = (0..n)
            .map(|i| {
                let u: f64 = rng.gen();
                (-(1.0 - u).ln() / (1.5 * cols[0][i]).exp()).max(1e-9)
            })
            .collect();
        let status: Vec<u8> = (0..n).map(|i| u8::from(i % 4 != 0)).collect();
        let ds = Dataset::from_columns(
            cols,
            Response::Survival { time, status },
            vec![true; 6],
            None,
        )
        .unwrap();
        let res = sample_split(&ds, 0.1, DEFAULT_SCREEN_LIMIT, 11, &FitControls::default())
            .unwrap();
        assert!(!res.screened.is_empty());
        assert!(res.tests.iter().all(|t| (0.0..=1.0).contains(&t.p_value)));
    }
}
