//! Seeded Monte-Carlo scenarios: feature/response generators, replication
//! runner, and per-lambda aggregation of estimated versus observed false
//! discovery rates.
//!
//! Reproducibility contract: replication r draws from ChaCha stream r + 1 of
//! the scenario seed; stream 0 is reserved for the reference dataset that
//! fixes the lambda grid shared by every replication. Aggregation folds
//! replications in index order, so thread count never changes results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compare::{sample_split, univariate_screen, DEFAULT_SCREEN_LIMIT};
use crate::data::{Dataset, Response};
use crate::error::{Error, Result};
use crate::family::{sigmoid, FamilyKind};
use crate::mfdr::mfdr_path;
use crate::path::{fit_path, make_lambda_grid, FitControls, LambdaGrid};
use crate::penalty::PenaltySpec;
use crate::select::select_by_mfdr;

/// Correlation structure of the generated feature columns. Every structure
/// keeps each marginal distribution standard normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureCorrelation {
    /// All columns independent.
    Independent,
    /// One chain over all columns: cor(x_j, x_k) = rho^|j-k|.
    Autoregressive { rho: f64 },
    /// The first `independent` columns are independent; the remaining
    /// columns form their own autoregressive chain, uncoupled from the
    /// leading block.
    IndependentThenAr { independent: usize, rho: f64 },
    /// Layout [causal | correlated blocks | noise]: `causal` independent
    /// columns, then `per_block` proxies per causal column with correlation
    /// `rho` to their parent, then an autoregressive noise chain with
    /// parameter `noise_rho`.
    CausalBlocks {
        causal: usize,
        per_block: usize,
        rho: f64,
        noise_rho: f64,
    },
}

impl FeatureCorrelation {
    fn validate(&self, p: usize) -> Result<()> {
        let check_rho = |rho: f64| {
            if !(rho.is_finite() && rho.abs() < 1.0) {
                Err(Error::data(format!(
                    "correlation parameter must lie in (-1, 1), got {rho}"
                )))
            } else {
                Ok(())
            }
        };
        match *self {
            FeatureCorrelation::Independent => Ok(()),
            FeatureCorrelation::Autoregressive { rho } => check_rho(rho),
            FeatureCorrelation::IndependentThenAr { independent, rho } => {
                check_rho(rho)?;
                if independent > p {
                    return Err(Error::data(
                        "independent block larger than the number of features",
                    ));
                }
                Ok(())
            }
            FeatureCorrelation::CausalBlocks {
                causal,
                per_block,
                rho,
                noise_rho,
            } => {
                check_rho(rho)?;
                check_rho(noise_rho)?;
                if causal * (1 + per_block) > p {
                    return Err(Error::data(
                        "causal and correlated blocks exceed the number of features",
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Role of a feature in the generating model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariableClass {
    /// Directly drives the response.
    Causal,
    /// Null itself but correlated with a causal feature.
    Correlated,
    /// Independent of the response.
    Noise,
}

/// One simulation design: data dimensions, generating coefficients, feature
/// correlation, and the replication/seed bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub family: FamilyKind,
    pub beta: Vec<f64>,
    pub correlation: FeatureCorrelation,
    /// Gaussian response noise standard deviation.
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    /// Censoring-rate coefficients for survival scenarios; absent means no
    /// censoring at all.
    #[serde(default)]
    pub censoring_beta: Option<Vec<f64>>,
    pub replications: usize,
    pub seed: u64,
}

fn default_noise_sd() -> f64 {
    1.0
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::data("a scenario needs at least two observations"));
        }
        if self.p == 0 || self.beta.len() != self.p {
            return Err(Error::data(format!(
                "coefficient vector length {} does not match p = {}",
                self.beta.len(),
                self.p
            )));
        }
        if self.replications == 0 {
            return Err(Error::data("a scenario needs at least one replication"));
        }
        if !self.beta.iter().all(|b| b.is_finite()) {
            return Err(Error::data("generating coefficients must be finite"));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd > 0.0) {
            return Err(Error::data("noise standard deviation must be positive"));
        }
        if let Some(gamma) = &self.censoring_beta {
            if self.family != FamilyKind::Cox {
                return Err(Error::data(
                    "censoring coefficients only apply to survival scenarios",
                ));
            }
            if gamma.len() != self.p {
                return Err(Error::data(format!(
                    "censoring coefficient length {} does not match p = {}",
                    gamma.len(),
                    self.p
                )));
            }
            if !gamma.iter().all(|g| g.is_finite()) {
                return Err(Error::data("censoring coefficients must be finite"));
            }
        }
        self.correlation.validate(self.p)
    }

    /// Class of every feature. Correlated proxies exist only under the
    /// causal-blocks structure; elsewhere a feature is causal exactly when
    /// its generating coefficient is nonzero.
    pub fn classes(&self) -> Vec<VariableClass> {
        if let FeatureCorrelation::CausalBlocks {
            causal, per_block, ..
        } = self.correlation
        {
            let proxies = causal * per_block;
            (0..self.p)
                .map(|j| {
                    if j < causal {
                        VariableClass::Causal
                    } else if j < causal + proxies {
                        VariableClass::Correlated
                    } else {
                        VariableClass::Noise
                    }
                })
                .collect()
        } else {
            self.beta
                .iter()
                .map(|&b| {
                    if b != 0.0 {
                        VariableClass::Causal
                    } else {
                        VariableClass::Noise
                    }
                })
                .collect()
        }
    }

    /// Linear design with four causal features at 10/sqrt(n), so selection
    /// difficulty is constant in n. `correlated_noise` puts an
    /// autoregressive chain (rho = 0.8) over the noise features.
    pub fn linear_accuracy(n: usize, correlated_noise: bool, replications: usize, seed: u64) -> Scenario {
        let p = 100;
        let mut beta = vec![0.0; p];
        let signal = 10.0 / (n as f64).sqrt();
        for b in beta.iter_mut().take(4) {
            *b = signal;
        }
        Scenario {
            name: if correlated_noise {
                "linear-correlated".to_string()
            } else {
                "linear-independent".to_string()
            },
            n,
            p,
            family: FamilyKind::Gaussian,
            beta,
            correlation: if correlated_noise {
                FeatureCorrelation::IndependentThenAr {
                    independent: 4,
                    rho: 0.8,
                }
            } else {
                FeatureCorrelation::Independent
            },
            noise_sd: 1.0,
            censoring_beta: None,
            replications,
            seed,
        }
    }

    /// Survival design with four causal features and exponential censoring
    /// at an expected 50% rate. With `feature_linked_censoring` the
    /// censoring rate depends on four otherwise-null features; without it
    /// censoring is independent of all features.
    pub fn cox_censoring(
        feature_linked_censoring: bool,
        replications: usize,
        seed: u64,
    ) -> Scenario {
        let n = 500;
        let p = 100;
        let mut beta = vec![0.0; p];
        for b in beta.iter_mut().take(4) {
            *b = 0.45;
        }
        let mut gamma = vec![0.0; p];
        if feature_linked_censoring {
            gamma[4] = 0.45;
            gamma[5] = -0.45;
            gamma[6] = 0.45;
            gamma[7] = -0.45;
        }
        Scenario {
            name: if feature_linked_censoring {
                "cox-censoring-linked".to_string()
            } else {
                "cox-censoring-independent".to_string()
            },
            n,
            p,
            family: FamilyKind::Cox,
            beta,
            correlation: FeatureCorrelation::Independent,
            noise_sd: 1.0,
            censoring_beta: Some(gamma),
            replications,
            seed,
        }
    }

    /// Causal/correlated/noise comparison design: `causal` features with
    /// coefficient `b`, `per_block` proxies each at rho = 0.5, and `noise`
    /// autoregressive (rho = 0.8) noise features.
    pub fn blocks_comparison(
        family: FamilyKind,
        b: f64,
        n: usize,
        causal: usize,
        per_block: usize,
        noise: usize,
        replications: usize,
        seed: u64,
    ) -> Scenario {
        let p = causal * (1 + per_block) + noise;
        let mut beta = vec![0.0; p];
        for coef in beta.iter_mut().take(causal) {
            *coef = b;
        }
        Scenario {
            name: format!("blocks-{family}"),
            n,
            p,
            family,
            beta,
            correlation: FeatureCorrelation::CausalBlocks {
                causal,
                per_block,
                rho: 0.5,
                noise_rho: 0.8,
            },
            noise_sd: 1.0,
            censoring_beta: None,
            replications,
            seed,
        }
    }
}

fn normal_column(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn ar_extend(previous: &[f64], rho: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let fresh = (1.0 - rho * rho).sqrt();
    previous
        .iter()
        .map(|&v| rho * v + fresh * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Generate raw feature columns (n rows each) under the given correlation
/// structure. Columns are produced left to right, so draws are reproducible.
pub fn generate_features(
    n: usize,
    p: usize,
    correlation: &FeatureCorrelation,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(p);
    match *correlation {
        FeatureCorrelation::Independent => {
            for _ in 0..p {
                columns.push(normal_column(n, rng));
            }
        }
        FeatureCorrelation::Autoregressive { rho } => {
            for j in 0..p {
                if j == 0 {
                    columns.push(normal_column(n, rng));
                } else {
                    columns.push(ar_extend(&columns[j - 1], rho, rng));
                }
            }
        }
        FeatureCorrelation::IndependentThenAr { independent, rho } => {
            for j in 0..p {
                if j <= independent {
                    columns.push(normal_column(n, rng));
                } else {
                    columns.push(ar_extend(&columns[j - 1], rho, rng));
                }
            }
        }
        FeatureCorrelation::CausalBlocks {
            causal,
            per_block,
            rho,
            noise_rho,
        } => {
            let fresh = (1.0 - rho * rho).sqrt();
            for _ in 0..causal {
                columns.push(normal_column(n, rng));
            }
            for parent in 0..causal {
                for _ in 0..per_block {
                    let col: Vec<f64> = (0..n)
                        .map(|i| {
                            rho * columns[parent][i]
                                + fresh * rng.sample::<f64, _>(StandardNormal)
                        })
                        .collect();
                    columns.push(col);
                }
            }
            let first_noise = causal * (1 + per_block);
            for j in first_noise..p {
                if j == first_noise {
                    columns.push(normal_column(n, rng));
                } else {
                    columns.push(ar_extend(&columns[j - 1], noise_rho, rng));
                }
            }
        }
    }
    columns
}

fn linear_predictor(columns: &[Vec<f64>], coefficients: &[f64], i: usize) -> f64 {
    columns
        .iter()
        .zip(coefficients)
        .map(|(col, &b)| col[i] * b)
        .sum()
}

fn standard_exponential(rate: f64, rng: &mut ChaCha8Rng) -> f64 {
    // Inverse-CDF draw; 1 - U stays in (0, 1] so the log is finite.
    let u: f64 = rng.gen();
    (-(1.0 - u).ln() / rate).max(1e-12)
}

/// Generate a response for raw feature columns under the scenario's
/// generating model.
pub fn generate_response(
    columns: &[Vec<f64>],
    scenario: &Scenario,
    rng: &mut ChaCha8Rng,
) -> Response {
    let n = scenario.n;
    match scenario.family {
        FamilyKind::Gaussian => Response::Continuous(
            (0..n)
                .map(|i| {
                    linear_predictor(columns, &scenario.beta, i)
                        + scenario.noise_sd * rng.sample::<f64, _>(StandardNormal)
                })
                .collect(),
        ),
        FamilyKind::Binomial => Response::Binary(
            (0..n)
                .map(|i| {
                    let pi = sigmoid(linear_predictor(columns, &scenario.beta, i));
                    u8::from(rng.gen::<f64>() < pi)
                })
                .collect(),
        ),
        FamilyKind::Cox => {
            let mut time = Vec::with_capacity(n);
            let mut status = Vec::with_capacity(n);
            for i in 0..n {
                let failure = standard_exponential(
                    linear_predictor(columns, &scenario.beta, i).exp(),
                    rng,
                );
                match &scenario.censoring_beta {
                    Some(gamma) => {
                        let censor =
                            standard_exponential(linear_predictor(columns, gamma, i).exp(), rng);
                        time.push(failure.min(censor));
                        status.push(u8::from(failure <= censor));
                    }
                    None => {
                        time.push(failure);
                        status.push(1);
                    }
                }
            }
            Response::Survival { time, status }
        }
    }
}

/// Solver and method settings shared by every replication of a run.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    /// Penalty template; its lambda is replaced by each grid value.
    pub penalty: PenaltySpec,
    pub grid_size: usize,
    /// Smallest-to-largest lambda ratio; default depends on the n/p shape.
    pub lambda_ratio: Option<f64>,
    pub controls: FitControls,
    /// Level for the smallest-lambda selection rule and for the comparator
    /// methods' false discovery control.
    pub mfdr_alpha: f64,
    /// Also run univariate testing and sample splitting each replication.
    pub run_comparators: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            penalty: PenaltySpec::lasso(0.0),
            grid_size: LambdaGrid::DEFAULT_COUNT,
            lambda_ratio: None,
            controls: FitControls::default(),
            mfdr_alpha: 0.1,
            run_comparators: false,
        }
    }
}

/// Selection counts by class for one method in one replication.
#[derive(Debug, Clone, Copy, Default)]
struct ClassCounts {
    causal: u32,
    correlated: u32,
    noise: u32,
}

impl ClassCounts {
    fn add(&mut self, class: VariableClass) {
        match class {
            VariableClass::Causal => self.causal += 1,
            VariableClass::Correlated => self.correlated += 1,
            VariableClass::Noise => self.noise += 1,
        }
    }

    fn from_selection<I: IntoIterator<Item = usize>>(
        selected: I,
        classes: &[VariableClass],
    ) -> ClassCounts {
        let mut counts = ClassCounts::default();
        for j in selected {
            counts.add(classes[j]);
        }
        counts
    }

    fn total(&self) -> u32 {
        self.causal + self.correlated + self.noise
    }
}

#[derive(Debug, Clone)]
struct LambdaRepRow {
    counts: ClassCounts,
    expected_false: f64,
    mfdr_estimate: Option<f64>,
}

#[derive(Debug, Clone)]
struct Replication {
    per_lambda: Vec<LambdaRepRow>,
    rule: Option<ClassCounts>,
    univariate: Option<ClassCounts>,
    split: Option<ClassCounts>,
}

/// Aggregates over replications at one lambda.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaSummary {
    pub lambda: f64,
    /// Replications that fitted this lambda.
    pub replications: usize,
    pub mean_selected: f64,
    pub mean_causal: f64,
    pub mean_correlated: f64,
    pub mean_noise: f64,
    pub mean_expected_false: f64,
    /// Mean estimated mFDR over the replications where it was defined.
    pub mean_mfdr_estimate: Option<f64>,
    pub mfdr_defined: usize,
    /// Observed noise share of selections: mean noise count over mean
    /// selected count.
    pub empirical_mfdr: Option<f64>,
    /// Delta-method Monte-Carlo standard error of the observed share.
    pub empirical_se: Option<f64>,
}

/// Aggregates over replications for one selection method.
#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub mean_selected: f64,
    pub mean_causal: f64,
    pub mean_correlated: f64,
    pub mean_noise: f64,
    /// Observed noise share of selections (ratio of means).
    pub observed_fdr: Option<f64>,
    pub observed_fdr_se: Option<f64>,
    /// Replications where the method selected nothing.
    pub empty_replications: usize,
}

impl MethodSummary {
    /// Mean causal selections per mean noise selection; absent when no
    /// noise feature was ever selected.
    pub fn causal_noise_ratio(&self) -> Option<f64> {
        if self.mean_noise > 0.0 {
            Some(self.mean_causal / self.mean_noise)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Default)]
struct RatioAccumulator {
    reps: f64,
    sum_causal: f64,
    sum_correlated: f64,
    sum_noise: f64,
    sum_noise_sq: f64,
    sum_selected: f64,
    sum_selected_sq: f64,
    sum_cross: f64,
    empty: usize,
}

impl RatioAccumulator {
    fn push(&mut self, counts: &ClassCounts) {
        let noise = f64::from(counts.noise);
        let selected = f64::from(counts.total());
        self.reps += 1.0;
        self.sum_causal += f64::from(counts.causal);
        self.sum_correlated += f64::from(counts.correlated);
        self.sum_noise += noise;
        self.sum_noise_sq += noise * noise;
        self.sum_selected += selected;
        self.sum_selected_sq += selected * selected;
        self.sum_cross += noise * selected;
        if counts.total() == 0 {
            self.empty += 1;
        }
    }

    fn mean_selected(&self) -> f64 {
        self.sum_selected / self.reps
    }

    /// Ratio of means with its delta-method standard error.
    fn ratio(&self) -> (Option<f64>, Option<f64>) {
        if self.sum_selected <= 0.0 {
            return (None, None);
        }
        let r = self.reps;
        let mean_noise = self.sum_noise / r;
        let mean_sel = self.sum_selected / r;
        let ratio = mean_noise / mean_sel;
        if r < 2.0 {
            return (Some(ratio), None);
        }
        let var_noise = (self.sum_noise_sq - r * mean_noise * mean_noise) / (r - 1.0);
        let var_sel = (self.sum_selected_sq - r * mean_sel * mean_sel) / (r - 1.0);
        let cov = (self.sum_cross - r * mean_noise * mean_sel) / (r - 1.0);
        let var_ratio =
            (var_noise - 2.0 * ratio * cov + ratio * ratio * var_sel) / (r * mean_sel * mean_sel);
        (Some(ratio), Some(var_ratio.max(0.0).sqrt()))
    }

    fn method_summary(&self) -> MethodSummary {
        let (observed_fdr, observed_fdr_se) = self.ratio();
        MethodSummary {
            mean_selected: self.mean_selected(),
            mean_causal: self.sum_causal / self.reps,
            mean_correlated: self.sum_correlated / self.reps,
            mean_noise: self.sum_noise / self.reps,
            observed_fdr,
            observed_fdr_se,
            empty_replications: self.empty,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct LambdaAccumulator {
    counts: RatioAccumulator,
    sum_expected_false: f64,
    sum_mfdr: f64,
    mfdr_defined: usize,
}

/// Full result of running a scenario: per-lambda aggregates, the
/// smallest-lambda rule summary, and optional comparator summaries.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub lambdas: Vec<f64>,
    pub rows: Vec<LambdaSummary>,
    /// Selections at the smallest lambda whose estimated mFDR stays at or
    /// below the configured level.
    pub mfdr_rule: MethodSummary,
    pub univariate: Option<MethodSummary>,
    pub sample_split: Option<MethodSummary>,
    pub replications_completed: usize,
    pub solver_failures: usize,
}

impl ScenarioResult {
    /// Grid index whose observed noise share is closest to `target`, among
    /// lambdas that fitted in every completed replication and select at
    /// least one feature on average. Ties go to the larger lambda.
    pub fn lambda_at_empirical_mfdr(&self, target: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, row) in self.rows.iter().enumerate() {
            let Some(emp) = row.empirical_mfdr else {
                continue;
            };
            if row.mean_selected < 1.0 {
                continue;
            }
            let gap = (emp - target).abs();
            if best.map_or(true, |(_, g)| gap < g) {
                best = Some((k, gap));
            }
        }
        best.map(|(k, _)| k)
    }
}

fn run_replication(
    scenario: &Scenario,
    config: &SimulationConfig,
    grid: &LambdaGrid,
    classes: &[VariableClass],
    rep: u64,
) -> Result<Replication> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(rep + 1);
    let columns = generate_features(scenario.n, scenario.p, &scenario.correlation, &mut rng);
    let response = generate_response(&columns, scenario, &mut rng);
    let split_seed: u64 = rng.gen();
    let dataset = Dataset::from_columns(columns, response, vec![true; scenario.p], None)?;

    let path = fit_path(&dataset, &config.penalty, grid, &config.controls)?;
    let table = mfdr_path(&path)?;
    let per_lambda = path
        .steps
        .iter()
        .zip(&table.rows)
        .map(|(step, row)| LambdaRepRow {
            counts: ClassCounts::from_selection(step.active_set.iter().copied(), classes),
            expected_false: row.expected_false_discoveries,
            mfdr_estimate: row.mfdr,
        })
        .collect();

    let rule = select_by_mfdr(&table, config.mfdr_alpha)
        .map(|k| ClassCounts::from_selection(path.steps[k].active_set.iter().copied(), classes))
        .or(Some(ClassCounts::default()));

    let (univariate, split) = if config.run_comparators {
        let tests = univariate_screen(&dataset, config.mfdr_alpha)?;
        let uni = ClassCounts::from_selection(
            tests.iter().filter(|t| t.discovery).map(|t| t.feature),
            classes,
        );
        let split_result = sample_split(
            &dataset,
            config.mfdr_alpha,
            DEFAULT_SCREEN_LIMIT,
            split_seed,
            &config.controls,
        )?;
        let sp = ClassCounts::from_selection(split_result.discoveries(), classes);
        (Some(uni), Some(sp))
    } else {
        (None, None)
    };

    Ok(Replication {
        per_lambda,
        rule,
        univariate,
        split,
    })
}

/// Run every replication of a scenario and aggregate. Failed replications
/// are counted and excluded; an error is returned only if no replication
/// completes.
pub fn run_scenario(scenario: &Scenario, config: &SimulationConfig) -> Result<ScenarioResult> {
    scenario.validate()?;
    if !(0.0..=1.0).contains(&config.mfdr_alpha) {
        return Err(Error::data("the mFDR level must lie in [0, 1]"));
    }

    let mut grid_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    grid_rng.set_stream(0);
    let reference_cols =
        generate_features(scenario.n, scenario.p, &scenario.correlation, &mut grid_rng);
    let reference_resp = generate_response(&reference_cols, scenario, &mut grid_rng);
    let reference =
        Dataset::from_columns(reference_cols, reference_resp, vec![true; scenario.p], None)?;
    let ratio = config
        .lambda_ratio
        .unwrap_or_else(|| LambdaGrid::default_ratio(scenario.n, scenario.p));
    let grid = make_lambda_grid(&reference, config.grid_size, ratio)?;

    let classes = scenario.classes();
    let outcomes: Vec<Result<Replication>> = (0..scenario.replications as u64)
        .into_par_iter()
        .map(|rep| run_replication(scenario, config, &grid, &classes, rep))
        .collect();

    let mut lambda_acc: Vec<LambdaAccumulator> =
        vec![LambdaAccumulator::default(); grid.len()];
    let mut rule_acc = RatioAccumulator::default();
    let mut uni_acc = RatioAccumulator::default();
    let mut split_acc = RatioAccumulator::default();
    let mut completed = 0usize;
    let mut failures = 0usize;
    for outcome in outcomes {
        let rep = match outcome {
            Ok(rep) => rep,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        completed += 1;
        for (acc, row) in lambda_acc.iter_mut().zip(&rep.per_lambda) {
            acc.counts.push(&row.counts);
            acc.sum_expected_false += row.expected_false;
            if let Some(m) = row.mfdr_estimate {
                acc.sum_mfdr += m;
                acc.mfdr_defined += 1;
            }
        }
        if let Some(counts) = &rep.rule {
            rule_acc.push(counts);
        }
        if let Some(counts) = &rep.univariate {
            uni_acc.push(counts);
        }
        if let Some(counts) = &rep.split {
            split_acc.push(counts);
        }
    }
    if completed == 0 {
        return Err(Error::numerical(format!(
            "all {} replications of scenario '{}' failed",
            scenario.replications, scenario.name
        )));
    }

    let rows: Vec<LambdaSummary> = grid
        .values()
        .iter()
        .zip(&lambda_acc)
        .map(|(&lambda, acc)| {
            let (empirical_mfdr, empirical_se) = acc.counts.ratio();
            let reps = acc.counts.reps;
            LambdaSummary {
                lambda,
                replications: reps as usize,
                mean_selected: if reps > 0.0 { acc.counts.mean_selected() } else { 0.0 },
                mean_causal: if reps > 0.0 { acc.counts.sum_causal / reps } else { 0.0 },
                mean_correlated: if reps > 0.0 {
                    acc.counts.sum_correlated / reps
                } else {
                    0.0
                },
                mean_noise: if reps > 0.0 { acc.counts.sum_noise / reps } else { 0.0 },
                mean_expected_false: if reps > 0.0 {
                    acc.sum_expected_false / reps
                } else {
                    0.0
                },
                mean_mfdr_estimate: if acc.mfdr_defined > 0 {
                    Some(acc.sum_mfdr / acc.mfdr_defined as f64)
                } else {
                    None
                },
                mfdr_defined: acc.mfdr_defined,
                empirical_mfdr,
                empirical_se,
            }
        })
        .collect();

    Ok(ScenarioResult {
        scenario: scenario.clone(),
        lambdas: grid.values().to_vec(),
        rows,
        mfdr_rule: rule_acc.method_summary(),
        univariate: if config.run_comparators {
            Some(uni_acc.method_summary())
        } else {
            None
        },
        sample_split: if config.run_comparators {
            Some(split_acc.method_summary())
        } else {
            None
        },
        replications_completed: completed,
        solver_failures: failures,
    })
}
