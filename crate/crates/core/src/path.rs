//! Regularization path solver.
//!
//! Coordinate descent on the quadratic approximation of the loss, refreshed
//! after every pass to a fixed point: one full sweep, active-set sweeps until
//! the coefficients settle, then another full sweep that doubles as the KKT
//! check for excluded features. A step is accepted only when the stationarity
//! residual at a freshly computed state is below `kkt_tolerance` and the
//! active set agrees with the thresholding rule applied at that state.
//!
//! Lambda values are visited in decreasing order; each solution warm-starts
//! the next.

use crate::data::{unstandardize_coefficients, Dataset, StandardizationRecord};
use crate::error::{Error, Result};
use crate::family::{family_state, FamilyKind};
use crate::penalty::{self, PenaltySpec};

/// Convergence and safety controls for the coordinate descent solver.
#[derive(Debug, Clone)]
pub struct FitControls {
    /// Largest absolute coefficient change that counts as converged.
    pub tolerance: f64,
    /// Bound the stationarity residual must meet before a step is accepted.
    pub kkt_tolerance: f64,
    /// Sweep budget per lambda; exceeding it is a hard error.
    pub max_sweeps: usize,
    /// Stop the path once more than this many penalized features are active.
    pub max_active: Option<usize>,
    /// Record the exact penalized objective after every sweep.
    pub trace_objective: bool,
}

impl Default for FitControls {
    fn default() -> Self {
        FitControls {
            tolerance: 1e-7,
            kkt_tolerance: 1e-4,
            max_sweeps: 10_000,
            max_active: None,
            trace_objective: false,
        }
    }
}

/// Decreasing sequence of penalty levels.
#[derive(Debug, Clone)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub const DEFAULT_COUNT: usize = 100;

    /// Default smallest-to-largest lambda ratio: 0.001 when n exceeds p,
    /// otherwise 0.05.
    pub fn default_ratio(n: usize, p: usize) -> f64 {
        if n > p {
            1e-3
        } else {
            0.05
        }
    }

    pub fn new(mut values: Vec<f64>) -> Result<LambdaGrid> {
        if values.is_empty() {
            return Err(Error::data("lambda grid must be non-empty"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::data("lambda values must be finite and non-negative"));
        }
        values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(LambdaGrid { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[0]
    }
}

/// One solved point of the path, on the standardized scale.
#[derive(Debug, Clone)]
pub struct PathStep {
    pub lambda: f64,
    pub intercept: f64,
    pub beta: Vec<f64>,
    /// Linear predictor in internal row order.
    pub eta: Vec<f64>,
    /// Curvature x_j' W x_j at the solution, unnormalized.
    pub v_hat: Vec<f64>,
    /// Penalized features with nonzero coefficients, ascending.
    pub active_set: Vec<usize>,
    pub kkt_residual: f64,
    pub sweeps: usize,
    /// -(1/n) log-likelihood at the solution.
    pub loss: f64,
    /// Logistic probability clamp engaged at the solution.
    pub clamped: bool,
    pub objective_trace: Option<Vec<f64>>,
}

/// A fitted regularization path.
#[derive(Debug, Clone)]
pub struct PathFit {
    pub family: FamilyKind,
    pub penalty: PenaltySpec,
    pub n: usize,
    pub penalized: Vec<bool>,
    pub record: StandardizationRecord,
    pub steps: Vec<PathStep>,
    /// True when the path stopped early, either because `max_active` was
    /// exceeded or because the likelihood saturated at small lambda.
    pub truncated: bool,
}

impl PathFit {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.lambda).collect()
    }

    pub fn saturated(&self) -> bool {
        self.steps.iter().any(|s| s.clamped)
    }

    /// Raw-scale coefficients for step k: (intercept, beta).
    pub fn coefficients_raw(&self, k: usize) -> (f64, Vec<f64>) {
        let step = &self.steps[k];
        let (beta_raw, shift) = unstandardize_coefficients(&step.beta, &self.record);
        (step.intercept + shift, beta_raw)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Linear predictor magnitude (binomial) or spread (Cox) beyond which the
/// likelihood is saturated: fitted probabilities sit against their bounds and
/// relative hazards exceed e^30, so smaller lambdas have no usable solution
/// and the path stops early. Matches the divergence bound used by the
/// unpenalized fitter.
const SATURATION_ETA: f64 = 30.0;

enum Refresh {
    Ready,
    Saturated,
}

struct CdSolver<'a> {
    ds: &'a Dataset,
    family: FamilyKind,
    controls: &'a FitControls,
    n_inv: f64,
    beta: Vec<f64>,
    intercept: f64,
    eta: Vec<f64>,
    weights: Vec<f64>,
    /// Working residuals; equal to the score residuals right after a refresh.
    resid: Vec<f64>,
    /// Curvature per feature divided by n, at the last refresh.
    v: Vec<f64>,
    v0: f64,
    loss: f64,
    clamped: bool,
}

impl<'a> CdSolver<'a> {
    fn new(ds: &'a Dataset, controls: &'a FitControls) -> CdSolver<'a> {
        let n = ds.n();
        let p = ds.p();
        CdSolver {
            ds,
            family: FamilyKind::of(ds.response()),
            controls,
            n_inv: 1.0 / n as f64,
            beta: vec![0.0; p],
            intercept: 0.0,
            eta: vec![0.0; n],
            weights: vec![1.0; n],
            resid: vec![0.0; n],
            v: vec![0.0; p],
            v0: 1.0,
            loss: 0.0,
            clamped: false,
        }
    }

    /// Recompute the linear predictor exactly, refresh the family state, and
    /// cache per-coordinate curvatures. Reports saturation instead of
    /// evaluating a degenerate likelihood.
    fn refresh(&mut self) -> Result<Refresh> {
        let n = self.ds.n();
        let base = if self.family.has_intercept() {
            self.intercept
        } else {
            0.0
        };
        for e in self.eta.iter_mut() {
            *e = base;
        }
        for j in 0..self.ds.p() {
            let b = self.beta[j];
            if b != 0.0 {
                let col = self.ds.column(j);
                for (e, &x) in self.eta.iter_mut().zip(col) {
                    *e += b * x;
                }
            }
        }
        match self.family {
            FamilyKind::Gaussian => {}
            FamilyKind::Binomial => {
                if self.eta.iter().any(|e| e.abs() >= SATURATION_ETA) {
                    return Ok(Refresh::Saturated);
                }
            }
            FamilyKind::Cox => {
                let lo = self.eta.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = self.eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if hi - lo >= SATURATION_ETA {
                    return Ok(Refresh::Saturated);
                }
            }
        }
        let state = family_state(self.ds, &self.eta)?;
        self.weights = state.weights;
        self.resid = state.residuals;
        self.loss = state.loss;
        self.clamped = state.clamped;
        for j in 0..self.ds.p() {
            self.v[j] = if self.ds.is_constant(j) {
                0.0
            } else {
                let col = self.ds.column(j);
                col.iter()
                    .zip(&self.weights)
                    .map(|(&x, &w)| w * x * x)
                    .sum::<f64>()
                    * self.n_inv
            };
        }
        self.v0 = self.weights.iter().sum::<f64>() / n as f64;
        Ok(Refresh::Ready)
    }

    /// One coordinate sweep at fixed weights. Returns the largest absolute
    /// coefficient change.
    fn sweep(&mut self, spec: &PenaltySpec, active_only: bool) -> f64 {
        let mut max_delta = 0.0_f64;
        if self.family.has_intercept() && self.v0 > 0.0 {
            let grad = self.resid.iter().sum::<f64>() * self.n_inv;
            let delta = grad / self.v0;
            if delta != 0.0 {
                self.intercept += delta;
                for (r, (&w, e)) in self
                    .resid
                    .iter_mut()
                    .zip(self.weights.iter().zip(self.eta.iter_mut()))
                {
                    *r -= w * delta;
                    *e += delta;
                }
                max_delta = delta.abs();
            }
        }
        for j in 0..self.ds.p() {
            let penalized = self.ds.is_penalized(j);
            if active_only && penalized && self.beta[j] == 0.0 {
                continue;
            }
            let vj = self.v[j];
            if vj <= 0.0 {
                continue;
            }
            let col = self.ds.column(j);
            let u = dot(col, &self.resid) * self.n_inv;
            let z = u + vj * self.beta[j];
            let new = if penalized {
                penalty::threshold(z, vj, spec)
            } else {
                z / vj
            };
            let delta = new - self.beta[j];
            if delta != 0.0 {
                self.beta[j] = new;
                for i in 0..col.len() {
                    self.resid[i] -= self.weights[i] * col[i] * delta;
                    self.eta[i] += col[i] * delta;
                }
                max_delta = max_delta.max(delta.abs());
            }
        }
        max_delta
    }

    /// Stationarity residual and active-set consistency at the current
    /// (freshly refreshed) state.
    fn certify(&self, spec: &PenaltySpec) -> (f64, bool) {
        let p = self.ds.p();
        let mut u_over_n = vec![0.0; p];
        for (j, u) in u_over_n.iter_mut().enumerate() {
            *u = dot(self.ds.column(j), &self.resid) * self.n_inv;
        }
        let mut kkt =
            penalty::kkt_residual(&u_over_n, &self.beta, &self.v, self.ds.penalized(), spec);
        if self.family.has_intercept() {
            kkt = kkt.max((self.resid.iter().sum::<f64>() * self.n_inv).abs());
        }
        let mut consistent = true;
        for j in 0..p {
            if !self.ds.is_penalized(j) || self.v[j] <= 0.0 {
                continue;
            }
            let z = u_over_n[j] + self.v[j] * self.beta[j];
            let active = penalty::threshold(z, self.v[j], spec) != 0.0;
            if active != (self.beta[j] != 0.0) {
                consistent = false;
                break;
            }
        }
        (kkt, consistent)
    }

    /// Exact penalized objective at the current coefficients.
    fn objective(&self, spec: &PenaltySpec) -> f64 {
        let state = family_state(self.ds, &self.eta).expect("state was valid during the sweep");
        let mut pen = 0.0;
        for j in 0..self.ds.p() {
            if self.ds.is_penalized(j) {
                pen += penalty::penalty_value(self.beta[j], self.v[j], spec);
            }
        }
        state.loss + pen
    }

    fn push_trace(&self, trace: &mut Option<Vec<f64>>, spec: &PenaltySpec) {
        if let Some(t) = trace.as_mut() {
            t.push(self.objective(spec));
        }
    }

    fn step_record(&self, spec: &PenaltySpec, kkt: f64, sweeps: usize) -> PathStep {
        let n = self.ds.n() as f64;
        let v_hat: Vec<f64> = self.v.iter().map(|&vj| vj * n).collect();
        let active_set: Vec<usize> = (0..self.ds.p())
            .filter(|&j| self.ds.is_penalized(j) && self.beta[j] != 0.0)
            .collect();
        PathStep {
            lambda: spec.lambda,
            intercept: self.intercept,
            beta: self.beta.clone(),
            eta: self.eta.clone(),
            v_hat,
            active_set,
            kkt_residual: kkt,
            sweeps,
            loss: self.loss,
            clamped: self.clamped,
            objective_trace: None,
        }
    }

    /// Solve one penalty level to certification. `Ok(None)` means the family
    /// saturated at this lambda and the path should stop before it.
    fn fit_lambda(&mut self, lambda_index: usize, spec: &PenaltySpec) -> Result<Option<PathStep>> {
        // Active-set sweeps allowed per weight refresh. Early refreshes do
        // not need an exact inner solve, and bounding the inner work keeps
        // the refresh count high enough for damping to act.
        const INNER_CAP: usize = 25;
        let tol = self.controls.tolerance;
        let budget = self.controls.max_sweeps;
        let mut sweeps = 0_usize;
        let mut trace: Option<Vec<f64>> = if self.controls.trace_objective {
            Some(Vec::new())
        } else {
            None
        };
        let mut prev: Option<(Vec<f64>, f64)> = None;
        loop {
            if matches!(self.refresh()?, Refresh::Saturated) {
                return Ok(None);
            }
            if let Some((pb, pb0)) = &prev {
                let mut delta = (self.intercept - pb0).abs();
                for (b, p) in self.beta.iter().zip(pb) {
                    delta = delta.max((b - p).abs());
                }
                if delta <= tol {
                    let (kkt, consistent) = self.certify(spec);
                    if consistent && kkt <= self.controls.kkt_tolerance {
                        let mut step = self.step_record(spec, kkt, sweeps);
                        step.objective_trace = trace;
                        return Ok(Some(step));
                    }
                }
            }
            if sweeps >= budget {
                let (kkt, _) = self.certify(spec);
                return Err(Error::NoConvergence {
                    lambda_index,
                    lambda: spec.lambda,
                    residual: kkt,
                    iterations: sweeps,
                });
            }
            prev = Some((self.beta.clone(), self.intercept));
            // Inner solve at fixed weights, capped per refresh.
            let mut inner = 0_usize;
            loop {
                let full_delta = self.sweep(spec, false);
                sweeps += 1;
                self.push_trace(&mut trace, spec);
                if full_delta <= tol || sweeps >= budget {
                    break;
                }
                loop {
                    let active_delta = self.sweep(spec, true);
                    sweeps += 1;
                    inner += 1;
                    self.push_trace(&mut trace, spec);
                    if active_delta <= tol || sweeps >= budget || inner >= INNER_CAP {
                        break;
                    }
                }
                if sweeps >= budget || inner >= INNER_CAP {
                    break;
                }
            }
            // A full quadratic step can cycle when the weights react to it
            // (nonconvex penalties under a reweighted likelihood). Blending
            // back toward the previous iterate leaves fixed points unchanged
            // and contracts oscillations; engage it progressively once the
            // plain iteration has burned through part of its budget. The
            // gaussian family has constant weights, hence nothing to damp.
            let alpha = if matches!(self.family, FamilyKind::Gaussian) {
                1.0
            } else if sweeps * 10 < budget {
                1.0
            } else if sweeps * 4 < budget {
                0.5
            } else if sweeps * 2 < budget {
                0.25
            } else {
                0.125
            };
            if alpha < 1.0 {
                if let Some((pb, pb0)) = &prev {
                    // Snap blends that decay toward zero so deactivation
                    // reaches an exact zero instead of a denormal remnant
                    // that would keep the active set inconsistent.
                    const BLEND_SNAP: f64 = 1e-12;
                    for (b, &p) in self.beta.iter_mut().zip(pb) {
                        let mixed = p + alpha * (*b - p);
                        *b = if mixed.abs() < BLEND_SNAP { 0.0 } else { mixed };
                    }
                    self.intercept = pb0 + alpha * (self.intercept - pb0);
                }
            }
        }
    }

    fn active_count(&self) -> usize {
        (0..self.ds.p())
            .filter(|&j| self.ds.is_penalized(j) && self.beta[j] != 0.0)
            .count()
    }
}

/// Compute the lambda grid: the largest value is the smallest lambda at which
/// every penalized coefficient is zero in the null model (intercept and
/// unpenalized features only), and `count` values descend log-linearly to
/// `ratio` times that.
pub fn make_lambda_grid(dataset: &Dataset, count: usize, ratio: f64) -> Result<LambdaGrid> {
    if count == 0 {
        return Err(Error::data("lambda grid size must be at least 1"));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::data("lambda ratio must lie strictly between 0 and 1"));
    }
    if dataset.usable_penalized().next().is_none() {
        return Err(Error::data(
            "lambda grid requires at least one usable penalized feature",
        ));
    }
    let controls = FitControls::default();
    let mut solver = CdSolver::new(dataset, &controls);
    // Effectively infinite lambda freezes all penalized coordinates at zero.
    let null_spec = PenaltySpec::lasso(f64::MAX);
    if solver.fit_lambda(0, &null_spec)?.is_none() {
        return Err(Error::numerical(
            "null model saturated; the lambda grid is undefined",
        ));
    }
    let mut lambda_max = 0.0_f64;
    for j in dataset.usable_penalized() {
        let u = dot(dataset.column(j), &solver.resid) * solver.n_inv;
        lambda_max = lambda_max.max(u.abs());
    }
    if !lambda_max.is_finite() || lambda_max <= 1e-12 {
        return Err(Error::data(
            "penalized features carry no score at the null model; the lambda grid is undefined",
        ));
    }
    // One part in 1e10 of padding so the feature that attains the null-model
    // score maximum sits strictly inside the threshold at the first grid
    // point under every floating-point evaluation order.
    lambda_max *= 1.0 + 1e-10;
    let mut values = Vec::with_capacity(count);
    if count == 1 {
        values.push(lambda_max);
    } else {
        let log_max = lambda_max.ln();
        let log_min = (lambda_max * ratio).ln();
        for k in 0..count {
            let t = k as f64 / (count - 1) as f64;
            values.push((log_max + t * (log_min - log_max)).exp());
        }
        values[0] = lambda_max;
        values[count - 1] = lambda_max * ratio;
    }
    LambdaGrid::new(values)
}

/// Fit the full regularization path for the dataset's family.
///
/// `spec.lambda` is ignored; each grid value is fit in turn, warm-started
/// from the previous solution.
pub fn fit_path(
    dataset: &Dataset,
    spec: &PenaltySpec,
    grid: &LambdaGrid,
    controls: &FitControls,
) -> Result<PathFit> {
    spec.validate()?;
    let mut solver = CdSolver::new(dataset, controls);
    let mut steps = Vec::with_capacity(grid.len());
    let mut truncated = false;
    for (k, &lambda) in grid.values().iter().enumerate() {
        let step_spec = spec.with_lambda(lambda);
        // Failing to certify a later lambda truncates the path to its
        // certified prefix; the first lambda must always converge.
        let step = match solver.fit_lambda(k, &step_spec) {
            Ok(Some(step)) => step,
            Ok(None) => {
                truncated = true;
                break;
            }
            Err(Error::NoConvergence { .. }) if !steps.is_empty() => {
                truncated = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(limit) = controls.max_active {
            if solver.active_count() > limit {
                truncated = true;
                break;
            }
        }
        steps.push(step);
    }
    Ok(PathFit {
        family: FamilyKind::of(dataset.response()),
        penalty: *spec,
        n: dataset.n(),
        penalized: dataset.penalized().to_vec(),
        record: dataset.record().clone(),
        steps,
        truncated,
    })
}
