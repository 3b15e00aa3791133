//! Penalty functions and their scalar thresholding operators.
//!
//! Each operator solves the one-dimensional problem
//!   min_b  (v/2) b^2 - z b + P(|b|; v)
//! that arises in a coordinate descent step with quadratic weight v. For MCP
//! and SCAD the concavity parameter applies on the working-curvature scale:
//! the penalty flattens as v|b| grows rather than |b|, so the scalar problem
//! stays strictly convex for every positive v, activation happens exactly at
//! |z| = lambda for all four families, and the selection certificate holds
//! at any stationary point. With unit weights (standardized gaussian
//! features) this reduces to the penalties' textbook forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MCP_GAMMA: f64 = 3.0;
pub const DEFAULT_SCAD_GAMMA: f64 = 3.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyFamily {
    Lasso,
    ElasticNet,
    Mcp,
    Scad,
}

impl std::fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PenaltyFamily::Lasso => "lasso",
            PenaltyFamily::ElasticNet => "elastic-net",
            PenaltyFamily::Mcp => "mcp",
            PenaltyFamily::Scad => "scad",
        };
        f.write_str(s)
    }
}

/// A penalty family with its tuning parameters.
///
/// `lambda2` is the ridge component and applies to the elastic net only;
/// `gamma` is the concavity parameter and applies to MCP and SCAD only.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub lambda: f64,
    pub lambda2: f64,
    pub gamma: f64,
}

impl PenaltySpec {
    pub fn lasso(lambda: f64) -> Self {
        PenaltySpec {
            family: PenaltyFamily::Lasso,
            lambda,
            lambda2: 0.0,
            gamma: 0.0,
        }
    }

    pub fn elastic_net(lambda: f64, lambda2: f64) -> Self {
        PenaltySpec {
            family: PenaltyFamily::ElasticNet,
            lambda,
            lambda2,
            gamma: 0.0,
        }
    }

    pub fn mcp(lambda: f64, gamma: f64) -> Self {
        PenaltySpec {
            family: PenaltyFamily::Mcp,
            lambda,
            lambda2: 0.0,
            gamma,
        }
    }

    pub fn scad(lambda: f64, gamma: f64) -> Self {
        PenaltySpec {
            family: PenaltyFamily::Scad,
            lambda,
            lambda2: 0.0,
            gamma,
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        PenaltySpec { lambda, ..*self }
    }

    /// The lambda that controls the zero threshold; equals `lambda` for every
    /// family (the ridge part of the elastic net does not move the threshold).
    pub fn effective_lambda(&self) -> f64 {
        self.lambda
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::data("lambda must be finite and non-negative"));
        }
        match self.family {
            PenaltyFamily::Lasso => {}
            PenaltyFamily::ElasticNet => {
                if !self.lambda2.is_finite() || self.lambda2 < 0.0 {
                    return Err(Error::data(
                        "elastic net lambda2 must be finite and non-negative",
                    ));
                }
            }
            PenaltyFamily::Mcp => {
                if !(self.gamma > 1.0) {
                    return Err(Error::data("MCP gamma must exceed 1"));
                }
            }
            PenaltyFamily::Scad => {
                if !(self.gamma > 2.0) {
                    return Err(Error::data("SCAD gamma must exceed 2"));
                }
            }
        }
        if self.family != PenaltyFamily::ElasticNet && self.lambda2 != 0.0 {
            return Err(Error::data(format!(
                "lambda2 applies to the elastic net only, not {}",
                self.family
            )));
        }
        Ok(())
    }
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Penalty value P(|b|; v) including the ridge part for the elastic net.
///
/// `v` is the quadratic weight of the coordinate; MCP and SCAD flatten in
/// v|b|, so their value depends on it. Lasso and elastic net ignore it.
pub fn penalty_value(b: f64, v: f64, spec: &PenaltySpec) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    let a = b.abs();
    let l = spec.lambda;
    match spec.family {
        PenaltyFamily::Lasso => l * a,
        PenaltyFamily::ElasticNet => l * a + 0.5 * spec.lambda2 * b * b,
        PenaltyFamily::Mcp => {
            let g = spec.gamma;
            if v * a <= g * l {
                l * a - v * a * a / (2.0 * g)
            } else {
                0.5 * g * l * l / v
            }
        }
        PenaltyFamily::Scad => {
            let g = spec.gamma;
            let u = v * a;
            if u <= l {
                l * a
            } else if u <= g * l {
                (2.0 * g * l * u - u * u - l * l) / (2.0 * (g - 1.0) * v)
            } else {
                0.5 * l * l * (g + 1.0) / v
            }
        }
    }
}

/// Derivative of the penalty with respect to b at b != 0 (sign included).
pub fn penalty_derivative(b: f64, v: f64, spec: &PenaltySpec) -> f64 {
    let a = b.abs();
    let s = b.signum();
    let l = spec.lambda;
    match spec.family {
        PenaltyFamily::Lasso => s * l,
        PenaltyFamily::ElasticNet => s * l + spec.lambda2 * b,
        PenaltyFamily::Mcp => s * (l - v * a / spec.gamma).max(0.0),
        PenaltyFamily::Scad => {
            let g = spec.gamma;
            let u = v * a;
            if u <= l {
                s * l
            } else {
                s * ((g * l - u) / (g - 1.0)).max(0.0)
            }
        }
    }
}

/// Coordinate update objective; test helper for the threshold operators.
#[cfg(test)]
fn scalar_objective(b: f64, z: f64, v: f64, spec: &PenaltySpec) -> f64 {
    0.5 * v * b * b - z * b + penalty_value(b, v, spec)
}

/// Solve the scalar coordinate problem for a penalized feature.
///
/// `v` is the quadratic weight for this coordinate and must be positive. For
/// the elastic net the ridge term enters through the denominator, so `v` is
/// passed without it. The region boundaries sit at fixed multiples of lambda
/// on the z scale, so the operator is strictly increasing in z for every
/// positive v and returns 0 exactly when |z| <= lambda.
pub fn threshold(z: f64, v: f64, spec: &PenaltySpec) -> f64 {
    debug_assert!(v > 0.0);
    let l = spec.lambda;
    match spec.family {
        PenaltyFamily::Lasso => soft(z, l) / v,
        PenaltyFamily::ElasticNet => soft(z, l) / (v + spec.lambda2),
        PenaltyFamily::Mcp => {
            let g = spec.gamma;
            let a = z.abs();
            if a <= l {
                0.0
            } else if a < g * l {
                z.signum() * (a - l) / (v * (1.0 - 1.0 / g))
            } else {
                z / v
            }
        }
        PenaltyFamily::Scad => {
            let g = spec.gamma;
            let a = z.abs();
            if a <= 2.0 * l {
                soft(z, l) / v
            } else if a < g * l {
                z.signum() * ((g - 1.0) * a - g * l) / (v * (g - 2.0))
            } else {
                z / v
            }
        }
    }
}

/// Largest violation of the stationarity conditions, given the score vector
/// u/n and the coefficients. Unpenalized features must have zero score;
/// inactive penalized features must have score within the lambda threshold;
/// active penalized features must balance score against penalty derivative.
/// `v_over_n` holds the per-coordinate quadratic weights x_j' W x_j / n that
/// set the MCP/SCAD flattening scale; lasso and elastic net ignore them.
pub fn kkt_residual(
    u_over_n: &[f64],
    beta: &[f64],
    v_over_n: &[f64],
    penalized: &[bool],
    spec: &PenaltySpec,
) -> f64 {
    let lam = spec.effective_lambda();
    let mut worst = 0.0_f64;
    for j in 0..beta.len() {
        let r = if !penalized[j] {
            u_over_n[j].abs()
        } else if beta[j] == 0.0 {
            (u_over_n[j].abs() - lam).max(0.0)
        } else {
            (u_over_n[j] - penalty_derivative(beta[j], v_over_n[j], spec)).abs()
        };
        worst = worst.max(r);
    }
    worst
}

/// Decision-theoretic selection test at a solution: feature j is selected
/// exactly when |u_j + v_j b_j| / n exceeds the effective lambda. `u_j` and
/// `v_j` are on the unnormalized scale (x_j' s and x_j' W x_j).
pub fn selection_condition(
    u_j: f64,
    v_j: f64,
    beta_j: f64,
    n: usize,
    lambda_effective: f64,
) -> bool {
    (u_j + v_j * beta_j).abs() / n as f64 > lambda_effective
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn lasso_threshold_basic() {
        let spec = PenaltySpec::lasso(0.5);
        assert_abs_diff_eq!(threshold(2.0, 1.0, &spec), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(threshold(-2.0, 1.0, &spec), -1.5, epsilon = 1e-12);
        assert_eq!(threshold(0.4, 1.0, &spec), 0.0);
        assert_eq!(threshold(-0.5, 1.0, &spec), 0.0);
    }

    #[test]
    fn elastic_net_threshold_shrinks_by_ridge() {
        let spec = PenaltySpec::elastic_net(0.5, 1.0);
        assert_abs_diff_eq!(threshold(2.0, 1.0, &spec), 0.75, epsilon = 1e-12);
        // lambda2 = 0 reduces to the lasso.
        let spec0 = PenaltySpec::elastic_net(0.5, 0.0);
        assert_abs_diff_eq!(threshold(2.0, 1.0, &spec0), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn mcp_threshold_regions() {
        let spec = PenaltySpec::mcp(0.5, 3.0);
        // Below the zero threshold.
        assert_eq!(threshold(0.5, 1.0, &spec), 0.0);
        // Interior region: (|z| - lambda) / (v (1 - 1/gamma)).
        assert_abs_diff_eq!(threshold(1.0, 1.0, &spec), 0.75, epsilon = 1e-12);
        // Beyond gamma * lambda = 1.5 the estimate is unshrunk: z/v, which
        // the grid-search oracle in tests/prox_oracle.rs confirms.
        assert_abs_diff_eq!(threshold(2.0, 1.0, &spec), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(threshold(-2.0, 1.0, &spec), -2.0, epsilon = 1e-12);
        // Region boundaries do not move with v; the output scales by 1/v.
        assert_abs_diff_eq!(threshold(1.0, 0.25, &spec), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(threshold(2.0, 0.25, &spec), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn scad_threshold_regions() {
        let spec = PenaltySpec::scad(0.5, 3.7);
        assert_eq!(threshold(0.5, 1.0, &spec), 0.0);
        // Soft-threshold region: |z| <= 2 lambda.
        assert_abs_diff_eq!(threshold(0.9, 1.0, &spec), 0.4, epsilon = 1e-12);
        // Middle region: ((gamma-1)|z| - gamma lambda) / (v (gamma - 2)).
        let expect = (2.7 * 1.5 - 3.7 * 0.5) / 1.7;
        assert_abs_diff_eq!(threshold(1.5, 1.0, &spec), expect, epsilon = 1e-12);
        // Unshrunk region: |z| >= gamma * lambda = 1.85.
        assert_abs_diff_eq!(threshold(2.5, 1.0, &spec), 2.5, epsilon = 1e-12);
        // Low curvature scales the outputs without moving the boundaries.
        assert_abs_diff_eq!(threshold(0.8, 0.25, &spec), 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(
            threshold(1.5, 0.25, &spec),
            (2.7 * 1.5 - 3.7 * 0.5) / (0.25 * 1.7),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(threshold(2.0, 0.25, &spec), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn thresholds_are_continuous_at_region_boundaries() {
        let eps = 1e-9;
        for spec in [
            PenaltySpec::mcp(0.5, 3.0),
            PenaltySpec::scad(0.5, 3.7),
            PenaltySpec::lasso(0.5),
            PenaltySpec::elastic_net(0.5, 0.7),
        ] {
            for v in [0.2, 0.6, 1.0, 2.3] {
                let boundaries = match spec.family {
                    PenaltyFamily::Mcp => vec![spec.lambda, spec.gamma * spec.lambda],
                    PenaltyFamily::Scad => vec![
                        spec.lambda,
                        2.0 * spec.lambda,
                        spec.gamma * spec.lambda,
                    ],
                    _ => vec![spec.lambda],
                };
                for b in boundaries {
                    let lo = threshold(b - eps, v, &spec);
                    let hi = threshold(b + eps, v, &spec);
                    assert!(
                        (hi - lo).abs() < 1e-6,
                        "jump at z = {b} for {:?} v = {v}: {lo} vs {hi}",
                        spec.family
                    );
                }
            }
        }
    }

    #[test]
    fn low_curvature_update_is_still_the_scalar_minimizer() {
        // Weights well below 1/gamma used to make the fixed-scale problem
        // nonconvex; on the working-curvature scale it stays convex and the
        // closed form must match direct minimization.
        for (spec, v) in [
            (PenaltySpec::mcp(0.5, 1.5), 0.4),
            (PenaltySpec::mcp(0.5, 3.0), 0.15),
            (PenaltySpec::scad(0.5, 3.7), 0.2),
        ] {
            for z in [-2.0, -0.7, -0.2, 0.0, 0.3, 0.9, 1.7] {
                let b = threshold(z, v, &spec);
                let obj = scalar_objective(b, z, v, &spec);
                let mut grid_best = f64::INFINITY;
                let mut i = -160_000;
                while i <= 160_000 {
                    let c = i as f64 * 1e-4;
                    grid_best = grid_best.min(scalar_objective(c, z, v, &spec));
                    i += 1;
                }
                assert!(
                    obj <= grid_best + 1e-8,
                    "z = {z}, v = {v}: closed-form objective {obj} vs grid {grid_best}"
                );
            }
        }
    }

    #[test]
    fn penalty_values_are_continuous_and_capped() {
        let mcp = PenaltySpec::mcp(0.5, 3.0);
        assert_abs_diff_eq!(
            penalty_value(1.5, 1.0, &mcp),
            0.5 * 3.0 * 0.25,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(penalty_value(9.0, 1.0, &mcp), penalty_value(1.5, 1.0, &mcp));
        // The cap scales with 1/v and is reached at v|b| = gamma lambda.
        assert_abs_diff_eq!(penalty_value(3.0, 0.5, &mcp), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(penalty_value(9.9, 0.5, &mcp), 0.75, epsilon = 1e-12);
        let scad = PenaltySpec::scad(0.5, 3.7);
        assert_abs_diff_eq!(penalty_value(0.5, 1.0, &scad), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(
            penalty_value(1.85, 1.0, &scad),
            0.5 * 0.25 * 4.7,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            penalty_value(10.0, 1.0, &scad),
            penalty_value(1.85, 1.0, &scad)
        );
    }

    #[test]
    fn derivative_matches_value_by_finite_difference() {
        let h = 1e-6;
        for spec in [
            PenaltySpec::lasso(0.4),
            PenaltySpec::elastic_net(0.4, 0.9),
            PenaltySpec::mcp(0.4, 3.0),
            PenaltySpec::scad(0.4, 3.7),
        ] {
            for v in [0.3, 1.0, 1.9] {
                for b in [-2.0, -0.9, -0.3, 0.25, 0.7, 1.1, 3.0] {
                    let fd = (penalty_value(b + h, v, &spec)
                        - penalty_value(b - h, v, &spec))
                        / (2.0 * h);
                    assert_abs_diff_eq!(penalty_derivative(b, v, &spec), fd, epsilon = 1e-5);
                }
            }
        }
    }

    #[test]
    fn selection_condition_threshold() {
        assert!(selection_condition(15.0, 100.0, 0.1, 100, 0.2));
        assert!(!selection_condition(15.0, 100.0, 0.0, 100, 0.2));
        assert!(selection_condition(-30.0, 100.0, 0.0, 100, 0.2));
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(PenaltySpec::mcp(0.1, 1.0).validate().is_err());
        assert!(PenaltySpec::scad(0.1, 2.0).validate().is_err());
        assert!(PenaltySpec::elastic_net(0.1, -0.5).validate().is_err());
        assert!(PenaltySpec::lasso(f64::NAN).validate().is_err());
        let mut spec = PenaltySpec::mcp(0.1, 3.0);
        spec.lambda2 = 0.3;
        assert!(spec.validate().is_err());
        assert!(PenaltySpec::lasso(0.0).validate().is_ok());
    }

    proptest! {
        #[test]
        fn threshold_is_odd(z in -5.0_f64..5.0, v in 0.2_f64..4.0) {
            for spec in [
                PenaltySpec::lasso(0.5),
                PenaltySpec::elastic_net(0.5, 0.8),
                PenaltySpec::mcp(0.5, 3.0),
                PenaltySpec::scad(0.5, 3.7),
            ] {
                let pos = threshold(z, v, &spec);
                let neg = threshold(-z, v, &spec);
                prop_assert!((pos + neg).abs() < 1e-12);
            }
        }

        #[test]
        fn threshold_is_monotone_in_z(
            z1 in -4.0_f64..4.0,
            dz in 0.0_f64..2.0,
            v in 0.1_f64..3.0,
        ) {
            let z2 = z1 + dz;
            for spec in [
                PenaltySpec::lasso(0.5),
                PenaltySpec::elastic_net(0.5, 0.8),
                PenaltySpec::mcp(0.5, 3.0),
                PenaltySpec::scad(0.5, 3.7),
            ] {
                prop_assert!(threshold(z2, v, &spec) >= threshold(z1, v, &spec) - 1e-12);
            }
        }

        #[test]
        fn mcp_approaches_lasso_for_large_gamma(z in -4.0_f64..4.0, v in 0.1_f64..3.0) {
            let mcp = PenaltySpec::mcp(0.5, 1e8);
            let lasso = PenaltySpec::lasso(0.5);
            let d = (threshold(z, v, &mcp) - threshold(z, v, &lasso)).abs();
            prop_assert!(d < 1e-6, "difference {d}");
        }

        #[test]
        fn threshold_zero_iff_score_within_lambda(z in -3.0_f64..3.0, v in 0.1_f64..3.0) {
            for spec in [
                PenaltySpec::lasso(0.5),
                PenaltySpec::elastic_net(0.5, 0.8),
                PenaltySpec::mcp(0.5, 3.0),
                PenaltySpec::scad(0.5, 3.7),
            ] {
                let b = threshold(z, v, &spec);
                if z.abs() > 0.5 + 1e-9 {
                    prop_assert!(b != 0.0);
                } else if z.abs() < 0.5 - 1e-9 {
                    prop_assert!(b == 0.0);
                }
            }
        }
    }
}
