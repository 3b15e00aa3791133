//! Unpenalized maximum-likelihood fits for small designs.
//!
//! Newton iterations with step halving, dense q x q Cholesky solves, and the
//! observed-information covariance needed for Wald tests. Used by the
//! comparator methods; q is at most a few dozen, so nothing here is tuned for
//! scale. Failure to converge (separation, singular information) is reported
//! through the `converged` flag rather than an error: a comparator treats
//! such a fit as an uninformative test.

use crate::family::{log1p_exp, sigmoid, RiskSetIndex};

pub(crate) enum SmallResponse<'a> {
    Gaussian(&'a [f64]),
    Binomial(&'a [u8]),
    /// Rows must already be sorted by ascending time.
    Cox { time: &'a [f64], status: &'a [u8] },
}

pub(crate) struct SmallFit {
    pub beta: Vec<f64>,
    /// Inverse observed information; None when the solve failed.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub converged: bool,
}

const MAX_HALVINGS: usize = 30;
const GRADIENT_TOL: f64 = 1e-6;
/// Linear predictors beyond this mean the likelihood is maximized at
/// infinity (separation, or a monotone partial likelihood): the score
/// vanishes there too, so the gradient test alone cannot tell.
const DIVERGED_ETA: f64 = 30.0;

/// In-place Cholesky factorization; returns false when the matrix is not
/// positive definite.
fn cholesky(a: &mut [Vec<f64>]) -> bool {
    let q = a.len();
    for j in 0..q {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        a[j][j] = d.sqrt();
        for i in j + 1..q {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / a[j][j];
        }
    }
    true
}

/// Solve L L' x = b with L lower triangular.
fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let q = l.len();
    let mut y = vec![0.0; q];
    for i in 0..q {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; q];
    for i in (0..q).rev() {
        let mut s = y[i];
        for k in i + 1..q {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

fn cholesky_inverse(l: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let q = l.len();
    let mut inv = vec![vec![0.0; q]; q];
    for j in 0..q {
        let mut e = vec![0.0; q];
        e[j] = 1.0;
        let col = cholesky_solve(l, &e);
        for i in 0..q {
            inv[i][j] = col[i];
        }
    }
    inv
}

fn eta_of(design: &[Vec<f64>], beta: &[f64]) -> Vec<f64> {
    let n = design[0].len();
    let mut eta = vec![0.0; n];
    for (col, &b) in design.iter().zip(beta) {
        if b != 0.0 {
            for (e, &x) in eta.iter_mut().zip(col) {
                *e += b * x;
            }
        }
    }
    eta
}

/// Negative log-likelihood, gradient, and information at beta.
fn evaluate(
    design: &[Vec<f64>],
    resp: &SmallResponse<'_>,
    beta: &[f64],
) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let q = design.len();
    let n = design[0].len();
    let eta = eta_of(design, beta);
    match resp {
        SmallResponse::Gaussian(y) => {
            let mut loss = 0.0;
            let mut resid = vec![0.0; n];
            for i in 0..n {
                let r = y[i] - eta[i];
                loss += 0.5 * r * r;
                resid[i] = r;
            }
            let mut grad = vec![0.0; q];
            let mut info = vec![vec![0.0; q]; q];
            for a in 0..q {
                grad[a] = design[a].iter().zip(&resid).map(|(&x, &r)| x * r).sum();
                for b in 0..=a {
                    let h: f64 = design[a].iter().zip(&design[b]).map(|(&x, &z)| x * z).sum();
                    info[a][b] = h;
                    info[b][a] = h;
                }
            }
            (loss, grad, info)
        }
        SmallResponse::Binomial(y) => {
            let mut loss = 0.0;
            let mut resid = vec![0.0; n];
            let mut w = vec![0.0; n];
            for i in 0..n {
                let pi = sigmoid(eta[i]);
                loss -= y[i] as f64 * eta[i] - log1p_exp(eta[i]);
                resid[i] = y[i] as f64 - pi;
                w[i] = pi * (1.0 - pi);
            }
            let mut grad = vec![0.0; q];
            let mut info = vec![vec![0.0; q]; q];
            for a in 0..q {
                grad[a] = design[a].iter().zip(&resid).map(|(&x, &r)| x * r).sum();
                for b in 0..=a {
                    let h: f64 = (0..n).map(|i| w[i] * design[a][i] * design[b][i]).sum();
                    info[a][b] = h;
                    info[b][a] = h;
                }
            }
            (loss, grad, info)
        }
        SmallResponse::Cox { time, status } => {
            let index = RiskSetIndex::new(time, status);
            let m = index.len();
            let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ex: Vec<f64> = eta.iter().map(|&e| (e - shift).exp()).collect();
            // Suffix sums of e^eta, e^eta x_a, and e^eta x_a x_b.
            let mut s0 = 0.0;
            let mut s1 = vec![0.0; q];
            let mut s2 = vec![vec![0.0; q]; q];
            let mut loss = 0.0;
            let mut grad = vec![0.0; q];
            let mut info = vec![vec![0.0; q]; q];
            let mut k = m;
            for i in (0..design[0].len()).rev() {
                s0 += ex[i];
                for a in 0..q {
                    s1[a] += ex[i] * design[a][i];
                    for b in 0..=a {
                        s2[a][b] += ex[i] * design[a][i] * design[b][i];
                    }
                }
                while k > 0 && index.start[k - 1] == i {
                    k -= 1;
                    let d = index.count[k];
                    loss += d * s0.ln();
                    for a in 0..q {
                        let mean_a = s1[a] / s0;
                        grad[a] -= d * mean_a;
                        for b in 0..=a {
                            let h = d * (s2[a][b] / s0 - mean_a * s1[b] / s0);
                            info[a][b] += h;
                        }
                    }
                }
                if status[i] == 1 {
                    loss -= eta[i] - shift;
                    for a in 0..q {
                        grad[a] += design[a][i];
                    }
                }
            }
            for a in 0..q {
                for b in 0..a {
                    info[b][a] = info[a][b];
                }
            }
            (loss, grad, info)
        }
    }
}

/// Fit an unpenalized model by Newton's method with step halving.
pub(crate) fn fit_small(
    design: &[Vec<f64>],
    resp: &SmallResponse<'_>,
    max_iter: usize,
) -> SmallFit {
    let q = design.len();
    let mut beta = vec![0.0; q];
    let (mut loss, mut grad, mut info) = evaluate(design, resp, &beta);

    // A linear model needs exactly one solve.
    if let SmallResponse::Gaussian(y) = resp {
        let n = design[0].len();
        let mut l = info.clone();
        if !cholesky(&mut l) {
            return SmallFit {
                beta,
                covariance: None,
                converged: false,
            };
        }
        let est = cholesky_solve(&l, &grad);
        let eta = eta_of(design, &est);
        let rss: f64 = y.iter().zip(&eta).map(|(&yi, &ei)| (yi - ei) * (yi - ei)).sum();
        let dof = n.saturating_sub(q);
        if dof == 0 {
            return SmallFit {
                beta: est,
                covariance: None,
                converged: false,
            };
        }
        let sigma2 = rss / dof as f64;
        let inv = cholesky_inverse(&l);
        let cov = inv
            .iter()
            .map(|row| row.iter().map(|v| v * sigma2).collect())
            .collect();
        return SmallFit {
            beta: est,
            covariance: Some(cov),
            converged: true,
        };
    }

    for _ in 0..max_iter {
        let gmax = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if gmax <= GRADIENT_TOL {
            let eta = eta_of(design, &beta);
            if eta.iter().any(|e| e.abs() > DIVERGED_ETA) {
                return SmallFit {
                    beta,
                    covariance: None,
                    converged: false,
                };
            }
            let mut l = info.clone();
            if !cholesky(&mut l) {
                return SmallFit {
                    beta,
                    covariance: None,
                    converged: false,
                };
            }
            return SmallFit {
                beta,
                covariance: Some(cholesky_inverse(&l)),
                converged: true,
            };
        }
        let mut l = info.clone();
        if !cholesky(&mut l) {
            return SmallFit {
                beta,
                covariance: None,
                converged: false,
            };
        }
        let step = cholesky_solve(&l, &grad);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = beta
                .iter()
                .zip(&step)
                .map(|(&b, &s)| b + scale * s)
                .collect();
            let (t_loss, t_grad, t_info) = evaluate(design, resp, &trial);
            if t_loss.is_finite() && t_loss <= loss + 1e-12 {
                beta = trial;
                loss = t_loss;
                grad = t_grad;
                info = t_info;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return SmallFit {
                beta,
                covariance: None,
                converged: false,
            };
        }
    }
    SmallFit {
        beta,
        covariance: None,
        converged: false,
    }
}
