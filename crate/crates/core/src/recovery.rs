//! Sparse link-delay recovery.
//!
//! Minimizes `½‖y − Ax‖² + λ‖x‖₁` over `x ≥ 0` with an accelerated
//! proximal-gradient method. Momentum is reset whenever a step would raise
//! the objective, so accepted iterates never increase it.

use ndarray::{Array1, Array2, ArrayView1};
use serde::Serialize;
use thiserror::Error;

use crate::coherence::RoutingMatrix;

pub const LAMBDA_SCALE: f64 = 0.01;
pub const LAMBDA_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecoveryError {
    #[error("measurement vector has {got} entries, matrix has {expected} rows")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("regularization weight must be positive, got {0}")]
    BadLambda(f64),
    #[error("top-k declaration needs 1 <= k <= {links}, got {k}")]
    BadTopK { k: usize, links: usize },
    #[error("declaration threshold must be positive, got {0}")]
    BadThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Stop once the relative objective decrease of a step falls below this.
    pub relative_tolerance: f64,
    pub power_iterations: usize,
    pub power_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 10_000,
            relative_tolerance: 1e-10,
            power_iterations: 50,
            power_tolerance: 1e-9,
        }
    }
}

/// How bottleneck links are picked from an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum Declaration {
    /// The `k` largest entries, ties to the lower index.
    TopK(usize),
    /// Every entry strictly above the threshold.
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryResult {
    pub x_hat: Vec<f64>,
    /// Zero-based link indices, ascending.
    pub declared: Vec<usize>,
    pub lambda: f64,
    pub iterations: usize,
    pub objective: f64,
    /// Objective at the start, at every momentum restart, and at the end.
    #[serde(skip)]
    pub checkpoints: Vec<f64>,
}

impl RecoveryResult {
    pub fn declare(mut self, mode: Declaration) -> Result<Self, RecoveryError> {
        self.declared = declare_bottlenecks(&self.x_hat, mode)?;
        Ok(self)
    }
}

pub(crate) fn dense(a: &RoutingMatrix) -> Array2<f64> {
    Array2::from_shape_fn((a.rows(), a.cols()), |(i, j)| f64::from(a.get(i, j)))
}

/// `0.01 · ‖Aᵀy‖∞`, floored at `1e-9`.
pub fn default_lambda(a: &RoutingMatrix, y: &[f64]) -> Result<f64, RecoveryError> {
    check_inputs(a, y)?;
    let aty = dense(a).t().dot(&ArrayView1::from(y));
    let norm = aty.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((LAMBDA_SCALE * norm).max(LAMBDA_FLOOR))
}

fn check_inputs(a: &RoutingMatrix, y: &[f64]) -> Result<(), RecoveryError> {
    if y.len() != a.rows() {
        return Err(RecoveryError::DimensionMismatch {
            expected: a.rows(),
            got: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(RecoveryError::NonFinite);
    }
    Ok(())
}

/// Largest eigenvalue of `AᵀA` by power iteration from the all-ones vector.
fn lipschitz(a: &Array2<f64>, opts: &SolverOptions) -> f64 {
    let ata = a.t().dot(a);
    let mut v = Array1::from_elem(ata.ncols(), 1.0);
    let mut estimate = 0.0;
    for _ in 0..opts.power_iterations {
        let w = ata.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w) / v.dot(&v);
        v = w / norm;
        let done = (next - estimate).abs() <= opts.power_tolerance * next.abs();
        estimate = next;
        if done {
            break;
        }
    }
    let w = ata.dot(&v);
    estimate.max(v.dot(&w) / v.dot(&v))
}

/// Solves with [`SolverOptions::default`].
pub fn solve(a: &RoutingMatrix, y: &[f64], lambda: f64) -> Result<RecoveryResult, RecoveryError> {
    solve_with(a, y, lambda, &SolverOptions::default())
}

pub fn solve_with(
    a: &RoutingMatrix,
    y: &[f64],
    lambda: f64,
    opts: &SolverOptions,
) -> Result<RecoveryResult, RecoveryError> {
    check_inputs(a, y)?;
    if !lambda.is_finite() {
        return Err(RecoveryError::NonFinite);
    }
    if lambda <= 0.0 {
        return Err(RecoveryError::BadLambda(lambda));
    }
    let am = dense(a);
    let y = ArrayView1::from(y);
    let objective = |x: &Array1<f64>| {
        let r = am.dot(x) - y;
        0.5 * r.dot(&r) + lambda * x.sum()
    };
    let prox_step = |from: &Array1<f64>, step: f64| {
        let grad = am.t().dot(&(am.dot(from) - y));
        (from - &(grad * step)).mapv(|v| (v - lambda * step).max(0.0))
    };

    let n = a.cols();
    let mut x = Array1::<f64>::zeros(n);
    let mut f = objective(&x);
    let mut checkpoints = vec![f];
    let l = lipschitz(&am, opts);
    if l == 0.0 {
        return Ok(RecoveryResult {
            x_hat: x.to_vec(),
            declared: Vec::new(),
            lambda,
            iterations: 0,
            objective: f,
            checkpoints,
        });
    }
    let step = 1.0 / l;

    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut x_next = prox_step(&z, step);
        let mut f_next = objective(&x_next);
        if f_next > f {
            checkpoints.push(f);
            t = 1.0;
            x_next = prox_step(&x, step);
            f_next = objective(&x_next);
            if f_next > f {
                // no descent from x even without momentum
                break;
            }
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &x_next + &((&x_next - &x) * ((t - 1.0) / t_next));
        t = t_next;
        let decrease = f - f_next;
        x = x_next;
        f = f_next;
        if decrease <= opts.relative_tolerance * f.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    checkpoints.push(f);

    Ok(RecoveryResult {
        x_hat: x.to_vec(),
        declared: Vec::new(),
        lambda,
        iterations,
        objective: f,
        checkpoints,
    })
}

/// Objective value `½‖y − Ax‖² + λ‖x‖₁` at `x`.
pub fn objective(a: &RoutingMatrix, y: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let r = dense(a).dot(&ArrayView1::from(x)) - ArrayView1::from(y);
    0.5 * r.dot(&r) + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
}

/// Picks bottleneck links from an estimate. Returns ascending indices.
pub fn declare_bottlenecks(x_hat: &[f64], mode: Declaration) -> Result<Vec<usize>, RecoveryError> {
    let mut out = match mode {
        Declaration::TopK(k) => {
            if k == 0 || k > x_hat.len() {
                return Err(RecoveryError::BadTopK {
                    k,
                    links: x_hat.len(),
                });
            }
            let mut order: Vec<usize> = (0..x_hat.len()).collect();
            order.sort_by(|&i, &j| x_hat[j].total_cmp(&x_hat[i]).then(i.cmp(&j)));
            order.truncate(k);
            order
        }
        Declaration::Threshold(tau) => {
            if tau.is_nan() || tau <= 0.0 {
                return Err(RecoveryError::BadThreshold(tau));
            }
            (0..x_hat.len()).filter(|&j| x_hat[j] > tau).collect()
        }
    };
    out.sort_unstable();
    Ok(out)
}
