//! l2-constrained basis pursuit denoising:
//! `min ||x||_1  s.t.  ||z - A x||_2 <= eps` (optionally `x >= 0`),
//! solved by FISTA on the Lagrangian `lambda ||x||_1 + 1/2 ||z - A x||^2`
//! along a geometric continuation path in `lambda`.

use std::io::Write;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linop::RealOperator;
use crate::rng::{derive_seed, rng_from_seed, stream};

/// The step size uses the power-iteration estimate inflated by this factor,
/// which guards against the estimate approaching `||A||^2` from below.
const LIPSCHITZ_SAFETY: f64 = 1.05;

/// Consecutive objective increases (without momentum) treated as divergence.
const DIVERGENCE_STREAK: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub rel_tol: f64,
    pub nonneg: bool,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1e-2,
            max_outer: 30,
            max_inner: 2000,
            rel_tol: 1e-6,
            nonneg: true,
            power_iters: 50,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if self.max_outer == 0 || self.max_inner == 0 || self.power_iters == 0 {
            return Err(Error::Config("solver iteration counts must be positive".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterStep {
    pub lambda: f64,
    pub residual: f64,
    pub inner_iterations: usize,
    pub refinement: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub estimate: Vec<f64>,
    pub residual: f64,
    pub lambda: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub lipschitz: f64,
    pub history: Vec<OuterStep>,
}

impl SolverResult {
    /// One JSON object per continuation step.
    pub fn write_diagnostics(&self, w: &mut dyn Write) -> std::io::Result<()> {
        for step in &self.history {
            serde_json::to_writer(&mut *w, step)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzEstimate {
    /// Estimate of `||A||_2^2`.
    pub value: f64,
    /// Rayleigh quotient stagnated to 1e-6 relative before the budget ran out.
    pub converged: bool,
    pub zero_operator: bool,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Power iteration on `A^T A` from a seeded Gaussian start.
pub fn estimate_lipschitz(a: &dyn RealOperator, iters: usize, seed: u64) -> LipschitzEstimate {
    let mut rng = rng_from_seed(derive_seed(seed, &[stream::POWER_ITERATION]));
    let mut x: Vec<f64> = (0..a.cols()).map(|_| rng.sample(StandardNormal)).collect();
    let n0 = norm2(&x);
    if n0 == 0.0 {
        return LipschitzEstimate {
            value: 0.0,
            converged: true,
            zero_operator: true,
        };
    }
    x.iter_mut().for_each(|v| *v /= n0);
    let mut ax = vec![0.0; a.rows()];
    let mut atax = vec![0.0; a.cols()];
    let mut value = 0.0;
    let mut converged = false;
    for _ in 0..iters {
        a.forward(&x, &mut ax);
        a.adjoint(&ax, &mut atax);
        let next = norm2(&atax);
        if next == 0.0 {
            return LipschitzEstimate {
                value: 0.0,
                converged: true,
                zero_operator: true,
            };
        }
        let change = (next - value).abs();
        value = next;
        x.iter_mut().zip(&atax).for_each(|(v, w)| *v = w / next);
        if change <= 1e-6 * next {
            converged = true;
            break;
        }
    }
    LipschitzEstimate {
        value,
        converged,
        zero_operator: false,
    }
}

fn objective(lambda: f64, x: &[f64], ax: &[f64], z: &[f64]) -> f64 {
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    let r2: f64 = ax.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    lambda * l1 + 0.5 * r2
}

fn prox(v: f64, threshold: f64, nonneg: bool) -> f64 {
    if nonneg {
        (v - threshold).max(0.0)
    } else {
        v.signum() * (v.abs() - threshold).max(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct FistaOutput {
    pub x: Vec<f64>,
    pub iterations: usize,
}

/// FISTA with function-value restart for `lambda ||x||_1 + 1/2 ||z - A x||^2`.
/// `lipschitz` bounds `||A||^2`. One forward and one adjoint per iteration.
///
/// Stops when the last step is below `rel_tol` times the distance travelled
/// from `x_init`. Measuring against `||x||` instead would end warm-started
/// continuation steps after a single iteration once `lambda` is small.
#[allow(clippy::too_many_arguments)]
pub fn fista_lasso(
    a: &dyn RealOperator,
    z: &[f64],
    lambda: f64,
    x_init: &[f64],
    lipschitz: f64,
    max_iter: usize,
    rel_tol: f64,
    nonneg: bool,
) -> Result<FistaOutput> {
    fista_anchored(a, z, lambda, x_init, x_init, lipschitz, max_iter, rel_tol, nonneg)
}

/// As [`fista_lasso`], with the travelled distance measured from `anchor`.
#[allow(clippy::too_many_arguments)]
fn fista_anchored(
    a: &dyn RealOperator,
    z: &[f64],
    lambda: f64,
    x_init: &[f64],
    anchor: &[f64],
    lipschitz: f64,
    max_iter: usize,
    rel_tol: f64,
    nonneg: bool,
) -> Result<FistaOutput> {
    check_len(a.rows(), z.len(), "measurements")?;
    check_len(a.cols(), x_init.len(), "initial estimate")?;
    if !(lambda > 0.0) || !(lipschitz > 0.0) {
        return Err(Error::Argument(format!(
            "lambda and Lipschitz constant must be positive (got {lambda}, {lipschitz})"
        )));
    }
    let step = 1.0 / lipschitz;
    let thr = lambda * step;
    let mut x: Vec<f64> = x_init
        .iter()
        .map(|&v| if nonneg { v.max(0.0) } else { v })
        .collect();
    let x0 = anchor;
    let mut ax = vec![0.0; a.rows()];
    a.forward(&x, &mut ax);
    let mut obj = objective(lambda, &x, &ax, z);
    let mut y = x.clone();
    let mut ay = ax.clone();
    let mut t = 1.0f64;
    let mut momentum = false;
    let mut streak = 0;
    let mut grad = vec![0.0; a.cols()];
    let mut resid = vec![0.0; a.rows()];
    let mut xn = vec![0.0; a.cols()];
    let mut axn = vec![0.0; a.rows()];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        resid
            .iter_mut()
            .zip(ay.iter().zip(z))
            .for_each(|(r, (p, q))| *r = p - q);
        a.adjoint(&resid, &mut grad);
        for ((o, yv), g) in xn.iter_mut().zip(&y).zip(&grad) {
            *o = prox(yv - step * g, thr, nonneg);
        }
        a.forward(&xn, &mut axn);
        let objn = objective(lambda, &xn, &axn, z);
        let increased = objn > obj * (1.0 + 1e-12);
        if increased && momentum {
            y.copy_from_slice(&x);
            ay.copy_from_slice(&ax);
            t = 1.0;
            momentum = false;
            continue;
        }
        if increased {
            streak += 1;
            if streak >= DIVERGENCE_STREAK {
                return Err(Error::Divergence(format!(
                    "objective increased on {DIVERGENCE_STREAK} consecutive plain gradient steps (lambda={lambda:e})"
                )));
            }
        } else {
            streak = 0;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let theta = (t - 1.0) / tn;
        let mut diff2 = 0.0;
        let mut moved2 = 0.0;
        for i in 0..xn.len() {
            let d = xn[i] - x[i];
            diff2 += d * d;
            moved2 += (xn[i] - x0[i]) * (xn[i] - x0[i]);
            y[i] = xn[i] + theta * d;
        }
        for i in 0..axn.len() {
            ay[i] = axn[i] + theta * (axn[i] - ax[i]);
        }
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut ax, &mut axn);
        obj = objn;
        t = tn;
        momentum = true;
        if diff2.sqrt() <= rel_tol * moved2.sqrt() || diff2 == 0.0 {
            break;
        }
    }
    Ok(FistaOutput { x, iterations })
}

/// On a fixed support the lasso path is affine in `lambda`, so the solution
/// at `lambda / 2` is `x + (x - prev) / 2` with `prev` the one at `2 lambda`.
/// Entries that are zero in `x` or would change sign stay at zero.
fn extrapolate(x: &[f64], prev: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(prev)
        .map(|(&c, &p)| {
            let e = 1.5 * c - 0.5 * p;
            if c == 0.0 || e * c < 0.0 {
                0.0
            } else {
                e
            }
        })
        .collect()
}

fn residual_norm(a: &dyn RealOperator, z: &[f64], x: &[f64]) -> f64 {
    let mut ax = vec![0.0; a.rows()];
    a.forward(x, &mut ax);
    ax.iter()
        .zip(z)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Continuation `lambda_0 = 0.9 ||A^T z||_inf`, halving until the FISTA
/// solution is feasible, then one refinement pass with 4x the inner budget.
pub fn solve_bpdn(a: &dyn RealOperator, z: &[f64], cfg: &SolverConfig) -> Result<SolverResult> {
    cfg.validate()?;
    check_len(a.rows(), z.len(), "measurements")?;
    let n = a.cols();
    let lip = estimate_lipschitz(a, cfg.power_iters, cfg.seed);
    let mut atz = vec![0.0; n];
    a.adjoint(z, &mut atz);
    let lambda_max = atz.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zero = vec![0.0; n];
    let z_norm = norm2(z);
    let trivial = |lambda: f64| SolverResult {
        estimate: zero.clone(),
        residual: z_norm,
        lambda,
        inner_iterations: 0,
        outer_iterations: 0,
        converged: z_norm <= cfg.epsilon,
        lipschitz: lip.value,
        history: vec![],
    };
    if lip.zero_operator || lambda_max == 0.0 || z_norm <= cfg.epsilon {
        return Ok(trivial(0.9 * lambda_max));
    }
    let step_l = lip.value * LIPSCHITZ_SAFETY;
    let mut lambda = 0.9 * lambda_max;
    let mut x = zero.clone();
    let mut prev: Option<Vec<f64>> = None;
    let mut history = Vec::new();
    let mut total_inner = 0;
    for outer in 1..=cfg.max_outer {
        let start = match &prev {
            Some(p) => extrapolate(&x, p),
            None => x.clone(),
        };
        let out = fista_anchored(
            a,
            z,
            lambda,
            &start,
            &x,
            step_l,
            cfg.max_inner,
            cfg.rel_tol,
            cfg.nonneg,
        )?;
        total_inner += out.iterations;
        let anchor = std::mem::replace(&mut x, out.x);
        let residual = residual_norm(a, z, &x);
        history.push(OuterStep {
            lambda,
            residual,
            inner_iterations: out.iterations,
            refinement: false,
        });
        log::debug!(
            "outer {outer}: lambda={lambda:e} residual={residual:e} inner={}",
            out.iterations
        );
        if residual <= cfg.epsilon {
            let refined = fista_anchored(
                a,
                z,
                lambda,
                &x,
                &anchor,
                step_l,
                4 * cfg.max_inner,
                cfg.rel_tol,
                cfg.nonneg,
            )?;
            total_inner += refined.iterations;
            let refined_res = residual_norm(a, z, &refined.x);
            history.push(OuterStep {
                lambda,
                residual: refined_res,
                inner_iterations: refined.iterations,
                refinement: true,
            });
            let (estimate, residual) = if refined_res <= cfg.epsilon {
                (refined.x, refined_res)
            } else {
                (x, residual)
            };
            return Ok(SolverResult {
                estimate,
                residual,
                lambda,
                inner_iterations: total_inner,
                outer_iterations: outer,
                converged: true,
                lipschitz: lip.value,
                history,
            });
        }
        prev = Some(anchor);
        lambda *= 0.5;
    }
    let residual = history.last().map_or(z_norm, |h| h.residual);
    Ok(SolverResult {
        estimate: x,
        residual,
        lambda: lambda * 2.0,
        inner_iterations: total_inner,
        outer_iterations: cfg.max_outer,
        converged: false,
        lipschitz: lip.value,
        history,
    })
}
