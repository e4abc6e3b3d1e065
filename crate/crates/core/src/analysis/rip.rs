//! Empirical norm-preservation of the visibility map on sparse vectors.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{norm, LinearOp};
use crate::operators::plan::VisibilityPlan;
use crate::operators::visibility::{Backend, VisibilityOp};
use crate::rng::rng_from_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RipReport {
    pub sparsity: usize,
    pub trials: usize,
    /// `max |ratio - 1|`.
    pub distortion: f64,
    /// `N / (varpi^2 V)`.
    pub scaling: f64,
    /// `scaling * ||G_0 F v||^2` for unit-norm sparse `v`.
    pub ratios: Vec<f64>,
}

/// Unit-norm `k`-sparse real vector with Rademacher values on a uniform support.
pub fn random_sparse_unit(rng: &mut crate::rng::Rng, n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    let a = 1.0 / (k as f64).sqrt();
    for i in sample(rng, n, k) {
        v[i] = if rng.random::<bool>() { a } else { -a };
    }
    v
}

/// Samples `scaling * ||G_0 F v||^2` over random unit `k`-sparse vectors.
pub fn measure_rip_l2l2(
    plan: &VisibilityPlan,
    backend: Backend,
    sparsity: usize,
    trials: usize,
    seed: u64,
) -> Result<RipReport> {
    let hollow = plan.with_dc(false);
    let v_count = hollow.num_rows();
    let n = plan.num_pixels();
    if v_count == 0 || sparsity == 0 || sparsity > n {
        return Err(Error::Argument(format!(
            "need V > 0 and 0 < K0 <= N (V={v_count}, K0={sparsity}, N={n})"
        )));
    }
    let op = VisibilityOp::new(&hollow, backend)?;
    let varpi = plan.visibility_scale();
    let scaling = n as f64 / (varpi * varpi * v_count as f64);
    let mut rng = rng_from_seed(seed);
    let mut ratios = Vec::with_capacity(trials);
    for _ in 0..trials {
        let v = random_sparse_unit(&mut rng, n, sparsity);
        let y = op.apply_real(&v)?;
        ratios.push(scaling * norm(&y).powi(2));
    }
    let distortion = ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    Ok(RipReport {
        sparsity,
        trials,
        distortion,
        scaling,
        ratios,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Bracket {
    pub sparsity: usize,
    pub trials: usize,
    /// Smallest and largest `(1/P) ||A v||_1 / ||v||_2` observed.
    pub lower: f64,
    pub upper: f64,
}

/// Brackets the l2/l1 constants of an operator with `P` outputs on
/// random unit `k`-sparse vectors.
pub fn measure_rip_l2l1(op: &dyn LinearOp, sparsity: usize, trials: usize, seed: u64) -> Result<L1Bracket> {
    let n = op.cols();
    if sparsity == 0 || sparsity > n || trials == 0 {
        return Err(Error::Argument("need 0 < K0 <= N and at least one trial".into()));
    }
    let mut rng = rng_from_seed(seed);
    let (mut lower, mut upper) = (f64::INFINITY, 0.0f64);
    for _ in 0..trials {
        let v = random_sparse_unit(&mut rng, n, sparsity);
        let y = op.apply_real(&v)?;
        let r = y.iter().map(|z| z.norm()).sum::<f64>() / op.rows() as f64;
        lower = lower.min(r);
        upper = upper.max(r);
    }
    Ok(L1Bracket {
        sparsity,
        trials,
        lower,
        upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_vla_like, synthesize_batches, ArrayLayout};

    #[test]
    fn single_pixel_ratio_is_one() {
        let layout = ArrayLayout::new(make_vla_like(2, 700.0).unwrap(), 0.21, 3).unwrap();
        let plan = VisibilityPlan::from_batches(&synthesize_batches(&layout), 16, 3.0, 0.9, true).unwrap();
        let r = measure_rip_l2l2(&plan, Backend::Nudft, 1, 20, 1).unwrap();
        assert!(r.distortion < 1e-10, "{}", r.distortion);
        assert!(r.ratios.iter().all(|x| *x > 0.0));
        assert!(measure_rip_l2l2(&plan, Backend::Nudft, 0, 20, 1).is_err());
    }
}
