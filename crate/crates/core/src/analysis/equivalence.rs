//! Exactness suites: fast operators against explicitly built dense matrices.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::concentration::hollow_block_matrix;
use crate::error::{Error, Result};
use crate::linop::{adjoint_mismatch, norm, BrokenAdjoint, DenseMatrix, Diagonal, LinearOp, OpRef};
use crate::operators::dft::Dft2;
use crate::operators::forward::{
    block_diagonal, global_rop, interferometric_matrix, irop_centered_operator, mrop_operator, mrop_oracle,
};
use crate::operators::plan::VisibilityPlan;
use crate::operators::postsensing::{BaselineAveraging, GaussianProjection};
use crate::operators::rop::{Modulation, RopBlocks};
use crate::operators::sketch::{SketchDistribution, SketchEnsemble};
use crate::operators::visibility::{hollow_mask, Backend, VisibilityOp};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::sky::{random_sparse_sky_with_fov, SkyImage};
use crate::C64;

/// Largest `Q^2 B N` handled by the dense suites.
pub const SUITE_BUDGET: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, error: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            error,
            tolerance,
            passed: error <= tolerance,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn extend(&mut self, other: SuiteReport) {
        self.checks.extend(other.checks);
    }
}

fn rel_err(a: &[C64], b: &[C64]) -> f64 {
    let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(f64::MIN_POSITIVE)
}

/// Random on-band plan with positions in `[-0.2 N1, 0.2 N1]^2` grid units.
pub fn random_grid_plan(q: usize, b: usize, n1: usize, fov: f64, seed: u64) -> Result<VisibilityPlan> {
    let mut rng = rng_from_seed(seed);
    let h = 0.2 * n1 as f64;
    let positions = (0..b)
        .map(|_| {
            (0..q)
                .map(|_| [rng.random_range(-h..h), rng.random_range(-h..h)])
                .collect()
        })
        .collect();
    VisibilityPlan::from_grid_positions(positions, n1, fov, true)
}

/// Dense `G F` from the closed-form entries.
fn dense_visibility(plan: &VisibilityPlan) -> DenseMatrix {
    let n1 = plan.n1();
    let n = plan.num_pixels();
    let half = (n1 / 2) as f64;
    let w = plan.quadrature_weight();
    let freqs = plan.frequencies();
    let mut data = Vec::with_capacity(freqs.len() * n);
    for chi in &freqs {
        for r in 0..n1 {
            for c in 0..n1 {
                let ph = (chi[0] * (c as f64 - half) + chi[1] * (r as f64 - half)) / n1 as f64;
                data.push(C64::cis(-std::f64::consts::TAU * ph) * w);
            }
        }
    }
    DenseMatrix::new(freqs.len(), n, data).expect("sized above")
}

/// Dense `D`: row `(b, p)` holds `conj(vec(alpha beta^*))` on block `b`.
fn dense_rop(s: &SketchEnsemble) -> DenseMatrix {
    let (q, p, nb) = (s.num_antennas(), s.num_sketches(), s.num_batches());
    let cols = q * q * nb;
    let mut data = vec![C64::default(); p * nb * cols];
    for b in 0..nb {
        for pi in 0..p {
            let row = &mut data[(b * p + pi) * cols..(b * p + pi + 1) * cols];
            for j in 0..q {
                for k in 0..q {
                    row[b * q * q + j * q + k] = (s.alpha(b, pi)[j] * s.beta(b, pi)[k].conj()).conj();
                }
            }
        }
    }
    DenseMatrix::new(p * nb, cols, data).expect("sized above")
}

/// Dense `Gamma^T (x) I_P`.
fn dense_modulation(s: &SketchEnsemble) -> DenseMatrix {
    let (p, nb, m) = (s.num_sketches(), s.num_batches(), s.num_modulations());
    let mut data = vec![C64::default(); p * m * p * nb];
    for mi in 0..m {
        for b in 0..nb {
            for i in 0..p {
                data[(mi * p + i) * (p * nb) + b * p + i] = C64::new(s.gamma(b, mi), 0.0);
            }
        }
    }
    DenseMatrix::new(p * m, p * nb, data).expect("sized above")
}

/// Cross-checks of the imaging model at desk scale (NUDFT path): Gram-form
/// batch matrices, ROP of the block-diagonal matrix with plain and
/// modulation-signed sketches, dense matrix products, and the hollow
/// Frobenius identity.
pub fn verify_appendix_equivalences(
    q: usize,
    b: usize,
    n1: usize,
    p: usize,
    m: usize,
    seed: u64,
) -> Result<SuiteReport> {
    if q * q * b * n1 * n1 > SUITE_BUDGET {
        return Err(Error::ResourceGuard(format!(
            "Q^2 B N = {} exceeds the suite budget {SUITE_BUDGET}",
            q * q * b * n1 * n1
        )));
    }
    let tol = 1e-10;
    let fov = SkyImage::unit_gain_fov(n1);
    let plan = random_grid_plan(q, b, n1, fov, derive_seed(seed, &[0]))?;
    let k = (n1 * n1 / 10).max(1);
    let img = random_sparse_sky_with_fov(n1, fov, k, derive_seed(seed, &[stream::SKY]))?;
    let s = Arc::new(SketchEnsemble::draw(
        q,
        p,
        b,
        m,
        SketchDistribution::PhaseOnly,
        derive_seed(seed, &[stream::SKETCH]),
    )?);
    let mut report = SuiteReport::default();

    let vis = VisibilityOp::new(&plan, Backend::Nudft)?;
    let v = vis.apply_real(img.values())?;
    let blocks = (0..b)
        .map(|bi| interferometric_matrix(&img, plan.positions(bi)))
        .collect::<Result<Vec<_>>>()?;
    let gram: Vec<C64> = blocks.iter().flat_map(|m| m.data().to_vec()).collect();
    report.checks.push(Check::new(
        "gram form equals direct visibilities",
        rel_err(&gram, &v),
        tol,
    ));

    let total = block_diagonal(&blocks);
    let integrated = s.integrated();
    let plain: Vec<C64> = (0..p)
        .map(|pi| {
            let a: Vec<C64> = (0..b).flat_map(|bi| integrated.alpha(bi, pi).to_vec()).collect();
            let bb: Vec<C64> = (0..b).flat_map(|bi| integrated.beta(bi, pi).to_vec()).collect();
            global_rop(&total, &a, &bb)
        })
        .collect();
    let irop = mrop_operator(&plan, Arc::new(integrated), Backend::Nudft)?.apply_real(img.values())?;
    report
        .checks
        .push(Check::new("IROP equals global ROP", rel_err(&irop, &plain), tol));

    let mrop_op = mrop_operator(&plan, s.clone(), Backend::Nudft)?;
    let mrop = mrop_op.apply_real(img.values())?;
    report.checks.push(Check::new(
        "MROP equals global ROP with signed sketches",
        rel_err(&mrop, &mrop_oracle(&img, &plan, &s)?),
        tol,
    ));

    let dense = dense_modulation(&s).matmul(&dense_rop(&s).matmul(&dense_visibility(&plan))?)?;
    let fast = DenseMatrix::from_op(&mrop_op);
    report.checks.push(Check::new(
        "MROP equals dense matrix product",
        fast.max_abs_diff(&dense) / dense.frobenius(),
        tol,
    ));

    let hollow = hollow_block_matrix(&img, &plan)?;
    let g0 = VisibilityOp::new(&plan.with_dc(false), Backend::Nudft)?.apply_real(img.values())?;
    let fro = hollow.frobenius();
    report.checks.push(Check::new(
        "hollow Frobenius norm equals l2 norm",
        (fro - norm(&g0)).abs() / fro.max(f64::MIN_POSITIVE),
        tol,
    ));
    Ok(report)
}

/// `<A x, y> = <x, A^* y>` for every operator and composition built on `plan`.
/// `fault` wraps the MROP operator in a deliberately wrong adjoint.
pub fn run_adjoint_suite(
    plan: &VisibilityPlan,
    sketches: Arc<SketchEnsemble>,
    trials: usize,
    seed: u64,
    fault: bool,
) -> Result<SuiteReport> {
    let tol = 1e-10;
    let full = plan.with_dc(true);
    let mut mrop: OpRef = Arc::new(mrop_operator(&full, sketches.clone(), Backend::Nufft)?);
    if fault {
        mrop = Arc::new(BrokenAdjoint::new(mrop));
    }
    let ops: Vec<(&str, OpRef)> = vec![
        ("dft2", Arc::new(Dft2::new(plan.n1()))),
        (
            "visibility (nudft)",
            Arc::new(VisibilityOp::new(&full, Backend::Nudft)?),
        ),
        (
            "visibility (nufft)",
            Arc::new(VisibilityOp::new(&full, Backend::Nufft)?),
        ),
        (
            "hollow visibility",
            Arc::new(VisibilityOp::new(&full.with_dc(false), Backend::Nufft)?),
        ),
        (
            "hollow mask",
            Arc::new(Diagonal::new(hollow_mask(
                plan.num_antennas(),
                plan.num_batches(),
            ))),
        ),
        ("rop blocks", Arc::new(RopBlocks::new(sketches.clone()))),
        ("modulation", Arc::new(Modulation::new(sketches.clone()))),
        ("mrop", mrop),
        (
            "mrop (nudft)",
            Arc::new(mrop_operator(&full, sketches.clone(), Backend::Nudft)?),
        ),
        (
            "centered irop",
            Arc::new(irop_centered_operator(&full, &sketches, Backend::Nufft)?),
        ),
        (
            "gaussian postsensing",
            Arc::new(GaussianProjection::new(
                sketches.num_sketches(),
                full.num_rows(),
                seed,
            )),
        ),
        (
            "baseline averaging",
            Arc::new(BaselineAveraging::new(&full, full.max_frequency() / 2.0, 2)?),
        ),
    ];
    let checks = ops
        .into_iter()
        .enumerate()
        .map(|(i, (name, op))| {
            let err = adjoint_mismatch(&*op, trials, derive_seed(seed, &[i as u64]));
            Check::new(format!("adjoint consistency: {name}"), err, tol)
        })
        .collect();
    Ok(SuiteReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_scale_suite_passes() {
        let r = verify_appendix_equivalences(4, 3, 8, 5, 2, 1).unwrap();
        assert!(r.passed(), "{:?}", r.failures());
        assert_eq!(r.checks.len(), 5);
        let r = verify_appendix_equivalences(3, 1, 8, 2, 1, 2).unwrap();
        assert!(r.passed());
        assert!(verify_appendix_equivalences(30, 30, 64, 2, 1, 2).is_err());
    }

    #[test]
    fn adjoint_suite_detects_faults() {
        let plan = random_grid_plan(4, 3, 8, 2.0, 3).unwrap();
        let s = Arc::new(SketchEnsemble::draw(4, 3, 3, 2, SketchDistribution::PhaseOnly, 4).unwrap());
        let ok = run_adjoint_suite(&plan, s.clone(), 5, 1, false).unwrap();
        assert!(ok.passed(), "{:?}", ok.failures());
        let bad = run_adjoint_suite(&plan, s, 5, 1, true).unwrap();
        assert_eq!(bad.failures().len(), 1);
        assert_eq!(bad.failures()[0].name, "adjoint consistency: mrop");
    }
}
