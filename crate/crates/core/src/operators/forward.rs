//! Complete imaging models and their dense oracles.

use std::sync::Arc;

use super::plan::VisibilityPlan;
use super::rop::{Modulation, RopBlocks};
use super::sketch::SketchEnsemble;
use super::visibility::{hollow_mask, Backend, VisibilityOp};
use crate::error::{check_len, Error, Result};
use crate::linop::{DenseMatrix, Diagonal, LinearOp, OpRef, Pipeline};
use crate::sky::SkyImage;
use crate::C64;

/// Largest `Q x N` steering matrix the dense oracles will build.
pub const ORACLE_BUDGET: usize = 100_000_000;

fn check_sketches(plan: &VisibilityPlan, sketches: &SketchEnsemble) -> Result<()> {
    check_len(
        plan.num_antennas(),
        sketches.num_antennas(),
        "sketch length (antennas)",
    )?;
    check_len(plan.num_batches(), sketches.num_batches(), "sketched batches")
}

/// `Phi = M D G F`: image to `P M` modulated ROPs, index `m P + p`.
pub fn mrop_operator(
    plan: &VisibilityPlan,
    sketches: Arc<SketchEnsemble>,
    backend: Backend,
) -> Result<Pipeline> {
    check_sketches(plan, &sketches)?;
    let vis: OpRef = Arc::new(VisibilityOp::new(&plan.with_dc(true), backend)?);
    Pipeline::new(vec![
        vis,
        Arc::new(RopBlocks::new(sketches.clone())),
        Arc::new(Modulation::new(sketches)),
    ])
}

/// `R G_0 F`: ROPs of the hollowed matrices summed over batches (no modulation).
pub fn irop_centered_operator(
    plan: &VisibilityPlan,
    sketches: &SketchEnsemble,
    backend: Backend,
) -> Result<Pipeline> {
    check_sketches(plan, sketches)?;
    let integrated = Arc::new(sketches.integrated());
    let vis: OpRef = Arc::new(VisibilityOp::new(&plan.with_dc(true), backend)?);
    Pipeline::new(vec![
        vis,
        Arc::new(Diagonal::new(hollow_mask(
            plan.num_antennas(),
            plan.num_batches(),
        ))),
        Arc::new(RopBlocks::new(integrated.clone())),
        Arc::new(Modulation::new(integrated)),
    ])
}

/// Response of an image-domain operator to the pure-DC spectrum `e_0`,
/// i.e. to the constant image `1 / N1`.
pub fn dc_template(op: &dyn LinearOp, side: usize) -> Result<Vec<C64>> {
    check_len(side * side, op.cols(), "dc template image")?;
    op.apply_real(&vec![1.0 / side as f64; side * side])
}

/// `z - x0 * template`.
pub fn center_measurements(z: &[C64], dc: f64, template: &[C64]) -> Result<Vec<C64>> {
    check_len(z.len(), template.len(), "dc template")?;
    Ok(z.iter().zip(template).map(|(a, t)| a - t * dc).collect())
}

/// Interferometric matrix of one batch as the Gram form `Gamma D_x Gamma^*`,
/// `Gamma_qn = Delta exp(+i 2 pi omega_q . s_n / N1)`, built explicitly.
pub fn interferometric_matrix(img: &SkyImage, positions: &[[f64; 2]]) -> Result<DenseMatrix> {
    let (q, n1, n) = (positions.len(), img.side(), img.num_pixels());
    if q * n > ORACLE_BUDGET {
        return Err(Error::ResourceGuard(format!(
            "steering matrix of {q} x {n} exceeds {ORACLE_BUDGET} entries"
        )));
    }
    let delta = img.pixel_size();
    let half = (n1 / 2) as f64;
    let mut gamma = vec![C64::default(); q * n];
    for (qi, w) in positions.iter().enumerate() {
        for r in 0..n1 {
            for c in 0..n1 {
                let phase = (w[0] * (c as f64 - half) + w[1] * (r as f64 - half)) / n1 as f64;
                gamma[qi * n + r * n1 + c] = C64::cis(std::f64::consts::TAU * phase) * delta;
            }
        }
    }
    let x = img.values();
    let mut out = vec![C64::default(); q * q];
    for j in 0..q {
        for k in 0..q {
            let gj = &gamma[j * n..(j + 1) * n];
            let gk = &gamma[k * n..(k + 1) * n];
            out[j * q + k] = gj
                .iter()
                .zip(gk)
                .zip(x)
                .map(|((a, b), xv)| a * b.conj() * xv)
                .sum();
        }
    }
    DenseMatrix::new(q, q, out)
}

pub fn block_diagonal(blocks: &[DenseMatrix]) -> DenseMatrix {
    let dim: usize = blocks.iter().map(|b| b.rows()).sum();
    let mut data = vec![C64::default(); dim * dim];
    let mut o = 0;
    for blk in blocks {
        for i in 0..blk.rows() {
            for j in 0..blk.cols() {
                data[(o + i) * dim + o + j] = blk.get(i, j);
            }
        }
        o += blk.rows();
    }
    DenseMatrix::new(dim, dim, data).expect("square by construction")
}

/// `alpha^* C beta` for a dense matrix.
pub fn global_rop(c: &DenseMatrix, alpha: &[C64], beta: &[C64]) -> C64 {
    super::rop::rop(alpha, c.data(), beta)
}

/// Global sketches whose ROP of the block-diagonal matrix reproduces MROP
/// output `(m, p)`: `alpha = [gamma_1m alpha_1p; ...; gamma_Bm alpha_Bp]`,
/// `beta = [beta_1p; ...; beta_Bp]`.
pub fn structured_sketches(s: &SketchEnsemble, m: usize, p: usize) -> (Vec<C64>, Vec<C64>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for batch in 0..s.num_batches() {
        let g = s.gamma(batch, m);
        a.extend(s.alpha(batch, p).iter().map(|v| v * g));
        b.extend_from_slice(s.beta(batch, p));
    }
    (a, b)
}

/// MROP measurements computed as global ROPs of the block-diagonal
/// interferometric matrix.
pub fn mrop_oracle(img: &SkyImage, plan: &VisibilityPlan, s: &SketchEnsemble) -> Result<Vec<C64>> {
    check_sketches(plan, s)?;
    let blocks = (0..plan.num_batches())
        .map(|b| interferometric_matrix(img, plan.positions(b)))
        .collect::<Result<Vec<_>>>()?;
    let total = block_diagonal(&blocks);
    let mut z = Vec::with_capacity(s.num_sketches() * s.num_modulations());
    for m in 0..s.num_modulations() {
        for p in 0..s.num_sketches() {
            let (a, b) = structured_sketches(s, m, p);
            z.push(global_rop(&total, &a, &b));
        }
    }
    Ok(z)
}
