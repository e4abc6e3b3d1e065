//! l1 concentration of rank-one projections of Hermitian matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{norm, DenseMatrix, LinearOp};
use crate::operators::forward::{block_diagonal, global_rop, interferometric_matrix};
use crate::operators::plan::VisibilityPlan;
use crate::operators::sketch::{SketchDistribution, SketchEnsemble};
use crate::rng::derive_seed;
use crate::sky::SkyImage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub p: usize,
    pub trials: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub ratios: Vec<f64>,
}

impl ConcentrationReport {
    pub fn spread(&self) -> f64 {
        self.max - self.min
    }
}

/// Block-diagonal matrix of the hollowed per-batch interferometric matrices.
pub fn hollow_block_matrix(img: &SkyImage, plan: &VisibilityPlan) -> Result<DenseMatrix> {
    let blocks = (0..plan.num_batches())
        .map(|b| {
            let m = interferometric_matrix(img, plan.positions(b))?;
            let q = m.rows();
            let mut data = m.data().to_vec();
            for j in 0..q {
                data[j * q + j] = Default::default();
            }
            DenseMatrix::new(q, q, data)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(block_diagonal(&blocks))
}

/// `(1/P) sum_p |alpha_p^* J beta_p| / ||J||_F` with fresh sketches.
pub fn rop_l1_ratio(j: &DenseMatrix, p: usize, distribution: SketchDistribution, seed: u64) -> Result<f64> {
    let fro = j.frobenius();
    if fro == 0.0 {
        return Err(Error::Argument("zero matrix has no concentration ratio".into()));
    }
    let s = SketchEnsemble::draw(j.rows(), p, 1, 1, distribution, seed)?;
    let l1: f64 = (0..p)
        .map(|pi| global_rop(j, s.alpha(0, pi), s.beta(0, pi)).norm())
        .sum();
    Ok(l1 / p as f64 / fro)
}

/// For each `P`, `trials` ratios cycling through `matrices` (zero matrices
/// skipped) with independent sketches.
pub fn measure_rop_concentration(
    matrices: &[DenseMatrix],
    p_list: &[usize],
    trials: usize,
    distribution: SketchDistribution,
    seed: u64,
) -> Result<Vec<ConcentrationReport>> {
    let usable: Vec<&DenseMatrix> = matrices.iter().filter(|m| norm(m.data()) > 0.0).collect();
    if usable.is_empty() || trials == 0 {
        return Err(Error::Argument(
            "need at least one nonzero matrix and one trial".into(),
        ));
    }
    p_list
        .iter()
        .map(|&p| {
            let mut ratios = (0..trials)
                .map(|t| {
                    let m = usable[t % usable.len()];
                    rop_l1_ratio(m, p, distribution, derive_seed(seed, &[p as u64, t as u64]))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut sorted = ratios.clone();
            sorted.sort_by(f64::total_cmp);
            let median = sorted[sorted.len() / 2];
            ratios.shrink_to_fit();
            Ok(ConcentrationReport {
                p,
                trials,
                min: sorted[0],
                median,
                max: *sorted.last().unwrap(),
                ratios,
            })
        })
        .collect()
}
