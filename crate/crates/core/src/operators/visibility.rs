//! The visibility map `G F`: sky image to interferometric matrix entries.

use serde::{Deserialize, Serialize};

use super::nufft::{KaiserBessel, Nudft, Nufft};
use super::plan::VisibilityPlan;
use crate::error::Result;
use crate::linop::LinearOp;
use crate::C64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Exact direct sums.
    Nudft,
    /// Kaiser-Bessel gridding.
    #[default]
    Nufft,
}

/// Image (`N` real or complex pixels) to the stacked per-batch matrices
/// `vec(I_b)`, `v_jk = Delta^2 sum_n x_n exp(-i 2 pi chi_jk . s_n / N1)`.
/// Rows follow [`VisibilityPlan::pairs`] within each batch.
pub struct VisibilityOp {
    weight: f64,
    inner: Box<dyn LinearOp>,
}

impl VisibilityOp {
    pub fn new(plan: &VisibilityPlan, backend: Backend) -> Result<Self> {
        let freqs = plan.frequencies();
        let inner: Box<dyn LinearOp> = match backend {
            Backend::Nudft => Box::new(Nudft::new(plan.n1(), freqs)?),
            Backend::Nufft => Box::new(Nufft::new(plan.n1(), &freqs, KaiserBessel::default())?),
        };
        Ok(VisibilityOp {
            weight: plan.quadrature_weight(),
            inner,
        })
    }
}

impl LinearOp for VisibilityOp {
    fn rows(&self) -> usize {
        self.inner.rows()
    }
    fn cols(&self) -> usize {
        self.inner.cols()
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        self.inner.forward(x, out);
        out.iter_mut().for_each(|v| *v *= self.weight);
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        self.inner.adjoint(y, out);
        out.iter_mut().for_each(|v| *v *= self.weight);
    }
}

/// 0/1 mask zeroing the diagonal rows of every batch (`G_0` as a projection
/// on the full `Q^2 B` visibility vector).
pub fn hollow_mask(num_antennas: usize, num_batches: usize) -> Vec<f64> {
    let q = num_antennas;
    (0..num_batches * q * q)
        .map(|i| {
            let r = i % (q * q);
            if r / q == r % q {
                0.0
            } else {
                1.0
            }
        })
        .collect()
}
