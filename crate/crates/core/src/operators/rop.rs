//! Rank-one projections `y_pb = alpha_pb^* V_b beta_pb` and modulated aggregation.

use std::sync::Arc;

use super::sketch::SketchEnsemble;
use crate::error::{check_len, Result};
use crate::linop::LinearOp;
use crate::C64;

/// `alpha^* V beta` for a row-major `Q x Q` matrix, as two matrix-vector products.
pub fn rop(alpha: &[C64], v: &[C64], beta: &[C64]) -> C64 {
    let q = alpha.len();
    v.chunks_exact(q)
        .zip(alpha)
        .map(|(row, a)| a.conj() * row.iter().zip(beta).map(|(x, b)| x * b).sum::<C64>())
        .sum()
}

/// ROPs of a single batch matrix `v_b` (length `Q^2`).
pub fn rop_block(sketches: &SketchEnsemble, batch: usize, v: &[C64]) -> Result<Vec<C64>> {
    let q = sketches.num_antennas();
    check_len(q * q, v.len(), "batch visibilities")?;
    Ok((0..sketches.num_sketches())
        .map(|p| rop(sketches.alpha(batch, p), v, sketches.beta(batch, p)))
        .collect())
}

/// Block-diagonal ROP operator `D = diag(R_1, ..., R_B)`: `C^{Q^2 B} -> C^{P B}`,
/// output index `b P + p`.
pub struct RopBlocks {
    sketches: Arc<SketchEnsemble>,
}

impl RopBlocks {
    pub fn new(sketches: Arc<SketchEnsemble>) -> Self {
        RopBlocks { sketches }
    }
}

impl LinearOp for RopBlocks {
    fn rows(&self) -> usize {
        self.sketches.num_sketches() * self.sketches.num_batches()
    }
    fn cols(&self) -> usize {
        let q = self.sketches.num_antennas();
        q * q * self.sketches.num_batches()
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        let s = &*self.sketches;
        let (q, np) = (s.num_antennas(), s.num_sketches());
        for (b, v) in x.chunks_exact(q * q).enumerate() {
            for p in 0..np {
                out[b * np + p] = rop(s.alpha(b, p), v, s.beta(b, p));
            }
        }
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        let s = &*self.sketches;
        let (q, np) = (s.num_antennas(), s.num_sketches());
        out.fill(C64::default());
        for (b, v) in out.chunks_exact_mut(q * q).enumerate() {
            for p in 0..np {
                let yp = y[b * np + p];
                let beta = s.beta(b, p);
                for (row, a) in v.chunks_exact_mut(q).zip(s.alpha(b, p)) {
                    let w = a * yp;
                    for (o, bk) in row.iter_mut().zip(beta) {
                        *o += w * bk.conj();
                    }
                }
            }
        }
    }
}

/// `M = Gamma^T (x) I_P`: `z_m = sum_b gamma_bm y_b`, `C^{P B} -> C^{P M}`.
pub struct Modulation {
    sketches: Arc<SketchEnsemble>,
}

impl Modulation {
    pub fn new(sketches: Arc<SketchEnsemble>) -> Self {
        Modulation { sketches }
    }
}

impl LinearOp for Modulation {
    fn rows(&self) -> usize {
        self.sketches.num_sketches() * self.sketches.num_modulations()
    }
    fn cols(&self) -> usize {
        self.sketches.num_sketches() * self.sketches.num_batches()
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        let s = &*self.sketches;
        let np = s.num_sketches();
        out.fill(C64::default());
        for (m, zm) in out.chunks_exact_mut(np).enumerate() {
            for (b, yb) in x.chunks_exact(np).enumerate() {
                let g = s.gamma(b, m);
                for (o, v) in zm.iter_mut().zip(yb) {
                    *o += v * g;
                }
            }
        }
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        let s = &*self.sketches;
        let np = s.num_sketches();
        out.fill(C64::default());
        for (b, xb) in out.chunks_exact_mut(np).enumerate() {
            for (m, zm) in y.chunks_exact(np).enumerate() {
                let g = s.gamma(b, m);
                for (o, v) in xb.iter_mut().zip(zm) {
                    *o += v * g;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{adjoint_mismatch, random_complex, DenseMatrix};
    use crate::operators::sketch::SketchDistribution;
    use crate::rng::rng_from_seed;

    fn ensemble(q: usize, p: usize, b: usize, m: usize) -> Arc<SketchEnsemble> {
        Arc::new(SketchEnsemble::draw(q, p, b, m, SketchDistribution::PhaseOnly, 9).unwrap())
    }

    #[test]
    fn canonical_sketches_select_entries() {
        let q = 3;
        let e = |i: usize| {
            let mut v = vec![C64::default(); q];
            v[i] = C64::new(1.0, 0.0);
            v
        };
        let s = SketchEnsemble::from_parts(q, 1, 1, 1, e(0), e(2), vec![1.0]).unwrap();
        let v: Vec<C64> = (0..9).map(|i| C64::new(i as f64, -(i as f64))).collect();
        assert_eq!(rop_block(&s, 0, &v).unwrap()[0], v[2]);
    }

    #[test]
    fn matches_dense_rows() {
        // Dense reference: row p of R_b is conj(vec(alpha beta^*)).
        let (q, p) = (4, 6);
        let s = ensemble(q, p, 1, 1);
        let mut rng = rng_from_seed(2);
        let v = random_complex(&mut rng, q * q);
        let y = rop_block(&s, 0, &v).unwrap();
        for (pi, yp) in y.iter().enumerate() {
            let (a, b) = (s.alpha(0, pi), s.beta(0, pi));
            let mut dense = C64::default();
            for j in 0..q {
                for k in 0..q {
                    dense += (a[j] * b[k].conj()).conj() * v[j * q + k];
                }
            }
            assert!((dense - yp).norm() < 1e-12);
        }
    }

    #[test]
    fn modulation_matches_kronecker() {
        let (p, b, m) = (3, 4, 2);
        let s = ensemble(2, p, b, m);
        let op = Modulation::new(s.clone());
        let mut data = vec![C64::default(); p * m * p * b];
        for mi in 0..m {
            for bi in 0..b {
                for i in 0..p {
                    data[(mi * p + i) * (p * b) + bi * p + i] = C64::new(s.gamma(bi, mi), 0.0);
                }
            }
        }
        let kron = DenseMatrix::new(p * m, p * b, data).unwrap();
        assert!(DenseMatrix::from_op(&op).max_abs_diff(&kron) < 1e-15);
    }

    #[test]
    fn unit_gamma_sums_batches() {
        let s = Arc::new(ensemble(2, 2, 3, 2).integrated());
        let op = Modulation::new(s);
        let y: Vec<C64> = (0..6).map(|i| C64::new(i as f64, 1.0)).collect();
        let z = op.apply(&y).unwrap();
        assert_eq!(z, vec![C64::new(6.0, 3.0), C64::new(9.0, 3.0)]);
    }

    #[test]
    fn adjoints() {
        let s = ensemble(4, 5, 3, 2);
        assert!(adjoint_mismatch(&RopBlocks::new(s.clone()), 20, 0) < 1e-12);
        assert!(adjoint_mismatch(&Modulation::new(s), 20, 0) < 1e-12);
    }
}
