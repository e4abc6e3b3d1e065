//! Post-sensing reductions of the full visibility vector: dense Gaussian
//! projections, baseline-dependent averaging, and additive visibility noise.

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::plan::VisibilityPlan;
use crate::error::{check_len, Error, Result};
use crate::linop::LinearOp;
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::C64;

/// `A in C^{P x n}` with i.i.d. `CN(0, 1/P)` entries, regenerated row by
/// row from the seed on every application instead of being stored.
pub struct GaussianProjection {
    rows: usize,
    cols: usize,
    seed: u64,
}

impl GaussianProjection {
    pub fn new(rows: usize, cols: usize, seed: u64) -> Self {
        GaussianProjection { rows, cols, seed }
    }

    fn row(&self, i: usize, buf: &mut [C64]) {
        let mut rng = rng_from_seed(derive_seed(self.seed, &[stream::GAUSSIAN_PROJECTION, i as u64]));
        let s = (0.5 / self.rows as f64).sqrt();
        for v in buf.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v = C64::new(re * s, im * s);
        }
    }
}

impl LinearOp for GaussianProjection {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        let mut buf = vec![C64::default(); self.cols];
        for (i, o) in out.iter_mut().enumerate() {
            self.row(i, &mut buf);
            *o = buf.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        let mut buf = vec![C64::default(); self.cols];
        out.fill(C64::default());
        for (i, yi) in y.iter().enumerate() {
            self.row(i, &mut buf);
            for (o, a) in out.iter_mut().zip(&buf) {
                *o += a.conj() * yi;
            }
        }
    }
}

pub fn gaussian_postsensing(seed: u64, v: &[C64], p: usize) -> Vec<C64> {
    GaussianProjection::new(p, v.len(), seed)
        .apply(v)
        .expect("length taken from input")
}

/// Averages low-frequency baselines over groups of consecutive batches.
///
/// A pair `(j, k)` is averaged within a group when its frequency stays below
/// `threshold` (grid units) in every batch of the group; it is then emitted
/// once, at the position of the group's first batch. Other rows pass through
/// unchanged, so a zero threshold is the identity. A trailing short group is
/// averaged over its actual length.
pub struct BaselineAveraging {
    cols: usize,
    /// For every output row, the input rows it averages.
    sources: Vec<Vec<usize>>,
}

impl BaselineAveraging {
    pub fn new(plan: &VisibilityPlan, threshold: f64, group_size: usize) -> Result<Self> {
        if group_size == 0 {
            return Err(Error::Argument("averaging group size must be positive".into()));
        }
        let rpb = plan.rows_per_batch();
        let freqs: Vec<Vec<[f64; 2]>> = (0..plan.num_batches())
            .map(|b| plan.batch_frequencies(b))
            .collect();
        let mut sources = Vec::new();
        let batches: Vec<usize> = (0..plan.num_batches()).collect();
        for group in batches.chunks(group_size) {
            let low: Vec<bool> = (0..rpb)
                .map(|r| {
                    group
                        .iter()
                        .all(|&b| freqs[b][r][0].hypot(freqs[b][r][1]) < threshold)
                })
                .collect();
            for (gi, &b) in group.iter().enumerate() {
                for (r, &is_low) in low.iter().enumerate() {
                    if !is_low {
                        sources.push(vec![b * rpb + r]);
                    } else if gi == 0 {
                        sources.push(group.iter().map(|&bb| bb * rpb + r).collect());
                    }
                }
            }
        }
        Ok(BaselineAveraging {
            cols: plan.num_rows(),
            sources,
        })
    }
}

impl LinearOp for BaselineAveraging {
    fn rows(&self) -> usize {
        self.sources.len()
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        for (o, src) in out.iter_mut().zip(&self.sources) {
            *o = src.iter().map(|&i| x[i]).sum::<C64>() / src.len() as f64;
        }
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        out.fill(C64::default());
        for (yi, src) in y.iter().zip(&self.sources) {
            let w = yi / src.len() as f64;
            for &i in src {
                out[i] += w;
            }
        }
    }
}

/// Adds `CN(0, sigma^2)` noise to every batch matrix `vec(V_b)` (length
/// `Q^2` each), mirrored so each perturbed matrix stays Hermitian. Diagonal
/// entries receive real `N(0, sigma^2)` noise.
pub fn add_visibility_noise(v: &[C64], num_antennas: usize, sigma: f64, seed: u64) -> Result<Vec<C64>> {
    if !(sigma >= 0.0) {
        return Err(Error::Argument(format!(
            "noise level must be nonnegative, got {sigma}"
        )));
    }
    let q = num_antennas;
    if q == 0 || !v.len().is_multiple_of(q * q) {
        return Err(Error::Argument(
            "visibility length is not a multiple of Q^2".into(),
        ));
    }
    let mut out = v.to_vec();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = rng_from_seed(derive_seed(seed, &[stream::NOISE]));
    let s = sigma * std::f64::consts::FRAC_1_SQRT_2;
    for block in out.chunks_exact_mut(q * q) {
        for j in 0..q {
            let d: f64 = rng.sample(StandardNormal);
            block[j * q + j] += d * sigma;
            for k in j + 1..q {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                let n = C64::new(re * s, im * s);
                block[j * q + k] += n;
                block[k * q + j] += n.conj();
            }
        }
    }
    check_len(v.len(), out.len(), "noisy visibilities")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_vla_like, synthesize_batches, ArrayLayout};
    use crate::linop::{adjoint_mismatch, norm, random_complex};

    fn plan() -> VisibilityPlan {
        let layout = ArrayLayout::new(make_vla_like(2, 800.0).unwrap(), 0.21, 4).unwrap();
        VisibilityPlan::from_batches(&synthesize_batches(&layout), 16, 4.0, 0.9, false).unwrap()
    }

    #[test]
    fn gaussian_projection_is_isometric_on_average() {
        let mut rng = rng_from_seed(1);
        let v = random_complex(&mut rng, 40);
        let mean: f64 = (0..500)
            .map(|s| norm(&gaussian_postsensing(s, &v, 20)).powi(2))
            .sum::<f64>()
            / 500.0;
        assert!((mean / norm(&v).powi(2) - 1.0).abs() < 0.1);
        assert!(gaussian_postsensing(3, &[C64::default(); 5], 4)
            .iter()
            .all(|z| z.norm() == 0.0));
        assert!(adjoint_mismatch(&GaussianProjection::new(7, 11, 2), 20, 0) < 1e-12);
    }

    #[test]
    fn averaging_limits() {
        let p = plan();
        let mut rng = rng_from_seed(2);
        let v = random_complex(&mut rng, p.num_rows());

        let id = BaselineAveraging::new(&p, 0.0, 2).unwrap();
        assert_eq!(id.apply(&v).unwrap(), v);

        let all = BaselineAveraging::new(&p, f64::INFINITY, p.num_batches()).unwrap();
        assert_eq!(all.rows(), 30);

        // Batch-constant visibilities average losslessly.
        let rpb = p.rows_per_batch();
        let constant: Vec<C64> = (0..p.num_rows()).map(|i| v[i % rpb]).collect();
        let y = all.apply(&constant).unwrap();
        assert!(y.iter().zip(&v).all(|(a, b)| (a - b).norm() < 1e-14));

        let partial = BaselineAveraging::new(&p, 3.0, 3).unwrap();
        assert!(adjoint_mismatch(&partial, 20, 0) < 1e-12);
        assert!(adjoint_mismatch(&all, 20, 0) < 1e-12);
    }

    #[test]
    fn visibility_noise_is_hermitian_with_target_variance() {
        let q = 4;
        let zero = vec![C64::default(); q * q * 2];
        assert_eq!(add_visibility_noise(&zero, q, 0.0, 1).unwrap(), zero);
        let n = add_visibility_noise(&zero, q, 1.0, 1).unwrap();
        for b in n.chunks_exact(q * q) {
            for j in 0..q {
                for k in 0..q {
                    assert_eq!(b[j * q + k], b[k * q + j].conj());
                }
            }
        }
        let big = vec![C64::default(); q * q * 1000];
        let n = add_visibility_noise(&big, q, 0.5, 9).unwrap();
        let var = n.iter().map(|z| z.norm_sqr()).sum::<f64>() / n.len() as f64;
        assert!((var / 0.25 - 1.0).abs() < 0.1, "{var}");
        assert!(add_visibility_noise(&big, q, -1.0, 9).is_err());
    }
}
