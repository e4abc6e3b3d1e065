//! Time-domain simulation of antenna signals and the two acquisition
//! operators: classical (sample covariances) and compressive (beamformed
//! rank-one projections aggregated with +/-1 modulations).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::operators::plan::VisibilityPlan;
use crate::operators::sketch::SketchEnsemble;
use crate::rng::{derive_seed, rng_from_seed, stream, Rng};
use crate::sky::SkyImage;
use crate::C64;

/// Default cap on `Q * N * I` for time-domain simulation.
pub const DEFAULT_SIMULATION_BUDGET: f64 = 1e10;

fn standard_complex(rng: &mut Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Hermitian PSD antenna noise covariance `Sigma_n` with a square-root
/// factor for sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseCovariance {
    q: usize,
    matrix: Vec<C64>,
    factor: Vec<C64>,
}

impl NoiseCovariance {
    pub fn white(q: usize, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::Argument(format!(
                "noise variance must be >= 0, got {sigma2}"
            )));
        }
        let mut matrix = vec![C64::default(); q * q];
        let mut factor = vec![C64::default(); q * q];
        for i in 0..q {
            matrix[i * q + i] = C64::new(sigma2, 0.0);
            factor[i * q + i] = C64::new(sigma2.sqrt(), 0.0);
        }
        Ok(NoiseCovariance { q, matrix, factor })
    }

    pub fn zero(q: usize) -> Self {
        Self::white(q, 0.0).expect("zero variance is valid")
    }

    /// Dense covariance; must be Hermitian and PSD (eigenvalues >= -1e-10).
    pub fn from_matrix(q: usize, matrix: Vec<C64>) -> Result<Self> {
        check_len(q * q, matrix.len(), "noise covariance")?;
        let m = DMatrix::from_row_slice(q, q, &matrix);
        let herm = (&m - m.adjoint()).norm();
        if herm > 1e-12 * m.norm().max(1.0) {
            return Err(Error::Argument("noise covariance is not Hermitian".into()));
        }
        let eig = SymmetricEigen::new(m);
        if eig.eigenvalues.iter().any(|&l| l < -1e-10) {
            return Err(Error::Argument(
                "noise covariance is not positive semidefinite".into(),
            ));
        }
        let sqrt_l = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0)));
        let f = &eig.eigenvectors * sqrt_l;
        let factor = (0..q)
            .flat_map(|r| (0..q).map(move |c| (r, c)))
            .map(|(r, c)| f[(r, c)])
            .collect();
        Ok(NoiseCovariance { q, matrix, factor })
    }

    pub fn num_antennas(&self) -> usize {
        self.q
    }

    pub fn matrix(&self) -> &[C64] {
        &self.matrix
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().all(|z| *z == C64::default())
    }

    fn sample_into(&self, rng: &mut Rng, out: &mut [C64]) {
        let w: Vec<C64> = (0..self.q).map(|_| standard_complex(rng)).collect();
        for (r, o) in out.iter_mut().enumerate() {
            *o += self.factor[r * self.q..(r + 1) * self.q]
                .iter()
                .zip(&w)
                .map(|(f, x)| f * x)
                .sum::<C64>();
        }
    }
}

/// Antenna samples of one batch, stored `(i, q)` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalBatch {
    pub batch_index: usize,
    pub num_antennas: usize,
    pub samples: Vec<C64>,
}

impl SignalBatch {
    pub fn sample_count(&self) -> usize {
        self.samples.len() / self.num_antennas
    }

    pub fn sample(&self, i: usize) -> &[C64] {
        &self.samples[i * self.num_antennas..(i + 1) * self.num_antennas]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleCovariance {
    pub batch_index: usize,
    pub num_antennas: usize,
    /// Row-major `Q x Q`.
    pub matrix: Vec<C64>,
}

pub fn simulate_batch(
    img: &SkyImage,
    plan: &VisibilityPlan,
    batch: usize,
    samples: usize,
    noise: &NoiseCovariance,
    seed: u64,
) -> Result<SignalBatch> {
    simulate_batch_with_budget(img, plan, batch, samples, noise, seed, DEFAULT_SIMULATION_BUDGET)
}

/// `x[i] = A s[i] + n[i]` with `A_qn = exp(+i 2 pi omega_q . s_n / N1)`,
/// `s_n[i] ~ CN(0, x_n Delta^2)` and `n[i] ~ CN(0, Sigma_n)`, so that
/// `E[x x^*]` is the batch interferometric matrix plus `Sigma_n`.
pub fn simulate_batch_with_budget(
    img: &SkyImage,
    plan: &VisibilityPlan,
    batch: usize,
    samples: usize,
    noise: &NoiseCovariance,
    seed: u64,
    budget: f64,
) -> Result<SignalBatch> {
    let q = plan.num_antennas();
    check_len(plan.num_pixels(), img.num_pixels(), "sky pixels")?;
    check_len(q, noise.num_antennas(), "noise covariance antennas")?;
    if batch >= plan.num_batches() {
        return Err(Error::Argument(format!("batch {batch} out of range")));
    }
    if samples == 0 {
        return Err(Error::Argument("sample count must be at least 1".into()));
    }
    let cost = q as f64 * img.num_pixels() as f64 * samples as f64;
    if cost > budget {
        return Err(Error::ResourceGuard(format!(
            "Q*N*I = {cost:e} exceeds the simulation budget {budget:e}"
        )));
    }
    let n1 = img.side();
    let half = (n1 / 2) as f64;
    let dd = img.pixel_size().powi(2);
    let support = img.support();
    let std: Vec<f64> = support.iter().map(|&n| (img.values()[n] * dd).sqrt()).collect();
    let positions = plan.positions(batch);
    let steer: Vec<C64> = positions
        .iter()
        .flat_map(|w| {
            support.iter().map(move |&n| {
                let (r, c) = ((n / n1) as f64 - half, (n % n1) as f64 - half);
                C64::cis(std::f64::consts::TAU * (w[0] * c + w[1] * r) / n1 as f64)
            })
        })
        .collect();
    let k = support.len();
    let mut sig_rng = rng_from_seed(derive_seed(seed, &[stream::SIGNAL, batch as u64]));
    let mut noise_rng = rng_from_seed(derive_seed(seed, &[stream::NOISE, batch as u64]));
    let noiseless = noise.is_zero();
    let mut out = vec![C64::default(); samples * q];
    let mut s = vec![C64::default(); k];
    for x in out.chunks_exact_mut(q) {
        for (v, sd) in s.iter_mut().zip(&std) {
            *v = standard_complex(&mut sig_rng) * *sd;
        }
        for (qi, xq) in x.iter_mut().enumerate() {
            *xq = steer[qi * k..(qi + 1) * k]
                .iter()
                .zip(&s)
                .map(|(a, b)| a * b)
                .sum();
        }
        if !noiseless {
            noise.sample_into(&mut noise_rng, x);
        }
    }
    Ok(SignalBatch {
        batch_index: batch,
        num_antennas: q,
        samples: out,
    })
}

/// `(1/I) sum_i x[i] x[i]^*`, Hermitian by construction.
pub fn sample_covariance(batch: &SignalBatch) -> SampleCovariance {
    let q = batch.num_antennas;
    let mut c = vec![C64::default(); q * q];
    for x in batch.samples.chunks_exact(q) {
        for j in 0..q {
            for k in j..q {
                c[j * q + k] += x[j] * x[k].conj();
            }
        }
    }
    let inv = 1.0 / batch.sample_count() as f64;
    for j in 0..q {
        c[j * q + j] = C64::new(c[j * q + j].re * inv, 0.0);
        for k in j + 1..q {
            c[j * q + k] *= inv;
            c[k * q + j] = c[j * q + k].conj();
        }
    }
    SampleCovariance {
        batch_index: batch.batch_index,
        num_antennas: q,
        matrix: c,
    }
}

fn check_batches(batches: &[SignalBatch], noise: &NoiseCovariance) -> Result<usize> {
    let q = noise.num_antennas();
    if batches.is_empty() {
        return Err(Error::Argument("no batches to acquire".into()));
    }
    for b in batches {
        check_len(q, b.num_antennas, "antennas per batch")?;
        if b.sample_count() == 0 {
            return Err(Error::Argument(format!("batch {} has no samples", b.batch_index)));
        }
    }
    Ok(q)
}

/// `vec(C_b - Sigma_n)` for every batch, concatenated.
pub fn classical_acquire(batches: &[SignalBatch], noise: &NoiseCovariance) -> Result<Vec<C64>> {
    check_batches(batches, noise)?;
    Ok(batches
        .par_iter()
        .map(|b| {
            let c = sample_covariance(b);
            c.matrix
                .iter()
                .zip(noise.matrix())
                .map(|(a, s)| a - s)
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat())
}

/// Streaming compressive acquisition: per sample only the `2P` beamformed
/// outputs `alpha^* x`, `beta^* x` are formed, and their products are
/// accumulated. Returns `z_mp = sum_b gamma_bm (y_pb - alpha^* Sigma_n beta)`
/// with index `m P + p`.
pub fn compressive_acquire(
    batches: &[SignalBatch],
    sketches: &SketchEnsemble,
    noise: &NoiseCovariance,
) -> Result<Vec<C64>> {
    let q = check_batches(batches, noise)?;
    check_len(q, sketches.num_antennas(), "sketch length")?;
    check_len(sketches.num_batches(), batches.len(), "sketched batches")?;
    let np = sketches.num_sketches();
    let per_batch: Vec<Vec<C64>> = batches
        .par_iter()
        .enumerate()
        .map(|(b, batch)| {
            let mut acc = vec![C64::default(); np];
            for x in batch.samples.chunks_exact(q) {
                for (p, a) in acc.iter_mut().enumerate() {
                    let mu: C64 = sketches
                        .alpha(b, p)
                        .iter()
                        .zip(x)
                        .map(|(s, v)| s.conj() * v)
                        .sum();
                    let nu: C64 = sketches.beta(b, p).iter().zip(x).map(|(s, v)| s.conj() * v).sum();
                    *a += mu * nu.conj();
                }
            }
            let inv = 1.0 / batch.sample_count() as f64;
            acc.iter()
                .enumerate()
                .map(|(p, a)| {
                    a * inv
                        - crate::operators::rop::rop(
                            sketches.alpha(b, p),
                            noise.matrix(),
                            sketches.beta(b, p),
                        )
                })
                .collect()
        })
        .collect();
    let nm = sketches.num_modulations();
    let mut z = vec![C64::default(); np * nm];
    for (b, y) in per_batch.iter().enumerate() {
        for m in 0..nm {
            let g = sketches.gamma(b, m);
            for p in 0..np {
                z[m * np + p] += y[p] * g;
            }
        }
    }
    Ok(z)
}

/// DC estimate from antenna autocorrelations:
/// mean over `(q, b)` of `((C_b)_qq - (Sigma_n)_qq) / varpi`.
pub fn estimate_dc(batches: &[SignalBatch], noise: &NoiseCovariance, varpi: f64) -> Result<f64> {
    let q = check_batches(batches, noise)?;
    if !(varpi > 0.0) {
        return Err(Error::Argument(format!(
            "visibility scale must be positive, got {varpi}"
        )));
    }
    let mut total = 0.0;
    for b in batches {
        for x in b.samples.chunks_exact(q) {
            for (j, v) in x.iter().enumerate() {
                total += (v.norm_sqr() - noise.matrix()[j * q + j].re) / b.sample_count() as f64;
            }
        }
    }
    Ok(total / (q * batches.len()) as f64 / varpi)
}

/// DC estimate from exact (or externally formed) covariance matrices.
pub fn estimate_dc_from_covariances(covs: &[Vec<C64>], q: usize, noise: &NoiseCovariance, varpi: f64) -> f64 {
    let mut total = 0.0;
    for c in covs {
        for j in 0..q {
            total += c[j * q + j].re - noise.matrix()[j * q + j].re;
        }
    }
    total / (q * covs.len()) as f64 / varpi
}
