//! Random beamforming vectors and modulation signs.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::C64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchDistribution {
    /// Unit-modulus entries `exp(i theta)`, `theta ~ U[0, 2 pi)`.
    #[default]
    PhaseOnly,
    /// Standard complex Gaussian entries `CN(0, 1)`.
    Gaussian,
}

/// Sketches `alpha_pb, beta_pb in C^Q` for `p < P`, `b < B` and the
/// modulation matrix `Gamma in {-1, +1}^{B x M}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SketchEnsemble {
    q: usize,
    p: usize,
    b: usize,
    m: usize,
    alphas: Vec<C64>,
    betas: Vec<C64>,
    gamma: Vec<f64>,
}

impl SketchEnsemble {
    /// Batch `b` draws its sketches from its own derived stream, so adding
    /// batches does not change earlier ones.
    pub fn draw(
        q: usize,
        p: usize,
        b: usize,
        m: usize,
        distribution: SketchDistribution,
        seed: u64,
    ) -> Result<Self> {
        if q == 0 || p == 0 || b == 0 || m == 0 {
            return Err(Error::Argument(format!(
                "sketch dimensions must be positive (Q={q}, P={p}, B={b}, M={m})"
            )));
        }
        let mut alphas = Vec::with_capacity(b * p * q);
        let mut betas = Vec::with_capacity(b * p * q);
        for batch in 0..b {
            let mut rng = rng_from_seed(derive_seed(seed, &[stream::SKETCH, batch as u64]));
            for _ in 0..p {
                for dst in [&mut alphas, &mut betas] {
                    for _ in 0..q {
                        dst.push(match distribution {
                            SketchDistribution::PhaseOnly => {
                                C64::cis(rng.random::<f64>() * std::f64::consts::TAU)
                            }
                            SketchDistribution::Gaussian => {
                                let re: f64 = rng.sample(StandardNormal);
                                let im: f64 = rng.sample(StandardNormal);
                                C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                            }
                        });
                    }
                }
            }
        }
        let mut rng = rng_from_seed(derive_seed(seed, &[stream::MODULATION]));
        let gamma = (0..b * m)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Ok(SketchEnsemble {
            q,
            p,
            b,
            m,
            alphas,
            betas,
            gamma,
        })
    }

    /// Explicit construction; `alphas`/`betas` are laid out `(b, p, q)` and
    /// `gamma` is `(b, m)`.
    pub fn from_parts(
        q: usize,
        p: usize,
        b: usize,
        m: usize,
        alphas: Vec<C64>,
        betas: Vec<C64>,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        check_len(b * p * q, alphas.len(), "alpha sketches")?;
        check_len(b * p * q, betas.len(), "beta sketches")?;
        check_len(b * m, gamma.len(), "modulation matrix")?;
        Ok(SketchEnsemble {
            q,
            p,
            b,
            m,
            alphas,
            betas,
            gamma,
        })
    }

    /// Same sketches, aggregated without modulation (`Gamma` = one column of ones).
    pub fn integrated(&self) -> Self {
        SketchEnsemble {
            m: 1,
            gamma: vec![1.0; self.b],
            ..self.clone()
        }
    }

    pub fn num_antennas(&self) -> usize {
        self.q
    }
    pub fn num_sketches(&self) -> usize {
        self.p
    }
    pub fn num_batches(&self) -> usize {
        self.b
    }
    pub fn num_modulations(&self) -> usize {
        self.m
    }

    pub fn alpha(&self, b: usize, p: usize) -> &[C64] {
        let o = (b * self.p + p) * self.q;
        &self.alphas[o..o + self.q]
    }

    pub fn beta(&self, b: usize, p: usize) -> &[C64] {
        let o = (b * self.p + p) * self.q;
        &self.betas[o..o + self.q]
    }

    pub fn gamma(&self, b: usize, m: usize) -> f64 {
        self.gamma[b * self.m + m]
    }

    pub fn gamma_matrix(&self) -> &[f64] {
        &self.gamma
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_only_entries_are_unit_modulus() {
        let s = SketchEnsemble::draw(5, 4, 3, 2, SketchDistribution::PhaseOnly, 11).unwrap();
        for b in 0..3 {
            for p in 0..4 {
                assert!(s.alpha(b, p).iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
                assert!(s.beta(b, p).iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
            }
        }
        assert!(s.gamma_matrix().iter().all(|g| *g == 1.0 || *g == -1.0));
    }

    #[test]
    fn draws_are_reproducible_and_prefix_stable() {
        let a = SketchEnsemble::draw(4, 3, 2, 2, SketchDistribution::Gaussian, 5).unwrap();
        let b = SketchEnsemble::draw(4, 3, 5, 2, SketchDistribution::Gaussian, 5).unwrap();
        assert_eq!(a.alpha(1, 2), b.alpha(1, 2));
        assert_eq!(
            a,
            SketchEnsemble::draw(4, 3, 2, 2, SketchDistribution::Gaussian, 5).unwrap()
        );
        assert!(SketchEnsemble::draw(0, 1, 1, 1, SketchDistribution::Gaussian, 5).is_err());
    }

    #[test]
    fn integrated_has_unit_gamma() {
        let s = SketchEnsemble::draw(3, 2, 4, 3, SketchDistribution::PhaseOnly, 1)
            .unwrap()
            .integrated();
        assert_eq!(s.num_modulations(), 1);
        assert!(s.gamma_matrix().iter().all(|g| *g == 1.0));
    }
}
