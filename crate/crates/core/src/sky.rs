//! Discretized sky images on the `N1 x N1` grid.
//!
//! Pixel `(row, col)` sits at grid offset `s = (col - N1/2, row - N1/2)`, i.e.
//! direction cosines `l = s * L / N1`. Values are stored row-major.

use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Reported SNR when the residual is exactly zero.
pub const SNR_CAP_DB: f64 = 300.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SkyImage {
    side: usize,
    fov: f64,
    values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkySidecar {
    pub n1: usize,
    pub fov: f64,
    pub seed: Option<u64>,
    pub k: usize,
}

impl SkyImage {
    /// Field of view for which the visibility scale `L^2 / N1` equals one,
    /// i.e. on-grid visibilities coincide with the unitary DFT of the image.
    pub fn unit_gain_fov(side: usize) -> f64 {
        (side as f64).sqrt()
    }

    pub fn zeros(side: usize, fov: f64) -> Result<Self> {
        Self::from_values(side, fov, vec![0.0; side * side])
    }

    pub fn from_values(side: usize, fov: f64, values: Vec<f64>) -> Result<Self> {
        if side == 0 || !side.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "grid side must be even and positive, got {side}"
            )));
        }
        if !(fov > 0.0 && fov.is_finite()) {
            return Err(Error::Argument(format!(
                "field of view must be positive, got {fov}"
            )));
        }
        crate::error::check_len(side * side, values.len(), "sky image pixels")?;
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Argument(
                "sky intensities must be finite and nonnegative".into(),
            ));
        }
        Ok(SkyImage { side, fov, values })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn num_pixels(&self) -> usize {
        self.side * self.side
    }

    pub fn fov(&self) -> f64 {
        self.fov
    }

    /// Pixel pitch `Delta = L / N1`.
    pub fn pixel_size(&self) -> f64 {
        self.fov / self.side as f64
    }

    /// `varpi = L^2 / sqrt(N)`.
    pub fn visibility_scale(&self) -> f64 {
        self.fov * self.fov / self.side as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sparsity(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// Multiplies by the squared antenna gain `g^2`.
    pub fn vignetted(&self, gain: &[f64]) -> Result<SkyImage> {
        crate::error::check_len(self.values.len(), gain.len(), "gain pattern")?;
        let values = self.values.iter().zip(gain).map(|(x, g)| x * g * g).collect();
        SkyImage::from_values(self.side, self.fov, values)
    }

    pub fn write(&self, path: &Path, seed: Option<u64>) -> Result<()> {
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let sidecar = SkySidecar {
            n1: self.side,
            fov: self.fov,
            seed,
            k: self.sparsity(),
        };
        crate::io::write_json(&crate::io::sidecar_path(path), &sidecar)
    }

    pub fn read(path: &Path) -> Result<(SkyImage, SkySidecar)> {
        let sidecar: SkySidecar = crate::io::read_json(&crate::io::sidecar_path(path))?;
        let values = crate::io::read_f64_file(path)?;
        let img = SkyImage::from_values(sidecar.n1, sidecar.fov, values)?;
        Ok((img, sidecar))
    }

    /// Grayscale PNG, scaled so the brightest pixel is white.
    pub fn write_png(&self, path: &Path) -> Result<()> {
        write_gray_png(path, self.side, self.side, &self.values)
    }
}

pub(crate) fn write_gray_png(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let pixels: Vec<u8> = values
        .iter()
        .map(|v| (v.max(0.0) * scale).round().min(255.0) as u8)
        .collect();
    image::GrayImage::from_raw(width as u32, height as u32, pixels)
        .ok_or_else(|| Error::format(path, "pixel buffer size mismatch"))?
        .save(path)
        .map_err(|e| Error::format(path, e))
}

/// `K` unit pixels drawn uniformly without replacement.
pub fn random_sparse_sky(side: usize, k: usize, seed: u64) -> Result<SkyImage> {
    random_sparse_sky_with_fov(side, SkyImage::unit_gain_fov(side), k, seed)
}

pub fn random_sparse_sky_with_fov(side: usize, fov: f64, k: usize, seed: u64) -> Result<SkyImage> {
    let n = side * side;
    if k > n {
        return Err(Error::Argument(format!("sparsity {k} exceeds pixel count {n}")));
    }
    let mut img = SkyImage::zeros(side, fov)?;
    let mut rng = rng_from_seed(seed);
    for i in sample(&mut rng, n, k) {
        img.values[i] = 1.0;
    }
    Ok(img)
}

/// Zero-frequency coefficient of the unitary 2-D DFT: `sum(x) / N1`.
pub fn dc_component(img: &SkyImage) -> f64 {
    img.values.iter().sum::<f64>() / img.side as f64
}

/// `20 log10(||truth|| / ||truth - estimate||)`, capped at [`SNR_CAP_DB`].
pub fn snr_db(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    crate::error::check_len(truth.len(), estimate.len(), "snr estimate")?;
    let err = truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if err == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    let norm = truth.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Argument("SNR undefined for an all-zero reference".into()));
    }
    Ok((20.0 * (norm / err).log10()).min(SNR_CAP_DB))
}

/// Separable raised-cosine gain, zero on the field-of-view frontier.
pub fn raised_cosine_gain(side: usize) -> Vec<f64> {
    let half = side as f64 / 2.0;
    let w: Vec<f64> = (0..side)
        .map(|i| {
            let s = i as f64 - half;
            0.5 * (1.0 + (std::f64::consts::PI * s / half).cos())
        })
        .collect();
    let mut g = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            g.push(w[r] * w[c]);
        }
    }
    g
}
