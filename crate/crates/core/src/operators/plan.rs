//! Sampling plans: baselines of every batch expressed in grid units.
//!
//! A plan stores the projected antenna positions `omega_q` of every batch in
//! grid units. Row `(j, k)` of batch `b` samples the sky spectrum at
//! `chi_jk = omega_k - omega_j`, i.e. `v_jk = Delta^2 sum_n x_n exp(-i 2 pi chi_jk . s_n / N1)`
//! with `s_n` the integer pixel offset from the image centre.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::geometry::{count_close_pairs, BatchGeometry};
use crate::io;

/// Largest baseline as a fraction of the half-band `N1 / 2`.
pub const DEFAULT_BAND_FRACTION: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct VisibilityPlan {
    n1: usize,
    fov: f64,
    scale: f64,
    num_antennas: usize,
    include_dc: bool,
    positions: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanHeader {
    pub n1: usize,
    pub fov: f64,
    /// Grid units per wavelength.
    pub scale: f64,
    pub num_antennas: usize,
    pub num_batches: usize,
    pub include_dc: bool,
}

impl VisibilityPlan {
    /// Rescales physical positions (wavelengths) so the longest baseline over
    /// all batches has length `band_fraction * N1 / 2` grid units.
    pub fn from_batches(
        batches: &[BatchGeometry],
        n1: usize,
        fov: f64,
        band_fraction: f64,
        include_dc: bool,
    ) -> Result<Self> {
        if !(band_fraction > 0.0 && band_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "band fraction must lie in (0, 1], got {band_fraction}"
            )));
        }
        let longest = batches
            .iter()
            .flat_map(|b| b.baselines())
            .map(|v| v[0].hypot(v[1]))
            .fold(0.0f64, f64::max);
        if longest <= 0.0 {
            return Err(Error::Argument("array has no nonzero baseline".into()));
        }
        let scale = band_fraction * n1 as f64 / 2.0 / longest;
        let positions = batches
            .iter()
            .map(|b| b.positions.iter().map(|p| [p[0] * scale, p[1] * scale]).collect())
            .collect();
        Self::build(n1, fov, scale, include_dc, positions)
    }

    /// Plan from positions already in grid units.
    pub fn from_grid_positions(
        positions: Vec<Vec<[f64; 2]>>,
        n1: usize,
        fov: f64,
        include_dc: bool,
    ) -> Result<Self> {
        Self::build(n1, fov, 1.0, include_dc, positions)
    }

    fn build(
        n1: usize,
        fov: f64,
        scale: f64,
        include_dc: bool,
        positions: Vec<Vec<[f64; 2]>>,
    ) -> Result<Self> {
        if n1 == 0 || !n1.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "grid side must be even and positive, got {n1}"
            )));
        }
        if !(fov > 0.0 && fov.is_finite()) {
            return Err(Error::Argument(format!(
                "field of view must be positive, got {fov}"
            )));
        }
        let num_antennas = positions.first().map_or(0, |p| p.len());
        if positions.is_empty() || num_antennas == 0 {
            return Err(Error::Argument(
                "plan needs at least one batch and one antenna".into(),
            ));
        }
        for p in &positions {
            check_len(num_antennas, p.len(), "antennas per batch")?;
        }
        let plan = VisibilityPlan {
            n1,
            fov,
            scale,
            num_antennas,
            include_dc,
            positions,
        };
        let half = n1 as f64 / 2.0;
        for b in 0..plan.num_batches() {
            for chi in plan.batch_frequencies(b) {
                if !(chi[0].abs() <= half && chi[1].abs() <= half) {
                    return Err(Error::OutOfBand(chi[0], chi[1], half));
                }
            }
        }
        Ok(plan)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn num_pixels(&self) -> usize {
        self.n1 * self.n1
    }

    pub fn fov(&self) -> f64 {
        self.fov
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_batches(&self) -> usize {
        self.positions.len()
    }

    pub fn include_dc(&self) -> bool {
        self.include_dc
    }

    /// Same geometry with the diagonal (zero-frequency) rows toggled.
    pub fn with_dc(&self, include_dc: bool) -> Self {
        VisibilityPlan {
            include_dc,
            ..self.clone()
        }
    }

    pub fn positions(&self, batch: usize) -> &[[f64; 2]] {
        &self.positions[batch]
    }

    /// `Delta^2 = (L / N1)^2`, the quadrature weight of one pixel.
    pub fn quadrature_weight(&self) -> f64 {
        let d = self.fov / self.n1 as f64;
        d * d
    }

    /// `varpi = L^2 / N1`.
    pub fn visibility_scale(&self) -> f64 {
        self.fov * self.fov / self.n1 as f64
    }

    pub fn rows_per_batch(&self) -> usize {
        let q = self.num_antennas;
        if self.include_dc {
            q * q
        } else {
            q * (q - 1)
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows_per_batch() * self.num_batches()
    }

    /// Antenna pairs `(j, k)` in row order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let q = self.num_antennas;
        (0..q)
            .flat_map(|j| (0..q).map(move |k| (j, k)))
            .filter(|(j, k)| self.include_dc || j != k)
            .collect()
    }

    pub fn batch_frequencies(&self, batch: usize) -> Vec<[f64; 2]> {
        let p = &self.positions[batch];
        self.pairs()
            .into_iter()
            .map(|(j, k)| [p[k][0] - p[j][0], p[k][1] - p[j][1]])
            .collect()
    }

    pub fn frequencies(&self) -> Vec<[f64; 2]> {
        (0..self.num_batches())
            .flat_map(|b| self.batch_frequencies(b))
            .collect()
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequencies()
            .iter()
            .map(|c| c[0].hypot(c[1]))
            .fold(0.0, f64::max)
    }

    /// Off-diagonal frequency pairs closer than `tol` grid units.
    pub fn count_collisions(&self, tol: f64) -> usize {
        count_close_pairs(&self.with_dc(false).frequencies(), tol)
    }

    pub fn header(&self) -> PlanHeader {
        PlanHeader {
            n1: self.n1,
            fov: self.fov,
            scale: self.scale,
            num_antennas: self.num_antennas,
            num_batches: self.num_batches(),
            include_dc: self.include_dc,
        }
    }

    /// Positions as little-endian f64 `(b, q, axis)`, header as JSON sidecar.
    pub fn write(&self, path: &Path) -> Result<()> {
        let flat: Vec<f64> = self.positions.iter().flatten().flat_map(|p| *p).collect();
        io::write_atomic(path, &io::f64_to_bytes(&flat))?;
        io::write_json(&io::sidecar_path(path), &self.header())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let h: PlanHeader = io::read_json(&io::sidecar_path(path))?;
        let flat = io::read_f64_file(path)?;
        if flat.len() != 2 * h.num_antennas * h.num_batches {
            return Err(Error::format(path, "position count disagrees with header"));
        }
        let positions = flat
            .chunks_exact(2 * h.num_antennas)
            .map(|b| b.chunks_exact(2).map(|p| [p[0], p[1]]).collect())
            .collect();
        Self::build(h.n1, h.fov, h.scale, h.include_dc, positions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_vla_like, synthesize_batches, ArrayLayout};

    fn vla_plan(band: f64) -> VisibilityPlan {
        let layout = ArrayLayout::new(make_vla_like(3, 1000.0).unwrap(), 0.21, 5).unwrap();
        VisibilityPlan::from_batches(&synthesize_batches(&layout), 32, 1.0, band, true).unwrap()
    }

    #[test]
    fn rescaling_hits_the_band_target() {
        let plan = vla_plan(0.45);
        assert!((plan.max_frequency() - 0.45 * 16.0).abs() < 1e-9);
        assert_eq!(plan.num_rows(), 81 * 5);
        assert_eq!(plan.with_dc(false).num_rows(), 72 * 5);
        assert!(matches!(
            VisibilityPlan::from_batches(&[], 32, 1.0, 1.5, true),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn frequencies_are_antisymmetric() {
        let plan = vla_plan(0.9);
        let q = plan.num_antennas();
        let f = plan.batch_frequencies(2);
        for j in 0..q {
            for k in 0..q {
                let a = f[j * q + k];
                let b = f[k * q + j];
                assert_eq!(a[0], -b[0]);
                assert_eq!(a[1], -b[1]);
            }
        }
    }

    #[test]
    fn out_of_band_positions_are_rejected() {
        let pos = vec![vec![[0.0, 0.0], [9.0, 0.0]]];
        assert!(matches!(
            VisibilityPlan::from_grid_positions(pos, 16, 1.0, true),
            Err(Error::OutOfBand(..))
        ));
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plan.bin");
        let plan = vla_plan(0.45);
        plan.write(&path).unwrap();
        assert_eq!(VisibilityPlan::read(&path).unwrap(), plan);
    }
}
