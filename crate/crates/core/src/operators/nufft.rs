//! Fourier sums at off-grid frequencies.
//!
//! Both operators map an `N1 x N1` image to `sum_s x_s exp(-i 2 pi chi . s / N1)`
//! at a list of frequencies `chi` (grid units), where `s` is the pixel offset
//! from the image centre. [`Nudft`] evaluates the sums directly; [`Nufft`]
//! grids on a 2x oversampled FFT with a Kaiser-Bessel kernel.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::dft::Fft2;
use crate::error::{Error, Result};
use crate::linop::LinearOp;
use crate::C64;

fn check_band(n1: usize, freqs: &[[f64; 2]]) -> Result<()> {
    let half = n1 as f64 / 2.0;
    match freqs.iter().find(|c| !(c[0].abs() <= half && c[1].abs() <= half)) {
        Some(c) => Err(Error::OutOfBand(c[0], c[1], half)),
        None => Ok(()),
    }
}

/// `exp(-i 2 pi f (t - N1/2) / N1)` for `t = 0..N1`.
fn phase_row(n1: usize, f: f64) -> Vec<C64> {
    let half = (n1 / 2) as f64;
    (0..n1)
        .map(|t| C64::cis(-2.0 * PI * f * (t as f64 - half) / n1 as f64))
        .collect()
}

/// Direct evaluation, `O(N)` per frequency.
pub struct Nudft {
    n1: usize,
    freqs: Vec<[f64; 2]>,
}

impl Nudft {
    pub fn new(n1: usize, freqs: Vec<[f64; 2]>) -> Result<Self> {
        check_band(n1, &freqs)?;
        Ok(Nudft { n1, freqs })
    }
}

impl LinearOp for Nudft {
    fn rows(&self) -> usize {
        self.freqs.len()
    }
    fn cols(&self) -> usize {
        self.n1 * self.n1
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        let n1 = self.n1;
        out.par_iter_mut().zip(&self.freqs).for_each(|(o, chi)| {
            let ex = phase_row(n1, chi[0]);
            let ey = phase_row(n1, chi[1]);
            *o = x
                .chunks_exact(n1)
                .zip(&ey)
                .map(|(row, e)| e * row.iter().zip(&ex).map(|(a, b)| a * b).sum::<C64>())
                .sum();
        });
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        let n1 = self.n1;
        out.fill(C64::default());
        for (v, chi) in y.iter().zip(&self.freqs) {
            let ex = phase_row(n1, chi[0]);
            let ey = phase_row(n1, chi[1]);
            for (row, e) in out.chunks_exact_mut(n1).zip(&ey) {
                let w = e.conj() * v;
                for (o, b) in row.iter_mut().zip(&ex) {
                    *o += b.conj() * w;
                }
            }
        }
    }
}

/// Kaiser-Bessel gridding kernel `I0(beta sqrt(1 - (2u/J)^2))` on `|u| <= J/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KaiserBessel {
    pub width: usize,
    pub oversampling: usize,
    pub beta: f64,
}

impl Default for KaiserBessel {
    fn default() -> Self {
        Self::new(7, 2)
    }
}

impl KaiserBessel {
    pub fn new(width: usize, oversampling: usize) -> Self {
        let j = width as f64;
        let sigma = oversampling as f64;
        KaiserBessel {
            width,
            oversampling,
            beta: PI * j * (1.0 - 1.0 / (2.0 * sigma)) * 0.98,
        }
    }

    pub fn kernel(&self, u: f64) -> f64 {
        let t = 2.0 * u / self.width as f64;
        if t.abs() > 1.0 {
            return 0.0;
        }
        bessel_i0(self.beta * (1.0 - t * t).sqrt())
    }

    /// Continuous Fourier transform `int phi(u) exp(-i 2 pi u xi) du`.
    pub fn kernel_ft(&self, xi: f64) -> f64 {
        let j = self.width as f64;
        let z2 = self.beta * self.beta - (PI * j * xi).powi(2);
        if z2 > 1e-12 {
            let z = z2.sqrt();
            j * z.sinh() / z
        } else if z2 < -1e-12 {
            let z = (-z2).sqrt();
            j * z.sin() / z
        } else {
            j
        }
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Gridded evaluation: deapodize, zero-pad to `sigma N1`, FFT, interpolate.
/// The adjoint is the exact transpose of the same pipeline.
pub struct Nufft {
    n1: usize,
    n: usize,
    width: usize,
    num_points: usize,
    base_x: Vec<usize>,
    base_y: Vec<usize>,
    wx: Vec<f64>,
    wy: Vec<f64>,
    /// `1 / c(s)` per axis, indexed by pixel column/row.
    inv_deapod: Vec<f64>,
    fwd: Fft2,
    inv: Fft2,
}

impl Nufft {
    pub fn new(n1: usize, freqs: &[[f64; 2]], kb: KaiserBessel) -> Result<Self> {
        check_band(n1, freqs)?;
        let n = kb.oversampling * n1;
        let sigma = kb.oversampling as f64;
        let width = kb.width;
        let half_w = width as f64 / 2.0;
        let mut base = [Vec::with_capacity(freqs.len()), Vec::with_capacity(freqs.len())];
        let mut weights = [
            Vec::with_capacity(freqs.len() * width),
            Vec::with_capacity(freqs.len() * width),
        ];
        for chi in freqs {
            for axis in 0..2 {
                let kappa = sigma * chi[axis];
                let k0 = (kappa - half_w).floor() as i64 + 1;
                base[axis].push(k0.rem_euclid(n as i64) as usize);
                for i in 0..width {
                    weights[axis].push(kb.kernel(kappa - (k0 + i as i64) as f64));
                }
            }
        }
        let half = (n1 / 2) as f64;
        let inv_deapod = (0..n1)
            .map(|t| 1.0 / kb.kernel_ft((t as f64 - half) / n as f64))
            .collect();
        let [base_x, base_y] = base;
        let [wx, wy] = weights;
        Ok(Nufft {
            n1,
            n,
            width,
            num_points: freqs.len(),
            base_x,
            base_y,
            wx,
            wy,
            inv_deapod,
            fwd: Fft2::new(n, false),
            inv: Fft2::new(n, true),
        })
    }

    /// Grid index of pixel coordinate `t` (0-based column or row).
    fn grid_index(&self, t: usize) -> usize {
        (t + self.n - self.n1 / 2) % self.n
    }
}

impl LinearOp for Nufft {
    fn rows(&self) -> usize {
        self.num_points
    }
    fn cols(&self) -> usize {
        self.n1 * self.n1
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        let (n, n1, w) = (self.n, self.n1, self.width);
        let mut grid = vec![C64::default(); n * n];
        for r in 0..n1 {
            let gy = self.grid_index(r);
            for c in 0..n1 {
                grid[gy * n + self.grid_index(c)] = x[r * n1 + c] * (self.inv_deapod[r] * self.inv_deapod[c]);
            }
        }
        self.fwd.process(&mut grid);
        out.par_iter_mut().enumerate().for_each(|(p, o)| {
            let (bx, by) = (self.base_x[p], self.base_y[p]);
            let wx = &self.wx[p * w..(p + 1) * w];
            let wy = &self.wy[p * w..(p + 1) * w];
            let mut acc = C64::default();
            for (iy, wyv) in wy.iter().enumerate() {
                let row = &grid[((by + iy) % n) * n..][..n];
                let mut racc = C64::default();
                for (ix, wxv) in wx.iter().enumerate() {
                    racc += row[(bx + ix) % n] * wxv;
                }
                acc += racc * wyv;
            }
            *o = acc;
        });
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        let (n, n1, w) = (self.n, self.n1, self.width);
        let mut grid = vec![C64::default(); n * n];
        for (p, v) in y.iter().enumerate() {
            let (bx, by) = (self.base_x[p], self.base_y[p]);
            let wx = &self.wx[p * w..(p + 1) * w];
            let wy = &self.wy[p * w..(p + 1) * w];
            for (iy, wyv) in wy.iter().enumerate() {
                let row = &mut grid[((by + iy) % n) * n..][..n];
                let vy = v * wyv;
                for (ix, wxv) in wx.iter().enumerate() {
                    row[(bx + ix) % n] += vy * wxv;
                }
            }
        }
        self.inv.process(&mut grid);
        for r in 0..n1 {
            let gy = self.grid_index(r);
            for c in 0..n1 {
                out[r * n1 + c] =
                    grid[gy * n + self.grid_index(c)] * (self.inv_deapod[r] * self.inv_deapod[c]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{adjoint_mismatch, norm, random_complex};
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    fn random_freqs(seed: u64, n1: usize, count: usize, band: f64) -> Vec<[f64; 2]> {
        let mut rng = rng_from_seed(seed);
        let h = band * n1 as f64 / 2.0;
        (0..count)
            .map(|_| [rng.random_range(-h..h), rng.random_range(-h..h)])
            .collect()
    }

    #[test]
    fn i0_reference_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i0(10.0) / 2815.716628466254 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_ft_matches_quadrature() {
        let kb = KaiserBessel::default();
        let steps = 20_000;
        let h = kb.width as f64 / steps as f64;
        for xi in [0.0, 0.1, 0.25] {
            let mut s = 0.0;
            for i in 0..steps {
                let u = -(kb.width as f64) / 2.0 + (i as f64 + 0.5) * h;
                s += kb.kernel(u) * (2.0 * PI * u * xi).cos() * h;
            }
            assert!((s / kb.kernel_ft(xi) - 1.0).abs() < 1e-6, "xi={xi}");
        }
    }

    #[test]
    fn nudft_origin_pixel_is_flat() {
        let n1 = 8;
        let op = Nudft::new(n1, random_freqs(1, n1, 10, 1.0)).unwrap();
        let mut x = vec![C64::default(); 64];
        x[4 * 8 + 4] = C64::new(1.0, 0.0);
        let v = op.apply(&x).unwrap();
        assert!(v.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn nufft_matches_nudft() {
        for (seed, n1) in [(1u64, 16usize), (2, 32)] {
            let freqs = random_freqs(seed, n1, 300, 1.0);
            let exact = Nudft::new(n1, freqs.clone()).unwrap();
            let fast = Nufft::new(n1, &freqs, KaiserBessel::default()).unwrap();
            let mut rng = rng_from_seed(seed + 10);
            let x = random_complex(&mut rng, n1 * n1);
            let a = exact.apply(&x).unwrap();
            let b = fast.apply(&x).unwrap();
            let err: Vec<C64> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
            assert!(norm(&err) / norm(&a) < 1e-6, "n1={n1}: {}", norm(&err) / norm(&a));
        }
    }

    #[test]
    fn adjoints_are_exact() {
        let freqs = random_freqs(3, 16, 50, 1.0);
        let fast = Nufft::new(16, &freqs, KaiserBessel::default()).unwrap();
        assert!(adjoint_mismatch(&fast, 20, 4) < 1e-12);
        let exact = Nudft::new(16, freqs).unwrap();
        assert!(adjoint_mismatch(&exact, 20, 4) < 1e-12);
    }

    #[test]
    fn out_of_band_is_an_error() {
        assert!(matches!(
            Nufft::new(16, &[[8.5, 0.0]], KaiserBessel::default()),
            Err(Error::OutOfBand(..))
        ));
    }
}
