//! Unitary 2-D DFT `F = F1 (x) F1`, `(F1)_{kl} = exp(-i 2 pi k l / N1) / sqrt(N1)`.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linop::LinearOp;
use crate::C64;

/// Unnormalized square 2-D FFT on row-major data.
pub struct Fft2 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize, inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        Fft2 { n, fft }
    }

    pub fn process(&self, data: &mut [C64]) {
        let n = self.n;
        let mut scratch = vec![C64::default(); self.fft.get_inplace_scratch_len()];
        self.fft.process_with_scratch(data, &mut scratch);
        transpose_square(data, n);
        self.fft.process_with_scratch(data, &mut scratch);
        transpose_square(data, n);
    }
}

fn transpose_square(data: &mut [C64], n: usize) {
    for r in 0..n {
        for c in r + 1..n {
            data.swap(r * n + c, c * n + r);
        }
    }
}

pub struct Dft2 {
    side: usize,
    forward: Fft2,
    inverse: Fft2,
}

impl Dft2 {
    pub fn new(side: usize) -> Self {
        Dft2 {
            side,
            forward: Fft2::new(side, false),
            inverse: Fft2::new(side, true),
        }
    }

    /// Builds the transform for a flattened length, which must be a square.
    pub fn for_length(len: usize) -> Result<Self> {
        let side = (len as f64).sqrt().round() as usize;
        if side == 0 || side * side != len {
            return Err(Error::Argument(format!("length {len} is not a perfect square")));
        }
        Ok(Dft2::new(side))
    }

    pub fn side(&self) -> usize {
        self.side
    }
}

impl LinearOp for Dft2 {
    fn rows(&self) -> usize {
        self.side * self.side
    }
    fn cols(&self) -> usize {
        self.side * self.side
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        out.copy_from_slice(x);
        self.forward.process(out);
        let s = 1.0 / self.side as f64;
        out.iter_mut().for_each(|v| *v *= s);
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        out.copy_from_slice(y);
        self.inverse.process(out);
        let s = 1.0 / self.side as f64;
        out.iter_mut().for_each(|v| *v *= s);
    }
}
