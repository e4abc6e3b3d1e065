//! Matrix-free linear maps with exact adjoints.
//!
//! [`LinearOp`] is complex-linear on `C^cols -> C^rows`. Images are real, so
//! the solver works with the real-linear view [`RealOperator`] of a complex op:
//! `x in R^n -> (Re(Ax), Im(Ax))` interleaved, whose adjoint is `Re(A^H y)`.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{check_len, Result};
use crate::rng::{rng_from_seed, Rng};
use crate::C64;

pub trait LinearOp: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// `out = A x`. Lengths are the caller's responsibility.
    fn forward(&self, x: &[C64], out: &mut [C64]);

    /// `out = A^H y`.
    fn adjoint(&self, y: &[C64], out: &mut [C64]);

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        check_len(self.cols(), x.len(), "operator input")?;
        let mut out = vec![C64::default(); self.rows()];
        self.forward(x, &mut out);
        Ok(out)
    }

    fn apply_adjoint(&self, y: &[C64]) -> Result<Vec<C64>> {
        check_len(self.rows(), y.len(), "adjoint input")?;
        let mut out = vec![C64::default(); self.cols()];
        self.adjoint(y, &mut out);
        Ok(out)
    }

    fn apply_real(&self, x: &[f64]) -> Result<Vec<C64>> {
        let xc: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.apply(&xc)
    }

    /// `Re(A^H y)`: adjoint of the operator restricted to real inputs.
    fn adjoint_real(&self, y: &[C64]) -> Result<Vec<f64>> {
        Ok(self.apply_adjoint(y)?.into_iter().map(|z| z.re).collect())
    }
}

pub type OpRef = Arc<dyn LinearOp>;

impl<T: LinearOp + ?Sized> LinearOp for Arc<T> {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        (**self).forward(x, out)
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        (**self).adjoint(y, out)
    }
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn random_complex(rng: &mut Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// Operators applied in sequence: `ops[0]` first.
pub struct Pipeline {
    ops: Vec<OpRef>,
}

impl Pipeline {
    pub fn new(ops: Vec<OpRef>) -> Result<Self> {
        assert!(!ops.is_empty(), "empty pipeline");
        for w in ops.windows(2) {
            check_len(w[0].rows(), w[1].cols(), "pipeline stage")?;
        }
        Ok(Pipeline { ops })
    }
}

impl LinearOp for Pipeline {
    fn rows(&self) -> usize {
        self.ops.last().unwrap().rows()
    }
    fn cols(&self) -> usize {
        self.ops[0].cols()
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        let mut cur = x.to_vec();
        for op in &self.ops[..self.ops.len() - 1] {
            let mut next = vec![C64::default(); op.rows()];
            op.forward(&cur, &mut next);
            cur = next;
        }
        self.ops.last().unwrap().forward(&cur, out);
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        let mut cur = y.to_vec();
        for op in self.ops[1..].iter().rev() {
            let mut next = vec![C64::default(); op.cols()];
            op.adjoint(&cur, &mut next);
            cur = next;
        }
        self.ops[0].adjoint(&cur, out);
    }
}

/// Vertical concatenation `[A_1; A_2; ...]`.
pub struct Stacked {
    ops: Vec<OpRef>,
    offsets: Vec<usize>,
}

impl Stacked {
    pub fn new(ops: Vec<OpRef>) -> Result<Self> {
        assert!(!ops.is_empty(), "empty stack");
        let cols = ops[0].cols();
        let mut offsets = vec![0];
        for op in &ops {
            check_len(cols, op.cols(), "stacked block columns")?;
            offsets.push(offsets.last().unwrap() + op.rows());
        }
        Ok(Stacked { ops, offsets })
    }
}

impl LinearOp for Stacked {
    fn rows(&self) -> usize {
        *self.offsets.last().unwrap()
    }
    fn cols(&self) -> usize {
        self.ops[0].cols()
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        for (i, op) in self.ops.iter().enumerate() {
            op.forward(x, &mut out[self.offsets[i]..self.offsets[i + 1]]);
        }
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        out.fill(C64::default());
        let mut tmp = vec![C64::default(); self.cols()];
        for (i, op) in self.ops.iter().enumerate() {
            op.adjoint(&y[self.offsets[i]..self.offsets[i + 1]], &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += t;
            }
        }
    }
}

pub struct Scaled {
    op: OpRef,
    factor: C64,
}

impl Scaled {
    pub fn new(op: OpRef, factor: C64) -> Self {
        Scaled { op, factor }
    }
}

impl LinearOp for Scaled {
    fn rows(&self) -> usize {
        self.op.rows()
    }
    fn cols(&self) -> usize {
        self.op.cols()
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        self.op.forward(x, out);
        out.iter_mut().for_each(|o| *o *= self.factor);
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        self.op.adjoint(y, out);
        let f = self.factor.conj();
        out.iter_mut().for_each(|o| *o *= f);
    }
}

/// Entrywise multiplication by a real diagonal.
pub struct Diagonal {
    diag: Vec<f64>,
}

impl Diagonal {
    pub fn new(diag: Vec<f64>) -> Self {
        Diagonal { diag }
    }
}

impl LinearOp for Diagonal {
    fn rows(&self) -> usize {
        self.diag.len()
    }
    fn cols(&self) -> usize {
        self.diag.len()
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        for ((o, x), d) in out.iter_mut().zip(x).zip(&self.diag) {
            *o = x * d;
        }
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        self.forward(y, out)
    }
}

/// Row-major dense complex matrix.
#[derive(Clone, Debug)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        check_len(rows * cols, data.len(), "dense matrix entries")?;
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Materializes an operator column by column.
    pub fn from_op(op: &dyn LinearOp) -> Self {
        let (rows, cols) = (op.rows(), op.cols());
        let mut data = vec![C64::default(); rows * cols];
        let mut e = vec![C64::default(); cols];
        let mut col = vec![C64::default(); rows];
        for j in 0..cols {
            e[j] = C64::new(1.0, 0.0);
            op.forward(&e, &mut col);
            e[j] = C64::default();
            for i in 0..rows {
                data[i * cols + j] = col[i];
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_len(self.cols, other.rows, "matrix product")?;
        let mut data = vec![C64::default(); self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C64::default() {
                    continue;
                }
                for j in 0..other.cols {
                    data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        DenseMatrix::new(self.rows, other.cols, data)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        norm(&self.data)
    }
}

impl LinearOp for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        out.fill(C64::default());
        for (i, yi) in y.iter().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * yi;
            }
        }
    }
}

/// Test fixture: an operator whose adjoint is deliberately wrong.
pub struct BrokenAdjoint {
    op: OpRef,
}

impl BrokenAdjoint {
    pub fn new(op: OpRef) -> Self {
        BrokenAdjoint { op }
    }
}

impl LinearOp for BrokenAdjoint {
    fn rows(&self) -> usize {
        self.op.rows()
    }
    fn cols(&self) -> usize {
        self.op.cols()
    }
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        self.op.forward(x, out)
    }
    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        self.op.adjoint(y, out);
        if let Some(first) = out.first_mut() {
            *first = *first * 1.5 + C64::new(0.0, 1.0);
        }
    }
}

/// Worst relative mismatch of `<Ax, y> = <x, A^H y>` over random pairs,
/// normalized by `||Ax|| ||y|| + ||x|| ||A^H y||`.
pub fn adjoint_mismatch(op: &dyn LinearOp, trials: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x = random_complex(&mut rng, op.cols());
        let y = random_complex(&mut rng, op.rows());
        let ax = op.apply(&x).unwrap();
        let aty = op.apply_adjoint(&y).unwrap();
        let lhs = inner(&ax, &y);
        let rhs = inner(&x, &aty);
        let scale = norm(&ax) * norm(&y) + norm(&x) * norm(&aty);
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).norm() / scale);
        }
    }
    worst
}

/// Real-linear map on real vectors; complex outputs are interleaved (re, im).
pub trait RealOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn forward(&self, x: &[f64], out: &mut [f64]);
    fn adjoint(&self, y: &[f64], out: &mut [f64]);
}

/// Real view of a complex operator acting on real inputs.
pub struct RealView<'a> {
    op: &'a dyn LinearOp,
}

impl<'a> RealView<'a> {
    pub fn new(op: &'a dyn LinearOp) -> Self {
        RealView { op }
    }
}

pub fn interleave(z: &[C64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn deinterleave(v: &[f64]) -> Vec<C64> {
    v.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect()
}

impl RealOperator for RealView<'_> {
    fn rows(&self) -> usize {
        2 * self.op.rows()
    }
    fn cols(&self) -> usize {
        self.op.cols()
    }
    fn forward(&self, x: &[f64], out: &mut [f64]) {
        let xc: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
        let mut y = vec![C64::default(); self.op.rows()];
        self.op.forward(&xc, &mut y);
        for (o, c) in out.chunks_exact_mut(2).zip(&y) {
            o[0] = c.re;
            o[1] = c.im;
        }
    }
    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        let yc = deinterleave(y);
        let mut x = vec![C64::default(); self.op.cols()];
        self.op.adjoint(&yc, &mut x);
        for (o, c) in out.iter_mut().zip(&x) {
            *o = c.re;
        }
    }
}

/// Dense real matrix, row-major. Used to run many solver iterations on a
/// small operator without re-running the matrix-free pipeline.
pub struct DenseReal {
    rows: usize,
    cols: usize,
    // column-major: column j occupies data[j * rows..(j + 1) * rows]
    data: Vec<f64>,
}

impl DenseReal {
    /// Materializes the real view of `op` with one complex adjoint per row.
    pub fn from_complex_op(op: &dyn LinearOp) -> Self {
        let (m, n) = (op.rows(), op.cols());
        let rows = 2 * m;
        let mut data = vec![0.0; rows * n];
        let mut e = vec![C64::default(); m];
        let mut row = vec![C64::default(); n];
        for i in 0..m {
            e[i] = C64::new(1.0, 0.0);
            op.adjoint(&e, &mut row);
            e[i] = C64::default();
            // A^H e_i = conj(A[i, :])
            for (j, a) in row.iter().enumerate() {
                data[j * rows + 2 * i] = a.re;
                data[j * rows + 2 * i + 1] = -a.im;
            }
        }
        DenseReal { rows, cols: n, data }
    }
}

fn dot8(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(p, q)| p * q)
        .sum();
    for (pa, pb) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += pa[k] * pb[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

impl RealOperator for DenseReal {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    /// Skips zero entries of `x`, so sparse iterates are cheap.
    fn forward(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (xj, col) in x.iter().zip(self.data.chunks_exact(self.rows)) {
            if *xj == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(col) {
                *o += a * xj;
            }
        }
    }
    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        for (o, col) in out.iter_mut().zip(self.data.chunks_exact(self.rows)) {
            *o = dot8(col, y);
        }
    }
}

/// Plain real matrix wrapper, mostly for tests and small oracles.
pub struct RealMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RealOperator for RealMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
    }
}
