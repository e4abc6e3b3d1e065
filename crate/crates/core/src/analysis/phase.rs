//! Monte Carlo phase-transition sweeps over two of `(K, P, M)`.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{interleave, DenseReal, LinearOp, RealOperator, RealView};
use crate::operators::forward::mrop_operator;
use crate::operators::plan::VisibilityPlan;
use crate::operators::sketch::{SketchDistribution, SketchEnsemble};
use crate::operators::visibility::Backend;
use crate::rng::{derive_seed, stream};
use crate::sky::{random_sparse_sky_with_fov, snr_db};
use crate::solver::{solve_bpdn, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    #[serde(alias = "K")]
    K,
    #[serde(alias = "P")]
    P,
    #[serde(alias = "M")]
    M,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::K => "K",
            Param::P => "P",
            Param::M => "M",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: Param,
    pub values: Vec<usize>,
}

/// Everything a sweep holds fixed.
#[derive(Clone, Debug)]
pub struct SweepSetup {
    pub plan: VisibilityPlan,
    pub backend: Backend,
    pub distribution: SketchDistribution,
    pub solver: SolverConfig,
    pub threshold_db: f64,
    pub trials: usize,
    /// Value of the parameter not spanned by the two axes.
    pub fixed: (Param, usize),
    /// Bytes allowed for materializing the operator as a dense real matrix.
    pub dense_budget: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub snr_db: f64,
    pub converged: bool,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub row: usize,
    pub col: usize,
    pub k: usize,
    pub p: usize,
    pub m: usize,
    pub successes: usize,
    pub trials: Vec<TrialOutcome>,
}

impl CellResult {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub rows: SweepAxis,
    pub cols: SweepAxis,
    pub fixed: (Param, usize),
    pub trials: usize,
    pub threshold_db: f64,
    pub master_seed: u64,
    /// Row-major over (rows, cols).
    pub cells: Vec<CellResult>,
}

/// One point of the 50% contour: for a row value, the interpolated column
/// value at which the success rate first reaches one half.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub row_value: usize,
    pub crossing: f64,
}

fn cell_params(
    rows: &SweepAxis,
    cols: &SweepAxis,
    fixed: (Param, usize),
    i: usize,
    j: usize,
) -> Result<(usize, usize, usize)> {
    let mut kpm = [None; 3];
    for (param, v) in [(rows.param, rows.values[i]), (cols.param, cols.values[j]), fixed] {
        let slot = &mut kpm[param as usize];
        if slot.is_some() {
            return Err(Error::Config(format!(
                "parameter {} appears twice in the sweep",
                param.name()
            )));
        }
        *slot = Some(v);
    }
    Ok((kpm[0].unwrap(), kpm[1].unwrap(), kpm[2].unwrap()))
}

/// Runs a single reconstruction trial. `seed` determines the sky, the
/// sketches and the modulations.
pub fn run_trial(setup: &SweepSetup, k: usize, p: usize, m: usize, seed: u64) -> Result<TrialOutcome> {
    let plan = &setup.plan;
    let sky = random_sparse_sky_with_fov(plan.n1(), plan.fov(), k, derive_seed(seed, &[stream::SKY]))?;
    let sketches = Arc::new(SketchEnsemble::draw(
        plan.num_antennas(),
        p,
        plan.num_batches(),
        m,
        setup.distribution,
        derive_seed(seed, &[stream::SKETCH]),
    )?);
    let op = mrop_operator(plan, sketches, setup.backend)?;
    let z = interleave(&op.apply_real(sky.values())?);
    let dense_bytes = 2 * op.rows() * op.cols() * std::mem::size_of::<f64>();
    let dense;
    let view;
    let a: &dyn RealOperator = if dense_bytes <= setup.dense_budget {
        dense = DenseReal::from_complex_op(&op);
        &dense
    } else {
        view = RealView::new(&op);
        &view
    };
    let cfg = SolverConfig {
        seed: derive_seed(seed, &[stream::POWER_ITERATION]),
        ..setup.solver.clone()
    };
    let result = solve_bpdn(a, &z, &cfg)?;
    let snr = snr_db(sky.values(), &result.estimate).unwrap_or(f64::NEG_INFINITY);
    if !result.converged {
        log::info!(
            "trial seed {seed}: solver did not reach the fidelity bound (residual {:e})",
            result.residual
        );
    }
    Ok(TrialOutcome {
        seed,
        snr_db: snr,
        converged: result.converged,
        success: result.converged && snr >= setup.threshold_db,
    })
}

fn read_checkpoint(path: &Path) -> Result<Vec<CellResult>> {
    if !path.exists() {
        return Ok(vec![]);
    }
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut cells = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        // A torn final line from an interrupted write is ignored.
        match serde_json::from_str::<CellResult>(&line) {
            Ok(c) => cells.push(c),
            Err(e) => log::warn!("ignoring unreadable checkpoint line in {}: {e}", path.display()),
        }
    }
    Ok(cells)
}

/// Sweeps the `rows x cols` grid. Trial `t` of cell `(i, j)` uses seed
/// `derive_seed(master_seed, [i, j, t])`. With a checkpoint path, finished
/// cells are appended as JSON lines and skipped when the sweep is resumed.
pub fn phase_transition_sweep(
    setup: &SweepSetup,
    rows: &SweepAxis,
    cols: &SweepAxis,
    master_seed: u64,
    checkpoint: Option<&Path>,
) -> Result<PhaseDiagram> {
    if rows.values.is_empty() || cols.values.is_empty() {
        return Err(Error::Config("sweep grids must be nonempty".into()));
    }
    if setup.trials == 0 {
        return Err(Error::Config("trials per cell must be positive".into()));
    }
    setup.solver.validate()?;
    let done = match checkpoint {
        Some(p) => read_checkpoint(p)?,
        None => vec![],
    };
    let mut cells = Vec::with_capacity(rows.values.len() * cols.values.len());
    for i in 0..rows.values.len() {
        for j in 0..cols.values.len() {
            let (k, p, m) = cell_params(rows, cols, setup.fixed, i, j)?;
            if let Some(c) = done.iter().find(|c| {
                c.row == i && c.col == j && c.trials.len() == setup.trials && (c.k, c.p, c.m) == (k, p, m)
            }) {
                cells.push(c.clone());
                continue;
            }
            let trials = (0..setup.trials)
                .into_par_iter()
                .map(|t| {
                    run_trial(
                        setup,
                        k,
                        p,
                        m,
                        derive_seed(master_seed, &[i as u64, j as u64, t as u64]),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let cell = CellResult {
                row: i,
                col: j,
                k,
                p,
                m,
                successes: trials.iter().filter(|t| t.success).count(),
                trials,
            };
            log::info!("cell K={k} P={p} M={m}: rate {:.3}", cell.rate());
            if let Some(path) = checkpoint {
                let mut f = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| Error::io(path, e))?;
                let line = serde_json::to_string(&cell).map_err(|e| Error::format(path, e))?;
                writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
            }
            cells.push(cell);
        }
    }
    Ok(PhaseDiagram {
        rows: rows.clone(),
        cols: cols.clone(),
        fixed: setup.fixed,
        trials: setup.trials,
        threshold_db: setup.threshold_db,
        master_seed,
        cells,
    })
}

impl PhaseDiagram {
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.cols.values.len() + j].rate()
    }

    /// Rate-weighted linear interpolation of the 50% crossing along each row.
    pub fn frontier(&self) -> Vec<FrontierPoint> {
        let nc = self.cols.values.len();
        (0..self.rows.values.len())
            .filter_map(|i| {
                let rates: Vec<f64> = (0..nc).map(|j| self.rate(i, j)).collect();
                let x: Vec<f64> = self.cols.values.iter().map(|&v| v as f64).collect();
                crossing(&x, &rates, 0.5).map(|c| FrontierPoint {
                    row_value: self.rows.values[i],
                    crossing: c,
                })
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
        w.write_record([
            self.rows.param.name(),
            self.cols.param.name(),
            "rate",
            "successes",
            "S",
        ])
        .map_err(|e| Error::format(path, e))?;
        for (idx, c) in self.cells.iter().enumerate() {
            let (i, j) = (idx / self.cols.values.len(), idx % self.cols.values.len());
            w.write_record(&[
                self.rows.values[i].to_string(),
                self.cols.values[j].to_string(),
                format!("{:.6}", c.rate()),
                c.successes.to_string(),
                c.trials.len().to_string(),
            ])
            .map_err(|e| Error::format(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_frontier_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
        w.write_record([
            self.rows.param.name(),
            &format!("{}_50pct", self.cols.param.name()),
        ])
        .map_err(|e| Error::format(path, e))?;
        for f in self.frontier() {
            w.write_record(&[f.row_value.to_string(), format!("{:.6}", f.crossing)])
                .map_err(|e| Error::format(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Heatmap with black at 0% and white at 100%; first row at the bottom.
    pub fn write_png(&self, path: &Path, cell_px: usize) -> Result<()> {
        let (nr, nc) = (self.rows.values.len(), self.cols.values.len());
        let (w, h) = (nc * cell_px, nr * cell_px);
        let mut values = vec![0.0; w * h];
        for y in 0..h {
            let i = nr - 1 - y / cell_px;
            for x in 0..w {
                values[y * w + x] = self.rate(i, x / cell_px);
            }
        }
        let pixels: Vec<u8> = values.iter().map(|v| (v * 255.0).round() as u8).collect();
        image::GrayImage::from_raw(w as u32, h as u32, pixels)
            .ok_or_else(|| Error::format(path, "pixel buffer size mismatch"))?
            .save(path)
            .map_err(|e| Error::format(path, e))
    }
}

/// First crossing of `level` by piecewise-linear `y(x)`, if any.
pub fn crossing(x: &[f64], y: &[f64], level: f64) -> Option<f64> {
    if y.first().is_some_and(|&v| v >= level) {
        return Some(x[0]);
    }
    for t in 1..x.len() {
        if y[t - 1] < level && y[t] >= level {
            let f = (level - y[t - 1]) / (y[t] - y[t - 1]);
            return Some(x[t - 1] + f * (x[t] - x[t - 1]));
        }
    }
    None
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
