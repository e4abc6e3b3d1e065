use std::sync::Arc;

use cri_core::acquisition::{
    classical_acquire, compressive_acquire, estimate_dc, simulate_batch, SignalBatch,
};
use cri_core::analysis::concentration::{hollow_block_matrix, rop_l1_ratio};
use cri_core::analysis::equivalence::random_grid_plan;
use cri_core::analysis::{
    compression_factor, measure_rop_concentration, phase_transition_sweep, run_adjoint_suite,
    size_accounting, verify_appendix_equivalences, Check, SuiteReport, SweepSetup,
};
use cri_core::geometry::synthesize_batches;
use cri_core::linop::{interleave, DenseMatrix, DenseReal, LinearOp, RealOperator, RealView};
use cri_core::operators::forward::mrop_operator;
use cri_core::operators::postsensing::{add_visibility_noise, gaussian_postsensing, BaselineAveraging};
use cri_core::operators::rop::{Modulation, RopBlocks};
use cri_core::operators::VisibilityOp;
use cri_core::rng::{derive_seed, stream};
use cri_core::sky::{dc_component, random_sparse_sky_with_fov, snr_db};
use cri_core::solver::solve_bpdn;
use cri_core::{SketchEnsemble, SkyImage, VisibilityPlan, C64};
use serde_json::json;

use crate::config::{ExperimentConfig, MeasurementMode};
use crate::manifest::{Recorder, RunManifest};
use crate::CliError;

fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes `name` as interleaved complex-128 plus a JSON sidecar.
fn write_c128(
    rec: &mut Recorder,
    name: &str,
    values: &[C64],
    meta: serde_json::Value,
) -> Result<(), CliError> {
    let path = rec.path(name);
    cri_core::io::write_c128_file(&path, values)?;
    let mut meta = meta;
    meta["length"] = json!(values.len());
    meta["dtype"] = json!("complex128, little-endian (re, im) pairs");
    let sidecar = cri_core::io::sidecar_path(&path);
    cri_core::io::write_json(&sidecar, &meta)?;
    rec.output(name);
    rec.output(&format!("{name}.json"));
    Ok(())
}

fn write_sky(
    rec: &mut Recorder,
    cfg: &ExperimentConfig,
    name: &str,
    img: &SkyImage,
    seed: Option<u64>,
) -> Result<(), CliError> {
    img.write(&rec.path(&format!("{name}.f64")), seed)?;
    rec.output(&format!("{name}.f64"));
    rec.output(&format!("{name}.f64.json"));
    if cfg.output.png {
        img.write_png(&rec.path(&format!("{name}.png")))?;
        rec.output(&format!("{name}.png"));
    }
    Ok(())
}

fn draw_sky(cfg: &ExperimentConfig, rec: &mut Recorder) -> Result<(SkyImage, u64), CliError> {
    let seed = rec.seed(
        "sky",
        cfg.sky
            .seed
            .unwrap_or_else(|| derive_seed(cfg.seed, &[stream::SKY])),
    );
    Ok((
        random_sparse_sky_with_fov(cfg.sky.n1, cfg.fov(), cfg.sky.k, seed)?,
        seed,
    ))
}

fn draw_sketches(
    cfg: &ExperimentConfig,
    plan: &VisibilityPlan,
    rec: &mut Recorder,
) -> Result<SketchEnsemble, CliError> {
    let (q, b) = (plan.num_antennas(), plan.num_batches());
    let e = &cfg.sensing;
    let seed = rec.seed(
        "sketch",
        e.sketch_seed
            .unwrap_or_else(|| derive_seed(cfg.seed, &[stream::SKETCH])),
    );
    let s = SketchEnsemble::draw(q, e.p, b, e.m, e.distribution, seed)?;
    let Some(gseed) = e.gamma_seed else {
        return Ok(s);
    };
    rec.seed("gamma", gseed);
    let g = SketchEnsemble::draw(q, 1, b, e.m, e.distribution, gseed)?;
    let pick = |f: &dyn Fn(usize, usize) -> Vec<C64>| -> Vec<C64> {
        (0..b)
            .flat_map(|bi| (0..e.p).flat_map(move |pi| f(bi, pi)))
            .collect()
    };
    let alphas = pick(&|bi, pi| s.alpha(bi, pi).to_vec());
    let betas = pick(&|bi, pi| s.beta(bi, pi).to_vec());
    Ok(SketchEnsemble::from_parts(
        q,
        e.p,
        b,
        e.m,
        alphas,
        betas,
        g.gamma_matrix().to_vec(),
    )?)
}

fn simulate_all(
    cfg: &ExperimentConfig,
    plan: &VisibilityPlan,
    sky: &SkyImage,
    rec: &mut Recorder,
) -> Result<Vec<SignalBatch>, CliError> {
    let noise = cfg.noise(plan.num_antennas())?;
    let seed = rec.seed("signal", derive_seed(cfg.seed, &[stream::SIGNAL]));
    (0..plan.num_batches())
        .map(|b| {
            simulate_batch(sky, plan, b, cfg.sensing.samples, &noise, seed).map_err(|e| match e {
                cri_core::Error::ResourceGuard(msg) => CliError::Resource(format!(
                    "{msg}; reduce the antenna count, sky.n1 or sensing.samples"
                )),
                other => other.into(),
            })
        })
        .collect()
}

fn measure(
    cfg: &ExperimentConfig,
    plan: &VisibilityPlan,
    sky: &SkyImage,
    sketches: &Arc<SketchEnsemble>,
    op: &dyn LinearOp,
    rec: &mut Recorder,
) -> Result<Vec<C64>, CliError> {
    match cfg.sensing.mode {
        MeasurementMode::Forward if cfg.sensing.sigma_vis == 0.0 => Ok(op.apply_real(sky.values())?),
        MeasurementMode::Forward => {
            let v = VisibilityOp::new(plan, cfg.operator.backend)?.apply_real(sky.values())?;
            let seed = rec.seed("visibility_noise", derive_seed(cfg.seed, &[stream::NOISE]));
            let v = add_visibility_noise(&v, plan.num_antennas(), cfg.sensing.sigma_vis, seed)?;
            let y = RopBlocks::new(sketches.clone()).apply(&v)?;
            Ok(Modulation::new(sketches.clone()).apply(&y)?)
        }
        MeasurementMode::Acquisition => {
            let batches = simulate_all(cfg, plan, sky, rec)?;
            Ok(compressive_acquire(
                &batches,
                sketches,
                &cfg.noise(plan.num_antennas())?,
            )?)
        }
    }
}

pub fn reconstruct(cfg: &ExperimentConfig) -> Result<RunManifest, CliError> {
    let mut rec = Recorder::new("reconstruct", cfg);
    let plan = cfg.plan()?;
    rec.stage("plan");
    let (sky, sky_seed) = draw_sky(cfg, &mut rec)?;
    let sketches = Arc::new(draw_sketches(cfg, &plan, &mut rec)?);
    let op = mrop_operator(&plan, sketches.clone(), cfg.operator.backend)?;
    rec.stage("operator");
    let z = measure(cfg, &plan, &sky, &sketches, &op, &mut rec)?;
    rec.stage("measurements");

    let dense_bytes = 2 * op.rows() * op.cols() * std::mem::size_of::<f64>();
    let dense;
    let view;
    let a: &dyn RealOperator = if dense_bytes <= cfg.dense_budget() {
        dense = DenseReal::from_complex_op(&op);
        &dense
    } else {
        view = RealView::new(&op);
        &view
    };
    let result = solve_bpdn(a, &interleave(&z), &cfg.solver)?;
    rec.stage("solve");
    if !result.converged {
        log::warn!(
            "solver stopped with residual {:e} above epsilon {:e}",
            result.residual,
            cfg.solver.epsilon
        );
    }

    let estimate = SkyImage::from_values(
        sky.side(),
        sky.fov(),
        result.estimate.iter().map(|v| v.max(0.0)).collect(),
    )?;
    let snr = snr_db(sky.values(), &result.estimate)?;
    write_sky(&mut rec, cfg, "truth", &sky, Some(sky_seed))?;
    write_sky(&mut rec, cfg, "estimate", &estimate, None)?;
    let (p, m) = (cfg.sensing.p, cfg.sensing.m);
    write_c128(
        &mut rec,
        "z.c128",
        &z,
        json!({ "index": "m * P + p", "P": p, "M": m }),
    )?;
    let diag_path = rec.path("solver.jsonl");
    let mut f = std::fs::File::create(&diag_path).map_err(|e| io_err(&diag_path, e))?;
    result
        .write_diagnostics(&mut f)
        .map_err(|e| io_err(&diag_path, e))?;
    rec.output("solver.jsonl");
    let (q, b) = (plan.num_antennas(), plan.num_batches());
    rec.summary(json!({
        "snr_db": snr,
        "converged": result.converged,
        "residual": result.residual,
        "lambda": result.lambda,
        "inner_iterations": result.inner_iterations,
        "outer_iterations": result.outer_iterations,
        "K": cfg.sky.k, "N1": cfg.sky.n1, "Q": q, "B": b, "P": p, "M": m,
        "compression_factor_pct": compression_factor(p as f64, m as f64, q, b).ok(),
    }));
    rec.stage("outputs");
    rec.finish()
}

pub fn phase_diagram(cfg: &ExperimentConfig) -> Result<RunManifest, CliError> {
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("phase-diagram needs a [sweep] section".into()))?;
    let mut rec = Recorder::new("phase-diagram", cfg);
    let setup = SweepSetup {
        plan: cfg.plan()?,
        backend: cfg.operator.backend,
        distribution: cfg.sensing.distribution,
        solver: cfg.solver.clone(),
        threshold_db: sw.threshold_db,
        trials: sw.trials,
        fixed: (sw.fixed.param, sw.fixed.value),
        dense_budget: cfg.dense_budget(),
    };
    rec.stage("plan");
    let checkpoint = rec.path("checkpoint.jsonl");
    let diagram = phase_transition_sweep(&setup, &sw.rows, &sw.cols, cfg.seed, Some(&checkpoint))?;
    rec.stage("sweep");
    rec.output("checkpoint.jsonl");
    diagram.write_csv(&rec.path("phase.csv"))?;
    rec.output("phase.csv");
    diagram.write_frontier_csv(&rec.path("frontier.csv"))?;
    rec.output("frontier.csv");
    if cfg.output.png {
        diagram.write_png(&rec.path("phase.png"), sw.cell_px)?;
        rec.output("phase.png");
    }
    let rates: Vec<Vec<f64>> = (0..sw.rows.values.len())
        .map(|i| (0..sw.cols.values.len()).map(|j| diagram.rate(i, j)).collect())
        .collect();
    let frontier: Vec<_> = diagram
        .frontier()
        .iter()
        .map(|f| json!([f.row_value, f.crossing]))
        .collect();
    rec.summary(json!({
        "rows": sw.rows, "cols": sw.cols, "fixed": sw.fixed, "trials": sw.trials,
        "rates": rates, "frontier": frontier,
    }));
    rec.stage("outputs");
    rec.finish()
}

fn concentration_checks(cfg: &ExperimentConfig, rec: &mut Recorder) -> Result<Vec<Check>, CliError> {
    let v = &cfg.validate;
    let fov = SkyImage::unit_gain_fov(v.n1);
    let seed = rec.seed("concentration", derive_seed(cfg.seed, &[100]));
    let mut tighter = 0;
    for rep in 0..v.concentration_reps as u64 {
        let plan = random_grid_plan(v.q, v.b, v.n1, fov, derive_seed(seed, &[rep, 0]))?;
        let k = (v.n1 * v.n1 / 8).max(1);
        let img = random_sparse_sky_with_fov(v.n1, fov, k, derive_seed(seed, &[rep, 1]))?;
        let j = hollow_block_matrix(&img, &plan)?;
        let r = measure_rop_concentration(
            &[j],
            &[10, 200],
            20,
            cfg.sensing.distribution,
            derive_seed(seed, &[rep, 2]),
        )?;
        tighter += usize::from(r[1].spread() < r[0].spread());
    }
    let reps = v.concentration_reps.max(1) as f64;
    let mut data = vec![C64::default(); v.q * v.q];
    data[1] = C64::new(0.6, -0.8);
    let single = DenseMatrix::new(v.q, v.q, data)?;
    let unit = rop_l1_ratio(&single, 13, cri_core::SketchDistribution::PhaseOnly, seed)?;
    Ok(vec![
        Check::new(
            "concentration: l1 ratio spread shrinks from P=10 to P=200",
            1.0 - tighter as f64 / reps,
            0.1,
        ),
        Check::new(
            "concentration: single off-diagonal entry has unit ratio",
            (unit - 1.0).abs(),
            1e-12,
        ),
    ])
}

pub fn validate(cfg: &ExperimentConfig) -> Result<RunManifest, CliError> {
    let v = &cfg.validate;
    let mut rec = Recorder::new("validate", cfg);
    let mut report = SuiteReport::default();
    for s in 0..v.seeds {
        let seed = derive_seed(cfg.seed, &[200, s]);
        let mut r = verify_appendix_equivalences(v.q, v.b, v.n1, v.p, v.m, seed)?;
        r.checks
            .iter_mut()
            .for_each(|c| c.name = format!("{} (seed {s})", c.name));
        report.extend(r);
    }
    rec.stage("equivalences");
    let seed = rec.seed("adjoint", derive_seed(cfg.seed, &[300]));
    let plan = random_grid_plan(v.q, v.b, v.n1, SkyImage::unit_gain_fov(v.n1), seed)?;
    let sketches = Arc::new(SketchEnsemble::draw(
        v.q,
        v.p,
        v.b,
        v.m,
        cfg.sensing.distribution,
        seed,
    )?);
    report.extend(run_adjoint_suite(
        &plan,
        sketches,
        v.adjoint_trials,
        seed,
        v.inject_broken_adjoint,
    )?);
    rec.stage("adjoints");
    report.checks.extend(concentration_checks(cfg, &mut rec)?);
    rec.stage("concentration");

    for c in &report.checks {
        println!(
            "{} {} (error {:.3e}, tolerance {:.1e})",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.error,
            c.tolerance
        );
    }
    cri_core::io::write_json(&rec.path("validate.json"), &report)?;
    rec.output("validate.json");
    let failures: Vec<String> = report.failures().iter().map(|c| c.name.clone()).collect();
    rec.summary(json!({ "checks": report.checks.len(), "passed": report.passed(), "failures": failures }));
    let manifest = rec.finish()?;
    if failures.is_empty() {
        Ok(manifest)
    } else {
        Err(CliError::Validation(failures.join("; ")))
    }
}

pub fn acquire(cfg: &ExperimentConfig) -> Result<RunManifest, CliError> {
    let mut rec = Recorder::new("acquire", cfg);
    let plan = cfg.plan()?;
    let (q, b) = (plan.num_antennas(), plan.num_batches());
    let (p, m) = (cfg.sensing.p, cfg.sensing.m);
    rec.stage("plan");
    let (sky, sky_seed) = draw_sky(cfg, &mut rec)?;
    let sketches = draw_sketches(cfg, &plan, &mut rec)?;
    let batches = simulate_all(cfg, &plan, &sky, &mut rec)?;
    rec.stage("simulation");
    let noise = cfg.noise(q)?;
    let z = compressive_acquire(&batches, &sketches, &noise)?;
    rec.stage("acquisition");
    write_sky(&mut rec, cfg, "truth", &sky, Some(sky_seed))?;
    write_c128(
        &mut rec,
        "z.c128",
        &z,
        json!({ "index": "m * P + p", "P": p, "M": m }),
    )?;

    let accounting = size_accounting(q, b, p, m);
    let acc_path = rec.path("accounting.csv");
    let mut w = csv::Writer::from_path(&acc_path).map_err(|e| io_err(&acc_path, e))?;
    for row in &accounting {
        w.serialize(row).map_err(|e| io_err(&acc_path, e))?;
    }
    w.flush().map_err(|e| io_err(&acc_path, e))?;
    rec.output("accounting.csv");

    let mut summary = json!({
        "z_length": z.len(),
        "accounting": accounting,
        "dc_estimate": estimate_dc(&batches, &noise, plan.visibility_scale())?,
        "dc_true": dc_component(&sky),
        "Q": q, "B": b, "P": p, "M": m, "I": cfg.sensing.samples,
    });
    if cfg.acquire.side_by_side {
        let v = classical_acquire(&batches, &noise)?;
        write_c128(
            &mut rec,
            "classical.c128",
            &v,
            json!({ "index": "b * Q^2 + j * Q + k" }),
        )?;
        let seed = rec.seed(
            "gaussian_projection",
            derive_seed(cfg.seed, &[stream::GAUSSIAN_PROJECTION]),
        );
        let g: Vec<C64> = v
            .chunks(q * q)
            .enumerate()
            .flat_map(|(bi, vb)| gaussian_postsensing(derive_seed(seed, &[bi as u64]), vb, p))
            .collect();
        write_c128(
            &mut rec,
            "gaussian.c128",
            &g,
            json!({ "index": "b * P + p", "P": p }),
        )?;
        let threshold = cfg.acquire.averaging_fraction * plan.max_frequency();
        let avg = BaselineAveraging::new(&plan, threshold, cfg.acquire.averaging_group)?.apply(&v)?;
        write_c128(
            &mut rec,
            "averaged.c128",
            &avg,
            json!({ "threshold_grid_units": threshold, "group": cfg.acquire.averaging_group }),
        )?;
        summary["classical_length"] = json!(v.len());
        summary["gaussian_length"] = json!(g.len());
        summary["averaged_length"] = json!(avg.len());
    }
    rec.summary(summary);
    rec.stage("outputs");
    rec.finish()
}

pub fn make_array(cfg: &ExperimentConfig) -> Result<RunManifest, CliError> {
    let mut rec = Recorder::new("make-array", cfg);
    let layout = cfg.layout()?;
    layout.write_csv(&rec.path("array.csv"))?;
    rec.output("array.csv");
    let batches = synthesize_batches(&layout);
    let plan = cfg.plan()?;
    plan.write(&rec.path("plan.bin"))?;
    rec.output("plan.bin");
    rec.output("plan.bin.json");
    let q = layout.num_antennas();
    rec.summary(json!({
        "Q": q,
        "B": batches.len(),
        "visibilities": q * (q - 1) * batches.len(),
        "collisions": plan.count_collisions(1e-9),
        "max_frequency": plan.max_frequency(),
        "scale": plan.scale(),
    }));
    rec.stage("outputs");
    rec.finish()
}
