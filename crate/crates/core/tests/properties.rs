use std::sync::Arc;

use cri_core::acquisition::{
    classical_acquire, compressive_acquire, sample_covariance, simulate_batch, NoiseCovariance,
};
use cri_core::analysis::equivalence::random_grid_plan;
use cri_core::analysis::verify_appendix_equivalences;
use cri_core::geometry::{make_vla_like, synthesize_batches};
use cri_core::linop::{adjoint_mismatch, interleave, norm, DenseReal, LinearOp, Pipeline, RealMatrix};
use cri_core::operators::forward::mrop_operator;
use cri_core::operators::rop::{Modulation, RopBlocks};
use cri_core::operators::{Backend, VisibilityOp};
use cri_core::rng::rng_from_seed;
use cri_core::sky::{random_sparse_sky, random_sparse_sky_with_fov, snr_db};
use cri_core::solver::solve_bpdn;
use cri_core::{
    ArrayLayout, SketchDistribution, SketchEnsemble, SkyImage, SolverConfig, VisibilityPlan, C64,
};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn dist(gaussian: bool) -> SketchDistribution {
    if gaussian {
        SketchDistribution::Gaussian
    } else {
        SketchDistribution::PhaseOnly
    }
}

fn small_instance(seed: u64, rows: usize, n: usize, k: usize) -> (RealMatrix, Vec<f64>, Vec<f64>) {
    let mut rng = rng_from_seed(seed);
    let data: Vec<f64> = (0..rows * n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut x = vec![0.0; n];
    for i in rand::seq::index::sample(&mut rng, n, k) {
        x[i] = 1.0;
    }
    let z: Vec<f64> = data
        .chunks(n)
        .map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum())
        .collect();
    (RealMatrix { rows, cols: n, data }, x, z)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn synthesized_baselines_are_antisymmetric(per_arm in 1usize..5, batches in 1usize..6) {
        let layout = ArrayLayout::new(make_vla_like(per_arm, 1e3).unwrap(), 0.21, batches).unwrap();
        let out = synthesize_batches(&layout);
        prop_assert_eq!(out.len(), batches);
        let q = 3 * per_arm;
        for b in &out {
            let v = b.baselines();
            prop_assert_eq!(v.len(), q * (q - 1));
            for u in &v {
                prop_assert!(u[0] != 0.0 || u[1] != 0.0);
                prop_assert!(v.iter().any(|w| w[0] == -u[0] && w[1] == -u[1]));
            }
        }
        prop_assert_eq!(synthesize_batches(&layout), out);
    }

    #[test]
    fn sparse_skies_have_exact_sparsity(half in 1usize..12, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let side = 2 * half;
        let k = (frac * (side * side) as f64) as usize;
        prop_assert_eq!(random_sparse_sky(side, k, seed).unwrap().sparsity(), k);
    }

    #[test]
    fn sample_covariances_are_hermitian(seed in any::<u64>(), samples in 1usize..200) {
        let plan = random_grid_plan(4, 1, 8, 2.0, seed).unwrap();
        let img = random_sparse_sky_with_fov(8, 2.0, 5, seed).unwrap();
        let b = simulate_batch(&img, &plan, 0, samples, &NoiseCovariance::white(4, 0.3).unwrap(), seed).unwrap();
        let c = sample_covariance(&b).matrix;
        for j in 0..4 {
            for k in 0..4 {
                prop_assert_eq!(c[j * 4 + k], c[k * 4 + j].conj());
            }
        }
    }

    #[test]
    fn streaming_acquisition_matches_explicit_covariances(
        seed in any::<u64>(), p in 1usize..6, m in 1usize..4, gaussian in any::<bool>()
    ) {
        let (q, nb) = (4, 3);
        let plan = random_grid_plan(q, nb, 8, 2.0, seed).unwrap();
        let img = random_sparse_sky_with_fov(8, 2.0, 6, seed ^ 1).unwrap();
        let noise = NoiseCovariance::white(q, 0.1).unwrap();
        let batches: Vec<_> = (0..nb).map(|b| simulate_batch(&img, &plan, b, 64, &noise, seed).unwrap()).collect();
        let s = Arc::new(SketchEnsemble::draw(q, p, nb, m, dist(gaussian), seed ^ 2).unwrap());
        let z = compressive_acquire(&batches, &s, &noise).unwrap();
        let v = classical_acquire(&batches, &noise).unwrap();
        let explicit = Modulation::new(s.clone()).apply(&RopBlocks::new(s).apply(&v).unwrap()).unwrap();
        let d: Vec<C64> = z.iter().zip(&explicit).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&d) <= 1e-12 * norm(&explicit));
    }

    #[test]
    fn compositions_have_consistent_adjoints(
        seed in any::<u64>(), q in 2usize..5, nb in 1usize..4, p in 1usize..6, m in 1usize..4, nudft in any::<bool>()
    ) {
        let plan = random_grid_plan(q, nb, 8, 2.0, seed).unwrap();
        let s = Arc::new(SketchEnsemble::draw(q, p, nb, m, SketchDistribution::Gaussian, seed).unwrap());
        let backend = if nudft { Backend::Nudft } else { Backend::Nufft };
        let op = mrop_operator(&plan, s.clone(), backend).unwrap();
        prop_assert!(adjoint_mismatch(&op, 20, seed) <= 1e-10);
        let pipe = Pipeline::new(vec![
            Arc::new(RopBlocks::new(s.clone())),
            Arc::new(Modulation::new(s)),
        ]).unwrap();
        prop_assert!(adjoint_mismatch(&pipe, 20, seed ^ 3) <= 1e-10);
    }

    #[test]
    fn fast_paths_match_dense_products(
        seed in any::<u64>(), q in 2usize..5, nb in 1usize..4, p in 1usize..7, m in 1usize..4
    ) {
        let r = verify_appendix_equivalences(q, nb, 8, p, m, seed).unwrap();
        prop_assert!(r.passed(), "{:?}", r.failures());
    }

    #[test]
    fn visibility_norm_is_invariant_under_baseline_conjugation(seed in any::<u64>(), q in 2usize..6) {
        let plan = random_grid_plan(q, 2, 16, 4.0, seed).unwrap();
        let mirrored: Vec<Vec<[f64; 2]>> = (0..2)
            .map(|b| plan.positions(b).iter().map(|w| [-w[0], -w[1]]).collect())
            .collect();
        let conj = VisibilityPlan::from_grid_positions(mirrored, 16, 4.0, true).unwrap();
        let img = random_sparse_sky_with_fov(16, 4.0, 7, seed).unwrap();
        let a = VisibilityOp::new(&plan, Backend::Nudft).unwrap().apply_real(img.values()).unwrap();
        let b = VisibilityOp::new(&conj, Backend::Nudft).unwrap().apply_real(img.values()).unwrap();
        prop_assert!((norm(&a) - norm(&b)).abs() <= 1e-12 * norm(&a));
    }

    #[test]
    fn solver_results_are_feasible_monotone_and_nonnegative(seed in any::<u64>(), k in 1usize..4) {
        let (a, _, z) = small_instance(seed, 24, 48, k);
        let cfg = SolverConfig { epsilon: 1e-4, ..SolverConfig::default() };
        let r = solve_bpdn(&a, &z, &cfg).unwrap();
        if r.converged {
            let mut ax = vec![0.0; a.rows];
            cri_core::linop::RealOperator::forward(&a, &r.estimate, &mut ax);
            let res = ax.iter().zip(&z).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            prop_assert!(res <= cfg.epsilon);
            prop_assert!((res - r.residual).abs() <= 1e-12);
        }
        prop_assert!(r.estimate.iter().all(|v| *v >= 0.0));
        let accepted: Vec<f64> = r.history.iter().filter(|h| !h.refinement).map(|h| h.residual).collect();
        for w in accepted.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9), "{:?}", accepted);
        }
    }
}

#[test]
fn bias_removal_centres_pure_noise() {
    let (q, nb, p, m) = (3, 2, 2, 1);
    let plan = random_grid_plan(q, nb, 8, 2.0, 1).unwrap();
    let img = SkyImage::zeros(8, 2.0).unwrap();
    let noise = NoiseCovariance::white(q, 0.5).unwrap();
    let s = Arc::new(SketchEnsemble::draw(q, p, nb, m, SketchDistribution::PhaseOnly, 4).unwrap());
    let trials = 200;
    let draws: Vec<Vec<C64>> = (0..trials)
        .map(|t| {
            let batches: Vec<_> = (0..nb)
                .map(|b| simulate_batch(&img, &plan, b, 50, &noise, 1000 + t).unwrap())
                .collect();
            compressive_acquire(&batches, &s, &noise).unwrap()
        })
        .collect();
    for i in 0..p * m {
        for part in [|z: C64| z.re, |z: C64| z.im] {
            let xs: Vec<f64> = draws.iter().map(|d| part(d[i])).collect();
            let mean = xs.iter().sum::<f64>() / trials as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
            let se = (var / trials as f64).sqrt();
            assert!(mean.abs() <= 5.0 * se, "entry {i}: mean {mean} se {se}");
        }
    }
}

#[test]
fn solver_is_deterministic_across_thread_counts() {
    let plan = random_grid_plan(5, 3, 16, 4.0, 9).unwrap();
    let s = Arc::new(SketchEnsemble::draw(5, 6, 3, 2, SketchDistribution::PhaseOnly, 9).unwrap());
    let img = random_sparse_sky_with_fov(16, 4.0, 3, 9).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let op = mrop_operator(&plan, s.clone(), Backend::Nufft).unwrap();
            let z = interleave(&op.apply_real(img.values()).unwrap());
            let dense = DenseReal::from_complex_op(&op);
            solve_bpdn(&dense, &z, &SolverConfig::default()).unwrap()
        })
    };
    let a = run(1);
    let b = run(1);
    assert_eq!(a.estimate, b.estimate);
    assert_eq!(a.history, b.history);
    let c = run(3);
    let snr = |r: &cri_core::SolverResult| snr_db(img.values(), &r.estimate).unwrap();
    assert!((snr(&a) - snr(&c)).abs() <= 1e-9);
}

#[test]
fn noiseless_limit_is_insensitive_to_epsilon() {
    for seed in 0..5 {
        let (a, x, z) = small_instance(seed, 30, 64, 3);
        let support = |v: &[f64]| -> Vec<usize> { (0..v.len()).filter(|&i| v[i] > 1e-3).collect() };
        let mut supports = Vec::new();
        for eps in [1e-2, 1e-4] {
            let r = solve_bpdn(
                &a,
                &z,
                &SolverConfig {
                    epsilon: eps,
                    ..SolverConfig::default()
                },
            )
            .unwrap();
            assert!(r.converged);
            assert!(snr_db(&x, &r.estimate).unwrap() >= 40.0);
            supports.push(support(&r.estimate));
        }
        assert_eq!(supports[0], supports[1]);
        assert_eq!(supports[0], support(&x));
    }
}
