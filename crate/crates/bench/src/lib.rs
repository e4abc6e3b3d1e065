//! Shared fixtures for the criterion benches.

use std::sync::Arc;

use cri_core::geometry::{make_vla_like, synthesize_batches};
use cri_core::operators::plan::DEFAULT_BAND_FRACTION;
use cri_core::sky::random_sparse_sky_with_fov;
use cri_core::{ArrayLayout, SketchDistribution, SketchEnsemble, SkyImage, VisibilityPlan};

/// VLA-like plan with `3 * per_arm` antennas and `batches` batches.
pub fn vla_plan(per_arm: usize, batches: usize, n1: usize) -> VisibilityPlan {
    let layout = ArrayLayout::new(make_vla_like(per_arm, 1e4).unwrap(), 0.21, batches).unwrap();
    VisibilityPlan::from_batches(
        &synthesize_batches(&layout),
        n1,
        SkyImage::unit_gain_fov(n1),
        DEFAULT_BAND_FRACTION,
        true,
    )
    .unwrap()
}

pub fn sketches(plan: &VisibilityPlan, p: usize, m: usize) -> Arc<SketchEnsemble> {
    Arc::new(
        SketchEnsemble::draw(
            plan.num_antennas(),
            p,
            plan.num_batches(),
            m,
            SketchDistribution::PhaseOnly,
            1,
        )
        .unwrap(),
    )
}

pub fn sky(plan: &VisibilityPlan, k: usize) -> SkyImage {
    random_sparse_sky_with_fov(plan.n1(), plan.fov(), k, 2).unwrap()
}
