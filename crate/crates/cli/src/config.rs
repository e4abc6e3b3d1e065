//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use cri_core::acquisition::NoiseCovariance;
use cri_core::analysis::phase::{Param, SweepAxis};
use cri_core::geometry::{make_vla_like, synthesize_batches, Antenna, ArrayLayout, VLA_LATITUDE};
use cri_core::operators::plan::DEFAULT_BAND_FRACTION;
use cri_core::operators::Backend;
use cri_core::rng::rng_from_seed;
use cri_core::{SketchDistribution, SkyImage, SolverConfig, VisibilityPlan};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub array: ArrayConfig,
    pub sky: SkyConfig,
    pub sensing: SensingConfig,
    pub operator: OperatorConfig,
    pub solver: SolverConfig,
    pub sweep: Option<SweepConfig>,
    pub validate: ValidateConfig,
    pub acquire: AcquireConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    #[default]
    Vla,
    /// Uniform in a disc of radius `r_max`.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    /// Antenna CSV (`name,east_m,north_m,up_m`); replaces the generator.
    pub csv: Option<PathBuf>,
    pub generator: Generator,
    pub num_per_arm: usize,
    pub r_max: f64,
    /// Adds an antenna at the array centre (VLA generator only).
    pub central_antenna: bool,
    /// Antenna count for the random generator.
    pub num_antennas: usize,
    pub layout_seed: u64,
    pub wavelength: f64,
    pub num_batches: usize,
    pub declination_deg: f64,
    pub latitude_deg: f64,
    /// Observation length centred on transit.
    pub hours: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig {
            csv: None,
            generator: Generator::Vla,
            num_per_arm: 9,
            r_max: 1e4,
            central_antenna: false,
            num_antennas: 5,
            layout_seed: 0,
            wavelength: 0.21,
            num_batches: 100,
            declination_deg: 45.0,
            latitude_deg: VLA_LATITUDE.to_degrees(),
            hours: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkyConfig {
    pub n1: usize,
    /// Field of view; defaults to `sqrt(n1)`.
    pub fov: Option<f64>,
    pub k: usize,
    /// Sky seed; derived from the master seed when absent.
    pub seed: Option<u64>,
}

impl Default for SkyConfig {
    fn default() -> Self {
        SkyConfig {
            n1: 100,
            fov: None,
            k: 25,
            seed: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementMode {
    /// `z = M D G F x`, optionally with visibility noise.
    #[default]
    Forward,
    /// Simulated antenna signals through the streaming acquisition.
    Acquisition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingConfig {
    pub p: usize,
    pub m: usize,
    pub distribution: SketchDistribution,
    pub mode: MeasurementMode,
    /// Sketch seed; derived from the master seed when absent.
    pub sketch_seed: Option<u64>,
    /// Separate seed for the modulation matrix.
    pub gamma_seed: Option<u64>,
    /// Standard deviation of complex noise added to the visibilities.
    pub sigma_vis: f64,
    /// Antenna noise variance, `Sigma_n = sigma2 I`.
    pub noise_sigma2: f64,
    /// Samples per batch in acquisition mode.
    pub samples: usize,
}

impl Default for SensingConfig {
    fn default() -> Self {
        SensingConfig {
            p: 25,
            m: 12,
            distribution: SketchDistribution::PhaseOnly,
            mode: MeasurementMode::Forward,
            sketch_seed: None,
            gamma_seed: None,
            sigma_vis: 0.0,
            noise_sigma2: 0.0,
            samples: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorConfig {
    pub backend: Backend,
    /// Fraction of `N1/2` the largest baseline is mapped to.
    pub band_fraction: f64,
    /// Largest dense real matrix the solver may materialize, MiB.
    pub dense_budget_mb: usize,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            backend: Backend::Nufft,
            band_fraction: DEFAULT_BAND_FRACTION,
            dense_budget_mb: 1024,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParam {
    pub param: Param,
    pub value: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub rows: SweepAxis,
    pub cols: SweepAxis,
    pub fixed: FixedParam,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_threshold")]
    pub threshold_db: f64,
    #[serde(default = "default_cell_px")]
    pub cell_px: usize,
}

fn default_trials() -> usize {
    20
}

fn default_threshold() -> f64 {
    40.0
}

fn default_cell_px() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub q: usize,
    pub b: usize,
    pub n1: usize,
    pub p: usize,
    pub m: usize,
    pub seeds: u64,
    pub adjoint_trials: usize,
    pub concentration_reps: usize,
    /// Test fixture: wraps the MROP operator in a wrong adjoint.
    pub inject_broken_adjoint: bool,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            q: 4,
            b: 3,
            n1: 8,
            p: 5,
            m: 2,
            seeds: 3,
            adjoint_trials: 20,
            concentration_reps: 10,
            inject_broken_adjoint: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquireConfig {
    /// Also emit classical, Gaussian post-sensing and averaged outputs.
    pub side_by_side: bool,
    /// Averaging threshold as a fraction of the largest baseline frequency.
    pub averaging_fraction: f64,
    /// Consecutive batches per averaging group.
    pub averaging_group: usize,
}

impl Default for AcquireConfig {
    fn default() -> Self {
        AcquireConfig {
            side_by_side: false,
            averaging_fraction: 0.25,
            averaging_group: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub png: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            png: true,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        // Relative CSV paths are taken relative to the config file.
        if let (Some(csv), Some(dir)) = (cfg.array.csv.as_mut(), path.parent()) {
            if csv.is_relative() {
                *csv = dir.join(&*csv);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let a = &self.array;
        if let Some(csv) = &a.csv {
            if !csv.exists() {
                return Err(config_err(format!("array CSV {} does not exist", csv.display())));
            }
        } else {
            match a.generator {
                Generator::Vla if a.num_per_arm == 0 => {
                    return Err(config_err("array.num_per_arm must be at least 1"))
                }
                Generator::Random if a.num_antennas < 2 => {
                    return Err(config_err("array.num_antennas must be at least 2"))
                }
                _ => {}
            }
            if !(a.r_max > 0.0) {
                return Err(config_err("array.r_max must be positive"));
            }
        }
        if a.num_batches == 0 {
            return Err(config_err("array.num_batches must be at least 1"));
        }
        if !(a.wavelength > 0.0) || !(a.hours >= 0.0) {
            return Err(config_err(
                "array.wavelength must be positive and array.hours nonnegative",
            ));
        }
        let s = &self.sky;
        if s.n1 == 0 || !s.n1.is_multiple_of(2) {
            return Err(config_err(format!(
                "sky.n1 must be even and positive, got {}",
                s.n1
            )));
        }
        if s.fov.is_some_and(|f| !(f > 0.0)) {
            return Err(config_err("sky.fov must be positive"));
        }
        if s.k > s.n1 * s.n1 {
            return Err(config_err("sky.k exceeds the pixel count"));
        }
        let e = &self.sensing;
        if e.p == 0 || e.m == 0 {
            return Err(config_err("sensing.p and sensing.m must be at least 1"));
        }
        if e.sigma_vis < 0.0 || e.noise_sigma2 < 0.0 || e.samples == 0 {
            return Err(config_err(
                "noise levels must be nonnegative and sensing.samples positive",
            ));
        }
        if !(self.operator.band_fraction > 0.0 && self.operator.band_fraction <= 1.0) {
            return Err(config_err("operator.band_fraction must lie in (0, 1]"));
        }
        self.solver.validate().map_err(|e| config_err(e.to_string()))?;
        if let Some(sw) = &self.sweep {
            if sw.rows.param == sw.cols.param
                || sw.fixed.param == sw.rows.param
                || sw.fixed.param == sw.cols.param
            {
                return Err(config_err(
                    "sweep rows, cols and fixed must name three different parameters",
                ));
            }
            if sw.rows.values.is_empty() || sw.cols.values.is_empty() || sw.trials == 0 || sw.cell_px == 0 {
                return Err(config_err(
                    "sweep grids, trials and cell_px must be nonempty/positive",
                ));
            }
        }
        if self.acquire.averaging_group == 0 || !(self.acquire.averaging_fraction >= 0.0) {
            return Err(config_err(
                "acquire.averaging_group must be positive and averaging_fraction nonnegative",
            ));
        }
        let v = &self.validate;
        if v.q < 2 || v.b == 0 || v.n1 == 0 || !v.n1.is_multiple_of(2) || v.p == 0 || v.m == 0 || v.seeds == 0
        {
            return Err(config_err(
                "validate section needs q >= 2, even n1 and positive b, p, m, seeds",
            ));
        }
        Ok(())
    }

    pub fn fov(&self) -> f64 {
        self.sky
            .fov
            .unwrap_or_else(|| SkyImage::unit_gain_fov(self.sky.n1))
    }

    pub fn antennas(&self) -> Result<Vec<Antenna>, CliError> {
        let a = &self.array;
        if let Some(csv) = &a.csv {
            return ArrayLayout::read_csv(csv, a.wavelength, a.num_batches)
                .map(|l| l.antennas)
                .map_err(|e| config_err(e.to_string()));
        }
        let mut antennas = match a.generator {
            Generator::Vla => make_vla_like(a.num_per_arm, a.r_max).map_err(|e| config_err(e.to_string()))?,
            Generator::Random => {
                let mut rng = rng_from_seed(a.layout_seed);
                (0..a.num_antennas)
                    .map(|i| {
                        let r = a.r_max * rng.random::<f64>().sqrt();
                        let t = rng.random_range(0.0..std::f64::consts::TAU);
                        Antenna {
                            name: format!("R{i:02}"),
                            enu: [r * t.cos(), r * t.sin(), 0.0],
                        }
                    })
                    .collect()
            }
        };
        if a.central_antenna && a.generator == Generator::Vla {
            antennas.push(Antenna {
                name: "C00".into(),
                enu: [0.0, 0.0, 0.0],
            });
        }
        Ok(antennas)
    }

    pub fn layout(&self) -> Result<ArrayLayout, CliError> {
        let a = &self.array;
        let mut layout = ArrayLayout::new(self.antennas()?, a.wavelength, a.num_batches)
            .map_err(|e| config_err(e.to_string()))?;
        let half = a.hours / 2.0 * std::f64::consts::TAU / 24.0;
        layout.hour_angle_span = (-half, half);
        layout.declination = a.declination_deg.to_radians();
        layout.latitude = a.latitude_deg.to_radians();
        Ok(layout)
    }

    pub fn plan(&self) -> Result<VisibilityPlan, CliError> {
        let batches = synthesize_batches(&self.layout()?);
        VisibilityPlan::from_batches(
            &batches,
            self.sky.n1,
            self.fov(),
            self.operator.band_fraction,
            true,
        )
        .map_err(|e| config_err(e.to_string()))
    }

    pub fn noise(&self, q: usize) -> Result<NoiseCovariance, CliError> {
        if self.sensing.noise_sigma2 == 0.0 {
            Ok(NoiseCovariance::zero(q))
        } else {
            NoiseCovariance::white(q, self.sensing.noise_sigma2).map_err(|e| config_err(e.to_string()))
        }
    }

    pub fn dense_budget(&self) -> usize {
        self.operator.dense_budget_mb << 20
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_describe_the_full_scale_setup() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.layout().unwrap().num_antennas(), 27);
        assert_eq!(cfg.sensing.p * cfg.sensing.m, 300);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<ExperimentConfig>("[sky]\nn2 = 4\n").unwrap_err();
        assert!(err.to_string().contains("n2"));
    }

    #[test]
    fn sweep_section_parses() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            [sweep]
            rows = { param = "K", values = [2, 4] }
            cols = { param = "P", values = [1, 2, 3] }
            fixed = { param = "M", value = 2 }
            trials = 3
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        let sw = cfg.sweep.unwrap();
        assert_eq!(sw.cols.values, vec![1, 2, 3]);
        assert_eq!(sw.threshold_db, 40.0);
    }

    #[test]
    fn odd_grid_is_a_config_error() {
        let mut cfg = ExperimentConfig::default();
        cfg.sky.n1 = 31;
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }
}
