//! Experiment configuration: strict TOML with unknown keys rejected.

use serde::{Deserialize, Serialize};

use diraclab_core::domain::{Geometry, SpinTwist};
use diraclab_core::error::Error;
use diraclab_core::weights::{FamilyKind, FamilyParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spectrum,
    Minmax,
    Continuity,
    Compare,
    Wave,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Minmax => "minmax",
            ExperimentKind::Continuity => "continuity",
            ExperimentKind::Compare => "compare",
            ExperimentKind::Wave => "wave",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub kind: String,
    #[serde(default)]
    pub length: Option<f64>,
    #[serde(default)]
    pub lengths: Option<[f64; 2]>,
    #[serde(default)]
    pub twist: Option<f64>,
    #[serde(default)]
    pub twists: Option<[f64; 2]>,
    #[serde(default)]
    pub chirality: Option<i8>,
    pub resolution: usize,
}

impl GeometryConfig {
    pub fn build(&self) -> Result<Geometry, Error> {
        let geometry = match self.kind.as_str() {
            "circle" => Geometry::CircleS1 {
                length: self.length.ok_or_else(|| Error::Config("circle needs `length`".into()))?,
                twist: SpinTwist::from_delta(self.twist.unwrap_or(0.0))?,
                resolution: self.resolution,
            },
            "interval" => Geometry::IntervalChiral {
                length: self.length.ok_or_else(|| Error::Config("interval needs `length`".into()))?,
                chirality_sign: self.chirality.unwrap_or(1),
                resolution: self.resolution,
            },
            "torus" => {
                let lengths = self
                    .lengths
                    .ok_or_else(|| Error::Config("torus needs `lengths = [L1, L2]`".into()))?;
                let twists = self.twists.unwrap_or([0.0, 0.0]);
                Geometry::Torus2 {
                    lengths,
                    twists: [SpinTwist::from_delta(twists[0])?, SpinTwist::from_delta(twists[1])?],
                    resolution: self.resolution,
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown geometry kind `{other}` (circle | interval | torus)"
                )))
            }
        };
        geometry.validate()?;
        Ok(geometry)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_ell_max")]
    pub ell_max: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_dictionary")]
    pub dictionary_size: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
}

fn default_k_max() -> usize {
    6
}
fn default_ell_max() -> usize {
    3
}
fn default_p() -> f64 {
    4.0
}
fn default_alpha() -> f64 {
    0.5
}
fn default_dictionary() -> usize {
    4
}
fn default_tol() -> f64 {
    1e-7
}
fn default_samples() -> usize {
    64
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            k_max: default_k_max(),
            ell_max: default_ell_max(),
            p: default_p(),
            alpha: default_alpha(),
            dictionary_size: default_dictionary(),
            tol: default_tol(),
            n_samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub kind: String,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub frequency: Option<u32>,
    #[serde(default)]
    pub entries: Option<[f64; 2]>,
}

impl WeightConfig {
    /// Build the weight on a grid. The angular coordinate runs once around
    /// each circle/torus period and over a half period on the interval.
    pub fn build(
        &self,
        grid: &diraclab_core::domain::Grid,
    ) -> Result<diraclab_core::weights::WeightField, Error> {
        use diraclab_core::weights::WeightField;
        let geometry = grid.geometry.clone();
        let theta = move |p: &[f64; 2]| -> f64 {
            match &geometry {
                Geometry::CircleS1 { length, .. } => 2.0 * std::f64::consts::PI * p[0] / length,
                Geometry::IntervalChiral { length, .. } => std::f64::consts::PI * p[0] / length,
                Geometry::Torus2 { lengths, .. } => 2.0 * std::f64::consts::PI * p[0] / lengths[0],
            }
        };
        let a = self.amplitude.unwrap_or(1.0);
        let f = self.frequency.unwrap_or(1) as f64;
        let w = match self.kind.as_str() {
            "identity" => WeightField::identity(grid),
            "constant" => {
                let c = self
                    .value
                    .ok_or_else(|| Error::Config("constant weight needs `value`".into()))?;
                if c <= 0.0 {
                    return Err(Error::Config("constant weight must be positive".into()));
                }
                WeightField::scalar(grid, move |_| c)
            }
            "exp-sin" => WeightField::scalar(grid, move |p| (a * (f * theta(p)).sin()).exp()),
            "sine" => WeightField::scalar(grid, move |p| 1.0 + a * (f * theta(p)).sin()),
            "cosine" => WeightField::scalar(grid, move |p| 1.0 + a * (f * theta(p)).cos()),
            "diag" => {
                let e = self
                    .entries
                    .ok_or_else(|| Error::Config("diag weight needs `entries = [d1, d2]`".into()))?;
                if grid.fiber_dim != 2 {
                    return Err(Error::Config("diag weight needs a two-dimensional fiber".into()));
                }
                WeightField::from_matrix_fn(grid, move |_, s, r| {
                    if s == r {
                        diraclab_core::linalg::cplx(e[s], 0.0)
                    } else {
                        diraclab_core::linalg::ZERO
                    }
                })
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown weight kind `{other}` (identity | constant | exp-sin | sine | cosine | diag)"
                )))
            }
        };
        let tol = diraclab_core::weights::default_spd_tol(&w);
        let report = diraclab_core::weights::validate_spd(&w, tol);
        if !report.ok {
            return Err(Error::Config(format!(
                "configured weight is not positive definite (min eig {})",
                report.min_eig
            )));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub kind: String,
    #[serde(default)]
    pub amplitude: Option<f64>,
    pub members: Vec<usize>,
}

impl FamilyConfig {
    pub fn kind(&self) -> Result<FamilyKind, Error> {
        Ok(match self.kind.as_str() {
            "oscillatory-sine" => FamilyKind::OscillatorySine,
            "oscillatory-squared" => FamilyKind::OscillatorySquared,
            "conformal-exp" => FamilyKind::ConformalExp,
            "random-spd-perturbation" => FamilyKind::RandomSpdPerturbation,
            other => {
                return Err(Error::Config(format!(
                    "unknown family kind `{other}`; see `diraclab list-builtins`"
                )))
            }
        })
    }

    pub fn params(&self, seed: u64) -> FamilyParams {
        FamilyParams { amplitude: self.amplitude.unwrap_or(0.5), seed }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    pub times: Vec<f64>,
    #[serde(default = "default_index_window")]
    pub index_window: usize,
}

fn default_index_window() -> usize {
    3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: String,
    /// Spectrum runs also dump the operator matrices (CSV + binary) when set.
    #[serde(default)]
    pub dump_operators: bool,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub weight: Option<WeightConfig>,
    #[serde(default)]
    pub weight2: Option<WeightConfig>,
    #[serde(default)]
    pub family: Option<FamilyConfig>,
    #[serde(default)]
    pub wave: Option<WaveConfig>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn solver(&self) -> SolverConfig {
        self.solver.clone().unwrap_or_default()
    }

    fn validate(&self) -> Result<(), Error> {
        match self.experiment {
            ExperimentKind::Spectrum | ExperimentKind::Minmax => {
                if self.weight.is_none() {
                    return Err(Error::Config(format!(
                        "experiment `{}` requires a [weight] block",
                        self.experiment.name()
                    )));
                }
            }
            ExperimentKind::Compare => {
                if self.weight.is_none() || self.weight2.is_none() {
                    return Err(Error::Config(
                        "experiment `compare` requires [weight] and [weight2] blocks".into(),
                    ));
                }
            }
            ExperimentKind::Continuity => {
                if self.family.is_none() {
                    return Err(Error::Config(
                        "experiment `continuity` requires a [family] block".into(),
                    ));
                }
            }
            ExperimentKind::Wave => {
                if self.family.is_none() || self.wave.is_none() {
                    return Err(Error::Config(
                        "experiment `wave` requires [family] and [wave] blocks".into(),
                    ));
                }
            }
        }
        if let Some(f) = &self.family {
            if f.members.is_empty() {
                return Err(Error::Config("family `members` must not be empty".into()));
            }
        }
        Ok(())
    }
}
