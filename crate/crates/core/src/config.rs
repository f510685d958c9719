//! Plain-text configuration: TOML sections `gravity`, `ranges`, `screen`,
//! `scaling`, `run`, `gp`, `nn` and `sweep`. Tuples written with
//! parentheses, e.g. `zonals = [(2, 1.93e-2), (3, -1.22e-3)]`, are accepted
//! as arrays.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{calibrate_accel_scale, ElementRanges, NoiseSpec, DEFAULT_SIPHON_FRACTION};
use crate::dynamics::{CollisionScreen, DEFAULT_STEPS_PER_PERIOD};
use crate::gp::GpTrainConfig;
use crate::gravity::{ZonalGravityField, BENNU_ZONALS};
use crate::nn::NnTrainConfig;
use crate::{Error, Result};

/// Seed of the fixed domain sample used to calibrate the acceleration scale.
pub const ACCEL_SCALE_SEED: u64 = 0x5ca1e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    Gp,
    Nn,
    /// The truth field itself; a test hook with zero error.
    Truth,
}

impl Framework {
    pub fn as_str(&self) -> &'static str {
        match self {
            Framework::Gp => "gp",
            Framework::Nn => "nn",
            Framework::Truth => "truth",
        }
    }
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Framework {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gp" => Ok(Framework::Gp),
            "nn" => Ok(Framework::Nn),
            "truth" => Ok(Framework::Truth),
            other => Err(Error::Config(format!("unknown framework {other:?}"))),
        }
    }
}

/// Propagation lengths, in instantaneous Keplerian periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataVolume {
    pub preset: VolumePreset,
    pub train_periods: f64,
    pub extrap_periods: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumePreset {
    Moderate,
    Low,
    Explicit,
}

impl DataVolume {
    pub fn moderate() -> Self {
        Self {
            preset: VolumePreset::Moderate,
            train_periods: 100.0,
            extrap_periods: 10.0,
        }
    }

    pub fn low() -> Self {
        Self {
            preset: VolumePreset::Low,
            train_periods: 10.0,
            extrap_periods: 3.0,
        }
    }

    pub fn explicit(train_periods: f64, extrap_periods: f64) -> Self {
        Self {
            preset: VolumePreset::Explicit,
            train_periods,
            extrap_periods,
        }
    }
}

/// Physical context shared by every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextConfig {
    pub field: ZonalGravityField,
    pub ranges: ElementRanges,
    pub screen: CollisionScreen,
    pub accel_scale: f64,
}

impl ContextConfig {
    /// Bennu in normalized units with the default element ranges.
    pub fn paper_default() -> Result<Self> {
        Self::with_calibrated_scale(
            ZonalGravityField::bennu_normalized(),
            ElementRanges::default(),
            CollisionScreen::default(),
        )
    }

    pub fn with_calibrated_scale(field: ZonalGravityField, ranges: ElementRanges, screen: CollisionScreen) -> Result<Self> {
        let accel_scale = calibrate_accel_scale(&field, &ranges, ACCEL_SCALE_SEED)?;
        Ok(Self {
            field,
            ranges,
            screen,
            accel_scale,
        })
    }
}

/// Everything that configures a single characterization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub framework: Framework,
    pub volume: DataVolume,
    pub samples_per_period: u32,
    pub steps_per_period: u32,
    pub siphon_fraction: f64,
    pub noise: NoiseSpec,
    pub base_seed: u64,
    pub gp: GpTrainConfig,
    pub nn: NnTrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            framework: Framework::Gp,
            volume: DataVolume::moderate(),
            samples_per_period: 25,
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
            siphon_fraction: DEFAULT_SIPHON_FRACTION,
            noise: NoiseSpec::none(),
            base_seed: 0,
            gp: GpTrainConfig::default(),
            nn: NnTrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.gp.validate()?;
        self.nn.validate()?;
        if !(self.siphon_fraction > 0.0 && self.siphon_fraction < 1.0) {
            return Err(Error::Config("siphon_fraction must lie in (0, 1)".into()));
        }
        if self.samples_per_period == 0 || self.steps_per_period == 0 {
            return Err(Error::Config("samples/steps per period must be positive".into()));
        }
        if !(self.volume.train_periods > 0.0 && self.volume.extrap_periods > 0.0) {
            return Err(Error::Config("propagation lengths must be positive".into()));
        }
        Ok(())
    }
}

/// One parameter realization inside a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepInstance {
    pub framework: Framework,
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub instances: Vec<SweepInstance>,
    /// Worker threads; 0 means all available cores.
    pub threads: usize,
}

impl SweepSpec {
    /// Frameworks crossed with a state-noise grid (acceleration noise fixed
    /// at zero) and an acceleration-noise grid (state noise fixed at zero).
    pub fn grid(base: RunConfig, frameworks: &[Framework], sigma_state: &[f64], sigma_accel: &[f64]) -> Self {
        let mut instances = Vec::new();
        for &framework in frameworks {
            let mut noises: Vec<NoiseSpec> = Vec::new();
            for &s in sigma_state {
                noises.push(NoiseSpec {
                    sigma_state: s,
                    sigma_accel: 0.0,
                });
            }
            for &a in sigma_accel {
                let n = NoiseSpec {
                    sigma_state: 0.0,
                    sigma_accel: a,
                };
                if !noises.contains(&n) {
                    noises.push(n);
                }
            }
            if noises.is_empty() {
                noises.push(base.noise);
            }
            instances.extend(noises.into_iter().map(|noise| SweepInstance { framework, noise }));
        }
        Self {
            base,
            instances,
            threads: 0,
        }
    }

    pub fn run_config(&self, instance: &SweepInstance) -> RunConfig {
        RunConfig {
            framework: instance.framework,
            noise: instance.noise,
            ..self.base.clone()
        }
    }
}

/// A fully resolved configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub context: ContextConfig,
    pub run: RunConfig,
    pub sweep: SweepSpec,
    /// IC list named in the `run` section, if any.
    pub ics: Option<PathBuf>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(p) = &cfg.ics {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.ics = Some(base.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let normalized = tuples_to_arrays(text);
        let file: FileConfig = toml::from_str(&normalized).map_err(|e| Error::Config(e.to_string()))?;
        file.resolve()
    }

    /// Canonical JSON echo of every resolved value, defaults included.
    pub fn echo_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        crate::seed::sha256_hex(self.echo_json().as_bytes())
    }
}

/// Rewrites `(`/`)` to `[`/`]` outside strings and comments.
fn tuples_to_arrays(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let mut in_str: Option<char> = None;
        let mut comment = false;
        for c in line.chars() {
            if comment {
                out.push(c);
                continue;
            }
            match (in_str, c) {
                (None, '"') | (None, '\'') => {
                    in_str = Some(c);
                    out.push(c);
                }
                (Some(q), _) if c == q => {
                    in_str = None;
                    out.push(c);
                }
                (None, '#') => {
                    comment = true;
                    out.push(c);
                }
                (None, '(') => out.push('['),
                (None, ')') => out.push(']'),
                _ => out.push(c),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    gravity: GravitySection,
    ranges: RangesSection,
    screen: ScreenSection,
    scaling: ScalingSection,
    run: RunSection,
    gp: GpSection,
    nn: NnSection,
    sweep: SweepSection,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GravitySection {
    mu: f64,
    reference_radius: f64,
    zonals: Vec<(u32, f64)>,
}

impl Default for GravitySection {
    fn default() -> Self {
        Self {
            mu: 1.0,
            reference_radius: 1.0,
            zonals: BENNU_ZONALS.to_vec(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RangesSection {
    semi_major: Option<(f64, f64)>,
    eccentricity: Option<(f64, f64)>,
    inclination_deg: Option<(f64, f64)>,
    raan_deg: Option<(f64, f64)>,
    arg_periapsis_deg: Option<(f64, f64)>,
    true_anomaly_deg: Option<(f64, f64)>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScreenSection {
    periods: Option<f64>,
    radius: Option<f64>,
    steps_per_period: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScalingSection {
    accel_scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunSection {
    framework: Option<String>,
    preset: Option<String>,
    train_periods: Option<f64>,
    extrap_periods: Option<f64>,
    samples_per_period: Option<u32>,
    steps_per_period: Option<u32>,
    siphon_fraction: Option<f64>,
    sigma_state: Option<f64>,
    sigma_accel: Option<f64>,
    base_seed: Option<u64>,
    ics: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GpSection {
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    jitter: Option<f64>,
    /// 0 disables subset fitting.
    fit_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NnSection {
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    lipschitz_budget: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepSection {
    frameworks: Option<Vec<String>>,
    sigma_state: Option<Vec<f64>>,
    sigma_accel: Option<Vec<f64>>,
    threads: Option<usize>,
}

impl FileConfig {
    fn resolve(self) -> Result<Config> {
        let field = ZonalGravityField::new(self.gravity.mu, self.gravity.reference_radius, self.gravity.zonals)?;
        let d = ElementRanges::default();
        let r = &self.ranges;
        let ranges = ElementRanges {
            semi_major: r.semi_major.unwrap_or(d.semi_major),
            eccentricity: r.eccentricity.unwrap_or(d.eccentricity),
            inclination_deg: r.inclination_deg.unwrap_or(d.inclination_deg),
            raan_deg: r.raan_deg.unwrap_or(d.raan_deg),
            arg_periapsis_deg: r.arg_periapsis_deg.unwrap_or(d.arg_periapsis_deg),
            true_anomaly_deg: r.true_anomaly_deg.unwrap_or(d.true_anomaly_deg),
        };
        ranges.validate()?;
        let ds = CollisionScreen::default();
        let screen = CollisionScreen {
            periods: self.screen.periods.unwrap_or(ds.periods),
            radius: self.screen.radius.unwrap_or(field.reference_radius()),
            steps_per_period: self.screen.steps_per_period.unwrap_or(ds.steps_per_period),
        };
        if !(screen.periods > 0.0 && screen.radius >= 0.0 && screen.steps_per_period > 0) {
            return Err(Error::Config("invalid collision screen settings".into()));
        }
        let context = match self.scaling.accel_scale {
            Some(s) if s > 0.0 && s.is_finite() => ContextConfig {
                field,
                ranges,
                screen,
                accel_scale: s,
            },
            Some(s) => return Err(Error::Config(format!("accel_scale must be positive, got {s}"))),
            None => ContextConfig::with_calibrated_scale(field, ranges, screen)?,
        };

        let rs = &self.run;
        let volume = match rs.preset.as_deref().unwrap_or("moderate") {
            "moderate" | "low" if rs.train_periods.is_some() || rs.extrap_periods.is_some() => {
                return Err(Error::Config(
                    "train_periods/extrap_periods require preset = \"explicit\"".into(),
                ))
            }
            "moderate" => DataVolume::moderate(),
            "low" => DataVolume::low(),
            "explicit" => match (rs.train_periods, rs.extrap_periods) {
                (Some(t), Some(e)) => DataVolume::explicit(t, e),
                _ => {
                    return Err(Error::Config(
                        "explicit preset needs train_periods and extrap_periods".into(),
                    ))
                }
            },
            other => return Err(Error::Config(format!("unknown data-volume preset {other:?}"))),
        };
        let base = RunConfig::default();
        let gp_default = GpTrainConfig::default();
        let nn_default = NnTrainConfig::default();
        let run = RunConfig {
            framework: rs.framework.as_deref().unwrap_or("gp").parse()?,
            volume,
            samples_per_period: rs.samples_per_period.unwrap_or(base.samples_per_period),
            steps_per_period: rs.steps_per_period.unwrap_or(base.steps_per_period),
            siphon_fraction: rs.siphon_fraction.unwrap_or(base.siphon_fraction),
            noise: NoiseSpec {
                sigma_state: rs.sigma_state.unwrap_or(0.0),
                sigma_accel: rs.sigma_accel.unwrap_or(0.0),
            },
            base_seed: rs.base_seed.unwrap_or(0),
            gp: GpTrainConfig {
                epochs: self.gp.epochs.unwrap_or(gp_default.epochs),
                learning_rate: self.gp.learning_rate.unwrap_or(gp_default.learning_rate),
                jitter: self.gp.jitter.unwrap_or(gp_default.jitter),
                fit_points: match self.gp.fit_points {
                    Some(0) => None,
                    Some(n) => Some(n),
                    None => gp_default.fit_points,
                },
            },
            nn: NnTrainConfig {
                epochs: self.nn.epochs.unwrap_or(nn_default.epochs),
                learning_rate: self.nn.learning_rate.unwrap_or(nn_default.learning_rate),
                batch_size: self.nn.batch_size.or(nn_default.batch_size),
                lipschitz_budget: self.nn.lipschitz_budget.unwrap_or(nn_default.lipschitz_budget),
                seed: 0,
            },
        };
        run.validate()?;

        let frameworks: Vec<Framework> = match &self.sweep.frameworks {
            Some(list) => list.iter().map(|s| s.parse()).collect::<Result<_>>()?,
            None => vec![run.framework],
        };
        let sigma_state = self.sweep.sigma_state.clone().unwrap_or_default();
        let sigma_accel = self.sweep.sigma_accel.clone().unwrap_or_default();
        if sigma_state.iter().chain(&sigma_accel).any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::Config("sweep sigmas must be nonnegative".into()));
        }
        let mut sweep = SweepSpec::grid(run.clone(), &frameworks, &sigma_state, &sigma_accel);
        sweep.threads = self.sweep.threads.unwrap_or(0);

        Ok(Config {
            context,
            run,
            sweep,
            ics: self.run.ics,
        })
    }
}
