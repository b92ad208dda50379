//! Run configuration: dataset variant tags, scenario files and the per-stage
//! parameter blocks, resolved into one [`RunConfig`] with a stable hash.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::detector::DetectorParams;
use crate::error::{Error, Result};
use crate::eval::EvalParams;
use crate::fusion::RoiSpec;
use crate::noise::NoiseSpec;
use crate::refine::RefineParams;
use crate::sim::{Layout, ScenarioConfig};
use crate::tracker::TrackerParams;

/// Dataset family: baseline, noisy, test track, real recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    B,
    N,
    T,
    R,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::B => "b",
            Family::N => "n",
            Family::T => "t",
            Family::R => "r",
        }
    }

    pub fn is_noisy(self) -> bool {
        matches!(self, Family::N | Family::T)
    }

    pub fn default_layout(self) -> Layout {
        match self {
            Family::T | Family::R => Layout::E,
            _ => Layout::A,
        }
    }

    /// Region of interest and ground handling of the family.
    pub fn default_roi(self) -> RoiSpec {
        let base = RoiSpec::default();
        match self {
            Family::B => base,
            Family::N => RoiSpec { ground_band: 0.25, ..base },
            Family::T | Family::R => RoiSpec {
                x_range: [-40.0, 40.0],
                y_range: [-40.0, 40.0],
                ground_band: 0.25,
                ground_keep_fraction: 0.0,
                ..base
            },
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "b" => Ok(Family::B),
            "n" => Ok(Family::N),
            "t" => Ok(Family::T),
            "r" => Ok(Family::R),
            other => Err(Error::validation(format!("unknown dataset family `{other}` (expected b, n, t or r)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Fused,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "s" => Ok(Mode::Single),
            "fused" | "f" => Ok(Mode::Fused),
            other => Err(Error::validation(format!("unknown mode `{other}` (expected single or fused)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Single => "single",
            Mode::Fused => "fused",
        })
    }
}

/// Dataset variant tag such as `n-f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Variant {
    pub family: Family,
    pub mode: Mode,
}

impl Variant {
    pub const fn new(family: Family, mode: Mode) -> Self {
        Self { family, mode }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = match self.mode {
            Mode::Single => "s",
            Mode::Fused => "f",
        };
        write!(f, "{}-{m}", self.family.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (fam, mode) = s
            .split_once('-')
            .ok_or_else(|| Error::validation(format!("variant `{s}` must look like `n-f`")))?;
        if mode.len() != 1 {
            return Err(Error::validation(format!("variant `{s}` must end in -s or -f")));
        }
        Ok(Self::new(fam.parse()?, mode.parse()?))
    }
}

impl Serialize for Variant {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Run configuration file as written by the user. Missing blocks take the
/// defaults of the variant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    pub variant: Option<Variant>,
    pub seed: Option<u64>,
    /// Sensor used in single mode; defaults to the lowest id.
    pub sensor: Option<u32>,
    /// Scenario file, relative to the run configuration.
    pub scenario: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Stage the pre-processed frames of a pipeline run.
    pub write_frames: Option<bool>,
    pub noise: Option<NoiseSpec>,
    pub roi: Option<RoiSpec>,
    pub detector: Option<DetectorParams>,
    pub tracker: Option<TrackerParams>,
    pub refine: Option<RefineParams>,
    pub eval: Option<EvalParams>,
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub variant: Option<Variant>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub sensor: Option<u32>,
    pub point_sigma: Option<f64>,
    pub pos_sigma: Option<f64>,
    pub rot_sigma: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub variant: Variant,
    pub seed: u64,
    pub sensor: Option<u32>,
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub write_frames: bool,
    pub scenario: ScenarioConfig,
    pub noise: NoiseSpec,
    pub roi: RoiSpec,
    pub detector: DetectorParams,
    pub tracker: TrackerParams,
    pub refine: RefineParams,
    pub eval: EvalParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::resolve(RunConfigFile::default(), None, &Overrides::default()).expect("defaults are valid")
    }
}

fn toml_error(path: &Path, text: &str, e: toml::de::Error) -> Error {
    let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.message().to_string(),
    }
}

fn read_toml<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| toml_error(path, &text, e))
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    read_toml(path)
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        read_toml(path)
    }
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        Self::resolve(RunConfigFile::load(path)?, path.parent(), overrides)
    }

    /// Applies variant defaults and overrides. `base` resolves a relative
    /// scenario path.
    pub fn resolve(file: RunConfigFile, base: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut variant = o.variant.or(file.variant).unwrap_or(Variant::new(Family::N, Mode::Fused));
        if let Some(mode) = o.mode {
            if o.variant.is_some() && mode != variant.mode {
                return Err(Error::validation(format!("--mode {mode} contradicts variant {variant}")));
            }
            variant.mode = mode;
        }
        let family = variant.family;

        let mut scenario = match &file.scenario {
            Some(p) => load_scenario(&base.map_or_else(|| p.clone(), |b| b.join(p)))?,
            None => ScenarioConfig {
                layout: family.default_layout(),
                ..ScenarioConfig::default()
            },
        };
        let scenario_noise = scenario.noise.take();
        if family == Family::T && scenario.layout != Layout::E {
            return Err(Error::validation(format!("variant {variant} requires layout E, scenario uses {}", scenario.layout)));
        }
        let seed = o.seed.or(file.seed).unwrap_or(scenario.seed);
        scenario.seed = seed;

        let explicit_sigma = [o.point_sigma, o.pos_sigma, o.rot_sigma].iter().any(|s| s.is_some_and(|v| v != 0.0));
        let mut noise = if family.is_noisy() {
            file.noise.or(scenario_noise).unwrap_or_default()
        } else {
            let given = file.noise.or(scenario_noise);
            if explicit_sigma || given.is_some_and(|n| n.point_sigma != 0.0 || n.pos_sigma != 0.0 || n.rot_sigma != 0.0) {
                return Err(Error::validation(format!("variant {variant} is noise-free, but noise sigmas were given")));
            }
            NoiseSpec::none()
        };
        noise.point_sigma = o.point_sigma.unwrap_or(noise.point_sigma);
        noise.pos_sigma = o.pos_sigma.unwrap_or(noise.pos_sigma);
        noise.rot_sigma = o.rot_sigma.unwrap_or(noise.rot_sigma);
        noise.seed = seed;

        let sensor = o.sensor.or(file.sensor);
        if o.sensor.is_some() && variant.mode == Mode::Fused {
            return Err(Error::validation("--sensor only applies to single mode"));
        }

        let cfg = Self {
            variant,
            seed,
            sensor,
            output_dir: o.output_dir.clone().or(file.output_dir).unwrap_or_else(|| PathBuf::from("runs")),
            write_frames: file.write_frames.unwrap_or(true),
            scenario,
            noise,
            roi: file.roi.unwrap_or_else(|| family.default_roi()),
            detector: file.detector.unwrap_or_default(),
            tracker: file.tracker.unwrap_or_default(),
            refine: file.refine.unwrap_or_default(),
            eval: file.eval.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.noise.validate()?;
        self.roi.validate()?;
        self.detector.validate()?;
        self.tracker.validate()?;
        self.refine.validate()?;
        self.eval.validate()
    }

    /// Hex SHA-256 of the resolved configuration (output directory excluded).
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("configuration serializes");
        hex::encode(Sha256::digest(json))
    }
}
