use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::functionals::ExponentConvention;
use crate::gp::{GpConvention, Orbital};
use crate::lattice::{Grid, InteractionSpec};
use crate::manybody::{checked_amplitudes, TrapSpec};

/// Condensate orbital at `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OrbitalSpec {
    Gaussian {
        width: f64,
        #[serde(default)]
        center: f64,
    },
    #[serde(alias = "plane_wave")]
    PlaneWave { mode: i64 },
}

impl Default for OrbitalSpec {
    fn default() -> Self {
        OrbitalSpec::Gaussian { width: 1.0, center: 0.0 }
    }
}

impl OrbitalSpec {
    pub fn build(&self, grid: &Grid) -> Result<Orbital> {
        match *self {
            OrbitalSpec::Gaussian { width, center } => Orbital::gaussian(grid, width, center),
            OrbitalSpec::PlaneWave { mode } => Ok(Orbital::plane_wave(grid, mode)),
        }
    }

    fn width(&self) -> f64 {
        match *self {
            OrbitalSpec::Gaussian { width, .. } => width,
            OrbitalSpec::PlaneWave { .. } => 1.0,
        }
    }
}

/// The defect orbital χ of a perturbed start, before orthogonalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChiSpec {
    #[serde(alias = "first_excited")]
    FirstExcited { width: Option<f64> },
    #[serde(alias = "plane_wave")]
    PlaneWave { mode: i64 },
}

/// Many-body state at `t = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    #[default]
    Product,
    Perturbed {
        eps: f64,
        #[serde(default)]
        chi: Option<ChiSpec>,
    },
    /// Random symmetric state drawn from the configured seed.
    Random,
}

impl InitialSpec {
    /// χ orthogonalized against φ with one Gram-Schmidt pass.
    pub fn chi(&self, phi: &Orbital, orbital: &OrbitalSpec) -> Result<Option<Orbital>> {
        let InitialSpec::Perturbed { chi, .. } = *self else {
            return Ok(None);
        };
        let grid = phi.grid();
        let raw = match chi.unwrap_or(ChiSpec::FirstExcited { width: None }) {
            ChiSpec::FirstExcited { width } => Orbital::first_excited(grid, width.unwrap_or(orbital.width()))?,
            ChiSpec::PlaneWave { mode } => Orbital::plane_wave(grid, mode),
        };
        Orbital::orthogonalized_against(raw.field().clone(), phi).map(Some)
    }
}

/// `C_v`: fitted per run or fixed.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum CvSetting {
    #[default]
    Fit,
    Fixed(f64),
}

impl Serialize for CvSetting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            CvSetting::Fit => s.serialize_str("fit"),
            CvSetting::Fixed(v) => s.serialize_f64(v),
        }
    }
}

impl<'de> Deserialize<'de> for CvSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(CvSetting::Fixed(v)),
            Raw::Int(v) => Ok(CvSetting::Fixed(v as f64)),
            Raw::Text(t) if t == "fit" => Ok(CvSetting::Fit),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("c_v must be \"fit\" or a number, got {t:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "N", alias = "n", alias = "particles")]
    Particles,
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "lambda")]
    Lambda,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Particles => "N",
            SweepAxis::Beta => "beta",
            SweepAxis::Lambda => "lambda",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "n" | "particles" => Ok(SweepAxis::Particles),
            "beta" => Ok(SweepAxis::Beta),
            "lambda" => Ok(SweepAxis::Lambda),
            other => Err(Error::Config(format!("unknown sweep axis {other:?} (expected N, beta or lambda)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "N", alias = "particles")]
    pub particles: usize,
    #[serde(rename = "M", alias = "points")]
    pub points: usize,
    #[serde(rename = "L", alias = "length")]
    pub length: f64,
    pub beta: f64,
    pub lambda: f64,
    pub dt: f64,
    pub steps: usize,
    pub sample_every: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub c_v: CvSetting,
    #[serde(default)]
    pub exponent_convention: ExponentConvention,
    #[serde(default)]
    pub gp_convention: GpConvention,
    /// Time at which sweeps read off `α` and the density distance; half the
    /// run time when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    pub interaction: InteractionSpec,
    #[serde(default)]
    pub trap: TrapSpec,
    #[serde(default)]
    pub orbital: OrbitalSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn invalid(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn total_time(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn t_star(&self) -> f64 {
        self.t_star.unwrap_or(0.5 * self.total_time())
    }

    /// Range checks and the memory guard; performs no allocation proportional
    /// to the state size.
    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(invalid(format!("N must be at least 2, got {}", self.particles)));
        }
        if self.points < 2 || self.points % 2 != 0 {
            return Err(invalid(format!("M must be even and at least 2, got {}", self.points)));
        }
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(invalid(format!("L must be positive, got {}", self.length)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(invalid(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(invalid(format!("lambda must lie in (0, 1), got {}", self.lambda)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(invalid("steps must be positive".into()));
        }
        if self.sample_every == 0 || self.sample_every > self.steps {
            return Err(invalid(format!("sample_every must lie in 1..=steps, got {}", self.sample_every)));
        }
        if let CvSetting::Fixed(c) = self.c_v {
            if !(c > 0.0) || !c.is_finite() {
                return Err(invalid(format!("c_v must be positive, got {c}")));
            }
        }
        if let Some(t) = self.t_star {
            if !(t >= 0.0 && t <= self.total_time()) {
                return Err(invalid(format!("t_star must lie in [0, {}], got {t}", self.total_time())));
            }
        }
        self.interaction.validate()?;
        self.trap.validate()?;
        match self.orbital {
            OrbitalSpec::Gaussian { width, center } if !(width > 0.0) || !center.is_finite() => {
                return Err(invalid(format!("orbital width must be positive, got {width}")));
            }
            _ => {}
        }
        if let InitialSpec::Perturbed { eps, chi } = self.initial {
            if !(0.0..=1.0).contains(&eps) {
                return Err(invalid(format!("eps must lie in [0, 1], got {eps}")));
            }
            if let Some(ChiSpec::FirstExcited { width: Some(w) }) = chi {
                if !(w > 0.0) {
                    return Err(invalid(format!("chi width must be positive, got {w}")));
                }
            }
        }
        if let Some(sw) = &self.sweep {
            validate_sweep(sw)?;
        }
        Grid::new(self.points, self.length)?;
        let scaled_radius = self.interaction.radius * (self.particles as f64).powf(-self.beta);
        if scaled_radius > 0.5 * self.length {
            return Err(invalid(format!(
                "scaled interaction radius {scaled_radius} exceeds L/2 = {}",
                0.5 * self.length
            )));
        }
        checked_amplitudes(self.points, self.particles)?;
        Ok(())
    }

    /// Copy with one sweep axis set to `value`.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut out = self.clone();
        out.sweep = None;
        match axis {
            SweepAxis::Particles => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(invalid(format!("N values must be positive integers, got {value}")));
                }
                out.particles = value as usize;
            }
            SweepAxis::Beta => out.beta = value,
            SweepAxis::Lambda => out.lambda = value,
        }
        Ok(out)
    }
}

pub fn validate_sweep(sw: &SweepSpec) -> Result<()> {
    if sw.values.len() < 3 {
        return Err(invalid(format!("a sweep needs at least 3 values, got {}", sw.values.len())));
    }
    if sw.values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("sweep values must be finite".into()));
    }
    Ok(())
}

/// Sets `key = value` in `table`. Dotted keys descend into sub-tables; the
/// value is read as TOML and falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override {spec:?} has an empty key")));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Config(format!("override key {key:?}: {part:?} is not a table"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
