//! Flat `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dfs_core::{FanGeometry, PixelGrid};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {msg}")]
    BadValue { key: String, value: String, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    None,
    Cw,
    Nonascent,
    Ep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provider {
    Zero,
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Median,
    HalfSquaredNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    Sequential,
    BitReversal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhantomSource {
    Head,
    File(PathBuf),
}

macro_rules! keyword_enum {
    ($ty:ident { $($name:literal => $variant:ident),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(format!("expected one of: {}", [$($name),+].join(", "))),
                }
            }
        }
        impl $ty {
            pub fn name(&self) -> &'static str {
                match self {
                    $($ty::$variant => $name,)+
                }
            }
        }
    };
}

keyword_enum!(Mode { "none" => None, "cw" => Cw, "nonascent" => Nonascent, "ep" => Ep });
keyword_enum!(Provider { "zero" => Zero, "gradient" => Gradient });
keyword_enum!(TargetKind { "median" => Median, "half-squared-norm" => HalfSquaredNorm });
keyword_enum!(Ordering { "sequential" => Sequential, "bit-reversal" => BitReversal });

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
    pub projections: usize,
    pub rays: usize,
    /// `None` means derived from the grid so the fan covers it.
    pub source_radius: Option<f64>,
    pub fan_increment: Option<f64>,
    pub start_angle: f64,
    pub phantom: PhantomSource,
    pub density_scale: f64,
    pub noise_sigma: f64,
    pub noise_seed: u64,
    pub lambda: f64,
    pub ordering: Ordering,
    pub mode: Mode,
    pub provider: Provider,
    pub target: TargetKind,
    pub perturbations: usize,
    pub b: f64,
    pub a: f64,
    pub eta: f64,
    pub ep_iterations: usize,
    pub probe_budget: u64,
    pub domain_lo: Option<f64>,
    pub domain_hi: Option<f64>,
    pub sweeps: usize,
    /// `None` means 1, or 0 when only one iterate follows `x^0`.
    pub slice_lo: Option<usize>,
    pub slice_hi: Option<usize>,
    pub flip: bool,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            pixel_size: 1.0,
            projections: 120,
            rays: 95,
            source_radius: None,
            fan_increment: None,
            start_angle: 0.0,
            phantom: PhantomSource::Head,
            density_scale: 1.0,
            noise_sigma: 0.0,
            noise_seed: 0,
            lambda: 0.05,
            ordering: Ordering::BitReversal,
            mode: Mode::Cw,
            provider: Provider::Zero,
            target: TargetKind::Median,
            perturbations: 2000,
            b: 0.02,
            a: 0.99999,
            eta: 1.0,
            ep_iterations: 1000,
            probe_budget: 1_000_000,
            domain_lo: None,
            domain_hi: None,
            sweeps: 30,
            slice_lo: None,
            slice_hi: None,
            flip: false,
            output: PathBuf::from("out"),
        }
    }
}

pub const KEYS: &[&str] = &[
    "width",
    "height",
    "pixel_size",
    "projections",
    "rays",
    "source_radius",
    "fan_increment",
    "start_angle",
    "phantom",
    "density_scale",
    "noise_sigma",
    "noise_seed",
    "lambda",
    "ordering",
    "mode",
    "provider",
    "target",
    "perturbations",
    "b",
    "a",
    "eta",
    "ep_iterations",
    "probe_budget",
    "domain_lo",
    "domain_hi",
    "sweeps",
    "slice_lo",
    "slice_hi",
    "flip",
    "output",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: ToString,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        msg: e.to_string(),
    })
}

fn parse_auto<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: ToString,
{
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn auto<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), T::to_string)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&text, base)
    }

    /// Parses `key = value` lines over the defaults. Relative phantom paths
    /// resolve against `base`.
    pub fn from_text(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, msg: "expected `key = value`".into() })?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1, msg: format!("empty value for `{key}`") });
            }
            config.set(key, value, base)?;
        }
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), ConfigError> {
        match key {
            "width" => self.width = parse(key, value)?,
            "height" => self.height = parse(key, value)?,
            "pixel_size" => self.pixel_size = parse(key, value)?,
            "projections" => self.projections = parse(key, value)?,
            "rays" => self.rays = parse(key, value)?,
            "source_radius" => self.source_radius = parse_auto(key, value)?,
            "fan_increment" => self.fan_increment = parse_auto(key, value)?,
            "start_angle" => self.start_angle = parse(key, value)?,
            "phantom" => {
                self.phantom = if value == "head" { PhantomSource::Head } else { PhantomSource::File(base.join(value)) }
            }
            "density_scale" => self.density_scale = parse(key, value)?,
            "noise_sigma" => self.noise_sigma = parse(key, value)?,
            "noise_seed" => self.noise_seed = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "ordering" => self.ordering = parse(key, value)?,
            "mode" => self.mode = parse(key, value)?,
            "provider" => self.provider = parse(key, value)?,
            "target" => self.target = parse(key, value)?,
            "perturbations" => self.perturbations = parse(key, value)?,
            "b" => self.b = parse(key, value)?,
            "a" => self.a = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "ep_iterations" => self.ep_iterations = parse(key, value)?,
            "probe_budget" => self.probe_budget = parse(key, value)?,
            "domain_lo" => self.domain_lo = parse_auto(key, value)?,
            "domain_hi" => self.domain_hi = parse_auto(key, value)?,
            "sweeps" => self.sweeps = parse(key, value)?,
            "slice_lo" => self.slice_lo = parse_auto(key, value)?,
            "slice_hi" => self.slice_hi = parse_auto(key, value)?,
            "flip" => self.flip = parse(key, value)?,
            "output" => self.output = PathBuf::from(value),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies `--key value` pairs.
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<(), ConfigError> {
        let cwd = Path::new(".");
        let mut it = args.iter();
        while let Some(flag) = it.next() {
            let key = flag
                .strip_prefix("--")
                .ok_or_else(|| ConfigError::Invalid(format!("expected `--key value`, got `{flag}`")))?;
            if let Some((k, v)) = key.split_once('=') {
                self.set(k, v, cwd)?;
                continue;
            }
            let value = it.next().ok_or_else(|| ConfigError::Invalid(format!("missing value for `{flag}`")))?;
            self.set(key, value, cwd)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if self.width == 0 || self.height == 0 {
            return bad("grid dimensions must be positive");
        }
        if !(self.pixel_size > 0.0 && self.pixel_size.is_finite()) {
            return bad("pixel_size must be positive");
        }
        if self.projections == 0 || self.rays == 0 {
            return bad("projections and rays must be positive");
        }
        if !(self.density_scale.is_finite()) {
            return bad("density_scale must be finite");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be nonnegative");
        }
        if !self.lambda.is_finite() {
            return bad("lambda must be finite");
        }
        if !(self.b > 0.0 && self.b.is_finite()) || !(self.a > 0.0 && self.a < 1.0) {
            return bad("step schedule needs b > 0 and 0 < a < 1");
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad("eta must be nonnegative");
        }
        if self.mode == Mode::Ep && self.ep_iterations == 0 {
            return bad("ep_iterations must be positive");
        }
        if self.mode != Mode::Ep && self.sweeps == 0 {
            return bad("sweeps must be positive");
        }
        if self.domain_lo.is_some() != self.domain_hi.is_some() {
            return bad("domain_lo and domain_hi must be given together");
        }
        if let (Some(lo), Some(hi)) = (self.domain_lo, self.domain_hi) {
            if !(lo <= hi) {
                return bad("domain_lo must not exceed domain_hi");
            }
        }
        if self.slice_start() >= self.slice_end() {
            return bad("slice_lo must be below slice_hi");
        }
        if self.slice_end() > self.iterations() {
            return bad("slice_hi exceeds the number of iterates");
        }
        if let PhantomSource::File(p) = &self.phantom {
            if !p.is_file() {
                return Err(ConfigError::Invalid(format!("phantom file {} does not exist", p.display())));
            }
        }
        self.geometry().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Number of recorded iterates after `x^0`.
    pub fn iterations(&self) -> usize {
        match self.mode {
            Mode::Ep => self.ep_iterations,
            _ => self.sweeps,
        }
    }

    pub fn slice_start(&self) -> usize {
        self.slice_lo.unwrap_or(if self.iterations() >= 2 { 1 } else { 0 })
    }

    pub fn slice_end(&self) -> usize {
        self.slice_hi.unwrap_or(self.iterations())
    }

    pub fn grid(&self) -> Result<PixelGrid, dfs_core::Error> {
        PixelGrid::new(self.width, self.height, self.pixel_size)
    }

    pub fn geometry(&self) -> Result<FanGeometry, dfs_core::Error> {
        let mut g = FanGeometry::covering(&self.grid()?, self.projections, self.rays);
        if let Some(r) = self.source_radius {
            g.source_radius = r;
        }
        if let Some(d) = self.fan_increment {
            g.fan_increment = d;
        }
        g.start_angle = self.start_angle;
        g.validate()?;
        Ok(g)
    }

    /// Every key with its resolved value, one `key = value` per line.
    pub fn render(&self) -> String {
        let phantom = match &self.phantom {
            PhantomSource::Head => "head".to_string(),
            PhantomSource::File(p) => p.display().to_string(),
        };
        let geometry = self.geometry().ok();
        let values: Vec<(&str, String)> = vec![
            ("width", self.width.to_string()),
            ("height", self.height.to_string()),
            ("pixel_size", self.pixel_size.to_string()),
            ("projections", self.projections.to_string()),
            ("rays", self.rays.to_string()),
            ("source_radius", auto(&geometry.as_ref().map(|g| g.source_radius))),
            ("fan_increment", auto(&geometry.as_ref().map(|g| g.fan_increment))),
            ("start_angle", self.start_angle.to_string()),
            ("phantom", phantom),
            ("density_scale", self.density_scale.to_string()),
            ("noise_sigma", self.noise_sigma.to_string()),
            ("noise_seed", self.noise_seed.to_string()),
            ("lambda", self.lambda.to_string()),
            ("ordering", self.ordering.name().to_string()),
            ("mode", self.mode.name().to_string()),
            ("provider", self.provider.name().to_string()),
            ("target", self.target.name().to_string()),
            ("perturbations", self.perturbations.to_string()),
            ("b", self.b.to_string()),
            ("a", self.a.to_string()),
            ("eta", self.eta.to_string()),
            ("ep_iterations", self.ep_iterations.to_string()),
            ("probe_budget", self.probe_budget.to_string()),
            ("domain_lo", auto(&self.domain_lo)),
            ("domain_hi", auto(&self.domain_hi)),
            ("sweeps", self.sweeps.to_string()),
            ("slice_lo", self.slice_start().to_string()),
            ("slice_hi", self.slice_end().to_string()),
            ("flip", self.flip.to_string()),
            ("output", self.output.display().to_string()),
        ];
        debug_assert_eq!(values.len(), KEYS.len());
        let mut out = String::new();
        for (k, v) in values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
