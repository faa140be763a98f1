//! Run configuration: a TOML file of `key = value` pairs and sections,
//! overridden by command-line flags and echoed into every report.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use aniso_core::spectral::theta_bound;
use aniso_core::stats::RectPair;
use aniso_core::{HurstPair, RectIncrement, StationaryKernel};

use crate::CliError;

/// Fraction of the closed-form bound used by `theta = "auto"`.
pub const AUTO_THETA_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaSpec {
    Auto,
    Value(f64),
}

impl std::str::FromStr for ThetaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .map(Self::Value)
            .ok_or_else(|| format!("theta must be a finite number or \"auto\", got {s:?}"))
    }
}

impl fmt::Display for ThetaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for ThetaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for ThetaSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Self::Value(v)),
            Raw::Int(v) => Ok(Self::Value(v as f64)),
            Raw::Str(s) => s.parse().map_err(de::Error::custom),
        }
    }
}

/// A path count, or `"auto"` for the smallest count the witness test accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathCount {
    Auto,
    Fixed(u64),
}

impl Serialize for PathCount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Fixed(n) => s.serialize_u64(*n),
        }
    }
}

impl<'de> Deserialize<'de> for PathCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Self::Fixed(n)),
            Raw::Str(s) if s == "auto" => Ok(Self::Auto),
            Raw::Str(s) => Err(de::Error::custom(format!(
                "expected a path count or \"auto\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub hurst: [f64; 2],
    pub theta: ThetaSpec,
    pub seed: u64,
    pub out: PathBuf,
    /// Relative tolerance for identity residuals.
    pub tol: f64,
    pub kernel_eval: KernelEvalConfig,
    pub verify: VerifyConfig,
    pub spectral: SpectralConfig,
    pub simulate: SimulateConfig,
    pub test: TestConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hurst: [0.5, 0.5],
            theta: ThetaSpec::Auto,
            seed: 1,
            out: PathBuf::from("out"),
            tol: 1e-12,
            kernel_eval: KernelEvalConfig::default(),
            verify: VerifyConfig::default(),
            spectral: SpectralConfig::default(),
            simulate: SimulateConfig::default(),
            test: TestConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelEvalConfig {
    /// Lags `v1` and `v2` both run over `linspace(v_min, v_max, n)`.
    pub v_min: f64,
    pub v_max: f64,
    pub n: usize,
}

impl Default for KernelEvalConfig {
    fn default() -> Self {
        Self {
            v_min: -3.0,
            v_max: 3.0,
            n: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random lags / point pairs for the identity checks.
    pub identity_samples: usize,
    /// Lags are drawn from `[-lag_range, lag_range]^2`.
    pub lag_range: f64,
    /// Frequency grid of the main inequality: `logspace(x_min, x_max, n_x)` plus 0.
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    /// Frequencies per axis of the Fourier inversion scan.
    pub fourier_n: usize,
    pub gram_sets: usize,
    pub gram_points: usize,
    pub jitter_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            identity_samples: 2000,
            lag_range: 8.0,
            x_min: 1e-3,
            x_max: 1e3,
            n_x: 200,
            fourier_n: 12,
            gram_sets: 4,
            gram_points: 200,
            jitter_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    /// `x` runs over `linspace(x_min, x_max, n)`.
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    /// Target accuracy of the series and quadrature routes.
    pub route_tol: f64,
    /// Largest accepted disagreement between routes.
    pub agreement_tol: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 20.0,
            n: 101,
            route_tol: 1e-11,
            agreement_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFormat {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub include_axes: bool,
    pub paths: usize,
    /// How many of the simulated paths are written to disk.
    pub write_paths: usize,
    pub format: SampleFormat,
    pub clip_tol: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let ladder: Vec<f64> = (1..=10).map(|k| 0.4 * k as f64).collect();
        Self {
            t1: ladder.clone(),
            t2: ladder,
            include_axes: true,
            paths: 1000,
            write_paths: 3,
            format: SampleFormat::Csv,
            clip_tol: 1e-12,
        }
    }
}

/// A rectangle `[lower, upper]` and the shift of its congruent partner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub shift: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestConfig {
    pub paths: usize,
    pub witness_paths: PathCount,
    pub significance: f64,
    pub pairs: Vec<PairSpec>,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            paths: 10_000,
            witness_paths: PathCount::Auto,
            significance: 0.01,
            pairs: vec![
                PairSpec {
                    lower: [1.0, 1.0],
                    upper: [2.0, 2.0],
                    shift: [1.5, 0.5],
                },
                PairSpec {
                    lower: [0.5, 1.0],
                    upper: [1.0, 3.0],
                    shift: [2.0, 2.0],
                },
                PairSpec {
                    lower: [1.0, 0.2],
                    upper: [3.0, 0.7],
                    shift: [0.0, 3.0],
                },
            ],
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub hurst: Option<[f64; 2]>,
    pub theta: Option<ThetaSpec>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub paths: Option<u64>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| usage(format!("malformed config {}: {e}", p.display())))?
            }
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(h) = o.hurst {
            self.hurst = h;
        }
        if let Some(t) = o.theta {
            self.theta = t;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(t) = o.tol {
            self.tol = t;
        }
        if let Some(n) = o.paths {
            let n = usize::try_from(n).unwrap_or(usize::MAX);
            self.simulate.paths = n;
            self.test.paths = n;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.hurst_pair()?;
        if let ThetaSpec::Value(t) = self.theta {
            if !t.is_finite() {
                return Err(usage("theta must be finite"));
            }
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(usage(format!("tol must be positive, got {}", self.tol)));
        }
        let ke = &self.kernel_eval;
        if ke.n == 0 || ke.v_min > ke.v_max || !ke.v_min.is_finite() || !ke.v_max.is_finite() {
            return Err(usage("kernel_eval needs n >= 1 and finite v_min <= v_max"));
        }
        let v = &self.verify;
        if !(v.x_min > 0.0 && v.x_min < v.x_max && v.x_max.is_finite()) || v.n_x < 2 {
            return Err(usage("verify needs 0 < x_min < x_max and n_x >= 2"));
        }
        if v.gram_points < 2 || v.fourier_n == 0 || !(v.lag_range > 0.0 && v.lag_range.is_finite())
        {
            return Err(usage(
                "verify needs gram_points >= 2, fourier_n >= 1 and lag_range > 0",
            ));
        }
        let s = &self.spectral;
        if s.n == 0 || !(s.x_min >= 0.0 && s.x_min <= s.x_max && s.x_max.is_finite()) {
            return Err(usage("spectral needs n >= 1 and 0 <= x_min <= x_max"));
        }
        if !(s.route_tol > 0.0 && s.agreement_tol > 0.0) {
            return Err(usage("spectral tolerances must be positive"));
        }
        if !(self.test.significance > 0.0 && self.test.significance < 1.0) {
            return Err(usage("test.significance must lie in (0, 1)"));
        }
        if self.test.pairs.is_empty() {
            return Err(usage("test.pairs must not be empty"));
        }
        self.rect_pairs()?;
        Ok(())
    }

    pub fn hurst_pair(&self) -> Result<HurstPair, CliError> {
        HurstPair::new(self.hurst[0], self.hurst[1]).map_err(|e| usage(e.to_string()))
    }

    /// Resolved `theta`; `auto` is 0.9 times the closed-form bound.
    pub fn theta_value(&self) -> Result<f64, CliError> {
        Ok(match self.theta {
            ThetaSpec::Value(t) => t,
            ThetaSpec::Auto => AUTO_THETA_FRACTION * theta_bound(&self.hurst_pair()?).theta_bound,
        })
    }

    pub fn kernel(&self) -> Result<StationaryKernel, CliError> {
        StationaryKernel::new(self.hurst_pair()?, self.theta_value()?)
            .map_err(|e| usage(e.to_string()))
    }

    pub fn rect_pairs(&self) -> Result<Vec<RectPair>, CliError> {
        self.test
            .pairs
            .iter()
            .map(|p| {
                let base =
                    RectIncrement::new(p.lower, p.upper).map_err(|e| usage(e.to_string()))?;
                RectPair::translate(base, p.shift).map_err(|e| usage(e.to_string()))
            })
            .collect()
    }

    /// The config as JSON, with the resolved `theta` alongside.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let (Some(obj), Ok(theta)) = (v.as_object_mut(), self.theta_value()) {
            obj.insert("theta_resolved".into(), theta.into());
        }
        v
    }
}

/// `"0.3,0.7"` -> `[0.3, 0.7]`.
pub fn parse_hurst(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => {
            let a: f64 = a.parse().map_err(|_| format!("bad H1 in {s:?}"))?;
            let b: f64 = b.parse().map_err(|_| format!("bad H2 in {s:?}"))?;
            Ok([a, b])
        }
        _ => Err(format!("expected H1,H2, got {s:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.rect_pairs().unwrap().len(), 3);
        let t = c.theta_value().unwrap();
        assert!((t - 0.9 * 0.005326761163845968).abs() < 1e-15);
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            hurst = [0.3, 0.7]
            theta = 0.001
            seed = 5

            [simulate]
            t1 = [1.0, 2.0]
            t2 = [0.5]
            paths = 20

            [test]
            witness_paths = 5000
        "#;
        let c: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(c.theta, ThetaSpec::Value(0.001));
        assert_eq!(c.simulate.paths, 20);
        assert_eq!(c.test.witness_paths, PathCount::Fixed(5000));
        assert_eq!(c.test.paths, 10_000);
        let back: RunConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn theta_spellings() {
        let c: RunConfig = toml::from_str("theta = \"auto\"").unwrap();
        assert_eq!(c.theta, ThetaSpec::Auto);
        let c: RunConfig = toml::from_str("theta = 100").unwrap();
        assert_eq!(c.theta, ThetaSpec::Value(100.0));
        assert!(toml::from_str::<RunConfig>("theta = \"big\"").is_err());
        assert_eq!("AUTO".parse::<ThetaSpec>().unwrap(), ThetaSpec::Auto);
        assert!("nan".parse::<ThetaSpec>().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("hurts = [0.5, 0.5]").is_err());
        assert!(toml::from_str::<RunConfig>("[simulate]\npath = 3").is_err());
    }

    #[test]
    fn overrides_win() {
        let mut c = RunConfig::default();
        c.apply(&Overrides {
            hurst: Some([0.2, 0.9]),
            theta: Some(ThetaSpec::Value(0.0)),
            paths: Some(1234),
            ..Default::default()
        });
        assert_eq!(c.hurst, [0.2, 0.9]);
        assert_eq!(c.simulate.paths, 1234);
        assert_eq!(c.test.paths, 1234);
        assert_eq!(c.echo()["theta_resolved"], 0.0);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let mut c = RunConfig {
            hurst: [1.2, 0.5],
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(CliError::Usage(_))));
        c.hurst = [0.5, 0.5];
        c.test.pairs[0].upper = [0.5, 0.5];
        assert!(c.validate().is_err());
    }

    #[test]
    fn hurst_flag() {
        assert_eq!(parse_hurst("0.3, 0.7").unwrap(), [0.3, 0.7]);
        assert!(parse_hurst("0.3").is_err());
        assert!(parse_hurst("a,b").is_err());
    }
}
