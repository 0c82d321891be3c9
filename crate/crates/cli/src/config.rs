//! Run configuration.
//!
//! Configs are TOML documents written as flat `key = value` lines, with dotted
//! keys for the sections:
//!
//! ```toml
//! mode = "near_couette"
//! R = 1.0
//! beta = 1.0
//! k_list = [1]
//! grid.eta_max = 8.0
//! grid.N = 256
//! profile.amplitude = 0.02
//! profile.sigma = 4.0
//! time.t_max = 100.0
//! ```
//!
//! Unknown keys are rejected so that typos do not silently fall back to defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Couette,
    NearCouette,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKindConfig {
    Couette,
    #[serde(alias = "bump")]
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(rename = "R")]
    pub r: f64,
    pub beta: f64,
    pub k_list: Vec<i64>,
    #[serde(default)]
    pub s: f64,
    /// Allows `R <= 1/4`, where the energy method has no coercive lower bound.
    #[serde(default)]
    pub exploratory: bool,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub fit: FitConfig,
    /// Left out of the echoed config so that outputs do not depend on where they are written.
    #[serde(default, skip_serializing)]
    pub output: OutputConfig,
    #[serde(default, rename = "assert")]
    pub assertions: AssertConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub eta_max: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { eta_max: 20.0, n: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub kind: ProfileKindConfig,
    pub amplitude: f64,
    pub sigma: f64,
    pub center: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            kind: ProfileKindConfig::Perturbed,
            amplitude: 0.0,
            sigma: 4.0,
            center: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub t_max: f64,
    pub dt: f64,
    /// Snapshot cadence in steps.
    pub record_every: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_max: 100.0,
            dt: 0.01,
            record_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    #[serde(rename = "C0")]
    pub c0: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self { c0: 64.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

/// `amplitude * exp(-(eta - center)^2 / (2 width^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gaussian {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Gaussian {
    pub fn eval(&self, eta: f64) -> f64 {
        let z = (eta - self.center) / self.width;
        self.amplitude * (-0.5 * z * z).exp()
    }
}

/// Gaussian parameters as written in the config; unset ones take the
/// defaults of the field they describe.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub amplitude: Option<f64>,
    pub center: Option<f64>,
    pub width: Option<f64>,
}

impl GaussianSpec {
    fn resolve(&self, default: Gaussian) -> Gaussian {
        Gaussian {
            amplitude: self.amplitude.unwrap_or(default.amplitude),
            center: self.center.unwrap_or(default.center),
            width: self.width.unwrap_or(default.width),
        }
    }
}

/// Defaults: `Theta(0) = exp(-eta^2)` and `Q(0) = exp(-(eta - 1)^2 / 2)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub theta: GaussianSpec,
    pub q: GaussianSpec,
}

impl InitConfig {
    pub fn theta(&self) -> Gaussian {
        self.theta.resolve(Gaussian {
            amplitude: 1.0,
            center: 0.0,
            width: std::f64::consts::FRAC_1_SQRT_2,
        })
    }

    pub fn q(&self) -> Gaussian {
        self.q.resolve(Gaussian {
            amplitude: 1.0,
            center: 1.0,
            width: 1.0,
        })
    }
}

/// Fit window; unset ends default to `[t_max / 10, t_max]`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub t_lo: Option<f64>,
    pub t_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            prefix: "run".into(),
        }
    }
}

/// Acceptance assertions, checked for every wavenumber when enabled.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AssertConfig {
    #[serde(default)]
    pub enabled: bool,
    pub exponent_q: Option<[f64; 2]>,
    pub exponent_vx: Option<[f64; 2]>,
    pub exponent_vy: Option<[f64; 2]>,
    pub exponent_growth: Option<[f64; 2]>,
    /// Per-step relative tolerance on the increase of `E_s`.
    pub es_monotone_tol: Option<f64>,
    /// Per-`eta` energy ratios inside the Couette envelope `[1/Gamma, Gamma]`.
    pub energy_within_envelope: Option<bool>,
}

impl AssertConfig {
    pub fn is_empty(&self) -> bool {
        self.exponent_q.is_none()
            && self.exponent_vx.is_none()
            && self.exponent_vy.is_none()
            && self.exponent_growth.is_none()
            && self.es_monotone_tol.is_none()
            && self.energy_within_envelope.is_none()
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.normalize();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn normalize(&mut self) {
        if self.mode == Mode::Couette && self.profile.kind != ProfileKindConfig::Couette {
            if self.profile.amplitude != 0.0 {
                eprintln!(
                    "warning: mode = \"couette\" ignores profile.amplitude = {}",
                    self.profile.amplitude
                );
            }
            self.profile.kind = ProfileKindConfig::Couette;
        }
    }

    /// Checks that do not need the numerics. Grid resolution and stability of
    /// the time step are reported by the solver when a run is set up.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("`{field}`: {msg}")));
        if !self.r.is_finite() || self.r <= 0.0 {
            return bad("R", format!("must be positive, got {}", self.r));
        }
        if self.r <= 0.25 && !self.exploratory {
            return bad("R", format!("{} <= 1/4 requires `exploratory = true`", self.r));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return bad("beta", format!("must be >= 0, got {}", self.beta));
        }
        if self.k_list.is_empty() {
            return bad("k_list", "must list at least one wavenumber".into());
        }
        if let Some(pos) = self.k_list.iter().position(|&k| k == 0) {
            return bad("k_list", format!("entry {pos} is zero"));
        }
        let mut seen = self.k_list.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return bad("k_list", "wavenumbers must be distinct".into());
        }
        if !self.s.is_finite() || self.s < 0.0 {
            return bad("s", format!("must be >= 0, got {}", self.s));
        }
        if !self.weights.c0.is_finite() || self.weights.c0 < 0.0 {
            return bad("weights.C0", format!("must be >= 0, got {}", self.weights.c0));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return bad("solver", "tol must be positive and max_iter at least 1".into());
        }
        for (name, g) in [("init.theta", self.init.theta()), ("init.q", self.init.q())] {
            if !(g.width > 0.0) || !g.amplitude.is_finite() || !g.center.is_finite() {
                return bad(name, "needs finite amplitude and center and a positive width".into());
            }
        }
        if self.output.prefix.is_empty() || self.output.prefix.contains(['/', '\\']) {
            return bad("output.prefix", "must be a non-empty file name stem".into());
        }
        let (lo, hi) = self.fit_window();
        if !(lo >= 1.0) || !(hi > lo) {
            return bad("fit", format!("window [{lo}, {hi}] needs 1 <= t_lo < t_hi"));
        }
        for (name, range) in [
            ("assert.exponent_q", self.assertions.exponent_q),
            ("assert.exponent_vx", self.assertions.exponent_vx),
            ("assert.exponent_vy", self.assertions.exponent_vy),
            ("assert.exponent_growth", self.assertions.exponent_growth),
        ] {
            if let Some([a, b]) = range {
                if !(a <= b) {
                    return bad(name, format!("range [{a}, {b}] is empty"));
                }
            }
        }
        Ok(())
    }

    pub fn fit_window(&self) -> (f64, f64) {
        let t_hi = self.fit.t_hi.unwrap_or(self.time.t_max);
        let t_lo = self.fit.t_lo.unwrap_or(self.time.t_max / 10.0);
        (t_lo, t_hi)
    }
}
