//! Scenario files: TOML with `[model]`, `[drift]`, `[sim]`, `[sampler]`
//! tables and a `[[checks]]` array.

use serde::{Deserialize, Serialize};
use simlab_core::drift::{DriftKind, SuperDissipativity};
use simlab_core::harness::{EvalMode, HyperMode, UltraSettings};
use simlab_core::semigroup::UlaSettings;
use simlab_core::{
    Basis, DriftSpec, IntegratorConfig, PowerProfile, SimError, SpectralModel, StateVector,
    TestFunction,
};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Base names of report keys that are designed to fail.
    #[serde(default)]
    pub expected_failures: Vec<String>,
    pub model: ModelConfig,
    pub drift: DriftConfig,
    pub sim: SimConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_basis")]
    pub basis: Basis,
    #[serde(default = "default_grid_factor")]
    pub grid_factor: usize,
    /// Explicit diagonal operator; overrides the Laplacian spectrum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    /// Noise weights `r_k` for an explicit spectrum (default all ones).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
}

fn default_basis() -> Basis {
    Basis::Dirichlet
}

fn default_grid_factor() -> usize {
    simlab_core::spectral::DEFAULT_GRID_FACTOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_coeffs: Option<Vec<f64>>,
    #[serde(rename = "zeta_F", default)]
    pub zeta_f: f64,
    /// Defaults to `ζ_A + ζ_F`, valid only when `R = Id`.
    #[serde(rename = "zeta_R", default, skip_serializing_if = "Option::is_none")]
    pub zeta_r: Option<f64>,
    #[serde(rename = "super", default, skip_serializing_if = "Option::is_none")]
    pub super_: Option<SuperConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial: Option<RadialConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperConfig {
    pub a: f64,
    /// `"power:<c>:<p>"`.
    pub phi: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialConfig {
    pub f: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    #[serde(default = "one")]
    pub record_stride: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Exact stationary Gaussian law (requires `F = 0`).
    Gaussian,
    /// Thinned long trajectory of the SDE.
    Ergodic,
    /// Independent endpoints at time `burn_in`.
    Endpoints,
    /// Preconditioned Langevin chain for the Gibbs measure.
    Gibbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thinning: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ula_step: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: SamplerKind::Ergodic,
            count: 10_000,
            burn_in: None,
            thinning: None,
            ula_step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// One trajectory from `0` over `sim.horizon`.
    #[serde(default = "yes")]
    pub trajectory: bool,
    #[serde(default)]
    pub ensemble: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            trajectory: true,
            ensemble: false,
        }
    }
}

fn default_p() -> Vec<f64> {
    vec![2.0]
}

fn default_samples() -> usize {
    2000
}

fn default_coordinate() -> usize {
    1
}

fn default_tail_points() -> usize {
    40
}

fn default_trajectories() -> usize {
    100
}

/// One entry of `[[checks]]`. Points `x` are given by their leading
/// coefficients and padded with zeros; empty batteries use defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    LogSobolev {
        #[serde(default = "default_p")]
        p: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        battery: Vec<TestFunction>,
    },
    Poincare {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        battery: Vec<TestFunction>,
    },
    Hypercontractivity {
        t: f64,
        q: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        battery: Vec<TestFunction>,
        #[serde(default = "exact_mode")]
        mode: HyperMode,
    },
    Harnack {
        p: Vec<f64>,
        t: Vec<f64>,
        /// `‖h‖_R` values; `h` points along the first mode.
        h: Vec<f64>,
        #[serde(default)]
        x: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        battery: Vec<TestFunction>,
        #[serde(default = "oracle_mode")]
        mode: EvalMode,
    },
    Concentration {
        /// `g(x) = x_k`, 1-based.
        #[serde(default = "default_coordinate")]
        coordinate: usize,
        #[serde(default)]
        h_variant: bool,
        #[serde(default = "default_tail_points")]
        points: usize,
    },
    Fernique {
        lambda: Vec<f64>,
        #[serde(default)]
        h_variant: bool,
    },
    Supercontractivity {
        lambda: Vec<f64>,
    },
    SemigroupLogSobolev {
        t: Vec<f64>,
        #[serde(default)]
        x: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        battery: Vec<TestFunction>,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dt: Option<f64>,
    },
    EpsLogSobolev {
        eps: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        battery: Vec<TestFunction>,
    },
    GradientEstimate {
        t: Vec<f64>,
        #[serde(default)]
        x: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        battery: Vec<TestFunction>,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dt: Option<f64>,
    },
    Ultrabounded {
        t: f64,
        lambda: f64,
        #[serde(default)]
        settings: UltraSettings,
    },
    VariationalBounds {
        #[serde(default = "default_trajectories")]
        trajectories: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<f64>,
    },
    /// Plain `P(t)φ(x)` estimates written to `estimates.json`.
    Estimate {
        t: Vec<f64>,
        points: Vec<Vec<f64>>,
        phi: TestFunction,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dt: Option<f64>,
    },
}

fn exact_mode() -> HyperMode {
    HyperMode::Exact
}

fn oracle_mode() -> EvalMode {
    EvalMode::Oracle
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::LogSobolev { .. } => "log_sobolev",
            CheckSpec::Poincare { .. } => "poincare",
            CheckSpec::Hypercontractivity { .. } => "hypercontractivity",
            CheckSpec::Harnack { .. } => "harnack",
            CheckSpec::Concentration { .. } => "concentration",
            CheckSpec::Fernique { .. } => "fernique",
            CheckSpec::Supercontractivity { .. } => "supercontractivity",
            CheckSpec::SemigroupLogSobolev { .. } => "semigroup_log_sobolev",
            CheckSpec::EpsLogSobolev { .. } => "eps_log_sobolev",
            CheckSpec::GradientEstimate { .. } => "gradient_estimate",
            CheckSpec::Ultrabounded { .. } => "ultrabounded",
            CheckSpec::VariationalBounds { .. } => "variational_bounds",
            CheckSpec::Estimate { .. } => "estimate",
        }
    }
}

/// Validated, ready-to-run scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: SpectralModel,
    pub spec: DriftSpec,
    pub integrator: IntegratorConfig,
}

impl Scenario {
    pub fn from_config(config: ScenarioConfig) -> Result<Self, ConfigError> {
        let model = build_model(&config.model)?;
        let spec = build_drift(&config.drift, &model)?;
        let zeta = model.zeta_a() + spec.zeta_f;
        if !(zeta < 0.0) {
            return Err(ConfigError::Invalid(format!(
                "zeta_A + zeta_F = {zeta} must be negative"
            )));
        }
        let s = &config.sim;
        let integrator = IntegratorConfig::new(s.dt, s.horizon, s.seed, s.record_stride)?;
        validate_sampler(&config.sampler, &model, &spec)?;
        for check in &config.checks {
            validate_check(check, &model, &spec)?;
        }
        Ok(Self {
            config,
            model,
            spec,
            integrator,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Self::from_config(toml::from_str(text)?)
    }

    /// Pads a configured point to the model dimension.
    pub fn point(&self, x: &[f64]) -> Result<StateVector, ConfigError> {
        pad(x, self.model.n())
    }
}

pub fn pad(x: &[f64], n: usize) -> Result<StateVector, ConfigError> {
    if x.len() > n {
        return Err(ConfigError::Invalid(format!(
            "point has {} coefficients but n = {n}",
            x.len()
        )));
    }
    let mut v = vec![0.0; n];
    v[..x.len()].copy_from_slice(x);
    Ok(StateVector(v))
}

fn build_model(m: &ModelConfig) -> Result<SpectralModel, ConfigError> {
    match &m.eigenvalues {
        None => {
            if m.r.is_some() {
                return Err(ConfigError::Invalid(
                    "model.r requires model.eigenvalues".into(),
                ));
            }
            Ok(SpectralModel::laplacian(
                m.basis,
                m.n,
                m.beta,
                m.grid_factor.max(1),
            )?)
        }
        Some(ev) => {
            if ev.len() != m.n {
                return Err(ConfigError::Invalid(format!(
                    "model.eigenvalues has {} entries, n = {}",
                    ev.len(),
                    m.n
                )));
            }
            let r = m.r.clone().unwrap_or_else(|| vec![1.0; m.n]);
            if r.len() != m.n {
                return Err(ConfigError::Invalid(format!(
                    "model.r has {} entries, n = {}",
                    r.len(),
                    m.n
                )));
            }
            let model = SpectralModel::diagonal(ev.clone(), r, m.basis)?;
            let g = m.grid_factor.max(1) * m.n + 1;
            Ok(model.with_grid_size(g)?)
        }
    }
}

fn build_drift(d: &DriftConfig, model: &SpectralModel) -> Result<DriftSpec, ConfigError> {
    let identity_noise = model.r().iter().all(|r| *r == 1.0);
    let zeta_r = match d.zeta_r {
        Some(z) => z,
        None if identity_noise => model.zeta_a() + d.zeta_f,
        None => {
            return Err(ConfigError::Invalid(
                "drift.zeta_R is required when R != Id".into(),
            ))
        }
    };
    let mut spec = match d.kind.as_str() {
        "zero" => {
            if d.zeta_f != 0.0 {
                return Err(ConfigError::Invalid("zero drift needs zeta_F = 0".into()));
            }
            DriftSpec::zero(zeta_r)
        }
        "nemytskii" => {
            let b = d.b_coeffs.clone().ok_or_else(|| {
                ConfigError::Invalid("nemytskii drift needs drift.b_coeffs".into())
            })?;
            DriftSpec::nemytskii(b, d.zeta_f, zeta_r)?
        }
        "radial" => {
            let r = d
                .radial
                .as_ref()
                .ok_or_else(|| ConfigError::Invalid("radial drift needs drift.radial.f".into()))?;
            DriftSpec::radial(PowerProfile::parse(&r.f)?, d.zeta_f, zeta_r)?
        }
        "kernel" => {
            let k = d.kernel.as_ref().ok_or_else(|| {
                ConfigError::Invalid("kernel drift needs drift.kernel.rank".into())
            })?;
            if k.rank > model.n() {
                return Err(ConfigError::Invalid(format!(
                    "kernel rank {} exceeds n = {}",
                    k.rank,
                    model.n()
                )));
            }
            let kappa = k.kappa.clone().unwrap_or_else(|| vec![1.0; k.rank]);
            DriftSpec::kernel(k.rank, kappa, d.zeta_f, zeta_r)?
        }
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown drift.kind {other:?} (expected zero, nemytskii, radial or kernel)"
            )))
        }
    };
    if let Some(s) = &d.super_ {
        spec = spec.with_super(SuperDissipativity::new(s.a, PowerProfile::parse(&s.phi)?)?);
    }
    if matches!(spec.kind, DriftKind::Zero) && spec.super_dissipativity.is_some() {
        return Err(ConfigError::Invalid(
            "zero drift cannot be super-dissipative".into(),
        ));
    }
    Ok(spec)
}

fn validate_sampler(
    s: &SamplerConfig,
    model: &SpectralModel,
    spec: &DriftSpec,
) -> Result<(), ConfigError> {
    match s.kind {
        SamplerKind::Gaussian if !spec.is_zero() => Err(ConfigError::Invalid(
            "the gaussian sampler needs drift.kind = \"zero\"".into(),
        )),
        SamplerKind::Gibbs
            if !matches!(spec.kind, DriftKind::Nemytskii { .. } | DriftKind::Zero) =>
        {
            Err(ConfigError::Invalid(
                "the gibbs sampler needs a nemytskii or zero drift".into(),
            ))
        }
        SamplerKind::Gibbs if model.r().iter().any(|r| *r != 1.0) => Err(ConfigError::Invalid(
            "the gibbs sampler needs R = Id".into(),
        )),
        _ if s.count == 0 => Err(ConfigError::Invalid(
            "sampler.count must be positive".into(),
        )),
        _ => Ok(()),
    }
}

impl SamplerConfig {
    pub fn ula_settings(&self) -> UlaSettings {
        let d = UlaSettings::default();
        UlaSettings {
            step: self.ula_step.unwrap_or(d.step),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            thinning: self.thinning.unwrap_or(d.thinning),
        }
    }
}

fn positive(name: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.is_empty() || v.iter().any(|a| !(*a > 0.0)) {
        return Err(ConfigError::Invalid(format!(
            "{name} must be a nonempty list of positive numbers"
        )));
    }
    Ok(())
}

fn validate_check(
    c: &CheckSpec,
    model: &SpectralModel,
    spec: &DriftSpec,
) -> Result<(), ConfigError> {
    let n = model.n();
    let fits = |x: &[f64]| pad(x, n).map(|_| ());
    match c {
        CheckSpec::LogSobolev { p, .. } => {
            if p.is_empty() || p.iter().any(|v| !(*v >= 1.0)) {
                return Err(ConfigError::Invalid(
                    "log_sobolev p values must be >= 1".into(),
                ));
            }
        }
        CheckSpec::Hypercontractivity { t, q, mode, .. } => {
            if !(*t > 0.0 && *q > 1.0) {
                return Err(ConfigError::Invalid(
                    "hypercontractivity needs t > 0 and q > 1".into(),
                ));
            }
            if *mode == HyperMode::Exact && !spec.is_zero() {
                return Err(ConfigError::Invalid(
                    "exact hypercontractivity needs a zero drift".into(),
                ));
            }
        }
        CheckSpec::Harnack {
            p, t, h, x, mode, ..
        } => {
            positive("harnack t", t)?;
            if p.is_empty() || p.iter().any(|v| !(*v > 1.0)) {
                return Err(ConfigError::Invalid("harnack p values must be > 1".into()));
            }
            if h.is_empty() || h.iter().any(|v| !(*v >= 0.0)) {
                return Err(ConfigError::Invalid("harnack h values must be >= 0".into()));
            }
            if *mode == EvalMode::Oracle && !spec.is_zero() {
                return Err(ConfigError::Invalid(
                    "oracle harnack needs a zero drift".into(),
                ));
            }
            fits(x)?;
        }
        CheckSpec::Concentration { coordinate, .. } => {
            if *coordinate == 0 || *coordinate > n {
                return Err(ConfigError::Invalid(format!(
                    "concentration coordinate must be in 1..={n}"
                )));
            }
        }
        CheckSpec::Fernique { lambda, .. } | CheckSpec::Supercontractivity { lambda } => {
            if lambda.is_empty() || lambda.iter().any(|v| !(*v >= 0.0)) {
                return Err(ConfigError::Invalid(format!(
                    "{} lambda values must be >= 0",
                    c.name()
                )));
            }
        }
        CheckSpec::SemigroupLogSobolev { t, x, .. } | CheckSpec::GradientEstimate { t, x, .. } => {
            positive(&format!("{} t", c.name()), t)?;
            fits(x)?;
        }
        CheckSpec::EpsLogSobolev { eps, .. } => positive("eps_log_sobolev eps", eps)?,
        CheckSpec::Ultrabounded { t, lambda, .. } => {
            if !(*t > 0.0 && *lambda > 0.0) {
                return Err(ConfigError::Invalid(
                    "ultrabounded needs t > 0 and lambda > 0".into(),
                ));
            }
        }
        CheckSpec::VariationalBounds {
            trajectories,
            horizon,
        } => {
            if *trajectories == 0 || horizon.is_some_and(|h| !(h > 0.0)) {
                return Err(ConfigError::Invalid(
                    "variational_bounds needs trajectories > 0 and horizon > 0".into(),
                ));
            }
        }
        CheckSpec::Estimate { t, points, .. } => {
            if t.iter().any(|v| !(*v >= 0.0)) || points.is_empty() {
                return Err(ConfigError::Invalid(
                    "estimate needs t >= 0 and at least one point".into(),
                ));
            }
            for p in points {
                fits(p)?;
            }
        }
        CheckSpec::Poincare { .. } => {}
    }
    Ok(())
}
