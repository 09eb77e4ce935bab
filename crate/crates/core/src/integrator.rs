//! Exponential Euler with exact per-mode Ornstein–Uhlenbeck noise and the
//! linearized (variational) equation along stored trajectories.

use crate::drift::DriftSpec;
use crate::error::{Result, SimError};
use crate::rng::{par_indexed, SimRng};
use crate::spectral::{SpectralModel, StateVector};
use crate::stats;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub record_stride: usize,
    pub steps: usize,
}

impl IntegratorConfig {
    /// `steps = round(horizon/dt)` and `dt` is reset to `horizon/steps`.
    pub fn new(dt: f64, horizon: f64, seed: u64, record_stride: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidArgument(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if !(horizon >= dt) {
            return Err(SimError::InvalidArgument(format!(
                "horizon {horizon} must be >= dt {dt}"
            )));
        }
        if record_stride == 0 {
            return Err(SimError::InvalidArgument(
                "record_stride must be positive".into(),
            ));
        }
        let steps = (horizon / dt).round().max(1.0) as usize;
        Ok(Self {
            dt: horizon / steps as f64,
            horizon,
            seed,
            record_stride,
            steps,
        })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }

    /// Same `dt` with a new horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.dt, horizon, self.seed, self.record_stride)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub seed: u64,
    pub config: IntegratorConfig,
    /// First step index at which a coefficient exceeded the threshold.
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn is_diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn last(&self) -> &StateVector {
        self.states
            .last()
            .expect("trajectory has at least the initial state")
    }

    /// Writes `t,coeff_1..coeff_n`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_time_series_csv(w, &self.times, &self.states)
    }
}

pub(crate) fn write_time_series_csv<W: Write>(
    w: W,
    times: &[f64],
    states: &[StateVector],
) -> std::io::Result<()> {
    let n = states.first().map_or(0, |s| s.len());
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|k| format!("coeff_{k}")));
    wr.write_record(&header)?;
    for (t, s) in times.iter().zip(states) {
        let mut row = vec![format!("{t}")];
        row.extend(s.0.iter().map(|v| format!("{v}")));
        wr.write_record(&row)?;
    }
    wr.flush()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationalTrajectory {
    pub times: Vec<f64>,
    pub derivatives: Vec<StateVector>,
    pub direction: StateVector,
}

impl VariationalTrajectory {
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_time_series_csv(w, &self.times, &self.derivatives)
    }
}

/// Per-mode coefficients of one exponential Euler step.
#[derive(Debug, Clone)]
pub struct ExpEulerStep {
    pub dt: f64,
    /// `e^{λ_k dt}`.
    pub decay: Vec<f64>,
    /// `(e^{λ_k dt} − 1)/λ_k`.
    pub phi: Vec<f64>,
    /// Standard deviation of the one-step stochastic convolution.
    pub noise_sd: Vec<f64>,
}

impl ExpEulerStep {
    pub fn new(model: &SpectralModel, dt: f64) -> Self {
        let mut decay = Vec::with_capacity(model.n());
        let mut phi = Vec::with_capacity(model.n());
        let mut noise_sd = Vec::with_capacity(model.n());
        for (&l, &r) in model.eigenvalues().iter().zip(model.r()) {
            decay.push((l * dt).exp());
            phi.push((l * dt).exp_m1() / l);
            noise_sd.push(noise_variance(l, r, dt).sqrt());
        }
        Self {
            dt,
            decay,
            phi,
            noise_sd,
        }
    }

    pub fn sample_noise<R: Rng>(&self, rng: &mut R) -> StateVector {
        StateVector(
            self.noise_sd
                .iter()
                .map(|s| s * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        )
    }

    /// `e^{dtA}x + Φ(dt)f + η`.
    fn advance(&self, x: &mut StateVector, f: &StateVector, noise: &StateVector) {
        for k in 0..x.len() {
            x[k] = self.decay[k] * x[k] + self.phi[k] * f[k] + noise[k];
        }
    }

    fn advance_linear(&self, y: &mut StateVector, dfy: &StateVector) {
        for k in 0..y.len() {
            y[k] = self.decay[k] * y[k] + self.phi[k] * dfy[k];
        }
    }
}

/// `r²(1 − e^{2λt})/(2|λ|)`.
pub fn noise_variance(lambda: f64, r: f64, t: f64) -> f64 {
    r * r * (-(2.0 * lambda * t).exp_m1()) / (2.0 * lambda.abs())
}

/// One draw of `∫₀^{dt} e^{(dt−s)A} R dW(s)`.
pub fn sample_noise_increment<R: Rng>(
    model: &SpectralModel,
    dt: f64,
    rng: &mut R,
) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    Ok(ExpEulerStep::new(model, dt).sample_noise(rng))
}

fn exceeds(x: &StateVector) -> bool {
    x.0.iter().any(|v| !(v.abs() <= DIVERGENCE_THRESHOLD))
}

fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Full trajectory recorded every `record_stride` steps (the final state is
/// always recorded).
pub fn integrate(
    model: &SpectralModel,
    spec: &DriftSpec,
    config: &IntegratorConfig,
    x0: &StateVector,
) -> Result<Trajectory> {
    check_initial(model, x0)?;
    let step = ExpEulerStep::new(model, config.dt);
    let mut rng = seeded(config.seed);
    let mut x = x0.clone();
    let mut times = vec![0.0];
    let mut states = vec![x0.clone()];
    let mut diverged_at = None;
    for j in 0..config.steps {
        let f = match spec.apply(model, &x) {
            Ok(f) => f,
            Err(SimError::DriftOverflow { .. }) => {
                diverged_at = Some(j);
                break;
            }
            Err(e) => return Err(e),
        };
        let eta = step.sample_noise(&mut rng);
        step.advance(&mut x, &f, &eta);
        if exceeds(&x) {
            diverged_at = Some(j + 1);
            break;
        }
        if (j + 1) % config.record_stride == 0 || j + 1 == config.steps {
            times.push((j + 1) as f64 * config.dt);
            states.push(x.clone());
        }
    }
    Ok(Trajectory {
        times,
        states,
        seed: config.seed,
        config: *config,
        diverged_at,
    })
}

/// Endpoint `X(T, x0)` without recording; `None` if the path diverged.
pub fn integrate_endpoint(
    model: &SpectralModel,
    spec: &DriftSpec,
    step: &ExpEulerStep,
    steps: usize,
    x0: &StateVector,
    rng: &mut SimRng,
) -> Result<Option<StateVector>> {
    let mut x = x0.clone();
    for _ in 0..steps {
        let f = match spec.apply(model, &x) {
            Ok(f) => f,
            Err(SimError::DriftOverflow { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let eta = step.sample_noise(rng);
        step.advance(&mut x, &f, &eta);
        if exceeds(&x) {
            return Ok(None);
        }
    }
    Ok(Some(x))
}

/// Endpoint together with `D_G X(T, x0) h` for every `h` in `directions`.
pub fn integrate_endpoint_with_tangents(
    model: &SpectralModel,
    spec: &DriftSpec,
    step: &ExpEulerStep,
    steps: usize,
    x0: &StateVector,
    directions: &[StateVector],
    rng: &mut SimRng,
) -> Result<Option<(StateVector, Vec<StateVector>)>> {
    let mut x = x0.clone();
    let mut ys: Vec<StateVector> = directions.to_vec();
    for _ in 0..steps {
        let f = match spec.apply(model, &x) {
            Ok(f) => f,
            Err(SimError::DriftOverflow { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        if !spec.is_zero() {
            for y in &mut ys {
                let dfy = spec.jacobian_apply(model, &x, y);
                step.advance_linear(y, &dfy);
            }
        } else {
            let zero = StateVector::zeros(x.len());
            for y in &mut ys {
                step.advance_linear(y, &zero);
            }
        }
        let eta = step.sample_noise(rng);
        step.advance(&mut x, &f, &eta);
        if exceeds(&x) {
            return Ok(None);
        }
    }
    Ok(Some((x, ys)))
}

fn check_initial(model: &SpectralModel, x0: &StateVector) -> Result<()> {
    if x0.len() != model.n() {
        return Err(SimError::InvalidArgument(format!(
            "initial state has {} coefficients, model has {}",
            x0.len(),
            model.n()
        )));
    }
    if !x0.is_finite() {
        return Err(SimError::InvalidArgument(
            "initial state must be finite".into(),
        ));
    }
    Ok(())
}

/// Two trajectories driven by the same noise sequence.
pub fn integrate_coupled_pair(
    model: &SpectralModel,
    spec: &DriftSpec,
    config: &IntegratorConfig,
    x0: &StateVector,
    y0: &StateVector,
) -> Result<(Trajectory, Trajectory)> {
    check_initial(model, x0)?;
    check_initial(model, y0)?;
    let step = ExpEulerStep::new(model, config.dt);
    let mut rng = seeded(config.seed);
    let (mut x, mut y) = (x0.clone(), y0.clone());
    let mut times = vec![0.0];
    let mut xs = vec![x0.clone()];
    let mut ys = vec![y0.clone()];
    let mut diverged_at = None;
    for j in 0..config.steps {
        let (fx, fy) = match (spec.apply(model, &x), spec.apply(model, &y)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(SimError::DriftOverflow { .. }), _) | (_, Err(SimError::DriftOverflow { .. })) => {
                diverged_at = Some(j);
                break;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        let eta = step.sample_noise(&mut rng);
        step.advance(&mut x, &fx, &eta);
        step.advance(&mut y, &fy, &eta);
        if exceeds(&x) || exceeds(&y) {
            diverged_at = Some(j + 1);
            break;
        }
        if (j + 1) % config.record_stride == 0 || j + 1 == config.steps {
            times.push((j + 1) as f64 * config.dt);
            xs.push(x.clone());
            ys.push(y.clone());
        }
    }
    let mk = |states| Trajectory {
        times: times.clone(),
        states,
        seed: config.seed,
        config: *config,
        diverged_at,
    };
    Ok((mk(xs), mk(ys)))
}

/// Linearized exponential Euler `Y_{j+1} = e^{dtA}Y_j + Φ(dt) DF(X_j) Y_j`
/// along a trajectory recorded at every step.
pub fn integrate_variational(
    model: &SpectralModel,
    spec: &DriftSpec,
    trajectory: &Trajectory,
    h: &StateVector,
) -> Result<VariationalTrajectory> {
    if let Some(step) = trajectory.diverged_at {
        return Err(SimError::Diverged {
            step,
            threshold: DIVERGENCE_THRESHOLD,
        });
    }
    if trajectory.config.record_stride != 1 {
        return Err(SimError::InvalidArgument(
            "variational solve needs a trajectory recorded at every step".into(),
        ));
    }
    let step = ExpEulerStep::new(model, trajectory.config.dt);
    let mut y = h.clone();
    let mut derivatives = Vec::with_capacity(trajectory.states.len());
    derivatives.push(y.clone());
    for x in &trajectory.states[..trajectory.states.len() - 1] {
        let dfy = spec.jacobian_apply(model, x, &y);
        step.advance_linear(&mut y, &dfy);
        derivatives.push(y.clone());
    }
    Ok(VariationalTrajectory {
        times: trajectory.times.clone(),
        derivatives,
        direction: h.clone(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentReport {
    pub p: u32,
    pub times: Vec<f64>,
    /// `E‖X(t)‖_H^p` at the recorded times.
    pub moments: Vec<f64>,
    pub moment_stderr: Vec<f64>,
    /// `sup_t E‖X(t)‖^p / (1 + ‖x0‖^p)`.
    pub normalized_sup: f64,
    /// Running max of `E‖W_A(t)‖_E^p` from the `F = 0`, `x0 = 0` run.
    pub stochastic_convolution_e_sup: f64,
    /// Running max of `E‖W_A(t)‖_H^p`.
    pub stochastic_convolution_h_sup: f64,
    /// Mean per-trajectory OLS slope of `‖X(t)‖^p` over `[T/2, T]`.
    pub trend_slope: f64,
    pub trend_stderr: f64,
    pub stable: bool,
    pub diverged: usize,
}

/// Moment growth along `samples` trajectories.
pub fn check_moment_bound(
    model: &SpectralModel,
    spec: &DriftSpec,
    config: &IntegratorConfig,
    x0: &StateVector,
    p: u32,
    samples: usize,
) -> Result<MomentReport> {
    if p != 2 && p != 4 {
        return Err(SimError::InvalidArgument(format!(
            "moment order must be 2 or 4, got {p}"
        )));
    }
    if samples < 2 {
        return Err(SimError::InvalidArgument(
            "need at least two samples".into(),
        ));
    }
    let pf = p as i32;
    let zero_spec = DriftSpec::zero(spec.zeta_r);
    let runs = par_indexed(samples, |i| -> Result<(Trajectory, Trajectory)> {
        let cfg = config.with_seed(crate::rng::derive_seed(config.seed, i as u64));
        let tr = integrate(model, spec, &cfg, x0)?;
        let wa = integrate(model, &zero_spec, &cfg, &StateVector::zeros(model.n()))?;
        Ok((tr, wa))
    });
    let mut paths = Vec::with_capacity(samples);
    let mut conv = Vec::with_capacity(samples);
    let mut diverged = 0;
    for r in runs {
        let (tr, wa) = r?;
        if tr.is_diverged() {
            diverged += 1;
        } else {
            paths.push(tr);
        }
        conv.push(wa);
    }
    if paths.len() < 2 {
        return Err(SimError::TooManyDiverged { fraction: 1.0 });
    }
    let times = paths[0].times.clone();
    let m = times.len();
    let mut moments = Vec::with_capacity(m);
    let mut moment_stderr = Vec::with_capacity(m);
    for j in 0..m {
        let v: Vec<f64> = paths
            .iter()
            .map(|t| t.states[j].h_norm().powi(pf))
            .collect();
        let (mu, se) = stats::mean_se(&v);
        moments.push(mu);
        moment_stderr.push(se);
    }
    let mut e_sup = 0.0f64;
    let mut h_sup = 0.0f64;
    for j in 0..conv[0].times.len() {
        let e: Vec<f64> = conv
            .iter()
            .map(|t| model.e_norm(&t.states[j]).powi(pf))
            .collect();
        let h: Vec<f64> = conv.iter().map(|t| t.states[j].h_norm().powi(pf)).collect();
        e_sup = e_sup.max(stats::mean(&e));
        h_sup = h_sup.max(stats::mean(&h));
    }
    let half = times
        .iter()
        .position(|&t| t >= 0.5 * config.horizon)
        .unwrap_or(0);
    let tail_t = &times[half..];
    let slopes: Vec<f64> = paths
        .iter()
        .map(|tr| {
            let y: Vec<f64> = tr.states[half..]
                .iter()
                .map(|s| s.h_norm().powi(pf))
                .collect();
            stats::ols_slope(tail_t, &y).0
        })
        .collect();
    let (trend_slope, trend_stderr) = if tail_t.len() >= 3 {
        stats::mean_se(&slopes)
    } else {
        (0.0, 0.0)
    };
    let sup = moments.iter().copied().fold(0.0, f64::max);
    let normalized_sup = sup / (1.0 + x0.h_norm().powi(pf));
    let stable = normalized_sup.is_finite()
        && trend_slope.abs() <= 2.0 * trend_stderr.max(f64::MIN_POSITIVE);
    Ok(MomentReport {
        p,
        times,
        moments,
        moment_stderr,
        normalized_sup,
        stochastic_convolution_e_sup: e_sup,
        stochastic_convolution_h_sup: h_sup,
        trend_slope,
        trend_stderr,
        stable,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ou() -> SpectralModel {
        SpectralModel::diagonal(vec![-1.0], vec![1.0], crate::spectral::Basis::Dirichlet).unwrap()
    }

    #[test]
    fn dt_is_adjusted_to_horizon() {
        let c = IntegratorConfig::new(0.3, 1.0, 0, 1).unwrap();
        assert_eq!(c.steps, 3);
        assert!((c.steps as f64 * c.dt - c.horizon).abs() <= 1e-12);
    }

    #[test]
    fn noise_variance_limits() {
        assert_relative_eq!(
            noise_variance(-1.0, 1.0, 50.0),
            0.5 * (1.0 - (-100f64).exp())
        );
        let dt = 1e-6;
        assert_relative_eq!(
            noise_variance(-PI * PI, 0.5, dt),
            0.25 * dt,
            max_relative = 1e-4
        );
    }

    #[test]
    fn noise_increment_variance_matches() {
        let m = ou();
        let step = ExpEulerStep::new(&m, 0.3);
        let mut rng = rng_for(1, 0);
        let v: Vec<f64> = (0..1_000_000)
            .map(|_| step.sample_noise(&mut rng)[0].powi(2))
            .collect();
        let (mu, se) = stats::mean_se(&v);
        let exact = noise_variance(-1.0, 1.0, 0.3);
        assert!((mu - exact).abs() <= 4.0 * se, "{mu} vs {exact} ± {se}");
    }

    #[test]
    fn deterministic_linear_flow_is_exact() {
        // r tiny stands in for r = 0.
        let m = SpectralModel::diagonal(
            vec![-PI * PI],
            vec![1e-300],
            crate::spectral::Basis::Dirichlet,
        )
        .unwrap();
        let cfg = IntegratorConfig::new(1e-3 / (PI * PI), 1.0 / (PI * PI), 3, 1000).unwrap();
        let tr = integrate(
            &m,
            &DriftSpec::zero(-PI * PI),
            &cfg,
            &StateVector::basis(1, 0),
        )
        .unwrap();
        assert_relative_eq!(tr.last()[0], (-1f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn same_seed_same_path() {
        let m = SpectralModel::dirichlet_laplacian(4, 0.0).unwrap();
        let spec = DriftSpec::cubic(-PI * PI);
        let cfg = IntegratorConfig::new(1e-3, 0.1, 9, 1).unwrap();
        let x0 = StateVector(vec![0.5, 0.1, 0.0, 0.0]);
        let a = integrate(&m, &spec, &cfg, &x0).unwrap();
        let b = integrate(&m, &spec, &cfg, &x0).unwrap();
        for (s, t) in a.states.iter().zip(&b.states) {
            assert_eq!(s, t);
        }
    }

    #[test]
    fn coupled_linear_difference_is_noise_free() {
        let m = SpectralModel::dirichlet_laplacian(4, 0.0).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 0.2, 2, 10).unwrap();
        let x0 = StateVector(vec![1.0, -0.5, 0.2, 0.1]);
        let y0 = StateVector(vec![0.0, 0.5, 0.3, -0.4]);
        let (a, b) =
            integrate_coupled_pair(&m, &DriftSpec::zero(-PI * PI), &cfg, &x0, &y0).unwrap();
        for ((t, s), u) in a.times.iter().zip(&a.states).zip(&b.states) {
            let exact = m.semigroup_flow(*t, &(&x0 - &y0));
            assert!((&(s - u) - &exact).h_norm() <= 1e-10);
        }
        let (c, d) =
            integrate_coupled_pair(&m, &DriftSpec::cubic(-PI * PI), &cfg, &x0, &x0).unwrap();
        assert_eq!(c.states, d.states);
    }

    #[test]
    fn variational_is_semigroup_for_zero_drift() {
        let m = SpectralModel::dirichlet_laplacian(5, 0.5).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 0.05, 4, 1).unwrap();
        let spec = DriftSpec::zero(-PI * PI);
        let tr = integrate(&m, &spec, &cfg, &StateVector::zeros(5)).unwrap();
        let h = StateVector(vec![1.0, 0.5, -0.3, 0.2, 0.1]);
        let v = integrate_variational(&m, &spec, &tr, &h).unwrap();
        assert_eq!(v.derivatives[0], h);
        for (t, y) in v.times.iter().zip(&v.derivatives) {
            assert!((y - &m.semigroup_flow(*t, &h)).h_norm() <= 1e-10);
        }
    }

    #[test]
    fn divergence_is_flagged() {
        let m = SpectralModel::dirichlet_laplacian(2, 0.0).unwrap();
        // Explicit drift step is unstable far out: dt·3u² ≫ 2.
        let spec = DriftSpec::cubic(-PI * PI);
        let cfg = IntegratorConfig::new(0.1, 10.0, 1, 1).unwrap();
        let tr = integrate(&m, &spec, &cfg, &StateVector(vec![50.0, 0.0])).unwrap();
        assert!(tr.is_diverged());
        assert_eq!(tr.states.len(), tr.diverged_at.unwrap());
    }

    #[test]
    fn moment_of_stochastic_convolution_matches_series() {
        let m = SpectralModel::dirichlet_laplacian(4, 0.0).unwrap();
        let cfg = IntegratorConfig::new(1e-2, 1.0, 5, 10).unwrap();
        let rep = check_moment_bound(
            &m,
            &DriftSpec::zero(-PI * PI),
            &cfg,
            &StateVector::zeros(4),
            2,
            4000,
        )
        .unwrap();
        let series: f64 = m
            .eigenvalues()
            .iter()
            .zip(m.r())
            .map(|(l, r)| r * r / (2.0 * l.abs()))
            .sum();
        let last = *rep.moments.last().unwrap();
        let se = *rep.moment_stderr.last().unwrap();
        assert!(
            (last - series).abs() <= 4.0 * se,
            "{last} vs {series} ± {se}"
        );
        assert!(rep.stochastic_convolution_h_sup <= series * 1.1);
    }

    #[test]
    fn deterministic_cubic_norm_decreases() {
        let m = SpectralModel::diagonal(
            (1..=4).map(|k| -((k as f64) * PI).powi(2)).collect(),
            vec![1e-300; 4],
            crate::spectral::Basis::Dirichlet,
        )
        .unwrap();
        let cfg = IntegratorConfig::new(1e-3, 0.5, 0, 1).unwrap();
        let tr = integrate(
            &m,
            &DriftSpec::cubic(-PI * PI),
            &cfg,
            &StateVector(vec![2.0, -1.0, 0.5, 0.3]),
        )
        .unwrap();
        for w in tr.states.windows(2) {
            assert!(w[1].h_norm() <= w[0].h_norm());
        }
    }

    #[test]
    fn trajectory_csv_header() {
        let m = ou();
        let cfg = IntegratorConfig::new(0.5, 1.0, 0, 1).unwrap();
        let tr = integrate(&m, &DriftSpec::zero(-1.0), &cfg, &StateVector::zeros(1)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,coeff_1\n"));
        assert_eq!(s.lines().count(), 4);
    }
}
