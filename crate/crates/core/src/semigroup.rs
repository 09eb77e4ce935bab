//! Monte Carlo estimators of `P(t)φ(x)`, `∇_R P(t)φ(x)` and the invariant
//! measure, with exact Gaussian oracles for the linear problem and a
//! preconditioned Langevin sampler for Gibbs measures.

use crate::drift::{DriftKind, DriftSpec};
use crate::error::{Result, SimError};
use crate::integrator::{self, noise_variance, ExpEulerStep};
use crate::quadrature::GaussHermite;
use crate::rng::{derive_seed, par_indexed, rng_for, SimRng};
use crate::spectral::{SpectralModel, StateVector};
use crate::stats::{self, ErrorScheme, DEFAULT_BATCHES};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write;

const FD_STEP: f64 = 1e-5;

/// Anything that can be integrated against a measure ensemble.
pub trait Observable: Sync {
    fn value(&self, model: &SpectralModel, x: &StateVector) -> f64;

    /// `H`-gradient `∇φ(x)`; the default is a central difference with step `1e−5`.
    fn gradient(&self, model: &SpectralModel, x: &StateVector) -> Result<StateVector> {
        let mut g = StateVector::zeros(x.len());
        let mut xp = x.clone();
        for k in 0..x.len() {
            let orig = xp[k];
            xp[k] = orig + FD_STEP;
            let fp = self.value(model, &xp);
            xp[k] = orig - FD_STEP;
            let fm = self.value(model, &xp);
            xp[k] = orig;
            g[k] = (fp - fm) / (2.0 * FD_STEP);
        }
        Ok(g)
    }

    /// `‖∇_R φ(x)‖²_R = Σ_k r_k² (∂_k φ)²`.
    fn grad_r_norm_sq(&self, model: &SpectralModel, x: &StateVector) -> Result<f64> {
        let g = self.gradient(model, x)?;
        Ok(g.0
            .iter()
            .zip(model.r())
            .map(|(gk, r)| r * r * gk * gk)
            .sum())
    }

    fn sup_bound(&self) -> Option<f64> {
        None
    }

    fn label(&self) -> String;
}

/// Observable defined by a closure on grid values, with numeric gradient.
pub struct GridFunctional<F> {
    pub name: String,
    pub f: F,
    pub sup: Option<f64>,
}

impl<F> Observable for GridFunctional<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn value(&self, model: &SpectralModel, x: &StateVector) -> f64 {
        (self.f)(&model.to_grid(x))
    }

    fn sup_bound(&self) -> Option<f64> {
        self.sup
    }

    fn label(&self) -> String {
        self.name.clone()
    }
}

/// The fixed test-function families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant {
        c: f64,
    },
    /// `offset + ⟨a, x⟩`.
    Linear {
        a: Vec<f64>,
        offset: f64,
    },
    /// `offset + Σ_i w_i tanh(⟨a_i, x⟩)`.
    CylindricalTanh {
        dirs: Vec<Vec<f64>>,
        weights: Vec<f64>,
        offset: f64,
    },
    /// `exp(θ⟨a, x⟩ + κ⟨a, x⟩²)`.
    ExpQuadratic {
        a: Vec<f64>,
        theta: f64,
        kappa: f64,
    },
    /// `⟨a, x⟩^power`.
    Monomial {
        a: Vec<f64>,
        power: u32,
    },
    /// `(tanh²(⟨a, x⟩) + floor)^{1/2}`.
    SoftAbsTanh {
        a: Vec<f64>,
        floor: f64,
    },
    /// `‖x‖²_R`.
    RNormSquared,
    /// `offset + w·tanh(‖x‖²_R / scale)`.
    RNormCap {
        offset: f64,
        weight: f64,
        scale: f64,
    },
    /// `exp(λ‖x‖²_R)`.
    ExpRNormSquared {
        lambda: f64,
    },
}

fn padded(a: &[f64], n: usize) -> StateVector {
    let mut v = vec![0.0; n];
    for (d, s) in v.iter_mut().zip(a) {
        *d = *s;
    }
    StateVector(v)
}

/// Scalar profile `g` of a ridge function `g(⟨a, x⟩)` with its derivatives.
#[derive(Debug, Clone, Copy)]
enum Ridge {
    Tanh,
    ExpQuad { theta: f64, kappa: f64 },
    Power(u32),
    SoftAbs(f64),
}

impl Ridge {
    fn g(&self, s: f64) -> f64 {
        match *self {
            Ridge::Tanh => s.tanh(),
            Ridge::ExpQuad { theta, kappa } => (theta * s + kappa * s * s).exp(),
            Ridge::Power(p) => s.powi(p as i32),
            Ridge::SoftAbs(floor) => (s.tanh().powi(2) + floor).sqrt(),
        }
    }

    fn d1(&self, s: f64) -> f64 {
        match *self {
            Ridge::Tanh => 1.0 - s.tanh().powi(2),
            Ridge::ExpQuad { theta, kappa } => (theta + 2.0 * kappa * s) * self.g(s),
            Ridge::Power(0) => 0.0,
            Ridge::Power(p) => p as f64 * s.powi(p as i32 - 1),
            Ridge::SoftAbs(_) => {
                let th = s.tanh();
                th * (1.0 - th * th) / self.g(s)
            }
        }
    }

    fn d2(&self, s: f64) -> f64 {
        match *self {
            Ridge::Tanh => {
                let th = s.tanh();
                -2.0 * th * (1.0 - th * th)
            }
            Ridge::ExpQuad { theta, kappa } => {
                ((theta + 2.0 * kappa * s).powi(2) + 2.0 * kappa) * self.g(s)
            }
            Ridge::Power(p) if p < 2 => 0.0,
            Ridge::Power(p) => (p * (p - 1)) as f64 * s.powi(p as i32 - 2),
            Ridge::SoftAbs(_) => {
                let th = s.tanh();
                let sech2 = 1.0 - th * th;
                let g = self.g(s);
                // g = √(th² + c): g′ = th·sech²/g, g″ = (sech⁴ − 2th²sech² − g′²)/g.
                let g1 = th * sech2 / g;
                (sech2 * sech2 - 2.0 * th * th * sech2 - g1 * g1) / g
            }
        }
    }
}

impl TestFunction {
    pub fn constant(c: f64) -> Self {
        TestFunction::Constant { c }
    }

    /// `offset + ⟨e_k, x⟩` (0-based `k`).
    pub fn coordinate(n: usize, k: usize, offset: f64) -> Self {
        TestFunction::Linear {
            a: StateVector::basis(n, k).0,
            offset,
        }
    }

    pub fn tanh_coordinate(n: usize, k: usize, weight: f64, offset: f64) -> Self {
        TestFunction::CylindricalTanh {
            dirs: vec![StateVector::basis(n, k).0],
            weights: vec![weight],
            offset,
        }
    }

    pub fn exp_quadratic_coordinate(n: usize, k: usize, theta: f64, kappa: f64) -> Self {
        TestFunction::ExpQuadratic {
            a: StateVector::basis(n, k).0,
            theta,
            kappa,
        }
    }

    /// Certified Lipschitz constant along `‖·‖_R`, when the family has one.
    pub fn lip_r(&self, model: &SpectralModel) -> Option<f64> {
        let ra = |a: &[f64]| -> f64 {
            a.iter()
                .zip(model.r())
                .map(|(v, r)| (v * r).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        match self {
            TestFunction::Constant { .. } => Some(0.0),
            TestFunction::Linear { a, .. } => Some(ra(a)),
            TestFunction::CylindricalTanh { dirs, weights, .. } => {
                Some(dirs.iter().zip(weights).map(|(a, w)| w.abs() * ra(a)).sum())
            }
            TestFunction::SoftAbsTanh { a, floor } => {
                // |g′| ≤ max th·sech²/√(th²+c) ≤ 1/(2√c)·... bounded by sech² ≤ 1 when c ≥ 0.
                let bound = if *floor > 0.0 {
                    1.0f64.min(0.5 / floor.sqrt())
                } else {
                    1.0
                };
                Some(bound * ra(a))
            }
            _ => None,
        }
    }

    fn ridges(&self, n: usize) -> Option<(f64, Vec<(f64, StateVector, Ridge)>)> {
        match self {
            TestFunction::Constant { c } => Some((*c, vec![])),
            TestFunction::Linear { a, offset } => {
                Some((*offset, vec![(1.0, padded(a, n), Ridge::Power(1))]))
            }
            TestFunction::CylindricalTanh {
                dirs,
                weights,
                offset,
            } => Some((
                *offset,
                dirs.iter()
                    .zip(weights)
                    .map(|(a, w)| (*w, padded(a, n), Ridge::Tanh))
                    .collect(),
            )),
            TestFunction::ExpQuadratic { a, theta, kappa } => Some((
                0.0,
                vec![(
                    1.0,
                    padded(a, n),
                    Ridge::ExpQuad {
                        theta: *theta,
                        kappa: *kappa,
                    },
                )],
            )),
            TestFunction::Monomial { a, power } => {
                Some((0.0, vec![(1.0, padded(a, n), Ridge::Power(*power))]))
            }
            TestFunction::SoftAbsTanh { a, floor } => {
                Some((0.0, vec![(1.0, padded(a, n), Ridge::SoftAbs(*floor))]))
            }
            _ => None,
        }
    }

    /// `Tr[R² D²φ(x)]`.
    pub fn trace_r_hessian(&self, model: &SpectralModel, x: &StateVector) -> Result<f64> {
        let n = x.len();
        let r2a = |a: &StateVector| -> f64 {
            a.0.iter()
                .zip(model.r())
                .map(|(v, r)| (v * r).powi(2))
                .sum()
        };
        if let Some((_, ridges)) = self.ridges(n) {
            return Ok(ridges
                .iter()
                .map(|(w, a, g)| w * g.d2(a.dot(x)) * r2a(a))
                .sum());
        }
        let s = model.r_inner(x, x);
        let nf = n as f64;
        match self {
            TestFunction::RNormSquared => Ok(2.0 * nf),
            TestFunction::ExpRNormSquared { lambda } => {
                Ok((lambda * s).exp() * (2.0 * lambda * nf + 4.0 * lambda * lambda * s))
            }
            TestFunction::RNormCap { weight, scale, .. } => {
                let th = (s / scale).tanh();
                let g1 = weight * (1.0 - th * th) / scale;
                let g2 = -2.0 * weight * th * (1.0 - th * th) / (scale * scale);
                Ok(4.0 * g2 * s + 2.0 * nf * g1)
            }
            _ => unreachable!(),
        }
    }
}

impl Observable for TestFunction {
    fn value(&self, model: &SpectralModel, x: &StateVector) -> f64 {
        if let Some((offset, ridges)) = self.ridges(x.len()) {
            return offset
                + ridges
                    .iter()
                    .map(|(w, a, g)| w * g.g(a.dot(x)))
                    .sum::<f64>();
        }
        let s = model.r_inner(x, x);
        match self {
            TestFunction::RNormSquared => s,
            TestFunction::RNormCap {
                offset,
                weight,
                scale,
            } => offset + weight * (s / scale).tanh(),
            TestFunction::ExpRNormSquared { lambda } => (lambda * s).exp(),
            _ => unreachable!(),
        }
    }

    fn gradient(&self, model: &SpectralModel, x: &StateVector) -> Result<StateVector> {
        let n = x.len();
        if let Some((_, ridges)) = self.ridges(n) {
            let mut g = StateVector::zeros(n);
            for (w, a, ridge) in &ridges {
                g.axpy(w * ridge.d1(a.dot(x)), a);
            }
            return Ok(g);
        }
        let s = model.r_inner(x, x);
        let scale_by = |c: f64| -> StateVector {
            StateVector(
                x.0.iter()
                    .zip(model.r())
                    .map(|(v, r)| c * 2.0 * v / (r * r))
                    .collect(),
            )
        };
        Ok(match self {
            TestFunction::RNormSquared => scale_by(1.0),
            TestFunction::RNormCap { weight, scale, .. } => {
                let th = (s / scale).tanh();
                scale_by(weight * (1.0 - th * th) / scale)
            }
            TestFunction::ExpRNormSquared { lambda } => scale_by(lambda * (lambda * s).exp()),
            _ => unreachable!(),
        })
    }

    fn sup_bound(&self) -> Option<f64> {
        match self {
            TestFunction::Constant { c } => Some(c.abs()),
            TestFunction::CylindricalTanh {
                weights, offset, ..
            } => Some(offset.abs() + weights.iter().map(|w| w.abs()).sum::<f64>()),
            TestFunction::SoftAbsTanh { floor, .. } => Some((1.0 + floor).sqrt()),
            TestFunction::RNormCap { offset, weight, .. } => Some(offset.abs() + weight.abs()),
            TestFunction::ExpQuadratic { theta, kappa, .. } if *kappa < 0.0 => {
                Some((-theta * theta / (4.0 * kappa)).exp())
            }
            TestFunction::ExpQuadratic { theta, kappa, .. } if *theta == 0.0 && *kappa == 0.0 => {
                Some(1.0)
            }
            _ => None,
        }
    }

    fn label(&self) -> String {
        fn dir(a: &[f64]) -> String {
            let nz: Vec<usize> = a
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, _)| i)
                .collect();
            if nz.len() == 1 && a[nz[0]] == 1.0 {
                format!("x{}", nz[0] + 1)
            } else {
                let terms: Vec<String> =
                    nz.iter().map(|&i| format!("{}*x{}", a[i], i + 1)).collect();
                format!("({})", terms.join("+"))
            }
        }
        match self {
            TestFunction::Constant { c } => format!("{c}"),
            TestFunction::Linear { a, offset } if *offset == 0.0 => dir(a),
            TestFunction::Linear { a, offset } => format!("{offset}+{}", dir(a)),
            TestFunction::CylindricalTanh {
                dirs,
                weights,
                offset,
            } => {
                let terms: Vec<String> = dirs
                    .iter()
                    .zip(weights)
                    .map(|(a, w)| {
                        if *w == 1.0 {
                            format!("tanh({})", dir(a))
                        } else {
                            format!("{w}*tanh({})", dir(a))
                        }
                    })
                    .collect();
                if *offset == 0.0 {
                    terms.join("+")
                } else {
                    format!("{offset}+{}", terms.join("+"))
                }
            }
            TestFunction::ExpQuadratic { a, theta, kappa } => {
                if *kappa == 0.0 {
                    format!("exp({theta}*{})", dir(a))
                } else {
                    format!("exp({theta}*{0}+{kappa}*{0}^2)", dir(a))
                }
            }
            TestFunction::Monomial { a, power } => format!("{}^{power}", dir(a)),
            TestFunction::SoftAbsTanh { a, floor } => format!("sqrt(tanh({})^2+{floor})", dir(a)),
            TestFunction::RNormSquared => "|x|_R^2".into(),
            TestFunction::RNormCap {
                offset,
                weight,
                scale,
            } => format!("{offset}+{weight}*tanh(|x|_R^2/{scale})"),
            TestFunction::ExpRNormSquared { lambda } => format!("exp({lambda}*|x|_R^2)"),
        }
    }
}

/// `ln E exp(θS + κS²)` for `S ~ N(mean, var)`; `+∞` when `1 − 2κ·var ≤ 0`.
pub fn gaussian_exp_quadratic_log_mean(theta: f64, kappa: f64, mean: f64, var: f64) -> f64 {
    let d = 1.0 - 2.0 * kappa * var;
    if d <= 0.0 {
        return f64::INFINITY;
    }
    -0.5 * d.ln() + (kappa * mean * mean + theta * mean + 0.5 * theta * theta * var) / d
}

/// How an ensemble was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Ergodic,
    EnsembleOfEndpoints,
    GaussianOracle,
    GibbsUla,
}

/// Equally weighted sample cloud.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureEnsemble {
    pub points: Vec<StateVector>,
    pub provenance: Provenance,
    pub burn_in: f64,
    pub thinning: f64,
    pub seed: u64,
    pub error_scheme: ErrorScheme,
}

pub const MIN_INEQUALITY_POINTS: usize = 1000;

impl MeasureEnsemble {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.points.len() as f64
    }

    pub fn require_inequality_size(&self) -> Result<()> {
        if self.points.len() < MIN_INEQUALITY_POINTS {
            return Err(SimError::InvalidArgument(format!(
                "ensemble has {} points, inequality checks need at least {MIN_INEQUALITY_POINTS}",
                self.points.len()
            )));
        }
        Ok(())
    }

    pub fn values(&self, f: impl Fn(&StateVector) -> f64 + Sync) -> Vec<f64> {
        par_indexed(self.points.len(), |i| f(&self.points[i]))
    }

    pub fn try_values(&self, f: impl Fn(&StateVector) -> Result<f64> + Sync) -> Result<Vec<f64>> {
        par_indexed(self.points.len(), |i| f(&self.points[i]))
            .into_iter()
            .collect()
    }

    pub fn mean_se(&self, values: &[f64]) -> (f64, f64) {
        stats::mean_se_with(values, self.error_scheme)
    }

    pub fn expect(&self, model: &SpectralModel, phi: &dyn Observable) -> (f64, f64) {
        let v = self.values(|x| phi.value(model, x));
        self.mean_se(&v)
    }

    /// Per-mode sample means and variances with their standard errors.
    pub fn mode_moments(&self) -> Vec<ModeMoments> {
        let n = self.points.first().map_or(0, |p| p.len());
        (0..n)
            .map(|k| {
                let v: Vec<f64> = self.points.iter().map(|p| p[k]).collect();
                let (mean, mean_se) = self.mean_se(&v);
                let sq: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
                let (var, var_se) = self.mean_se(&sq);
                ModeMoments {
                    mean,
                    mean_se,
                    var,
                    var_se,
                }
            })
            .collect()
    }

    /// Writes `index,coeff_1..coeff_n`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let n = self.points.first().map_or(0, |s| s.len());
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["index".to_string()];
        header.extend((1..=n).map(|k| format!("coeff_{k}")));
        wr.write_record(&header)?;
        for (i, s) in self.points.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(s.0.iter().map(|v| format!("{v}")));
            wr.write_record(&row)?;
        }
        wr.flush()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModeMoments {
    pub mean: f64,
    pub mean_se: f64,
    pub var: f64,
    pub var_se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemigroupEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub diverged: usize,
    pub t: f64,
    pub seed: u64,
}

/// JSON record of an estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub check: String,
    pub t: f64,
    pub x_id: String,
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

impl SemigroupEstimate {
    pub fn record(&self, check: &str, x_id: &str) -> EstimateRecord {
        EstimateRecord {
            check: check.into(),
            t: self.t,
            x_id: x_id.into(),
            value: self.value,
            stderr: self.stderr,
            samples: self.samples,
            seed: self.seed,
        }
    }
}

/// Step plan for reaching time `t`: a single exact step when `F = 0`.
fn plan(spec: &DriftSpec, dt: f64, t: f64) -> (f64, usize) {
    if spec.is_zero() {
        return (t, 1);
    }
    let steps = (t / dt).round().max(1.0) as usize;
    (t / steps as f64, steps)
}

/// Endpoints `X(t, x)` of `samples` independent paths; sample `i` uses the
/// stream `derive_seed(seed, i)`. Diverged paths are dropped and counted.
pub fn sample_endpoints(
    model: &SpectralModel,
    spec: &DriftSpec,
    dt: f64,
    t: f64,
    x: &StateVector,
    samples: usize,
    seed: u64,
) -> Result<(Vec<StateVector>, usize)> {
    if t == 0.0 {
        return Ok((vec![x.clone(); samples], 0));
    }
    if !(t > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "t must be >= 0, got {t}"
        )));
    }
    let (h, steps) = plan(spec, dt, t);
    let step = ExpEulerStep::new(model, h);
    let out = par_indexed(samples, |i| {
        let mut rng = rng_for(seed, i as u64);
        integrator::integrate_endpoint(model, spec, &step, steps, x, &mut rng)
    });
    let mut points = Vec::with_capacity(samples);
    let mut diverged = 0;
    for r in out {
        match r? {
            Some(p) => points.push(p),
            None => diverged += 1,
        }
    }
    if diverged as f64 > 0.01 * samples as f64 {
        return Err(SimError::TooManyDiverged {
            fraction: diverged as f64 / samples as f64,
        });
    }
    Ok((points, diverged))
}

/// `P(t)φ(x) = E[φ(X(t, x))]`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_semigroup(
    model: &SpectralModel,
    spec: &DriftSpec,
    dt: f64,
    t: f64,
    x: &StateVector,
    phi: &dyn Observable,
    samples: usize,
    seed: u64,
) -> Result<SemigroupEstimate> {
    if t == 0.0 {
        return Ok(SemigroupEstimate {
            value: phi.value(model, x),
            stderr: 0.0,
            samples,
            diverged: 0,
            t,
            seed,
        });
    }
    let (points, diverged) = sample_endpoints(model, spec, dt, t, x, samples, seed)?;
    let v: Vec<f64> = points.iter().map(|p| phi.value(model, p)).collect();
    let (value, stderr) = stats::mean_se(&v);
    Ok(SemigroupEstimate {
        value,
        stderr,
        samples: v.len(),
        diverged,
        t,
        seed,
    })
}

/// Mean `e^{tA}x` and per-mode variances `q_k(t)` of the `F = 0` law.
pub fn gaussian_law(model: &SpectralModel, t: f64, x: &StateVector) -> (StateVector, Vec<f64>) {
    let mean = model.semigroup_flow(t, x);
    let var = model
        .eigenvalues()
        .iter()
        .zip(model.r())
        .map(|(l, r)| {
            if t.is_infinite() {
                r * r / (2.0 * l.abs())
            } else {
                noise_variance(*l, *r, t)
            }
        })
        .collect();
    (mean, var)
}

/// `E[φ(Y)]` for `Y ~ N(mean, diag(var))`.
pub fn gaussian_expectation(
    phi: &TestFunction,
    mean: &StateVector,
    var: &[f64],
    r: &[f64],
) -> Result<f64> {
    let n = mean.len();
    let gh = GaussHermite::standard();
    let proj = |a: &StateVector| -> (f64, f64) {
        let m = a.dot(mean);
        let v: f64 = a.0.iter().zip(var).map(|(ak, q)| ak * ak * q).sum();
        (m, v)
    };
    match phi {
        TestFunction::Constant { c } => Ok(*c),
        TestFunction::Linear { a, offset } => Ok(offset + proj(&padded(a, n)).0),
        TestFunction::CylindricalTanh {
            dirs,
            weights,
            offset,
        } => Ok(offset
            + dirs
                .iter()
                .zip(weights)
                .map(|(a, w)| {
                    let (m, v) = proj(&padded(a, n));
                    w * gh.expect(m, v.sqrt(), f64::tanh)
                })
                .sum::<f64>()),
        TestFunction::ExpQuadratic { a, theta, kappa } => {
            let (m, v) = proj(&padded(a, n));
            Ok(gaussian_exp_quadratic_log_mean(*theta, *kappa, m, v).exp())
        }
        TestFunction::Monomial { a, power } => {
            let (m, v) = proj(&padded(a, n));
            Ok(gh.expect(m, v.sqrt(), |s| s.powi(*power as i32)))
        }
        TestFunction::SoftAbsTanh { a, floor } => {
            let (m, v) = proj(&padded(a, n));
            Ok(gh.expect(m, v.sqrt(), |s| (s.tanh().powi(2) + floor).sqrt()))
        }
        TestFunction::RNormSquared => Ok(mean
            .0
            .iter()
            .zip(var)
            .zip(r)
            .map(|((m, q), rk)| (m * m + q) / (rk * rk))
            .sum()),
        TestFunction::ExpRNormSquared { lambda } => {
            let mut log = 0.0;
            for ((m, q), rk) in mean.0.iter().zip(var).zip(r) {
                let l = gaussian_exp_quadratic_log_mean(0.0, lambda / (rk * rk), *m, *q);
                if !l.is_finite() {
                    return Ok(f64::INFINITY);
                }
                log += l;
            }
            Ok(log.exp())
        }
        TestFunction::RNormCap {
            offset,
            weight,
            scale,
        } if n == 1 => {
            let r2 = r[0] * r[0];
            Ok(offset
                + weight * gh.expect(mean[0], var[0].sqrt(), |s| (s * s / (r2 * scale)).tanh()))
        }
        other => Err(SimError::Unsupported {
            op: "gaussian_expectation",
            kind: other.label(),
        }),
    }
}

/// Exact `P(t)φ(x)` for `F = 0`.
pub fn mehler_oracle(
    model: &SpectralModel,
    t: f64,
    x: &StateVector,
    phi: &TestFunction,
) -> Result<f64> {
    let (mean, var) = gaussian_law(model, t, x);
    gaussian_expectation(phi, &mean, &var, model.r())
}

/// Exact `∇P(t)φ(x) = e^{tA} E[∇φ(X(t, x))]` for `F = 0` (ridge families).
pub fn mehler_gradient(
    model: &SpectralModel,
    t: f64,
    x: &StateVector,
    phi: &TestFunction,
) -> Result<StateVector> {
    let n = x.len();
    let (mean, var) = gaussian_law(model, t, x);
    let gh = GaussHermite::standard();
    let Some((_, ridges)) = phi.ridges(n) else {
        return Err(SimError::Unsupported {
            op: "mehler_gradient",
            kind: phi.label(),
        });
    };
    let mut g = StateVector::zeros(n);
    for (w, a, ridge) in &ridges {
        let m = a.dot(&mean);
        let v: f64 = a.0.iter().zip(&var).map(|(ak, q)| ak * ak * q).sum();
        let e = match ridge {
            Ridge::ExpQuad { theta, kappa } => {
                let d = 1.0 - 2.0 * kappa * v;
                gaussian_exp_quadratic_log_mean(*theta, *kappa, m, v).exp()
                    * (theta + 2.0 * kappa * m)
                    / d
            }
            Ridge::Power(1) => 1.0,
            _ => gh.expect(m, v.sqrt(), |s| ridge.d1(s)),
        };
        g.axpy(w * e, a);
    }
    Ok(model.semigroup_flow(t, &g))
}

fn require_dissipative(model: &SpectralModel, spec: &DriftSpec) -> Result<f64> {
    let zeta = model.zeta_a() + spec.zeta_f;
    if !(zeta < 0.0) {
        return Err(SimError::NotDissipative { zeta });
    }
    Ok(zeta)
}

/// Stationary Gaussian law `N(0, diag(r_k²/(2|λ_k|)))` of the linear problem, sampled exactly.
pub fn gaussian_oracle_ensemble(model: &SpectralModel, count: usize, seed: u64) -> MeasureEnsemble {
    let sd: Vec<f64> = model
        .eigenvalues()
        .iter()
        .zip(model.r())
        .map(|(l, r)| r / (2.0 * l.abs()).sqrt())
        .collect();
    let points = par_indexed(count, |i| {
        let mut rng = rng_for(seed, i as u64);
        StateVector(
            sd.iter()
                .map(|s| s * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        )
    });
    MeasureEnsemble {
        points,
        provenance: Provenance::GaussianOracle,
        burn_in: 0.0,
        thinning: 0.0,
        seed,
        error_scheme: ErrorScheme::Iid,
    }
}

/// Independent endpoints `X(t_end, x0)`; `t_end` plays the role of burn-in.
pub fn ensemble_of_endpoints(
    model: &SpectralModel,
    spec: &DriftSpec,
    dt: f64,
    t_end: f64,
    x0: &StateVector,
    count: usize,
    seed: u64,
) -> Result<MeasureEnsemble> {
    require_dissipative(model, spec)?;
    let (points, _) = sample_endpoints(model, spec, dt, t_end, x0, count, seed)?;
    Ok(MeasureEnsemble {
        points,
        provenance: Provenance::EnsembleOfEndpoints,
        burn_in: t_end,
        thinning: 0.0,
        seed,
        error_scheme: ErrorScheme::Iid,
    })
}

/// Default burn-in `20/|ζ|` and thinning `1/|ζ|` in time units.
pub fn default_chain_times(model: &SpectralModel, spec: &DriftSpec) -> Result<(f64, f64)> {
    let zeta = require_dissipative(model, spec)?;
    Ok((20.0 / zeta.abs(), 1.0 / zeta.abs()))
}

/// First and second mode moments over the two halves of a chain must agree
/// within 3 joint standard errors.
pub fn stationarity_diagnostic(points: &[StateVector], scheme: ErrorScheme) -> Result<()> {
    let half = points.len() / 2;
    if half < 2 {
        return Ok(());
    }
    let n = points[0].len();
    let batches = match scheme {
        ErrorScheme::BatchMeans(b) => ErrorScheme::BatchMeans((b / 2).max(10)),
        s => s,
    };
    for k in 0..n {
        for power in [1, 2] {
            let a: Vec<f64> = points[..half].iter().map(|p| p[k].powi(power)).collect();
            let b: Vec<f64> = points[half..2 * half]
                .iter()
                .map(|p| p[k].powi(power))
                .collect();
            let (ma, sa) = stats::mean_se_with(&a, batches);
            let (mb, sb) = stats::mean_se_with(&b, batches);
            let joint = (sa * sa + sb * sb).sqrt();
            if (ma - mb).abs() > 3.0 * joint {
                return Err(SimError::NonStationary(format!(
                    "mode {} moment {power}: halves differ by {:.3e} > 3 x {:.3e}",
                    k + 1,
                    (ma - mb).abs(),
                    joint
                )));
            }
        }
    }
    Ok(())
}

/// One long trajectory from `0`: discard `burn_in`, then keep a state every
/// `thinning` time units.
pub fn sample_invariant(
    model: &SpectralModel,
    spec: &DriftSpec,
    dt: f64,
    burn_in: f64,
    count: usize,
    thinning: f64,
    seed: u64,
) -> Result<MeasureEnsemble> {
    require_dissipative(model, spec)?;
    if !(dt > 0.0 && burn_in >= 0.0 && thinning > 0.0) || count == 0 {
        return Err(SimError::InvalidArgument("invalid chain settings".into()));
    }
    let stride = (thinning / dt).round().max(1.0) as usize;
    let burn_steps = (burn_in / dt).round() as usize;
    let step = ExpEulerStep::new(model, dt);
    let mut rng = SimRng::seed_from_u64(derive_seed(seed, u64::MAX));
    let mut x = StateVector::zeros(model.n());
    let advance = |x: StateVector, steps: usize, rng: &mut SimRng| -> Result<StateVector> {
        integrator::integrate_endpoint(model, spec, &step, steps, &x, rng)?.ok_or(
            SimError::Diverged {
                step: steps,
                threshold: integrator::DIVERGENCE_THRESHOLD,
            },
        )
    };
    x = advance(x, burn_steps, &mut rng)?;
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        x = advance(x, stride, &mut rng)?;
        points.push(x.clone());
    }
    let scheme = ErrorScheme::BatchMeans(DEFAULT_BATCHES);
    stationarity_diagnostic(&points, scheme)?;
    Ok(MeasureEnsemble {
        points,
        provenance: Provenance::Ergodic,
        burn_in,
        thinning: stride as f64 * dt,
        seed,
        error_scheme: scheme,
    })
}

/// Settings of the preconditioned Langevin sampler, in its own time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlaSettings {
    pub step: f64,
    pub burn_in: f64,
    pub thinning: f64,
}

impl Default for UlaSettings {
    fn default() -> Self {
        Self {
            step: 0.05,
            burn_in: 20.0,
            thinning: 2.0,
        }
    }
}

/// Preconditioned unadjusted Langevin chain for the Gibbs measure of a
/// Nemytskii drift with `R = Id`.
///
/// With unit noise the invariant density in the truncated coordinates is
/// `∝ exp(−Σ_k |λ_k| x_k² − 2U(x))`, `U(x) = w Σ_j B(u_j)`, i.e. the
/// Gaussian reference `N(0, diag(1/(2|λ_k|)))` tilted by `e^{−2U}`. With
/// `M = diag(1/(2|λ_k|))` one step is
/// `x' = e^{−h/2} x − 2(1 − e^{−h/2}) M∇U(x) + √(M(1 − e^{−h})) ξ`,
/// exact for `b = 0`.
pub fn gibbs_oracle_sample(
    model: &SpectralModel,
    b_coeffs: &[f64],
    count: usize,
    settings: UlaSettings,
    seed: u64,
) -> Result<MeasureEnsemble> {
    if model.r().iter().any(|r| (r - 1.0).abs() > 1e-15) {
        return Err(SimError::InvalidArgument(
            "gibbs sampler requires R = Id".into(),
        ));
    }
    let spec = DriftSpec {
        kind: DriftKind::Nemytskii {
            b_coeffs: b_coeffs.to_vec(),
        },
        zeta_f: 0.0,
        zeta_r: model.zeta_a(),
        super_dissipativity: None,
    };
    let h = settings.step;
    if !(h > 0.0 && settings.thinning > 0.0 && settings.burn_in >= 0.0) || count == 0 {
        return Err(SimError::InvalidArgument("invalid ULA settings".into()));
    }
    let m: Vec<f64> = model
        .eigenvalues()
        .iter()
        .map(|l| 1.0 / (2.0 * l.abs()))
        .collect();
    let contract = (-0.5 * h).exp();
    let drift_scale = 2.0 * (1.0 - contract);
    let sd: Vec<f64> = m.iter().map(|mk| (mk * (-(-h).exp_m1())).sqrt()).collect();
    let mut rng = SimRng::seed_from_u64(derive_seed(seed, u64::MAX - 1));
    let mut x = StateVector::zeros(model.n());
    let step = |x: &mut StateVector, rng: &mut SimRng| -> Result<()> {
        // ∇U = −F.
        let grad_u = spec.apply(model, x)?.scaled(-1.0);
        for k in 0..x.len() {
            let xi: f64 = rng.sample(StandardNormal);
            x[k] = contract * x[k] - drift_scale * m[k] * grad_u[k] + sd[k] * xi;
        }
        if !x.is_finite() || x.max_abs() > integrator::DIVERGENCE_THRESHOLD {
            return Err(SimError::Diverged {
                step: 0,
                threshold: integrator::DIVERGENCE_THRESHOLD,
            });
        }
        Ok(())
    };
    let burn_steps = (settings.burn_in / h).round() as usize;
    let stride = (settings.thinning / h).round().max(1.0) as usize;
    for _ in 0..burn_steps {
        step(&mut x, &mut rng)?;
    }
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..stride {
            step(&mut x, &mut rng)?;
        }
        points.push(x.clone());
    }
    let scheme = ErrorScheme::BatchMeans(DEFAULT_BATCHES);
    stationarity_diagnostic(&points, scheme)?;
    Ok(MeasureEnsemble {
        points,
        provenance: Provenance::GibbsUla,
        burn_in: settings.burn_in,
        thinning: stride as f64 * h,
        seed,
        error_scheme: scheme,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientEstimate {
    /// `∂_i P(t)φ(x)`.
    pub gradient_h: Vec<f64>,
    /// `r_i ∂_i P(t)φ(x)`: coordinates of `∇_R P(t)φ(x)` in the orthonormal basis `r_i e_i` of `H_R`.
    pub components_r: Vec<f64>,
    pub components_stderr: Vec<f64>,
    /// Bias-corrected `‖∇_R P(t)φ(x)‖²_R` with delta-method standard error.
    pub r_norm_sq: f64,
    pub r_norm_sq_stderr: f64,
    pub samples: usize,
    pub t: f64,
    pub seed: u64,
}

impl GradientEstimate {
    /// `∇_R P(t)φ(x) = R²∇P(t)φ(x)` as a vector in `H`.
    pub fn grad_r(&self, model: &SpectralModel) -> StateVector {
        StateVector(
            self.gradient_h
                .iter()
                .zip(model.r())
                .map(|(g, r)| r * r * g)
                .collect(),
        )
    }
}

/// `∇_R P(t)φ(x)` through `E[⟨∇φ(X(t,x)), D_G X(t,x) h_i⟩]`, `h_i = r_i e_i`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_gradient_semigroup(
    model: &SpectralModel,
    spec: &DriftSpec,
    dt: f64,
    t: f64,
    x: &StateVector,
    phi: &dyn Observable,
    samples: usize,
    seed: u64,
) -> Result<GradientEstimate> {
    let n = model.n();
    let dirs: Vec<StateVector> = (0..n)
        .map(|i| StateVector::basis(n, i).scaled(model.r()[i]))
        .collect();
    let rows: Vec<Vec<f64>> = if t == 0.0 {
        let g = phi.gradient(model, x)?;
        vec![(0..n).map(|i| g[i] * model.r()[i]).collect(); samples.max(2)]
    } else {
        let (h, steps) = plan(spec, dt, t);
        let step = ExpEulerStep::new(model, h);
        let out = par_indexed(samples, |i| -> Result<Option<Vec<f64>>> {
            let mut rng = rng_for(seed, i as u64);
            match integrator::integrate_endpoint_with_tangents(
                model, spec, &step, steps, x, &dirs, &mut rng,
            )? {
                None => Ok(None),
                Some((xt, ys)) => {
                    let g = phi.gradient(model, &xt)?;
                    Ok(Some(ys.iter().map(|y| g.dot(y)).collect()))
                }
            }
        });
        let mut rows = Vec::with_capacity(samples);
        let mut diverged = 0usize;
        for r in out {
            match r? {
                Some(v) => rows.push(v),
                None => diverged += 1,
            }
        }
        if diverged as f64 > 0.01 * samples as f64 {
            return Err(SimError::TooManyDiverged {
                fraction: diverged as f64 / samples as f64,
            });
        }
        rows
    };
    let columns: Vec<Vec<f64>> = (0..n)
        .map(|i| rows.iter().map(|r| r[i]).collect())
        .collect();
    let refs: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
    let (means, cov) = stats::mean_cov(&refs, ErrorScheme::Iid);
    let trace: f64 = (0..n).map(|i| cov[i][i]).sum();
    let raw: f64 = means.iter().map(|m| m * m).sum();
    let mut var = 0.0;
    for i in 0..n {
        for j in 0..n {
            var += 4.0 * means[i] * means[j] * cov[i][j];
        }
    }
    Ok(GradientEstimate {
        gradient_h: means.iter().zip(model.r()).map(|(c, r)| c / r).collect(),
        components_stderr: (0..n).map(|i| cov[i][i].max(0.0).sqrt()).collect(),
        components_r: means,
        r_norm_sq: (raw - trace).max(0.0),
        r_norm_sq_stderr: var.max(0.0).sqrt(),
        samples: rows.len(),
        t,
        seed,
    })
}

/// `𝒩₀φ(x) = ½Tr[R²D²φ(x)] + ⟨Ax + F(x), ∇φ(x)⟩_H`.
pub fn apply_generator(
    model: &SpectralModel,
    spec: &DriftSpec,
    phi: &TestFunction,
    x: &StateVector,
) -> Result<f64> {
    if matches!(phi, TestFunction::Monomial { power, .. } if *power > 2) {
        return Err(SimError::Unsupported {
            op: "apply_generator",
            kind: phi.label(),
        });
    }
    let tr = phi.trace_r_hessian(model, x)?;
    let grad = phi.gradient(model, x)?;
    let mut b = spec.apply(model, x)?;
    for (k, l) in model.eigenvalues().iter().enumerate() {
        b[k] += l * x[k];
    }
    Ok(0.5 * tr + b.dot(&grad))
}

/// Paired-difference consistency statement `E[d] = 0` with its standard error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub difference: f64,
    pub stderr: f64,
    pub k_sigma: f64,
    pub holds: bool,
}

impl IdentityCheck {
    fn new(name: &str, lhs: f64, rhs: f64, diff: (f64, f64), k_sigma: f64) -> Self {
        let (difference, stderr) = diff;
        Self {
            name: name.into(),
            lhs,
            rhs,
            difference,
            stderr,
            k_sigma,
            holds: difference.abs() <= k_sigma * stderr + 1e-12 * (1.0 + rhs.abs()),
        }
    }
}

/// `∫P(t)φ dν = ∫φ dν` with one path from every ensemble point.
pub fn invariance_check(
    model: &SpectralModel,
    spec: &DriftSpec,
    ensemble: &MeasureEnsemble,
    dt: f64,
    t: f64,
    phi: &dyn Observable,
    seed: u64,
) -> Result<IdentityCheck> {
    let (h, steps) = plan(spec, dt, t);
    let step = ExpEulerStep::new(model, h);
    let pairs = par_indexed(ensemble.len(), |i| -> Result<Option<(f64, f64)>> {
        let mut rng = rng_for(seed, i as u64);
        let x = &ensemble.points[i];
        Ok(
            integrator::integrate_endpoint(model, spec, &step, steps, x, &mut rng)?
                .map(|xt| (phi.value(model, &xt), phi.value(model, x))),
        )
    });
    let pairs: Vec<(f64, f64)> = pairs
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let after: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let before: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    Ok(IdentityCheck::new(
        "invariance",
        stats::mean(&after),
        stats::mean(&before),
        ensemble.mean_se(&diff),
        3.0,
    ))
}

/// `P(t+s)φ(x) = E[P(s)φ(X(t,x))]` for `F = 0`, inner values from the Mehler oracle.
pub fn semigroup_law_check(
    model: &SpectralModel,
    t: f64,
    s: f64,
    x: &StateVector,
    phi: &TestFunction,
    samples: usize,
    seed: u64,
) -> Result<IdentityCheck> {
    let zero = DriftSpec::zero(model.zeta_a());
    let direct = estimate_semigroup(
        model,
        &zero,
        t + s,
        t + s,
        x,
        phi,
        samples,
        derive_seed(seed, 1),
    )?;
    let (outer, _) = sample_endpoints(model, &zero, t, t, x, samples, derive_seed(seed, 2))?;
    let inner: Vec<f64> = outer
        .iter()
        .map(|p| mehler_oracle(model, s, p, phi))
        .collect::<Result<_>>()?;
    let (nested, nested_se) = stats::mean_se(&inner);
    let joint = (direct.stderr.powi(2) + nested_se.powi(2)).sqrt();
    Ok(IdentityCheck::new(
        "semigroup_law",
        direct.value,
        nested,
        (direct.value - nested, joint),
        3.0,
    ))
}

/// `∫|P(t)φ|²dν + ∫₀ᵗ∫‖∇_R P(s)φ‖²_R dν ds = ∫|φ|²dν` for `F = 0`, trapezoid
/// rule on `grid_points` equally spaced times.
pub fn energy_identity_check(
    model: &SpectralModel,
    ensemble: &MeasureEnsemble,
    phi: &TestFunction,
    t: f64,
    grid_points: usize,
) -> Result<IdentityCheck> {
    let m = grid_points.max(2);
    let times: Vec<f64> = (0..m).map(|j| t * j as f64 / (m - 1) as f64).collect();
    let r = model.r();
    let rows = ensemble.try_values(|x| {
        let pt = mehler_oracle(model, t, x, phi)?;
        let mut integral = 0.0;
        let mut prev = None;
        for (j, &s) in times.iter().enumerate() {
            let g = mehler_gradient(model, s, x, phi)?;
            let v: f64 = g.0.iter().zip(r).map(|(gk, rk)| (rk * gk).powi(2)).sum();
            if let Some(p) = prev {
                integral += 0.5 * (times[j] - times[j - 1]) * (p + v);
            }
            prev = Some(v);
        }
        let f = phi.value(model, x);
        Ok(pt * pt + integral - f * f)
    })?;
    let sq = ensemble.values(|x| phi.value(model, x).powi(2));
    let rhs = stats::mean(&sq);
    Ok(IdentityCheck::new(
        "energy_identity",
        rhs + stats::mean(&rows),
        rhs,
        ensemble.mean_se(&rows),
        5.0,
    ))
}

/// `∫ψ𝒩₀ψ dν = −½∫‖∇_Rψ‖²_R dν`.
pub fn generator_identity_check(
    model: &SpectralModel,
    spec: &DriftSpec,
    ensemble: &MeasureEnsemble,
    psi: &TestFunction,
) -> Result<IdentityCheck> {
    let lhs =
        ensemble.try_values(|x| Ok(psi.value(model, x) * apply_generator(model, spec, psi, x)?))?;
    let rhs = ensemble.try_values(|x| Ok(-0.5 * psi.grad_r_norm_sq(model, x)?))?;
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    Ok(IdentityCheck::new(
        "generator_identity",
        stats::mean(&lhs),
        stats::mean(&rhs),
        ensemble.mean_se(&diff),
        3.0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Basis;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ou() -> SpectralModel {
        SpectralModel::diagonal(vec![-1.0], vec![1.0], Basis::Dirichlet).unwrap()
    }

    #[test]
    fn constant_has_zero_stderr() {
        let m = ou();
        let e = estimate_semigroup(
            &m,
            &DriftSpec::zero(-1.0),
            0.01,
            1.0,
            &StateVector::zeros(1),
            &TestFunction::constant(3.0),
            100,
            0,
        )
        .unwrap();
        assert_eq!(e.value, 3.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn second_moment_matches_mehler() {
        let m = ou();
        let phi = TestFunction::Monomial {
            a: vec![1.0],
            power: 2,
        };
        let e = estimate_semigroup(
            &m,
            &DriftSpec::zero(-1.0),
            0.01,
            1.0,
            &StateVector::zeros(1),
            &phi,
            100_000,
            3,
        )
        .unwrap();
        let exact = 0.5 * (1.0 - (-2f64).exp());
        assert_relative_eq!(
            mehler_oracle(&m, 1.0, &StateVector::zeros(1), &phi).unwrap(),
            exact,
            max_relative = 1e-12
        );
        assert!((e.value - exact).abs() <= 3.0 * e.stderr);
    }

    #[test]
    fn time_zero_is_identity() {
        let m = ou();
        let phi = TestFunction::tanh_coordinate(1, 0, 1.0, 0.0);
        let x = StateVector(vec![0.7]);
        let e =
            estimate_semigroup(&m, &DriftSpec::cubic(-1.0), 0.01, 0.0, &x, &phi, 10, 0).unwrap();
        assert_eq!(e.value, 0.7f64.tanh());
    }

    #[test]
    fn mehler_mgf_and_limits() {
        let m = ou();
        let (theta, t, x1) = (0.8, 0.4, 0.3);
        let phi = TestFunction::exp_quadratic_coordinate(1, 0, theta, 0.0);
        let q = 0.5 * (1.0 - (-2.0 * t as f64).exp());
        let exact = (theta * (-t as f64).exp() * x1 + 0.5 * theta * theta * q).exp();
        assert_relative_eq!(
            mehler_oracle(&m, t, &StateVector(vec![x1]), &phi).unwrap(),
            exact,
            max_relative = 1e-12
        );
        let sq = TestFunction::Monomial {
            a: vec![1.0],
            power: 2,
        };
        assert_relative_eq!(
            mehler_oracle(&m, 60.0, &StateVector(vec![1.0]), &sq).unwrap(),
            0.5,
            max_relative = 1e-12
        );
        let th = TestFunction::tanh_coordinate(1, 0, 1.0, 0.0);
        assert!(
            mehler_oracle(&m, 1.0, &StateVector(vec![0.0]), &th)
                .unwrap()
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn exp_quadratic_closed_form_matches_quadrature() {
        let gh = GaussHermite::standard();
        for (theta, kappa, mean, var) in [
            (0.5, -0.25, 0.3, 0.5),
            (1.0, 0.2, -0.4, 0.7),
            (0.0, -1.0, 1.0, 2.0),
        ] {
            let exact = gaussian_exp_quadratic_log_mean(theta, kappa, mean, var).exp();
            let quad = gh.expect(mean, f64::sqrt(var), |s| (theta * s + kappa * s * s).exp());
            assert_relative_eq!(exact, quad, max_relative = 1e-9);
        }
        assert!(gaussian_exp_quadratic_log_mean(0.0, 1.0, 0.0, 0.5).is_infinite());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = SpectralModel::dirichlet_laplacian(3, 0.5).unwrap();
        let x = StateVector(vec![0.3, -0.2, 0.1]);
        let fns = vec![
            TestFunction::Linear {
                a: vec![1.0, 2.0, 0.0],
                offset: 1.0,
            },
            TestFunction::CylindricalTanh {
                dirs: vec![vec![1.0, 0.0, 0.5], vec![0.0, 1.0, 0.0]],
                weights: vec![0.5, 2.0],
                offset: 0.1,
            },
            TestFunction::ExpQuadratic {
                a: vec![1.0, 1.0, 0.0],
                theta: 0.5,
                kappa: -0.25,
            },
            TestFunction::Monomial {
                a: vec![1.0, 0.0, 0.0],
                power: 3,
            },
            TestFunction::SoftAbsTanh {
                a: vec![0.0, 1.0, 0.0],
                floor: 1.0,
            },
            TestFunction::RNormSquared,
            TestFunction::RNormCap {
                offset: 0.5,
                weight: 2.0,
                scale: 2.0,
            },
            TestFunction::ExpRNormSquared { lambda: 0.01 },
        ];
        struct Numeric<'a>(&'a TestFunction);
        impl Observable for Numeric<'_> {
            fn value(&self, m: &SpectralModel, x: &StateVector) -> f64 {
                self.0.value(m, x)
            }
            fn label(&self) -> String {
                String::new()
            }
        }
        for f in &fns {
            let a = f.gradient(&m, &x).unwrap();
            let b = Numeric(f).gradient(&m, &x).unwrap();
            assert!(
                (&a - &b).h_norm() <= 1e-6 * (1.0 + a.h_norm()),
                "{}",
                f.label()
            );
        }
    }

    #[test]
    fn trace_hessian_matches_finite_differences() {
        let m = SpectralModel::dirichlet_laplacian(2, 0.5).unwrap();
        let x = StateVector(vec![0.3, -0.2]);
        let fns = vec![
            TestFunction::CylindricalTanh {
                dirs: vec![vec![1.0, 0.5]],
                weights: vec![1.5],
                offset: 0.0,
            },
            TestFunction::ExpQuadratic {
                a: vec![1.0, 0.0],
                theta: 0.5,
                kappa: -0.25,
            },
            TestFunction::SoftAbsTanh {
                a: vec![1.0, 1.0],
                floor: 1.0,
            },
            TestFunction::RNormCap {
                offset: 0.5,
                weight: 2.0,
                scale: 2.0,
            },
            TestFunction::ExpRNormSquared { lambda: 0.01 },
        ];
        let e = 1e-4;
        for f in &fns {
            let mut tr = 0.0;
            for k in 0..2 {
                let mut xp = x.clone();
                xp[k] += e;
                let mut xm = x.clone();
                xm[k] -= e;
                let d2 = (f.value(&m, &xp) - 2.0 * f.value(&m, &x) + f.value(&m, &xm)) / (e * e);
                tr += m.r()[k].powi(2) * d2;
            }
            let a = f.trace_r_hessian(&m, &x).unwrap();
            assert!(
                (a - tr).abs() <= 1e-5 * (1.0 + a.abs()),
                "{}: {a} vs {tr}",
                f.label()
            );
        }
    }

    #[test]
    fn generator_of_square() {
        let m = ou();
        let phi = TestFunction::Monomial {
            a: vec![1.0],
            power: 2,
        };
        let x = StateVector(vec![0.7]);
        let v = apply_generator(&m, &DriftSpec::zero(-1.0), &phi, &x).unwrap();
        assert_relative_eq!(v, 1.0 - 2.0 * 0.49, max_relative = 1e-14);
    }

    #[test]
    fn generator_matches_time_derivative() {
        let m = ou();
        let spec = DriftSpec::zero(-1.0);
        let phi = TestFunction::tanh_coordinate(1, 0, 1.0, 0.0);
        let x = StateVector(vec![0.5]);
        let dt = 1e-3;
        let quotient = (mehler_oracle(&m, dt, &x, &phi).unwrap() - phi.value(&m, &x)) / dt;
        let g = apply_generator(&m, &spec, &phi, &x).unwrap();
        assert!((quotient - g).abs() < 1e-2, "{quotient} vs {g}");
    }

    #[test]
    fn gradient_of_linear_functional_is_exact() {
        let m = SpectralModel::dirichlet_laplacian(3, 0.0).unwrap();
        let spec = DriftSpec::zero(-PI * PI);
        let phi = TestFunction::coordinate(3, 0, 0.0);
        let t = 0.05;
        let g =
            estimate_gradient_semigroup(&m, &spec, 1e-3, t, &StateVector::zeros(3), &phi, 10, 1)
                .unwrap();
        assert_relative_eq!(g.gradient_h[0], (-PI * PI * t).exp(), max_relative = 1e-12);
        assert_eq!(g.gradient_h[1], 0.0);
        let c = estimate_gradient_semigroup(
            &m,
            &spec,
            1e-3,
            t,
            &StateVector::zeros(3),
            &TestFunction::constant(1.0),
            10,
            1,
        )
        .unwrap();
        assert!(c.gradient_h.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mehler_gradient_matches_difference_of_oracle() {
        let m = SpectralModel::dirichlet_laplacian(2, 0.0).unwrap();
        let phi = TestFunction::ExpQuadratic {
            a: vec![1.0, 0.5],
            theta: 0.4,
            kappa: -0.3,
        };
        let x = StateVector(vec![0.2, -0.1]);
        let g = mehler_gradient(&m, 0.03, &x, &phi).unwrap();
        for k in 0..2 {
            let e = 1e-6;
            let mut xp = x.clone();
            xp[k] += e;
            let mut xm = x.clone();
            xm[k] -= e;
            let fd = (mehler_oracle(&m, 0.03, &xp, &phi).unwrap()
                - mehler_oracle(&m, 0.03, &xm, &phi).unwrap())
                / (2.0 * e);
            assert!((fd - g[k]).abs() < 1e-8, "{fd} vs {}", g[k]);
        }
    }

    #[test]
    fn gibbs_without_potential_recovers_reference() {
        let m = SpectralModel::dirichlet_laplacian(3, 0.0).unwrap();
        let ens = gibbs_oracle_sample(&m, &[0.0], 4000, UlaSettings::default(), 5).unwrap();
        for (k, mm) in ens.mode_moments().iter().enumerate() {
            let target = 1.0 / (2.0 * m.eigenvalues()[k].abs());
            assert!(
                (mm.var - target).abs() <= 4.0 * mm.var_se,
                "mode {k}: {} vs {target}",
                mm.var
            );
        }
    }

    #[test]
    fn gaussian_oracle_variances() {
        let m = SpectralModel::dirichlet_laplacian(4, 0.5).unwrap();
        let ens = gaussian_oracle_ensemble(&m, 50_000, 2);
        for (k, mm) in ens.mode_moments().iter().enumerate() {
            let target = m.r()[k].powi(2) / (2.0 * m.eigenvalues()[k].abs());
            assert!((mm.var - target).abs() <= 4.0 * mm.var_se);
            assert!(mm.mean.abs() <= 4.0 * mm.mean_se);
        }
    }

    #[test]
    fn ergodic_chain_matches_stationary_law() {
        let m = SpectralModel::dirichlet_laplacian(2, 0.0).unwrap();
        let spec = DriftSpec::zero(-PI * PI);
        let (burn, thin) = default_chain_times(&m, &spec).unwrap();
        let ens = sample_invariant(&m, &spec, 1e-3, burn, 3000, thin, 8).unwrap();
        for (k, mm) in ens.mode_moments().iter().enumerate() {
            let target = 1.0 / (2.0 * m.eigenvalues()[k].abs());
            assert!((mm.var - target).abs() <= 4.0 * mm.var_se, "mode {k}");
        }
    }

    #[test]
    fn non_dissipative_scenario_is_rejected() {
        let m = SpectralModel::diagonal(vec![-1.0], vec![1.0], Basis::Dirichlet).unwrap();
        let spec = DriftSpec::radial(crate::drift::PowerProfile::new(1.0, 1.0), 2.0, -1.0).unwrap();
        assert!(matches!(
            sample_invariant(&m, &spec, 1e-2, 1.0, 10, 0.1, 0),
            Err(SimError::NotDissipative { .. })
        ));
    }

    #[test]
    fn ensemble_csv_header() {
        let m = SpectralModel::dirichlet_laplacian(2, 0.0).unwrap();
        let ens = gaussian_oracle_ensemble(&m, 3, 0);
        let mut buf = Vec::new();
        ens.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("index,coeff_1,coeff_2\n"));
    }
}
