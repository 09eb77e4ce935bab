//! Drift catalog `F`, Yosida approximants and empirical dissipativity probes.

use crate::error::{Result, SimError};
use crate::rng::rng_for;
use crate::spectral::{SpectralModel, StateVector};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// `s ↦ c·s^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub c: f64,
    pub p: f64,
}

impl PowerProfile {
    pub fn new(c: f64, p: f64) -> Self {
        Self { c, p }
    }

    /// Parses `"power:<c>:<p>"`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["power", c, p] => {
                let c = c
                    .parse::<f64>()
                    .map_err(|e| SimError::InvalidArgument(format!("{s}: {e}")))?;
                let p = p
                    .parse::<f64>()
                    .map_err(|e| SimError::InvalidArgument(format!("{s}: {e}")))?;
                Ok(Self { c, p })
            }
            _ => Err(SimError::InvalidArgument(format!(
                "expected power:<c>:<p>, got {s:?}"
            ))),
        }
    }

    pub fn to_config_string(&self) -> String {
        format!("power:{}:{}", self.c, self.p)
    }

    pub fn value(&self, s: f64) -> f64 {
        self.c * s.powf(self.p)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        if self.p == 1.0 {
            self.c
        } else {
            self.c * self.p * s.powf(self.p - 1.0)
        }
    }

    pub fn second_derivative(&self, s: f64) -> f64 {
        if self.p == 1.0 {
            0.0
        } else {
            self.c * self.p * (self.p - 1.0) * s.powf(self.p - 2.0)
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        (y / self.c).powf(1.0 / self.p)
    }
}

/// Super-dissipativity pair `(a, φ)` with `φ(s) = c·s^p`, `p > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperDissipativity {
    pub a: f64,
    pub phi: PowerProfile,
}

impl SuperDissipativity {
    pub fn new(a: f64, phi: PowerProfile) -> Result<Self> {
        if !(a > 0.0) {
            return Err(SimError::InvalidArgument(format!(
                "super-dissipativity needs a > 0, got {a}"
            )));
        }
        // Strictly increasing, φ(0) = 0, 1/φ integrable at ∞ but not at 0.
        if !(phi.c > 0.0 && phi.p > 1.0) {
            return Err(SimError::InvalidArgument(format!(
                "phi = {} must have c > 0 and p > 1",
                phi.to_config_string()
            )));
        }
        Ok(Self { a, phi })
    }

    pub fn phi(&self, s: f64) -> f64 {
        self.phi.value(s)
    }

    pub fn phi_inverse(&self, y: f64) -> f64 {
        self.phi.inverse(y)
    }

    /// `ψ(s) = ∫_s^∞ dr/φ(r) = s^{1−p} / (c(p−1))`.
    pub fn psi(&self, s: f64) -> f64 {
        s.powf(1.0 - self.phi.p) / (self.phi.c * (self.phi.p - 1.0))
    }

    pub fn psi_inverse(&self, tau: f64) -> f64 {
        (1.0 / (self.phi.c * (self.phi.p - 1.0) * tau)).powf(1.0 / (self.phi.p - 1.0))
    }

    /// Pathwise bound on `‖X(t,x) − X(t,y)‖²_R`: `2φ^{−1}(2a) + ψ^{−1}(t/4)`.
    pub fn coupling_bound(&self, t: f64) -> f64 {
        2.0 * self.phi_inverse(2.0 * self.a) + self.psi_inverse(t / 4.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DriftKind {
    Zero,
    /// `F(x)(ξ) = −b(x(ξ))`, `b(z) = Σ_i C_i z^i`.
    Nemytskii {
        b_coeffs: Vec<f64>,
    },
    /// `F(x) = −2 f′(‖x‖²_H) x` for an increasing profile `f`.
    Radial {
        f: PowerProfile,
    },
    /// `F(x) = ζ_F x − Σ_{r<rank} κ_r ⟨e_r, x⟩³ e_r` (separable kernel with `c_r = −κ_r a_r`).
    Kernel {
        rank: usize,
        kappa: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub zeta_f: f64,
    pub zeta_r: f64,
    pub super_dissipativity: Option<SuperDissipativity>,
}

impl DriftSpec {
    pub fn zero(zeta_r: f64) -> Self {
        Self {
            kind: DriftKind::Zero,
            zeta_f: 0.0,
            zeta_r,
            super_dissipativity: None,
        }
    }

    pub fn nemytskii(b_coeffs: Vec<f64>, zeta_f: f64, zeta_r: f64) -> Result<Self> {
        let lead = b_coeffs.iter().rposition(|c| *c != 0.0);
        match lead {
            None => {}
            Some(d) if d % 2 == 1 && b_coeffs[d] > 0.0 => {}
            Some(d) => {
                return Err(SimError::InvalidArgument(format!(
                    "leading coefficient C_{d} = {} must have odd degree and be positive",
                    b_coeffs[d]
                )))
            }
        }
        Ok(Self {
            kind: DriftKind::Nemytskii { b_coeffs },
            zeta_f,
            zeta_r,
            super_dissipativity: None,
        })
    }

    /// `b(z) = z³`.
    pub fn cubic(zeta_r: f64) -> Self {
        Self::nemytskii(vec![0.0, 0.0, 0.0, 1.0], 0.0, zeta_r).expect("valid cubic")
    }

    pub fn radial(f: PowerProfile, zeta_f: f64, zeta_r: f64) -> Result<Self> {
        if !(f.c >= 0.0 && f.p >= 1.0) {
            return Err(SimError::InvalidArgument(
                "radial profile must be increasing and differentiable on [0, ∞) (c >= 0, p >= 1)"
                    .into(),
            ));
        }
        Ok(Self {
            kind: DriftKind::Radial { f },
            zeta_f,
            zeta_r,
            super_dissipativity: None,
        })
    }

    pub fn kernel(rank: usize, kappa: Vec<f64>, zeta_f: f64, zeta_r: f64) -> Result<Self> {
        if rank == 0 || rank > 4 || kappa.len() != rank {
            return Err(SimError::InvalidArgument(
                "kernel rank must be 1..=4 with one kappa per term".into(),
            ));
        }
        if kappa.iter().any(|k| *k < 0.0) {
            return Err(SimError::InvalidArgument(
                "kernel kappa must be nonnegative".into(),
            ));
        }
        Ok(Self {
            kind: DriftKind::Kernel { rank, kappa },
            zeta_f,
            zeta_r,
            super_dissipativity: None,
        })
    }

    pub fn with_super(mut self, s: SuperDissipativity) -> Self {
        self.super_dissipativity = Some(s);
        self
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, DriftKind::Zero)
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            DriftKind::Zero => "zero",
            DriftKind::Nemytskii { .. } => "nemytskii",
            DriftKind::Radial { .. } => "radial",
            DriftKind::Kernel { .. } => "kernel",
        }
    }

    /// `F(x)`.
    pub fn apply(&self, model: &SpectralModel, x: &StateVector) -> Result<StateVector> {
        match &self.kind {
            DriftKind::Zero => Ok(StateVector::zeros(x.len())),
            DriftKind::Nemytskii { b_coeffs } => {
                let mut u = model.to_grid(x);
                for v in &mut u {
                    let b = poly_eval(b_coeffs, *v);
                    if !b.is_finite() {
                        return Err(SimError::DriftOverflow { value: *v });
                    }
                    *v = -b;
                }
                Ok(model.from_grid(&u))
            }
            DriftKind::Radial { f } => {
                let s = x.dot(x);
                Ok(x.scaled(-2.0 * f.derivative(s)))
            }
            DriftKind::Kernel { rank, kappa } => {
                let mut out = x.scaled(self.zeta_f);
                for r in 0..(*rank).min(x.len()) {
                    out[r] -= kappa[r] * x[r].powi(3);
                }
                Ok(out)
            }
        }
    }

    /// Analytic `DF(x) h`.
    pub fn jacobian_apply(
        &self,
        model: &SpectralModel,
        x: &StateVector,
        h: &StateVector,
    ) -> StateVector {
        match &self.kind {
            DriftKind::Zero => StateVector::zeros(x.len()),
            DriftKind::Nemytskii { b_coeffs } => {
                let u = model.to_grid(x);
                let mut hv = model.to_grid(h);
                for (hj, uj) in hv.iter_mut().zip(&u) {
                    *hj *= -poly_derivative(b_coeffs, *uj);
                }
                model.from_grid(&hv)
            }
            DriftKind::Radial { f } => {
                let s = x.dot(x);
                let mut out = h.scaled(-2.0 * f.derivative(s));
                out.axpy(-4.0 * f.second_derivative(s) * x.dot(h), x);
                out
            }
            DriftKind::Kernel { rank, kappa } => {
                let mut out = h.scaled(self.zeta_f);
                for r in 0..(*rank).min(x.len()) {
                    out[r] -= 3.0 * kappa[r] * x[r] * x[r] * h[r];
                }
                out
            }
        }
    }

    /// Upper estimate of `‖DF(x)‖` used to pick explicit step sizes.
    pub fn local_stiffness(&self, model: &SpectralModel, x: &StateVector) -> f64 {
        match &self.kind {
            DriftKind::Zero => 0.0,
            DriftKind::Nemytskii { b_coeffs } => model
                .to_grid(x)
                .iter()
                .map(|u| poly_derivative(b_coeffs, *u).abs())
                .fold(0.0, f64::max),
            DriftKind::Radial { f } => {
                let s = x.dot(x);
                2.0 * f.derivative(s).abs() + 4.0 * s * f.second_derivative(s).abs()
            }
            DriftKind::Kernel { rank, kappa } => {
                let cubic = (0..(*rank).min(x.len()))
                    .map(|r| 3.0 * kappa[r] * x[r] * x[r])
                    .fold(0.0, f64::max);
                cubic + self.zeta_f.abs()
            }
        }
    }

    /// `min(dt, 0.5/‖DF(x)‖)`.
    pub fn stable_step(&self, model: &SpectralModel, x: &StateVector, dt: f64) -> f64 {
        let s = self.local_stiffness(model, x);
        if s > 0.0 {
            dt.min(0.5 / s)
        } else {
            dt
        }
    }

    /// Forward-difference `DF(x) h` with step `1e−6·‖h‖` along `h`.
    pub fn jacobian_apply_fd(
        &self,
        model: &SpectralModel,
        x: &StateVector,
        h: &StateVector,
    ) -> Result<StateVector> {
        let eps = 1e-6;
        let mut xp = x.clone();
        xp.axpy(eps, h);
        let f1 = self.apply(model, &xp)?;
        let f0 = self.apply(model, x)?;
        Ok((&f1 - &f0).scaled(1.0 / eps))
    }

    /// Potential `U` with `∇U = −F` in the truncation, when it exists.
    ///
    /// Nemytskii: `U(x) = w Σ_j B(u_j)` with `B' = b`, `B(0) = 0`.
    /// Radial: `U(x) = f(‖x‖²)`. Kernel: `Σ κ_r x_r⁴/4 − ζ_F ‖x‖²/2`.
    pub fn potential(&self, model: &SpectralModel, x: &StateVector) -> f64 {
        match &self.kind {
            DriftKind::Zero => 0.0,
            DriftKind::Nemytskii { b_coeffs } => {
                let w = model.grid_weight();
                model
                    .to_grid(x)
                    .iter()
                    .map(|u| w * poly_primitive(b_coeffs, *u))
                    .sum()
            }
            DriftKind::Radial { f } => f.value(x.dot(x)),
            DriftKind::Kernel { rank, kappa } => {
                let quartic: f64 = (0..(*rank).min(x.len()))
                    .map(|r| kappa[r] * x[r].powi(4) / 4.0)
                    .sum();
                quartic - 0.5 * self.zeta_f * x.dot(x)
            }
        }
    }

    fn check_delta(&self, delta: f64) -> Result<()> {
        let upper = if self.zeta_f < 0.0 {
            1.0 / self.zeta_f.abs()
        } else {
            f64::INFINITY
        };
        if !(delta > 0.0 && delta < upper) {
            return Err(SimError::DeltaOutOfRange { delta, upper });
        }
        Ok(())
    }

    /// `J_δ(x)`: the solution `y` of `y − δ(F(y) − ζ_F y) = x`.
    pub fn yosida_resolvent(
        &self,
        model: &SpectralModel,
        delta: f64,
        x: &StateVector,
    ) -> Result<StateVector> {
        self.check_delta(delta)?;
        let shift = 1.0 + delta * self.zeta_f;
        match &self.kind {
            DriftKind::Zero => Ok(x.scaled(1.0 / shift)),
            DriftKind::Radial { f } => {
                let norm = x.h_norm();
                if norm == 0.0 {
                    return Ok(x.clone());
                }
                // ρ (1 + δζ_F + 2δ f′(ρ²)) = ‖x‖
                let g = |rho: f64| rho * (shift + 2.0 * delta * f.derivative(rho * rho)) - norm;
                let dg = |rho: f64| {
                    shift
                        + 2.0 * delta * f.derivative(rho * rho)
                        + 4.0 * delta * rho * rho * f.second_derivative(rho * rho)
                };
                let rho = safeguarded_newton(g, dg, 0.0, norm / shift, norm)?;
                Ok(x.scaled(rho / norm))
            }
            DriftKind::Kernel { rank, kappa } => {
                // Decoupled: y_r (1 + δζ_F − δζ_F) ... F − ζ_F Id = −Σ κ_r y_r³ e_r.
                let mut y = x.clone();
                for r in 0..(*rank).min(x.len()) {
                    let (k, target) = (kappa[r], x[r]);
                    y[r] = solve_scalar_monotone(
                        |v| v + delta * k * v.powi(3),
                        |v| 1.0 + 3.0 * delta * k * v * v,
                        target,
                    )?;
                }
                Ok(y)
            }
            DriftKind::Nemytskii { b_coeffs } => {
                let zf = self.zeta_f;
                let u = model.to_grid(x);
                let mut yg = Vec::with_capacity(u.len());
                for &uj in &u {
                    yg.push(solve_scalar_resolvent(b_coeffs, zf, delta, uj)?);
                }
                let mut y = model.from_grid(&yg);
                self.polish_nemytskii(model, b_coeffs, delta, x, &mut y)?;
                Ok(y)
            }
        }
    }

    /// Newton on the projected equation `y + δ(P b(Ty) + ζ_F y) = x`.
    fn polish_nemytskii(
        &self,
        model: &SpectralModel,
        b_coeffs: &[f64],
        delta: f64,
        x: &StateVector,
        y: &mut StateVector,
    ) -> Result<()> {
        let n = x.len();
        let residual = |y: &StateVector| -> Result<StateVector> {
            let fy = self.apply(model, y)?;
            let mut r = y.clone();
            r.axpy(-delta, &fy);
            r.axpy(delta * self.zeta_f, y);
            Ok(&r - x)
        };
        let tol = 1e-12 * x.h_norm().max(1.0);
        let mut res = residual(y)?;
        let mut rn = res.h_norm();
        let max_iter = 100;
        for _ in 0..max_iter {
            if rn <= tol {
                return Ok(());
            }
            let ug = model.to_grid(y);
            let mut jac = DMatrix::<f64>::identity(n, n) * (1.0 + delta * self.zeta_f);
            for k in 0..n {
                let mut col = model.to_grid(&StateVector::basis(n, k));
                for (c, uj) in col.iter_mut().zip(&ug) {
                    *c *= poly_derivative(b_coeffs, *uj);
                }
                let pc = model.from_grid(&col);
                for i in 0..n {
                    jac[(i, k)] += delta * pc[i];
                }
            }
            let rhs = DVector::from_column_slice(res.coeffs());
            let step = jac.lu().solve(&rhs).ok_or(SimError::NewtonFailed {
                iterations: 0,
                value: rn,
            })?;
            let mut lambda = 1.0;
            loop {
                let mut trial = y.clone();
                for i in 0..n {
                    trial[i] -= lambda * step[i];
                }
                let tres = residual(&trial)?;
                let tn = tres.h_norm();
                if tn < rn || lambda < 1e-8 {
                    *y = trial;
                    res = tres;
                    rn = tn;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if rn <= 1e-10 {
            Ok(())
        } else {
            Err(SimError::NewtonFailed {
                iterations: max_iter,
                value: rn,
            })
        }
    }

    /// `F_δ(x) = F(J_δ(x))`.
    pub fn yosida_drift(
        &self,
        model: &SpectralModel,
        delta: f64,
        x: &StateVector,
    ) -> Result<StateVector> {
        let j = self.yosida_resolvent(model, delta, x)?;
        self.apply(model, &j)
    }

    /// Residual `‖y − δ(F(y) − ζ_F y) − x‖_H`.
    pub fn yosida_residual(
        &self,
        model: &SpectralModel,
        delta: f64,
        x: &StateVector,
        y: &StateVector,
    ) -> Result<f64> {
        let fy = self.apply(model, y)?;
        let mut r = y.clone();
        r.axpy(-delta, &fy);
        r.axpy(delta * self.zeta_f, y);
        Ok((&r - x).h_norm())
    }
}

pub fn poly_eval(c: &[f64], z: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ci| acc * z + ci)
}

pub fn poly_derivative(c: &[f64], z: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, ci)| acc * z + i as f64 * ci)
}

/// Primitive `B` of `b` with `B(0) = 0`.
pub fn poly_primitive(c: &[f64], z: f64) -> f64 {
    c.iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (i, ci)| acc * z + ci / (i + 1) as f64)
        * z
}

/// Scalar resolvent: solves `y + δ(b(y) + ζ_F y) = u`.
pub fn solve_scalar_resolvent(b_coeffs: &[f64], zeta_f: f64, delta: f64, u: f64) -> Result<f64> {
    solve_scalar_monotone(
        |y| y + delta * (poly_eval(b_coeffs, y) + zeta_f * y),
        |y| 1.0 + delta * (poly_derivative(b_coeffs, y) + zeta_f),
        u,
    )
}

/// Solves `g(y) = target` for strictly increasing `g` by bracketed Newton.
fn solve_scalar_monotone<G, D>(g: G, dg: D, target: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let h = |y: f64| g(y) - target;
    let mut lo = target;
    let mut hi = target;
    let mut width = 1.0f64.max(target.abs());
    let mut expand = 0;
    while h(lo) > 0.0 {
        lo -= width;
        width *= 2.0;
        expand += 1;
        if expand > 200 {
            return Err(SimError::NewtonFailed {
                iterations: expand,
                value: target,
            });
        }
    }
    width = 1.0f64.max(target.abs());
    while h(hi) < 0.0 {
        hi += width;
        width *= 2.0;
        expand += 1;
        if expand > 400 {
            return Err(SimError::NewtonFailed {
                iterations: expand,
                value: target,
            });
        }
    }
    safeguarded_newton(h, dg, lo, hi, target)
}

/// Newton iteration kept inside the bracket `[lo, hi]` (bisection fallback).
fn safeguarded_newton<G, D>(g: G, dg: D, mut lo: f64, mut hi: f64, value: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let scale = 1.0f64.max(value.abs());
    let mut y = 0.5 * (lo + hi);
    let max_iter = 200;
    for _ in 0..max_iter {
        let gy = g(y);
        if gy.abs() <= 1e-15 * scale {
            return Ok(y);
        }
        if gy > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let d = dg(y);
        let mut next = if d > 0.0 { y - gy / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 1e-16 * scale || hi - lo <= 1e-16 * scale {
            return Ok(next);
        }
        y = next;
    }
    Err(SimError::NewtonFailed {
        iterations: max_iter,
        value,
    })
}

/// Result of [`probe_dissipativity`]. Both values are empirical lower bounds
/// on the true suprema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DissipativityProbe {
    pub zeta_f_hat: f64,
    pub zeta_r_hat: f64,
    pub pairs: usize,
    pub lower_bound_only: bool,
}

fn random_state<R: Rng>(rng: &mut R, n: usize, radius: f64) -> StateVector {
    let g: Vec<f64> = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let scale = radius * rng.random::<f64>().powf(1.0 / n as f64) / norm;
    StateVector(g.into_iter().map(|v| v * scale).collect())
}

/// Sampled maxima of `⟨F(x)−F(y), x−y⟩_H/‖x−y‖²_H` and
/// `⟨(A + DF(x))h, h⟩_R/‖h‖²_R` (forward-difference `DF`).
///
/// Basis directions are always included among the `h`.
pub fn probe_dissipativity(
    spec: &DriftSpec,
    model: &SpectralModel,
    sample_count: usize,
    radius: f64,
    seed: u64,
) -> Result<DissipativityProbe> {
    if sample_count < 2 {
        return Err(SimError::InvalidArgument(
            "sample_count must be >= 2".into(),
        ));
    }
    let n = model.n();
    let mut rng = rng_for(seed, 0);
    let mut zeta_f_hat = f64::NEG_INFINITY;
    let mut zeta_r_hat = f64::NEG_INFINITY;
    for i in 0..sample_count {
        let x = random_state(&mut rng, n, radius);
        // Alternate far and near pairs.
        let sep = if i % 2 == 0 { radius } else { 1e-3 * radius };
        let d = random_state(&mut rng, n, sep);
        if d.h_norm() > 0.0 {
            let y = &x + &d;
            let fx = spec.apply(model, &x)?;
            let fy = spec.apply(model, &y)?;
            let q = (&fx - &fy).dot(&(&x - &y)) / d.dot(&d);
            zeta_f_hat = zeta_f_hat.max(q);
        }
        let h = if i < n {
            StateVector::basis(n, i)
        } else {
            random_state(&mut rng, n, 1.0)
        };
        let hr2 = model.r_inner(&h, &h);
        if hr2 > 0.0 {
            let mut ah = h.clone();
            for (v, l) in ah.0.iter_mut().zip(model.eigenvalues()) {
                *v *= l;
            }
            let dfh = spec.jacobian_apply_fd(model, &x, &h)?;
            ah.axpy(1.0, &dfh);
            zeta_r_hat = zeta_r_hat.max(model.r_inner(&ah, &h) / hr2);
        }
    }
    Ok(DissipativityProbe {
        zeta_f_hat,
        zeta_r_hat,
        pairs: sample_count,
        lower_bound_only: true,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuperProbeRow {
    pub separation_r: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuperDissipativityProbe {
    /// `None` when the scenario declares no `(a, φ)`.
    pub worst_margin: Option<f64>,
    pub rows: Vec<SuperProbeRow>,
    pub note: String,
}

/// Evaluates `⟨F(x)−F(y), x−y⟩_R ≤ a − φ(‖x−y‖²_R)` on sampled pairs whose
/// `R`-separation runs geometrically from `1e−2` up to `1e2`.
pub fn probe_super_dissipativity(
    spec: &DriftSpec,
    model: &SpectralModel,
    sample_count: usize,
    seed: u64,
) -> Result<SuperDissipativityProbe> {
    let Some(sd) = spec.super_dissipativity else {
        let note = if spec.is_zero() {
            "super-dissipativity absent: F = 0 would need a bounded phi".to_string()
        } else {
            "super-dissipativity absent: no (a, phi) declared".to_string()
        };
        return Ok(SuperDissipativityProbe {
            worst_margin: None,
            rows: vec![],
            note,
        });
    };
    let n = model.n();
    let mut rng = rng_for(seed, 1);
    let mut rows = Vec::with_capacity(sample_count);
    let mut worst = f64::INFINITY;
    for i in 0..sample_count {
        let frac = if sample_count > 1 {
            i as f64 / (sample_count - 1) as f64
        } else {
            1.0
        };
        let sep = 10f64.powf(-2.0 + 4.0 * frac);
        let x = random_state(&mut rng, n, 1.0);
        let dir = random_state(&mut rng, n, 1.0);
        let dr = model.r_norm(&dir);
        if dr == 0.0 {
            continue;
        }
        let d = dir.scaled(sep / dr);
        let y = &x + &d;
        let fx = spec.apply(model, &x)?;
        let fy = spec.apply(model, &y)?;
        let lhs = model.r_inner(&(&fx - &fy), &(&x - &y));
        let rhs = sd.a - sd.phi(sep * sep);
        worst = worst.min(rhs - lhs);
        rows.push(SuperProbeRow {
            separation_r: sep,
            lhs,
            rhs,
        });
    }
    Ok(SuperDissipativityProbe {
        worst_margin: Some(worst),
        rows,
        note: format!("a = {}, phi = {}", sd.a, sd.phi.to_config_string()),
    })
}

/// Fits `(a, φ(s) = c·s^p)` by a brute-force scan over scalar pairs.
///
/// For Nemytskii drifts the scalar inequality
/// `−(b(z)−b(w))(z−w) ≤ a − c(z−w)^{2p}` transfers to grid vectors with
/// `R = Id` by Jensen; the radial case uses its one-dimensional reduction.
/// `c` is 90% of the scanned minimum ratio and `a` the scanned excess plus
/// `1e−3`. Callers should validate on vector pairs.
pub fn fit_super_dissipativity(
    spec: &DriftSpec,
    p: f64,
    half_width: f64,
    points: usize,
) -> Result<SuperDissipativity> {
    let scalar_lhs: Box<dyn Fn(f64, f64) -> f64> = match &spec.kind {
        DriftKind::Nemytskii { b_coeffs } => {
            let c = b_coeffs.clone();
            Box::new(move |z, w| -(poly_eval(&c, z) - poly_eval(&c, w)) * (z - w))
        }
        DriftKind::Radial { f } => {
            let f = *f;
            Box::new(move |z, w| {
                -2.0 * (f.derivative(z * z) * z - f.derivative(w * w) * w) * (z - w)
            })
        }
        _ => {
            return Err(SimError::Unsupported {
                op: "fit_super_dissipativity",
                kind: spec.kind_name().into(),
            })
        }
    };
    let grid: Vec<f64> = (0..points)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64)
        .collect();
    // Large separations determine c.
    let mut c_min = f64::INFINITY;
    for &z in &grid {
        for &w in &grid {
            let d2 = (z - w) * (z - w);
            if d2 < (0.25 * half_width).powi(2) {
                continue;
            }
            let ratio = -scalar_lhs(z, w) / d2.powf(p);
            c_min = c_min.min(ratio);
        }
    }
    if !(c_min > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "no positive phi coefficient found (scan minimum {c_min})"
        )));
    }
    let c = 0.9 * c_min;
    let mut excess = 0.0f64;
    for &z in &grid {
        for &w in &grid {
            let d2 = (z - w) * (z - w);
            excess = excess.max(scalar_lhs(z, w) + c * d2.powf(p));
        }
    }
    SuperDissipativity::new(excess + 1e-3, PowerProfile::new(c, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn model(n: usize) -> SpectralModel {
        SpectralModel::dirichlet_laplacian(n, 0.0).unwrap()
    }

    #[test]
    fn zero_drift_is_zero() {
        let m = model(4);
        let x = StateVector(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            DriftSpec::zero(-PI * PI).apply(&m, &x).unwrap(),
            StateVector::zeros(4)
        );
    }

    #[test]
    fn cube_is_pointwise_on_grid() {
        // b(z) = z³ on x = c·e_1: grid values c√2 sin(πξ) map to −(grid value)³.
        let m = model(8).with_grid_size(64).unwrap();
        let spec = DriftSpec::cubic(-PI * PI);
        let x = StateVector::basis(8, 0).scaled(0.7);
        let u = m.to_grid(&x);
        let expected: Vec<f64> = u.iter().map(|v| -v.powi(3)).collect();
        // −b(u) is not in the span; its projection equals the projection of the pointwise cube.
        let got = spec.apply(&m, &x).unwrap();
        let want = m.from_grid(&expected);
        for (a, b) in got.0.iter().zip(&want.0) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn radial_power_two_at_unit_vector() {
        let m = model(3);
        let spec = DriftSpec::radial(PowerProfile::new(1.0, 2.0), 0.0, -PI * PI).unwrap();
        let x = StateVector::basis(3, 0);
        let y = spec.apply(&m, &x).unwrap();
        assert_relative_eq!(y[0], -4.0);
        assert_eq!(y[1], 0.0);
    }

    #[test]
    fn cubic_is_odd() {
        let m = model(6);
        let spec = DriftSpec::cubic(-PI * PI);
        let x = StateVector(vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.05]);
        let a = spec.apply(&m, &x).unwrap();
        let b = spec.apply(&m, &x.scaled(-1.0)).unwrap();
        for (p, q) in a.0.iter().zip(&b.0) {
            assert_eq!(*p, -*q);
        }
    }

    #[test]
    fn overflow_is_reported() {
        let m = model(2);
        let spec =
            DriftSpec::nemytskii(vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0], 0.0, -PI * PI)
                .unwrap();
        let x = StateVector(vec![1e60, 0.0]);
        assert!(matches!(
            spec.apply(&m, &x),
            Err(SimError::DriftOverflow { .. })
        ));
    }

    #[test]
    fn scalar_resolvent_of_cube() {
        let y = solve_scalar_resolvent(&[0.0, 0.0, 0.0, 1.0], 0.0, 1.0, 2.0).unwrap();
        assert_relative_eq!(y, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn resolvent_of_zero_drift_is_identity() {
        let m = model(3);
        let x = StateVector(vec![0.5, -1.0, 2.0]);
        for delta in [0.1, 1.0, 10.0] {
            assert_eq!(
                DriftSpec::zero(-1.0)
                    .yosida_resolvent(&m, delta, &x)
                    .unwrap(),
                x
            );
        }
    }

    #[test]
    fn resolvent_residual_and_convergence() {
        let m = model(8);
        let spec = DriftSpec::cubic(-PI * PI);
        let x = StateVector(vec![1.2, -0.7, 0.4, 0.3, -0.2, 0.1, 0.05, -0.02]);
        let mut last = f64::INFINITY;
        for delta in [0.1, 0.01, 0.001] {
            let y = spec.yosida_resolvent(&m, delta, &x).unwrap();
            assert!(spec.yosida_residual(&m, delta, &x, &y).unwrap() <= 1e-10);
            let d = (&y - &x).h_norm();
            assert!(d < last, "{d} !< {last}");
            last = d;
        }
    }

    #[test]
    fn yosida_drift_converges_to_drift() {
        let m = model(8);
        let spec = DriftSpec::cubic(-PI * PI);
        let x = StateVector(vec![1.0, 0.5, -0.3, 0.2, 0.0, 0.1, 0.0, 0.0]);
        let f = spec.apply(&m, &x).unwrap();
        let mut last = f64::INFINITY;
        for delta in [0.1, 0.01, 0.001] {
            let fd = spec.yosida_drift(&m, delta, &x).unwrap();
            let e = (&fd - &f).h_norm();
            assert!(e < last);
            last = e;
        }
    }

    #[test]
    fn delta_range_enforced() {
        let m = model(2);
        let spec = DriftSpec::radial(PowerProfile::new(1.0, 1.0), -2.0, -PI * PI).unwrap();
        let x = StateVector(vec![1.0, 0.0]);
        assert!(matches!(
            spec.yosida_resolvent(&m, 0.6, &x),
            Err(SimError::DeltaOutOfRange { .. })
        ));
        assert!(spec.yosida_resolvent(&m, 0.4, &x).is_ok());
    }

    #[test]
    fn fd_jacobian_matches_analytic_for_nemytskii() {
        let m = model(8);
        let spec = DriftSpec::nemytskii(vec![0.0, 1.0, 0.5, 1.0], -1.0, -PI * PI).unwrap();
        let x = StateVector(vec![0.4, -0.3, 0.2, 0.1, 0.0, -0.1, 0.05, 0.02]);
        let h = StateVector(vec![0.1, 0.2, -0.3, 0.0, 0.5, 0.0, -0.1, 0.3]);
        let a = spec.jacobian_apply(&m, &x, &h);
        let f = spec.jacobian_apply_fd(&m, &x, &h).unwrap();
        assert!((&a - &f).h_norm() <= 1e-5 * a.h_norm().max(1.0));
    }

    #[test]
    fn probe_zero_drift_returns_first_eigenvalue() {
        let m = model(4);
        let p = probe_dissipativity(&DriftSpec::zero(-PI * PI), &m, 100, 1.0, 3).unwrap();
        assert!(p.zeta_r_hat <= -PI * PI + 1e-8);
        assert!((p.zeta_r_hat + PI * PI).abs() <= 1e-8);
    }

    #[test]
    fn probe_linear_damping() {
        let m = model(8);
        let spec = DriftSpec::nemytskii(vec![0.0, 1.0, 0.0, 1.0], -1.0, -PI * PI).unwrap();
        let p = probe_dissipativity(&spec, &m, 10_000, 2.0, 11).unwrap();
        assert!(p.zeta_f_hat <= -1.0 + 1e-6, "{}", p.zeta_f_hat);
    }

    #[test]
    fn probe_radial_linear() {
        let m = model(5);
        let spec = DriftSpec::radial(PowerProfile::new(1.0, 1.0), -2.0, -PI * PI).unwrap();
        let p = probe_dissipativity(&spec, &m, 2_000, 3.0, 5).unwrap();
        assert!(p.zeta_f_hat <= -2.0 + 1e-6, "{}", p.zeta_f_hat);
    }

    #[test]
    fn resolvent_is_contractive() {
        let m = model(6);
        let spec = DriftSpec::cubic(-PI * PI);
        let mut rng = rng_for(9, 0);
        for _ in 0..50 {
            let x = random_state(&mut rng, 6, 2.0);
            let y = random_state(&mut rng, 6, 2.0);
            let jx = spec.yosida_resolvent(&m, 0.1, &x).unwrap();
            let jy = spec.yosida_resolvent(&m, 0.1, &y).unwrap();
            assert!((&jx - &jy).h_norm() <= (&x - &y).h_norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn super_dissipativity_of_cube() {
        let spec = DriftSpec::cubic(-PI * PI);
        let sd = fit_super_dissipativity(&spec, 2.0, 4.0, 161).unwrap();
        assert!(sd.phi.c > 0.2 && sd.phi.c <= 0.25, "{}", sd.phi.c);
        let spec = spec.with_super(sd);
        let m = model(8);
        let probe = probe_super_dissipativity(&spec, &m, 400, 4).unwrap();
        assert!(
            probe.worst_margin.unwrap() >= 0.0,
            "{:?}",
            probe.worst_margin
        );
        assert!(probe.rows.last().unwrap().separation_r > 99.0);
    }

    #[test]
    fn super_dissipativity_absent_for_zero_drift() {
        let m = model(2);
        let p = probe_super_dissipativity(&DriftSpec::zero(-1.0), &m, 10, 0).unwrap();
        assert!(p.worst_margin.is_none());
        assert!(p.note.contains("absent"));
    }

    #[test]
    fn super_dissipativity_of_radial_square() {
        // f(s) = s²: −2(f′(x²)x − f′(y²)y)(x−y) = −4(x³ − y³)(x − y) in 1-D.
        let spec = DriftSpec::radial(PowerProfile::new(1.0, 2.0), 0.0, -PI * PI).unwrap();
        let sd = fit_super_dissipativity(&spec, 2.0, 4.0, 161).unwrap();
        let spec = spec.with_super(sd);
        let m = model(1);
        let probe = probe_super_dissipativity(&spec, &m, 200, 8).unwrap();
        assert!(probe.worst_margin.unwrap() >= 0.0);
    }

    #[test]
    fn potential_gradient_is_minus_drift() {
        let m = model(6);
        let spec = DriftSpec::nemytskii(vec![0.2, 1.0, 0.0, 1.0], -1.0, -PI * PI).unwrap();
        let x = StateVector(vec![0.3, -0.1, 0.2, 0.05, -0.05, 0.1]);
        let f = spec.apply(&m, &x).unwrap();
        for k in 0..6 {
            let e = 1e-6;
            let mut xp = x.clone();
            xp[k] += e;
            let mut xm = x.clone();
            xm[k] -= e;
            let g = (spec.potential(&m, &xp) - spec.potential(&m, &xm)) / (2.0 * e);
            assert!((g + f[k]).abs() < 1e-8, "{k}: {g} vs {}", -f[k]);
        }
    }

    #[test]
    fn profile_parsing() {
        let p = PowerProfile::parse("power:0.25:2").unwrap();
        assert_eq!(p, PowerProfile::new(0.25, 2.0));
        assert!(PowerProfile::parse("exp:1").is_err());
    }
}
