//! Diagonal (eigenbasis) realization of the linear operators `A` and `R`.
//!
//! States are coefficient vectors in the eigenbasis of `A`. The Banach space
//! `E` is realized as the sup norm of the values on a uniform collocation grid.

use crate::error::{Result, SimError};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

/// Coefficients of a state in the eigenbasis of `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// The `k`-th basis vector (0-based).
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Euclidean norm of the coefficients, i.e. the `H` norm.
    pub fn h_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|v| v * s).collect())
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.0.iter_mut().zip(&x.0) {
            *s += a * v;
        }
    }
}

impl Index<usize> for StateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: &StateVector) -> StateVector {
        StateVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &StateVector {
    type Output = StateVector;
    fn sub(self, rhs: &StateVector) -> StateVector {
        StateVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &StateVector {
    type Output = StateVector;
    fn mul(self, rhs: f64) -> StateVector {
        self.scaled(rhs)
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// `√2 sin(kπξ)` on `[0, 1]`, eigenvalues `−(kπ)²`.
    Dirichlet,
    /// `√2 cos(2πmξ)`, `√2 sin(2πmξ)` alternating, `m = ⌈k/2⌉`, eigenvalues `−(2πm)²`.
    /// The constant mode is excluded.
    Periodic,
}

/// Constants of the bound `‖e^{tA}x‖_R ≤ M e^{−wt} t^{−γ} ‖x‖_H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothing {
    pub m: f64,
    pub w: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub smoothing: Smoothing,
    /// Smallest relative margin `(rhs − lhs)/rhs` over the time grid.
    pub worst_margin: f64,
    pub grid: Vec<f64>,
    /// `max_k e^{λ_k t}/r_k` on the grid.
    pub operator_norms: Vec<f64>,
}

#[derive(Debug, Clone)]
struct CollocationGrid {
    points: Vec<f64>,
    /// Row-major `G × n`: value of mode `k` at point `j`.
    synthesis: Vec<f64>,
    /// Quadrature weight of each grid point.
    weight: f64,
}

impl CollocationGrid {
    fn build(basis: Basis, n: usize, g: usize) -> Self {
        let (points, weight): (Vec<f64>, f64) = match basis {
            Basis::Dirichlet => (
                (1..=g).map(|j| j as f64 / (g + 1) as f64).collect(),
                1.0 / (g + 1) as f64,
            ),
            Basis::Periodic => (
                (0..g).map(|j| j as f64 / g as f64).collect(),
                1.0 / g as f64,
            ),
        };
        let mut synthesis = vec![0.0; g * n];
        for (j, &xi) in points.iter().enumerate() {
            for k in 0..n {
                synthesis[j * n + k] = eigenfunction(basis, k, xi);
            }
        }
        Self {
            points,
            synthesis,
            weight,
        }
    }
}

/// Value of the `k`-th (0-based) eigenfunction at `xi`.
pub fn eigenfunction(basis: Basis, k: usize, xi: f64) -> f64 {
    let s2 = std::f64::consts::SQRT_2;
    match basis {
        Basis::Dirichlet => s2 * ((k + 1) as f64 * PI * xi).sin(),
        Basis::Periodic => {
            let m = (k / 2 + 1) as f64;
            if k % 2 == 0 {
                s2 * (2.0 * PI * m * xi).cos()
            } else {
                s2 * (2.0 * PI * m * xi).sin()
            }
        }
    }
}

/// Truncated diagonal model of `(A, R)` on `n` eigenmodes.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    eigenvalues: Vec<f64>,
    r: Vec<f64>,
    beta: Option<f64>,
    zeta_a: f64,
    smoothing: Smoothing,
    basis: Basis,
    grid: CollocationGrid,
}

pub const DEFAULT_GRID_FACTOR: usize = 2;

impl SpectralModel {
    /// Dirichlet Laplacian on `[0, 1]` with `R = (−A)^{−β}`.
    pub fn dirichlet_laplacian(n: usize, beta: f64) -> Result<Self> {
        Self::laplacian(Basis::Dirichlet, n, beta, DEFAULT_GRID_FACTOR)
    }

    /// Periodic Laplacian (constant mode removed) with `R = (−A)^{−β}`.
    pub fn periodic_laplacian(n: usize, beta: f64) -> Result<Self> {
        Self::laplacian(Basis::Periodic, n, beta, DEFAULT_GRID_FACTOR)
    }

    pub fn laplacian(basis: Basis, n: usize, beta: f64, grid_factor: usize) -> Result<Self> {
        if n == 0 {
            return Err(SimError::InvalidArgument(
                "mode count must be positive".into(),
            ));
        }
        if !(beta >= 0.0) {
            return Err(SimError::InvalidArgument(format!(
                "beta must be >= 0, got {beta}"
            )));
        }
        let eigenvalues: Vec<f64> = (0..n)
            .map(|k| match basis {
                Basis::Dirichlet => -((k + 1) as f64 * PI).powi(2),
                Basis::Periodic => -(2.0 * PI * (k / 2 + 1) as f64).powi(2),
            })
            .collect();
        let r = eigenvalues.iter().map(|l| l.abs().powf(-beta)).collect();
        Self::build(eigenvalues, r, Some(beta), basis, grid_factor * n + 1)
    }

    /// General diagonal model; eigenvalues must be negative and nonincreasing,
    /// `r_k` positive. The grid uses `basis` for the `E` realization.
    pub fn diagonal(eigenvalues: Vec<f64>, r: Vec<f64>, basis: Basis) -> Result<Self> {
        let g = DEFAULT_GRID_FACTOR * eigenvalues.len() + 1;
        Self::build(eigenvalues, r, None, basis, g)
    }

    /// Same operators with a different collocation grid size.
    pub fn with_grid_size(&self, g: usize) -> Result<Self> {
        Self::build(
            self.eigenvalues.clone(),
            self.r.clone(),
            self.beta,
            self.basis,
            g,
        )
    }

    fn build(
        eigenvalues: Vec<f64>,
        r: Vec<f64>,
        beta: Option<f64>,
        basis: Basis,
        grid_size: usize,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        if n == 0 || r.len() != n {
            return Err(SimError::InvalidArgument(
                "eigenvalues and r must be non-empty and of equal length".into(),
            ));
        }
        if eigenvalues.iter().any(|l| !(l.is_finite() && *l < 0.0)) {
            return Err(SimError::InvalidArgument(
                "eigenvalues must be finite and negative".into(),
            ));
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(SimError::InvalidArgument(
                "eigenvalues must be nonincreasing".into(),
            ));
        }
        if r.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SimError::InvalidArgument(
                "r_k must be finite and positive".into(),
            ));
        }
        if grid_size < n {
            return Err(SimError::GridTooSmall {
                grid: grid_size,
                modes: n,
            });
        }
        if basis == Basis::Periodic && grid_size <= 2 * ((n - 1) / 2 + 1) {
            // Trigonometric exactness needs G > 2·(highest frequency).
            return Err(SimError::GridTooSmall {
                grid: grid_size,
                modes: n,
            });
        }
        let zeta_a = eigenvalues[0];
        let grid = CollocationGrid::build(basis, n, grid_size);
        let mut model = Self {
            eigenvalues,
            r,
            beta,
            zeta_a,
            smoothing: Smoothing {
                m: 1.0,
                w: 0.0,
                gamma: 0.0,
            },
            basis,
            grid,
        };
        model.smoothing = model.verify_smoothing()?.smoothing;
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    /// Dissipativity constant of `A` in `H` (the largest eigenvalue).
    pub fn zeta_a(&self) -> f64 {
        self.zeta_a
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn grid_size(&self) -> usize {
        self.grid.points.len()
    }

    pub fn grid_points(&self) -> &[f64] {
        &self.grid.points
    }

    /// Quadrature weight so that `∫₀¹ g ≈ weight · Σ_j g(ξ_j)`.
    pub fn grid_weight(&self) -> f64 {
        self.grid.weight
    }

    /// `‖R‖ = max_k r_k`.
    pub fn r_operator_norm(&self) -> f64 {
        self.r.iter().copied().fold(0.0, f64::max)
    }

    /// `e^{tA} x`.
    pub fn semigroup_flow(&self, t: f64, x: &StateVector) -> StateVector {
        assert!(t >= 0.0, "semigroup_flow needs t >= 0");
        if t == 0.0 {
            return x.clone();
        }
        StateVector(
            x.0.iter()
                .zip(&self.eigenvalues)
                .map(|(v, l)| v * (l * t).exp())
                .collect(),
        )
    }

    /// `⟨x, y⟩_R = Σ x_k y_k / r_k²`.
    pub fn r_inner(&self, x: &StateVector, y: &StateVector) -> f64 {
        x.0.iter()
            .zip(&y.0)
            .zip(&self.r)
            .map(|((a, b), r)| a * b / (r * r))
            .sum()
    }

    pub fn r_norm(&self, x: &StateVector) -> f64 {
        self.r_inner(x, x).sqrt()
    }

    /// `⟨Ax, y⟩_H`.
    pub fn a_inner(&self, x: &StateVector, y: &StateVector) -> f64 {
        x.0.iter()
            .zip(&y.0)
            .zip(&self.eigenvalues)
            .map(|((a, b), l)| l * a * b)
            .sum()
    }

    /// Values of `x` on the collocation grid.
    pub fn to_grid(&self, x: &StateVector) -> Vec<f64> {
        let n = self.n();
        debug_assert_eq!(x.len(), n);
        self.grid
            .synthesis
            .chunks_exact(n)
            .map(|row| row.iter().zip(&x.0).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Discrete projection of grid values onto the retained modes.
    pub fn from_grid(&self, values: &[f64]) -> StateVector {
        let n = self.n();
        assert_eq!(values.len(), self.grid_size(), "grid size mismatch");
        let mut c = vec![0.0; n];
        for (row, v) in self.grid.synthesis.chunks_exact(n).zip(values) {
            for (ck, phi) in c.iter_mut().zip(row) {
                *ck += phi * v;
            }
        }
        for ck in &mut c {
            *ck *= self.grid.weight;
        }
        StateVector(c)
    }

    /// `‖x‖_E`: sup of the grid values.
    pub fn e_norm(&self, x: &StateVector) -> f64 {
        self.to_grid(x).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_k e^{λ_k t} / r_k`, the norm of `e^{tA}` from `H` to `H_R`.
    pub fn smoothing_operator_norm(&self, t: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.r)
            .map(|(l, r)| (l * t).exp() / r)
            .fold(0.0, f64::max)
    }

    /// Smallest `M` with `‖e^{tA}‖_{H→H_R} ≤ M e^{−wt} t^{−γ}` on the fit grid.
    pub fn smoothing_prefactor(&self, w: f64, gamma: f64) -> f64 {
        smoothing_time_grid()
            .iter()
            .map(|&t| self.smoothing_operator_norm(t) * (w * t).exp() * t.powf(gamma))
            .fold(0.0, f64::max)
    }

    /// Fits `(M, w, γ)` of the smoothing bound on a log-spaced grid over `[1e−4, 10]`.
    ///
    /// `γ` is the log-log slope over the first decade (clamped to `[0, β]`),
    /// `w` is the full late-time decay rate when `γ = 0` and half of it
    /// otherwise, and `M` is the tightest prefactor on the grid inflated by
    /// `1e−6` relative.
    pub fn verify_smoothing(&self) -> Result<SmoothingReport> {
        let grid = smoothing_time_grid();
        let norms: Vec<f64> = grid
            .iter()
            .map(|&t| self.smoothing_operator_norm(t))
            .collect();
        let logt: Vec<f64> = grid.iter().map(|t| t.ln()).collect();
        let logn: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
        let decade = grid
            .iter()
            .take_while(|&&t| t <= 1e-3 * (1.0 + 1e-12))
            .count();
        let (slope, _) = crate::stats::ols_slope(&logt[..decade], &logn[..decade]);
        let mut gamma = (-slope).max(0.0);
        if gamma < 1e-6 {
            gamma = 0.0;
        }
        if let Some(beta) = self.beta {
            gamma = gamma.min(beta);
        }
        if !(gamma < 1.0) {
            return Err(SimError::SmoothingFit(format!(
                "fitted gamma {gamma} not in [0, 1)"
            )));
        }
        let tail_start = grid.iter().position(|&t| t >= 1.0).unwrap_or(0);
        let (late_slope, _) = crate::stats::ols_slope(&grid[tail_start..], &logn[tail_start..]);
        let decay = -late_slope;
        if !(decay > 0.0) {
            return Err(SimError::SmoothingFit(format!(
                "late-time decay rate {decay} not positive"
            )));
        }
        let w = if gamma == 0.0 { decay } else { 0.5 * decay };
        let m = self.smoothing_prefactor(w, gamma) * (1.0 + 1e-6);
        if !m.is_finite() {
            return Err(SimError::SmoothingFit("prefactor not finite".into()));
        }
        let smoothing = Smoothing { m, w, gamma };
        let worst_margin = grid
            .iter()
            .zip(&norms)
            .map(|(&t, &lhs)| {
                let rhs = m * (-w * t).exp() * t.powf(-gamma);
                (rhs - lhs) / rhs
            })
            .fold(f64::INFINITY, f64::min);
        if worst_margin < 0.0 {
            return Err(SimError::SmoothingFit(format!(
                "bound violated, margin {worst_margin}"
            )));
        }
        Ok(SmoothingReport {
            smoothing,
            worst_margin,
            grid,
            operator_norms: norms,
        })
    }
}

/// Log-spaced fit grid: 50 points per decade over `[1e−4, 10]`.
pub fn smoothing_time_grid() -> Vec<f64> {
    let per_decade = 50;
    let decades = 5;
    (0..=per_decade * decades)
        .map(|i| 10f64.powf(-4.0 + i as f64 / per_decade as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn first_dirichlet_eigenvalue() {
        let m = SpectralModel::dirichlet_laplacian(1, 0.0).unwrap();
        assert_relative_eq!(m.eigenvalues()[0], -PI * PI);
        assert_eq!(m.r()[0], 1.0);
        assert_relative_eq!(m.zeta_a(), -PI * PI);
    }

    #[test]
    fn r_for_half_beta() {
        let m = SpectralModel::dirichlet_laplacian(3, 0.5).unwrap();
        assert_relative_eq!(m.r()[1], 1.0 / (2.0 * PI), max_relative = 1e-14);
    }

    #[test]
    fn zero_modes_rejected() {
        assert!(SpectralModel::dirichlet_laplacian(0, 0.0).is_err());
    }

    #[test]
    fn flow_identity_and_scalar_exponential() {
        let m = SpectralModel::dirichlet_laplacian(4, 0.0).unwrap();
        let x = StateVector(vec![1.0, -2.0, 0.5, 3.0]);
        assert_eq!(m.semigroup_flow(0.0, &x), x);
        let e1 = StateVector::basis(4, 0);
        let y = m.semigroup_flow(1.0 / (PI * PI), &e1);
        assert_relative_eq!(y[0], (-1.0f64).exp(), max_relative = 1e-14);
        assert_eq!(y[1], 0.0);
    }

    #[test]
    fn r_norm_examples() {
        let m = SpectralModel::dirichlet_laplacian(3, 0.0).unwrap();
        let x = StateVector(vec![0.3, -1.2, 2.0]);
        assert_relative_eq!(m.r_norm(&x), x.h_norm(), max_relative = 1e-15);
        let d =
            SpectralModel::diagonal(vec![-1.0, -2.0], vec![1.0, 0.5], Basis::Dirichlet).unwrap();
        assert_relative_eq!(d.r_norm(&StateVector(vec![0.0, 1.0])), 2.0);
    }

    #[test]
    fn smoothing_for_beta_zero() {
        let m = SpectralModel::dirichlet_laplacian(16, 0.0).unwrap();
        let s = m.smoothing();
        assert_eq!(s.gamma, 0.0);
        assert_relative_eq!(s.m, 1.0, max_relative = 1e-5);
        assert_relative_eq!(s.w, PI * PI, max_relative = 1e-6);
    }

    #[test]
    fn smoothing_for_half_beta_matches_envelope() {
        // sup_{λ>0} λ^β e^{−λt} = (β/(et))^β; with w → 0 the tightest M is (β/e)^β.
        let m = SpectralModel::dirichlet_laplacian(64, 0.5).unwrap();
        let s = m.smoothing();
        assert!((s.gamma - 0.5).abs() < 0.05, "gamma = {}", s.gamma);
        let m0 = m.smoothing_prefactor(0.0, 0.5);
        let envelope = (0.5 / std::f64::consts::E).sqrt();
        assert!((m0 - envelope).abs() < 1e-3, "{m0} vs {envelope}");
        let rep = m.verify_smoothing().unwrap();
        assert!(rep.worst_margin >= 0.0);
        let t = 10.0;
        let rhs = s.m * (-s.w * t).exp() * t.powf(-s.gamma);
        assert!(rhs > m.smoothing_operator_norm(t));
    }

    #[test]
    fn grid_of_first_mode_is_sine() {
        let m = SpectralModel::dirichlet_laplacian(4, 0.0).unwrap();
        let u = m.to_grid(&StateVector::basis(4, 0));
        for (v, xi) in u.iter().zip(m.grid_points()) {
            assert_relative_eq!(
                *v,
                std::f64::consts::SQRT_2 * (PI * xi).sin(),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn e_norm_of_two_modes_matches_dense_grid() {
        let m = SpectralModel::dirichlet_laplacian(2, 0.0).unwrap();
        let x = StateVector(vec![1.0, 1.0]);
        let dense = m.grid_points().iter().fold(0.0f64, |acc, xi| {
            acc.max((std::f64::consts::SQRT_2 * ((PI * xi).sin() + (2.0 * PI * xi).sin())).abs())
        });
        assert_relative_eq!(m.e_norm(&x), dense, max_relative = 1e-14);
    }

    #[test]
    fn periodic_round_trip() {
        for n in [1, 2, 5, 8] {
            let m = SpectralModel::periodic_laplacian(n, 0.0).unwrap();
            let x = StateVector((0..n).map(|k| (k as f64 * 0.7).sin() + 0.1).collect());
            let back = m.from_grid(&m.to_grid(&x));
            for (a, b) in back.0.iter().zip(&x.0) {
                assert!((a - b).abs() < 1e-12);
            }
            assert_relative_eq!(m.eigenvalues()[0], -4.0 * PI * PI);
        }
    }

    #[test]
    fn small_grid_is_usage_error() {
        let m = SpectralModel::dirichlet_laplacian(8, 0.0).unwrap();
        assert!(matches!(
            m.with_grid_size(5),
            Err(SimError::GridTooSmall { .. })
        ));
    }
}
