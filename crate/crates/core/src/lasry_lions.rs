//! Lasry–Lions approximants along `H_R` in finite dimensions:
//! `f_ε(x) = sup_h inf_k { f(x + k − h) + ‖k‖²_R/(2ε) − ‖h‖²_R/ε }`.

use crate::error::{Result, SimError};
use crate::harness::{InequalityReport, PaperEq, Relation, DEFAULT_K_SIGMA};
use crate::rng::{derive_seed, par_indexed, rng_for};
use crate::semigroup::Observable;
use crate::spectral::{SpectralModel, StateVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

pub const GRID_POINTS: usize = 41;
/// Points per axis of the refinement grid over `±1` coarse spacing.
pub const REFINE_POINTS: usize = 21;
/// The outer objective is strongly concave, so few starts are needed.
pub const OUTER_STARTS: usize = 4;
pub const INNER_STARTS: usize = 8;
const RADIUS_INFLATION: f64 = 1.25;
const ITERATION_BUDGET: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    PiecewiseLinear,
    NormBased,
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LipKind {
    Constant {
        c: f64,
    },
    /// `max_i (⟨a_i, x⟩ + b_i)`, optionally clamped to `[lo, hi]`.
    MaxAffine {
        slopes: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        clamp: Option<(f64, f64)>,
    },
    /// `min_i (⟨a_i, x⟩ + b_i)`.
    MinAffine {
        slopes: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
    /// `min(cap, ‖x − centre‖_R)`.
    NormCap {
        centre: Vec<f64>,
        cap: f64,
    },
    /// `min(cap, |x_k|)`.
    AbsCoordinate {
        k: usize,
        cap: f64,
    },
    /// `amplitude · sin(⟨a, x⟩)`.
    SinRidge {
        a: Vec<f64>,
        amplitude: f64,
    },
    /// `amplitude · tanh(⟨a, x⟩)`.
    TanhRidge {
        a: Vec<f64>,
        amplitude: f64,
    },
}

/// A function on the truncation with a certified `R`-Lipschitz constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzFunction {
    pub name: String,
    pub family: Family,
    pub lip_r: f64,
    pub sup: Option<f64>,
    pub kind: LipKind,
}

/// `‖R a‖_H`, the `R`-Lipschitz constant of `x ↦ ⟨a, x⟩`.
fn r_dual(model: &SpectralModel, a: &[f64]) -> f64 {
    a.iter()
        .zip(model.r())
        .map(|(v, r)| (v * r).powi(2))
        .sum::<f64>()
        .sqrt()
}

impl LipschitzFunction {
    pub fn new(name: impl Into<String>, model: &SpectralModel, kind: LipKind) -> Self {
        let (family, lip_r, sup) = match &kind {
            LipKind::Constant { c } => (Family::Smooth, 0.0, Some(c.abs())),
            LipKind::MaxAffine { slopes, clamp, .. } => (
                Family::PiecewiseLinear,
                slopes.iter().map(|a| r_dual(model, a)).fold(0.0, f64::max),
                clamp.map(|(lo, hi)| lo.abs().max(hi.abs())),
            ),
            LipKind::MinAffine { slopes, .. } => (
                Family::PiecewiseLinear,
                slopes.iter().map(|a| r_dual(model, a)).fold(0.0, f64::max),
                None,
            ),
            LipKind::NormCap { cap, .. } => (Family::NormBased, 1.0, Some(*cap)),
            LipKind::AbsCoordinate { k, cap } => (Family::NormBased, model.r()[*k], Some(*cap)),
            LipKind::SinRidge { a, amplitude } | LipKind::TanhRidge { a, amplitude } => (
                Family::Smooth,
                amplitude.abs() * r_dual(model, a),
                Some(amplitude.abs()),
            ),
        };
        Self {
            name: name.into(),
            family,
            lip_r,
            sup,
            kind,
        }
    }

    pub fn eval(&self, model: &SpectralModel, x: &StateVector) -> f64 {
        self.eval_slice(model.r(), &x.0)
    }

    fn eval_slice(&self, r: &[f64], x: &[f64]) -> f64 {
        let dot = |a: &[f64]| -> f64 { a.iter().zip(x).map(|(u, v)| u * v).sum() };
        match &self.kind {
            LipKind::Constant { c } => *c,
            LipKind::MaxAffine {
                slopes,
                offsets,
                clamp,
            } => {
                let v = slopes
                    .iter()
                    .zip(offsets)
                    .map(|(a, b)| dot(a) + b)
                    .fold(f64::NEG_INFINITY, f64::max);
                match clamp {
                    Some((lo, hi)) => v.clamp(*lo, *hi),
                    None => v,
                }
            }
            LipKind::MinAffine { slopes, offsets } => slopes
                .iter()
                .zip(offsets)
                .map(|(a, b)| dot(a) + b)
                .fold(f64::INFINITY, f64::min),
            LipKind::NormCap { centre, cap } => x
                .iter()
                .zip(centre)
                .zip(r)
                .map(|((v, c), rk)| ((v - c) / rk).powi(2))
                .sum::<f64>()
                .sqrt()
                .min(*cap),
            LipKind::AbsCoordinate { k, cap } => x[*k].abs().min(*cap),
            LipKind::SinRidge { a, amplitude } => amplitude * dot(a).sin(),
            LipKind::TanhRidge { a, amplitude } => amplitude * dot(a).tanh(),
        }
    }

    /// `f(x + R(k − h))` without allocating for `n ≤ 16`.
    fn eval_shifted(&self, r: &[f64], x: &[f64], k: &[f64], h: &[f64]) -> f64 {
        let fill = |buf: &mut [f64]| {
            for i in 0..x.len() {
                buf[i] = x[i] + r[i] * (k[i] - h[i]);
            }
        };
        if x.len() <= 16 {
            let mut buf = [0.0; 16];
            fill(&mut buf[..x.len()]);
            self.eval_slice(r, &buf[..x.len()])
        } else {
            let mut buf = vec![0.0; x.len()];
            fill(&mut buf);
            self.eval_slice(r, &buf)
        }
    }

    /// Spot-checks the Lipschitz and sup certificates on `pairs` random pairs.
    pub fn validate(&self, model: &SpectralModel, pairs: usize, seed: u64) -> Result<()> {
        let n = model.n();
        let mut rng = rng_for(seed, 0);
        for _ in 0..pairs {
            let x = StateVector(
                (0..n)
                    .map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
            let scale = 10f64.powf(rng.random_range(-3.0..1.0));
            let h = StateVector(
                (0..n)
                    .map(|k| scale * model.r()[k] * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
            let fx = self.eval(model, &x);
            let fxh = self.eval(model, &(&x + &h));
            let allowed = self.lip_r * model.r_norm(&h) * (1.0 + 1e-12) + 1e-12;
            if (fxh - fx).abs() > allowed {
                return Err(SimError::InvalidArgument(format!(
                    "{}: Lipschitz certificate {} violated ({} > {allowed})",
                    self.name,
                    self.lip_r,
                    (fxh - fx).abs()
                )));
            }
            if let Some(s) = self.sup {
                if fx.abs() > s * (1.0 + 1e-12) {
                    return Err(SimError::InvalidArgument(format!(
                        "{}: sup bound {s} violated by {fx}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMode {
    /// Two-level exhaustive grid with 41 points per axis, `n ≤ 2`.
    Grid,
    /// Multi-start pattern search.
    Descent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    pub value: f64,
    /// Outer maximiser `h` and inner minimiser `k` at that `h`, in `H` coordinates.
    pub outer_argmax: StateVector,
    pub inner_argmin: StateVector,
    pub iterations: usize,
    pub final_step: f64,
    pub converged: bool,
}

/// Search radii `(inner, outer)` in `‖·‖_R`, inflated by 25%.
pub fn search_radii(lip_r: f64, eps: f64) -> (f64, f64) {
    let inner = RADIUS_INFLATION * 2.0 * eps * lip_r;
    let outer = RADIUS_INFLATION * (8.0f64).sqrt() * eps * lip_r;
    (inner, outer)
}

/// `H_R`-coordinates `u` to `H`: `x_k = r_k u_k`.
fn from_r(model: &SpectralModel, u: &[f64]) -> StateVector {
    StateVector(u.iter().zip(model.r()).map(|(a, r)| a * r).collect())
}

fn sq(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum()
}

/// Visits the points of the `points^n` grid over `[c − ρ, c + ρ]^n` that lie
/// in the ball `‖u‖ ≤ bound`.
fn for_grid_points(
    centre: &[f64],
    rho: f64,
    points: usize,
    bound: f64,
    mut visit: impl FnMut(&[f64]),
) {
    let n = centre.len();
    let axis: Vec<f64> = (0..points)
        .map(|i| -rho + 2.0 * rho * i as f64 / (points - 1) as f64)
        .collect();
    let limit = bound * bound * (1.0 + 1e-12);
    let mut idx = vec![0usize; n];
    let mut u: Vec<f64> = centre.iter().map(|c| c + axis[0]).collect();
    loop {
        if sq(&u) <= limit {
            visit(&u);
        }
        let mut d = 0;
        loop {
            if d == n {
                return;
            }
            idx[d] += 1;
            if idx[d] < points {
                u[d] = centre[d] + axis[idx[d]];
                break;
            }
            idx[d] = 0;
            u[d] = centre[d] + axis[0];
            d += 1;
        }
    }
}

/// Two-level grid minimisation of `obj` over the ball of radius `rho`,
/// including the given extra candidates. Points where `floor` already exceeds
/// the running minimum are skipped.
fn grid_minimise(
    obj: &dyn Fn(&[f64]) -> f64,
    floor: Option<&dyn Fn(&[f64]) -> f64>,
    n: usize,
    rho: f64,
    extra: &[Vec<f64>],
) -> (Vec<f64>, f64) {
    let mut best = (vec![0.0; n], obj(&vec![0.0; n]));
    let consider = |u: &[f64], best: &mut (Vec<f64>, f64)| {
        if floor.is_some_and(|lb| lb(u) > best.1) {
            return;
        }
        let v = obj(u);
        if v < best.1 {
            best.0.copy_from_slice(u);
            best.1 = v;
        }
    };
    for e in extra {
        consider(e, &mut best);
    }
    if rho == 0.0 {
        return best;
    }
    let zero = vec![0.0; n];
    for_grid_points(&zero, rho, GRID_POINTS, rho, |u| consider(u, &mut best));
    let spacing = 2.0 * rho / (GRID_POINTS - 1) as f64;
    let centre = best.0.clone();
    for_grid_points(&centre, spacing, REFINE_POINTS, rho, |u| {
        consider(u, &mut best)
    });
    best
}

struct SearchOutcome {
    point: Vec<f64>,
    value: f64,
    iterations: usize,
    step: f64,
    converged: bool,
}

const RANDOM_DIRECTIONS: usize = 8;

fn unit_gaussian(rng: &mut impl Rng, u: &mut [f64]) {
    for v in u.iter_mut() {
        *v = rng.sample::<f64, _>(StandardNormal);
    }
    let norm = sq(u).sqrt().max(1e-300);
    u.iter_mut().for_each(|v| *v /= norm);
}

/// Compass search with step halving inside the ball `‖u‖ ≤ rho`. Besides the
/// coordinate directions it polls random unit directions that are redrawn at
/// every halving, so searches do not stall on ridges of nonsmooth objectives.
fn pattern_search(
    obj: &dyn Fn(&[f64]) -> f64,
    start: Vec<f64>,
    rho: f64,
    seed: u64,
) -> SearchOutcome {
    let n = start.len();
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(2 * n + RANDOM_DIRECTIONS);
    for k in 0..n {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[k] = s;
            dirs.push(d);
        }
    }
    let mut rng = rng_for(seed, 0xd1);
    if n >= 2 {
        for _ in 0..RANDOM_DIRECTIONS {
            let mut d = vec![0.0; n];
            unit_gaussian(&mut rng, &mut d);
            dirs.push(d);
        }
    }
    let mut x = start;
    let mut cand = x.clone();
    let mut fx = obj(&x);
    let mut step = 0.5 * rho;
    let tol = 1e-7 * (1.0 + rho);
    let mut it = 0;
    while step > tol && it < ITERATION_BUDGET {
        it += 1;
        let mut moved = false;
        for d in &dirs {
            for ((c, a), b) in cand.iter_mut().zip(&x).zip(d) {
                *c = a + step * b;
            }
            if sq(&cand) > rho * rho {
                continue;
            }
            let fc = obj(&cand);
            if fc < fx {
                std::mem::swap(&mut x, &mut cand);
                fx = fc;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
            for d in dirs.iter_mut().skip(2 * n) {
                unit_gaussian(&mut rng, d);
            }
        }
    }
    SearchOutcome {
        point: x,
        value: fx,
        iterations: it,
        step,
        converged: step <= tol,
    }
}

fn ball_starts(n: usize, rho: f64, count: usize, seed: u64, fixed: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut starts: Vec<Vec<f64>> = fixed
        .iter()
        .filter(|u| sq(u) <= rho * rho)
        .cloned()
        .collect();
    let mut rng = rng_for(seed, 0x57);
    while starts.len() < count {
        let g: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = sq(&g).sqrt().max(1e-300);
        let r = rho * rng.random::<f64>().powf(1.0 / n as f64);
        starts.push(g.iter().map(|v| v * r / norm).collect());
    }
    starts
}

/// Best pattern search over the given starts.
fn descent_minimise(
    obj: &dyn Fn(&[f64]) -> f64,
    rho: f64,
    starts: impl Iterator<Item = Vec<f64>>,
    seed: u64,
) -> SearchOutcome {
    let mut best: Option<SearchOutcome> = None;
    for (i, s) in starts.enumerate() {
        let o = if rho == 0.0 {
            let value = obj(&s);
            SearchOutcome {
                point: s,
                value,
                iterations: 0,
                step: 0.0,
                converged: true,
            }
        } else {
            pattern_search(obj, s, rho, derive_seed(seed, i as u64))
        };
        if best.as_ref().is_none_or(|b| o.value < b.value) {
            best = Some(o);
        }
    }
    best.expect("at least one start")
}

/// `f_ε(x)`.
pub fn envelope(
    f: &LipschitzFunction,
    eps: f64,
    x: &StateVector,
    model: &SpectralModel,
    mode: EnvelopeMode,
    seed: u64,
) -> Result<EnvelopeResult> {
    if !(eps > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let n = model.n();
    if mode == EnvelopeMode::Grid && n > 2 {
        return Err(SimError::InvalidArgument(format!(
            "grid mode supports n <= 2, got {n}"
        )));
    }
    let (rho_k, rho_h) = search_radii(f.lip_r, eps);
    let inner_seed = derive_seed(seed, 1);
    let inner_starts = match mode {
        EnvelopeMode::Descent if rho_k > 0.0 => {
            ball_starts(n, rho_k, INNER_STARTS - 2, inner_seed, &[])
        }
        _ => Vec::new(),
    };
    let inner = |h: &[f64]| -> (Vec<f64>, f64, usize, bool) {
        let obj =
            |k: &[f64]| -> f64 { f.eval_shifted(model.r(), &x.0, k, h) + sq(k) / (2.0 * eps) };
        let fixed = vec![vec![0.0; n], h.to_vec()];
        match mode {
            EnvelopeMode::Grid => {
                let (k, v) = grid_minimise(&obj, None, n, rho_k, &fixed);
                (k, v, 0, true)
            }
            EnvelopeMode::Descent => {
                let starts = fixed
                    .into_iter()
                    .filter(|u| sq(u) <= rho_k * rho_k)
                    .chain(inner_starts.iter().cloned());
                let o = descent_minimise(&obj, rho_k, starts, inner_seed);
                (o.point, o.value, o.iterations, o.converged)
            }
        }
    };
    let outer_obj = |h: &[f64]| -> f64 { -(inner(h).1 - sq(h) / eps) };
    let (h, iterations, final_step, converged) = match mode {
        EnvelopeMode::Grid => {
            // k = h is an inner candidate, so −f_ε ≥ ‖h‖²/(2ε) − f(x) at every h.
            let fx = f.eval(model, x);
            let slack = 1e-12 * (1.0 + fx.abs());
            let floor = |h: &[f64]| sq(h) / (2.0 * eps) - fx - slack;
            let (h, _) = grid_minimise(&outer_obj, Some(&floor), n, rho_h, &[vec![0.0; n]]);
            (
                h,
                0,
                2.0 * rho_h / ((GRID_POINTS - 1) * (REFINE_POINTS - 1)) as f64,
                true,
            )
        }
        EnvelopeMode::Descent => {
            if rho_h == 0.0 {
                (vec![0.0; n], 0, 0.0, true)
            } else {
                let starts = ball_starts(
                    n,
                    rho_h,
                    OUTER_STARTS,
                    derive_seed(seed, 3),
                    &[vec![0.0; n]],
                );
                let runs = par_indexed(starts.len(), |i| {
                    pattern_search(
                        &outer_obj,
                        starts[i].clone(),
                        rho_h,
                        derive_seed(seed, 2 + i as u64),
                    )
                });
                let mut best = 0;
                for (i, r) in runs.iter().enumerate() {
                    if r.value < runs[best].value {
                        best = i;
                    }
                }
                let r = &runs[best];
                (r.point.clone(), r.iterations, r.step, r.converged)
            }
        }
    };
    let (k, inner_value, inner_iters, inner_ok) = inner(&h);
    Ok(EnvelopeResult {
        value: inner_value - sq(&h) / eps,
        outer_argmax: from_r(model, &h),
        inner_argmin: from_r(model, &k),
        iterations: iterations + inner_iters,
        final_step,
        converged: converged && inner_ok,
    })
}

/// Optimizer slack `1e−6·(1 + scale)`.
pub fn optimizer_slack(scale: f64) -> f64 {
    1e-6 * (1.0 + scale)
}

fn worst_report(
    key: String,
    eq: PaperEq,
    rows: &[(f64, f64)],
    slack: f64,
    seed: u64,
) -> InequalityReport {
    let (lhs, rhs) = rows
        .iter()
        .copied()
        .min_by(|a, b| {
            (a.1 - a.0)
                .partial_cmp(&(b.1 - b.0))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or((0.0, 0.0));
    InequalityReport::new(
        key,
        eq,
        (lhs, 0.0),
        (rhs, 0.0),
        Relation::Le,
        DEFAULT_K_SIGMA,
        slack,
        seed,
    )
}

/// The three envelope properties over `xs` for each `ε`:
/// boundedness `|f_ε| ≤ ‖f‖_∞` (bounded `f` only), one-sided approximation
/// `0 ≤ f − f_ε ≤ 4ε Lip²` and the difference-quotient bound
/// `|f_ε(x+h) − f_ε(x)| ≤ 4√2 Lip ‖h‖_R + ‖h‖²_R/ε`.
pub fn property_suite(
    f: &LipschitzFunction,
    eps_grid: &[f64],
    xs: &[StateVector],
    model: &SpectralModel,
    mode: EnvelopeMode,
    seed: u64,
) -> Result<Vec<InequalityReport>> {
    let n = model.n();
    let mut out = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut monotone_violations = 0usize;
    let mut sorted_eps = eps_grid.to_vec();
    sorted_eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for &eps in &sorted_eps {
        let jobs = par_indexed(xs.len(), |i| -> Result<(f64, f64, f64, f64)> {
            let x = &xs[i];
            let s = derive_seed(seed, i as u64);
            let fe = envelope(f, eps, x, model, mode, s)?.value;
            let mut rng = rng_for(s, 0x9);
            let g: Vec<f64> = (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm = sq(&g).sqrt().max(1e-300);
            let step = 0.05 * eps.sqrt().min(1.0);
            let u: Vec<f64> = g.iter().map(|v| v * step / norm).collect();
            let h = from_r(model, &u);
            let feh = envelope(f, eps, &(x + &h), model, mode, s)?.value;
            Ok((f.eval(model, x), fe, feh, step))
        });
        let rows = jobs.into_iter().collect::<Result<Vec<_>>>()?;
        let scale = f
            .sup
            .unwrap_or_else(|| rows.iter().fold(0.0f64, |a, r| a.max(r.0.abs())));
        let slack = optimizer_slack(scale);
        let tag = format!("f={};eps={eps}", f.name);
        let lower: Vec<(f64, f64)> = rows.iter().map(|r| (r.1, r.0)).collect();
        out.push(worst_report(
            format!("ll_one_sided[{tag}]"),
            PaperEq::LasryLionsApproximation,
            &lower,
            slack,
            seed,
        ));
        let upper: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (r.0 - r.1, 4.0 * eps * f.lip_r * f.lip_r))
            .collect();
        out.push(worst_report(
            format!("ll_approximation[{tag}]"),
            PaperEq::LasryLionsApproximation,
            &upper,
            slack,
            seed,
        ));
        if let Some(sup) = f.sup {
            let b: Vec<(f64, f64)> = rows.iter().map(|r| (r.1.abs(), sup)).collect();
            out.push(worst_report(
                format!("ll_bounded[{tag}]"),
                PaperEq::LasryLionsBound,
                &b,
                slack,
                seed,
            ));
        }
        let quot: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| {
                (
                    (r.2 - r.1).abs(),
                    4.0 * SQRT_2 * f.lip_r * r.3 + r.3 * r.3 / eps,
                )
            })
            .collect();
        out.push(worst_report(
            format!("ll_derivative[{tag}]"),
            PaperEq::LasryLionsDerivative,
            &quot,
            slack,
            seed,
        ));
        let vals: Vec<f64> = rows.iter().map(|r| r.1).collect();
        if let Some(p) = &prev {
            monotone_violations += p
                .iter()
                .zip(&vals)
                .filter(|(a, b)| **a > **b + slack)
                .count();
        }
        prev = Some(vals);
    }
    if let Some(last) = out.last_mut() {
        last.notes.push(format!(
            "monotonicity in eps: {monotone_violations} violations"
        ));
    }
    Ok(out)
}

/// Descent-mode envelope against the grid oracle, agreement within `1e−3`.
pub fn mode_agreement(
    f: &LipschitzFunction,
    eps: f64,
    xs: &[StateVector],
    model: &SpectralModel,
    seed: u64,
) -> Result<InequalityReport> {
    let rows = par_indexed(xs.len(), |i| -> Result<(f64, f64)> {
        let s = derive_seed(seed, i as u64);
        let g = envelope(f, eps, &xs[i], model, EnvelopeMode::Grid, s)?.value;
        let d = envelope(f, eps, &xs[i], model, EnvelopeMode::Descent, s)?.value;
        Ok((d, g))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (d, g) = rows
        .iter()
        .copied()
        .max_by(|a, b| (a.0 - a.1).abs().partial_cmp(&(b.0 - b.1).abs()).unwrap())
        .unwrap_or((0.0, 0.0));
    Ok(InequalityReport::new(
        format!("ll_descent_vs_grid[f={};eps={eps}]", f.name),
        PaperEq::LasryLionsApproximation,
        (d, 0.0),
        (g, 0.0),
        Relation::Eq,
        DEFAULT_K_SIGMA,
        1e-3,
        seed,
    ))
}

/// Envelope wrapped as an observable; its `R`-Lipschitz constant is at most
/// `4√2` times that of `g`.
pub struct LasryLionsSurrogate {
    pub f: LipschitzFunction,
    pub eps: f64,
    pub mode: EnvelopeMode,
    pub seed: u64,
}

impl LasryLionsSurrogate {
    pub fn lip_r(&self) -> f64 {
        4.0 * SQRT_2 * self.f.lip_r
    }
}

impl Observable for LasryLionsSurrogate {
    fn value(&self, model: &SpectralModel, x: &StateVector) -> f64 {
        envelope(&self.f, self.eps, x, model, self.mode, self.seed).map_or(f64::NAN, |r| r.value)
    }

    fn sup_bound(&self) -> Option<f64> {
        self.f.sup
    }

    fn label(&self) -> String {
        format!("ll[{};eps={}]", self.f.name, self.eps)
    }
}

pub fn regularize_for_concentration(
    g: &LipschitzFunction,
    eps: f64,
    model: &SpectralModel,
) -> Result<LasryLionsSurrogate> {
    if !(eps > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let mode = if model.n() <= 2 {
        EnvelopeMode::Grid
    } else {
        EnvelopeMode::Descent
    };
    Ok(LasryLionsSurrogate {
        f: g.clone(),
        eps,
        mode,
        seed: 0,
    })
}

/// Twenty corpus members, ten on `n = 1` and ten on `n = 2`.
pub fn default_corpus(
    model1: &SpectralModel,
    model2: &SpectralModel,
    seed: u64,
) -> Vec<(usize, LipschitzFunction)> {
    let mut out = Vec::new();
    let one = |name: &str, kind: LipKind| (1usize, LipschitzFunction::new(name, model1, kind));
    out.push(one("const", LipKind::Constant { c: 0.7 }));
    out.push(one(
        "linear",
        LipKind::MaxAffine {
            slopes: vec![vec![1.0]],
            offsets: vec![0.0],
            clamp: None,
        },
    ));
    out.push(one(
        "abs",
        LipKind::MaxAffine {
            slopes: vec![vec![1.0], vec![-1.0]],
            offsets: vec![0.0, 0.0],
            clamp: None,
        },
    ));
    out.push(one(
        "abs_clamped",
        LipKind::MaxAffine {
            slopes: vec![vec![1.0], vec![-1.0]],
            offsets: vec![0.0, 0.0],
            clamp: Some((0.0, 1.0)),
        },
    ));
    out.push(one(
        "neg_abs",
        LipKind::MinAffine {
            slopes: vec![vec![1.0], vec![-1.0]],
            offsets: vec![0.0, 0.0],
        },
    ));
    out.push(one(
        "tent",
        LipKind::MinAffine {
            slopes: vec![vec![2.0], vec![-0.5]],
            offsets: vec![1.0, 0.2],
        },
    ));
    out.push(one(
        "norm_cap",
        LipKind::NormCap {
            centre: vec![0.3],
            cap: 1.0,
        },
    ));
    out.push(one(
        "abs_coord_cap",
        LipKind::AbsCoordinate { k: 0, cap: 0.5 },
    ));
    out.push(one(
        "sin",
        LipKind::SinRidge {
            a: vec![3.0],
            amplitude: 0.5,
        },
    ));
    out.push(one(
        "tanh",
        LipKind::TanhRidge {
            a: vec![2.0],
            amplitude: 1.0,
        },
    ));
    let two = |name: &str, kind: LipKind| (2usize, LipschitzFunction::new(name, model2, kind));
    out.push(two("const2", LipKind::Constant { c: -1.2 }));
    out.push(two(
        "linear2",
        LipKind::MaxAffine {
            slopes: vec![vec![0.6, -0.8]],
            offsets: vec![0.1],
            clamp: None,
        },
    ));
    out.push(two(
        "norm_cap2",
        LipKind::NormCap {
            centre: vec![0.0, 0.0],
            cap: 1.0,
        },
    ));
    out.push(two("abs_coord2", LipKind::AbsCoordinate { k: 1, cap: 2.0 }));
    out.push(two(
        "sin2",
        LipKind::SinRidge {
            a: vec![1.0, 2.0],
            amplitude: 0.4,
        },
    ));
    out.push(two(
        "tanh2",
        LipKind::TanhRidge {
            a: vec![-1.5, 0.5],
            amplitude: 0.8,
        },
    ));
    let mut rng = rng_for(seed, 0xc0);
    for i in 0..4 {
        let pieces = 3 + i;
        let slopes: Vec<Vec<f64>> = (0..pieces)
            .map(|_| (0..2).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let offsets: Vec<f64> = (0..pieces).map(|_| rng.random_range(-0.5..0.5)).collect();
        let kind = if i % 2 == 0 {
            LipKind::MaxAffine {
                slopes,
                offsets,
                clamp: Some((-2.0, 2.0)),
            }
        } else {
            LipKind::MinAffine { slopes, offsets }
        };
        out.push(two(&format!("random_pl{i}"), kind));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Basis;

    fn unit(n: usize) -> SpectralModel {
        SpectralModel::diagonal(vec![-1.0; n], vec![1.0; n], Basis::Dirichlet).unwrap()
    }

    #[test]
    fn constant_is_fixed_point() {
        let m = unit(1);
        let f = LipschitzFunction::new("c", &m, LipKind::Constant { c: 0.3 });
        for mode in [EnvelopeMode::Grid, EnvelopeMode::Descent] {
            let r = envelope(&f, 0.5, &StateVector(vec![1.0]), &m, mode, 1).unwrap();
            assert_eq!(r.value, 0.3);
        }
    }

    #[test]
    fn linear_envelope_closed_form() {
        // For f(x) = x: inner inf at k = −ε gives x − h − ε/2, outer sup at h = −ε/2 gives x − ε/4.
        let m = unit(1);
        let f = LipschitzFunction::new(
            "x",
            &m,
            LipKind::MaxAffine {
                slopes: vec![vec![1.0]],
                offsets: vec![0.0],
                clamp: None,
            },
        );
        let eps = 0.1;
        let r = envelope(&f, eps, &StateVector(vec![0.0]), &m, EnvelopeMode::Grid, 1).unwrap();
        assert!((r.value + eps / 4.0).abs() < 1e-5, "{}", r.value);
        let d = envelope(
            &f,
            eps,
            &StateVector(vec![0.0]),
            &m,
            EnvelopeMode::Descent,
            1,
        )
        .unwrap();
        assert!((d.value + eps / 4.0).abs() < 1e-6, "{}", d.value);
    }

    #[test]
    fn corpus_certificates_hold() {
        let (m1, m2) = (unit(1), unit(2));
        for (i, (d, f)) in default_corpus(&m1, &m2, 7).iter().enumerate() {
            let m = if *d == 1 { &m1 } else { &m2 };
            f.validate(m, 1000, i as u64).unwrap();
        }
    }
}
