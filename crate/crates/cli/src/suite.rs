//! Runs the check list of a scenario against one invariant ensemble.

use crate::config::{pad, CheckSpec, SamplerKind, Scenario};
use simlab_core::drift::DriftKind;
use simlab_core::harness::{
    self, default_tail_grid, EpsBeta, IntegrabilityRow, TailRow, DEFAULT_K_SIGMA,
};
use simlab_core::integrator;
use simlab_core::rng::{derive_seed, pool_from_env};
use simlab_core::semigroup::{self, EstimateRecord};
use simlab_core::{
    ConstantsPack, InequalityReport, MeasureEnsemble, PaperEq, Relation, Result, SimError,
    SpectralModel, StateVector, TestFunction, Trajectory,
};

/// Everything a run produces, in check order.
#[derive(Debug, Clone, Default)]
pub struct SuiteOutcome {
    pub reports: Vec<InequalityReport>,
    pub tails: Vec<(String, Vec<TailRow>)>,
    pub integrability: Vec<(String, Vec<IntegrabilityRow>)>,
    pub eps_beta: Vec<(String, Vec<EpsBeta>)>,
    pub estimates: Vec<EstimateRecord>,
    pub trajectory: Option<Trajectory>,
    pub ensemble: Option<MeasureEnsemble>,
}

impl SuiteOutcome {
    /// 0 when every verdict matches its expectation, 1 on any unexpected
    /// outcome, 3 when all match but some report is degraded.
    pub fn exit_code(&self) -> i32 {
        if self.reports.iter().any(|r| r.is_unexpected()) {
            1
        } else if self.reports.iter().any(|r| r.degraded) {
            3
        } else {
            0
        }
    }
}

/// Report key without its parameter list: `"fernique[lambda=0.05]"` → `"fernique"`.
pub fn base_key(check: &str) -> &str {
    check.split('[').next().unwrap_or(check)
}

fn paper_eq_of(check: &CheckSpec) -> PaperEq {
    match check {
        CheckSpec::LogSobolev { .. } => PaperEq::LogSobolev,
        CheckSpec::Poincare { .. } => PaperEq::Poincare,
        CheckSpec::Hypercontractivity { .. } => PaperEq::Hypercontractivity,
        CheckSpec::Harnack { .. } => PaperEq::Harnack,
        CheckSpec::Concentration { .. } => PaperEq::GaussianConcentration,
        CheckSpec::Fernique { .. } => PaperEq::Fernique,
        CheckSpec::Supercontractivity { .. } => PaperEq::ExponentialIntegrability,
        CheckSpec::SemigroupLogSobolev { .. } | CheckSpec::Estimate { .. } => {
            PaperEq::SemigroupLogSobolev
        }
        CheckSpec::EpsLogSobolev { .. } => PaperEq::EpsLogSobolev,
        CheckSpec::GradientEstimate { .. } => PaperEq::GradientEstimate,
        CheckSpec::Ultrabounded { .. } => PaperEq::Ultraboundedness,
        CheckSpec::VariationalBounds { .. } => PaperEq::SupNormDerivativeBound,
    }
}

/// A check that could not be evaluated is reported as a failure.
fn error_report(check: &CheckSpec, seed: u64, err: &SimError) -> InequalityReport {
    InequalityReport::new(
        format!("{}[error]", check.name()),
        paper_eq_of(check),
        (f64::NAN, 0.0),
        (f64::NAN, 0.0),
        Relation::Le,
        DEFAULT_K_SIGMA,
        0.0,
        seed,
    )
    .with_note(err.to_string())
}

fn e1(n: usize) -> Vec<f64> {
    StateVector::basis(n, 0).0
}

fn positive_battery(n: usize) -> Vec<TestFunction> {
    vec![
        TestFunction::tanh_coordinate(n, 0, 1.0, 2.0),
        TestFunction::SoftAbsTanh {
            a: e1(n),
            floor: 0.25,
        },
        TestFunction::RNormCap {
            offset: 1.0,
            weight: 0.5,
            scale: 1.0,
        },
        TestFunction::exp_quadratic_coordinate(n, 0, 0.5, 0.0),
        TestFunction::CylindricalTanh {
            dirs: vec![e1(n).iter().map(|v| 2.0 * v).collect()],
            weights: vec![0.5],
            offset: 1.0,
        },
    ]
}

fn poincare_battery(n: usize) -> Vec<TestFunction> {
    vec![
        TestFunction::coordinate(n, 0, 0.0),
        TestFunction::tanh_coordinate(n, 0, 1.0, 0.0),
    ]
}

fn exp_quadratic_battery(n: usize) -> Vec<TestFunction> {
    let mut b: Vec<TestFunction> = [0.25, 0.5, 1.0]
        .iter()
        .map(|th| TestFunction::exp_quadratic_coordinate(n, 0, *th, 0.0))
        .collect();
    b.push(TestFunction::exp_quadratic_coordinate(n, 0, 0.5, 0.1));
    b
}

fn harnack_battery(n: usize) -> Vec<TestFunction> {
    vec![
        TestFunction::tanh_coordinate(n, 0, 1.0, 2.0),
        TestFunction::SoftAbsTanh {
            a: e1(n),
            floor: 0.25,
        },
    ]
}

fn semigroup_ls_battery(n: usize) -> Vec<TestFunction> {
    vec![
        TestFunction::SoftAbsTanh {
            a: e1(n),
            floor: 0.25,
        },
        TestFunction::tanh_coordinate(n, 0, 1.0, 2.0),
    ]
}

fn eps_ls_battery(n: usize) -> Vec<TestFunction> {
    vec![
        TestFunction::tanh_coordinate(n, 0, 1.0, 2.0),
        TestFunction::RNormCap {
            offset: 1.0,
            weight: 0.5,
            scale: 1.0,
        },
    ]
}

fn or_default(
    battery: &[TestFunction],
    default: impl FnOnce() -> Vec<TestFunction>,
) -> Vec<TestFunction> {
    if battery.is_empty() {
        default()
    } else {
        battery.to_vec()
    }
}

pub fn build_ensemble(scenario: &Scenario) -> Result<MeasureEnsemble> {
    let (model, spec) = (&scenario.model, &scenario.spec);
    let s = &scenario.config.sampler;
    let seed = derive_seed(scenario.config.sim.seed, 0xe5e);
    let dt = scenario.config.sim.dt;
    match s.kind {
        SamplerKind::Gaussian => Ok(semigroup::gaussian_oracle_ensemble(model, s.count, seed)),
        SamplerKind::Ergodic => {
            let (burn, thin) = semigroup::default_chain_times(model, spec)?;
            semigroup::sample_invariant(
                model,
                spec,
                dt,
                s.burn_in.unwrap_or(burn),
                s.count,
                s.thinning.unwrap_or(thin),
                seed,
            )
        }
        SamplerKind::Endpoints => {
            let (burn, _) = semigroup::default_chain_times(model, spec)?;
            let x0 = StateVector::zeros(model.n());
            semigroup::ensemble_of_endpoints(
                model,
                spec,
                dt,
                s.burn_in.unwrap_or(burn),
                &x0,
                s.count,
                seed,
            )
        }
        SamplerKind::Gibbs => {
            let b = match &spec.kind {
                DriftKind::Nemytskii { b_coeffs } => b_coeffs.clone(),
                _ => vec![],
            };
            semigroup::gibbs_oracle_sample(model, &b, s.count, s.ula_settings(), seed)
        }
    }
}

/// `h` along the first mode with `‖h‖_R = size`.
fn first_mode_shift(model: &SpectralModel, size: f64) -> StateVector {
    let mut h = StateVector::zeros(model.n());
    h[0] = size * model.r()[0];
    h
}

struct Ctx<'a> {
    scenario: &'a Scenario,
    ensemble: &'a MeasureEnsemble,
    constants: ConstantsPack,
    out: SuiteOutcome,
}

impl Ctx<'_> {
    fn point(&self, x: &[f64]) -> StateVector {
        pad(x, self.scenario.model.n()).expect("validated at load")
    }

    fn run_check(&mut self, check: &CheckSpec, seed: u64) -> Result<Vec<InequalityReport>> {
        let model = &self.scenario.model;
        let spec = &self.scenario.spec;
        let ens = self.ensemble;
        let c = &self.constants;
        let n = model.n();
        let sim_dt = self.scenario.config.sim.dt;
        let mut reports = Vec::new();
        match check {
            CheckSpec::LogSobolev { p, battery } => {
                for phi in or_default(battery, || positive_battery(n)) {
                    for &pv in p {
                        reports.push(harness::check_log_sobolev(model, ens, &phi, pv, c)?);
                    }
                }
            }
            CheckSpec::Poincare { battery } => {
                for phi in or_default(battery, || poincare_battery(n)) {
                    reports.push(harness::check_poincare(model, ens, &phi, c)?);
                }
            }
            CheckSpec::Hypercontractivity {
                t,
                q,
                battery,
                mode,
            } => {
                let battery = or_default(battery, || exp_quadratic_battery(n));
                reports.extend(harness::check_hypercontractivity(
                    model, spec, ens, *t, *q, &battery, c, *mode, seed,
                )?);
            }
            CheckSpec::Harnack {
                p,
                t,
                h,
                x,
                battery,
                mode,
            } => {
                let x = self.point(x);
                let mut j = 0u64;
                for phi in or_default(battery, || harnack_battery(n)) {
                    for &pv in p {
                        for &tv in t {
                            for &hv in h {
                                let shift = first_mode_shift(model, hv);
                                let s = derive_seed(seed, j);
                                j += 1;
                                let r = harness::check_harnack(
                                    model, spec, tv, &x, &shift, pv, &phi, c, *mode, s,
                                )?;
                                reports.push(r);
                            }
                        }
                    }
                }
            }
            CheckSpec::Concentration {
                coordinate,
                h_variant,
                points,
            } => {
                let k = coordinate - 1;
                let g = TestFunction::coordinate(n, k, 0.0);
                let lip = if *h_variant { 1.0 } else { model.r()[k] };
                let values = ens.values(|x| x[k]);
                let grid = default_tail_grid(&values, *points);
                let (report, rows) =
                    harness::check_concentration(model, ens, &g, lip, c, *h_variant, &grid)?;
                self.out.tails.push((report.check.clone(), rows));
                reports.push(report);
            }
            CheckSpec::Fernique { lambda, h_variant } => {
                reports.extend(harness::check_fernique(model, ens, lambda, c, *h_variant)?);
            }
            CheckSpec::Supercontractivity { lambda } => {
                let (report, rows) =
                    harness::check_supercontractivity_integrals(model, ens, lambda)?;
                self.out.integrability.push((report.check.clone(), rows));
                reports.push(report);
            }
            CheckSpec::SemigroupLogSobolev {
                t,
                x,
                battery,
                samples,
                dt,
            } => {
                let x = self.point(x);
                let mut j = 0u64;
                for phi in or_default(battery, || semigroup_ls_battery(n)) {
                    for &tv in t {
                        let s = derive_seed(seed, j);
                        j += 1;
                        let dt = dt.unwrap_or(sim_dt);
                        reports.push(harness::check_semigroup_log_sobolev(
                            model, spec, tv, &x, &phi, c, *samples, dt, s,
                        )?);
                    }
                }
            }
            CheckSpec::EpsLogSobolev { eps, battery } => {
                for phi in or_default(battery, || eps_ls_battery(n)) {
                    let (rs, betas) = harness::check_eps_log_sobolev(model, ens, &phi, eps, c)?;
                    if let Some(first) = rs.first() {
                        self.out.eps_beta.push((first.check.clone(), betas));
                    }
                    reports.extend(rs);
                }
            }
            CheckSpec::GradientEstimate {
                t,
                x,
                battery,
                samples,
                dt,
            } => {
                let x = self.point(x);
                let mut j = 0u64;
                for phi in or_default(battery, || poincare_battery(n)) {
                    for &tv in t {
                        let s = derive_seed(seed, j);
                        j += 1;
                        let dt = dt.unwrap_or(sim_dt);
                        reports.push(harness::check_gradient_estimate(
                            model, spec, tv, &x, &phi, c, *samples, dt, s,
                        )?);
                    }
                }
            }
            CheckSpec::Ultrabounded {
                t,
                lambda,
                settings,
            } => {
                reports.extend(harness::check_ultrabounded(
                    model, spec, ens, *t, *lambda, settings, seed,
                )?);
            }
            CheckSpec::VariationalBounds {
                trajectories,
                horizon,
            } => {
                let count = (*trajectories).min(ens.len()).max(1);
                let stride = (ens.len() / count).max(1);
                let starts: Vec<StateVector> =
                    (0..count).map(|i| ens.points[i * stride].clone()).collect();
                let sim = &self.scenario.config.sim;
                let config = integrator::IntegratorConfig::new(
                    sim.dt,
                    horizon.unwrap_or(sim.horizon),
                    seed,
                    1,
                )?;
                reports.extend(harness::check_variational_bounds(
                    model, spec, &starts, &config,
                )?);
            }
            CheckSpec::Estimate {
                t,
                points,
                phi,
                samples,
                dt,
            } => {
                let key = format!("estimate[phi={}]", simlab_core::Observable::label(phi));
                let mut j = 0u64;
                for (i, p) in points.iter().enumerate() {
                    let x = self.point(p);
                    for &tv in t {
                        let s = derive_seed(seed, j);
                        j += 1;
                        let est = semigroup::estimate_semigroup(
                            model,
                            spec,
                            dt.unwrap_or(sim_dt),
                            tv,
                            &x,
                            phi,
                            *samples,
                            s,
                        )?;
                        self.out
                            .estimates
                            .push(est.record(&key, &format!("x{}", i + 1)));
                    }
                }
            }
        }
        Ok(reports)
    }
}

/// Runs the scenario inside a pool sized by `SIMLAB_THREADS`. Every random
/// stream is keyed by check position and sample index, so the worker count
/// does not change any output.
pub fn run_scenario(scenario: &Scenario) -> Result<SuiteOutcome> {
    pool_from_env().install(|| run_in_current_pool(scenario))
}

pub fn run_in_current_pool(scenario: &Scenario) -> Result<SuiteOutcome> {
    let cfg = &scenario.config;
    let mut out = SuiteOutcome::default();
    if cfg.outputs.trajectory {
        let x0 = StateVector::zeros(scenario.model.n());
        out.trajectory = Some(integrator::integrate(
            &scenario.model,
            &scenario.spec,
            &scenario.integrator,
            &x0,
        )?);
    }
    let needs_ensemble = cfg.outputs.ensemble
        || cfg
            .checks
            .iter()
            .any(|c| !matches!(c, CheckSpec::Estimate { .. }));
    let ensemble = if needs_ensemble {
        build_ensemble(scenario)?
    } else {
        MeasureEnsemble {
            points: vec![],
            provenance: semigroup::Provenance::GaussianOracle,
            burn_in: 0.0,
            thinning: 0.0,
            seed: cfg.sim.seed,
            error_scheme: simlab_core::stats::ErrorScheme::Iid,
        }
    };
    let constants = ConstantsPack::for_scenario(&scenario.model, &scenario.spec)?;
    let mut ctx = Ctx {
        scenario,
        ensemble: &ensemble,
        constants,
        out,
    };
    let mut seen = std::collections::HashSet::new();
    for (j, check) in cfg.checks.iter().enumerate() {
        let seed = derive_seed(cfg.sim.seed, j as u64);
        let reports = ctx
            .run_check(check, seed)
            .unwrap_or_else(|e| vec![error_report(check, seed, &e)]);
        for mut r in reports {
            // A check listed twice would otherwise repeat its keys.
            if !seen.insert(r.check.clone()) {
                r.check = format!("{}#{j}", r.check);
                seen.insert(r.check.clone());
            }
            r.scenario = cfg.name.clone();
            r.expected_failure = cfg
                .expected_failures
                .iter()
                .any(|e| e == base_key(&r.check));
            ctx.out.reports.push(r);
        }
    }
    let mut out = ctx.out;
    if cfg.outputs.ensemble {
        out.ensemble = Some(ensemble);
    }
    Ok(out)
}
