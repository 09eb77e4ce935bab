//! Built-in scenarios.

use crate::config::{
    CheckSpec, DriftConfig, KernelConfig, ModelConfig, OutputConfig, RadialConfig, SamplerConfig,
    SamplerKind, ScenarioConfig, SimConfig, SuperConfig,
};
use simlab_core::drift::fit_super_dissipativity;
use simlab_core::harness::{EvalMode, HyperMode, UltraSettings};
use simlab_core::{Basis, DriftSpec, PowerProfile, TestFunction};
use std::f64::consts::PI;
use std::path::PathBuf;

pub const PRESETS: [(&str, &str); 4] = [
    (
        "ou",
        "one-mode Ornstein-Uhlenbeck, exact Gaussian oracles and two negative controls",
    ),
    (
        "reaction_diffusion_cubic",
        "b(z) = z^3 on [0, 1], n = 8, Gibbs ensemble (smoke profile)",
    ),
    (
        "radial",
        "radial drift F(x) = -2f'(|x|^2)x with f(s) = s^2/2, n = 8",
    ),
    (
        "kernel_poly",
        "rank-2 polynomial kernel drift with zeta_F = -1/2, n = 8",
    ),
];

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    match name {
        "ou" => Some(ou()),
        "reaction_diffusion_cubic" => Some(reaction_diffusion_cubic()),
        "radial" => Some(radial()),
        "kernel_poly" => Some(kernel_poly()),
        _ => None,
    }
}

fn sim(seed: u64) -> SimConfig {
    SimConfig {
        dt: 1e-3,
        horizon: 1.0,
        seed,
        record_stride: 10,
    }
}

fn laplacian(n: usize) -> ModelConfig {
    ModelConfig {
        n,
        beta: 0.0,
        basis: Basis::Dirichlet,
        grid_factor: 2,
        eigenvalues: None,
        r: None,
    }
}

fn super_config(spec: &DriftSpec) -> Option<SuperConfig> {
    let s = fit_super_dissipativity(spec, 2.0, 4.0, 81).ok()?;
    Some(SuperConfig {
        a: s.a,
        phi: s.phi.to_config_string(),
    })
}

/// `A = −1`, `R = 1`, `F = 0`: `ν = N(0, 1/2)` and `C = 1/2`.
pub fn ou() -> ScenarioConfig {
    ScenarioConfig {
        name: "ou".into(),
        output_dir: PathBuf::from("out/ou"),
        expected_failures: vec!["supercontractivity".into(), "ultrabounded_a".into()],
        model: ModelConfig {
            eigenvalues: Some(vec![-1.0]),
            r: Some(vec![1.0]),
            ..laplacian(1)
        },
        drift: DriftConfig {
            kind: "zero".into(),
            b_coeffs: None,
            zeta_f: 0.0,
            zeta_r: Some(-1.0),
            super_: None,
            kernel: None,
            radial: None,
        },
        sim: sim(20_240_601),
        sampler: SamplerConfig {
            kind: SamplerKind::Gaussian,
            count: 1_000_000,
            burn_in: None,
            thinning: None,
            ula_step: None,
        },
        outputs: OutputConfig::default(),
        checks: vec![
            CheckSpec::LogSobolev {
                p: vec![1.0, 2.0],
                battery: vec![],
            },
            CheckSpec::Poincare { battery: vec![] },
            CheckSpec::Hypercontractivity {
                t: 3f64.ln(),
                q: 2.0,
                battery: vec![],
                mode: HyperMode::Exact,
            },
            CheckSpec::Harnack {
                p: vec![1.5, 2.0, 4.0],
                t: vec![0.1, 0.5, 1.0],
                h: vec![0.1, 0.5, 1.0],
                x: vec![0.5],
                battery: vec![],
                mode: EvalMode::Oracle,
            },
            CheckSpec::Harnack {
                p: vec![1.5, 2.0, 4.0],
                t: vec![0.1, 0.5, 1.0],
                h: vec![0.1, 0.5, 1.0],
                x: vec![0.5],
                battery: vec![],
                mode: EvalMode::MonteCarlo {
                    samples: 20_000,
                    dt: 1e-3,
                },
            },
            CheckSpec::Concentration {
                coordinate: 1,
                h_variant: false,
                points: 40,
            },
            CheckSpec::Fernique {
                lambda: vec![0.0, 0.05, 1.0 / (8.0 * 2f64.sqrt())],
                h_variant: false,
            },
            CheckSpec::Supercontractivity {
                lambda: vec![0.25, 0.5, 1.5, 2.0],
            },
            CheckSpec::SemigroupLogSobolev {
                t: vec![0.1, 0.5, 1.0],
                x: vec![0.5],
                battery: vec![],
                samples: 20_000,
                dt: None,
            },
            CheckSpec::GradientEstimate {
                t: vec![0.1, 0.5, 1.0],
                x: vec![0.5],
                battery: vec![],
                samples: 20_000,
                dt: None,
            },
            CheckSpec::Ultrabounded {
                t: 1.0,
                lambda: 0.25,
                settings: UltraSettings::default(),
            },
            CheckSpec::VariationalBounds {
                trajectories: 100,
                horizon: None,
            },
            CheckSpec::Estimate {
                t: vec![0.5, 1.0],
                points: vec![vec![0.0], vec![0.5]],
                phi: TestFunction::tanh_coordinate(1, 0, 1.0, 0.0),
                samples: 20_000,
                dt: None,
            },
        ],
    }
}

pub fn reaction_diffusion_cubic() -> ScenarioConfig {
    let zeta_r = -PI * PI;
    let spec = DriftSpec::cubic(zeta_r);
    ScenarioConfig {
        name: "reaction_diffusion_cubic".into(),
        output_dir: PathBuf::from("out/reaction_diffusion_cubic"),
        expected_failures: vec![],
        model: laplacian(8),
        drift: DriftConfig {
            kind: "nemytskii".into(),
            b_coeffs: Some(vec![0.0, 0.0, 0.0, 1.0]),
            zeta_f: 0.0,
            zeta_r: Some(zeta_r),
            super_: super_config(&spec),
            kernel: None,
            radial: None,
        },
        sim: sim(20_240_602),
        sampler: SamplerConfig {
            kind: SamplerKind::Gibbs,
            count: 10_000,
            burn_in: None,
            thinning: None,
            ula_step: None,
        },
        outputs: OutputConfig::default(),
        checks: vec![
            CheckSpec::LogSobolev {
                p: vec![1.0, 2.0],
                battery: vec![],
            },
            CheckSpec::Poincare { battery: vec![] },
            CheckSpec::Hypercontractivity {
                t: 0.1,
                q: 2.0,
                battery: vec![],
                mode: HyperMode::Nested {
                    outer: 200,
                    inner: 100,
                    budget: 20_000,
                    dt: 1e-3,
                },
            },
            CheckSpec::Harnack {
                p: vec![2.0],
                t: vec![0.5],
                h: vec![0.1, 0.5],
                x: vec![],
                battery: vec![],
                mode: EvalMode::MonteCarlo {
                    samples: 4000,
                    dt: 1e-3,
                },
            },
            CheckSpec::Concentration {
                coordinate: 1,
                h_variant: false,
                points: 40,
            },
            CheckSpec::Fernique {
                lambda: vec![0.5, 1.0, 2.0],
                h_variant: false,
            },
            CheckSpec::Supercontractivity {
                lambda: vec![0.5, 1.0, 2.0, 5.0, 10.0],
            },
            CheckSpec::SemigroupLogSobolev {
                t: vec![0.1, 0.5, 1.0],
                x: vec![],
                battery: vec![],
                samples: 2000,
                dt: None,
            },
            CheckSpec::EpsLogSobolev {
                eps: vec![0.05, 0.1, 0.5],
                battery: vec![],
            },
            CheckSpec::GradientEstimate {
                t: vec![0.1, 0.5],
                x: vec![],
                battery: vec![],
                samples: 2000,
                dt: None,
            },
            CheckSpec::Ultrabounded {
                t: 1.0,
                lambda: 1.0,
                settings: UltraSettings::default(),
            },
            CheckSpec::VariationalBounds {
                trajectories: 100,
                horizon: None,
            },
        ],
    }
}

pub fn radial() -> ScenarioConfig {
    let zeta_r = -PI * PI;
    let f = PowerProfile::new(0.5, 2.0);
    let spec = DriftSpec::radial(f, 0.0, zeta_r).expect("valid radial profile");
    ScenarioConfig {
        name: "radial".into(),
        output_dir: PathBuf::from("out/radial"),
        expected_failures: vec![],
        model: laplacian(8),
        drift: DriftConfig {
            kind: "radial".into(),
            b_coeffs: None,
            zeta_f: 0.0,
            zeta_r: Some(zeta_r),
            super_: super_config(&spec),
            kernel: None,
            radial: Some(RadialConfig {
                f: f.to_config_string(),
            }),
        },
        sim: sim(20_240_603),
        sampler: SamplerConfig {
            kind: SamplerKind::Ergodic,
            count: 5000,
            burn_in: None,
            thinning: None,
            ula_step: None,
        },
        outputs: OutputConfig::default(),
        checks: vec![
            CheckSpec::LogSobolev {
                p: vec![1.0, 2.0],
                battery: vec![],
            },
            CheckSpec::Poincare { battery: vec![] },
            CheckSpec::Fernique {
                lambda: vec![0.5, 1.0],
                h_variant: false,
            },
            CheckSpec::Supercontractivity {
                lambda: vec![0.5, 1.0, 2.0],
            },
            CheckSpec::SemigroupLogSobolev {
                t: vec![0.5],
                x: vec![],
                battery: vec![],
                samples: 2000,
                dt: None,
            },
            CheckSpec::GradientEstimate {
                t: vec![0.1, 0.5],
                x: vec![],
                battery: vec![],
                samples: 2000,
                dt: None,
            },
            CheckSpec::Ultrabounded {
                t: 1.0,
                lambda: 1.0,
                settings: UltraSettings::default(),
            },
            CheckSpec::VariationalBounds {
                trajectories: 50,
                horizon: None,
            },
        ],
    }
}

pub fn kernel_poly() -> ScenarioConfig {
    let zeta_f = -0.5;
    ScenarioConfig {
        name: "kernel_poly".into(),
        output_dir: PathBuf::from("out/kernel_poly"),
        expected_failures: vec![],
        model: laplacian(8),
        drift: DriftConfig {
            kind: "kernel".into(),
            b_coeffs: None,
            zeta_f,
            zeta_r: Some(-PI * PI + zeta_f),
            super_: None,
            kernel: Some(KernelConfig {
                rank: 2,
                kappa: Some(vec![1.0, 0.5]),
            }),
            radial: None,
        },
        sim: sim(20_240_604),
        sampler: SamplerConfig {
            kind: SamplerKind::Ergodic,
            count: 5000,
            burn_in: None,
            thinning: None,
            ula_step: None,
        },
        outputs: OutputConfig::default(),
        checks: vec![
            CheckSpec::LogSobolev {
                p: vec![2.0],
                battery: vec![],
            },
            CheckSpec::Poincare { battery: vec![] },
            CheckSpec::Concentration {
                coordinate: 1,
                h_variant: false,
                points: 40,
            },
            CheckSpec::SemigroupLogSobolev {
                t: vec![0.5],
                x: vec![],
                battery: vec![],
                samples: 2000,
                dt: None,
            },
            CheckSpec::GradientEstimate {
                t: vec![0.1, 0.5],
                x: vec![],
                battery: vec![],
                samples: 2000,
                dt: None,
            },
            CheckSpec::VariationalBounds {
                trajectories: 50,
                horizon: None,
            },
        ],
    }
}
