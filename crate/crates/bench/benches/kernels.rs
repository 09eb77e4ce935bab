use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use simlab_core::harness::{self, ConstantsPack};
use simlab_core::integrator::{self, ExpEulerStep, IntegratorConfig};
use simlab_core::lasry_lions::{envelope, EnvelopeMode, LipKind, LipschitzFunction};
use simlab_core::rng::rng_for;
use simlab_core::semigroup::{gaussian_oracle_ensemble, sample_endpoints};
use simlab_core::{DriftSpec, SpectralModel, StateVector, TestFunction};

fn exp_euler(c: &mut Criterion) {
    let mut group = c.benchmark_group("exp_euler_step");
    for n in [8usize, 16, 32] {
        let model = SpectralModel::dirichlet_laplacian(n, 0.0).unwrap();
        let spec = DriftSpec::cubic(model.zeta_a());
        let step = ExpEulerStep::new(&model, 1e-3);
        let x0 = StateVector::zeros(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut rng = rng_for(1, 0);
            b.iter(|| {
                integrator::integrate_endpoint(&model, &spec, &step, 100, black_box(&x0), &mut rng)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn trajectory(c: &mut Criterion) {
    let model = SpectralModel::dirichlet_laplacian(8, 0.0).unwrap();
    let spec = DriftSpec::cubic(model.zeta_a());
    let config = IntegratorConfig::new(1e-3, 1.0, 3, 10).unwrap();
    let x0 = StateVector::zeros(8);
    c.bench_function("integrate_cubic_n8_t1", |b| {
        b.iter(|| integrator::integrate(&model, &spec, &config, black_box(&x0)).unwrap())
    });
}

fn endpoints(c: &mut Criterion) {
    let model = SpectralModel::dirichlet_laplacian(8, 0.0).unwrap();
    let spec = DriftSpec::cubic(model.zeta_a());
    let x0 = StateVector::zeros(8);
    c.bench_function("endpoints_cubic_1000_paths_t0.1", |b| {
        b.iter(|| sample_endpoints(&model, &spec, 1e-3, 0.1, black_box(&x0), 1000, 5).unwrap())
    });
}

fn log_sobolev(c: &mut Criterion) {
    let model =
        SpectralModel::diagonal(vec![-1.0], vec![1.0], simlab_core::Basis::Dirichlet).unwrap();
    let ens = gaussian_oracle_ensemble(&model, 100_000, 9);
    let consts = ConstantsPack::dissipative(-1.0, 1.0).unwrap();
    let phi = TestFunction::tanh_coordinate(1, 0, 1.0, 2.0);
    c.bench_function("log_sobolev_ou_1e5", |b| {
        b.iter(|| harness::check_log_sobolev(&model, black_box(&ens), &phi, 2.0, &consts).unwrap())
    });
}

fn lasry_lions(c: &mut Criterion) {
    let model = SpectralModel::diagonal(vec![-1.0; 2], vec![1.0; 2], simlab_core::Basis::Dirichlet)
        .unwrap();
    let f = LipschitzFunction::new(
        "abs",
        &model,
        LipKind::MaxAffine {
            slopes: vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
            offsets: vec![0.0, 0.0],
            clamp: None,
        },
    );
    let x = StateVector(vec![0.3, -0.2]);
    let mut group = c.benchmark_group("lasry_lions_envelope_n2");
    group.sample_size(10);
    for (name, mode) in [
        ("grid", EnvelopeMode::Grid),
        ("descent", EnvelopeMode::Descent),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| envelope(&f, 0.1, black_box(&x), &model, mode, 1).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    exp_euler,
    trajectory,
    endpoints,
    log_sobolev,
    lasry_lions
);
criterion_main!(benches);
