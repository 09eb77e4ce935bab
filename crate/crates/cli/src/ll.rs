//! Lasry–Lions property suite over a function corpus at `n ∈ {1, 2}`.

use rand_distr::{Distribution, StandardNormal};
use simlab_core::lasry_lions::{self, default_corpus, EnvelopeMode, LipschitzFunction};
use simlab_core::rng::{derive_seed, rng_for};
use simlab_core::{InequalityReport, Result, SpectralModel, StateVector};

/// Sample points per corpus function.
pub const POINTS_PER_FUNCTION: usize = 6;

pub fn unit_model(n: usize) -> Result<SpectralModel> {
    SpectralModel::diagonal(vec![-1.0; n], vec![1.0; n], simlab_core::Basis::Dirichlet)
}

fn sample_points(n: usize, count: usize, seed: u64) -> Vec<StateVector> {
    let mut rng = rng_for(seed, 0);
    (0..count)
        .map(|_| {
            StateVector(
                (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        1.5 * z
                    })
                    .collect::<Vec<f64>>(),
            )
        })
        .collect()
}

/// Property reports for every corpus function; in descent mode each function
/// also gets a descent-versus-grid agreement report at the smallest `ε`.
pub fn run_suite(eps_grid: &[f64], mode: EnvelopeMode, seed: u64) -> Result<Vec<InequalityReport>> {
    let (m1, m2) = (unit_model(1)?, unit_model(2)?);
    let corpus = default_corpus(&m1, &m2, seed);
    run_corpus(&corpus, &m1, &m2, eps_grid, mode, seed)
}

pub fn run_corpus(
    corpus: &[(usize, LipschitzFunction)],
    m1: &SpectralModel,
    m2: &SpectralModel,
    eps_grid: &[f64],
    mode: EnvelopeMode,
    seed: u64,
) -> Result<Vec<InequalityReport>> {
    let mut out = Vec::new();
    for (i, (dim, f)) in corpus.iter().enumerate() {
        let model = if *dim == 1 { m1 } else { m2 };
        let s = derive_seed(seed, i as u64);
        f.validate(model, 1000, s)?;
        let xs = sample_points(*dim, POINTS_PER_FUNCTION, s);
        let mut reports = lasry_lions::property_suite(f, eps_grid, &xs, model, mode, s)?;
        if mode == EnvelopeMode::Descent {
            let eps = eps_grid.iter().copied().fold(f64::INFINITY, f64::min);
            reports.push(lasry_lions::mode_agreement(f, eps, &xs, model, s)?);
        }
        for r in &mut reports {
            r.scenario = format!("ll_corpus_n{dim}");
        }
        out.extend(reports);
    }
    Ok(out)
}
