//! Spectral-Galerkin simulation of dissipative stochastic PDEs
//! `dX = [AX + F(X)]dt + R dW` and Monte Carlo verification of the
//! functional inequalities satisfied by their transition semigroups.

pub mod drift;
pub mod error;
pub mod harness;
pub mod integrator;
pub mod lasry_lions;
pub mod quadrature;
pub mod rng;
pub mod semigroup;
pub mod spectral;
pub mod stats;

pub use drift::{DriftKind, DriftSpec, PowerProfile, SuperDissipativity};
pub use error::{Result, SimError};
pub use harness::{ConstantsPack, InequalityReport, PaperEq, Relation, Verdict};
pub use integrator::{IntegratorConfig, Trajectory};
pub use lasry_lions::{EnvelopeMode, LipschitzFunction};
pub use semigroup::{MeasureEnsemble, Observable, TestFunction};
pub use spectral::{Basis, Smoothing, SpectralModel, StateVector};
