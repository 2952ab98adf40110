//! Throughput capacity of MIMO ad-hoc networks with MMSE receivers.
//!
//! Two independent routes to the same quantities: an analytical pipeline
//! (random-matrix η-transform, Gamma-approximated SINR, Poisson-averaged
//! capacity) and a link-level Monte Carlo simulator. Numerical code is
//! generic over [`Real`] (`f32` or `f64`); the `*64` aliases below fix `f64`.

pub mod analysis;
pub mod capacity;
pub mod detectors;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod montecarlo;
pub mod quad;
pub mod randmat;
pub mod scalar;
pub mod seed;

pub use analysis::{gamma_cdf, gamma_fit, outage_probability, solve_eta, GammaFit, SinrModel, SinrMoments};
pub use capacity::{network_capacity, optimal_density, CapacityCurve, Optimum, OutageSource};
pub use detectors::{build_realization, detector_sinr, mmse_sinr, partial_csi_sinr, zf_sinr, NetworkRealization};
pub use error::{Error, Result};
pub use geometry::{Detector, Scenario};
pub use linalg::ComplexMatrix;
pub use montecarlo::{compare, empirical_capacity, sample_sinr, ComparisonReport, EmpiricalCdf, EmpiricalOutage};
pub use randmat::{LambdaMoments, MomentCache};
pub use scalar::Real;

pub type Scenario64 = Scenario<f64>;
pub type SinrModel64 = SinrModel<f64>;
pub type NetworkRealization64 = NetworkRealization<f64>;
pub type LambdaMoments64 = LambdaMoments<f64>;
pub type GammaFit64 = GammaFit<f64>;
pub type ComplexMatrix64 = ComplexMatrix<f64>;
pub type CapacityCurve64 = CapacityCurve<f64>;
pub type EmpiricalCdf64 = EmpiricalCdf<f64>;
