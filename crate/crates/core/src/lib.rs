//! Numerical laboratory for singular integral operators generated by
//! Cauchy-type kernels in Clifford analysis.
//!
//! The crate evaluates the kernel family, reduces weighted `L^p` norms over
//! punctured and unbounded radial domains to exact radial integrals, computes
//! integrability thresholds in exact rational arithmetic, extrapolates Cauchy
//! principal values and applies the Teodorescu transform to grid functions.

pub mod clifford;
pub mod domain;
pub mod grid;
pub mod kernel;
pub mod norm;
pub mod quadrature;
pub mod rational;
pub mod threshold;
pub mod transform;

pub use clifford::Multivector;
pub use domain::{RadialDomain, WeightedMeasure};
pub use grid::GridFunction;
pub use kernel::{KernelFamily, KernelSpec, SingularityClass};
pub use rational::Rational;
