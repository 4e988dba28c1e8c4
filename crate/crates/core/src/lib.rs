//! Numerical laboratory for singular N-body-type systems.
//!
//! Quasi-homogeneous and logarithmic potentials, discrete trajectories and
//! their action, a cutoff regularization, direct action minimization, an
//! adaptive integrator, collision asymptotics, averaged variations and the
//! collision-subspace lattice.

pub mod asymptotics;
pub mod clusters;
pub mod error;
pub mod integrator;
pub mod metric;
pub mod minimizer;
pub mod potentials;
pub mod quadrature;
pub mod regularization;
pub mod spline;
pub mod subspace;
pub mod trajectory;
pub mod variations;

pub use error::{Error, Result};
pub use metric::MassMetric;
pub use potentials::{Potential, PotentialSpec};
pub use subspace::Subspace;
pub use trajectory::Path;
