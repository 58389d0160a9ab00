//! Gap probabilities E₂(0;I) of the Gaussian, Laguerre and Jacobi unitary
//! ensembles, computed four ways: Nyström discretization of the Fredholm
//! determinant, the Tracy–Widom ODE system, Painlevé IV/V/VI transcendents,
//! and direct Monte-Carlo sampling of random matrices.

pub mod error;
pub mod fredholm;
pub mod harness;
pub mod mc;
pub mod ode;
pub mod painleve;
pub mod quad;
pub mod tw;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
pub use weights::{make_ensemble, EnsembleSpec, Kind};
