//! Weak stability index of constant-mean-curvature hypersurfaces of round
//! spheres.
//!
//! The crate has two halves. Closed-form isoparametric families (Clifford
//! products `S^p(r) x S^q(s)` and geodesic spheres) carry exact Jacobi
//! spectra for every dimension. Sampled doubly periodic tori in `S^3` go
//! through a discrete pipeline: surface geometry, a bilinear
//! Laplace-Beltrami discretization, inertia-based index counting, and a
//! certificate built from the support-function test family
//! `h_u = f_u + c(H) l_u`.

pub mod error;
pub mod geometry;
pub mod laplace;
pub mod linalg;
pub mod spectrum;
pub mod testfn;

pub use error::{Error, Result};
pub use geometry::{
    AmbientVector, CliffordSpec, ImmersionGrid, Orientation, SurfaceGeometry, UmbilicalSpec,
};
pub use laplace::DiscreteForms;
pub use spectrum::{IndexReport, SpectrumReport};
pub use testfn::{SupportFunctions, TheoremCertificate};
