//! Hypersurfaces of `S^{n+1}`: exact isoparametric families for every `n`,
//! and sampled doubly periodic tori in `S^3` for the discrete pipeline.

mod immersion;
mod sample_file;
mod surface;

pub use immersion::{
    clifford_immersion, control_noncmc_immersion, umbilical_sphere_immersion,
    validate_immersion, DerivativeSource, ImmersionGrid, ImmersionResiduals, Vec4,
    CONTROL_MODULATION, CONTROL_R0,
};
pub use sample_file::{read_sample_file, write_sample_file};
pub use surface::{compute_surface_geometry, Orientation, SurfaceGeometry, EPS_DEGENERATE};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Clifford hypersurface `S^p(r) x S^q(s)` in `S^{p+q+1}`, `r^2 + s^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CliffordSpec {
    pub p: usize,
    pub q: usize,
    pub r: f64,
}

impl CliffordSpec {
    pub fn new(p: usize, q: usize, r: f64) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidSpec(format!(
                "Clifford factor dimensions must be >= 1 (p = {p}, q = {q})"
            )));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "Clifford radius must lie in (0, 1), got {r}"
            )));
        }
        Ok(Self { p, q, r })
    }

    pub fn from_r2(p: usize, q: usize, r2: f64) -> Result<Self> {
        if !(r2 > 0.0 && r2 < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "Clifford r^2 must lie in (0, 1), got {r2}"
            )));
        }
        Self::new(p, q, r2.sqrt())
    }

    pub fn s(&self) -> f64 {
        (1.0 - self.r * self.r).sqrt()
    }

    pub fn r2(&self) -> f64 {
        self.r * self.r
    }

    /// Hypersurface dimension `n = p + q`.
    pub fn n(&self) -> usize {
        self.p + self.q
    }

    pub fn scalars(&self) -> CliffordScalars {
        clifford_scalars(self)
    }

    /// `r^2 = p/n`, the minimal member of the family.
    pub fn minimal(p: usize, q: usize) -> Result<Self> {
        Self::from_r2(p, q, p as f64 / (p + q) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliffordScalars {
    pub h: f64,
    pub a2: f64,
    /// `(value, multiplicity)` pairs.
    pub principal_curvatures: Vec<(f64, usize)>,
}

/// Mean curvature, `|A|^2` and principal curvatures of a Clifford product,
/// with the normal chosen so that the `S^p(r)` factor has curvature `s/r`.
pub fn clifford_scalars(spec: &CliffordSpec) -> CliffordScalars {
    let (r, s) = (spec.r, spec.s());
    let (p, q) = (spec.p as f64, spec.q as f64);
    let k1 = s / r;
    let k2 = -r / s;
    CliffordScalars {
        h: (p * k1 + q * k2) / (p + q),
        a2: p * k1 * k1 + q * k2 * k2,
        principal_curvatures: vec![(k1, spec.p), (k2, spec.q)],
    }
}

/// Geodesic sphere of radius `rho` (chordal, in `(0, 1]`) in `S^{n+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UmbilicalSpec {
    pub n: usize,
    pub rho: f64,
}

impl UmbilicalSpec {
    pub fn new(n: usize, rho: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSpec(format!("umbilical dimension must be >= 2, got {n}")));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "umbilical radius must lie in (0, 1], got {rho}"
            )));
        }
        Ok(Self { n, rho })
    }

    /// Distance of the sphere's hyperplane from the origin, `sqrt(1 - rho^2)`.
    pub fn c(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }
}

/// `(H, |A|^2)` for a geodesic sphere; `|A|^2 = nH^2` exactly.
pub fn umbilical_scalars(spec: &UmbilicalSpec) -> (f64, f64) {
    let h = spec.c() / spec.rho;
    (h, spec.n as f64 * h * h)
}

/// Fixed vector of the ambient space `R^{n+2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientVector(pub Vec<f64>);

impl AmbientVector {
    pub fn zero(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.is_finite())
    }
}

impl From<Vec<f64>> for AmbientVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}
