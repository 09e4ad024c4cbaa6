use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::immersion::{dot4, DerivativeSource, ImmersionGrid, Vec4};
use super::AmbientVector;
use crate::{Error, Result};

/// Metric determinant at or below which a node is treated as degenerate.
pub const EPS_DEGENERATE: f64 = 1e-12;

/// CMC tolerance for grids whose derivatives are analytic.
const CMC_TOL_ANALYTIC: f64 = 1e-8;
/// CMC tolerance for differenced grids at spacing `2 pi / 64`; scales as `h^2`.
const CMC_TOL_FD_AT_64: f64 = 1e-3;

/// Normal orientation. `Standard` makes `(phi, phi_u, phi_v, nu)` a
/// positively oriented frame of `R^4`; `Flipped` negates `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    #[default]
    Standard,
    Flipped,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Standard => 1.0,
            Orientation::Flipped => -1.0,
        }
    }
}

/// Pointwise geometry of a sampled surface in `S^3` (`n = 2`).
///
/// Symmetric 2x2 tensors are stored as `[uu, uv, vv]`. The second
/// fundamental form is `h_ab = phi_ab . nu`, so that `2H = tr(g^-1 h)` makes
/// `Delta phi = -2 phi + 2 H nu` hold for either orientation.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    pub grid: ImmersionGrid,
    pub orientation: Orientation,
    pub metric: Vec<[f64; 3]>,
    pub metric_inv: Vec<[f64; 3]>,
    pub sqrt_det: Vec<f64>,
    pub normal: Vec<Vec4>,
    pub second_form: Vec<[f64; 3]>,
    pub mean_curvature: Vec<f64>,
    pub a2: Vec<f64>,
    /// Quadrature weight `sqrt(det g) hu hv`.
    pub weight: Vec<f64>,
    /// Area-weighted mean of the nodal mean curvature.
    pub h_mean: f64,
    /// `max |H_i - h_mean|`
    pub h_max_dev: f64,
    pub cmc_tol: f64,
    pub h_constant: bool,
}

/// Vector `c` with `det[a, b, d, x] = c . x` for every `x`.
fn cross4(a: &Vec4, b: &Vec4, d: &Vec4) -> Vec4 {
    let minor = |skip: usize| -> f64 {
        let rows: Vec<usize> = (0..4).filter(|&k| k != skip).collect();
        let m = |r: usize, c: usize| -> f64 {
            let row = rows[r];
            match c {
                0 => a[row],
                1 => b[row],
                _ => d[row],
            }
        };
        m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
            - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
    };
    [-minor(0), minor(1), -minor(2), minor(3)]
}

fn default_cmc_tol(grid: &ImmersionGrid) -> f64 {
    match grid.derivatives {
        DerivativeSource::Analytic => CMC_TOL_ANALYTIC,
        DerivativeSource::FiniteDifference => {
            let h = grid.hu().max(grid.hv());
            let h64 = 2.0 * PI / 64.0;
            CMC_TOL_FD_AT_64 * (h / h64).powi(2)
        }
    }
}

pub fn compute_surface_geometry(grid: &ImmersionGrid, orientation: Orientation) -> Result<SurfaceGeometry> {
    let n = grid.len();
    let cell = grid.hu() * grid.hv();
    let sign = orientation.sign();
    let mut geom = SurfaceGeometry {
        grid: grid.clone(),
        orientation,
        metric: Vec::with_capacity(n),
        metric_inv: Vec::with_capacity(n),
        sqrt_det: Vec::with_capacity(n),
        normal: Vec::with_capacity(n),
        second_form: Vec::with_capacity(n),
        mean_curvature: Vec::with_capacity(n),
        a2: Vec::with_capacity(n),
        weight: Vec::with_capacity(n),
        h_mean: 0.0,
        h_max_dev: 0.0,
        cmc_tol: default_cmc_tol(grid),
        h_constant: false,
    };
    for k in 0..n {
        let (p, pu, pv) = (&grid.pos[k], &grid.du[k], &grid.dv[k]);
        let g = [dot4(pu, pu), dot4(pu, pv), dot4(pv, pv)];
        let det = g[0] * g[2] - g[1] * g[1];
        if !(det > EPS_DEGENERATE) {
            return Err(Error::DegenerateMetric { i: k / grid.nv, j: k % grid.nv, det });
        }
        let gi = [g[2] / det, -g[1] / det, g[0] / det];
        let c = cross4(p, pu, pv);
        let cn = dot4(&c, &c).sqrt();
        let nu = [sign * c[0] / cn, sign * c[1] / cn, sign * c[2] / cn, sign * c[3] / cn];
        let h = [dot4(&grid.duu[k], &nu), dot4(&grid.duv[k], &nu), dot4(&grid.dvv[k], &nu)];
        // shape operator S = g^-1 h
        let s00 = gi[0] * h[0] + gi[1] * h[1];
        let s01 = gi[0] * h[1] + gi[1] * h[2];
        let s10 = gi[1] * h[0] + gi[2] * h[1];
        let s11 = gi[1] * h[1] + gi[2] * h[2];
        geom.mean_curvature.push(0.5 * (s00 + s11));
        geom.a2.push(s00 * s00 + 2.0 * s01 * s10 + s11 * s11);
        geom.sqrt_det.push(det.sqrt());
        geom.weight.push(det.sqrt() * cell);
        geom.metric.push(g);
        geom.metric_inv.push(gi);
        geom.normal.push(nu);
        geom.second_form.push(h);
    }
    let area: f64 = geom.weight.iter().sum();
    geom.h_mean = geom.mean_curvature.iter().zip(&geom.weight).map(|(h, w)| h * w).sum::<f64>() / area;
    geom.h_max_dev = geom.mean_curvature.iter().fold(0.0f64, |m, h| m.max((h - geom.h_mean).abs()));
    geom.h_constant = geom.h_max_dev <= geom.cmc_tol;
    Ok(geom)
}

impl SurfaceGeometry {
    /// Hypersurface dimension.
    pub const N: usize = 2;

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.weight.iter().sum()
    }

    /// Overrides the CMC tolerance and re-evaluates the constancy flag.
    pub fn with_cmc_tol(mut self, tol: f64) -> Self {
        self.cmc_tol = tol;
        self.h_constant = self.h_max_dev <= tol;
        self
    }

    /// Range of `A2 - n H^2` over the nodes: `(min, max)`.
    pub fn umbilic_excess(&self) -> (f64, f64) {
        let n = Self::N as f64;
        self.a2.iter().zip(&self.mean_curvature).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, h)| {
            let e = a - n * h * h;
            (lo.min(e), hi.max(e))
        })
    }

    /// Height function `l_v = phi . v` at every node.
    pub fn position_support(&self, v: &AmbientVector) -> Vec<f64> {
        self.grid.pos.iter().map(|p| v.dot(p)).collect()
    }

    /// Support function `f_v = nu . v` at every node.
    pub fn normal_support(&self, v: &AmbientVector) -> Vec<f64> {
        self.normal.iter().map(|nu| v.dot(nu)).collect()
    }

    /// The same surface with the opposite normal.
    pub fn flipped(&self) -> Self {
        let mut g = self.clone();
        g.orientation = match self.orientation {
            Orientation::Standard => Orientation::Flipped,
            Orientation::Flipped => Orientation::Standard,
        };
        for nu in &mut g.normal {
            for x in nu.iter_mut() {
                *x = -*x;
            }
        }
        for h in &mut g.second_form {
            for x in h.iter_mut() {
                *x = -*x;
            }
        }
        for h in &mut g.mean_curvature {
            *h = -*h;
        }
        g.h_mean = -g.h_mean;
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        clifford_immersion, control_noncmc_immersion, umbilical_sphere_immersion, CliffordSpec,
        UmbilicalSpec,
    };

    fn clifford(r2: f64, n: usize, o: Orientation) -> SurfaceGeometry {
        let g = clifford_immersion(&CliffordSpec::from_r2(1, 1, r2).unwrap(), n, n).unwrap();
        compute_surface_geometry(&g, o).unwrap()
    }

    #[test]
    fn cross4_is_orthogonal_and_oriented() {
        let a = [0.3, -0.2, 0.9, 0.1];
        let b = [0.5, 0.4, -0.1, 0.7];
        let d = [-0.6, 0.2, 0.3, 0.8];
        let c = cross4(&a, &b, &d);
        for v in [&a, &b, &d] {
            assert!(dot4(&c, v).abs() < 1e-15);
        }
        // det[a, b, d, c] = |c|^2 > 0
        assert!(dot4(&c, &c) > 0.0);
        let e0 = cross4(&[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]);
        // det[e1, e2, e3, e0] = -1
        assert_eq!(e0, [-1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn clifford_minimal_pointwise() {
        let geo = clifford(0.5, 24, Orientation::Standard);
        for k in 0..geo.len() {
            assert!(geo.mean_curvature[k].abs() < 1e-10);
            assert!((geo.a2[k] - 2.0).abs() < 1e-10);
        }
        assert!(geo.h_constant);
        // node (0, 0): nu = (s, 0, -r, 0)
        let h = 0.5f64.sqrt();
        let nu = geo.normal[0];
        assert!((nu[0] - h).abs() < 1e-15 && (nu[2] + h).abs() < 1e-15);
    }

    #[test]
    fn clifford_r2_point_two_matches_scalars() {
        let geo = clifford(0.2, 24, Orientation::Standard);
        for k in 0..geo.len() {
            assert!((geo.mean_curvature[k] + 0.75).abs() < 1e-10);
            assert!((geo.a2[k] - 4.25).abs() < 1e-10);
        }
        let flipped = clifford(0.2, 24, Orientation::Flipped);
        assert!((flipped.h_mean - 0.75).abs() < 1e-12);
        assert_eq!(flipped.a2, geo.a2);
    }

    #[test]
    fn normal_invariants_and_weights() {
        let geo = clifford(0.2, 64, Orientation::Standard);
        let grid = &geo.grid;
        for k in 0..geo.len() {
            let nu = &geo.normal[k];
            assert!((dot4(nu, nu) - 1.0).abs() < 1e-14);
            assert!(dot4(nu, &grid.pos[k]).abs() < 1e-14);
            assert!(dot4(nu, &grid.du[k]).abs() < 1e-14);
            assert!(dot4(nu, &grid.dv[k]).abs() < 1e-14);
        }
        let w = 0.4 * (2.0 * PI / 64.0).powi(2);
        assert!((geo.weight[17] - w).abs() < 1e-15);
        assert!((geo.area() - 4.0 * PI * PI * 0.4).abs() < 1e-11);
    }

    #[test]
    fn flipped_matches_recomputed() {
        let a = clifford(0.3, 16, Orientation::Standard).flipped();
        let b = clifford(0.3, 16, Orientation::Flipped);
        assert_eq!(a.normal, b.normal);
        assert_eq!(a.mean_curvature, b.mean_curvature);
    }

    #[test]
    fn control_torus_is_not_cmc() {
        let g = control_noncmc_immersion(crate::geometry::CONTROL_R0, 64, 64).unwrap();
        let geo = compute_surface_geometry(&g, Orientation::Standard).unwrap();
        assert!(!geo.h_constant);
        assert!(geo.h_max_dev > 0.1, "deviation {}", geo.h_max_dev);
        assert!(geo.umbilic_excess().0 > -1e-9);
    }

    #[test]
    fn sampled_sphere_is_umbilical() {
        let spec = UmbilicalSpec::new(2, 0.8).unwrap();
        let g = umbilical_sphere_immersion(&spec, 32, 32).unwrap();
        let geo = compute_surface_geometry(&g, Orientation::Standard).unwrap();
        let (lo, hi) = geo.umbilic_excess();
        assert!(lo.abs() < 1e-12 && hi.abs() < 1e-12, "{lo} {hi}");
        for h in &geo.mean_curvature {
            assert!((h.abs() - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_metric_names_node() {
        let mut g = clifford_immersion(&CliffordSpec::from_r2(1, 1, 0.5).unwrap(), 8, 8).unwrap();
        let k = g.idx(3, 5);
        g.du[k] = [0.0; 4];
        match compute_surface_geometry(&g, Orientation::Standard) {
            Err(Error::DegenerateMetric { i, j, .. }) => assert_eq!((i, j), (3, 5)),
            other => panic!("expected degenerate metric, got {other:?}"),
        }
    }
}
