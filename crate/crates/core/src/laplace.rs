//! Quadrature and the discrete Laplace-Beltrami operator on a sampled torus.
//!
//! Stiffness comes from bilinear elements on the periodic parameter grid.
//! Each cell uses one metric, the average of its four corner metrics, and
//! the element integral of that constant-coefficient form is computed
//! exactly (2x2 Gauss). Mass is lumped to the nodal weights
//! `sqrt(det g) hu hv`. The stiffness represents `+int |grad f|^2`; the
//! Laplacian with the geometer's sign is `-M^-1 K`.

use serde::{Deserialize, Serialize};

use crate::geometry::{AmbientVector, SurfaceGeometry};
use crate::linalg::{self, SparseMatrix};

#[derive(Debug, Clone)]
pub struct DiscreteForms {
    pub stiffness: SparseMatrix,
    /// Lumped (diagonal) mass.
    pub mass: Vec<f64>,
}

/// Gradients of the bilinear shape functions on the unit square at `(x, y)`,
/// corner order `(0,0), (1,0), (0,1), (1,1)`.
fn shape_gradients(x: f64, y: f64) -> [[f64; 2]; 4] {
    [[-(1.0 - y), -(1.0 - x)], [1.0 - y, -x], [-y, 1.0 - x], [y, x]]
}

/// Element stiffness for the constant coefficient tensor `c = [uu, uv, vv]`
/// on a `hu x hv` cell.
fn element_stiffness(c: [f64; 3], hu: f64, hv: f64) -> [[f64; 4]; 4] {
    let g = 0.5 / 3f64.sqrt();
    let pts = [0.5 - g, 0.5 + g];
    let mut k = [[0.0; 4]; 4];
    for &x in &pts {
        for &y in &pts {
            let grads = shape_gradients(x, y);
            for a in 0..4 {
                let (au, av) = (grads[a][0] / hu, grads[a][1] / hv);
                for b in a + 1..4 {
                    let (bu, bv) = (grads[b][0] / hu, grads[b][1] / hv);
                    k[a][b] += 0.25 * hu * hv * (c[0] * au * bu + c[1] * (au * bv + av * bu) + c[2] * av * bv);
                }
            }
        }
    }
    for a in 0..4 {
        for b in a + 1..4 {
            k[b][a] = k[a][b];
        }
    }
    // rows sum to zero: constants are in the kernel
    for a in 0..4 {
        k[a][a] = -(0..4).filter(|&b| b != a).map(|b| k[a][b]).sum::<f64>();
    }
    k
}

pub fn assemble_forms(geom: &SurfaceGeometry) -> DiscreteForms {
    let grid = &geom.grid;
    let (nu, nv) = (grid.nu, grid.nv);
    let (hu, hv) = (grid.hu(), grid.hv());
    let mut trip = Vec::with_capacity(16 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let corners = [grid.idx(i, j), grid.idx(i + 1, j), grid.idx(i, j + 1), grid.idx(i + 1, j + 1)];
            let mut g = [0.0; 3];
            for &c in &corners {
                for a in 0..3 {
                    g[a] += 0.25 * geom.metric[c][a];
                }
            }
            let det = g[0] * g[2] - g[1] * g[1];
            let sq = det.sqrt();
            let coef = [sq * g[2] / det, -sq * g[1] / det, sq * g[0] / det];
            let ke = element_stiffness(coef, hu, hv);
            for a in 0..4 {
                for b in 0..4 {
                    trip.push((corners[a], corners[b], ke[a][b]));
                }
            }
        }
    }
    DiscreteForms {
        stiffness: linalg::sparse_from_triplets(nu * nv, &trip),
        mass: geom.weight.clone(),
    }
}

impl DiscreteForms {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// `f^T K f`, the discrete Dirichlet energy.
    pub fn dirichlet_energy(&self, f: &[f64]) -> f64 {
        linalg::bilinear(&self.stiffness, f, f)
    }
}

/// `sum_i w_i f_i`
pub fn integrate(geom: &SurfaceGeometry, f: &[f64]) -> f64 {
    geom.weight.iter().zip(f).map(|(w, x)| w * x).sum()
}

/// `-M^-1 K f`, approximating the Laplace-Beltrami operator.
pub fn apply_laplacian(forms: &DiscreteForms, f: &[f64]) -> Vec<f64> {
    linalg::matvec(&forms.stiffness, f)
        .into_iter()
        .zip(&forms.mass)
        .map(|(kf, w)| -kf / w)
        .collect()
}

/// Max-norm residuals of `Delta l_v = -n l_v + nH f_v` (`r1`) and
/// `Delta f_v = -|A|^2 f_v + nH l_v` (`r2`), using the area-weighted mean
/// `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub r1: f64,
    pub r2: f64,
    /// Set when the input is not CMC; residuals then measure the CMC defect.
    pub warning: Option<String>,
}

pub fn identity_residuals(geom: &SurfaceGeometry, forms: &DiscreteForms, v: &AmbientVector) -> IdentityResiduals {
    let n = SurfaceGeometry::N as f64;
    let h = geom.h_mean;
    let l = geom.position_support(v);
    let f = geom.normal_support(v);
    let lap_l = apply_laplacian(forms, &l);
    let lap_f = apply_laplacian(forms, &f);
    let mut r1 = 0.0f64;
    let mut r2 = 0.0f64;
    for i in 0..l.len() {
        r1 = r1.max((lap_l[i] + n * l[i] - n * h * f[i]).abs());
        r2 = r2.max((lap_f[i] + geom.a2[i] * f[i] - n * h * l[i]).abs());
    }
    let warning = (!geom.h_constant).then(|| {
        format!(
            "surface is not CMC (max |H - mean H| = {:.3e} > {:.1e}); residuals measure the CMC defect",
            geom.h_max_dev, geom.cmc_tol
        )
    });
    IdentityResiduals { r1, r2, warning }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{clifford_immersion, compute_surface_geometry, CliffordSpec, Orientation};
    use std::f64::consts::PI;

    fn setup(r2: f64, n: usize) -> (SurfaceGeometry, DiscreteForms) {
        let g = clifford_immersion(&CliffordSpec::from_r2(1, 1, r2).unwrap(), n, n).unwrap();
        let geom = compute_surface_geometry(&g, Orientation::Standard).unwrap();
        let forms = assemble_forms(&geom);
        (geom, forms)
    }

    #[test]
    fn element_rows_sum_to_zero_and_symmetric() {
        let k = element_stiffness([1.3, 0.2, 0.7], 0.1, 0.3);
        for a in 0..4 {
            assert!(k[a].iter().sum::<f64>().abs() < 1e-15);
            for b in 0..4 {
                assert_eq!(k[a][b], k[b][a]);
            }
        }
        // unit square, identity coefficient: the standard Q1 Laplacian
        let k = element_stiffness([1.0, 0.0, 1.0], 1.0, 1.0);
        assert!((k[0][0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((k[0][1] + 1.0 / 6.0).abs() < 1e-15);
        assert!((k[0][3] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constants_in_kernel_and_area() {
        let (geom, forms) = setup(0.5, 32);
        let ones = vec![1.0; forms.len()];
        assert!(forms.dirichlet_energy(&ones).abs() < 1e-12);
        let kf = linalg::matvec(&forms.stiffness, &ones);
        assert!(kf.iter().all(|x| x.abs() < 1e-12));
        assert!((integrate(&geom, &ones) - 2.0 * PI * PI).abs() < 1e-11);
        assert!(apply_laplacian(&forms, &ones).iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn area_r2_point_two() {
        let (geom, _) = setup(0.2, 32);
        let ones = vec![1.0; geom.len()];
        assert!((integrate(&geom, &ones) - 4.0 * PI * PI * 0.4).abs() < 1e-11);
    }

    #[test]
    fn height_functions_integrate_to_zero() {
        let (geom, _) = setup(0.3, 24);
        for k in 0..4 {
            let l = geom.position_support(&AmbientVector::basis(4, k));
            assert!(integrate(&geom, &l).abs() < 1e-12);
        }
    }

    #[test]
    fn integral_of_f_times_l() {
        // f_1 l_1 = s cos u * r cos u; integral = r s * (area / 2)
        for r2 in [0.2, 0.5, 0.9] {
            let (geom, _) = setup(r2, 32);
            let v = AmbientVector::basis(4, 0);
            let l = geom.position_support(&v);
            let f = geom.normal_support(&v);
            let prod: Vec<f64> = l.iter().zip(&f).map(|(a, b)| a * b).collect();
            let (r, s) = (r2.sqrt(), (1.0 - r2).sqrt());
            let exact = r * s * (2.0 * PI * PI * r * s);
            assert!((integrate(&geom, &prod) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_energy_converges_second_order() {
        // exact: int |grad (r cos u)|^2 = int sin^2 u dA = area / 2
        let err = |n: usize| {
            let (geom, forms) = setup(0.5, n);
            let l = geom.position_support(&AmbientVector::basis(4, 0));
            let exact = geom.area() / 2.0;
            (forms.dirichlet_energy(&l) / exact - 1.0).abs()
        };
        let (e32, e64) = (err(32), err(64));
        assert!(e64 < 1e-3);
        assert!((e32 / e64 - 4.0).abs() < 0.1, "{e32} {e64}");
    }

    #[test]
    fn laplacian_of_height_function() {
        let (geom, forms) = setup(0.5, 64);
        let l = geom.position_support(&AmbientVector::basis(4, 0));
        let lap = apply_laplacian(&forms, &l);
        let err = lap.iter().zip(&l).map(|(a, b)| (a + 2.0 * b).abs()).fold(0.0, f64::max);
        assert!(err < 2e-3, "{err}");
    }

    #[test]
    fn laplacian_is_linear() {
        let (geom, forms) = setup(0.4, 16);
        let f = geom.position_support(&AmbientVector(vec![0.3, -1.0, 0.2, 0.5]));
        let g = geom.normal_support(&AmbientVector(vec![1.0, 0.1, -0.7, 0.0]));
        let comb: Vec<f64> = f.iter().zip(&g).map(|(a, b)| 2.5 * a - 0.75 * b).collect();
        let lc = apply_laplacian(&forms, &comb);
        let (lf, lg) = (apply_laplacian(&forms, &f), apply_laplacian(&forms, &g));
        for i in 0..lc.len() {
            assert!((lc[i] - (2.5 * lf[i] - 0.75 * lg[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn identities_zero_vector() {
        let (geom, forms) = setup(0.2, 16);
        let r = identity_residuals(&geom, &forms, &AmbientVector::zero(4));
        assert_eq!((r.r1, r.r2), (0.0, 0.0));
        assert!(r.warning.is_none());
    }

    #[test]
    fn identities_converge_on_clifford() {
        let (geom, forms) = setup(0.2, 64);
        let (gc, fc) = setup(0.2, 32);
        for k in 0..4 {
            let v = AmbientVector::basis(4, k);
            let fine = identity_residuals(&geom, &forms, &v);
            let coarse = identity_residuals(&gc, &fc, &v);
            assert!(fine.r1 <= 5e-3 && fine.r2 <= 5e-3, "{fine:?}");
            assert!((coarse.r1 / fine.r1 - 4.0).abs() < 0.5);
            assert!((coarse.r2 / fine.r2 - 4.0).abs() < 0.5);
        }
    }

    proptest::proptest! {
        #[test]
        fn green_identity_symmetry(seed in 0u64..1000) {
            let (geom, forms) = setup(0.35, 12);
            let a = AmbientVector(vec![(seed as f64).sin(), 0.3, -0.2, (seed as f64).cos()]);
            let f: Vec<f64> = geom.position_support(&a).iter().zip(&geom.mean_curvature).map(|(x, h)| x * x + h).collect();
            let g = geom.normal_support(&a);
            let fg = linalg::bilinear(&forms.stiffness, &f, &g);
            let gf = linalg::bilinear(&forms.stiffness, &g, &f);
            proptest::prop_assert!((fg - gf).abs() < 1e-12 * (1.0 + fg.abs()));
        }
    }
}
