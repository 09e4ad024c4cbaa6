//! The support-function test family and the index certificate.
//!
//! For a CMC surface with mean curvature `H`, `l_v = <phi, v>` and
//! `f_v = <nu, v>` satisfy two coupled Laplacian identities. The functions
//! `h_u = f_u + c(H) l_u`, `c(H) = (sqrt(1 + H^2) - 1) / H`, restricted to
//! `int h_u = 0`, form a space of dimension at least `n + 1` on which the
//! Jacobi form is bounded above by `-n int (f_u + H l_u)^2`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::geometry::{AmbientVector, SurfaceGeometry};
use crate::laplace::{apply_laplacian, integrate, DiscreteForms};
use crate::linalg;
use crate::spectrum::JacobiForm;
use crate::{Error, Result};

/// `(sqrt(1 + H^2) - 1) / H`, evaluated as `H / (sqrt(1 + H^2) + 1)`; zero at
/// `H = 0`, where `h_u` reduces to `f_u`.
pub fn coefficient_c(h: f64) -> f64 {
    h / ((1.0 + h * h).sqrt() + 1.0)
}

const AMBIENT: usize = 4;

#[derive(Debug, Clone)]
pub struct SupportFunctions {
    /// `l[a]` is `l_v` for `v = e_a`.
    pub l: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    /// Area-weighted mean curvature.
    pub h: f64,
    pub c: f64,
    pub warning: Option<String>,
}

pub fn build_support_functions(geom: &SurfaceGeometry) -> SupportFunctions {
    let l = (0..AMBIENT).map(|a| geom.position_support(&AmbientVector::basis(AMBIENT, a))).collect();
    let f = (0..AMBIENT).map(|a| geom.normal_support(&AmbientVector::basis(AMBIENT, a))).collect();
    let warning = (!geom.h_constant).then(|| {
        format!(
            "surface is not CMC: max |H - mean H| = {:.3e} exceeds {:.1e}",
            geom.h_max_dev, geom.cmc_tol
        )
    });
    SupportFunctions { l, f, h: geom.h_mean, c: coefficient_c(geom.h_mean), warning }
}

fn combine(basis: &[Vec<f64>], u: &AmbientVector) -> Vec<f64> {
    let mut out = vec![0.0; basis[0].len()];
    for (coef, arr) in u.0.iter().zip(basis) {
        if *coef != 0.0 {
            for (o, x) in out.iter_mut().zip(arr) {
                *o += coef * x;
            }
        }
    }
    out
}

impl SupportFunctions {
    pub fn l_u(&self, u: &AmbientVector) -> Vec<f64> {
        combine(&self.l, u)
    }

    pub fn f_u(&self, u: &AmbientVector) -> Vec<f64> {
        combine(&self.f, u)
    }

    /// `h_u = f_u + c l_u`
    pub fn h_u(&self, u: &AmbientVector) -> Vec<f64> {
        let (f, l) = (self.f_u(u), self.l_u(u));
        f.iter().zip(&l).map(|(a, b)| a + self.c * b).collect()
    }

    /// `f_u + H l_u`
    pub fn f_plus_hl(&self, u: &AmbientVector) -> Vec<f64> {
        let (f, l) = (self.f_u(u), self.l_u(u));
        f.iter().zip(&l).map(|(a, b)| a + self.h * b).collect()
    }
}

/// `| int |A|^2 f_u l_u - (n int f_u l_u - nH int f_u^2 + nH int l_u^2) |`
pub fn lemma1_residual(geom: &SurfaceGeometry, support: &SupportFunctions, u: &AmbientVector) -> f64 {
    let n = SurfaceGeometry::N as f64;
    let h = support.h;
    let (f, l) = (support.f_u(u), support.l_u(u));
    let mut lhs = 0.0;
    let (mut fl, mut ff, mut ll) = (0.0, 0.0, 0.0);
    for i in 0..f.len() {
        let w = geom.weight[i];
        lhs += w * geom.a2[i] * f[i] * l[i];
        fl += w * f[i] * l[i];
        ff += w * f[i] * f[i];
        ll += w * l[i] * l[i];
    }
    (lhs - (n * fl - n * h * ff + n * h * ll)).abs()
}

/// Max-norm gap between `J(h_u)` through the discrete Laplacian and the
/// closed form `-|A|^2 c l_u - n f_u - nH l_u - nHc f_u`.
pub fn jacobi_expansion_residual(
    geom: &SurfaceGeometry,
    forms: &DiscreteForms,
    support: &SupportFunctions,
    u: &AmbientVector,
) -> f64 {
    let n = SurfaceGeometry::N as f64;
    let (h, c) = (support.h, support.c);
    let hu = support.h_u(u);
    let (f, l) = (support.f_u(u), support.l_u(u));
    let lap = apply_laplacian(forms, &hu);
    (0..hu.len())
        .map(|i| {
            let j_h = -lap[i] - geom.a2[i] * hu[i] - n * hu[i];
            let closed = -geom.a2[i] * c * l[i] - n * f[i] - n * h * l[i] - n * h * c * f[i];
            (j_h - closed).abs()
        })
        .fold(0.0, f64::max)
}

/// `f^T K_J f`, the discrete `int f J(f)`.
pub fn quadratic_form(jacobi: &JacobiForm, f: &[f64]) -> f64 {
    jacobi.quadratic_form(f)
}

/// Orthonormal basis of `{u : int h_u = 0}`: all of `R^4` when the
/// functional `u -> int h_u` vanishes within `tau_adm`, otherwise the
/// Householder complement of its gradient.
pub fn admissible_basis(geom: &SurfaceGeometry, support: &SupportFunctions, tau_adm: f64) -> Vec<AmbientVector> {
    let grad: Vec<f64> = (0..AMBIENT)
        .map(|a| integrate(geom, &support.f[a]) + support.c * integrate(geom, &support.l[a]))
        .collect();
    let norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= tau_adm {
        (0..AMBIENT).map(|a| AmbientVector::basis(AMBIENT, a)).collect()
    } else {
        linalg::householder_complement(&grad).into_iter().map(AmbientVector).collect()
    }
}

/// Smallest singular value of the column-normalized matrix of the
/// `2(n+2)` functions `{l_a, f_a}` in the mass inner product; zero when some
/// `l_v` is a multiple of `f_v`.
pub fn independence_margin(geom: &SurfaceGeometry, support: &SupportFunctions) -> f64 {
    let cols: Vec<&Vec<f64>> = support.l.iter().chain(&support.f).collect();
    let k = cols.len();
    let ip = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(&geom.weight).map(|((x, y), w)| x * y * w).sum() };
    let norms: Vec<f64> = cols.iter().map(|c| ip(c, c).sqrt().max(f64::MIN_POSITIVE)).collect();
    let mut gram = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            gram[(a, b)] = ip(cols[a], cols[b]) / (norms[a] * norms[b]);
        }
    }
    linalg::sorted_eigenvalues(&gram)[0].max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateTolerances {
    /// `|int h_u| <= tau_adm_rel * sqrt(area) * |u|`
    pub tau_adm_rel: f64,
    /// `Q(h_u) < -tau_strict_rel * area`
    pub tau_strict_rel: f64,
    /// `Q(h_u) <= rhs + ineq_tol_rel * area`
    pub ineq_tol_rel: f64,
    /// Umbilical when `max (A2 - n H^2)` is at most this.
    pub umbilic_tol: f64,
}

impl Default for CertificateTolerances {
    fn default() -> Self {
        Self { tau_adm_rel: 1e-8, tau_strict_rel: 1e-6, ineq_tol_rel: 1e-4, umbilic_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionEvidence {
    pub u: AmbientVector,
    /// `int h_u`
    pub integral: f64,
    /// `h_u^T K_J h_u`
    pub q_value: f64,
    /// `-n int (f_u + H l_u)^2`
    pub rhs: f64,
    /// `rhs - q_value`
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCertificate {
    pub n: usize,
    pub h: f64,
    pub c: f64,
    pub area: f64,
    pub tau_adm: f64,
    pub tau_strict: f64,
    pub ineq_tol: f64,
    pub directions: Vec<DirectionEvidence>,
    /// Largest eigenvalue of the Jacobi form on the admissible span (unit `u`).
    pub q_max_eigenvalue: f64,
    /// Smallest eigenvalue of `rhs - Q` as forms on the admissible span.
    pub inequality_margin: f64,
    pub worst_q: f64,
    pub negative_definite: bool,
    pub inequality_holds: bool,
    pub independence_margin: f64,
    /// Certified `ind_T >= bound`; absent when strict negativity failed.
    pub bound: Option<usize>,
    pub discretization_suspect: bool,
    pub warnings: Vec<String>,
}

impl TheoremCertificate {
    /// Whether the certificate reaches the `n + 1` lower bound.
    pub fn certifies_theorem(&self) -> bool {
        self.inequality_holds && self.bound.is_some_and(|b| b > self.n)
    }
}

pub fn theorem_certificate(
    geom: &SurfaceGeometry,
    support: &SupportFunctions,
    jacobi: &JacobiForm,
    tol: &CertificateTolerances,
) -> Result<TheoremCertificate> {
    let n = SurfaceGeometry::N;
    let (_, max_excess) = geom.umbilic_excess();
    if max_excess <= tol.umbilic_tol.max(geom.cmc_tol) {
        return Err(Error::Umbilical { max_excess });
    }
    let area = geom.area();
    let tau_adm = tol.tau_adm_rel * area.sqrt();
    let tau_strict = tol.tau_strict_rel * area;
    let ineq_tol = tol.ineq_tol_rel * area;
    let basis = admissible_basis(geom, support, tau_adm);
    let k = basis.len();

    let hs: Vec<Vec<f64>> = basis.iter().map(|u| support.h_u(u)).collect();
    let gs: Vec<Vec<f64>> = basis.iter().map(|u| support.f_plus_hl(u)).collect();
    let mut q = DMatrix::zeros(k, k);
    let mut r = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let qab = jacobi.bilinear(&hs[a], &hs[b]);
            let gab: Vec<f64> = gs[a].iter().zip(&gs[b]).map(|(x, y)| x * y).collect();
            let rab = -(n as f64) * integrate(geom, &gab);
            q[(a, b)] = qab;
            q[(b, a)] = qab;
            r[(a, b)] = rab;
            r[(b, a)] = rab;
        }
    }
    let directions: Vec<DirectionEvidence> = (0..k)
        .map(|a| DirectionEvidence {
            u: basis[a].clone(),
            integral: integrate(geom, &hs[a]),
            q_value: q[(a, a)],
            rhs: r[(a, a)],
            slack: r[(a, a)] - q[(a, a)],
        })
        .collect();
    let q_eigs = linalg::sorted_eigenvalues(&q);
    let q_max_eigenvalue = *q_eigs.last().unwrap();
    let inequality_margin = linalg::sorted_eigenvalues(&(&r - &q))[0];
    let worst_q = directions.iter().map(|d| d.q_value).fold(f64::NEG_INFINITY, f64::max);
    let negative_definite = q_max_eigenvalue < -tau_strict;
    let inequality_holds = inequality_margin >= -ineq_tol && directions.iter().all(|d| d.slack >= -ineq_tol);

    let mut warnings = Vec::new();
    if let Some(w) = &support.warning {
        warnings.push(w.clone());
    }
    if !negative_definite {
        warnings.push(format!(
            "Jacobi form on the test space is not below -{tau_strict:.3e} (largest eigenvalue {q_max_eigenvalue:.3e}); \
             discretization suspect, rerun on a finer grid"
        ));
    }
    Ok(TheoremCertificate {
        n,
        h: support.h,
        c: support.c,
        area,
        tau_adm,
        tau_strict,
        ineq_tol,
        directions,
        q_max_eigenvalue,
        inequality_margin,
        worst_q,
        negative_definite,
        inequality_holds,
        independence_margin: independence_margin(geom, support),
        bound: negative_definite.then_some(k),
        discretization_suspect: !negative_definite,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        clifford_immersion, compute_surface_geometry, control_noncmc_immersion, umbilical_sphere_immersion,
        CliffordSpec, Orientation, UmbilicalSpec,
    };
    use crate::laplace::assemble_forms;
    use crate::spectrum::assemble_jacobi;
    use std::f64::consts::PI;

    struct Setup {
        geom: SurfaceGeometry,
        forms: DiscreteForms,
        support: SupportFunctions,
        jacobi: JacobiForm,
    }

    fn clifford(r2: f64, n: usize, o: Orientation) -> Setup {
        let g = clifford_immersion(&CliffordSpec::from_r2(1, 1, r2).unwrap(), n, n).unwrap();
        let geom = compute_surface_geometry(&g, o).unwrap();
        let forms = assemble_forms(&geom);
        let support = build_support_functions(&geom);
        let jacobi = assemble_jacobi(&geom, &forms);
        Setup { geom, forms, support, jacobi }
    }

    #[test]
    fn coefficient_values() {
        assert_eq!(coefficient_c(0.0), 0.0);
        assert!((coefficient_c(0.75) - 1.0 / 3.0).abs() < 1e-15);
        assert!((coefficient_c(4.0 / 3.0) - 0.5).abs() < 1e-15);
        assert!((coefficient_c(-4.0 / 3.0) + 0.5).abs() < 1e-15);
        // tiny H: no cancellation
        assert!((coefficient_c(1e-12) - 0.5e-12).abs() < 1e-27);
    }

    proptest::proptest! {
        #[test]
        fn coefficient_identities(h in -50.0f64..50.0) {
            let c = coefficient_c(h);
            proptest::prop_assert!(c.abs() < 1.0);
            proptest::prop_assert_eq!(coefficient_c(-h), -c);
            proptest::prop_assert!((h * c * c + 2.0 * c - h).abs() < 1e-12 * (1.0 + h.abs()));
        }
    }

    #[test]
    fn support_functions_pointwise() {
        let s = clifford(0.5, 16, Orientation::Standard);
        let h = 0.5f64.sqrt();
        assert!((s.support.l[0][0] - h).abs() < 1e-15);
        assert!((s.support.f[0][0] - h).abs() < 1e-15);
        for i in 0..s.geom.len() {
            let ll: f64 = (0..4).map(|a| s.support.l[a][i].powi(2)).sum();
            let ff: f64 = (0..4).map(|a| s.support.f[a][i].powi(2)).sum();
            let lf: f64 = (0..4).map(|a| s.support.l[a][i] * s.support.f[a][i]).sum();
            assert!((ll - 1.0).abs() < 1e-14 && (ff - 1.0).abs() < 1e-14 && lf.abs() < 1e-14);
        }
    }

    #[test]
    fn lemma_on_clifford() {
        let s = clifford(0.2, 64, Orientation::Standard);
        assert_eq!(lemma1_residual(&s.geom, &s.support, &AmbientVector::zero(4)), 0.0);
        for a in 0..4 {
            let u = AmbientVector::basis(4, a);
            assert!(lemma1_residual(&s.geom, &s.support, &u) <= 1e-6);
        }
    }

    #[test]
    fn lemma_oracle_closed_form() {
        // u = e1: f = s cos u, l = r cos u; every integral is (area / 2) times
        // the product of amplitudes
        let s = clifford(0.2, 32, Orientation::Standard);
        let (r, sv) = (0.2f64.sqrt(), 0.8f64.sqrt());
        let half = 2.0 * PI * PI * r * sv;
        let (a2, h) = (4.25, -0.75);
        let lhs = a2 * sv * r * half;
        let rhs = 2.0 * sv * r * half - 2.0 * h * sv * sv * half + 2.0 * h * r * r * half;
        assert!((lhs - rhs).abs() < 1e-12);
        let f = s.support.f_u(&AmbientVector::basis(4, 0));
        let l = s.support.l_u(&AmbientVector::basis(4, 0));
        let fl: Vec<f64> = f.iter().zip(&l).map(|(x, y)| x * y * a2).collect();
        assert!((integrate(&s.geom, &fl) - lhs).abs() < 1e-12);
    }

    #[test]
    fn expansion_residual_converges() {
        let fine = clifford(0.2, 64, Orientation::Standard);
        let coarse = clifford(0.2, 32, Orientation::Standard);
        assert_eq!(jacobi_expansion_residual(&fine.geom, &fine.forms, &fine.support, &AmbientVector::zero(4)), 0.0);
        for a in 0..4 {
            let u = AmbientVector::basis(4, a);
            let rf = jacobi_expansion_residual(&fine.geom, &fine.forms, &fine.support, &u);
            let rc = jacobi_expansion_residual(&coarse.geom, &coarse.forms, &coarse.support, &u);
            assert!(rf < 5e-3, "{rf}");
            assert!((rc / rf - 4.0).abs() < 0.5, "{}", rc / rf);
        }
        // minimal case: c = 0 and the residual is that of the second identity
        let m = clifford(0.5, 64, Orientation::Standard);
        assert!(m.support.c.abs() < 1e-15);
        let r = jacobi_expansion_residual(&m.geom, &m.forms, &m.support, &AmbientVector::basis(4, 0));
        assert!(r < 5e-3);
    }

    #[test]
    fn quadratic_form_values() {
        let s = clifford(0.5, 48, Orientation::Standard);
        let ones = vec![1.0; s.geom.len()];
        assert!((quadratic_form(&s.jacobi, &ones) + 4.0 * 2.0 * PI * PI).abs() < 1e-9);
        let h = s.support.h_u(&AmbientVector(vec![0.3, -0.1, 0.5, 0.2]));
        let scaled: Vec<f64> = h.iter().map(|x| -2.5 * x).collect();
        let (q1, q2) = (quadratic_form(&s.jacobi, &h), quadratic_form(&s.jacobi, &scaled));
        assert!((q2 - 6.25 * q1).abs() < 1e-12 * q1.abs());
    }

    #[test]
    fn admissible_basis_clifford_is_full() {
        let s = clifford(0.3, 24, Orientation::Standard);
        let basis = admissible_basis(&s.geom, &s.support, 1e-8 * s.geom.area().sqrt());
        assert_eq!(basis.len(), 4);
    }

    #[test]
    fn admissible_basis_with_nonzero_functional() {
        // the control torus is asymmetric in u, so int l_1 != 0
        let g = control_noncmc_immersion(crate::geometry::CONTROL_R0, 32, 32).unwrap();
        let geom = compute_surface_geometry(&g, Orientation::Standard).unwrap();
        let support = build_support_functions(&geom);
        let tau = 1e-8 * geom.area().sqrt();
        let basis = admissible_basis(&geom, &support, tau);
        assert_eq!(basis.len(), 3);
        for (a, u) in basis.iter().enumerate() {
            assert!(integrate(&geom, &support.h_u(u)).abs() <= tau * u.norm());
            for v in &basis[a..] {
                let d = u.dot(&v.0);
                assert!((d - if std::ptr::eq(u, v) { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn certificate_clifford_r2_point_two() {
        let s = clifford(0.2, 64, Orientation::Standard);
        let cert = theorem_certificate(&s.geom, &s.support, &s.jacobi, &CertificateTolerances::default()).unwrap();
        assert_eq!(cert.bound, Some(4));
        assert!(cert.certifies_theorem());
        for d in &cert.directions {
            assert!(d.q_value < -cert.tau_strict);
            assert!(d.q_value - d.rhs <= 1e-4 * cert.area);
        }
        // Clifford: l_v is a multiple of f_v
        assert!(cert.independence_margin < 1e-6);
    }

    #[test]
    fn certificate_minimal_clifford_equal_q_values() {
        let s = clifford(0.5, 48, Orientation::Standard);
        let cert = theorem_certificate(&s.geom, &s.support, &s.jacobi, &CertificateTolerances::default()).unwrap();
        assert!(cert.c.abs() < 1e-15);
        assert_eq!(cert.bound, Some(4));
        let q0 = cert.directions[0].q_value;
        for d in &cert.directions {
            assert!((d.q_value - q0).abs() < 1e-9 * q0.abs());
        }
    }

    #[test]
    fn certificate_orientation_invariant() {
        let a = clifford(0.9, 32, Orientation::Standard);
        let b = clifford(0.9, 32, Orientation::Flipped);
        let tol = CertificateTolerances::default();
        let ca = theorem_certificate(&a.geom, &a.support, &a.jacobi, &tol).unwrap();
        let cb = theorem_certificate(&b.geom, &b.support, &b.jacobi, &tol).unwrap();
        assert_eq!(ca.bound, cb.bound);
        assert!((ca.c + cb.c).abs() < 1e-15);
        for (x, y) in ca.directions.iter().zip(&cb.directions) {
            assert!((x.q_value - y.q_value).abs() < 1e-10 * x.q_value.abs());
            assert!((x.rhs - y.rhs).abs() < 1e-10 * x.rhs.abs());
        }
    }

    #[test]
    fn certificate_refuses_umbilical() {
        let spec = UmbilicalSpec::new(2, 0.8).unwrap();
        let g = umbilical_sphere_immersion(&spec, 24, 24).unwrap();
        let geom = compute_surface_geometry(&g, Orientation::Standard).unwrap();
        let forms = assemble_forms(&geom);
        let support = build_support_functions(&geom);
        let jacobi = assemble_jacobi(&geom, &forms);
        let r = theorem_certificate(&geom, &support, &jacobi, &CertificateTolerances::default());
        assert!(matches!(r, Err(Error::Umbilical { .. })));
    }
}
