//! Discrete Jacobi form and inertia-based index counting on sampled tori.
//!
//! Counts use Sylvester's law: the number of negative eigenvalues of the
//! pencil `(K_J, M)` below `sigma` is the number of negative pivots of an
//! `LDL^T` factorization of `K_J - sigma M`. Linear constraints `C^T f = 0`
//! are handled through the bordered matrix `[[A, C], [C^T, 0]]`, whose
//! inertia is that of the restricted form plus `k` positive and `k`
//! negative directions; with `A` factored, Haynsworth's formula reduces the
//! border to the small Schur complement `C^T A^-1 C`.
//!
//! Rotations of the ambient sphere give Jacobi fields
//! `<K phi, nu>` (`K` skew) in the kernel of `J` on every CMC surface. Their
//! discrete perturbation is pure discretization error of unknown sign, so
//! by default they are deflated: counts run on the mass-orthogonal
//! complement of their span.

use nalgebra::DMatrix;

use super::{IndexMethod, IndexReport, ModeLabel, SpectrumEntry, SpectrumFamily, SpectrumReport};
use crate::geometry::SurfaceGeometry;
use crate::laplace::DiscreteForms;
use crate::linalg::{self, BandedSym, SparseMatrix};
use crate::{Error, Result};

/// `K_J = K - diag(w_i (A2_i + n))`, representing `int |grad f|^2 - (|A|^2 + n) f^2`.
#[derive(Debug, Clone)]
pub struct JacobiForm {
    pub matrix: SparseMatrix,
    pub mass: Vec<f64>,
}

pub fn assemble_jacobi(geom: &SurfaceGeometry, forms: &DiscreteForms) -> JacobiForm {
    let n = SurfaceGeometry::N as f64;
    let potential: Vec<f64> = geom.weight.iter().zip(&geom.a2).map(|(w, a)| -w * (a + n)).collect();
    JacobiForm {
        matrix: linalg::add_diagonal(&forms.stiffness, &potential),
        mass: forms.mass.clone(),
    }
}

impl JacobiForm {
    pub fn quadratic_form(&self, f: &[f64]) -> f64 {
        linalg::bilinear(&self.matrix, f, f)
    }

    pub fn bilinear(&self, f: &[f64], g: &[f64]) -> f64 {
        linalg::bilinear(&self.matrix, f, g)
    }
}

/// Mass-inner-product Gram-Schmidt; vectors whose remainder falls below
/// `drop_rel` times the largest input norm are discarded.
fn mass_orthonormalize(vectors: Vec<Vec<f64>>, mass: &[f64], drop_rel: f64) -> Vec<Vec<f64>> {
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(mass).map(|((x, y), w)| x * y * w).sum() };
    let max_norm = vectors.iter().map(|v| dot(v, v).sqrt()).fold(0.0, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for mut v in vectors {
        // two passes for orthogonality to working precision
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let nv = dot(&v, &v).sqrt();
        if nv > drop_rel * max_norm {
            basis.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    basis
}

const KILLING_DROP: f64 = 1e-6;

/// Mass-orthonormal basis of the span of `<K phi, nu> = phi_a nu_b - phi_b nu_a`
/// over all coordinate pairs `a < b`.
pub fn killing_jacobi_fields(geom: &SurfaceGeometry) -> Vec<Vec<f64>> {
    let mut fields = Vec::new();
    for a in 0..4 {
        for b in a + 1..4 {
            fields.push(
                geom.grid
                    .pos
                    .iter()
                    .zip(&geom.normal)
                    .map(|(p, nu)| p[a] * nu[b] - p[b] * nu[a])
                    .collect(),
            );
        }
    }
    mass_orthonormalize(fields, &geom.weight, KILLING_DROP)
}

/// Position of each node in an ordering that folds both periodic
/// directions (`0, 1, N-1, 2, N-2, ...`), so every stencil neighbour,
/// wrap-around included, lies within bandwidth `~ 2 nv + 2`.
fn fold_permutation(nu: usize, nv: usize) -> Vec<usize> {
    fn fold(n: usize) -> Vec<usize> {
        let mut order = vec![0];
        for k in 1..=n / 2 {
            order.push(k);
            if n - k != k {
                order.push(n - k);
            }
        }
        let mut pos = vec![0; n];
        for (p, &node) in order.iter().enumerate() {
            pos[node] = p;
        }
        pos
    }
    let (fu, fv) = (fold(nu), fold(nv));
    let mut perm = vec![0; nu * nv];
    for i in 0..nu {
        for j in 0..nv {
            perm[i * nv + j] = fu[i] * nv + fv[j];
        }
    }
    perm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    /// Banded LDL^T, falling back to dense eigen-decomposition on breakdown.
    #[default]
    Auto,
    Dense,
}

/// Everything needed for repeated inertia counts on one surface.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    pub jacobi: JacobiForm,
    pub stiffness: SparseMatrix,
    /// Mass-orthonormal Killing Jacobi fields (empty when deflation is off).
    pub killing: Vec<Vec<f64>>,
    perm: Vec<usize>,
    area: f64,
}

impl DiscreteProblem {
    pub fn new(geom: &SurfaceGeometry, forms: &DiscreteForms, deflate_killing: bool) -> Self {
        DiscreteProblem {
            jacobi: assemble_jacobi(geom, forms),
            stiffness: forms.stiffness.clone(),
            killing: if deflate_killing { killing_jacobi_fields(geom) } else { Vec::new() },
            perm: fold_permutation(geom.grid.nu, geom.grid.nv),
            area: geom.area(),
        }
    }

    pub fn len(&self) -> usize {
        self.jacobi.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jacobi.mass.is_empty()
    }

    fn mass(&self) -> &[f64] {
        &self.jacobi.mass
    }

    /// Mass-orthonormal constraint directions: the constant (when
    /// `mean_zero`) followed by the deflated Killing fields.
    fn constraint_basis(&self, mean_zero: bool) -> Vec<Vec<f64>> {
        let mut vecs = Vec::new();
        if mean_zero {
            vecs.push(vec![1.0 / self.area.sqrt(); self.len()]);
        }
        vecs.extend(self.killing.iter().cloned());
        mass_orthonormalize(vecs, self.mass(), KILLING_DROP)
    }

    /// Number of negative eigenvalues of `Z^T (A + sigma M) Z`, where `Z`
    /// spans `{f : C^T f = 0}` and `C = M * basis`.
    fn count_negative(
        &self,
        a: &SparseMatrix,
        sigma: f64,
        basis: &[Vec<f64>],
        method: SolveMethod,
    ) -> Result<(usize, IndexMethod)> {
        let shift: Vec<f64> = self.mass().iter().map(|w| sigma * w).collect();
        let shifted = linalg::add_diagonal(a, &shift);
        let cols: Vec<Vec<f64>> = basis
            .iter()
            .map(|b| b.iter().zip(self.mass()).map(|(x, w)| x * w).collect())
            .collect();
        if method == SolveMethod::Auto {
            if let Ok(fac) = BandedSym::from_sparse(&shifted, &self.perm).ldlt() {
                let k = cols.len();
                let neg_a = fac.inertia().negative;
                if k == 0 {
                    return Ok((neg_a, IndexMethod::BandedLdlt));
                }
                let solved: Vec<Vec<f64>> = cols
                    .iter()
                    .map(|c| {
                        let mut x = vec![0.0; c.len()];
                        for (i, &ci) in c.iter().enumerate() {
                            x[self.perm[i]] = ci;
                        }
                        fac.solve_in_place(&mut x);
                        (0..c.len()).map(|i| x[self.perm[i]]).collect()
                    })
                    .collect();
                let mut schur = DMatrix::zeros(k, k);
                for a in 0..k {
                    for b in 0..k {
                        schur[(a, b)] = cols[a].iter().zip(&solved[b]).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
                let schur = (&schur + schur.transpose()) * 0.5;
                let scale = schur.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let pos = linalg::bunch_kaufman_inertia(&schur, 1e-13 * scale).positive;
                // In([[A, C], [C^T, 0]]) = In(A) + In(-C^T A^-1 C)
                //                        = In(Z^T A Z) + (k neg, 0, k pos)
                return Ok(((neg_a + pos).saturating_sub(k), IndexMethod::BandedLdlt));
            }
        }
        let n = self.len();
        let k = cols.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        for (v, (i, j)) in shifted.iter() {
            kkt[(i, j)] += *v;
        }
        for (c, col) in cols.iter().enumerate() {
            for (i, &x) in col.iter().enumerate() {
                kkt[(i, n + c)] = x;
                kkt[(n + c, i)] = x;
            }
        }
        let inertia = linalg::eigen_inertia(&kkt, 0.0);
        Ok((inertia.negative.saturating_sub(k), IndexMethod::DenseEigen))
    }

    fn interval(&self, tau: f64, mean_zero: bool, method: SolveMethod) -> Result<(usize, usize, IndexMethod)> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidSpec(format!("tau must be positive, got {tau}")));
        }
        let basis = self.constraint_basis(mean_zero);
        let (lo, m1) = self.count_negative(&self.jacobi.matrix, tau, &basis, method)?;
        let (hi, m2) = self.count_negative(&self.jacobi.matrix, -tau, &basis, method)?;
        let used = if m1 == IndexMethod::DenseEigen || m2 == IndexMethod::DenseEigen {
            IndexMethod::DenseEigen
        } else {
            IndexMethod::BandedLdlt
        };
        Ok((lo, hi, used))
    }

    /// Weak and strong index intervals under zero tolerance `tau`.
    pub fn index(&self, tau: f64, method: SolveMethod) -> Result<IndexReport> {
        let (weak_lo, weak_hi, m1) = self.interval(tau, true, method)?;
        let (strong_lo, strong_hi, m2) = self.interval(tau, false, method)?;
        Ok(IndexReport {
            weak_lo,
            weak_hi,
            strong_lo,
            strong_hi,
            tau,
            method: if m1 == IndexMethod::DenseEigen || m2 == IndexMethod::DenseEigen {
                IndexMethod::DenseEigen
            } else {
                IndexMethod::BandedLdlt
            },
            zero_modes: self.killing.len(),
        })
    }

    /// Number of generalized eigenvalues of `(a, M)` strictly below `sigma`.
    fn count_below(&self, a: &SparseMatrix, sigma: f64) -> usize {
        // a singular shift (sigma exactly an eigenvalue) breaks LDL^T; nudge
        let mut s = sigma;
        for _ in 0..4 {
            if let Ok((c, _)) = self.count_negative(a, -s, &[], SolveMethod::Auto) {
                return c;
            }
            s += 1e-12 * (1.0 + s.abs());
        }
        self.count_negative(a, -s, &[], SolveMethod::Dense).map(|(c, _)| c).unwrap_or(0)
    }

    /// Lower bound on the pencil spectrum from Gershgorin discs of
    /// `M^-1/2 A M^-1/2`.
    fn gershgorin_lower(&self, a: &SparseMatrix) -> f64 {
        let m = self.mass();
        a.outer_iterator()
            .enumerate()
            .map(|(i, row)| {
                let mut diag = 0.0;
                let mut rad = 0.0;
                for (j, v) in row.iter() {
                    if i == j {
                        diag += v / m[i];
                    } else {
                        rad += v.abs() / (m[i] * m[j]).sqrt();
                    }
                }
                diag - rad
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Clusters of generalized eigenvalues of `(a, M)` below `window`, found
    /// by bisection on inertia counts to absolute width `tol`.
    fn bisect_clusters(&self, a: &SparseMatrix, window: f64, tol: f64) -> Vec<(f64, usize)> {
        let lo = self.gershgorin_lower(a) - 1.0;
        let mut out = Vec::new();
        let mut stack = vec![(lo, 0usize, window, self.count_below(a, window))];
        while let Some((x0, c0, x1, c1)) = stack.pop() {
            if c1 == c0 {
                continue;
            }
            if x1 - x0 <= tol {
                out.push((0.5 * (x0 + x1), c1 - c0));
                continue;
            }
            let mid = 0.5 * (x0 + x1);
            // counts are monotone in exact arithmetic; clamp roundoff near
            // clustered eigenvalues
            let cm = self.count_below(a, mid).clamp(c0, c1);
            // upper half pushed first so the lower half is processed first
            stack.push((mid, cm, x1, c1));
            stack.push((x0, c0, mid, cm));
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Jacobi eigenvalue clusters below `window`.
    pub fn jacobi_spectrum(&self, window: f64, tol: f64) -> Vec<(f64, usize)> {
        self.bisect_clusters(&self.jacobi.matrix, window, tol)
    }

    /// Eigenvalue clusters of `-Delta` (pencil `(K, M)`) below `window`.
    pub fn laplace_spectrum(&self, window: f64, tol: f64) -> Vec<(f64, usize)> {
        self.bisect_clusters(&self.stiffness, window, tol)
    }

    /// Smallest Jacobi eigenvalue to absolute accuracy `tol`.
    pub fn lambda_min(&self, tol: f64) -> f64 {
        let a = &self.jacobi.matrix;
        let (mut lo, mut hi) = (self.gershgorin_lower(a) - 1.0, 1.0);
        while self.count_below(a, hi) == 0 {
            hi = 2.0 * hi + 1.0;
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.count_below(a, mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Weak index interval `[#neg(Z^T (K_J + tau M) Z), #neg(Z^T (K_J - tau M) Z)]`
/// over mean-zero `Z` (Killing fields deflated when the problem carries them).
pub fn weak_index_discrete(problem: &DiscreteProblem, tau: f64, method: SolveMethod) -> Result<IndexReport> {
    problem.index(tau, method)
}

/// Same as [`weak_index_discrete`]; the strong interval ignores the mean-zero
/// constraint.
pub fn strong_index_discrete(problem: &DiscreteProblem, tau: f64, method: SolveMethod) -> Result<IndexReport> {
    problem.index(tau, method)
}

/// Discrete Jacobi spectrum below `window` as a [`SpectrumReport`].
pub fn discrete_spectrum(
    geom: &SurfaceGeometry,
    problem: &DiscreteProblem,
    window: f64,
    tol: f64,
    description: String,
) -> SpectrumReport {
    let a2_const = {
        let (amin, amax) = geom.a2.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
        (amax - amin <= 1e-8 * (1.0 + amax.abs())).then_some(0.5 * (amin + amax))
    };
    let entries = problem
        .jacobi_spectrum(window, tol)
        .into_iter()
        .enumerate()
        .map(|(index, (eigenvalue, multiplicity))| SpectrumEntry {
            eigenvalue,
            multiplicity,
            label: ModeLabel::Cluster { index },
        })
        .collect();
    SpectrumReport {
        family: SpectrumFamily::Discrete { description },
        n: SurfaceGeometry::N,
        h: geom.h_mean,
        a2: a2_const,
        window,
        cutoff: 0,
        entries,
    }
}
