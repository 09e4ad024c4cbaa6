//! Sparse helpers, a banded LDL^T for Sylvester inertia counts, a dense
//! Bunch-Kaufman factorization, and the dense eigen-decomposition fallback.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};

use crate::{Error, Result};

pub type SparseMatrix = CsMat<f64>;

/// Counts of negative, zero and positive eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

impl Inertia {
    fn push(&mut self, x: f64, zero_tol: f64) {
        if x.abs() <= zero_tol {
            self.zero += 1;
        } else if x < 0.0 {
            self.negative += 1;
        } else {
            self.positive += 1;
        }
    }

    pub fn dim(&self) -> usize {
        self.negative + self.zero + self.positive
    }
}

pub fn sparse_from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> SparseMatrix {
    let mut tri = TriMat::with_capacity((n, n), triplets.len());
    for &(i, j, v) in triplets {
        tri.add_triplet(i, j, v);
    }
    tri.to_csr()
}

pub fn matvec(a: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    a.outer_iterator()
        .map(|row| row.iter().map(|(j, v)| v * x[j]).sum())
        .collect()
}

/// `x^T A y`
pub fn bilinear(a: &SparseMatrix, x: &[f64], y: &[f64]) -> f64 {
    a.outer_iterator()
        .enumerate()
        .map(|(i, row)| x[i] * row.iter().map(|(j, v)| v * y[j]).sum::<f64>())
        .sum()
}

/// `A + diag(d)`
pub fn add_diagonal(a: &SparseMatrix, d: &[f64]) -> SparseMatrix {
    let n = a.rows();
    let mut trip: Vec<(usize, usize, f64)> = a.iter().map(|(v, (i, j))| (i, j, *v)).collect();
    trip.extend(d.iter().enumerate().map(|(i, &x)| (i, i, x)));
    sparse_from_triplets(n, &trip)
}

pub fn to_dense(a: &SparseMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.rows(), a.cols());
    for (v, (i, j)) in a.iter() {
        m[(i, j)] += *v;
    }
    m
}

/// Symmetric matrix in lower band storage: row `i` holds `A[i][i-bw ..= i]`.
#[derive(Debug, Clone)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    /// Permuted copy of a symmetric sparse matrix: entry `(i, j)` of `a`
    /// lands at `(perm[i], perm[j])`.
    pub fn from_sparse(a: &SparseMatrix, perm: &[usize]) -> Self {
        let n = a.rows();
        let bw = a
            .iter()
            .map(|(_, (i, j))| perm[i].abs_diff(perm[j]))
            .max()
            .unwrap_or(0);
        let mut data = vec![0.0; n * (bw + 1)];
        for (v, (i, j)) in a.iter() {
            let (pi, pj) = (perm[i], perm[j]);
            if pj <= pi {
                data[pi * (bw + 1) + bw + pj - pi] += *v;
            }
        }
        Self { n, bw, data }
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// LDL^T without pivoting. By Sylvester's law the signs of `D` give the
    /// inertia; breakdown (tiny pivot or multiplier growth) is an error so the
    /// caller can fall back to a pivoted or spectral method.
    pub fn ldlt(mut self) -> Result<BandedLdl> {
        const PIVOT_REL: f64 = 1e-13;
        const GROWTH_MAX: f64 = 1e8;
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let scale = self.data.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let mut d = vec![0.0; n];
        let mut t = vec![0.0; w];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = i * w;
            for j in lo..i {
                let jrow = j * w;
                let klo = lo.max(j.saturating_sub(bw));
                let mut s = self.data[row + bw + j - i];
                for k in klo..j {
                    s -= t[k - lo] * self.data[jrow + bw + k - j];
                }
                t[j - lo] = s;
                let l = s / d[j];
                if !(l.abs() <= GROWTH_MAX) {
                    return Err(Error::Breakdown {
                        index: i,
                        reason: format!("multiplier growth {l:e}"),
                    });
                }
                self.data[row + bw + j - i] = l;
            }
            let mut di = self.data[row + bw];
            for k in lo..i {
                di -= t[k - lo] * self.data[row + bw + k - i];
            }
            if !(di.abs() > PIVOT_REL * scale) {
                return Err(Error::Breakdown { index: i, reason: format!("pivot {di:e}") });
            }
            d[i] = di;
            self.data[row + bw] = 1.0;
        }
        Ok(BandedLdl { n, bw, l: self.data, d })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLdl {
    n: usize,
    bw: usize,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl BandedLdl {
    pub fn inertia(&self) -> Inertia {
        let mut inertia = Inertia::default();
        for &x in &self.d {
            inertia.push(x, 0.0);
        }
        inertia
    }

    /// Solves `A x = b` in place (permuted coordinates).
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for k in lo..i {
                s -= self.l[i * w + bw + k - i] * x[k];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let xi = x[i];
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                x[k] -= self.l[i * w + bw + k - i] * xi;
            }
        }
    }
}

/// Inertia of a dense symmetric matrix by Bunch-Kaufman diagonal pivoting
/// (1x1 and 2x2 blocks). Pivots with magnitude `<= zero_tol` count as zero.
pub fn bunch_kaufman_inertia(a: &DMatrix<f64>, zero_tol: f64) -> Inertia {
    let alpha = (1.0 + 17f64.sqrt()) / 8.0;
    let n = a.nrows();
    let mut m = a.clone();
    let mut inertia = Inertia::default();
    let swap = |m: &mut DMatrix<f64>, p: usize, q: usize| {
        if p != q {
            m.swap_rows(p, q);
            m.swap_columns(p, q);
        }
    };
    let mut k = 0;
    while k < n {
        let (mut r, mut lambda) = (k, 0.0f64);
        for i in k + 1..n {
            if m[(i, k)].abs() > lambda {
                lambda = m[(i, k)].abs();
                r = i;
            }
        }
        let akk = m[(k, k)].abs();
        if akk.max(lambda) <= zero_tol {
            inertia.push(0.0, zero_tol);
            k += 1;
            continue;
        }
        let two_by_two = if akk >= alpha * lambda {
            false
        } else {
            let sigma = (k..n).filter(|&j| j != r).fold(0.0f64, |s, j| s.max(m[(r, j)].abs()));
            if akk * sigma >= alpha * lambda * lambda {
                false
            } else if m[(r, r)].abs() >= alpha * sigma {
                swap(&mut m, k, r);
                false
            } else {
                swap(&mut m, k + 1, r);
                true
            }
        };
        if !two_by_two {
            let d = m[(k, k)];
            inertia.push(d, zero_tol);
            for i in k + 1..n {
                let f = m[(i, k)] / d;
                for j in k + 1..n {
                    m[(i, j)] -= f * m[(k, j)];
                }
            }
            k += 1;
        } else {
            let (e00, e01, e11) = (m[(k, k)], m[(k + 1, k)], m[(k + 1, k + 1)]);
            let det = e00 * e11 - e01 * e01;
            let tr = e00 + e11;
            let disc = ((e00 - e11).powi(2) + 4.0 * e01 * e01).sqrt();
            inertia.push(0.5 * (tr - disc), zero_tol);
            inertia.push(0.5 * (tr + disc), zero_tol);
            for i in k + 2..n {
                let (ai0, ai1) = (m[(i, k)], m[(i, k + 1)]);
                let c0 = (e11 * ai0 - e01 * ai1) / det;
                let c1 = (-e01 * ai0 + e00 * ai1) / det;
                for j in k + 2..n {
                    m[(i, j)] -= c0 * m[(k, j)] + c1 * m[(k + 1, j)];
                }
            }
            k += 2;
        }
    }
    inertia
}

pub fn eigen_inertia(a: &DMatrix<f64>, zero_tol: f64) -> Inertia {
    let mut inertia = Inertia::default();
    for &x in SymmetricEigen::new(a.clone()).eigenvalues.iter() {
        inertia.push(x, zero_tol);
    }
    inertia
}

pub fn sorted_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Orthonormal basis (columns) of the complement of unit vector `v`, from
/// the Householder reflector mapping `v` to `-sign(v_0) e_0`.
pub fn householder_complement(v: &[f64]) -> Vec<Vec<f64>> {
    let n = v.len();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut w: Vec<f64> = v.iter().map(|x| x / norm).collect();
    let sign = if w[0] >= 0.0 { 1.0 } else { -1.0 };
    w[0] += sign;
    let wn2: f64 = w.iter().map(|x| x * x).sum();
    // columns 1..n of I - 2 w w^T / |w|^2
    (1..n)
        .map(|c| (0..n).map(|i| f64::from(u8::from(i == c)) - 2.0 * w[i] * w[c] / wn2).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x: f64 = rng.random_range(-1.0..1.0);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    fn to_sparse(m: &DMatrix<f64>) -> SparseMatrix {
        let n = m.nrows();
        let trip: Vec<_> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| m[(i, j)] != 0.0)
            .map(|(i, j)| (i, j, m[(i, j)]))
            .collect();
        sparse_from_triplets(n, &trip)
    }

    #[test]
    fn inertia_counts_agree_with_eigenvalues_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let m = random_sym(&mut rng, 50);
            let by_eig = eigen_inertia(&m, 0.0);
            assert_eq!(bunch_kaufman_inertia(&m, 0.0), by_eig);
            let ident: Vec<usize> = (0..50).collect();
            if let Ok(f) = BandedSym::from_sparse(&to_sparse(&m), &ident).ldlt() {
                assert_eq!(f.inertia(), by_eig);
            }
        }
    }

    #[test]
    fn bunch_kaufman_handles_zero_diagonal() {
        // [[0, 1], [1, 0]] needs a 2x2 pivot
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        let i = bunch_kaufman_inertia(&m, 1e-14);
        assert_eq!((i.negative, i.zero, i.positive), (1, 0, 2));
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(bunch_kaufman_inertia(&z, 1e-14).zero, 3);
    }

    #[test]
    fn ldlt_reports_breakdown_on_zero_pivot() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let r = BandedSym::from_sparse(&to_sparse(&m), &[0, 1]).ldlt();
        assert!(matches!(r, Err(Error::Breakdown { index: 0, .. })));
    }

    #[test]
    fn banded_solve_and_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        // periodic tridiagonal, diagonally dominant
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 4.0 + rng.random_range(0.0..1.0)));
            let j = (i + 1) % n;
            let x = rng.random_range(-1.0..1.0);
            trip.push((i, j, x));
            trip.push((j, i, x));
        }
        let a = sparse_from_triplets(n, &trip);
        // fold ordering keeps the wrap-around edge close to the diagonal
        let mut order = vec![0];
        for k in 1..=n / 2 {
            order.push(k);
            if n - k != k {
                order.push(n - k);
            }
        }
        let mut perm = vec![0; n];
        for (p, &node) in order.iter().enumerate() {
            perm[node] = p;
        }
        let band = BandedSym::from_sparse(&a, &perm);
        assert!(band.bandwidth() <= 2);
        let f = band.ldlt().unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[perm[i]] = b[i];
        }
        f.solve_in_place(&mut x);
        let sol: Vec<f64> = (0..n).map(|i| x[perm[i]]).collect();
        let ax = matvec(&a, &sol);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
        assert_eq!(f.inertia().positive, n);
    }

    #[test]
    fn householder_complement_is_orthonormal() {
        for v in [vec![3.0, 4.0, 0.0, 1.0], vec![-1.0, 2.0, 0.5], vec![0.0, 0.0, 1.0]] {
            let basis = householder_complement(&v);
            assert_eq!(basis.len(), v.len() - 1);
            for (a, ba) in basis.iter().enumerate() {
                let dv: f64 = ba.iter().zip(&v).map(|(x, y)| x * y).sum();
                assert!(dv.abs() < 1e-14);
                for bb in &basis[a..] {
                    let d: f64 = ba.iter().zip(bb).map(|(x, y)| x * y).sum();
                    let expect = if std::ptr::eq(ba, bb) { 1.0 } else { 0.0 };
                    assert!((d - expect).abs() < 1e-14);
                }
            }
        }
    }
}
