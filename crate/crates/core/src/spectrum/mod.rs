//! Jacobi spectra and stability indices.
//!
//! The Jacobi operator is `J = -Delta - |A|^2 - n`. Exact spectra are
//! enumerated for the isoparametric families; the discrete path counts
//! negative directions by Sylvester inertia (see [`discrete`]).

pub mod discrete;

pub use discrete::{
    assemble_jacobi, discrete_spectrum, killing_jacobi_fields, strong_index_discrete,
    weak_index_discrete, DiscreteProblem, JacobiForm, SolveMethod,
};

use serde::{Deserialize, Serialize};

use crate::geometry::{umbilical_scalars, CliffordSpec, UmbilicalSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum SpectrumFamily {
    Clifford { p: usize, q: usize, r2: f64 },
    Umbilical { n: usize, rho: f64 },
    Discrete { description: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeLabel {
    /// Degrees of the spherical harmonics on the two factors.
    Pair { k: usize, m: usize },
    Degree { k: usize },
    /// Cluster position in a discrete spectrum.
    Cluster { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub eigenvalue: f64,
    pub multiplicity: usize,
    pub label: ModeLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub family: SpectrumFamily,
    /// Hypersurface dimension.
    pub n: usize,
    pub h: f64,
    /// `|A|^2` when it is constant over the surface.
    pub a2: Option<f64>,
    /// Every eigenvalue strictly below `window` is listed.
    pub window: f64,
    /// Largest mode degree examined during enumeration.
    pub cutoff: usize,
    pub entries: Vec<SpectrumEntry>,
}

impl SpectrumReport {
    pub fn lambda_min(&self) -> Option<f64> {
        self.entries.first().map(|e| e.eigenvalue)
    }

    pub fn total_multiplicity(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    fn zero_eps(&self) -> f64 {
        1e-10 * (1.0 + self.a2.unwrap_or(0.0) + self.n as f64)
    }

    /// Whether the entry's closed-form value is zero up to roundoff.
    pub fn is_exact_zero(&self, entry: &SpectrumEntry) -> bool {
        entry.eigenvalue.abs() <= self.zero_eps()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexMethod {
    Exact,
    BandedLdlt,
    DenseEigen,
}

/// Certified index intervals under the zero tolerance `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub weak_lo: usize,
    pub weak_hi: usize,
    pub strong_lo: usize,
    pub strong_hi: usize,
    pub tau: f64,
    pub method: IndexMethod,
    /// Exact zero modes excluded from the counts: closed-form zeros on the
    /// exact path, deflated Killing Jacobi fields on the discrete path.
    pub zero_modes: usize,
}

impl IndexReport {
    pub fn weak(&self) -> Option<usize> {
        (self.weak_lo == self.weak_hi).then_some(self.weak_lo)
    }

    pub fn strong(&self) -> Option<usize> {
        (self.strong_lo == self.strong_hi).then_some(self.strong_lo)
    }
}

/// Dimension of the degree-`k` spherical harmonics on `S^d`:
/// `C(d+k, k) - C(d+k-2, k-2)`.
pub fn harmonic_multiplicity(d: usize, k: usize) -> usize {
    fn binom(n: usize, k: usize) -> usize {
        let mut acc: u128 = 1;
        for i in 0..k as u128 {
            acc = acc * (n as u128 - i) / (i + 1);
        }
        acc as usize
    }
    let lower = if k >= 2 { binom(d + k - 2, k - 2) } else { 0 };
    binom(d + k, k) - lower
}

fn sort_entries(entries: &mut [SpectrumEntry]) {
    entries.sort_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue).then(a.label.cmp(&b.label)));
}

/// All Jacobi eigenvalues of `S^p(r) x S^q(s)` below `window`:
/// `k(k+p-1)/r^2 + m(m+q-1)/s^2 - |A|^2 - n`, multiplicity
/// `mult_p(k) mult_q(m)`.
pub fn clifford_spectrum_exact(spec: &CliffordSpec, window: f64) -> Result<SpectrumReport> {
    if !(window >= 0.0 && window.is_finite()) {
        return Err(Error::InvalidSpec(format!("window must be finite and >= 0, got {window}")));
    }
    let sc = spec.scalars();
    let (p, q) = (spec.p, spec.q);
    let (r2, s2) = (spec.r2(), 1.0 - spec.r2());
    let shift = sc.a2 + spec.n() as f64;
    let eig_u = |k: usize| (k * (k + p - 1)) as f64 / r2;
    let eig_v = |m: usize| (m * (m + q - 1)) as f64 / s2;
    let mut entries = Vec::new();
    let mut cutoff = 0;
    // both eigenvalue sequences increase strictly, so each loop stops at the
    // first degree whose smallest possible lambda reaches the window
    let mut k = 0;
    while eig_u(k) - shift < window {
        let mut m = 0;
        loop {
            let lam = eig_u(k) + eig_v(m) - shift;
            if lam >= window {
                break;
            }
            entries.push(SpectrumEntry {
                eigenvalue: lam,
                multiplicity: harmonic_multiplicity(p, k) * harmonic_multiplicity(q, m),
                label: ModeLabel::Pair { k, m },
            });
            m += 1;
        }
        cutoff = cutoff.max(m);
        k += 1;
    }
    cutoff = cutoff.max(k);
    sort_entries(&mut entries);
    Ok(SpectrumReport {
        family: SpectrumFamily::Clifford { p, q, r2 },
        n: spec.n(),
        h: sc.h,
        a2: Some(sc.a2),
        window,
        cutoff,
        entries,
    })
}

/// Jacobi eigenvalues of a geodesic sphere: `k(k+n-1)/rho^2 - nH^2 - n`.
pub fn umbilical_spectrum_exact(spec: &UmbilicalSpec, window: f64) -> Result<SpectrumReport> {
    if !(window >= 0.0 && window.is_finite()) {
        return Err(Error::InvalidSpec(format!("window must be finite and >= 0, got {window}")));
    }
    let (h, a2) = umbilical_scalars(spec);
    let n = spec.n;
    let rho2 = spec.rho * spec.rho;
    let mut entries = Vec::new();
    let mut k = 0;
    loop {
        let lam = (k * (k + n - 1)) as f64 / rho2 - a2 - n as f64;
        if lam >= window {
            break;
        }
        entries.push(SpectrumEntry {
            eigenvalue: lam,
            multiplicity: harmonic_multiplicity(n, k),
            label: ModeLabel::Degree { k },
        });
        k += 1;
    }
    Ok(SpectrumReport {
        family: SpectrumFamily::Umbilical { n, rho: spec.rho },
        n,
        h,
        a2: Some(a2),
        window,
        cutoff: k,
        entries,
    })
}

/// Weak and strong index from a closed-form spectrum of a constant-`|A|^2`
/// family, where constants are eigenfunctions and the mean-zero constraint
/// removes exactly the constant mode.
///
/// Closed-form zeros are not negative and are not counted; any other entry
/// with `|lambda| < tau` widens the interval.
pub fn weak_index_exact(report: &SpectrumReport, tau: f64) -> Result<IndexReport> {
    if let SpectrumFamily::Discrete { description } = &report.family {
        return Err(Error::NotConstantCurvature(description.clone()));
    }
    if !(tau >= 0.0) || report.window < tau {
        return Err(Error::InvalidSpec(format!(
            "tau must lie in [0, window = {}], got {tau}",
            report.window
        )));
    }
    let is_constant = |l: &ModeLabel| matches!(l, ModeLabel::Pair { k: 0, m: 0 } | ModeLabel::Degree { k: 0 });
    let (mut strong_lo, mut strong_hi, mut zero_modes) = (0, 0, 0);
    let (mut const_lo, mut const_hi) = (0, 0);
    for e in &report.entries {
        if report.is_exact_zero(e) {
            zero_modes += e.multiplicity;
            continue;
        }
        let lo = e.eigenvalue <= -tau && e.eigenvalue < 0.0;
        let hi = e.eigenvalue < tau || e.eigenvalue < 0.0;
        if lo {
            strong_lo += e.multiplicity;
            const_lo += usize::from(is_constant(&e.label));
        }
        if hi {
            strong_hi += e.multiplicity;
            const_hi += usize::from(is_constant(&e.label));
        }
    }
    Ok(IndexReport {
        weak_lo: strong_lo - const_lo,
        weak_hi: strong_hi - const_hi,
        strong_lo,
        strong_hi,
        tau,
        method: IndexMethod::Exact,
        zero_modes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimonsVerdict {
    pub lambda_min: f64,
    /// `-2n`
    pub bound: f64,
    /// `lambda_min <= -2n + tau`
    pub holds: bool,
    pub note: Option<String>,
}

/// Checks the first-eigenvalue bound `lambda_min <= -2n` for a minimal
/// hypersurface. A totally geodesic equator has `lambda_min = -n`; the
/// verdict is then false and flagged rather than treated as a failure.
pub fn simons_check(lambda_min: f64, n: usize, h: f64, a2: Option<f64>, tau: f64) -> Result<SimonsVerdict> {
    const H_TOL: f64 = 1e-8;
    if h.abs() > H_TOL {
        return Err(Error::NotMinimal { h });
    }
    let bound = -2.0 * n as f64;
    let holds = lambda_min <= bound + tau;
    let note = match a2 {
        Some(a) if a.abs() <= 1e-12 => {
            Some("totally geodesic equator excluded from the bound's scope".to_string())
        }
        _ => None,
    };
    Ok(SimonsVerdict { lambda_min, bound, holds, note })
}

pub fn simons_check_report(report: &SpectrumReport, tau: f64) -> Result<SimonsVerdict> {
    let lam = report
        .lambda_min()
        .ok_or_else(|| Error::InvalidSpec("empty spectrum".into()))?;
    simons_check(lam, report.n, report.h, report.a2, tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clifford(p: usize, q: usize, r2: f64) -> SpectrumReport {
        clifford_spectrum_exact(&CliffordSpec::from_r2(p, q, r2).unwrap(), 0.0).unwrap()
    }

    /// Brute-force lattice enumeration, independent of the stopping rule.
    fn brute_negatives(p: usize, q: usize, r2: f64) -> Vec<(f64, usize, usize, usize)> {
        let spec = CliffordSpec::from_r2(p, q, r2).unwrap();
        let sc = spec.scalars();
        let mut out = Vec::new();
        for k in 0..60 {
            for m in 0..60 {
                let lam = (k * (k + p - 1)) as f64 / r2 + (m * (m + q - 1)) as f64 / (1.0 - r2)
                    - sc.a2
                    - (p + q) as f64;
                if lam < -1e-9 {
                    out.push((lam, harmonic_multiplicity(p, k) * harmonic_multiplicity(q, m), k, m));
                }
            }
        }
        out
    }

    #[test]
    fn multiplicities() {
        assert_eq!((0..5).map(|k| harmonic_multiplicity(1, k)).collect::<Vec<_>>(), [1, 2, 2, 2, 2]);
        assert_eq!((0..4).map(|k| harmonic_multiplicity(2, k)).collect::<Vec<_>>(), [1, 3, 5, 7]);
        assert_eq!((0..3).map(|k| harmonic_multiplicity(3, k)).collect::<Vec<_>>(), [1, 4, 9]);
    }

    #[test]
    fn clifford_symmetric_minimal() {
        let rep = clifford(1, 1, 0.5);
        let got: Vec<_> = rep.entries.iter().map(|e| (e.eigenvalue, e.multiplicity, e.label)).collect();
        assert_eq!(got.len(), 3);
        assert!((got[0].0 + 4.0).abs() < 1e-12 && got[0].1 == 1);
        assert_eq!(got[0].2, ModeLabel::Pair { k: 0, m: 0 });
        for e in &got[1..] {
            assert!((e.0 + 2.0).abs() < 1e-12 && e.1 == 2);
        }
        let idx = weak_index_exact(&rep, 0.0).unwrap();
        assert_eq!((idx.weak(), idx.strong()), (Some(4), Some(5)));
    }

    #[test]
    fn clifford_r2_point_two() {
        let rep = clifford(1, 1, 0.2);
        let vals: Vec<(f64, usize)> = rep.entries.iter().map(|e| (e.eigenvalue, e.multiplicity)).collect();
        let expect = [(-6.25, 1), (-5.0, 2), (-1.25, 2), (-1.25, 2)];
        assert_eq!(vals.len(), 4);
        for ((a, ma), (b, mb)) in vals.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
            assert_eq!(*ma, mb);
        }
        assert_eq!(rep.total_multiplicity(), 7);
        let idx = weak_index_exact(&rep, 0.0).unwrap();
        assert_eq!((idx.weak(), idx.strong()), (Some(6), Some(7)));
    }

    #[test]
    fn clifford_r2_point_nine() {
        let rep = clifford(1, 1, 0.9);
        let idx = weak_index_exact(&rep, 0.0).unwrap();
        assert_eq!((idx.weak(), idx.strong()), (Some(8), Some(9)));
        // (1,1) sits exactly at zero with multiplicity 4
        let wide = clifford_spectrum_exact(&CliffordSpec::from_r2(1, 1, 0.9).unwrap(), 0.5).unwrap();
        let z: Vec<_> = wide.entries.iter().filter(|e| wide.is_exact_zero(e)).collect();
        assert_eq!(z.len(), 1);
        assert_eq!((z[0].label, z[0].multiplicity), (ModeLabel::Pair { k: 1, m: 1 }, 4));
        assert_eq!(weak_index_exact(&wide, 1e-2).unwrap().zero_modes, 4);
    }

    #[test]
    fn simons_equality_cases() {
        let v = simons_check_report(&clifford(1, 1, 0.5), 1e-9).unwrap();
        assert!(v.holds && (v.lambda_min + 4.0).abs() < 1e-12);
        let v = simons_check_report(&clifford(1, 2, 1.0 / 3.0), 1e-9).unwrap();
        assert!(v.holds && (v.lambda_min + 6.0).abs() < 1e-12);
        assert!(matches!(simons_check_report(&clifford(1, 1, 0.2), 1e-9), Err(Error::NotMinimal { .. })));
    }

    #[test]
    fn simons_flags_equator() {
        let rep = umbilical_spectrum_exact(&UmbilicalSpec::new(2, 1.0).unwrap(), 0.0).unwrap();
        let v = simons_check_report(&rep, 1e-9).unwrap();
        assert!(!v.holds);
        assert_eq!(v.lambda_min, -2.0);
        assert!(v.note.is_some());
    }

    #[test]
    fn umbilical_spectra() {
        let eq = umbilical_spectrum_exact(&UmbilicalSpec::new(2, 1.0).unwrap(), 0.5).unwrap();
        assert_eq!(eq.entries[0].eigenvalue, -2.0);
        assert_eq!(eq.entries[1].eigenvalue, 0.0);
        assert_eq!(eq.entries[1].multiplicity, 3);
        let s = umbilical_spectrum_exact(&UmbilicalSpec::new(2, 0.8).unwrap(), 0.5).unwrap();
        assert!((s.entries[0].eigenvalue + 3.125).abs() < 1e-12);
        assert!(s.is_exact_zero(&s.entries[1]));
        let idx = weak_index_exact(&s, 1e-2).unwrap();
        assert_eq!((idx.weak(), idx.strong()), (Some(0), Some(1)));
    }

    #[test]
    fn rejects_discrete_reports() {
        let mut rep = clifford(1, 1, 0.5);
        rep.family = SpectrumFamily::Discrete { description: "grid".into() };
        assert!(matches!(weak_index_exact(&rep, 0.0), Err(Error::NotConstantCurvature(_))));
        assert!(weak_index_exact(&clifford(1, 1, 0.5), 0.5).is_err());
    }

    #[test]
    fn tau_widens_interval() {
        // lambda_{0,2} = (4 r2 - 1) / (r2 s2) crosses zero at r2 = 1/4
        let spec = CliffordSpec::from_r2(1, 1, 0.2501).unwrap();
        let rep = clifford_spectrum_exact(&spec, 0.1).unwrap();
        let idx = weak_index_exact(&rep, 1e-2).unwrap();
        assert!(idx.weak_lo < idx.weak_hi, "{idx:?}");
    }

    proptest::proptest! {
        #[test]
        fn enumeration_matches_brute_force(p in 1usize..4, q in 1usize..4, r2 in 0.05f64..0.95) {
            let rep = clifford(p, q, r2);
            let brute = brute_negatives(p, q, r2);
            let total: usize = brute.iter().map(|b| b.1).sum();
            let idx = weak_index_exact(&rep, 0.0).unwrap();
            proptest::prop_assert_eq!(idx.strong_lo, total);
            proptest::prop_assert_eq!(idx.weak_lo, total - 1);
            proptest::prop_assert!(idx.weak_lo >= p + q + 2);
            let vals: Vec<f64> = rep.entries.iter().map(|e| e.eigenvalue).collect();
            proptest::prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn umbilical_first_eigenvalue_vanishes(n in 2usize..8, rho in 0.05f64..=1.0) {
            let rep = umbilical_spectrum_exact(&UmbilicalSpec::new(n, rho).unwrap(), 0.5).unwrap();
            let e1 = &rep.entries[1];
            proptest::prop_assert!(rep.is_exact_zero(e1));
            proptest::prop_assert_eq!(e1.multiplicity, n + 1);
            proptest::prop_assert_eq!(weak_index_exact(&rep, 1e-3).unwrap().weak(), Some(0));
        }
    }
}
