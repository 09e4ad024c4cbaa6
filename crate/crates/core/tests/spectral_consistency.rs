use cmc_core::geometry::{clifford_immersion, compute_surface_geometry, CliffordSpec, Orientation};
use cmc_core::laplace::assemble_forms;
use cmc_core::spectrum::DiscreteProblem;

/// Eigenvalues `k^2/r^2 + m^2/s^2` of the flat torus, sorted, with multiplicity.
fn flat_torus_eigenvalues(r2: f64, count: usize) -> Vec<f64> {
    let mut v = Vec::new();
    for k in -6i32..=6 {
        for m in -6i32..=6 {
            v.push((k * k) as f64 / r2 + (m * m) as f64 / (1.0 - r2));
        }
    }
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    v
}

fn lowest_laplace(r2: f64, n: usize, window: f64) -> Vec<f64> {
    let g = clifford_immersion(&CliffordSpec::from_r2(1, 1, r2).unwrap(), n, n).unwrap();
    let geom = compute_surface_geometry(&g, Orientation::Standard).unwrap();
    let forms = assemble_forms(&geom);
    let problem = DiscreteProblem::new(&geom, &forms, false);
    problem
        .laplace_spectrum(window, 1e-9)
        .into_iter()
        .flat_map(|(x, m)| std::iter::repeat_n(x, m))
        .collect()
}

#[test]
fn lowest_ten_laplace_eigenvalues_at_64() {
    let exact = flat_torus_eigenvalues(0.5, 10);
    assert_eq!(exact, vec![0.0, 2.0, 2.0, 2.0, 2.0, 4.0, 4.0, 4.0, 4.0, 8.0]);
    let got = lowest_laplace(0.5, 64, 8.5);
    assert!(got.len() >= 10, "{got:?}");
    assert!(got[0].abs() < 1e-8);
    for (g, e) in got.iter().zip(&exact).skip(1) {
        assert!((g - e).abs() <= 0.02 * e, "{g} vs {e}");
    }
}

#[test]
fn laplace_eigenvalues_converge_at_second_order() {
    let e = flat_torus_eigenvalues(0.2, 6);
    let coarse = lowest_laplace(0.2, 16, e[5] + 1.0);
    let fine = lowest_laplace(0.2, 32, e[5] + 1.0);
    for k in 1..6 {
        let ratio = (coarse[k] - e[k]).abs() / (fine[k] - e[k]).abs();
        assert!((3.5..=4.5).contains(&ratio), "mode {k}: ratio {ratio}");
    }
}
