use std::time::Instant;

use cmc_core::geometry::{
    clifford_immersion, compute_surface_geometry, control_noncmc_immersion, read_sample_file,
    umbilical_scalars, umbilical_sphere_immersion, validate_immersion, CONTROL_R0,
};
use cmc_core::laplace::{assemble_forms, identity_residuals};
use cmc_core::spectrum::{
    clifford_spectrum_exact, discrete_spectrum, simons_check_report, umbilical_spectrum_exact,
    weak_index_exact, DiscreteProblem, SolveMethod,
};
use cmc_core::testfn::{
    build_support_functions, jacobi_expansion_residual, lemma1_residual, theorem_certificate,
    CertificateTolerances,
};
use cmc_core::{
    AmbientVector, CliffordSpec, DiscreteForms, Error, ImmersionGrid, Orientation, SpectrumReport,
    SurfaceGeometry, UmbilicalSpec,
};
use rayon::prelude::*;

use crate::args::{
    Cli, Command, Family, FamilyArgs, IndexArgs, SpectrumArgs, SweepArgs, Target, ValidateArgs, VerifyArgs,
};
use crate::report::{
    sweep_csv, Check, IndexResult, Params, ResidualRow, Results, RunReport, Settings, SpectrumResult,
    SurfaceSummary, SweepResult, SweepRow, Thresholds, ValidateResult, VerifyResult,
};
use crate::CliError;

const DEFAULT_INDEX_GRID: usize = 48;
const DEFAULT_DISCRETE_TAU: f64 = 1e-2;
/// Bisection width for the smallest discrete Jacobi eigenvalue.
const LAMBDA_MIN_TOL: f64 = 1e-8;
/// Exact spectra are listed at least this far above zero so closed-form
/// zero modes show up in the report.
const ZERO_WINDOW: f64 = 1e-6;
/// Refinement ratios inside this band count as a stall.
const STALL_BAND: (f64, f64) = (0.9, 1.1);

/// Runs one parsed invocation. `echo` is stored as the report's command.
pub fn run(cli: &Cli, echo: String) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut report = match &cli.command {
        Command::Index(a) => cmd_index(a, echo)?,
        Command::Spectrum(a) => cmd_spectrum(a, echo)?,
        Command::Verify(a) => cmd_verify(a, echo)?,
        Command::Sweep(a) => cmd_sweep(a, echo, cli.out.as_deref())?,
        Command::Validate(a) => cmd_validate(a, echo)?,
    };
    if cli.timing {
        report.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(report)
}

fn require(value: Option<f64>, flag: &str, family: Family) -> Result<f64, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required for the {} family", family.name())))
}

fn orientation(flip: bool) -> Orientation {
    if flip {
        Orientation::Flipped
    } else {
        Orientation::Standard
    }
}

fn params_for(family: Family, a: &FamilyArgs, discrete: bool) -> Params {
    let mut p = Params { family: family.name().into(), ..Default::default() };
    match family {
        Family::Clifford => {
            p.p = Some(a.p);
            p.q = Some(a.q);
            p.r2 = a.r2;
        }
        Family::Umbilical => {
            p.n = Some(a.n);
            p.rho = a.rho;
        }
        Family::ControlNoncmc => p.r0 = Some(a.r0.unwrap_or(CONTROL_R0)),
        Family::File => p.file = a.file.as_ref().map(|f| f.display().to_string()),
    }
    if discrete {
        p.orientation = Some(if a.flip { "flipped" } else { "standard" }.into());
    }
    p
}

fn clifford_spec(a: &FamilyArgs) -> Result<CliffordSpec, CliError> {
    Ok(CliffordSpec::from_r2(a.p, a.q, require(a.r2, "r2", Family::Clifford)?)?)
}

fn umbilical_spec(a: &FamilyArgs) -> Result<UmbilicalSpec, CliError> {
    Ok(UmbilicalSpec::new(a.n, require(a.rho, "rho", Family::Umbilical)?)?)
}

/// Sampled immersion of the requested family at `grid x grid` (files keep
/// their own size).
pub fn build_grid(family: Family, a: &FamilyArgs, grid: usize) -> Result<ImmersionGrid, CliError> {
    Ok(match family {
        Family::Clifford => clifford_immersion(&clifford_spec(a)?, grid, grid)?,
        Family::Umbilical => umbilical_sphere_immersion(&umbilical_spec(a)?, grid, grid)?,
        Family::ControlNoncmc => control_noncmc_immersion(a.r0.unwrap_or(CONTROL_R0), grid, grid)?,
        Family::File => {
            let path = a.file.as_ref().ok_or_else(|| CliError::Usage("--file is required for the file family".into()))?;
            read_sample_file(path).map_err(|e| match e {
                Error::Io(source) => CliError::Io { path: path.display().to_string(), source },
                other => other.into(),
            })?
        }
    })
}

pub fn summarize(geom: &SurfaceGeometry) -> SurfaceSummary {
    let (a2_min, a2_max) = geom.a2.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
    let (ex_lo, ex_hi) = geom.umbilic_excess();
    SurfaceSummary {
        h_mean: geom.h_mean,
        h_max_dev: geom.h_max_dev,
        cmc: geom.h_constant,
        area: geom.area(),
        a2_min,
        a2_max,
        umbilic_excess: [ex_lo, ex_hi],
    }
}

fn constant_a2(s: &SurfaceSummary) -> Option<f64> {
    (s.a2_max - s.a2_min <= 1e-8 * (1.0 + s.a2_max.abs())).then_some(0.5 * (s.a2_min + s.a2_max))
}

fn cmc_warning(geom: &SurfaceGeometry) -> Option<String> {
    (!geom.h_constant).then(|| {
        format!(
            "surface is not CMC: max |H - mean H| = {:.3e} exceeds {:.1e}",
            geom.h_max_dev, geom.cmc_tol
        )
    })
}

fn exact_report(family: Family, a: &FamilyArgs, window: f64) -> Result<SpectrumReport, CliError> {
    match family {
        Family::Clifford => Ok(clifford_spectrum_exact(&clifford_spec(a)?, window)?),
        Family::Umbilical => Ok(umbilical_spectrum_exact(&umbilical_spec(a)?, window)?),
        _ => Err(CliError::Usage(format!(
            "the {} family has no closed-form spectrum; use --discrete",
            family.name()
        ))),
    }
}

fn exact_scalars(family: Family, a: &FamilyArgs) -> Result<(f64, f64), CliError> {
    match family {
        Family::Clifford => {
            let s = clifford_spec(a)?.scalars();
            Ok((s.h, s.a2))
        }
        _ => Ok(umbilical_scalars(&umbilical_spec(a)?)),
    }
}

fn uses_discrete(family: Family, exact: bool, discrete: bool) -> bool {
    match family {
        Family::Clifford | Family::Umbilical => discrete && !exact,
        Family::ControlNoncmc | Family::File => !exact,
    }
}

struct Discrete {
    geom: SurfaceGeometry,
    forms: DiscreteForms,
}

fn discretize(family: Family, a: &FamilyArgs, grid: usize) -> Result<Discrete, CliError> {
    let g = build_grid(family, a, grid)?;
    let geom = compute_surface_geometry(&g, orientation(a.flip))?;
    let forms = assemble_forms(&geom);
    Ok(Discrete { geom, forms })
}

pub fn cmd_index(a: &IndexArgs, echo: String) -> Result<RunReport, CliError> {
    let discrete = uses_discrete(a.family, a.exact, a.discrete);
    let params = params_for(a.family, &a.fam, discrete);
    if !discrete {
        let tau = a.tau.unwrap_or(0.0);
        let spectrum = exact_report(a.family, &a.fam, tau.max(ZERO_WINDOW))?;
        let index = weak_index_exact(&spectrum, tau)?;
        let (h, a2) = exact_scalars(a.family, &a.fam)?;
        return Ok(RunReport {
            command: echo,
            params,
            settings: Settings {
                method: Some("exact".into()),
                tau: Some(tau),
                window: Some(spectrum.window),
                ..Default::default()
            },
            results: Results::Index(IndexResult {
                index,
                h,
                a2: Some(a2),
                lambda_min: spectrum.lambda_min(),
                surface: None,
                warnings: Vec::new(),
            }),
            timing_ms: None,
        });
    }
    if a.family == Family::Umbilical {
        return Err(CliError::Usage(
            "the sampled umbilical sphere is a double cover; its discrete index is not meaningful, use --exact".into(),
        ));
    }
    let tau = a.tau.unwrap_or(DEFAULT_DISCRETE_TAU);
    let grid = a.grid.unwrap_or(DEFAULT_INDEX_GRID);
    let d = discretize(a.family, &a.fam, grid)?;
    let problem = DiscreteProblem::new(&d.geom, &d.forms, !a.no_deflate);
    let method = if a.dense { SolveMethod::Dense } else { SolveMethod::Auto };
    let index = problem.index(tau, method)?;
    let summary = summarize(&d.geom);
    Ok(RunReport {
        command: echo,
        params,
        settings: Settings {
            method: Some("discrete".into()),
            grid: Some([d.geom.grid.nu, d.geom.grid.nv]),
            tau: Some(tau),
            eigen_tol: Some(LAMBDA_MIN_TOL),
            deflate_killing: Some(!a.no_deflate),
            ..Default::default()
        },
        results: Results::Index(IndexResult {
            index,
            h: d.geom.h_mean,
            a2: constant_a2(&summary),
            lambda_min: Some(problem.lambda_min(LAMBDA_MIN_TOL)),
            surface: Some(summary),
            warnings: cmc_warning(&d.geom).into_iter().collect(),
        }),
        timing_ms: None,
    })
}

pub fn cmd_spectrum(a: &SpectrumArgs, echo: String) -> Result<RunReport, CliError> {
    if !(a.window >= 0.0 && a.window.is_finite()) {
        return Err(CliError::Usage(format!("--window must be a nonnegative number, got {}", a.window)));
    }
    let discrete = uses_discrete(a.family, false, a.discrete);
    let params = params_for(a.family, &a.fam, discrete);
    let mut settings = Settings { window: Some(a.window), tau: Some(a.tau), ..Default::default() };
    let mut warnings = Vec::new();
    let (spectrum, surface) = if discrete {
        if a.family == Family::Umbilical {
            return Err(CliError::Usage("the sampled umbilical sphere has no discrete spectrum; drop --discrete".into()));
        }
        let grid = a.grid.unwrap_or(DEFAULT_INDEX_GRID);
        let d = discretize(a.family, &a.fam, grid)?;
        let problem = DiscreteProblem::new(&d.geom, &d.forms, false);
        settings.method = Some("discrete".into());
        settings.grid = Some([d.geom.grid.nu, d.geom.grid.nv]);
        settings.eigen_tol = Some(a.eigen_tol);
        warnings.extend(cmc_warning(&d.geom));
        let description = format!("{} on a {}x{} grid", params.family, d.geom.grid.nu, d.geom.grid.nv);
        (discrete_spectrum(&d.geom, &problem, a.window, a.eigen_tol, description), Some(summarize(&d.geom)))
    } else {
        settings.method = Some("exact".into());
        (exact_report(a.family, &a.fam, a.window)?, None)
    };
    // a bisected eigenvalue is only known to within its bracket
    let simons_tau = if discrete { a.tau.max(a.eigen_tol) } else { a.tau };
    settings.tau = Some(simons_tau);
    let simons = match simons_check_report(&spectrum, simons_tau) {
        Ok(v) => Some(v),
        Err(Error::NotMinimal { h }) => {
            warnings.push(format!("H = {h:.6e} is not zero; first-eigenvalue bound not applicable"));
            None
        }
        Err(Error::InvalidSpec(msg)) => {
            warnings.push(msg);
            None
        }
        Err(e) => return Err(e.into()),
    };
    Ok(RunReport {
        command: echo,
        params,
        settings,
        results: Results::Spectrum(SpectrumResult { spectrum, simons, surface, warnings }),
        timing_ms: None,
    })
}

/// Max over the ambient basis of each residual.
fn residual_row(geom: &SurfaceGeometry, forms: &DiscreteForms) -> ResidualRow {
    let support = build_support_functions(geom);
    let mut row = ResidualRow { grid: [geom.grid.nu, geom.grid.nv], identity1: 0.0, identity2: 0.0, lemma: 0.0, expansion: 0.0 };
    for k in 0..4 {
        let u = AmbientVector::basis(4, k);
        let r = identity_residuals(geom, forms, &u);
        row.identity1 = row.identity1.max(r.r1);
        row.identity2 = row.identity2.max(r.r2);
        row.lemma = row.lemma.max(lemma1_residual(geom, &support, &u));
        row.expansion = row.expansion.max(jacobi_expansion_residual(geom, forms, &support, &u));
    }
    row
}

/// Coarse-to-fine ratio check. Returns `None` when both residuals sit at
/// roundoff, where no convergence order is observable.
fn ratio_check(
    name: &str,
    coarse: f64,
    fine: f64,
    area: f64,
    th: &Thresholds,
    diagnosis: &mut Vec<String>,
) -> Option<Check> {
    let floor = th.roundoff_floor * area;
    if coarse <= floor && fine <= floor {
        diagnosis.push(format!(
            "{name}: residuals {coarse:.2e} and {fine:.2e} are at roundoff on both grids; no refinement ratio to measure"
        ));
        return None;
    }
    let ratio = coarse / fine;
    if (STALL_BAND.0..=STALL_BAND.1).contains(&ratio) {
        diagnosis.push(format!(
            "{name}: residual stalls under refinement (ratio {ratio:.3}); it measures a modeling defect, not discretization error"
        ));
    }
    Some(Check::within(format!("{name} refinement ratio"), ratio, th.ratio_lo, th.ratio_hi))
}

pub fn cmd_verify(a: &VerifyArgs, echo: String) -> Result<RunReport, CliError> {
    let params = params_for(a.family, &a.fam, true);
    let thresholds = Thresholds { identity: a.identity_tol, lemma: a.lemma_tol, expansion: a.identity_tol, ..Default::default() };
    let tolerances = CertificateTolerances {
        tau_adm_rel: a.tau_adm,
        tau_strict_rel: a.tau_strict,
        ineq_tol_rel: a.ineq_tol,
        ..Default::default()
    };
    let d = discretize(a.family, &a.fam, a.grid)?;
    let mut settings = Settings {
        method: Some("discrete".into()),
        grid: Some([d.geom.grid.nu, d.geom.grid.nv]),
        ..Default::default()
    };
    let mut checks = Vec::new();
    let mut diagnosis: Vec<String> = cmc_warning(&d.geom).into_iter().collect();
    let mut residuals = Vec::new();
    let mut certificate = None;
    let mut index = None;
    match a.target {
        Target::Identities | Target::Lemma => {
            settings.thresholds = Some(thresholds);
            let coarse_grid = d.geom.grid.coarsened()?;
            let coarse_geom = compute_surface_geometry(&coarse_grid, orientation(a.fam.flip))?;
            let coarse_forms = assemble_forms(&coarse_geom);
            let coarse = residual_row(&coarse_geom, &coarse_forms);
            let fine = residual_row(&d.geom, &d.forms);
            let area = d.geom.area();
            if a.target == Target::Identities {
                for (name, c, f, bound) in [
                    ("identity 1", coarse.identity1, fine.identity1, thresholds.identity),
                    ("identity 2", coarse.identity2, fine.identity2, thresholds.identity),
                    ("jacobi expansion", coarse.expansion, fine.expansion, thresholds.expansion),
                ] {
                    checks.push(Check::at_most(format!("{name} max residual"), f, bound));
                    checks.extend(ratio_check(name, c, f, area, &thresholds, &mut diagnosis));
                }
            } else {
                checks.push(Check::at_most("lemma max residual", fine.lemma, thresholds.lemma));
                checks.extend(ratio_check("lemma", coarse.lemma, fine.lemma, area, &thresholds, &mut diagnosis));
            }
            residuals = vec![coarse, fine];
        }
        Target::Theorem => {
            settings.certificate = Some(tolerances);
            settings.tau = Some(a.tau);
            let support = build_support_functions(&d.geom);
            let problem = DiscreteProblem::new(&d.geom, &d.forms, true);
            let cert = theorem_certificate(&d.geom, &support, &problem.jacobi, &tolerances)?;
            let n = cert.n;
            checks.push(Check::flag("input is CMC", d.geom.h_constant));
            checks.push(Check::at_least("admissible dimension", cert.directions.len() as f64, (n + 1) as f64));
            checks.push(Check::below("worst Q(h_u)", cert.worst_q, -cert.tau_strict));
            checks.push(Check::below("largest Q eigenvalue on V", cert.q_max_eigenvalue, -cert.tau_strict));
            let worst_gap = cert.directions.iter().map(|d| -d.slack).fold(f64::NEG_INFINITY, f64::max);
            checks.push(Check::at_most("max Q(h_u) - rhs", worst_gap, cert.ineq_tol));
            checks.push(Check::at_least("rhs - Q margin on V", cert.inequality_margin, -cert.ineq_tol));
            checks.push(Check::at_least("certified bound", cert.bound.unwrap_or(0) as f64, (n + 1) as f64));
            let idx = problem.index(a.tau, SolveMethod::Auto)?;
            checks.push(Check::at_most("certified bound - weak index lower end", cert.bound.unwrap_or(0) as f64 - idx.weak_lo as f64, 0.0));
            diagnosis.extend(cert.warnings.iter().filter(|w| !diagnosis.contains(w)).cloned().collect::<Vec<_>>());
            if cert.independence_margin < 1e-6 {
                diagnosis.push(format!(
                    "support functions nearly dependent (margin {:.2e}): some l_v is a multiple of f_v, as on Clifford tori",
                    cert.independence_margin
                ));
            }
            certificate = Some(cert);
            index = Some(idx);
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(RunReport {
        command: echo,
        params,
        settings,
        results: Results::Verify(VerifyResult {
            target: a.target.name().into(),
            passed,
            checks,
            residuals,
            certificate,
            index,
            surface: summarize(&d.geom),
            diagnosis,
        }),
        timing_ms: None,
    })
}

fn sweep_values(a: &SweepArgs) -> Result<Vec<f64>, CliError> {
    if !a.r2.is_empty() {
        return Ok(a.r2.clone());
    }
    if a.steps == 0 {
        return Err(CliError::Usage("--steps must be positive".into()));
    }
    if a.steps == 1 {
        return Ok(vec![a.r2_min]);
    }
    let h = (a.r2_max - a.r2_min) / (a.steps - 1) as f64;
    Ok((0..a.steps).map(|k| a.r2_min + h * k as f64).collect())
}

pub fn sweep_row(p: usize, q: usize, r2: f64, tau: f64) -> Result<(SweepRow, bool), CliError> {
    let spec = CliffordSpec::from_r2(p, q, r2)?;
    let report = clifford_spectrum_exact(&spec, tau.max(ZERO_WINDOW))?;
    let index = weak_index_exact(&report, tau)?;
    let s = spec.scalars();
    let determined = index.weak().is_some() && index.strong().is_some();
    let row = SweepRow {
        r2,
        h: s.h,
        a2: s.a2,
        weak_index: index.weak_lo,
        strong_index: index.strong_lo,
        lambda_min: report.lambda_min().unwrap_or(f64::NAN),
    };
    Ok((row, determined))
}

pub fn cmd_sweep(a: &SweepArgs, echo: String, out: Option<&std::path::Path>) -> Result<RunReport, CliError> {
    let values = sweep_values(a)?;
    let computed: Vec<(SweepRow, bool)> =
        values.par_iter().map(|&r2| sweep_row(a.p, a.q, r2, a.tau)).collect::<Result<_, _>>()?;
    let n = (a.p + a.q) as f64;
    let min_weak = computed.iter().map(|(r, _)| r.weak_index).min().unwrap_or(0) as f64;
    let checks = vec![
        Check::flag("every index interval is a single value", computed.iter().all(|(_, d)| *d)),
        Check::at_least("min weak index vs n+1", min_weak, n + 1.0),
        Check::at_least("min weak index vs n+2", min_weak, n + 2.0),
    ];
    let rows: Vec<SweepRow> = computed.into_iter().map(|(r, _)| r).collect();
    let csv_path = match out {
        Some(path) => {
            std::fs::write(path, sweep_csv(&rows))
                .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            Some(path.display().to_string())
        }
        None => None,
    };
    Ok(RunReport {
        command: echo,
        params: Params {
            family: Family::Clifford.name().into(),
            p: Some(a.p),
            q: Some(a.q),
            r2_values: Some(values),
            ..Default::default()
        },
        settings: Settings { method: Some("exact".into()), tau: Some(a.tau), ..Default::default() },
        results: Results::Sweep(SweepResult { passed: checks.iter().all(|c| c.passed), rows, checks, csv_path }),
        timing_ms: None,
    })
}

pub fn cmd_validate(a: &ValidateArgs, echo: String) -> Result<RunReport, CliError> {
    let fam = FamilyArgs { p: 1, q: 1, r2: None, n: 2, rho: None, r0: None, file: Some(a.file.clone()), flip: a.flip };
    let grid = build_grid(Family::File, &fam, 0)?;
    let residuals = validate_immersion(&grid);
    let mut diagnosis = Vec::new();
    let on_sphere = residuals.on_sphere(a.sphere_tol);
    if !on_sphere {
        diagnosis.push(format!("positions or derivatives leave the unit sphere by more than {:.1e}", a.sphere_tol));
    }
    let geom = compute_surface_geometry(&grid, orientation(a.flip))?;
    diagnosis.extend(cmc_warning(&geom));
    let summary = summarize(&geom);
    if summary.umbilic_excess[1] <= geom.cmc_tol.max(1e-8) {
        diagnosis.push("surface is totally umbilical".into());
    }
    Ok(RunReport {
        command: echo,
        params: params_for(Family::File, &fam, true),
        settings: Settings { grid: Some([grid.nu, grid.nv]), ..Default::default() },
        results: Results::Validate(ValidateResult {
            grid: [grid.nu, grid.nv],
            residuals,
            sphere_tol: a.sphere_tol,
            passed: on_sphere,
            surface: Some(summary),
            diagnosis,
        }),
        timing_ms: None,
    })
}
