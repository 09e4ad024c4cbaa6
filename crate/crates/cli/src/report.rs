//! Run reports and their JSON, CSV and text renderings.

use std::fmt::Write as _;
use std::io;

use cmc_core::geometry::ImmersionResiduals;
use cmc_core::spectrum::{ModeLabel, SimonsVerdict};
use cmc_core::testfn::{CertificateTolerances, TheoremCertificate};
use cmc_core::{IndexReport, SpectrumReport};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// The invocation, arguments joined by spaces.
    pub command: String,
    pub params: Params,
    pub settings: Settings,
    pub results: Results,
    /// Wall-clock time; only recorded on request so reports stay reproducible.
    pub timing_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deflate_killing: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateTolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Thresholds>,
}

/// Pass thresholds of the verification batteries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub identity: f64,
    pub lemma: f64,
    pub expansion: f64,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    /// Residuals at or below this times the area on both grids are
    /// roundoff; no ratio is demanded of them.
    pub roundoff_floor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { identity: 5e-3, lemma: 1e-6, expansion: 5e-3, ratio_lo: 3.5, ratio_hi: 4.5, roundoff_floor: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Results {
    Index(IndexResult),
    Spectrum(SpectrumResult),
    Verify(VerifyResult),
    Sweep(SweepResult),
    Validate(ValidateResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSummary {
    pub h_mean: f64,
    pub h_max_dev: f64,
    pub cmc: bool,
    pub area: f64,
    pub a2_min: f64,
    pub a2_max: f64,
    /// Min and max over nodes of `|A|^2 - n H^2`.
    pub umbilic_excess: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexResult {
    pub index: IndexReport,
    pub h: f64,
    pub a2: Option<f64>,
    pub lambda_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub spectrum: SpectrumReport,
    pub simons: Option<SimonsVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<="`, `">="`, `"<"` or `"in"`.
    pub relation: String,
    pub bound: [f64; 2],
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: "<=".into(), bound: [bound, bound], passed: value <= bound }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: ">=".into(), bound: [bound, bound], passed: value >= bound }
    }

    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: "<".into(), bound: [bound, bound], passed: value < bound }
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), value, relation: "in".into(), bound: [lo, hi], passed: lo <= value && value <= hi }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self { name: name.into(), value: v, relation: ">=".into(), bound: [1.0, 1.0], passed: ok }
    }
}

/// Max residuals over the ambient basis directions at one grid size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub grid: [usize; 2],
    pub identity1: f64,
    pub identity2: f64,
    pub lemma: f64,
    pub expansion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyResult {
    pub target: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub residuals: Vec<ResidualRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<TheoremCertificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<IndexReport>,
    pub surface: SurfaceSummary,
    pub diagnosis: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r2: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    pub weak_index: usize,
    pub strong_index: usize,
    pub lambda_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateResult {
    pub grid: [usize; 2],
    pub residuals: ImmersionResiduals,
    pub sphere_tol: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceSummary>,
    pub diagnosis: Vec<String>,
}

/// `serde_json` formatter writing every float with 17 significant digits.
struct FixedFloat;

impl serde_json::ser::Formatter for FixedFloat {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloat);
        self.serialize(&mut ser).expect("report serialization cannot fail");
        buf.push(b'\n');
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn passed(&self) -> bool {
        match &self.results {
            Results::Verify(v) => v.passed,
            Results::Sweep(s) => s.passed,
            Results::Validate(v) => v.passed,
            Results::Index(_) | Results::Spectrum(_) => true,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.results {
            Results::Sweep(s) => out.push_str(&sweep_csv(&s.rows)),
            Results::Index(r) => {
                let i = &r.index;
                out.push_str("weak_lo,weak_hi,strong_lo,strong_hi,tau,method,zero_modes,H,lambda_min\n");
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    i.weak_lo,
                    i.weak_hi,
                    i.strong_lo,
                    i.strong_hi,
                    num(i.tau),
                    method_name(i),
                    i.zero_modes,
                    num(r.h),
                    r.lambda_min.map(num).unwrap_or_default()
                );
            }
            Results::Spectrum(s) => {
                out.push_str("eigenvalue,multiplicity,label\n");
                for e in &s.spectrum.entries {
                    let _ = writeln!(out, "{},{},{}", num(e.eigenvalue), e.multiplicity, label(&e.label));
                }
            }
            Results::Verify(v) => {
                out.push_str("check,value,relation,bound_lo,bound_hi,passed\n");
                for c in &v.checks {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        c.name,
                        num(c.value),
                        c.relation,
                        num(c.bound[0]),
                        num(c.bound[1]),
                        c.passed
                    );
                }
            }
            Results::Validate(v) => {
                let r = &v.residuals;
                out.push_str("unit_norm,tangent_u,tangent_v,fd_first,fd_second,passed\n");
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    num(r.unit_norm),
                    num(r.tangent_u),
                    num(r.tangent_v),
                    num(r.fd_first),
                    num(r.fd_second),
                    v.passed
                );
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.command);
        let _ = writeln!(out, "family: {}", family_line(&self.params));
        match &self.results {
            Results::Index(r) => {
                let i = &r.index;
                let _ = writeln!(out, "H = {:.10}   |A|^2 = {}", r.h + 0.0, r.a2.map(|a| format!("{a:.10}")).unwrap_or("varies".into()));
                if let Some(l) = r.lambda_min {
                    let _ = writeln!(out, "lambda_min = {l:.10}");
                }
                let rows = vec![
                    vec!["weak".into(), interval(i.weak_lo, i.weak_hi)],
                    vec!["strong".into(), interval(i.strong_lo, i.strong_hi)],
                    vec!["tau".into(), format!("{:.3e}", i.tau)],
                    vec!["method".into(), method_name(i).into()],
                    vec!["zero modes".into(), i.zero_modes.to_string()],
                ];
                out.push_str(&table(&["index", "value"], &rows));
                warnings(&mut out, &r.warnings);
            }
            Results::Spectrum(s) => {
                let rows: Vec<Vec<String>> = s
                    .spectrum
                    .entries
                    .iter()
                    .map(|e| vec![format!("{:.10}", e.eigenvalue), e.multiplicity.to_string(), label(&e.label)])
                    .collect();
                let _ = writeln!(out, "window {}   cutoff {}", s.spectrum.window, s.spectrum.cutoff);
                out.push_str(&table(&["eigenvalue", "mult", "mode"], &rows));
                if let Some(v) = &s.simons {
                    let _ = writeln!(
                        out,
                        "lambda_min {:.10} vs bound {}: {}{}",
                        v.lambda_min,
                        v.bound,
                        if v.holds { "holds" } else { "does not hold" },
                        v.note.as_ref().map(|n| format!(" ({n})")).unwrap_or_default()
                    );
                }
                warnings(&mut out, &s.warnings);
            }
            Results::Verify(v) => {
                let _ = writeln!(out, "verify {}: {}", v.target, if v.passed { "PASS" } else { "FAIL" });
                if !v.residuals.is_empty() {
                    let rows: Vec<Vec<String>> = v
                        .residuals
                        .iter()
                        .map(|r| {
                            vec![
                                format!("{}x{}", r.grid[0], r.grid[1]),
                                format!("{:.3e}", r.identity1),
                                format!("{:.3e}", r.identity2),
                                format!("{:.3e}", r.lemma),
                                format!("{:.3e}", r.expansion),
                            ]
                        })
                        .collect();
                    out.push_str(&table(&["grid", "identity 1", "identity 2", "lemma", "expansion"], &rows));
                }
                if let Some(c) = &v.certificate {
                    let rows: Vec<Vec<String>> = c
                        .directions
                        .iter()
                        .map(|d| {
                            vec![
                                format!("({})", d.u.0.iter().map(|x| format!("{:.4}", x + 0.0)).collect::<Vec<_>>().join(", ")),
                                format!("{:.6e}", d.q_value),
                                format!("{:.6e}", d.rhs),
                                format!("{:.6e}", d.slack),
                            ]
                        })
                        .collect();
                    out.push_str(&table(&["u", "Q(h_u)", "rhs", "slack"], &rows));
                    let _ = writeln!(
                        out,
                        "certified bound: {}",
                        c.bound.map(|b| format!("ind_T >= {b}")).unwrap_or("none".into())
                    );
                }
                let rows: Vec<Vec<String>> = v
                    .checks
                    .iter()
                    .map(|c| {
                        let bound = if c.relation == "in" {
                            format!("[{}, {}]", c.bound[0], c.bound[1])
                        } else {
                            format!("{:.3e}", c.bound[0])
                        };
                        vec![
                            c.name.clone(),
                            format!("{:.6e}", c.value),
                            c.relation.clone(),
                            bound,
                            if c.passed { "pass" } else { "FAIL" }.into(),
                        ]
                    })
                    .collect();
                out.push_str(&table(&["check", "value", "", "bound", "result"], &rows));
                warnings(&mut out, &v.diagnosis);
            }
            Results::Sweep(s) => {
                let rows: Vec<Vec<String>> = s
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            format!("{:.6}", r.r2),
                            format!("{:.6}", r.h),
                            format!("{:.6}", r.a2),
                            r.weak_index.to_string(),
                            r.strong_index.to_string(),
                            format!("{:.6}", r.lambda_min),
                        ]
                    })
                    .collect();
                out.push_str(&table(&["r2", "H", "A2", "weak", "strong", "lambda_min"], &rows));
                for c in s.checks.iter().filter(|c| !c.passed) {
                    let _ = writeln!(out, "FAIL {}: {}", c.name, c.value);
                }
                if let Some(p) = &s.csv_path {
                    let _ = writeln!(out, "csv written to {p}");
                }
            }
            Results::Validate(v) => {
                let r = &v.residuals;
                let rows = vec![
                    vec!["| |phi| - 1 |".into(), format!("{:.3e}", r.unit_norm)],
                    vec!["phi . phi_u".into(), format!("{:.3e}", r.tangent_u)],
                    vec!["phi . phi_v".into(), format!("{:.3e}", r.tangent_v)],
                    vec!["first derivatives vs FD".into(), format!("{:.3e}", r.fd_first)],
                    vec!["second derivatives vs FD".into(), format!("{:.3e}", r.fd_second)],
                ];
                let _ = writeln!(out, "grid {}x{}, derivatives {:?}", v.grid[0], v.grid[1], r.derivatives);
                out.push_str(&table(&["residual", "max"], &rows));
                let _ = writeln!(out, "{}", if v.passed { "PASS" } else { "FAIL" });
                warnings(&mut out, &v.diagnosis);
            }
        }
        if let Some(t) = self.timing_ms {
            let _ = writeln!(out, "time {t:.1} ms");
        }
        out
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("r2,H,A2,weak_index,strong_index,lambda_min\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(r.r2),
            num(r.h),
            num(r.a2),
            r.weak_index,
            r.strong_index,
            num(r.lambda_min)
        );
    }
    out
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn method_name(i: &IndexReport) -> &'static str {
    match i.method {
        cmc_core::spectrum::IndexMethod::Exact => "exact",
        cmc_core::spectrum::IndexMethod::BandedLdlt => "banded-ldlt",
        cmc_core::spectrum::IndexMethod::DenseEigen => "dense-eigen",
    }
}

fn label(l: &ModeLabel) -> String {
    match l {
        ModeLabel::Pair { k, m } => format!("({k},{m})"),
        ModeLabel::Degree { k } => format!("k={k}"),
        ModeLabel::Cluster { index } => format!("#{index}"),
    }
}

fn interval(lo: usize, hi: usize) -> String {
    if lo == hi {
        lo.to_string()
    } else {
        format!("[{lo}, {hi}]")
    }
}

fn family_line(p: &Params) -> String {
    let mut parts = vec![p.family.clone()];
    if let Some(v) = p.p {
        parts.push(format!("p={v}"));
    }
    if let Some(v) = p.q {
        parts.push(format!("q={v}"));
    }
    if let Some(v) = p.r2 {
        parts.push(format!("r2={v}"));
    }
    if let Some(v) = p.n {
        parts.push(format!("n={v}"));
    }
    if let Some(v) = p.rho {
        parts.push(format!("rho={v}"));
    }
    if let Some(v) = p.r0 {
        parts.push(format!("r0={v}"));
    }
    if let Some(v) = &p.file {
        parts.push(format!("file={v}"));
    }
    if let Some(v) = &p.orientation {
        parts.push(format!("orientation={v}"));
    }
    parts.join(" ")
}

fn warnings(out: &mut String, list: &[String]) {
    for w in list {
        let _ = writeln!(out, "note: {w}");
    }
}

/// Left-aligned plain-text table.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let s: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        s.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out.push_str(&line(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(|s| s.as_str()).collect()));
    for r in rows {
        out.push_str(&line(r.iter().map(|s| s.as_str()).collect()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        RunReport {
            command: "sweep --p 1 --q 1".into(),
            params: Params { family: "clifford".into(), p: Some(1), q: Some(1), ..Default::default() },
            settings: Settings { tau: Some(0.0), ..Default::default() },
            results: Results::Sweep(SweepResult {
                rows: vec![SweepRow { r2: 0.2, h: -0.75, a2: 4.25, weak_index: 6, strong_index: 7, lambda_min: -6.25 }],
                checks: vec![Check::at_least("weak >= n+2", 6.0, 4.0)],
                passed: true,
                csv_path: None,
            }),
            timing_ms: None,
        }
    }

    #[test]
    fn json_round_trip_and_fixed_floats() {
        let r = sample();
        let text = r.to_json();
        assert!(text.starts_with("{\"command\":"));
        assert!(text.contains("\"r2\":2.0000000000000001e-1"));
        assert!(text.contains("\"timing_ms\":null"));
        assert!(text.contains("\"kind\":\"sweep\""));
        assert_eq!(RunReport::from_json(&text).unwrap(), r);
        assert_eq!(text, sample().to_json());
    }

    #[test]
    fn csv_header() {
        let csv = sample().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("r2,H,A2,weak_index,strong_index,lambda_min"));
        assert!(lines.next().unwrap().ends_with(",6,7,-6.2500000000000000e0"));
    }

    #[test]
    fn check_relations() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::below("a", 1.0, 1.0).passed);
        assert!(Check::within("a", 4.0, 3.5, 4.5).passed);
        assert!(!Check::within("a", 1.0, 3.5, 4.5).passed);
        assert!(!Check::flag("x", false).passed);
    }

    #[test]
    fn text_table_aligns() {
        let t = table(&["a", "bbb"], &[vec!["xxxx".into(), "y".into()]]);
        assert_eq!(t, "a     bbb\n----  ---\nxxxx  y\n");
    }
}
