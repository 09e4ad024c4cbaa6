//! Plain-text immersion samples.
//!
//! Header `Nu Nv Lu Lv has_derivatives(0|1)`, then `Nu*Nv` rows
//! `i j x0 x1 x2 x3 [du0..du3 dv0..dv3 duu0..duu3 duv0..duv3 dvv0..dvv3]`
//! in row-major order (i outer, j inner). Blank lines and lines starting
//! with `#` are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::immersion::{DerivativeSource, ImmersionGrid, Vec4};
use crate::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_sample(text: &str) -> Result<ImmersionGrid> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(parse_err(hline, "header must be `Nu Nv Lu Lv has_derivatives`"));
    }
    let nu: usize = fields[0].parse().map_err(|_| parse_err(hline, "bad Nu"))?;
    let nv: usize = fields[1].parse().map_err(|_| parse_err(hline, "bad Nv"))?;
    let lu: f64 = fields[2].parse().map_err(|_| parse_err(hline, "bad Lu"))?;
    let lv: f64 = fields[3].parse().map_err(|_| parse_err(hline, "bad Lv"))?;
    let has_deriv = match fields[4] {
        "0" => false,
        "1" => true,
        other => return Err(parse_err(hline, format!("has_derivatives must be 0 or 1, got {other}"))),
    };
    let width = if has_deriv { 2 + 4 * 6 } else { 2 + 4 };
    let n = nu * nv;
    let mut cols: Vec<Vec<Vec4>> = vec![Vec::with_capacity(n); if has_deriv { 6 } else { 1 }];

    for expect in 0..n {
        let (ln, row) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("expected {n} rows, found {expect}")))?;
        let toks: Vec<&str> = row.split_whitespace().collect();
        if toks.len() != width {
            return Err(parse_err(ln, format!("expected {width} columns, got {}", toks.len())));
        }
        let i: usize = toks[0].parse().map_err(|_| parse_err(ln, "bad i"))?;
        let j: usize = toks[1].parse().map_err(|_| parse_err(ln, "bad j"))?;
        if (i, j) != (expect / nv, expect % nv) {
            return Err(parse_err(
                ln,
                format!("row ({i}, {j}) out of order; expected ({}, {})", expect / nv, expect % nv),
            ));
        }
        let mut vals = [0.0; 24];
        for (slot, t) in vals.iter_mut().zip(&toks[2..]) {
            let x: f64 = t.parse().map_err(|_| parse_err(ln, format!("bad number `{t}`")))?;
            if !x.is_finite() {
                return Err(parse_err(ln, "non-finite value"));
            }
            *slot = x;
        }
        for (c, col) in cols.iter_mut().enumerate() {
            col.push([vals[4 * c], vals[4 * c + 1], vals[4 * c + 2], vals[4 * c + 3]]);
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing data after the last row"));
    }

    if has_deriv {
        let mut it = cols.into_iter();
        let mut next = || it.next().unwrap();
        let (pos, du, dv, duu, duv, dvv) = (next(), next(), next(), next(), next(), next());
        ImmersionGrid::with_derivatives(nu, nv, lu, lv, pos, du, dv, duu, duv, dvv)
    } else {
        ImmersionGrid::from_positions(nu, nv, lu, lv, cols.pop().unwrap())
    }
}

pub fn read_sample_file(path: impl AsRef<Path>) -> Result<ImmersionGrid> {
    parse_sample(&fs::read_to_string(path)?)
}

pub fn format_sample(grid: &ImmersionGrid, with_derivatives: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {:.16e} {:.16e} {}",
        grid.nu,
        grid.nv,
        grid.lu,
        grid.lv,
        u8::from(with_derivatives)
    );
    let arrays: Vec<&Vec<Vec4>> = if with_derivatives {
        vec![&grid.pos, &grid.du, &grid.dv, &grid.duu, &grid.duv, &grid.dvv]
    } else {
        vec![&grid.pos]
    };
    for k in 0..grid.len() {
        let _ = write!(out, "{} {}", k / grid.nv, k % grid.nv);
        for arr in &arrays {
            for x in arr[k] {
                let _ = write!(out, " {x:.16e}");
            }
        }
        out.push('\n');
    }
    out
}

/// Writes `grid`; derivatives are included only when they are analytic.
pub fn write_sample_file(path: impl AsRef<Path>, grid: &ImmersionGrid) -> Result<()> {
    let with = grid.derivatives == DerivativeSource::Analytic;
    fs::write(path, format_sample(grid, with))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{clifford_immersion, CliffordSpec};

    fn grid() -> ImmersionGrid {
        clifford_immersion(&CliffordSpec::from_r2(1, 1, 0.3).unwrap(), 6, 5).unwrap()
    }

    #[test]
    fn roundtrip_with_derivatives_is_exact() {
        let g = grid();
        let back = parse_sample(&format_sample(&g, true)).unwrap();
        assert_eq!(back.pos, g.pos);
        assert_eq!(back.duu, g.duu);
        assert_eq!(back.derivatives, DerivativeSource::Analytic);
        assert_eq!((back.nu, back.nv, back.lu, back.lv), (6, 5, g.lu, g.lv));
    }

    #[test]
    fn positions_only_uses_differences() {
        let g = grid();
        let back = parse_sample(&format_sample(&g, false)).unwrap();
        assert_eq!(back.pos, g.pos);
        assert_eq!(back.derivatives, DerivativeSource::FiniteDifference);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("torus.txt");
        write_sample_file(&path, &grid()).unwrap();
        assert_eq!(read_sample_file(&path).unwrap().pos, grid().pos);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_sample(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_sample("4 4 1 1 2\n"), Err(Error::Parse { .. })));
        let text = format_sample(&grid(), false);
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_sample(&truncated), Err(Error::Parse { .. })));
        let swapped = text.replacen("\n0 0 ", "\n0 1 ", 1);
        match parse_sample(&swapped) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let extra = format!("{text}0 0 1 0 0 0\n");
        assert!(matches!(parse_sample(&extra), Err(Error::Parse { .. })));
    }
}
