use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{CliffordSpec, UmbilicalSpec};
use crate::{Error, Result};

pub type Vec4 = [f64; 4];

/// Relative amplitude of the radius modulation of the non-CMC control torus.
pub const CONTROL_MODULATION: f64 = 0.1;
/// Default radius of the non-CMC control torus.
pub const CONTROL_R0: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeSource {
    Analytic,
    /// Second-order central differences on the periodic grid.
    FiniteDifference,
}

/// Doubly periodic sampled immersion of a torus into `S^3`.
///
/// Node `(i, j)` sits at parameter `(u0 + i Lu/Nu, v0 + j Lv/Nv)` and is
/// stored at index `i * nv + j`. Periodicity is implicit: node `(nu, j)` is
/// node `(0, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmersionGrid {
    pub nu: usize,
    pub nv: usize,
    pub lu: f64,
    pub lv: f64,
    pub u0: f64,
    pub v0: f64,
    pub pos: Vec<Vec4>,
    pub du: Vec<Vec4>,
    pub dv: Vec<Vec4>,
    pub duu: Vec<Vec4>,
    pub duv: Vec<Vec4>,
    pub dvv: Vec<Vec4>,
    pub derivatives: DerivativeSource,
}

pub(crate) fn dot4(a: &Vec4, b: &Vec4) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

fn sub4(a: &Vec4, b: &Vec4) -> Vec4 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

fn max_abs_diff(a: &Vec4, b: &Vec4) -> f64 {
    sub4(a, b).iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

impl ImmersionGrid {
    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        (i % self.nu) * self.nv + (j % self.nv)
    }

    pub fn hu(&self) -> f64 {
        self.lu / self.nu as f64
    }

    pub fn hv(&self) -> f64 {
        self.lv / self.nv as f64
    }

    fn check_dims(nu: usize, nv: usize, lu: f64, lv: f64) -> Result<()> {
        if nu < 4 || nv < 4 {
            return Err(Error::InvalidSpec(format!("grid must be at least 4x4, got {nu}x{nv}")));
        }
        if !(lu > 0.0 && lv > 0.0 && lu.is_finite() && lv.is_finite()) {
            return Err(Error::InvalidSpec(format!("periods must be positive, got {lu}, {lv}")));
        }
        Ok(())
    }

    /// Builds a grid from positions alone, differentiating on the periodic
    /// grid with second-order central differences.
    pub fn from_positions(nu: usize, nv: usize, lu: f64, lv: f64, pos: Vec<Vec4>) -> Result<Self> {
        Self::check_dims(nu, nv, lu, lv)?;
        if pos.len() != nu * nv {
            return Err(Error::InvalidSpec(format!(
                "expected {} positions, got {}",
                nu * nv,
                pos.len()
            )));
        }
        let mut grid = ImmersionGrid {
            nu,
            nv,
            lu,
            lv,
            u0: 0.0,
            v0: 0.0,
            du: Vec::new(),
            dv: Vec::new(),
            duu: Vec::new(),
            duv: Vec::new(),
            dvv: Vec::new(),
            pos,
            derivatives: DerivativeSource::FiniteDifference,
        };
        let fd = grid.central_differences();
        grid.du = fd.du;
        grid.dv = fd.dv;
        grid.duu = fd.duu;
        grid.duv = fd.duv;
        grid.dvv = fd.dvv;
        Ok(grid)
    }

    /// Validates shape and assembles a grid whose derivatives were supplied.
    #[allow(clippy::too_many_arguments)]
    pub fn with_derivatives(
        nu: usize,
        nv: usize,
        lu: f64,
        lv: f64,
        pos: Vec<Vec4>,
        du: Vec<Vec4>,
        dv: Vec<Vec4>,
        duu: Vec<Vec4>,
        duv: Vec<Vec4>,
        dvv: Vec<Vec4>,
    ) -> Result<Self> {
        Self::check_dims(nu, nv, lu, lv)?;
        let n = nu * nv;
        for (name, arr) in [
            ("pos", &pos),
            ("du", &du),
            ("dv", &dv),
            ("duu", &duu),
            ("duv", &duv),
            ("dvv", &dvv),
        ] {
            if arr.len() != n {
                return Err(Error::InvalidSpec(format!(
                    "expected {n} {name} entries, got {}",
                    arr.len()
                )));
            }
        }
        Ok(ImmersionGrid {
            nu,
            nv,
            lu,
            lv,
            u0: 0.0,
            v0: 0.0,
            pos,
            du,
            dv,
            duu,
            duv,
            dvv,
            derivatives: DerivativeSource::Analytic,
        })
    }

    /// Positions multiplied by `factor`; derivatives are scaled alike.
    pub fn scaled(&self, factor: f64) -> Self {
        let sc = |v: &Vec<Vec4>| -> Vec<Vec4> {
            v.iter().map(|a| [a[0] * factor, a[1] * factor, a[2] * factor, a[3] * factor]).collect()
        };
        ImmersionGrid {
            pos: sc(&self.pos),
            du: sc(&self.du),
            dv: sc(&self.dv),
            duu: sc(&self.duu),
            duv: sc(&self.duv),
            dvv: sc(&self.dvv),
            ..self.clone()
        }
    }

    /// Every other node in both directions. Finite-difference grids are
    /// re-differentiated at the coarse spacing.
    pub fn coarsened(&self) -> Result<Self> {
        if !self.nu.is_multiple_of(2) || !self.nv.is_multiple_of(2) {
            return Err(Error::InvalidSpec(format!(
                "cannot coarsen a {}x{} grid: both sizes must be even",
                self.nu, self.nv
            )));
        }
        let (nu, nv) = (self.nu / 2, self.nv / 2);
        let take = |v: &Vec<Vec4>| -> Vec<Vec4> {
            (0..nu).flat_map(|i| (0..nv).map(move |j| (i, j))).map(|(i, j)| v[self.idx(2 * i, 2 * j)]).collect()
        };
        let mut out = match self.derivatives {
            DerivativeSource::Analytic => Self::with_derivatives(
                nu,
                nv,
                self.lu,
                self.lv,
                take(&self.pos),
                take(&self.du),
                take(&self.dv),
                take(&self.duu),
                take(&self.duv),
                take(&self.dvv),
            )?,
            DerivativeSource::FiniteDifference => Self::from_positions(nu, nv, self.lu, self.lv, take(&self.pos))?,
        };
        out.u0 = self.u0;
        out.v0 = self.v0;
        Ok(out)
    }

    fn central_differences(&self) -> FdDerivatives {
        let (hu, hv) = (self.hu(), self.hv());
        let n = self.len();
        let mut out = FdDerivatives {
            du: vec![[0.0; 4]; n],
            dv: vec![[0.0; 4]; n],
            duu: vec![[0.0; 4]; n],
            duv: vec![[0.0; 4]; n],
            dvv: vec![[0.0; 4]; n],
        };
        let (nu, nv) = (self.nu, self.nv);
        for i in 0..nu {
            for j in 0..nv {
                let k = self.idx(i, j);
                let c = &self.pos[k];
                let e = &self.pos[self.idx(i + 1, j)];
                let w = &self.pos[self.idx(i + nu - 1, j)];
                let nn = &self.pos[self.idx(i, j + 1)];
                let s = &self.pos[self.idx(i, j + nv - 1)];
                let ne = &self.pos[self.idx(i + 1, j + 1)];
                let nw = &self.pos[self.idx(i + nu - 1, j + 1)];
                let se = &self.pos[self.idx(i + 1, j + nv - 1)];
                let sw = &self.pos[self.idx(i + nu - 1, j + nv - 1)];
                for a in 0..4 {
                    out.du[k][a] = (e[a] - w[a]) / (2.0 * hu);
                    out.dv[k][a] = (nn[a] - s[a]) / (2.0 * hv);
                    out.duu[k][a] = (e[a] - 2.0 * c[a] + w[a]) / (hu * hu);
                    out.dvv[k][a] = (nn[a] - 2.0 * c[a] + s[a]) / (hv * hv);
                    out.duv[k][a] = (ne[a] - nw[a] - se[a] + sw[a]) / (4.0 * hu * hv);
                }
            }
        }
        out
    }
}

struct FdDerivatives {
    du: Vec<Vec4>,
    dv: Vec<Vec4>,
    duu: Vec<Vec4>,
    duv: Vec<Vec4>,
    dvv: Vec<Vec4>,
}

/// Point data of a parametrized surface: value, first and second partials.
#[derive(Clone, Copy)]
struct Jet {
    p: Vec4,
    u: Vec4,
    v: Vec4,
    uu: Vec4,
    uv: Vec4,
    vv: Vec4,
}

/// Radial projection `psi / |psi|` onto the unit sphere, with derivatives.
fn normalize_jet(j: &Jet) -> Jet {
    let rho = dot4(&j.p, &j.p).sqrt();
    let ru = dot4(&j.p, &j.u) / rho;
    let rv = dot4(&j.p, &j.v) / rho;
    let ruu = (dot4(&j.u, &j.u) + dot4(&j.p, &j.uu)) / rho - ru * ru / rho;
    let ruv = (dot4(&j.u, &j.v) + dot4(&j.p, &j.uv)) / rho - ru * rv / rho;
    let rvv = (dot4(&j.v, &j.v) + dot4(&j.p, &j.vv)) / rho - rv * rv / rho;
    let (r2, r3) = (rho * rho, rho * rho * rho);
    let mut out = Jet { p: [0.0; 4], u: [0.0; 4], v: [0.0; 4], uu: [0.0; 4], uv: [0.0; 4], vv: [0.0; 4] };
    for a in 0..4 {
        out.p[a] = j.p[a] / rho;
        out.u[a] = j.u[a] / rho - j.p[a] * ru / r2;
        out.v[a] = j.v[a] / rho - j.p[a] * rv / r2;
        out.uu[a] = j.uu[a] / rho - 2.0 * j.u[a] * ru / r2 - j.p[a] * ruu / r2
            + 2.0 * j.p[a] * ru * ru / r3;
        out.vv[a] = j.vv[a] / rho - 2.0 * j.v[a] * rv / r2 - j.p[a] * rvv / r2
            + 2.0 * j.p[a] * rv * rv / r3;
        out.uv[a] = j.uv[a] / rho - j.u[a] * rv / r2 - j.v[a] * ru / r2 - j.p[a] * ruv / r2
            + 2.0 * j.p[a] * ru * rv / r3;
    }
    out
}

fn sample<F: Fn(f64, f64) -> Jet>(nu: usize, nv: usize, v0: f64, f: F) -> Result<ImmersionGrid> {
    let (lu, lv) = (2.0 * PI, 2.0 * PI);
    ImmersionGrid::check_dims(nu, nv, lu, lv)?;
    let n = nu * nv;
    let mut g = ImmersionGrid {
        nu,
        nv,
        lu,
        lv,
        u0: 0.0,
        v0,
        pos: Vec::with_capacity(n),
        du: Vec::with_capacity(n),
        dv: Vec::with_capacity(n),
        duu: Vec::with_capacity(n),
        duv: Vec::with_capacity(n),
        dvv: Vec::with_capacity(n),
        derivatives: DerivativeSource::Analytic,
    };
    for i in 0..nu {
        let u = lu * i as f64 / nu as f64;
        for j in 0..nv {
            let v = v0 + lv * j as f64 / nv as f64;
            let jet = f(u, v);
            g.pos.push(jet.p);
            g.du.push(jet.u);
            g.dv.push(jet.v);
            g.duu.push(jet.uu);
            g.duv.push(jet.uv);
            g.dvv.push(jet.vv);
        }
    }
    Ok(g)
}

/// `phi(u, v) = (r cos u, r sin u, s cos v, s sin v)` with analytic derivatives.
pub fn clifford_immersion(spec: &CliffordSpec, nu: usize, nv: usize) -> Result<ImmersionGrid> {
    if spec.p != 1 || spec.q != 1 {
        return Err(Error::Unsupported(format!(
            "discrete pipeline handles tori in S^3 only (p = q = 1), got p = {}, q = {}",
            spec.p, spec.q
        )));
    }
    let (r, s) = (spec.r, spec.s());
    sample(nu, nv, 0.0, |u, v| {
        let (su, cu) = u.sin_cos();
        let (sv, cv) = v.sin_cos();
        Jet {
            p: [r * cu, r * su, s * cv, s * sv],
            u: [-r * su, r * cu, 0.0, 0.0],
            v: [0.0, 0.0, -s * sv, s * cv],
            uu: [-r * cu, -r * su, 0.0, 0.0],
            uv: [0.0; 4],
            vv: [0.0, 0.0, -s * cv, -s * sv],
        }
    })
}

/// Non-CMC negative control: the Clifford torus of radius `r0` with the first
/// circle's radius modulated as `r0 (1 + 0.1 cos u)`, projected back to `S^3`.
pub fn control_noncmc_immersion(r0: f64, nu: usize, nv: usize) -> Result<ImmersionGrid> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::InvalidSpec(format!("control radius must lie in (0, 1), got {r0}")));
    }
    let s0 = (1.0 - r0 * r0).sqrt();
    let eps = CONTROL_MODULATION;
    sample(nu, nv, 0.0, |u, v| {
        let (su, cu) = u.sin_cos();
        let (sv, cv) = v.sin_cos();
        let ru = r0 * (1.0 + eps * cu);
        let ru1 = -r0 * eps * su;
        let ru2 = -r0 * eps * cu;
        let psi = Jet {
            p: [ru * cu, ru * su, s0 * cv, s0 * sv],
            u: [ru1 * cu - ru * su, ru1 * su + ru * cu, 0.0, 0.0],
            v: [0.0, 0.0, -s0 * sv, s0 * cv],
            uu: [
                ru2 * cu - 2.0 * ru1 * su - ru * cu,
                ru2 * su + 2.0 * ru1 * cu - ru * su,
                0.0,
                0.0,
            ],
            uv: [0.0; 4],
            vv: [0.0, 0.0, -s0 * cv, -s0 * sv],
        };
        normalize_jet(&psi)
    })
}

/// Geodesic 2-sphere `{x : x_0 = c}` of radius `rho`, parametrized
/// doubly periodically by `(c, rho sin v cos u, rho sin v sin u, rho cos v)`.
///
/// The map double-covers the sphere and degenerates at `sin v = 0`; the `v`
/// samples are offset by half a step so no node lands on a pole. Intended
/// for exercising umbilicity detection, not for spectral computations.
pub fn umbilical_sphere_immersion(spec: &UmbilicalSpec, nu: usize, nv: usize) -> Result<ImmersionGrid> {
    if spec.n != 2 {
        return Err(Error::Unsupported(format!(
            "sampled umbilical spheres exist for n = 2 only, got n = {}",
            spec.n
        )));
    }
    let (rho, c) = (spec.rho, spec.c());
    let v0 = PI / nv as f64;
    sample(nu, nv, v0, |u, v| {
        let (su, cu) = u.sin_cos();
        let (sv, cv) = v.sin_cos();
        Jet {
            p: [c, rho * sv * cu, rho * sv * su, rho * cv],
            u: [0.0, -rho * sv * su, rho * sv * cu, 0.0],
            v: [0.0, rho * cv * cu, rho * cv * su, -rho * sv],
            uu: [0.0, -rho * sv * cu, -rho * sv * su, 0.0],
            uv: [0.0, -rho * cv * su, rho * cv * cu, 0.0],
            vv: [0.0, -rho * sv * cu, -rho * sv * su, -rho * cv],
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmersionResiduals {
    /// `max | |phi| - 1 |`
    pub unit_norm: f64,
    /// `max |phi . phi_u|`
    pub tangent_u: f64,
    /// `max |phi . phi_v|`
    pub tangent_v: f64,
    /// Supplied first derivatives against central differences of positions.
    pub fd_first: f64,
    /// Supplied second derivatives against central second differences.
    pub fd_second: f64,
    pub derivatives: DerivativeSource,
}

impl ImmersionResiduals {
    /// Whether the sphere and tangency conditions hold within `tol`.
    pub fn on_sphere(&self, tol: f64) -> bool {
        self.unit_norm <= tol && self.tangent_u <= tol && self.tangent_v <= tol
    }
}

pub fn validate_immersion(grid: &ImmersionGrid) -> ImmersionResiduals {
    let fd = grid.central_differences();
    let mut res = ImmersionResiduals {
        unit_norm: 0.0,
        tangent_u: 0.0,
        tangent_v: 0.0,
        fd_first: 0.0,
        fd_second: 0.0,
        derivatives: grid.derivatives,
    };
    for k in 0..grid.len() {
        let p = &grid.pos[k];
        res.unit_norm = res.unit_norm.max((dot4(p, p).sqrt() - 1.0).abs());
        res.tangent_u = res.tangent_u.max(dot4(p, &grid.du[k]).abs());
        res.tangent_v = res.tangent_v.max(dot4(p, &grid.dv[k]).abs());
        res.fd_first = res
            .fd_first
            .max(max_abs_diff(&fd.du[k], &grid.du[k]))
            .max(max_abs_diff(&fd.dv[k], &grid.dv[k]));
        res.fd_second = res
            .fd_second
            .max(max_abs_diff(&fd.duu[k], &grid.duu[k]))
            .max(max_abs_diff(&fd.duv[k], &grid.duv[k]))
            .max(max_abs_diff(&fd.dvv[k], &grid.dvv[k]));
    }
    res
}
