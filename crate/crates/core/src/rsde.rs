//! Rough SDEs `dY = b(Y) dt + σ(Y-) dM + f(Y) dX`.
//!
//! The one-step scheme is the rough germ plus Euler drift and a left-point
//! Itô term:
//! `Y_{n+1} = Y_n + b dt + σ δM + f δX + (Df f) XX`,
//! taken over every skeleton substep. Across a jump substep `dt = 0` and the
//! increments are `(ΔM, ΔX, ΔXX)`, which reinserts the jump exactly.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::calculus::{remainder, ControlledPath};
use crate::drivers::{DriverKind, DriverSpec, JumpDist};
use crate::grid::TimeGrid;
use crate::rng::{par_members, tag};
use crate::lift::RoughLift;
use crate::linalg::{dist, norm};
use crate::norms::{lq_norm, rough_path_distance_lq, vp_lq_seminorm, Ensemble, NormSpec};
use crate::path::{MartingalePath, SamplePath, Skeleton};
use crate::pvar::{p_variation_powers, p_variation_with, TwoParamTable};
use crate::smooth::SmoothFn;

/// Coefficients for a state in `R^m`, a martingale in `R^l` and a rough
/// driver in `R^d`. `sigma` maps to `m x l` matrices, `f` to `m x d`.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub b: Option<SmoothFn>,
    pub sigma: Option<SmoothFn>,
    pub f: Option<SmoothFn>,
    pub m: usize,
    pub l: usize,
    pub d: usize,
}

impl CoefficientSet {
    pub fn new(
        m: usize,
        l: usize,
        d: usize,
        b: Option<SmoothFn>,
        sigma: Option<SmoothFn>,
        f: Option<SmoothFn>,
    ) -> Result<Self> {
        let check = |name: &str, g: &Option<SmoothFn>, out: usize| -> Result<()> {
            match g {
                Some(g) if g.in_dim() != m || g.out_dim() != out => invalid(format!(
                    "{name} must map R^{m} to R^{out}, got R^{} -> R^{}",
                    g.in_dim(),
                    g.out_dim()
                )),
                _ => Ok(()),
            }
        };
        check("b", &b, m)?;
        check("sigma", &sigma, m * l)?;
        check("f", &f, m * d)?;
        if let Some(g) = &f {
            if g.c3_bound().is_infinite() {
                log::warn!("rough coefficient {:?} is unbounded; outside the bounded-coefficient theory", g.id());
            }
        }
        Ok(Self { b, sigma, f, m, l, d })
    }

    /// Coefficients from registry ids.
    pub fn from_ids(m: usize, l: usize, d: usize, b: Option<&str>, sigma: Option<&str>, f: Option<&str>) -> Result<Self> {
        let make = |id: Option<&str>, out: usize| id.map(|id| SmoothFn::registry(id, m, out)).transpose();
        Self::new(m, l, d, make(b, m)?, make(sigma, m * l)?, make(f, m * d)?)
    }
}

/// Scratch space for [`increment_into`].
struct Scratch {
    val: Vec<f64>,
    jac: Vec<f64>,
}

impl Scratch {
    fn new(c: &CoefficientSet) -> Self {
        let n = (c.m * c.l).max(c.m * c.d).max(c.m);
        Self { val: vec![0.0; n], jac: vec![0.0; c.m * c.d * c.m] }
    }
}

/// `out = y + b(y) dt + σ(y) dM + f(y) dX + Σ_{ij} (Df · yp)[a][j][i] XX^{ij}`,
/// accumulated in that order, where `yp` is the Gubinelli derivative fed to
/// the rough term (`f(y)` in the scheme).
#[allow(clippy::too_many_arguments)]
fn increment_into(
    c: &CoefficientSet,
    y: &[f64],
    yp: Option<&[f64]>,
    dt: f64,
    dm: &[f64],
    dx: &[f64],
    xx: &[f64],
    s: &mut Scratch,
    out: &mut [f64],
) {
    let (m, l, d) = (c.m, c.l, c.d);
    out.copy_from_slice(y);
    if let Some(b) = &c.b {
        b.eval(y, &mut s.val[..m]);
        for a in 0..m {
            out[a] += s.val[a] * dt;
        }
    }
    if let Some(sigma) = &c.sigma {
        sigma.eval(y, &mut s.val[..m * l]);
        for a in 0..m {
            let mut acc = 0.0;
            for k in 0..l {
                acc += s.val[a * l + k] * dm[k];
            }
            out[a] += acc;
        }
    }
    if let Some(f) = &c.f {
        f.eval(y, &mut s.val[..m * d]);
        for a in 0..m {
            let mut acc = 0.0;
            for j in 0..d {
                acc += s.val[a * d + j] * dx[j];
            }
            out[a] += acc;
        }
        f.jacobian(y, &mut s.jac);
        let yp = yp.unwrap_or(&s.val[..m * d]);
        for a in 0..m {
            let mut acc = 0.0;
            for j in 0..d {
                for i in 0..d {
                    // (Df yp)[a][j][i] = Σ_b ∂_b f_{aj} yp_{bi}
                    let mut dfy = 0.0;
                    for b in 0..m {
                        dfy += s.jac[(a * d + j) * m + b] * yp[b * d + i];
                    }
                    acc += dfy * xx[i * d + j];
                }
            }
            out[a] += acc;
        }
    }
}

/// One scheme step from `y`.
pub fn step(c: &CoefficientSet, y: &[f64], dt: f64, dm: &[f64], dx: &[f64], xx: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; c.m];
    increment_into(c, y, None, dt, dm, dx, xx, &mut Scratch::new(c), &mut out);
    out
}

/// Put a martingale and a lift on one skeleton (the union of their jumps).
pub fn align(m: &MartingalePath, lift: &RoughLift) -> Result<(MartingalePath, RoughLift)> {
    if m.skeleton().same_as(lift.skeleton()) {
        return Ok((m.clone(), lift.clone()));
    }
    let skel = m.skeleton().union(lift.skeleton())?;
    Ok((m.embed(&skel)?, lift.embed(&skel)?))
}

/// Driving data of one member, already on one skeleton.
struct Drive<'a> {
    m: Option<&'a MartingalePath>,
    lift: &'a RoughLift,
}

impl Drive<'_> {
    fn skel(&self) -> &Arc<Skeleton> {
        self.lift.skeleton()
    }

    fn fill(&self, n: usize, dm: &mut [f64], dx: &mut [f64], xx: &mut [f64]) -> f64 {
        if let Some(m) = self.m {
            m.path.increment(n - 1, n, dm);
        }
        self.lift.path().increment(n - 1, n, dx);
        self.lift.second(n - 1, n, xx);
        let skel = self.skel();
        skel.node_time(n) - skel.node_time(n - 1)
    }
}

fn check_drive<'a>(c: &CoefficientSet, m: Option<&'a MartingalePath>, lift: &'a RoughLift) -> Result<Drive<'a>> {
    if lift.dim() != c.d {
        return invalid(format!("lift has dimension {}, coefficients expect {}", lift.dim(), c.d));
    }
    match m {
        Some(m) => {
            if m.dim() != c.l {
                return invalid(format!("martingale has dimension {}, coefficients expect {}", m.dim(), c.l));
            }
            if !m.skeleton().same_as(lift.skeleton()) {
                return Err(Error::GridMismatch(
                    "martingale and lift must share a skeleton; see rsde::align".into(),
                ));
            }
        }
        None if c.sigma.is_some() => return invalid("a martingale is required when sigma is set"),
        None => {}
    }
    Ok(Drive { m, lift })
}

/// Node values of the scheme on nodes `a..=b`, started from `y_a` at node
/// `a`. `None` when the solution stops being finite.
pub fn solve_window(
    c: &CoefficientSet,
    y_a: &[f64],
    a: usize,
    b: usize,
    m: Option<&MartingalePath>,
    lift: &RoughLift,
) -> Result<Option<Vec<f64>>> {
    let drive = check_drive(c, m, lift)?;
    if y_a.len() != c.m {
        return invalid("initial value has the wrong dimension");
    }
    if a > b || b >= drive.skel().node_count() {
        return invalid(format!("window ({a}, {b}) is not inside the skeleton"));
    }
    let (dim, l, d) = (c.m, c.l, c.d);
    let mut out = Vec::with_capacity((b - a + 1) * dim);
    out.extend_from_slice(y_a);
    let (mut dm, mut dx, mut xx) = (vec![0.0; l], vec![0.0; d], vec![0.0; d * d]);
    let mut s = Scratch::new(c);
    let mut next = vec![0.0; dim];
    for n in a + 1..=b {
        let dt = drive.fill(n, &mut dm, &mut dx, &mut xx);
        let prev = &out[(n - 1 - a) * dim..(n - a) * dim];
        increment_into(c, prev, None, dt, &dm, &dx, &xx, &mut s, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        out.extend_from_slice(&next);
    }
    Ok(Some(out))
}

/// Solutions and diagnostics.
#[derive(Debug, Clone)]
pub struct RsdeResult {
    pub y: Vec<SamplePath>,
    /// `Y' = f(Y)` (zero when there is no rough coefficient).
    pub yp: Vec<SamplePath>,
    /// Members whose solution stopped being finite; their paths hold NaN
    /// from the failure onwards.
    pub diverged: Vec<usize>,
    pub picard: Vec<PicardLog>,
    pub warnings: Vec<String>,
}

fn gubinelli(c: &CoefficientSet, y: &SamplePath) -> SamplePath {
    match &c.f {
        Some(f) => y.map(c.m * c.d, |v, out| f.eval(v, out)),
        None => SamplePath::zeros(y.skeleton().clone(), c.m * c.d),
    }
}

fn check_ensemble(y0: &[Vec<f64>], ms: Option<&[MartingalePath]>, lifts: &[RoughLift]) -> Result<()> {
    if y0.len() != lifts.len() || ms.is_some_and(|m| m.len() != lifts.len()) {
        return invalid("initial values, martingales and lifts differ in count");
    }
    if lifts.is_empty() {
        return invalid("empty ensemble");
    }
    Ok(())
}

/// The one-step scheme for every member.
pub fn solve(
    c: &CoefficientSet,
    y0: &[Vec<f64>],
    ms: Option<&[MartingalePath]>,
    lifts: &[RoughLift],
) -> Result<RsdeResult> {
    check_ensemble(y0, ms, lifts)?;
    let runs: Vec<(SamplePath, bool)> = (0..lifts.len())
        .into_par_iter()
        .map(|i| {
            let lift = &lifts[i];
            let skel = lift.skeleton().clone();
            let last = skel.last_node();
            let m = ms.map(|m| &m[i]);
            let values = solve_window(c, &y0[i], 0, last, m, lift)?;
            let ok = values.is_some();
            let values = values.unwrap_or_else(|| {
                // rerun step by step to keep the finite prefix
                let mut v = y0[i].clone();
                let mut cur = y0[i].clone();
                for n in 1..=last {
                    let w = solve_window(c, &cur, n - 1, n, m, lift).ok().flatten();
                    match w {
                        Some(w) => cur = w[c.m..].to_vec(),
                        None => cur = vec![f64::NAN; c.m],
                    }
                    v.extend_from_slice(&cur);
                }
                v
            });
            Ok((SamplePath::new(skel, c.m, values)?, ok))
        })
        .collect::<Result<_>>()?;
    let diverged: Vec<usize> = runs.iter().enumerate().filter(|(_, r)| !r.1).map(|(i, _)| i).collect();
    let mut warnings = Vec::new();
    if !diverged.is_empty() {
        let msg = format!("{} members diverged", diverged.len());
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let y: Vec<SamplePath> = runs.into_iter().map(|r| r.0).collect();
    let yp = y.iter().map(|p| gubinelli(c, p)).collect();
    Ok(RsdeResult { y, yp, diverged, picard: Vec::new(), warnings })
}

/// Settings for [`picard_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Variation exponent of the window control.
    pub p: f64,
    /// Windows satisfy `w(s, t-) <= threshold`.
    pub threshold: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { p: 2.5, threshold: 0.25, tol: 1e-10, max_iter: 200 }
    }
}

/// Picard history of one member.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PicardLog {
    /// Grid-index windows.
    pub windows: Vec<(usize, usize)>,
    /// Distances between successive iterates, per window.
    pub distances: Vec<Vec<f64>>,
    pub converged: bool,
}

/// Greedy windows: from `a`, the largest `b` with `w(a, b-1) <= threshold`
/// where `w(s,t) = (t - s) + ‖[M]‖^{p/2}_{p/2} + ‖X‖^p_p + ‖XX‖^{p/2}_{p/2}`.
fn picard_windows(drive: &Drive, p: f64, threshold: f64) -> Vec<(usize, usize)> {
    let skel = drive.skel();
    let grid = skel.grid();
    let last = grid.last_index();
    let x = drive.lift.path();
    let control_row = |a: usize, e: usize| -> Vec<f64> {
        let time: Vec<f64> = (a..=e).map(|k| grid.time(k) - grid.time(a)).collect();
        let xr = p_variation_powers(p, a, e, |s, t| dist(x.value(t), x.value(s)));
        let xxr = p_variation_powers(p / 2.0, a, e, |s, t| {
            norm(&drive.lift.second_vec(skel.right(s), skel.right(t)))
        });
        let mr = match drive.m {
            Some(m) => p_variation_powers(p / 2.0, a, e, |s, t| dist(m.bracket.value(t), m.bracket.value(s))),
            None => vec![0.0; e - a + 1],
        };
        (0..=e - a).map(|k| time[k] + xr[k] + xxr[k] + mr[k]).collect()
    };
    let mut windows = Vec::new();
    let mut a = 0;
    while a < last {
        let mut len = 16;
        let b = loop {
            let e = (a + len).min(last);
            let row = control_row(a, e);
            // first j with w(a, j) > threshold; the window ends one later
            if let Some(j) = (1..row.len()).find(|&j| row[j] > threshold) {
                break a + j + 1;
            }
            if e == last {
                break last;
            }
            len *= 2;
        };
        let b = b.min(last).max(a + 1);
        windows.push((a, b));
        a = b;
    }
    windows
}

/// Fixed-point iteration of `Φ(Y, Y') = (y_a + ∫b dt + ∫σ dM + ∫f(Y) dX, f(Y))`
/// on successive short windows, with the rough integral sewn from the germ
/// `f(Y) δX + Df(Y) Y' XX`. Windows chain through their endpoints, so jumps
/// on window boundaries are reinserted by the jump substep of the next
/// window.
pub fn picard_solve(
    c: &CoefficientSet,
    y0: &[Vec<f64>],
    ms: Option<&[MartingalePath]>,
    lifts: &[RoughLift],
    opts: PicardOptions,
) -> Result<RsdeResult> {
    check_ensemble(y0, ms, lifts)?;
    if !(opts.p >= 2.0) || !(opts.threshold > 0.0) || !(opts.tol > 0.0) || opts.max_iter == 0 {
        return invalid("Picard options need p >= 2, positive threshold and tolerance, max_iter >= 1");
    }
    let runs: Vec<(SamplePath, PicardLog)> = (0..lifts.len())
        .into_par_iter()
        .map(|i| picard_member(c, &y0[i], ms.map(|m| &m[i]), &lifts[i], opts))
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    let stalled = runs.iter().filter(|r| !r.1.converged).count();
    if stalled > 0 {
        let msg = format!("Picard iteration hit max_iter on {stalled} members");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let diverged = runs.iter().enumerate().filter(|(_, r)| !r.0.is_finite()).map(|(i, _)| i).collect();
    let (y, picard): (Vec<SamplePath>, Vec<PicardLog>) = runs.into_iter().unzip();
    let yp = y.iter().map(|p| gubinelli(c, p)).collect();
    Ok(RsdeResult { y, yp, diverged, picard, warnings })
}

fn picard_member(
    c: &CoefficientSet,
    y0: &[f64],
    m: Option<&MartingalePath>,
    lift: &RoughLift,
    opts: PicardOptions,
) -> Result<(SamplePath, PicardLog)> {
    let drive = check_drive(c, m, lift)?;
    if y0.len() != c.m {
        return invalid("initial value has the wrong dimension");
    }
    let skel = drive.skel().clone();
    let (dim, l, d) = (c.m, c.l, c.d);
    let fdim = dim * d;
    let mut values = vec![0.0; skel.node_count() * dim];
    values[..dim].copy_from_slice(y0);
    let mut log = PicardLog { converged: true, ..Default::default() };
    let (mut dm, mut dx, mut xx) = (vec![0.0; l], vec![0.0; d], vec![0.0; d * d]);
    let mut s = Scratch::new(c);
    let mut inc = vec![0.0; dim];
    let feval = |y: &[f64], out: &mut [f64]| match &c.f {
        Some(f) => f.eval(y, out),
        None => out.iter_mut().for_each(|v| *v = 0.0),
    };

    for (a, b) in picard_windows(&drive, opts.p, opts.threshold) {
        let (na, nb) = (skel.right(a), skel.right(b));
        let len = nb - na + 1;
        let ya = values[na * dim..(na + 1) * dim].to_vec();
        let mut y: Vec<f64> = ya.iter().copied().cycle().take(len * dim).collect();
        let mut yp = vec![0.0; len * fdim];
        for r in 0..len {
            feval(&ya, &mut yp[r * fdim..(r + 1) * fdim]);
        }
        let mut dists = Vec::new();
        let mut done = false;
        for _ in 0..opts.max_iter {
            let mut ny = vec![0.0; len * dim];
            ny[..dim].copy_from_slice(&ya);
            for r in 1..len {
                let dt = drive.fill(na + r, &mut dm, &mut dx, &mut xx);
                let prev = &y[(r - 1) * dim..r * dim];
                let prev_yp = &yp[(r - 1) * fdim..r * fdim];
                increment_into(c, prev, Some(prev_yp), dt, &dm, &dx, &xx, &mut s, &mut inc);
                for k in 0..dim {
                    ny[r * dim + k] = ny[(r - 1) * dim + k] + (inc[k] - prev[k]);
                }
            }
            let mut nyp = vec![0.0; len * fdim];
            for r in 0..len {
                feval(&y[r * dim..(r + 1) * dim], &mut nyp[r * fdim..(r + 1) * fdim]);
            }
            let diff: Vec<f64> = ny.iter().zip(&y).map(|(u, v)| u - v).collect();
            let sup_y = diff.chunks(dim).map(norm).fold(0.0, f64::max);
            let sup_p = nyp.chunks(fdim).zip(yp.chunks(fdim)).map(|(u, v)| dist(u, v)).fold(0.0, f64::max);
            let var = p_variation_with(opts.p, (0, len - 1), |s, t| {
                dist(&diff[t * dim..(t + 1) * dim], &diff[s * dim..(s + 1) * dim])
            })?;
            let gap = sup_y + sup_p + var;
            dists.push(gap);
            y = ny;
            yp = nyp;
            if !gap.is_finite() {
                break;
            }
            if gap < opts.tol {
                done = true;
                break;
            }
        }
        if !done {
            log.converged = false;
        }
        values[na * dim..(nb + 1) * dim].copy_from_slice(&y);
        log.windows.push((a, b));
        log.distances.push(dists);
    }
    Ok((SamplePath::new(skel, dim, values)?, log))
}

/// Inputs of one solve: initial values, optional martingales and lifts.
#[derive(Debug, Clone)]
pub struct SdeData {
    pub y0: Vec<Vec<f64>>,
    pub m: Option<Vec<MartingalePath>>,
    pub lifts: Vec<RoughLift>,
}

impl SdeData {
    /// `ỹ0 = y0 + ε`.
    pub fn perturb_y0(&self, eps: f64) -> SdeData {
        let y0 = self.y0.iter().map(|v| v.iter().map(|x| x + eps).collect()).collect();
        SdeData { y0, ..self.clone() }
    }

    /// `M̃ = M + ε W` for given continuous paths `W` on the same grids;
    /// `[M̃] = [M] + ε² [W]`.
    pub fn perturb_martingale(&self, eps: f64, w: &[MartingalePath]) -> Result<SdeData> {
        let ms = self.m.as_ref().ok_or_else(|| Error::InvalidArgument("no martingale to perturb".into()))?;
        if w.len() != ms.len() {
            return invalid("perturbation ensemble has the wrong size");
        }
        let m = ms
            .iter()
            .zip(w)
            .map(|(m, w)| {
                let w = w.embed(m.skeleton())?;
                let path = m.path.zip_map(&w.path, m.dim(), |x, y, o| {
                    (0..o.len()).for_each(|i| o[i] = x[i] + eps * y[i])
                })?;
                let bracket = m.bracket.zip_map(&w.bracket, m.bracket.dim(), |x, y, o| {
                    (0..o.len()).for_each(|i| o[i] = x[i] + eps * eps * y[i])
                })?;
                MartingalePath::new(path, bracket)
            })
            .collect::<Result<_>>()?;
        Ok(SdeData { m: Some(m), ..self.clone() })
    }

    /// `X̃ = X + ε t` in every component, lift via [`RoughLift::translate`].
    pub fn perturb_lift(&self, eps: f64) -> Result<SdeData> {
        let lifts = self
            .lifts
            .iter()
            .map(|l| {
                let d = l.dim();
                let g = l.grid().clone();
                let h = SamplePath::continuous(g.clone(), d, g.times().iter().flat_map(|&t| vec![eps * t; d]).collect())?;
                l.translate(&h)
            })
            .collect::<Result<_>>()?;
        Ok(SdeData { lifts, ..self.clone() })
    }
}

/// Both sides of the Lipschitz estimate for the solution map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// `[‖Y - Ỹ‖_{p,q}, ‖Y' - Ỹ'‖_{p,q}, ‖E(R^Y - R^Ỹ)‖_{p/2}]`.
    pub lhs_terms: [f64; 3],
    /// `[‖y0 - ỹ0‖_{L^q}, ‖[M - M̃]‖^{1/2}_{p/2,q/2}, ‖ρ(X, X̃)‖_{L^q}]`.
    pub rhs_terms: [f64; 3],
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; zero when `lhs = 0`, infinite when only `rhs = 0`.
    pub ratio: f64,
}

fn grid_paths(paths: &[SamplePath]) -> Result<Vec<SamplePath>> {
    paths
        .iter()
        .map(|p| SamplePath::continuous(p.grid().clone(), p.dim(), p.grid_values().concat()))
        .collect()
}

fn differences(a: &[SamplePath], b: &[SamplePath]) -> Result<Vec<SamplePath>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            if !x.grid().same_as(y.grid()) {
                return Err(Error::GridMismatch("stability data must share one grid".into()));
            }
            let v: Vec<f64> = x.grid_values().concat().iter().zip(y.grid_values().concat()).map(|(u, w)| u - w).collect();
            SamplePath::continuous(x.grid().clone(), x.dim(), v)
        })
        .collect()
}

/// Realized bracket `Σ δZ ⊗ δZ` over substeps, sampled at grid points.
fn realized_bracket(z: &SamplePath) -> Result<SamplePath> {
    let d = z.dim();
    let skel = z.skeleton();
    let mut acc = vec![0.0; d * d];
    let mut inc = vec![0.0; d];
    let mut at_grid = vec![0.0; skel.grid().len() * d * d];
    for n in 1..skel.node_count() {
        z.increment(n - 1, n, &mut inc);
        for i in 0..d {
            for j in 0..d {
                acc[i * d + j] += inc[i] * inc[j];
            }
        }
        if !skel.is_left_node(n) {
            let k = skel.grid_index(n);
            at_grid[k * d * d..(k + 1) * d * d].copy_from_slice(&acc);
        }
    }
    SamplePath::continuous(skel.grid().clone(), d * d, at_grid)
}

/// Evaluate both sides of the stability estimate for one perturbation.
/// Conditional expectations of the remainder are replaced by ensemble means.
pub fn stability_experiment(
    c: &CoefficientSet,
    data: &SdeData,
    perturbed: &SdeData,
    p: f64,
    q: f64,
) -> Result<StabilityReport> {
    if !(p >= 2.0) || !(q >= 2.0) {
        return invalid("the stability estimate needs p >= 2 and q >= 2");
    }
    let base = solve(c, &data.y0, data.m.as_deref(), &data.lifts)?;
    let pert = solve(c, &perturbed.y0, perturbed.m.as_deref(), &perturbed.lifts)?;
    let spec = NormSpec::new(p, q)?;
    let n = data.lifts[0].grid().len();
    let window = (0, n - 1);

    let dy = differences(&base.y, &pert.y)?;
    let dyp = differences(&base.yp, &pert.yp)?;
    let t_y = vp_lq_seminorm(&Ensemble::new(&dy)?, spec, window)?;
    let t_yp = vp_lq_seminorm(&Ensemble::new(&dyp)?, spec, window)?;

    let count = base.y.len() as f64;
    let cps = |r: &RsdeResult| -> Result<Vec<ControlledPath>> {
        r.y.iter().zip(&r.yp).map(|(y, yp)| ControlledPath::new(y.clone(), yp.clone(), c.d)).collect()
    };
    let (cb, cq) = (cps(&base)?, cps(&pert)?);
    let remainder_gap = |s: usize, t: usize| -> f64 {
        let mut mean = vec![0.0; c.m];
        for i in 0..cb.len() {
            let (la, lb) = (&data.lifts[i], &perturbed.lifts[i]);
            let ra = remainder(&cb[i], la, la.skeleton().right(s), la.skeleton().right(t)).expect("aligned");
            let rb = remainder(&cq[i], lb, lb.skeleton().right(s), lb.skeleton().right(t)).expect("aligned");
            for a in 0..c.m {
                mean[a] += (ra[a] - rb[a]) / count;
            }
        }
        norm(&mean)
    };
    let table = TwoParamTable::from_fn(n, remainder_gap)?;
    let t_r = p_variation_with(p / 2.0, window, |s, t| table.get(s, t))?;

    let dy0: Vec<f64> = data.y0.iter().zip(&perturbed.y0).map(|(a, b)| dist(a, b)).collect();
    let r_y0 = lq_norm(&dy0, q)?.value;
    let r_m = match (&data.m, &perturbed.m) {
        (Some(a), Some(b)) => {
            let brackets: Vec<SamplePath> = a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let z = x.path.zip_map(&y.path, x.dim(), |u, v, o| (0..o.len()).for_each(|i| o[i] = u[i] - v[i]))?;
                    realized_bracket(&z)
                })
                .collect::<Result<_>>()?;
            let brackets = grid_paths(&brackets)?;
            vp_lq_seminorm(&Ensemble::new(&brackets)?, NormSpec::new(p / 2.0, q / 2.0)?, window)?.sqrt()
        }
        _ => 0.0,
    };
    let r_x = rough_path_distance_lq(&data.lifts, &perturbed.lifts, p, q)?.value;

    let lhs = t_y + t_yp + t_r;
    let rhs = r_y0 + r_m + r_x;
    let ratio = if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    };
    Ok(StabilityReport { lhs_terms: [t_y, t_yp, t_r], rhs_terms: [r_y0, r_m, r_x], lhs, rhs, ratio })
}

/// [`stability_experiment`] across perturbation sizes.
pub fn stability_sweep(
    c: &CoefficientSet,
    data: &SdeData,
    perturb: impl Fn(f64) -> Result<SdeData>,
    eps: &[f64],
    p: f64,
    q: f64,
) -> Result<Vec<(f64, StabilityReport)>> {
    eps.iter().map(|&e| Ok((e, stability_experiment(c, data, &perturb(e)?, p, q)?))).collect()
}

/// A named coefficient set with its driver and initial value.
#[derive(Debug, Clone)]
pub struct RsdeScenario {
    pub name: String,
    pub coeffs: CoefficientSet,
    pub driver: DriverSpec,
    pub y0: Vec<f64>,
}

/// Every combination of a built-in driver with a bounded rough coefficient,
/// drift `tanh_affine` and, when the driver has a martingale part,
/// diffusion `sin_bundle`. The state is two-dimensional.
pub fn scenario_registry() -> Result<Vec<RsdeScenario>> {
    let drivers = [
        ("brownian1", DriverSpec::brownian(1)),
        ("brownian2", DriverSpec::brownian(2)),
        ("poisson", DriverSpec::compound_poisson(1, 5.0, JumpDist::Normal { mean: 0.0, std: 0.5 })),
        ("smooth", DriverSpec::smooth("sine_cosine_pair")),
        ("mixed", DriverSpec::mixed(2, 3.0, JumpDist::Uniform { low: -0.5, high: 0.5 })),
    ];
    let fs = ["sin_bundle", "tanh_affine", "polynomial_clipped", "exp_clipped"];
    let m = 2;
    let mut out = Vec::new();
    for (dname, driver) in &drivers {
        let d = driver.dim;
        let sigma = (driver.kind != DriverKind::Smooth).then_some("sin_bundle");
        for f in fs {
            out.push(RsdeScenario {
                name: format!("{dname}_{f}"),
                coeffs: CoefficientSet::from_ids(m, d, d, Some("tanh_affine"), sigma, Some(f))?,
                driver: driver.clone(),
                y0: vec![0.5, -0.25],
            });
        }
    }
    Ok(out)
}

/// Sample `members` drivers on `grid` (member `i` from stream `i`) and
/// put each martingale on its lift's skeleton.
pub fn sample_data(
    driver: &DriverSpec,
    y0: &[f64],
    grid: &Arc<TimeGrid>,
    members: usize,
    seed: u64,
) -> Result<SdeData> {
    let drawn: Vec<Result<(Option<MartingalePath>, RoughLift)>> =
        par_members(members, seed, tag("rsde"), |_, rng| {
            let drv = driver.sample(grid, rng)?;
            match drv.martingale {
                Some(m) => {
                    let (m, l) = align(&m, &drv.lift)?;
                    Ok((Some(m), l))
                }
                None => Ok((None, drv.lift)),
            }
        });
    let drawn: Vec<(Option<MartingalePath>, RoughLift)> = drawn.into_iter().collect::<Result<_>>()?;
    let has_m = drawn.iter().all(|d| d.0.is_some());
    let (ms, lifts): (Vec<Option<MartingalePath>>, Vec<RoughLift>) = drawn.into_iter().unzip();
    Ok(SdeData {
        y0: vec![y0.to_vec(); members],
        m: has_m.then(|| ms.into_iter().flatten().collect()),
        lifts,
    })
}
