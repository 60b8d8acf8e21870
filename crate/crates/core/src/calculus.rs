//! Stochastic controlled paths, brackets and the jump Itô formula.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::lift::RoughLift;
use crate::linalg::norm;
use crate::norms::{lq_norm, LqEstimate};
use crate::path::{SamplePath, Skeleton};
use crate::sewing::{skeleton_sum, Germ};
use crate::smooth::SmoothFn;
use crate::stochint::young_integrate;

/// A pair `(Y, Y')` with `Y ∈ R^m` and Gubinelli derivative `Y' ∈ R^{m x d}`
/// on the skeleton of a `d`-dimensional lift.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledPath {
    pub y: SamplePath,
    pub yp: SamplePath,
    d: usize,
}

impl ControlledPath {
    pub fn new(y: SamplePath, yp: SamplePath, d: usize) -> Result<Self> {
        y.check_same_skeleton(&yp)?;
        if yp.dim() != y.dim() * d {
            return invalid(format!("Gubinelli derivative must be {} x {d}", y.dim()));
        }
        Ok(Self { y, yp, d })
    }

    /// `(X, I)` for a lift `X`.
    pub fn of_lift(lift: &RoughLift) -> Self {
        let d = lift.dim();
        let yp = SamplePath::from_node_fn(lift.skeleton().clone(), d * d, |_, out| {
            (0..d).for_each(|i| out[i * d + i] = 1.0)
        });
        Self { y: lift.path().clone(), yp, d }
    }

    /// `(M, 0)`: a path with no rough component.
    pub fn without_derivative(path: &SamplePath, d: usize) -> Self {
        let yp = SamplePath::zeros(path.skeleton().clone(), path.dim() * d);
        Self { y: path.clone(), yp, d }
    }

    pub fn dim(&self) -> usize {
        self.y.dim()
    }

    pub fn lift_dim(&self) -> usize {
        self.d
    }

    pub fn skeleton(&self) -> &Arc<Skeleton> {
        self.y.skeleton()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let s = |x: &[f64], out: &mut [f64]| out.iter_mut().zip(x).for_each(|(o, v)| *o = factor * v);
        Self { y: self.y.map(self.y.dim(), s), yp: self.yp.map(self.yp.dim(), s), d: self.d }
    }

    pub fn embed(&self, target: &Arc<Skeleton>) -> Result<Self> {
        Ok(Self { y: self.y.embed(target)?, yp: self.yp.embed(target)?, d: self.d })
    }

    fn check_lift(&self, lift: &RoughLift) -> Result<()> {
        lift.check_same_skeleton(self.skeleton())?;
        if lift.dim() != self.d {
            return invalid("controlled path and lift dimensions differ");
        }
        Ok(())
    }
}

/// `R^Y_{s,t} = δY_{s,t} - Y'_s δX_{s,t}` on skeleton nodes.
pub fn remainder(cp: &ControlledPath, lift: &RoughLift, s: usize, t: usize) -> Result<Vec<f64>> {
    cp.check_lift(lift)?;
    if s > t {
        return invalid(format!("remainder needs s <= t, got {s} > {t}"));
    }
    let d = cp.d;
    let mut dx = vec![0.0; d];
    lift.path().increment(s, t, &mut dx);
    let mut out = vec![0.0; cp.dim()];
    cp.y.increment(s, t, &mut out);
    let yp = cp.yp.node(s);
    for (a, o) in out.iter_mut().enumerate() {
        for i in 0..d {
            *o -= yp[a * d + i] * dx[i];
        }
    }
    Ok(out)
}

/// `(f(Y), Df(Y) Y')`.
pub fn compose(f: &SmoothFn, cp: &ControlledPath) -> Result<ControlledPath> {
    if f.in_dim() != cp.dim() {
        return invalid(format!("function expects dimension {}, path has {}", f.in_dim(), cp.dim()));
    }
    let (m, o, d) = (cp.dim(), f.out_dim(), cp.d);
    let y = cp.y.map(o, |v, out| f.eval(v, out));
    let mut jac = vec![0.0; o * m];
    let yp = SamplePath::from_node_fn(cp.skeleton().clone(), o * d, |n, out| {
        f.jacobian(cp.y.node(n), &mut jac);
        let p = cp.yp.node(n);
        for r in 0..o {
            for i in 0..d {
                out[r * d + i] = (0..m).map(|b| jac[r * m + b] * p[b * d + i]).sum();
            }
        }
    });
    Ok(ControlledPath { y, yp, d })
}

/// `Ξ_{a,b} = A_a ⊗ δB_{a,b} + (A'_a ⊗ B'_a) XX_{a,b}`, i.e.
/// `[α][β] = A_α δB_β + Σ_{ij} A'[α][i] B'[β][j] XX^{ij}`.
pub struct ControlledGerm<'a> {
    pub a: &'a ControlledPath,
    pub b: &'a ControlledPath,
    pub lift: &'a RoughLift,
}

/// `Ξ_{a,b} = δA ⊗ δB - 2 (A'_a ⊗ B'_a) Sym(XX_{a,b})`.
pub struct BracketGerm<'a> {
    pub a: &'a ControlledPath,
    pub b: &'a ControlledPath,
    pub lift: &'a RoughLift,
}

fn second_order(a: &ControlledPath, b: &ControlledPath, node: usize, xx: &[f64], out: &mut [f64], sym: bool) {
    let d = a.d;
    let (ma, mb) = (a.dim(), b.dim());
    let (ap, bp) = (a.yp.node(node), b.yp.node(node));
    for al in 0..ma {
        for be in 0..mb {
            let mut acc = 0.0;
            for i in 0..d {
                let x = ap[al * d + i];
                if x == 0.0 {
                    continue;
                }
                for j in 0..d {
                    let s = if sym { 0.5 * (xx[i * d + j] + xx[j * d + i]) } else { xx[i * d + j] };
                    acc += x * bp[be * d + j] * s;
                }
            }
            out[al * mb + be] = acc;
        }
    }
}

impl Germ for ControlledGerm<'_> {
    fn dim(&self) -> usize {
        self.a.dim() * self.b.dim()
    }

    fn skeleton(&self) -> &Arc<Skeleton> {
        self.lift.skeleton()
    }

    fn eval(&self, s: usize, t: usize, out: &mut [f64]) {
        let d = self.lift.dim();
        let mut xx = vec![0.0; d * d];
        self.lift.second(s, t, &mut xx);
        second_order(self.a, self.b, s, &xx, out, false);
        let mb = self.b.dim();
        let av = self.a.y.node(s);
        let (b0, b1) = (self.b.y.node(s), self.b.y.node(t));
        for al in 0..self.a.dim() {
            for be in 0..mb {
                out[al * mb + be] += av[al] * (b1[be] - b0[be]);
            }
        }
    }

    fn label(&self) -> String {
        "controlled".into()
    }
}

impl Germ for BracketGerm<'_> {
    fn dim(&self) -> usize {
        self.a.dim() * self.b.dim()
    }

    fn skeleton(&self) -> &Arc<Skeleton> {
        self.lift.skeleton()
    }

    fn eval(&self, s: usize, t: usize, out: &mut [f64]) {
        let d = self.lift.dim();
        let mut xx = vec![0.0; d * d];
        self.lift.second(s, t, &mut xx);
        second_order(self.a, self.b, s, &xx, out, true);
        let mb = self.b.dim();
        let (a0, a1) = (self.a.y.node(s), self.a.y.node(t));
        let (b0, b1) = (self.b.y.node(s), self.b.y.node(t));
        for al in 0..self.a.dim() {
            for be in 0..mb {
                out[al * mb + be] = (a1[al] - a0[al]) * (b1[be] - b0[be]) - 2.0 * out[al * mb + be];
            }
        }
    }

    fn label(&self) -> String {
        "bracket".into()
    }
}

fn check_pair(a: &ControlledPath, b: &ControlledPath, lift: &RoughLift) -> Result<()> {
    a.check_lift(lift)?;
    b.check_lift(lift)
}

/// `[A, B]` as an `ma x mb` matrix path.
pub fn bracket(a: &ControlledPath, b: &ControlledPath, lift: &RoughLift) -> Result<SamplePath> {
    check_pair(a, b, lift)?;
    Ok(skeleton_sum(&BracketGerm { a, b, lift }))
}

/// `[X]` with increments `δX ⊗ δX - 2 Sym(XX)`.
pub fn rough_bracket(lift: &RoughLift) -> SamplePath {
    let x = ControlledPath::of_lift(lift);
    skeleton_sum(&BracketGerm { a: &x, b: &x, lift })
}

/// `∫ A ⊗ dB` as an `ma x mb` matrix path.
pub fn controlled_integral(a: &ControlledPath, b: &ControlledPath, lift: &RoughLift) -> Result<SamplePath> {
    check_pair(a, b, lift)?;
    Ok(skeleton_sum(&ControlledGerm { a, b, lift }))
}

/// `Σ_{jumps u <= t} ΔA_u ⊗ ΔB_u` at every grid point.
fn jump_covariation(a: &SamplePath, b: &SamplePath) -> Vec<Vec<f64>> {
    let skel = a.skeleton();
    let (ma, mb) = (a.dim(), b.dim());
    let mut acc = vec![0.0; ma * mb];
    (0..skel.grid().len())
        .map(|k| {
            if skel.is_jump(k) {
                let (ja, jb) = (a.jump(k), b.jump(k));
                for al in 0..ma {
                    for be in 0..mb {
                        acc[al * mb + be] += ja[al] * jb[be];
                    }
                }
            }
            acc.clone()
        })
        .collect()
}

/// `L^{q/2}` over members of `sup_t |[M, Z]_t - Σ_{u <= t} ΔM_u ⊗ ΔZ_u|`,
/// with `M` read as `(M, 0)` on the lift's skeleton.
pub fn mixed_bracket_check(
    ms: &[SamplePath],
    zs: &[ControlledPath],
    lifts: &[RoughLift],
    q: f64,
) -> Result<LqEstimate> {
    if ms.len() != zs.len() || zs.len() != lifts.len() {
        return invalid("ensembles differ in size");
    }
    if !(q >= 2.0) {
        return invalid("the mixed bracket residual is an L^{q/2} norm and needs q >= 2");
    }
    let gaps: Vec<f64> = ms
        .par_iter()
        .zip(zs.par_iter())
        .zip(lifts.par_iter())
        .map(|((m, z), lift)| {
            let mc = ControlledPath::without_derivative(m, lift.dim());
            let br = bracket(&mc, z, lift)?;
            let jumps = jump_covariation(m, &z.y);
            Ok((0..br.grid().len())
                .map(|k| crate::linalg::dist(br.value(k), &jumps[k]))
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    lq_norm(&gaps, q / 2.0)
}

fn transpose_into(v: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = v[r * cols + c];
        }
    }
}

/// `max_t |A_t ⊗ B_t - A_0 ⊗ B_0 - ∫A ⊗ dB - ∫dA ⊗ B - [A, B]_t|` over grid
/// points, with `∫dA ⊗ B` the transpose of `∫B ⊗ dA`.
pub fn integration_by_parts_residual(a: &ControlledPath, b: &ControlledPath, lift: &RoughLift) -> Result<f64> {
    let adb = controlled_integral(a, b, lift)?;
    let bda = controlled_integral(b, a, lift)?;
    let br = bracket(a, b, lift)?;
    let (ma, mb) = (a.dim(), b.dim());
    let mut tr = vec![0.0; ma * mb];
    let (a0, b0) = (a.y.value(0), b.y.value(0));
    let mut worst = 0.0f64;
    for k in 0..lift.grid().len() {
        transpose_into(bda.value(k), mb, ma, &mut tr);
        let (at, bt) = (a.y.value(k), b.y.value(k));
        for al in 0..ma {
            for be in 0..mb {
                let ij = al * mb + be;
                let r = at[al] * bt[be] - a0[al] * b0[be] - adb.value(k)[ij] - tr[ij] - br.value(k)[ij];
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

/// `L^{q/2}` over members of [`integration_by_parts_residual`].
pub fn integration_by_parts_residual_lq(
    a: &[ControlledPath],
    b: &[ControlledPath],
    lifts: &[RoughLift],
    q: f64,
) -> Result<LqEstimate> {
    if a.len() != b.len() || b.len() != lifts.len() {
        return invalid("ensembles differ in size");
    }
    let r: Vec<f64> = a
        .par_iter()
        .zip(b.par_iter())
        .zip(lifts.par_iter())
        .map(|((x, y), l)| integration_by_parts_residual(x, y, l))
        .collect::<Result<_>>()?;
    lq_norm(&r, (q / 2.0).max(1.0))
}

/// Terminal values of the terms of the jump Itô formula
/// `f(Y_T) - f(Y_0) = ∫Df(Y) dY + ½∫D²f(Y) d[Y] + Σ_jumps (...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItoFormulaTerms {
    pub increment: Vec<f64>,
    pub first_order: Vec<f64>,
    pub second_order: Vec<f64>,
    pub jumps: Vec<f64>,
    pub residual: Vec<f64>,
}

/// The Itô formula terms for one path. `∫Df(Y) dY` is the controlled
/// integral of `(Df(Y), D²f(Y) Y')` against `(Y, Y')`, traced over the
/// inner index; the bracket term is a Young integral against `[Y]`, which is
/// the sewn bracket unless `bracket_override` supplies another
/// (`m x m`, on the same skeleton).
pub fn ito_formula_terms(
    f: &SmoothFn,
    cp: &ControlledPath,
    lift: &RoughLift,
    bracket_override: Option<&SamplePath>,
) -> Result<ItoFormulaTerms> {
    cp.check_lift(lift)?;
    let (m, o, d) = (cp.dim(), f.out_dim(), cp.d);
    if f.in_dim() != m {
        return invalid("function and path dimensions differ");
    }
    let skel = cp.skeleton().clone();
    let df = cp.y.map(o * m, |y, out| f.jacobian(y, out));
    let mut hess = vec![0.0; o * m * m];
    let dfp = SamplePath::from_node_fn(skel.clone(), o * m * d, |n, out| {
        f.hessian(cp.y.node(n), &mut hess);
        let p = cp.yp.node(n);
        for ob in 0..o * m {
            for i in 0..d {
                out[ob * d + i] = (0..m).map(|c| hess[ob * m + c] * p[c * d + i]).sum();
            }
        }
    });
    let a = ControlledPath { y: df, yp: dfp, d };
    let tensor = skeleton_sum(&ControlledGerm { a: &a, b: cp, lift });
    let t = tensor.terminal();
    let first_order: Vec<f64> = (0..o).map(|r| (0..m).map(|b| t[(r * m + b) * m + b]).sum()).collect();

    let br = match bracket_override {
        Some(b) => {
            b.check_same_skeleton(&cp.y)?;
            if b.dim() != m * m {
                return invalid("bracket override must be m x m");
            }
            b.clone()
        }
        None => skeleton_sum(&BracketGerm { a: cp, b: cp, lift }),
    };
    let half_hess = cp.y.map(o * m * m, |y, out| {
        f.hessian(y, out);
        out.iter_mut().for_each(|x| *x *= 0.5);
    });
    let young = young_integrate(std::slice::from_ref(&half_hess), std::slice::from_ref(&br))?;
    let second_order = young.members[0].terminal().to_vec();

    let mut jumps = vec![0.0; o];
    let (mut jac, mut hes) = (vec![0.0; o * m], vec![0.0; o * m * m]);
    for &k in skel.jumps() {
        let (yl, yr) = (cp.y.left(k), cp.y.value(k));
        let dy = cp.y.jump(k);
        let (fl, fr) = (f.eval_vec(yl), f.eval_vec(yr));
        f.jacobian(yl, &mut jac);
        f.hessian(yl, &mut hes);
        for r in 0..o {
            let mut lin = 0.0;
            let mut quad = 0.0;
            for b in 0..m {
                lin += jac[r * m + b] * dy[b];
                for c in 0..m {
                    quad += hes[(r * m + b) * m + c] * dy[b] * dy[c];
                }
            }
            jumps[r] += fr[r] - fl[r] - lin - 0.5 * quad;
        }
    }

    let (f0, ft) = (f.eval_vec(cp.y.value(0)), f.eval_vec(cp.y.terminal()));
    let increment: Vec<f64> = ft.iter().zip(&f0).map(|(a, b)| a - b).collect();
    let residual = (0..o).map(|r| increment[r] - first_order[r] - second_order[r] - jumps[r]).collect();
    Ok(ItoFormulaTerms { increment, first_order, second_order, jumps, residual })
}

/// `L^1` norm over members of the Itô formula residual. Warns when the
/// ensemble's `L^4` moment of `sup |Y|` is not finite.
pub fn ito_formula_residual(
    f: &SmoothFn,
    cps: &[ControlledPath],
    lifts: &[RoughLift],
    bracket_overrides: Option<&[SamplePath]>,
) -> Result<LqEstimate> {
    if cps.len() != lifts.len() || bracket_overrides.is_some_and(|b| b.len() != cps.len()) {
        return invalid("ensembles differ in size");
    }
    let sups: Vec<f64> = cps
        .iter()
        .map(|cp| (0..cp.y.grid().len()).map(|k| norm(cp.y.value(k))).fold(0.0, f64::max))
        .collect();
    if !lq_norm(&sups, 4.0)?.value.is_finite() {
        log::warn!("Itô formula: the ensemble has no finite fourth moment; the bracket term may be meaningless");
    }
    let res: Vec<f64> = (0..cps.len())
        .into_par_iter()
        .map(|i| {
            let over = bracket_overrides.map(|b| &b[i]);
            ito_formula_terms(f, &cps[i], &lifts[i], over).map(|t| norm(&t.residual))
        })
        .collect::<Result<_>>()?;
    lq_norm(&res, 1.0)
}
