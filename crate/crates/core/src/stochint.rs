//! Itô, rough stochastic and Young integrals built on the sewing engine.

use std::sync::Arc;

use rayon::prelude::*;

use crate::calculus::ControlledPath;
use crate::error::{invalid, Error, Result};
use crate::lift::RoughLift;
use crate::linalg::is_psd;
use crate::path::{MartingalePath, SamplePath, Skeleton};
use crate::sewing::{skeleton_sum, Germ};

/// `Ξ_{a,b} = Y_a δA_{a,b}` with `Y` an `out x k` matrix path and `A` a path
/// in `R^k`.
pub struct LinearGerm<'a> {
    pub integrand: &'a SamplePath,
    pub driver: &'a SamplePath,
}

impl<'a> LinearGerm<'a> {
    pub fn new(integrand: &'a SamplePath, driver: &'a SamplePath) -> Result<Self> {
        integrand.check_same_skeleton(driver)?;
        if !integrand.dim().is_multiple_of(driver.dim()) {
            return invalid(format!(
                "integrand dimension {} is not a multiple of the driver dimension {}",
                integrand.dim(),
                driver.dim()
            ));
        }
        Ok(Self { integrand, driver })
    }
}

impl Germ for LinearGerm<'_> {
    fn dim(&self) -> usize {
        self.integrand.dim() / self.driver.dim()
    }

    fn skeleton(&self) -> &Arc<Skeleton> {
        self.driver.skeleton()
    }

    fn eval(&self, a: usize, b: usize, out: &mut [f64]) {
        let k = self.driver.dim();
        let y = self.integrand.node(a);
        let (da, db) = (self.driver.node(a), self.driver.node(b));
        for (o, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for c in 0..k {
                acc += y[o * k + c] * (db[c] - da[c]);
            }
            *slot = acc;
        }
    }

    fn label(&self) -> String {
        "left_point".into()
    }
}

/// `Ξ_{a,b} = Y_a δX_{a,b} + Y'_a XX_{a,b}` for `Y ∈ L(R^d; R^m)` stored
/// `m x d` and `Y'[(o * d + j) * d + i]`:
/// `out_o = Σ_j Y[o,j] δX^j + Σ_{i,j} Y'[(o,j), i] XX^{ij}`.
pub struct RoughGerm<'a> {
    pub cp: &'a ControlledPath,
    pub lift: &'a RoughLift,
}

impl<'a> RoughGerm<'a> {
    pub fn new(cp: &'a ControlledPath, lift: &'a RoughLift) -> Result<Self> {
        lift.check_same_skeleton(cp.skeleton())?;
        let d = lift.dim();
        if cp.lift_dim() != d || !cp.y.dim().is_multiple_of(d) {
            return invalid("integrand must be L(R^d; R^m) valued with a d-dimensional Gubinelli derivative");
        }
        Ok(Self { cp, lift })
    }

    /// The germ evaluated with explicit integrand values.
    pub(crate) fn contract(y: &[f64], yp: &[f64], dx: &[f64], xx: &[f64], out: &mut [f64]) {
        let d = dx.len();
        for (o, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..d {
                acc += y[o * d + j] * dx[j];
            }
            for j in 0..d {
                for i in 0..d {
                    acc += yp[(o * d + j) * d + i] * xx[i * d + j];
                }
            }
            *slot = acc;
        }
    }
}

impl Germ for RoughGerm<'_> {
    fn dim(&self) -> usize {
        self.cp.y.dim() / self.lift.dim()
    }

    fn skeleton(&self) -> &Arc<Skeleton> {
        self.lift.skeleton()
    }

    fn eval(&self, a: usize, b: usize, out: &mut [f64]) {
        let d = self.lift.dim();
        let mut dx = vec![0.0; d];
        let mut xx = vec![0.0; d * d];
        self.lift.path().increment(a, b, &mut dx);
        self.lift.second(a, b, &mut xx);
        Self::contract(self.cp.y.node(a), self.cp.yp.node(a), &dx, &xx, out);
    }

    fn label(&self) -> String {
        "rough".into()
    }
}

/// An integral per ensemble member.
#[derive(Debug, Clone)]
pub struct IntegralProcess {
    pub members: Vec<SamplePath>,
    pub germ: String,
    pub diagnostics: Vec<String>,
}

impl IntegralProcess {
    pub fn terminal(&self) -> Vec<Vec<f64>> {
        self.members.iter().map(|m| m.terminal().to_vec()).collect()
    }
}

fn check_sizes(a: usize, b: usize) -> Result<()> {
    if a != b {
        return invalid(format!("ensembles differ in size: {a} vs {b}"));
    }
    if a == 0 {
        return invalid("empty ensemble");
    }
    Ok(())
}

/// `∫ Y dM` by sewing `Y_s δM_{s,t}`: the left-point sum over every
/// substep, so a jump of `M` at `t` is integrated against `Y_{t-}`.
pub fn ito_integrate(ys: &[SamplePath], ms: &[MartingalePath]) -> Result<IntegralProcess> {
    check_sizes(ys.len(), ms.len())?;
    let members = ys
        .par_iter()
        .zip(ms.par_iter())
        .map(|(y, m)| Ok(skeleton_sum(&LinearGerm::new(y, &m.path)?)))
        .collect::<Result<_>>()?;
    Ok(IntegralProcess { members, germ: "ito".into(), diagnostics: Vec::new() })
}

/// `∫ Y dX` by sewing `Y_s δX_{s,t} + Y'_s XX_{s,t}`.
pub fn rough_stoch_integrate(cps: &[ControlledPath], lifts: &[RoughLift]) -> Result<IntegralProcess> {
    check_sizes(cps.len(), lifts.len())?;
    let members = cps
        .par_iter()
        .zip(lifts.par_iter())
        .map(|(cp, l)| Ok(skeleton_sum(&RoughGerm::new(cp, l)?)))
        .collect::<Result<_>>()?;
    Ok(IntegralProcess { members, germ: "rough".into(), diagnostics: Vec::new() })
}

/// Whether every substep increment of `a` is nonnegative (scalar entries) or
/// positive semidefinite (square symmetric matrix paths).
fn is_nondecreasing(a: &SamplePath) -> bool {
    let k = a.dim();
    let r = (k as f64).sqrt().round() as usize;
    let mut inc = vec![0.0; k];
    (1..a.skeleton().node_count()).all(|n| {
        a.increment(n - 1, n, &mut inc);
        let scale = inc.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if r * r == k && k > 1 {
            is_psd(&inc, r, 1e-12 * (1.0 + scale))
        } else {
            inc.iter().all(|&x| x >= -1e-12 * (1.0 + scale))
        }
    })
}

/// Left-point Stieltjes integral `∫ Y dA` against a finite-variation path.
/// A driver that is not nondecreasing is reported in the diagnostics.
pub fn young_integrate(ys: &[SamplePath], drivers: &[SamplePath]) -> Result<IntegralProcess> {
    check_sizes(ys.len(), drivers.len())?;
    let results: Vec<(SamplePath, bool)> = ys
        .par_iter()
        .zip(drivers.par_iter())
        .map(|(y, a)| Ok((skeleton_sum(&LinearGerm::new(y, a)?), is_nondecreasing(a))))
        .collect::<Result<_>>()?;
    let bad = results.iter().filter(|(_, ok)| !ok).count();
    let mut diagnostics = Vec::new();
    if bad > 0 {
        let msg = format!("{bad} of {} Young drivers are not nondecreasing", results.len());
        log::warn!("{msg}");
        diagnostics.push(msg);
    }
    Ok(IntegralProcess { members: results.into_iter().map(|(m, _)| m).collect(), germ: "young".into(), diagnostics })
}

/// `max_k |ΔZ_k - Y_{k-} ΔX_k - Y'_{k-} ΔXX_k|` over declared jumps.
pub fn jump_structure_check(z: &SamplePath, cp: &ControlledPath, lift: &RoughLift) -> Result<f64> {
    let germ = RoughGerm::new(cp, lift)?;
    if !z.skeleton().same_as(lift.skeleton()) || z.dim() != germ.dim() {
        return Err(Error::GridMismatch("integral and lift live on different skeletons".into()));
    }
    let skel = lift.skeleton();
    let mut expected = vec![0.0; germ.dim()];
    let mut worst = 0.0f64;
    for &k in skel.jumps() {
        germ.eval(skel.left(k), skel.right(k), &mut expected);
        for (dz, e) in z.jump(k).iter().zip(&expected) {
            worst = worst.max((dz - e).abs());
        }
    }
    Ok(worst)
}
