//! Stochastic sewing on a finite skeleton.
//!
//! A [`Germ`] is a two-parameter local approximation `Ξ_{a,b}` on skeleton
//! nodes. On a finite grid the sewn process is the sum of `Ξ` over all
//! consecutive nodes (jump substeps included); coarser alternating-midpoint
//! partitions supply the convergence diagnostics.

use std::sync::Arc;

use rayon::prelude::*;

use crate::control::{ControlFn, TimeControl};
use crate::error::{invalid, Result};
use crate::grid::Partition;
use crate::midpoint::alternating_midpoints;
use crate::norms::{lq_norm, LqEstimate};
use crate::path::{SamplePath, Skeleton};

pub trait Germ: Sync {
    /// Output dimension.
    fn dim(&self) -> usize;

    fn skeleton(&self) -> &Arc<Skeleton>;

    /// `out = Ξ_{a,b}` for skeleton nodes `a <= b`. Must vanish for `a = b`
    /// and read only data up to node `b`.
    fn eval(&self, a: usize, b: usize, out: &mut [f64]);

    fn label(&self) -> String {
        "germ".into()
    }
}

/// `Ξ_{a,b} = δX_{a,b}`.
pub struct IncrementGerm<'a> {
    pub path: &'a SamplePath,
}

impl Germ for IncrementGerm<'_> {
    fn dim(&self) -> usize {
        self.path.dim()
    }

    fn skeleton(&self) -> &Arc<Skeleton> {
        self.path.skeleton()
    }

    fn eval(&self, a: usize, b: usize, out: &mut [f64]) {
        self.path.increment(a, b, out)
    }

    fn label(&self) -> String {
        "increment".into()
    }
}

/// A germ from a closure, for ad-hoc and fault-injection use.
pub struct FnGerm<F> {
    pub skel: Arc<Skeleton>,
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(usize, usize, &mut [f64]) + Sync> Germ for FnGerm<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn skeleton(&self) -> &Arc<Skeleton> {
        &self.skel
    }

    fn eval(&self, a: usize, b: usize, out: &mut [f64]) {
        (self.f)(a, b, out)
    }
}

/// The sum of `Ξ` over consecutive skeleton nodes, as a path on the
/// skeleton starting at zero. This is the sewn process on a finite grid.
pub fn skeleton_sum<G: Germ + ?Sized>(germ: &G) -> SamplePath {
    let dim = germ.dim();
    let skel = germ.skeleton().clone();
    let nodes = skel.node_count();
    let mut values = vec![0.0; nodes * dim];
    let mut step = vec![0.0; dim];
    for n in 1..nodes {
        germ.eval(n - 1, n, &mut step);
        let (done, rest) = values.split_at_mut(n * dim);
        for i in 0..dim {
            rest[i] = done[(n - 1) * dim + i] + step[i];
        }
    }
    SamplePath::new(skel, dim, values).expect("sizes match")
}

/// Clipped partition sums `Ξ^P_t = Σ_{[u,v] ∈ P} Ξ_{u∧t, v∧t}` at every
/// grid time, written grid-point-major into `out`.
fn clipped_sums<G: Germ + ?Sized>(germ: &G, indices: &[usize], out: &mut [f64]) {
    let dim = germ.dim();
    let skel = germ.skeleton();
    let last = skel.grid().last_index();
    out.iter_mut().for_each(|x| *x = 0.0);
    let mut base = vec![0.0; dim];
    let mut piece = vec![0.0; dim];
    for w in indices.windows(2) {
        let (u, v) = (w[0], w[1]);
        for t in u + 1..=v {
            germ.eval(skel.right(u), skel.right(t), &mut piece);
            for i in 0..dim {
                out[t * dim + i] = base[i] + piece[i];
            }
        }
        base.copy_from_slice(&out[v * dim..(v + 1) * dim]);
    }
    let end = *indices.last().expect("partition is nonempty");
    for t in end + 1..=last {
        out[t * dim..(t + 1) * dim].copy_from_slice(&base);
    }
}

/// Clipped Riemann sums of `germ` along `partition`, as a path on the grid
/// (one value per grid point, no declared jumps).
pub fn riemann_sum<G: Germ + ?Sized>(germ: &G, partition: &Partition) -> Result<SamplePath> {
    let grid = germ.skeleton().grid().clone();
    if partition.end() > grid.last_index() {
        return invalid("partition extends beyond the grid");
    }
    let mut out = vec![0.0; grid.len() * germ.dim()];
    clipped_sums(germ, partition.indices(), &mut out);
    SamplePath::continuous(grid, germ.dim(), out)
}

/// `δΞ_{s,u,t} = Ξ_{s,t} - Ξ_{s,u} - Ξ_{u,t}` on skeleton nodes.
pub fn delta_germ<G: Germ + ?Sized>(germ: &G, s: usize, u: usize, t: usize) -> Result<Vec<f64>> {
    if !(s <= u && u <= t) {
        return invalid(format!("delta needs s <= u <= t, got ({s}, {u}, {t})"));
    }
    if t >= germ.skeleton().node_count() {
        return invalid("delta node outside the skeleton");
    }
    let dim = germ.dim();
    let (mut st, mut su, mut ut) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    germ.eval(s, t, &mut st);
    germ.eval(s, u, &mut su);
    germ.eval(u, t, &mut ut);
    Ok((0..dim).map(|i| st[i] - su[i] - ut[i]).collect())
}

/// Builds the refinement controls for one ensemble member.
pub type ControlFactory<'a, G> = &'a (dyn Fn(&G) -> Result<Vec<Box<dyn ControlFn>>> + Sync);

/// The time control `t - s` alone.
pub fn time_controls<G: Germ>(germ: &G) -> Result<Vec<Box<dyn ControlFn>>> {
    Ok(vec![Box::new(TimeControl::new(germ.skeleton().grid().clone()))])
}

/// Per-member refinement history.
struct MemberHistory {
    limit: SamplePath,
    sup_limit: f64,
    to_limit: Vec<f64>,
    successive: Vec<f64>,
    terminal: Vec<Vec<f64>>,
    labels: Vec<String>,
}

fn sup_dist(a: &[f64], b: &[f64], dim: usize) -> f64 {
    a.chunks(dim)
        .zip(b.chunks(dim))
        .map(|(x, y)| crate::linalg::dist(x, y))
        .fold(0.0, f64::max)
}

fn member_history<G: Germ>(germ: &G, controls: ControlFactory<'_, G>, depth: usize) -> Result<MemberHistory> {
    let dim = germ.dim();
    let skel = germ.skeleton();
    let grid = skel.grid();
    let limit = skeleton_sum(germ);
    let limit_grid: Vec<f64> = (0..grid.len()).flat_map(|k| limit.value(k).to_vec()).collect();
    let sup_limit = limit_grid.chunks(dim).map(crate::linalg::norm).fold(0.0, f64::max);
    let ws = controls(germ)?;
    let refs: Vec<&dyn ControlFn> = ws.iter().map(|w| w.as_ref()).collect();
    let am = alternating_midpoints(&refs, (0, grid.last_index()), depth)?;
    let mut prev = vec![0.0; grid.len() * dim];
    let mut cur = vec![0.0; grid.len() * dim];
    let mut to_limit = Vec::with_capacity(depth + 1);
    let mut successive = Vec::with_capacity(depth);
    let mut terminal = Vec::with_capacity(depth + 1);
    for h in 0..=depth {
        clipped_sums(germ, &am.indices(h), &mut cur);
        to_limit.push(sup_dist(&cur, &limit_grid, dim));
        if h > 0 {
            successive.push(sup_dist(&cur, &prev, dim));
        }
        terminal.push(cur[grid.last_index() * dim..].to_vec());
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(MemberHistory { limit, sup_limit, to_limit, successive, terminal, labels: ws.iter().map(|w| w.label()).collect() })
}

fn histories<G: Germ>(germs: &[G], controls: ControlFactory<'_, G>, depth: usize) -> Result<Vec<MemberHistory>> {
    if germs.is_empty() {
        return invalid("sewing needs at least one ensemble member");
    }
    germs.par_iter().map(|g| member_history(g, controls, depth)).collect()
}

/// True when `xs` increases for `run` consecutive steps somewhere.
fn increasing_run(xs: &[f64], run: usize) -> bool {
    let mut count = 0;
    for w in xs.windows(2) {
        if w[1] > w[0] {
            count += 1;
            if count >= run {
                return true;
            }
        } else {
            count = 0;
        }
    }
    false
}

/// Result of [`sew`].
#[derive(Debug, Clone)]
pub struct SewOutput {
    /// The sewn process per member.
    pub members: Vec<SamplePath>,
    /// Level at which successive partition sums agreed to `tol`, or the
    /// deepest level evaluated.
    pub levels_used: usize,
    /// `level_terminal[h][i]`: `Ξ^{P^h}_T` for member `i`.
    pub level_terminal: Vec<Vec<Vec<f64>>>,
    /// `L^q` over members of `sup_t |Ξ^{P^h}_t - Ξ^{P^{h-1}}_t|`, for `h >= 1`.
    pub successive: Vec<f64>,
    /// Set when successive differences grow for three consecutive levels.
    pub non_convergent: bool,
}

/// Sew an ensemble of germs along alternating-midpoint partitions.
pub fn sew<G: Germ>(
    germs: &[G],
    controls: ControlFactory<'_, G>,
    max_level: usize,
    q: f64,
    tol: f64,
) -> Result<SewOutput> {
    let hist = histories(germs, controls, max_level)?;
    let scale = lq_norm(&hist.iter().map(|h| h.sup_limit).collect::<Vec<_>>(), q)?.value;
    let successive: Vec<f64> = (0..max_level)
        .map(|h| lq_norm(&hist.iter().map(|m| m.successive[h]).collect::<Vec<_>>(), q).map(|e| e.value))
        .collect::<Result<_>>()?;
    let levels_used = successive
        .iter()
        .position(|&d| d <= tol * scale.max(f64::MIN_POSITIVE))
        .map_or(max_level, |h| h + 1);
    let non_convergent = increasing_run(&successive, 3);
    if non_convergent {
        log::warn!("sewing: successive partition sums grow for three consecutive levels");
    }
    let level_terminal = (0..=max_level).map(|h| hist.iter().map(|m| m.terminal[h].clone()).collect()).collect();
    Ok(SewOutput {
        members: hist.into_iter().map(|m| m.limit).collect(),
        levels_used,
        level_terminal,
        successive,
        non_convergent,
    })
}

/// Empirical convergence of partition sums to the sewn process.
#[derive(Debug, Clone)]
pub struct RateReport {
    /// `‖sup_t |I_t - Ξ^{P^h}_t|‖_{L^q}` for `h = 0..=H`.
    pub distances: Vec<LqEstimate>,
    /// `L^q` distances between consecutive levels.
    pub successive: Vec<f64>,
    /// Least-squares slope of `log2(distance)` against `h` over nonzero
    /// distances; `-∞` when every distance is zero.
    pub slope: f64,
    pub non_convergent: bool,
    pub controls: Vec<String>,
}

/// Relative floor below which distances count as rounding noise.
pub const ROUNDING_FLOOR: f64 = 1e-12;

/// Rate diagnostic over levels `0..=levels`.
pub fn convergence_rate<G: Germ>(
    germs: &[G],
    controls: ControlFactory<'_, G>,
    q: f64,
    levels: usize,
) -> Result<RateReport> {
    if levels < 3 {
        return invalid(format!("a rate fit needs at least 3 levels, got {levels}"));
    }
    let hist = histories(germs, controls, levels)?;
    let scale = lq_norm(&hist.iter().map(|h| h.sup_limit).collect::<Vec<_>>(), q)?.value;
    let floor = ROUNDING_FLOOR * (1.0 + scale);
    let mut distances = Vec::with_capacity(levels + 1);
    for h in 0..=levels {
        let mut e = lq_norm(&hist.iter().map(|m| m.to_limit[h]).collect::<Vec<_>>(), q)?;
        if e.value <= floor {
            e.value = 0.0;
            e.std_error = 0.0;
        }
        distances.push(e);
    }
    let successive: Vec<f64> = (0..levels)
        .map(|h| lq_norm(&hist.iter().map(|m| m.successive[h]).collect::<Vec<_>>(), q).map(|e| e.value))
        .collect::<Result<_>>()?;
    let (hs, ds): (Vec<f64>, Vec<f64>) = distances
        .iter()
        .enumerate()
        .filter(|(_, d)| d.value > 0.0)
        .map(|(h, d)| (h as f64, d.value.log2()))
        .unzip();
    let slope = if hs.is_empty() { f64::NEG_INFINITY } else { crate::stats::slope(&hs, &ds) };
    let non_convergent = increasing_run(&successive, 3);
    if non_convergent {
        log::warn!("convergence rate: successive partition sums grow for three consecutive levels");
    }
    Ok(RateReport { distances, successive, slope, non_convergent, controls: hist[0].labels.clone() })
}
