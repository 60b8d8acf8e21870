//! Ensemble `L^q` estimates, `V^p L^q` seminorms and rough-path distances.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::lift::{LiftView, RoughLift};
use crate::linalg::{dist, norm};
use crate::path::SamplePath;
use crate::pvar::{p_variation, TwoParamTable};

/// Exponents of a `V^p L^{q,r}` seminorm. Only `r = 1` is computable from
/// an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl NormSpec {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        Self::with_r(p, q, 1.0)
    }

    pub fn with_r(p: f64, q: f64, r: f64) -> Result<Self> {
        if !(p >= 1.0) || !(q >= 1.0) {
            return invalid(format!("norm exponents need p >= 1 and q >= 1, got p = {p}, q = {q}"));
        }
        if !(r >= 1.0) {
            return invalid(format!("conditional exponent must be >= 1, got {r}"));
        }
        Ok(Self { p, q, r })
    }
}

/// A Monte Carlo estimate of `E[|Z|^q]^{1/q}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqEstimate {
    pub value: f64,
    /// Delta-method standard error; infinite when `n < 2`.
    pub std_error: f64,
    pub n: usize,
}

/// `(mean |x|^q)^{1/q}` over scalar samples.
pub fn lq_norm(samples: &[f64], q: f64) -> Result<LqEstimate> {
    if samples.is_empty() {
        return invalid("L^q norm of an empty ensemble");
    }
    if !(q >= 1.0) {
        return invalid(format!("L^q norm needs q >= 1, got {q}"));
    }
    let powers: Vec<f64> = samples.iter().map(|x| x.abs().powf(q)).collect();
    let m = crate::stats::mean(&powers);
    let value = m.powf(1.0 / q);
    let std_error = if samples.len() < 2 {
        f64::INFINITY
    } else if m == 0.0 {
        0.0
    } else {
        // d/dm m^{1/q} = m^{1/q - 1} / q
        value / (q * m) * crate::stats::std_error(&powers)
    };
    Ok(LqEstimate { value, std_error, n: samples.len() })
}

/// [`lq_norm`] of the Euclidean norms of vector samples.
pub fn lq_norm_vectors(samples: &[Vec<f64>], q: f64) -> Result<LqEstimate> {
    let mags: Vec<f64> = samples.iter().map(|v| norm(v)).collect();
    lq_norm(&mags, q)
}

/// Paths sharing one time grid.
#[derive(Debug, Clone, Copy)]
pub struct Ensemble<'a> {
    paths: &'a [SamplePath],
}

impl<'a> Ensemble<'a> {
    pub fn new(paths: &'a [SamplePath]) -> Result<Self> {
        check_shared_grid(paths)?;
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &'a [SamplePath] {
        self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

pub(crate) fn check_shared_grid(paths: &[SamplePath]) -> Result<()> {
    let Some(first) = paths.first() else {
        return invalid("an ensemble needs at least one member");
    };
    if paths.iter().any(|p| !p.grid().same_as(first.grid()) || p.dim() != first.dim()) {
        return Err(Error::GridMismatch("ensemble members must share grid and dimension".into()));
    }
    Ok(())
}

/// `‖δY_{u,v}‖_{L^q}` for all grid pairs of `window`, indexed relative to
/// the window start.
pub fn lq_increment_table(paths: &[SamplePath], q: f64, window: (usize, usize)) -> Result<TwoParamTable> {
    check_shared_grid(paths)?;
    if !(q >= 1.0) {
        return invalid(format!("L^q needs q >= 1, got {q}"));
    }
    let (s, e) = window;
    if s > e || e > paths[0].grid().last_index() {
        return invalid(format!("window ({s}, {e}) is not inside the grid"));
    }
    let n = e - s + 1;
    let mut table = TwoParamTable::zeros(n)?;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    let mean: f64 = paths
                        .iter()
                        .map(|p| dist(p.value(s + j), p.value(s + i)).powf(q))
                        .sum::<f64>()
                        / paths.len() as f64;
                    mean.powf(1.0 / q)
                })
                .collect()
        })
        .collect();
    for (i, row) in rows.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            table.set(i, i + 1 + k, *v);
        }
    }
    Ok(table)
}

/// `‖Y‖_{p,q,[s,t]}`: the exact p-variation of `(u, v) ↦ ‖δY_{u,v}‖_{L^q}`.
pub fn vp_lq_seminorm(ensemble: &Ensemble, spec: NormSpec, window: (usize, usize)) -> Result<f64> {
    if spec.r != 1.0 {
        return Err(Error::Unsupported(format!(
            "conditional exponent r = {} has no ensemble estimator; only r = 1 is supported",
            spec.r
        )));
    }
    let table = lq_increment_table(ensemble.paths, spec.q, window)?;
    p_variation(&table, spec.p, (0, table.len() - 1))
}

/// p-variation of a precomputed magnitude table over its full range.
pub fn two_param_seminorm(table: &TwoParamTable, p: f64) -> Result<f64> {
    if table.is_empty() {
        return Ok(0.0);
    }
    p_variation(table, p, (0, table.len() - 1))
}

/// `‖X - X̃‖_p + ‖XX - XX̃‖_{p/2}` over the grid, for `p >= 2`.
pub fn rough_path_distance(a: &RoughLift, b: &RoughLift, p: f64) -> Result<f64> {
    if !a.grid().same_as(b.grid()) || a.dim() != b.dim() {
        return Err(Error::GridMismatch("rough path distance needs lifts on one grid".into()));
    }
    if !(p >= 2.0) {
        return invalid(format!("rough path distance needs p >= 2, got {p}"));
    }
    let n = a.grid().len();
    let (sa, sb) = (a.skeleton(), b.skeleton());
    let first = TwoParamTable::from_fn(n, |s, t| {
        let da: Vec<f64> = a.path().value(t).iter().zip(a.path().value(s)).map(|(x, y)| x - y).collect();
        let db: Vec<f64> = b.path().value(t).iter().zip(b.path().value(s)).map(|(x, y)| x - y).collect();
        dist(&da, &db)
    })?;
    let second = TwoParamTable::from_fn(n, |s, t| {
        dist(&a.second_vec(sa.right(s), sa.right(t)), &b.second_vec(sb.right(s), sb.right(t)))
    })?;
    Ok(p_variation(&first, p, (0, n - 1))? + p_variation(&second, p / 2.0, (0, n - 1))?)
}

/// `L^q` norm over members of the pathwise [`rough_path_distance`].
pub fn rough_path_distance_lq(a: &[RoughLift], b: &[RoughLift], p: f64, q: f64) -> Result<LqEstimate> {
    if a.len() != b.len() {
        return invalid("ensembles of lifts differ in size");
    }
    let d: Vec<f64> = a
        .par_iter()
        .zip(b.par_iter())
        .map(|(x, y)| rough_path_distance(x, y, p))
        .collect::<Result<_>>()?;
    lq_norm(&d, q)
}

/// Largest relative Chen defect over `n_triples` random node triples
/// `s <= u <= t`:
/// `|XX_{s,t} - XX_{s,u} - XX_{u,t} - δX_{s,u} ⊗ δX_{u,t}| / (1 + |XX_{s,t}|)`.
pub fn chen_residual(lift: &dyn LiftView, n_triples: usize, seed: u64) -> f64 {
    let d = lift.dim();
    let nodes = lift.node_count();
    let mut rng = crate::rng::stream(seed, crate::rng::tag("chen"), 0);
    let (mut st, mut su, mut ut) = (vec![0.0; d * d], vec![0.0; d * d], vec![0.0; d * d]);
    let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
    let mut worst = 0.0f64;
    for _ in 0..n_triples {
        let mut idx = [rng.random_range(0..nodes), rng.random_range(0..nodes), rng.random_range(0..nodes)];
        idx.sort_unstable();
        let [s, u, t] = idx;
        lift.second(s, t, &mut st);
        lift.second(s, u, &mut su);
        lift.second(u, t, &mut ut);
        lift.first(s, u, &mut x);
        lift.first(u, t, &mut y);
        let mut gap = 0.0;
        for i in 0..d {
            for j in 0..d {
                let r = st[i * d + j] - su[i * d + j] - ut[i * d + j] - x[i] * y[j];
                gap += r * r;
            }
        }
        worst = worst.max(gap.sqrt() / (1.0 + norm(&st)));
    }
    worst
}
