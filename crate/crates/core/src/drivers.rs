//! Driving noises and their rough-path lifts.
//!
//! All lifts use the forward (Itô) jump convention: the second level over a
//! jump substep is zero unless a hand-specified lift says otherwise.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson, StandardNormal, Uniform};

use crate::error::{invalid, Result};
use crate::grid::{TimeGrid, TIME_TOLERANCE};
use crate::lift::RoughLift;
use crate::linalg::{cholesky_psd, matmul};
use crate::path::{MartingalePath, SamplePath, Skeleton};

/// Closed-form smooth paths available to [`smooth_lift`].
pub const SMOOTH_PATHS: [&str; 3] = ["linear", "polynomial", "sine_cosine_pair"];

/// Angular frequency of the `sine_cosine_pair` path.
const CIRCLE_FREQ: f64 = 2.0 * std::f64::consts::PI;

/// Distribution of each jump-size component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpDist {
    Constant(f64),
    Normal { mean: f64, std: f64 },
    Exponential { rate: f64 },
    Uniform { low: f64, high: f64 },
}

impl JumpDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpDist::Constant(c) => c.is_finite(),
            JumpDist::Normal { mean, std } => mean.is_finite() && std.is_finite() && std >= 0.0,
            JumpDist::Exponential { rate } => rate.is_finite() && rate > 0.0,
            JumpDist::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("invalid jump distribution {self:?}"))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            JumpDist::Constant(c) => c,
            JumpDist::Normal { mean, .. } => mean,
            JumpDist::Exponential { rate } => 1.0 / rate,
            JumpDist::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            JumpDist::Constant(c) => c * c,
            JumpDist::Normal { mean, std } => mean * mean + std * std,
            JumpDist::Exponential { rate } => 2.0 / (rate * rate),
            JumpDist::Uniform { low, high } => (low * low + low * high + high * high) / 3.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpDist::Constant(c) => c,
            JumpDist::Normal { mean, std } => Normal::new(mean, std).expect("validated").sample(rng),
            JumpDist::Exponential { rate } => Exp::new(rate).expect("validated").sample(rng),
            JumpDist::Uniform { low, high } => Uniform::new(low, high).expect("validated").sample(rng),
        }
    }
}

fn check_vol(d: usize, vol: &[f64]) -> Result<()> {
    if d == 0 {
        return invalid("driver dimension must be positive");
    }
    if vol.len() != d * d {
        return invalid(format!("volatility must be {d} x {d}, got {} entries", vol.len()));
    }
    if vol.iter().any(|v| !v.is_finite()) {
        return invalid("volatility has non-finite entries");
    }
    Ok(())
}

/// `vol volᵀ`.
fn covariance(d: usize, vol: &[f64]) -> Vec<f64> {
    let mut vt = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            vt[j * d + i] = vol[i * d + j];
        }
    }
    matmul(vol, &vt, d, d, d)
}

/// Brownian motion `vol · W` on `grid`, with `[M]_t = vol volᵀ t`.
pub fn simulate_brownian<R: Rng + ?Sized>(
    grid: &Arc<TimeGrid>,
    d: usize,
    vol: &[f64],
    rng: &mut R,
) -> Result<MartingalePath> {
    check_vol(d, vol)?;
    let n = grid.len();
    let mut values = vec![0.0; n * d];
    let mut z = vec![0.0; d];
    for k in 1..n {
        let sq = grid.dt(k).sqrt();
        z.iter_mut().for_each(|x| *x = rng.sample::<f64, _>(StandardNormal));
        for i in 0..d {
            let mut inc = 0.0;
            for j in 0..d {
                inc += vol[i * d + j] * z[j];
            }
            values[k * d + i] = values[(k - 1) * d + i] + inc * sq;
        }
    }
    let cov = covariance(d, vol);
    let mut bracket = vec![0.0; n * d * d];
    for k in 0..n {
        for ij in 0..d * d {
            bracket[k * d * d + ij] = cov[ij] * grid.time(k);
        }
    }
    MartingalePath::new(
        SamplePath::continuous(grid.clone(), d, values)?,
        SamplePath::continuous(grid.clone(), d * d, bracket)?,
    )
}

/// `n` independent Brownian paths, member `i` drawn from stream `i`.
pub fn brownian_ensemble(
    grid: &Arc<TimeGrid>,
    d: usize,
    vol: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<MartingalePath>> {
    check_vol(d, vol)?;
    crate::rng::par_members(n, seed, crate::rng::tag("brownian"), |_, rng| {
        simulate_brownian(grid, d, vol, rng)
    })
    .into_iter()
    .collect()
}

/// Itô lift of a continuous Brownian path.
///
/// Per step the symmetric part is exact,
/// `Sym XX = ½(δB ⊗ δB - δ[M])`. For `d >= 2` the antisymmetric Lévy area is
/// the left-point Riemann sum over `m` Brownian-bridge substeps (zero for
/// `m = 1`), with `O(1/m)` bias.
pub fn ito_lift_brownian<R: Rng + ?Sized>(path: &MartingalePath, m: usize, rng: &mut R) -> Result<RoughLift> {
    if !path.skeleton().jumps().is_empty() {
        return invalid("the Brownian Itô lift needs a path without jumps");
    }
    if m == 0 {
        return invalid("substep count must be at least 1");
    }
    let d = path.dim();
    let mut db = vec![0.0; d];
    let mut cov = vec![0.0; d * d];
    let mut xi = vec![0.0; m * d];
    let mut z = vec![0.0; d];
    let mut running = vec![0.0; d];
    let mut area = vec![0.0; d * d];
    Ok(RoughLift::from_node_steps(path.path.clone(), |n, out| {
        path.path.increment(n - 1, n, &mut db);
        path.bracket.increment(n - 1, n, &mut cov);
        for i in 0..d {
            for j in 0..d {
                let c = 0.5 * (cov[i * d + j] + cov[j * d + i]);
                out[i * d + j] = 0.5 * (db[i] * db[j] - c);
            }
        }
        if d < 2 || m < 2 {
            return;
        }
        let l = cholesky_psd(&cov, d);
        let scale = (1.0 / m as f64).sqrt();
        for r in 0..m {
            z.iter_mut().for_each(|x| *x = rng.sample::<f64, _>(StandardNormal));
            for i in 0..d {
                let mut v = 0.0;
                for j in 0..=i {
                    v += l[i * d + j] * z[j];
                }
                xi[r * d + i] = v * scale;
            }
        }
        let mut mean = vec![0.0; d];
        for r in 0..m {
            for i in 0..d {
                mean[i] += xi[r * d + i];
            }
        }
        running.iter_mut().for_each(|x| *x = 0.0);
        area.iter_mut().for_each(|x| *x = 0.0);
        for r in 0..m {
            let beta: Vec<f64> = (0..d).map(|i| xi[r * d + i] - mean[i] / m as f64 + db[i] / m as f64).collect();
            for i in 0..d {
                for j in 0..d {
                    area[i * d + j] += running[i] * beta[j];
                }
            }
            for i in 0..d {
                running[i] += beta[i];
            }
        }
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] += 0.5 * (area[i * d + j] - area[j * d + i]);
            }
        }
    }))
}

/// Compound Poisson path with rate `lambda` and i.i.d. jump components.
///
/// Jump times are merged into `base_grid` exactly. Returns the raw path `X`
/// and its compensation `M_t = X_t - λ E[ξ] t` with `[M]_t = Σ ΔX ⊗ ΔX`.
pub fn simulate_compound_poisson<R: Rng + ?Sized>(
    base_grid: &Arc<TimeGrid>,
    d: usize,
    lambda: f64,
    dist: JumpDist,
    rng: &mut R,
) -> Result<(SamplePath, MartingalePath)> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return invalid(format!("jump intensity must be nonnegative, got {lambda}"));
    }
    if d == 0 {
        return invalid("driver dimension must be positive");
    }
    dist.validate()?;
    let horizon = base_grid.horizon();
    let count = if lambda > 0.0 {
        Poisson::new(lambda * horizon).expect("positive rate").sample(rng) as usize
    } else {
        0
    };
    let mut times: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * horizon).collect();
    let sizes: Vec<f64> = (0..count * d).map(|_| dist.sample(rng)).collect();
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    times.sort_by(f64::total_cmp);

    let kept: Vec<f64> = times.iter().copied().filter(|&t| t > TIME_TOLERANCE).collect();
    let grid = if kept.is_empty() { base_grid.clone() } else { Arc::new(base_grid.with_times(&kept)?) };
    let mut jumps_at: Vec<(usize, usize)> = Vec::new();
    for (rank, &t) in times.iter().enumerate() {
        if t <= TIME_TOLERANCE {
            continue;
        }
        let k = grid.index_of(t).expect("jump time was merged into the grid");
        jumps_at.push((k, order[rank]));
    }
    let skel = Skeleton::new(grid.clone(), jumps_at.iter().map(|&(k, _)| k).collect())?;
    let mut delta = vec![0.0; grid.len() * d];
    for &(k, j) in &jumps_at {
        for i in 0..d {
            delta[k * d + i] += sizes[j * d + i];
        }
    }

    let mut level = vec![0.0; d];
    let mut bracket_level = vec![0.0; d * d];
    let nodes = skel.node_count();
    let mut x = vec![0.0; nodes * d];
    let mut br = vec![0.0; nodes * d * d];
    for n in 0..nodes {
        if skel.is_jump_substep(n) {
            let k = skel.grid_index(n);
            let dj = &delta[k * d..(k + 1) * d];
            for i in 0..d {
                level[i] += dj[i];
                for j in 0..d {
                    bracket_level[i * d + j] += dj[i] * dj[j];
                }
            }
        }
        x[n * d..(n + 1) * d].copy_from_slice(&level);
        br[n * d * d..(n + 1) * d * d].copy_from_slice(&bracket_level);
    }
    let raw = SamplePath::new(skel.clone(), d, x)?;
    let drift = lambda * dist.mean();
    let compensated = SamplePath::from_node_fn(skel.clone(), d, |n, out| {
        let t = skel.node_time(n);
        for i in 0..d {
            out[i] = raw.node(n)[i] - drift * t;
        }
    });
    let m =MartingalePath::new(compensated, SamplePath::new(skel, d * d, br)?)?;
    Ok((raw, m))
}

/// Forward lift of a path: every substep has zero second level, so
/// `XX_{s,t} = Σ_{s<u<=t} δX_{s,u-} ⊗ ΔX_u` and `ΔXX = 0` at each jump.
/// Continuous grid increments are treated as jumps at the step's right end.
pub fn forward_lift_jump_path(path: &SamplePath) -> RoughLift {
    RoughLift::from_node_steps(path.clone(), |_, _| {})
}

/// Geometric lift of a registry smooth path sampled exactly on `grid`.
///
/// * `linear`: `X_t = t`;
/// * `polynomial`: `X_t = t²`;
/// * `sine_cosine_pair`: `X_t = (cos 2πt, sin 2πt)`.
pub fn smooth_lift(id: &str, grid: &Arc<TimeGrid>) -> Result<RoughLift> {
    let (d, f): (usize, fn(f64) -> Vec<f64>) = match id {
        "linear" => (1, |t| vec![t]),
        "polynomial" => (1, |t| vec![t * t]),
        "sine_cosine_pair" => (2, |t| vec![(CIRCLE_FREQ * t).cos(), (CIRCLE_FREQ * t).sin()]),
        other => return invalid(format!("unknown smooth path {other:?}; known: {SMOOTH_PATHS:?}")),
    };
    let values: Vec<f64> = grid.times().iter().flat_map(|&t| f(t)).collect();
    let path = SamplePath::continuous(grid.clone(), d, values)?;
    let circle = d == 2;
    let g = grid.clone();
    let p = path.clone();
    Ok(RoughLift::from_node_steps(path, move |n, out| {
        let a = p.node(n - 1);
        let b = p.node(n);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = 0.5 * (b[i] - a[i]) * (b[j] - a[j]);
            }
        }
        if circle {
            let (s, t) = (g.time(n - 1), g.time(n));
            let w = CIRCLE_FREQ;
            // ∫_s^t cos(wu) d(sin(wu)) minus the left-point correction
            let x12 = w * (t - s) / 2.0 + ((2.0 * w * t).sin() - (2.0 * w * s).sin()) / 4.0 - a[0] * (b[1] - a[1]);
            out[1] = x12;
            out[2] = (b[0] - a[0]) * (b[1] - a[1]) - x12;
        }
    }))
}

/// Brownian motion plus an independent compound Poisson process on the
/// jump-inclusive grid. Returns the compensated martingale `B + J - λE[ξ]t`
/// (with `[M] = vol volᵀ t + Σ ΔJ ⊗ ΔJ`) and the lift of `X = B + J`, which
/// is the Brownian Itô lift on continuous substeps and forward across jumps.
pub fn simulate_mixed<R: Rng + ?Sized>(
    base_grid: &Arc<TimeGrid>,
    d: usize,
    vol: &[f64],
    lambda: f64,
    dist: JumpDist,
    m: usize,
    rng: &mut R,
) -> Result<(MartingalePath, RoughLift)> {
    let (jump, comp) = simulate_compound_poisson(base_grid, d, lambda, dist, rng)?;
    let grid = jump.grid().clone();
    let b = simulate_brownian(&grid, d, vol, rng)?;
    let blift = ito_lift_brownian(&b, m, rng)?;
    let skel = jump.skeleton().clone();
    let be = b.embed(&skel)?;
    let add = |x: &[f64], y: &[f64], out: &mut [f64]| {
        for i in 0..out.len() {
            out[i] = x[i] + y[i];
        }
    };
    let x = be.path.zip_map(&jump, d, add)?;
    let mpath = be.path.zip_map(&comp.path, d, add)?;
    let mbr = be.bracket.zip_map(&comp.bracket, d * d, add)?;
    let sk = skel.clone();
    let lift = RoughLift::from_node_steps(x, |n, out| {
        if !sk.is_jump_substep(n) {
            let k = sk.grid_index(n);
            blift.second(k - 1, k, out);
        }
    });
    Ok((MartingalePath::new(mpath, mbr)?, lift))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriverKind {
    Brownian,
    CompoundPoisson,
    Smooth,
    Mixed,
}

/// Parameters of a driving noise.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverSpec {
    pub kind: DriverKind,
    pub dim: usize,
    /// `dim x dim` row-major.
    pub vol: Vec<f64>,
    pub lambda: f64,
    pub jump: JumpDist,
    pub smooth_id: String,
    /// Lévy-area substeps.
    pub substeps: usize,
}

/// A sampled driver: the martingale (absent for smooth drivers) and the lift.
#[derive(Debug, Clone)]
pub struct Driver {
    pub martingale: Option<MartingalePath>,
    pub lift: RoughLift,
}

impl DriverSpec {
    pub fn brownian(dim: usize) -> Self {
        let mut vol = vec![0.0; dim * dim];
        (0..dim).for_each(|i| vol[i * dim + i] = 1.0);
        Self {
            kind: DriverKind::Brownian,
            dim,
            vol,
            lambda: 0.0,
            jump: JumpDist::Constant(0.0),
            smooth_id: String::new(),
            substeps: 8,
        }
    }

    pub fn compound_poisson(dim: usize, lambda: f64, jump: JumpDist) -> Self {
        Self { kind: DriverKind::CompoundPoisson, lambda, jump, ..Self::brownian(dim) }
    }

    pub fn smooth(id: &str) -> Self {
        let dim = if id == "sine_cosine_pair" { 2 } else { 1 };
        Self { kind: DriverKind::Smooth, smooth_id: id.into(), ..Self::brownian(dim) }
    }

    pub fn mixed(dim: usize, lambda: f64, jump: JumpDist) -> Self {
        Self { kind: DriverKind::Mixed, lambda, jump, ..Self::brownian(dim) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return invalid("driver dimension must be at least 1");
        }
        if self.substeps == 0 {
            return invalid("substeps must be at least 1");
        }
        if !(self.lambda >= 0.0) {
            return invalid("jump intensity must be nonnegative");
        }
        check_vol(self.dim, &self.vol)?;
        self.jump.validate()
    }

    pub fn sample<R: Rng + ?Sized>(&self, base_grid: &Arc<TimeGrid>, rng: &mut R) -> Result<Driver> {
        self.validate()?;
        match self.kind {
            DriverKind::Brownian => {
                let b = simulate_brownian(base_grid, self.dim, &self.vol, rng)?;
                let lift = ito_lift_brownian(&b, self.substeps, rng)?;
                Ok(Driver { martingale: Some(b), lift })
            }
            DriverKind::CompoundPoisson => {
                let (x, m) = simulate_compound_poisson(base_grid, self.dim, self.lambda, self.jump, rng)?;
                Ok(Driver { martingale: Some(m), lift: forward_lift_jump_path(&x) })
            }
            DriverKind::Smooth => {
                let lift = smooth_lift(&self.smooth_id, base_grid)?;
                if lift.dim() != self.dim {
                    return invalid(format!("smooth path {:?} has dimension {}", self.smooth_id, lift.dim()));
                }
                Ok(Driver { martingale: None, lift })
            }
            DriverKind::Mixed => {
                let (m, lift) =
                    simulate_mixed(base_grid, self.dim, &self.vol, self.lambda, self.jump, self.substeps, rng)?;
                Ok(Driver { martingale: Some(m), lift })
            }
        }
    }
}
