//! Sample paths with declared jumps.
//!
//! A [`Skeleton`] lists the nodes a path is sampled at: one node per grid
//! point plus an extra left node just before each declared jump. Node `n`
//! of a jump grid point `k` is `(k, left)` followed by `(k, right)`; both sit
//! at time `t_k`.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::is_psd;

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    grid: Arc<TimeGrid>,
    jumps: Vec<usize>,
    right: Vec<usize>,
    node_grid: Vec<usize>,
}

impl Skeleton {
    pub fn new(grid: Arc<TimeGrid>, mut jumps: Vec<usize>) -> Result<Arc<Self>> {
        jumps.sort_unstable();
        jumps.dedup();
        if jumps.first() == Some(&0) {
            return invalid("a jump cannot be declared at time 0");
        }
        if jumps.last().is_some_and(|&k| k > grid.last_index()) {
            return invalid("jump index outside the grid");
        }
        let mut right = Vec::with_capacity(grid.len());
        let mut node_grid = Vec::with_capacity(grid.len() + jumps.len());
        let mut next_jump = jumps.iter().peekable();
        for k in 0..grid.len() {
            if next_jump.peek() == Some(&&k) {
                next_jump.next();
                node_grid.push(k);
            }
            node_grid.push(k);
            right.push(node_grid.len() - 1);
        }
        Ok(Arc::new(Self { grid, jumps, right, node_grid }))
    }

    pub fn continuous(grid: Arc<TimeGrid>) -> Arc<Self> {
        Self::new(grid, Vec::new()).expect("no jumps")
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    /// Grid indices of the declared jumps, increasing.
    pub fn jumps(&self) -> &[usize] {
        &self.jumps
    }

    pub fn node_count(&self) -> usize {
        self.node_grid.len()
    }

    pub fn last_node(&self) -> usize {
        self.node_grid.len() - 1
    }

    pub fn is_jump(&self, k: usize) -> bool {
        k > 0 && self.right[k] - self.right[k - 1] == 2
    }

    /// Node of the value at grid index `k`.
    pub fn right(&self, k: usize) -> usize {
        self.right[k]
    }

    /// Node of the left limit at grid index `k`.
    pub fn left(&self, k: usize) -> usize {
        if self.is_jump(k) {
            self.right[k] - 1
        } else {
            self.right[k]
        }
    }

    pub fn grid_index(&self, node: usize) -> usize {
        self.node_grid[node]
    }

    /// True for the extra node before a jump.
    pub fn is_left_node(&self, node: usize) -> bool {
        node + 1 < self.node_grid.len() && self.node_grid[node + 1] == self.node_grid[node]
    }

    /// True when the substep `node - 1 -> node` is a jump.
    pub fn is_jump_substep(&self, node: usize) -> bool {
        node > 0 && self.node_grid[node - 1] == self.node_grid[node]
    }

    pub fn node_time(&self, node: usize) -> f64 {
        self.grid.time(self.node_grid[node])
    }

    pub fn same_as(&self, other: &Skeleton) -> bool {
        std::ptr::eq(self, other) || (self.grid.same_as(&other.grid) && self.jumps == other.jumps)
    }

    /// The skeleton on the same grid carrying the jumps of both.
    pub fn union(&self, other: &Skeleton) -> Result<Arc<Skeleton>> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch("skeletons live on different grids".into()));
        }
        let mut jumps = self.jumps.clone();
        jumps.extend_from_slice(&other.jumps);
        Skeleton::new(self.grid.clone(), jumps)
    }

    pub fn truncate(&self, k: usize) -> Result<Arc<Skeleton>> {
        let grid = Arc::new(self.grid.truncate(k)?);
        Skeleton::new(grid, self.jumps.iter().copied().filter(|&j| j <= k).collect())
    }

    /// The skeleton on a coarser grid whose times are all points of this
    /// grid. Jumps landing on coarse points are kept.
    pub fn restrict(&self, coarse: Arc<TimeGrid>) -> Result<(Arc<Skeleton>, Vec<usize>)> {
        let map: Vec<usize> = coarse
            .times()
            .iter()
            .map(|&t| {
                self.grid
                    .index_of(t)
                    .ok_or_else(|| Error::GridMismatch(format!("time {t} is not a grid point")))
            })
            .collect::<Result<_>>()?;
        let jumps = map
            .iter()
            .enumerate()
            .filter(|(_, &k)| self.is_jump(k))
            .map(|(i, _)| i)
            .collect();
        Ok((Skeleton::new(coarse, jumps)?, map))
    }
}

/// A càdlàg path in `R^dim` sampled on the nodes of a [`Skeleton`].
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    skel: Arc<Skeleton>,
    dim: usize,
    values: Vec<f64>,
}

impl SamplePath {
    /// Node-major values, `dim` entries per node.
    pub fn new(skel: Arc<Skeleton>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return invalid("path dimension must be positive");
        }
        if values.len() != skel.node_count() * dim {
            return invalid(format!(
                "expected {} values for {} nodes of dimension {dim}, got {}",
                skel.node_count() * dim,
                skel.node_count(),
                values.len()
            ));
        }
        Ok(Self { skel, dim, values })
    }

    /// A path without declared jumps from per-grid-point values.
    pub fn continuous(grid: Arc<TimeGrid>, dim: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(Skeleton::continuous(grid), dim, values)
    }

    pub fn from_node_fn(skel: Arc<Skeleton>, dim: usize, mut f: impl FnMut(usize, &mut [f64])) -> Self {
        let mut values = vec![0.0; skel.node_count() * dim];
        for (n, chunk) in values.chunks_mut(dim).enumerate() {
            f(n, chunk);
        }
        Self { skel, dim, values }
    }

    pub fn zeros(skel: Arc<Skeleton>, dim: usize) -> Self {
        let len = skel.node_count() * dim;
        Self { skel, dim, values: vec![0.0; len] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn skeleton(&self) -> &Arc<Skeleton> {
        &self.skel
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        self.skel.grid()
    }

    pub fn jump_times(&self) -> &[usize] {
        self.skel.jumps()
    }

    pub fn raw(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, n: usize) -> &[f64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    /// Value at grid index `k`.
    pub fn value(&self, k: usize) -> &[f64] {
        self.node(self.skel.right(k))
    }

    /// Left limit at grid index `k`.
    pub fn left(&self, k: usize) -> &[f64] {
        self.node(self.skel.left(k))
    }

    /// `ΔY_k = Y_k - Y_{k-}`.
    pub fn jump(&self, k: usize) -> Vec<f64> {
        self.value(k).iter().zip(self.left(k)).map(|(a, b)| a - b).collect()
    }

    pub fn terminal(&self) -> &[f64] {
        self.node(self.skel.last_node())
    }

    /// `out = Y_b - Y_a` for nodes `a, b`.
    pub fn increment(&self, a: usize, b: usize, out: &mut [f64]) {
        for ((o, x), y) in out.iter_mut().zip(self.node(b)).zip(self.node(a)) {
            *o = x - y;
        }
    }

    /// Node-wise map to a path of dimension `dim`.
    pub fn map(&self, dim: usize, f: impl Fn(&[f64], &mut [f64])) -> SamplePath {
        SamplePath::from_node_fn(self.skel.clone(), dim, |n, out| f(self.node(n), out))
    }

    /// Node-wise combination of two paths on the same skeleton.
    pub fn zip_map(&self, other: &SamplePath, dim: usize, f: impl Fn(&[f64], &[f64], &mut [f64])) -> Result<SamplePath> {
        self.check_same_skeleton(other)?;
        Ok(SamplePath::from_node_fn(self.skel.clone(), dim, |n, out| {
            f(self.node(n), other.node(n), out)
        }))
    }

    pub fn check_same_skeleton(&self, other: &SamplePath) -> Result<()> {
        if self.skel.same_as(&other.skel) {
            Ok(())
        } else {
            Err(Error::GridMismatch("paths live on different skeletons".into()))
        }
    }

    /// The same path on a skeleton with more declared jumps; new left nodes
    /// copy the value (a zero jump).
    pub fn embed(&self, target: &Arc<Skeleton>) -> Result<SamplePath> {
        if !self.skel.grid().same_as(target.grid()) {
            return Err(Error::GridMismatch("cannot embed into a skeleton on another grid".into()));
        }
        if let Some(k) = self.skel.jumps().iter().find(|&&k| !target.is_jump(k)) {
            return invalid(format!("target skeleton drops the jump at index {k}"));
        }
        Ok(SamplePath::from_node_fn(target.clone(), self.dim, |n, out| {
            let k = target.grid_index(n);
            let src = if target.is_left_node(n) { self.skel.left(k) } else { self.skel.right(k) };
            out.copy_from_slice(self.node(src));
        }))
    }

    /// The path restricted to `[0, t_k]`.
    pub fn truncate(&self, k: usize) -> Result<SamplePath> {
        let skel = self.skel.truncate(k)?;
        let len = skel.node_count() * self.dim;
        SamplePath::new(skel, self.dim, self.values[..len].to_vec())
    }

    /// Values at the points of a coarser grid. Jumps not on coarse points
    /// are absorbed into the containing step.
    pub fn restrict(&self, coarse: Arc<TimeGrid>) -> Result<SamplePath> {
        let (skel, map) = self.skel.restrict(coarse)?;
        Ok(self.resample(skel, &map))
    }

    pub(crate) fn resample(&self, skel: Arc<Skeleton>, map: &[usize]) -> SamplePath {
        SamplePath::from_node_fn(skel.clone(), self.dim, |n, out| {
            let k = map[skel.grid_index(n)];
            let src = if skel.is_left_node(n) { self.skel.left(k) } else { self.skel.right(k) };
            out.copy_from_slice(self.node(src));
        })
    }

    /// Grid-point values, one vector per grid index.
    pub fn grid_values(&self) -> Vec<Vec<f64>> {
        (0..self.grid().len()).map(|k| self.value(k).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

/// A martingale path with its quadratic variation `[M]` (matrix valued,
/// `dim x dim` row-major) on the same skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingalePath {
    pub path: SamplePath,
    pub bracket: SamplePath,
}

impl MartingalePath {
    pub fn new(path: SamplePath, bracket: SamplePath) -> Result<Self> {
        path.check_same_skeleton(&bracket)?;
        if bracket.dim() != path.dim() * path.dim() {
            return invalid("bracket must be a dim x dim matrix path");
        }
        if bracket.node(0).iter().any(|&x| x != 0.0) {
            return invalid("bracket must start at zero");
        }
        Ok(Self { path, bracket })
    }

    pub fn dim(&self) -> usize {
        self.path.dim()
    }

    pub fn skeleton(&self) -> &Arc<Skeleton> {
        self.path.skeleton()
    }

    /// Every node-to-node bracket increment is positive semidefinite.
    pub fn bracket_is_monotone(&self) -> bool {
        let d = self.dim();
        let mut inc = vec![0.0; d * d];
        (1..self.skeleton().node_count()).all(|n| {
            self.bracket.increment(n - 1, n, &mut inc);
            let scale = inc.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            is_psd(&inc, d, 1e-12 * (1.0 + scale))
        })
    }

    pub fn embed(&self, target: &Arc<Skeleton>) -> Result<MartingalePath> {
        Ok(Self { path: self.path.embed(target)?, bracket: self.bracket.embed(target)? })
    }

    pub fn truncate(&self, k: usize) -> Result<MartingalePath> {
        Ok(Self { path: self.path.truncate(k)?, bracket: self.bracket.truncate(k)? })
    }

    pub fn restrict(&self, coarse: Arc<TimeGrid>) -> Result<MartingalePath> {
        let (skel, map) = self.skeleton().restrict(coarse)?;
        Ok(Self { path: self.path.resample(skel.clone(), &map), bracket: self.bracket.resample(skel, &map) })
    }
}
