//! Time grids and partitions.
//!
//! Every process in the crate is sampled on a [`TimeGrid`]: a strictly
//! increasing list of times starting at `0` and ending at the horizon `T`.
//! A [`Partition`] is an increasing subset of grid indices.

use crate::error::{invalid, Error, Result};

/// Two times closer than this are treated as the same grid point.
pub const TIME_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return invalid("a time grid needs at least two points");
        }
        if times[0] != 0.0 {
            return invalid(format!("a time grid must start at 0, got {}", times[0]));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return invalid("time grid contains a non-finite time");
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return invalid(format!("time grid is not strictly increasing at {} -> {}", w[0], w[1]));
        }
        Ok(Self { times })
    }

    /// `n + 1` equally spaced points on `[0, horizon]`.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return invalid(format!("horizon must be positive, got {horizon}"));
        }
        if n == 0 {
            return invalid("a uniform grid needs at least one step");
        }
        let dt = horizon / n as f64;
        let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        times[n] = horizon;
        Self::new(times)
    }

    /// Sorted union of two grids over the same horizon. Times within
    /// [`TIME_TOLERANCE`] of an earlier kept time are dropped.
    pub fn merge(&self, other: &TimeGrid) -> Result<TimeGrid> {
        if (self.horizon() - other.horizon()).abs() > TIME_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "cannot merge grids with horizons {} and {}",
                self.horizon(),
                other.horizon()
            )));
        }
        let mut all: Vec<f64> = self.times.iter().chain(other.times.iter()).copied().collect();
        all.sort_by(f64::total_cmp);
        let mut merged: Vec<f64> = Vec::with_capacity(all.len());
        for t in all {
            match merged.last() {
                Some(&last) if t - last <= TIME_TOLERANCE => {}
                _ => merged.push(t),
            }
        }
        // keep the horizon of `self` exactly
        let last = merged.len() - 1;
        merged[last] = self.horizon();
        TimeGrid::new(merged)
    }

    /// Insert extra times (e.g. jump times) and return the merged grid.
    pub fn with_times(&self, extra: &[f64]) -> Result<TimeGrid> {
        let mut times = vec![0.0];
        times.extend(extra.iter().copied().filter(|t| *t > 0.0 && *t < self.horizon()));
        times.push(self.horizon());
        times.sort_by(f64::total_cmp);
        times.dedup_by(|b, a| (*b - *a).abs() <= TIME_TOLERANCE);
        let extra_grid = TimeGrid::new(times)?;
        self.merge(&extra_grid)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    /// Number of grid points (`n + 1`).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of steps (`n`).
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn last_index(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.times[k] - self.times[k - 1]
    }

    /// Index of the grid point within [`TIME_TOLERANCE`] of `t`, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = self.times.partition_point(|&s| s < t - TIME_TOLERANCE);
        (i < self.times.len() && (self.times[i] - t).abs() <= TIME_TOLERANCE).then_some(i)
    }

    /// The grid restricted to `[0, t_k]`.
    pub fn truncate(&self, k: usize) -> Result<TimeGrid> {
        if k == 0 || k > self.last_index() {
            return invalid(format!("cannot truncate a grid of {} points at index {k}", self.len()));
        }
        TimeGrid::new(self.times[..=k].to_vec())
    }

    /// Every `factor`-th point, which must divide the number of steps.
    pub fn coarsen(&self, factor: usize) -> Result<TimeGrid> {
        if factor == 0 || !self.steps().is_multiple_of(factor) {
            return invalid(format!("coarsening factor {factor} does not divide {} steps", self.steps()));
        }
        TimeGrid::new(self.times.iter().step_by(factor).copied().collect())
    }

    /// True when both grids hold the same times.
    pub fn same_as(&self, other: &TimeGrid) -> bool {
        std::ptr::eq(self, other) || self.times == other.times
    }
}

/// A partition of a grid window: strictly increasing grid indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    indices: Vec<usize>,
    mesh: f64,
}

impl Partition {
    pub fn new(grid: &TimeGrid, indices: Vec<usize>) -> Result<Self> {
        if indices.len() < 2 {
            return invalid("a partition needs at least two points");
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("partition indices must be strictly increasing");
        }
        if *indices.last().unwrap() > grid.last_index() {
            return invalid("partition index outside the grid");
        }
        let mesh = indices
            .windows(2)
            .map(|w| grid.time(w[1]) - grid.time(w[0]))
            .fold(0.0, f64::max);
        Ok(Self { indices, mesh })
    }

    /// Build from possibly repeated indices, collapsing duplicates.
    pub fn collapsed(grid: &TimeGrid, mut indices: Vec<usize>) -> Result<Self> {
        indices.dedup();
        Self::new(grid, indices)
    }

    /// All grid points.
    pub fn full(grid: &TimeGrid) -> Self {
        Self::new(grid, (0..grid.len()).collect()).expect("grid has at least two points")
    }

    /// Just the window endpoints.
    pub fn trivial(grid: &TimeGrid, start: usize, end: usize) -> Result<Self> {
        Self::new(grid, vec![start, end])
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn start(&self) -> usize {
        self.indices[0]
    }

    pub fn end(&self) -> usize {
        self.indices[self.indices.len() - 1]
    }

    /// Consecutive index pairs `[u, v]`.
    pub fn intervals(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.indices.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn contains(&self, other: &Partition) -> bool {
        other.indices.iter().all(|i| self.indices.binary_search(i).is_ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_points() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = TimeGrid::uniform(2.0, 1).unwrap();
        assert_eq!(g.times(), &[0.0, 2.0]);
        let g = TimeGrid::uniform(1.0, 3).unwrap();
        for k in 1..=3 {
            assert!((g.dt(k) - 1.0 / 3.0).abs() <= 1e-15);
        }
        assert_eq!(g.horizon(), 1.0);
    }

    #[test]
    fn uniform_grid_rejects_bad_arguments() {
        assert!(matches!(TimeGrid::uniform(0.0, 4), Err(Error::InvalidArgument(_))));
        assert!(matches!(TimeGrid::uniform(-1.0, 4), Err(Error::InvalidArgument(_))));
        assert!(matches!(TimeGrid::uniform(1.0, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn grid_invariants() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.1, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn merge_examples() {
        let a = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let b = TimeGrid::new(vec![0.0, 0.3, 1.0]).unwrap();
        assert_eq!(a.merge(&b).unwrap().times(), &[0.0, 0.3, 0.5, 1.0]);

        let c = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(c.merge(&c).unwrap().times(), &[0.0, 1.0]);

        let d = TimeGrid::new(vec![0.0, 0.5 + 1e-15, 1.0]).unwrap();
        assert_eq!(a.merge(&d).unwrap().times(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn merge_rejects_mismatched_horizons() {
        let a = TimeGrid::uniform(1.0, 2).unwrap();
        let b = TimeGrid::uniform(2.0, 2).unwrap();
        assert!(matches!(a.merge(&b), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn index_lookup_and_truncation() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.index_of(0.5), Some(2));
        assert_eq!(g.index_of(0.5 + 1e-13), Some(2));
        assert_eq!(g.index_of(0.4), None);
        let t = g.truncate(2).unwrap();
        assert_eq!(t.times(), &[0.0, 0.25, 0.5]);
        assert_eq!(g.coarsen(2).unwrap().times(), &[0.0, 0.5, 1.0]);
        assert!(g.coarsen(3).is_err());
    }

    #[test]
    fn partition_mesh() {
        let g = TimeGrid::new(vec![0.0, 0.1, 0.5, 0.6, 1.0]).unwrap();
        let p = Partition::new(&g, vec![0, 2, 4]).unwrap();
        assert!((p.mesh() - 0.5).abs() < 1e-15);
        assert!(Partition::new(&g, vec![0, 0, 4]).is_err());
        assert!(Partition::new(&g, vec![0, 5]).is_err());
        let c = Partition::collapsed(&g, vec![0, 0, 2, 2, 4]).unwrap();
        assert_eq!(c.indices(), &[0, 2, 4]);
        assert!(Partition::full(&g).contains(&c));
    }
}
