//! Rough-path lifts `(X, XX)` stored through their prefix `XX_{0,·}`.
//!
//! For nodes `a <= b` the second level is reconstructed as
//! `XX_{a,b} = P_b - P_a - δX_{0,a} ⊗ δX_{a,b}`, so Chen's relation holds
//! identically. The jump `ΔXX_k` is the second level across the jump
//! substep `(k, left) -> (k, right)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::path::{SamplePath, Skeleton};

/// Read access to a rough path on skeleton nodes.
pub trait LiftView: Sync {
    fn dim(&self) -> usize;
    fn node_count(&self) -> usize;
    /// `out = δX_{a,b}`.
    fn first(&self, a: usize, b: usize, out: &mut [f64]);
    /// `out = XX_{a,b}`, `d x d` row-major.
    fn second(&self, a: usize, b: usize, out: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoughLift {
    path: SamplePath,
    prefix: Vec<f64>,
    /// `XX_{n-1,n}` per node, kept so substep values are exact.
    steps: Vec<f64>,
}

impl RoughLift {
    /// Build from second-level increments over each substep: `step(n, out)`
    /// writes `XX_{n-1,n}` for nodes `n >= 1`.
    pub fn from_node_steps(path: SamplePath, mut step: impl FnMut(usize, &mut [f64])) -> Self {
        let d = path.dim();
        let nodes = path.skeleton().node_count();
        let mut prefix = vec![0.0; nodes * d * d];
        let mut steps = vec![0.0; nodes * d * d];
        let x0 = path.node(0).to_vec();
        for n in 1..nodes {
            let s = &mut steps[n * d * d..(n + 1) * d * d];
            step(n, s);
            let prev = path.node(n - 1);
            let cur = path.node(n);
            let (done, rest) = prefix.split_at_mut(n * d * d);
            let before = &done[(n - 1) * d * d..];
            let out = &mut rest[..d * d];
            for i in 0..d {
                let a = prev[i] - x0[i];
                for j in 0..d {
                    out[i * d + j] = before[i * d + j] + s[i * d + j] + a * (cur[j] - prev[j]);
                }
            }
        }
        Self { path, prefix, steps }
    }

    fn with_prefix(path: SamplePath, prefix: Vec<f64>) -> Self {
        let dd = path.dim() * path.dim();
        let nodes = path.skeleton().node_count();
        let mut lift = Self { path, prefix, steps: Vec::new() };
        let mut steps = vec![0.0; nodes * dd];
        for n in 1..nodes {
            lift.second_from_prefix(n - 1, n, &mut steps[n * dd..(n + 1) * dd]);
        }
        lift.steps = steps;
        lift
    }

    /// A lift from explicit prefix values `XX_{0,n}` per node.
    pub fn from_prefix(path: SamplePath, prefix: Vec<f64>) -> Result<Self> {
        let d = path.dim();
        if prefix.len() != path.skeleton().node_count() * d * d {
            return invalid("prefix length does not match the skeleton");
        }
        if prefix[..d * d].iter().any(|&x| x != 0.0) {
            return invalid("the prefix must vanish at time 0");
        }
        Ok(Self::with_prefix(path, prefix))
    }

    /// A hand-specified lift: `continuous[k - 1]` is the second level over the
    /// continuous part of step `k`, `jumps[k]` the jump `ΔXX_k`. Missing jump
    /// entries are zero.
    pub fn custom(path: SamplePath, continuous: &[Vec<f64>], jumps: &BTreeMap<usize, Vec<f64>>) -> Result<Self> {
        let d = path.dim();
        let skel = path.skeleton().clone();
        if continuous.len() != skel.grid().steps() {
            return invalid("one continuous second-level entry per grid step is required");
        }
        if continuous.iter().chain(jumps.values()).any(|m| m.len() != d * d) {
            return invalid("second-level entries must be d x d");
        }
        if let Some(k) = jumps.keys().find(|&&k| !skel.is_jump(k)) {
            return invalid(format!("ΔXX given at index {k}, which is not a declared jump"));
        }
        Ok(Self::from_node_steps(path, |n, out| {
            let k = skel.grid_index(n);
            if skel.is_jump_substep(n) {
                if let Some(m) = jumps.get(&k) {
                    out.copy_from_slice(m);
                }
            } else {
                out.copy_from_slice(&continuous[k - 1]);
            }
        }))
    }

    pub fn path(&self) -> &SamplePath {
        &self.path
    }

    pub fn skeleton(&self) -> &Arc<Skeleton> {
        self.path.skeleton()
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        self.path.grid()
    }

    pub fn dim(&self) -> usize {
        self.path.dim()
    }

    pub fn prefix(&self, n: usize) -> &[f64] {
        let dd = self.dim() * self.dim();
        &self.prefix[n * dd..(n + 1) * dd]
    }

    /// `XX_{a,b}` for nodes `a <= b`.
    pub fn second(&self, a: usize, b: usize, out: &mut [f64]) {
        let dd = self.dim() * self.dim();
        if b == a + 1 {
            out.copy_from_slice(&self.steps[b * dd..(b + 1) * dd]);
        } else if a == b {
            out.iter_mut().for_each(|v| *v = 0.0);
        } else {
            self.second_from_prefix(a, b, out);
        }
    }

    fn second_from_prefix(&self, a: usize, b: usize, out: &mut [f64]) {
        let d = self.dim();
        let x0 = self.path.node(0);
        let xa = self.path.node(a);
        let xb = self.path.node(b);
        let pa = self.prefix(a);
        let pb = self.prefix(b);
        for i in 0..d {
            let u = xa[i] - x0[i];
            for j in 0..d {
                out[i * d + j] = pb[i * d + j] - pa[i * d + j] - u * (xb[j] - xa[j]);
            }
        }
    }

    pub fn second_vec(&self, a: usize, b: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim() * self.dim()];
        self.second(a, b, &mut out);
        out
    }

    /// `XX_{s,t}` for grid indices `s <= t`.
    pub fn chen_lookup(&self, s: usize, t: usize) -> Result<Vec<f64>> {
        if s > t {
            return invalid(format!("chen lookup needs s <= t, got {s} > {t}"));
        }
        if t > self.grid().last_index() {
            return invalid("chen lookup index outside the grid");
        }
        let skel = self.skeleton();
        Ok(self.second_vec(skel.right(s), skel.right(t)))
    }

    /// `ΔXX_k`; zero off the declared jumps.
    pub fn jump_second(&self, k: usize) -> Vec<f64> {
        let skel = self.skeleton();
        self.second_vec(skel.left(k), skel.right(k))
    }

    pub fn jump_second_map(&self) -> BTreeMap<usize, Vec<f64>> {
        self.skeleton().jumps().iter().map(|&k| (k, self.jump_second(k))).collect()
    }

    /// The lift of `X + h` for a path `h` without jumps of its own on the
    /// same grid. Cross integrals over each substep use the trapezoid value
    /// `½(δX ⊗ δh + δh ⊗ δX)`, and `∫δh dh` is taken as `½ δh ⊗ δh`.
    pub fn translate(&self, h: &SamplePath) -> Result<RoughLift> {
        if h.dim() != self.dim() {
            return invalid("translation must have the dimension of the path");
        }
        let h = h.embed(self.skeleton())?;
        let d = self.dim();
        let moved = self.path.zip_map(&h, d, |x, y, out| {
            for i in 0..d {
                out[i] = x[i] + y[i];
            }
        })?;
        let mut dx = vec![0.0; d];
        let mut dh = vec![0.0; d];
        Ok(RoughLift::from_node_steps(moved, |n, out| {
            self.second(n - 1, n, out);
            self.path.increment(n - 1, n, &mut dx);
            h.increment(n - 1, n, &mut dh);
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] += 0.5 * (dx[i] * dh[j] + dh[i] * dx[j]) + 0.5 * dh[i] * dh[j];
                }
            }
        }))
    }

    /// The lift on a skeleton with more declared jumps (zero new jumps).
    pub fn embed(&self, target: &Arc<Skeleton>) -> Result<RoughLift> {
        let path = self.path.embed(target)?;
        let dd = self.dim() * self.dim();
        let src = self.skeleton();
        let source = |n: usize| {
            let k = target.grid_index(n);
            if target.is_left_node(n) { src.left(k) } else { src.right(k) }
        };
        let mut prefix = Vec::with_capacity(target.node_count() * dd);
        let mut steps = vec![0.0; target.node_count() * dd];
        for n in 0..target.node_count() {
            prefix.extend_from_slice(self.prefix(source(n)));
            if n > 0 {
                self.second(source(n - 1), source(n), &mut steps[n * dd..(n + 1) * dd]);
            }
        }
        Ok(RoughLift { path, prefix, steps })
    }

    pub fn truncate(&self, k: usize) -> Result<RoughLift> {
        let path = self.path.truncate(k)?;
        let dd = self.dim() * self.dim();
        let len = path.skeleton().node_count() * dd;
        Ok(RoughLift { path, prefix: self.prefix[..len].to_vec(), steps: self.steps[..len].to_vec() })
    }

    /// The lift observed on a coarser grid. Second-level values between
    /// retained points are unchanged.
    pub fn restrict(&self, coarse: Arc<TimeGrid>) -> Result<RoughLift> {
        let (skel, map) = self.skeleton().restrict(coarse)?;
        let path = self.path.resample(skel.clone(), &map);
        let src = self.skeleton();
        let dd = self.dim() * self.dim();
        let source = |n: usize| {
            let k = map[skel.grid_index(n)];
            if skel.is_left_node(n) { src.left(k) } else { src.right(k) }
        };
        let mut prefix = Vec::with_capacity(skel.node_count() * dd);
        let mut steps = vec![0.0; skel.node_count() * dd];
        for n in 0..skel.node_count() {
            prefix.extend_from_slice(self.prefix(source(n)));
            if n > 0 {
                self.second(source(n - 1), source(n), &mut steps[n * dd..(n + 1) * dd]);
            }
        }
        Ok(RoughLift { path, prefix, steps })
    }

    pub fn check_same_skeleton(&self, other: &Skeleton) -> Result<()> {
        if self.skeleton().same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch("lift lives on a different skeleton".into()))
        }
    }
}

impl LiftView for RoughLift {
    fn dim(&self) -> usize {
        self.path.dim()
    }

    fn node_count(&self) -> usize {
        self.skeleton().node_count()
    }

    fn first(&self, a: usize, b: usize, out: &mut [f64]) {
        self.path.increment(a, b, out)
    }

    fn second(&self, a: usize, b: usize, out: &mut [f64]) {
        RoughLift::second(self, a, b, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chen_gap(l: &RoughLift, s: usize, u: usize, t: usize) -> f64 {
        let d = l.dim();
        let st = l.second_vec(s, t);
        let su = l.second_vec(s, u);
        let ut = l.second_vec(u, t);
        let mut a = vec![0.0; d];
        let mut b = vec![0.0; d];
        l.path().increment(s, u, &mut a);
        l.path().increment(u, t, &mut b);
        (0..d * d)
            .map(|ij| (st[ij] - su[ij] - ut[ij] - a[ij / d] * b[ij % d]).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn custom_lift_reproduces_its_data() {
        let g = Arc::new(TimeGrid::uniform(1.0, 2).unwrap());
        let skel = Skeleton::new(g, vec![2]).unwrap();
        let path = SamplePath::new(skel, 1, vec![0.0, 1.0, 1.5, 3.0]).unwrap();
        let mut jumps = BTreeMap::new();
        jumps.insert(2, vec![0.7]);
        let l = RoughLift::custom(path, &[vec![0.5], vec![0.1]], &jumps).unwrap();
        assert!((l.jump_second(2)[0] - 0.7).abs() < 1e-15);
        assert_eq!(l.second_vec(0, 1), vec![0.5]);
        assert!((l.second_vec(1, 2)[0] - 0.1).abs() < 1e-15);
        for (s, u, t) in [(0, 1, 3), (0, 2, 3), (1, 2, 3), (0, 0, 3)] {
            assert!(chen_gap(&l, s, u, t) < 1e-14);
        }
        assert!(l.chen_lookup(2, 1).is_err());
        assert_eq!(l.chen_lookup(1, 1).unwrap(), vec![0.0]);
    }

    #[test]
    fn restriction_preserves_values() {
        let g = Arc::new(TimeGrid::uniform(1.0, 4).unwrap());
        let path = SamplePath::continuous(g.clone(), 2, (0..10).map(|v| (v * v) as f64 * 0.1).collect()).unwrap();
        let l = RoughLift::from_node_steps(path, |n, out| out[1] = n as f64);
        let coarse = Arc::new(g.coarsen(2).unwrap());
        let c = l.restrict(coarse).unwrap();
        assert_eq!(c.second_vec(0, 2), l.second_vec(0, 4));
        assert_eq!(c.second_vec(1, 2), l.second_vec(2, 4));
    }
}
