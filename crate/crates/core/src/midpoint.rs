//! w-midpoints and alternating-midpoint partitions.

use crate::control::ControlFn;
use crate::error::{invalid, Result};
use crate::grid::{Partition, TimeGrid};

/// Smallest grid index `u` in `[s, t]` with `w(s, u) >= w(s, t) / 2`.
pub fn w_midpoint(w: &dyn ControlFn, s: usize, t: usize) -> usize {
    if t <= s {
        return s;
    }
    let half = 0.5 * w.eval(s, t);
    (s..=t).find(|&u| w.eval(s, u) >= half).unwrap_or(t)
}

/// Split point of `[a, b]` for the left-limit control `ŵ(u, v) = w(u, v-)`:
/// the smallest `u` with `ŵ(a, u) <= ŵ(a, b) / 2` and `ŵ(u, b) <= ŵ(a, b) / 2`.
///
/// Such a point exists for any superadditive `w` (take the w-midpoint of
/// `[a, b-1]`), and testing both halves directly keeps the halving exact in
/// floating point. Falls back to that w-midpoint if rounding defeats the
/// search.
pub fn split_point(w: &dyn ControlFn, a: usize, b: usize) -> usize {
    if b <= a + 1 {
        return a;
    }
    let half = 0.5 * w.left(a, b);
    (a..=b)
        .find(|&u| w.left(a, u) <= half && w.left(u, b) <= half)
        .unwrap_or_else(|| w_midpoint(w, a, b - 1))
}

/// Nested point sets `P^0 ⊆ P^1 ⊆ ...` of an interval. Level `h` has
/// `2^h + 1` entries; repeated points are kept so that positions line up
/// across levels.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingMidpoints {
    levels: Vec<Vec<usize>>,
}

impl AlternatingMidpoints {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// Level `h` with repetitions.
    pub fn level(&self, h: usize) -> &[usize] {
        &self.levels[h]
    }

    /// Level `h` with repeated points collapsed.
    pub fn indices(&self, h: usize) -> Vec<usize> {
        let mut v = self.levels[h].clone();
        v.dedup();
        v
    }

    pub fn partition(&self, h: usize, grid: &TimeGrid) -> Result<Partition> {
        Partition::collapsed(grid, self.levels[h].clone())
    }
}

/// Alternating midpoints of `[s, t]` up to `depth`. Level `h >= 1` copies the
/// points of level `h - 1` and inserts, in each parent interval, the split
/// point of control `ws[(h - 1) % ws.len()]`.
pub fn alternating_midpoints(
    ws: &[&dyn ControlFn],
    interval: (usize, usize),
    depth: usize,
) -> Result<AlternatingMidpoints> {
    if ws.is_empty() {
        return invalid("alternating midpoints need at least one control");
    }
    let (s, t) = interval;
    if s > t {
        return invalid(format!("interval start {s} exceeds end {t}"));
    }
    if let Some(w) = ws.iter().find(|w| t >= w.len()) {
        return invalid(format!("interval end {t} outside a control on {} points", w.len()));
    }
    let mut levels = vec![vec![s, t]];
    for h in 1..=depth {
        let w = ws[(h - 1) % ws.len()];
        let prev = &levels[h - 1];
        let mut next = Vec::with_capacity(2 * prev.len() - 1);
        for pair in prev.windows(2) {
            next.push(pair[0]);
            next.push(split_point(w, pair[0], pair[1]));
        }
        next.push(t);
        levels.push(next);
    }
    Ok(AlternatingMidpoints { levels })
}

/// Check `ŵ_j(d_i, d_{i+1}) <= 2^{-floor(h/N)} ŵ_j(s, t)` for every level,
/// consecutive pair and control, where `ŵ(u, v) = w(u, v-)`. Returns the
/// first failing `(level, position, control)`.
pub fn check_halving_bound(
    ws: &[&dyn ControlFn],
    am: &AlternatingMidpoints,
) -> std::result::Result<(), (usize, usize, usize)> {
    let n = ws.len();
    let (s, t) = (am.levels[0][0], am.levels[0][1]);
    for h in 0..=am.depth() {
        let factor = 0.5f64.powi((h / n) as i32);
        for (i, pair) in am.levels[h].windows(2).enumerate() {
            for (j, w) in ws.iter().enumerate() {
                if w.left(pair[0], pair[1]) > factor * w.left(s, t) {
                    return Err((h, i, j));
                }
            }
        }
    }
    Ok(())
}
