//! Control functions on grid index pairs.
//!
//! A control `w(s, t)` is nonnegative, vanishes on the diagonal and is
//! superadditive: `w(s, u) + w(u, t) <= w(s, t)`. Left limits `w(s, t-)`
//! are read off the previous grid point, see [`ControlFn::left`].

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::path::SamplePath;
use crate::pvar::{p_variation_powers, MAX_TABLE_POINTS};

pub trait ControlFn: Send + Sync {
    /// Number of grid points the control is defined on.
    fn len(&self) -> usize;

    /// `w(s, t)` for grid indices `s <= t`.
    fn eval(&self, s: usize, t: usize) -> f64;

    /// `w(s, t-)`: the control up to the grid point before `t`, zero when
    /// `t <= s`.
    fn left(&self, s: usize, t: usize) -> f64 {
        if t <= s {
            0.0
        } else {
            self.eval(s, t - 1)
        }
    }

    fn label(&self) -> String {
        "control".into()
    }
}

/// `w(s, t) = t - s`.
#[derive(Debug, Clone)]
pub struct TimeControl {
    grid: Arc<TimeGrid>,
}

impl TimeControl {
    pub fn new(grid: Arc<TimeGrid>) -> Self {
        Self { grid }
    }
}

impl ControlFn for TimeControl {
    fn len(&self) -> usize {
        self.grid.len()
    }

    fn eval(&self, s: usize, t: usize) -> f64 {
        if t <= s {
            0.0
        } else {
            self.grid.time(t) - self.grid.time(s)
        }
    }

    fn label(&self) -> String {
        "time".into()
    }
}

/// A control given by a dense table of values.
#[derive(Debug, Clone)]
pub struct TableControl {
    n: usize,
    values: Vec<f64>,
    label: String,
}

impl TableControl {
    /// Tabulate `f` on all pairs `s < t`; the diagonal is set to zero.
    pub fn from_fn(n: usize, label: &str, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        if n > MAX_TABLE_POINTS {
            return Err(Error::TooLarge { requested: n, limit: MAX_TABLE_POINTS });
        }
        let mut values = vec![0.0; n * n];
        for s in 0..n {
            for t in s + 1..n {
                let v = f(s, t);
                if !(v >= 0.0) {
                    return invalid(format!("control value at ({s}, {t}) is {v}"));
                }
                values[s * n + t] = v;
            }
        }
        Ok(Self { n, values, label: label.into() })
    }

    /// Replace each entry by the maximum over all subintervals, so the
    /// table is exactly monotone under inclusion in floating point.
    fn monotonize(&mut self) {
        let n = self.n;
        for t in 0..n {
            for s in (0..t).rev() {
                let mut v = self.values[s * n + t];
                v = v.max(self.values[(s + 1) * n + t]);
                v = v.max(self.values[s * n + t - 1]);
                self.values[s * n + t] = v;
            }
        }
    }
}

impl ControlFn for TableControl {
    fn len(&self) -> usize {
        self.n
    }

    fn eval(&self, s: usize, t: usize) -> f64 {
        if t <= s {
            0.0
        } else {
            self.values[s * self.n + t]
        }
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// `w(s, t) = ||F||^p_{p-var, [s, t]}` for a two-parameter magnitude `F`.
pub struct PVarControl;

impl PVarControl {
    /// Control from arbitrary pair magnitudes.
    pub fn from_magnitudes(
        n: usize,
        p: f64,
        label: &str,
        magnitude: impl Fn(usize, usize) -> f64,
    ) -> Result<TableControl> {
        if !(p >= 1.0) {
            return invalid(format!("p-variation control needs p >= 1, got {p}"));
        }
        if n > MAX_TABLE_POINTS {
            return Err(Error::TooLarge { requested: n, limit: MAX_TABLE_POINTS });
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|s| p_variation_powers(p, s, n - 1, &magnitude))
            .collect();
        let mut table = TableControl::from_fn(n, label, |s, t| rows[s][t - s])?;
        table.monotonize();
        Ok(table)
    }

    /// `||X||^p_{p-var}` of a path's grid values.
    pub fn of_path(path: &SamplePath, p: f64) -> Result<TableControl> {
        let n = path.grid().len();
        Self::from_magnitudes(n, p, &format!("pvar{p}"), |s, t| {
            crate::linalg::dist(path.value(t), path.value(s))
        })
    }

    /// `||Y||^p_{p,q}` over an ensemble sharing one grid.
    pub fn from_ensemble_lq(paths: &[SamplePath], p: f64, q: f64) -> Result<TableControl> {
        let table = crate::norms::lq_increment_table(paths, q, (0, paths[0].grid().last_index()))?;
        Self::from_magnitudes(table.len(), p, &format!("pvar{p}L{q}"), |s, t| table.get(s, t))
    }
}

/// Exhaustive check of `w(t,t) = 0` and superadditivity on all triples,
/// with relative slack `1e-12`. Returns the first violating triple.
pub fn check_superadditive(w: &dyn ControlFn) -> std::result::Result<(), (usize, usize, usize)> {
    let n = w.len();
    for s in 0..n {
        if w.eval(s, s) != 0.0 {
            return Err((s, s, s));
        }
        for t in s..n {
            let whole = w.eval(s, t);
            for u in s..=t {
                let parts = w.eval(s, u) + w.eval(u, t);
                if parts > whole + 1e-12 * (1.0 + whole) {
                    return Err((s, u, t));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn time_control_is_superadditive() {
        let g = Arc::new(TimeGrid::new(vec![0.0, 0.1, 0.35, 0.4, 1.0]).unwrap());
        let w = TimeControl::new(g);
        assert!(check_superadditive(&w).is_ok());
        assert_eq!(w.left(1, 3), 0.35 - 0.1);
        assert_eq!(w.left(2, 2), 0.0);
    }

    #[test]
    fn detects_subadditive_table() {
        let w = TableControl::from_fn(4, "sqrt", |s, t| ((t - s) as f64).sqrt()).unwrap();
        assert!(check_superadditive(&w).is_err());
    }

    proptest! {
        #[test]
        fn pvar_power_is_a_control(
            xs in proptest::collection::vec(-3.0f64..3.0, 2..14),
            p in 1.0f64..4.0,
        ) {
            let n = xs.len();
            let w = PVarControl::from_magnitudes(n, p, "x", |s, t| (xs[t] - xs[s]).abs()).unwrap();
            prop_assert!(check_superadditive(&w).is_ok());
        }
    }
}
