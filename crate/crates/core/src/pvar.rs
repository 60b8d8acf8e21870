//! Two-parameter tables and exact p-variation by dynamic programming.

use crate::error::{invalid, Error, Result};

/// Largest window (in grid points) for which dense pair tables are built.
pub const MAX_TABLE_POINTS: usize = 2048;

/// Scalar magnitudes `|F_{i,j}|` for all grid index pairs `i <= j`,
/// stored densely (row-major, only the upper triangle is meaningful).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoParamTable {
    n: usize,
    values: Vec<f64>,
}

impl TwoParamTable {
    pub fn zeros(n: usize) -> Result<Self> {
        if n > MAX_TABLE_POINTS {
            return Err(Error::TooLarge { requested: n, limit: MAX_TABLE_POINTS });
        }
        Ok(Self { n, values: vec![0.0; n * n] })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut table = Self::zeros(n)?;
        for i in 0..n {
            for j in i + 1..n {
                table.values[i * n + j] = f(i, j);
            }
        }
        Ok(table)
    }

    /// `|x_j - x_i|` for a scalar series.
    pub fn increments(xs: &[f64]) -> Result<Self> {
        Self::from_fn(xs.len(), |i, j| (xs[j] - xs[i]).abs())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            0.0
        } else {
            self.values[i * self.n + j]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("p-variation needs a finite exponent p >= 1, got {p}"));
    }
    Ok(())
}

/// `sup_P sum |F_{u,v}|^p` over partitions of `[start, j]`, for every
/// `j` in `start..=end`. Entry `k` of the result corresponds to `start + k`.
///
/// `V[j] = max_{start <= i < j} (V[i] + |F_{i,j}|^p)`, `V[start] = 0`.
pub fn p_variation_powers(
    p: f64,
    start: usize,
    end: usize,
    magnitude: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    let len = end - start + 1;
    let mut best = vec![0.0; len];
    for j in 1..len {
        let mut v = 0.0f64;
        for i in 0..j {
            let cand = best[i] + magnitude(start + i, start + j).powf(p);
            if cand > v {
                v = cand;
            }
        }
        best[j] = v;
    }
    best
}

/// Exact p-variation `(sup_P sum |F_{u,v}|^p)^{1/p}` of a two-parameter
/// function over the window `[start, end]` of grid indices.
pub fn p_variation_with(
    p: f64,
    window: (usize, usize),
    magnitude: impl Fn(usize, usize) -> f64,
) -> Result<f64> {
    check_p(p)?;
    let (start, end) = window;
    if start > end {
        return invalid(format!("window start {start} exceeds end {end}"));
    }
    if start == end {
        return Ok(0.0);
    }
    let powers = p_variation_powers(p, start, end, magnitude);
    Ok(powers[powers.len() - 1].powf(1.0 / p))
}

/// [`p_variation_with`] over a materialized table.
pub fn p_variation(table: &TwoParamTable, p: f64, window: (usize, usize)) -> Result<f64> {
    if window.1 >= table.len() {
        return invalid(format!("window end {} outside a table of {} points", window.1, table.len()));
    }
    p_variation_with(p, window, |i, j| table.get(i, j))
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_path_total_variation() {
        let t = TwoParamTable::increments(&[0.0, 0.5, 1.0]).unwrap();
        assert!((p_variation(&t, 1.0, (0, 2)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_unit_jump() {
        let t = TwoParamTable::increments(&[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!((p_variation(&t, 2.0, (0, 3)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_small_exponent() {
        let t = TwoParamTable::increments(&[0.0, 1.0]).unwrap();
        assert!(matches!(p_variation(&t, 0.5, (0, 1)), Err(Error::InvalidArgument(_))));
        assert!(matches!(p_variation(&t, f64::NAN, (0, 1)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn empty_window_is_zero() {
        let t = TwoParamTable::increments(&[0.0, 1.0]).unwrap();
        assert_eq!(p_variation(&t, 2.0, (1, 1)).unwrap(), 0.0);
    }

    #[test]
    fn memory_guard() {
        assert!(matches!(
            TwoParamTable::zeros(MAX_TABLE_POINTS + 1),
            Err(Error::TooLarge { .. })
        ));
    }

    proptest! {
        #[test]
        fn dp_matches_brute_force(
            n in 2usize..=10,
            p in 1.0f64..4.0,
            seed in proptest::collection::vec(0.0f64..3.0, 100),
        ) {
            let f = |i: usize, j: usize| seed[(i * 10 + j) % 100];
            let dp = p_variation_powers(p, 0, n - 1, f)[n - 1];
            let brute = oracle::brute_force_powers(p, 0, n - 1, f);
            prop_assert_eq!(dp.to_bits(), brute.to_bits());
        }

        #[test]
        fn monotone_in_window(
            xs in proptest::collection::vec(-2.0f64..2.0, 3..25),
            p in 1.0f64..3.5,
        ) {
            let t = TwoParamTable::increments(&xs).unwrap();
            let n = xs.len();
            let mut prev = 0.0;
            for end in 0..n {
                let v = p_variation(&t, p, (0, end)).unwrap();
                prop_assert!(v >= prev);
                prev = v;
            }
        }
    }
}
