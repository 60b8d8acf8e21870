//! Dense helpers on flat row-major slices.

/// `out[i * b.len() + j] = a[i] * b[j]`.
pub fn outer(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

/// `out += m * v` for an `out.len() x v.len()` matrix.
pub fn matvec_acc(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &m[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (x, y) in row.iter().zip(v) {
            acc += x * y;
        }
        *o += acc;
    }
}

/// Row-major product of an `r x k` and a `k x c` matrix.
pub fn matmul(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for l in 0..k {
            let x = a[i * k + l];
            if x == 0.0 {
                continue;
            }
            for j in 0..c {
                out[i * c + j] += x * b[l * c + j];
            }
        }
    }
    out
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Positive semidefiniteness of a symmetric `n x n` matrix, up to an
/// absolute tolerance on the pivots of an LDLᵀ factorization.
pub fn is_psd(m: &[f64], n: usize, tol: f64) -> bool {
    let mut a = m.to_vec();
    for k in 0..n {
        let pivot = a[k * n + k];
        if pivot < -tol {
            return false;
        }
        if pivot <= tol {
            // a (numerically) zero pivot needs a zero column below it
            if (k + 1..n).any(|i| a[i * n + k].abs() > tol.sqrt().max(tol)) {
                return false;
            }
            continue;
        }
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            for j in k + 1..n {
                a[i * n + j] -= f * a[k * n + j];
            }
        }
    }
    true
}

/// Lower-triangular `L` with `L Lᵀ = m` for a symmetric positive
/// semidefinite `m`; columns with a (numerically) zero pivot are zeroed.
pub fn cholesky_psd(m: &[f64], n: usize) -> Vec<f64> {
    let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let tol = 1e-14 * scale;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = m[j * n + j];
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if diag <= tol {
            continue;
        }
        let ljj = diag.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut v = m[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / ljj;
        }
    }
    l
}
