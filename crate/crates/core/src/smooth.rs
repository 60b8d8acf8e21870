//! Registry of smooth coefficient functions with exact derivatives.
//!
//! Every registry function is a bundle of ridge functions
//! `f_o(y) = scale_o · φ(a_o · y + c_o) + offset_o`, one per output, with a
//! scalar profile `φ`. Jacobians and Hessians follow in closed form.

use crate::error::{invalid, Result};

/// Registry ids.
pub const SMOOTH_FNS: [&str; 5] = ["sin_bundle", "tanh_affine", "polynomial_clipped", "exp_clipped", "linear"];

/// Clipping radius of `g(z) = R tanh(z / R)` used by the clipped profiles.
const CLIP: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// `φ(z) = z`.
    Linear,
    /// `φ = sin`.
    Sin,
    /// `φ = tanh`.
    Tanh,
    /// `φ = P ∘ g` with `P(x) = x - x³/6`.
    PolyClipped,
    /// `φ = exp ∘ g`.
    ExpClipped,
    /// `φ(z) = z²`, unbounded; for closed-form checks only.
    Square,
}

/// `g` and its first three derivatives.
fn clip(z: f64) -> [f64; 4] {
    let th = (z / CLIP).tanh();
    let s = 1.0 - th * th;
    [CLIP * th, s, -2.0 / CLIP * th * s, -2.0 / (CLIP * CLIP) * s * (1.0 - 3.0 * th * th)]
}

/// Derivatives of `F ∘ g` from those of `F` at `g(z)` and of `g` at `z`.
fn chain(f: [f64; 4], g: [f64; 4]) -> [f64; 4] {
    [
        f[0],
        f[1] * g[1],
        f[2] * g[1] * g[1] + f[1] * g[2],
        f[3] * g[1].powi(3) + 3.0 * f[2] * g[1] * g[2] + f[1] * g[3],
    ]
}

impl Profile {
    /// `[φ, φ', φ'', φ''']` at `z`.
    pub fn derivatives(self, z: f64) -> [f64; 4] {
        match self {
            Profile::Linear => [z, 1.0, 0.0, 0.0],
            Profile::Square => [z * z, 2.0 * z, 2.0, 0.0],
            Profile::Sin => {
                let (s, c) = z.sin_cos();
                [s, c, -s, -c]
            }
            Profile::Tanh => {
                let t = z.tanh();
                let s = 1.0 - t * t;
                [t, s, -2.0 * t * s, -2.0 * s * (1.0 - 3.0 * t * t)]
            }
            Profile::PolyClipped => {
                let g = clip(z);
                let x = g[0];
                chain([x - x * x * x / 6.0, 1.0 - x * x / 2.0, -x, -1.0], g)
            }
            Profile::ExpClipped => {
                let g = clip(z);
                let e = g[0].exp();
                chain([e, e, e, e], g)
            }
        }
    }

    /// `sup_z |φ^{(k)}(z)|` for `k = 0..=3`, by a dense scan.
    fn sup_derivatives(self) -> [f64; 4] {
        if self == Profile::Linear {
            return [f64::INFINITY, 1.0, 0.0, 0.0];
        }
        if self == Profile::Square {
            return [f64::INFINITY, f64::INFINITY, 2.0, 0.0];
        }
        let mut sup = [0.0f64; 4];
        for i in 0..=40_000 {
            let z = -40.0 + i as f64 * 2e-3;
            let d = self.derivatives(z);
            for k in 0..4 {
                sup[k] = sup[k].max(d[k].abs());
            }
        }
        sup
    }
}

/// A smooth map `R^in -> R^out`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothFn {
    id: String,
    profile: Profile,
    in_dim: usize,
    out_dim: usize,
    a: Vec<f64>,
    c: Vec<f64>,
    scale: Vec<f64>,
    offset: Vec<f64>,
}

impl SmoothFn {
    /// A ridge bundle with explicit parameters; `a` is `out x in` row-major.
    pub fn ridge(
        id: &str,
        profile: Profile,
        in_dim: usize,
        out_dim: usize,
        a: Vec<f64>,
        c: Vec<f64>,
        scale: Vec<f64>,
        offset: Vec<f64>,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return invalid("smooth function dimensions must be positive");
        }
        if a.len() != in_dim * out_dim || c.len() != out_dim || scale.len() != out_dim || offset.len() != out_dim {
            return invalid("ridge parameters have inconsistent sizes");
        }
        if a.iter().chain(&c).chain(&scale).chain(&offset).any(|x| !x.is_finite()) {
            return invalid("ridge parameters must be finite");
        }
        Ok(Self { id: id.into(), profile, in_dim, out_dim, a, c, scale, offset })
    }

    /// `f(y) = A y + c`.
    pub fn linear(in_dim: usize, out_dim: usize, a: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        Self::ridge("linear", Profile::Linear, in_dim, out_dim, a, c, vec![1.0; out_dim], vec![0.0; out_dim])
    }

    /// `f_o(y) = y_o²` on `R^dim`. Not in the registry.
    pub fn square(dim: usize) -> Result<Self> {
        let mut a = vec![0.0; dim * dim];
        (0..dim).for_each(|i| a[i * dim + i] = 1.0);
        Self::ridge("square", Profile::Square, dim, dim, a, vec![0.0; dim], vec![1.0; dim], vec![0.0; dim])
    }

    /// A registry function with its default parameters:
    /// `a_{ob} = 1` if `b = o mod in` else `0.25`, `c_o = 0.1 o`
    /// (`c = 0` for `linear`), unit scale, zero offset.
    pub fn registry(id: &str, in_dim: usize, out_dim: usize) -> Result<Self> {
        let profile = match id {
            "linear" => Profile::Linear,
            "sin_bundle" => Profile::Sin,
            "tanh_affine" => Profile::Tanh,
            "polynomial_clipped" => Profile::PolyClipped,
            "exp_clipped" => Profile::ExpClipped,
            other => return invalid(format!("unknown smooth function {other:?}; known: {SMOOTH_FNS:?}")),
        };
        if in_dim == 0 || out_dim == 0 {
            return invalid("smooth function dimensions must be positive");
        }
        let a = (0..out_dim * in_dim)
            .map(|ob| if ob % in_dim == (ob / in_dim) % in_dim { 1.0 } else { 0.25 })
            .collect();
        let c = (0..out_dim)
            .map(|o| if profile == Profile::Linear { 0.0 } else { 0.1 * o as f64 })
            .collect();
        Self::ridge(id, profile, in_dim, out_dim, a, c, vec![1.0; out_dim], vec![0.0; out_dim])
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Multiply every output by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        for (s, o) in self.scale.iter_mut().zip(self.offset.iter_mut()) {
            *s *= factor;
            *o *= factor;
        }
        self
    }

    fn arg(&self, o: usize, y: &[f64]) -> f64 {
        let row = &self.a[o * self.in_dim..(o + 1) * self.in_dim];
        row.iter().zip(y).fold(self.c[o], |acc, (a, x)| acc + a * x)
    }

    pub fn eval(&self, y: &[f64], out: &mut [f64]) {
        for o in 0..self.out_dim {
            let z = self.arg(o, y);
            out[o] = self.scale[o] * self.profile.derivatives(z)[0] + self.offset[o];
        }
    }

    pub fn eval_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim];
        self.eval(y, &mut out);
        out
    }

    /// `out[o * in + b] = ∂f_o / ∂y_b`.
    pub fn jacobian(&self, y: &[f64], out: &mut [f64]) {
        let m = self.in_dim;
        for o in 0..self.out_dim {
            let d1 = self.scale[o] * self.profile.derivatives(self.arg(o, y))[1];
            for b in 0..m {
                out[o * m + b] = d1 * self.a[o * m + b];
            }
        }
    }

    pub fn jacobian_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim * self.in_dim];
        self.jacobian(y, &mut out);
        out
    }

    /// `out[(o * in + b) * in + c] = ∂²f_o / ∂y_b ∂y_c`.
    pub fn hessian(&self, y: &[f64], out: &mut [f64]) {
        let m = self.in_dim;
        for o in 0..self.out_dim {
            let d2 = self.scale[o] * self.profile.derivatives(self.arg(o, y))[2];
            for b in 0..m {
                for c in 0..m {
                    out[(o * m + b) * m + c] = d2 * self.a[o * m + b] * self.a[o * m + c];
                }
            }
        }
    }

    pub fn hessian_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim * self.in_dim * self.in_dim];
        self.hessian(y, &mut out);
        out
    }

    /// `sup |D^k f|` for `k = 0..=3`, operator norms bounded through
    /// `|scale_o| sup|φ^{(k)}| |a_o|^k` maximized over outputs.
    pub fn derivative_bounds(&self) -> [f64; 4] {
        let sup = self.profile.sup_derivatives();
        let mut out = [0.0f64; 4];
        for o in 0..self.out_dim {
            let row = &self.a[o * self.in_dim..(o + 1) * self.in_dim];
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            for k in 0..4 {
                let term = if self.scale[o] == 0.0 || (k > 0 && norm == 0.0) {
                    0.0
                } else {
                    self.scale[o].abs() * sup[k] * norm.powi(k as i32)
                };
                let term = if k == 0 { term + self.offset[o].abs() } else { term };
                out[k] = out[k].max(term);
            }
        }
        out
    }

    /// `‖f‖_{C³}`: the sum of [`Self::derivative_bounds`]. Infinite for a
    /// nonconstant linear map.
    pub fn c3_bound(&self) -> f64 {
        let b = self.derivative_bounds();
        if b[0].is_infinite() {
            log::warn!("smooth function {:?} is unbounded; its C3 norm is infinite", self.id);
        }
        b.iter().sum()
    }

    /// `‖f‖_{C²}`.
    pub fn c2_bound(&self) -> f64 {
        let b = self.derivative_bounds();
        b[0] + b[1] + b[2]
    }

    /// `self ∘ inner` for a linear `inner`, which stays in the ridge family.
    pub fn compose_linear(&self, inner: &SmoothFn) -> Result<SmoothFn> {
        if inner.profile != Profile::Linear || inner.scale.iter().any(|&s| s != 1.0) || inner.offset.iter().any(|&o| o != 0.0) {
            return invalid("only composition with a plain linear map stays in the registry");
        }
        if inner.out_dim != self.in_dim {
            return invalid("dimension mismatch in composition");
        }
        let m = inner.in_dim;
        let a = crate::linalg::matmul(&self.a, &inner.a, self.out_dim, self.in_dim, m);
        let c = (0..self.out_dim).map(|o| self.arg(o, &inner.c)).collect();
        Self::ridge(&self.id, self.profile, m, self.out_dim, a, c, self.scale.clone(), self.offset.clone())
    }
}
