//! Base kernels with analytic partial derivatives, the Langevin Stein kernel
//! and the quadratic-time kernel Stein discrepancy.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::models::{SampleSet, ScoreModel};
use crate::numeric::{sech, ExactSum, PAR_CHUNK};

/// `√(π/2)`: the sech kernel of inverse scale `a` uses `sech(√(π/2)·a·u)`.
pub const SECH_SCALE: f64 = 1.253_314_137_315_500_3;

/// Translation-invariant kernel profiles `F(u)`, `u = x − y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Stationary {
    /// `(c² + ||u||²)^β`
    Imq { c: f64, beta: f64 },
    /// `Π_d sech(√(π/2)·a·u_d)`
    Sech { a: f64 },
}

impl Stationary {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Stationary::Imq { c, beta } => {
                if !(c > 0.0) || !(beta < 0.0) {
                    return Err(invalid(format!("IMQ needs c > 0 and beta < 0 (c={c}, beta={beta})")));
                }
            }
            Stationary::Sech { a } => {
                if !(a > 0.0) {
                    return Err(invalid(format!("sech needs a > 0 (a={a})")));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        match *self {
            Stationary::Imq { c, beta } => (c * c + sq_norm(u)).powf(beta),
            Stationary::Sech { a } => u.iter().map(|&v| sech(SECH_SCALE * a * v)).product(),
        }
    }

    pub fn log_eval(&self, u: &[f64]) -> f64 {
        match *self {
            Stationary::Imq { c, beta } => beta * (c * c + sq_norm(u)).ln(),
            Stationary::Sech { a } => u.iter().map(|&v| crate::numeric::log_sech(SECH_SCALE * a * v)).sum(),
        }
    }

    /// `∂_d log F(u)`.
    pub fn grad_log(&self, u: &[f64], out: &mut [f64]) {
        match *self {
            Stationary::Imq { c, beta } => {
                let s = c * c + sq_norm(u);
                for (o, &v) in out.iter_mut().zip(u) {
                    *o = 2.0 * beta * v / s;
                }
            }
            Stationary::Sech { a } => {
                let k = SECH_SCALE * a;
                for (o, &v) in out.iter_mut().zip(u) {
                    *o = -k * (k * v).tanh();
                }
            }
        }
    }

    /// Value, `∂_{u_d} F` and `−∂²_{u_d} F` (which equals `∂_{x_d}∂_{y_d} F(x − y)`).
    fn parts(&self, u: &[f64], grad: &mut [f64], cross: &mut [f64]) -> f64 {
        match *self {
            Stationary::Imq { c, beta } => {
                let s = c * c + sq_norm(u);
                let v = s.powf(beta);
                let s1 = v / s;
                let s2 = s1 / s;
                for d in 0..u.len() {
                    grad[d] = 2.0 * beta * u[d] * s1;
                    cross[d] = -2.0 * beta * s1 - 4.0 * beta * (beta - 1.0) * u[d] * u[d] * s2;
                }
                v
            }
            Stationary::Sech { a } => {
                let k = SECH_SCALE * a;
                let v = self.eval(u);
                for d in 0..u.len() {
                    let t = (k * u[d]).tanh();
                    grad[d] = -k * t * v;
                    cross[d] = k * k * v * (1.0 - 2.0 * t * t);
                }
                v
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TiltKind {
    Unit,
    /// `A(x) = Π_d exp(a′·√(1 + x_d²))`
    SechExp { a_prime: f64 },
}

/// Positive weight `A(x − center)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltFunction {
    #[serde(flatten)]
    pub kind: TiltKind,
    /// Empty means the origin.
    #[serde(default)]
    pub center: Vec<f64>,
}

impl TiltFunction {
    pub fn unit() -> Self {
        Self { kind: TiltKind::Unit, center: Vec::new() }
    }

    pub fn sech_exp(a_prime: f64, center: Vec<f64>) -> Result<Self> {
        if !(a_prime > 0.0) {
            return Err(invalid("tilt parameter a' must be positive"));
        }
        Ok(Self { kind: TiltKind::SechExp { a_prime }, center })
    }

    pub fn recentered(&self, center: &[f64]) -> Self {
        Self { kind: self.kind, center: center.to_vec() }
    }

    pub fn is_unit(&self) -> bool {
        self.kind == TiltKind::Unit
    }

    #[inline]
    fn shifted(&self, x: &[f64], d: usize) -> f64 {
        x[d] - self.center.get(d).copied().unwrap_or(0.0)
    }

    pub fn log_value(&self, x: &[f64]) -> f64 {
        match self.kind {
            TiltKind::Unit => 0.0,
            TiltKind::SechExp { a_prime } => {
                (0..x.len()).map(|d| a_prime * (1.0 + self.shifted(x, d).powi(2)).sqrt()).sum()
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.log_value(x).exp()
    }

    /// `∂_d log A(x − center)`.
    pub fn grad_log(&self, x: &[f64], out: &mut [f64]) {
        for (d, o) in out.iter_mut().enumerate() {
            *o = self.grad_log_at(x, d);
        }
    }

    #[inline]
    pub fn grad_log_at(&self, x: &[f64], d: usize) -> f64 {
        match self.kind {
            TiltKind::Unit => 0.0,
            TiltKind::SechExp { a_prime } => {
                let t = self.shifted(x, d);
                a_prime * t / (1.0 + t * t).sqrt()
            }
        }
    }
}

/// `k(x, y)`: an IMQ or sech kernel, optionally tilted as `A(x)F(x−y)A(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BaseKernel {
    Imq { c: f64, beta: f64 },
    Sech { a: f64 },
    Tilted { inner: Stationary, tilt: TiltFunction },
}

impl BaseKernel {
    pub fn imq(c: f64, beta: f64) -> Result<Self> {
        Stationary::Imq { c, beta }.validate()?;
        Ok(BaseKernel::Imq { c, beta })
    }

    pub fn sech(a: f64) -> Result<Self> {
        Stationary::Sech { a }.validate()?;
        Ok(BaseKernel::Sech { a })
    }

    pub fn tilted(inner: Stationary, tilt: TiltFunction) -> Result<Self> {
        inner.validate()?;
        Ok(BaseKernel::Tilted { inner, tilt })
    }

    pub fn validate(&self) -> Result<()> {
        self.stationary().validate()
    }

    pub fn stationary(&self) -> Stationary {
        match self {
            BaseKernel::Imq { c, beta } => Stationary::Imq { c: *c, beta: *beta },
            BaseKernel::Sech { a } => Stationary::Sech { a: *a },
            BaseKernel::Tilted { inner, .. } => *inner,
        }
    }

    /// Tilted kernels re-centred on `center`; other kernels unchanged.
    pub fn recentered(&self, center: &[f64]) -> Self {
        match self {
            BaseKernel::Tilted { inner, tilt } => {
                BaseKernel::Tilted { inner: *inner, tilt: tilt.recentered(center) }
            }
            other => other.clone(),
        }
    }
}

/// A twice differentiable kernel exposing the partials the Stein kernel needs.
pub trait DiffKernel: Sync {
    /// Returns `k(x, y)` and writes `∂_{x_d}k`, `∂_{y_d}k` and `∂_{x_d}∂_{y_d}k`.
    fn parts(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64], cross: &mut [f64]) -> f64;

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        self.parts(x, y, &mut a, &mut b, &mut c)
    }
}

impl DiffKernel for BaseKernel {
    fn parts(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64], cross: &mut [f64]) -> f64 {
        let dim = x.len();
        let mut u = [0.0; 32];
        let mut heap;
        let u: &mut [f64] = if dim <= 32 {
            &mut u[..dim]
        } else {
            heap = vec![0.0; dim];
            &mut heap
        };
        for d in 0..dim {
            u[d] = x[d] - y[d];
        }
        match self {
            BaseKernel::Imq { .. } | BaseKernel::Sech { .. } => {
                let v = self.stationary().parts(u, gx, cross);
                for d in 0..dim {
                    gy[d] = -gx[d];
                }
                v
            }
            BaseKernel::Tilted { inner, tilt } => {
                let k = inner.parts(u, gx, cross);
                let w = (tilt.log_value(x) + tilt.log_value(y)).exp();
                // gy holds ∂log A(y) until overwritten below.
                tilt.grad_log(y, gy);
                for d in 0..dim {
                    let ty = gy[d];
                    let tx = tilt.grad_log_at(x, d);
                    let kd = gx[d];
                    cross[d] = w * (tx * ty * k - tx * kd + ty * kd + cross[d]);
                    gx[d] = w * (tx * k + kd);
                    gy[d] = w * (ty * k - kd);
                }
                w * k
            }
        }
    }
}

pub fn kernel_eval(k: &BaseKernel, x: &[f64], y: &[f64]) -> f64 {
    k.eval(x, y)
}

pub fn kernel_grad_x(k: &BaseKernel, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    k.parts(x, y, &mut a, &mut b, &mut c);
    a
}

pub fn kernel_grad_y(k: &BaseKernel, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    k.parts(x, y, &mut a, &mut b, &mut c);
    b
}

pub fn kernel_dxdy_diag(k: &BaseKernel, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    k.parts(x, y, &mut a, &mut b, &mut c);
    c
}

struct Scratch {
    gx: Vec<f64>,
    gy: Vec<f64>,
    cross: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Self { gx: vec![0.0; dim], gy: vec![0.0; dim], cross: vec![0.0; dim] }
    }
}

fn stein_kernel_scored<K: DiffKernel + ?Sized>(
    k: &K,
    x: &[f64],
    bx: &[f64],
    y: &[f64],
    by: &[f64],
    s: &mut Scratch,
) -> f64 {
    let v = k.parts(x, y, &mut s.gx, &mut s.gy, &mut s.cross);
    let mut total = 0.0;
    for d in 0..x.len() {
        total += bx[d] * by[d] * v + bx[d] * s.gy[d] + by[d] * s.gx[d] + s.cross[d];
    }
    total
}

/// `k0(x, y) = Σ_d (T_d ⊗ T_d)k(x, y)` with the Langevin Stein operator.
pub fn stein_kernel_eval<K: DiffKernel + ?Sized>(model: &dyn ScoreModel, k: &K, x: &[f64], y: &[f64]) -> f64 {
    let bx = model.score_vec(x);
    let by = model.score_vec(y);
    stein_kernel_scored(k, x, &bx, y, &by, &mut Scratch::new(x.len()))
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (u, v) in a.iter().zip(b) {
        match u.total_cmp(v) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Squared KSD `(1/N²) Σ_{n,n′} k0(x_n, x_{n′})` over the `N(N+1)/2` distinct
/// pairs. Tilted kernels are centred on the sample mean.
///
/// Each pair is evaluated in a canonical (lexicographic) argument order and
/// the terms are summed exactly, so the value is bitwise invariant to row
/// order and thread count.
pub fn ksd_squared(sample: &SampleSet, model: &dyn ScoreModel, k: &BaseKernel) -> Result<f64> {
    k.validate()?;
    let k = k.recentered(sample.mean());
    ksd_squared_with(sample, model, &k)
}

/// [`ksd_squared`] for an arbitrary differentiable kernel, used as given.
pub fn ksd_squared_with<K: DiffKernel + ?Sized>(sample: &SampleSet, model: &dyn ScoreModel, k: &K) -> Result<f64> {
    check_dim(model.dim(), sample.dim())?;
    let n = sample.len();
    let dim = sample.dim();
    let scores = sample.scores(model)?;
    let score = |i: usize| &scores[i * dim..(i + 1) * dim];
    let starts: Vec<usize> = (0..n).step_by(PAR_CHUNK).collect();
    let partial: Vec<ExactSum> = starts
        .par_iter()
        .map(|&start| {
            let mut acc = ExactSum::new();
            let mut s = Scratch::new(dim);
            for i in start..(start + PAR_CHUNK).min(n) {
                let xi = sample.row(i);
                acc.add(stein_kernel_scored(k, xi, score(i), xi, score(i), &mut s));
                for j in (i + 1)..n {
                    let xj = sample.row(j);
                    let term = if lex_cmp(xi, xj) == Ordering::Greater {
                        stein_kernel_scored(k, xj, score(j), xi, score(i), &mut s)
                    } else {
                        stein_kernel_scored(k, xi, score(i), xj, score(j), &mut s)
                    };
                    acc.add(2.0 * term);
                }
            }
            acc
        })
        .collect();
    let mut total = ExactSum::new();
    for p in &partial {
        total.merge(p);
    }
    Ok(total.value() / (n as f64 * n as f64))
}

#[inline]
fn sq_norm(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum()
}
