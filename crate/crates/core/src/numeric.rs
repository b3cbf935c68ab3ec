//! Small numerical helpers shared across modules: exact summation, stable
//! special functions and seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Work items per parallel chunk. Reductions always combine chunk results in
/// chunk order, so outputs do not depend on the thread count.
pub const PAR_CHUNK: usize = 64;

/// Random stream `stream` of the generator family rooted at `seed`.
///
/// Independent experiments (trials, chains, null draws) each get their own
/// stream so they can run in any order or on any thread.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for the `index`-th independent unit of work (trial, replicate) of an
/// experiment rooted at `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    rng_stream(seed, index.wrapping_add(1 << 32)).next_u64()
}

/// Correctly rounded floating point summation (Shewchuk's partials).
///
/// The result is the exact sum rounded once, so it is independent of the
/// order in which terms are added.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
    special: f64,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        if !x.is_finite() {
            self.special += x;
            return;
        }
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
        self.special += other.special;
    }

    pub fn value(&self) -> f64 {
        if self.special != 0.0 || self.special.is_nan() {
            return self.special;
        }
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Half-way rounding correction.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn exact_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut s = ExactSum::new();
    s.extend(iter);
    s.value()
}

/// sech(u) = 2e^{-|u|}/(1+e^{-2|u|}); never overflows.
#[inline]
pub fn sech(u: f64) -> f64 {
    let e = (-u.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

#[inline]
pub fn log_sech(u: f64) -> f64 {
    let a = u.abs();
    std::f64::consts::LN_2 - a - (-2.0 * a).exp().ln_1p()
}

/// log(1 + e^t), guarded against overflow for large t.
#[inline]
pub fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t + (-t).exp()
    } else {
        t.exp().ln_1p()
    }
}

#[inline]
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(Σ exp(v)) for a nonempty slice.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + exact_sum(v.iter().map(|x| (x - m).exp())).ln()
}

/// Empirical quantile of already sorted values (type 7, linear interpolation).
pub fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    sorted_quantile(&v, 0.5)
}
