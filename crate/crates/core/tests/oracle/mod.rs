//! Independent reference computations for the statistical kernels.
//!
//! Nothing here calls into the crate under test: distribution tails come
//! from direct numerical integration of the densities, the Kolmogorov CDF
//! from brute-force partial sums, and sampling moments from Monte Carlo
//! draws through `rand_distr`.

#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};
use std::f64::consts::PI;

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// Γ(k / 2) for a positive integer k, by the recurrence from Γ(1/2) and Γ(1).
pub fn gamma_half(k: u32) -> f64 {
    let mut s = if k.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut v = if k.is_multiple_of(2) { 1.0 } else { 0.5 };
    while v < k as f64 / 2.0 {
        s *= v;
        v += 1.0;
    }
    s
}

/// Chi-square upper tail by integrating the density after t = u².
pub fn chi_square_sf(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let k = df as f64;
    let norm = 2f64.powf(k / 2.0) * gamma_half(df);
    let density = |u: f64| 2.0 * u.powf(k - 1.0) * (-u * u / 2.0).exp() / norm;
    let mode = (k - 1.0).max(0.0).sqrt();
    let root = x.sqrt();
    // integrate whichever side is shorter to keep the error absolute-small
    if root <= mode + 8.0 {
        1.0 - integrate(&density, 0.0, root, 1e-14)
    } else {
        integrate(&density, root, root + 40.0, 1e-16)
    }
}

/// Upper tail of F(d1, d2) for integer degrees of freedom.
pub fn f_sf(f: f64, d1: u32, d2: u32) -> f64 {
    let (a, b) = (d1 as f64, d2 as f64);
    let beta = gamma_half(d1) * gamma_half(d2) / gamma_half(d1 + d2);
    // x = u², dx = 2u du removes the x^(d1/2 - 1) singularity at 0
    let density = |u: f64| {
        let x = u * u;
        let core = ((a * x).powf(a) * b.powf(b) / (a * x + b).powf(a + b)).sqrt();
        if x == 0.0 {
            if d1 == 1 { 2.0 / (b.sqrt() * beta) } else { 0.0 }
        } else {
            2.0 * u * core / (x * beta)
        }
    };
    1.0 - integrate(&density, 0.0, f.sqrt(), 1e-14)
}

/// Two-sided Student t tail for real `df`, integrating over t = tan(θ).
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    let kernel = |theta: f64| {
        let x = theta.tan();
        let c = theta.cos();
        (1.0 + x * x / df).powf(-(df + 1.0) / 2.0) / (c * c)
    };
    let half = PI / 2.0;
    let tail = integrate(&kernel, t.abs().atan(), half, 1e-15);
    let whole = integrate(&kernel, 0.0, half, 1e-15);
    tail / whole
}

/// Kolmogorov CDF from the alternating series, summed until terms vanish.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut k = 1.0f64;
    loop {
        let term = (-2.0 * k * k * x * x).exp();
        if term < 1e-300 || k > 1e6 {
            break;
        }
        sum += if (k as u64) % 2 == 1 { term } else { -term };
        k += 1.0;
    }
    1.0 - 2.0 * sum
}

/// Running mean and variance with the fourth central moment, for standard errors.
#[derive(Default)]
pub struct Moments {
    values: Vec<f64>,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.values.push(v);
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (self.values.len() as f64 - 1.0)
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn mean_se(&self) -> f64 {
        self.sd() / (self.values.len() as f64).sqrt()
    }

    /// Delta-method standard error of the sample SD.
    pub fn sd_se(&self) -> f64 {
        let m = self.mean();
        let n = self.values.len() as f64;
        let m4 = self.values.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
        let var = self.variance();
        ((m4 - var * var) / n).sqrt() / (2.0 * var.sqrt())
    }
}

/// Multinomial cell counts by chained conditional binomials.
pub fn multinomial_counts<R: Rng>(rng: &mut R, n: u64, probs: &[f64; 5]) -> [u64; 5] {
    let mut out = [0u64; 5];
    let mut left = n;
    let mut mass = 1.0;
    for k in 0..4 {
        if left == 0 || mass <= 0.0 {
            break;
        }
        let p = (probs[k] / mass).clamp(0.0, 1.0);
        out[k] = Binomial::new(left, p).unwrap().sample(rng);
        left -= out[k];
        mass -= probs[k];
    }
    out[4] = left;
    out
}

/// Multivariate hypergeometric counts by chained univariate hypergeometrics.
pub fn hypergeometric_counts<R: Rng>(rng: &mut R, n: u64, population: &[u64; 5]) -> [u64; 5] {
    let mut out = [0u64; 5];
    let mut left_total: u64 = population.iter().sum();
    let mut left_draws = n;
    for k in 0..4 {
        if left_draws == 0 {
            break;
        }
        out[k] = Hypergeometric::new(left_total, population[k], left_draws).unwrap().sample(rng);
        left_draws -= out[k];
        left_total -= population[k];
    }
    out[4] = left_draws;
    out
}

pub fn weighted_mean(counts: &[u64; 5], weights: &[f64; 5]) -> f64 {
    let n: u64 = counts.iter().sum();
    counts.iter().zip(weights).map(|(&c, w)| c as f64 * w).sum::<f64>() / n as f64
}

fn welch_statistic(x: &[f64], y: &[f64]) -> f64 {
    let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let mu = m(v);
        v.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
    };
    (m(x) - m(y)) / (var(x) / x.len() as f64 + var(y) / y.len() as f64).sqrt()
}

/// Exhaustive two-sided permutation p-value of the Welch statistic.
pub fn welch_permutation_p(x: &[f64], y: &[f64]) -> (f64, f64) {
    let all: Vec<f64> = x.iter().chain(y).copied().collect();
    let n = all.len();
    let observed = welch_statistic(x, y);
    let (mut hits, mut total) = (0u32, 0u32);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != x.len() {
            continue;
        }
        let pick = |inside: bool| -> Vec<f64> {
            (0..n).filter(|i| (mask & (1 << i) != 0) == inside).map(|i| all[i]).collect()
        };
        let (a, b) = (pick(true), pick(false));
        let t = welch_statistic(&a, &b);
        total += 1;
        if t.is_finite() && t.abs() >= observed.abs() - 1e-12 {
            hits += 1;
        }
    }
    (observed, hits as f64 / total as f64)
}
