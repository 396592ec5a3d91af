//! Discrete outcome distributions shared by the oracle builders and the
//! estimation subroutines: the Fejér kernel of phase estimation, exact
//! median-of-`r` order statistics, and inverse-CDF sampling.

use rand::Rng;
use std::f64::consts::PI;

/// `sin(pi * x)`, exactly zero at integers and accurate near them.
fn sin_pi(x: f64) -> f64 {
    // Exact reduction to [-1, 1].
    let r = x - 2.0 * (x / 2.0).round();
    let a = r.abs();
    let s = if a > 0.5 { (PI * (1.0 - a)).sin() } else { (PI * a).sin() };
    s.copysign(r)
}

/// Probability that `size`-point phase estimation of a phase with the given
/// detuning (estimate minus true phase, in turns) returns that estimate:
/// `sin^2(size*pi*detuning) / (size^2 sin^2(pi*detuning))`, equal to 1 at
/// integer detuning.
pub fn fejer(size: u64, detuning: f64) -> f64 {
    let den = sin_pi(detuning);
    if den == 0.0 {
        return 1.0;
    }
    let num = sin_pi(size as f64 * detuning);
    let ratio = num / (size as f64 * den);
    ratio * ratio
}

/// Outcome distribution of `size`-point phase estimation of `phase`.
pub fn phase_estimation_outcomes(size: u64, phase: f64) -> Vec<f64> {
    (0..size)
        .map(|y| fejer(size, y as f64 / size as f64 - phase))
        .collect()
}

/// Outcome distribution of amplitude estimation with `size` grid points for
/// marked mass `p`: an equal mixture of the kernels centred at `+omega` and
/// `-omega`, `omega = arcsin(sqrt p) / pi`.
pub fn amplitude_estimation_outcomes(size: u64, p: f64) -> Vec<f64> {
    let omega = p.clamp(0.0, 1.0).sqrt().asin() / PI;
    (0..size)
        .map(|y| {
            let x = y as f64 / size as f64;
            0.5 * (fejer(size, x - omega) + fejer(size, x + omega))
        })
        .collect()
}

/// `ln C(r, j)` for `j = 0..=r`.
fn ln_choose_row(r: u32) -> Vec<f64> {
    let mut row = Vec::with_capacity(r as usize + 1);
    let mut acc = 0.0;
    row.push(acc);
    for j in 0..r {
        acc += ((r - j) as f64).ln() - ((j + 1) as f64).ln();
        row.push(acc);
    }
    row
}

/// `P[Bin(r, f) >= m]` and `P[Bin(r, f) < m]` where `g = 1 - f` is passed
/// separately so that both tails keep full relative precision.
fn binomial_tails(ln_choose: &[f64], m: u32, f: f64, g: f64) -> (f64, f64) {
    if f <= 0.0 {
        return (0.0, 1.0);
    }
    if g <= 0.0 {
        return (1.0, 0.0);
    }
    let r = (ln_choose.len() - 1) as u32;
    let (lf, lg) = (f.ln(), g.ln());
    let term = |j: u32| (ln_choose[j as usize] + j as f64 * lf + (r - j) as f64 * lg).exp();
    let upper: f64 = (m..=r).map(term).sum();
    let lower: f64 = (0..m).map(term).sum();
    (upper, lower)
}

/// Exact distribution of the median of `reps` (odd) independent draws from
/// `weights`, whose outcomes are assumed sorted by value.
pub fn median_distribution(weights: &[f64], reps: u32) -> Vec<f64> {
    debug_assert!(reps % 2 == 1);
    if reps == 1 {
        return weights.to_vec();
    }
    let m = reps / 2 + 1;
    let len = weights.len();
    // prefix[k] = mass at or below outcome k; suffix[k] = mass strictly above.
    let mut prefix = vec![0.0; len];
    let mut suffix = vec![0.0; len];
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        prefix[k] = acc;
    }
    acc = 0.0;
    for k in (0..len).rev() {
        suffix[k] = acc;
        acc += weights[k];
    }
    let ln_choose = ln_choose_row(reps);
    let tails: Vec<(f64, f64)> = (0..len)
        .map(|k| binomial_tails(&ln_choose, m, prefix[k], suffix[k]))
        .collect();
    let mut out: Vec<f64> = (0..len)
        .map(|k| {
            let (cdf, sf) = tails[k];
            let (cdf_prev, sf_prev) = if k == 0 { (0.0, 1.0) } else { tails[k - 1] };
            let p = if cdf <= 0.5 { cdf - cdf_prev } else { sf_prev - sf };
            p.max(0.0)
        })
        .collect();
    // The two tails meet where the CDF crosses 1/2; absorb their roundoff.
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// Inverse-CDF sampler over a fixed weight vector.
#[derive(Clone, Debug)]
pub struct Cumulative {
    cumulative: Vec<f64>,
}

impl Cumulative {
    pub fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Self { cumulative }
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Mass of outcomes `0..end`.
    pub fn mass_before(&self, end: usize) -> f64 {
        if end == 0 {
            0.0
        } else {
            self.cumulative[end - 1]
        }
    }

    /// Draw an outcome from the sub-range `start..end` proportionally to weight.
    pub fn sample_range<R: Rng + ?Sized>(&self, rng: &mut R, start: usize, end: usize) -> usize {
        debug_assert!(start < end && end <= self.cumulative.len());
        let lo = self.mass_before(start);
        let hi = self.mass_before(end);
        let target = lo + rng.gen::<f64>() * (hi - lo);
        let k = self.cumulative[start..end].partition_point(|&c| c <= target);
        // Skip zero-weight outcomes produced by rounding at the boundary.
        let mut idx = start + k.min(end - start - 1);
        while idx > start && self.cumulative[idx] == self.mass_before(idx) {
            idx -= 1;
        }
        idx
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sample_range(rng, 0, self.cumulative.len())
    }
}
