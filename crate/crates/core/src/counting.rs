//! Totient sums, coprime-pair counts and log-log growth fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gcd, linear_fit};

/// Euler's totient for `0..=n` by a linear-time sieve.
pub fn totients(n: usize) -> Vec<u64> {
    let mut phi: Vec<u64> = (0..=n as u64).collect();
    for i in 2..=n {
        if phi[i] == i as u64 {
            let mut j = i;
            while j <= n {
                phi[j] -= phi[j] / i as u64;
                j += i;
            }
        }
    }
    phi
}

/// `sum_{n <= t} phi(n)`.
pub fn totient_sum(t: usize) -> u64 {
    totients(t).iter().skip(1).sum()
}

/// Möbius function on `0..=n`.
fn mobius(n: usize) -> Vec<i8> {
    let mut mu = vec![1i8; n + 1];
    let mut is_composite = vec![false; n + 1];
    if n >= 1 {
        mu[0] = 0;
    }
    for i in 2..=n {
        if !is_composite[i] {
            let mut j = i;
            while j <= n {
                if j > i {
                    is_composite[j] = true;
                }
                mu[j] = -mu[j];
                j += i;
            }
            let sq = i.saturating_mul(i);
            let mut j = sq;
            while j <= n {
                mu[j] = 0;
                j += sq;
            }
        }
    }
    mu
}

// Band endpoints times q are snapped to integers when they are within
// round-off of one, so that p/q = a is excluded exactly.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}

/// Number of integers `m` with `lo < m * d < hi`.
fn multiples_in_open(lo: f64, hi: f64, d: u64) -> i64 {
    let d = d as f64;
    let upper = snap(hi / d).ceil() as i64 - 1;
    let lower = snap(lo / d).floor() as i64;
    (upper - lower).max(0)
}

fn check_band(a: f64, b: f64) -> Result<()> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParams(format!("band ({a}, {b}) is empty")));
    }
    Ok(())
}

/// Number of coprime pairs `(p, q)` with `1 <= q <= t` and `p/q` in the open band `(a, b)`.
pub fn coprime_count(a: f64, b: f64, t: usize) -> Result<u64> {
    check_band(a, b)?;
    let mu = mobius(t);
    let mut divisors: Vec<Vec<u32>> = vec![Vec::new(); t + 1];
    for d in 1..=t {
        if mu[d] != 0 {
            let mut m = d;
            while m <= t {
                divisors[m].push(d as u32);
                m += d;
            }
        }
    }
    let mut total: i64 = 0;
    for q in 1..=t {
        let (lo, hi) = (snap(a * q as f64), snap(b * q as f64));
        for &d in &divisors[q] {
            total += mu[d as usize] as i64 * multiples_in_open(lo, hi, d as u64);
        }
    }
    Ok(total as u64)
}

/// Brute-force count by a double loop with `gcd`; the oracle for [`coprime_count`].
pub fn coprime_count_brute(a: f64, b: f64, t: usize) -> u64 {
    enumerate_coprime(a, b, t)
        .map(|v| v.len() as u64)
        .unwrap_or(0)
}

/// All coprime `(p, q)` with `p/q` in `(a, b)` and `1 <= q <= q_max`,
/// ordered by `q` and then by increasing `p`.
pub fn enumerate_coprime(a: f64, b: f64, q_max: usize) -> Result<Vec<(i64, u64)>> {
    check_band(a, b)?;
    let mut out = Vec::new();
    for q in 1..=q_max as u64 {
        let lo = snap(a * q as f64).floor() as i64;
        let hi = snap(b * q as f64).ceil() as i64;
        for p in lo..=hi {
            let inside = snap(p as f64 - a * q as f64) > 0.0 && snap(b * q as f64 - p as f64) > 0.0;
            if inside && gcd(p.unsigned_abs(), q) == 1 {
                out.push((p, q));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSeries {
    pub points: Vec<(f64, u64)>,
    pub window: (f64, f64),
    pub exponent: f64,
    pub residual: f64,
}

impl GrowthSeries {
    /// Fits the series over the top decade of `t` with nonzero counts.
    pub fn new(points: Vec<(f64, u64)>) -> Result<Self> {
        let window = top_decade(&points)?;
        Self::with_window(points, window)
    }

    pub fn with_window(points: Vec<(f64, u64)>, window: (f64, f64)) -> Result<Self> {
        let (exponent, residual) = exponent_fit(&points, window)?;
        Ok(GrowthSeries {
            points,
            window,
            exponent,
            residual,
        })
    }

    pub fn is_monotone(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "count"])?;
        for (t, c) in &self.points {
            w.serialize((t, c))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `[t_max / 10, t_max]` where `t_max` is the largest `t` with a nonzero count.
pub fn top_decade(points: &[(f64, u64)]) -> Result<(f64, f64)> {
    let t_max = points
        .iter()
        .filter(|(_, c)| *c > 0)
        .map(|(t, _)| *t)
        .fold(f64::NAN, f64::max);
    if !t_max.is_finite() {
        return Err(Error::InsufficientPoints(0));
    }
    Ok((t_max / 10.0, t_max))
}

/// Least-squares slope of `log count` against `log t` over the window;
/// returns `(slope, rms residual)`.
pub fn exponent_fit(points: &[(f64, u64)], window: (f64, f64)) -> Result<(f64, f64)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(t, c)| *c > 0 && *t >= window.0 && *t <= window.1 && *t > 0.0)
        .map(|(t, c)| (t.ln(), (*c as f64).ln()))
        .unzip();
    if xs.len() < 5 {
        return Err(Error::InsufficientPoints(xs.len()));
    }
    let (slope, _, rms) = linear_fit(&xs, &ys);
    Ok((slope, rms))
}

/// Coprime counts `P^t(a, b)` at each `t`.
pub fn coprime_series(a: f64, b: f64, ts: &[usize]) -> Result<Vec<(f64, u64)>> {
    ts.iter()
        .map(|&t| Ok((t as f64, coprime_count(a, b, t)?)))
        .collect()
}

/// Number of lengths `<= t` for every `t` in `t_values`.
pub fn geodesic_count(lengths: &[f64], t_values: &[f64]) -> Vec<(f64, u64)> {
    let mut sorted = lengths.to_vec();
    sorted.sort_by(f64::total_cmp);
    t_values
        .iter()
        .map(|&t| (t, sorted.partition_point(|&l| l <= t) as u64))
        .collect()
}
