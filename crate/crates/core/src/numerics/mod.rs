pub mod ode;
pub mod quadrature;

use std::f64::consts::TAU;

/// Bisection for a root of `g` on `[a, b]` given a sign change.
/// Stops when the bracket is narrower than `x_tol`.
pub fn bisect<G: FnMut(f64) -> crate::Result<f64>>(
    mut g: G,
    mut a: f64,
    mut b: f64,
    x_tol: f64,
) -> crate::Result<f64> {
    let mut ga = g(a)?;
    let gb = g(b)?;
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() {
        return Err(crate::Error::Bracket(format!(
            "no sign change on [{a}, {b}]"
        )));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= x_tol || m == a || m == b {
            return Ok(m);
        }
        let gm = g(m)?;
        if gm == 0.0 {
            return Ok(m);
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Distance between two angles on the circle.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Greatest common divisor.
pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Least-squares line fit; returns (slope, intercept, rms residual).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_cos_root() {
        let r = bisect(|x| Ok(x.cos()), 0.0, 3.0, 1e-14).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
        assert!(bisect(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn circle_distance_wraps() {
        assert!((circle_distance(0.1, TAU - 0.1) - 0.2).abs() < 1e-15);
        assert!(circle_distance(3.0 * TAU, 0.0) < 1e-12);
    }

    #[test]
    fn line_fit_recovers_slope() {
        let xs: Vec<f64> = (1..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let (m, c, r) = linear_fit(&xs, &ys);
        assert!((m - 3.0).abs() < 1e-12 && (c + 1.0).abs() < 1e-12 && r < 1e-12);
    }
}
