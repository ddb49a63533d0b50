//! Conley–Zehnder index by crossing forms, and the Maslov index of loops.
//!
//! For a path `Psi` from the identity with `det(Psi(1) - I) != 0`,
//!
//! ```text
//! mu(Psi) = sig S(0) / 2 + sum over interior crossings of sig(S restricted to ker(Psi - I))
//! ```
//!
//! where crossings are the times with `det(Psi(t) - I) = 0`. On `SL(2)` that
//! determinant is `2 - tr Psi`, so crossings are zeros of a scalar function.
//! A crossing through the identity itself has a two-dimensional kernel; it
//! shows up as a double zero and contributes the full signature of `S`.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

use super::{Mat2, SymplecticPath};

/// Sub-samples per path segment when scanning for crossings.
const SCAN: usize = 32;
/// Distance from the identity below which a crossing is two-dimensional.
const IDENTITY_RADIUS: f64 = 1e-5;
/// Size of the endpoint-preserving perturbation used for the consistency re-runs.
const REGULARIZATION: f64 = 1e-8;

fn signature(s: &Mat2, t: f64) -> Result<i32> {
    let det = s.det();
    let scale = s.norm() * s.norm();
    if det.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::UnresolvableCrossing(t));
    }
    Ok(if det < 0.0 {
        0
    } else if s.trace() > 0.0 {
        2
    } else {
        -2
    })
}

struct Segments<'a> {
    path: &'a SymplecticPath,
    logs: Vec<Mat2>,
}

impl<'a> Segments<'a> {
    fn new(path: &'a SymplecticPath) -> Result<Self> {
        Ok(Segments {
            path,
            logs: path.segment_logs()?,
        })
    }

    fn segment(&self, t: f64) -> usize {
        let times = &self.path.times;
        match times.partition_point(|&x| x <= t) {
            0 => 0,
            i => (i - 1).min(times.len() - 2),
        }
    }

    fn value(&self, k: usize, t: f64) -> Mat2 {
        let times = &self.path.times;
        let s = (t - times[k]) / (times[k + 1] - times[k]);
        self.path.matrices[k].mul(&Mat2::exp(&self.logs[k].scale(s)))
    }

    fn at(&self, t: f64) -> (usize, Mat2) {
        let k = self.segment(t);
        (k, self.value(k, t))
    }

    fn d(&self, k: usize, t: f64) -> f64 {
        2.0 - self.value(k, t).trace()
    }

    /// Symmetric generator on segment `k`, up to the positive factor `1/dt`.
    fn generator(&self, k: usize) -> Mat2 {
        let psi = self.path.matrices[k];
        Mat2::generator_of(&psi.mul(&self.logs[k]).mul(&psi.inverse()))
    }
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Simple { t: f64, sign: i32 },
    Identity { t: f64, sig: i32 },
}

/// Twice the index, from one scan of the path.
fn crossing_sum(path: &SymplecticPath) -> Result<i32> {
    let seg = Segments::new(path)?;
    let mut twice = signature(&seg.generator(0), 0.0)?;

    // Scan grid in time, skipping t = 0 which is the start crossing.
    let mut grid: Vec<(usize, f64)> = Vec::new();
    for k in 0..path.len() - 1 {
        let (t0, t1) = (path.times[k], path.times[k + 1]);
        for j in 0..SCAN {
            grid.push((k, t0 + (t1 - t0) * j as f64 / SCAN as f64));
        }
    }
    grid.push((path.len() - 2, *path.times.last().unwrap()));
    let values: Vec<f64> = grid.iter().map(|&(k, t)| seg.d(k, t)).collect();

    let mut events = Vec::new();
    for i in 2..grid.len() {
        let (k, ta) = grid[i - 1];
        let tb = grid[i].1;
        let (da, db) = (values[i - 1], values[i]);
        if da * db < 0.0 {
            let (mut lo, mut hi) = (ta, tb);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if seg.d(k, mid) * da > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            let psi = seg.value(k, t);
            let s = seg.generator(k);
            if psi.sub(&Mat2::IDENTITY).norm() < IDENTITY_RADIUS {
                events.push(Event::Identity {
                    t,
                    sig: signature(&s, t)?,
                });
                continue;
            }
            let m = psi.sub(&Mat2::IDENTITY);
            let v1 = [m.b(), -m.a()];
            let v2 = [-m.d(), m.c()];
            let v = if v1[0].hypot(v1[1]) >= v2[0].hypot(v2[1]) {
                v1
            } else {
                v2
            };
            let sv = s.apply(v);
            let form = v[0] * sv[0] + v[1] * sv[1];
            if form.abs() <= 1e-12 * s.norm() * (v[0] * v[0] + v[1] * v[1]) {
                return Err(Error::UnresolvableCrossing(t));
            }
            events.push(Event::Simple {
                t,
                sign: form.signum() as i32,
            });
        }
    }

    // Double zeros without a sign change: passages through the identity, or
    // tangencies to the singular cycle, which contribute nothing.
    for i in 2..grid.len() - 1 {
        let (da, dm, db) = (values[i - 1].abs(), values[i].abs(), values[i + 1].abs());
        if !(dm <= da && dm <= db) {
            continue;
        }
        if values[i - 1] * values[i] < 0.0 || values[i] * values[i + 1] < 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (grid[i - 1].1, grid[i + 1].1);
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        let absd = |t: f64| (2.0 - seg.at(t).1.trace()).abs();
        for _ in 0..120 {
            let x1 = hi - gr * (hi - lo);
            let x2 = lo + gr * (hi - lo);
            if absd(x1) < absd(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        let t = 0.5 * (lo + hi);
        let (k, psi) = seg.at(t);
        if absd(t) < 1e-10 && psi.sub(&Mat2::IDENTITY).norm() < IDENTITY_RADIUS {
            events.push(Event::Identity {
                t,
                sig: signature(&seg.generator(k), t)?,
            });
        }
    }

    // A passage through the identity may also produce a pair of spurious
    // sign changes from round-off; keep one event per passage.
    let identity_times: Vec<f64> = events
        .iter()
        .filter_map(|e| match e {
            Event::Identity { t, .. } => Some(*t),
            _ => None,
        })
        .collect();
    let mut seen: Vec<f64> = Vec::new();
    for e in &events {
        match *e {
            Event::Simple { t, sign } => {
                if identity_times.iter().all(|&ti| (ti - t).abs() > 1e-4) {
                    twice += 2 * sign;
                }
            }
            Event::Identity { t, sig } => {
                if seen.iter().all(|&ts| (ts - t).abs() > 1e-4) {
                    seen.push(t);
                    twice += 2 * sig;
                }
            }
        }
    }
    Ok(twice)
}

fn regularized(path: &SymplecticPath, b: &Mat2) -> Result<SymplecticPath> {
    let jb = Mat2::J.mul(b);
    let matrices = path
        .times
        .iter()
        .zip(&path.matrices)
        .map(|(&t, m)| m.mul(&Mat2::exp(&jb.scale(REGULARIZATION * (PI * t).sin()))))
        .collect();
    SymplecticPath::new(path.times.clone(), matrices)
}

/// Conley–Zehnder index of a path starting at the identity with a
/// nondegenerate endpoint. The path is also scanned after two tiny
/// endpoint-preserving perturbations and all three results must agree.
pub fn cz_index(path: &SymplecticPath) -> Result<i32> {
    if path.start().sub(&Mat2::IDENTITY).norm() > 1e-12 {
        return Err(Error::InvalidParams(
            "path must start at the identity".into(),
        ));
    }
    let end = path.end().det_minus_identity();
    if end.abs() < 1e-10 {
        return Err(Error::DegenerateEndpoint(end));
    }
    let base = crossing_sum(path)?;
    for b in [Mat2::diag(1.0, -1.0), Mat2::new(0.3, 1.0, 1.0, -0.2)] {
        let other = crossing_sum(&regularized(path, &b)?)?;
        if other != base {
            return Err(Error::UnresolvableCrossing(f64::NAN));
        }
    }
    if base % 2 != 0 {
        return Err(Error::UnresolvableCrossing(0.0));
    }
    Ok(base / 2)
}

/// Rotation angle of the unitary part in the polar decomposition.
pub fn rotation_angle(m: &Mat2) -> f64 {
    (m.c() - m.b()).atan2(m.a() + m.d())
}

/// Maslov index of a closed loop: the winding number of the rotation part.
pub fn maslov_loop(path: &SymplecticPath) -> Result<i32> {
    let gap = path.end().sub(&path.start()).norm();
    if gap > 1e-9 {
        return Err(Error::NotALoop(gap));
    }
    let seg = Segments::new(path)?;
    let mut total = 0.0;
    for k in 0..path.len() - 1 {
        let (t0, t1) = (path.times[k], path.times[k + 1]);
        let mut pieces = 4;
        'refine: loop {
            let mut acc = 0.0;
            let mut prev = rotation_angle(&path.matrices[k]);
            for j in 1..=pieces {
                let t = t0 + (t1 - t0) * j as f64 / pieces as f64;
                let a = rotation_angle(&seg.value(k, t));
                let step = (a - prev + PI).rem_euclid(TAU) - PI;
                if step.abs() > PI / 4.0 && pieces < 1 << 16 {
                    pieces *= 4;
                    continue 'refine;
                }
                acc += step;
                prev = a;
            }
            total += acc;
            break;
        }
    }
    Ok((total / TAU).round() as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation_path(speed: f64) -> SymplecticPath {
        SymplecticPath::exponential(&Mat2::J.scale(speed), 64).unwrap()
    }

    #[test]
    fn axioms_on_rotations() {
        assert_eq!(cz_index(&rotation_path(PI)).unwrap(), 1);
        assert_eq!(cz_index(&rotation_path(-PI)).unwrap(), -1);
        assert_eq!(cz_index(&rotation_path(3.0 * PI)).unwrap(), 3);
        assert_eq!(cz_index(&rotation_path(-5.0 * PI)).unwrap(), -5);
        assert_eq!(cz_index(&rotation_path(1.5 * PI)).unwrap(), 1);
        assert_eq!(cz_index(&rotation_path(2.5 * PI)).unwrap(), 3);
    }

    #[test]
    fn hyperbolic_path_has_index_zero() {
        let p = SymplecticPath::exponential(&Mat2::diag(1.0, -1.0), 16).unwrap();
        assert_eq!(cz_index(&p).unwrap(), 0);
    }

    #[test]
    fn degenerate_endpoint_is_rejected() {
        assert!(matches!(
            cz_index(&rotation_path(2.0 * PI)),
            Err(Error::DegenerateEndpoint(_))
        ));
    }

    #[test]
    fn maslov_of_rotation_loops() {
        assert_eq!(maslov_loop(&rotation_path(TAU)).unwrap(), 1);
        assert_eq!(maslov_loop(&rotation_path(-2.0 * TAU)).unwrap(), -2);
        let constant = SymplecticPath::from_fn(|_| Mat2::IDENTITY, 4).unwrap();
        assert_eq!(maslov_loop(&constant).unwrap(), 0);
        assert!(matches!(
            maslov_loop(&rotation_path(PI)),
            Err(Error::NotALoop(_))
        ));
    }
}
