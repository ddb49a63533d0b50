//! Area-preserving twist maps of the open annulus `R/LZ x (-1, 1)`.
//!
//! The maps are given by the update rule
//!
//! ```text
//! eta' = eta + epsilon g(x),    x' = x + f(eta')
//! ```
//!
//! with a decreasing twist `f` and a zero-mean perturbation
//! `g(x) = sin(2 pi m x / L)`. The Jacobian has determinant one for any `f`
//! and `g`. The lift acts on `x` in `R`, so a periodic point of type `(p, q)`
//! solves `F^q(z) = z + (p L, 0)`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::{enumerate_coprime, GrowthSeries};
use crate::error::{Error, Result};
use crate::numerics::{bisect, gcd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Twist {
    /// `f(eta) = -L tan(pi eta / 2)`, which realizes every rotation number.
    Tan,
    /// `f(eta) = -L eta`, with rotation numbers in `(-1, 1)`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusMapSpec {
    #[serde(rename = "L")]
    pub length: f64,
    pub twist: Twist,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_mode")]
    pub mode: u32,
}

fn default_mode() -> u32 {
    1
}

impl AnnulusMapSpec {
    pub fn new(length: f64, twist: Twist, epsilon: f64) -> Result<Self> {
        let spec = AnnulusMapSpec {
            length,
            twist,
            epsilon,
            mode: 1,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "L = {} must be positive",
                self.length
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "epsilon = {} must be nonnegative",
                self.epsilon
            )));
        }
        if self.mode == 0 {
            return Err(Error::InvalidParams(
                "perturbation mode must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Twist `f(eta)` and its derivative.
    pub fn f_df(&self, eta: f64) -> (f64, f64) {
        let l = self.length;
        match self.twist {
            Twist::Tan => {
                let a = PI * eta / 2.0;
                let c = a.cos();
                (-l * a.tan(), -l * PI / (2.0 * c * c))
            }
            Twist::Linear => (-l * eta, -l),
        }
    }

    pub fn f(&self, eta: f64) -> f64 {
        self.f_df(eta).0
    }

    /// Perturbation `g(x)` and its derivative.
    pub fn g_dg(&self, x: f64) -> (f64, f64) {
        let k = 2.0 * PI * self.mode as f64 / self.length;
        let (s, c) = (k * x).sin_cos();
        (s, k * c)
    }

    /// One step of the lift.
    pub fn step(&self, z: (f64, f64)) -> Result<(f64, f64)> {
        let eta = z.1 + self.epsilon * self.g_dg(z.0).0;
        if !(eta.abs() < 1.0) {
            return Err(Error::AnnulusEscape(eta));
        }
        Ok((z.0 + self.f(eta), eta))
    }

    /// One step together with its Jacobian in `(x, eta)` coordinates.
    pub fn step_jacobian(&self, z: (f64, f64)) -> Result<((f64, f64), [[f64; 2]; 2])> {
        let (g, dg) = self.g_dg(z.0);
        let eta = z.1 + self.epsilon * g;
        if !(eta.abs() < 1.0) {
            return Err(Error::AnnulusEscape(eta));
        }
        let (f, df) = self.f_df(eta);
        let e = self.epsilon * dg;
        Ok(((z.0 + f, eta), [[1.0 + df * e, df], [e, 1.0]]))
    }

    /// Rotation number of the integrable twist at `eta`.
    pub fn integrable_rotation(&self, eta: f64) -> f64 {
        self.f(eta) / self.length
    }

    /// The `eta` with `f(eta) = rho L`, by bisection on the decreasing twist.
    pub fn solve_twist(&self, rho: f64) -> Result<f64> {
        let edge = 1.0 - 1e-12;
        let g = |eta: f64| self.integrable_rotation(eta) - rho;
        let fallible = |eta: f64| Ok(g(eta));
        if g(-edge) < 0.0 || g(edge) > 0.0 {
            return Err(Error::Bracket(format!(
                "rotation number {rho} outside the twist range"
            )));
        }
        bisect(fallible, -edge, edge, 1e-15)
    }
}

/// `n` iterates of the lift starting at `z`, including `z` itself.
pub fn iterate_lift(map: &AnnulusMapSpec, z: (f64, f64), n: usize) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(z);
    let mut cur = z;
    for _ in 0..n {
        cur = map.step(cur)?;
        out.push(cur);
    }
    Ok(out)
}

/// Largest deviation of the finite-difference Jacobian determinant from one
/// over the given points.
///
/// Fourth-order central differences; the `eta` step shrinks with the distance
/// to the boundary, where the tan twist steepens.
pub fn area_defect(map: &AnnulusMapSpec, points: &[(f64, f64)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &(x, eta) in points {
        let image = map.step((x, eta))?;
        let he = 1e-3 * (1.0 - eta.abs().max(image.1.abs()));
        // Moving x shifts eta' by up to 2 pi m epsilon / L times the step.
        let hx = he / (1.0 + TAU * map.mode as f64 * map.epsilon.abs() / map.length);
        let diff = |dx: f64, de: f64| -> Result<(f64, f64)> {
            let at = |k: f64| map.step((x + k * dx, eta + k * de));
            let (p1, m1, p2, m2) = (at(1.0)?, at(-1.0)?, at(2.0)?, at(-2.0)?);
            let h = dx + de;
            let d = |a: f64, b: f64, c: f64, e: f64| (8.0 * (a - b) - (c - e)) / (12.0 * h);
            Ok((d(p1.0, m1.0, p2.0, m2.0), d(p1.1, m1.1, p2.1, m2.1)))
        };
        let (dxx, dxe) = diff(hx, 0.0)?;
        let (dex, dee) = diff(0.0, he)?;
        worst = worst.max((dxx * dee - dex * dxe - 1.0).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationEstimate {
    pub value: f64,
    /// Difference between the averages over the two halves of the orbit.
    pub error: f64,
    pub converged: bool,
}

/// Error bar above which a rotation number estimate is flagged.
pub const ROTATION_TOL: f64 = 1e-2;

pub fn rotation_number(map: &AnnulusMapSpec, z: (f64, f64), n: usize) -> Result<RotationEstimate> {
    if n < 2 {
        return Err(Error::InvalidParams("need at least two iterates".into()));
    }
    let orbit = iterate_lift(map, z, n)?;
    let l = map.length;
    let half = n / 2;
    let value = (orbit[n].0 - orbit[0].0) / (n as f64 * l);
    let first = (orbit[half].0 - orbit[0].0) / (half as f64 * l);
    let second = (orbit[n].0 - orbit[half].0) / ((n - half) as f64 * l);
    let error = (first - second).abs();
    Ok(RotationEstimate {
        value,
        error,
        converged: error <= ROTATION_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub x: f64,
    pub eta: f64,
    pub p: i64,
    pub q: u64,
    pub residual: f64,
    /// The orbit is one member of a circle of periodic points.
    pub family: bool,
}

/// Newton residual required of a returned orbit.
pub const NEWTON_TOL: f64 = 1e-10;
/// Distance under which two orbit points are identified.
pub const SAME_ORBIT_TOL: f64 = 1e-7;
/// Number of distinct orbits from one search above which the solutions are
/// read as a sampled circle family rather than isolated orbits.
pub const FAMILY_MIN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedGrid {
    pub nx: usize,
    pub neta: usize,
    /// Half-width of the `eta` seed window around the integrable solution,
    /// in units of `epsilon`.
    pub width: f64,
}

impl Default for SeedGrid {
    fn default() -> Self {
        SeedGrid {
            nx: 64,
            neta: 64,
            width: 2.0,
        }
    }
}

fn residual_vec(
    map: &AnnulusMapSpec,
    z: (f64, f64),
    p: i64,
    q: u64,
) -> Result<([f64; 2], [[f64; 2]; 2])> {
    let mut cur = z;
    let mut jac = [[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..q {
        let (next, j) = map.step_jacobian(cur)?;
        jac = [
            [
                j[0][0] * jac[0][0] + j[0][1] * jac[1][0],
                j[0][0] * jac[0][1] + j[0][1] * jac[1][1],
            ],
            [
                j[1][0] * jac[0][0] + j[1][1] * jac[1][0],
                j[1][0] * jac[0][1] + j[1][1] * jac[1][1],
            ],
        ];
        cur = next;
    }
    let r = [cur.0 - z.0 - p as f64 * map.length, cur.1 - z.1];
    Ok((r, jac))
}

fn norm2(r: [f64; 2]) -> f64 {
    r[0].hypot(r[1])
}

/// `|F^q(z) - z - (p L, 0)|`.
pub fn periodic_residual(map: &AnnulusMapSpec, z: (f64, f64), p: i64, q: u64) -> Result<f64> {
    Ok(norm2(residual_vec(map, z, p, q)?.0))
}

fn newton(map: &AnnulusMapSpec, mut z: (f64, f64), p: i64, q: u64) -> Option<((f64, f64), f64)> {
    let max_step = [0.1 * map.length, 0.05];
    let (mut r, mut jac) = residual_vec(map, z, p, q).ok()?;
    for it in 0..50 {
        let res = norm2(r);
        if res < 0.1 * NEWTON_TOL {
            break;
        }
        // Seeds that have not reached the quadratic regime by now sit in a
        // chaotic zone where the basins are too small to hit.
        if it >= 25 && res > 1e-4 {
            return None;
        }
        let a = [[jac[0][0] - 1.0, jac[0][1]], [jac[1][0], jac[1][1] - 1.0]];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let mut dz = [
            (-r[0] * a[1][1] + r[1] * a[0][1]) / det,
            (r[0] * a[1][0] - r[1] * a[0][0]) / det,
        ];
        let scale = (dz[0].abs() / max_step[0])
            .max(dz[1].abs() / max_step[1])
            .max(1.0);
        dz = [dz[0] / scale, dz[1] / scale];
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial = (z.0 + lambda * dz[0], z.1 + lambda * dz[1]);
            if let Ok((rt, jt)) = residual_vec(map, trial, p, q) {
                if norm2(rt) < res {
                    z = trial;
                    r = rt;
                    jac = jt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let res = norm2(r);
    (res < NEWTON_TOL).then_some((z, res))
}

fn orbit_points(map: &AnnulusMapSpec, z: (f64, f64), q: u64) -> Result<Vec<(f64, f64)>> {
    iterate_lift(map, z, q as usize - 1)
}

fn close(map: &AnnulusMapSpec, a: (f64, f64), b: (f64, f64)) -> bool {
    let dx = (a.0 - b.0).rem_euclid(map.length);
    dx.min(map.length - dx) + (a.1 - b.1).abs() < SAME_ORBIT_TOL
}

/// Whether `z` returns to itself (mod `L`) after a proper divisor of `q`.
fn has_shorter_period(map: &AnnulusMapSpec, z: (f64, f64), q: u64) -> Result<bool> {
    let orbit = iterate_lift(map, z, q as usize)?;
    Ok((1..q)
        .filter(|d| q % d == 0)
        .any(|d| close(map, orbit[d as usize], z)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSearch {
    pub p: i64,
    pub q: u64,
    pub orbits: Vec<PeriodicOrbit>,
    pub family: bool,
    /// Seeds from which Newton converged.
    pub converged_seeds: usize,
}

impl PeriodicSearch {
    /// Contribution to the orbit count: one for a family, else the number of
    /// isolated orbits.
    pub fn count(&self) -> usize {
        if self.family {
            self.orbits.len().min(1)
        } else {
            self.orbits.len()
        }
    }
}

/// Periodic orbits of type `(p, q)`.
///
/// The integrable map is solved by bisection on the twist and returns a
/// single representative with the family flag. Otherwise damped Newton runs
/// from a grid of seeds around the integrable circle and the solutions are
/// reduced to one point per orbit.
pub fn find_periodic(
    map: &AnnulusMapSpec,
    p: i64,
    q: u64,
    seeds: SeedGrid,
) -> Result<PeriodicSearch> {
    map.check()?;
    if q == 0 || gcd(p.unsigned_abs(), q) != 1 {
        return Err(Error::InvalidParams(format!(
            "(p, q) = ({p}, {q}) is not a coprime pair"
        )));
    }
    let rho = p as f64 / q as f64;
    let eta0 = map.solve_twist(rho)?;
    if map.epsilon == 0.0 {
        let residual = periodic_residual(map, (0.0, eta0), p, q)?;
        let orbits = if residual < NEWTON_TOL {
            vec![PeriodicOrbit {
                x: 0.0,
                eta: eta0,
                p,
                q,
                residual,
                family: true,
            }]
        } else {
            Vec::new()
        };
        return Ok(PeriodicSearch {
            p,
            q,
            orbits,
            family: true,
            converged_seeds: 1,
        });
    }
    let nx = seeds.nx.max(1);
    let neta = seeds.neta.max(1);
    let starts: Vec<(f64, f64)> = (0..nx)
        .flat_map(|i| {
            (0..neta).map(move |j| {
                let x = map.length * (i as f64 + 0.5) / nx as f64;
                let off = if neta == 1 {
                    0.0
                } else {
                    2.0 * j as f64 / (neta - 1) as f64 - 1.0
                };
                (x, off)
            })
        })
        .map(|(x, off)| {
            (
                x,
                (eta0 + off * seeds.width * map.epsilon).clamp(-0.999, 0.999),
            )
        })
        .collect();
    let found: Vec<((f64, f64), f64)> = starts
        .par_iter()
        .filter_map(|&z| newton(map, z, p, q))
        .collect();
    let converged_seeds = found.len();
    let mut reps: Vec<(Vec<(f64, f64)>, PeriodicOrbit)> = Vec::new();
    for (z, residual) in found {
        if reps
            .iter()
            .any(|(pts, _)| pts.iter().any(|&w| close(map, w, z)))
        {
            continue;
        }
        if has_shorter_period(map, z, q)? {
            continue;
        }
        let x = z.0.rem_euclid(map.length);
        reps.push((
            orbit_points(map, z, q)?,
            PeriodicOrbit {
                x,
                eta: z.1,
                p,
                q,
                residual,
                family: false,
            },
        ));
    }
    let family = reps.len() >= FAMILY_MIN;
    let mut orbits: Vec<PeriodicOrbit> = reps
        .into_iter()
        .map(|(_, mut o)| {
            o.family = family;
            o
        })
        .collect();
    orbits.sort_by(|a, b| a.eta.total_cmp(&b.eta).then(a.x.total_cmp(&b.x)));
    Ok(PeriodicSearch {
        p,
        q,
        orbits,
        family,
        converged_seeds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitCount {
    pub band: (f64, f64),
    pub t_max: usize,
    pub searches: Vec<PeriodicSearch>,
    /// `(p, q)` pairs for which nothing was found.
    pub missing: Vec<(i64, u64)>,
    pub series: GrowthSeries,
}

impl OrbitCount {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p", "q", "x", "eta", "residual", "family_flag"])?;
        for s in &self.searches {
            for o in &s.orbits {
                w.serialize((o.p, o.q, o.x, o.eta, o.residual, o.family))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `P^t` for integer `t <= t_max`: orbits of prime period at most `t` with
/// rotation number in `(a, b)`, a circle family counting once.
pub fn count_orbits(
    map: &AnnulusMapSpec,
    band: (f64, f64),
    t_max: usize,
    seeds: SeedGrid,
    window: Option<(f64, f64)>,
) -> Result<OrbitCount> {
    let edge = 1.0 - 1e-9;
    let (lo, hi) = (
        map.integrable_rotation(edge),
        map.integrable_rotation(-edge),
    );
    if band.0 < lo || band.1 > hi {
        return Err(Error::InvalidParams(format!(
            "band ({}, {}) exceeds the twist range ({lo}, {hi})",
            band.0, band.1
        )));
    }
    let pairs = enumerate_coprime(band.0, band.1, t_max)?;
    let searches: Vec<PeriodicSearch> = pairs
        .par_iter()
        .map(|&(p, q)| find_periodic(map, p, q, seeds))
        .collect::<Result<_>>()?;
    let missing = searches
        .iter()
        .filter(|s| s.orbits.is_empty())
        .map(|s| (s.p, s.q))
        .collect();
    let mut by_q = vec![0u64; t_max + 1];
    for s in &searches {
        by_q[s.q as usize] += s.count() as u64;
    }
    let mut points = Vec::with_capacity(t_max);
    let mut acc = 0;
    for (t, c) in by_q.iter().enumerate().skip(1) {
        acc += c;
        points.push((t as f64, acc));
    }
    let series = match window {
        Some(w) => GrowthSeries::with_window(points, w)?,
        None => GrowthSeries::new(points)?,
    };
    Ok(OrbitCount {
        band,
        t_max,
        searches,
        missing,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrable_rotation_numbers() {
        let map = AnnulusMapSpec::new(1.0, Twist::Tan, 0.0).unwrap();
        let rot = rotation_number(&map, (0.0, -0.5), 1000).unwrap();
        assert!((rot.value - 1.0).abs() < 1e-12 && rot.converged);
        let eta = map.solve_twist(0.4).unwrap();
        assert!((map.f(eta) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn area_preserved() {
        let map = AnnulusMapSpec::new(1.0, Twist::Tan, 0.05).unwrap();
        let pts: Vec<_> = (0..20)
            .map(|i| (i as f64 * 0.07, -0.9 + i as f64 * 0.09))
            .collect();
        assert!(area_defect(&map, &pts).unwrap() < 1e-8);
    }

    #[test]
    fn poincare_birkhoff_pair() {
        let map = AnnulusMapSpec::new(1.0, Twist::Tan, 0.05).unwrap();
        let s = find_periodic(
            &map,
            1,
            1,
            SeedGrid {
                nx: 16,
                neta: 5,
                width: 2.0,
            },
        )
        .unwrap();
        assert!(!s.family);
        assert_eq!(s.orbits.len(), 2);
        for o in &s.orbits {
            assert!(o.residual < NEWTON_TOL);
        }
    }

    #[test]
    fn integrable_count_is_coprime_count() {
        let map = AnnulusMapSpec::new(1.0, Twist::Tan, 0.0).unwrap();
        let c = count_orbits(&map, (0.0, 1.0), 10, SeedGrid::default(), None).unwrap();
        assert_eq!(c.series.points.last().unwrap().1, 31);
    }
}
