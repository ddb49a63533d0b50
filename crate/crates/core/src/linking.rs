//! The double cover of the unit tangent bundle by `S^3`, lifted model curves
//! and numerical linking numbers.
//!
//! A point of `S^3` is a pair `(z1, z2)` with `|z1|^2 + |z2|^2 = 1`. Writing
//! `z1 = r1 e^{i t1}`, `z2 = r2 e^{i t2}`, the covering sends it to Euler
//! angles `(phi, theta, nu) = (t1 + t2, t1 - t2, 2 arccos r1)`.
//!
//! Linking numbers are computed after a stereographic projection to `R^3`,
//! by summing the exact solid angles of all pairs of polygon segments. For
//! closed polygons that sum is an integer up to round-off, so the residual is
//! a check on the sampling rather than on quadrature error.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub phi: f64,
    pub theta: f64,
    pub nu: f64,
}

/// Unit-norm tolerance for curve samples.
pub const NORM_TOL: f64 = 1e-12;
/// Distance to a core circle below which the angles are not defined.
pub const CORE_GUARD: f64 = 1e-9;
/// Default number of samples per curve.
pub const DEFAULT_SAMPLES: usize = 2048;
/// Largest accepted distance of the Gauss sum from an integer.
pub const MAX_RESIDUAL: f64 = 0.1;

pub fn covering_map(z: (Complex64, Complex64)) -> Result<EulerAngles> {
    let (r1, r2) = (z.0.norm(), z.1.norm());
    if r1 < CORE_GUARD || r2 < CORE_GUARD {
        return Err(Error::InvalidParams(format!(
            "point ({r1}, {r2}) lies on a core circle"
        )));
    }
    let (t1, t2) = (z.0.arg(), z.1.arg());
    Ok(EulerAngles {
        phi: (t1 + t2).rem_euclid(TAU),
        theta: (t1 - t2).rem_euclid(TAU),
        nu: 2.0 * r1.min(1.0).acos(),
    })
}

/// The two points over `angles`, with opposite signs.
pub fn preimages(angles: EulerAngles) -> [(Complex64, Complex64); 2] {
    let z1 = Complex64::from_polar((angles.nu / 2.0).cos(), (angles.phi + angles.theta) / 2.0);
    let z2 = Complex64::from_polar((angles.nu / 2.0).sin(), (angles.phi - angles.theta) / 2.0);
    [(z1, z2), (-z1, -z2)]
}

/// A closed curve in `S^3`. The last sample connects back to the first; the
/// first point is not repeated.
#[derive(Debug, Clone, PartialEq)]
pub struct S3Curve {
    pub samples: Vec<(Complex64, Complex64)>,
}

impl S3Curve {
    pub fn new(samples: Vec<(Complex64, Complex64)>) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::InvalidParams(
                "a closed curve needs at least three samples".into(),
            ));
        }
        for (i, (a, b)) in samples.iter().enumerate() {
            let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
            if (n - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidParams(format!("sample {i} has norm {n}")));
            }
        }
        Ok(S3Curve { samples })
    }

    /// Samples `f` at `n` points of `[t0, t1)`; `f(t1)` must equal `f(t0)`.
    pub fn from_fn<F: Fn(f64) -> (Complex64, Complex64)>(
        f: F,
        t0: f64,
        t1: f64,
        n: usize,
    ) -> Result<Self> {
        let samples: Vec<_> = (0..n)
            .map(|i| f(t0 + (t1 - t0) * i as f64 / n as f64))
            .collect();
        let gap = dist(&to_r4(f(t1)), &to_r4(samples[0]));
        if gap > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "curve does not close (gap {gap:.3e})"
            )));
        }
        Self::new(samples)
    }

    /// Torus curve `t -> (c1 e^{i a t}, c2 e^{i b t})`, `t` in `[0, 2 pi]`.
    pub fn torus(c1: f64, a: i64, b: i64, n: usize) -> Result<Self> {
        let c2 = (1.0 - c1 * c1).max(0.0).sqrt();
        Self::from_fn(
            |t| {
                (
                    Complex64::from_polar(c1, a as f64 * t),
                    Complex64::from_polar(c2, b as f64 * t),
                )
            },
            0.0,
            TAU,
            n,
        )
    }

    pub fn reversed(&self) -> S3Curve {
        let mut samples = self.samples.clone();
        samples.reverse();
        S3Curve { samples }
    }

    pub fn points(&self) -> Vec<[f64; 4]> {
        self.samples.iter().copied().map(to_r4).collect()
    }

    pub fn from_points(points: &[[f64; 4]]) -> Result<Self> {
        Self::new(
            points
                .iter()
                .map(|p| (Complex64::new(p[0], p[1]), Complex64::new(p[2], p[3])))
                .collect(),
        )
    }

    /// Longest chord between consecutive samples.
    pub fn max_segment(&self) -> f64 {
        let p = self.points();
        (0..p.len())
            .map(|i| dist(&p[i], &p[(i + 1) % p.len()]))
            .fold(0.0, f64::max)
    }
}

fn to_r4(z: (Complex64, Complex64)) -> [f64; 4] {
    [z.0.re, z.0.im, z.1.re, z.1.im]
}

fn dist(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Lift of a `(p, q)`-satellite in the model coordinates:
/// `t -> (c1 e^{i p t/2}, c2 e^{i (p - 2q) t/2})`. For odd `p` the curve only
/// closes after `t = 4 pi`.
pub fn lift_satellite_model(p: i64, q: i64, c1: f64, n: usize) -> Result<S3Curve> {
    if !(c1 > 0.0 && c1 < 1.0) {
        return Err(Error::InvalidParams(format!(
            "c1 = {c1} must lie in (0, 1)"
        )));
    }
    let c2 = (1.0 - c1 * c1).sqrt();
    let t_end = if p % 2 == 0 { TAU } else { 2.0 * TAU };
    let (a, b) = (p as f64 / 2.0, (p - 2 * q) as f64 / 2.0);
    S3Curve::from_fn(
        |t| {
            (
                Complex64::from_polar(c1, a * t),
                Complex64::from_polar(c2, b * t),
            )
        },
        0.0,
        t_end,
        n,
    )
}

/// The core circles `(e^{it}, 0)` and `(0, e^{it})`.
pub fn core_circles(n: usize) -> Result<(S3Curve, S3Curve)> {
    let one = |t: f64| Complex64::from_polar(1.0, t);
    let zero = Complex64::new(0.0, 0.0);
    Ok((
        S3Curve::from_fn(|t| (one(t), zero), 0.0, TAU, n)?,
        S3Curve::from_fn(|t| (zero, one(t)), 0.0, TAU, n)?,
    ))
}

fn quat_mul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

/// Candidate projection poles: the eight axis points and a fixed
/// low-discrepancy set, so the choice is deterministic.
fn pole_candidates() -> Vec<[f64; 4]> {
    let mut out = Vec::new();
    for i in 0..4 {
        for s in [1.0, -1.0] {
            let mut e = [0.0; 4];
            e[i] = s;
            out.push(e);
        }
    }
    let golden = [
        0.618_033_988_749_894_9,
        0.754_877_666_246_692_7,
        0.569_840_290_998_053_3,
    ];
    for k in 1..=120 {
        let u: Vec<f64> = golden.iter().map(|g| (k as f64 * g).fract()).collect();
        let (a, b) = (u[0].sqrt(), (1.0 - u[0]).sqrt());
        out.push([
            a * (TAU * u[1]).cos(),
            a * (TAU * u[1]).sin(),
            b * (TAU * u[2]).cos(),
            b * (TAU * u[2]).sin(),
        ]);
    }
    out
}

/// Stereographic images of both curves, projected from the candidate pole
/// farthest from them. The pole is first rotated to `(0, 0, 0, 1)` by a
/// left quaternion multiplication, which preserves orientation.
fn project(a: &[[f64; 4]], b: &[[f64; 4]]) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let clearance = |u: &[f64; 4]| {
        a.iter()
            .chain(b)
            .map(|x| dist(u, x))
            .fold(f64::INFINITY, f64::min)
    };
    let pole = pole_candidates()
        .into_iter()
        .map(|u| (clearance(&u), u))
        .fold((f64::NEG_INFINITY, [0.0; 4]), |best, c| {
            if c.0 > best.0 {
                c
            } else {
                best
            }
        });
    let u = pole.1;
    let rot = quat_mul(&[0.0, 0.0, 0.0, 1.0], &[u[0], -u[1], -u[2], -u[3]]);
    let proj = |x: &[f64; 4]| {
        let y = quat_mul(&rot, x);
        let k = 1.0 / (1.0 - y[3]);
        [y[0] * k, y[1] * k, y[2] * k]
    };
    (a.iter().map(proj).collect(), b.iter().map(proj).collect())
}

fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn unit(a: [f64; 3]) -> [f64; 3] {
    let n = dot(&a, &a).sqrt();
    if n == 0.0 {
        a
    } else {
        [a[0] / n, a[1] / n, a[2] / n]
    }
}

/// Signed solid angle subtended by segment `p1 p2` as seen sweeping along
/// segment `q1 q2`, over `4 pi`.
fn segment_pair(p1: &[f64; 3], p2: &[f64; 3], q1: &[f64; 3], q2: &[f64; 3]) -> f64 {
    let (r13, r14, r23, r24) = (sub3(q1, p1), sub3(q2, p1), sub3(q1, p2), sub3(q2, p2));
    let n1 = unit(cross(&r13, &r14));
    let n2 = unit(cross(&r14, &r24));
    let n3 = unit(cross(&r24, &r23));
    let n4 = unit(cross(&r23, &r13));
    let asin = |x: f64| x.clamp(-1.0, 1.0).asin();
    let omega =
        asin(dot(&n1, &n2)) + asin(dot(&n2, &n3)) + asin(dot(&n3, &n4)) + asin(dot(&n4, &n1));
    let orient = dot(&cross(&sub3(q2, q1), &sub3(p2, p1)), &r13);
    omega.copysign(orient) / (4.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linking {
    pub value: i64,
    /// Distance of the Gauss sum from `value`.
    pub residual: f64,
    pub min_distance: f64,
}

/// Linking number of two disjoint closed curves.
pub fn linking_number(a: &S3Curve, b: &S3Curve) -> Result<Linking> {
    let (pa, pb) = (a.points(), b.points());
    let min_distance = pa
        .par_iter()
        .map(|x| pb.iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min);
    // Polygons can pass through each other when the curves are closer than
    // the sample spacing.
    if min_distance < a.max_segment().max(b.max_segment()).max(1e-9) {
        return Err(Error::CurvesTooClose(min_distance));
    }
    let (xa, xb) = project(&pa, &pb);
    let (na, nb) = (xa.len(), xb.len());
    // Row sums in parallel, then a fixed-order total so the result does not
    // depend on scheduling.
    let rows: Vec<f64> = (0..na)
        .into_par_iter()
        .map(|i| {
            let (p1, p2) = (&xa[i], &xa[(i + 1) % na]);
            (0..nb)
                .map(|j| segment_pair(p1, p2, &xb[j], &xb[(j + 1) % nb]))
                .sum()
        })
        .collect();
    let total: f64 = rows.iter().sum();
    let value = total.round();
    let residual = (total - value).abs();
    if residual > MAX_RESIDUAL {
        return Err(Error::LinkingResidual(residual));
    }
    Ok(Linking {
        value: value as i64,
        residual,
        min_distance,
    })
}

/// Orientation sign of the numerical method: the linking number of the
/// core circles `(0, e^{it})` and `(e^{it}, 0)`.
pub fn orientation_sign(n: usize) -> Result<i64> {
    let (first, second) = core_circles(n)?;
    Ok(linking_number(&second, &first)?.value)
}

/// Lifts of the four model curves `E+, D+, E-, D-`.
///
/// `E+` and `D+` are the latitude circles on either side of the waist
/// traversed eastward; their Euler-angle lifts are `(1, 1)` torus curves.
/// `E-` and `D-` are the same circles traversed westward and lift to
/// `(-1, -1)` curves. Each sits on its own torus so the four are disjoint.
pub fn model_link(n: usize) -> Result<[S3Curve; 4]> {
    Ok([
        S3Curve::torus(0.55, 1, 1, n)?,
        S3Curve::torus(0.65, 1, 1, n)?,
        S3Curve::torus(0.6, -1, -1, n)?,
        S3Curve::torus(0.7, -1, -1, n)?,
    ])
}

pub const MODEL_NAMES: [&str; 4] = ["E+", "D+", "E-", "D-"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairLinking {
    pub a: String,
    pub b: String,
    pub computed: i64,
    /// Table value before the orientation sign is applied.
    pub table: i64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTableReport {
    pub sigma: i64,
    pub samples: usize,
    pub pairs: Vec<PairLinking>,
    /// Every pair agrees at both `samples` and twice as many.
    pub refinement_stable: bool,
    pub passed: bool,
}

fn table_value(i: usize, j: usize) -> i64 {
    // Same side of the waist links +1, opposite sides -1.
    if (i < 2) == (j < 2) {
        1
    } else {
        -1
    }
}

/// Recomputes the six pairwise linking numbers of the model link and
/// compares them with the table, up to the orientation sign.
pub fn verify_link_table(n: usize) -> Result<LinkTableReport> {
    let sigma = orientation_sign(n)?;
    let compute = |n: usize| -> Result<Vec<(usize, usize, Linking)>> {
        let curves = model_link(n)?;
        let mut out = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                out.push((i, j, linking_number(&curves[i], &curves[j])?));
            }
        }
        Ok(out)
    };
    let coarse = compute(n)?;
    let fine = compute(2 * n)?;
    let refinement_stable = coarse
        .iter()
        .zip(&fine)
        .all(|(c, f)| c.2.value == f.2.value);
    let pairs: Vec<PairLinking> = coarse
        .iter()
        .map(|&(i, j, l)| PairLinking {
            a: MODEL_NAMES[i].into(),
            b: MODEL_NAMES[j].into(),
            computed: l.value,
            table: table_value(i, j),
            residual: l.residual,
        })
        .collect();
    let passed = refinement_stable && pairs.iter().all(|p| p.computed == sigma * p.table);
    Ok(LinkTableReport {
        sigma,
        samples: n,
        pairs,
        refinement_stable,
        passed,
    })
}

/// Linking numbers of a lifted `(p, q)`-satellite with the two core circles,
/// `((z, 0) core, (0, z) core)`.
pub fn satellite_core_linking(p: i64, q: i64, c1: f64, n: usize) -> Result<(Linking, Linking)> {
    let sat = lift_satellite_model(p, q, c1, n)?;
    let (first, second) = core_circles(n)?;
    Ok((
        linking_number(&sat, &first)?,
        linking_number(&sat, &second)?,
    ))
}

/// Predicted linking numbers with the cores, `(sigma (p - 2q), sigma p)`,
/// halved for even `p` where the lift closes after one turn.
pub fn satellite_core_prediction(p: i64, q: i64, sigma: i64) -> (i64, i64) {
    let div = if p % 2 == 0 { 2 } else { 1 };
    (sigma * (p - 2 * q) / div, sigma * p / div)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_round_trip() {
        let s = (0.5f64.sqrt(), 0.5f64.sqrt());
        let e = covering_map((Complex64::new(s.0, 0.0), Complex64::new(s.1, 0.0))).unwrap();
        assert!(e.phi.abs() < 1e-15 && e.theta.abs() < 1e-15 && (e.nu - PI / 2.0).abs() < 1e-15);
        let angles = EulerAngles {
            phi: 1.0,
            theta: 5.0,
            nu: 2.0,
        };
        for z in preimages(angles) {
            let back = covering_map(z).unwrap();
            assert!((back.phi - 1.0).abs() < 1e-12 && (back.theta - 5.0).abs() < 1e-12);
            assert!((back.nu - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hopf_link_and_reversal() {
        let sigma = orientation_sign(256).unwrap();
        assert_eq!(sigma.abs(), 1);
        let (a, b) = core_circles(256).unwrap();
        assert_eq!(linking_number(&b.reversed(), &a).unwrap().value, -sigma);
        assert_eq!(linking_number(&a, &b).unwrap().value, sigma);
    }

    #[test]
    fn satellite_three_one() {
        let sigma = orientation_sign(512).unwrap();
        let (first, second) = satellite_core_linking(3, 1, 0.6, 1024).unwrap();
        assert_eq!(
            (first.value, second.value),
            satellite_core_prediction(3, 1, sigma)
        );
    }

    #[test]
    fn even_satellite_closes_in_one_turn() {
        assert!(lift_satellite_model(2, 1, 0.5, 64).is_ok());
        let c = lift_satellite_model(4, 1, 0.5, 64).unwrap();
        assert!(c
            .samples
            .iter()
            .all(|(a, b)| (a.norm_sqr() + b.norm_sqr() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn too_close_is_rejected() {
        let a = S3Curve::torus(0.6, 1, 1, 64).unwrap();
        let b = S3Curve::torus(0.6001, -1, 1, 64).unwrap();
        assert!(matches!(
            linking_number(&a, &b),
            Err(Error::CurvesTooClose(_))
        ));
    }

    #[test]
    fn model_table_at_low_resolution() {
        let report = verify_link_table(256).unwrap();
        assert!(report.passed, "{report:?}");
    }
}
