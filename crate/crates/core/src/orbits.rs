//! Census of closed geodesics in the band between the caps.
//!
//! Every coprime `(p, q)` with `p/q` in the range of `f / L` gives one circle
//! family of closed geodesics: the orbits through `(x, eta(p/q))` for all
//! `x`. Each family meets the annulus `q` times, winds `|p| + q` times around
//! the axis and is a `(|p| + q, q)`-satellite of the pair of curves on its
//! side of the waist.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::enumerate_coprime;
use crate::error::{Error, Result};
use crate::geodesic::GeodesicFlow;
use crate::numerics::ode::Tolerances;
use crate::numerics::{circle_distance, gcd};
use crate::return_map::ReturnMap;

/// Which pair of model curves a satellite winds around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "E+D+")]
    Plus,
    #[serde(rename = "E-D-")]
    Minus,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Plus => "E+D+",
            Side::Minus => "E-D-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Satellite {
    #[serde(rename = "P")]
    pub big_p: u64,
    #[serde(rename = "Q")]
    pub big_q: u64,
    pub side: Side,
}

/// Linking numbers with the lifts of `E+`, `D+`, `E-`, `D-`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HomologyClass {
    pub e_plus: i64,
    pub d_plus: i64,
    pub e_minus: i64,
    pub d_minus: i64,
}

impl HomologyClass {
    pub fn to_array(self) -> [i64; 4] {
        [self.e_plus, self.d_plus, self.e_minus, self.d_minus]
    }

    pub fn is_primitive(&self) -> bool {
        self.to_array()
            .iter()
            .fold(0u64, |g, x| gcd(g, x.unsigned_abs()))
            == 1
    }
}

/// Class of a `(P, Q)`-satellite in the first homology of the link complement.
/// Odd `P` lifts to a doubly traversed curve, so the entries are halved for even `P`.
pub fn homology_class(big_p: u64, big_q: u64, side: Side) -> HomologyClass {
    let (p, q) = (big_p as i64, big_q as i64);
    let div = if big_p % 2 == 0 { 2 } else { 1 };
    let near = (p - 2 * q) / div;
    let far = -p / div;
    match side {
        Side::Plus => HomologyClass {
            e_plus: near,
            d_plus: near,
            e_minus: far,
            d_minus: far,
        },
        Side::Minus => HomologyClass {
            e_plus: far,
            d_plus: far,
            e_minus: near,
            d_minus: near,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub p: i64,
    pub q: u64,
    pub eta: f64,
    /// Clairaut constant `-eta r_min`.
    #[serde(rename = "K")]
    pub clairaut: f64,
    /// Return time at `eta`.
    pub tau: f64,
    pub length: f64,
    pub lift_action: f64,
    pub winding_total: i64,
    pub satellite: Satellite,
    pub homology: HomologyClass,
    pub closure_residual: f64,
}

/// Tolerance on the closure residual after `q` returns.
pub const CLOSURE_TOL: f64 = 1e-6;

/// Integrator tolerances for the closure check, which flows for `q` returns
/// and so needs a tighter per-step budget than a single return.
pub const CLOSURE_ODE_TOL: Tolerances = Tolerances {
    rel: 1e-13,
    abs: 1e-14,
};

/// Solves for the family with rotation number `p/q` and verifies it closes.
pub fn closed_geodesic(map: &ReturnMap<'_>, p: i64, q: u64) -> Result<OrbitRecord> {
    if q == 0 || gcd(p.unsigned_abs(), q) != 1 {
        return Err(Error::InvalidParams(format!(
            "(p, q) = ({p}, {q}) is not a coprime pair"
        )));
    }
    let profile = map.profile();
    let eta = map.solve_eta(p as f64 / q as f64)?;
    let data = map.flow(eta)?;
    let length = q as f64 * data.tau;
    let (closure_residual, winding) = if eta == 0.0 {
        (0.0, q as f64)
    } else {
        let flow = GeodesicFlow::with_tolerances(profile, CLOSURE_ODE_TOL);
        let start = flow.section_state(0.0, eta);
        let end = flow.advance(start, length)?;
        let residual = (end.s - start.s).abs()
            + circle_distance(end.theta, start.theta)
            + circle_distance(end.beta, start.beta);
        (residual, (end.theta - start.theta) / TAU)
    };
    let winding_total = winding.round() as i64;
    let expected = if p >= 0 { p + q as i64 } else { p - q as i64 };
    if closure_residual > CLOSURE_TOL
        || winding_total != expected
        || (winding - winding.round()).abs() > 1e-6
    {
        return Err(Error::Closure(format!(
            "(p, q) = ({p}, {q}): residual {closure_residual:.3e}, winding {winding}, expected {expected}"
        )));
    }
    let side = if p >= 0 { Side::Plus } else { Side::Minus };
    let satellite = Satellite {
        big_p: p.unsigned_abs() + q,
        big_q: q,
        side,
    };
    Ok(OrbitRecord {
        p,
        q,
        eta,
        clairaut: -eta * profile.r_min(),
        tau: data.tau,
        length,
        lift_action: 2.0 * length,
        winding_total,
        satellite,
        homology: homology_class(satellite.big_p, satellite.big_q, side),
        closure_residual,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Failure {
    pub p: i64,
    pub q: u64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Catalog {
    pub band: (f64, f64),
    pub q_max: usize,
    pub records: Vec<OrbitRecord>,
    pub failures: Vec<Failure>,
    /// Largest return time among the records.
    pub max_tau: f64,
    /// Supremum of the return time over the band, attained at its ends.
    pub band_tau: f64,
    /// Every lift action is at most `2 q band_tau`.
    pub action_bound_holds: bool,
    pub all_primitive: bool,
    pub all_distinct: bool,
    /// Lengths below this are counted completely: any family with larger
    /// `q` is longer since `tau >= M`.
    pub complete_up_to: f64,
}

/// Catalogs every coprime `(p, q)` with `p/q` in `(a, b)` and `q <= q_max`.
pub fn catalog(map: &ReturnMap<'_>, a: f64, b: f64, q_max: usize) -> Result<Catalog> {
    let pairs = enumerate_coprime(a, b, q_max)?;
    let results: Vec<(i64, u64, Result<OrbitRecord>)> = pairs
        .par_iter()
        .map(|&(p, q)| (p, q, closed_geodesic(map, p, q)))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (p, q, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(Failure {
                p,
                q,
                error: e.to_string(),
            }),
        }
    }
    let tau_at = |x: f64| -> Result<f64> { Ok(map.flow(map.solve_eta(x)?)?.tau) };
    let band_tau = tau_at(a)?.max(tau_at(b)?);
    let max_tau = records.iter().map(|r| r.tau).fold(0.0, f64::max);
    let action_bound_holds = records.iter().all(|r| {
        r.lift_action <= 2.0 * r.q as f64 * band_tau && r.lift_action <= 2.0 * r.q as f64 * max_tau
    });
    let all_primitive = records.iter().all(|r| r.homology.is_primitive());
    let mut classes: Vec<[i64; 4]> = records.iter().map(|r| r.homology.to_array()).collect();
    classes.sort_unstable();
    classes.dedup();
    let all_distinct = classes.len() == records.len();
    Ok(Catalog {
        band: (a, b),
        q_max,
        records,
        failures,
        max_tau,
        band_tau,
        action_bound_holds,
        all_primitive,
        all_distinct,
        complete_up_to: (q_max as f64 + 1.0) * map.profile().length(),
    })
}

impl Catalog {
    pub fn lengths(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.length).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "p",
            "q",
            "eta",
            "K",
            "length",
            "lift_action",
            "P",
            "Q",
            "side",
            "h_e_plus",
            "h_d_plus",
            "h_e_minus",
            "h_d_minus",
            "closure_residual",
        ])?;
        for r in &self.records {
            let h = r.homology;
            w.write_record(&[
                r.p.to_string(),
                r.q.to_string(),
                r.eta.to_string(),
                r.clairaut.to_string(),
                r.length.to_string(),
                r.lift_action.to_string(),
                r.satellite.big_p.to_string(),
                r.satellite.big_q.to_string(),
                r.satellite.side.to_string(),
                h.e_plus.to_string(),
                h.d_plus.to_string(),
                h.e_minus.to_string(),
                h.d_minus.to_string(),
                r.closure_residual.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{Profile, ProfileParams};

    #[test]
    fn homology_examples() {
        let h = homology_class(2, 1, Side::Plus);
        assert_eq!(h.to_array(), [0, 0, -1, -1]);
        let h = homology_class(3, 2, Side::Plus);
        assert_eq!(h.to_array(), [-1, -1, -3, -3]);
        let h = homology_class(3, 1, Side::Plus);
        assert_eq!((h.e_plus, h.e_minus), (1, -3));
        let h = homology_class(3, 1, Side::Minus);
        assert_eq!(h.to_array(), [-3, -3, 1, 1]);
        assert!(h.is_primitive());
    }

    #[test]
    fn one_one_family() {
        let prof = Profile::build(ProfileParams::default()).unwrap();
        let map = ReturnMap::new(&prof);
        let rec = closed_geodesic(&map, 1, 1).unwrap();
        assert_eq!(rec.winding_total, 2);
        assert_eq!(
            rec.satellite,
            Satellite {
                big_p: 2,
                big_q: 1,
                side: Side::Plus
            }
        );
        assert_eq!(rec.lift_action, 2.0 * rec.length);
        assert!(rec.closure_residual < CLOSURE_TOL);
        assert!((rec.clairaut + rec.eta * 0.5).abs() < 1e-15);
        let rec = closed_geodesic(&map, -2, 3).unwrap();
        assert_eq!(rec.winding_total, -5);
        assert_eq!(rec.satellite.side, Side::Minus);
        assert!(closed_geodesic(&map, 2, 4).is_err());
    }
}
