//! Geodesic flow in `(s, theta, beta)` coordinates.
//!
//! `beta` is the angle between the velocity and the parallel through the
//! foot point. The unit speed geodesic equations are
//!
//! ```text
//! s'     = sin(beta)
//! beta'  = r'(s) / r(s) * cos(beta)
//! theta' = cos(beta) / r(s)
//! ```
//!
//! and `K = r(s) cos(beta)` is conserved. The chart breaks down at the
//! poles, so meridians (`K = 0`) are never integrated numerically.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ode::{single_step, Control, Dopri5, Step, Tolerances};
use crate::profile::Profile;

/// Radius below which the flow refuses to evaluate.
pub const POLE_GUARD: f64 = 1e-4;

/// Time tolerance for locating section crossings.
pub const EVENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub s: f64,
    /// Unwrapped rotation angle.
    pub theta: f64,
    /// Unwrapped angle to the parallel.
    pub beta: f64,
}

impl GeodesicState {
    pub fn new(s: f64, theta: f64, beta: f64) -> Self {
        GeodesicState { s, theta, beta }
    }

    fn to_array(self) -> [f64; 3] {
        [self.s, self.theta, self.beta]
    }

    fn from_array(y: &[f64; 3]) -> Self {
        GeodesicState {
            s: y[0],
            theta: y[1],
            beta: y[2],
        }
    }
}

/// Right-hand side `(s', beta', theta')`.
pub fn vector_field(profile: &Profile, state: &GeodesicState) -> Result<(f64, f64, f64)> {
    let (r, dr) = radius_guarded(profile, state.s)?;
    let (sb, cb) = state.beta.sin_cos();
    Ok((sb, dr / r * cb, cb / r))
}

fn radius_guarded(profile: &Profile, s: f64) -> Result<(f64, f64)> {
    if !(s > 0.0 && s < profile.half_length()) {
        return Err(Error::PoleApproach { s, r: 0.0 });
    }
    let (r, dr) = profile.r_dr(s)?;
    if r < POLE_GUARD {
        return Err(Error::PoleApproach { s, r });
    }
    Ok((r, dr))
}

/// Clairaut integral `r(s) cos(beta)`.
pub fn clairaut(profile: &Profile, state: &GeodesicState) -> f64 {
    profile
        .r(state.s.clamp(0.0, profile.half_length()))
        .unwrap_or(0.0)
        * state.beta.cos()
}

/// A transit of the waist parallel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionCrossing {
    pub t: f64,
    /// Position along the waist, `r_min * theta` reduced mod the circumference.
    pub x: f64,
    pub theta: f64,
    pub eta: f64,
    /// Sign of `s'` at the crossing.
    pub direction: i8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicTrajectory {
    pub samples: Vec<(f64, GeodesicState)>,
    pub clairaut: f64,
    pub clairaut_drift: f64,
    pub crossings: Vec<SectionCrossing>,
}

impl GeodesicTrajectory {
    pub fn last(&self) -> (f64, GeodesicState) {
        *self
            .samples
            .last()
            .expect("trajectory holds its initial state")
    }

    pub fn write_csv<W: std::io::Write>(&self, profile: &Profile, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "s", "theta", "beta", "K"])?;
        for (t, st) in &self.samples {
            w.serialize((t, st.s, st.theta, st.beta, clairaut(profile, st)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of one full return to the Birkhoff annulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionReturn {
    pub tau: f64,
    pub dtheta: f64,
    pub end: GeodesicState,
}

/// Integrator bound to one profile.
#[derive(Debug, Clone)]
pub struct GeodesicFlow<'a> {
    profile: &'a Profile,
    solver: Dopri5,
    /// Time resolution of waist-crossing location.
    pub event_tol: f64,
}

impl<'a> GeodesicFlow<'a> {
    pub fn new(profile: &'a Profile) -> Self {
        Self::with_tolerances(profile, Tolerances::default())
    }

    pub fn with_tolerances(profile: &'a Profile, tol: Tolerances) -> Self {
        let mut solver = Dopri5::new(tol);
        solver.magnitude_cap = TAU;
        GeodesicFlow {
            profile,
            solver,
            event_tol: EVENT_TOL,
        }
    }

    pub fn profile(&self) -> &Profile {
        self.profile
    }

    fn rhs(&self) -> impl Fn(f64, &[f64; 3]) -> Result<[f64; 3]> + '_ {
        move |_t, y| {
            let (r, dr) = radius_guarded(self.profile, y[0])?;
            let (sb, cb) = y[2].sin_cos();
            Ok([sb, cb / r, dr / r * cb])
        }
    }

    /// State on the waist with section coordinates `(x, eta)`, pointing upward.
    pub fn section_state(&self, x: f64, eta: f64) -> GeodesicState {
        GeodesicState::new(
            self.profile.waist(),
            x / self.profile.r_min(),
            (-eta).acos(),
        )
    }

    fn crossing_from(&self, t: f64, y: &[f64; 3]) -> SectionCrossing {
        let l = self.profile.waist_circumference();
        SectionCrossing {
            t,
            x: (self.profile.r_min() * y[1]).rem_euclid(l),
            theta: y[1],
            eta: -y[2].cos(),
            direction: if y[2].sin() >= 0.0 { 1 } else { -1 },
        }
    }

    /// Locates the waist crossing inside an accepted step by bisection on the
    /// length of a single step taken from its start.
    fn locate(&self, step: &Step<3>) -> Result<(f64, [f64; 3])> {
        let f = self.rhs();
        let waist = self.profile.waist();
        let g0 = step.y0[0] - waist;
        let (mut lo, mut hi) = (0.0, step.t1 - step.t0);
        let mut y_hi = step.y1;
        while (hi - lo).abs() > self.event_tol {
            let mid = 0.5 * (lo + hi);
            let (y_mid, _) = single_step(&f, step.t0, &step.y0, mid)?;
            if (y_mid[0] - waist).signum() == g0.signum() {
                lo = mid;
            } else {
                hi = mid;
                y_hi = y_mid;
            }
        }
        Ok((step.t0 + hi, y_hi))
    }

    fn crossing_in(&self, step: &Step<3>) -> Option<i8> {
        let waist = self.profile.waist();
        let (g0, g1) = (step.y0[0] - waist, step.y1[0] - waist);
        if g0 < 0.0 && g1 >= 0.0 {
            Some(1)
        } else if g0 > 0.0 && g1 <= 0.0 {
            Some(-1)
        } else {
            None
        }
    }

    /// Integrates to `t_end`, recording every accepted step and all waist crossings.
    pub fn flow(&self, start: GeodesicState, t_end: f64) -> Result<GeodesicTrajectory> {
        if !(t_end > 0.0) {
            return Err(Error::InvalidParams(format!(
                "t_end = {t_end} must be positive"
            )));
        }
        radius_guarded(self.profile, start.s)?;
        let k0 = clairaut(self.profile, &start);
        let mut samples = vec![(0.0, start)];
        let mut crossings = Vec::new();
        let mut drift = 0.0f64;
        self.solver
            .integrate(&self.rhs(), 0.0, start.to_array(), t_end, |step| {
                let st = GeodesicState::from_array(&step.y1);
                drift = drift.max((clairaut(self.profile, &st) - k0).abs());
                if self.crossing_in(step).is_some() {
                    let (tc, yc) = self.locate(step)?;
                    crossings.push(self.crossing_from(tc, &yc));
                }
                samples.push((step.t1, st));
                Ok(Control::Continue)
            })?;
        Ok(GeodesicTrajectory {
            samples,
            clairaut: k0,
            clairaut_drift: drift,
            crossings,
        })
    }

    /// Flows for time `t` and returns the end state only.
    pub fn advance(&self, start: GeodesicState, t: f64) -> Result<GeodesicState> {
        let (_, y) = self
            .solver
            .integrate(&self.rhs(), 0.0, start.to_array(), t, |_| {
                Ok(Control::Continue)
            })?;
        Ok(GeodesicState::from_array(&y))
    }

    /// First return to the annulus (next upward crossing of the waist) from
    /// the section point `(x, eta)`. `eta = 0` is the meridian, handled in
    /// closed form.
    pub fn next_crossing(&self, x: f64, eta: f64) -> Result<SectionReturn> {
        let start = self.section_state(x, eta);
        if eta == 0.0 {
            let end = GeodesicState {
                theta: start.theta + TAU,
                ..start
            };
            return Ok(SectionReturn {
                tau: self.profile.length(),
                dtheta: TAU,
                end,
            });
        }
        if !(eta > -1.0 && eta < 1.0) {
            return Err(Error::InvalidParams(format!("eta = {eta} outside (-1, 1)")));
        }
        let horizon = 50.0 * self.profile.length() / (1.0 - eta.abs()).sqrt();
        let mut hit: Option<(f64, [f64; 3])> = None;
        self.solver
            .integrate(&self.rhs(), 0.0, start.to_array(), horizon, |step| {
                if self.crossing_in(step) == Some(1) {
                    hit = Some(self.locate(step)?);
                    return Ok(Control::Stop);
                }
                Ok(Control::Continue)
            })?;
        let (tau, y) = hit.ok_or(Error::NoCrossing(horizon))?;
        Ok(SectionReturn {
            tau,
            dtheta: y[1] - start.theta,
            end: GeodesicState::from_array(&y),
        })
    }
}

/// Smallest and largest radius among the sampled states of a trajectory.
pub fn turning_radii(profile: &Profile, traj: &GeodesicTrajectory) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (_, st) in &traj.samples {
        let r = profile.r(st.s).unwrap_or(0.0);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi)
}

/// Angle in `[0, 2 pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    a.rem_euclid(2.0 * PI)
}
