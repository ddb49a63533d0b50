//! Linearized data of the Morse–Bott perturbation of a circle family.
//!
//! Perturbing the contact form by `(1 + delta g)` with `g = cos` on the
//! family circle leaves two closed orbits: `P_max` at the maximum of `g` with
//! action `(1 + delta) T`, and `P_min` at the minimum with action `(1 - delta) T`.
//! In the frame along the orbit the linearized flow has constant coefficients
//! `[[0, c], [b, 0]]`, where `c` is the twist of the family and `b` comes from
//! the second derivative of the perturbation.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ode::{Control, Dopri5, Tolerances};

use super::chain::{z2_homology, Z2ChainComplex};
use super::conley_zehnder::cz_index;
use super::{Mat2, SymplecticPath};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationData {
    /// Action of the unperturbed family.
    #[serde(rename = "T")]
    pub period: f64,
    pub delta: f64,
    /// Twist constant of the family.
    pub c: f64,
}

impl PerturbationData {
    pub fn new(period: f64, delta: f64, c: f64) -> Result<Self> {
        let d = PerturbationData { period, delta, c };
        d.check()?;
        Ok(d)
    }

    fn check(&self) -> Result<()> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "T = {} must be positive",
                self.period
            )));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::InvalidParams(format!(
                "delta = {} must lie in (0, 0.5)",
                self.delta
            )));
        }
        if self.c == 0.0 || !self.c.is_finite() {
            return Err(Error::InvalidParams("c must be nonzero".into()));
        }
        Ok(())
    }

    /// Lower-left entry of the linearization.
    pub fn b(&self, which: Which) -> f64 {
        let d = self.delta;
        match which {
            Which::Max => d / ((1.0 + d) * (1.0 + d)),
            Which::Min => -d / ((1.0 - d) * (1.0 - d)),
        }
    }

    /// Period of the perturbed orbit, which is also its action.
    pub fn action(&self, which: Which) -> f64 {
        match which {
            Which::Max => (1.0 + self.delta) * self.period,
            Which::Min => (1.0 - self.delta) * self.period,
        }
    }

    pub fn generator(&self, which: Which) -> Mat2 {
        Mat2::new(0.0, self.c, self.b(which), 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Elliptic,
    Hyperbolic,
}

/// `t -> exp(t T_w [[0, c], [b, 0]])` on `[0, 1]`.
///
/// The path is only a faithful model while the elliptic rotation
/// `T_w sqrt(|b c|)` stays below `2 pi`; past that the endpoint becomes
/// degenerate and the index jumps.
pub fn linearized_monodromy(data: &PerturbationData, which: Which) -> Result<SymplecticPath> {
    data.check()?;
    let a = data.generator(which).scale(data.action(which));
    let rotation = a.det().max(0.0).sqrt();
    if rotation >= TAU {
        return Err(Error::InvalidParams(format!(
            "elliptic rotation {rotation} reaches 2 pi; reduce T, c or delta"
        )));
    }
    let path = SymplecticPath::exponential(&a, 16)?;
    let end = path.end().det_minus_identity();
    if end.abs() < 1e-10 {
        return Err(Error::DegenerateEndpoint(end));
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbedPair {
    pub mu_max: i32,
    pub mu_min: i32,
    pub action_max: f64,
    pub action_min: f64,
    pub kind_max: Kind,
    pub kind_min: Kind,
    /// Eigenvalue magnitude `sqrt(|b c|)` of each linearization.
    pub eigen_max: f64,
    pub eigen_min: f64,
}

fn kind(data: &PerturbationData, which: Which) -> Kind {
    if data.b(which) * data.c > 0.0 {
        Kind::Hyperbolic
    } else {
        Kind::Elliptic
    }
}

pub fn perturbed_pair(data: &PerturbationData) -> Result<PerturbedPair> {
    let mu_max = cz_index(&linearized_monodromy(data, Which::Max)?)?;
    let mu_min = cz_index(&linearized_monodromy(data, Which::Min)?)?;
    Ok(PerturbedPair {
        mu_max,
        mu_min,
        action_max: data.action(Which::Max),
        action_min: data.action(Which::Min),
        kind_max: kind(data, Which::Max),
        kind_min: kind(data, Which::Min),
        eigen_max: (data.b(Which::Max) * data.c).abs().sqrt(),
        eigen_min: (data.b(Which::Min) * data.c).abs().sqrt(),
    })
}

/// A flowline of the gradient-like field between its two limit points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heteroclinic {
    /// Point the flowline passes through at time zero.
    pub through: f64,
    /// Limit as time goes to minus infinity.
    pub from: f64,
    /// Limit as time goes to plus infinity.
    pub to: f64,
    /// Times at which the flowline is within tolerance of each end.
    pub t_backward: f64,
    pub t_forward: f64,
    /// `(t, x)` samples, in increasing time.
    pub samples: Vec<(f64, f64)>,
}

/// Distance to the endpoints at which a flowline is considered converged.
pub const FLOWLINE_TOL: f64 = 1e-8;

fn integrate_until_near(
    delta: f64,
    x0: f64,
    target: f64,
    backward: bool,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let field = |_t: f64, y: &[f64; 1]| Ok([-y[0].sin() / (1.0 + delta * y[0].cos())]);
    // The approach is exponential with rate at least 1 - delta, so this
    // horizon is far more than enough.
    let horizon = 60.0 / (1.0 - delta);
    let t_end = if backward { -horizon } else { horizon };
    let mut samples = vec![(0.0, x0)];
    let mut hit = None;
    Dopri5::new(Tolerances::default()).integrate(&field, 0.0, [x0], t_end, |step| {
        samples.push((step.t1, step.y1[0]));
        if (step.y1[0] - target).abs() < FLOWLINE_TOL {
            hit = Some(step.t1);
            return Ok(Control::Stop);
        }
        Ok(Control::Continue)
    })?;
    let t = hit.ok_or(Error::NoCrossing(t_end))?;
    Ok((t, samples))
}

/// The two heteroclinic flowlines of `x' = -sin x / (1 + delta cos x)` on
/// the circle. They leave the source at `x = pi` (the minimum `P_min`) and
/// fall into the sink at `x = 0` (the maximum `P_max`), through `pi/2` and
/// `3 pi/2` respectively.
pub fn gradient_flowlines(delta: f64) -> Result<Vec<Heteroclinic>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParams(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    [(PI / 2.0, 0.0, PI), (3.0 * PI / 2.0, TAU, PI)]
        .into_iter()
        .map(|(x0, sink, source)| {
            let (t_forward, fwd) = integrate_until_near(delta, x0, sink, false)?;
            let (t_backward, bwd) = integrate_until_near(delta, x0, source, true)?;
            let mut samples: Vec<(f64, f64)> = bwd.into_iter().rev().collect();
            samples.extend(fwd.into_iter().skip(1));
            Ok(Heteroclinic {
                through: x0,
                from: source,
                to: sink % TAU,
                t_backward,
                t_forward,
                samples,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHomology {
    /// Degree of the lower generator, which is the shift against `H_*(S^1)`.
    pub offset: i32,
    pub complex: Z2ChainComplex,
    /// `(degree, rank)` for every degree with a generator.
    pub ranks: Vec<(i32, usize)>,
}

/// Two-generator complex of a perturbed family: `P_min` in degree `mu_min`,
/// `P_max` one above, with boundary coefficient the cylinder count mod 2.
pub fn assemble_model_homology(
    mu_min: i32,
    mu_max: i32,
    cylinders: usize,
) -> Result<ModelHomology> {
    if mu_max != mu_min + 1 {
        return Err(Error::InvalidParams(format!(
            "generators in degrees {mu_min} and {mu_max} are not adjacent"
        )));
    }
    let mut complex = Z2ChainComplex::new();
    complex.set_generators(mu_min, 1);
    complex.set_generators(mu_max, 1);
    complex.set_boundary(mu_max, vec![vec![cylinders % 2 == 1]])?;
    let ranks = z2_homology(&complex)?;
    Ok(ModelHomology {
        offset: mu_min,
        complex,
        ranks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_gap_is_one() {
        for c in [0.5, -0.5, 2.0, -2.0] {
            for delta in [0.01, 0.1] {
                let d = PerturbationData::new(1.0, delta, c).unwrap();
                let pair = perturbed_pair(&d).unwrap();
                assert_eq!(pair.mu_max - pair.mu_min, 1, "c = {c}, delta = {delta}");
                assert_ne!(pair.kind_max, pair.kind_min);
                assert_eq!(pair.action_max, 1.0 + delta);
            }
        }
    }

    #[test]
    fn flowlines_connect_min_to_max() {
        let lines = gradient_flowlines(0.3).unwrap();
        assert_eq!(lines.len(), 2);
        for l in &lines {
            assert_eq!((l.from, l.to), (PI, 0.0));
            assert!(l.t_backward < 0.0 && l.t_forward > 0.0);
            let first = l.samples.first().unwrap().1;
            assert!((first - PI).abs() < 1e-7);
        }
    }

    #[test]
    fn model_homology_is_circle() {
        let h = assemble_model_homology(-1, 0, 2).unwrap();
        assert_eq!(h.ranks, vec![(-1, 1), (0, 1)]);
        let odd = assemble_model_homology(-1, 0, 1).unwrap();
        assert_eq!(odd.ranks, vec![(-1, 0), (0, 0)]);
    }
}
