//! The first-return map of the Birkhoff annulus over the waist.
//!
//! In section coordinates `(x, eta)`, with `x` the arclength position along
//! the waist and `eta = -cos(beta)`, the return map is the twist
//! `(x, eta) -> (x + f(eta), eta)`. The displacement `f` is kept as a real
//! lift normalized by `f(0) = 0`: a full return advances `theta` by
//! `2 pi W(eta)`, and `f = L (W - 1)` for `eta < 0`, `f = L (W + 1)` for
//! `eta > 0`, where `L` is the waist circumference.
//!
//! `f`, the return time `tau` and the winding `W` are available both from the
//! flow and from one-dimensional quadratures of the Clairaut relation over
//! the band between the caps.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::GeodesicFlow;
use crate::numerics::ode::Tolerances;
use crate::numerics::quadrature::{gauss_legendre, integrate, QuadratureConfig};
use crate::profile::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Flow,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnData {
    pub eta: f64,
    pub f: f64,
    pub tau: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub method: Method,
}

/// One row of a tabulated return map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnRow {
    pub eta: f64,
    pub f: f64,
    pub tau: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub f_quadrature_residual: f64,
}

/// Closed form of the cap contribution to the winding: for `c` in `(0, 1)`,
/// integrates `(c / sin^2 z) / sqrt(1 - c^2 / sin^2 z)` over
/// `[asin c, pi/2]` numerically. The exact value is `pi/2`.
pub fn cap_integral(c: f64, cfg: QuadratureConfig) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParams(format!(
            "cap integral needs c in (0, 1), got {c}"
        )));
    }
    let z0 = c.asin();
    // z = z0 + u^2 removes the inverse square root at the turning point.
    let integrand = |u: f64| {
        if u == 0.0 {
            // limit of 2u / sqrt(sin z - c) as u -> 0
            let sin0 = c;
            return 2.0 * (c / (sin0 * sin0)) * sin0 / ((2.0 * c) * z0.cos()).sqrt();
        }
        let z = z0 + u * u;
        let s = z.sin();
        let gap = 2.0 * (z0 + 0.5 * u * u).cos() * (0.5 * u * u).sin();
        2.0 * u * (c / (s * s)) * s / (gap * (s + c)).sqrt()
    };
    integrate(integrand, 0.0, (FRAC_PI_2 - z0).sqrt(), cfg)
}

/// Integrator tolerances for tables whose symmetry is checked to `1e-8`:
/// near `|eta| = 1` the return takes several times `M` and the default
/// tolerances leave about `2e-8` of asymmetry.
pub const TABLE_ODE_TOL: Tolerances = Tolerances {
    rel: 3e-14,
    abs: 3e-15,
};

/// Return map bound to a profile.
#[derive(Debug, Clone)]
pub struct ReturnMap<'a> {
    profile: &'a Profile,
    flow: GeodesicFlow<'a>,
    pub quadrature: QuadratureConfig,
    /// Tolerance on `|f(eta) - target|` for [`ReturnMap::solve_eta`].
    pub solve_tol: f64,
}

impl<'a> ReturnMap<'a> {
    pub fn new(profile: &'a Profile) -> Self {
        ReturnMap {
            profile,
            flow: GeodesicFlow::new(profile),
            quadrature: QuadratureConfig::default(),
            solve_tol: 1e-10,
        }
    }

    pub fn with_tolerances(
        profile: &'a Profile,
        ode: Tolerances,
        quadrature: QuadratureConfig,
    ) -> Self {
        ReturnMap {
            profile,
            flow: GeodesicFlow::with_tolerances(profile, ode),
            quadrature,
            solve_tol: 1e-10,
        }
    }

    pub fn profile(&self) -> &Profile {
        self.profile
    }

    pub fn geodesic_flow(&self) -> &GeodesicFlow<'a> {
        &self.flow
    }

    pub fn set_event_tol(&mut self, tol: f64) {
        self.flow.event_tol = tol;
    }

    fn lift(&self, eta: f64, w: f64) -> f64 {
        let l = self.profile.waist_circumference();
        if eta < 0.0 {
            l * (w - 1.0)
        } else if eta > 0.0 {
            l * (w + 1.0)
        } else {
            0.0
        }
    }

    /// Return data from one flowed return, started at `x = 0`.
    pub fn flow(&self, eta: f64) -> Result<ReturnData> {
        self.flow_at(0.0, eta)
    }

    pub fn flow_at(&self, x: f64, eta: f64) -> Result<ReturnData> {
        if eta == 0.0 {
            return Ok(ReturnData {
                eta,
                f: 0.0,
                tau: self.profile.length(),
                w: 1.0,
                method: Method::Flow,
            });
        }
        let ret = self.flow.next_crossing(x, eta)?;
        let w = ret.dtheta / (2.0 * PI);
        Ok(ReturnData {
            eta,
            f: self.lift(eta, w),
            tau: ret.tau,
            w,
            method: Method::Flow,
        })
    }

    fn band_integral<G: Fn(f64, f64) -> f64>(&self, g: G) -> Result<f64> {
        let prof = self.profile;
        integrate(
            |s| {
                let r = prof.r(s).expect("band lies inside the profile");
                g(s, r)
            },
            FRAC_PI_2,
            prof.waist(),
            self.quadrature,
        )
    }

    /// Winding number by quadrature over the band, for `eta` in `(-1, 0)`.
    pub fn winding_quadrature(&self, eta: f64) -> Result<f64> {
        if !(eta > -1.0 && eta < 0.0) {
            return Err(Error::InvalidParams(format!(
                "winding quadrature needs eta in (-1, 0), got {eta}"
            )));
        }
        let c = eta * self.profile.r_min();
        let band = self.band_integral(|_, r| {
            let k = c / r;
            (c / (r * r)) / (1.0 - k * k).sqrt()
        })?;
        Ok(1.0 - 2.0 / PI * band)
    }

    /// Return time by quadrature: each of the four quarter-oscillations spends
    /// `pi/2` on a cap plus the band transit time.
    pub fn tau_quadrature(&self, eta: f64) -> Result<f64> {
        if !(eta > -1.0 && eta < 1.0) {
            return Err(Error::InvalidParams(format!("eta = {eta} outside (-1, 1)")));
        }
        let c = eta * self.profile.r_min();
        let band = self.band_integral(|_, r| {
            let k = c / r;
            1.0 / (1.0 - k * k).sqrt()
        })?;
        Ok(2.0 * PI + 4.0 * band)
    }

    /// Return data from quadrature, extended to `eta > 0` by symmetry.
    pub fn quadrature(&self, eta: f64) -> Result<ReturnData> {
        let tau = self.tau_quadrature(eta)?;
        let w = if eta < 0.0 {
            self.winding_quadrature(eta)?
        } else if eta > 0.0 {
            -self.winding_quadrature(-eta)?
        } else {
            1.0
        };
        Ok(ReturnData {
            eta,
            f: self.lift(eta, w),
            tau,
            w,
            method: Method::Quadrature,
        })
    }

    /// Flowed return data on `n` equally spaced points of `[-eta_max, eta_max]`,
    /// with the quadrature residual of `f`.
    pub fn tabulate(&self, n: usize, eta_max: f64) -> Result<Vec<ReturnRow>> {
        let etas: Vec<f64> = (0..n)
            .map(|i| {
                if n == 1 {
                    0.0
                } else {
                    -eta_max + 2.0 * eta_max * i as f64 / (n - 1) as f64
                }
            })
            .collect();
        etas.par_iter()
            .map(|&eta| {
                let d = self.flow(eta)?;
                let q = self.quadrature(eta)?;
                Ok(ReturnRow {
                    eta,
                    f: d.f,
                    tau: d.tau,
                    w: d.w,
                    f_quadrature_residual: d.f - q.f,
                })
            })
            .collect()
    }

    /// Unique `eta` with `f(eta) = L a`. The bracket `[lo, 0]` (or `[0, hi]`)
    /// is widened toward the edge until it contains the target, then refined
    /// by a bracketing secant iteration that falls back to bisection.
    pub fn solve_eta(&self, a: f64) -> Result<f64> {
        if !a.is_finite() {
            return Err(Error::InvalidParams(format!(
                "rotation target {a} is not finite"
            )));
        }
        if a == 0.0 {
            return Ok(0.0);
        }
        let target = self.profile.waist_circumference() * a;
        let side = -a.signum();
        let g = |eta: f64| -> Result<f64> { Ok(self.flow(eta)?.f - target) };
        let (mut lo, mut g_lo) = (0.0, -target);
        let mut width = 0.5;
        let (mut hi, mut g_hi);
        loop {
            let eta = side * (1.0 - width);
            let val = g(eta)?;
            if val.signum() != g_lo.signum() {
                hi = eta;
                g_hi = val;
                break;
            }
            lo = eta;
            g_lo = val;
            width *= 0.5;
            if width < 1e-12 {
                return Err(Error::Bracket(format!(
                    "f does not reach {target} before |eta| = 1"
                )));
            }
        }
        let mut last_side = 0i8;
        for _ in 0..200 {
            // Illinois-modified regula falsi, with bisection when the secant
            // point crowds an endpoint.
            let mut m = hi - g_hi * (hi - lo) / (g_hi - g_lo);
            let span = (hi - lo).abs();
            if !m.is_finite() || (m - lo).abs() < 1e-3 * span || (m - hi).abs() < 1e-3 * span {
                m = 0.5 * (lo + hi);
            }
            let gm = g(m)?;
            if gm.abs() < self.solve_tol || span < 1e-15 {
                return Ok(m);
            }
            if gm.signum() == g_lo.signum() {
                lo = m;
                g_lo = gm;
                if last_side == -1 {
                    g_hi *= 0.5;
                }
                last_side = -1;
            } else {
                hi = m;
                g_hi = gm;
                if last_side == 1 {
                    g_lo *= 0.5;
                }
                last_side = 1;
            }
        }
        Err(Error::Bracket(format!(
            "no convergence for target {target}"
        )))
    }
}

/// Tabulated `f` on Gauss–Legendre nodes of panels that shrink geometrically
/// toward `eta = +-1`, used to integrate `F(eta) = M + int_0^eta f`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FTable {
    length: f64,
    panels: Vec<FPanel>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FPanel {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
    bary: Vec<f64>,
}

impl FPanel {
    fn new(a: f64, b: f64, ref_nodes: &[f64], values: Vec<f64>) -> Self {
        let nodes: Vec<f64> = ref_nodes
            .iter()
            .map(|x| 0.5 * (a + b) + 0.5 * (b - a) * x)
            .collect();
        let bary = nodes
            .iter()
            .enumerate()
            .map(|(j, xj)| {
                1.0 / nodes
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, xk)| xj - xk)
                    .product::<f64>()
            })
            .collect();
        FPanel {
            a,
            b,
            nodes,
            values,
            bary,
        }
    }

    fn contains(&self, eta: f64) -> bool {
        eta >= self.a.min(self.b) && eta <= self.a.max(self.b)
    }

    fn interpolate(&self, eta: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((x, v), w) in self.nodes.iter().zip(&self.values).zip(&self.bary) {
            let d = eta - x;
            if d == 0.0 {
                return *v;
            }
            num += w / d * v;
            den += w / d;
        }
        num / den
    }

    /// Integral of the interpolant from `a` to `eta`.
    fn integral_to(&self, eta: f64, gl: &(Vec<f64>, Vec<f64>)) -> f64 {
        let half = 0.5 * (eta - self.a);
        let mid = 0.5 * (eta + self.a);
        gl.0.iter()
            .zip(&gl.1)
            .map(|(x, w)| w * self.interpolate(mid + half * x))
            .sum::<f64>()
            * half
    }
}

impl FTable {
    /// Builds a table from flowed values of `f`, covering `|eta| <= 1 - 2^-levels`.
    pub fn build(map: &ReturnMap<'_>, nodes_per_panel: usize, levels: u32) -> Result<Self> {
        let (ref_nodes, _) = gauss_legendre(nodes_per_panel);
        let mut edges = vec![0.0];
        for k in 1..=levels {
            edges.push(1.0 - 0.5f64.powi(k as i32));
        }
        let mut specs = Vec::new();
        for sign in [-1.0, 1.0] {
            for w in edges.windows(2) {
                specs.push((sign * w[0], sign * w[1]));
            }
        }
        let panels = specs
            .par_iter()
            .map(|&(a, b)| {
                let values = ref_nodes
                    .iter()
                    .map(|x| map.flow(0.5 * (a + b) + 0.5 * (b - a) * x).map(|d| d.f))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(FPanel::new(a, b, &ref_nodes, values))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FTable {
            length: map.profile().length(),
            panels,
        })
    }

    pub fn coverage(&self) -> f64 {
        self.panels.iter().map(|p| p.b.abs()).fold(0.0, f64::max)
    }

    fn panel_index(&self, eta: f64) -> Result<usize> {
        self.panels
            .iter()
            .position(|p| p.contains(eta) && (eta != 0.0 || p.a == 0.0))
            .ok_or(Error::TableCoverage(eta))
    }

    /// Interpolated `f(eta)`.
    pub fn f(&self, eta: f64) -> Result<f64> {
        if eta == 0.0 {
            return Ok(0.0);
        }
        Ok(self.panels[self.panel_index(eta)?].interpolate(eta))
    }

    /// `F(eta) = M + int_0^eta f`.
    pub fn big_f(&self, eta: f64) -> Result<f64> {
        if eta == 0.0 {
            return Ok(self.length);
        }
        self.panel_index(eta)?;
        let mut total = self.length;
        // Panels on each side are stored from the origin outward.
        for p in self
            .panels
            .iter()
            .filter(|p| (p.a + p.b).signum() == eta.signum())
        {
            let gl = gauss_legendre(p.nodes.len());
            if p.b.abs() <= eta.abs() {
                total += p.integral_to(p.b, &gl);
            } else {
                total += p.integral_to(eta, &gl);
                break;
            }
        }
        Ok(total)
    }

    /// Return time `tau = F(eta) - eta f(eta)`.
    pub fn tau(&self, eta: f64) -> Result<f64> {
        Ok(self.big_f(eta)? - eta * self.f(eta)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileParams;

    fn model() -> Profile {
        Profile::build(ProfileParams::default()).unwrap()
    }

    #[test]
    fn cap_integral_is_quarter_turn() {
        for c in [0.1, 0.25, 0.5, 0.9, 0.999] {
            let v = cap_integral(
                c,
                QuadratureConfig {
                    abs_tol: 1e-13,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!((v - FRAC_PI_2).abs() < 1e-11, "c = {c}: {v}");
        }
    }

    #[test]
    fn meridian_values() {
        let p = model();
        let map = ReturnMap::new(&p);
        let d = map.flow(0.0).unwrap();
        assert_eq!((d.f, d.tau, d.w), (0.0, p.length(), 1.0));
        assert!((map.tau_quadrature(0.0).unwrap() - p.length()).abs() < 1e-12);
        assert!((map.winding_quadrature(-1e-9).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn flow_matches_quadrature() {
        let p = model();
        let map = ReturnMap::new(&p);
        for eta in [-0.9, -0.5, -0.1, 0.3] {
            let a = map.flow(eta).unwrap();
            let b = map.quadrature(eta).unwrap();
            assert!((a.w - b.w).abs() < 1e-8, "{a:?} {b:?}");
            assert!((a.tau - b.tau).abs() < 1e-8 * a.tau, "{a:?} {b:?}");
        }
        let d = map.flow(-0.5).unwrap();
        assert!(d.f > 0.0 && d.w > 1.0);
    }

    #[test]
    fn solve_eta_signs() {
        let p = model();
        let map = ReturnMap::new(&p);
        assert_eq!(map.solve_eta(0.0).unwrap(), 0.0);
        let eta = map.solve_eta(0.5).unwrap();
        assert!(eta < 0.0);
        assert!((map.flow(eta).unwrap().f - 0.5 * p.waist_circumference()).abs() < 1e-8);
        let eta = map.solve_eta(-2.0).unwrap();
        assert!(eta > 0.0);
        assert!((map.flow(eta).unwrap().f + 2.0 * p.waist_circumference()).abs() < 1e-8);
    }
}
