//! Arclength profile curves of the model sphere of revolution.
//!
//! The profile is a unit-sphere cap `r = sin s` on `[0, pi/2]`, a quintic
//! well down to the waist radius `r_min` at `s = M/4`, and the mirror image
//! of both on the upper half. The height `z` is recovered from the unit
//! speed condition `r'^2 + z'^2 = 1`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quadrature::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileParams {
    pub r_min: f64,
    /// Total length of the meridian from pole to pole.
    #[serde(rename = "M")]
    pub length: f64,
    /// Value of `r''` at the waist.
    pub cap_junction_curvature: f64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams {
            r_min: 0.5,
            length: 4.0 * PI,
            cap_junction_curvature: 1.0,
        }
    }
}

impl ProfileParams {
    pub fn new(r_min: f64, length: f64) -> Self {
        ProfileParams {
            r_min,
            length,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min < 1.0) {
            return Err(Error::InvalidParams(format!(
                "r_min = {} must lie in (0, 1)",
                self.r_min
            )));
        }
        if !(self.length > 2.0 * PI) {
            return Err(Error::InvalidParams(format!(
                "length M = {} must exceed 2*pi so the band [pi/2, M/4] is nonempty",
                self.length
            )));
        }
        if !(self.cap_junction_curvature > 0.0) || !self.cap_junction_curvature.is_finite() {
            return Err(Error::InvalidParams(format!(
                "cap_junction_curvature = {} must be positive",
                self.cap_junction_curvature
            )));
        }
        Ok(())
    }
}

/// Quintic on the band `u = s - pi/2 in [0, h]` in the scaled variable `t = u/h`.
#[derive(Debug, Clone, Copy)]
struct Quintic {
    h: f64,
    a3: f64,
    a4: f64,
    a5: f64,
}

impl Quintic {
    fn new(p: &ProfileParams) -> Self {
        let h = p.length / 4.0 - FRAC_PI_2;
        let h2 = h * h;
        // Mismatch between the cap Taylor polynomial 1 - u^2/2 and the waist data.
        let e0 = p.r_min - (1.0 - 0.5 * h2);
        let e1 = h2;
        let e2 = h2 * (p.cap_junction_curvature + 1.0);
        Quintic {
            h,
            a3: 10.0 * e0 - 4.0 * e1 + 0.5 * e2,
            a4: -15.0 * e0 + 7.0 * e1 - e2,
            a5: 6.0 * e0 - 3.0 * e1 + 0.5 * e2,
        }
    }

    fn value(&self, u: f64) -> f64 {
        let t = u / self.h;
        1.0 - 0.5 * u * u + t * t * t * (self.a3 + t * (self.a4 + t * self.a5))
    }

    fn deriv(&self, u: f64) -> f64 {
        let t = u / self.h;
        -u + t * t * (3.0 * self.a3 + t * (4.0 * self.a4 + 5.0 * self.a5 * t)) / self.h
    }

    fn second(&self, u: f64) -> f64 {
        let t = u / self.h;
        -1.0 + t * (6.0 * self.a3 + t * (12.0 * self.a4 + 20.0 * self.a5 * t)) / (self.h * self.h)
    }
}

/// One evaluation of the profile curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub r: f64,
    pub z: f64,
    pub dr: f64,
    pub dz: f64,
}

#[derive(Debug, Clone)]
pub struct Profile {
    params: ProfileParams,
    quintic: Quintic,
    // Height at the band knots u_k = k * h / n.
    z_knots: Vec<f64>,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
    z_mid: f64,
}

const Z_KNOTS: usize = 256;
const GRID_CELLS: usize = 4000;

impl Profile {
    /// Builds the model profile and rejects it unless every validation check passes.
    pub fn build(params: ProfileParams) -> Result<Self> {
        let profile = Self::build_unchecked(params)?;
        let report = profile.validate();
        if !report.passed() {
            let failed: Vec<String> = report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{} (residual {:.3e})", c.name, c.residual))
                .collect();
            return Err(Error::InadmissibleProfile(format!(
                "r_min = {}, M = {}: failed {}; enlarge M or raise r_min",
                params.r_min,
                params.length,
                failed.join(", ")
            )));
        }
        Ok(profile)
    }

    /// Builds the profile checking only the parameter ranges, so that
    /// inadmissible shapes can still be inspected with [`Profile::validate`].
    pub fn build_unchecked(params: ProfileParams) -> Result<Self> {
        params.check()?;
        let quintic = Quintic::new(&params);
        let (gl_nodes, gl_weights) = gauss_legendre(16);
        let mut profile = Profile {
            params,
            quintic,
            z_knots: vec![0.0; Z_KNOTS + 1],
            gl_nodes,
            gl_weights,
            z_mid: 0.0,
        };
        let du = quintic.h / Z_KNOTS as f64;
        for k in 0..Z_KNOTS {
            let a = k as f64 * du;
            profile.z_knots[k + 1] = profile.z_knots[k] + profile.band_height_increment(a, a + du);
        }
        profile.z_mid = profile.z_knots[Z_KNOTS];
        Ok(profile)
    }

    fn band_height_increment(&self, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, w) in self.gl_nodes.iter().zip(&self.gl_weights) {
            let d = self.quintic.deriv(c + half * x);
            acc += w * (1.0 - d * d).max(0.0).sqrt();
        }
        acc * half
    }

    pub fn params(&self) -> &ProfileParams {
        &self.params
    }

    pub fn r_min(&self) -> f64 {
        self.params.r_min
    }

    /// Total meridian length `M`.
    pub fn length(&self) -> f64 {
        self.params.length
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.params.length
    }

    /// Arclength of the waist parallel.
    pub fn waist(&self) -> f64 {
        0.25 * self.params.length
    }

    /// Circumference `2 pi r_min` of the waist.
    pub fn waist_circumference(&self) -> f64 {
        2.0 * PI * self.params.r_min
    }

    /// Height of the waist parallel.
    pub fn z_mid(&self) -> f64 {
        self.z_mid
    }

    fn check_range(&self, s: f64) -> Result<()> {
        if !(0.0..=self.half_length()).contains(&s) {
            return Err(Error::OutOfRange {
                s,
                half_length: self.half_length(),
            });
        }
        Ok(())
    }

    // Values on the lower half [0, M/4].
    fn lower_r_dr(&self, s: f64) -> (f64, f64) {
        if s <= FRAC_PI_2 {
            (s.sin(), s.cos())
        } else {
            let u = s - FRAC_PI_2;
            (self.quintic.value(u), self.quintic.deriv(u))
        }
    }

    fn lower_z(&self, s: f64) -> f64 {
        if s <= FRAC_PI_2 {
            return -s.cos();
        }
        let u = (s - FRAC_PI_2).min(self.quintic.h);
        let du = self.quintic.h / Z_KNOTS as f64;
        let k = ((u / du) as usize).min(Z_KNOTS);
        let base = k as f64 * du;
        self.z_knots[k] + self.band_height_increment(base, u)
    }

    /// `(r, r')` at arclength `s`; the hot path of the geodesic vector field.
    pub fn r_dr(&self, s: f64) -> Result<(f64, f64)> {
        self.check_range(s)?;
        let half = self.half_length();
        if s <= 0.5 * half {
            Ok(self.lower_r_dr(s))
        } else {
            let (r, dr) = self.lower_r_dr(half - s);
            Ok((r, -dr))
        }
    }

    pub fn r(&self, s: f64) -> Result<f64> {
        Ok(self.r_dr(s)?.0)
    }

    /// Second derivative `r''`.
    pub fn d2r(&self, s: f64) -> Result<f64> {
        self.check_range(s)?;
        let half = self.half_length();
        let lower = if s <= 0.5 * half { s } else { half - s };
        Ok(if lower <= FRAC_PI_2 {
            -lower.sin()
        } else {
            self.quintic.second(lower - FRAC_PI_2)
        })
    }

    pub fn z(&self, s: f64) -> Result<f64> {
        self.check_range(s)?;
        let half = self.half_length();
        Ok(if s <= 0.5 * half {
            self.lower_z(s)
        } else {
            2.0 * self.z_mid - self.lower_z(half - s)
        })
    }

    pub fn evaluate(&self, s: f64) -> Result<ProfilePoint> {
        let (r, dr) = self.r_dr(s)?;
        let z = self.z(s)?;
        Ok(ProfilePoint {
            r,
            z,
            dr,
            dz: (1.0 - dr * dr).max(0.0).sqrt(),
        })
    }

    /// Uniform arclength grid of `[s, r, z, r']` rows.
    pub fn grid(&self, cells: usize) -> Vec<[f64; 4]> {
        let half = self.half_length();
        (0..=cells)
            .map(|i| {
                let s = if i == cells {
                    half
                } else {
                    half * i as f64 / cells as f64
                };
                let p = self.evaluate(s).expect("grid stays in range");
                [s, p.r, p.z, p.dr]
            })
            .collect()
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_with(&ValidationTolerances::default())
    }

    pub fn validate_with(&self, tol: &ValidationTolerances) -> ValidationReport {
        let half = self.half_length();
        let waist = self.waist();
        let n = GRID_CELLS;
        let ds = half / n as f64;
        let grid: Vec<(f64, f64, f64)> = (0..=n)
            .map(|i| {
                let s = if i == n { half } else { i as f64 * ds };
                let (r, dr) = self.r_dr(s).expect("grid stays in range");
                (s, r, dr)
            })
            .collect();
        let mut checks = Vec::new();

        let pole = self.r(0.0).unwrap().abs().max(self.r(half).unwrap().abs());
        let interior_min = grid[1..n].iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
        checks.push(Check::new(
            "poles",
            pole,
            tol.value,
            pole <= tol.value && interior_min > 0.0,
        ));

        let cap = grid
            .iter()
            .filter(|g| g.0 <= FRAC_PI_2)
            .map(|g| (g.1 - g.0.sin()).abs())
            .fold(0.0, f64::max);
        checks.push(Check::new(
            "cap is unit sphere",
            cap,
            tol.value,
            cap <= tol.value,
        ));

        let sym = grid
            .iter()
            .map(|g| (self.r(half - g.0).unwrap() - g.1).abs())
            .fold(0.0, f64::max);
        checks.push(Check::new(
            "symmetry",
            sym,
            tol.symmetry,
            sym <= tol.symmetry,
        ));

        let crit = (self.r(FRAC_PI_2).unwrap() - 1.0)
            .abs()
            .max((self.r(waist).unwrap() - self.params.r_min).abs())
            .max(self.r_dr(waist).unwrap().1.abs())
            .max(self.r_dr(FRAC_PI_2).unwrap().1.abs());
        checks.push(Check::new(
            "critical values",
            crit,
            tol.value,
            crit <= tol.value,
        ));

        // Sign pattern of r' away from the three interior critical points: + - + -.
        let critical = [FRAC_PI_2, waist, half - FRAC_PI_2];
        let mut pattern_ok = true;
        for &(s, _, dr) in &grid[1..n] {
            if critical.iter().any(|c| (s - c).abs() < 0.5 * ds) {
                continue;
            }
            let region = critical.iter().filter(|&&c| s > c).count();
            let expected = if region % 2 == 0 { 1.0 } else { -1.0 };
            if dr * expected <= 0.0 {
                pattern_ok = false;
            }
        }
        checks.push(Check::new(
            "critical points at pi/2, M/4, M/2 - pi/2",
            if pattern_ok { 0.0 } else { 1.0 },
            0.0,
            pattern_ok,
        ));

        let max_slope = grid[1..n].iter().map(|g| g.2.abs()).fold(0.0, f64::max);
        checks.push(Check::new("|r'| < 1", max_slope, 1.0, max_slope < 1.0));

        // Differentiate z numerically so that the height quadrature is checked
        // against r' rather than against itself.
        let h = 1e-4;
        let mut arclength = 0.0f64;
        for &(s, _, dr) in grid.iter().step_by(8) {
            if s < 2.0 * h || s > half - 2.0 * h {
                continue;
            }
            let z = |x: f64| self.z(x).unwrap();
            let dz =
                (-z(s + 2.0 * h) + 8.0 * z(s + h) - 8.0 * z(s - h) + z(s - 2.0 * h)) / (12.0 * h);
            arclength = arclength.max((dr * dr + dz * dz - 1.0).abs());
        }
        checks.push(Check::new(
            "arclength",
            arclength,
            tol.arclength,
            arclength <= tol.arclength,
        ));

        ValidationReport { checks }
    }

    pub fn to_json(&self) -> ProfileJson {
        ProfileJson {
            params: self.params,
            grid: self.grid(1000),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &self.to_json())?;
        Ok(())
    }

    /// Loads a profile JSON, rebuilds it from its parameters and checks that
    /// the stored grid agrees with the rebuilt curve.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, f64)> {
        let file = std::fs::File::open(path)?;
        let json: ProfileJson = serde_json::from_reader(std::io::BufReader::new(file))?;
        let profile = Profile::build_unchecked(json.params)?;
        let mut deviation = 0.0f64;
        for row in &json.grid {
            let p = profile.evaluate(row[0])?;
            deviation = deviation
                .max((p.r - row[1]).abs())
                .max((p.z - row[2]).abs())
                .max((p.dr - row[3]).abs());
        }
        Ok((profile, deviation))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileJson {
    #[serde(flatten)]
    pub params: ProfileParams,
    pub grid: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationTolerances {
    pub value: f64,
    pub symmetry: f64,
    pub arclength: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        ValidationTolerances {
            value: 1e-12,
            symmetry: 1e-10,
            arclength: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, residual: f64, tolerance: f64, passed: bool) -> Self {
        Check {
            name: name.to_string(),
            residual,
            tolerance,
            passed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Profile {
        Profile::build(ProfileParams::default()).unwrap()
    }

    #[test]
    fn endpoint_data_of_quintic() {
        let p = ProfileParams::default();
        let q = Quintic::new(&p);
        assert!((q.value(0.0) - 1.0).abs() < 1e-15);
        assert!(q.deriv(0.0).abs() < 1e-15);
        assert!((q.second(0.0) + 1.0).abs() < 1e-15);
        assert!((q.value(q.h) - p.r_min).abs() < 1e-13);
        assert!(q.deriv(q.h).abs() < 1e-13);
        assert!((q.second(q.h) - p.cap_junction_curvature).abs() < 1e-12);
    }

    #[test]
    fn evaluate_at_landmarks() {
        let prof = model();
        let p = prof.evaluate(0.0).unwrap();
        assert_eq!((p.r, p.z, p.dr, p.dz), (0.0, -1.0, 1.0, 0.0));
        let p = prof.evaluate(FRAC_PI_2).unwrap();
        assert!((p.r - 1.0).abs() < 1e-15 && p.z.abs() < 1e-15 && p.dr.abs() < 1e-15);
        assert!((p.dz - 1.0).abs() < 1e-15);
        let p = prof.evaluate(prof.waist()).unwrap();
        assert!((p.r - 0.5).abs() < 1e-13 && p.dr.abs() < 1e-13);
        assert!((p.z - prof.z_mid()).abs() < 1e-14);
        let top = prof.evaluate(prof.half_length()).unwrap();
        assert!(top.r.abs() < 1e-15 && (top.z - (2.0 * prof.z_mid() + 1.0)).abs() < 1e-12);
        assert!(prof.evaluate(-1e-9).is_err());
        assert!(prof.evaluate(prof.half_length() + 1e-9).is_err());
    }

    #[test]
    fn cap_height_is_minus_cosine() {
        let prof = model();
        for i in 0..=50 {
            let s = FRAC_PI_2 * i as f64 / 50.0;
            assert!((prof.z(s).unwrap() + s.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn band_height_is_continuous_across_knots() {
        let prof = model();
        let du = prof.quintic.h / Z_KNOTS as f64;
        for k in 1..Z_KNOTS {
            let s = FRAC_PI_2 + k as f64 * du;
            let left = prof.z(s - 1e-12).unwrap();
            let right = prof.z(s).unwrap();
            assert!((left - right).abs() < 1e-11);
        }
    }

    #[test]
    fn model_profile_validates() {
        let report = model().validate();
        assert!(report.passed(), "{report:?}");
        assert!(report.check("arclength").unwrap().residual < 1e-10);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            Profile::build(ProfileParams::new(1.0, 4.0 * PI)),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            Profile::build(ProfileParams::new(0.5, 2.0 * PI)),
            Err(Error::InvalidParams(_))
        ));
        let steep = ProfileParams::new(0.1, 2.2 * PI);
        assert!(matches!(
            Profile::build(steep),
            Err(Error::InadmissibleProfile(_))
        ));
        let report = Profile::build_unchecked(steep).unwrap().validate();
        assert!(!report.check("|r'| < 1").unwrap().passed);
    }
}
