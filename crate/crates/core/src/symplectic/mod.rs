//! Paths in `Sp(2) = SL(2, R)` and their indices.
//!
//! The complex structure is `J = [[0, -1], [1, 0]]`, so that multiplication
//! by `e^{i t}` is `exp(t J)`. A path `Psi` solves `Psi' = J S Psi` with `S`
//! symmetric.

pub mod chain;
pub mod conley_zehnder;
pub mod morse_bott;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use chain::{z2_homology, Z2ChainComplex};
pub use conley_zehnder::{cz_index, maslov_loop};
pub use morse_bott::{
    assemble_model_homology, gradient_flowlines, linearized_monodromy, perturbed_pair,
};

/// Row-major 2x2 real matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);
    pub const J: Mat2 = Mat2([[0.0, -1.0], [1.0, 0.0]]);

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, d)
    }

    pub fn a(&self) -> f64 {
        self.0[0][0]
    }
    pub fn b(&self) -> f64 {
        self.0[0][1]
    }
    pub fn c(&self) -> f64 {
        self.0[1][0]
    }
    pub fn d(&self) -> f64 {
        self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.a() * self.d() - self.b() * self.c()
    }

    pub fn trace(&self) -> f64 {
        self.a() + self.d()
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let (x, y) = (&self.0, &o.0);
        Mat2([
            [
                x[0][0] * y[0][0] + x[0][1] * y[1][0],
                x[0][0] * y[0][1] + x[0][1] * y[1][1],
            ],
            [
                x[1][0] * y[0][0] + x[1][1] * y[1][0],
                x[1][0] * y[0][1] + x[1][1] * y[1][1],
            ],
        ])
    }

    pub fn scale(&self, k: f64) -> Mat2 {
        Mat2::new(k * self.a(), k * self.b(), k * self.c(), k * self.d())
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a() + o.a(),
            self.b() + o.b(),
            self.c() + o.c(),
            self.d() + o.d(),
        )
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        self.add(&o.scale(-1.0))
    }

    pub fn inverse(&self) -> Mat2 {
        Mat2::new(self.d(), -self.b(), -self.c(), self.a()).scale(1.0 / self.det())
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a() * v[0] + self.b() * v[1],
            self.c() * v[0] + self.d() * v[1],
        ]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `det(Psi - I)`, which equals `2 - tr Psi` on `SL(2)`.
    pub fn det_minus_identity(&self) -> f64 {
        self.sub(&Mat2::IDENTITY).det()
    }

    /// Exponential of a matrix, via the trace-free part.
    pub fn exp(x: &Mat2) -> Mat2 {
        let half_tr = 0.5 * x.trace();
        let y = x.sub(&Mat2::IDENTITY.scale(half_tr));
        let (c, s) = cosh_sinhc(-y.det());
        Mat2::IDENTITY
            .scale(c)
            .add(&y.scale(s))
            .scale(half_tr.exp())
    }

    /// Logarithm of an `SL(2)` matrix near the identity, returning the
    /// trace-free `X` with `exp(X) = self`. Fails when `tr <= -2 + margin`,
    /// where the principal logarithm is not defined or ill-conditioned.
    pub fn log_sl2(&self) -> Result<Mat2> {
        let half_tr = 0.5 * self.trace();
        let y = self.sub(&Mat2::IDENTITY.scale(half_tr));
        if half_tr > 1.0 {
            let phi = half_tr.acosh();
            Ok(y.scale(phi / phi.sinh()))
        } else if half_tr > -0.7 {
            let phi = half_tr.clamp(-1.0, 1.0).acos();
            let k = if phi < 1e-8 { 1.0 } else { phi / phi.sin() };
            Ok(y.scale(k))
        } else {
            Err(Error::Dimension(format!(
                "samples too far apart for an interpolating logarithm (half trace {half_tr})"
            )))
        }
    }

    /// Symmetric generator `S = -J X` of `exp(X)` for trace-free `X`.
    pub fn generator_of(x: &Mat2) -> Mat2 {
        Mat2::J.scale(-1.0).mul(x)
    }
}

/// `(cosh sqrt(q), sinh sqrt(q) / sqrt(q))`, continued analytically to `q <= 0`.
fn cosh_sinhc(q: f64) -> (f64, f64) {
    if q > 1e-12 {
        let r = q.sqrt();
        (r.cosh(), r.sinh() / r)
    } else if q < -1e-12 {
        let r = (-q).sqrt();
        (r.cos(), r.sin() / r)
    } else {
        (1.0 + 0.5 * q, 1.0 + q / 6.0)
    }
}

/// A sampled path of symplectic 2x2 matrices on `[0, 1]`.
///
/// Between samples the path is the one-parameter subgroup interpolation
/// `Psi_k exp(s X_k)`, which keeps it symplectic and makes the generator `S`
/// constant on each segment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymplecticPath {
    pub times: Vec<f64>,
    pub matrices: Vec<Mat2>,
}

/// Tolerance on `det Psi = 1`.
pub const DET_TOL: f64 = 1e-10;

impl SymplecticPath {
    pub fn new(times: Vec<f64>, matrices: Vec<Mat2>) -> Result<Self> {
        if times.len() != matrices.len() || times.len() < 2 {
            return Err(Error::Dimension(format!(
                "{} times for {} matrices (need at least two samples)",
                times.len(),
                matrices.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("sample times must increase".into()));
        }
        for (t, m) in times.iter().zip(&matrices) {
            if (m.det() - 1.0).abs() > DET_TOL {
                return Err(Error::InvalidParams(format!(
                    "det = {} at t = {t}",
                    m.det()
                )));
            }
        }
        Ok(SymplecticPath { times, matrices })
    }

    /// Samples `f` at `n + 1` equally spaced times in `[0, 1]`.
    pub fn from_fn<F: Fn(f64) -> Mat2>(f: F, n: usize) -> Result<Self> {
        let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let matrices = times.iter().map(|&t| f(t)).collect();
        Self::new(times, matrices)
    }

    /// `t -> exp(t A)` on `[0, 1]`, with enough samples for the interpolation.
    pub fn exponential(a: &Mat2, min_samples: usize) -> Result<Self> {
        let n = min_samples.max((8.0 * a.norm()).ceil() as usize);
        Self::from_fn(|t| Mat2::exp(&a.scale(t)), n)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> Mat2 {
        self.matrices[0]
    }

    pub fn end(&self) -> Mat2 {
        *self.matrices.last().unwrap()
    }

    /// Trace-free generator of each segment: `Psi_{k+1} = Psi_k exp(X_k)`.
    pub fn segment_logs(&self) -> Result<Vec<Mat2>> {
        self.matrices
            .windows(2)
            .map(|w| w[0].inverse().mul(&w[1]).log_sl2())
            .collect()
    }

    /// Interpolated value at `t`.
    pub fn at(&self, t: f64) -> Result<Mat2> {
        let k = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            i => (i - 1).min(self.len() - 2),
        };
        let x = self.matrices[k]
            .inverse()
            .mul(&self.matrices[k + 1])
            .log_sl2()?;
        let s = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        Ok(self.matrices[k].mul(&Mat2::exp(&x.scale(s))))
    }

    /// Pointwise product `gamma(t) Psi(t)` on the union of the sample times.
    pub fn left_multiply(&self, gamma: &SymplecticPath) -> Result<SymplecticPath> {
        let mut times: Vec<f64> = self.times.iter().chain(&gamma.times).copied().collect();
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let matrices = times
            .iter()
            .map(|&t| Ok(gamma.at(t)?.mul(&self.at(t)?)))
            .collect::<Result<Vec<_>>>()?;
        SymplecticPath::new(times, matrices)
    }

    /// Reverses the direction of each matrix: `t -> Psi(t)^{-1}`.
    pub fn inverse(&self) -> SymplecticPath {
        SymplecticPath {
            times: self.times.clone(),
            matrices: self.matrices.iter().map(Mat2::inverse).collect(),
        }
    }

    /// Reparametrizes by a monotone map `rho` of `[0, 1]` fixing the endpoints.
    pub fn reparametrize<F: Fn(f64) -> f64>(&self, rho: F, n: usize) -> Result<SymplecticPath> {
        let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let matrices = times
            .iter()
            .map(|&t| self.at(rho(t)))
            .collect::<Result<Vec<_>>>()?;
        SymplecticPath::new(times, matrices)
    }
}
