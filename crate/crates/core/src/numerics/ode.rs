//! Dormand–Prince 5(4) integrator with per-step error control.
//!
//! The right-hand side is fallible so that chart guards (poles, annulus
//! edges) can abort an integration cleanly. Callers observe every accepted
//! step through a callback and may stop the integration early; event
//! location is done by re-stepping from the start of the bracketing step
//! with [`single_step`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// Differences between the 5th- and embedded 4th-order weights.
const E1: f64 = 35.0 / 384.0 - 5179.0 / 57600.0;
const E3: f64 = 500.0 / 1113.0 - 7571.0 / 16695.0;
const E4: f64 = 125.0 / 192.0 - 393.0 / 640.0;
const E5: f64 = -2187.0 / 6784.0 + 92097.0 / 339200.0;
const E6: f64 = 11.0 / 84.0 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel: 1e-12,
            abs: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub tol: Tolerances,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
    /// Magnitudes above this no longer loosen the relative tolerance, so
    /// that unwrapped angles keep a fixed absolute accuracy.
    pub magnitude_cap: f64,
}

impl Dopri5 {
    pub fn new(tol: Tolerances) -> Self {
        Dopri5 {
            tol,
            h_max: 0.25,
            h_min: 1e-14,
            max_steps: 5_000_000,
            magnitude_cap: f64::INFINITY,
        }
    }
}

/// Accepted step handed to the observer.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub y0: [f64; N],
    pub t1: f64,
    pub y1: [f64; N],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (coef, k) in terms {
        for i in 0..N {
            out[i] += h * coef * k[i];
        }
    }
    out
}

/// One Dormand–Prince step of size `h`; returns the 5th-order solution and
/// the embedded error vector.
pub fn single_step<const N: usize, F>(
    f: &F,
    t: f64,
    y: &[f64; N],
    h: f64,
) -> Result<([f64; N], [f64; N])>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let k1 = f(t, y)?;
    let (y_new, err, _) = step_with_slope(f, t, y, &k1, h)?;
    Ok((y_new, err))
}

/// Dormand–Prince step reusing the slope `k1` at the start; also returns
/// the slope at the end, which is the next step's `k1`.
fn step_with_slope<const N: usize, F>(
    f: &F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
) -> Result<([f64; N], [f64; N], [f64; N])>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let k1 = *k1;
    let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, &k1)]))?;
    let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]))?;
    let k4 = f(
        t + C4 * h,
        &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
    )?;
    let k5 = f(
        t + C5 * h,
        &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    )?;
    let k6 = f(
        t + h,
        &axpy(
            y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ),
    )?;
    let y_new = axpy(
        y,
        h,
        &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
    );
    let k7 = f(t + h, &y_new)?;
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Ok((y_new, err, k7))
}

impl Dopri5 {
    fn error_norm<const N: usize>(&self, y0: &[f64; N], y1: &[f64; N], err: &[f64; N]) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let scale =
                self.tol.abs + self.tol.rel * y0[i].abs().max(y1[i].abs()).min(self.magnitude_cap);
            let r = err[i] / scale;
            acc += r * r;
        }
        (acc / N as f64).sqrt()
    }

    /// Integrates from `t0` to `t_end` (which may lie before `t0`), landing
    /// exactly on `t_end` unless the observer stops first. Returns the final
    /// time and state.
    pub fn integrate<const N: usize, F, O>(
        &self,
        f: &F,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        mut observer: O,
    ) -> Result<(f64, [f64; N])>
    where
        F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
        O: FnMut(&Step<N>) -> Result<Control>,
    {
        let span = t_end - t0;
        if span == 0.0 {
            return Ok((t0, y0));
        }
        let dir = span.signum();
        let mut t = t0;
        let mut y = y0;
        let mut h = dir * self.initial_step(f, t0, &y0)?.min(span.abs());
        let mut k1 = f(t0, &y0)?;
        let mut steps = 0usize;
        loop {
            if steps >= self.max_steps {
                return Err(Error::TooManySteps(self.max_steps));
            }
            let remaining = t_end - t;
            let last = h.abs() >= remaining.abs();
            if last {
                h = remaining;
            }
            let (y_new, err, k_end) = step_with_slope(f, t, &y, &k1, h)?;
            let norm = self.error_norm(&y, &y_new, &err);
            if norm <= 1.0 {
                steps += 1;
                let t_new = if last { t_end } else { t + h };
                let step = Step {
                    t0: t,
                    y0: y,
                    t1: t_new,
                    y1: y_new,
                };
                t = t_new;
                y = y_new;
                k1 = k_end;
                if observer(&step)? == Control::Stop || last {
                    return Ok((t, y));
                }
                let factor = if norm == 0.0 {
                    5.0
                } else {
                    (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = dir * (h.abs() * factor).min(self.h_max);
            } else {
                let factor = (0.9 * norm.powf(-0.2)).clamp(0.1, 0.9);
                h *= factor;
                if h.abs() < self.h_min {
                    return Err(Error::StepSizeUnderflow { t, h: h.abs() });
                }
            }
        }
    }

    fn initial_step<const N: usize, F>(&self, f: &F, t0: f64, y0: &[f64; N]) -> Result<f64>
    where
        F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let dy = f(t0, y0)?;
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        for i in 0..N {
            let sc = self.tol.abs + self.tol.rel * y0[i].abs().min(self.magnitude_cap);
            d0 += (y0[i] / sc).powi(2);
            d1 += (dy[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        Ok(h.min(self.h_max).max(1e-10))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let f = |_t: f64, y: &[f64; 2]| -> Result<[f64; 2]> { Ok([y[1], -y[0]]) };
        let solver = Dopri5::new(Tolerances {
            rel: 1e-12,
            abs: 1e-13,
        });
        let (t, y) = solver
            .integrate(&f, 0.0, [1.0, 0.0], 20.0 * std::f64::consts::PI, |_| {
                Ok(Control::Continue)
            })
            .unwrap();
        assert_eq!(t, 20.0 * std::f64::consts::PI);
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
    }

    #[test]
    fn backward_integration_and_early_stop() {
        let f = |_t: f64, y: &[f64; 1]| -> Result<[f64; 1]> { Ok([y[0]]) };
        let solver = Dopri5::new(Tolerances::default());
        let (t, y) = solver
            .integrate(&f, 1.0, [1.0], 0.0, |_| Ok(Control::Continue))
            .unwrap();
        assert_eq!(t, 0.0);
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-10);

        let (t, _) = solver
            .integrate(&f, 0.0, [1.0], 10.0, |s| {
                Ok(if s.y1[0] > 2.0 {
                    Control::Stop
                } else {
                    Control::Continue
                })
            })
            .unwrap();
        assert!(t < 10.0 && t > 2f64.ln());
    }

    #[test]
    fn single_step_is_fifth_order() {
        let f = |_t: f64, y: &[f64; 1]| -> Result<[f64; 1]> { Ok([y[0]]) };
        let e1 = (single_step(&f, 0.0, &[1.0], 0.1).unwrap().0[0] - 0.1f64.exp()).abs();
        let e2 = (single_step(&f, 0.0, &[1.0], 0.05).unwrap().0[0] - 0.05f64.exp()).abs();
        // local error scales like h^6
        assert!(e1 / e2 > 40.0, "ratio {}", e1 / e2);
    }
}
