//! Adaptive Dormand-Prince 5(4) integrator for small fixed-size systems.
//!
//! The driver hands every accepted step to a caller-supplied observer, which
//! is where event detection happens. Values inside an accepted step are
//! obtained by re-stepping from the step start with a shorter step
//! ([`rk_step`]), so "dense" evaluations carry the same local accuracy as
//! the accepted steps themselves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative and absolute error tolerances of the embedded pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

impl Tolerances {
    /// Both tolerances divided by `factor`.
    pub fn tightened(self, factor: f64) -> Self {
        Self {
            rtol: self.rtol / factor,
            atol: self.atol / factor,
        }
    }
}

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

// fifth-order weights (also row 7 of the tableau, FSAL)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// difference between fifth- and fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// One Dormand-Prince step. Returns the fifth-order solution and the
/// embedded error vector.
pub fn rk_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], h: f64) -> ([f64; N], [f64; N])
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    rk_step_with_k1(f, t, y, h, &k1)
}

fn rk_step_with_k1<const N: usize, F>(
    f: &F,
    t: f64,
    y: &[f64; N],
    h: f64,
    k1: &[f64; N],
) -> ([f64; N], [f64; N])
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(
        t + C5 * h,
        &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = f(
        t + h,
        &axpy(
            y,
            h,
            &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ),
    );
    let y5 = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y5);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y5, err)
}

/// An accepted step, as seen by the observer.
#[derive(Clone, Copy, Debug)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub y0: [f64; N],
    pub t1: f64,
    pub y1: [f64; N],
}

/// Observer verdict after an accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Step-size controller settings.
#[derive(Clone, Copy, Debug)]
pub struct Settings {
    pub tol: Tolerances,
    pub h_init: f64,
    /// Largest admissible step.
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            h_init: 1e-4,
            h_max: 0.05,
            h_min: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, invoking `observe` after
/// every accepted step. Non-finite derivatives cause step rejection; the
/// integration fails with [`Error::StepFailure`] when the step underflows.
pub fn integrate<const N: usize, F, O>(
    f: &F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    settings: &Settings,
    mut observe: O,
) -> Result<()>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    O: FnMut(&Step<N>) -> Result<Control>,
{
    let mut t = t0;
    let mut y = y0;
    let mut h = settings.h_init.min(t_end - t0).min(settings.h_max);
    let mut k1 = f(t, &y);
    let mut steps = 0usize;
    while t < t_end {
        if steps >= settings.max_steps {
            return Err(Error::StepFailure { at: t });
        }
        steps += 1;
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let (y_new, err) = rk_step_with_k1(f, t, &y, h, &k1);
        let mut norm = 0.0;
        for i in 0..N {
            let sc = settings.tol.atol + settings.tol.rtol * y[i].abs().max(y_new[i].abs());
            let r = err[i] / sc;
            norm += r * r;
        }
        let norm = (norm / N as f64).sqrt();
        if !norm.is_finite() || norm > 1.0 {
            let fac = if norm.is_finite() {
                (0.9 * norm.powf(-0.2)).max(0.2)
            } else {
                0.25
            };
            h *= fac;
            if h < settings.h_min {
                return Err(Error::StepFailure { at: t });
            }
            continue;
        }
        let t_new = if last { t_end } else { t + h };
        let step = Step {
            t0: t,
            y0: y,
            t1: t_new,
            y1: y_new,
        };
        let ctl = observe(&step)?;
        t = t_new;
        y = y_new;
        if ctl == Control::Stop {
            break;
        }
        k1 = f(t, &y);
        let fac = if norm == 0.0 {
            5.0
        } else {
            (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * fac).min(settings.h_max);
    }
    Ok(())
}

/// Finds `s` in `[a, b]` with `g(s) = 0` by bisection, given `g(a)` and
/// `g(b)` of opposite sign (or one of them zero). Stops when
/// `|g| <= ftol` or the bracket collapses to floating-point resolution.
pub fn bisect<G: FnMut(f64) -> f64>(mut g: G, mut a: f64, mut b: f64, ftol: f64) -> f64 {
    let mut ga = g(a);
    if ga == 0.0 {
        return a;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return m;
        }
        let gm = g(m);
        if gm.abs() <= ftol {
            return m;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let f = |_t: f64, y: &[f64; 1]| [-y[0]];
        let mut last = [0.0; 1];
        integrate(&f, 0.0, [1.0], 3.0, &Settings::default(), |s| {
            last = s.y1;
            Ok(Control::Continue)
        })
        .unwrap();
        assert!((last[0] - (-3.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_conserves_energy() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut worst: f64 = 0.0;
        integrate(&f, 0.0, [1.0, 0.0], 20.0, &Settings::default(), |s| {
            let e = s.y1[0] * s.y1[0] + s.y1[1] * s.y1[1];
            worst = worst.max((e - 1.0).abs());
            Ok(Control::Continue)
        })
        .unwrap();
        assert!(worst < 1e-8, "energy drift {worst}");
    }

    #[test]
    fn observer_can_stop_early() {
        let f = |_t: f64, _y: &[f64; 1]| [1.0];
        let mut t_stop = 0.0;
        integrate(&f, 0.0, [0.0], 10.0, &Settings::default(), |s| {
            t_stop = s.t1;
            Ok(if s.t1 > 1.0 { Control::Stop } else { Control::Continue })
        })
        .unwrap();
        assert!(t_stop > 1.0 && t_stop < 2.0);
    }

    #[test]
    fn non_finite_rhs_is_a_step_failure() {
        let f = |t: f64, _y: &[f64; 1]| [if t > 0.5 { f64::NAN } else { 1.0 }];
        let err = integrate(&f, 0.0, [0.0], 1.0, &Settings::default(), |_| Ok(Control::Continue));
        assert!(matches!(err, Err(Error::StepFailure { .. })));
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }
}
