//! Geometric trajectory `phi(eta)` of the constrained Euler-Lagrange problem.
//!
//! The second-order trajectory equation is integrated together with the
//! three constraint quadratures, the generalized-area quadrature and the
//! loss quadrature as augmented states, so every accumulated integral shares
//! the error control of the trajectory itself.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_sig;
use crate::ode::{self, Control, Settings, Tolerances};

/// Distance from `pi/2` at which `sec(phi)` is considered singular.
pub const GUARD_BAND: f64 = 1e-6;

/// Default upper bound of the integration in `eta`.
pub const DEFAULT_ETA_MAX: f64 = 3.0 * std::f64::consts::PI;

/// Event refinement target for `|phi|` at a zero crossing.
const CROSSING_FTOL: f64 = 1e-12;

/// Lagrange multipliers of the three constraints (terminal angle and the
/// two components of the second-order deviation).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LagrangeMultipliers {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl LagrangeMultipliers {
    pub const fn new(lambda0: f64, lambda1: f64, lambda2: f64) -> Self {
        Self {
            lambda0,
            lambda1,
            lambda2,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.lambda0, self.lambda1, self.lambda2]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Second derivative `d^2 phi / d eta^2` of the trajectory.
pub fn el_rhs(
    eta: f64,
    phi: f64,
    phi_prime: f64,
    lam: &LagrangeMultipliers,
    sign_etadot: f64,
) -> Result<f64> {
    if !(phi.abs() < FRAC_PI_2) {
        return Err(Error::Domain { phi });
    }
    Ok(el_rhs_unchecked(eta, phi, phi_prime, lam, sign_etadot))
}

#[inline]
fn el_rhs_unchecked(
    eta: f64,
    phi: f64,
    phi_prime: f64,
    lam: &LagrangeMultipliers,
    sign_etadot: f64,
) -> f64 {
    let (s, c) = phi.sin_cos();
    let c2 = c * c;
    let p2 = phi_prime * phi_prime;
    let drive = lam.lambda0 / c + lam.lambda1 * eta.sin() - lam.lambda2 * eta.cos();
    -(2.0 * p2 + c2) * (s / c) + sign_etadot * drive * (p2 + c2).powf(1.5)
}

/// Number of integrated states: phi, phi', xi0, xi1, xi2, area, loss.
pub(crate) const DIM: usize = 7;

pub(crate) fn augmented_rhs(lam: LagrangeMultipliers) -> impl Fn(f64, &[f64; DIM]) -> [f64; DIM] {
    move |eta, y| {
        let phi = y[0];
        let dphi = y[1];
        if !(phi.abs() < FRAC_PI_2) {
            return [f64::NAN; DIM];
        }
        let (s, c) = phi.sin_cos();
        let (se, ce) = eta.sin_cos();
        let w = (dphi * dphi + c * c).sqrt();
        [
            dphi,
            el_rhs_unchecked(eta, phi, dphi, &lam, 1.0),
            s,
            dphi * ce + se * s * c,
            dphi * se - ce * s * c,
            2.0 * w,
            2.0 * w * s * s,
        ]
    }
}

/// One stored sample of the trajectory and its accumulated integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub eta: f64,
    pub phi: f64,
    pub phi_prime: f64,
    pub xi0: f64,
    pub xi1: f64,
    pub xi2: f64,
    /// Accumulated generalized area `2 * int sqrt(phi'^2 + cos^2 phi) d eta`.
    pub area_partial: f64,
    /// Accumulated `2 * int sin^2(phi) sqrt(phi'^2 + cos^2 phi) d eta`; the
    /// excited-state time-area times the Rabi amplitude under the
    /// energy-optimal parametrization.
    pub loss_partial: f64,
}

impl TrajectoryPoint {
    fn from_state(eta: f64, y: &[f64; DIM]) -> Self {
        Self {
            eta,
            phi: y[0],
            phi_prime: y[1],
            xi0: y[2],
            xi1: y[3],
            xi2: y[4],
            area_partial: y[5],
            loss_partial: y[6],
        }
    }

    fn state(&self) -> [f64; DIM] {
        [
            self.phi,
            self.phi_prime,
            self.xi0,
            self.xi1,
            self.xi2,
            self.area_partial,
            self.loss_partial,
        ]
    }
}

/// Where a candidate trajectory is cut to define `eta_f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Terminal {
    /// The k-th sign change of `phi` after `eta = 0` (1-based).
    Crossing(usize),
    /// The k-th interior local minimum of `phi` (1-based). A trajectory
    /// launched with zero slope returns to `phi = 0` tangentially, so its end
    /// point is a minimum rather than a sign change.
    Touch(usize),
}

impl Terminal {
    pub fn index(&self) -> usize {
        match *self {
            Terminal::Crossing(k) | Terminal::Touch(k) => k,
        }
    }
}

/// Sampled trajectory over `[0, eta_end]` with located events.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectorySolution {
    pub lam: LagrangeMultipliers,
    pub phidot_i: f64,
    pub tol: Tolerances,
    pub points: Vec<TrajectoryPoint>,
    /// Sign changes of `phi`, excluding the start point.
    pub zero_crossings: Vec<f64>,
    /// Interior local minima of `phi`.
    pub minima: Vec<f64>,
}

/// Integration options for [`integrate_with`].
#[derive(Clone, Copy, Debug)]
pub struct IntegrateOptions {
    pub eta_max: f64,
    pub tol: Tolerances,
    /// Stop and truncate at this terminal event instead of running to
    /// `eta_max`.
    pub stop_at: Option<Terminal>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            eta_max: DEFAULT_ETA_MAX,
            tol: Tolerances::default(),
            stop_at: None,
        }
    }
}

/// Integrates the trajectory from `phi(0) = 0`, `phi'(0) = phidot_i` up to
/// `eta_max` with default tolerances.
pub fn integrate(lam: LagrangeMultipliers, phidot_i: f64, eta_max: f64) -> Result<TrajectorySolution> {
    integrate_with(
        lam,
        phidot_i,
        &IntegrateOptions {
            eta_max,
            ..Default::default()
        },
    )
}

pub fn integrate_with(
    lam: LagrangeMultipliers,
    phidot_i: f64,
    opts: &IntegrateOptions,
) -> Result<TrajectorySolution> {
    if !(opts.eta_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "eta_max must be positive, got {}",
            opts.eta_max
        )));
    }
    if !lam.is_finite() || !phidot_i.is_finite() {
        return Err(Error::InvalidInput("non-finite trajectory parameters".into()));
    }
    let f = augmented_rhs(lam);
    let y0 = [0.0, phidot_i, 0.0, 0.0, 0.0, 0.0, 0.0];
    let settings = Settings {
        tol: opts.tol,
        h_init: 1e-3 / (1.0 + phidot_i.abs()),
        ..Default::default()
    };
    let mut points = vec![TrajectoryPoint::from_state(0.0, &y0)];
    let mut zero_crossings = Vec::new();
    let mut minima = Vec::new();
    let limit = FRAC_PI_2 - GUARD_BAND;
    let mut end: Option<(f64, [f64; DIM])> = None;
    let mut last_phi = 0.0f64;
    let mut last_slope = phidot_i;
    let mut last_eta = 0.0f64;

    let run = ode::integrate(&f, 0.0, y0, opts.eta_max, &settings, |step| {
        last_phi = step.y1[0];
        last_slope = step.y1[1];
        last_eta = step.t1;
        if step.y1[0].abs() >= limit {
            return Err(Error::SingularTrajectory { eta: step.t1 });
        }
        // value of the state at an interior point of the accepted step
        let at = |s: f64| -> [f64; DIM] {
            if s <= step.t0 {
                step.y0
            } else {
                ode::rk_step(&f, step.t0, &step.y0, s - step.t0).0
            }
        };
        let mut events: Vec<(f64, Terminal)> = Vec::new();
        let (d0, d1) = (step.y0[1], step.y1[1]);
        let is_min = d0 < 0.0 && d1 >= 0.0;
        let extremum = (is_min || (d0 > 0.0 && d1 <= 0.0)).then(|| ode::bisect(|s| at(s)[1], step.t0, step.t1, 0.0));
        // a shallow excursion through zero and back can fit inside one step,
        // so the step is split at its extremum before looking for sign changes
        let mut nodes = vec![(step.t0, step.y0[0])];
        if let Some(m) = extremum {
            nodes.push((m, at(m)[0]));
        }
        nodes.push((step.t1, step.y1[0]));
        for w in nodes.windows(2) {
            let ((a, pa), (b, pb)) = (w[0], w[1]);
            if (pa > 0.0 && pb <= 0.0) || (pa < 0.0 && pb >= 0.0) {
                let eta = ode::bisect(|s| at(s)[0], a, b, CROSSING_FTOL);
                zero_crossings.push(eta);
                events.push((eta, Terminal::Crossing(zero_crossings.len())));
            }
        }
        if let (true, Some(eta)) = (is_min, extremum) {
            minima.push(eta);
            events.push((eta, Terminal::Touch(minima.len())));
        }
        if let Some(target) = opts.stop_at {
            events.sort_by(|a, b| a.0.total_cmp(&b.0));
            if let Some(&(eta, _)) = events.iter().find(|(_, t)| *t == target) {
                end = Some((eta, at(eta)));
                return Ok(Control::Stop);
            }
        }
        points.push(TrajectoryPoint::from_state(step.t1, &step.y1));
        Ok(Control::Continue)
    });
    match run {
        // the step size collapses when sec(phi) or the slope blows up
        Err(Error::StepFailure { .. }) if last_phi.abs() > FRAC_PI_2 - 1e-2 || last_slope.abs() > 1e4 => {
            return Err(Error::SingularTrajectory { eta: last_eta });
        }
        r => r?,
    }

    if let Some((eta, y)) = end {
        if eta > points.last().map_or(0.0, |p| p.eta) {
            points.push(TrajectoryPoint::from_state(eta, &y));
        }
        zero_crossings.retain(|&e| e <= eta);
        minima.retain(|&e| e <= eta);
    } else if let Some(target) = opts.stop_at {
        let found = match target {
            Terminal::Crossing(_) => zero_crossings.len(),
            Terminal::Touch(_) => minima.len(),
        };
        return Err(Error::InsufficientCrossings {
            requested: target.index(),
            found,
        });
    }

    Ok(TrajectorySolution {
        lam,
        phidot_i,
        tol: opts.tol,
        points,
        zero_crossings,
        minima,
    })
}

impl TrajectorySolution {
    pub fn eta_end(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.eta)
    }

    pub fn final_point(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory has at least the start point")
    }

    /// Location of a terminal event, if the trajectory contains it.
    pub fn terminal_eta(&self, terminal: Terminal) -> Option<f64> {
        let list = match terminal {
            Terminal::Crossing(_) => &self.zero_crossings,
            Terminal::Touch(_) => &self.minima,
        };
        let k = terminal.index();
        if k == 0 {
            None
        } else {
            list.get(k - 1).copied()
        }
    }

    /// Full state at an arbitrary `eta` inside the stored range.
    pub fn state_at(&self, eta: f64) -> Result<TrajectoryPoint> {
        let end = self.eta_end();
        if !(eta >= 0.0 && eta <= end * (1.0 + 1e-14)) {
            return Err(Error::InvalidInput(format!(
                "eta = {eta} outside trajectory range [0, {end}]"
            )));
        }
        let idx = self.points.partition_point(|p| p.eta <= eta);
        let base = &self.points[idx.saturating_sub(1)];
        let h = eta - base.eta;
        if h <= 0.0 {
            return Ok(*base);
        }
        let f = augmented_rhs(self.lam);
        let (y, _) = ode::rk_step(&f, base.eta, &base.state(), h);
        Ok(TrajectoryPoint::from_state(eta, &y))
    }

    /// Copy truncated at `eta_f`, whose last point is exactly `eta_f`.
    pub fn truncated(&self, eta_f: f64) -> Result<TrajectorySolution> {
        let last = self.state_at(eta_f)?;
        let mut points: Vec<_> = self.points.iter().copied().filter(|p| p.eta < eta_f).collect();
        points.push(last);
        Ok(TrajectorySolution {
            lam: self.lam,
            phidot_i: self.phidot_i,
            tol: self.tol,
            points,
            zero_crossings: self.zero_crossings.iter().copied().filter(|&e| e <= eta_f).collect(),
            minima: self.minima.iter().copied().filter(|&e| e <= eta_f).collect(),
        })
    }

    /// Largest `|phi|` over the stored range, refined between samples.
    pub fn phi_max(&self) -> f64 {
        let (i, _) = self
            .points
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.phi.abs().total_cmp(&b.1.phi.abs()))
            .expect("non-empty");
        let sign = self.points[i].phi.signum();
        // the peak of |phi| lies where phi' changes sign next to sample i
        let lo = self.points[i.saturating_sub(1)].eta;
        let hi = self.points[(i + 1).min(self.points.len() - 1)].eta;
        let dphi = |e: f64| self.state_at(e).map(|p| sign * p.phi_prime).unwrap_or(0.0);
        let (da, db) = (dphi(lo), dphi(hi));
        let mut best = self.points[i].phi.abs();
        if da > 0.0 && db < 0.0 {
            let e = ode::bisect(dphi, lo, hi, 0.0);
            if let Ok(p) = self.state_at(e) {
                best = best.max(p.phi.abs());
            }
        }
        best
    }

    /// Writes `eta, phi, phi_prime, xi0, xi1, xi2, area_partial` with 15
    /// significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["eta", "phi", "phi_prime", "xi0", "xi1", "xi2", "area_partial"])
            .map_err(csv_err)?;
        for p in &self.points {
            w.write_record(
                [p.eta, p.phi, p.phi_prime, p.xi0, p.xi1, p.xi2, p.area_partial].map(|v| fmt_sig(v, 15)),
            )
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Ground-state mixing angle along the trajectory, on the branch that ends
/// at `theta_f = +pi/2`.
///
/// The integrated family has `phi >= 0`, for which `-xi0` ends at `-pi/2`.
/// Its mirror image `phi -> -phi` has identical area and constraints and
/// ends at `+pi/2`; the angle returned here belongs to that mirror, i.e. it
/// is `+xi0(eta)`.
pub fn theta_of_eta(traj: &TrajectorySolution, eta: f64) -> Result<f64> {
    Ok(traj.state_at(eta)?.xi0)
}
