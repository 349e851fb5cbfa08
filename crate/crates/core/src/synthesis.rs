//! Time-domain pulses from a geometric extremum.
//!
//! The energy-optimal parametrization runs the trajectory at constant
//! generalized Rabi frequency `Omega = A / T`, i.e. `d eta/dt =
//! Omega / (2 sqrt(phi'^2 + cos^2 phi))`. Pulses follow from the angles.
//! Internally `hbar = 1`; times are in the same unit as `T`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_sig;
use crate::ode::{self, Control, Settings, Tolerances};
use crate::quad;
use crate::solver::ExtremalSolution;
use crate::trajectory::{csv_err, el_rhs, TrajectorySolution};

/// Default number of time samples.
pub const DEFAULT_POINTS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseLabel {
    RobustExtremal,
    ReferenceCosSin,
    Custom,
}

impl std::fmt::Display for PulseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PulseLabel::RobustExtremal => "robust-extremal",
            PulseLabel::ReferenceCosSin => "reference-cos-sin",
            PulseLabel::Custom => "custom",
        })
    }
}

/// Pump and Stokes Rabi frequencies sampled on a uniform grid over `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSet {
    pub t: Vec<f64>,
    pub omega_p: Vec<f64>,
    pub omega_s: Vec<f64>,
    pub duration: f64,
    /// Generalized Rabi amplitude; constant for the built-in pulse families.
    pub omega: f64,
    pub label: PulseLabel,
}

fn uniform_grid(duration: f64, n: usize) -> Result<Vec<f64>> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::InvalidInput(format!("duration must be positive, got {duration}")));
    }
    if n < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 time samples, got {n}")));
    }
    let h = duration / (n - 1) as f64;
    let mut t: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
    t[n - 1] = duration;
    Ok(t)
}

impl PulseSet {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.duration / (self.len() - 1) as f64
    }

    /// Checks that the grid is uniform over `[0, T]` and the arrays agree.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n < 4 || self.omega_p.len() != n || self.omega_s.len() != n {
            return Err(Error::GridMismatch(format!(
                "pulse arrays have lengths {}/{}/{}",
                n,
                self.omega_p.len(),
                self.omega_s.len()
            )));
        }
        let h = self.dt();
        for (k, &t) in self.t.iter().enumerate() {
            if (t - k as f64 * h).abs() > 1e-9 * self.duration {
                return Err(Error::GridMismatch(format!("non-uniform time grid at index {k}")));
            }
        }
        Ok(())
    }

    /// Interpolated `(Omega_P, Omega_S)` at time `t`.
    pub fn value_at(&self, t: f64) -> (f64, f64) {
        let h = self.dt();
        (quad::interp_cubic(&self.omega_p, h, t), quad::interp_cubic(&self.omega_s, h, t))
    }

    /// Pulses played backwards. With a real Hamiltonian the reversed
    /// propagator is the transpose of the forward one, so these drive the
    /// reverse transfer `|3> -> |1>`.
    pub fn time_reversed(&self) -> PulseSet {
        let mut out = self.clone();
        out.omega_p.reverse();
        out.omega_s.reverse();
        out
    }

    /// `sqrt(Omega_P^2 + Omega_S^2)` at every sample.
    pub fn generalized_amplitude(&self) -> Vec<f64> {
        self.omega_p.iter().zip(&self.omega_s).map(|(p, s)| p.hypot(*s)).collect()
    }

    /// Pulse CSV: `t_over_T, omega_p_T, omega_s_T, abs_omega_p_T,
    /// abs_omega_s_T`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_over_T", "omega_p_T", "omega_s_T", "abs_omega_p_T", "abs_omega_s_T"])
            .map_err(csv_err)?;
        let tt = self.duration;
        for k in 0..self.len() {
            let (p, s) = (self.omega_p[k] * tt, self.omega_s[k] * tt);
            w.write_record([self.t[k] / tt, p, s, p.abs(), s.abs()].map(|v| fmt_sig(v, 15)))
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Angles `(phi, eta, theta)` and their rates on a uniform time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleDynamics {
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
    pub eta: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi_dot: Vec<f64>,
    pub eta_dot: Vec<f64>,
    pub theta_dot: Vec<f64>,
    pub duration: f64,
}

impl AngleDynamics {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.duration / (self.len() - 1) as f64
    }

    fn with_capacity(n: usize, duration: f64) -> Self {
        let v = || Vec::with_capacity(n);
        Self {
            t: v(),
            phi: v(),
            eta: v(),
            theta: v(),
            phi_dot: v(),
            eta_dot: v(),
            theta_dot: v(),
            duration,
        }
    }

    /// Pump and Stokes fields generated by these angles.
    pub fn pulses(&self, omega: f64, label: PulseLabel) -> PulseSet {
        let n = self.len();
        let mut omega_p = Vec::with_capacity(n);
        let mut omega_s = Vec::with_capacity(n);
        for k in 0..n {
            let cp = self.phi[k].cos();
            let (st, ct) = self.theta[k].sin_cos();
            let (ed, pd) = (self.eta_dot[k], self.phi_dot[k]);
            omega_p.push(2.0 * (ed * cp * st - pd * ct));
            omega_s.push(2.0 * (-ed * cp * ct - pd * st));
        }
        PulseSet {
            t: self.t.clone(),
            omega_p,
            omega_s,
            duration: self.duration,
            omega,
            label,
        }
    }

    /// Largest `|theta_dot + eta_dot sin(phi)|` over the grid.
    pub fn theta_rate_defect(&self) -> f64 {
        (0..self.len())
            .map(|k| (self.theta_dot[k] + self.eta_dot[k] * self.phi[k].sin()).abs())
            .fold(0.0, f64::max)
    }

    /// Angles CSV: `t_over_T, phi, eta, theta, phi_dot_T, eta_dot_T,
    /// theta_dot_T`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_over_T", "phi", "eta", "theta", "phi_dot_T", "eta_dot_T", "theta_dot_T"])
            .map_err(csv_err)?;
        let tt = self.duration;
        for k in 0..self.len() {
            w.write_record(
                [
                    self.t[k] / tt,
                    self.phi[k],
                    self.eta[k],
                    self.theta[k],
                    self.phi_dot[k] * tt,
                    self.eta_dot[k] * tt,
                    self.theta_dot[k] * tt,
                ]
                .map(|v| fmt_sig(v, 15)),
            )
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Energy-optimal time parametrization of a converged extremum, sampled at
/// [`DEFAULT_POINTS`] times.
pub fn time_parametrize(sol: &ExtremalSolution, duration: f64) -> Result<AngleDynamics> {
    time_parametrize_with(sol, duration, DEFAULT_POINTS)
}

/// Runs the trajectory in time: `(eta, phi~, phi~', xi0)` are integrated
/// with `d/dt = eta_dot d/d eta` and `eta_dot = Omega / (2 w)`.
///
/// The returned angles are on the `theta_f = +pi/2` branch:
/// `phi(t) = -phi~(eta(t))`, `theta(t) = xi0(eta(t))`.
pub fn time_parametrize_with(sol: &ExtremalSolution, duration: f64, n: usize) -> Result<AngleDynamics> {
    let t = uniform_grid(duration, n)?;
    let omega = sol.area / duration;
    let lam = sol.lam;
    let rhs = move |_t: f64, y: &[f64; 4]| -> [f64; 4] {
        let (eta, ph, dph) = (y[0], y[1], y[2]);
        let c = ph.cos();
        let etadot = omega / (2.0 * (dph * dph + c * c).sqrt());
        let dd = el_rhs(eta, ph, dph, &lam, 1.0).unwrap_or(f64::NAN);
        [etadot, dph * etadot, dd * etadot, ph.sin() * etadot]
    };
    let settings = Settings {
        tol: Tolerances::default(),
        h_init: 1e-4 * duration / (1.0 + sol.phidot_i),
        h_max: duration / 64.0,
        ..Default::default()
    };
    let mut states: Vec<[f64; 4]> = Vec::with_capacity(n);
    states.push([0.0, 0.0, sol.phidot_i, 0.0]);
    let mut next = 1;
    ode::integrate(&rhs, 0.0, states[0], duration, &settings, |step| {
        while next < n && t[next] <= step.t1 {
            let y = if t[next] == step.t1 {
                step.y1
            } else {
                ode::rk_step(&rhs, step.t0, &step.y0, t[next] - step.t0).0
            };
            states.push(y);
            next += 1;
        }
        Ok(Control::Continue)
    })?;
    while states.len() < n {
        // only reachable through rounding of the final grid time
        states.push(*states.last().expect("non-empty"));
    }

    let mut a = AngleDynamics::with_capacity(n, duration);
    for (k, y) in states.iter().enumerate() {
        let (eta, ph, dph, xi0) = (y[0], y[1], y[2], y[3]);
        let c = ph.cos();
        let etadot = omega / (2.0 * (dph * dph + c * c).sqrt());
        a.t.push(t[k]);
        a.eta.push(eta);
        a.phi.push(-ph);
        a.theta.push(xi0);
        a.eta_dot.push(etadot);
        a.phi_dot.push(-dph * etadot);
        a.theta_dot.push(ph.sin() * etadot);
    }
    Ok(a)
}

/// `eta` at which the partial area of the trajectory equals `area`, found
/// by bisection on the dense trajectory.
pub fn eta_at_partial_area(traj: &TrajectorySolution, area: f64) -> Result<f64> {
    let total = traj.final_point().area_partial;
    if !(0.0..=total * (1.0 + 1e-12)).contains(&area) {
        return Err(Error::InvalidInput(format!("partial area {area} outside [0, {total}]")));
    }
    let pts = &traj.points;
    let k = pts.partition_point(|p| p.area_partial < area);
    if k == 0 {
        return Ok(0.0);
    }
    if k >= pts.len() {
        return Ok(traj.eta_end());
    }
    let (lo, hi) = (pts[k - 1].eta, pts[k].eta);
    let g = |e: f64| traj.state_at(e).map(|p| p.area_partial - area).unwrap_or(f64::NAN);
    Ok(ode::bisect(g, lo, hi, 1e-15 * total))
}

/// `eta(t)` from the partial-area relation `A(eta) = Omega t`; an
/// independent route to the one in [`time_parametrize`].
pub fn eta_by_area_inversion(sol: &ExtremalSolution, t: &[f64], duration: f64) -> Result<Vec<f64>> {
    let omega = sol.area / duration;
    t.iter()
        .map(|&tk| eta_at_partial_area(&sol.traj, (omega * tk).min(sol.area)))
        .collect()
}

/// Energy-optimal pulses of a converged extremum.
pub fn synthesize(sol: &ExtremalSolution, duration: f64) -> Result<PulseSet> {
    synthesize_with(sol, duration, DEFAULT_POINTS)
}

pub fn synthesize_with(sol: &ExtremalSolution, duration: f64, n: usize) -> Result<PulseSet> {
    let angles = time_parametrize_with(sol, duration, n)?;
    Ok(angles.pulses(sol.area / duration, PulseLabel::RobustExtremal))
}

/// Peak amplitude of the reference pulses, times `T`.
pub const REFERENCE_AMPLITUDE: f64 = 5.441398092702653; // sqrt(3) pi

fn reference_fields(duration: f64) -> impl Fn(f64) -> (f64, f64) {
    let a = REFERENCE_AMPLITUDE / duration;
    move |t| {
        let (s, c) = (PI * t / (2.0 * duration)).sin_cos();
        (a * c, a * s)
    }
}

/// Non-robust optimal pair `Omega_P = (sqrt3 pi / T) cos(pi t / 2T)`,
/// `Omega_S = (sqrt3 pi / T) sin(pi t / 2T)`.
pub fn reference_cos_sin(duration: f64) -> Result<PulseSet> {
    reference_cos_sin_with(duration, DEFAULT_POINTS)
}

pub fn reference_cos_sin_with(duration: f64, n: usize) -> Result<PulseSet> {
    let t = uniform_grid(duration, n)?;
    let f = reference_fields(duration);
    let (omega_p, omega_s) = t.iter().map(|&tk| f(tk)).unzip();
    Ok(PulseSet {
        t,
        omega_p,
        omega_s,
        duration,
        omega: REFERENCE_AMPLITUDE / duration,
        label: PulseLabel::ReferenceCosSin,
    })
}

/// Angles of the reference pulses, integrated from their closed form.
pub fn reference_angles(duration: f64, n: usize) -> Result<AngleDynamics> {
    angles_from_fields(reference_fields(duration), duration, n)
}

/// Angles generated by arbitrary sampled pulses (interpolated between
/// samples).
pub fn angles_from_pulses(pulses: &PulseSet) -> Result<AngleDynamics> {
    pulses.validate()?;
    angles_from_fields(|t| pulses.value_at(t), pulses.duration, pulses.len())
}

/// Integrates the angle dynamics driven by `fields(t) = (Omega_P, Omega_S)`
/// from `phi = eta = theta = 0`:
/// `phi_dot = -(P cos theta + S sin theta) / 2`,
/// `eta_dot = (P sin theta - S cos theta) / (2 cos phi)`,
/// `theta_dot = -eta_dot sin phi`.
pub fn angles_from_fields<F>(fields: F, duration: f64, n: usize) -> Result<AngleDynamics>
where
    F: Fn(f64) -> (f64, f64),
{
    let t = uniform_grid(duration, n)?;
    let rates = |tk: f64, y: &[f64; 3]| -> [f64; 3] {
        let (p, s) = fields(tk);
        let (st, ct) = y[2].sin_cos();
        let (sp, cp) = y[0].sin_cos();
        let phid = -(p * ct + s * st) / 2.0;
        let etad = (p * st - s * ct) / (2.0 * cp);
        [phid, etad, -etad * sp]
    };
    let settings = Settings {
        h_init: 1e-4 * duration,
        h_max: duration / 64.0,
        ..Default::default()
    };
    let mut states: Vec<[f64; 3]> = vec![[0.0; 3]];
    let mut next = 1;
    ode::integrate(&rates, 0.0, [0.0; 3], duration, &settings, |step| {
        while next < n && t[next] <= step.t1 {
            let y = if t[next] == step.t1 {
                step.y1
            } else {
                ode::rk_step(&rates, step.t0, &step.y0, t[next] - step.t0).0
            };
            states.push(y);
            next += 1;
        }
        Ok(Control::Continue)
    })?;
    while states.len() < n {
        states.push(*states.last().expect("non-empty"));
    }
    let mut a = AngleDynamics::with_capacity(n, duration);
    for (k, y) in states.iter().enumerate() {
        let r = rates(t[k], y);
        a.t.push(t[k]);
        a.phi.push(y[0]);
        a.eta.push(y[1]);
        a.theta.push(y[2]);
        a.phi_dot.push(r[0]);
        a.eta_dot.push(r[1]);
        a.theta_dot.push(r[2]);
    }
    Ok(a)
}

/// Area, energy and loss figures of a pulse pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseMetrics {
    /// `int sqrt(Omega_P^2 + Omega_S^2) dt`.
    pub area: f64,
    pub area_over_pi: f64,
    /// `E T / (pi^2 hbar)`.
    pub energy_metric: f64,
    /// `(1/T) int sin^2(phi) dt`.
    pub a2_over_t: f64,
}

pub fn metrics(pulses: &PulseSet, angles: &AngleDynamics) -> Result<PulseMetrics> {
    pulses.validate()?;
    if angles.len() != pulses.len() || (angles.duration - pulses.duration).abs() > 1e-12 * pulses.duration {
        return Err(Error::GridMismatch(format!(
            "pulses have {} samples over {}, angles {} over {}",
            pulses.len(),
            pulses.duration,
            angles.len(),
            angles.duration
        )));
    }
    let h = pulses.dt();
    let amp = pulses.generalized_amplitude();
    let sq: Vec<f64> = amp.iter().map(|a| a * a).collect();
    let p2: Vec<f64> = angles.phi.iter().map(|p| p.sin().powi(2)).collect();
    let area = quad::integral(&amp, h);
    Ok(PulseMetrics {
        area,
        area_over_pi: area / PI,
        energy_metric: quad::integral(&sq, h) * pulses.duration / (PI * PI),
        a2_over_t: quad::integral(&p2, h) / pulses.duration,
    })
}

/// First-order loss estimate `P_loss = Gamma T (A2/T)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossEstimate {
    pub p_loss: f64,
    /// `Gamma / Omega` with `Omega = A / T`.
    pub gamma_over_omega: f64,
    /// False when `Gamma > Omega / 10`, where the estimate is unreliable.
    pub valid: bool,
}

/// Loss for duration `duration` (seconds) and decay rate `gamma` (1/s);
/// `area` (radians) sets the Rabi amplitude for the validity check.
pub fn loss_estimate(a2_over_t: f64, duration: f64, gamma: f64, area: f64) -> LossEstimate {
    let omega = area / duration;
    let ratio = if omega > 0.0 { gamma / omega } else { f64::INFINITY };
    let valid = gamma == 0.0 || ratio <= 0.1;
    if !valid {
        log::warn!("loss estimate outside its validity range: Gamma/Omega = {ratio:.3}");
    }
    LossEstimate {
        p_loss: gamma * duration * a2_over_t,
        gamma_over_omega: if gamma == 0.0 { 0.0 } else { ratio },
        valid,
    }
}

/// Longest duration, in units of `1/Gamma`, keeping the estimated loss at
/// or below `p_loss`.
pub fn max_duration_for_loss(a2_over_t: f64, p_loss: f64) -> f64 {
    p_loss / a2_over_t
}
