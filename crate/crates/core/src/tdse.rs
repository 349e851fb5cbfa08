//! Three-level resonant Schrödinger propagation.
//!
//! `H = (1 + eps)/2 [[0, P, 0], [P, 0, S], [0, S, 0]] - i Gamma/2 |2><2|`
//! with `hbar = 1`. Steps use the fourth-order commutator-free Magnus
//! scheme with two exponentials per step; each exponential is evaluated in
//! closed form, since every such Hamiltonian leaves the dark state
//! `(S, 0, -P)/Omega` invariant and acts as a 2x2 matrix on the
//! bright/excited pair.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_sig;
use crate::quad;
use crate::synthesis::{AngleDynamics, PulseSet};
use crate::trajectory::csv_err;

type C = Complex64;

/// Infidelity level defining the ultrahigh-fidelity width.
pub const UHF_INFIDELITY: f64 = 1e-4;

/// Resolution of the width bisection in `eps`.
pub const WIDTH_RESOLUTION: f64 = 1e-5;

/// Default number of propagation steps over `[0, T]`.
pub const DEFAULT_STEPS: usize = 8192;

/// Amplitudes over `|1>, |2>, |3>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantumState {
    pub amplitudes: [C; 3],
}

impl QuantumState {
    pub fn basis(k: usize) -> Self {
        let mut amplitudes = [C::new(0.0, 0.0); 3];
        amplitudes[k] = C::new(1.0, 0.0);
        Self { amplitudes }
    }

    /// `|1>`.
    pub fn ground() -> Self {
        Self::basis(0)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn populations(&self) -> [f64; 3] {
        self.amplitudes.map(|a| a.norm_sqr())
    }

    /// `|<other|self>|^2`.
    pub fn overlap_sqr(&self, other: &QuantumState) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| b.conj() * a)
            .sum::<C>()
            .norm_sqr()
    }
}

// Gauss nodes and commutator-free weights
const SQRT3: f64 = 1.732_050_807_568_877_2;
const C1: f64 = 0.5 - SQRT3 / 6.0;
const C2: f64 = 0.5 + SQRT3 / 6.0;
const W_BIG: f64 = (3.0 + 2.0 * SQRT3) / 12.0;
const W_SMALL: f64 = (3.0 - 2.0 * SQRT3) / 12.0;

/// Applies `exp(-i tau K)` with
/// `K = 1/2 [[0, a, 0], [a, -i gamma, b], [0, b, 0]]`.
fn apply_exp(psi: &mut [C; 3], a: f64, b: f64, gamma: f64, tau: f64) {
    let omega = a.hypot(b);
    let decay = (-0.25 * tau * gamma).exp();
    if omega < 1e-300 {
        psi[1] *= decay * decay;
        return;
    }
    let (ua, ub) = (a / omega, b / omega);
    let bright = psi[0] * ua + psi[2] * ub;
    let dark = psi[0] * ub - psi[2] * ua;
    let e = psi[1];

    // 2x2 block M = -i tau/2 [[0, omega], [omega, -i gamma]] = c I + N
    let x = C::new(0.0, 0.5 * gamma);
    let pref = C::new(0.0, -0.5 * tau);
    let delta2 = pref * pref * (x * x + omega * omega);
    let delta = delta2.sqrt();
    let (ch, shc) = if delta.norm() < 1e-4 {
        (C::new(1.0, 0.0) + delta2 / 2.0 + delta2 * delta2 / 24.0, C::new(1.0, 0.0) + delta2 / 6.0 + delta2 * delta2 / 120.0)
    } else {
        (delta.cosh(), delta.sinh() / delta)
    };
    let n11 = pref * x;
    let n12 = pref * omega;
    let new_b = decay * (ch * bright + shc * (n11 * bright + n12 * e));
    let new_e = decay * (ch * e + shc * (n12 * bright - n11 * e));

    psi[0] = new_b * ua + dark * ub;
    psi[1] = new_e;
    psi[2] = new_b * ub - dark * ua;
}

/// Propagation settings.
#[derive(Clone, Copy, Debug)]
pub struct Propagation {
    /// Relative amplitude error `eps`; the coupling is scaled by `1 + eps`.
    pub eps: f64,
    /// Decay rate of `|2>` in units of `1/T`.
    pub gamma: f64,
    /// Steps per pulse sample interval.
    pub substeps: usize,
}

impl Propagation {
    pub fn new(eps: f64, gamma: f64) -> Self {
        Self { eps, gamma, substeps: 0 }
    }

    fn substeps_for(&self, pulses: &PulseSet) -> usize {
        if self.substeps > 0 {
            self.substeps
        } else {
            DEFAULT_STEPS.div_ceil(pulses.len() - 1).max(1)
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.eps.abs() <= 0.5) {
            return Err(Error::InvalidInput(format!("|eps| must not exceed 0.5, got {}", self.eps)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidInput(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Propagates over one step `[t0, t0 + h]`.
fn magnus_step(psi: &mut [C; 3], pulses: &PulseSet, t0: f64, h: f64, scale: f64, gamma: f64) {
    let (p1, s1) = pulses.value_at(t0 + C1 * h);
    let (p2, s2) = pulses.value_at(t0 + C2 * h);
    // the first factor weights the early node, the second the late one
    let g = 0.5 * gamma;
    apply_exp(psi, scale * (W_BIG * p1 + W_SMALL * p2), scale * (W_BIG * s1 + W_SMALL * s2), g, h);
    apply_exp(psi, scale * (W_SMALL * p1 + W_BIG * p2), scale * (W_SMALL * s1 + W_BIG * s2), g, h);
}

fn run<F: FnMut(usize, &[C; 3])>(
    pulses: &PulseSet,
    prop: &Propagation,
    initial: &QuantumState,
    mut sample: F,
) -> Result<QuantumState> {
    pulses.validate()?;
    prop.check()?;
    let m = prop.substeps_for(pulses);
    let h = pulses.dt() / m as f64;
    let scale = 1.0 + prop.eps;
    let mut psi = initial.amplitudes;
    sample(0, &psi);
    for k in 0..pulses.len() - 1 {
        let t0 = pulses.t[k];
        for j in 0..m {
            magnus_step(&mut psi, pulses, t0 + j as f64 * h, h, scale, prop.gamma);
        }
        sample(k + 1, &psi);
    }
    Ok(QuantumState { amplitudes: psi })
}

/// Final state after the pulses, with amplitude error `eps` and decay
/// `gamma` on `|2>`.
pub fn propagate(pulses: &PulseSet, eps: f64, gamma: f64, initial: &QuantumState) -> Result<QuantumState> {
    propagate_with(pulses, &Propagation::new(eps, gamma), initial)
}

pub fn propagate_with(pulses: &PulseSet, prop: &Propagation, initial: &QuantumState) -> Result<QuantumState> {
    run(pulses, prop, initial, |_, _| {})
}

/// Populations at every pulse sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationHistory {
    pub t: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub p3: Vec<f64>,
    pub norm: Vec<f64>,
    pub duration: f64,
}

impl PopulationHistory {
    /// Populations CSV: `t_over_T, p1, p2, p3, norm`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_over_T", "p1", "p2", "p3", "norm"]).map_err(csv_err)?;
        for k in 0..self.t.len() {
            w.write_record(
                [self.t[k] / self.duration, self.p1[k], self.p2[k], self.p3[k], self.norm[k]].map(|v| fmt_sig(v, 15)),
            )
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn populations_history(
    pulses: &PulseSet,
    eps: f64,
    gamma: f64,
    initial: &QuantumState,
) -> Result<PopulationHistory> {
    let n = pulses.len();
    let mut h = PopulationHistory {
        t: pulses.t.clone(),
        p1: Vec::with_capacity(n),
        p2: Vec::with_capacity(n),
        p3: Vec::with_capacity(n),
        norm: Vec::with_capacity(n),
        duration: pulses.duration,
    };
    run(pulses, &Propagation::new(eps, gamma), initial, |_, psi| {
        let p = psi.map(|a| a.norm_sqr());
        h.p1.push(p[0]);
        h.p2.push(p[1]);
        h.p3.push(p[2]);
        h.norm.push((p[0] + p[1] + p[2]).sqrt());
    })?;
    Ok(h)
}

/// Transfer fidelity `|<3|psi_eps(T)>|^2` from `|1>` without decay.
pub fn transfer_fidelity(pulses: &PulseSet, eps: f64) -> Result<f64> {
    let psi = propagate(pulses, eps, 0.0, &QuantumState::ground())?;
    Ok(psi.overlap_sqr(&QuantumState::basis(2)))
}

/// Fidelity versus amplitude error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessProfile {
    pub eps: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub log10_infidelity: Vec<f64>,
    /// Half-width around `eps = 0` with infidelity below `1e-4`: the
    /// smaller of the two sides.
    pub width_uhf: f64,
    pub width_minus: f64,
    pub width_plus: f64,
}

fn log10_infidelity(f: f64) -> f64 {
    (1.0 - f).max(1e-16).log10()
}

/// `n` points evenly spaced over `[lo, hi]`.
pub fn eps_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Default grid: 401 points over `[-0.2, 0.2]`.
pub fn default_eps_grid() -> Vec<f64> {
    let mut g = eps_grid(-0.2, 0.2, 401);
    // snap the centre so that the grid contains an exact zero
    g[200] = 0.0;
    g
}

pub fn robustness_profile(pulses: &PulseSet, eps: &[f64]) -> Result<RobustnessProfile> {
    pulses.validate()?;
    if !eps.contains(&0.0) {
        return Err(Error::InvalidInput("eps grid must include 0".into()));
    }
    if eps.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("eps grid must be strictly increasing".into()));
    }
    let fidelity: Vec<f64> = eps
        .par_iter()
        .map(|&e| transfer_fidelity(pulses, e))
        .collect::<Result<_>>()?;
    let log10_inf: Vec<f64> = fidelity.iter().map(|&f| log10_infidelity(f)).collect();
    let zero = eps.iter().position(|&e| e == 0.0).expect("checked");
    let threshold = UHF_INFIDELITY.log10();

    let side = |dir: isize| -> Result<f64> {
        if log10_inf[zero] >= threshold {
            return Ok(0.0);
        }
        let mut k = zero as isize;
        loop {
            let next = k + dir;
            if next < 0 || next as usize >= eps.len() {
                return Ok(eps[k as usize].abs());
            }
            if log10_inf[next as usize] >= threshold {
                break;
            }
            k = next;
        }
        let (mut good, mut bad) = (eps[k as usize], eps[(k + dir) as usize]);
        while (bad - good).abs() > WIDTH_RESOLUTION {
            let mid = 0.5 * (good + bad);
            if log10_infidelity(transfer_fidelity(pulses, mid)?) < threshold {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Ok(0.5 * (good + bad).abs())
    };
    let width_minus = side(-1)?;
    let width_plus = side(1)?;
    Ok(RobustnessProfile {
        eps: eps.to_vec(),
        fidelity,
        log10_infidelity: log10_inf,
        width_uhf: width_minus.min(width_plus),
        width_minus,
        width_plus,
    })
}

impl RobustnessProfile {
    /// Profile CSV: `epsilon, fidelity, log10_infidelity`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epsilon", "fidelity", "log10_infidelity"]).map_err(csv_err)?;
        for k in 0..self.eps.len() {
            w.write_record([self.eps[k], self.fidelity[k], self.log10_infidelity[k]].map(|v| fmt_sig(v, 15)))
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Largest `|F(eps) - F(-eps)|` over grid points whose mirror is also on
    /// the grid.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, &e) in self.eps.iter().enumerate() {
            if let Some(j) = self.eps.iter().position(|&x| (x + e).abs() < 1e-12) {
                worst = worst.max((self.fidelity[k] - self.fidelity[j]).abs());
            }
        }
        worst
    }
}

/// Integrands of the error expansion at every sample:
/// `n = -eta_dot sin(eta) sin(phi) cos(phi) - phi_dot cos(eta)`,
/// `p = i q` with `q = eta_dot cos(eta) sin(phi) cos(phi) - phi_dot sin(eta)`,
/// `r = -eta_dot cos^2(phi)`.
pub fn deviation_integrands(angles: &AngleDynamics) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let k = angles.len();
    let (mut n, mut q, mut r) = (Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k));
    for i in 0..k {
        let (se, ce) = angles.eta[i].sin_cos();
        let (sp, cp) = angles.phi[i].sin_cos();
        let (ed, pd) = (angles.eta_dot[i], angles.phi_dot[i]);
        n.push(-ed * se * sp * cp - pd * ce);
        q.push(ed * ce * sp * cp - pd * se);
        r.push(-ed * cp * cp);
    }
    (n, q, r)
}

/// Second-order deviation `|int n|^2 + |int p|^2`, per unit `eps^2`.
pub fn deviation_o2(angles: &AngleDynamics) -> f64 {
    if angles.len() < 2 {
        return 0.0;
    }
    let (n, q, _) = deviation_integrands(angles);
    let h = angles.dt();
    quad::integral(&n, h).powi(2) + quad::integral(&q, h).powi(2)
}

/// Third-order deviation
/// `2i [int n * int int r(t) p(t') - int p * int int r(t) n(t')]`, per unit
/// `eps^3`. With `p = i q` the bracket is `i` times real, so the result is
/// `-2 [N Q_r - Q N_r]`, where `X_r = int r(t) int_0^t x`.
pub fn deviation_o3(angles: &AngleDynamics) -> f64 {
    if angles.len() < 2 {
        return 0.0;
    }
    let (n, q, r) = deviation_integrands(angles);
    let h = angles.dt();
    let nf = quad::integral(&n, h);
    let qf = quad::integral(&q, h);
    let rq = quad::iterated_double(&r, &q, h);
    let rn = quad::iterated_double(&r, &n, h);
    -2.0 * (nf * rq - qf * rn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{reference_angles, reference_cos_sin, reference_cos_sin_with};

    #[test]
    fn exponential_is_unitary_without_decay() {
        let mut psi = [C::new(0.3, 0.1), C::new(-0.2, 0.5), C::new(0.4, -0.6)];
        let before: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        apply_exp(&mut psi, 1.3, -0.7, 0.0, 0.37);
        let after: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        assert!((before - after).abs() < 1e-14);
    }

    #[test]
    fn resonant_pulse_area_pi_inverts_two_level() {
        // pump alone, area pi: |1> -> |2>
        let mut psi = QuantumState::ground().amplitudes;
        apply_exp(&mut psi, std::f64::consts::PI, 0.0, 0.0, 1.0);
        assert!((psi[1].norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pure_decay_of_excited_state() {
        let mut psi = QuantumState::basis(1).amplitudes;
        apply_exp(&mut psi, 0.0, 0.0, 2.0, 0.5);
        assert!((psi[1].norm_sqr() - (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn dark_state_is_stationary() {
        let (a, b) = (0.8, 0.6);
        let mut psi = [C::new(b, 0.0), C::new(0.0, 0.0), C::new(-a, 0.0)];
        apply_exp(&mut psi, a * 5.0, b * 5.0, 0.3, 2.0);
        assert!((psi[0] - b).norm() < 1e-14 && (psi[2] + a).norm() < 1e-14);
    }

    #[test]
    fn reference_transfer_is_complete() {
        let p = reference_cos_sin(1.0).unwrap();
        let f = transfer_fidelity(&p, 0.0).unwrap();
        assert!(1.0 - f < 1e-10, "{f}");
    }

    #[test]
    fn scheme_is_fourth_order() {
        let p = reference_cos_sin_with(1.0, 33).unwrap();
        let fine = propagate_with(&p, &Propagation { eps: 0.05, gamma: 0.0, substeps: 64 }, &QuantumState::ground())
            .unwrap();
        let err = |m: usize| {
            let s = propagate_with(&p, &Propagation { eps: 0.05, gamma: 0.0, substeps: m }, &QuantumState::ground())
                .unwrap();
            (0..3).map(|i| (s.amplitudes[i] - fine.amplitudes[i]).norm()).fold(0.0, f64::max)
        };
        let ratio = err(1) / err(2);
        assert!(ratio > 12.0, "ratio {ratio}");
    }

    #[test]
    fn eps_grid_rejections() {
        let p = reference_cos_sin_with(1.0, 64).unwrap();
        assert!(robustness_profile(&p, &[0.1, 0.2]).is_err());
        assert!(robustness_profile(&p, &[0.1, 0.0]).is_err());
        assert!(propagate(&p, 0.6, 0.0, &QuantumState::ground()).is_err());
        assert!(propagate(&p, 0.0, -1.0, &QuantumState::ground()).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let g = default_eps_grid();
        assert_eq!(g.len(), 401);
        assert_eq!(g[200], 0.0);
        assert!((g[0] + 0.2).abs() < 1e-15 && (g[400] - 0.2).abs() < 1e-15);
        assert!((g[201] - 0.001).abs() < 1e-15);
    }

    #[test]
    fn reference_o2_is_order_one() {
        let a = reference_angles(1.0, 2049).unwrap();
        let o2 = deviation_o2(&a);
        assert!(o2 > 0.1 && o2 < 100.0, "{o2}");
    }

    #[test]
    fn null_dynamics_have_no_deviation() {
        let mut a = reference_angles(1.0, 65).unwrap();
        for v in [&mut a.phi, &mut a.eta, &mut a.phi_dot, &mut a.eta_dot] {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
        assert_eq!(deviation_o2(&a), 0.0);
        assert_eq!(deviation_o3(&a), 0.0);
    }
}
