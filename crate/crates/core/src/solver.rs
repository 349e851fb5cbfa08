//! Shooting solver for the extremal trajectories.
//!
//! For a fixed initial slope `phidot_i` the unknowns are the three Lagrange
//! multipliers; `eta_f` is implicit as a terminal event of the trajectory
//! (a zero crossing, or a tangential touch for `phidot_i = 0`). The three
//! residuals are the constraint integrals evaluated at `eta_f`.

use std::f64::consts::{FRAC_PI_2, PI};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_sig, round_sig};
use crate::ode::Tolerances;
use crate::trajectory::{
    csv_err, integrate_with, IntegrateOptions, LagrangeMultipliers, Terminal, TrajectorySolution,
    DEFAULT_ETA_MAX,
};

/// Constraint target for `xi0(eta_f)`. The representative family has
/// `phi >= 0`, for which `theta_f = -xi0(eta_f) = -pi/2`; the `+pi/2` target
/// is its sign-mirrored twin.
pub const XI0_TARGET: f64 = FRAC_PI_2;

/// Above this initial slope the terminal point is the third zero crossing.
pub const THIRD_CROSSING_ABOVE: f64 = 5.5;

/// Terminal event used for a given initial slope when none is specified.
pub fn auto_terminal(phidot_i: f64) -> Terminal {
    if phidot_i == 0.0 {
        // first minimum is the shallow dip between the two humps
        Terminal::Touch(2)
    } else if phidot_i <= THIRD_CROSSING_ABOVE {
        Terminal::Crossing(1)
    } else {
        Terminal::Crossing(3)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Converged when the residual infinity-norm drops below this.
    pub residual_tol: f64,
    /// Iteration keeps going until this tighter level, or stagnation.
    pub residual_target: f64,
    pub max_iterations: usize,
    /// Central-difference step per multiplier.
    pub fd_step: f64,
    pub eta_max: f64,
    pub tol: Tolerances,
    /// Gives up early when the residual has not halved within this many
    /// iterations. Used by continuation, where a failed step is halved
    /// instead.
    pub abandon_after: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-8,
            residual_target: 1e-12,
            max_iterations: 100,
            fd_step: 1e-6,
            eta_max: DEFAULT_ETA_MAX,
            tol: Tolerances::default(),
            abandon_after: None,
        }
    }
}

/// Constraint residuals `(xi0 - pi/2, xi1, xi2)` at the terminal event.
pub fn residuals(lam: LagrangeMultipliers, phidot_i: f64, terminal: Terminal) -> Result<[f64; 3]> {
    residuals_with(lam, phidot_i, terminal, &SolverOptions::default())
}

pub fn residuals_with(
    lam: LagrangeMultipliers,
    phidot_i: f64,
    terminal: Terminal,
    opts: &SolverOptions,
) -> Result<[f64; 3]> {
    let traj = terminal_trajectory(lam, phidot_i, terminal, opts)?;
    Ok(residual_of(&traj))
}

fn terminal_trajectory(
    lam: LagrangeMultipliers,
    phidot_i: f64,
    terminal: Terminal,
    opts: &SolverOptions,
) -> Result<TrajectorySolution> {
    integrate_with(
        lam,
        phidot_i,
        &IntegrateOptions {
            eta_max: opts.eta_max,
            tol: opts.tol,
            stop_at: Some(terminal),
        },
    )
}

fn residual_of(traj: &TrajectorySolution) -> [f64; 3] {
    let p = traj.final_point();
    [p.xi0 - XI0_TARGET, p.xi1, p.xi2]
}

fn inf_norm(r: &[f64; 3]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn two_norm(r: &[f64; 3]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A converged extremum of the constrained area functional.
#[derive(Clone, Debug)]
pub struct ExtremalSolution {
    pub phidot_i: f64,
    pub lam: LagrangeMultipliers,
    pub eta_f: f64,
    pub terminal: Terminal,
    /// Generalized pulse area in radians.
    pub area: f64,
    pub phi_max: f64,
    /// Excited-state time-area per unit duration under the energy-optimal
    /// parametrization.
    pub a2_over_t: f64,
    /// `E T / (pi^2 hbar)`.
    pub energy_metric: f64,
    /// Second-order deviation `xi1^2 + xi2^2` at `eta_f`.
    pub o2: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Trajectory truncated at `eta_f`.
    pub traj: TrajectorySolution,
}

impl ExtremalSolution {
    /// Zero crossing that terminates the trajectory; a tangential touch
    /// counts as the first return to zero.
    pub fn crossing_index(&self) -> usize {
        match self.terminal {
            Terminal::Crossing(k) => k,
            Terminal::Touch(_) => self.traj.zero_crossings.len() + 1,
        }
    }

    pub fn area_over_pi(&self) -> f64 {
        self.area / PI
    }

    pub fn eta_f_over_pi(&self) -> f64 {
        self.eta_f / PI
    }

    /// Builds the solution record from multipliers assumed converged.
    pub fn from_multipliers(
        phidot_i: f64,
        lam: LagrangeMultipliers,
        terminal: Terminal,
        opts: &SolverOptions,
    ) -> Result<Self> {
        let traj = terminal_trajectory(lam, phidot_i, terminal, opts)?;
        let r = residual_of(&traj);
        let p = *traj.final_point();
        let area = p.area_partial;
        Ok(Self {
            phidot_i,
            lam,
            eta_f: p.eta,
            terminal,
            area,
            phi_max: traj.phi_max(),
            a2_over_t: p.loss_partial / area,
            energy_metric: (area / PI).powi(2),
            o2: p.xi1 * p.xi1 + p.xi2 * p.xi2,
            residual_norm: inf_norm(&r),
            iterations: 0,
            traj,
        })
    }
}

/// Solves the 3x3 system `a x = b` by Gaussian elimination with partial
/// pivoting. `None` when a pivot is negligible relative to the matrix scale.
fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let mut m = [[0.0; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-13 * scale {
            return None;
        }
        m.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let mut s = m[i][3];
        for k in i + 1..3 {
            s -= m[i][k] * x[k];
        }
        x[i] = s / m[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn add(x: [f64; 3], t: f64, d: [f64; 3]) -> [f64; 3] {
    [x[0] + t * d[0], x[1] + t * d[1], x[2] + t * d[2]]
}

struct Problem<'a> {
    phidot_i: f64,
    terminal: Terminal,
    opts: &'a SolverOptions,
}

impl Problem<'_> {
    fn eval(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        residuals_with(LagrangeMultipliers::from_array(x), self.phidot_i, self.terminal, self.opts)
    }

    /// Central differences. Close to a tangential terminal crossing the
    /// perturbed trajectories may miss it; the step then shrinks tenfold, at
    /// most three times.
    fn jacobian(&self, x: [f64; 3]) -> Result<[[f64; 3]; 3]> {
        let mut j = [[0.0; 3]; 3];
        for col in 0..3 {
            let mut h = self.opts.fd_step;
            let mut shrinks = 0;
            let (rp, rm) = loop {
                let mut e = [0.0; 3];
                e[col] = h;
                match (self.eval(add(x, 1.0, e)), self.eval(add(x, -1.0, e))) {
                    (Ok(rp), Ok(rm)) => break (rp, rm),
                    (Err(err), _) | (_, Err(err)) => {
                        if !matches!(err, Error::InsufficientCrossings { .. }) || shrinks == 3 {
                            return Err(err);
                        }
                        h *= 0.1;
                        shrinks += 1;
                    }
                }
            };
            for row in 0..3 {
                j[row][col] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        Ok(j)
    }
}

/// Levenberg-Marquardt step `(J^T J + mu diag(J^T J)) d = -J^T r`.
fn lm_step(j: &[[f64; 3]; 3], r: &[f64; 3], mu: f64) -> Option<[f64; 3]> {
    let mut jtj = [[0.0; 3]; 3];
    let mut jtr = [0.0; 3];
    for a in 0..3 {
        for b in 0..3 {
            jtj[a][b] = (0..3).map(|k| j[k][a] * j[k][b]).sum();
        }
        jtr[a] = -(0..3).map(|k| j[k][a] * r[k]).sum::<f64>();
    }
    for a in 0..3 {
        jtj[a][a] += mu * jtj[a][a].max(1e-12);
    }
    solve3(jtj, jtr)
}

/// Damped Newton iteration on the multipliers, starting from `guess`.
pub fn solve_extremum(
    phidot_i: f64,
    guess: LagrangeMultipliers,
    terminal: Terminal,
) -> Result<ExtremalSolution> {
    solve_extremum_with(phidot_i, guess, terminal, &SolverOptions::default())
}

pub fn solve_extremum_with(
    phidot_i: f64,
    guess: LagrangeMultipliers,
    terminal: Terminal,
    opts: &SolverOptions,
) -> Result<ExtremalSolution> {
    if !phidot_i.is_finite() || phidot_i < 0.0 {
        return Err(Error::InvalidInput(format!(
            "phidot_i must be finite and non-negative, got {phidot_i}"
        )));
    }
    let problem = Problem {
        phidot_i,
        terminal,
        opts,
    };
    let mut x = guess.to_array();
    let mut r = problem.eval(x)?;
    let mut norm = two_norm(&r);
    let mut iterations = 0;
    let mut mu = 1e-3;
    let initial = norm;

    while iterations < opts.max_iterations && inf_norm(&r) > opts.residual_target {
        iterations += 1;
        let j = problem.jacobian(x)?;
        let newton = solve3(j, [-r[0], -r[1], -r[2]]);

        let mut accepted = false;
        if let Some(d) = newton {
            let mut t = 1.0;
            while t > 1e-6 {
                let trial = add(x, t, d);
                if let Ok(rt) = problem.eval(trial) {
                    if two_norm(&rt) < norm {
                        x = trial;
                        r = rt;
                        norm = two_norm(&rt);
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        if !accepted {
            // Levenberg-Marquardt fallback with growing damping
            for _ in 0..12 {
                let Some(d) = lm_step(&j, &r, mu) else {
                    mu *= 10.0;
                    continue;
                };
                let trial = add(x, 1.0, d);
                if let Ok(rt) = problem.eval(trial) {
                    if two_norm(&rt) < norm {
                        x = trial;
                        r = rt;
                        norm = two_norm(&rt);
                        mu = (mu * 0.1).max(1e-9);
                        accepted = true;
                        break;
                    }
                }
                mu *= 10.0;
            }
        }
        if !accepted {
            if newton.is_none() && inf_norm(&r) > opts.residual_tol {
                return Err(Error::SingularJacobian { phidot_i });
            }
            // stagnated: no step decreases the residual any further
            break;
        }
        if opts.abandon_after == Some(iterations) && norm > 0.5 * initial {
            return Err(Error::NoConvergence { phidot_i, iterations, residual: inf_norm(&r) });
        }
    }

    let res = inf_norm(&r);
    if !(res < opts.residual_tol) {
        return Err(Error::NoConvergence {
            phidot_i,
            iterations,
            residual: res,
        });
    }
    let mut sol = ExtremalSolution::from_multipliers(phidot_i, LagrangeMultipliers::from_array(x), terminal, opts)?;
    sol.iterations = iterations;
    Ok(sol)
}

/// Points of [`default_family_grid`].
pub const DEFAULT_FAMILY_POINTS: usize = 65;

/// Default sweep over `[0, 16]`: zero, 24 log-spaced slopes in `[1e-3, 1)`
/// where the multipliers vary fastest, then 40 linear points over `[1, 16]`.
pub fn default_family_grid() -> Vec<f64> {
    let mut g = Vec::with_capacity(DEFAULT_FAMILY_POINTS);
    g.push(0.0);
    g.extend((0..24).map(|k| 10f64.powf(-3.0 + 3.0 * k as f64 / 24.0)));
    g.extend((0..40).map(|k| 1.0 + 15.0 * k as f64 / 39.0));
    g
}

/// Largest number of consecutive step halvings during continuation.
pub const MAX_HALVINGS: usize = 6;

/// Follows the family from `seed` across `grid` by continuation. Each solve
/// is seeded by its converged neighbour (linearly extrapolated when two
/// neighbours exist); failing steps are halved up to [`MAX_HALVINGS`] times.
/// The result is sorted by `phidot_i`.
pub fn sweep_family(grid: &[f64], seed: &ExtremalSolution) -> Result<Vec<ExtremalSolution>> {
    sweep_family_with(grid, seed, &SolverOptions::default())
}

pub fn sweep_family_with(
    grid: &[f64],
    seed: &ExtremalSolution,
    opts: &SolverOptions,
) -> Result<Vec<ExtremalSolution>> {
    let mut grid = validate_grid(grid)?;
    grid.dedup();
    let (below, above): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .copied()
        .filter(|&g| g != seed.phidot_i)
        .partition(|&g| g < seed.phidot_i);
    let mut out = Vec::with_capacity(grid.len());
    if grid.contains(&seed.phidot_i) {
        out.push(seed.clone());
    }
    out.extend(continue_branch(seed, below.into_iter().rev(), opts)?);
    out.extend(continue_branch(seed, above.into_iter(), opts)?);
    out.sort_by(|a, b| a.phidot_i.total_cmp(&b.phidot_i));
    Ok(out)
}

/// Sweeps `grid` using several converged anchors: every grid point is
/// reached by continuation from its nearest anchor, falling back to the
/// anchor on its other side when that fails.
pub fn sweep_from_anchors(
    grid: &[f64],
    anchors: &[ExtremalSolution],
    opts: &SolverOptions,
) -> Result<Vec<ExtremalSolution>> {
    if anchors.is_empty() {
        return Err(Error::InvalidInput("at least one anchor solution is required".into()));
    }
    let mut grid = validate_grid(grid)?;
    grid.dedup();
    let mut anchors: Vec<&ExtremalSolution> = anchors.iter().collect();
    anchors.sort_by(|a, b| a.phidot_i.total_cmp(&b.phidot_i));

    // partition the grid into the gaps between consecutive anchors
    let mut out = Vec::with_capacity(grid.len());
    let mut rest: &[f64] = &grid;
    for (k, anchor) in anchors.iter().enumerate() {
        let upto = rest.partition_point(|&g| g < anchor.phidot_i);
        let gap = &rest[..upto];
        rest = &rest[upto..];
        if rest.first() == Some(&anchor.phidot_i) {
            out.push((*anchor).clone());
            rest = &rest[1..];
        }
        out.extend(fill_gap(gap, k.checked_sub(1).map(|i| anchors[i]), Some(anchor), opts)?);
    }
    out.extend(fill_gap(rest, anchors.last().copied(), None, opts)?);
    out.sort_by(|a, b| a.phidot_i.total_cmp(&b.phidot_i));
    Ok(out)
}

/// Solves the grid points strictly between `lo` and `hi` anchors.
fn fill_gap(
    gap: &[f64],
    lo: Option<&ExtremalSolution>,
    hi: Option<&ExtremalSolution>,
    opts: &SolverOptions,
) -> Result<Vec<ExtremalSolution>> {
    if gap.is_empty() {
        return Ok(Vec::new());
    }
    let from_lo = |pts: &[f64]| continue_branch(lo.unwrap(), pts.iter().copied(), opts);
    let from_hi = |pts: &[f64]| continue_branch(hi.unwrap(), pts.iter().rev().copied(), opts);
    match (lo, hi) {
        (Some(_), None) => from_lo(gap),
        (None, Some(_)) => from_hi(gap),
        (Some(l), Some(h)) => {
            let mid = 0.5 * (l.phidot_i + h.phidot_i);
            let split = gap.partition_point(|&g| g <= mid);
            let mut out = Vec::new();
            let (near_lo, near_hi) = gap.split_at(split);
            if !near_lo.is_empty() {
                out.extend(from_lo(near_lo).or_else(|_| from_hi(gap).map(|all| {
                    all.into_iter().filter(|s| s.phidot_i <= mid).collect()
                }))?);
            }
            if !near_hi.is_empty() {
                out.extend(from_hi(near_hi).or_else(|_| from_lo(gap).map(|all| {
                    all.into_iter().filter(|s| s.phidot_i > mid).collect()
                }))?);
            }
            Ok(out)
        }
        (None, None) => unreachable!("anchors are non-empty"),
    }
}

fn validate_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.iter().any(|g| !g.is_finite() || *g < 0.0 || *g > 250.0) {
        return Err(Error::InvalidInput("phidot_i grid must lie within [0, 250]".into()));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    Ok(g)
}

/// Continuation steps are at most this fraction of the current `phidot_i`
/// (but never capped below [`MIN_STEP_CAP`]); a failed solve costs far more
/// than a few extra small steps.
pub const MAX_RELATIVE_STEP: f64 = 0.5;
pub const MIN_STEP_CAP: f64 = 0.05;
/// Newton iteration limit for a single continuation step.
pub const CONTINUATION_ITERATIONS: usize = 20;
/// A continuation step that has not halved its residual after this many
/// iterations is abandoned.
pub const CONTINUATION_PATIENCE: usize = 5;

/// Continuation from `seed` through `targets`, given in the order of travel.
fn continue_branch(
    seed: &ExtremalSolution,
    targets: impl Iterator<Item = f64>,
    opts: &SolverOptions,
) -> Result<Vec<ExtremalSolution>> {
    // a good continuation step converges in a handful of iterations; a
    // wandering one is cheaper to abandon and halve
    let step_opts = SolverOptions {
        max_iterations: opts.max_iterations.min(CONTINUATION_ITERATIONS),
        abandon_after: Some(CONTINUATION_PATIENCE),
        ..*opts
    };
    let mut out = Vec::new();
    let mut current = seed.clone();
    let mut previous: Option<(f64, LagrangeMultipliers)> = None;
    let mut last_step: Option<f64> = None;
    for target in targets {
        loop {
            let remaining = target - current.phidot_i;
            if remaining == 0.0 {
                break;
            }
            let mut step = match last_step {
                Some(s) if s.abs() < remaining.abs() => 2.0 * s.abs() * remaining.signum(),
                _ => remaining,
            };
            let cap = (MAX_RELATIVE_STEP * current.phidot_i).max(MIN_STEP_CAP);
            if step.abs() > cap {
                step = cap * step.signum();
            }
            if step.abs() >= remaining.abs() {
                step = remaining;
            }
            let mut halvings = 0;
            let next = loop {
                let p = if step == remaining { target } else { current.phidot_i + step };
                // the secant predictor overshoots where the branch curves, so
                // it only leads when it starts closer than the last solution
                let secant = predict(&current, previous, p);
                let start_norm = |lam| {
                    residuals_with(lam, p, auto_terminal(p), &step_opts).map_or(f64::INFINITY, |r| two_norm(&r))
                };
                let mut guesses = vec![secant];
                if secant != current.lam {
                    guesses.push(current.lam);
                    if start_norm(current.lam) < start_norm(secant) {
                        guesses.swap(0, 1);
                    }
                }
                let mut attempt = solve_extremum_with(p, guesses[0], auto_terminal(p), &step_opts);
                if attempt.is_err() && guesses.len() > 1 {
                    attempt = solve_extremum_with(p, guesses[1], auto_terminal(p), &step_opts);
                }
                match attempt {
                    Ok(sol) => break sol,
                    Err(e) if e.is_convergence_failure() && halvings < MAX_HALVINGS => {
                        log::debug!("continuation step to {p} failed ({e}); halving");
                        step *= 0.5;
                        halvings += 1;
                    }
                    Err(e) => {
                        return Err(Error::Sweep {
                            phidot_i: p,
                            source: Box::new(e),
                        })
                    }
                }
            };
            last_step = Some(next.phidot_i - current.phidot_i);
            previous = Some((current.phidot_i, current.lam));
            current = next;
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// Secant predictor for the multipliers at `p`.
fn predict(
    current: &ExtremalSolution,
    previous: Option<(f64, LagrangeMultipliers)>,
    p: f64,
) -> LagrangeMultipliers {
    let Some((p0, l0)) = previous else {
        return current.lam;
    };
    // a touch-terminated seed is not on the smooth part of the branch
    if matches!(current.terminal, Terminal::Touch(_)) || p0 == current.phidot_i {
        return current.lam;
    }
    let s = (p - current.phidot_i) / (current.phidot_i - p0);
    let a = current.lam.to_array();
    let b = l0.to_array();
    LagrangeMultipliers::from_array([
        a[0] + s * (a[0] - b[0]),
        a[1] + s * (a[1] - b[1]),
        a[2] + s * (a[2] - b[2]),
    ])
}

/// Published multipliers of the four highlighted extrema, used as seeds.
pub const BUILTIN_SEEDS: [Seed; 4] = [
    Seed::new("phidot0", 0.0, LagrangeMultipliers::new(0.1930790914, -0.0838224029, 0.0102504990)),
    Seed::new("phidot0.4", 0.4, LagrangeMultipliers::new(0.14013, -0.04747, 0.22984)),
    Seed::new("phidot16", 16.0, LagrangeMultipliers::new(-0.52403, 0.86793, 1.05836)),
    Seed::new("phidot250", 250.0, LagrangeMultipliers::new(-0.56596, 0.93853, 1.08283)),
];

/// Starting point for a solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    #[serde(skip)]
    pub name: &'static str,
    pub phidot_i: f64,
    #[serde(flatten)]
    pub lam: LagrangeMultipliers,
}

impl Seed {
    pub const fn new(name: &'static str, phidot_i: f64, lam: LagrangeMultipliers) -> Self {
        Self { name, phidot_i, lam }
    }

    pub fn by_name(name: &str) -> Option<Seed> {
        BUILTIN_SEEDS.iter().copied().find(|s| s.name == name)
    }

    /// Built-in seed with the closest `phidot_i`.
    pub fn nearest(phidot_i: f64) -> Seed {
        *BUILTIN_SEEDS
            .iter()
            .min_by(|a, b| (a.phidot_i - phidot_i).abs().total_cmp(&(b.phidot_i - phidot_i).abs()))
            .expect("non-empty")
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<ExtremalSolution> {
        solve_extremum_with(self.phidot_i, self.lam, auto_terminal(self.phidot_i), opts)
    }
}

/// Reads seeds from JSON: a single object or an array of objects carrying
/// `phidot_i`, `lambda0`, `lambda1`, `lambda2` (solution records qualify).
pub fn read_seeds(text: &str) -> Result<Vec<Seed>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Seed),
        Many(Vec<Seed>),
    }
    let seeds = match serde_json::from_str::<OneOrMany>(text)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    };
    if seeds.is_empty() {
        return Err(Error::InvalidInput("seed file holds no seeds".into()));
    }
    for s in &seeds {
        if !s.lam.is_finite() || !s.phidot_i.is_finite() || s.phidot_i < 0.0 {
            return Err(Error::InvalidInput(format!("invalid seed {s:?}")));
        }
    }
    Ok(seeds)
}

/// Flat, serializable view of an [`ExtremalSolution`], rounded to 12
/// significant digits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub phidot_i: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub terminal: Terminal,
    pub crossing_index: usize,
    pub eta_f: f64,
    pub eta_f_over_pi: f64,
    pub area: f64,
    pub area_over_pi: f64,
    pub phi_max: f64,
    pub a2_over_t: f64,
    pub energy_metric: f64,
    pub o2: f64,
    pub residual_norm: f64,
    pub iterations: usize,
}

const RECORD_DIGITS: usize = 12;

impl From<&ExtremalSolution> for SolutionRecord {
    fn from(s: &ExtremalSolution) -> Self {
        let r = |x: f64| round_sig(x, RECORD_DIGITS);
        Self {
            phidot_i: r(s.phidot_i),
            lambda0: r(s.lam.lambda0),
            lambda1: r(s.lam.lambda1),
            lambda2: r(s.lam.lambda2),
            terminal: s.terminal,
            crossing_index: s.crossing_index(),
            eta_f: r(s.eta_f),
            eta_f_over_pi: r(s.eta_f_over_pi()),
            area: r(s.area),
            area_over_pi: r(s.area_over_pi()),
            phi_max: r(s.phi_max),
            a2_over_t: r(s.a2_over_t),
            energy_metric: r(s.energy_metric),
            o2: r(s.o2),
            residual_norm: r(s.residual_norm),
            iterations: s.iterations,
        }
    }
}

pub fn write_family_json<W: Write>(family: &[ExtremalSolution], out: W) -> Result<()> {
    let records: Vec<SolutionRecord> = family.iter().map(SolutionRecord::from).collect();
    serde_json::to_writer_pretty(out, &records)?;
    Ok(())
}

/// Family CSV: `phidot_i, lambda0, lambda1, lambda2, eta_f_over_pi,
/// area_over_pi, phi_max`.
pub fn write_family_csv<W: Write>(family: &[ExtremalSolution], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "phidot_i",
        "lambda0",
        "lambda1",
        "lambda2",
        "eta_f_over_pi",
        "area_over_pi",
        "phi_max",
    ])
    .map_err(csv_err)?;
    for s in family {
        w.write_record(
            [
                s.phidot_i,
                s.lam.lambda0,
                s.lam.lambda1,
                s.lam.lambda2,
                s.eta_f_over_pi(),
                s.area_over_pi(),
                s.phi_max,
            ]
            .map(|v| fmt_sig(v, RECORD_DIGITS)),
        )
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Loss-versus-area curve: `phidot_i, area_over_pi, a2_over_t, energy_metric`.
pub fn write_loss_curve_csv<W: Write>(family: &[ExtremalSolution], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["phidot_i", "area_over_pi", "a2_over_t", "energy_metric"])
        .map_err(csv_err)?;
    for s in family {
        w.write_record(
            [s.phidot_i, s.area_over_pi(), s.a2_over_t, s.energy_metric].map(|v| fmt_sig(v, RECORD_DIGITS)),
        )
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_shape() {
        let g = default_family_grid();
        assert_eq!(g.len(), DEFAULT_FAMILY_POINTS);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 16.0);
    }

    #[test]
    fn solve3_matches_known_system() {
        let a = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let x = solve3(a, [3.0, 5.0, 5.0]).unwrap();
        for (v, e) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((v - e).abs() < 1e-14);
        }
        assert!(solve3([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]], [1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn auto_terminal_rule() {
        assert_eq!(auto_terminal(0.0), Terminal::Touch(2));
        assert_eq!(auto_terminal(0.4), Terminal::Crossing(1));
        assert_eq!(auto_terminal(5.5), Terminal::Crossing(1));
        assert_eq!(auto_terminal(5.6), Terminal::Crossing(3));
    }

    #[test]
    fn null_multipliers_have_no_crossing() {
        let err = residuals(LagrangeMultipliers::default(), 0.0, Terminal::Crossing(1)).unwrap_err();
        assert!(matches!(err, Error::InsufficientCrossings { .. }));
    }

    #[test]
    fn rejects_negative_slope() {
        assert!(matches!(
            solve_extremum(-1.0, LagrangeMultipliers::default(), Terminal::Crossing(1)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn grid_out_of_range_is_rejected() {
        assert!(validate_grid(&[0.0, 300.0]).is_err());
        assert!(validate_grid(&[f64::NAN]).is_err());
    }
}
