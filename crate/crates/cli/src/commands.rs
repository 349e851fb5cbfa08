use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use stirep_core::solver::{
    default_family_grid, read_seeds, solve_extremum_with, sweep_from_anchors, write_family_csv, write_family_json,
    write_loss_curve_csv, Seed, SolutionRecord, BUILTIN_SEEDS,
};
use stirep_core::synthesis::{self, AngleDynamics, PulseLabel, PulseSet};
use stirep_core::tdse::{self, QuantumState};
use stirep_core::{verification, ExtremalSolution, SolverOptions};

use crate::config::{PulseChoice, RunConfig};
use crate::{table, CliError, Command};

/// Collects output files and writes the metadata sidecar last.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    started: Instant,
}

impl Outputs {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&cfg.out)?;
        Ok(Self {
            dir: cfg.out.clone(),
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn write<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(stirep_core::Error::from)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    /// `<command>.meta.json`: everything that varies between identical runs.
    pub fn finish(self, cfg: &RunConfig) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Meta<'a> {
            command: &'a str,
            version: &'a str,
            config: &'a RunConfig,
            outputs: &'a [String],
            finished_unix_s: u64,
            elapsed_s: f64,
            threads: usize,
        }
        let meta = Meta {
            command: &cfg.command,
            version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            outputs: &self.files,
            finished_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            elapsed_s: self.started.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
        };
        let path = self.dir.join(format!("{}.meta.json", cfg.command));
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &meta).map_err(stirep_core::Error::from)?;
        w.flush()?;
        Ok(())
    }
}

pub fn dispatch(command: Command, cfg: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Solve => cmd_solve(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Synthesize => cmd_synthesize(cfg),
        Command::Simulate => cmd_simulate(cfg),
        Command::Profile => cmd_profile(cfg),
        Command::Table => table::cmd_table(cfg),
        Command::Verify => cmd_verify(cfg),
    }
}

pub fn solver_options(cfg: &RunConfig) -> SolverOptions {
    let mut opts = SolverOptions::default();
    if let Some(t) = cfg.tolerance {
        opts.residual_tol = t;
        opts.residual_target = opts.residual_target.min(t);
    }
    opts
}

fn file_seeds(cfg: &RunConfig) -> Result<Option<Vec<Seed>>, CliError> {
    let Some(path) = &cfg.seed_file else {
        return Ok(None);
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let seeds = read_seeds(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Some(seeds))
}

/// Converged solutions at the seeds: from `--seed-file` when given,
/// otherwise the built-in ones.
pub fn anchors(cfg: &RunConfig, opts: &SolverOptions) -> Result<Vec<ExtremalSolution>, CliError> {
    let seeds = file_seeds(cfg)?.unwrap_or_else(|| BUILTIN_SEEDS.to_vec());
    let mut out = Vec::with_capacity(seeds.len());
    for s in seeds {
        out.push(s.solve(opts)?);
    }
    Ok(out)
}

/// One extremum. A seed file is used as a direct starting guess (nearest
/// seed); otherwise the built-in anchors are continued to `phidot_i`.
pub fn solve_at(cfg: &RunConfig, phidot_i: f64) -> Result<ExtremalSolution, CliError> {
    let opts = solver_options(cfg);
    let terminal = cfg.crossing.terminal(phidot_i);
    if let Some(seeds) = file_seeds(cfg)? {
        let seed = seeds
            .iter()
            .min_by(|a, b| (a.phidot_i - phidot_i).abs().total_cmp(&(b.phidot_i - phidot_i).abs()))
            .expect("read_seeds rejects empty files");
        return Ok(solve_extremum_with(phidot_i, seed.lam, terminal, &opts)?);
    }
    if let Some(seed) = BUILTIN_SEEDS.iter().find(|s| s.phidot_i == phidot_i) {
        return Ok(solve_extremum_with(phidot_i, seed.lam, terminal, &opts)?);
    }
    let anchors = anchors(cfg, &opts)?;
    let sol = sweep_from_anchors(&[phidot_i], &anchors, &opts)?.remove(0);
    if sol.terminal == terminal {
        Ok(sol)
    } else {
        Ok(solve_extremum_with(phidot_i, sol.lam, terminal, &opts)?)
    }
}

/// Pulses and angles chosen by `--pulse` (and `--phidot-i`).
pub fn pulses_for(cfg: &RunConfig) -> Result<(PulseSet, AngleDynamics, Option<ExtremalSolution>), CliError> {
    match cfg.pulse {
        PulseChoice::Reference => {
            let p = synthesis::reference_cos_sin_with(cfg.duration, cfg.points)?;
            let a = synthesis::reference_angles(cfg.duration, cfg.points)?;
            Ok((p, a, None))
        }
        PulseChoice::Robust => {
            let sol = solve_at(cfg, cfg.require_phidot()?)?;
            let a = synthesis::time_parametrize_with(&sol, cfg.duration, cfg.points)?;
            let p = a.pulses(sol.area / cfg.duration, PulseLabel::RobustExtremal);
            Ok((p, a, Some(sol)))
        }
    }
}

fn cmd_solve(cfg: &RunConfig) -> Result<(), CliError> {
    let sol = solve_at(cfg, cfg.require_phidot()?)?;
    let record = SolutionRecord::from(&sol);
    let mut out = Outputs::new(cfg)?;
    out.json("solution.json", &record)?;
    out.write("trajectory.csv", |w| Ok(sol.traj.write_csv(w)?))?;
    out.finish(cfg)?;
    println!("{}", serde_json::to_string_pretty(&record).map_err(stirep_core::Error::from)?);
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let grid = cfg.grid.map_or_else(default_family_grid, |g| g.values());
    let opts = solver_options(cfg);
    let anchors = anchors(cfg, &opts)?;
    let family = sweep_from_anchors(&grid, &anchors, &opts)?;
    let mut out = Outputs::new(cfg)?;
    out.write("family.csv", |w| Ok(write_family_csv(&family, w)?))?;
    out.write("family.json", |w| Ok(write_family_json(&family, w)?))?;
    out.write("loss_curve.csv", |w| Ok(write_loss_curve_csv(&family, w)?))?;
    out.finish(cfg)?;
    let (lo, hi) = family.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(s.area_over_pi()), hi.max(s.area_over_pi()))
    });
    println!("{} extrema, area/pi in [{lo:.6}, {hi:.6}]", family.len());
    Ok(())
}

fn cmd_synthesize(cfg: &RunConfig) -> Result<(), CliError> {
    let (pulses, angles, _) = pulses_for(cfg)?;
    let m = synthesis::metrics(&pulses, &angles)?;
    let mut out = Outputs::new(cfg)?;
    out.write("pulses.csv", |w| Ok(pulses.write_csv(w)?))?;
    out.write("angles.csv", |w| Ok(angles.write_csv(w)?))?;
    out.json("metrics.json", &m)?;
    out.finish(cfg)?;
    println!(
        "area/pi {:.6}  energy {:.6}  A2/T {:.6}",
        m.area_over_pi, m.energy_metric, m.a2_over_t
    );
    Ok(())
}

#[derive(Serialize)]
struct FinalState {
    eps: f64,
    gamma: f64,
    duration: f64,
    p1: f64,
    p2: f64,
    p3: f64,
    norm: f64,
    loss_estimate: Option<synthesis::LossEstimate>,
}

fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let (pulses, angles, _) = pulses_for(cfg)?;
    let hist = tdse::populations_history(&pulses, cfg.eps, cfg.gamma, &QuantumState::ground())?;
    let last = hist.t.len() - 1;
    let loss_estimate = if cfg.gamma > 0.0 {
        let m = synthesis::metrics(&pulses, &angles)?;
        Some(synthesis::loss_estimate(m.a2_over_t, cfg.duration, cfg.gamma, m.area))
    } else {
        None
    };
    let fin = FinalState {
        eps: cfg.eps,
        gamma: cfg.gamma,
        duration: cfg.duration,
        p1: hist.p1[last],
        p2: hist.p2[last],
        p3: hist.p3[last],
        norm: hist.norm[last],
        loss_estimate,
    };
    let mut out = Outputs::new(cfg)?;
    out.write("populations.csv", |w| Ok(hist.write_csv(w)?))?;
    out.json("final.json", &fin)?;
    out.finish(cfg)?;
    println!("P1 {:.12}  P2 {:.12}  P3 {:.12}", fin.p1, fin.p2, fin.p3);
    Ok(())
}

#[derive(Serialize)]
struct ProfileSummary {
    width_uhf: f64,
    width_minus: f64,
    width_plus: f64,
    asymmetry: f64,
    o2: f64,
    o3: f64,
}

fn cmd_profile(cfg: &RunConfig) -> Result<(), CliError> {
    let (pulses, angles, _) = pulses_for(cfg)?;
    let profile = tdse::robustness_profile(&pulses, &cfg.eps_range.values())?;
    let summary = ProfileSummary {
        width_uhf: profile.width_uhf,
        width_minus: profile.width_minus,
        width_plus: profile.width_plus,
        asymmetry: profile.asymmetry(),
        o2: tdse::deviation_o2(&angles),
        o3: tdse::deviation_o3(&angles),
    };
    let mut out = Outputs::new(cfg)?;
    out.write("profile.csv", |w| Ok(profile.write_csv(w)?))?;
    out.json("profile_summary.json", &summary)?;
    out.finish(cfg)?;
    println!("width_uhf {:.6}", summary.width_uhf);
    Ok(())
}

fn cmd_verify(cfg: &RunConfig) -> Result<(), CliError> {
    let opts = solver_options(cfg);
    let anchors = anchors(cfg, &opts)?;
    let family = match cfg.grid {
        Some(g) => sweep_from_anchors(&g.values(), &anchors, &opts)?,
        None => anchors,
    };
    let mut reports = verification::run_all(&family);
    reports.push(verification::check_reference_amplitude(cfg.duration));
    let mut out = Outputs::new(cfg)?;
    out.write("checks.jsonl", |w| Ok(verification::write_json_lines(&reports, w)?))?;
    out.finish(cfg)?;
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} checks, {} failed", reports.len(), failed);
    for r in reports.iter().filter(|r| !r.passed) {
        println!("FAIL {} {} measured {:e} tolerance {:e}", r.check_name, r.context, r.measured, r.tolerance);
    }
    if failed > 0 {
        return Err(CliError::ChecksFailed(format!("{failed} checks failed")));
    }
    Ok(())
}
