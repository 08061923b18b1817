//! Subcommand bodies. Each writes its artifacts into a [`RunDir`] and reports
//! warnings and whether the run counts as a numerical failure.

use crooks_core::analysis::{round_half_away, table1_regression, PopulationRow, TemperatureEstimate};
use crooks_core::experiment::{cell_seed, exact_cell, monte_carlo_cell, CellReport, Mode, ProtocolPair};
use crooks_core::pulse::{optimize_pulse, robustness_surface, ControlPulse, RestartSummary};
use crooks_core::quantum::eig_hermitian;
use crooks_core::readout::{
    estimate_fidelity_filtered, histogram, simulate_trace, FidelityEstimate, MixtureFit, NuclearState,
    ThresholdStatus,
};
use crooks_core::switching::{Direction, SwitchingProtocol};
use crooks_core::tpm::WorkDistribution;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Config, ProtocolConfig};
use crate::error::CliError;
use crate::output::{num, RunDir};

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub warnings: Vec<String>,
    /// Set when artifacts were written but the computation missed its goal.
    pub failure: Option<String>,
}

fn protocol(p: &ProtocolConfig, tau_us: f64) -> Result<SwitchingProtocol, CliError> {
    SwitchingProtocol::new(p.z0_khz, p.x_max_khz, tau_us, Direction::Forward)
        .map_err(|e| CliError::config(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShotPlan {
    pub nuclear_init_acceptance: f64,
    pub charge_state_acceptance: f64,
    pub charge_state_checks: u32,
    pub total_acceptance: f64,
    pub accepted_shots: u64,
    /// Expected attempts needed to collect `accepted_shots`.
    pub attempted_shots: u64,
}

/// The charge-state check runs `charge_checks` times per shot.
pub fn plan_shots(accepted: u64, nuclear_init: f64, charge_state: f64, charge_checks: u32) -> ShotPlan {
    let total = nuclear_init * charge_state.powi(charge_checks as i32);
    ShotPlan {
        nuclear_init_acceptance: nuclear_init,
        charge_state_acceptance: charge_state,
        charge_state_checks: charge_checks,
        total_acceptance: total,
        accepted_shots: accepted,
        attempted_shots: (accepted as f64 / total).ceil() as u64,
    }
}

#[derive(Serialize)]
struct TpmDocument<'a> {
    command: &'static str,
    protocol: &'a ProtocolConfig,
    plan: Option<ShotPlan>,
    microreversibility: Vec<(f64, f64)>,
    cells: &'a [CellReport],
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Exact => "exact",
        Mode::MonteCarlo => "monte_carlo",
    }
}

fn traj(i: usize, j: usize) -> String {
    format!("{i}->{j}~")
}

fn distribution_rows(rows: &mut Vec<Vec<String>>, cell: &CellReport, direction: &str, d: &WorkDistribution, counts: Option<[[u64; 2]; 2]>) {
    for i in 0..2 {
        for j in 0..2 {
            rows.push(vec![
                mode_name(cell.mode).into(),
                num(cell.tau_us),
                num(cell.h_beta),
                direction.into(),
                traj(i, j),
                num(d.work_values[i][j]),
                num(d.probabilities[i][j]),
                num(d.std_errors[i][j]),
                counts.map_or(String::new(), |c| c[i][j].to_string()),
            ]);
        }
    }
}

pub fn cmd_tpm(cfg: &Config, out: &mut RunDir) -> Result<Outcome, CliError> {
    let t = &cfg.tpm;
    let model = t.measurement_model()?;
    let pairs: Vec<ProtocolPair> = t
        .taus_us
        .par_iter()
        .map(|&tau| Ok(ProtocolPair::new(protocol(&cfg.protocol, tau)?, t.slices)?))
        .collect::<Result<_, CliError>>()?;

    let mut jobs = Vec::new();
    for mode in [Mode::Exact, Mode::MonteCarlo] {
        let on = match mode {
            Mode::Exact => t.mode.exact(),
            Mode::MonteCarlo => t.mode.monte_carlo(),
        };
        if !on {
            continue;
        }
        for (ti, pair) in pairs.iter().enumerate() {
            for (bi, &hb) in t.h_betas.iter().enumerate() {
                let index = (ti * t.h_betas.len() + bi) as u64;
                jobs.push((mode, pair, hb, index));
            }
        }
    }
    let cells: Vec<CellReport> = jobs
        .par_iter()
        .map(|&(mode, pair, hb, index)| match mode {
            Mode::Exact => exact_cell(pair, hb),
            Mode::MonteCarlo => monte_carlo_cell(pair, hb, t.shots, &model, cell_seed(cfg.seed, index)),
        })
        .collect::<Result<_, _>>()?;

    let mut outcome = Outcome::default();
    let mut residual_rows = Vec::new();
    let mut dist_rows = Vec::new();
    let mut temp_rows = Vec::new();
    for c in &cells {
        for r in &c.residuals {
            if !r.defined {
                outcome.warnings.push(format!(
                    "{} tau={} h_beta={}: residual {} undefined (reverse probability is zero)",
                    mode_name(c.mode),
                    c.tau_us,
                    c.h_beta,
                    traj(r.trajectory.0, r.trajectory.1)
                ));
            }
            residual_rows.push(vec![
                mode_name(c.mode).into(),
                num(c.tau_us),
                num(c.h_beta),
                traj(r.trajectory.0, r.trajectory.1),
                num(r.work),
                num(r.lhs),
                num(r.rhs),
                num(r.delta),
                num(r.std_error),
                num(r.ci95()),
                r.defined.to_string(),
            ]);
        }
        distribution_rows(&mut dist_rows, c, "forward", &c.forward, c.forward_counts.map(|x| x.counts));
        distribution_rows(&mut dist_rows, c, "reverse", &c.reverse, c.reverse_counts.map(|x| x.counts));
        let TemperatureEstimate { forward, reverse, average } = c.temperature;
        temp_rows.push(vec![
            mode_name(c.mode).into(),
            num(c.tau_us),
            num(c.h_beta),
            num(forward.h_beta),
            num(forward.std_error),
            num(reverse.h_beta),
            num(reverse.std_error),
            num(average.h_beta),
            num(average.std_error),
            num(c.free_energy),
        ]);
    }

    let doc = TpmDocument {
        command: "tpm",
        protocol: &cfg.protocol,
        plan: t
            .mode
            .monte_carlo()
            .then(|| plan_shots(t.shots, t.nuclear_init_acceptance, t.charge_state_acceptance, t.charge_state_checks)),
        microreversibility: pairs
            .iter()
            .map(|p| (p.forward.protocol.tau_us, p.microreversibility_error()))
            .collect(),
        cells: &cells,
    };
    out.write_json("results.json", &doc)?;
    out.write_csv(
        "residuals.csv",
        &["mode", "tau_us", "h_beta", "trajectory", "work_khz", "lhs", "rhs", "delta", "std_error", "ci95", "defined"],
        &residual_rows,
    )?;
    out.write_csv(
        "distributions.csv",
        &["mode", "tau_us", "h_beta", "direction", "trajectory", "work_khz", "probability", "std_error", "counts"],
        &dist_rows,
    )?;
    out.write_csv(
        "temperatures.csv",
        &[
            "mode",
            "tau_us",
            "h_beta_preset",
            "h_beta_f",
            "sigma_f",
            "h_beta_r",
            "sigma_r",
            "h_beta_avg",
            "sigma_avg",
            "free_energy_khz",
        ],
        &temp_rows,
    )?;
    Ok(outcome)
}

pub fn cmd_gamma(cfg: &Config, out: &mut RunDir) -> Result<Outcome, CliError> {
    let rows: Vec<Vec<String>> = cfg
        .gamma
        .taus_us
        .par_iter()
        .map(|&tau| {
            let g = protocol(&cfg.protocol, tau)?.adiabaticity(cfg.gamma.samples)?;
            Ok(vec![num(tau), num(g)])
        })
        .collect::<Result<_, CliError>>()?;
    out.write_csv("gamma.csv", &["tau_us", "gamma"], &rows)?;
    Ok(Outcome::default())
}

#[derive(Serialize)]
struct PulseReport<'a> {
    command: &'static str,
    pulse_kind: &'static str,
    a_zz_mhz: f64,
    total_time_us: f64,
    amplitude_bound_mhz: f64,
    segments: usize,
    objective: f64,
    nominal_fidelity: f64,
    worst_fidelity: f64,
    converged: bool,
    best_start: Option<usize>,
    restarts: Vec<RestartRow>,
    grid: &'a crooks_core::NoiseGrid,
}

#[derive(Serialize)]
struct RestartRow {
    start: usize,
    objective: f64,
    iterations: usize,
}

impl From<&RestartSummary> for RestartRow {
    fn from(r: &RestartSummary) -> Self {
        Self {
            start: r.start,
            objective: r.objective,
            iterations: r.iterations,
        }
    }
}

pub fn cmd_pulse(cfg: &Config, out: &mut RunDir) -> Result<Outcome, CliError> {
    let pc = &cfg.pulse;
    let model = pc.model()?;
    let grid = pc.grid()?;
    let mut outcome = Outcome::default();

    let (pulse, kind, objective, converged, best_start, restarts): (ControlPulse, _, _, _, _, Vec<RestartRow>) =
        if pc.naive_square {
            let bound = pc.amplitude_bound_mhz.unwrap_or_else(|| model.default_amplitude_bound());
            let p = ControlPulse::naive_square(&model, pc.segments, bound)?;
            let obj = crooks_core::pulse::robust_objective(&p, &model, &grid)?;
            (p, "naive_square", obj, true, None, Vec::new())
        } else {
            let d = optimize_pulse(&model, &grid, &pc.optimizer(), cfg.seed)?;
            let rows = d.restarts.iter().map(RestartRow::from).collect();
            (d.pulse, "optimized", d.objective, d.converged, Some(d.best_start), rows)
        };
    let surface = robustness_surface(&pulse, &model, &grid)?;
    let nominal = crooks_core::pulse::fidelity_at(&pulse, &model, 0.0, 0.0)?;
    let worst = surface.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);

    out.write_bytes("pulse.txt", pulse.to_text(&model).as_bytes())?;
    let rows: Vec<Vec<String>> = surface.iter().map(|&(a, d, f)| vec![num(a), num(d), num(f)]).collect();
    out.write_csv("surface.csv", &["alpha", "delta_mhz", "fidelity"], &rows)?;
    out.write_json(
        "pulse_report.json",
        &PulseReport {
            command: "pulse",
            pulse_kind: kind,
            a_zz_mhz: model.a_zz,
            total_time_us: pulse.total_time,
            amplitude_bound_mhz: pulse.amplitude_bound,
            segments: pulse.len(),
            objective,
            nominal_fidelity: nominal,
            worst_fidelity: worst,
            converged,
            best_start,
            restarts,
            grid: &grid,
        },
    )?;
    if !converged {
        outcome.failure = Some(format!(
            "optimizer did not reach the target objective {} (best {objective}); best pulse written",
            pc.target_objective
        ));
    }
    Ok(outcome)
}

#[derive(Serialize)]
struct ReadoutReport {
    command: &'static str,
    reps: u32,
    trials: usize,
    flip_prob_per_rep: f64,
    threshold: Option<u64>,
    threshold_status: ThresholdStatus,
    threshold_method: &'static str,
    fit: Option<MixtureFit>,
    trace_points: usize,
    fidelity: Option<FidelityEstimate>,
    fidelity_error: Option<String>,
}

pub fn cmd_readout(cfg: &Config, out: &mut RunDir) -> Result<Outcome, CliError> {
    let rc = &cfg.readout;
    let model = rc.model()?;
    let mut outcome = Outcome::default();
    let h = histogram(&model, rc.trials, rc.minus1_fraction, crooks_core::rng::derive_seed(cfg.seed, 0))?;
    let rows: Vec<Vec<String>> = h
        .frequencies
        .iter()
        .enumerate()
        .map(|(k, f)| vec![model.reps.to_string(), k.to_string(), f.to_string()])
        .collect();
    out.write_csv("histogram.csv", &["reps", "photon_count", "frequency"], &rows)?;

    let mut fidelity = None;
    let mut fidelity_error = None;
    match h.threshold {
        Some(threshold) => {
            let trace = simulate_trace(
                &model,
                rc.trace_points,
                NuclearState::NotMinus1,
                threshold,
                crooks_core::rng::derive_seed(cfg.seed, 1),
            )?;
            let labels = trace.labels();
            let rows: Vec<Vec<String>> = trace
                .points
                .iter()
                .zip(&labels)
                .enumerate()
                .map(|(k, (p, l))| vec![k.to_string(), p.count.to_string(), l.to_string(), p.true_state.label().to_string()])
                .collect();
            out.write_csv("trace.csv", &["index", "photon_count", "label", "true_label"], &rows)?;
            match estimate_fidelity_filtered(&trace, rc.min_run) {
                Ok(f) => {
                    if f.low_confidence {
                        outcome.warnings.push("trace shows no transitions; fidelity is a low-confidence bound".into());
                    }
                    fidelity = Some(f);
                }
                Err(e) => {
                    fidelity_error = Some(e.to_string());
                    outcome.failure = Some(format!("fidelity estimate unavailable: {e}"));
                }
            }
        }
        None => {
            let why = match h.status {
                ThresholdStatus::TooFewTrials => "too few trials for a mixture fit",
                _ => "histogram does not resolve two modes",
            };
            outcome.warnings.push(format!("threshold undefined: {why}"));
        }
    }
    out.write_json(
        "readout_report.json",
        &ReadoutReport {
            command: "readout",
            reps: model.reps,
            trials: h.trials,
            flip_prob_per_rep: model.flip_prob_per_rep,
            threshold: h.threshold,
            threshold_status: h.status,
            threshold_method: h.method,
            fit: h.fit,
            trace_points: if h.threshold.is_some() { rc.trace_points } else { 0 },
            fidelity,
            fidelity_error,
        },
    )?;
    Ok(outcome)
}

pub fn cmd_table1(cfg: &Config, out: &mut RunDir) -> Result<Outcome, CliError> {
    let p = protocol(&cfg.protocol, 1.0)?;
    let gap0 = eig_hermitian(&p.start_hamiltonian())?.gap();
    let gap_tau = eig_hermitian(&p.end_hamiltonian())?.gap();
    let rows: Vec<PopulationRow> = cfg
        .table1
        .rows
        .iter()
        .map(|r| PopulationRow {
            p0: r.p0,
            p1: r.p1,
            q0: r.q0,
            q1: r.q1,
            sigma: r.sigma,
        })
        .collect();
    let est = table1_regression(&rows, gap0, gap_tau)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .zip(&est)
        .map(|(r, e)| {
            vec![
                num(r.p0),
                num(r.p1),
                num(r.q0),
                num(r.q1),
                num(r.sigma),
                num(e.forward.h_beta),
                num(e.forward.std_error),
                num(e.reverse.h_beta),
                num(e.reverse.std_error),
                num(e.average.h_beta),
                num(e.average.std_error),
                format!("{:.2}", round_half_away(e.forward.h_beta, 2)),
                format!("{:.2}", round_half_away(e.reverse.h_beta, 2)),
                format!("{:.2}", round_half_away(e.average.h_beta, 2)),
            ]
        })
        .collect();
    out.write_csv(
        "table1.csv",
        &[
            "p0",
            "p1",
            "q0",
            "q1",
            "sigma",
            "h_beta_f",
            "sigma_f",
            "h_beta_r",
            "sigma_r",
            "h_beta_avg",
            "sigma_avg",
            "h_beta_f_2dp",
            "h_beta_r_2dp",
            "h_beta_avg_2dp",
        ],
        &table,
    )?;
    Ok(Outcome::default())
}
