//! Run configuration: a TOML file with one table per subcommand.
//!
//! Every table is optional and every key has a default, so an empty file is a
//! valid configuration. Unknown keys are rejected.

use std::path::Path;

use crooks_core::pulse::{GradientMethod, NoiseGrid, OptimizerConfig, SixLevelModel, DEFAULT_A_ZZ_MHZ};
use crooks_core::readout::{flip_prob_for_mean_plateau, ReadoutModel, DEFAULT_REPS};
use crooks_core::switching::{DEFAULT_GAMMA_SAMPLES, DEFAULT_X_MAX_KHZ, DEFAULT_Z0_KHZ};
use crooks_core::tpm::MeasurementModel;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Worker threads; 0 lets the pool choose.
    pub threads: usize,
    pub protocol: ProtocolConfig,
    pub tpm: TpmConfig,
    pub gamma: GammaConfig,
    pub pulse: PulseConfig,
    pub readout: ReadoutConfig,
    pub table1: Table1Config,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            threads: 0,
            protocol: ProtocolConfig::default(),
            tpm: TpmConfig::default(),
            gamma: GammaConfig::default(),
            pulse: PulseConfig::default(),
            readout: ReadoutConfig::default(),
            table1: Table1Config::default(),
        }
    }
}

/// Endpoint amplitudes of the switching Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub z0_khz: f64,
    pub x_max_khz: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            z0_khz: DEFAULT_Z0_KHZ,
            x_max_khz: DEFAULT_X_MAX_KHZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Exact,
    #[serde(alias = "mc")]
    #[value(name = "mc", alias = "monte_carlo")]
    MonteCarlo,
    Both,
}

impl RunMode {
    pub fn exact(self) -> bool {
        matches!(self, Self::Exact | Self::Both)
    }

    pub fn monte_carlo(self) -> bool {
        matches!(self, Self::MonteCarlo | Self::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpmConfig {
    pub taus_us: Vec<f64>,
    pub h_betas: Vec<f64>,
    pub mode: RunMode,
    /// Accepted shots per direction and cell.
    pub shots: u64,
    pub slices: usize,
    pub misassign_prob: f64,
    pub demolition_prob: f64,
    /// Preparation acceptance, used only to plan attempted shots.
    pub nuclear_init_acceptance: f64,
    pub charge_state_acceptance: f64,
    pub charge_state_checks: u32,
}

impl Default for TpmConfig {
    fn default() -> Self {
        Self {
            taus_us: vec![25.0, 50.0, 100.0, 200.0, 300.0],
            h_betas: vec![0.22],
            mode: RunMode::Exact,
            shots: 16_000,
            slices: crooks_core::quantum::DEFAULT_SLICES,
            misassign_prob: 0.0,
            demolition_prob: 0.0,
            nuclear_init_acceptance: 0.32,
            charge_state_acceptance: 0.41,
            charge_state_checks: 2,
        }
    }
}

impl TpmConfig {
    pub fn measurement_model(&self) -> Result<MeasurementModel, CliError> {
        MeasurementModel::new(self.misassign_prob, self.demolition_prob)
            .map_err(|e| CliError::config(format!("[tpm] {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaConfig {
    pub taus_us: Vec<f64>,
    pub samples: usize,
}

impl Default for GammaConfig {
    fn default() -> Self {
        Self {
            taus_us: vec![25.0, 50.0, 100.0, 200.0, 300.0],
            samples: DEFAULT_GAMMA_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub a_zz_mhz: f64,
    pub segments: usize,
    /// µs; absent selects `4/|A_zz|`.
    pub total_time_us: Option<f64>,
    /// MHz; absent selects `|A_zz|/2`.
    pub amplitude_bound_mhz: Option<f64>,
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub target_objective: f64,
    pub gradient: GradientMethod,
    pub alpha_range: [f64; 2],
    pub delta_range_mhz: [f64; 2],
    pub alpha_points: usize,
    pub delta_points: usize,
    /// Evaluate the constant-amplitude comparison pulse instead of optimizing.
    pub naive_square: bool,
}

impl Default for PulseConfig {
    fn default() -> Self {
        let opt = OptimizerConfig::default();
        let grid = NoiseGrid::default();
        Self {
            a_zz_mhz: DEFAULT_A_ZZ_MHZ,
            segments: opt.segments,
            total_time_us: opt.total_time,
            amplitude_bound_mhz: opt.amplitude_bound,
            restarts: opt.restarts,
            max_iterations: opt.max_iterations,
            tolerance: opt.tolerance,
            target_objective: opt.target_objective,
            gradient: opt.gradient,
            alpha_range: [grid.alpha_range.0, grid.alpha_range.1],
            delta_range_mhz: [grid.delta_range.0, grid.delta_range.1],
            alpha_points: grid.alpha_points,
            delta_points: grid.delta_points,
            naive_square: false,
        }
    }
}

impl PulseConfig {
    pub fn model(&self) -> Result<SixLevelModel, CliError> {
        SixLevelModel::new(self.a_zz_mhz).map_err(|e| CliError::config(format!("[pulse] {e}")))
    }

    pub fn grid(&self) -> Result<NoiseGrid, CliError> {
        let grid = NoiseGrid {
            alpha_range: (self.alpha_range[0], self.alpha_range[1]),
            delta_range: (self.delta_range_mhz[0], self.delta_range_mhz[1]),
            alpha_points: self.alpha_points,
            delta_points: self.delta_points,
        };
        grid.validate().map_err(|e| CliError::config(format!("[pulse] {e}")))?;
        Ok(grid)
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            segments: self.segments,
            total_time: self.total_time_us,
            amplitude_bound: self.amplitude_bound_mhz,
            restarts: self.restarts,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            target_objective: self.target_objective,
            gradient: self.gradient,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutConfig {
    pub reps: u32,
    pub lambda_bright: f64,
    pub lambda_dark: f64,
    /// Mean plateau length in readout points; sets the per-repetition flip
    /// probability unless `flip_prob_per_rep` is given.
    pub mean_plateau: f64,
    pub flip_prob_per_rep: Option<f64>,
    pub pi_pulse_error: f64,
    pub trials: usize,
    pub minus1_fraction: f64,
    pub trace_points: usize,
    pub min_run: usize,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        let m = ReadoutModel::default();
        Self {
            reps: DEFAULT_REPS,
            lambda_bright: m.lambda_bright,
            lambda_dark: m.lambda_dark,
            mean_plateau: 25.0,
            flip_prob_per_rep: None,
            pi_pulse_error: m.pi_pulse_error,
            trials: 10_000,
            minus1_fraction: 0.5,
            trace_points: 20_000,
            min_run: 1,
        }
    }
}

impl ReadoutConfig {
    pub fn model(&self) -> Result<ReadoutModel, CliError> {
        if self.flip_prob_per_rep.is_none() && self.mean_plateau <= 1.0 {
            return Err(CliError::config(format!(
                "[readout] mean_plateau must exceed 1, got {}",
                self.mean_plateau
            )));
        }
        let model = ReadoutModel {
            reps: self.reps,
            lambda_bright: self.lambda_bright,
            lambda_dark: self.lambda_dark,
            flip_prob_per_rep: self
                .flip_prob_per_rep
                .unwrap_or_else(|| flip_prob_for_mean_plateau(self.mean_plateau, self.reps.max(1))),
            pi_pulse_error: self.pi_pulse_error,
        };
        model.validate().map_err(|e| CliError::config(format!("[readout] {e}")))?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationRowConfig {
    pub p0: f64,
    pub p1: f64,
    pub q0: f64,
    pub q1: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table1Config {
    pub rows: Vec<PopulationRowConfig>,
}

impl Default for Table1Config {
    fn default() -> Self {
        let row = |p0: f64, q0: f64| PopulationRowConfig {
            p0,
            p1: round2(1.0 - p0),
            q0,
            q1: round2(1.0 - q0),
            sigma: 0.04,
        };
        Self {
            rows: vec![row(0.52, 0.53), row(0.58, 0.69), row(0.63, 0.81), row(0.68, 0.86)],
        }
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// 1-based line of `key` inside `[section]`, or of the top-level `key` when
/// `section` is empty.
pub fn locate_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(n + 1);
                }
            }
        }
    }
    None
}

fn at(text: &str, section: &str, key: &str, msg: String) -> CliError {
    let name = if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    };
    match locate_key(text, section, key) {
        Some(line) => CliError::config(format!("line {line}: {name}: {msg}")),
        None => CliError::config(format!("{name}: {msg}")),
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::config(e.to_string().trim_end().to_string()))?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Semantic checks; `text` is the source used to report line numbers.
    pub fn validate(&self, text: &str) -> Result<(), CliError> {
        let p = &self.protocol;
        for (key, v) in [("z0_khz", p.z0_khz), ("x_max_khz", p.x_max_khz)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(at(text, "protocol", key, format!("must be positive, got {v}")));
            }
        }

        let t = &self.tpm;
        if t.taus_us.is_empty() {
            return Err(at(text, "tpm", "taus_us", "must list at least one switching time".into()));
        }
        if let Some(bad) = t.taus_us.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(at(text, "tpm", "taus_us", format!("switching times must be positive, got {bad}")));
        }
        if t.h_betas.is_empty() {
            return Err(at(text, "tpm", "h_betas", "must list at least one inverse temperature".into()));
        }
        if let Some(bad) = t.h_betas.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(at(text, "tpm", "h_betas", format!("inverse temperatures must be >= 0, got {bad}")));
        }
        if t.mode.monte_carlo() && t.shots == 0 {
            return Err(at(text, "tpm", "shots", "must be >= 1 for Monte Carlo runs".into()));
        }
        if t.slices == 0 {
            return Err(at(text, "tpm", "slices", "must be >= 1".into()));
        }
        if let Err(e) = t.measurement_model() {
            let key = if (0.0..0.5).contains(&t.misassign_prob) {
                "demolition_prob"
            } else {
                "misassign_prob"
            };
            return Err(at(text, "tpm", key, e.to_string()));
        }
        for (key, v) in [
            ("nuclear_init_acceptance", t.nuclear_init_acceptance),
            ("charge_state_acceptance", t.charge_state_acceptance),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(at(text, "tpm", key, format!("must lie in (0, 1], got {v}")));
            }
        }

        let g = &self.gamma;
        if g.taus_us.is_empty() {
            return Err(at(text, "gamma", "taus_us", "must list at least one switching time".into()));
        }
        if let Some(bad) = g.taus_us.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(at(text, "gamma", "taus_us", format!("switching times must be positive, got {bad}")));
        }
        if g.samples < 100 {
            return Err(at(text, "gamma", "samples", format!("must be >= 100, got {}", g.samples)));
        }

        let pc = &self.pulse;
        pc.model().map_err(|e| at(text, "pulse", "a_zz_mhz", e.to_string()))?;
        pc.grid().map_err(|e| at(text, "pulse", "delta_range_mhz", e.to_string()))?;
        for (key, v) in [
            ("segments", pc.segments),
            ("restarts", pc.restarts),
            ("max_iterations", pc.max_iterations),
        ] {
            if v == 0 {
                return Err(at(text, "pulse", key, "must be >= 1".into()));
            }
        }
        if let Some(tt) = pc.total_time_us {
            if !(tt.is_finite() && tt > 0.0) {
                return Err(at(text, "pulse", "total_time_us", format!("must be positive, got {tt}")));
            }
        }
        if let Some(b) = pc.amplitude_bound_mhz {
            if !(b.is_finite() && b >= 0.0) {
                return Err(at(text, "pulse", "amplitude_bound_mhz", format!("must be >= 0, got {b}")));
            }
        }

        let r = &self.readout;
        r.model().map_err(|e| {
            let key = if r.reps == 0 {
                "reps"
            } else if r.lambda_bright < r.lambda_dark {
                "lambda_bright"
            } else if r.flip_prob_per_rep.is_some() {
                "flip_prob_per_rep"
            } else {
                "mean_plateau"
            };
            at(text, "readout", key, e.to_string())
        })?;
        if r.trials == 0 {
            return Err(at(text, "readout", "trials", "must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&r.minus1_fraction) {
            return Err(at(text, "readout", "minus1_fraction", format!("must lie in [0, 1], got {}", r.minus1_fraction)));
        }
        if r.min_run == 0 {
            return Err(at(text, "readout", "min_run", "must be >= 1".into()));
        }

        for (k, row) in self.table1.rows.iter().enumerate() {
            for v in [row.p0, row.p1, row.q0, row.q1] {
                if !(v > 0.0 && v < 1.0) {
                    return Err(at(text, "table1", "rows", format!("row {}: populations must lie in (0, 1), got {v}", k + 1)));
                }
            }
            if !(row.sigma >= 0.0) {
                return Err(at(text, "table1", "rows", format!("row {}: sigma must be >= 0", k + 1)));
            }
        }
        Ok(())
    }
}
