//! Robust piecewise-constant pulse design for a nuclear-spin-selective
//! electron π rotation.
//!
//! The model lives on the six states `|m_n⟩|m_e⟩` ordered
//! `|1,0⟩, |0,0⟩, |−1,0⟩, |1,−1⟩, |0,−1⟩, |−1,−1⟩`, i.e. index
//! `3·e + n` with the electron as the outer factor. Frequencies are in MHz
//! and times in µs; Hamiltonians are in rad/µs.
//!
//! Segment propagators and their derivatives come from the eigendecomposition
//! of each segment Hamiltonian, so the fidelity gradient is exact.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::quantum::{eigh_raw, matrix_exp, spin, Operator, C64};
use crate::rng::StreamFactory;

pub const DEFAULT_A_ZZ_MHZ: f64 = -2.16;
pub const DEFAULT_SEGMENTS: usize = 10;
pub const DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixLevelModel {
    pub a_zz: f64,
}

impl Default for SixLevelModel {
    fn default() -> Self {
        Self {
            a_zz: DEFAULT_A_ZZ_MHZ,
        }
    }
}

impl SixLevelModel {
    pub fn new(a_zz: f64) -> Result<Self> {
        if !(a_zz.is_finite() && a_zz != 0.0) {
            return Err(validation(format!("a_zz must be finite and non-zero, got {a_zz}")));
        }
        Ok(Self { a_zz })
    }

    /// `T = 4/|A_zz|` in µs.
    pub fn default_total_time(&self) -> f64 {
        4.0 / self.a_zz.abs()
    }

    /// Amplitude bound of `|A_zz|/2` MHz.
    pub fn default_amplitude_bound(&self) -> f64 {
        self.a_zz.abs() / 2.0
    }

    fn nuclear_iz() -> Operator {
        Operator::from_real_rows(3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0]).expect("3x3")
    }

    fn nuclear_projector_minus1() -> Operator {
        Operator::diagonal(&[C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)])
    }

    /// `2π A_zz I_z ⊗ |−1⟩_e⟨−1|`.
    pub fn drift(&self) -> Operator {
        let electron_dark = Operator::diagonal(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        electron_dark
            .kron(&Self::nuclear_iz())
            .scale_real(2.0 * PI * self.a_zz)
    }

    pub fn control_x() -> Operator {
        spin::sx().kron(&Operator::identity(3))
    }

    pub fn control_y() -> Operator {
        spin::sy().kron(&Operator::identity(3))
    }

    pub fn electron_sz() -> Operator {
        spin::sz().kron(&Operator::identity(3))
    }

    /// π rotation about x on the electron, conditioned on `m_n = −1`.
    pub fn target() -> Operator {
        let p = Self::nuclear_projector_minus1();
        let rest = Operator::identity(3).add(&p.scale_real(-1.0));
        let rot = matrix_exp(&spin::sx(), C64::new(0.0, -PI)).expect("2x2");
        rot.kron(&p).add(&Operator::identity(2).kron(&rest))
    }

    /// Segment Hamiltonian with amplitude noise `alpha` and detuning `delta` (MHz).
    pub fn segment_hamiltonian(&self, omega_x: f64, omega_y: f64, alpha: f64, delta: f64) -> Operator {
        let amp = (1.0 + alpha) * 2.0 * PI;
        self.drift()
            .add(&Self::control_x().scale_real(amp * omega_x))
            .add(&Self::control_y().scale_real(amp * omega_y))
            .add(&Self::electron_sz().scale_real(2.0 * PI * delta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPulse {
    /// `(Ω_x, Ω_y)` per segment in MHz.
    pub segments: Vec<(f64, f64)>,
    pub total_time: f64,
    pub amplitude_bound: f64,
}

impl ControlPulse {
    pub fn new(segments: Vec<(f64, f64)>, total_time: f64, amplitude_bound: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(validation("a pulse needs at least one segment"));
        }
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(validation(format!("total time must be positive, got {total_time}")));
        }
        if !(amplitude_bound.is_finite() && amplitude_bound >= 0.0) {
            return Err(validation(format!(
                "amplitude bound must be >= 0, got {amplitude_bound}"
            )));
        }
        for (i, &(x, y)) in segments.iter().enumerate() {
            if x.hypot(y) > amplitude_bound * (1.0 + 1e-12) + 1e-15 {
                return Err(validation(format!(
                    "segment {i} amplitude {} exceeds bound {amplitude_bound}",
                    x.hypot(y)
                )));
            }
        }
        Ok(Self {
            segments,
            total_time,
            amplitude_bound,
        })
    }

    pub fn zero(model: &SixLevelModel, segments: usize, amplitude_bound: f64) -> Result<Self> {
        Self::new(vec![(0.0, 0.0); segments], model.default_total_time(), amplitude_bound)
    }

    /// Square-envelope π pulse resonant with the `m_n = −1` electron
    /// transition, sampled at segment midpoints.
    pub fn naive_square(model: &SixLevelModel, segments: usize, amplitude_bound: f64) -> Result<Self> {
        let t = model.default_total_time();
        let dt = t / segments as f64;
        let rabi = 1.0 / (2.0 * t);
        let segs = (0..segments)
            .map(|i| {
                let phase = 2.0 * PI * model.a_zz * (i as f64 + 0.5) * dt;
                (rabi * phase.cos(), rabi * phase.sin())
            })
            .collect();
        Self::new(segs, t, amplitude_bound)
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segment_time(&self) -> f64 {
        self.total_time / self.segments.len() as f64
    }

    /// Flattened `[Ω_1x, Ω_1y, Ω_2x, ...]`.
    pub fn parameters(&self) -> Vec<f64> {
        self.segments.iter().flat_map(|&(x, y)| [x, y]).collect()
    }

    fn with_parameters(&self, params: &[f64]) -> Self {
        Self {
            segments: params.chunks_exact(2).map(|c| (c[0], c[1])).collect(),
            ..self.clone()
        }
    }

    /// Plain-text record: `#`-prefixed header then one `Ω_x Ω_y` line per segment.
    pub fn to_text(&self, model: &SixLevelModel) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# crooks-lab control pulse");
        let _ = writeln!(s, "# total_time_us {}", self.total_time);
        let _ = writeln!(s, "# segments {}", self.segments.len());
        let _ = writeln!(s, "# a_zz_mhz {}", model.a_zz);
        let _ = writeln!(s, "# amplitude_bound_mhz {}", self.amplitude_bound);
        let _ = writeln!(s, "# columns omega_x_MHz omega_y_MHz");
        for (x, y) in &self.segments {
            let _ = writeln!(s, "{x} {y}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<(Self, SixLevelModel)> {
        let mut total_time = None;
        let mut count = None;
        let mut a_zz = None;
        let mut bound = None;
        let mut segments = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let err = |what: &str| validation(format!("pulse file line {}: {what}: {raw:?}", lineno + 1));
            if let Some(rest) = line.strip_prefix('#') {
                let mut parts = rest.split_whitespace();
                let (Some(key), value) = (parts.next(), parts.next()) else {
                    continue;
                };
                let parse = |v: Option<&str>| -> Result<f64> {
                    v.and_then(|v| v.parse().ok()).ok_or_else(|| err("bad header value"))
                };
                match key {
                    "total_time_us" => total_time = Some(parse(value)?),
                    "segments" => count = Some(parse(value)? as usize),
                    "a_zz_mhz" => a_zz = Some(parse(value)?),
                    "amplitude_bound_mhz" => bound = Some(parse(value)?),
                    _ => {}
                }
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err("expected two numbers"))?;
            if vals.len() != 2 {
                return Err(err("expected two numbers"));
            }
            segments.push((vals[0], vals[1]));
        }
        let missing = |k: &str| validation(format!("pulse file is missing header '{k}'"));
        let total_time = total_time.ok_or_else(|| missing("total_time_us"))?;
        let count = count.ok_or_else(|| missing("segments"))?;
        let model = SixLevelModel::new(a_zz.ok_or_else(|| missing("a_zz_mhz"))?)?;
        let bound = bound.ok_or_else(|| missing("amplitude_bound_mhz"))?;
        if count != segments.len() {
            return Err(validation(format!(
                "pulse file declares {count} segments but lists {}",
                segments.len()
            )));
        }
        Ok((ControlPulse::new(segments, total_time, bound)?, model))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseGrid {
    pub alpha_range: (f64, f64),
    /// MHz.
    pub delta_range: (f64, f64),
    pub alpha_points: usize,
    pub delta_points: usize,
}

impl Default for NoiseGrid {
    fn default() -> Self {
        Self {
            alpha_range: (-0.05, 0.05),
            delta_range: (-0.05, 0.05),
            alpha_points: 5,
            delta_points: 5,
        }
    }
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

impl NoiseGrid {
    pub fn nominal() -> Self {
        Self {
            alpha_range: (0.0, 0.0),
            delta_range: (0.0, 0.0),
            alpha_points: 1,
            delta_points: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi), n) in [
            ("alpha", self.alpha_range, self.alpha_points),
            ("delta", self.delta_range, self.delta_points),
        ] {
            if n == 0 {
                return Err(validation(format!("{name}_points must be >= 1")));
            }
            if !(lo.is_finite() && hi.is_finite() && lo <= 0.0 && 0.0 <= hi) {
                return Err(validation(format!(
                    "{name} range [{lo}, {hi}] must be finite and contain 0"
                )));
            }
        }
        Ok(())
    }

    pub fn alphas(&self) -> Vec<f64> {
        linspace(self.alpha_range, self.alpha_points)
    }

    pub fn deltas(&self) -> Vec<f64> {
        linspace(self.delta_range, self.delta_points)
    }

    /// Grid points `(α, δ)`, α-major.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let deltas = self.deltas();
        self.alphas()
            .into_iter()
            .flat_map(|a| deltas.iter().map(move |&d| (a, d)))
            .collect()
    }
}

pub fn pulse_propagator(pulse: &ControlPulse, model: &SixLevelModel, alpha: f64, delta: f64) -> Result<Operator> {
    let dt = pulse.segment_time();
    let mut u = Operator::identity(DIM);
    for &(x, y) in &pulse.segments {
        let h = model.segment_hamiltonian(x, y, alpha, delta);
        u = matrix_exp(&h, C64::new(0.0, -dt))?.mul(&u);
    }
    Ok(u)
}

/// `|Tr(U_targ†U)/Tr(U†U)|²`.
pub fn gate_fidelity(u: &Operator, _model: &SixLevelModel) -> Result<f64> {
    if u.dim() != DIM {
        return Err(crate::Error::Dimension(format!("expected a 6x6 operator, got {}", u.dim())));
    }
    if !u.is_unitary() {
        return Err(validation(format!(
            "operator is not unitary (max |U†U − I| = {:e})",
            u.unitarity_error()
        )));
    }
    let overlap = SixLevelModel::target().adjoint().mul(u).trace();
    let norm = u.adjoint().mul(u).trace();
    Ok((overlap / norm).norm_sqr())
}

pub fn fidelity_at(pulse: &ControlPulse, model: &SixLevelModel, alpha: f64, delta: f64) -> Result<f64> {
    gate_fidelity(&pulse_propagator(pulse, model, alpha, delta)?, model)
}

/// Mean gate fidelity over the noise grid.
pub fn robust_objective(pulse: &ControlPulse, model: &SixLevelModel, grid: &NoiseGrid) -> Result<f64> {
    grid.validate()?;
    let pts = grid.points();
    let mut sum = 0.0;
    for (a, d) in &pts {
        sum += fidelity_at(pulse, model, *a, *d)?;
    }
    Ok(sum / pts.len() as f64)
}

/// Fidelity at every grid point, α-major.
pub fn robustness_surface(pulse: &ControlPulse, model: &SixLevelModel, grid: &NoiseGrid) -> Result<Vec<(f64, f64, f64)>> {
    grid.validate()?;
    grid.points()
        .into_par_iter()
        .map(|(a, d)| Ok((a, d, fidelity_at(pulse, model, a, d)?)))
        .collect()
}

/// Segment propagator `V e^{−iΛdt} V†` with its eigenbasis kept for derivatives.
struct Segment {
    vecs: DMatrix<C64>,
    /// `G_ab = (e^{−iλ_a dt} − e^{−iλ_b dt})/(λ_a − λ_b)`, written via sinc.
    kernel: DMatrix<C64>,
    unitary: DMatrix<C64>,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl Segment {
    fn new(h: &Operator, dt: f64) -> Result<Self> {
        let (vals, vecs_cols) = eigh_raw(h)?;
        let n = vals.len();
        let vecs = DMatrix::from_fn(n, n, |r, c| vecs_cols[c][r]);
        let phases: Vec<C64> = vals.iter().map(|l| C64::new(0.0, -l * dt).exp()).collect();
        let kernel = DMatrix::from_fn(n, n, |a, b| {
            let mean = C64::new(0.0, -(vals[a] + vals[b]) * dt / 2.0).exp();
            mean * C64::new(0.0, -dt) * sinc((vals[a] - vals[b]) * dt / 2.0)
        });
        let unitary = &vecs * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(phases)) * vecs.adjoint();
        Ok(Self {
            vecs,
            kernel,
            unitary,
        })
    }

    /// `Tr(Λ·dU)` for `dU` the derivative along `dh`.
    fn directional_trace(&self, lambda_eig: &DMatrix<C64>, dh: &DMatrix<C64>) -> C64 {
        let dh_eig = self.vecs.adjoint() * dh * &self.vecs;
        let mut acc = C64::new(0.0, 0.0);
        let n = dh_eig.nrows();
        for a in 0..n {
            for b in 0..n {
                acc += lambda_eig[(b, a)] * self.kernel[(a, b)] * dh_eig[(a, b)];
            }
        }
        acc
    }
}

/// Fidelity and its gradient with respect to `[Ω_1x, Ω_1y, ...]` at one noise point.
pub fn fidelity_and_gradient(
    pulse: &ControlPulse,
    model: &SixLevelModel,
    alpha: f64,
    delta: f64,
) -> Result<(f64, Vec<f64>)> {
    let dt = pulse.segment_time();
    let m = pulse.len();
    let segs: Vec<Segment> = pulse
        .segments
        .iter()
        .map(|&(x, y)| Segment::new(&model.segment_hamiltonian(x, y, alpha, delta), dt))
        .collect::<Result<_>>()?;

    let id = DMatrix::<C64>::identity(DIM, DIM);
    // forward[k] = U_k ⋯ U_1, backward[k] = U_M ⋯ U_{k+1}
    let mut forward = Vec::with_capacity(m + 1);
    forward.push(id.clone());
    for s in &segs {
        let next = &s.unitary * forward.last().expect("non-empty");
        forward.push(next);
    }
    let mut backward = vec![id; m + 1];
    for k in (0..m).rev() {
        backward[k] = &backward[k + 1] * &segs[k].unitary;
    }

    let target_adj = SixLevelModel::target().into_matrix().adjoint();
    let g = (&target_adj * &forward[m]).trace();
    let norm = DIM as f64;
    let fidelity = g.norm_sqr() / (norm * norm);

    let amp = (1.0 + alpha) * 2.0 * PI;
    let hx = SixLevelModel::control_x().into_matrix() * C64::new(amp, 0.0);
    let hy = SixLevelModel::control_y().into_matrix() * C64::new(amp, 0.0);
    let mut grad = Vec::with_capacity(2 * m);
    for (k, seg) in segs.iter().enumerate() {
        // Tr(U_targ† B dU X) = Tr((X U_targ† B) dU)
        let lambda = &forward[k] * &target_adj * &backward[k + 1];
        let lambda_eig = seg.vecs.adjoint() * lambda * &seg.vecs;
        for dh in [&hx, &hy] {
            let dg = seg.directional_trace(&lambda_eig, dh);
            grad.push(2.0 * (g.conj() * dg).re / (norm * norm));
        }
    }
    Ok((fidelity, grad))
}

/// Robust objective and its exact gradient.
pub fn objective_and_gradient(
    pulse: &ControlPulse,
    model: &SixLevelModel,
    grid: &NoiseGrid,
) -> Result<(f64, Vec<f64>)> {
    let pts = grid.points();
    let mut total = 0.0;
    let mut grad = vec![0.0; 2 * pulse.len()];
    for (a, d) in &pts {
        let (f, g) = fidelity_and_gradient(pulse, model, *a, *d)?;
        total += f;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += gi;
        }
    }
    let n = pts.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}

/// Central finite-difference gradient of the robust objective.
pub fn finite_difference_gradient(
    pulse: &ControlPulse,
    model: &SixLevelModel,
    grid: &NoiseGrid,
    step: f64,
) -> Result<Vec<f64>> {
    let base = pulse.parameters();
    (0..base.len())
        .map(|k| {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[k] += step;
            minus[k] -= step;
            let unbounded = |p: &[f64]| ControlPulse {
                amplitude_bound: f64::INFINITY,
                ..pulse.with_parameters(p)
            };
            let fp = robust_objective(&unbounded(&plus), model, grid)?;
            let fm = robust_objective(&unbounded(&minus), model, grid)?;
            Ok((fp - fm) / (2.0 * step))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    Exact,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub segments: usize,
    /// µs; `None` selects `4/|A_zz|`.
    pub total_time: Option<f64>,
    /// MHz; `None` selects `|A_zz|/2`.
    pub amplitude_bound: Option<f64>,
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop a restart once the objective gains less than this per iteration.
    pub tolerance: f64,
    /// Objective a restart must reach for the design to count as converged.
    pub target_objective: f64,
    pub gradient: GradientMethod,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            segments: DEFAULT_SEGMENTS,
            total_time: None,
            amplitude_bound: None,
            restarts: 20,
            max_iterations: 400,
            tolerance: 1e-11,
            target_objective: 0.98,
            gradient: GradientMethod::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub start: usize,
    pub objective: f64,
    pub iterations: usize,
    /// Objective after each accepted iterate.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseDesign {
    pub pulse: ControlPulse,
    pub objective: f64,
    pub nominal_fidelity: f64,
    pub worst_fidelity: f64,
    pub converged: bool,
    pub best_start: usize,
    pub restarts: Vec<RestartSummary>,
}

fn project(params: &mut [f64], bound: f64) {
    for c in params.chunks_exact_mut(2) {
        let r = c[0].hypot(c[1]);
        if r > bound {
            let s = if r > 0.0 { bound / r } else { 0.0 };
            c[0] *= s;
            c[1] *= s;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected gradient ascent with Barzilai-Borwein steps and Armijo
/// backtracking. Accepted iterates never decrease the objective.
fn ascend(
    start: ControlPulse,
    model: &SixLevelModel,
    grid: &NoiseGrid,
    config: &OptimizerConfig,
) -> Result<(ControlPulse, f64, Vec<f64>)> {
    let bound = start.amplitude_bound;
    let eval = |p: &ControlPulse| -> Result<(f64, Vec<f64>)> {
        match config.gradient {
            GradientMethod::Exact => objective_and_gradient(p, model, grid),
            GradientMethod::FiniteDifference => Ok((
                robust_objective(p, model, grid)?,
                finite_difference_gradient(p, model, grid, 1e-6)?,
            )),
        }
    };

    let mut x = start.parameters();
    project(&mut x, bound);
    let mut pulse = start.with_parameters(&x);
    let (mut f, mut g) = eval(&pulse)?;
    let mut history = vec![f];
    let mut step = 1.0;

    for _ in 0..config.max_iterations {
        let mut accepted = None;
        let mut trial_step = step;
        while trial_step > 1e-14 {
            let mut xt: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + trial_step * gi).collect();
            project(&mut xt, bound);
            let moved: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
            let gain = dot(&g, &moved);
            if gain <= 0.0 {
                break;
            }
            let cand = pulse.with_parameters(&xt);
            let ft = robust_objective(&cand, model, grid)?;
            if ft >= f + 1e-4 * gain {
                accepted = Some((xt, cand, moved));
                break;
            }
            trial_step *= 0.5;
        }
        let Some((xt, cand, s)) = accepted else {
            break;
        };
        let (ft, gt) = eval(&cand)?;
        let improvement = ft - f;
        // Barzilai-Borwein step for ascent: s·s / −(s·y)
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy < 0.0 {
            (dot(&s, &s) / -sy).clamp(1e-6, 1e3)
        } else {
            (trial_step * 2.0).min(1e3)
        };
        x = xt;
        pulse = cand;
        f = ft;
        g = gt;
        history.push(f);
        if improvement < config.tolerance {
            break;
        }
    }
    Ok((pulse, f, history))
}

/// Multi-start robust pulse optimization; the best restart wins, ties going
/// to the lowest start index.
pub fn optimize_pulse(
    model: &SixLevelModel,
    grid: &NoiseGrid,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<PulseDesign> {
    grid.validate()?;
    if config.segments == 0 || config.restarts == 0 {
        return Err(validation("segments and restarts must be >= 1"));
    }
    let total_time = config.total_time.unwrap_or_else(|| model.default_total_time());
    let bound = config
        .amplitude_bound
        .unwrap_or_else(|| model.default_amplitude_bound());
    let factory = StreamFactory::new(seed);

    let runs: Vec<(ControlPulse, f64, Vec<f64>)> = (0..config.restarts)
        .into_par_iter()
        .map(|start| {
            let mut rng = factory.stream(start as u64);
            let segs = (0..config.segments)
                .map(|_| {
                    let r = bound * rng.random::<f64>().sqrt();
                    let phi = 2.0 * PI * rng.random::<f64>();
                    (r * phi.cos(), r * phi.sin())
                })
                .collect();
            let init = ControlPulse::new(segs, total_time, bound)?;
            ascend(init, model, grid, config)
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (k, run) in runs.iter().enumerate() {
        if run.1 > runs[best].1 {
            best = k;
        }
    }
    let restarts = runs
        .iter()
        .enumerate()
        .map(|(start, (_, objective, history))| RestartSummary {
            start,
            objective: *objective,
            iterations: history.len() - 1,
            history: history.clone(),
        })
        .collect();
    let (pulse, objective, _) = runs.into_iter().nth(best).expect("restarts >= 1");
    let nominal_fidelity = fidelity_at(&pulse, model, 0.0, 0.0)?;
    let worst_fidelity = robustness_surface(&pulse, model, grid)?
        .iter()
        .map(|p| p.2)
        .fold(f64::INFINITY, f64::min);
    Ok(PulseDesign {
        pulse,
        objective,
        nominal_fidelity,
        worst_fidelity,
        converged: objective >= config.target_objective,
        best_start: best,
        restarts,
    })
}
