//! Repetitive single-shot readout of a nuclear spin through photon counting.
//!
//! One readout point accumulates `reps` cycles of a nuclear-selective
//! electron flip followed by fluorescence detection. The point is dark when
//! the nucleus sits in `|−1⟩ₙ` and the flip fires, bright otherwise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::rng::StreamFactory;

pub const DEFAULT_REPS: u32 = 1500;
pub const MIN_FIT_TRIALS: usize = 1000;
pub const MIN_PLATEAUS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuclearState {
    /// `|−1⟩ₙ`: dark after a successful selective flip.
    InMinus1,
    NotMinus1,
}

impl NuclearState {
    pub fn flipped(self) -> Self {
        match self {
            Self::InMinus1 => Self::NotMinus1,
            Self::NotMinus1 => Self::InMinus1,
        }
    }

    /// `0` for `|−1⟩ₙ`, `1` otherwise.
    pub fn label(self) -> u8 {
        match self {
            Self::InMinus1 => 0,
            Self::NotMinus1 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub reps: u32,
    /// Mean photons per repetition when bright.
    pub lambda_bright: f64,
    /// Mean photons per repetition when dark.
    pub lambda_dark: f64,
    pub flip_prob_per_rep: f64,
    pub pi_pulse_error: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self {
            reps: DEFAULT_REPS,
            lambda_bright: 0.03,
            lambda_dark: 0.01,
            flip_prob_per_rep: flip_prob_for_mean_plateau(25.0, DEFAULT_REPS),
            pi_pulse_error: 0.01,
        }
    }
}

/// Per-repetition flip probability giving a mean plateau of `n_bar` points.
pub fn flip_prob_for_mean_plateau(n_bar: f64, reps: u32) -> f64 {
    1.0 - (1.0 - 1.0 / n_bar).powf(1.0 / reps as f64)
}

impl ReadoutModel {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(validation("reps must be >= 1"));
        }
        if !(self.lambda_dark >= 0.0 && self.lambda_bright.is_finite()) {
            return Err(validation("photon rates must be finite and non-negative"));
        }
        // Equal rates are allowed so that the zero-contrast case can be simulated.
        if self.lambda_bright < self.lambda_dark {
            return Err(validation(format!(
                "lambda_bright ({}) must not be below lambda_dark ({})",
                self.lambda_bright, self.lambda_dark
            )));
        }
        for (name, p) in [
            ("flip_prob_per_rep", self.flip_prob_per_rep),
            ("pi_pulse_error", self.pi_pulse_error),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(validation(format!("{name} = {p} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    /// Probability that the nuclear state changes within one readout point.
    pub fn flip_prob_per_point(&self) -> f64 {
        1.0 - (1.0 - self.flip_prob_per_rep).powi(self.reps as i32)
    }

    pub fn mean_bright(&self) -> f64 {
        self.reps as f64 * self.lambda_bright
    }

    pub fn mean_dark(&self) -> f64 {
        self.reps as f64 * self.lambda_dark
    }
}

/// One readout point drawn from `rng`.
///
/// Repetitions between nuclear flips are handled in blocks: misfires in a
/// block are binomial and the photon total is Poisson in the summed rate,
/// which has the same law as drawing every repetition separately.
pub fn single_shot_with(model: &ReadoutModel, initial: NuclearState, rng: &mut ChaCha8Rng) -> (u64, NuclearState) {
    let mut state = initial;
    let mut remaining = u64::from(model.reps);
    let mut rate = 0.0;
    let flip = (model.flip_prob_per_rep > 0.0).then(|| Geometric::new(model.flip_prob_per_rep).expect("p in (0, 1]"));
    while remaining > 0 {
        // Repetitions up to and including the one after which the state flips.
        let until_flip = flip.as_ref().map(|g| g.sample(rng).saturating_add(1));
        let block = until_flip.map_or(remaining, |k| k.min(remaining));
        let misfires = if model.pi_pulse_error > 0.0 {
            Binomial::new(block, model.pi_pulse_error).expect("valid binomial").sample(rng)
        } else {
            0
        };
        let dark = match state {
            NuclearState::InMinus1 => block - misfires,
            NuclearState::NotMinus1 => misfires,
        };
        rate += dark as f64 * model.lambda_dark + (block - dark) as f64 * model.lambda_bright;
        remaining -= block;
        if until_flip.is_some_and(|k| k <= block) {
            state = state.flipped();
        }
    }
    let count = if rate > 0.0 {
        Poisson::new(rate).expect("positive rate").sample(rng) as u64
    } else {
        0
    };
    (count, state)
}

pub fn single_shot(model: &ReadoutModel, initial: NuclearState, seed: u64) -> Result<(u64, NuclearState)> {
    model.validate()?;
    let mut rng = StreamFactory::new(seed).stream(0);
    Ok(single_shot_with(model, initial, &mut rng))
}

/// Independent trials: trial `k` uses stream `k`, draws its initial state
/// (`|−1⟩ₙ` with probability `minus1_fraction`) and then one readout point.
pub fn sample_trials(
    model: &ReadoutModel,
    trials: usize,
    minus1_fraction: f64,
    seed: u64,
) -> Result<Vec<(u64, NuclearState)>> {
    model.validate()?;
    if !(0.0..=1.0).contains(&minus1_fraction) {
        return Err(validation(format!("mixture fraction {minus1_fraction} not in [0, 1]")));
    }
    let factory = StreamFactory::new(seed);
    Ok((0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = factory.stream(k as u64);
            let initial = if rng.random::<f64>() < minus1_fraction {
                NuclearState::InMinus1
            } else {
                NuclearState::NotMinus1
            };
            let (count, _) = single_shot_with(model, initial, &mut rng);
            (count, initial)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub weight_dark: f64,
    pub mean_dark: f64,
    pub mean_bright: f64,
    pub iterations: usize,
}

fn ln_poisson_pmf_table(mean: f64, max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    if mean <= 0.0 {
        out.push(0.0);
        out.extend(std::iter::repeat(f64::NEG_INFINITY).take(max));
        return out;
    }
    let mut cur = -mean;
    out.push(cur);
    for k in 1..=max {
        cur += mean.ln() - (k as f64).ln();
        out.push(cur);
    }
    out
}

/// `P(X < t)` for every `t` in `0..=max+1`.
fn poisson_cdf_below(mean: f64, max: usize) -> Vec<f64> {
    let ln = ln_poisson_pmf_table(mean, max);
    let mut cdf = Vec::with_capacity(max + 2);
    let mut acc = 0.0;
    cdf.push(0.0);
    for l in ln {
        acc += l.exp();
        cdf.push(acc.min(1.0));
    }
    cdf
}

impl MixtureFit {
    /// Expected misclassification when counts `< threshold` are called dark.
    pub fn misclassification(&self, threshold: u64) -> f64 {
        let t = threshold as usize;
        let dark_below = poisson_cdf_below(self.mean_dark, t)[t];
        let bright_below = poisson_cdf_below(self.mean_bright, t)[t];
        self.weight_dark * (1.0 - dark_below) + (1.0 - self.weight_dark) * bright_below
    }
}

/// Two-Poisson mixture by expectation-maximization on a count histogram.
pub fn fit_two_poisson(freq: &[u64]) -> Result<MixtureFit> {
    let total: u64 = freq.iter().sum();
    if total == 0 {
        return Err(validation("cannot fit an empty histogram"));
    }
    let n = total as f64;
    let mean = freq.iter().enumerate().map(|(k, &c)| k as f64 * c as f64).sum::<f64>() / n;
    let sd = (freq
        .iter()
        .enumerate()
        .map(|(k, &c)| (k as f64 - mean).powi(2) * c as f64)
        .sum::<f64>()
        / n)
        .sqrt();
    let mut w: f64 = 0.5;
    let mut mu_d = (mean - sd).max(mean * 0.1).max(1e-3);
    let mut mu_b = mean + sd.max(1e-3);
    let max = freq.len().saturating_sub(1);
    let mut iterations = 0;
    for it in 0..2000 {
        iterations = it + 1;
        let ld = ln_poisson_pmf_table(mu_d, max);
        let lb = ln_poisson_pmf_table(mu_b, max);
        let (mut sw, mut sd_k, mut sb, mut sb_k) = (0.0, 0.0, 0.0, 0.0);
        for (k, &c) in freq.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let a = w.ln() + ld[k];
            let b = (1.0 - w).ln() + lb[k];
            let m = a.max(b);
            let r = (a - m).exp() / ((a - m).exp() + (b - m).exp());
            let c = c as f64;
            sw += r * c;
            sd_k += r * c * k as f64;
            sb += (1.0 - r) * c;
            sb_k += (1.0 - r) * c * k as f64;
        }
        let new_w = (sw / n).clamp(1e-12, 1.0 - 1e-12);
        let new_d = if sw > 0.0 { sd_k / sw } else { mu_d };
        let new_b = if sb > 0.0 { sb_k / sb } else { mu_b };
        let change = (new_w - w).abs() + (new_d - mu_d).abs() + (new_b - mu_b).abs();
        w = new_w;
        mu_d = new_d;
        mu_b = new_b;
        if change < 1e-10 {
            break;
        }
    }
    if mu_d > mu_b {
        std::mem::swap(&mut mu_d, &mut mu_b);
        w = 1.0 - w;
    }
    Ok(MixtureFit {
        weight_dark: w,
        mean_dark: mu_d,
        mean_bright: mu_b,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdStatus {
    Fitted,
    /// Fewer than [`MIN_FIT_TRIALS`] trials.
    TooFewTrials,
    /// The mixture fit does not resolve two modes.
    Unimodal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `frequencies[k]` = number of trials with `k` photons.
    pub frequencies: Vec<u64>,
    pub trials: usize,
    pub fit: Option<MixtureFit>,
    /// Counts `< threshold` are classified as `|−1⟩ₙ`.
    pub threshold: Option<u64>,
    pub status: ThresholdStatus,
    pub method: &'static str,
}

pub const THRESHOLD_METHOD: &str = "two-Poisson EM fit, threshold minimizing expected misclassification";

/// Both modes must carry at least this weight to count as resolved.
const MIN_MODE_WEIGHT: f64 = 0.02;

pub fn histogram_from_counts(counts: &[u64]) -> Histogram {
    let max = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut frequencies = vec![0u64; max + 1];
    for &c in counts {
        frequencies[c as usize] += 1;
    }
    let trials = counts.len();
    let mut h = Histogram {
        frequencies,
        trials,
        fit: None,
        threshold: None,
        status: ThresholdStatus::TooFewTrials,
        method: THRESHOLD_METHOD,
    };
    if trials < MIN_FIT_TRIALS {
        return h;
    }
    let Ok(fit) = fit_two_poisson(&h.frequencies) else {
        return h;
    };
    h.fit = Some(fit);
    let separated = fit.mean_bright - fit.mean_dark >= fit.mean_bright.sqrt() + fit.mean_dark.sqrt();
    let balanced = fit.weight_dark.min(1.0 - fit.weight_dark) >= MIN_MODE_WEIGHT;
    if !(separated && balanced) {
        h.status = ThresholdStatus::Unimodal;
        return h;
    }
    let lo = fit.mean_dark.floor() as u64;
    let hi = fit.mean_bright.ceil() as u64 + 1;
    let best = (lo..=hi)
        .min_by(|&a, &b| fit.misclassification(a).total_cmp(&fit.misclassification(b)))
        .expect("non-empty range");
    h.threshold = Some(best);
    h.status = ThresholdStatus::Fitted;
    h
}

pub fn histogram(model: &ReadoutModel, trials: usize, minus1_fraction: f64, seed: u64) -> Result<Histogram> {
    if trials == 0 {
        return Err(validation("histogram needs at least one trial"));
    }
    let samples = sample_trials(model, trials, minus1_fraction, seed)?;
    let counts: Vec<u64> = samples.iter().map(|s| s.0).collect();
    Ok(histogram_from_counts(&counts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracePoint {
    pub count: u64,
    pub true_state: NuclearState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelegraphTrace {
    pub points: Vec<TracePoint>,
    pub threshold: u64,
    pub reps: u32,
}

impl TelegraphTrace {
    /// `0` (`|−1⟩ₙ`, dark) when the count is below threshold, `1` otherwise.
    pub fn labels(&self) -> Vec<u8> {
        self.points
            .iter()
            .map(|p| u8::from(p.count >= self.threshold))
            .collect()
    }
}

/// Consecutive readout points; the nuclear state carries over between points.
/// `true_state` is the state at the start of each point.
pub fn simulate_trace(
    model: &ReadoutModel,
    points: usize,
    initial: NuclearState,
    threshold: u64,
    seed: u64,
) -> Result<TelegraphTrace> {
    model.validate()?;
    let mut rng = StreamFactory::new(seed).stream(0);
    let mut state = initial;
    let mut out = Vec::with_capacity(points);
    for _ in 0..points {
        let (count, next) = single_shot_with(model, state, &mut rng);
        out.push(TracePoint {
            count,
            true_state: state,
        });
        state = next;
    }
    Ok(TelegraphTrace {
        points: out,
        threshold,
        reps: model.reps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub fidelity: f64,
    /// `sqrt(1 − 1/n̄₀)` for `|−1⟩ₙ`.
    pub f0: f64,
    pub f1: f64,
    pub n_bar0: f64,
    pub n_bar1: f64,
    pub plateaus0: usize,
    pub plateaus1: usize,
    /// Set when the trace never changes label; `n̄` is then the trace length.
    pub low_confidence: bool,
}

/// Maximal runs of equal labels as `(label, length)`.
fn runs(labels: &[u8]) -> Vec<(u8, usize)> {
    let mut out: Vec<(u8, usize)> = Vec::new();
    for &l in labels {
        match out.last_mut() {
            Some((prev, len)) if *prev == l => *len += 1,
            _ => out.push((l, 1)),
        }
    }
    out
}

fn fidelity_from_plateaus(n_bar0: f64, n_bar1: f64) -> (f64, f64, f64) {
    let f = 1.0 - 0.5 * (1.0 / (2.0 * n_bar0) + 1.0 / (2.0 * n_bar1));
    let per = |n: f64| (1.0 - 1.0 / n).max(0.0).sqrt();
    (f, per(n_bar0), per(n_bar1))
}

/// Plateau-length fidelity estimate with an optional minimum run length;
/// runs shorter than `min_run` take the label of the preceding run.
pub fn estimate_fidelity_filtered(trace: &TelegraphTrace, min_run: usize) -> Result<FidelityEstimate> {
    let mut labels = trace.labels();
    if labels.is_empty() {
        return Err(Error::Undefined("empty trace".into()));
    }
    if min_run > 1 {
        let mut prev: Option<u8> = None;
        let mut pos = 0;
        for (label, len) in runs(&labels) {
            let keep = if len < min_run { prev.unwrap_or(label) } else { label };
            labels[pos..pos + len].iter_mut().for_each(|l| *l = keep);
            prev = Some(keep);
            pos += len;
        }
    }
    let rs = runs(&labels);
    if rs.len() == 1 {
        let n = labels.len() as f64;
        let (fidelity, f0, f1) = fidelity_from_plateaus(n, n);
        let (plateaus0, plateaus1) = if rs[0].0 == 0 { (1, 0) } else { (0, 1) };
        return Ok(FidelityEstimate {
            fidelity,
            f0,
            f1,
            n_bar0: n,
            n_bar1: n,
            plateaus0,
            plateaus1,
            low_confidence: true,
        });
    }
    let (mut len0, mut cnt0, mut len1, mut cnt1) = (0usize, 0usize, 0usize, 0usize);
    for (label, len) in rs {
        if label == 0 {
            len0 += len;
            cnt0 += 1;
        } else {
            len1 += len;
            cnt1 += 1;
        }
    }
    if cnt0 < MIN_PLATEAUS || cnt1 < MIN_PLATEAUS {
        return Err(Error::Undefined(format!(
            "need at least {MIN_PLATEAUS} plateaus of each kind, found {cnt0} and {cnt1}"
        )));
    }
    let n_bar0 = len0 as f64 / cnt0 as f64;
    let n_bar1 = len1 as f64 / cnt1 as f64;
    let (fidelity, f0, f1) = fidelity_from_plateaus(n_bar0, n_bar1);
    Ok(FidelityEstimate {
        fidelity,
        f0,
        f1,
        n_bar0,
        n_bar1,
        plateaus0: cnt0,
        plateaus1: cnt1,
        low_confidence: false,
    })
}

pub fn estimate_fidelity(trace: &TelegraphTrace) -> Result<FidelityEstimate> {
    estimate_fidelity_filtered(trace, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quiet(lb: f64, ld: f64) -> ReadoutModel {
        ReadoutModel {
            reps: 1500,
            lambda_bright: lb,
            lambda_dark: ld,
            flip_prob_per_rep: 0.0,
            pi_pulse_error: 0.0,
        }
    }

    fn trace_from_labels(labels: &[u8]) -> TelegraphTrace {
        TelegraphTrace {
            points: labels
                .iter()
                .map(|&l| TracePoint {
                    count: if l == 0 { 5 } else { 50 },
                    true_state: if l == 0 { NuclearState::InMinus1 } else { NuclearState::NotMinus1 },
                })
                .collect(),
            threshold: 20,
            reps: 1500,
        }
    }

    #[test]
    fn bright_shot_mean_is_poisson() {
        let m = quiet(0.02, 0.012);
        let n = 1000;
        let mean = (0..n)
            .map(|s| single_shot(&m, NuclearState::NotMinus1, s).unwrap().0 as f64)
            .sum::<f64>()
            / n as f64;
        let expected = 1500.0 * 0.02;
        assert!((mean - expected).abs() < 3.0 * (expected / n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn no_flips_keeps_state() {
        let m = quiet(0.02, 0.012);
        for s in 0..50 {
            assert_eq!(single_shot(&m, NuclearState::InMinus1, s).unwrap().1, NuclearState::InMinus1);
        }
    }

    #[test]
    fn misfire_always_inverts_brightness() {
        let m = ReadoutModel {
            pi_pulse_error: 1.0,
            ..quiet(0.05, 0.0)
        };
        // |−1⟩ₙ with a pulse that always misfires is bright.
        let (c, _) = single_shot(&m, NuclearState::InMinus1, 3).unwrap();
        assert!(c > 30);
        let (c, _) = single_shot(&m, NuclearState::NotMinus1, 3).unwrap();
        assert_eq!(c, 0);
    }

    #[test]
    fn bimodal_histogram_threshold() {
        let h = histogram(&quiet(0.02, 0.012), 20_000, 0.5, 7).unwrap();
        assert_eq!(h.status, ThresholdStatus::Fitted);
        let fit = h.fit.unwrap();
        assert!((fit.mean_dark - 18.0).abs() < 0.5);
        assert!((fit.mean_bright - 30.0).abs() < 0.5);
        let t = h.threshold.unwrap();
        assert!(t > 18 && t < 30);
    }

    #[test]
    fn single_mode_is_unimodal() {
        let h = histogram(&quiet(0.02, 0.012), 5000, 0.0, 7).unwrap();
        assert_eq!(h.status, ThresholdStatus::Unimodal);
        assert!(h.threshold.is_none());
        let h = histogram(&quiet(0.02, 0.02), 5000, 0.5, 8).unwrap();
        assert_eq!(h.status, ThresholdStatus::Unimodal);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(histogram(&quiet(0.02, 0.012), 0, 0.5, 1).is_err());
        let h = histogram(&quiet(0.02, 0.012), 10, 0.5, 1).unwrap();
        assert_eq!(h.status, ThresholdStatus::TooFewTrials);
    }

    #[test]
    fn model_validation() {
        assert!(quiet(0.01, 0.02).validate().is_err());
        assert!(ReadoutModel { reps: 0, ..quiet(0.02, 0.01) }.validate().is_err());
        assert!(ReadoutModel { flip_prob_per_rep: 2.0, ..quiet(0.02, 0.01) }.validate().is_err());
        assert!(ReadoutModel::default().validate().is_ok());
    }

    #[test]
    fn fidelity_formula() {
        // Alternating plateaus of 25 points each.
        let labels: Vec<u8> = (0..500).map(|i| ((i / 25) % 2) as u8).collect();
        let est = estimate_fidelity(&trace_from_labels(&labels)).unwrap();
        assert_abs_diff_eq!(est.n_bar0, 25.0);
        assert_abs_diff_eq!(est.fidelity, 0.98, epsilon = 1e-12);
        assert_eq!(est.f0, est.f1);
        assert_abs_diff_eq!(est.f0, (1.0f64 - 1.0 / 25.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn constant_trace_is_low_confidence() {
        let est = estimate_fidelity(&trace_from_labels(&[1; 300])).unwrap();
        assert!(est.low_confidence);
        assert_eq!(est.n_bar1, 300.0);
        assert!(est.fidelity > 0.99);
    }

    #[test]
    fn too_few_plateaus() {
        let labels: Vec<u8> = (0..60).map(|i| ((i / 20) % 2) as u8).collect();
        assert!(matches!(
            estimate_fidelity(&trace_from_labels(&labels)),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn min_run_filter_merges_glitches() {
        let mut labels: Vec<u8> = (0..500).map(|i| ((i / 25) % 2) as u8).collect();
        labels[10] = 1;
        let raw = estimate_fidelity(&trace_from_labels(&labels)).unwrap();
        let filtered = estimate_fidelity_filtered(&trace_from_labels(&labels), 2).unwrap();
        assert!(raw.n_bar0 < 25.0);
        assert_abs_diff_eq!(filtered.n_bar0, 25.0);
    }

    #[test]
    fn flip_prob_helper() {
        let m = ReadoutModel {
            flip_prob_per_rep: flip_prob_for_mean_plateau(25.0, 1500),
            ..quiet(0.03, 0.01)
        };
        assert_abs_diff_eq!(m.flip_prob_per_point(), 1.0 / 25.0, epsilon = 1e-12);
    }

    #[test]
    fn poisson_cdf_sane() {
        let c = poisson_cdf_below(3.0, 40);
        assert_eq!(c[0], 0.0);
        assert_abs_diff_eq!(c[1], (-3.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(*c.last().unwrap(), 1.0, epsilon = 1e-12);
    }
}
