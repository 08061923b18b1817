//! Photon-count statistics against Poisson closed forms.

use crooks_core::readout::{
    estimate_fidelity, histogram, sample_trials, simulate_trace, NuclearState, ReadoutModel, ThresholdStatus,
};

fn clean(reps: u32) -> ReadoutModel {
    ReadoutModel {
        reps,
        lambda_bright: 0.03,
        lambda_dark: 0.01,
        flip_prob_per_rep: 0.0,
        pi_pulse_error: 0.0,
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn each_mode_is_poisson() {
    let model = clean(1500);
    for (fraction, lambda) in [(1.0, model.lambda_dark), (0.0, model.lambda_bright)] {
        let counts: Vec<f64> = sample_trials(&model, 10_000, fraction, 21)
            .unwrap()
            .iter()
            .map(|s| s.0 as f64)
            .collect();
        let mu = 1500.0 * lambda;
        let n = counts.len() as f64;
        let (m, v) = mean_var(&counts);
        assert!((m - mu).abs() < 3.0 * (mu / n).sqrt(), "mean {m} vs {mu}");
        // Var(s²) ≈ (μ₄ − σ⁴)/n with μ₄ = μ + 3μ² for a Poisson law.
        assert!((v - mu).abs() < 3.0 * ((mu + 2.0 * mu * mu) / n).sqrt(), "var {v} vs {mu}");
    }
}

#[test]
fn fitted_modes_match_analytic_means() {
    let model = clean(1500);
    let h = histogram(&model, 10_000, 0.5, 5).unwrap();
    assert_eq!(h.status, ThresholdStatus::Fitted);
    let fit = h.fit.unwrap();
    for (got, mu) in [(fit.mean_dark, 15.0), (fit.mean_bright, 45.0)] {
        assert!((got - mu).abs() < 3.0 * (mu / 5_000.0).sqrt(), "{got} vs {mu}");
    }
    let t = h.threshold.unwrap() as f64;
    assert!(t > 15.0 && t < 45.0);
}

#[test]
fn classification_error_matches_overlap() {
    // Weak contrast so the overlap is large enough to measure.
    let model = ReadoutModel {
        lambda_bright: 0.02,
        lambda_dark: 0.012,
        ..clean(1500)
    };
    let samples = sample_trials(&model, 20_000, 0.5, 9).unwrap();
    let counts: Vec<u64> = samples.iter().map(|s| s.0).collect();
    let h = crooks_core::readout::histogram_from_counts(&counts);
    let t = h.threshold.unwrap();
    let wrong = samples
        .iter()
        .filter(|(c, s)| (*c < t) != (*s == NuclearState::InMinus1))
        .count() as f64
        / samples.len() as f64;
    let truth = crooks_core::readout::MixtureFit {
        weight_dark: 0.5,
        mean_dark: 18.0,
        mean_bright: 30.0,
        iterations: 0,
    };
    let expected = truth.misclassification(t);
    let se = (expected * (1.0 - expected) / samples.len() as f64).sqrt();
    assert!((wrong - expected).abs() < 2.0 * se, "{wrong} vs {expected} ± {se}");
}

#[test]
fn fidelity_rises_as_flips_become_rare() {
    // High contrast (60 vs 7.5 counts) keeps misjudged points rare, so run
    // lengths reflect the nuclear flips alone.
    let mut last = 0.0;
    for p in [1e-3, 1e-4, 1e-5] {
        let model = ReadoutModel {
            lambda_bright: 0.04,
            lambda_dark: 0.005,
            flip_prob_per_rep: p,
            pi_pulse_error: 0.0,
            reps: 1500,
        };
        let trace = simulate_trace(&model, 40_000, NuclearState::NotMinus1, 25, 17).unwrap();
        let est = estimate_fidelity(&trace).unwrap();
        assert!(est.fidelity > last, "p {p}: {} !> {last}", est.fidelity);
        last = est.fidelity;
        if p == 1e-5 {
            let expected = 1.0 / model.flip_prob_per_point();
            for n in [est.n_bar0, est.n_bar1] {
                assert!((n / expected - 1.0).abs() < 0.15, "{n} vs {expected}");
            }
        }
    }
}

#[test]
fn zero_contrast_is_unimodal() {
    let model = ReadoutModel {
        lambda_bright: 0.02,
        lambda_dark: 0.02,
        ..clean(1500)
    };
    let h = histogram(&model, 5_000, 0.5, 2).unwrap();
    assert_eq!(h.status, ThresholdStatus::Unimodal);
    assert!(h.threshold.is_none());
}
