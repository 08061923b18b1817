//! Effective temperature, free-energy difference and fluctuation-theorem
//! residuals, with first-order propagation of one-sigma uncertainties.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::tpm::WorkDistribution;

/// Two-sided 95% interval half-width in units of sigma.
pub const CI95_Z: f64 = 1.96;

/// Step for the numerical derivative of `hβ·ΔF(hβ)`.
const DF_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub h_beta: f64,
    pub std_error: f64,
}

impl BetaEstimate {
    pub fn ci95(&self) -> f64 {
        CI95_Z * self.std_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureEstimate {
    pub forward: BetaEstimate,
    pub reverse: BetaEstimate,
    pub average: BetaEstimate,
}

impl TemperatureEstimate {
    pub fn from_parts(forward: BetaEstimate, reverse: BetaEstimate) -> Self {
        let average = BetaEstimate {
            h_beta: (forward.h_beta + reverse.h_beta) / 2.0,
            std_error: 0.5 * forward.std_error.hypot(reverse.std_error),
        };
        Self {
            forward,
            reverse,
            average,
        }
    }

    /// Estimates from the first-measurement marginals of both processes.
    pub fn from_distributions(fwd: &WorkDistribution, rev: &WorkDistribution) -> Result<Self> {
        Ok(Self::from_parts(
            estimate_beta(fwd, fwd.start_gap())?,
            estimate_beta(rev, rev.start_gap())?,
        ))
    }
}

/// `hβ = ln(p₀/p₁)/gap` for a complementary population pair with common
/// one-sigma error `sigma`; `σ(hβ) = σ·(1/p₀ + 1/p₁)/gap`.
pub fn estimate_beta_from_populations(p0: f64, p1: f64, sigma: f64, gap: f64) -> Result<BetaEstimate> {
    if !(p0 > 0.0 && p1 > 0.0) {
        return Err(Error::Undefined(format!(
            "inverse temperature needs positive populations, got p0 = {p0}, p1 = {p1}"
        )));
    }
    if !(gap > 0.0) {
        return Err(validation(format!("energy gap must be positive, got {gap}")));
    }
    Ok(BetaEstimate {
        h_beta: (p0 / p1).ln() / gap,
        std_error: sigma * (1.0 / p0 + 1.0 / p1) / gap,
    })
}

/// Inverse temperature from the row marginals of a work distribution.
pub fn estimate_beta(dist: &WorkDistribution, endpoint_gap: f64) -> Result<BetaEstimate> {
    let [p0, p1] = dist.initial_populations();
    estimate_beta_from_populations(p0, p1, dist.population_std_error(p0), endpoint_gap)
}

/// `ln cosh x` without overflow.
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `ΔF/h` in kHz between two symmetric two-level spectra `±gap/2`.
///
/// Continuous at `hβ = 0`, where it is 0.
pub fn free_energy_difference(h_beta: f64, gap0: f64, gap_tau: f64) -> f64 {
    if h_beta == 0.0 {
        return 0.0;
    }
    -(ln_cosh(h_beta * gap_tau / 2.0) - ln_cosh(h_beta * gap0 / 2.0)) / h_beta
}

/// `d/dhβ [hβ·ΔF(hβ)]` by central differences of [`free_energy_difference`].
fn scaled_free_energy_slope(h_beta: f64, gap0: f64, gap_tau: f64) -> f64 {
    let g = |b: f64| b * free_energy_difference(b, gap0, gap_tau);
    let lo = (h_beta - DF_STEP).max(0.0);
    let hi = h_beta + DF_STEP;
    (g(hi) - g(lo)) / (hi - lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CftResidual {
    /// `(i, j)`: forward trajectory `i → j̃` paired with reverse `j̃ → i`.
    pub trajectory: (usize, usize),
    pub work: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub delta: f64,
    pub std_error: f64,
    /// False when the reverse probability is zero; `lhs`, `delta` and
    /// `std_error` are NaN in that case.
    pub defined: bool,
}

impl CftResidual {
    pub fn ci95(&self) -> f64 {
        CI95_Z * self.std_error
    }

    /// `|Δ| < k·σ`; undefined residuals never pass.
    pub fn within(&self, k: f64) -> bool {
        self.defined && self.delta.abs() < k * self.std_error
    }
}

/// Residuals `P^F_{ij̃}/P^R_{j̃i} − exp(hβ(W_{ij̃} − ΔF/h))` for all four
/// trajectories, using the averaged inverse temperature.
pub fn cft_residuals(
    fwd: &WorkDistribution,
    rev: &WorkDistribution,
    temp: &TemperatureEstimate,
) -> Vec<CftResidual> {
    let hb = temp.average.h_beta;
    let sigma_beta = temp.average.std_error;
    let gap0 = fwd.start_gap();
    let gap_tau = fwd.end_gap();
    let df = free_energy_difference(hb, gap0, gap_tau);
    let slope = scaled_free_energy_slope(hb, gap0, gap_tau);

    let mut out = Vec::with_capacity(4);
    for i in 0..2 {
        for j in 0..2 {
            let w = fwd.work_values[i][j];
            let pf = fwd.probabilities[i][j];
            let pr = rev.probabilities[j][i];
            let rhs = (hb * (w - df)).exp();
            if pr <= 0.0 {
                out.push(CftResidual {
                    trajectory: (i, j),
                    work: w,
                    lhs: f64::NAN,
                    rhs,
                    delta: f64::NAN,
                    std_error: f64::NAN,
                    defined: false,
                });
                continue;
            }
            let lhs = pf / pr;
            let d_pf = 1.0 / pr;
            let d_pr = -pf / (pr * pr);
            // Δ = lhs − exp(hβ·W − hβ·ΔF(hβ))
            let d_beta = -rhs * (w - slope);
            let var = (d_pf * fwd.std_errors[i][j]).powi(2)
                + (d_pr * rev.std_errors[j][i]).powi(2)
                + (d_beta * sigma_beta).powi(2);
            out.push(CftResidual {
                trajectory: (i, j),
                work: w,
                lhs,
                rhs,
                delta: lhs - rhs,
                std_error: var.sqrt(),
                defined: true,
            });
        }
    }
    out
}

/// One row of published-style population data: forward `(p0, p1)`, reverse
/// `(q0, q1)`, and the common population uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationRow {
    pub p0: f64,
    pub p1: f64,
    pub q0: f64,
    pub q1: f64,
    pub sigma: f64,
}

/// Inverse temperatures from tabulated initial populations of both processes.
pub fn table1_regression(rows: &[PopulationRow], gap0: f64, gap_tau: f64) -> Result<Vec<TemperatureEstimate>> {
    rows.iter()
        .map(|r| {
            for (name, v) in [("p0", r.p0), ("p1", r.p1), ("q0", r.q0), ("q1", r.q1)] {
                if !(v > 0.0 && v < 1.0) {
                    return Err(validation(format!("population {name} = {v} not in (0, 1)")));
                }
            }
            let f = estimate_beta_from_populations(r.p0, r.p1, r.sigma, gap0)?;
            let b = estimate_beta_from_populations(r.q0, r.q1, r.sigma, gap_tau)?;
            Ok(TemperatureEstimate::from_parts(f, b))
        })
        .collect()
}

/// Round half away from zero to `decimals` places.
pub fn round_half_away(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (x * s).round() / s
}
