//! One `(τ, hβ)` cell of a fluctuation-theorem test: forward and reverse
//! work distributions, temperature estimate and residuals.

use serde::{Deserialize, Serialize};

use crate::analysis::{cft_residuals, free_energy_difference, CftResidual, TemperatureEstimate};
use crate::error::Result;
use crate::rng::derive_seed;
use crate::switching::SwitchingProtocol;
use crate::tpm::{MeasurementModel, TpmSetup, TrajectoryCounts, WorkDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    MonteCarlo,
}

/// Forward and reverse setups share the protocol, so build them once per τ.
#[derive(Debug, Clone)]
pub struct ProtocolPair {
    pub forward: TpmSetup,
    pub reverse: TpmSetup,
}

impl ProtocolPair {
    pub fn new(protocol: SwitchingProtocol, slices: usize) -> Result<Self> {
        Ok(Self {
            forward: TpmSetup::new(protocol, slices)?,
            reverse: TpmSetup::new(protocol.reversed(), slices)?,
        })
    }

    pub fn microreversibility_error(&self) -> f64 {
        crate::tpm::microreversibility_error(&self.forward, &self.reverse)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub tau_us: f64,
    pub h_beta: f64,
    pub mode: Mode,
    pub forward: WorkDistribution,
    pub reverse: WorkDistribution,
    pub forward_counts: Option<TrajectoryCounts>,
    pub reverse_counts: Option<TrajectoryCounts>,
    pub temperature: TemperatureEstimate,
    /// `ΔF/h` in kHz at the averaged inverse temperature.
    pub free_energy: f64,
    pub residuals: Vec<CftResidual>,
}

fn finish(
    pair: &ProtocolPair,
    h_beta: f64,
    mode: Mode,
    forward: WorkDistribution,
    reverse: WorkDistribution,
    counts: Option<(TrajectoryCounts, TrajectoryCounts)>,
) -> Result<CellReport> {
    let temperature = TemperatureEstimate::from_distributions(&forward, &reverse)?;
    let free_energy = free_energy_difference(temperature.average.h_beta, forward.start_gap(), forward.end_gap());
    let residuals = cft_residuals(&forward, &reverse, &temperature);
    Ok(CellReport {
        tau_us: pair.forward.protocol.tau_us,
        h_beta,
        mode,
        forward,
        reverse,
        forward_counts: counts.map(|c| c.0),
        reverse_counts: counts.map(|c| c.1),
        temperature,
        free_energy,
        residuals,
    })
}

pub fn exact_cell(pair: &ProtocolPair, h_beta: f64) -> Result<CellReport> {
    let fwd = pair.forward.exact_distribution(h_beta)?;
    let rev = pair.reverse.exact_distribution(h_beta)?;
    finish(pair, h_beta, Mode::Exact, fwd, rev, None)
}

/// Seed for cell `index` of a sweep. Cells that reuse one seed would share
/// their initial-state draws, since every τ starts from the same Hamiltonian.
pub fn cell_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, index.wrapping_add(2))
}

/// Monte Carlo cell; forward and reverse runs use sub-seeds 0 and 1 of `seed`.
pub fn monte_carlo_cell(
    pair: &ProtocolPair,
    h_beta: f64,
    shots: u64,
    model: &MeasurementModel,
    seed: u64,
) -> Result<CellReport> {
    let cf = pair.forward.monte_carlo(h_beta, shots, model, derive_seed(seed, 0))?;
    let cr = pair.reverse.monte_carlo(h_beta, shots, model, derive_seed(seed, 1))?;
    let fwd = pair.forward.counts_to_distribution(&cf)?;
    let rev = pair.reverse.counts_to_distribution(&cr)?;
    finish(pair, h_beta, Mode::MonteCarlo, fwd, rev, Some((cf, cr)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_cell_has_vanishing_residuals() {
        let pair = ProtocolPair::new(SwitchingProtocol::with_tau(25.0).unwrap(), 2000).unwrap();
        let r = exact_cell(&pair, 0.22).unwrap();
        assert_eq!(r.residuals.len(), 4);
        for res in &r.residuals {
            assert!(res.delta.abs() < 1e-8, "{res:?}");
        }
        assert!((r.temperature.average.h_beta - 0.22).abs() < 1e-10);
    }

    #[test]
    fn monte_carlo_cell_carries_counts() {
        let pair = ProtocolPair::new(SwitchingProtocol::with_tau(25.0).unwrap(), 500).unwrap();
        let r = monte_carlo_cell(&pair, 0.22, 2000, &MeasurementModel::ideal(), 4).unwrap();
        assert_eq!(r.forward_counts.unwrap().shots, 2000);
        assert_eq!(r.reverse_counts.unwrap().shots, 2000);
        assert_eq!(r.mode, Mode::MonteCarlo);
    }

    #[test]
    fn cell_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..50).map(|i| cell_seed(9, i)).collect();
        assert_eq!(seeds.len(), 50);
        assert_ne!(cell_seed(9, 0), derive_seed(9, 0));
    }
}
