//! Two-point measurement of work.
//!
//! A run prepares the Gibbs state of the initial Hamiltonian, measures it in
//! the initial eigenbasis, applies the switching unitary and measures again in
//! the final eigenbasis. Work on trajectory `i → j̃` is `f_j^end − f_i^start`.
//!
//! Trajectory-indexed quantities are 2×2 arrays `[first][second]`: for the
//! forward process `first` labels the eigenstates of `H(0)`, for the
//! time-reversed process those of `H(τ)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::quantum::{
    eig_hermitian, gibbs_populations, InverseTemperature, Operator, SpectralDecomposition,
    DEFAULT_SLICES,
};
use crate::rng::StreamFactory;
use crate::switching::SwitchingProtocol;

pub type Matrix2 = [[f64; 2]; 2];

/// Imperfect projective measurement.
///
/// `misassign_prob` flips the recorded outcome, `demolition_prob` replaces the
/// post-measurement state with the other eigenstate. The two are independent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementModel {
    pub misassign_prob: f64,
    pub demolition_prob: f64,
}

impl MeasurementModel {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn new(misassign_prob: f64, demolition_prob: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&misassign_prob) {
            return Err(validation(format!(
                "misassignment probability must lie in [0, 0.5), got {misassign_prob}"
            )));
        }
        if !(0.0..=1.0).contains(&demolition_prob) {
            return Err(validation(format!(
                "demolition probability must lie in [0, 1], got {demolition_prob}"
            )));
        }
        Ok(Self {
            misassign_prob,
            demolition_prob,
        })
    }

    pub fn is_ideal(&self) -> bool {
        self.misassign_prob == 0.0 && self.demolition_prob == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryCounts {
    pub counts: [[u64; 2]; 2],
    pub shots: u64,
}

impl TrajectoryCounts {
    pub fn new(counts: [[u64; 2]; 2]) -> Self {
        let shots = counts.iter().flatten().sum();
        Self { counts, shots }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkDistribution {
    /// Work in kHz for each trajectory.
    pub work_values: Matrix2,
    pub probabilities: Matrix2,
    /// One-sigma uncertainty per trajectory probability.
    pub std_errors: Matrix2,
    pub source: Source,
    /// Accepted shots behind a Monte Carlo estimate.
    pub shots: Option<u64>,
    pub start_energies: [f64; 2],
    pub end_energies: [f64; 2],
}

impl WorkDistribution {
    /// Row sums: populations of the first measurement.
    pub fn initial_populations(&self) -> [f64; 2] {
        [
            self.probabilities[0][0] + self.probabilities[0][1],
            self.probabilities[1][0] + self.probabilities[1][1],
        ]
    }

    /// Binomial one-sigma error of a marginal population.
    pub fn population_std_error(&self, p: f64) -> f64 {
        match self.shots {
            Some(n) if n > 0 => (p * (1.0 - p) / n as f64).sqrt(),
            _ => 0.0,
        }
    }

    pub fn start_gap(&self) -> f64 {
        self.start_energies[1] - self.start_energies[0]
    }

    pub fn end_gap(&self) -> f64 {
        self.end_energies[1] - self.end_energies[0]
    }
}

fn energies2(s: &SpectralDecomposition) -> [f64; 2] {
    [s.energies[0], s.energies[1]]
}

fn work_matrix(start: &[f64; 2], end: &[f64; 2]) -> Matrix2 {
    let mut w = [[0.0; 2]; 2];
    for (i, row) in w.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = end[j] - start[i];
        }
    }
    w
}

/// Precomputed spectra and transition matrix for one protocol.
#[derive(Debug, Clone)]
pub struct TpmSetup {
    pub protocol: SwitchingProtocol,
    pub start: SpectralDecomposition,
    pub end: SpectralDecomposition,
    pub propagator: Operator,
    /// `|⟨v_j^end|U|v_i^start⟩|²` indexed `[i][j]`.
    pub transitions: Matrix2,
}

impl TpmSetup {
    pub fn new(protocol: SwitchingProtocol, slices: usize) -> Result<Self> {
        let start = eig_hermitian(&protocol.start_hamiltonian())?;
        let end = eig_hermitian(&protocol.end_hamiltonian())?;
        let propagator = protocol.propagator(slices)?;
        let t = SpectralDecomposition::transition_probabilities(&start, &propagator, &end);
        let transitions = [[t[0][0], t[0][1]], [t[1][0], t[1][1]]];
        Ok(Self {
            protocol,
            start,
            end,
            propagator,
            transitions,
        })
    }

    pub fn with_default_slices(protocol: SwitchingProtocol) -> Result<Self> {
        Self::new(protocol, DEFAULT_SLICES)
    }

    pub fn work_values(&self) -> Matrix2 {
        work_matrix(&energies2(&self.start), &energies2(&self.end))
    }

    pub fn initial_populations(&self, h_beta: f64) -> Result<[f64; 2]> {
        let p = gibbs_populations(&self.start.energies, InverseTemperature::new(h_beta)?);
        Ok([p[0], p[1]])
    }

    pub fn exact_distribution(&self, h_beta: f64) -> Result<WorkDistribution> {
        let pops = self.initial_populations(h_beta)?;
        let mut probabilities = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                probabilities[i][j] = pops[i] * self.transitions[i][j];
            }
        }
        Ok(WorkDistribution {
            work_values: self.work_values(),
            probabilities,
            std_errors: [[0.0; 2]; 2],
            source: Source::Exact,
            shots: None,
            start_energies: energies2(&self.start),
            end_energies: energies2(&self.end),
        })
    }

    /// Shot-by-shot simulation with measurement imperfections.
    ///
    /// Each shot draws from its own stream `(seed, shot)`, and the counts are
    /// integer sums, so the result is independent of the thread count. The
    /// post-measurement state is always an eigenstate, so evolving it and
    /// applying the Born rule reduces to a draw from `transitions[state]`.
    pub fn monte_carlo(
        &self,
        h_beta: f64,
        shots: u64,
        model: &MeasurementModel,
        seed: u64,
    ) -> Result<TrajectoryCounts> {
        if shots == 0 {
            return Err(validation("shots must be >= 1"));
        }
        let pops = self.initial_populations(h_beta)?;
        let factory = StreamFactory::new(seed);
        let eps = model.misassign_prob;
        let demolish = model.demolition_prob;
        let trans = self.transitions;

        let counts = (0..shots)
            .into_par_iter()
            .fold(
                || [[0u64; 2]; 2],
                |mut acc, shot| {
                    let mut rng = factory.stream(shot);
                    let initial = usize::from(rng.random::<f64>() >= pops[0]);
                    let first_record = initial ^ usize::from(rng.random::<f64>() < eps);
                    let state = initial ^ usize::from(rng.random::<f64>() < demolish);
                    let fin = usize::from(rng.random::<f64>() >= trans[state][0]);
                    let second_record = fin ^ usize::from(rng.random::<f64>() < eps);
                    acc[first_record][second_record] += 1;
                    acc
                },
            )
            .reduce(
                || [[0u64; 2]; 2],
                |mut a, b| {
                    for i in 0..2 {
                        for j in 0..2 {
                            a[i][j] += b[i][j];
                        }
                    }
                    a
                },
            );
        Ok(TrajectoryCounts { counts, shots })
    }

    pub fn counts_to_distribution(&self, c: &TrajectoryCounts) -> Result<WorkDistribution> {
        counts_with_spectra(c, energies2(&self.start), energies2(&self.end))
    }
}

fn counts_with_spectra(
    c: &TrajectoryCounts,
    start_energies: [f64; 2],
    end_energies: [f64; 2],
) -> Result<WorkDistribution> {
    if c.shots == 0 {
        return Err(validation("cannot build a distribution from zero shots"));
    }
    let total: u64 = c.counts.iter().flatten().sum();
    if total != c.shots {
        return Err(validation(format!(
            "counts sum to {total} but shots = {}",
            c.shots
        )));
    }
    let n = c.shots as f64;
    let mut probabilities = [[0.0; 2]; 2];
    let mut std_errors = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let p = c.counts[i][j] as f64 / n;
            probabilities[i][j] = p;
            std_errors[i][j] = (p * (1.0 - p) / n).sqrt();
        }
    }
    Ok(WorkDistribution {
        work_values: work_matrix(&start_energies, &end_energies),
        probabilities,
        std_errors,
        source: Source::MonteCarlo,
        shots: Some(c.shots),
        start_energies,
        end_energies,
    })
}

pub fn exact_work_distribution(p: &SwitchingProtocol, h_beta: f64) -> Result<WorkDistribution> {
    InverseTemperature::new(h_beta)?;
    TpmSetup::with_default_slices(*p)?.exact_distribution(h_beta)
}

pub fn monte_carlo_tpm(
    p: &SwitchingProtocol,
    h_beta: f64,
    shots: u64,
    model: &MeasurementModel,
    seed: u64,
) -> Result<TrajectoryCounts> {
    TpmSetup::with_default_slices(*p)?.monte_carlo(h_beta, shots, model, seed)
}

/// Empirical distribution from counts; only the endpoint spectra of `p` are used.
pub fn counts_to_distribution(c: &TrajectoryCounts, p: &SwitchingProtocol) -> Result<WorkDistribution> {
    let start = eig_hermitian(&p.start_hamiltonian())?;
    let end = eig_hermitian(&p.end_hamiltonian())?;
    counts_with_spectra(c, energies2(&start), energies2(&end))
}

/// Largest `| |⟨j̃|U^F|i⟩|² − |⟨i|U^R|j̃⟩|² |` over the four trajectories.
pub fn microreversibility_error(forward: &TpmSetup, reverse: &TpmSetup) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max((forward.transitions[i][j] - reverse.transitions[j][i]).abs());
        }
    }
    worst
}
