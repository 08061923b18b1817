//! Cosine-ramp switching protocols on a two-level system.
//!
//! `H(t) = 2π[Z·S_z′ + X(t)·S_x′]` with `X(t) = x_max·[1 − cos(πt/τ)]/2`.
//! Amplitudes are in kHz, protocol times in µs; Hamiltonians come out in
//! rad/ms so they can be handed straight to [`crate::quantum::propagate`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::quantum::{self, eigh_raw, spin, Operator, DEFAULT_SLICES};

pub const DEFAULT_Z0_KHZ: f64 = 2.0;
pub const DEFAULT_X_MAX_KHZ: f64 = 5.0;
pub const DEFAULT_GAMMA_SAMPLES: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingProtocol {
    pub z0: f64,
    pub x_max: f64,
    pub tau_us: f64,
    pub direction: Direction,
}

impl SwitchingProtocol {
    pub fn new(z0: f64, x_max: f64, tau_us: f64, direction: Direction) -> Result<Self> {
        if !(tau_us.is_finite() && tau_us > 0.0) {
            return Err(validation(format!("tau must be positive, got {tau_us} µs")));
        }
        if !(x_max.is_finite() && x_max >= 0.0) {
            return Err(validation(format!("x_max must be >= 0, got {x_max} kHz")));
        }
        if !(z0.is_finite() && z0 > 0.0) {
            return Err(validation(format!("z0 must be positive, got {z0} kHz")));
        }
        Ok(Self {
            z0,
            x_max,
            tau_us,
            direction,
        })
    }

    /// Forward protocol with the default amplitudes (Z = 2 kHz, X_max = 5 kHz).
    pub fn with_tau(tau_us: f64) -> Result<Self> {
        Self::new(DEFAULT_Z0_KHZ, DEFAULT_X_MAX_KHZ, tau_us, Direction::Forward)
    }

    pub fn reversed(&self) -> Self {
        let direction = match self.direction {
            Direction::Forward => Direction::Reversed,
            Direction::Reversed => Direction::Forward,
        };
        Self { direction, ..*self }
    }

    pub fn tau_ms(&self) -> f64 {
        self.tau_us * 1e-3
    }

    fn check_time(&self, t_us: f64) -> Result<()> {
        if t_us.is_nan() || t_us < 0.0 || t_us > self.tau_us {
            return Err(Error::Range {
                name: "t (µs)",
                value: t_us,
                lo: 0.0,
                hi: self.tau_us,
            });
        }
        Ok(())
    }

    /// Time on the forward ramp that corresponds to `t_us` on this protocol.
    fn ramp_time(&self, t_us: f64) -> f64 {
        match self.direction {
            Direction::Forward => t_us,
            Direction::Reversed => self.tau_us - t_us,
        }
    }

    fn x_forward(&self, s_us: f64) -> f64 {
        self.x_max * (1.0 - (PI * s_us / self.tau_us).cos()) / 2.0
    }

    /// `(Z_eff, X_eff)` in kHz.
    pub fn amplitudes(&self, t_us: f64) -> Result<(f64, f64)> {
        self.check_time(t_us)?;
        Ok((self.z0, self.x_forward(self.ramp_time(t_us))))
    }

    /// `dX_eff/dt` in kHz/ms.
    fn x_rate(&self, t_us: f64) -> f64 {
        let s = self.ramp_time(t_us);
        let forward = self.x_max * PI * (PI * s / self.tau_us).sin() / (2.0 * self.tau_ms());
        match self.direction {
            Direction::Forward => forward,
            Direction::Reversed => -forward,
        }
    }

    /// Hamiltonian in rad/ms at protocol time `t_us`.
    pub fn hamiltonian_at(&self, t_us: f64) -> Result<Operator> {
        let (z, x) = self.amplitudes(t_us)?;
        Ok(spin::sz()
            .scale_real(z)
            .add(&spin::sx().scale_real(x))
            .scale_real(2.0 * PI))
    }

    pub fn start_hamiltonian(&self) -> Operator {
        self.hamiltonian_at(0.0).expect("t = 0 is in range")
    }

    pub fn end_hamiltonian(&self) -> Operator {
        self.hamiltonian_at(self.tau_us).expect("t = tau is in range")
    }

    /// Instantaneous level splitting in kHz.
    pub fn instantaneous_gap(&self, t_us: f64) -> Result<f64> {
        let (z, x) = self.amplitudes(t_us)?;
        Ok(z.hypot(x))
    }

    /// Time-ordered propagator over the full protocol.
    pub fn propagator(&self, slices: usize) -> Result<Operator> {
        let tau_ms = self.tau_ms();
        quantum::propagate(
            |t_ms| self.hamiltonian_at((t_ms * 1e3).min(self.tau_us)),
            tau_ms,
            slices,
        )
    }

    pub fn default_propagator(&self) -> Result<Operator> {
        self.propagator(DEFAULT_SLICES)
    }

    /// Adiabaticity parameter Γ, taken as the maximum over a uniform grid of
    /// `|⟨n₁|∂H/∂t|n₂⟩| / (E₁ − E₂)²` with both sides in angular units.
    pub fn adiabaticity(&self, samples: usize) -> Result<f64> {
        if samples < 100 {
            return Err(validation(format!("adiabaticity needs >= 100 samples, got {samples}")));
        }
        let mut gamma: f64 = 0.0;
        for k in 0..samples {
            let t_us = self.tau_us * k as f64 / (samples - 1) as f64;
            let rate = self.x_rate(t_us);
            if rate == 0.0 {
                continue;
            }
            let (values, vectors) = eigh_raw(&self.hamiltonian_at(t_us)?)?;
            let dh = spin::sx().scale_real(2.0 * PI * rate);
            let num = dh.sandwich(&vectors[1], &vectors[0]).norm();
            let gap = values[1] - values[0];
            gamma = gamma.max(num / (gap * gap));
        }
        Ok(gamma)
    }
}
