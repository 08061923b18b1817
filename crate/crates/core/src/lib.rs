//! Simulation and analysis of work statistics on a driven two-level system.
//!
//! * [`quantum`]: small dense operators, spectra, propagators, thermal states.
//! * [`switching`]: cosine-ramp switching protocols and their adiabaticity.
//! * [`tpm`]: two-point work measurement, exact and shot-by-shot.
//! * [`analysis`]: temperature and free-energy estimators, fluctuation-theorem residuals.
//! * [`experiment`]: one `(τ, hβ)` cell combining the above.
//! * [`pulse`]: robust selective π-pulse design on the six-level NV model.
//! * [`readout`]: repetitive single-shot readout statistics.

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod pulse;
pub mod quantum;
pub mod readout;
pub mod rng;
pub mod switching;
pub mod tpm;

pub use analysis::{CftResidual, TemperatureEstimate};
pub use error::{Error, Result};
pub use experiment::{CellReport, Mode, ProtocolPair};
pub use pulse::{ControlPulse, NoiseGrid, SixLevelModel};
pub use quantum::{DensityMatrix, Operator, SpectralDecomposition};
pub use readout::{ReadoutModel, TelegraphTrace};
pub use switching::{Direction, SwitchingProtocol};
pub use tpm::{MeasurementModel, TrajectoryCounts, WorkDistribution};
