//! Two-tone driven cavity–magnon transmission.
//!
//! A microwave cavity mode couples coherently to a magnon mode. A weak probe
//! enters through the cavity port and a phase-locked pump drives the magnon
//! through its own port. The crate computes the reflected field, its group
//! delay, the pump settings that null the reflection, a coarse regime label,
//! and fits device parameters to measured traces.
//!
//! Frequencies and rates are linear MHz; rates are half-linewidths. Delays are
//! in microseconds.

pub mod cli;
pub mod delay;
pub mod error;
pub mod fit;
pub mod io;
pub mod model;
pub mod oracle;
pub mod spectra;

pub use error::{Error, Result};
pub use model::{
    classify_coupling, steady_state, transmission, CouplingRegime, DriveField, ModeAmplitudes,
    SystemParams,
};
pub use spectra::{classify_regime, trace, DetuningGrid, RegimeLabel, SpectrumTrace};
