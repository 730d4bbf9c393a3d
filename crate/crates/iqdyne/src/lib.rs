//! Simulation and analysis toolkit for iterative-Qdyne (iQdyne) wide-field
//! NV-diamond magnetometry.
//!
//! The crate simulates the full measurement chain of an undersampled,
//! camera-based AC magnetometer — XY8 phase accumulation, phase-locked
//! repetition inside each exposure, photon shot noise and camera readout
//! noise — and implements the matching estimation pipeline: picket-fence
//! data-length search, rectangular-window FFT, leakage-envelope peak
//! fitting, SNR and sensitivity bookkeeping.
//!
//! ```
//! use iqdyne::signal::{bandwidth_hz, dirichlet_z};
//!
//! // 100 phase-locked blocks spaced 13.5 us sense a band of ~741 Hz.
//! let w = bandwidth_hz(100, 13.5e-6);
//! assert!((w - 740.74).abs() < 0.01);
//! // The frequency response vanishes exactly at the band edge...
//! assert!(dirichlet_z(w, 100, 13.5e-6).abs() < 1e-6);
//! // ...and is maximal on resonance.
//! assert_eq!(dirichlet_z(0.0, 100, 13.5e-6), 100.0);
//! ```

pub mod acquisition;
pub mod analysis;
pub mod camera;
pub mod config;
pub mod error;
pub mod experiments;
mod numeric;
pub mod signal;

pub use error::{Error, Result};
