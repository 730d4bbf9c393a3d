//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A domain type received a value that violates one of its invariants.
    #[error("invalid {field}: {message}")]
    InvalidInput { field: &'static str, message: String },

    /// Pulse spacing is too far from half the tone period for the
    /// narrowband response to apply.
    #[error(
        "pulse spacing {tau_s:.4e} s is more than {tolerance:.0}% away from \
         half the tone period ({half_period_s:.4e} s)"
    )]
    OffResonance {
        tau_s: f64,
        half_period_s: f64,
        tolerance: f64,
    },

    /// The accumulated spin phase exceeds the small-angle regime in which
    /// the response is linear in the field amplitude.
    #[error("accumulated phase {phase_rad:.4} rad exceeds the linear-regime limit {limit_rad:.4}")]
    NonlinearPhase { phase_rad: f64, limit_rad: f64 },

    /// The requested expected photon count came out negative, which means
    /// the modulation model was driven outside its validity range.
    #[error("negative expected photon count ({mean:.4e})")]
    NegativeMean { mean: f64 },

    /// A data length or length range passed to the analysis was unusable.
    #[error("invalid data length range: {message}")]
    InvalidLength { message: String },

    /// The spectrum had no usable peak away from DC and the edges.
    #[error("no usable peak: {message}")]
    NoPeak { message: String },

    /// The peak fit could not converge on the supplied data.
    #[error("peak fit failed: {message}")]
    FitFailed { message: String },

    /// Not enough usable points to constrain a curve fit.
    #[error("need at least {needed} points, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },

    /// A sensitivity was requested for a non-positive SNR.
    #[error("SNR must be positive, got {snr}")]
    NonPositiveSnr { snr: f64 },

    /// Configuration problems, reported per field.
    #[error("{0}")]
    Config(#[from] ConfigErrors),

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("sweep parameter path {path:?}: {message}")]
    SweepPath { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("could not parse config: {0}")]
    ConfigParse(String),
}

/// One field-level diagnostic from config validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    /// Dotted path of the offending field, e.g. `schedule.t_s_s`.
    pub path: String,
    pub message: String,
}

/// All diagnostics collected while validating a config.
#[derive(Debug, Clone, Default)]
pub struct ConfigErrors(pub Vec<FieldError>);

impl ConfigErrors {
    pub fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(FieldError {
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(self))
        }
    }
}

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "config validation failed:")?;
        for e in &self.0 {
            writeln!(f, "  {}: {}", e.path, e.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}
