//! Photon-count model for a slow camera pixel: Poisson shot noise on the
//! collected fluorescence, additive Gaussian readout noise per exposure, and
//! a hard well-depth clamp.

use crate::error::{Error, Result};
use crate::signal::Schedule;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

/// How counts are produced: sampled with full noise, or replaced by their
/// expected value (deterministic diagnostic mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Full,
    None,
}

/// Per-pixel camera and photon-budget parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    /// Expected baseline photons collected per XY8 block.
    pub photons_per_xy8: f64,
    /// Readout noise, electrons rms per exposure.
    pub readout_noise_sigma: f64,
    /// Full-well capacity in electrons; counts clamp here.
    pub well_depth: f64,
    /// Pixel area in square micrometers (used for area-normalized
    /// sensitivities).
    pub pixel_area_um2: f64,
    /// Base RNG seed; per-pixel streams derive from it.
    pub seed: u64,
    /// Fractional fluorescence modulation mapping the dimensionless
    /// per-block signal onto the count rate.
    pub modulation_depth: f64,
    pub noise: NoiseMode,
}

/// Which noise source dominates an exposure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseRegime {
    ReadoutDominated,
    ShotDominated,
    Mixed,
}

impl std::fmt::Display for NoiseRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseRegime::ReadoutDominated => write!(f, "readout_dominated"),
            NoiseRegime::ShotDominated => write!(f, "shot_dominated"),
            NoiseRegime::Mixed => write!(f, "mixed"),
        }
    }
}

/// One sampled exposure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureSample {
    pub count: f64,
    pub saturated: bool,
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !self.photons_per_xy8.is_finite() || self.photons_per_xy8 <= 0.0 {
            return Err(Error::InvalidInput {
                field: "camera.photons_per_xy8",
                message: format!("must be > 0, got {}", self.photons_per_xy8),
            });
        }
        if !self.readout_noise_sigma.is_finite() || self.readout_noise_sigma < 0.0 {
            return Err(Error::InvalidInput {
                field: "camera.readout_noise_sigma",
                message: format!("must be >= 0, got {}", self.readout_noise_sigma),
            });
        }
        if !self.well_depth.is_finite() || self.well_depth <= 0.0 {
            return Err(Error::InvalidInput {
                field: "camera.well_depth",
                message: format!("must be > 0, got {}", self.well_depth),
            });
        }
        if !self.pixel_area_um2.is_finite() || self.pixel_area_um2 <= 0.0 {
            return Err(Error::InvalidInput {
                field: "camera.pixel_area_um2",
                message: format!("must be > 0, got {}", self.pixel_area_um2),
            });
        }
        if !self.modulation_depth.is_finite()
            || self.modulation_depth <= 0.0
            || self.modulation_depth > 1.0
        {
            return Err(Error::InvalidInput {
                field: "camera.modulation_depth",
                message: format!("must be in (0, 1], got {}", self.modulation_depth),
            });
        }
        Ok(())
    }

    /// Expected count of one exposure given the dimensionless exposure
    /// signal: `n_rep * photons * (1 + signal/n_rep * depth)`.
    pub fn expected_count(&self, ideal_signal: f64, n_rep: u32) -> Result<f64> {
        let baseline = f64::from(n_rep) * self.photons_per_xy8;
        let mean = baseline * (1.0 + ideal_signal / f64::from(n_rep) * self.modulation_depth);
        if mean < 0.0 {
            return Err(Error::NegativeMean { mean });
        }
        Ok(mean)
    }

    /// Sample one exposure: Poisson(mean) plus rounded Gaussian readout
    /// noise, clamped to [0, well_depth]. The saturation flag records a
    /// well-depth clamp.
    pub fn expose<R: Rng>(
        &self,
        ideal_signal: f64,
        n_rep: u32,
        rng: &mut R,
    ) -> Result<ExposureSample> {
        let mean = self.expected_count(ideal_signal, n_rep)?;
        match self.noise {
            NoiseMode::None => {
                if mean > self.well_depth {
                    Ok(ExposureSample {
                        count: self.well_depth,
                        saturated: true,
                    })
                } else {
                    Ok(ExposureSample {
                        count: mean,
                        saturated: false,
                    })
                }
            }
            NoiseMode::Full => {
                let shot = if mean > 0.0 {
                    Poisson::new(mean)
                        .expect("validated mean is positive and finite")
                        .sample(rng)
                } else {
                    0.0
                };
                let readout = if self.readout_noise_sigma > 0.0 {
                    Normal::new(0.0, self.readout_noise_sigma)
                        .expect("validated sigma is non-negative")
                        .sample(rng)
                        .round()
                } else {
                    0.0
                };
                let raw = shot + readout;
                if raw > self.well_depth {
                    Ok(ExposureSample {
                        count: self.well_depth,
                        saturated: true,
                    })
                } else {
                    Ok(ExposureSample {
                        count: raw.max(0.0),
                        saturated: false,
                    })
                }
            }
        }
    }

    /// Compare readout variance against baseline shot variance for one
    /// exposure. Ratios above 3 (below 1/3) are called readout- (shot-)
    /// dominated; the band in between is mixed.
    pub fn noise_regime(&self, n_rep: u32) -> NoiseRegime {
        let shot_var = f64::from(n_rep) * self.photons_per_xy8;
        let ratio = self.readout_noise_sigma.powi(2) / shot_var;
        if ratio > 3.0 {
            NoiseRegime::ReadoutDominated
        } else if ratio < 1.0 / 3.0 {
            NoiseRegime::ShotDominated
        } else {
            NoiseRegime::Mixed
        }
    }
}

/// One pixel's time series of per-exposure counts.
///
/// With full noise every count is a non-negative integer value; in the
/// expected-value mode counts are real-valued means.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelTrace {
    pub counts: Vec<f64>,
    pub schedule: Schedule,
    pub saturated: bool,
}

impl PixelTrace {
    pub fn new(counts: Vec<f64>, schedule: Schedule, saturated: bool) -> Result<Self> {
        if counts.len() != schedule.n_exposures() as usize {
            return Err(Error::InvalidInput {
                field: "trace.counts",
                message: format!(
                    "length {} does not match n_exposures {}",
                    counts.len(),
                    schedule.n_exposures()
                ),
            });
        }
        Ok(Self {
            counts,
            schedule,
            saturated,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}
