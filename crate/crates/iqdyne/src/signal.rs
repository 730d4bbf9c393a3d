//! Closed-form physics of one camera exposure.
//!
//! An XY8 block tuned to an AC tone returns a signal proportional to the
//! cosine of the tone's phase at the start of the block. Repeating the block
//! `n_rep` times at interval `t_s` inside one exposure sums those cosines;
//! the sum collapses to a Dirichlet-kernel envelope times a cosine at the
//! mid-sequence phase. This module carries both routes (literal sum and
//! closed form), the Dirichlet frequency response, the sensing bandwidth,
//! and the alias-frequency bookkeeping for the undersampled exposure clock.

use crate::error::{Error, Result};
use crate::numeric::{sinpi, DyadicProduct};
use std::f64::consts::{PI, TAU};

/// Electron gyromagnetic ratio in Hz/T, the default coupling scale.
pub const ELECTRON_GYROMAGNETIC_RATIO_HZ_PER_T: f64 = 2.8024e10;

/// Fractional mismatch between the pulse spacing and half the tone period
/// beyond which the narrowband response model is refused.
pub const RESONANCE_TOLERANCE: f64 = 0.10;

/// Accumulated-phase ceiling of the linear (weak-field) regime.
pub const LINEAR_PHASE_LIMIT_RAD: f64 = std::f64::consts::FRAC_PI_4;

/// One AC tone to be sensed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcTone {
    /// Field amplitude in tesla, >= 0.
    pub amplitude_t: f64,
    /// Tone frequency in hertz, > 0.
    pub frequency_hz: f64,
    /// Phase at t = 0, stored in [0, 2*pi).
    pub initial_phase_rad: f64,
}

impl AcTone {
    pub fn new(amplitude_t: f64, frequency_hz: f64, initial_phase_rad: f64) -> Result<Self> {
        if !amplitude_t.is_finite() || amplitude_t < 0.0 {
            return Err(Error::InvalidInput {
                field: "tone.amplitude_t",
                message: format!("must be finite and >= 0, got {amplitude_t}"),
            });
        }
        if !frequency_hz.is_finite() || frequency_hz <= 0.0 {
            return Err(Error::InvalidInput {
                field: "tone.frequency_hz",
                message: format!("must be finite and > 0, got {frequency_hz}"),
            });
        }
        if !initial_phase_rad.is_finite() {
            return Err(Error::InvalidInput {
                field: "tone.initial_phase_rad",
                message: "must be finite".into(),
            });
        }
        Ok(Self {
            amplitude_t,
            frequency_hz,
            initial_phase_rad: initial_phase_rad.rem_euclid(TAU),
        })
    }

    /// Tone period in seconds.
    pub fn period_s(&self) -> f64 {
        1.0 / self.frequency_hz
    }
}

/// One or more tones with pairwise distinct frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct AcField {
    tones: Vec<AcTone>,
}

impl AcField {
    pub fn new(tones: Vec<AcTone>) -> Result<Self> {
        if tones.is_empty() {
            return Err(Error::InvalidInput {
                field: "field.tones",
                message: "at least one tone is required".into(),
            });
        }
        for (i, a) in tones.iter().enumerate() {
            for b in &tones[i + 1..] {
                if a.frequency_hz == b.frequency_hz {
                    return Err(Error::InvalidInput {
                        field: "field.tones",
                        message: format!("duplicate tone frequency {} Hz", a.frequency_hz),
                    });
                }
            }
        }
        Ok(Self { tones })
    }

    pub fn single(tone: AcTone) -> Self {
        Self { tones: vec![tone] }
    }

    pub fn tones(&self) -> &[AcTone] {
        &self.tones
    }

    /// The tone used for sensitivity reporting (the first one).
    pub fn primary_tone(&self) -> &AcTone {
        &self.tones[0]
    }
}

/// An XY8 dynamical-decoupling block with idealized zero-width pulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Xy8Block {
    n_pulses: u32,
    tau_s: f64,
}

impl Xy8Block {
    pub fn new(n_pulses: u32, tau_s: f64) -> Result<Self> {
        if n_pulses < 8 || !n_pulses.is_multiple_of(8) {
            return Err(Error::InvalidInput {
                field: "block.n_pulses",
                message: format!("must be a multiple of 8 and >= 8, got {n_pulses}"),
            });
        }
        if !tau_s.is_finite() || tau_s <= 0.0 {
            return Err(Error::InvalidInput {
                field: "block.tau_s",
                message: format!("must be finite and > 0, got {tau_s}"),
            });
        }
        Ok(Self { n_pulses, tau_s })
    }

    pub fn n_pulses(&self) -> u32 {
        self.n_pulses
    }

    pub fn tau_s(&self) -> f64 {
        self.tau_s
    }

    /// Total evolution time of the block.
    pub fn duration_s(&self) -> f64 {
        f64::from(self.n_pulses) * self.tau_s
    }
}

/// Properties of the sensing NV ensemble within one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NvEnsemble {
    /// Coherence time in seconds (informational; decay is not modeled).
    pub t2_s: f64,
    /// Gyromagnetic ratio in Hz/T.
    pub gyromagnetic_ratio_hz_per_t: f64,
    /// Optical readout contrast in (0, 1].
    pub contrast: f64,
}

impl NvEnsemble {
    pub fn new(t2_s: f64, gyromagnetic_ratio_hz_per_t: f64, contrast: f64) -> Result<Self> {
        if !t2_s.is_finite() || t2_s <= 0.0 {
            return Err(Error::InvalidInput {
                field: "ensemble.t2_s",
                message: format!("must be > 0, got {t2_s}"),
            });
        }
        if !gyromagnetic_ratio_hz_per_t.is_finite() || gyromagnetic_ratio_hz_per_t <= 0.0 {
            return Err(Error::InvalidInput {
                field: "ensemble.gyromagnetic_ratio_hz_per_t",
                message: format!("must be > 0, got {gyromagnetic_ratio_hz_per_t}"),
            });
        }
        if !contrast.is_finite() || contrast <= 0.0 || contrast > 1.0 {
            return Err(Error::InvalidInput {
                field: "ensemble.contrast",
                message: format!("must be in (0, 1], got {contrast}"),
            });
        }
        Ok(Self {
            t2_s,
            gyromagnetic_ratio_hz_per_t,
            contrast,
        })
    }

    /// First-order coupling of a resonant XY8 block, per tesla:
    /// (2/pi) * gamma * contrast * (n_pulses * tau).
    pub fn linear_coupling_per_t(&self, block: &Xy8Block) -> f64 {
        (2.0 / PI) * self.gyromagnetic_ratio_hz_per_t * self.contrast * block.duration_s()
    }

    /// Spin phase accumulated over one resonant block, in radians.
    pub fn accumulated_phase_rad(&self, block: &Xy8Block, amplitude_t: f64) -> f64 {
        (2.0 / PI) * self.gyromagnetic_ratio_hz_per_t * amplitude_t * block.duration_s()
    }
}

/// The two-timescale timing structure of a run: `n_rep` blocks spaced `t_s`
/// inside each exposure, then a readout gap, repeated `n_exposures` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    t_s_s: f64,
    n_rep: u32,
    t_read_s: f64,
    n_exposures: u32,
}

impl Schedule {
    pub fn new(t_s_s: f64, n_rep: u32, t_read_s: f64, n_exposures: u32) -> Result<Self> {
        if !t_s_s.is_finite() || t_s_s <= 0.0 {
            return Err(Error::InvalidInput {
                field: "schedule.t_s_s",
                message: format!("must be finite and > 0, got {t_s_s}"),
            });
        }
        if n_rep < 1 {
            return Err(Error::InvalidInput {
                field: "schedule.n_rep",
                message: "must be >= 1".into(),
            });
        }
        if !t_read_s.is_finite() || t_read_s < 0.0 {
            return Err(Error::InvalidInput {
                field: "schedule.t_read_s",
                message: format!("must be finite and >= 0, got {t_read_s}"),
            });
        }
        if n_exposures < 2 {
            return Err(Error::InvalidInput {
                field: "schedule.n_exposures",
                message: "must be >= 2".into(),
            });
        }
        Ok(Self {
            t_s_s,
            n_rep,
            t_read_s,
            n_exposures,
        })
    }

    pub fn t_s_s(&self) -> f64 {
        self.t_s_s
    }

    pub fn n_rep(&self) -> u32 {
        self.n_rep
    }

    pub fn t_read_s(&self) -> f64 {
        self.t_read_s
    }

    pub fn n_exposures(&self) -> u32 {
        self.n_exposures
    }

    /// Exposure cycle period: n_rep * t_s + t_read.
    pub fn t_l_s(&self) -> f64 {
        f64::from(self.n_rep) * self.t_s_s + self.t_read_s
    }

    /// Total measurement time: n_exposures * t_l.
    pub fn t_tot_s(&self) -> f64 {
        f64::from(self.n_exposures) * self.t_l_s()
    }
}

/// Signal amplitude of one XY8 block for one tone, after checking the
/// narrowband and weak-field preconditions. This is `A * b_z` in the
/// exposure signal model.
pub fn xy8_amplitude(tone: &AcTone, block: &Xy8Block, ens: &NvEnsemble) -> Result<f64> {
    let half_period = 0.5 * tone.period_s();
    if (block.tau_s - half_period).abs() > RESONANCE_TOLERANCE * half_period {
        return Err(Error::OffResonance {
            tau_s: block.tau_s,
            half_period_s: half_period,
            tolerance: RESONANCE_TOLERANCE * 100.0,
        });
    }
    let phase = ens.accumulated_phase_rad(block, tone.amplitude_t);
    if phase >= LINEAR_PHASE_LIMIT_RAD {
        return Err(Error::NonlinearPhase {
            phase_rad: phase,
            limit_rad: LINEAR_PHASE_LIMIT_RAD,
        });
    }
    Ok(ens.linear_coupling_per_t(block) * tone.amplitude_t)
}

/// Response of a single XY8 block: `A * b_z * cos(phase_at_start)`.
pub fn xy8_response(
    tone: &AcTone,
    block: &Xy8Block,
    ens: &NvEnsemble,
    phase_at_start_rad: f64,
) -> Result<f64> {
    Ok(xy8_amplitude(tone, block, ens)? * phase_at_start_rad.cos())
}

/// Phase advance of a tone over one sampling interval,
/// `2*pi*f_ac*(t_s mod 1/f_ac)`, reduced to (-pi, pi].
///
/// The fractional part of `f_ac * t_s` is computed exactly from the binary
/// representations, so commensurate schedules report an exactly zero
/// advance up to input rounding.
pub fn delta_phi(tone: &AcTone, schedule: &Schedule) -> f64 {
    let frac = DyadicProduct::new(tone.frequency_hz, schedule.t_s_s).frac_at(1);
    let phi = TAU * frac;
    if phi > PI {
        phi - TAU
    } else {
        phi
    }
}

/// Dirichlet kernel sum `sin(n*phi/2) / sin(phi/2)` with the `phi -> 0`
/// limit `n`. `phi` is expected reduced to (-pi, pi].
fn dirichlet_sum(phi: f64, n: u32) -> f64 {
    if phi == 0.0 {
        return f64::from(n);
    }
    (f64::from(n) * 0.5 * phi).sin() / (0.5 * phi).sin()
}

/// Exposure signal of one tone given the tone phase at the first block:
/// the literal sum over blocks `sum_k A b cos(phase + k*delta_phi)`.
pub fn tone_exposure_bruteforce(
    tone: &AcTone,
    block: &Xy8Block,
    ens: &NvEnsemble,
    schedule: &Schedule,
    first_phase_rad: f64,
) -> Result<f64> {
    let amp = xy8_amplitude(tone, block, ens)?;
    let dphi = delta_phi(tone, schedule);
    let mut sum = 0.0;
    for k in 0..schedule.n_rep {
        sum += (first_phase_rad + f64::from(k) * dphi).cos();
    }
    Ok(amp * sum)
}

/// Closed form of [`tone_exposure_bruteforce`]:
/// `A b * Z * cos(phase + (n_rep-1)/2 * delta_phi)` with `Z` the Dirichlet
/// envelope of the block comb.
pub fn tone_exposure_closed(
    tone: &AcTone,
    block: &Xy8Block,
    ens: &NvEnsemble,
    schedule: &Schedule,
    first_phase_rad: f64,
) -> Result<f64> {
    let amp = xy8_amplitude(tone, block, ens)?;
    let dphi = delta_phi(tone, schedule);
    let envelope = dirichlet_sum(dphi, schedule.n_rep);
    let center = first_phase_rad + 0.5 * f64::from(schedule.n_rep - 1) * dphi;
    Ok(amp * envelope * center.cos())
}

/// Brute-force exposure signal of a multi-tone field. `first_phase_rad` is
/// added to each tone's initial phase; tones superpose linearly.
pub fn exposure_signal_bruteforce(
    field: &AcField,
    block: &Xy8Block,
    ens: &NvEnsemble,
    schedule: &Schedule,
    first_phase_rad: f64,
) -> Result<f64> {
    field.tones().iter().try_fold(0.0, |acc, tone| {
        Ok(acc
            + tone_exposure_bruteforce(
                tone,
                block,
                ens,
                schedule,
                tone.initial_phase_rad + first_phase_rad,
            )?)
    })
}

/// Closed-form exposure signal of a multi-tone field; must agree with
/// [`exposure_signal_bruteforce`] to 1e-9 relative.
pub fn exposure_signal_closed(
    field: &AcField,
    block: &Xy8Block,
    ens: &NvEnsemble,
    schedule: &Schedule,
    first_phase_rad: f64,
) -> Result<f64> {
    field.tones().iter().try_fold(0.0, |acc, tone| {
        Ok(acc
            + tone_exposure_closed(
                tone,
                block,
                ens,
                schedule,
                tone.initial_phase_rad + first_phase_rad,
            )?)
    })
}

/// Dirichlet frequency response
/// `Z(df) = sin(pi n_rep t_s df) / sin(pi t_s df)`.
///
/// At the removable singularities (`t_s * df` integer) the analytic limit
/// `+/- n_rep` is returned; the sign alternates with the parity of
/// `m * (n_rep - 1)` where `m = t_s * df`.
pub fn dirichlet_z(delta_f_hz: f64, n_rep: u32, t_s_s: f64) -> f64 {
    let x = t_s_s * delta_f_hz;
    let nearest = x.round();
    if (x - nearest).abs() < 1e-12 {
        let m = nearest as i64;
        let sign = if (m * i64::from(n_rep - 1)).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        return sign * f64::from(n_rep);
    }
    sinpi(f64::from(n_rep) * x) / sinpi(x)
}

/// Sensing bandwidth: first zero of the frequency response,
/// `1 / (n_rep * t_s)`.
pub fn bandwidth_hz(n_rep: u32, t_s_s: f64) -> f64 {
    assert!(n_rep >= 1 && t_s_s > 0.0);
    1.0 / (f64::from(n_rep) * t_s_s)
}

/// Apparent frequency of `f_ac` sampled at interval `t_l`:
/// `|f_ac - round(f_ac * t_l) / t_l|`, folded into [0, 1/(2 t_l)].
pub fn alias_frequency_hz(f_ac_hz: f64, t_l_s: f64) -> f64 {
    assert!(t_l_s > 0.0);
    let n = (f_ac_hz * t_l_s).round();
    (f_ac_hz - n / t_l_s).abs()
}
