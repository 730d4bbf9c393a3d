//! Driving a full measurement: advance each tone's phase across the
//! exposure clock, evaluate the exposure signal, and sample camera counts,
//! for a single pixel or a wide-field grid.
//!
//! Reproducibility contract: every pixel draws from its own counter-mode
//! RNG stream derived from (seed, pixel index), so grids simulate in
//! parallel with bit-identical results regardless of scheduling order.

use crate::camera::{CameraModel, PixelTrace};
use crate::error::{Error, Result};
use crate::numeric::DyadicProduct;
use crate::signal::{tone_exposure_closed, AcField, AcTone, NvEnsemble, Schedule, Xy8Block};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// The protocol variant: plain undersampled acquisition (one block per
/// exposure) or the iterated variant with `n_rep` blocks per exposure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolMode {
    DirectQdyne,
    Iqdyne,
}

/// Everything needed to simulate one pixel's measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub field: AcField,
    pub block: Xy8Block,
    pub ensemble: NvEnsemble,
    pub schedule: Schedule,
    pub camera: CameraModel,
    pub mode: ProtocolMode,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        if self.mode == ProtocolMode::DirectQdyne && self.schedule.n_rep() != 1 {
            return Err(Error::InvalidInput {
                field: "mode",
                message: format!(
                    "direct_qdyne requires n_rep = 1, got {}",
                    self.schedule.n_rep()
                ),
            });
        }
        if self.block.duration_s() > self.schedule.t_s_s() {
            return Err(Error::InvalidInput {
                field: "block",
                message: format!(
                    "block duration {:.4e} s exceeds the sampling interval {:.4e} s",
                    self.block.duration_s(),
                    self.schedule.t_s_s()
                ),
            });
        }
        Ok(())
    }
}

/// Tone phase at the start of exposure `k`:
/// `(initial_phase + 2 pi f_ac k t_l) mod 2 pi`.
///
/// The cycle count `f_ac * t_l * k` is reduced mod 1 in exact integer
/// arithmetic, so the phase does not drift even over 10^6 exposures.
pub fn phase_at_exposure(tone: &AcTone, schedule: &Schedule, k: u64) -> f64 {
    let cycles = DyadicProduct::new(tone.frequency_hz, schedule.t_l_s());
    let mut phase = tone.initial_phase_rad + TAU * cycles.frac_at(k);
    if phase >= TAU {
        phase -= TAU;
    }
    phase
}

fn run_trace_with(
    config: &ExperimentConfig,
    field: &AcField,
    rng: &mut ChaCha8Rng,
) -> Result<PixelTrace> {
    let schedule = &config.schedule;
    let trackers: Vec<(AcTone, DyadicProduct)> = field
        .tones()
        .iter()
        .map(|t| (*t, DyadicProduct::new(t.frequency_hz, schedule.t_l_s())))
        .collect();

    let n = schedule.n_exposures();
    let mut counts = Vec::with_capacity(n as usize);
    let mut saturated = false;
    for k in 0..u64::from(n) {
        let mut ideal = 0.0;
        for (tone, cycles) in &trackers {
            let mut phase = tone.initial_phase_rad + TAU * cycles.frac_at(k);
            if phase >= TAU {
                phase -= TAU;
            }
            ideal += tone_exposure_closed(tone, &config.block, &config.ensemble, schedule, phase)?;
        }
        let sample = config.camera.expose(ideal, schedule.n_rep(), rng)?;
        saturated |= sample.saturated;
        counts.push(sample.count);
    }
    PixelTrace::new(counts, *schedule, saturated)
}

/// RNG stream for a pixel's exposure sampling.
fn exposure_rng(seed: u64, pixel_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * pixel_index);
    rng
}

/// RNG stream for a pixel's parameter draws (inhomogeneity).
fn parameter_rng(seed: u64, pixel_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * pixel_index + 1);
    rng
}

/// Simulate a single pixel.
pub fn run_trace(config: &ExperimentConfig) -> Result<PixelTrace> {
    config.validate()?;
    let mut rng = exposure_rng(config.camera.seed, 0);
    run_trace_with(config, &config.field, &mut rng)
}

/// A wide-field run: per-pixel copies of the base experiment with optional
/// Gaussian spread of tone frequency (additive, Hz) and amplitude
/// (multiplicative, relative).
#[derive(Debug, Clone, PartialEq)]
pub struct WideFieldConfig {
    pub base: ExperimentConfig,
    pub rows: u32,
    pub cols: u32,
    pub field_inhomogeneity_sigma_hz: f64,
    pub amplitude_inhomogeneity_rel_sigma: f64,
}

impl WideFieldConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.rows < 1 || self.cols < 1 {
            return Err(Error::InvalidInput {
                field: "widefield.grid",
                message: format!("grid must be at least 1x1, got {}x{}", self.rows, self.cols),
            });
        }
        if self.field_inhomogeneity_sigma_hz < 0.0
            || self.amplitude_inhomogeneity_rel_sigma < 0.0
            || self.field_inhomogeneity_sigma_hz.is_nan()
            || self.amplitude_inhomogeneity_rel_sigma.is_nan()
        {
            return Err(Error::InvalidInput {
                field: "widefield.sigma",
                message: "inhomogeneity sigmas must be >= 0".into(),
            });
        }
        Ok(())
    }
}

/// One simulated pixel with the parameter draws that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct WideFieldPixel {
    pub row: u32,
    pub col: u32,
    pub trace: PixelTrace,
    /// Additive frequency offset applied to every tone of this pixel.
    pub frequency_offset_hz: f64,
    /// Multiplicative amplitude factor applied to every tone.
    pub amplitude_scale: f64,
}

/// Row-major grid of simulated pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct WideFieldRun {
    pub rows: u32,
    pub cols: u32,
    pub pixels: Vec<WideFieldPixel>,
}

/// Simulate every pixel of the grid, in parallel. Pixel (r, c) has index
/// `r * cols + c`; removing or reordering pixels cannot change any other
/// pixel's trace.
pub fn run_widefield(config: &WideFieldConfig) -> Result<WideFieldRun> {
    config.validate()?;
    let base = &config.base;
    let seed = base.camera.seed;
    let n_pixels = u64::from(config.rows) * u64::from(config.cols);

    let pixels: Result<Vec<WideFieldPixel>> = (0..n_pixels)
        .into_par_iter()
        .map(|p| {
            let mut prng = parameter_rng(seed, p);
            let offset = draw_normal(&mut prng, config.field_inhomogeneity_sigma_hz);
            let scale = 1.0 + draw_normal(&mut prng, config.amplitude_inhomogeneity_rel_sigma);

            let tones: Result<Vec<AcTone>> = base
                .field
                .tones()
                .iter()
                .map(|t| {
                    AcTone::new(
                        (t.amplitude_t * scale).max(0.0),
                        t.frequency_hz + offset,
                        t.initial_phase_rad,
                    )
                })
                .collect();
            let field = AcField::new(tones?)?;

            let mut rng = exposure_rng(seed, p);
            let trace = run_trace_with(base, &field, &mut rng)?;
            Ok(WideFieldPixel {
                row: (p / u64::from(config.cols)) as u32,
                col: (p % u64::from(config.cols)) as u32,
                trace,
                frequency_offset_hz: offset,
                amplitude_scale: scale,
            })
        })
        .collect();

    Ok(WideFieldRun {
        rows: config.rows,
        cols: config.cols,
        pixels: pixels?,
    })
}

/// Normal(0, sigma) draw that returns exactly 0.0 (while still consuming
/// the stream) when sigma is zero, so zero-spread grids match single-pixel
/// runs bitwise.
fn draw_normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    use rand_distr::{Distribution, Normal, StandardNormal};
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("sigma validated").sample(rng)
    } else {
        let _: f64 = StandardNormal.sample(rng);
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::NoiseMode;
    use crate::signal::{
        alias_frequency_hz, bandwidth_hz, exposure_signal_bruteforce, xy8_amplitude,
    };

    fn test_camera(noise: NoiseMode) -> CameraModel {
        CameraModel {
            photons_per_xy8: 500.0,
            readout_noise_sigma: 41.833,
            well_depth: 7e5,
            pixel_area_um2: 1.0,
            seed: 21,
            modulation_depth: 0.3,
            noise,
        }
    }

    fn base_config(f_offset_hz: f64, noise: NoiseMode) -> ExperimentConfig {
        let tone = AcTone::new(1e-6, 10.0e6 / 3.0 + f_offset_hz, 0.0).unwrap();
        ExperimentConfig {
            field: AcField::single(tone),
            block: Xy8Block::new(48, 150e-9).unwrap(),
            ensemble: NvEnsemble::new(3e-6, 2.8024e10, 0.3).unwrap(),
            schedule: Schedule::new(13.5e-6, 100, 3e-3, 1000).unwrap(),
            camera: test_camera(noise),
            mode: ProtocolMode::Iqdyne,
        }
    }

    #[test]
    fn phase_at_exposure_zero_index_is_initial_phase() {
        let tone = AcTone::new(1e-6, 3.2e6, 1.25).unwrap();
        let schedule = Schedule::new(13.5e-6, 100, 3e-3, 1000).unwrap();
        assert_eq!(phase_at_exposure(&tone, &schedule, 0), 1.25);
    }

    #[test]
    fn phase_at_exposure_stroboscopic_lock() {
        // Dyadic timing: t_s = 2^-10 s, t_read = 2^-8 s, n_rep = 4 gives
        // t_l = 2^-7 s exactly; f_ac = 5120 Hz makes f_ac * t_l = 40.
        let tone = AcTone::new(1e-9, 5120.0, 0.77).unwrap();
        let schedule = Schedule::new(2f64.powi(-10), 4, 2f64.powi(-8), 100).unwrap();
        assert_eq!(tone.frequency_hz * schedule.t_l_s(), 40.0);
        for k in [0u64, 1, 17, 99, 1_000_000] {
            assert_eq!(phase_at_exposure(&tone, &schedule, k), 0.77);
        }
    }

    #[test]
    fn phase_at_exposure_matches_bigint_oracle() {
        // Independent oracle: exact rational arithmetic on the f64 bit
        // patterns with arbitrary-precision integers.
        use num_bigint::BigUint;

        fn decompose(x: f64) -> (u64, i32) {
            let bits = x.to_bits();
            let exp = ((bits >> 52) & 0x7ff) as i32;
            let frac = bits & ((1u64 << 52) - 1);
            if exp == 0 {
                (frac, -1074)
            } else {
                (frac | (1u64 << 52), exp - 1075)
            }
        }

        fn frac_cycles(f: f64, t: f64, k: u64) -> f64 {
            let (mf, ef) = decompose(f);
            let (mt, et) = decompose(t);
            let e = ef + et;
            assert!(e < 0);
            let s = (-e) as u64;
            let num = BigUint::from(mf) * BigUint::from(mt) * BigUint::from(k);
            let den = BigUint::from(1u8) << s;
            let rem = num % &den;
            // rem / 2^s as f64
            let mut value = 0.0f64;
            let bytes = rem.to_bytes_le();
            for (i, b) in bytes.iter().enumerate() {
                value += (*b as f64) * 2f64.powi(8 * i as i32 - s as i32);
            }
            value
        }

        let tone = AcTone::new(1e-6, 10.0e6 / 3.0 + 50.0, 0.4).unwrap();
        let schedule = Schedule::new(13.5e-6, 100, 3e-3, 1000).unwrap();
        for k in [1u64, 13, 1000, 987_654] {
            let expect =
                (0.4 + TAU * frac_cycles(tone.frequency_hz, schedule.t_l_s(), k)).rem_euclid(TAU);
            let got = phase_at_exposure(&tone, &schedule, k);
            assert!(
                (got - expect).abs() < 1e-9,
                "k = {k}: {got} vs oracle {expect}"
            );
        }
    }

    #[test]
    fn noiseless_trace_peaks_at_alias_frequency() {
        // FFT-peak oracle for the aliasing bookkeeping.
        let config = base_config(50.0, NoiseMode::None);
        let trace = run_trace(&config).unwrap();
        let t_l = config.schedule.t_l_s();
        let alias = alias_frequency_hz(config.field.tones()[0].frequency_hz, t_l);
        assert!((alias - 50.0).abs() < 1e-4);

        // Locate the strongest oscillation by plain DFT over a few candidate
        // bins (independent of the analysis module).
        let n = trace.len();
        let mean = trace.counts.iter().sum::<f64>() / n as f64;
        let mut best = (0usize, 0.0f64);
        for bin in 1..n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, c) in trace.counts.iter().enumerate() {
                let a = TAU * bin as f64 * k as f64 / n as f64;
                re += (c - mean) * a.cos();
                im += (c - mean) * a.sin();
            }
            let mag = re.hypot(im);
            if mag > best.1 {
                best = (bin, mag);
            }
        }
        let bin_hz = 1.0 / (n as f64 * t_l);
        let peak_hz = best.0 as f64 * bin_hz;
        assert!(
            (peak_hz - alias).abs() <= bin_hz,
            "peak {peak_hz} Hz vs alias {alias} Hz"
        );
    }

    #[test]
    fn zero_amplitude_gives_constant_mean_counts() {
        let mut config = base_config(50.0, NoiseMode::None);
        config.field =
            AcField::single(AcTone::new(0.0, 10.0e6 / 3.0 + 50.0, 0.0).unwrap());
        let trace = run_trace(&config).unwrap();
        let first = trace.counts[0];
        assert!(trace.counts.iter().all(|c| (c - first).abs() < 1e-9));
        assert_eq!(first, 100.0 * 500.0);
    }

    #[test]
    fn detuning_at_bandwidth_kills_the_oscillation() {
        let config = base_config(50.0, NoiseMode::None);
        let ref_trace = run_trace(&config).unwrap();
        let ref_amp = ref_trace
            .counts
            .iter()
            .cloned()
            .fold(f64::MIN, f64::max)
            - ref_trace.counts.iter().cloned().fold(f64::MAX, f64::min);

        let w = bandwidth_hz(100, 13.5e-6);
        let detuned = base_config(w, NoiseMode::None);
        let trace = run_trace(&detuned).unwrap();
        let amp = trace.counts.iter().cloned().fold(f64::MIN, f64::max)
            - trace.counts.iter().cloned().fold(f64::MAX, f64::min);
        assert!(
            amp < 1e-6 * ref_amp,
            "residual amplitude {amp} vs reference {ref_amp}"
        );
    }

    #[test]
    fn stroboscopic_identity_constant_expected_counts() {
        // f_ac * t_s and f_ac * t_l both integer: every exposure identical.
        let tone = AcTone::new(1e-9, 5120.0, 0.3).unwrap();
        let config = ExperimentConfig {
            field: AcField::single(tone),
            block: Xy8Block::new(8, 0.5 / 5120.0).unwrap(),
            ensemble: NvEnsemble::new(3e-6, 2.8024e10, 0.3).unwrap(),
            schedule: Schedule::new(2f64.powi(-10), 4, 2f64.powi(-8), 64).unwrap(),
            camera: test_camera(NoiseMode::None),
            mode: ProtocolMode::Iqdyne,
        };
        assert_eq!(tone.frequency_hz * config.schedule.t_s_s(), 5.0);
        let trace = run_trace(&config).unwrap();
        for c in &trace.counts {
            assert_eq!(*c, trace.counts[0]);
        }
    }

    #[test]
    fn expected_trace_matches_bruteforce_route() {
        let config = base_config(137.0, NoiseMode::None);
        let trace = run_trace(&config).unwrap();
        let schedule = &config.schedule;
        for (k, count) in trace.counts.iter().enumerate().step_by(97) {
            let mut ideal = 0.0;
            for tone in config.field.tones() {
                let phase = phase_at_exposure(tone, schedule, k as u64);
                let shifted = AcTone::new(tone.amplitude_t, tone.frequency_hz, phase).unwrap();
                ideal += exposure_signal_bruteforce(
                    &AcField::single(shifted),
                    &config.block,
                    &config.ensemble,
                    schedule,
                    0.0,
                )
                .unwrap();
            }
            let expected = config.camera.expected_count(ideal, schedule.n_rep()).unwrap();
            let peak = 100.0
                * xy8_amplitude(&config.field.tones()[0], &config.block, &config.ensemble)
                    .unwrap();
            assert!(
                (count - expected).abs() <= 1e-9 * peak * 500.0,
                "exposure {k}: {count} vs {expected}"
            );
        }
    }

    #[test]
    fn time_bookkeeping_is_exact() {
        let config = base_config(50.0, NoiseMode::None);
        let trace = run_trace(&config).unwrap();
        let s = trace.schedule;
        assert_eq!(
            s.t_tot_s(),
            f64::from(s.n_exposures()) * (f64::from(s.n_rep()) * s.t_s_s() + s.t_read_s())
        );
    }

    #[test]
    fn single_pixel_grid_matches_run_trace() {
        let config = base_config(50.0, NoiseMode::Full);
        let wf = WideFieldConfig {
            base: config.clone(),
            rows: 1,
            cols: 1,
            field_inhomogeneity_sigma_hz: 0.0,
            amplitude_inhomogeneity_rel_sigma: 0.0,
        };
        let grid = run_widefield(&wf).unwrap();
        let single = run_trace(&config).unwrap();
        assert_eq!(grid.pixels[0].trace, single);
        assert_eq!(grid.pixels[0].frequency_offset_hz, 0.0);
        assert_eq!(grid.pixels[0].amplitude_scale, 1.0);
    }

    #[test]
    fn pixels_are_independent_of_grid_shape() {
        let mut config = base_config(50.0, NoiseMode::Full);
        config.schedule = Schedule::new(13.5e-6, 100, 3e-3, 64).unwrap();
        let make = |rows, cols| WideFieldConfig {
            base: config.clone(),
            rows,
            cols,
            field_inhomogeneity_sigma_hz: 0.2,
            amplitude_inhomogeneity_rel_sigma: 0.01,
        };
        // Same flat pixel index -> same trace, whatever the grid shape.
        let a = run_widefield(&make(2, 6)).unwrap();
        let b = run_widefield(&make(4, 3)).unwrap();
        for (pa, pb) in a.pixels.iter().zip(&b.pixels) {
            assert_eq!(pa.trace, pb.trace);
            assert_eq!(pa.frequency_offset_hz, pb.frequency_offset_hz);
        }
    }

    #[test]
    fn widefield_reproducible_across_thread_counts() {
        let mut config = base_config(50.0, NoiseMode::Full);
        config.schedule = Schedule::new(13.5e-6, 100, 3e-3, 64).unwrap();
        let wf = WideFieldConfig {
            base: config,
            rows: 4,
            cols: 4,
            field_inhomogeneity_sigma_hz: 0.1,
            amplitude_inhomogeneity_rel_sigma: 0.02,
        };
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool8 = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = pool1.install(|| run_widefield(&wf)).unwrap();
        let b = pool8.install(|| run_widefield(&wf)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn direct_mode_requires_single_repetition() {
        let mut config = base_config(50.0, NoiseMode::Full);
        config.mode = ProtocolMode::DirectQdyne;
        assert!(config.validate().is_err());
    }
}
