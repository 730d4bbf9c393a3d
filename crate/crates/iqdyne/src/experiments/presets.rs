//! Named experiment presets: baseline configurations and the computations
//! behind each emitted figure.

use crate::acquisition::{run_trace, run_widefield, ProtocolMode};
use crate::analysis::{
    analyze_trace, compute_snr_joint, eta_model, fit_eta_curve, EtaCurveFit, PipelineOutcome,
};
use crate::signal::dirichlet_z;
use crate::camera::PixelTrace;
use crate::config::{self, RawConfig, ResolvedConfig};
use crate::error::{Error, Result};
use crate::signal;
use rayon::prelude::*;
use std::str::FromStr;

/// The built-in presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Fig2aSpectra,
    Fig2bEtaVsNrep,
    Fig2cTwoTone,
    Fig2dWidefieldHist,
    Fig3DetuningSweep,
    Fig4PerformanceMap,
}

impl PresetName {
    pub const ALL: [PresetName; 6] = [
        PresetName::Fig2aSpectra,
        PresetName::Fig2bEtaVsNrep,
        PresetName::Fig2cTwoTone,
        PresetName::Fig2dWidefieldHist,
        PresetName::Fig3DetuningSweep,
        PresetName::Fig4PerformanceMap,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Fig2aSpectra => "fig2a_spectra",
            PresetName::Fig2bEtaVsNrep => "fig2b_eta_vs_nrep",
            PresetName::Fig2cTwoTone => "fig2c_two_tone",
            PresetName::Fig2dWidefieldHist => "fig2d_widefield_hist",
            PresetName::Fig3DetuningSweep => "fig3_detuning_sweep",
            PresetName::Fig4PerformanceMap => "fig4_performance_map",
        }
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

impl std::fmt::Display for PresetName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Baseline raw config of a preset, before any user override.
pub fn preset_raw(preset: PresetName) -> RawConfig {
    let mut raw = config::default_config();
    match preset {
        // The shared defaults (tone on the sampling lock, alias on bin 218
        // at 1000 points, 5 uT test amplitude) are already right for the
        // spectra comparison, the performance map and the detuning sweep.
        PresetName::Fig2aSpectra
        | PresetName::Fig4PerformanceMap
        | PresetName::Fig3DetuningSweep => {}
        PresetName::Fig2bEtaVsNrep => {
            // The direct (n_rep = 1) point needs a clearly detectable peak
            // to show its departure from the dead-time model, so this
            // preset records four times more exposures.
            let schedule = raw.schedule.as_mut().expect("schedule defaults");
            schedule.n_exposures = Some(4000);
            let analysis = raw.analysis.as_mut().expect("analysis defaults");
            analysis.picket_min = Some(3900);
            analysis.picket_max = Some(4000);
        }
        PresetName::Fig2cTwoTone => {
            set_tone_amplitude(&mut raw, 2e-6);
            let tones = raw
                .field
                .as_mut()
                .and_then(|f| f.tones.as_mut())
                .expect("default config has tones");
            let mut second = tones[0].clone();
            second.frequency_hz = second.frequency_hz.map(|f| f + 1.0);
            tones.push(second);
            // A longer exposure cycle narrows the bins so the 1 Hz pair
            // lands ~8 bins apart; the leakage tails then barely overlap
            // and the iterative fit stays unbiased.
            raw.schedule.as_mut().expect("schedule defaults").n_rep = Some(400);
            raw.analysis.as_mut().expect("analysis defaults").max_peaks = Some(2);
        }
        PresetName::Fig2dWidefieldHist => {
            set_tone_amplitude(&mut raw, 2e-6);
            // Land the alias 0.4 bins off the 1000-point grid so every
            // pixel fits the peak in the smooth leakage regime, and keep a
            // common fixed data length across pixels.
            let t_read = raw
                .schedule
                .as_ref()
                .and_then(|s| s.t_read_s)
                .expect("schedule defaults");
            let t_l = 100.0 * 13.5e-6 + t_read;
            if let Some(tones) = raw.field.as_mut().and_then(|f| f.tones.as_mut()) {
                tones[0].frequency_hz = Some(10.0e6 / 3.0 + 0.4 / (1000.0 * t_l));
            }
            let analysis = raw.analysis.as_mut().expect("analysis defaults");
            analysis.picket_min = Some(1000);
            analysis.picket_max = Some(1000);
            raw.widefield = Some(config::RawWidefield {
                rows: Some(16),
                cols: Some(16),
                field_inhomogeneity_sigma_hz: Some(0.0),
                amplitude_inhomogeneity_rel_sigma: Some(0.0),
            });
        }
    }
    raw
}

fn set_tone_amplitude(raw: &mut RawConfig, amplitude_t: f64) {
    if let Some(tones) = raw.field.as_mut().and_then(|f| f.tones.as_mut()) {
        for t in tones {
            t.amplitude_t = Some(amplitude_t);
        }
    }
}

/// Derive the direct (n_rep = 1) variant of a config, keeping the total
/// exposure count.
pub fn direct_variant(raw: &RawConfig) -> RawConfig {
    let mut direct = raw.clone();
    direct.mode = Some(ProtocolMode::DirectQdyne);
    if let Some(s) = direct.schedule.as_mut() {
        s.n_rep = Some(1);
    }
    direct
}

/// One protocol run of the comparison figure.
#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub label: &'static str,
    pub resolved: ResolvedConfig,
    pub trace: PixelTrace,
    pub outcome: PipelineOutcome,
}

fn run_protocol(label: &'static str, resolved: ResolvedConfig) -> Result<ProtocolRun> {
    let trace = run_trace(&resolved.experiment)?;
    let b_z = resolved.experiment.field.primary_tone().amplitude_t;
    let area = resolved.experiment.camera.pixel_area_um2;
    let outcome = analyze_trace(&trace, &resolved.analysis, b_z, area)?;
    Ok(ProtocolRun {
        label,
        resolved,
        trace,
        outcome,
    })
}

/// Direct vs iterated protocol on the same tone and camera.
#[derive(Debug, Clone)]
pub struct SpectraComparison {
    pub direct: ProtocolRun,
    pub iqdyne: ProtocolRun,
}

impl SpectraComparison {
    /// How much the iteration improves the sensitivity.
    pub fn eta_ratio(&self) -> f64 {
        self.direct.outcome.report.eta_t_per_sqrthz / self.iqdyne.outcome.report.eta_t_per_sqrthz
    }
}

pub fn run_fig2a(raw: &RawConfig) -> Result<SpectraComparison> {
    let iq = config::resolve(raw)?;
    let direct = config::resolve(&direct_variant(raw))?;
    Ok(SpectraComparison {
        direct: run_protocol("direct_qdyne", direct)?,
        iqdyne: run_protocol("iqdyne", iq)?,
    })
}

/// One point of the sensitivity-vs-iterations curve.
#[derive(Debug, Clone)]
pub struct EtaPoint {
    pub n_rep: u32,
    pub snr: f64,
    pub eta_t_per_sqrthz: f64,
    pub noise_regime: String,
    /// Whether the point entered the asymptote fit (shot-dominated only).
    pub used_in_fit: bool,
    /// Fitted-model value at this n_rep.
    pub eta_fit_t_per_sqrthz: f64,
}

#[derive(Debug, Clone)]
pub struct EtaCurveResult {
    pub points: Vec<EtaPoint>,
    pub fit: EtaCurveFit,
    pub t_read_s: f64,
    pub t_s_s: f64,
}

pub const ETA_CURVE_N_REPS: [u32; 7] = [1, 25, 50, 100, 200, 400, 1000];

pub fn run_fig2b(raw: &RawConfig) -> Result<EtaCurveResult> {
    let mut runs = Vec::new();
    for n_rep in ETA_CURVE_N_REPS {
        let mut over = raw.clone();
        if let Some(s) = over.schedule.as_mut() {
            s.n_rep = Some(n_rep);
        } else {
            over.schedule = Some(config::RawSchedule {
                n_rep: Some(n_rep),
                ..Default::default()
            });
        }
        if n_rep == 1 {
            over.mode = Some(ProtocolMode::DirectQdyne);
        }
        let resolved = config::resolve(&over)?;
        let trace = run_trace(&resolved.experiment)?;
        let b_z = resolved.experiment.field.primary_tone().amplitude_t;
        let area = resolved.experiment.camera.pixel_area_um2;
        let outcome = analyze_trace(&trace, &resolved.analysis, b_z, area)?;
        let regime = resolved.experiment.camera.noise_regime(n_rep);
        runs.push((n_rep, outcome, regime, resolved));
    }

    let t_read_s = runs[0].3.experiment.schedule.t_read_s();
    let t_s_s = runs[0].3.experiment.schedule.t_s_s();
    let fit_points: Vec<(f64, f64)> = runs
        .iter()
        .filter(|(_, _, regime, _)| *regime == crate::camera::NoiseRegime::ShotDominated)
        .map(|(n, outcome, _, _)| (f64::from(*n), outcome.report.eta_t_per_sqrthz))
        .collect();
    let fit = fit_eta_curve(&fit_points, t_read_s, t_s_s)?;

    let points = runs
        .into_iter()
        .map(|(n_rep, outcome, regime, _)| EtaPoint {
            n_rep,
            snr: outcome.snr,
            eta_t_per_sqrthz: outcome.report.eta_t_per_sqrthz,
            noise_regime: regime.to_string(),
            used_in_fit: regime == crate::camera::NoiseRegime::ShotDominated,
            eta_fit_t_per_sqrthz: eta_model(fit.eta_infinity, f64::from(n_rep), t_read_s, t_s_s),
        })
        .collect();
    Ok(EtaCurveResult {
        points,
        fit,
        t_read_s,
        t_s_s,
    })
}

/// A fitted peak of the two-tone preset.
#[derive(Debug, Clone, Copy)]
pub struct PeakSummary {
    pub center_frequency_hz: f64,
    pub frequency_uncertainty_hz: f64,
    pub height: f64,
    pub snr: f64,
}

#[derive(Debug, Clone)]
pub struct TwoToneResult {
    pub trace: PixelTrace,
    pub outcome: PipelineOutcome,
    pub peaks: Vec<PeakSummary>,
    /// Expected alias frequencies of the configured tones.
    pub expected_aliases_hz: Vec<f64>,
}

impl TwoToneResult {
    /// Separation of the two strongest fitted peaks, in hertz.
    pub fn separation_hz(&self) -> Option<f64> {
        (self.peaks.len() >= 2)
            .then(|| (self.peaks[0].center_frequency_hz - self.peaks[1].center_frequency_hz).abs())
    }
}

pub fn run_fig2c(raw: &RawConfig) -> Result<TwoToneResult> {
    let resolved = config::resolve(raw)?;
    let trace = run_trace(&resolved.experiment)?;
    let b_z = resolved.experiment.field.primary_tone().amplitude_t;
    let area = resolved.experiment.camera.pixel_area_um2;
    let outcome = analyze_trace(&trace, &resolved.analysis, b_z, area)?;
    let peaks = outcome
        .fits
        .iter()
        .enumerate()
        .map(|(i, f)| PeakSummary {
            center_frequency_hz: f.center_frequency_hz,
            frequency_uncertainty_hz: f.frequency_uncertainty_hz,
            height: f.height,
            snr: compute_snr_joint(&outcome.spectrum, &outcome.fits, i),
        })
        .collect();
    let t_l = resolved.experiment.schedule.t_l_s();
    let expected_aliases_hz = resolved
        .experiment
        .field
        .tones()
        .iter()
        .map(|t| signal::alias_frequency_hz(t.frequency_hz, t_l))
        .collect();
    Ok(TwoToneResult {
        trace,
        outcome,
        peaks,
        expected_aliases_hz,
    })
}

/// One pixel of the wide-field histogram.
#[derive(Debug, Clone, Copy)]
pub struct PixelFitRow {
    pub row: u32,
    pub col: u32,
    pub center_frequency_hz: f64,
    pub frequency_uncertainty_hz: f64,
    pub snr: f64,
    /// The frequency offset actually injected into this pixel.
    pub true_offset_hz: f64,
}

#[derive(Debug, Clone)]
pub struct WideFieldHistResult {
    pub pixels: Vec<PixelFitRow>,
    /// Standard deviation of the fitted centers across pixels.
    pub center_spread_hz: f64,
    /// Mean reported per-pixel fit uncertainty.
    pub mean_uncertainty_hz: f64,
    pub injected_sigma_hz: f64,
    /// The simulated grid itself, for trace persistence.
    pub grid: crate::acquisition::WideFieldRun,
}

pub fn run_fig2d(raw: &RawConfig) -> Result<WideFieldHistResult> {
    let resolved = config::resolve(raw)?;
    let wf = resolved.widefield_config().ok_or_else(|| Error::InvalidInput {
        field: "widefield",
        message: "this preset requires a [widefield] section".into(),
    })?;
    let grid = run_widefield(&wf)?;
    let b_z = resolved.experiment.field.primary_tone().amplitude_t;
    let area = resolved.experiment.camera.pixel_area_um2;
    let analysis = resolved.analysis;

    let pixels: Result<Vec<PixelFitRow>> = grid
        .pixels
        .par_iter()
        .map(|px| {
            let outcome = analyze_trace(&px.trace, &analysis, b_z, area)?;
            Ok(PixelFitRow {
                row: px.row,
                col: px.col,
                center_frequency_hz: outcome.fits[0].center_frequency_hz,
                frequency_uncertainty_hz: outcome.fits[0].frequency_uncertainty_hz,
                snr: outcome.snr,
                true_offset_hz: px.frequency_offset_hz,
            })
        })
        .collect();
    let pixels = pixels?;

    let n = pixels.len() as f64;
    let mean_center = pixels.iter().map(|p| p.center_frequency_hz).sum::<f64>() / n;
    let center_spread_hz = (pixels
        .iter()
        .map(|p| (p.center_frequency_hz - mean_center).powi(2))
        .sum::<f64>()
        / (n - 1.0))
        .sqrt();
    let mean_uncertainty_hz = pixels
        .iter()
        .map(|p| p.frequency_uncertainty_hz)
        .sum::<f64>()
        / n;
    Ok(WideFieldHistResult {
        pixels,
        center_spread_hz,
        mean_uncertainty_hz,
        injected_sigma_hz: wf.field_inhomogeneity_sigma_hz,
        grid,
    })
}

/// One detuning point of the frequency-response sweep.
#[derive(Debug, Clone, Copy)]
pub struct DetuningRow {
    pub detuning_hz: f64,
    /// Measured SNR; 0 when no peak could be fitted.
    pub snr: f64,
    pub alias_frequency_hz: f64,
    /// |Z(detuning)| / n_rep, the predicted relative response.
    pub envelope_rel: f64,
}

#[derive(Debug, Clone)]
pub struct DetuningSweepResult {
    pub rows: Vec<DetuningRow>,
    /// The lock frequency the detunings are measured from.
    pub resonance_hz: f64,
}

/// Detuning grid: 7 Hz offset, 20 Hz steps, 100 points (7..=1987 Hz). The
/// offset keeps every point's alias clear of DC and the fold.
pub fn detuning_grid_hz() -> Vec<f64> {
    (0..100).map(|k| 7.0 + 20.0 * k as f64).collect()
}

pub fn run_fig3(raw: &RawConfig) -> Result<DetuningSweepResult> {
    let base = config::resolve(raw)?;
    let schedule = base.experiment.schedule;
    let block_tau = base.experiment.block.tau_s();
    // Lock point: the multiple of 1/t_s nearest the block resonance.
    let f_target = 0.5 / block_tau;
    let resonance_hz = (f_target * schedule.t_s_s()).round() / schedule.t_s_s();

    let snapshot = base.snapshot.clone();
    let grid = detuning_grid_hz();
    let rows: Result<Vec<DetuningRow>> = grid
        .par_iter()
        .map(|&detuning| {
            let mut over = snapshot.clone();
            if let Some(tones) = over.field.as_mut().and_then(|f| f.tones.as_mut()) {
                tones[0].frequency_hz = Some(resonance_hz + detuning);
            }
            let resolved = config::resolve(&over)?;
            let trace = run_trace(&resolved.experiment)?;
            let b_z = resolved.experiment.field.primary_tone().amplitude_t;
            let area = resolved.experiment.camera.pixel_area_um2;
            let snr = match analyze_trace(&trace, &resolved.analysis, b_z, area) {
                Ok(outcome) => outcome.snr,
                Err(_) => 0.0,
            };
            Ok(DetuningRow {
                detuning_hz: detuning,
                snr,
                alias_frequency_hz: signal::alias_frequency_hz(
                    resonance_hz + detuning,
                    schedule.t_l_s(),
                ),
                envelope_rel: dirichlet_z(detuning, schedule.n_rep(), schedule.t_s_s()).abs()
                    / f64::from(schedule.n_rep()),
            })
        })
        .collect();
    Ok(DetuningSweepResult {
        rows: rows?,
        resonance_hz,
    })
}

/// Contiguous sub-threshold runs of the measured SNR curve; used to locate
/// the insensitive dips.
pub fn locate_dips(rows: &[DetuningRow], threshold_rel: f64) -> Vec<f64> {
    let max_snr = rows.iter().map(|r| r.snr).fold(0.0, f64::max);
    let threshold = threshold_rel * max_snr;
    let mut dips = Vec::new();
    let mut current: Vec<f64> = Vec::new();
    for r in rows {
        if r.snr < threshold {
            current.push(r.detuning_hz);
        } else if !current.is_empty() {
            dips.push(current.iter().sum::<f64>() / current.len() as f64);
            current.clear();
        }
    }
    if !current.is_empty() {
        dips.push(current.iter().sum::<f64>() / current.len() as f64);
    }
    dips
}

/// One protocol of the performance map.
#[derive(Debug, Clone)]
pub struct PerformancePoint {
    pub protocol: String,
    pub eta_t_per_sqrthz: f64,
    pub resolution_hz: f64,
}

/// Reference figures of a conventional triggered-XY8 measurement on the
/// same setup class (fixed literature values, not simulated).
pub const CONVENTIONAL_XY8_ETA_T_PER_SQRTHZ: f64 = 97e-9;
pub const CONVENTIONAL_XY8_RESOLUTION_HZ: f64 = 70e3;

#[derive(Debug, Clone)]
pub struct PerformanceMapResult {
    pub points: Vec<PerformancePoint>,
    pub comparison: SpectraComparison,
}

pub fn run_fig4(raw: &RawConfig) -> Result<PerformanceMapResult> {
    let comparison = run_fig2a(raw)?;
    let points = vec![
        PerformancePoint {
            protocol: "conventional_xy8".into(),
            eta_t_per_sqrthz: CONVENTIONAL_XY8_ETA_T_PER_SQRTHZ,
            resolution_hz: CONVENTIONAL_XY8_RESOLUTION_HZ,
        },
        PerformancePoint {
            protocol: "direct_qdyne".into(),
            eta_t_per_sqrthz: comparison.direct.outcome.report.eta_t_per_sqrthz,
            resolution_hz: comparison.direct.outcome.report.resolution_hz,
        },
        PerformancePoint {
            protocol: "iqdyne".into(),
            eta_t_per_sqrthz: comparison.iqdyne.outcome.report.eta_t_per_sqrthz,
            resolution_hz: comparison.iqdyne.outcome.report.resolution_hz,
        },
    ];
    Ok(PerformanceMapResult { points, comparison })
}
