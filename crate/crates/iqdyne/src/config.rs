//! Config file schema, defaults, merging and validation.
//!
//! Configs are a single TOML file with sections mirroring the domain types
//! (`[field]`, `[block]`, `[ensemble]`, `[schedule]`, `[camera]`,
//! `[analysis]`, optional `[widefield]`). Unknown keys are errors. Every
//! field is optional in the file; anything missing resolves from the preset
//! defaults, and validation reports all problems at once with field paths.

use crate::acquisition::{ExperimentConfig, ProtocolMode, WideFieldConfig};
use crate::analysis::AnalysisParams;
use crate::camera::{CameraModel, NoiseMode};
use crate::error::{ConfigErrors, Error, Result};
use crate::signal::{
    self, AcField, AcTone, NvEnsemble, Schedule, Xy8Block,
    ELECTRON_GYROMAGNETIC_RATIO_HZ_PER_T,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ProtocolMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<RawField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block: Option<RawBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<RawEnsemble>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<RawSchedule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub camera: Option<RawCamera>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analysis: Option<RawAnalysis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widefield: Option<RawWidefield>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawField {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tones: Option<Vec<RawTone>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawTone {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_phase_rad: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_pulses: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawEnsemble {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gyromagnetic_ratio_hz_per_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawSchedule {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_s_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_rep: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_read_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_exposures: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawCamera {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub photons_per_xy8: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub readout_noise_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub well_depth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pixel_area_um2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modulation_depth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawAnalysis {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picket_min: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picket_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_peaks: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawWidefield {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cols: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_inhomogeneity_sigma_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude_inhomogeneity_rel_sigma: Option<f64>,
}

/// Wide-field grid parameters of a resolved config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidefieldParams {
    pub rows: u32,
    pub cols: u32,
    pub field_inhomogeneity_sigma_hz: f64,
    pub amplitude_inhomogeneity_rel_sigma: f64,
}

/// A fully validated configuration plus its complete snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub experiment: ExperimentConfig,
    pub analysis: AnalysisParams,
    pub widefield: Option<WidefieldParams>,
    /// The config with every default materialized; re-resolving it yields
    /// the same resolved config.
    pub snapshot: RawConfig,
}

impl ResolvedConfig {
    pub fn widefield_config(&self) -> Option<WideFieldConfig> {
        self.widefield.map(|w| WideFieldConfig {
            base: self.experiment.clone(),
            rows: w.rows,
            cols: w.cols,
            field_inhomogeneity_sigma_hz: w.field_inhomogeneity_sigma_hz,
            amplitude_inhomogeneity_rel_sigma: w.amplitude_inhomogeneity_rel_sigma,
        })
    }

    /// Derived timing and response quantities, echoed by `validate`.
    pub fn derived(&self) -> DerivedQuantities {
        let e = &self.experiment;
        let s = &e.schedule;
        let tones = e
            .field
            .tones()
            .iter()
            .map(|t| ToneDerived {
                frequency_hz: t.frequency_hz,
                ts_over_tac: t.frequency_hz * s.t_s_s(),
                alias_frequency_hz: signal::alias_frequency_hz(t.frequency_hz, s.t_l_s()),
                delta_phi_rad: signal::delta_phi(t, s),
                accumulated_phase_rad: e.ensemble.accumulated_phase_rad(&e.block, t.amplitude_t),
            })
            .collect();
        DerivedQuantities {
            t_l_s: s.t_l_s(),
            t_tot_s: s.t_tot_s(),
            bandwidth_hz: signal::bandwidth_hz(s.n_rep(), s.t_s_s()),
            full_length_bin_width_hz: 1.0 / (f64::from(s.n_exposures()) * s.t_l_s()),
            noise_regime: e.camera.noise_regime(s.n_rep()).to_string(),
            tones,
        }
    }
}

/// Derived quantities of one tone.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneDerived {
    pub frequency_hz: f64,
    /// Sampling interval over tone period; integers mean phase lock.
    pub ts_over_tac: f64,
    pub alias_frequency_hz: f64,
    pub delta_phi_rad: f64,
    pub accumulated_phase_rad: f64,
}

/// Quantities derived from a resolved config.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedQuantities {
    pub t_l_s: f64,
    pub t_tot_s: f64,
    pub bandwidth_hz: f64,
    /// Bin width of a full-length spectrum, 1 / t_tot.
    pub full_length_bin_width_hz: f64,
    pub noise_regime: String,
    pub tones: Vec<ToneDerived>,
}

/// Baseline defaults: the standard iterated configuration (100 blocks per
/// exposure, 13.5 us sampling, ~3 ms readout, ~1000 exposures).
///
/// The tone sits exactly on the sampling lock (t_s = 45 tone periods), so
/// the intra-exposure comb is fully constructive at every n_rep. The
/// readout gap is deliberately 10000.218 tone periods: the 0.218-cycle
/// phase slip per exposure is what the undersampled record oscillates at,
/// and it lands the alias exactly on bin 218 of a 1000-point spectrum.
pub fn default_config() -> RawConfig {
    RawConfig {
        mode: Some(ProtocolMode::Iqdyne),
        field: Some(RawField {
            tones: Some(vec![RawTone {
                amplitude_t: Some(5e-6),
                frequency_hz: Some(10.0e6 / 3.0),
                initial_phase_rad: Some(0.0),
            }]),
        }),
        block: Some(RawBlock {
            n_pulses: Some(48),
            tau_s: Some(150e-9),
        }),
        ensemble: Some(RawEnsemble {
            t2_s: Some(3e-6),
            gyromagnetic_ratio_hz_per_t: Some(ELECTRON_GYROMAGNETIC_RATIO_HZ_PER_T),
            contrast: Some(0.15),
        }),
        schedule: Some(RawSchedule {
            t_s_s: Some(13.5e-6),
            n_rep: Some(100),
            t_read_s: Some(10000.218 * 300e-9),
            n_exposures: Some(1000),
        }),
        camera: Some(RawCamera {
            photons_per_xy8: Some(500.0),
            readout_noise_sigma: Some(1750f64.sqrt()),
            well_depth: Some(7e5),
            pixel_area_um2: Some(1.0),
            seed: Some(7),
            modulation_depth: Some(0.3),
            noise: Some(NoiseMode::Full),
        }),
        analysis: Some(RawAnalysis {
            picket_min: Some(900),
            picket_max: Some(1000),
            max_peaks: Some(1),
        }),
        widefield: None,
    }
}

/// Overlay `over` onto `base`, field by field; `over` wins where present.
pub fn merge(base: &RawConfig, over: &RawConfig) -> RawConfig {
    fn pick<T: Clone>(b: &Option<T>, o: &Option<T>) -> Option<T> {
        o.clone().or_else(|| b.clone())
    }
    RawConfig {
        mode: pick(&base.mode, &over.mode),
        field: match (&base.field, &over.field) {
            (Some(b), Some(o)) => Some(RawField {
                tones: pick(&b.tones, &o.tones),
            }),
            (b, o) => o.clone().or_else(|| b.clone()),
        },
        block: match (&base.block, &over.block) {
            (Some(b), Some(o)) => Some(RawBlock {
                n_pulses: pick(&b.n_pulses, &o.n_pulses),
                tau_s: pick(&b.tau_s, &o.tau_s),
            }),
            (b, o) => o.clone().or_else(|| b.clone()),
        },
        ensemble: match (&base.ensemble, &over.ensemble) {
            (Some(b), Some(o)) => Some(RawEnsemble {
                t2_s: pick(&b.t2_s, &o.t2_s),
                gyromagnetic_ratio_hz_per_t: pick(
                    &b.gyromagnetic_ratio_hz_per_t,
                    &o.gyromagnetic_ratio_hz_per_t,
                ),
                contrast: pick(&b.contrast, &o.contrast),
            }),
            (b, o) => o.clone().or_else(|| b.clone()),
        },
        schedule: match (&base.schedule, &over.schedule) {
            (Some(b), Some(o)) => Some(RawSchedule {
                t_s_s: pick(&b.t_s_s, &o.t_s_s),
                n_rep: pick(&b.n_rep, &o.n_rep),
                t_read_s: pick(&b.t_read_s, &o.t_read_s),
                n_exposures: pick(&b.n_exposures, &o.n_exposures),
            }),
            (b, o) => o.clone().or_else(|| b.clone()),
        },
        camera: match (&base.camera, &over.camera) {
            (Some(b), Some(o)) => Some(RawCamera {
                photons_per_xy8: pick(&b.photons_per_xy8, &o.photons_per_xy8),
                readout_noise_sigma: pick(&b.readout_noise_sigma, &o.readout_noise_sigma),
                well_depth: pick(&b.well_depth, &o.well_depth),
                pixel_area_um2: pick(&b.pixel_area_um2, &o.pixel_area_um2),
                seed: pick(&b.seed, &o.seed),
                modulation_depth: pick(&b.modulation_depth, &o.modulation_depth),
                noise: pick(&b.noise, &o.noise),
            }),
            (b, o) => o.clone().or_else(|| b.clone()),
        },
        analysis: match (&base.analysis, &over.analysis) {
            (Some(b), Some(o)) => Some(RawAnalysis {
                picket_min: pick(&b.picket_min, &o.picket_min),
                picket_max: pick(&b.picket_max, &o.picket_max),
                max_peaks: pick(&b.max_peaks, &o.max_peaks),
            }),
            (b, o) => o.clone().or_else(|| b.clone()),
        },
        widefield: match (&base.widefield, &over.widefield) {
            (Some(b), Some(o)) => Some(RawWidefield {
                rows: pick(&b.rows, &o.rows),
                cols: pick(&b.cols, &o.cols),
                field_inhomogeneity_sigma_hz: pick(
                    &b.field_inhomogeneity_sigma_hz,
                    &o.field_inhomogeneity_sigma_hz,
                ),
                amplitude_inhomogeneity_rel_sigma: pick(
                    &b.amplitude_inhomogeneity_rel_sigma,
                    &o.amplitude_inhomogeneity_rel_sigma,
                ),
            }),
            (b, o) => o.clone().or_else(|| b.clone()),
        },
    }
}

/// Parse a config file. The file may also be a run manifest, in which case
/// its embedded `resolved_config` section is used.
pub fn load_raw(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_raw(&text)
}

/// Serialize a config as TOML text.
pub fn to_toml_string(raw: &RawConfig) -> Result<String> {
    toml::to_string(raw).map_err(|e| Error::ConfigParse(e.to_string()))
}

/// Parse config TOML; accepts a bare config or a manifest wrapper.
pub fn parse_raw(text: &str) -> Result<RawConfig> {
    #[derive(Deserialize)]
    struct ManifestShim {
        resolved_config: RawConfig,
    }
    if let Ok(shim) = toml::from_str::<ManifestShim>(text) {
        return Ok(shim.resolved_config);
    }
    toml::from_str::<RawConfig>(text).map_err(|e| Error::ConfigParse(e.to_string()))
}

/// Validate a raw config (with defaults from [`default_config`] filled in
/// for anything missing) and build the domain objects. All problems are
/// reported together with their field paths.
pub fn resolve(raw: &RawConfig) -> Result<ResolvedConfig> {
    let merged = merge(&default_config(), raw);
    let mut errs = ConfigErrors::default();

    fn demand<T: Clone>(errs: &mut ConfigErrors, path: &str, value: &Option<T>, fallback: T) -> T {
        match value {
            Some(v) => v.clone(),
            None => {
                errs.push(path, "missing value");
                fallback
            }
        }
    }

    // Tones.
    let raw_tones = merged
        .field
        .as_ref()
        .and_then(|f| f.tones.clone())
        .unwrap_or_default();
    let mut tones = Vec::new();
    if raw_tones.is_empty() {
        errs.push("field.tones", "at least one tone is required");
    }
    for (i, t) in raw_tones.iter().enumerate() {
        let amplitude = demand(
            &mut errs,
            &format!("field.tones[{i}].amplitude_t"),
            &t.amplitude_t,
            0.0,
        );
        let frequency = demand(
            &mut errs,
            &format!("field.tones[{i}].frequency_hz"),
            &t.frequency_hz,
            1.0,
        );
        let phase = t.initial_phase_rad.unwrap_or(0.0);
        match AcTone::new(amplitude, frequency, phase) {
            Ok(tone) => tones.push(tone),
            Err(e) => errs.push(format!("field.tones[{i}]"), e.to_string()),
        }
    }
    let field = match AcField::new(tones) {
        Ok(f) => Some(f),
        Err(e) => {
            if !raw_tones.is_empty() {
                errs.push("field.tones", e.to_string());
            }
            None
        }
    };

    // Block.
    let rb = merged.block.clone().unwrap_or_default();
    let n_pulses = demand(&mut errs, "block.n_pulses", &rb.n_pulses, 8);
    let tau_s = demand(&mut errs, "block.tau_s", &rb.tau_s, 1e-9);
    let block = match Xy8Block::new(n_pulses, tau_s) {
        Ok(b) => Some(b),
        Err(e) => {
            errs.push("block", e.to_string());
            None
        }
    };

    // Ensemble.
    let re = merged.ensemble.clone().unwrap_or_default();
    let ensemble = match NvEnsemble::new(
        demand(&mut errs, "ensemble.t2_s", &re.t2_s, 1e-6),
        demand(
            &mut errs,
            "ensemble.gyromagnetic_ratio_hz_per_t",
            &re.gyromagnetic_ratio_hz_per_t,
            ELECTRON_GYROMAGNETIC_RATIO_HZ_PER_T,
        ),
        demand(&mut errs, "ensemble.contrast", &re.contrast, 0.1),
    ) {
        Ok(e) => Some(e),
        Err(e) => {
            errs.push("ensemble", e.to_string());
            None
        }
    };

    // Schedule.
    let rs = merged.schedule.clone().unwrap_or_default();
    let schedule = match Schedule::new(
        demand(&mut errs, "schedule.t_s_s", &rs.t_s_s, 1e-6),
        demand(&mut errs, "schedule.n_rep", &rs.n_rep, 1),
        demand(&mut errs, "schedule.t_read_s", &rs.t_read_s, 0.0),
        demand(&mut errs, "schedule.n_exposures", &rs.n_exposures, 2),
    ) {
        Ok(s) => Some(s),
        Err(e) => {
            errs.push("schedule", e.to_string());
            None
        }
    };

    // Camera.
    let rc = merged.camera.clone().unwrap_or_default();
    let camera = CameraModel {
        photons_per_xy8: demand(&mut errs, "camera.photons_per_xy8", &rc.photons_per_xy8, 1.0),
        readout_noise_sigma: demand(
            &mut errs,
            "camera.readout_noise_sigma",
            &rc.readout_noise_sigma,
            0.0,
        ),
        well_depth: demand(&mut errs, "camera.well_depth", &rc.well_depth, 1.0),
        pixel_area_um2: demand(&mut errs, "camera.pixel_area_um2", &rc.pixel_area_um2, 1.0),
        seed: rc.seed.unwrap_or(0),
        modulation_depth: demand(
            &mut errs,
            "camera.modulation_depth",
            &rc.modulation_depth,
            0.3,
        ),
        noise: rc.noise.unwrap_or(NoiseMode::Full),
    };
    if let Err(Error::InvalidInput { field, message }) = camera.validate() {
        errs.push(field, message);
    }

    let mode = demand(&mut errs, "mode", &merged.mode, ProtocolMode::Iqdyne);

    // Analysis.
    let ra = merged.analysis.clone().unwrap_or_default();
    let analysis = AnalysisParams {
        picket_min: demand(&mut errs, "analysis.picket_min", &ra.picket_min, 2) as usize,
        picket_max: demand(&mut errs, "analysis.picket_max", &ra.picket_max, 2) as usize,
        max_peaks: demand(&mut errs, "analysis.max_peaks", &ra.max_peaks, 1) as usize,
    };
    if analysis.picket_min < 2 || analysis.picket_min > analysis.picket_max {
        errs.push(
            "analysis.picket_min",
            format!(
                "picket range [{}, {}] is not an ordered range with min >= 2",
                analysis.picket_min, analysis.picket_max
            ),
        );
    }
    if analysis.max_peaks < 1 {
        errs.push("analysis.max_peaks", "must be >= 1");
    }
    if let Some(s) = &schedule {
        if analysis.picket_max > s.n_exposures() as usize {
            errs.push(
                "analysis.picket_max",
                format!(
                    "exceeds n_exposures ({} > {})",
                    analysis.picket_max,
                    s.n_exposures()
                ),
            );
        }
    }

    // Widefield.
    let widefield = merged.widefield.as_ref().map(|w| {
        let rows = demand(&mut errs, "widefield.rows", &w.rows, 1);
        let cols = demand(&mut errs, "widefield.cols", &w.cols, 1);
        let fsig = w.field_inhomogeneity_sigma_hz.unwrap_or(0.0);
        let asig = w.amplitude_inhomogeneity_rel_sigma.unwrap_or(0.0);
        if rows < 1 || cols < 1 {
            errs.push("widefield", "grid must be at least 1x1");
        }
        if fsig < 0.0 || asig < 0.0 {
            errs.push("widefield", "inhomogeneity sigmas must be >= 0");
        }
        WidefieldParams {
            rows,
            cols,
            field_inhomogeneity_sigma_hz: fsig,
            amplitude_inhomogeneity_rel_sigma: asig,
        }
    });

    let (Some(field), Some(block), Some(ensemble), Some(schedule)) =
        (field, block, ensemble, schedule)
    else {
        return Err(Error::Config(errs));
    };

    let experiment = ExperimentConfig {
        field,
        block,
        ensemble,
        schedule,
        camera,
        mode,
    };
    if let Err(Error::InvalidInput { field, message }) = experiment.validate() {
        errs.push(field, message);
    }
    // The exposure signal must be evaluable for every tone (resonance and
    // linear-regime guards).
    for (i, tone) in experiment.field.tones().iter().enumerate() {
        if let Err(e) = signal::xy8_amplitude(tone, &experiment.block, &experiment.ensemble) {
            errs.push(format!("field.tones[{i}]"), e.to_string());
        }
    }
    errs.into_result()?;

    let snapshot = snapshot_of(&experiment, &analysis, &widefield);
    Ok(ResolvedConfig {
        experiment,
        analysis,
        widefield,
        snapshot,
    })
}

/// Rebuild a complete raw config from resolved domain values.
fn snapshot_of(e: &ExperimentConfig, a: &AnalysisParams, w: &Option<WidefieldParams>) -> RawConfig {
    RawConfig {
        mode: Some(e.mode),
        field: Some(RawField {
            tones: Some(
                e.field
                    .tones()
                    .iter()
                    .map(|t| RawTone {
                        amplitude_t: Some(t.amplitude_t),
                        frequency_hz: Some(t.frequency_hz),
                        initial_phase_rad: Some(t.initial_phase_rad),
                    })
                    .collect(),
            ),
        }),
        block: Some(RawBlock {
            n_pulses: Some(e.block.n_pulses()),
            tau_s: Some(e.block.tau_s()),
        }),
        ensemble: Some(RawEnsemble {
            t2_s: Some(e.ensemble.t2_s),
            gyromagnetic_ratio_hz_per_t: Some(e.ensemble.gyromagnetic_ratio_hz_per_t),
            contrast: Some(e.ensemble.contrast),
        }),
        schedule: Some(RawSchedule {
            t_s_s: Some(e.schedule.t_s_s()),
            n_rep: Some(e.schedule.n_rep()),
            t_read_s: Some(e.schedule.t_read_s()),
            n_exposures: Some(e.schedule.n_exposures()),
        }),
        camera: Some(RawCamera {
            photons_per_xy8: Some(e.camera.photons_per_xy8),
            readout_noise_sigma: Some(e.camera.readout_noise_sigma),
            well_depth: Some(e.camera.well_depth),
            pixel_area_um2: Some(e.camera.pixel_area_um2),
            seed: Some(e.camera.seed),
            modulation_depth: Some(e.camera.modulation_depth),
            noise: Some(e.camera.noise),
        }),
        analysis: Some(RawAnalysis {
            picket_min: Some(a.picket_min as u32),
            picket_max: Some(a.picket_max as u32),
            max_peaks: Some(a.max_peaks as u32),
        }),
        widefield: w.as_ref().map(|w| RawWidefield {
            rows: Some(w.rows),
            cols: Some(w.cols),
            field_inhomogeneity_sigma_hz: Some(w.field_inhomogeneity_sigma_hz),
            amplitude_inhomogeneity_rel_sigma: Some(w.amplitude_inhomogeneity_rel_sigma),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_resolves_with_expected_timing() {
        let resolved = resolve(&RawConfig::default()).unwrap();
        let d = resolved.derived();
        assert!((d.t_l_s - 4.35e-3).abs() < 1e-6);
        assert!((d.t_tot_s - 4.35).abs() < 1e-3);
        // Sampling interval is 45 tone periods: the phase lock.
        assert!((d.tones[0].ts_over_tac - 45.0).abs() < 1e-9);
        assert!(d.tones[0].delta_phi_rad.abs() < 1e-9);
        assert!((d.bandwidth_hz - 740.7407).abs() < 1e-3);
        // The readout slip aliases the tone onto bin 218 of the 1000-point
        // spectrum (~50 Hz).
        assert!((d.tones[0].alias_frequency_hz * 1000.0 * d.t_l_s - 218.0).abs() < 1e-6);
        assert!((d.tones[0].alias_frequency_hz - 50.114).abs() < 0.01);
    }

    #[test]
    fn zero_sampling_interval_is_rejected_with_field_path() {
        let raw = RawConfig {
            schedule: Some(RawSchedule {
                t_s_s: Some(0.0),
                ..Default::default()
            }),
            ..Default::default()
        };
        let err = resolve(&raw).unwrap_err();
        let Error::Config(errs) = err else {
            panic!("expected config errors")
        };
        assert!(errs
            .0
            .iter()
            .any(|e| e.path == "schedule" && e.message.contains("t_s_s")));
    }

    #[test]
    fn block_longer_than_sampling_interval_is_rejected() {
        // 48 pulses at 300 ns spacing: 14.4 us > t_s = 13.5 us. Use a tone
        // at half the frequency so the block itself stays resonant.
        let raw = RawConfig {
            field: Some(RawField {
                tones: Some(vec![RawTone {
                    amplitude_t: Some(1e-6),
                    frequency_hz: Some(10.0e6 / 6.0),
                    initial_phase_rad: Some(0.0),
                }]),
            }),
            block: Some(RawBlock {
                n_pulses: Some(48),
                tau_s: Some(300e-9),
            }),
            ..Default::default()
        };
        let err = resolve(&raw).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("sampling interval"), "{text}");
    }

    #[test]
    fn unknown_keys_fail_closed() {
        let text = "[schedule]\nt_s_s = 1.0e-6\nbogus_key = 3\n";
        assert!(parse_raw(text).is_err());
    }

    #[test]
    fn integer_literals_parse_into_float_fields() {
        let text = "[camera]\nwell_depth = 200000\n";
        let raw = parse_raw(text).unwrap();
        assert_eq!(raw.camera.unwrap().well_depth, Some(200000.0));
    }

    #[test]
    fn merge_prefers_override_per_field() {
        let base = default_config();
        let over = RawConfig {
            schedule: Some(RawSchedule {
                n_rep: Some(400),
                ..Default::default()
            }),
            ..Default::default()
        };
        let merged = merge(&base, &over);
        let s = merged.schedule.unwrap();
        assert_eq!(s.n_rep, Some(400));
        assert_eq!(s.t_s_s, Some(13.5e-6)); // untouched base value
    }

    #[test]
    fn snapshot_round_trips_through_resolution() {
        let resolved = resolve(&RawConfig::default()).unwrap();
        let again = resolve(&resolved.snapshot).unwrap();
        assert_eq!(again.snapshot, resolved.snapshot);
        assert_eq!(again.experiment, resolved.experiment);

        // And through TOML serialization.
        let text = toml::to_string(&resolved.snapshot).unwrap();
        let reparsed = parse_raw(&text).unwrap();
        assert_eq!(resolve(&reparsed).unwrap().experiment, resolved.experiment);
    }

    #[test]
    fn nonlinear_default_amplitude_is_flagged() {
        let raw = RawConfig {
            field: Some(RawField {
                tones: Some(vec![RawTone {
                    amplitude_t: Some(1e-4), // far beyond the linear regime
                    frequency_hz: Some(10.0e6 / 3.0),
                    initial_phase_rad: Some(0.0),
                }]),
            }),
            ..Default::default()
        };
        let err = resolve(&raw).unwrap_err().to_string();
        assert!(err.contains("linear-regime"), "{err}");
    }
}
