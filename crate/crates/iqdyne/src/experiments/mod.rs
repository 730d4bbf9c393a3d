//! Config-driven experiment runner: named presets, parameter sweeps,
//! CSV/SVG emission and run manifests.

pub mod presets;
pub mod svg;
pub mod sweep;

pub use presets::*;
pub use sweep::{set_numeric_path, sweep, SweepRow};

use crate::analysis::Spectrum;
use crate::camera::PixelTrace;
use crate::config::{self, RawConfig};
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use svg::{Plot, SeriesStyle};

/// Record of one preset run: enough to reproduce it bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub preset: String,
    pub seed: u64,
    pub timestamp_unix: u64,
    pub version: String,
    pub outputs: Vec<String>,
    /// Complete config snapshot; feeding this file back through
    /// `run --config` reproduces the outputs.
    pub resolved_config: RawConfig,
}

/// Execution options of a preset run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Partial config overriding the preset defaults.
    pub overrides: Option<RawConfig>,
    /// Overrides the camera seed.
    pub seed: Option<u64>,
    /// Also write per-pixel trace CSVs where the preset has many pixels.
    pub write_traces: bool,
}

/// Collects output files under one directory.
struct Outputs {
    dir: PathBuf,
    names: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            names: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, contents)?;
        self.names.push(rel.to_string());
        Ok(())
    }

    fn plot(&mut self, rel: &str, plot: &Plot) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        plot.render_to(&path)?;
        self.names.push(rel.to_string());
        Ok(())
    }
}

fn trace_csv(trace: &PixelTrace) -> String {
    let mut out = String::from("exposure_index,count\n");
    for (k, c) in trace.counts.iter().enumerate() {
        let _ = writeln!(out, "{k},{c}");
    }
    out
}

fn spectrum_csv(spec: &Spectrum) -> String {
    let mut out = String::from("frequency_hz,magnitude\n");
    for (f, m) in spec.bin_frequencies_hz.iter().zip(&spec.magnitudes) {
        let _ = writeln!(out, "{f},{m}");
    }
    out
}

fn report_csv(runs: &[&ProtocolRun]) -> String {
    let mut out = String::from("snr,eta_t_per_sqrthz,resolution_hz,t_tot_s,b_z_t,n_rep\n");
    for run in runs {
        let r = &run.outcome.report;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.snr,
            r.eta_t_per_sqrthz,
            r.resolution_hz,
            r.t_tot_s,
            r.b_z_t,
            run.resolved.experiment.schedule.n_rep()
        );
    }
    out
}

/// Resolve a preset plus options into the raw config the run will use.
pub fn effective_raw(preset: PresetName, options: &RunOptions) -> RawConfig {
    let mut raw = preset_raw(preset);
    if let Some(over) = &options.overrides {
        raw = config::merge(&raw, over);
    }
    if let Some(seed) = options.seed {
        if let Some(cam) = raw.camera.as_mut() {
            cam.seed = Some(seed);
        } else {
            raw.camera = Some(config::RawCamera {
                seed: Some(seed),
                ..Default::default()
            });
        }
    }
    raw
}

/// Run a preset end to end: simulate, analyze, and write CSV tables, SVG
/// plots and the run manifest into `out_dir`.
pub fn run_preset(preset: PresetName, options: &RunOptions, out_dir: &Path) -> Result<RunManifest> {
    let raw = effective_raw(preset, options);
    let resolved = config::resolve(&raw)?;
    let mut outputs = Outputs::new(out_dir)?;

    match preset {
        PresetName::Fig2aSpectra => {
            let result = run_fig2a(&raw)?;
            write_fig2a(&result, &mut outputs, true)?;
        }
        PresetName::Fig2bEtaVsNrep => {
            let result = run_fig2b(&raw)?;
            write_fig2b(&result, &mut outputs)?;
        }
        PresetName::Fig2cTwoTone => {
            let result = run_fig2c(&raw)?;
            write_fig2c(&result, &mut outputs)?;
        }
        PresetName::Fig2dWidefieldHist => {
            let result = run_fig2d(&raw)?;
            write_fig2d(&result, &mut outputs, options.write_traces)?;
        }
        PresetName::Fig3DetuningSweep => {
            let result = run_fig3(&raw)?;
            write_fig3(&result, &mut outputs)?;
        }
        PresetName::Fig4PerformanceMap => {
            let result = run_fig4(&raw)?;
            write_fig4(&result, &mut outputs)?;
        }
    }

    let manifest = RunManifest {
        preset: preset.as_str().to_string(),
        seed: resolved.experiment.camera.seed,
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: outputs.names.clone(),
        resolved_config: resolved.snapshot.clone(),
    };
    let manifest_text =
        toml::to_string(&manifest).map_err(|e| crate::error::Error::ConfigParse(e.to_string()))?;
    outputs.write("manifest.toml", &manifest_text)?;
    Ok(manifest)
}

/// Write a sweep result as the generic sweep CSV.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("value,snr,eta_t_per_sqrthz,fitted_frequency_hz,resolution_hz\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.value, r.snr, r.eta_t_per_sqrthz, r.fitted_frequency_hz, r.resolution_hz
        );
    }
    out
}

fn write_fig2a(result: &SpectraComparison, out: &mut Outputs, traces: bool) -> Result<()> {
    for run in [&result.direct, &result.iqdyne] {
        let sub = run.label;
        out.write(&format!("{sub}/spectrum.csv"), &spectrum_csv(&run.outcome.spectrum))?;
        if traces {
            out.write(&format!("{sub}/pixel_r0_c0.csv"), &trace_csv(&run.trace))?;
        }
    }
    out.write("report.csv", &report_csv(&[&result.direct, &result.iqdyne]))?;

    let to_points = |s: &Spectrum| {
        s.bin_frequencies_hz
            .iter()
            .zip(&s.magnitudes)
            .map(|(&f, &m)| (f, m))
            .collect::<Vec<_>>()
    };
    let plot = Plot::new(
        "Spectra: direct vs iterated protocol",
        "frequency (Hz)",
        "magnitude",
    )
    .with_series("iqdyne", SeriesStyle::Line, to_points(&result.iqdyne.outcome.spectrum))
    .with_series("direct", SeriesStyle::Line, to_points(&result.direct.outcome.spectrum));
    out.plot("spectra.svg", &plot)
}

fn write_fig2b(result: &EtaCurveResult, out: &mut Outputs) -> Result<()> {
    let mut csv = String::from(
        "n_rep,snr,eta_t_per_sqrthz,eta_fit_t_per_sqrthz,noise_regime,used_in_fit\n",
    );
    for p in &result.points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            p.n_rep, p.snr, p.eta_t_per_sqrthz, p.eta_fit_t_per_sqrthz, p.noise_regime, p.used_in_fit
        );
    }
    out.write("eta_vs_nrep.csv", &csv)?;
    out.write(
        "eta_fit.csv",
        &format!(
            "eta_infinity_t_per_sqrthz,std_error_t_per_sqrthz\n{},{}\n",
            result.fit.eta_infinity, result.fit.std_error
        ),
    )?;

    let measured: Vec<(f64, f64)> = result
        .points
        .iter()
        .map(|p| (f64::from(p.n_rep), p.eta_t_per_sqrthz))
        .collect();
    let model: Vec<(f64, f64)> = result
        .points
        .iter()
        .map(|p| (f64::from(p.n_rep), p.eta_fit_t_per_sqrthz))
        .collect();
    let mut plot = Plot::new(
        "Sensitivity vs iterations per exposure",
        "n_rep",
        "eta (T/sqrt(Hz))",
    )
    .with_series("measured", SeriesStyle::Points, measured)
    .with_series("dead-time model", SeriesStyle::Line, model);
    plot.log_x = true;
    plot.log_y = true;
    out.plot("eta_vs_nrep.svg", &plot)
}

fn write_fig2c(result: &TwoToneResult, out: &mut Outputs) -> Result<()> {
    out.write("pixel_r0_c0.csv", &trace_csv(&result.trace))?;
    out.write("spectrum.csv", &spectrum_csv(&result.outcome.spectrum))?;
    let mut csv =
        String::from("peak_index,center_frequency_hz,frequency_uncertainty_hz,height,snr\n");
    for (i, p) in result.peaks.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{i},{},{},{},{}",
            p.center_frequency_hz, p.frequency_uncertainty_hz, p.height, p.snr
        );
    }
    out.write("peaks.csv", &csv)?;

    let spectrum_points: Vec<(f64, f64)> = result
        .outcome
        .spectrum
        .bin_frequencies_hz
        .iter()
        .zip(&result.outcome.spectrum.magnitudes)
        .map(|(&f, &m)| (f, m))
        .collect();
    let centers: Vec<(f64, f64)> = result
        .peaks
        .iter()
        .map(|p| (p.center_frequency_hz, p.height))
        .collect();
    let plot = Plot::new("Two-tone spectrum", "frequency (Hz)", "magnitude")
        .with_series("spectrum", SeriesStyle::Line, spectrum_points)
        .with_series("fitted centers", SeriesStyle::Points, centers);
    out.plot("two_tone.svg", &plot)
}

fn write_fig2d(result: &WideFieldHistResult, out: &mut Outputs, traces: bool) -> Result<()> {
    if traces {
        for px in &result.grid.pixels {
            out.write(
                &format!("traces/pixel_r{}_c{}.csv", px.row, px.col),
                &trace_csv(&px.trace),
            )?;
        }
    }
    let mut csv =
        String::from("row,col,center_frequency_hz,frequency_uncertainty_hz,snr,true_offset_hz\n");
    for p in &result.pixels {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            p.row, p.col, p.center_frequency_hz, p.frequency_uncertainty_hz, p.snr, p.true_offset_hz
        );
    }
    out.write("pixel_fits.csv", &csv)?;
    out.write(
        "summary.csv",
        &format!(
            "center_spread_hz,mean_uncertainty_hz,injected_sigma_hz,n_pixels\n{},{},{},{}\n",
            result.center_spread_hz,
            result.mean_uncertainty_hz,
            result.injected_sigma_hz,
            result.pixels.len()
        ),
    )?;

    // Histogram of fitted centers.
    let centers: Vec<f64> = result.pixels.iter().map(|p| p.center_frequency_hz).collect();
    let (lo, hi) = centers
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &c| {
            (l.min(c), h.max(c))
        });
    let n_bins = 24usize;
    let width = ((hi - lo) / n_bins as f64).max(1e-12);
    let mut bars = vec![0usize; n_bins];
    for c in &centers {
        let idx = (((c - lo) / width) as usize).min(n_bins - 1);
        bars[idx] += 1;
    }
    let mut hist_csv = String::from("bin_center_hz,count\n");
    let bar_points: Vec<(f64, f64)> = bars
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let center = lo + (i as f64 + 0.5) * width;
            let _ = writeln!(hist_csv, "{center},{n}");
            (center, n as f64)
        })
        .collect();
    out.write("histogram.csv", &hist_csv)?;
    let plot = Plot::new(
        "Per-pixel fitted frequency",
        "center frequency (Hz)",
        "pixels",
    )
    .with_series("pixels", SeriesStyle::Bars, bar_points);
    out.plot("histogram.svg", &plot)
}

fn write_fig3(result: &DetuningSweepResult, out: &mut Outputs) -> Result<()> {
    let mut csv = String::from("detuning_hz,snr,alias_frequency_hz,envelope_rel\n");
    for r in &result.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.detuning_hz, r.snr, r.alias_frequency_hz, r.envelope_rel
        );
    }
    out.write("detuning_snr.csv", &csv)?;

    let max_snr = result.rows.iter().map(|r| r.snr).fold(0.0, f64::max);
    let measured: Vec<(f64, f64)> = result.rows.iter().map(|r| (r.detuning_hz, r.snr)).collect();
    let envelope: Vec<(f64, f64)> = result
        .rows
        .iter()
        .map(|r| (r.detuning_hz, r.envelope_rel * max_snr))
        .collect();
    let plot = Plot::new("SNR vs detuning", "detuning (Hz)", "SNR")
        .with_series("measured", SeriesStyle::Points, measured)
        .with_series("response envelope", SeriesStyle::Line, envelope);
    out.plot("detuning_snr.svg", &plot)
}

fn write_fig4(result: &PerformanceMapResult, out: &mut Outputs) -> Result<()> {
    let mut csv = String::from("protocol,eta_t_per_sqrthz,resolution_hz\n");
    for p in &result.points {
        let _ = writeln!(csv, "{},{},{}", p.protocol, p.eta_t_per_sqrthz, p.resolution_hz);
    }
    out.write("performance.csv", &csv)?;
    out.write(
        "report.csv",
        &report_csv(&[&result.comparison.direct, &result.comparison.iqdyne]),
    )?;

    let mut plot = Plot::new(
        "Sensitivity vs frequency resolution",
        "resolution (Hz)",
        "eta (T/sqrt(Hz))",
    );
    plot.log_x = true;
    plot.log_y = true;
    for p in &result.points {
        plot = plot.with_series(
            &p.protocol,
            SeriesStyle::Points,
            vec![(p.resolution_hz, p.eta_t_per_sqrthz)],
        );
    }
    out.plot("performance.svg", &plot)
}
