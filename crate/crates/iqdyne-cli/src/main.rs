//! `iqdyne`: run simulated wide-field magnetometry experiments from the
//! command line.
//!
//! Exit codes: 0 on success, 1 on config/validation problems, 2 on runtime
//! failures (I/O and the like).

use clap::{Parser, Subcommand};
use iqdyne::config::{self, RawConfig};
use iqdyne::error::Error;
use iqdyne::experiments::{self, PresetName, RunOptions};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "iqdyne",
    about = "Simulate camera-based iQdyne magnetometry and analyze the spectra",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment preset and write CSVs, plots and a manifest.
    Run {
        /// Preset name (fig2a_spectra, fig2b_eta_vs_nrep, fig2c_two_tone,
        /// fig2d_widefield_hist, fig3_detuning_sweep, fig4_performance_map).
        preset: String,
        /// Config file overriding the preset defaults (also accepts a
        /// manifest from an earlier run).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default: ./out/PRESET).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write per-pixel trace CSVs.
        #[arg(long)]
        write_traces: bool,
    },
    /// Sweep one numeric config parameter and tabulate SNR and sensitivity.
    Sweep {
        /// Dotted config path, e.g. schedule.n_rep or
        /// field.tones.0.frequency_hz.
        #[arg(long)]
        param: String,
        /// Comma-separated values to sweep over (use --values=-1,2 for
        /// negative numbers); an empty list is a valid no-op.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default: ./out/sweep).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate a config file and echo the resolved values.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_)
                | Error::ConfigParse(_)
                | Error::UnknownPreset(_)
                | Error::SweepPath { .. }
                | Error::InvalidInput { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn load_optional_config(path: &Option<PathBuf>) -> Result<Option<RawConfig>, Error> {
    match path {
        Some(p) => Ok(Some(config::load_raw(p)?)),
        None => Ok(None),
    }
}

/// Print without panicking when stdout disappears mid-pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            preset,
            config,
            out,
            seed,
            write_traces,
        } => {
            let preset = PresetName::from_str(&preset)?;
            let options = RunOptions {
                overrides: load_optional_config(&config)?,
                seed,
                write_traces,
            };
            let out_dir = out.unwrap_or_else(|| PathBuf::from("out").join(preset.as_str()));
            let manifest = experiments::run_preset(preset, &options, &out_dir)?;
            let mut text = format!("preset {} -> {}\n", manifest.preset, out_dir.display());
            for name in &manifest.outputs {
                text.push_str(&format!("  {name}\n"));
            }
            emit(&text);
            Ok(())
        }
        Command::Sweep {
            param,
            values,
            config,
            out,
            seed,
        } => {
            let mut base = load_optional_config(&config)?.unwrap_or_default();
            if let Some(seed) = seed {
                base.camera.get_or_insert_with(Default::default).seed = Some(seed);
            }
            let rows = experiments::sweep(&base, &param, &values)?;
            let out_dir = out.unwrap_or_else(|| PathBuf::from("out").join("sweep"));
            std::fs::create_dir_all(&out_dir)?;
            let path = out_dir.join("sweep.csv");
            std::fs::write(&path, experiments::sweep_csv(&rows))?;
            emit(&format!(
                "swept {param} over {} values -> {}\n",
                rows.len(),
                path.display()
            ));
            Ok(())
        }
        Command::Validate { config: path } => {
            let raw = config::load_raw(&path)?;
            let resolved = config::resolve(&raw)?;
            let d = resolved.derived();
            let mut text = format!("config ok: {}\n", path.display());
            text.push_str(&config::to_toml_string(&resolved.snapshot)?);
            text.push_str("derived:\n");
            text.push_str(&format!("  t_l_s = {}\n", d.t_l_s));
            text.push_str(&format!("  t_tot_s = {}\n", d.t_tot_s));
            text.push_str(&format!("  bandwidth_hz = {}\n", d.bandwidth_hz));
            text.push_str(&format!(
                "  full_length_bin_width_hz = {}\n",
                d.full_length_bin_width_hz
            ));
            text.push_str(&format!("  noise_regime = {}\n", d.noise_regime));
            for (i, t) in d.tones.iter().enumerate() {
                text.push_str(&format!(
                    "  tone[{i}]: f = {} Hz, t_s/T_ac = {}, alias = {} Hz, \
                     delta_phi = {} rad, accumulated_phase = {} rad\n",
                    t.frequency_hz,
                    t.ts_over_tac,
                    t.alias_frequency_hz,
                    t.delta_phi_rad,
                    t.accumulated_phase_rad
                ));
            }
            emit(&text);
            Ok(())
        }
    }
}
