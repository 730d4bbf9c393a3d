//! Generic one-parameter sweeps over the single-pixel pipeline.

use crate::acquisition::run_trace;
use crate::analysis::analyze_trace;
use crate::config::{self, RawConfig};
use crate::error::{Error, Result};

/// One sweep point: the parameter value and the headline pipeline results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub snr: f64,
    pub eta_t_per_sqrthz: f64,
    pub fitted_frequency_hz: f64,
    pub resolution_hz: f64,
}

/// Run the pipeline once per value of the addressed config field.
///
/// `param_path` is a dotted path into the config, e.g. `schedule.n_rep`,
/// `camera.photons_per_xy8` or `field.tones.0.frequency_hz`. The addressed
/// field must be numeric. An empty value list is a valid no-op.
pub fn sweep(base: &RawConfig, param_path: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    // Materialize defaults first so every path addressable in a full config
    // exists in the tree being patched.
    let snapshot = config::resolve(base)?.snapshot;
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let patched = set_numeric_path(&snapshot, param_path, value)?;
        let resolved = config::resolve(&patched)?;
        let trace = run_trace(&resolved.experiment)?;
        let b_z = resolved.experiment.field.primary_tone().amplitude_t;
        let area = resolved.experiment.camera.pixel_area_um2;
        let outcome = analyze_trace(&trace, &resolved.analysis, b_z, area)?;
        rows.push(SweepRow {
            value,
            snr: outcome.snr,
            eta_t_per_sqrthz: outcome.report.eta_t_per_sqrthz,
            fitted_frequency_hz: outcome.fits[0].center_frequency_hz,
            resolution_hz: outcome.report.resolution_hz,
        });
    }
    Ok(rows)
}

/// Set a numeric field addressed by a dotted path in the TOML image of the
/// config, then deserialize back.
pub fn set_numeric_path(raw: &RawConfig, path: &str, value: f64) -> Result<RawConfig> {
    fn step<'a>(
        value: &'a mut toml::Value,
        seg: &str,
        path: &str,
    ) -> Result<&'a mut toml::Value> {
        match value {
            toml::Value::Table(t) => t.get_mut(seg).ok_or_else(|| Error::SweepPath {
                path: path.into(),
                message: format!("unknown key {seg:?}"),
            }),
            toml::Value::Array(a) => {
                let idx: usize = seg.parse().map_err(|_| Error::SweepPath {
                    path: path.into(),
                    message: format!("{seg:?} is not an array index"),
                })?;
                let len = a.len();
                a.get_mut(idx).ok_or_else(|| Error::SweepPath {
                    path: path.into(),
                    message: format!("index {idx} out of bounds (length {len})"),
                })
            }
            _ => Err(Error::SweepPath {
                path: path.into(),
                message: format!("{seg:?} addresses into a scalar"),
            }),
        }
    }

    let mut tree = toml::Value::try_from(raw).map_err(|e| Error::ConfigParse(e.to_string()))?;
    let segments: Vec<&str> = path.split('.').collect();
    let Some((last_seg, parents)) = segments.split_last() else {
        return Err(Error::SweepPath {
            path: path.into(),
            message: "empty path".into(),
        });
    };
    if path.is_empty() {
        return Err(Error::SweepPath {
            path: path.into(),
            message: "empty path".into(),
        });
    }
    let mut cursor = &mut tree;
    for seg in parents {
        cursor = step(cursor, seg, path)?;
    }
    let target = step(cursor, last_seg, path)?;
    match target {
        toml::Value::Integer(_) => {
            if value.fract() != 0.0 || value < 0.0 || value > i64::MAX as f64 {
                return Err(Error::SweepPath {
                    path: path.into(),
                    message: format!("value {value} is not a valid integer"),
                });
            }
            *target = toml::Value::Integer(value as i64);
        }
        toml::Value::Float(_) => *target = toml::Value::Float(value),
        _ => {
            return Err(Error::SweepPath {
                path: path.into(),
                message: "field is not numeric".into(),
            })
        }
    }
    tree.try_into()
        .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))
}
