//! CSV and manifest writers.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xy_resonance::evolve::{PropagationSettings, TimeSeries};
use xy_resonance::experiments::SweepPoint;
use xy_resonance::{ChainConfig, Execution};

use crate::Failure;

/// Seventeen significant digits, enough to re-read every value exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub const SWEEP_HEADER: [&str; 5] = ["axis_value", "max_concurrence", "t_of_max", "max_fef", "engine"];
pub const DYNAMICS_HEADER: [&str; 6] = ["t", "concurrence", "fef", "norm", "parity", "J_of_t"];

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(format!("cannot write {}: {e}", path.display()))
}

/// Times are divided by `b` so they come out in the caller's time unit.
pub fn write_sweep(path: &Path, points: &[SweepPoint], b: f64) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_failure(path, e))?;
    w.write_record(SWEEP_HEADER).map_err(|e| io_failure(path, e))?;
    for p in points {
        w.write_record([
            fmt_f64(p.axis_value),
            fmt_f64(p.max_concurrence),
            fmt_f64(p.t_of_max / b),
            fmt_f64(p.max_fef),
            p.engine.label().to_string(),
        ])
        .map_err(|e| io_failure(path, e))?;
    }
    w.flush().map_err(|e| io_failure(path, e))
}

pub fn write_dynamics(path: &Path, series: &TimeSeries, b: f64) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_failure(path, e))?;
    w.write_record(DYNAMICS_HEADER).map_err(|e| io_failure(path, e))?;
    for i in 0..series.len() {
        w.write_record([
            fmt_f64(series.times[i] / b),
            fmt_f64(series.concurrence[i]),
            fmt_f64(series.fef[i]),
            fmt_f64(series.norm[i]),
            fmt_f64(series.parity[i]),
            fmt_f64(series.coupling[i]),
        ])
        .map_err(|e| io_failure(path, e))?;
    }
    w.flush().map_err(|e| io_failure(path, e))
}

/// Integrator settings as stored in the manifest; an unbounded step is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingsRecord {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: Option<f64>,
    pub sample_dt: f64,
    pub renormalize_every: usize,
    pub max_n_dense: usize,
    pub execution: Execution,
}

impl From<&PropagationSettings> for SettingsRecord {
    fn from(s: &PropagationSettings) -> Self {
        SettingsRecord {
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            max_step: s.max_step.is_finite().then_some(s.max_step),
            sample_dt: s.sample_dt,
            renormalize_every: s.renormalize_every,
            max_n_dense: s.max_n_dense,
            execution: s.execution,
        }
    }
}

impl From<&SettingsRecord> for PropagationSettings {
    fn from(r: &SettingsRecord) -> Self {
        PropagationSettings {
            rel_tol: r.rel_tol,
            abs_tol: r.abs_tol,
            max_step: r.max_step.unwrap_or(f64::INFINITY),
            sample_dt: r.sample_dt,
            renormalize_every: r.renormalize_every,
            max_n_dense: r.max_n_dense,
            keep_states: false,
            execution: r.execution,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ChainConfig,
    pub settings: SettingsRecord,
    pub engine: String,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<PathBuf>,
    /// Time-unit rescale applied to output time columns.
    pub b: f64,
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freeze: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(self).map_err(|e| io_failure(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| io_failure(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for v in [0.1, 1.0 / 3.0, 2.0, 1e-300, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(2.0), "2.0000000000000000e0");
    }

    #[test]
    fn settings_record_round_trip() {
        let s = PropagationSettings::default();
        let r = SettingsRecord::from(&s);
        assert_eq!(r.max_step, None);
        let back = PropagationSettings::from(&r);
        assert_eq!(back, s);
    }

    #[test]
    fn manifest_json_round_trip() {
        let m = RunManifest {
            command: "sweep".into(),
            config: ChainConfig::new(4).with_j0(0.1),
            settings: SettingsRecord::from(&PropagationSettings::default()),
            engine: "dense".into(),
            version: "0.1.0".into(),
            wall_clock_seconds: 0.125,
            outputs: vec![PathBuf::from("out/sweep.csv")],
            b: 1.0,
            workers: 2,
            axis: Some("omega_d".into()),
            grid: Some(vec![0.2, 1.0 / 3.0, 3.0]),
            t_end: None,
            freeze: None,
            warnings: vec!["n = 15: capacity".into()],
        };
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<RunManifest>(&text).unwrap(), m);
    }
}
