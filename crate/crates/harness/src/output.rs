//! CSV emission and metadata sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::longrun::LongrunResult;
use crate::reference::Provenance;
use crate::sweep::SweepResult;

pub const HEADER: [&str; 8] = ["experiment", "method", "h", "fp_iters", "observable", "t_or_window", "value", "config_hash"];

pub const SLOPE_HEADER: [&str; 11] = [
    "experiment",
    "method",
    "fp_iters",
    "observable",
    "slope",
    "n_points",
    "asymptotic_slope",
    "asymptotic_h_lo",
    "asymptotic_h_hi",
    "asymptotic_n_points",
    "config_hash",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coord {
    Time(f64),
    Window(u64),
}

impl Coord {
    fn render(self) -> String {
        match self {
            Coord::Time(t) => fmt_f64(t),
            Coord::Window(w) => w.to_string(),
        }
    }
}

/// One data row of the common schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub method: String,
    pub h: f64,
    pub fp_iters: u32,
    pub observable: String,
    pub at: Coord,
    pub value: f64,
}

pub fn write_records(path: &Path, cfg: &ExperimentConfig, records: &[Record]) -> Result<()> {
    let hash = cfg.hash();
    let experiment = cfg.experiment.name();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for r in records {
        w.write_record([
            experiment,
            &r.method,
            &fmt_f64(r.h),
            &r.fp_iters.to_string(),
            &r.observable,
            &r.at.render(),
            &fmt_f64(r.value),
            &hash,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_records(s: &SweepResult) -> Vec<Record> {
    s.rows
        .iter()
        .map(|r| Record {
            method: r.method.clone(),
            h: r.h,
            fp_iters: r.fp_iters,
            observable: r.observable.name().to_string(),
            at: Coord::Time(r.t),
            value: r.value,
        })
        .collect()
}

pub fn longrun_records(r: &LongrunResult) -> Vec<Record> {
    let mut out = Vec::new();
    let mut add = |name: &str, series: &[f64]| {
        for (i, &v) in series.iter().enumerate() {
            out.push(Record {
                method: r.method.clone(),
                h: r.h,
                fp_iters: r.fp_iters,
                observable: name.to_string(),
                at: Coord::Window(i as u64),
                value: v,
            });
        }
    };
    add("energy_error", &r.energy);
    add("magnetic_moment_max", &r.mu_max);
    add("magnetic_moment_min", &r.mu_min);
    add("mu_drift", &r.mu_drift);
    if let Some(a) = &r.alpha {
        add("alpha_error", a);
    }
    out
}

pub fn write_slopes(path: &Path, cfg: &ExperimentConfig, s: &SweepResult) -> Result<()> {
    let hash = cfg.hash();
    let opt = |v: Option<f64>| v.map_or_else(String::new, fmt_f64);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SLOPE_HEADER)?;
    for r in &s.slopes {
        w.write_record([
            cfg.experiment.name(),
            &r.method,
            &r.fp_iters.to_string(),
            r.observable.name(),
            &opt(r.all.map(|f| f.slope)),
            &r.all.map_or(0, |f| f.n).to_string(),
            &opt(r.asymptotic.map(|f| f.slope)),
            &opt(r.asymptotic.map(|f| f.h_lo)),
            &opt(r.asymptotic.map(|f| f.h_hi)),
            &r.asymptotic.map_or(0, |f| f.n).to_string(),
            &hash,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Contents of the `.meta` sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct Meta<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: &'static str,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<Provenance>,
    pub config: &'a ExperimentConfig,
}

impl<'a> Meta<'a> {
    pub fn new(kind: &'static str, cfg: &'a ExperimentConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            kind,
            config_hash: cfg.hash(),
            notes: Vec::new(),
            reference: None,
            config: cfg,
        }
    }
}

pub fn write_meta(csv_path: &Path, meta: &Meta<'_>) -> Result<PathBuf> {
    let path = csv_path.with_extension("meta");
    let text = toml::to_string(meta).map_err(|e| crate::error::HarnessError::Config(e.to_string()))?;
    fs::write(&path, text)?;
    Ok(path)
}

/// `<dir>/<experiment>_<kind>.csv`, creating `dir` if needed.
pub fn output_path(dir: &Path, cfg: &ExperimentConfig, kind: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.join(format!("{}_{kind}.csv", cfg.experiment.name())))
}
