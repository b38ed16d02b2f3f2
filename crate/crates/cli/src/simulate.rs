//! `simulate`: run one configuration and persist its history.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use csv::{StringRecord, Terminator, WriterBuilder};
use mas_core::driver::initial_solution;
use mas_core::grid::total_variation;
use mas_core::{run_with_observer, GridSolution, MasError, StepRecord};
use serde_json::json;

use crate::config::RunConfig;
use crate::{fmt_real, CliError};

pub const SNAPSHOTS_FILE: &str = "snapshots.csv";
pub const TV_SERIES_FILE: &str = "tv_series.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const SNAPSHOT_HEADER: [&str; 5] = ["step", "time", "node_index", "x", "u"];
pub const TV_HEADER: [&str; 10] = [
    "step",
    "time",
    "tv",
    "tvi",
    "evolution_ratio",
    "max_A",
    "avg_A",
    "a_n",
    "E1",
    "tv_envelope",
];

/// Snapshots are kept every this many steps, plus the first and last.
pub const SNAPSHOT_TARGET: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Completed,
    BlowUp { step: usize },
    Failed(String),
}

/// One line of `tv_series.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TvRow {
    pub step: usize,
    pub time: f64,
    pub tv: f64,
    pub tvi: f64,
    pub evolution_ratio: f64,
    pub max_a: f64,
    pub avg_a: f64,
    pub a_n: f64,
    pub e1: f64,
    /// `TV(u_0) + B1` at the step's observed lambda.
    pub tv_envelope: f64,
}

impl TvRow {
    pub fn new(r: &StepRecord<f64>, tv0: f64, evolution_constant: f64) -> Self {
        Self {
            step: r.step,
            time: r.time,
            tv: r.tv,
            tvi: r.tvi,
            evolution_ratio: r.evolution_ratio,
            max_a: r.lambda_report.max_a,
            avg_a: r.lambda_report.avg_a,
            a_n: r.a_n,
            e1: r.e1,
            tv_envelope: r.tv_envelope(tv0, evolution_constant).unwrap_or(f64::NAN),
        }
    }

    pub fn fields(&self) -> Vec<String> {
        let mut out = vec![self.step.to_string()];
        out.extend(
            [
                self.time,
                self.tv,
                self.tvi,
                self.evolution_ratio,
                self.max_a,
                self.avg_a,
                self.a_n,
                self.e1,
                self.tv_envelope,
            ]
            .map(fmt_real),
        );
        out
    }

    pub fn parse(record: &StringRecord) -> Option<Self> {
        if record.len() != TV_HEADER.len() {
            return None;
        }
        let real = |i: usize| record[i].parse::<f64>().ok();
        Some(Self {
            step: record[0].parse().ok()?,
            time: real(1)?,
            tv: real(2)?,
            tvi: real(3)?,
            evolution_ratio: real(4)?,
            max_a: real(5)?,
            avg_a: real(6)?,
            a_n: real(7)?,
            e1: real(8)?,
            tv_envelope: real(9)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SimulationSummary {
    pub steps: usize,
    pub status: RunStatus,
    pub tv0: f64,
    pub final_tv: f64,
    pub rows: Vec<TvRow>,
    pub files: Vec<PathBuf>,
}

/// Reads and validates `config_path`, then runs it into `outdir`. Nothing
/// is written when the config is rejected.
pub fn simulate(config_path: &Path, outdir: &Path) -> Result<SimulationSummary, CliError> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let cfg = RunConfig::parse(&text)?;
    run_to_dir(&cfg, outdir)
}

pub fn snapshot_stride(steps: usize) -> usize {
    steps.div_ceil(SNAPSHOT_TARGET).max(1)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    Ok(WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_path(path)?)
}

fn write_snapshot(w: &mut csv::Writer<File>, step: usize, time: f64, u: &GridSolution<f64>) -> Result<(), CliError> {
    let step = step.to_string();
    let time = fmt_real(time);
    for (i, (x, v)) in u.nodes().iter().zip(u.values()).enumerate() {
        w.write_record([step.as_str(), time.as_str(), &i.to_string(), &fmt_real(*x), &fmt_real(*v)])?;
    }
    Ok(())
}

/// Runs `cfg` and writes the three artifacts into `outdir`. A blow-up or a
/// solver failure still writes everything up to the last completed step.
pub fn run_to_dir(cfg: &RunConfig, outdir: &Path) -> Result<SimulationSummary, CliError> {
    let mas = cfg.mas_config()?;
    let prob = cfg.problem_setup()?;
    let c = mas.evolution_constant();
    let started = Instant::now();

    let u0 = initial_solution(&mas, &prob)?;
    let tv0 = total_variation(&u0);
    let mut rows = Vec::new();
    let outcome = run_with_observer(&mas, &prob, |r, _| rows.push(TvRow::new(r, tv0, c)));
    let steps = rows.len();
    let status = match outcome {
        Ok(_) => RunStatus::Completed,
        Err(MasError::BlowUp { step }) => RunStatus::BlowUp { step },
        Err(e) => RunStatus::Failed(e.to_string()),
    };

    // The run is deterministic, so a second pass reproduces it and keeps
    // only the snapshots at the stride the first pass determined.
    fs::create_dir_all(outdir)?;
    let stride = snapshot_stride(steps);
    let snapshots_path = outdir.join(SNAPSHOTS_FILE);
    let mut snapshots = csv_writer(&snapshots_path)?;
    snapshots.write_record(SNAPSHOT_HEADER)?;
    write_snapshot(&mut snapshots, 0, 0.0, &u0)?;
    let mut write_error = None;
    if steps > 0 {
        let _ = run_with_observer(&mas, &prob, |r, u| {
            if write_error.is_none() && r.step <= steps && (r.step % stride == 0 || r.step == steps) {
                if let Err(e) = write_snapshot(&mut snapshots, r.step, r.time, u) {
                    write_error = Some(e);
                }
            }
        });
    }
    if let Some(e) = write_error {
        return Err(e);
    }
    snapshots.flush()?;

    let series_path = outdir.join(TV_SERIES_FILE);
    let mut series = csv_writer(&series_path)?;
    series.write_record(TV_HEADER)?;
    for row in &rows {
        series.write_record(row.fields())?;
    }
    series.flush()?;

    let final_tv = rows.last().map_or(tv0, |r| r.tv);
    let (status_name, blowup_step, message) = match &status {
        RunStatus::Completed => ("completed", None, None),
        RunStatus::BlowUp { step } => ("blow_up", Some(*step), None),
        RunStatus::Failed(msg) => ("failed", None, Some(msg.clone())),
    };
    let manifest = json!({
        "config": cfg,
        "problem": {
            "flux": prob.flux.name(),
            "domain": [prob.a, prob.b],
            "x0": prob.initial.x0,
            "high": prob.initial.high,
            "low": prob.initial.low,
            "final_time": prob.final_time,
        },
        "solver": {
            "evolution_constant": c,
            "max_correction_rounds": mas.max_correction_rounds,
            "initial_adaptations": mas.initial_adaptations,
            "max_steps": mas.max_steps,
            "blowup_threshold": mas.blowup_threshold,
        },
        "artifacts": {
            "snapshots": SNAPSHOTS_FILE,
            "tv_series": TV_SERIES_FILE,
        },
        "steps": steps,
        "snapshot_stride": stride,
        "tv0": tv0,
        "final_tv": final_tv,
        "time_reached": rows.last().map_or(0.0, |r| r.time),
        "status": status_name,
        "blowup_step": blowup_step,
        "message": message,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
    });
    let manifest_path = outdir.join(MANIFEST_FILE);
    let mut file = File::create(&manifest_path)?;
    serde_json::to_writer_pretty(&mut file, &manifest)?;
    file.write_all(b"\n")?;

    Ok(SimulationSummary {
        steps,
        status,
        tv0,
        final_tv,
        rows,
        files: vec![snapshots_path, series_path, manifest_path],
    })
}
