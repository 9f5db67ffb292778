//! Scenario runner for the clustered D2D caching model: sweeps a scenario
//! over one parameter and writes a CSV per task plus a JSON summary.

pub mod scenario;
pub mod tasks;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

pub use scenario::{Scenario, Sweep, SweepVariable, Task};
pub use tasks::Status;

/// Version string of the first CSV line.
pub const CSV_SCHEMA: &str = "# schema=1";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
    pub const VALIDATION: i32 = 4;
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses one per core.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub csv_files: Vec<PathBuf>,
    pub summary_file: PathBuf,
    /// Points whose evaluation hit a numerical failure.
    pub numeric_failures: usize,
    /// Points outside the model's feasible region.
    pub infeasible: usize,
    /// Validation checks that did not pass.
    pub failed_checks: usize,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.numeric_failures > 0 {
            exit::NUMERIC
        } else if self.failed_checks > 0 {
            exit::VALIDATION
        } else {
            exit::OK
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    name: &'a str,
    version: &'static str,
    library_version: &'static str,
    seed: u64,
    mc_trials: usize,
    scenario: &'a Scenario,
    tasks: Vec<TaskSummary>,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct TaskSummary {
    task: &'static str,
    csv: String,
    points: Vec<PointSummary>,
}

#[derive(Serialize)]
struct PointSummary {
    value: Option<f64>,
    status: &'static str,
    wall_time_s: f64,
}

pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport, CliError> {
    scenario.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("jobs: {e}")))?;
    let out_dir = &scenario.output_dir;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let started = Instant::now();
    let points = scenario.points();
    let mut tasks: Vec<Task> = scenario.tasks.clone();
    tasks.sort_unstable();
    tasks.dedup();

    let mut report = RunReport {
        csv_files: Vec::new(),
        summary_file: out_dir.join(format!("{}_summary.json", scenario.name)),
        numeric_failures: 0,
        infeasible: 0,
        failed_checks: 0,
    };
    let mut summaries = Vec::new();
    for task in tasks {
        log::info!("{}: {} on {} point(s)", scenario.name, task.name(), points.len());
        let results: Vec<(tasks::PointRows, f64)> = pool.install(|| {
            points
                .par_iter()
                .enumerate()
                .map(|(i, (_, point))| {
                    let t = Instant::now();
                    let rows = tasks::evaluate(task, scenario, point, i);
                    (rows, t.elapsed().as_secs_f64())
                })
                .collect()
        });
        let path = out_dir.join(format!("{}_{}.csv", scenario.name, task.name()));
        write_csv(&path, scenario, task, &points, &results)?;
        let mut point_summaries = Vec::with_capacity(points.len());
        for ((value, _), (rows, secs)) in points.iter().zip(&results) {
            match rows.status {
                Status::Ok => {}
                Status::Infeasible => report.infeasible += 1,
                Status::Error => report.numeric_failures += 1,
            }
            report.failed_checks += rows.failed_checks;
            if rows.status != Status::Ok {
                log::warn!("{} at {:?}: {}", task.name(), value, rows.status.name());
            }
            point_summaries.push(PointSummary {
                value: *value,
                status: rows.status.name(),
                wall_time_s: *secs,
            });
        }
        summaries.push(TaskSummary {
            task: task.name(),
            csv: path.display().to_string(),
            points: point_summaries,
        });
        report.csv_files.push(path);
    }

    let summary = Summary {
        name: &scenario.name,
        version: env!("CARGO_PKG_VERSION"),
        library_version: clusterd2d::VERSION,
        seed: scenario.seed,
        mc_trials: scenario.mc_trials,
        scenario,
        tasks: summaries,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serialises to JSON");
    fs::write(&report.summary_file, json + "\n").map_err(|e| CliError::io(&report.summary_file, e))?;
    Ok(report)
}

fn write_csv(
    path: &Path,
    scenario: &Scenario,
    task: Task,
    points: &[(Option<f64>, clusterd2d::Result<scenario::Point>)],
    results: &[(tasks::PointRows, f64)],
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    writeln!(buf, "{CSV_SCHEMA}").expect("write to memory");
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let sweep = scenario.sweep.as_ref().map(|s| s.variable.name());
        let mut header: Vec<&str> = sweep.into_iter().collect();
        header.extend_from_slice(tasks::columns(task));
        w.write_record(&header).map_err(|e| csv_io(path, e))?;
        for ((value, _), (rows, _)) in points.iter().zip(results) {
            for row in &rows.rows {
                let mut record: Vec<String> = Vec::with_capacity(header.len());
                if sweep.is_some() {
                    record.push(value.map(tasks::num).unwrap_or_default());
                }
                record.extend(row.iter().cloned());
                w.write_record(&record).map_err(|e| csv_io(path, e))?;
            }
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e))
}
