//! Batch runs of a scenario configuration and the regularization study.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::{ScenarioConfig, Table1Config};
use crate::error::{ConfigError, PostError};
use crate::post::{cavity_volume, export_vtk, gap_measure, FieldOutput};
use crate::solver::{BisectionEvent, LoadSchedule, SolveReport};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Post(#[from] PostError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One row of the probe CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub step: usize,
    pub lambda: f64,
    pub gap: Option<f64>,
    pub newton_iters: usize,
    pub bisections: usize,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub title: String,
    pub completed: bool,
    pub final_lambda: f64,
    pub failure: Option<String>,
    pub accepted_steps: usize,
    pub total_newton_iterations: usize,
    pub mean_newton_iterations: f64,
    pub bisections: Vec<BisectionEvent>,
    pub min_j: f64,
    pub final_gap: Option<f64>,
    pub cavity_volume: Vec<(f64, f64)>,
    /// Final displacement of each tracked point.
    pub tracked: Vec<(String, [f64; 3])>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub report: SolveReport,
    pub probes: Vec<ProbeRow>,
    /// Final nodal displacements.
    pub u: Vec<f64>,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn probe_csv(rows: &[ProbeRow]) -> String {
    let mut s = String::from("step,lambda,gap,newton_iters,bisections\n");
    for r in rows {
        let gap = r.gap.map(fmt_f64).unwrap_or_default();
        writeln!(s, "{},{},{},{},{}", r.step, fmt_f64(r.lambda), gap, r.newton_iters, r.bisections).unwrap();
    }
    s
}

/// Validates `cfg`, solves it and writes `probes.csv`, `report.json` and the
/// VTK series into `out_dir`. Configuration problems are reported before
/// anything is written. A run that stops early still writes its outputs and
/// returns `Ok` with `summary.completed == false`.
pub fn run_scenario(cfg: &ScenarioConfig, base_dir: &Path, out_dir: &Path) -> Result<RunOutcome, RunError> {
    let prepared = cfg.prepare(base_dir)?;
    let mut solver = prepared.solver;
    let gap = prepared.gap;
    let tracks = prepared.tracks;

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let vtk_dir = out_dir.join("vtk");
    if cfg.outputs.write_vtk {
        fs::create_dir_all(&vtk_dir).map_err(io_err(&vtk_dir))?;
    }
    let title = if cfg.title.is_empty() { "tmc".to_string() } else { cfg.title.clone() };
    let vtk_path = |step: usize| vtk_dir.join(format!("state_{step:04}.vtk"));

    let initial = solver.initial_state();
    if cfg.outputs.write_vtk {
        let fields = FieldOutput::compute(&solver.assembler, &initial.u, 0.0)?;
        export_vtk(&solver.assembler.problem.mesh, &fields, &format!("{title} step 0 lambda 0"), &vtk_path(0))?;
    }
    let mut probes = vec![ProbeRow {
        step: 0,
        lambda: 0.0,
        gap: gap.map(|g| gap_measure(&solver.assembler.problem.mesh, &initial.u, &g)),
        newton_iters: 0,
        bisections: 0,
    }];
    let mut volumes = vec![(0.0, cavity_volume(&solver.assembler, &initial.u))];
    let mut last_written = 0;
    let mut write_error: Option<RunError> = None;
    let every = cfg.outputs.vtk_every;

    let (state, report) = solver.run_schedule(LoadSchedule { n_steps: cfg.solver.n_steps }, |asm, rec, st| {
        probes.push(ProbeRow {
            step: rec.step,
            lambda: rec.lambda,
            gap: gap.map(|g| gap_measure(&asm.problem.mesh, &st.u, &g)),
            newton_iters: rec.iterations,
            bisections: rec.bisections,
        });
        volumes.push((rec.lambda, cavity_volume(asm, &st.u)));
        if cfg.outputs.write_vtk && every > 0 && rec.step % every == 0 && write_error.is_none() {
            let r = FieldOutput::compute(asm, &st.u, rec.lambda).map_err(RunError::from).and_then(|f| {
                let label = format!("{title} step {} lambda {}", rec.step, rec.lambda);
                export_vtk(&asm.problem.mesh, &f, &label, &vtk_path(rec.step)).map_err(RunError::from)
            });
            match r {
                Ok(()) => last_written = rec.step,
                Err(e) => write_error = Some(e),
            }
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    let asm = &solver.assembler;
    let final_step = report.steps.len();
    if cfg.outputs.write_vtk && final_step > last_written {
        let fields = FieldOutput::compute(asm, &state.u, state.lambda)?;
        let label = format!("{title} step {final_step} lambda {}", state.lambda);
        export_vtk(&asm.problem.mesh, &fields, &label, &vtk_path(final_step))?;
    }

    let csv_path = out_dir.join("probes.csv");
    fs::write(&csv_path, probe_csv(&probes)).map_err(io_err(&csv_path))?;

    let n = report.steps.len().max(1);
    let summary = RunSummary {
        title: cfg.title.clone(),
        completed: report.completed,
        final_lambda: report.final_lambda,
        failure: report.failure.clone(),
        accepted_steps: report.steps.len(),
        total_newton_iterations: report.total_iterations(),
        mean_newton_iterations: report.total_iterations() as f64 / n as f64,
        bisections: report.bisections.clone(),
        min_j: report.steps.iter().map(|s| s.min_j).fold(f64::INFINITY, f64::min),
        final_gap: probes.last().and_then(|p| p.gap),
        cavity_volume: volumes,
        tracked: tracks
            .iter()
            .map(|(name, p)| {
                let x0 = p.position(&asm.problem.mesh, &vec![0.0; state.u.len()]);
                let x = p.position(&asm.problem.mesh, &state.u);
                (name.clone(), [x[0] - x0[0], x[1] - x0[1], x[2] - x0[2]])
            })
            .collect(),
        wall_time_s: report.wall_time_s,
    };
    let json_path = out_dir.join("report.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&json_path, json + "\n").map_err(io_err(&json_path))?;
    log::info!(
        "{}: lambda {} after {} steps, {} Newton iterations",
        title,
        report.final_lambda,
        report.steps.len(),
        report.total_iterations()
    );
    Ok(RunOutcome {
        summary,
        report,
        probes,
        u: state.u,
    })
}

/// One cell of the regularization table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Cell {
    pub alpha_r: f64,
    pub gamma: f64,
    pub gap: Option<f64>,
    pub completed: bool,
    pub failure: Option<String>,
    pub newton_iterations: usize,
    pub wall_time_s: f64,
}

fn cell_dir(out_dir: &Path, alpha_r: f64, gamma: f64) -> PathBuf {
    out_dir.join(format!("alpha_{alpha_r:e}_gamma_{gamma:e}"))
}

/// Runs every `(alpha_r, gamma)` pair of the config's `[table1]` grid as a
/// separate [`run_scenario`] in its own subdirectory, then writes
/// `table1.md` and `table1.csv`. Failed cells are recorded and the grid
/// continues.
pub fn run_table1(cfg: &ScenarioConfig, base_dir: &Path, out_dir: &Path) -> Result<Vec<Table1Cell>, RunError> {
    let grid: Table1Config = cfg
        .table1
        .clone()
        .ok_or_else(|| ConfigError::Invalid("the config has no [table1] section".into()))?;
    cfg.prepare(base_dir)?;
    let mut cells = Vec::new();
    for &alpha_r in &grid.alpha_r {
        for &gamma in &grid.gamma {
            let mut c = cfg.clone();
            let m = c.materials.get_mut(&grid.medium).expect("validated medium");
            m.alpha_r = Some(alpha_r);
            m.gamma = Some(gamma);
            let dir = cell_dir(out_dir, alpha_r, gamma);
            let cell = match run_scenario(&c, base_dir, &dir) {
                Ok(out) => Table1Cell {
                    alpha_r,
                    gamma,
                    gap: out.summary.final_gap.filter(|_| out.summary.completed),
                    completed: out.summary.completed,
                    failure: out.summary.failure,
                    newton_iterations: out.summary.total_newton_iterations,
                    wall_time_s: out.summary.wall_time_s,
                },
                Err(RunError::Config(e)) => {
                    return Err(RunError::Config(e));
                }
                Err(e) => Table1Cell {
                    alpha_r,
                    gamma,
                    gap: None,
                    completed: false,
                    failure: Some(e.to_string()),
                    newton_iterations: 0,
                    wall_time_s: 0.0,
                },
            };
            log::info!("alpha_r {alpha_r:e}, gamma {gamma:e}: gap {:?}", cell.gap);
            cells.push(cell);
        }
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let md = out_dir.join("table1.md");
    fs::write(&md, table1_markdown(&cells)).map_err(io_err(&md))?;
    let csv = out_dir.join("table1.csv");
    fs::write(&csv, table1_csv(&cells)).map_err(io_err(&csv))?;
    Ok(cells)
}

pub fn table1_markdown(cells: &[Table1Cell]) -> String {
    let mut s = String::from("| alpha_r | gamma | g |\n|---|---|---|\n");
    let mut last_alpha = None;
    for c in cells {
        let alpha = if last_alpha == Some(c.alpha_r) { String::new() } else { format!("{}", c.alpha_r) };
        last_alpha = Some(c.alpha_r);
        let g = match c.gap {
            Some(g) => format!("{g:.4e}"),
            None => "Calculation failed".to_string(),
        };
        writeln!(s, "| {alpha} | {:e} | {g} |", c.gamma).unwrap();
    }
    s
}

pub fn table1_csv(cells: &[Table1Cell]) -> String {
    let mut s = String::from("alpha_r,gamma,gap,status,newton_iterations\n");
    for c in cells {
        let gap = c.gap.map(fmt_f64).unwrap_or_default();
        let status = if c.completed { "ok" } else { "failed" };
        writeln!(s, "{:e},{:e},{gap},{status},{}", c.alpha_r, c.gamma, c.newton_iterations).unwrap();
    }
    s
}
