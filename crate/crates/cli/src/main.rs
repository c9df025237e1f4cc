//! Command-line front end: convergence studies, single transient runs and
//! steady projection rate checks for the coupled Stokes-Darcy solver.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use config::{parse_config, CaseChoice, Mode, RunConfig};
use output::{render_convergence_csv, render_ritz_csv, render_vtk, write_file, RitzRow};
use sdfem::fem::{quad_edge, quad_triangle};
use sdfem::mesh::build_structured_mesh;
use sdfem::solver::{ritz_projection, run_transient, TimeGrid};
use sdfem::spaces::{build_spaces, BoundaryData};
use sdfem::verification::{
    final_errors, l2_error_darcy_pressure, l2_error_darcy_velocity, l2_error_stokes_velocity,
    run_convergence_levels, SmoothCase, ManufacturedSolution, StudyConfig, TimeRule, ZeroSolution,
};
use sdfem::Error as CoreError;

const USAGE: &str = "usage: sdfem <convergence|run|ritz> [--config PATH] [--out DIR] [--jobs N] [key=value ...]";

/// Exit codes: 0 success, 1 configuration error, 2 solver failure,
/// 3 I/O error.
enum CliError {
    Config(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Solver(m) | CliError::Io(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if e.is_solver_failure() {
            CliError::Solver(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run() -> Result<(), CliError> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = match args.first().map(String::as_str) {
        Some("convergence") => Mode::Convergence,
        Some("run") => Mode::Run,
        Some("ritz") => Mode::Ritz,
        Some(other) => {
            return Err(CliError::Config(format!(
                "unknown subcommand {other}; {USAGE}"
            )))
        }
        None => return Err(CliError::Config(USAGE.to_string())),
    };

    let mut config_path: Option<PathBuf> = None;
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut it = args[1..].iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--config" => {
                let path = it
                    .next()
                    .ok_or_else(|| CliError::Config("--config needs a path".into()))?;
                config_path = Some(PathBuf::from(path));
            }
            "--out" => {
                let dir = it
                    .next()
                    .ok_or_else(|| CliError::Config("--out needs a directory".into()))?;
                overrides.push(("output.dir".into(), dir.clone()));
            }
            "--jobs" => {
                let n = it
                    .next()
                    .ok_or_else(|| CliError::Config("--jobs needs a count".into()))?;
                overrides.push(("jobs".into(), n.clone()));
            }
            other => match other.split_once('=') {
                Some((key, value)) => {
                    overrides.push((key.trim().to_string(), value.trim().to_string()))
                }
                None => {
                    return Err(CliError::Config(format!(
                        "unexpected argument {other}; {USAGE}"
                    )))
                }
            },
        }
    }

    let config =
        parse_config(mode, config_path.as_deref(), &overrides).map_err(CliError::Config)?;
    match config.mode {
        Mode::Convergence => cmd_convergence(&config),
        Mode::Run => cmd_run(&config),
        Mode::Ritz => cmd_ritz(&config),
    }
}

fn jobs_or_cores(jobs: usize) -> usize {
    if jobs > 0 {
        jobs
    } else {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    }
}

fn cmd_convergence(config: &RunConfig) -> Result<(), CliError> {
    if config.case != CaseChoice::Smooth {
        return Err(CliError::Config(
            "convergence mode needs the manufactured case (case = smooth)".into(),
        ));
    }
    let study = StudyConfig {
        domain: config.domain,
        params: config.params,
        h_list: config.h_list.clone(),
        time_rule: config.time_rule,
        t_end: config.t_end,
        volume_degree: config.volume_degree,
        edge_degree: config.edge_degree,
        jobs: jobs_or_cores(config.jobs),
    };
    let outcomes = run_convergence_levels(&study)?;
    let mut rows = Vec::new();
    let mut failure: Option<(f64, CoreError)> = None;
    for (h, outcome) in outcomes {
        match outcome {
            Ok(row) => {
                if failure.is_none() {
                    rows.push(row);
                }
            }
            Err(e) => {
                if failure.is_none() {
                    failure = Some((h, e));
                }
            }
        }
    }
    let csv = render_convergence_csv(&rows, failure.as_ref().map(|(h, _)| *h));
    let path = config.out_dir.join("convergence.csv");
    write_file(&path, &csv)?;
    print!("{csv}");
    println!("# wrote {}", path.display());
    match failure {
        Some((h, e)) => Err(CliError::from(e.at_level(h))),
        None => Ok(()),
    }
}

fn cmd_run(config: &RunConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let h = 1.0 / config.n as f64;
    let tau = match config.time_rule {
        TimeRule::TauEqHSquared => h * h,
        TimeRule::Explicit { tau } => tau,
    };
    let n_steps = (config.t_end / tau).round() as usize;
    if n_steps == 0 || (n_steps as f64 * tau - config.t_end).abs() > 1e-9 {
        return Err(CliError::Config(format!(
            "time.tau: step {tau} does not divide t_end {}",
            config.t_end
        )));
    }
    let mesh = build_structured_mesh(&config.domain, config.n).map_err(CliError::from)?;
    let spaces = build_spaces(&mesh).map_err(CliError::from)?;
    let grid = TimeGrid { tau, n_steps };

    let (state, summary) = match config.case {
        CaseChoice::Smooth => {
            let case = SmoothCase::new(config.params);
            let data = case.boundary_data();
            let state = run_transient(
                &mesh,
                &spaces,
                &config.params,
                &grid,
                &case,
                &data,
                config.volume_degree,
                config.edge_degree,
                None,
            )?;
            let quad = quad_triangle(config.volume_degree).map_err(CliError::from)?;
            let equad = quad_edge(config.edge_degree).map_err(CliError::from)?;
            let errors = final_errors(&mesh, &spaces, &state, &case, &quad, &equad);
            let summary = format!(
                "mode=run\ncase=smooth\nn={}\ntau={}\nsteps={}\nt_end={}\n\
                 err_uf_L2={:.12e}\nerr_up_L2={:.12e}\nerr_phi_L2={:.12e}\n\
                 h1_uf={:.12e}\njump_L2={:.12e}\n\
                 norm_uf_L2={:.12e}\nnorm_up_L2={:.12e}\nnorm_phi_L2={:.12e}\nwall_s={:.3}\n",
                config.n,
                tau,
                n_steps,
                config.t_end,
                errors.err_uf,
                errors.err_up,
                errors.err_phi,
                errors.h1_uf,
                errors.jump,
                errors.norm_uf,
                errors.norm_up,
                errors.norm_phi,
                start.elapsed().as_secs_f64(),
            );
            (state, summary)
        }
        CaseChoice::Zero => {
            let data = BoundaryData::homogeneous();
            let state = run_transient(
                &mesh,
                &spaces,
                &config.params,
                &grid,
                &ZeroSolution,
                &data,
                config.volume_degree,
                config.edge_degree,
                None,
            )?;
            let summary = format!(
                "mode=run\ncase=zero\nn={}\ntau={}\nsteps={}\nt_end={}\nwall_s={:.3}\n",
                config.n,
                tau,
                n_steps,
                config.t_end,
                start.elapsed().as_secs_f64(),
            );
            (state, summary)
        }
    };

    let vtk = render_vtk(&mesh, &spaces, &state);
    write_file(&config.out_dir.join("fields.vtk"), &vtk)?;
    write_file(&config.out_dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    println!("# wrote {}", config.out_dir.join("fields.vtk").display());
    Ok(())
}

fn cmd_ritz(config: &RunConfig) -> Result<(), CliError> {
    if config.case != CaseChoice::Smooth {
        return Err(CliError::Config(
            "ritz mode needs the manufactured case (case = smooth)".into(),
        ));
    }
    let case = SmoothCase::new(config.params);
    let data = case.boundary_data();
    let quad = quad_triangle(config.volume_degree).map_err(CliError::from)?;
    let mut rows = Vec::new();
    for &h in &config.h_list {
        let start = Instant::now();
        let n = (1.0 / h).round() as usize;
        let mesh = build_structured_mesh(&config.domain, n).map_err(CliError::from)?;
        let spaces = build_spaces(&mesh).map_err(CliError::from)?;
        let proj = ritz_projection(
            &mesh,
            &spaces,
            &config.params,
            &case,
            &data,
            0.0,
            config.volume_degree,
            config.edge_degree,
        )?;
        rows.push(RitzRow {
            h,
            err_uf: l2_error_stokes_velocity(
                &mesh,
                &spaces.stokes_vel,
                &proj.u_f,
                &|x| case.u_f(x, 0.0),
                &quad,
            ),
            err_up: l2_error_darcy_velocity(
                &mesh,
                &spaces.darcy_vel,
                &proj.u_p,
                &|x| case.u_p(x, 0.0),
                &quad,
            ),
            err_phi: l2_error_darcy_pressure(
                &mesh,
                &spaces.darcy_pr,
                &proj.phi_p,
                &|x| case.phi_p(x, 0.0),
                &quad,
            ),
            wall_s: start.elapsed().as_secs_f64(),
        });
    }
    let csv = render_ritz_csv(&rows);
    let path = config.out_dir.join("ritz.csv");
    write_file(&path, &csv)?;
    print!("{csv}");
    println!("# wrote {}", path.display());
    Ok(())
}
