//! The five subcommands. Each writes its files under `out` and returns a
//! summary the binary uses to pick the exit code.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sirl_core::gmm::Gmm;
use sirl_core::maxent::WeightVector;
use sirl_core::mcem;
use sirl_core::objectworld::ObjectworldInstance;
use sirl_core::robustness::{self, SolutionSet};

use crate::config::{Axis, ExperimentConfig, Method};
use crate::pipeline::{self, RunSeeds, Trained, World};
use crate::results::{self, ResultRow, SweepRow, TimingRow};
use crate::{ensure_dir, grid, read_file, seeds, write_file, CliError, CliResult};

pub const INSTANCE_FILE: &str = "instance.txt";
pub const RESULTS_FILE: &str = "results.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const GMM_FILE: &str = "sirl_gmm.txt";
pub const SOLUTION_SET_FILE: &str = "solution_set.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";
pub const SWEEP_TIMINGS_FILE: &str = "sweep_timings.csv";

fn write_grid<T: std::fmt::Display>(
    out: &Path,
    name: &str,
    values: &[T],
    n: usize,
) -> CliResult<()> {
    write_file(&out.join(name), &grid::to_csv(values, n))
}

/// Instance file plus true reward, optimal value and optimal policy grids.
pub fn gen_world(config: &ExperimentConfig, out: &Path) -> CliResult<World> {
    ensure_dir(out)?;
    let world = pipeline::build_world(config, config.seed)?;
    let n = world.grid_size();
    write_file(&out.join(INSTANCE_FILE), &world.instance.to_text())?;
    write_grid(out, "true_reward.csv", &world.instance.true_reward(), n)?;
    write_grid(out, "optimal_value.csv", world.optimal_value.values(), n)?;
    let actions = world
        .optimal
        .actions()
        .expect("value iteration returns a deterministic policy");
    write_grid(out, "optimal_policy.csv", actions, n)?;
    log::info!("wrote instance and truth grids to {}", out.display());
    Ok(world)
}

pub struct RecoveryReport {
    pub rows: Vec<ResultRow>,
    pub trained: Vec<Trained>,
    /// Mean EVD of uniformly random weights on the same instance.
    pub random_evd: f64,
}

impl RecoveryReport {
    pub fn converged(&self) -> bool {
        self.trained.iter().all(|t| t.converged)
    }

    pub fn evd(&self, method: Method) -> Option<f64> {
        self.trained
            .iter()
            .find(|t| t.method == method)
            .map(|t| t.evd)
    }
}

/// Trains every configured method on one set of demonstrations without writing anything.
pub fn run_recovery(config: &ExperimentConfig) -> CliResult<(World, RecoveryReport)> {
    let master = config.seed;
    let world = pipeline::build_world(config, master)?;
    let demos = pipeline::sample_demos(
        &world,
        config.demos.n_demos,
        config.demos.trajectory_length,
        pipeline::demo_seed(config, master),
    )?;
    let mut trained = Vec::new();
    let mut rows = Vec::new();
    for &method in &config.methods.run {
        let t = pipeline::train(&world, &demos, method, config, RunSeeds::new(master, 0))?;
        log::info!("{method}: EVD {:.6} ({:.1}s)", t.evd, t.seconds);
        rows.push(ResultRow {
            method: method.to_string(),
            seed: master,
            n_demos: config.demos.n_demos,
            trajectory_length: config.demos.trajectory_length,
            epsilon_rep: config.mcem.epsilon_rep,
            evd: t.evd,
            converged: t.converged,
        });
        trained.push(t);
    }
    let random_evd = pipeline::random_baseline(
        &world,
        config.methods.random_draws,
        seeds::derive(master, seeds::RANDOM),
    )?;
    rows.push(ResultRow {
        method: "random".into(),
        seed: master,
        n_demos: config.demos.n_demos,
        trajectory_length: config.demos.trajectory_length,
        epsilon_rep: config.mcem.epsilon_rep,
        evd: random_evd,
        converged: true,
    });
    Ok((
        world,
        RecoveryReport {
            rows,
            trained,
            random_evd,
        },
    ))
}

/// Recovery experiment: per-method EVD rows, recovered reward and value grids,
/// the SIRL mixture and its iteration log.
pub fn recovery(config: &ExperimentConfig, out: &Path) -> CliResult<RecoveryReport> {
    ensure_dir(out)?;
    let (world, report) = run_recovery(config)?;
    let n = world.grid_size();
    write_file(&out.join(INSTANCE_FILE), &world.instance.to_text())?;
    write_file(&out.join(RESULTS_FILE), &results::to_csv(&report.rows)?)?;
    let timings: Vec<TimingRow> = report
        .trained
        .iter()
        .map(|t| TimingRow {
            method: t.method.to_string(),
            seed: config.seed,
            wall_seconds: t.seconds,
        })
        .collect();
    write_file(&out.join(TIMINGS_FILE), &results::to_csv(&timings)?)?;
    for t in &report.trained {
        let (reward, value) = world.recovered_maps(&t.weights)?;
        write_grid(out, &format!("reward_{}.csv", t.method), &reward, n)?;
        write_grid(out, &format!("value_{}.csv", t.method), &value, n)?;
        write_file(
            &out.join(format!("weights_{}.csv", t.method)),
            &t.weights.to_csv(),
        )?;
        if let Some(gmm) = &t.gmm {
            write_file(&out.join(GMM_FILE), &gmm.to_text())?;
            write_file(&out.join("mcem_log.csv"), &mcem::iteration_log_csv(&t.log))?;
            write_file(
                &out.join("mcem_timings.csv"),
                &mcem::iteration_timing_csv(&t.log),
            )?;
        }
    }
    log::info!("wrote recovery results to {}", out.display());
    Ok(report)
}

pub struct RobustnessReport {
    pub set: SolutionSet<f64>,
    /// False when the mixture was trained inline and MCEM did not converge.
    pub converged: bool,
}

/// Mines a solution set from a mixture given in `config.robustness.gmm_file`,
/// or trains SIRL inline when none is given.
pub fn robustness(config: &ExperimentConfig, out: &Path) -> CliResult<RobustnessReport> {
    ensure_dir(out)?;
    let world = pipeline::build_world(config, config.seed)?;
    let (gmm, converged) = match &config.robustness.gmm_file {
        Some(path) => {
            let gmm = Gmm::from_text(&read_file(path)?)
                .map_err(CliError::core(path.display().to_string()))?;
            (gmm, true)
        }
        None => {
            let demos = pipeline::sample_demos(
                &world,
                config.demos.n_demos,
                config.demos.trajectory_length,
                pipeline::demo_seed(config, config.seed),
            )?;
            let t = pipeline::train(
                &world,
                &demos,
                Method::Sirl,
                config,
                RunSeeds::new(config.seed, 0),
            )?;
            (t.gmm.expect("sirl yields a mixture"), t.converged)
        }
    };
    let set = solution_set(&world, &gmm, config)?;
    write_solution_set(&world, &set, out)?;
    Ok(RobustnessReport { set, converged })
}

pub fn solution_set(
    world: &World,
    gmm: &Gmm<f64>,
    config: &ExperimentConfig,
) -> CliResult<SolutionSet<f64>> {
    let r = &config.robustness;
    let set = robustness::generate_solution_set(
        gmm,
        r.n,
        r.delta,
        r.epsilon_evd,
        &world.mdp,
        &world.features,
        seeds::derive(config.seed, seeds::ROBUSTNESS),
        r.max_draws,
    )
    .map_err(CliError::core("solution set"))?;
    if !set.complete {
        log::warn!(
            "solution set incomplete: {} of {} members after {} draws",
            set.len(),
            r.n,
            set.draws
        );
    }
    Ok(set)
}

pub fn write_solution_set(world: &World, set: &SolutionSet<f64>, out: &Path) -> CliResult<()> {
    let n = world.grid_size();
    write_file(&out.join(SOLUTION_SET_FILE), &set.to_csv())?;
    for (i, w) in set.members.iter().enumerate() {
        let (reward, value) = world.recovered_maps(w)?;
        write_grid(out, &format!("member_{i}_reward.csv"), &reward, n)?;
        write_grid(out, &format!("member_{i}_value.csv"), &value, n)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    axis: Axis,
    value: f64,
    replication: usize,
}

pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<results::SummaryRow>,
    pub converged: bool,
}

/// Runs every configured method for each axis value and replication on the
/// instance of the master seed. Replication `r` uses the same demonstration
/// stream for every axis value.
pub fn run_sweep(config: &ExperimentConfig) -> CliResult<(SweepReport, Vec<TimingRow>)> {
    let master = config.seed;
    let world = pipeline::build_world(config, master)?;
    let cells: Vec<Cell> = config
        .sweep
        .axes
        .iter()
        .flat_map(|&axis| {
            config
                .sweep
                .values(axis)
                .into_iter()
                .flat_map(move |value| {
                    (0..config.sweep.replications).map(move |replication| Cell {
                        axis,
                        value,
                        replication,
                    })
                })
        })
        .collect();
    log::info!("sweep: {} cells", cells.len());
    let per_cell: Vec<Vec<(SweepRow, Option<TimingRow>)>> = cells
        .par_iter()
        .map(|&cell| run_cell(&world, config, cell))
        .collect();
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for (row, timing) in per_cell.into_iter().flatten() {
        rows.push(row);
        timings.extend(timing);
    }
    let converged = rows.iter().all(|r| r.converged != Some(false));
    let summary = results::summarize(&rows);
    Ok((
        SweepReport {
            rows,
            summary,
            converged,
        },
        timings,
    ))
}

fn cell_config(config: &ExperimentConfig, cell: Cell) -> ExperimentConfig {
    let mut c = config.clone();
    match cell.axis {
        Axis::NDemos => c.demos.n_demos = cell.value as usize,
        Axis::TrajLen => c.demos.trajectory_length = cell.value as usize,
        Axis::EpsilonRep => c.mcem.epsilon_rep = cell.value,
    }
    c
}

fn run_cell(
    world: &World,
    config: &ExperimentConfig,
    cell: Cell,
) -> Vec<(SweepRow, Option<TimingRow>)> {
    let c = cell_config(config, cell);
    let master = config.seed;
    let demo_seed = seeds::replica(pipeline::demo_seed(config, master), cell.replication);
    let demos =
        pipeline::sample_demos(world, c.demos.n_demos, c.demos.trajectory_length, demo_seed);
    c.methods
        .run
        .iter()
        .map(|&method| {
            let trained = demos
                .as_ref()
                .map_err(|e| CliError::Config(e.to_string()))
                .and_then(|d| {
                    pipeline::train(
                        world,
                        d,
                        method,
                        &c,
                        RunSeeds::new(master, cell.replication),
                    )
                });
            let mut row = SweepRow {
                axis: cell.axis.to_string(),
                value: cell.value,
                replication: cell.replication,
                method: method.to_string(),
                seed: master,
                evd: None,
                converged: None,
                error: None,
            };
            match trained {
                Ok(t) => {
                    log::info!(
                        "{} = {} rep {} {method}: EVD {:.6}",
                        cell.axis,
                        cell.value,
                        cell.replication,
                        t.evd
                    );
                    row.evd = Some(t.evd);
                    row.converged = Some(t.converged);
                    let timing = TimingRow {
                        method: format!(
                            "{method}@{}={}#{}",
                            cell.axis, cell.value, cell.replication
                        ),
                        seed: master,
                        wall_seconds: t.seconds,
                    };
                    (row, Some(timing))
                }
                Err(e) => {
                    log::error!(
                        "{} = {} rep {} {method} failed: {e}",
                        cell.axis,
                        cell.value,
                        cell.replication
                    );
                    row.error = Some(e.to_string());
                    (row, None)
                }
            }
        })
        .collect()
}

pub fn sweep(config: &ExperimentConfig, out: &Path) -> CliResult<SweepReport> {
    ensure_dir(out)?;
    let (report, timings) = run_sweep(config)?;
    write_file(&out.join(SWEEP_FILE), &results::to_csv(&report.rows)?)?;
    write_file(
        &out.join(SWEEP_SUMMARY_FILE),
        &results::to_csv(&report.summary)?,
    )?;
    write_file(&out.join(SWEEP_TIMINGS_FILE), &results::to_csv(&timings)?)?;
    Ok(report)
}

/// Scores an external weight CSV. The instance is read from `instance` when
/// given, otherwise generated from the config.
pub fn eval_evd(
    config: &ExperimentConfig,
    weights: &Path,
    instance: Option<&PathBuf>,
    out: Option<&Path>,
) -> CliResult<f64> {
    let world = match instance {
        Some(path) => {
            let inst = ObjectworldInstance::<f64>::from_text(&read_file(path)?)
                .map_err(CliError::core(path.display().to_string()))?;
            World::from_instance(inst, config.features.variant)?
        }
        None => pipeline::build_world(config, config.seed)?,
    };
    let w = WeightVector::<f64>::from_csv(&read_file(weights)?)
        .map_err(CliError::core(weights.display().to_string()))?;
    if w.dim() != world.features.n_cols() {
        return Err(CliError::Config(format!(
            "{} has {} weights but the {:?} features have {} columns",
            weights.display(),
            w.dim(),
            config.features.variant,
            world.features.n_cols()
        )));
    }
    let evd = world.evd(&w)?;
    if let Some(out) = out {
        ensure_dir(out)?;
        write_file(
            &out.join("eval_evd.csv"),
            &format!("weights,evd\n{},{evd}\n", weights.display()),
        )?;
    }
    Ok(evd)
}
