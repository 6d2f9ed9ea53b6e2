//! `kneelink` command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 computation or
//! solver failure, 3 file input/output.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand};
use kneelink::config::KeyValues;
use kneelink::gait::{self, Source};
use kneelink::kinematics::{grashof_classify, monotone_stroke_branch, write_rom_csv};
use kneelink::optimizer::{self, grid_search, sensitivity_scan, solve, ScanAxis, SolveStatus};
use kneelink::simulation::{self, knee_trajectory, render_frames, sts_stroke_range};
use kneelink::{build_problem, knee_angle, rom_curve, singularity_margin, Error, LinkSet};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "kneelink", version, about = "Four-bar knee exoskeleton synthesis toolkit")]
struct Cli {
    /// Key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set d_min_mm=250`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Maximise the knee angle at minimum stroke.
    Optimize {
        /// Also run the lattice oracle with this many points per axis.
        #[arg(long, value_name = "N")]
        grid_check: Option<usize>,
    },
    /// Knee angle and intermediates for `l1 .. l6 d` (configured links and
    /// d_min when omitted).
    Angle {
        #[arg(num_args = 0..=7, allow_negative_numbers = true)]
        values: Vec<f64>,
        /// Emit the breakdown as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Knee angle over a stroke range, written as CSV.
    Sweep,
    /// Mechanism frames, trajectories and synthetic markers.
    Simulate,
    /// Compare human and exoskeleton marker recordings.
    Gait,
    /// Analytic angle against the nearest simulation frame.
    Validate,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidBounds { .. } => 1,
        Error::Io { .. }
        | Error::Csv { .. }
        | Error::MalformedHeader { .. }
        | Error::TooFewSamples { .. }
        | Error::NonMonotonicTime { .. } => 3,
        _ => 2,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            error: e.into(),
        }
    }
}

fn config_failure(error: anyhow::Error) -> Failure {
    Failure { code: 1, error }
}

fn compute_failure(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 3,
        error: anyhow::Error::new(e).context(format!("writing {}", path.display())),
    }
}

type CmdResult = Result<(), Failure>;

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut kv = match &cli.config {
        Some(path) => KeyValues::load(path).map_err(|e| match e {
            Error::Io { .. } => Failure::from(e),
            other => config_failure(other.into()),
        })?,
        None => KeyValues::new(),
    };
    for pair in &cli.overrides {
        kv.set_pair(pair).map_err(|e| config_failure(e.into()))?;
    }
    RunConfig::from_key_values(kv).map_err(|e| config_failure(e.into()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_failure(path, e))
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> CmdResult {
    let mut f = create(path)?;
    body(&mut f).and_then(|_| f.flush()).map_err(|e| io_failure(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn print_links(title: &str, x: &[f64; 6]) {
    println!("{title}");
    for (i, v) in x.iter().enumerate() {
        println!("  l{} = {v:.6} mm", i + 1);
    }
}

fn cmd_optimize(cfg: &RunConfig, grid_check: Option<usize>) -> CmdResult {
    let problem = build_problem(&cfg.problem)?;
    let theta_initial = knee_angle(&LinkSet::from_array(cfg.start)?, cfg.problem.d_min_mm)
        .map(|k| k.theta_deg)
        .ok();
    let report = solve(&problem, &cfg.start, &cfg.solver)?;

    let dir = &cfg.out_dir;
    write_file(&dir.join("report.txt"), |f| optimizer::write_text_report(&report, f))?;
    write_file(&dir.join("constraints.csv"), |f| optimizer::write_constraint_csv(&report, f))?;
    write_file(&dir.join("trace.csv"), |f| optimizer::write_trace_csv(&report, f))?;
    let scans = (0..6)
        .map(|axis| sensitivity_scan(&problem, &report.x_star.0, ScanAxis::Variable(axis), 2.0, 21))
        .collect::<kneelink::Result<Vec<_>>>()?;
    write_file(&dir.join("scans.csv"), |f| {
        writeln!(f, "axis,offset_mm,neg_theta_deg,feasible")?;
        for (axis, scan) in scans.iter().enumerate() {
            for (t, v) in scan.offsets.iter().zip(&scan.values) {
                match v {
                    Some(v) => writeln!(f, "l{},{t},{v},1", axis + 1)?,
                    None => writeln!(f, "l{},{t},,0", axis + 1)?,
                }
            }
        }
        Ok(())
    })?;

    match theta_initial {
        Some(t) => println!("theta(initial) = {t:.6} deg"),
        None => println!("theta(initial) = infeasible"),
    }
    println!("theta(phase-one start) = {:.6} deg", report.theta_start);
    println!("theta(optimal) = {:.6} deg", report.theta_star);
    if let Some(t) = theta_initial {
        println!(
            "improvement over initial = {:.3} %",
            100.0 * (report.theta_star - t) / t
        );
    }
    println!("status = {}", report.status);
    println!("kkt_residual = {:e}", report.kkt_residual);
    let active: Vec<&str> = report.active_constraints().map(|c| c.label.as_str()).collect();
    println!("active constraints = {}", active.join(", "));
    print_links("optimal links:", &report.x_star.0);

    if let Some(n) = grid_check {
        match grid_search(&problem, n) {
            Ok(grid) => {
                println!("grid({n}) theta = {:.6} deg at {:?}", grid.theta_deg, grid.x.0);
                println!("solver theta = {:.6} deg", report.theta_star);
                if report.theta_star < grid.theta_deg - 0.5 {
                    return Err(compute_failure(anyhow!(
                        "solver result {:.6} deg is more than 0.5 deg below the grid oracle {:.6} deg",
                        report.theta_star,
                        grid.theta_deg
                    )));
                }
            }
            Err(kneelink::Error::NoFeasibleGridPoint { .. }) => {
                println!("grid({n}): no feasible lattice point, nothing to compare");
                println!("solver theta = {:.6} deg", report.theta_star);
            }
            Err(e) => return Err(e.into()),
        }
    }
    if report.status != SolveStatus::Converged {
        return Err(compute_failure(anyhow!(
            "solver stopped with status {} (kkt residual {:e})",
            report.status,
            report.kkt_residual
        )));
    }
    Ok(())
}

fn cmd_angle(cfg: &RunConfig, values: &[f64], json: bool) -> CmdResult {
    let (links, d) = match values.len() {
        0 => (cfg.links, cfg.problem.d_min_mm),
        7 => (
            LinkSet::from_slice(&values[..6]).map_err(|e| config_failure(e.into()))?,
            values[6],
        ),
        n => {
            return Err(config_failure(anyhow!(
                "angle takes either no values or `l1 l2 l3 l4 l5 l6 d`, got {n} values"
            )))
        }
    };
    let k = knee_angle(&links, d)?;
    let grashof = grashof_classify(&links);
    let margin = singularity_margin(&links, d);
    if json {
        let mut v = serde_json::to_value(k).map_err(|e| compute_failure(e.into()))?;
        v["d_mm"] = d.into();
        v["singularity_margin_mm"] = margin.into();
        v["grashof_margin_mm"] = grashof.margin_mm.into();
        v["crank_rocker"] = grashof.is_crank_rocker().into();
        println!("{}", serde_json::to_string_pretty(&v).map_err(|e| compute_failure(e.into()))?);
    } else {
        println!("links = {links}");
        println!("d = {d} mm");
        println!("alpha1 = {} deg", k.alpha1_deg);
        println!("alpha2 = {} deg", k.alpha2_deg);
        println!("l7 = {} mm", k.l7_mm);
        println!("l8 = {} mm", k.l8_mm);
        println!("beta1 = {} deg", k.beta1_deg);
        println!("beta2 = {} deg", k.beta2_deg);
        println!("theta = {} deg", k.theta_deg);
        println!("singular = {}", k.singular);
        println!("singularity margin = {margin} mm");
        println!(
            "grashof margin = {} mm ({})",
            grashof.margin_mm,
            if grashof.is_crank_rocker() { "crank-rocker" } else { "violated" }
        );
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig) -> CmdResult {
    let links = cfg.links;
    let d_lo = cfg.sweep_d_lo.unwrap_or(cfg.problem.d_min_mm);
    let d_hi = match cfg.sweep_d_hi {
        Some(d) => d,
        None => monotone_stroke_branch(&links)
            .map(|(_, hi)| hi)
            .ok_or_else(|| compute_failure(anyhow!("links {links} have no feasible stroke")))?,
    };
    let points = rom_curve(&links, d_lo, d_hi, cfg.sweep_n)?;
    let path = cfg.out_dir.join("rom.csv");
    write_file(&path, |f| write_rom_csv(&points, f))?;
    let feasible = points.iter().filter(|p| p.is_feasible()).count();
    println!("rom curve: {} points, {feasible} feasible, d in [{d_lo}, {d_hi}] mm", points.len());
    println!("written to {}", path.display());
    Ok(())
}

fn sts_range(cfg: &RunConfig) -> Result<(f64, f64), Failure> {
    match cfg.simulate_d_hi {
        Some(hi) => Ok((cfg.problem.d_min_mm, hi)),
        None => Ok(sts_stroke_range(&cfg.links, cfg.problem.d_min_mm)?),
    }
}

fn cmd_simulate(cfg: &RunConfig) -> CmdResult {
    let (d_lo, d_hi) = sts_range(cfg)?;
    let series = simulation::simulate_sts(&cfg.links, d_lo, d_hi, cfg.simulate_frames)?;
    let frames_dir = cfg.out_dir.join("frames");
    render_frames(&series, &frames_dir)?;
    let traj = knee_trajectory(&series);
    write_file(&cfg.out_dir.join("trajectory.csv"), |f| {
        simulation::write_trajectory_csv(&traj, f)
    })?;
    let markers = cfg.out_dir.join("markers.csv");
    gait::write_synthetic_sts(&cfg.links, d_lo, d_hi, cfg.simulate_frames, &markers)?;
    println!(
        "{} frames over d in [{d_lo}, {d_hi}] mm ({} feasible)",
        series.len(),
        series.feasible().count()
    );
    for f in &series.frames {
        match f.theta_deg {
            Some(t) => println!("  d = {:.6} mm  theta = {t:.6} deg", f.d_mm),
            None => println!("  d = {:.6} mm  infeasible", f.d_mm),
        }
    }
    println!("frames in {}", frames_dir.display());
    Ok(())
}

fn cmd_gait(cfg: &RunConfig) -> CmdResult {
    let need = |p: &Option<PathBuf>, key: &str| {
        p.clone()
            .ok_or_else(|| config_failure(anyhow!("`{key}` is required for gait")))
    };
    let human = gait::load_markers(need(&cfg.gait_human, "gait.human")?, Source::Human)?;
    let exo = gait::load_markers(need(&cfg.gait_exo, "gait.exo")?, Source::Exoskeleton)?;
    let cmp = gait::compare_recordings(&human, &exo, cfg.gait_n)?;
    let summary = cmp.angle_errors.summary(cfg.gait_zero_tol);
    let knee_summary = cmp.knee_path_errors.summary(cfg.gait_zero_tol);
    write_file(&cfg.out_dir.join("gait_error.csv"), |f| {
        gait::write_error_csv(&cmp.angles, &cmp.angle_errors, f)
    })?;
    write_file(&cfg.out_dir.join("gait_summary.txt"), |f| gait::write_summary(&summary, f))?;

    println!("human samples = {} (dropped {}, degenerate {})", human.samples.len(), human.dropped, cmp.human_degenerate);
    println!("exo samples = {} (dropped {}, degenerate {})", exo.samples.len(), exo.dropped, cmp.exo_degenerate);
    println!("angle relative error: max = {} mean = {} median = {}", summary.max, summary.mean, summary.median);
    println!("fraction-zero = {}", summary.fraction_zero);
    println!(
        "knee path relative error: max = {} mean = {} median = {}",
        knee_summary.max, knee_summary.mean, knee_summary.median
    );
    Ok(())
}

fn cmd_validate(cfg: &RunConfig) -> CmdResult {
    let (d_lo, d_hi) = sts_range(cfg)?;
    let d_hi = d_hi.max(cfg.validate_d_mm);
    let (_, v) = simulation::validate_stroke(&cfg.links, d_lo, d_hi, cfg.validate_step, cfg.validate_d_mm)?;
    println!("d = {} mm", v.d_mm);
    println!("analytic theta = {:.12} deg", v.analytic_theta_deg);
    println!("frame d = {} mm", v.frame_d_mm);
    println!("frame theta = {:.12} deg", v.frame_theta_deg);
    println!("difference = {:e} deg", v.discrepancy_deg());
    if v.discrepancy_deg() > 1e-9 {
        return Err(compute_failure(anyhow!(
            "frame and analytic angles differ by {:e} deg",
            v.discrepancy_deg()
        )));
    }
    Ok(())
}

fn run(cli: &Cli) -> CmdResult {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Optimize { grid_check } => cmd_optimize(&cfg, *grid_check),
        Command::Angle { values, json } => cmd_angle(&cfg, values, *json),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Gait => cmd_gait(&cfg),
        Command::Validate => cmd_validate(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
