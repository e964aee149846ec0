//! The `solv3d` command-line front end.

mod output;
pub mod spec;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::classify::{classify, verify_classification, ClassificationReport, ReachModel, Taxonomy, VerificationLog, VerifyConfig};
use crate::control::{ControlRange, PiecewiseControl};
use crate::covering::CoveringMap;
use crate::group::{GroupElement, GroupVariant};
use crate::kernel2d::Vec2;
use crate::plan::{circle_hop, fiber_sync, CircleHopConnector, SpiralQuotient};
use crate::reach::control_set_estimate;
use crate::system::{conjugate_to_planar, nilrank, normalize_eta, simulate, PlanarReduction, SystemSpec};
use output::Svg;
use spec::{box_from_values, Loaded, Resolved, SpecFile};

pub const SCHEMA_VERSION: u32 = 1;

const EXIT_CODES: &str = "Exit codes:
  0  success
  1  input error: malformed spec, control out of range, violated planner hypothesis
  2  system left unclassified (rank condition fails or no verdict applies)

SOLV3D_THREADS caps the number of worker threads used for reachability sampling.";

#[derive(Parser, Debug)]
#[command(name = "solv3d", version, about = "Linear control systems on three-dimensional solvable Lie groups", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args, Debug)]
struct Flags {
    /// Seed for all random sampling
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of sampled trajectories per direction
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Time horizon of sampled trajectories
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Half-width of a centred square, or xmin,xmax,ymin,ymax
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    grid_box: Option<Vec<f64>>,
    /// Grid cells per side
    #[arg(long, global = true)]
    grid_res: Option<usize>,
    /// Integration step for simulation and planners
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Directory for output files
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify the control sets and write report.json
    Classify {
        spec: PathBuf,
        /// Cross-check the verdict numerically
        #[arg(long)]
        verify: bool,
    },
    /// Integrate a piecewise-constant control and write trajectory.csv
    Simulate {
        spec: PathBuf,
        /// CSV of duration,value rows
        #[arg(long)]
        control: PathBuf,
        /// Start point t,v1,v2 (default: identity)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        start: Option<Vec<f64>>,
        /// Also write trajectory.svg
        #[arg(long)]
        svg: bool,
    },
    /// Sample forward and backward orbits of the identity on a grid
    Reach { spec: PathBuf },
    /// Build steering controls
    Plan {
        #[command(subcommand)]
        planner: Planner,
    },
}

#[derive(Subcommand, Debug)]
enum Planner {
    /// Steer v (at t = 0) to the equilibrium v(hub) and back (θ = R, A = μR)
    CircleHop {
        spec: PathBuf,
        /// Start v1,v2
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from: Vec<f64>,
        /// Control value whose equilibrium is the target
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        hub: f64,
    },
    /// Steer t,v1,v2 to t,v1,v2 in the rotation case
    FiberSync {
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        to: Vec<f64>,
        /// Dwell controls (default: midpoints of the two halves of I0)
        #[arg(long, allow_negative_numbers = true)]
        u1: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        u2: Option<f64>,
    },
    /// Staircase between quotient levels x and y of a spiral system
    Staircase {
        spec: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        /// Only go from x to y instead of the closed loop
        #[arg(long)]
        one_way: bool,
    },
}

struct Failure {
    code: i32,
    msg: String,
}

type CliResult<T> = std::result::Result<T, Failure>;

fn input<E: std::fmt::Display>(e: E) -> Failure {
    Failure {
        code: 1,
        msg: e.to_string(),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("SOLV3D_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if n > 0 {
            // a second call fails harmlessly when the pool already exists
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn resolve(file: &SpecFile, f: &Flags) -> CliResult<Resolved> {
    let n = &file.numerics;
    let grid = n.grid.clone().unwrap_or_default();
    let bbox = match (&f.grid_box, &grid.bbox) {
        (Some(b), _) | (None, Some(b)) => box_from_values(b).map_err(input)?,
        (None, None) => [-10.0, 10.0, -10.0, 10.0],
    };
    let r = Resolved {
        step: f.step.or(n.step).unwrap_or(1e-3),
        seed: f.seed.or(n.seed).unwrap_or(0),
        grid_box: bbox,
        grid_resolution: f.grid_res.or(grid.resolution).unwrap_or(64),
        horizon: f.horizon.or(n.horizon).unwrap_or(30.0),
        budget: f.budget.or(n.budget).unwrap_or(100_000),
    };
    if !(r.step > 0.0 && r.step.is_finite()) {
        return Err(input("--step must be positive"));
    }
    r.reach_config().validate().map_err(input)?;
    Ok(r)
}

fn write(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| input(format!("{}: {e}", p.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

const TOOL: Tool = Tool {
    name: "solv3d",
    version: env!("CARGO_PKG_VERSION"),
};

#[derive(Serialize)]
struct ReportFile<'a> {
    schema_version: u32,
    tool: Tool,
    input: &'a SpecFile,
    numerics: Resolved,
    classification: &'a ClassificationReport,
    verification: Option<&'a VerificationLog>,
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    let flags = &cli.flags;
    match &cli.command {
        Command::Classify { spec, verify } => cmd_classify(spec, *verify, flags),
        Command::Simulate {
            spec,
            control,
            start,
            svg,
        } => cmd_simulate(spec, control, start.as_deref(), *svg, flags),
        Command::Reach { spec } => cmd_reach(spec, flags),
        Command::Plan { planner } => cmd_plan(planner, flags),
    }
}

fn load(spec: &Path, flags: &Flags) -> CliResult<(Loaded, Resolved)> {
    let loaded = spec::load(spec).map_err(input)?;
    let r = resolve(&loaded.file, flags)?;
    Ok((loaded, r))
}

fn cmd_classify(spec: &Path, verify: bool, flags: &Flags) -> CliResult<i32> {
    let (l, num) = load(spec, flags)?;
    let report = classify(&l.system);
    let log = if verify && report.taxonomy != Taxonomy::Unclassified {
        configure_threads();
        let cfg = VerifyConfig {
            reach: num.reach_config(),
            seed: num.seed,
            step: num.step,
            ..VerifyConfig::default()
        };
        Some(verify_classification(&report, &l.system, &cfg).map_err(input)?.log)
    } else {
        None
    };
    let file = ReportFile {
        schema_version: SCHEMA_VERSION,
        tool: TOOL,
        input: &l.file,
        numerics: num,
        classification: &report,
        verification: log.as_ref(),
    };
    write(&flags.out_dir, "report.json", &to_json(&file))?;
    println!("taxonomy: {}", serde_json::to_value(report.taxonomy).expect("enum").as_str().unwrap_or("?"));
    if let Some(lift) = &report.lift {
        println!(
            "simply connected lift: {}",
            serde_json::to_value(lift.taxonomy).expect("enum").as_str().unwrap_or("?")
        );
    }
    if let Some(log) = &log {
        for c in &log.checks {
            println!("check {}: {}", c.name, if c.passed { "ok" } else { "FAILED" });
        }
        if !log.passed {
            eprintln!("warning: {} verification discrepancies", log.discrepancies);
        }
    }
    if report.taxonomy == Taxonomy::Unclassified {
        eprintln!("unclassified: {}", report.reason.as_deref().unwrap_or(""));
        return Ok(2);
    }
    Ok(0)
}

fn parse_point(v: &[f64], what: &str) -> CliResult<GroupElement> {
    match *v {
        [t, a, b] => GroupElement::checked(t, Vec2::new(a, b)).map_err(input),
        _ => Err(input(format!("{what} needs three values t,v1,v2"))),
    }
}

fn cmd_simulate(spec: &Path, control: &Path, start: Option<&[f64]>, svg: bool, flags: &Flags) -> CliResult<i32> {
    let (l, num) = load(spec, flags)?;
    let text = fs::read_to_string(control).map_err(|e| input(format!("{}: {e}", control.display())))?;
    let ctrl = PiecewiseControl::from_csv(&text).map_err(|e| input(format!("{}: {e}", control.display())))?;
    ctrl.check_range(&l.system.omega())
        .map_err(|e| input(format!("{}: {e}", control.display())))?;
    let g0 = match start {
        Some(v) => parse_point(v, "--start")?,
        None => GroupElement::IDENTITY,
    };
    let sys = l.system;
    let tr = simulate(g0, &ctrl, &sys.lifted(), num.step).map_err(input)?;
    let csv = if sys.variant() == GroupVariant::SimplyConnected {
        output::trajectory_csv(&tr, None)
    } else {
        let cover = CoveringMap::new(sys.variant(), sys.theta()).map_err(input)?;
        let (down, windings) = cover.project_trajectory(&tr).map_err(input)?;
        output::trajectory_csv(&tr, Some((&down, &windings)))
    };
    write(&flags.out_dir, "trajectory.csv", &csv)?;
    if svg {
        let pts: Vec<Vec2> = tr.samples.iter().map(|s| s.1.v).collect();
        let curve = equilibrium_curve(&sys);
        let mut plot = Svg::fit(pts.iter().copied().chain(curve.iter().flatten().copied()));
        for c in &curve {
            plot.polyline(c, "#c33");
        }
        plot.polyline(&pts, "black");
        plot.dot(tr.start().v, "blue");
        plot.label("(v1, v2); red: equilibria at t = 0");
        write(&flags.out_dir, "trajectory.svg", &plot.finish())?;
    }
    println!("samples: {}", tr.samples.len());
    Ok(0)
}

/// Equilibria `v(u)` over `Ω̂` in group coordinates at `t = 0`.
fn equilibrium_curve(sys: &SystemSpec) -> Vec<Vec<Vec2>> {
    let Ok(red) = conjugate_to_planar(sys) else {
        return Vec::new();
    };
    planar_curve(&red)
        .into_iter()
        .map(|c| c.into_iter().map(|w| red.from_planar(0.0, w).v).collect())
        .collect()
}

fn cmd_reach(spec: &Path, flags: &Flags) -> CliResult<i32> {
    let (l, num) = load(spec, flags)?;
    configure_threads();
    let model = ReachModel::for_system(&l.system).map_err(input)?;
    let cfg = num.reach_config();
    let grid = model.reach(&cfg).map_err(input)?;
    let est = control_set_estimate(&grid);
    let dir = &flags.out_dir;
    write(dir, "occupancy.csv", &output::occupancy_csv(&cfg, &grid.plus, &grid.minus, &est.cells))?;
    write(dir, "plus.pgm", &output::pgm(&grid.plus))?;
    write(dir, "minus.pgm", &output::pgm(&grid.minus))?;
    write(dir, "estimate.pgm", &output::pgm(&est.cells))?;

    let b = cfg.bbox;
    let mut plot = Svg::new([b.xmin, b.xmax, b.ymin, b.ymax]);
    plot.cells(&cfg, &grid.plus, "#dde");
    plot.cells(&cfg, &est.cells, "#668");
    if let ReachModel::Planar(red) = &model {
        for c in planar_curve(red) {
            plot.polyline(&c, "#c33");
        }
    }
    plot.dot(model.base(), "black");
    plot.label(&format!("{}; dark: estimate, light: forward orbit", model.coordinates()));
    write(dir, "reach.svg", &plot.finish())?;

    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "coordinates": model.coordinates(),
        "numerics": num,
        "base": model.base(),
        "cells": {
            "forward": est.forward_count,
            "backward": est.backward_count,
            "estimate": est.count,
        },
        "base_in_estimate": est.contains_point(model.base()),
        "window_fill": est.window_fill(model.base(), 10),
        "diagnostics": grid.diagnostics,
    });
    write(dir, "reach.json", &to_json(&summary))?;
    println!("estimate cells: {}", est.count);
    Ok(0)
}

/// `u ↦ v(u)` over the components of `Ω̂`, in planar coordinates.
fn planar_curve(red: &PlanarReduction) -> Vec<Vec<Vec2>> {
    let p = red.planar;
    p.omega_hat()
        .intervals
        .iter()
        .map(|iv| {
            let n = 200;
            let shrink = 1e-3 * iv.width();
            (0..=n)
                .filter_map(|k| p.equilibrium(iv.lo + shrink + (iv.width() - 2.0 * shrink) * k as f64 / n as f64).ok())
                .collect()
        })
        .collect()
}

/// Converts planar controls `ũ` to system controls `ũ/α`, absorbing the
/// rounding at the ends of Ω.
fn system_units(ctrl: &PiecewiseControl, alpha: f64, omega: &ControlRange) -> CliResult<PiecewiseControl> {
    let pieces = ctrl
        .pieces()
        .iter()
        .map(|&(d, u)| (d, (u / alpha).clamp(omega.u_min(), omega.u_max())))
        .collect();
    PiecewiseControl::new(pieces).map_err(input)
}

fn rotation_reduction(sys: &SystemSpec) -> CliResult<PlanarReduction> {
    let red = conjugate_to_planar(sys).map_err(input)?;
    if red.planar.rotation_rate().is_none() {
        return Err(input("hypothesis violated: needs theta = R and A = mu R"));
    }
    Ok(red)
}

fn cmd_plan(planner: &Planner, flags: &Flags) -> CliResult<i32> {
    let dir = &flags.out_dir;
    match planner {
        Planner::CircleHop { spec, from, hub } => {
            let (l, num) = load(spec, flags)?;
            let sys = l.system;
            let red = rotation_reduction(&sys)?;
            let v0 = match **from {
                [a, b] => Vec2::checked(a, b).map_err(input)?,
                _ => return Err(input("--from needs two values v1,v2")),
            };
            sys.omega().check(*hub).map_err(input)?;
            let i0 = red.planar.omega_hat().i0;
            let hub_p = red.planar_control(*hub);
            let plan = circle_hop(&red.planar, v0, hub_p, i0).map_err(input)?;
            let fwd = system_units(&plan.forward.control, red.alpha, &sys.omega())?;
            let back = system_units(&plan.back.control, red.alpha, &sys.omega())?;
            let target = red.from_planar(0.0, plan.forward.predicted).v;
            let reached = simulate(GroupElement::new(0.0, v0), &fwd, &sys.lifted(), num.step).map_err(input)?.end();
            let sim_err = (red.to_planar(reached).1 - plan.forward.predicted).norm();
            let returned = simulate(reached, &back, &sys.lifted(), num.step).map_err(input)?.end();
            let ret_err = (red.to_planar(returned).1 - v0).norm();
            write(dir, "control.csv", &fwd.to_csv())?;
            write(dir, "return_control.csv", &back.to_csv())?;
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "planner": "circle-hop",
                "start": v0,
                "target": target,
                "hub": hub,
                "u1": plan.u1 / red.alpha,
                "u2": plan.u2 / red.alpha,
                "hop_step": plan.hop_step,
                "pieces": fwd.len(),
                "duration": fwd.total_duration(),
                "error": plan.forward.error,
                "return_error": plan.back.error,
                "simulated_error": sim_err,
                "simulated_return_error": ret_err,
            });
            write(dir, "plan.json", &to_json(&report))?;
            println!("endpoint error: {:e}", plan.forward.error.max(plan.back.error));
            Ok(0)
        }
        Planner::FiberSync { spec, from, to, u1, u2 } => {
            let (l, num) = load(spec, flags)?;
            let sys = l.system;
            let red = rotation_reduction(&sys)?;
            let g1 = parse_point(from, "--from")?;
            let g2 = parse_point(to, "--to")?;
            let i0 = red.planar.omega_hat().i0;
            let (mut a, mut b) = (
                u1.map_or(0.5 * i0.lo, |u| red.planar_control(u)),
                u2.map_or(0.5 * i0.hi, |u| red.planar_control(u)),
            );
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            let conn = CircleHopConnector {
                spec: red.planar,
                interval: i0,
                hub: 0.0,
            };
            let r = fiber_sync(&red.planar, &conn, red.to_planar(g1), red.to_planar(g2), a, b).map_err(input)?;
            let ctrl = system_units(&r.control, red.alpha, &sys.omega())?;
            let reached = simulate(g1, &ctrl, &sys.lifted(), num.step).map_err(input)?.end();
            write(dir, "control.csv", &ctrl.to_csv())?;
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "planner": "fiber-sync",
                "start": g1,
                "target": g2,
                "u1": a / red.alpha,
                "u2": b / red.alpha,
                "pieces": ctrl.len(),
                "duration": ctrl.total_duration(),
                "error": r.error,
                "reached": reached,
                "simulated_error": reached.dist(&g2),
            });
            write(dir, "plan.json", &to_json(&report))?;
            println!("endpoint error: {:e}", r.error);
            Ok(0)
        }
        Planner::Staircase { spec, from, to, one_way } => {
            let (l, num) = load(spec, flags)?;
            let sys = l.system;
            if nilrank(&sys) != 0 {
                return Err(input(format!("hypothesis violated: staircase needs A = 0, nilrank is {}", nilrank(&sys))));
            }
            let (norm, shift) = normalize_eta(&sys).map_err(input)?;
            let sq = SpiralQuotient::of_system(&norm).map_err(input)?;
            let plan = if *one_way {
                sq.connect(*from, *to, num.step)
            } else {
                sq.closed_loop(*from, *to, num.step)
            }
            .map_err(input)?;
            let q = SpiralQuotient::fiber(&norm).map_err(input)?;
            let rq = q.rot90();
            let g0 = shift.inverse(GroupElement::new(0.0, rq.scale(from / q.norm_sq())));
            let end = shift.forward(simulate(g0, &plan.control, &sys.lifted(), num.step).map_err(input)?.end());
            let goal = plan.predicted.1;
            let sim_err = end.t.abs().max((end.v.dot(rq) - goal).abs());
            write(dir, "control.csv", &plan.control.to_csv())?;
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "planner": "staircase",
                "closed_loop": !one_way,
                "from": from,
                "to": to,
                "fiber": q,
                "pieces": plan.control.len(),
                "duration": plan.control.total_duration(),
                "error": plan.error,
                "simulated_error": sim_err,
            });
            write(dir, "plan.json", &to_json(&report))?;
            println!("endpoint error: {:e}", plan.error);
            Ok(0)
        }
    }
}
