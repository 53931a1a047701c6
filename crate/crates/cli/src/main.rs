//! `cdpr` — one binary for the whole toolkit: kinematics queries, workspace
//! scans, serving a plant or gateway over TCP, running control-loop
//! experiments (in-process simulated time or against live servers) and
//! post-run analysis.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 infeasible/degenerate
//! query result.

use std::fs;
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use cdpr_core::analysis::{
    compare_logs, delay_report, emit_report, horizontal_segments, segment_error, DelayReport,
    ErrorReport,
};
use cdpr_core::kinematics::{cable_lengths, fk_closed};
use cdpr_core::model::{load_robot, reference_robot, RobotDescription, Vec2};
use cdpr_core::netloop::{
    run_controller_tcp, run_gateway, run_simulated_loop, serve_plant_tcp, ControllerConfig,
    GatewayConfig, LoopLog, SimLoopSpec, TimeMode,
};
use cdpr_core::numfmt::fmt_g6;
use cdpr_core::plant::{PlantConfig, PlantMode};
use cdpr_core::statics::{is_feasible, workspace_scan, write_workspace_csv};
use cdpr_core::trajectory::{load_plan, plan_square, TrajectoryPlan};

#[derive(Parser)]
#[command(
    name = "cdpr",
    version,
    about = "Design and experiment toolkit for planar cable-driven parallel robots"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cable lengths for a pose (inverse kinematics)
    Ik(PoseArgs),
    /// Pose for a pair of cable lengths (forward kinematics)
    Fk(FkArgs),
    /// Static cable tensions for a pose, with a feasibility verdict
    Tensions(PoseArgs),
    /// Scan a rectangle for static-equilibrium feasibility, writing a CSV map
    Workspace(WorkspaceArgs),
    /// Serve one plant session over TCP
    ServePlant(ServePlantArgs),
    /// Forward one controller⇄plant session, injecting delay and jitter
    ServeGateway(ServeGatewayArgs),
    /// Run a control-loop experiment and write its log
    RunLoop(RunLoopArgs),
    /// Delay and tracking-error reports from experiment logs
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct PoseArgs {
    /// Robot description JSON (defaults to the built-in reference robot)
    #[arg(long)]
    robot: Option<PathBuf>,
    #[arg(long)]
    x: f64,
    #[arg(long)]
    y: f64,
}

#[derive(Args)]
struct FkArgs {
    #[arg(long)]
    robot: Option<PathBuf>,
    /// Cable 1 length [mm]
    #[arg(long)]
    l1: f64,
    /// Cable 2 length [mm]
    #[arg(long)]
    l2: f64,
}

#[derive(Args)]
struct WorkspaceArgs {
    #[arg(long)]
    robot: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    x_min: f64,
    #[arg(long, default_value_t = 1500.0)]
    x_max: f64,
    #[arg(long, default_value_t = 0.0)]
    y_min: f64,
    #[arg(long, default_value_t = 1500.0)]
    y_max: f64,
    /// Grid spacing [mm]
    #[arg(long, default_value_t = 10.0)]
    spacing: f64,
    /// Output CSV path
    #[arg(long, default_value = "workspace.csv")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Spring-damper cable physics
    Dynamic,
    /// End-effector rigidly at the FK of the axis lengths
    #[value(alias = "ideal")]
    IdealKinematic,
}

impl From<ModeArg> for PlantMode {
    fn from(m: ModeArg) -> PlantMode {
        match m {
            ModeArg::Dynamic => PlantMode::Dynamic,
            ModeArg::IdealKinematic => PlantMode::IdealKinematic,
        }
    }
}

#[derive(Args)]
struct PlantFlags {
    #[arg(long, value_enum, default_value_t = ModeArg::Dynamic)]
    plant_mode: ModeArg,
    /// Integration step [s]
    #[arg(long)]
    dt: Option<f64>,
    /// Cable stiffness [N/mm]
    #[arg(long)]
    stiffness: Option<f64>,
    /// Cable damping [N·s/mm]
    #[arg(long)]
    damping: Option<f64>,
    /// Axis speed limit [mm/s]
    #[arg(long)]
    axis_max_speed: Option<f64>,
    /// Axis first-order lag time constant [s]
    #[arg(long)]
    axis_time_constant: Option<f64>,
}

impl PlantFlags {
    fn config(&self) -> PlantConfig {
        let mut cfg = PlantConfig {
            mode: self.plant_mode.into(),
            ..PlantConfig::default()
        };
        if let Some(v) = self.dt {
            cfg.dt_s = v;
        }
        if let Some(v) = self.stiffness {
            cfg.stiffness_n_per_mm = v;
        }
        if let Some(v) = self.damping {
            cfg.damping_ns_per_mm = v;
        }
        if let Some(v) = self.axis_max_speed {
            cfg.axis_max_speed_mmps = v;
        }
        if let Some(v) = self.axis_time_constant {
            cfg.axis_time_constant_s = v;
        }
        cfg
    }
}

#[derive(Args)]
struct ServePlantArgs {
    #[arg(long)]
    robot: Option<PathBuf>,
    /// Address to listen on
    #[arg(long, default_value = "127.0.0.1:4400")]
    listen: String,
    #[command(flatten)]
    plant: PlantFlags,
}

#[derive(Args)]
struct ServeGatewayArgs {
    /// Address to listen on (controller side)
    #[arg(long, default_value = "127.0.0.1:4401")]
    listen: String,
    /// Plant address to forward to
    #[arg(long)]
    connect: String,
    /// Base one-way delay [ms]
    #[arg(long, default_value_t = 120.0)]
    delay: f64,
    /// Uniform jitter amplitude [ms]
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Jitter seed (CDPR_SEED overrides the default)
    #[arg(long)]
    seed: Option<u64>,
    /// Wall-clock delays instead of frame-carried simulated time
    #[arg(long)]
    realtime: bool,
}

#[derive(Args)]
struct SquareFlags {
    /// Cruise speed [mm/s]
    #[arg(long, default_value_t = 100.0)]
    speed: f64,
    /// Square side [mm]
    #[arg(long, default_value_t = 200.0)]
    side: f64,
    #[arg(long, default_value_t = 750.0)]
    center_x: f64,
    #[arg(long, default_value_t = 850.0)]
    center_y: f64,
    /// Acceleration [mm/s²]
    #[arg(long, default_value_t = 2000.0)]
    accel: f64,
}

impl SquareFlags {
    fn plan(&self) -> Result<TrajectoryPlan, String> {
        plan_square(
            Vec2::new(self.center_x, self.center_y),
            self.side,
            self.speed,
            self.accel,
        )
        .map_err(|e| e.to_string())
    }
}

#[derive(Args)]
struct RunLoopArgs {
    #[arg(long)]
    robot: Option<PathBuf>,
    /// Trajectory plan JSON (instead of the square flags)
    #[arg(long, conflicts_with_all = ["speed", "side", "center_x", "center_y", "accel"])]
    plan: Option<PathBuf>,
    #[command(flatten)]
    square: SquareFlags,
    /// Controller cycle [ms]
    #[arg(long, default_value_t = 10.0)]
    cycle_ms: f64,
    #[command(flatten)]
    plant: PlantFlags,
    /// No gateway: controller talks to the plant directly (the default)
    #[arg(long, conflicts_with = "gateway_delay")]
    direct: bool,
    /// Insert a gateway with this base delay [ms]
    #[arg(long)]
    gateway_delay: Option<f64>,
    /// Gateway jitter amplitude [ms]
    #[arg(long, requires = "gateway_delay")]
    gateway_jitter: Option<f64>,
    /// Gateway seed (CDPR_SEED overrides the default)
    #[arg(long)]
    seed: Option<u64>,
    /// Log CSV path
    #[arg(long, default_value = "loop.csv")]
    log: PathBuf,
    /// Run against a live plant/gateway at this address instead of in-process
    #[arg(long, conflicts_with_all = ["direct", "gateway_delay", "gateway_jitter", "plant_mode",
                                      "dt", "stiffness", "damping", "axis_max_speed",
                                      "axis_time_constant"])]
    connect: Option<String>,
    /// Wall-clock pacing (only with --connect)
    #[arg(long, requires = "connect")]
    realtime: bool,
    /// Run everything from a manifest JSON instead of flags
    #[arg(long, conflicts_with_all = ["robot", "plan", "speed", "side", "center_x", "center_y",
                                      "accel", "cycle_ms", "plant_mode", "dt", "stiffness",
                                      "damping", "axis_max_speed", "axis_time_constant", "direct",
                                      "gateway_delay", "gateway_jitter", "log", "connect",
                                      "realtime"])]
    manifest: Option<PathBuf>,
    /// Canned experiment set; writes logs and reports under --out-dir
    #[arg(long, value_enum, conflicts_with_all = ["robot", "plan", "speed", "side", "center_x",
                                                  "center_y", "accel", "cycle_ms", "plant_mode",
                                                  "dt", "stiffness", "damping", "axis_max_speed",
                                                  "axis_time_constant", "direct", "gateway_delay",
                                                  "gateway_jitter", "log", "connect", "realtime",
                                                  "manifest"])]
    preset: Option<PresetArg>,
    /// Output directory for --preset
    #[arg(long, default_value = "paper-table-1-2", requires = "preset")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    /// Square at 100 and 1000 mm/s, remote (120±10 ms) vs local (20±5 ms) loop
    #[value(name = "paper-table-1-2")]
    PaperTable12,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// First (or only) experiment log
    #[arg(long)]
    log_a: PathBuf,
    /// Second log for a side-by-side error comparison
    #[arg(long)]
    log_b: Option<PathBuf>,
    #[arg(long)]
    label_a: Option<String>,
    #[arg(long, requires = "log_b")]
    label_b: Option<String>,
    /// The plan the logs were recorded against, for segment windows
    #[arg(long, conflicts_with_all = ["speed", "side", "center_x", "center_y", "accel"])]
    plan: Option<PathBuf>,
    /// Rebuild the square plan from flags instead of --plan
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long, default_value_t = 200.0)]
    side: f64,
    #[arg(long, default_value_t = 750.0)]
    center_x: f64,
    #[arg(long, default_value_t = 850.0)]
    center_y: f64,
    #[arg(long, default_value_t = 2000.0)]
    accel: f64,
    /// Report output directory
    #[arg(long, default_value = "analysis")]
    out_dir: PathBuf,
}

/// Everything `run-loop` needs, as a single reviewable file.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunManifest {
    /// Robot description path; built-in reference robot when omitted.
    robot: Option<PathBuf>,
    /// Trajectory plan path.
    plan: PathBuf,
    #[serde(default)]
    plant: Option<PlantConfig>,
    gateway: Option<ManifestGateway>,
    cycle_s: Option<f64>,
    seed: Option<u64>,
    out_dir: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestGateway {
    delay_ms: f64,
    #[serde(default)]
    jitter_ms: f64,
    seed: Option<u64>,
}

fn main() -> ExitCode {
    // die quietly when stdout goes away (`cdpr analyze | head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.exit_code() == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli.cmd) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Cmd) -> Result<ExitCode, String> {
    match cmd {
        Cmd::Ik(a) => cmd_ik(a),
        Cmd::Fk(a) => cmd_fk(a),
        Cmd::Tensions(a) => cmd_tensions(a),
        Cmd::Workspace(a) => cmd_workspace(a),
        Cmd::ServePlant(a) => cmd_serve_plant(a),
        Cmd::ServeGateway(a) => cmd_serve_gateway(a),
        Cmd::RunLoop(a) => cmd_run_loop(a),
        Cmd::Analyze(a) => cmd_analyze(a),
    }
}

fn load_desc(path: &Option<PathBuf>) -> Result<RobotDescription, String> {
    match path {
        Some(p) => load_robot(p).map_err(|e| format!("{}: {e}", p.display())),
        None => Ok(reference_robot()),
    }
}

/// Default-seed override: explicit flags/manifest entries win, then the
/// CDPR_SEED environment variable, then 42.
fn effective_seed(explicit: Option<u64>) -> Result<u64, String> {
    if let Some(s) = explicit {
        return Ok(s);
    }
    match std::env::var("CDPR_SEED") {
        Ok(v) => v
            .parse()
            .map_err(|_| format!("CDPR_SEED must be an integer, got {v:?}")),
        Err(_) => Ok(42),
    }
}

fn cmd_ik(a: PoseArgs) -> Result<ExitCode, String> {
    let desc = load_desc(&a.robot)?;
    let lengths = cable_lengths(&desc, Vec2::new(a.x, a.y));
    let parts: Vec<String> = lengths
        .iter()
        .enumerate()
        .map(|(i, l)| format!("l{}={}", i + 1, fmt_g6(*l)))
        .collect();
    println!("{}", parts.join(" "));
    Ok(ExitCode::SUCCESS)
}

fn cmd_fk(a: FkArgs) -> Result<ExitCode, String> {
    let desc = load_desc(&a.robot)?;
    match fk_closed(&desc, &[a.l1, a.l2]) {
        Ok(p) => {
            println!("x={} y={}", fmt_g6(p.x), fmt_g6(p.y));
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("no solution: {e}");
            Ok(ExitCode::from(2))
        }
    }
}

fn cmd_tensions(a: PoseArgs) -> Result<ExitCode, String> {
    let desc = load_desc(&a.robot)?;
    match is_feasible(&desc, Vec2::new(a.x, a.y)) {
        (feasible, Some(t)) => {
            let parts: Vec<String> = t
                .iter()
                .enumerate()
                .map(|(i, v)| format!("t{}={}", i + 1, fmt_g6(*v)))
                .collect();
            println!("{}", parts.join(" "));
            if feasible {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "infeasible: tensions outside [{}, {}] N",
                    fmt_g6(desc.tension_min_n),
                    fmt_g6(desc.tension_max_n)
                );
                Ok(ExitCode::from(2))
            }
        }
        (_, None) => {
            eprintln!("degenerate pose: no static equilibrium solution");
            Ok(ExitCode::from(2))
        }
    }
}

fn cmd_workspace(a: WorkspaceArgs) -> Result<ExitCode, String> {
    let desc = load_desc(&a.robot)?;
    let map = workspace_scan(&desc, (a.x_min, a.x_max), (a.y_min, a.y_max), a.spacing)
        .map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_workspace_csv(&map, &mut buf).map_err(|e| e.to_string())?;
    fs::write(&a.out, buf).map_err(|e| format!("{}: {e}", a.out.display()))?;
    let feasible = map.feasible_count();
    let total = map.cells.len();
    let area = feasible as f64 * a.spacing * a.spacing;
    println!(
        "{} of {} cells feasible, area ≈ {} mm² → {}",
        feasible,
        total,
        fmt_g6(area),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve_plant(a: ServePlantArgs) -> Result<ExitCode, String> {
    let desc = load_desc(&a.robot)?;
    let cfg = a.plant.config();
    cfg.validate(&desc).map_err(|e| e.to_string())?;
    let listener = TcpListener::bind(&a.listen).map_err(|e| format!("{}: {e}", a.listen))?;
    println!("plant listening on {}", a.listen);
    serve_plant_tcp(&desc, &cfg, &listener).map_err(|e| e.to_string())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve_gateway(a: ServeGatewayArgs) -> Result<ExitCode, String> {
    let cfg = GatewayConfig {
        base_delay_ms: a.delay,
        jitter_ms: a.jitter,
        seed: effective_seed(a.seed)?,
        mode: if a.realtime {
            TimeMode::Realtime
        } else {
            TimeMode::Simulated
        },
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let listener = TcpListener::bind(&a.listen).map_err(|e| format!("{}: {e}", a.listen))?;
    println!("gateway listening on {}, forwarding to {}", a.listen, a.connect);
    let (client, _) = listener.accept().map_err(|e| e.to_string())?;
    let _ = client.set_nodelay(true);
    let plant = TcpStream::connect(&a.connect).map_err(|e| format!("{}: {e}", a.connect))?;
    let _ = plant.set_nodelay(true);
    run_gateway(client, plant, &cfg).map_err(|e| e.to_string())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_run_loop(a: RunLoopArgs) -> Result<ExitCode, String> {
    if let Some(PresetArg::PaperTable12) = a.preset {
        let seed = effective_seed(a.seed)?;
        return run_preset(&a.out_dir, seed);
    }
    if let Some(path) = &a.manifest {
        let seed = a.seed;
        return run_manifest(path, seed);
    }

    let desc = load_desc(&a.robot)?;
    let plan = match &a.plan {
        Some(p) => load_plan(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => a.square.plan()?,
    };
    let cycle_s = a.cycle_ms * 1e-3;

    let log = if let Some(addr) = &a.connect {
        let ccfg = ControllerConfig {
            cycle_s,
            mode: if a.realtime {
                TimeMode::Realtime
            } else {
                TimeMode::Simulated
            },
        };
        run_controller_tcp(&desc, &plan, &ccfg, addr.as_str(), Some(&a.log))
            .map_err(|e| e.to_string())?
    } else {
        let gateway = match a.gateway_delay {
            Some(delay) => Some((
                delay,
                a.gateway_jitter.unwrap_or(0.0),
                effective_seed(a.seed)?,
            )),
            None => None,
        };
        let spec = SimLoopSpec {
            cycle_s,
            plant: a.plant.config(),
            gateway,
        };
        run_simulated_loop(&desc, &plan, &spec, Some(&a.log)).map_err(|e| e.to_string())?
    };

    print_run_summary(&log, &a.log);
    Ok(ExitCode::SUCCESS)
}

fn print_run_summary(log: &LoopLog, path: &Path) {
    let end_s = log.records.last().map_or(0.0, |r| r.t_us as f64 * 1e-6);
    println!(
        "{} cycles over {} s → {}",
        log.records.len(),
        fmt_g6(end_s),
        path.display()
    );
}

fn run_manifest(path: &Path, seed_flag: Option<u64>) -> Result<ExitCode, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let m: RunManifest =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let desc = load_desc(&m.robot)?;
    let plan = load_plan(&m.plan).map_err(|e| format!("{}: {e}", m.plan.display()))?;
    fs::create_dir_all(&m.out_dir).map_err(|e| format!("{}: {e}", m.out_dir.display()))?;
    let gateway = match &m.gateway {
        Some(g) => Some((
            g.delay_ms,
            g.jitter_ms,
            effective_seed(seed_flag.or(g.seed).or(m.seed))?,
        )),
        None => None,
    };
    let spec = SimLoopSpec {
        cycle_s: m.cycle_s.unwrap_or(0.01),
        plant: m.plant.unwrap_or_default(),
        gateway,
    };
    let log_path = m.out_dir.join("loop.csv");
    let log =
        run_simulated_loop(&desc, &plan, &spec, Some(&log_path)).map_err(|e| e.to_string())?;
    print_run_summary(&log, &log_path);
    Ok(ExitCode::SUCCESS)
}

/// The default experiment set: the 200 mm square at both studied speeds, a
/// remote loop (120 ± 10 ms gateway) against a local one (20 ± 5 ms), all on
/// the dynamic plant. Emits the four logs plus delay and error reports.
fn run_preset(out_dir: &Path, seed: u64) -> Result<ExitCode, String> {
    let desc = reference_robot();
    fs::create_dir_all(out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
    let mut delays: Vec<DelayReport> = Vec::new();
    let mut errors: Vec<ErrorReport> = Vec::new();
    let mut logs: Vec<(String, LoopLog)> = Vec::new();

    for speed in [100.0f64, 1000.0] {
        let plan = plan_square(Vec2::new(750.0, 850.0), 200.0, speed, 2000.0)
            .map_err(|e| e.to_string())?;
        let mut pair: Vec<(String, LoopLog)> = Vec::new();
        for (label, delay, jitter) in [("remote", 120.0, 10.0), ("local", 20.0, 5.0)] {
            let name = format!("{label}-{}", speed as u32);
            let spec = SimLoopSpec {
                cycle_s: 0.01,
                plant: PlantConfig::default(),
                gateway: Some((delay, jitter, seed)),
            };
            let path = out_dir.join(format!("{name}.csv"));
            let log =
                run_simulated_loop(&desc, &plan, &spec, Some(&path)).map_err(|e| e.to_string())?;
            delays.push(delay_report(&log, &name).map_err(|e| e.to_string())?);
            pair.push((name, log));
        }
        let (name_b, log_b) = pair.pop().unwrap();
        let (name_a, log_a) = pair.pop().unwrap();
        let mut rep = compare_logs(&log_a, &log_b, &horizontal_segments(&plan))
            .map_err(|e| e.to_string())?;
        rep.label_a = name_a.clone();
        rep.label_b = name_b.clone();
        errors.push(rep);
        logs.push((name_a, log_a));
        logs.push((name_b, log_b));
    }

    let series: Vec<(&str, &LoopLog)> = logs.iter().map(|(n, l)| (n.as_str(), l)).collect();
    let written = emit_report(&delays, &errors, &series, out_dir).map_err(|e| e.to_string())?;
    for d in &delays {
        print!("{}", d.render_text());
    }
    for e in &errors {
        print!("{}", e.render_text());
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<ExitCode, String> {
    let log_a = LoopLog::load(&a.log_a).map_err(|e| format!("{}: {e}", a.log_a.display()))?;
    let label_a = a.label_a.clone().unwrap_or_else(|| stem(&a.log_a));
    let plan = match (&a.plan, a.speed) {
        (Some(p), _) => Some(load_plan(p).map_err(|e| format!("{}: {e}", p.display()))?),
        (None, Some(speed)) => Some(
            plan_square(
                Vec2::new(a.center_x, a.center_y),
                a.side,
                speed,
                a.accel,
            )
            .map_err(|e| e.to_string())?,
        ),
        (None, None) => None,
    };

    let mut delays = vec![delay_report(&log_a, &label_a).map_err(|e| e.to_string())?];
    let mut errors: Vec<ErrorReport> = Vec::new();
    let mut logs: Vec<(String, LoopLog)> = Vec::new();

    if let Some(path_b) = &a.log_b {
        let log_b = LoopLog::load(path_b).map_err(|e| format!("{}: {e}", path_b.display()))?;
        let label_b = a.label_b.clone().unwrap_or_else(|| stem(path_b));
        delays.push(delay_report(&log_b, &label_b).map_err(|e| e.to_string())?);
        if let Some(plan) = &plan {
            let mut rep = compare_logs(&log_a, &log_b, &horizontal_segments(plan))
                .map_err(|e| e.to_string())?;
            rep.label_a = label_a.clone();
            rep.label_b = label_b.clone();
            errors.push(rep);
        }
        logs.push((label_b, log_b));
    } else if let Some(plan) = &plan {
        // single log: print per-segment means instead of a comparison table
        println!("Position error — {label_a}");
        for seg in horizontal_segments(plan) {
            let (t, m, e) =
                segment_error(&log_a, seg.axis, seg.window).map_err(|err| err.to_string())?;
            println!(
                "{:<10}{:>12.3}{:>12.3}{:>9.3}",
                seg.label, t, m, e
            );
        }
    }
    logs.insert(0, (label_a, log_a));

    let series: Vec<(&str, &LoopLog)> = logs.iter().map(|(n, l)| (n.as_str(), l)).collect();
    let written = emit_report(&delays, &errors, &series, &a.out_dir).map_err(|e| e.to_string())?;
    for d in &delays {
        print!("{}", d.render_text());
    }
    for e in &errors {
        print!("{}", e.render_text());
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "log".to_string())
}
