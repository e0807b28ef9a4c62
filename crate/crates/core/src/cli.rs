//! `dhands` command line: server, bot, sim and analyze subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::geom::Angle;
use crate::harness::{analyze, run_live_bot, run_scenario_file, BotSpec, HarnessError, MetricsEvent};
use crate::server::{serve, ServerConfig};
use crate::session::SessionConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dhands", version, about = "Perspective-aligned shared sessions with decoupled hands")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the authoritative websocket server.
    Server(ServerArgs),
    /// Run one scripted client against a live server.
    Bot(BotArgs),
    /// Run a scenario in-process on a virtual clock and emit its metrics log.
    Sim(SimArgs),
    /// Summarize a metrics log.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct ServerArgs {
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    pub host: IpAddr,
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, default_value_t = 60.0)]
    pub tick_hz: f64,
    #[arg(long, default_value_t = 20.0)]
    pub fanout_hz: f64,
    /// Alignment sweep speed.
    #[arg(long, default_value_t = 90.0)]
    pub angular_speed_deg: f64,
    /// Baseline mode: show collaborators' hands unrotated.
    #[arg(long)]
    pub no_decoupling: bool,
    /// Write the final session snapshot here on shutdown.
    #[arg(long)]
    pub snapshot_on_exit: Option<PathBuf>,
    /// Do not print event lines to stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct BotArgs {
    /// Server address as host:port.
    #[arg(long)]
    pub connect: String,
    /// Bot file: {"name", "start", "script"}.
    #[arg(long)]
    pub script: PathBuf,
    /// Sets the phase of the pose stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leave after this many seconds even if the script is still running.
    #[arg(long)]
    pub max_duration: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario's network seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Metrics log destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the final snapshot.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Server(a) => run_server(a, err),
        Command::Bot(a) => run_bot(a, out),
        Command::Sim(a) => run_sim(a, out, err),
        Command::Analyze(a) => run_analyze(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_RUNTIME
        }
    }
}

/// Process entry point used by the binary.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LOG_LEVEL", "warn")).init();
    run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn run_server(a: ServerArgs, err: &mut dyn Write) -> Result<(), Failure> {
    if !(a.fanout_hz > 0.0 && a.fanout_hz.is_finite()) {
        return Err(Failure::Usage(format!("--fanout-hz must be positive, got {}", a.fanout_hz)));
    }
    if !(a.tick_hz.is_finite() && a.tick_hz >= a.fanout_hz) {
        return Err(Failure::Usage(format!("--tick-hz {} must be at least --fanout-hz {}", a.tick_hz, a.fanout_hz)));
    }
    if !(a.angular_speed_deg > 0.0 && a.angular_speed_deg.is_finite()) {
        return Err(Failure::Usage(format!("--angular-speed-deg must be positive, got {}", a.angular_speed_deg)));
    }
    let mut config = ServerConfig::new(SocketAddr::new(a.host, a.port), a.scene);
    config.tick_hz = a.tick_hz;
    config.session = SessionConfig {
        angular_speed: a.angular_speed_deg.to_radians(),
        decoupling_enabled: !a.no_decoupling,
        pose_fanout_hz: a.fanout_hz,
        ..SessionConfig::default()
    };
    config.snapshot_on_exit = a.snapshot_on_exit;
    config.log_events = !a.quiet;
    let _ = writeln!(
        err,
        "serving {} on {} (sweep {}°/s, decoupling {})",
        config.scene_path.display(),
        config.addr,
        a.angular_speed_deg,
        if a.no_decoupling { "off" } else { "on" }
    );
    serve(config).map_err(runtime)?;
    Ok(())
}

fn run_bot(a: BotArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.script).map_err(|e| runtime(format!("{}: {e}", a.script.display())))?;
    let spec = BotSpec::from_json(&text).map_err(runtime)?;
    let name = spec.name.clone();
    let report = run_live_bot(&a.connect, spec, a.seed, a.max_duration).map_err(runtime)?;
    let id = report.user_id.map_or_else(|| "-".to_owned(), |u| u.to_string());
    let _ =
        writeln!(out, "bot {name} ({id}) done after {} messages, offset {:.3}°", report.received, report.final_rho.to_degrees());
    Ok(())
}

fn run_sim(a: SimArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let result = run_scenario_file(&a.scenario, a.seed).map_err(|e| match e {
        HarnessError::Io { .. } | HarnessError::Parse(_) | HarnessError::Config(_) => {
            runtime(format!("{}: {e}", a.scenario.display()))
        }
        other => runtime(other),
    })?;
    let log = result.log();
    match &a.out {
        Some(path) => std::fs::write(path, &log).map_err(|e| runtime(format!("{}: {e}", path.display())))?,
        None => out.write_all(log.as_bytes()).map_err(runtime)?,
    }
    if let Some(path) = &a.snapshot {
        std::fs::write(path, result.snapshot.to_json() + "\n").map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    }
    for ev in &result.events {
        if let MetricsEvent::AlignCompleted { t, follower, rho } = ev {
            let _ = writeln!(err, "t={t:.3} s: {follower} aligned, offset {:.2}°", Angle::new(*rho).degrees());
        }
    }
    let _ = writeln!(
        err,
        "{} events, seed {}, worst replica offset gap {:.3e}°",
        result.events.len(),
        result.seed,
        result.replica_rho_discrepancy.to_degrees()
    );
    Ok(())
}

fn run_analyze(a: AnalyzeArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.input).map_err(|e| runtime(format!("{}: {e}", a.input.display())))?;
    let summary = analyze(&text).map_err(|e| runtime(format!("{}: {e}", a.input.display())))?;
    writeln!(out, "{}", summary.to_json()).map_err(runtime)?;
    Ok(())
}
