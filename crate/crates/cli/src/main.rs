//! `pfgsim`: run the simulation studies and write their reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use pfg_core::harness::channel::{run_channel, ChannelConfig};
use pfg_core::harness::coherence::{run_coherence_trace, CoherenceConfig};
use pfg_core::harness::divisions::{run_divisions_sweep, DivisionsConfig};
use pfg_core::harness::pps::{run_pps, PpsConfig};
use pfg_core::harness::timedisc::{run_timedisc_study, TimediscConfig};
use pfg_core::sequence::{read_sequence, ShapeKind};
use pfg_core::spinsys::SpinSystem;
use pfg_core::{Error, Execution};

#[derive(Parser)]
#[command(name = "pfgsim", version, about = "Pulsed-field-gradient ensemble simulation studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Spin-system config file.
    #[arg(long)]
    system: PathBuf,
    /// Seed for every random draw of the study.
    #[arg(long)]
    seed: u64,
    /// Output file (CSV, or the result artifact for `pps`).
    #[arg(long)]
    out: PathBuf,
    /// Run on one thread. Results are identical either way.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Bhole–Jones vs exact propagation error across sampling steps.
    Timedisc {
        #[command(flatten)]
        common: Common,
        /// Sampling steps in microseconds.
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 5.0])]
        dt_us: Vec<f64>,
        /// Gradient shapes (`const`, `halfsine`).
        #[arg(long, value_delimiter = ',', default_values_t = ["const".to_string(), "halfsine".to_string()])]
        shapes: Vec<String>,
        /// Haar-random initial states per cell.
        #[arg(long, default_value_t = 32)]
        states: usize,
        /// Sample divisions.
        #[arg(long, default_value_t = 64)]
        divisions: usize,
        /// Pulse and gradient window in microseconds.
        #[arg(long, default_value_t = 500.0)]
        tau_us: f64,
    },
    /// Coherence-order dephasing factors over a constant gradient.
    CoherenceTrace {
        #[command(flatten)]
        common: Common,
        /// Finite division counts to trace (default: minimum and 14).
        #[arg(long, value_delimiter = ',')]
        divisions: Vec<usize>,
        /// Time points over the gradient.
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Gradient duration in microseconds.
        #[arg(long, default_value_t = 1000.0)]
        tau_us: f64,
    },
    /// Divisions needed after repeated unitary + gradient blocks.
    DivisionsSweep {
        #[command(flatten)]
        common: Common,
        /// Block repetitions.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8, 16])]
        gammas: Vec<usize>,
        /// Random trials per repetition count.
        #[arg(long, default_value_t = 8)]
        trials: usize,
        /// Fidelity against the continuous limit.
        #[arg(long, default_value_t = 0.99999)]
        threshold: f64,
        /// Largest division count tried.
        #[arg(long, default_value_t = 512)]
        cap: usize,
    },
    /// Compare a sequence at a small and a large division count.
    Channel {
        #[command(flatten)]
        common: Common,
        /// Sequence file.
        #[arg(long)]
        sequence: PathBuf,
        /// Two 1-based spins for the reduced state.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2])]
        pair: Vec<usize>,
        /// Small division count (default: minimum for the system).
        #[arg(long)]
        small: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        large: usize,
        /// Sampling step in microseconds.
        #[arg(long, default_value_t = 1.0)]
        dt_us: f64,
    },
    /// Optimize a multi-scan pseudo-pure-state preparation.
    Pps {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        scans: usize,
        /// Rotation and delay blocks per scan.
        #[arg(long, default_value_t = 5)]
        blocks: usize,
        /// Weight of the polarization term.
        #[arg(long, default_value_t = 0.3)]
        epsilon: f64,
        /// Objective evaluations over all restarts.
        #[arg(long, default_value_t = 200_000)]
        budget: usize,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        /// Divisions used for the gradient (default: minimum for the system).
        #[arg(long)]
        divisions: Option<usize>,
    },
}

struct Failure {
    kind: String,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { kind: e.kind().to_string(), message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { kind: "usage".into(), message: message.into() }
}

fn write_out(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source }.into())
}

fn shape(name: &str) -> Result<ShapeKind, Failure> {
    match name {
        "const" => Ok(ShapeKind::Const),
        "halfsine" => Ok(ShapeKind::HalfSine),
        other => Err(usage(format!("unknown shape `{other}`"))),
    }
}

fn run(cli: Cli) -> Result<serde_json::Value, Failure> {
    match cli.command {
        Command::Timedisc { common, dt_us, shapes, states, divisions, tau_us } => {
            let sys = SpinSystem::from_config_file(&common.system)?;
            let mut cfg = TimediscConfig::new(common.seed);
            cfg.dts = dt_us.iter().map(|d| d * 1e-6).collect();
            cfg.shapes = shapes.iter().map(|s| shape(s)).collect::<Result<_, _>>()?;
            cfg.states = states;
            cfg.divisions = divisions;
            cfg.tau = tau_us * 1e-6;
            cfg.execution = common.execution();
            let report = run_timedisc_study(&sys, &cfg)?;
            write_out(&common.out, &report.to_csv()?)?;
            let exact: f64 = report.cells.iter().map(|c| c.exact_seconds).sum();
            let bj: f64 = report.cells.iter().map(|c| c.bj_seconds).sum();
            let worst: Vec<_> = cfg.dts.iter().map(|&dt| json!({"dt_us": dt * 1e6, "worst_fidelity": report.worst_at(dt)})).collect();
            Ok(json!({"study": "timedisc", "out": common.out, "worst": worst, "exact_seconds": exact, "bhole_jones_seconds": bj}))
        }
        Command::CoherenceTrace { common, divisions, points, tau_us } => {
            let sys = SpinSystem::from_config_file(&common.system)?;
            let mut cfg = CoherenceConfig::new(sys.qubits());
            if !divisions.is_empty() {
                cfg.divisions = divisions;
            }
            cfg.points = points;
            cfg.tau = tau_us * 1e-6;
            let report = run_coherence_trace(&sys, &cfg)?;
            write_out(&common.out, &report.to_csv()?)?;
            Ok(json!({"study": "coherence-trace", "out": common.out, "rows": report.rows.len()}))
        }
        Command::DivisionsSweep { common, gammas, trials, threshold, cap } => {
            let sys = SpinSystem::from_config_file(&common.system)?;
            let mut cfg = DivisionsConfig::new(common.seed);
            cfg.gammas = gammas;
            cfg.trials = trials;
            cfg.threshold = threshold;
            cfg.cap = cap;
            cfg.execution = common.execution();
            let report = run_divisions_sweep(&sys, &cfg)?;
            write_out(&common.out, &report.to_csv()?)?;
            let maxima: Vec<_> = report.rows.iter().map(|r| json!({"gamma": r.gamma, "max_divisions": r.max_divisions()})).collect();
            let fit = report.fit.as_ref().map(|f| json!({"a": f.a, "b": f.b, "rms": f.rms}));
            Ok(json!({"study": "divisions-sweep", "out": common.out, "maxima": maxima, "fit": fit}))
        }
        Command::Channel { common, sequence, pair, small, large, dt_us } => {
            let sys = SpinSystem::from_config_file(&common.system)?;
            let seq = read_sequence(&sequence)?;
            if pair.len() != 2 || pair.contains(&0) {
                return Err(usage("--pair takes two 1-based spins, e.g. 1,2"));
            }
            let mut cfg = ChannelConfig::new(sys.qubits());
            cfg.pair = [pair[0] - 1, pair[1] - 1];
            if let Some(n) = small {
                cfg.small = n;
            }
            cfg.large = large;
            cfg.dt = dt_us * 1e-6;
            cfg.execution = common.execution();
            let report = run_channel(&sys, &seq, &cfg)?;
            write_out(&common.out, &report.to_csv()?)?;
            Ok(json!({
                "study": "channel",
                "out": common.out,
                "small": report.small,
                "large": report.large,
                "fidelity": report.fidelity,
                "pair_fidelity": report.pair_fidelity,
            }))
        }
        Command::Pps { common, scans, blocks, epsilon, budget, restarts, divisions } => {
            let sys = SpinSystem::from_config_file(&common.system)?;
            let mut cfg = PpsConfig::new(common.seed);
            cfg.scans = scans;
            cfg.blocks = blocks;
            cfg.epsilon = epsilon;
            cfg.budget = budget;
            cfg.restarts = restarts;
            cfg.divisions = divisions;
            cfg.execution = common.execution();
            let (artifact, _) = run_pps(&sys, &cfg)?;
            write_out(&common.out, &artifact.to_text())?;
            Ok(json!({
                "study": "pps",
                "out": common.out,
                "fidelity": artifact.fidelity,
                "improvement": artifact.improvement,
                "duration_s": artifact.duration,
                "objective": artifact.best_objective,
                "evaluations": artifact.evaluations,
            }))
        }
    }
}

fn fail(f: Failure) -> ExitCode {
    eprintln!("{}", json!({"error": {"kind": f.kind, "message": f.message}}));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(usage(e.kind().to_string() + ": " + e.render().to_string().lines().next().unwrap_or(""))),
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => fail(f),
    }
}
