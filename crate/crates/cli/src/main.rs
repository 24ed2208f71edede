use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lpwan_sim::engine::{
    self, emit_power_profile, emit_run, emit_sweep, write_artifacts, Artifact, EngineError, Format,
    Scenario, DEFAULT_SWEEP_DISTANCES_M, DEFAULT_SWEEP_PACKETS,
};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "lpwan-sim", version, about = "Deterministic dual-radio LPWAN mote simulator")]
struct Cli {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write output files here instead of printing them.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: OutputFormat,
    /// Check the configuration and exit without simulating.
    #[arg(long, global = true)]
    validate_only: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file.
    Run { scenario: PathBuf },
    /// Packet delivery, RSSI and SNR against distance.
    RangeSweep {
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        distances: Option<Vec<f64>>,
        #[arg(long, default_value_t = DEFAULT_SWEEP_PACKETS)]
        packets: u64,
    },
    /// Per-mode power, time and energy over repeated wake-up exchanges.
    PowerProfile {
        #[arg(long, default_value_t = 1)]
        cycles: u64,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        if e.is_validation() {
            return Failure::Validation(e.to_string());
        }
        let mut msg = e.to_string();
        if let EngineError::IllegalTransition { trace, .. } = &e {
            msg.push_str("\nevent trace:");
            for t in trace {
                let node = t.node.map_or("-".to_string(), |a| a.to_string());
                msg.push_str(&format!("\n  {} #{} node {} {}", t.time, t.seq, node, t.kind));
            }
        }
        Failure::Runtime(msg)
    }
}

fn output(cli: &Cli, artifacts: &[Artifact]) -> Result<(), Failure> {
    match &cli.out_dir {
        Some(dir) => write_artifacts(dir, artifacts)
            .map_err(|e| Failure::Runtime(format!("writing {}: {e}", dir.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            for (k, a) in artifacts.iter().enumerate() {
                if artifacts.len() > 1 {
                    if k > 0 {
                        let _ = writeln!(stdout);
                    }
                    let _ = writeln!(stdout, "==> {} <==", a.name);
                }
                let _ = stdout.write_all(a.contents.as_bytes());
            }
            Ok(())
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let format = match cli.format {
        OutputFormat::Csv => Format::Csv,
        OutputFormat::Text => Format::Text,
    };
    match &cli.command {
        Command::Run { scenario } => {
            let mut s = Scenario::load(scenario)
                .map_err(|e| Failure::Validation(format!("{}: {e}", scenario.display())))?;
            if let Some(seed) = cli.seed {
                s.sim.seed = seed;
            }
            s.validate()
                .map_err(|e| Failure::Validation(format!("{}: {e}", scenario.display())))?;
            if cli.validate_only {
                println!("{}: ok (hash {})", scenario.display(), s.hash());
                return Ok(());
            }
            let m = engine::run(&s)?;
            output(cli, &emit_run(&s, &m, format))
        }
        Command::RangeSweep { distances, packets } => {
            let distances = distances
                .clone()
                .unwrap_or_else(|| DEFAULT_SWEEP_DISTANCES_M.to_vec());
            let seed = cli.seed.unwrap_or(0);
            for &d in &distances {
                engine::coverage_scenario(d, *packets, seed)
                    .validate()
                    .map_err(|e| Failure::Validation(format!("distance {d} m: {e}")))?;
            }
            if cli.validate_only {
                println!("range sweep: ok ({} points)", distances.len());
                return Ok(());
            }
            let sweep = engine::range_sweep(&distances, *packets, seed)?;
            output(cli, &emit_sweep(&sweep, format))
        }
        Command::PowerProfile { cycles } => {
            let seed = cli.seed.unwrap_or(0);
            let s = engine::power_profile_scenario(*cycles, seed);
            s.validate().map_err(|e| Failure::Validation(e.to_string()))?;
            if cli.validate_only {
                println!("power profile: ok (hash {})", s.hash());
                return Ok(());
            }
            let (s, m) = engine::power_profile(*cycles, seed)?;
            output(cli, &emit_power_profile(&s, &m, format))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
