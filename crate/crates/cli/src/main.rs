use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qfhe_cli::commands::{self, PipelineArgs};
use qfhe_cli::config::{load_config, resolve, Format, Overrides};
use qfhe_cli::{render_report, Failure, RenderFormat};

#[derive(Parser)]
#[command(name = "qfhe", version, about = "Quantum-state homomorphic evaluation over MLWE")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Parameter preset: toy, teleport or wide.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    sigma: Option<u32>,
    /// Hex seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Depolarizing mask strength.
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// Directory for written artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// text or json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// `key = value` file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate client keys and optionally write them to --out.
    Keygen,
    /// Encrypted teleportation with fidelity and the noise ledger.
    TeleportDemo,
    /// Noise ledger and parameter advice for a program file.
    NoiseReport { program: PathBuf },
    /// Weak-measurement amplitude query.
    WeakAmplitude,
    /// Combined knowledge masks and encrypted knowledge capsules.
    KbDemo {
        #[arg(long)]
        kb: Option<PathBuf>,
    },
    /// Normal form of a term under a rewrite system.
    Quotient {
        term: String,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Teleportation split across pipeline nodes, with an audited ledger.
    PipelineDemo {
        /// Corrupt one archived ciphertext before verification.
        #[arg(long)]
        tamper: Option<usize>,
        #[arg(long)]
        barrier_log2: Option<u32>,
    },
    /// Per-gate lift timings.
    Bench {
        #[arg(long, default_value_t = 10)]
        iters: usize,
    },
}

impl Cmd {
    fn default_preset(&self) -> &'static str {
        match self {
            Cmd::Keygen | Cmd::KbDemo { .. } | Cmd::Quotient { .. } => "toy",
            _ => "teleport",
        }
    }
}

fn run(cli: Cli) -> Result<(Vec<u8>, Option<Failure>), Failure> {
    let g = cli.global;
    let flags = Overrides {
        preset: g.preset,
        sigma: g.sigma,
        seed: g.seed,
        p: g.p,
        theta: g.theta,
        epsilon: g.epsilon,
        tau: g.tau,
        nodes: g.nodes,
        format: g.format,
        out: g.out,
    };
    let file = match &g.config {
        Some(path) => load_config(path).map_err(Failure::from)?,
        None => Overrides::default(),
    };
    let s = resolve(&flags, &file, cli.cmd.default_preset())?;
    let outcome = match &cli.cmd {
        Cmd::Keygen => commands::keygen(&s),
        Cmd::TeleportDemo => commands::teleport_demo(&s),
        Cmd::NoiseReport { program } => commands::noise_report(&s, program),
        Cmd::WeakAmplitude => commands::weak_amplitude(&s),
        Cmd::KbDemo { kb } => commands::kb_demo(&s, kb.as_deref()),
        Cmd::Quotient { term, rules } => commands::quotient(&s, term, rules.as_deref()),
        Cmd::PipelineDemo { tamper, barrier_log2 } => {
            commands::pipeline_demo(&s, &PipelineArgs { tamper: *tamper, barrier_log2: *barrier_log2 })
        }
        Cmd::Bench { iters } => commands::bench(&s, *iters),
    }?;
    let fmt = match s.format {
        Format::Json => RenderFormat::Json,
        Format::Text => RenderFormat::Text,
    };
    Ok((render_report(&outcome.report, fmt), outcome.failure))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (bytes, failure) = match run(cli) {
        Ok(v) => v,
        Err(f) => (Vec::new(), Some(f)),
    };
    let _ = std::io::stdout().write_all(&bytes);
    match failure {
        None => ExitCode::SUCCESS,
        Some(f) => {
            eprintln!("qfhe: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
