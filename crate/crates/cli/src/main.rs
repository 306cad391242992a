use std::path::PathBuf;
use std::process::ExitCode;

use chm_core::oracle::{run_analytic_suite, SuiteOptions};
use chm_core::pipeline::{self, ConfigOverrides, DepthSpec, ExperimentConfig, Pipeline};
use chm_core::{build_family, Axis, Error, Family};
use clap::{Args, Parser, Subcommand};

/// Circuit harmonic matrices: exact propagation, Monte-Carlo estimation,
/// coefficient statistics and kernels.
#[derive(Parser)]
#[command(name = "chm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the variance / correlation / QNTK experiments.
    Run(RunArgs),
    /// Run the exact-vs-Monte-Carlo oracle suite on small analytic circuits.
    Oracle {
        /// Write the suite report here as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Circuit utilities.
    Circuit {
        #[command(subcommand)]
        command: CircuitCommand,
    },
}

#[derive(Subcommand)]
enum CircuitCommand {
    /// Print a benchmark circuit in the JSON circuit format.
    Dump {
        #[arg(long)]
        family: Family,
        #[arg(long, default_value = "x")]
        encoder: Axis,
        #[arg(long, default_value_t = 4)]
        qubits: usize,
        #[arg(long, default_value_t = 1)]
        layers: usize,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        /// Also print the single-use validation report to stderr.
        #[arg(long)]
        validate: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with the same keys as these flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    pipeline: Option<Pipeline>,
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    encoder: Option<Axis>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    /// `1..5` or `1,2,3`.
    #[arg(long)]
    depths: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    hamming: Option<usize>,
    #[arg(long)]
    kcap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mask_threshold: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            pipeline: self.pipeline,
            family: self.family,
            encoder: self.encoder,
            qubits: self.qubits,
            layers: self.layers,
            depths: self.depths.clone().map(DepthSpec::Text),
            samples: self.samples,
            nx: self.nx,
            hamming: self.hamming,
            kcap: self.kcap,
            seed: self.seed,
            mask_threshold: self.mask_threshold,
            threads: self.threads,
            out: self.out.clone(),
        }
    }
}

fn exit_code(e: &Error) -> ExitCode {
    match e {
        Error::Invariant(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn run(args: RunArgs) -> Result<(), Error> {
    let file = match &args.config {
        Some(p) => ConfigOverrides::from_json(&std::fs::read_to_string(p)?)?,
        None => ConfigOverrides::default(),
    };
    let cfg = ExperimentConfig::resolve(&file, &args.overrides())?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("chm-out"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("threads: {e}")))?;
    let reports = pool.install(|| pipeline::run(&cfg))?;
    for path in reports.write(&out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Oracle { out } => {
            let report = run_analytic_suite(&SuiteOptions::default());
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("runtime {:.2} s", report.runtime_s);
            if let Some(path) = out {
                if let Err(e) = report.to_json().and_then(|s| std::fs::write(&path, s).map_err(Error::from)) {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
            return if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(2) };
        }
        Command::Circuit { command: CircuitCommand::Dump { family, encoder, qubits, layers, depth, validate } } => {
            build_family(family, encoder, qubits, layers, depth).and_then(|c| {
                if validate {
                    for v in c.validate() {
                        eprintln!("{v}");
                    }
                }
                println!("{}", c.to_json()?);
                Ok(())
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
