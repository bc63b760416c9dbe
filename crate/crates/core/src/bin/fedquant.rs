use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use fedquant::codec::{decode_update, encode_with, EncodedUpdate};
use fedquant::experiment::{collect_updates, run_experiment, ExperimentConfig, ExperimentKind};
use fedquant::io::{to_f32, to_f64, vector_from_bytes, vector_to_bytes};
use fedquant::rd::{rd_sweep, select_delta_for_budget};
use fedquant::{Error, QuantizerKind, Rng, UniversalCode};

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;
const EXIT_CORRUPT: u8 = 5;

#[derive(Parser)]
#[command(name = "fedquant", version, about = "Entropy-coded quantization of federated client updates")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Quantize and encode a vector file into a container.
    Encode {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        step: f64,
        #[arg(long, default_value = "stochastic")]
        quantizer: QuantizerKind,
        #[arg(long, default_value = "gamma")]
        code: UniversalCode,
        /// Keys the rounding draws, or the dither seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Decode a container back into a vector file.
    Decode {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Rate, distortion and entropy across a step grid.
    RdSweep {
        #[command(flatten)]
        run: RunArgs,
        /// Also pick the finest step whose mean rate fits this many
        /// bits per element.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Client votes on the step size.
    Vote(RunArgs),
    /// One federated training run.
    Train(RunArgs),
    /// Training runs across every compressor and parameter.
    Compare(RunArgs),
    AblateRotation(RunArgs),
    AblateNormalization(RunArgs),
    RoundingCompare(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
}

/// Marks config problems that are not library errors.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, data: &[u8]) -> anyhow::Result<()> {
    fs::write(path, data).with_context(|| format!("writing {}", path.display()))
}

fn load_config(args: &RunArgs, expected: ExperimentKind) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let cfg = ExperimentConfig::from_toml(&text).with_context(|| format!("in {}", args.config.display()))?;
    if cfg.experiment != expected {
        return Err(ConfigError(format!(
            "{} declares experiment = \"{}\" but the subcommand runs \"{}\"",
            args.config.display(),
            cfg.experiment,
            expected
        ))
        .into());
    }
    Ok(cfg)
}

fn run_and_write(args: &RunArgs, kind: ExperimentKind) -> anyhow::Result<ExperimentConfig> {
    let cfg = load_config(args, kind)?;
    let outputs = run_experiment(&cfg)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for o in &outputs {
        let path = args.out.join(&o.name);
        write(&path, o.contents.as_bytes())?;
        log::info!("wrote {}", path.display());
    }
    println!("{} files written to {}", outputs.len(), args.out.display());
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Encode {
            input,
            output,
            step,
            quantizer,
            code,
            seed,
        } => {
            let values = to_f64(&vector_from_bytes(&read(&input)?).with_context(|| format!("in {}", input.display()))?);
            let mut rng = Rng::new(seed);
            let e = encode_with(&values, step, quantizer, &mut rng, code)?;
            let bytes = e.to_bytes();
            write(&output, &bytes)?;
            log::info!("{} elements, {} bytes", values.len(), bytes.len());
        }
        Cmd::Decode { input, output } => {
            let data = read(&input)?;
            let e = EncodedUpdate::from_bytes(&data).with_context(|| format!("in {}", input.display()))?;
            let values = decode_update(&e)?;
            write(&output, &vector_to_bytes(&to_f32(&values)))?;
        }
        Cmd::RdSweep { run, budget } => {
            let cfg = run_and_write(&run, ExperimentKind::RdSweep)?;
            if let Some(b) = budget {
                if !(b >= 0.0) {
                    bail!(ConfigError(format!("budget must be >= 0, got {b}")));
                }
                let curve = rd_sweep(&collect_updates(&cfg)?, &cfg.grid, cfg.master_seed)?;
                let delta = select_delta_for_budget(&curve, b)?;
                println!("step for budget {b} bits/element: {delta}");
            }
        }
        Cmd::Vote(a) => drop(run_and_write(&a, ExperimentKind::Vote)?),
        Cmd::Train(a) => drop(run_and_write(&a, ExperimentKind::Train)?),
        Cmd::Compare(a) => drop(run_and_write(&a, ExperimentKind::Compare)?),
        Cmd::AblateRotation(a) => drop(run_and_write(&a, ExperimentKind::AblateRotation)?),
        Cmd::AblateNormalization(a) => drop(run_and_write(&a, ExperimentKind::AblateNormalization)?),
        Cmd::RoundingCompare(a) => drop(run_and_write(&a, ExperimentKind::RoundingCompare)?),
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::InfeasibleBudget { .. } => EXIT_INFEASIBLE,
                Error::Corrupt { .. } | Error::Truncated { .. } | Error::PrefixTooLong { .. } => EXIT_CORRUPT,
                Error::InvalidParameter(_) | Error::InvalidStep(_) | Error::Empty(_) => EXIT_CONFIG,
                _ => EXIT_OTHER,
            };
        }
    }
    EXIT_OTHER
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
