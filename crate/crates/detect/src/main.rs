use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use das_detect::model_file::{load_model, save_model};
use das_detect::simulate::{simulate_to_dir, ModelSource, RunManifest, SimulationConfig, MANIFEST_FILE};
use das_detect::verify::{run_all, VerifyOptions};
use das_detect::{Error, Result};
use das_detect_core::{BenchmarkSpec, Family, HypothesisModel, StrategyKind, DEFAULT_TRIALS};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "das-detect", version, about = "Data-aided sensing for distributed detection")]
struct Cli {
    /// Worker threads for Monte-Carlo trials (default: all cores).
    #[arg(long, global = true, env = "DAS_DETECT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte-Carlo LLR trajectories and write CSVs plus a manifest.
    Simulate(SimulateArgs),
    /// Run the oracle suites and report the worst error of each.
    Verify(VerifyArgs),
    /// Write a fully expanded model file.
    ExportModel(ExportArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// sinusoidal-ar1, iid-antipodal or file:PATH
    #[arg(long, default_value = "sinusoidal-ar1")]
    model: String,

    /// Number of sensors.
    #[arg(long = "K", default_value_t = das_detect_core::model::DEFAULT_SENSORS)]
    sensors: usize,

    /// SNR = A²/(2σ²) in dB.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    snr_db: f64,

    /// Mean amplitude A; the noise variance then follows from the SNR.
    /// Without it the noise variance is 1.
    #[arg(long)]
    amplitude: Option<f64>,

    /// Per-hypothesis AR(1) correlations for sinusoidal-ar1.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = das_detect_core::model::DEFAULT_RHO)]
    rho: Vec<f64>,
}

impl ModelArgs {
    fn source(&self) -> Result<ModelSource> {
        if let Some(path) = self.model.strip_prefix("file:") {
            return Ok(ModelSource::File { path: PathBuf::from(path) });
        }
        let family: Family = self.model.parse().map_err(Error::Usage)?;
        let mut spec = match self.amplitude {
            Some(a) => BenchmarkSpec::from_amplitude_and_snr_db(family, self.sensors, a, self.snr_db),
            None => BenchmarkSpec::from_snr_db(family, self.sensors, self.snr_db),
        };
        if family == Family::SinusoidalAr1 {
            spec.rho = self.rho.clone();
        } else {
            spec.rho.clear();
        }
        spec.validate()?;
        Ok(ModelSource::from_spec(&spec))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// random, entropy-das, mse-das, j-das, a comma list, or all
    /// (random, entropy-das, j-das).
    #[arg(long, default_value = "all")]
    strategy: String,

    /// 1-based true hypothesis, or all.
    #[arg(long = "true-hyp", default_value = "all")]
    true_hyp: String,

    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,

    /// Upload budget per trial (default: K).
    #[arg(long)]
    rounds: Option<usize>,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    #[arg(long, default_value = "das-output")]
    out: PathBuf,

    /// Re-run the configuration stored in a manifest; model and run flags
    /// are ignored.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 64)]
    dim: usize,

    #[arg(long, default_value_t = 200)]
    cases: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 1.0, hide = true)]
    tolerance_scale: f64,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    model: ModelArgs,

    #[arg(long)]
    out: PathBuf,
}

fn parse_strategies(s: &str) -> Result<Vec<String>> {
    if s == "all" {
        return Ok([StrategyKind::Random, StrategyKind::EntropyDas, StrategyKind::JDas]
            .iter()
            .map(|k| k.name().to_string())
            .collect());
    }
    s.split(',')
        .map(|part| part.trim().parse::<StrategyKind>().map(|k| k.name().to_string()).map_err(Error::Usage))
        .collect()
}

fn build_model(source: &ModelSource) -> Result<HypothesisModel> {
    match source {
        ModelSource::File { path } => load_model(path),
        other => other.build(),
    }
}

fn resolve_simulation(args: &SimulateArgs) -> Result<SimulationConfig> {
    if let Some(path) = &args.manifest {
        return Ok(RunManifest::load(path)?.config);
    }
    let source = args.model.source()?;
    let model = build_model(&source)?;
    let true_hypotheses = if args.true_hyp == "all" {
        (1..=model.hypotheses()).collect()
    } else {
        vec![args
            .true_hyp
            .parse::<usize>()
            .map_err(|_| Error::Usage(format!("invalid --true-hyp `{}`", args.true_hyp)))?]
    };
    if args.trials == 0 {
        return Err(Error::Usage("--trials must be at least 1".into()));
    }
    Ok(SimulationConfig {
        model: source,
        strategies: parse_strategies(&args.strategy)?,
        true_hypotheses,
        trials: args.trials,
        rounds: args.rounds.unwrap_or(model.sensors()),
        seed: args.seed,
    })
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let cfg = resolve_simulation(&args)?;
    let summary = simulate_to_dir(&cfg, &args.out)?;
    println!(
        "wrote {} series x {} rounds to {} ({} for reproduction)",
        summary.series,
        summary.rounds,
        args.out.display(),
        MANIFEST_FILE
    );
    for (strategy, truth, mean) in summary.final_means {
        println!("  {strategy:<12} true=theta{truth}  final mean LLR {mean:.4}");
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let opts =
        VerifyOptions { dim: args.dim, cases: args.cases, seed: args.seed, tolerance_scale: args.tolerance_scale };
    let reports = run_all(&opts);
    for r in &reports {
        println!("{r}");
    }
    if reports.iter().all(|r| r.passed()) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_FAILURE))
    }
}

fn export_model(args: ExportArgs) -> Result<ExitCode> {
    let model = build_model(&args.model.source()?)?;
    save_model(&model, &args.out)?;
    println!("wrote {} (K={}, Q={})", args.out.display(), model.sensors(), model.hypotheses());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Verify(a) => verify(a),
        Command::ExportModel(a) => export_model(a),
    };
    match result {
        Ok(code) => code,
        Err(e @ Error::Usage(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
