use std::path::{Path, PathBuf};
use std::process::ExitCode;

use breadth_core::bench::{run_bench, BenchParams};
use breadth_core::io::{read_cloud, read_manifest};
use breadth_core::rng::{derive_seed, Domain};
use breadth_core::synthetic::{
    power_experiment, random_unit_vector, sample_vmf, split_half_check, type1_experiment,
    CalibrationReport, VmfSpec,
};
use breadth_core::{
    run_batch, run_pair, subsample, AlignmentMode, Alternative, EmbeddingCloud, Error, PairOutcome,
    TestConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Two-sample permutation tests for the dispersion of embedding clouds.
#[derive(Parser, Debug)]
#[command(name = "breadth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test whether cloud X is more dispersed than cloud Y.
    Test {
        x: PathBuf,
        y: PathBuf,
        #[command(flatten)]
        test: TestArgs,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Test every pair listed in a manifest, one JSON line per pair.
    Batch {
        /// Lines of `x_path<TAB>y_path`, relative to the manifest's directory.
        manifest: PathBuf,
        #[command(flatten)]
        test: TestArgs,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Compare baseline and aligned tests on synthetic or split data.
    Calibrate(CalibrateArgs),
    /// Time the reference loop against the batched engine.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct TestArgs {
    /// Number of permutations.
    #[arg(long = "b", default_value_t = 5000)]
    b: usize,
    /// Permutations per sign block.
    #[arg(long, default_value_t = 1024)]
    block_size: usize,
    #[arg(long = "alt", value_enum, default_value_t = AltArg::Greater)]
    alt: AltArg,
    #[arg(long, env = "BREADTH_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

impl TestArgs {
    fn config(&self) -> TestConfig {
        TestConfig {
            n_permutations: self.b,
            block_size: self.block_size,
            alternative: self.alt.into(),
            seed: self.seed,
            alpha: self.alpha,
        }
    }
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Skip the alignment step.
    #[arg(long)]
    baseline: bool,
    /// Use rows as read instead of projecting them onto the unit sphere.
    #[arg(long)]
    no_normalize: bool,
    /// Draw this many rows from each cloud before testing.
    #[arg(long, value_name = "N")]
    subsample: Option<usize>,
}

impl InputArgs {
    fn mode(&self) -> AlignmentMode {
        if self.baseline {
            AlignmentMode::Baseline
        } else {
            AlignmentMode::Aligned
        }
    }

    /// Reads one cloud; `role` 0 is X and 1 is Y.
    fn load(&self, path: &Path, role: u64, seed: u64) -> Result<EmbeddingCloud, Failure> {
        let cloud =
            read_cloud(path, !self.no_normalize).map_err(|e| Failure::from(e).context(path))?;
        match self.subsample {
            Some(size) => Ok(
                subsample(&cloud, size, derive_seed(seed, Domain::Subsample, role))
                    .map_err(|e| Failure::from(e).context(path))?,
            ),
            None => Ok(cloud),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AltArg {
    Greater,
    TwoSided,
}

impl From<AltArg> for Alternative {
    fn from(a: AltArg) -> Self {
        match a {
            AltArg::Greater => Alternative::Greater,
            AltArg::TwoSided => Alternative::TwoSided,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    /// Equal concentrations, separated means.
    Type1,
    /// Different concentrations.
    Power,
    /// Random halves of a single cloud.
    SplitHalf,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Type1)]
    mode: ModeArg,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Rows per cloud.
    #[arg(long, default_value_t = 200)]
    group_size: usize,
    /// Angle between the mean directions, in degrees.
    #[arg(long, default_value_t = 60.0)]
    angle: f64,
    /// Shared concentration for type1 and for synthetic split-half clouds.
    #[arg(long, default_value_t = 50.0)]
    kappa: f64,
    #[arg(long)]
    kappa_x: Option<f64>,
    #[arg(long)]
    kappa_y: Option<f64>,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    /// Cloud file for split-half; a synthetic cloud of twice the group size otherwise.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    no_normalize: bool,
    #[command(flatten)]
    test: TestArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Pooled row count N.
    #[arg(long, default_value_t = 2000)]
    rows: usize,
    #[arg(long, default_value_t = 256)]
    dim: usize,
    #[arg(long = "b", default_value_t = 20_000)]
    b: usize,
    #[arg(long, default_value_t = 1024)]
    block_size: usize,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, env = "BREADTH_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn context(self, path: &Path) -> Self {
        Self {
            message: format!("{}: {}", path.display(), self.message),
            ..self
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_input_error() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

#[derive(Serialize)]
struct PairRecord<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<&'a Path>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<&'a Path>,
    n: usize,
    m: usize,
    t_obs: f64,
    p_value: f64,
    exceedances: usize,
    b: usize,
    alternative: Alternative,
    aligned: bool,
    r_x: f64,
    r_y: f64,
    v_x: f64,
    v_y: f64,
    seed: u64,
}

impl<'a> PairRecord<'a> {
    fn new(outcome: &PairOutcome, (n, m): (usize, usize), seed: u64) -> Self {
        let r = &outcome.result;
        Self {
            index: None,
            x: None,
            y: None,
            n,
            m,
            t_obs: r.t_obs,
            p_value: r.p_value,
            exceedances: r.exceedances,
            b: r.b_used,
            alternative: r.alternative,
            aligned: outcome.aligned(),
            r_x: r.r_x,
            r_y: r.r_y,
            v_x: outcome.x_stats.breadth,
            v_y: outcome.y_stats.breadth,
            seed,
        }
    }
}

#[derive(Serialize)]
struct CalibrationOutput {
    experiment: ModeArg,
    dim: usize,
    group_size: usize,
    kappa_x: f64,
    kappa_y: f64,
    angle: f64,
    #[serde(flatten)]
    report: CalibrationReport,
}

fn cmd_test(x: &Path, y: &Path, test: &TestArgs, input: &InputArgs) -> Result<String, Failure> {
    let config = test.config();
    config.validate()?;
    let xc = input.load(x, 0, config.seed)?;
    let yc = input.load(y, 1, config.seed)?;
    let outcome = run_pair(&xc, &yc, &config, input.mode())?;
    Ok(serde_json::to_string(&PairRecord::new(
        &outcome,
        (xc.n_rows(), yc.n_rows()),
        config.seed,
    ))? + "\n")
}

fn cmd_batch(manifest: &Path, test: &TestArgs, input: &InputArgs) -> Result<String, Failure> {
    let config = test.config();
    config.validate()?;
    let paths = read_manifest(manifest).map_err(|e| Failure::from(e).context(manifest))?;
    let pairs = paths
        .iter()
        .map(|(x, y)| {
            Ok((
                input.load(x, 0, config.seed)?,
                input.load(y, 1, config.seed)?,
            ))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let outcomes = run_batch(&pairs, &config, input.mode())?;
    let mut out = String::new();
    for (index, ((outcome, (x, y)), (xc, yc))) in
        outcomes.iter().zip(&paths).zip(&pairs).enumerate()
    {
        let record = PairRecord {
            index: Some(index),
            x: Some(x),
            y: Some(y),
            ..PairRecord::new(outcome, (xc.n_rows(), yc.n_rows()), config.seed)
        };
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    Ok(out)
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<String, Failure> {
    let config = args.test.config();
    let (kappa_x, kappa_y) = match args.mode {
        ModeArg::Type1 | ModeArg::SplitHalf => {
            if args.kappa_x.is_some() || args.kappa_y.is_some() {
                return Err(Failure::input(
                    "--kappa-x/--kappa-y apply to --mode power; use --kappa",
                ));
            }
            (args.kappa, args.kappa)
        }
        ModeArg::Power => match (args.kappa_x, args.kappa_y) {
            (Some(kx), Some(ky)) => (kx, ky),
            _ => return Err(Failure::input("--mode power needs --kappa-x and --kappa-y")),
        },
    };
    if args.input.is_some() && !matches!(args.mode, ModeArg::SplitHalf) {
        return Err(Failure::input("--input applies to --mode split-half"));
    }
    let report = match args.mode {
        ModeArg::Type1 => type1_experiment(
            args.dim,
            args.group_size,
            args.kappa,
            args.angle,
            args.trials,
            &config,
        )?,
        ModeArg::Power => power_experiment(
            args.dim,
            args.group_size,
            kappa_x,
            kappa_y,
            args.angle,
            args.trials,
            &config,
        )?,
        ModeArg::SplitHalf => {
            let cloud = match &args.input {
                Some(path) => read_cloud(path, !args.no_normalize)
                    .map_err(|e| Failure::from(e).context(path))?,
                None => {
                    if args.dim < 2 {
                        return Err(Failure::input("--dim must be at least 2"));
                    }
                    let mut rng = breadth_core::rng::substream(config.seed, Domain::Synthetic, 0);
                    sample_vmf(&VmfSpec {
                        mean_direction: random_unit_vector(args.dim, &mut rng),
                        concentration: args.kappa,
                        n_samples: 2 * args.group_size,
                        seed: config.seed,
                    })?
                }
            };
            split_half_check(&cloud, args.trials, &config)?
        }
    };
    let output = CalibrationOutput {
        experiment: args.mode,
        dim: args.dim,
        group_size: args.group_size,
        kappa_x,
        kappa_y,
        angle: args.angle,
        report,
    };
    Ok(serde_json::to_string_pretty(&output)? + "\n")
}

fn cmd_bench(args: &BenchArgs) -> Result<String, Failure> {
    let report = run_bench(&BenchParams {
        rows: args.rows,
        dim: args.dim,
        n_permutations: args.b,
        block_size: args.block_size,
        repeats: args.repeats,
        seed: args.seed,
    })?;
    Ok(serde_json::to_string_pretty(&report)? + "\n")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Test { x, y, test, input } => cmd_test(x, y, test, input),
        Command::Batch {
            manifest,
            test,
            input,
        } => cmd_batch(manifest, test, input),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("breadth: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
