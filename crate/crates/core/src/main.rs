use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use fpcode::error::{invalid, Result};
use fpcode::fp_code::{self, code_length, read_answer, read_codebook, write_codebook, DEFAULT_LENGTH_CONSTANT};
use fpcode::fp_lemma::{estimate_lemma_expectation, Identity, LemmaAdversary, Majority, NoisyMajority};
use fpcode::harness::{estimate_leakage, timed, write_csv_report, write_json_report, AttackConfig, Task};
use fpcode::matrix::Points;
use fpcode::mechanisms::{
    block_consensus_mechanism, constant_mechanism, exact_average, gaussian_average, lloyd_kmeans,
    power_iteration_top_vector,
};
use fpcode::reductions::{
    averaging_adversary, averaging_alpha, clustering_adversary, clustering_alpha, clustering_sample_size,
    svd_adversary, svd_alpha, Clusterer, ClusteringParams, Estimator, WeaklyAccurateMechanism,
};
use fpcode::rng::{entropy_seed, seeded, SimRng};

#[derive(Parser)]
#[command(name = "fpcode", version, about = "Fingerprinting codes and tracing attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a codebook and its tracing key.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        beta: f64,
        /// Code width; defaults to the full code length.
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trace an answer vector against a codebook file.
    Trace {
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long)]
        answer: PathBuf,
    },
    /// Monte Carlo check of the fingerprinting lemma for one adversary.
    LemmaVerify {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long, value_enum)]
        adversary: AdversaryKind,
        /// Flip probability of the noisy majority.
        #[arg(long, default_value_t = 0.1)]
        flip: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the tracing attack against a mechanism and write a report.
    Attack(AttackArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AdversaryKind {
    Identity,
    Majority,
    NoisyMajority,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorKind {
    Exact,
    Gaussian,
    Kmeans,
    Power,
    Consensus,
    Constant,
}

#[derive(clap::Args)]
struct AttackArgs {
    #[arg(long, value_enum)]
    task: Task,
    #[arg(long)]
    n0: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 2.0)]
    z: f64,
    #[arg(long, default_value_t = 0.0)]
    xi: f64,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Code width; defaults to the full code length.
    #[arg(long)]
    d0: Option<usize>,
    #[arg(long)]
    report: PathBuf,
    /// Mechanism inside the task wrapper. Defaults: averaging=exact,
    /// clustering=kmeans, svd=power, raw=consensus.
    #[arg(long, value_enum)]
    estimator: Option<EstimatorKind>,
    /// Noise scale of the gaussian estimator.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Padding parameter; defaults to the task's alpha for the given lambda.
    #[arg(long)]
    alpha: Option<f64>,
    /// Iterations for k-means and power iteration.
    #[arg(long, default_value_t = 30)]
    iters: usize,
    /// Also write one CSV row per trial.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Record wall-clock time in the report (makes it non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Run trials on one thread.
    #[arg(long)]
    sequential: bool,
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = entropy_seed();
        eprintln!("seed: {s}");
        s
    })
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &PathBuf) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn gen(n: usize, beta: f64, d: Option<usize>, seed: Option<u64>, out: &PathBuf) -> Result<()> {
    let seed = resolve_seed(seed);
    let (codebook, key) = fp_code::generate(n, beta, &mut seeded(seed), d)?;
    let mut w = create(out)?;
    write_codebook(&mut w, &codebook, &key, seed)?;
    w.flush()?;
    Ok(())
}

fn trace(codebook: &PathBuf, answer: &PathBuf) -> Result<()> {
    let file = read_codebook(open(codebook)?)?;
    let answer = read_answer(open(answer)?)?;
    match fp_code::trace(&file.codebook, &file.key, &answer)?.accused() {
        Some(i) => println!("ACCUSED {}", i + 1),
        None => println!("NO_ACCUSATION"),
    }
    Ok(())
}

fn lemma_verify(n: usize, trials: usize, kind: AdversaryKind, flip: f64, seed: Option<u64>) -> Result<bool> {
    let adversary: Box<dyn LemmaAdversary> = match kind {
        AdversaryKind::Identity => Box::new(Identity),
        AdversaryKind::Majority => Box::new(Majority),
        AdversaryKind::NoisyMajority => {
            if !(0.0..=1.0).contains(&flip) {
                return Err(invalid(format!("flip = {flip} must lie in [0, 1]")));
            }
            Box::new(NoisyMajority { flip })
        }
    };
    let mut rng = seeded(resolve_seed(seed));
    let r = estimate_lemma_expectation(adversary.as_ref(), n, trials, &mut rng)?;
    let pass = r.passes();
    println!("adversary: {}", adversary.name());
    println!("mean: {:.6}", r.mean);
    println!("stderr: {:.6}", r.stderr);
    println!("bound: {:.6}", r.bound);
    println!("{}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

fn default_estimator(task: Task) -> EstimatorKind {
    match task {
        Task::Averaging => EstimatorKind::Exact,
        Task::Clustering => EstimatorKind::Kmeans,
        Task::Svd => EstimatorKind::Power,
        Task::Raw => EstimatorKind::Consensus,
    }
}

fn build_mechanisms(args: &AttackArgs, config: &AttackConfig) -> Result<Vec<WeaklyAccurateMechanism>> {
    let kind = args.estimator.unwrap_or_else(|| default_estimator(args.task));
    let (sigma, iters) = (args.sigma, args.iters);
    if kind == EstimatorKind::Constant {
        return Ok(vec![constant_mechanism(1.0)?]);
    }
    let unsupported = || invalid("estimator does not fit this task");
    match args.task {
        Task::Averaging | Task::Svd => {
            let est: Estimator = match kind {
                EstimatorKind::Exact => Arc::new(|_, p: &dyn Points, _: &mut SimRng| exact_average(p)),
                EstimatorKind::Gaussian => {
                    Arc::new(move |_, p: &dyn Points, rng: &mut SimRng| gaussian_average(p, sigma, rng))
                }
                EstimatorKind::Power => Arc::new(move |_, p: &dyn Points, rng: &mut SimRng| {
                    Ok(power_iteration_top_vector(p, iters, rng)?.vector)
                }),
                _ => return Err(unsupported()),
            };
            if args.task == Task::Averaging {
                Ok(vec![averaging_adversary(est, args.lambda)?])
            } else {
                let (m, neg) = svd_adversary(est, args.lambda)?;
                Ok(vec![m, neg])
            }
        }
        Task::Clustering => {
            if kind != EstimatorKind::Kmeans {
                return Err(unsupported());
            }
            let centers = args.k + 1;
            let clusterer: Clusterer =
                Arc::new(move |p: &dyn Points, rng: &mut SimRng| Ok(lloyd_kmeans(p, centers, iters, rng)?.centers));
            let m = config.input_rows();
            let params = ClusteringParams {
                k: args.k,
                z: args.z,
                lambda: args.lambda,
                xi: args.xi,
                n: m,
                d: config.plan()?.total_width,
            };
            Ok(vec![clustering_adversary(clusterer, params)?])
        }
        Task::Raw => match kind {
            EstimatorKind::Consensus => Ok(vec![block_consensus_mechanism(args.n0, args.k)?]),
            _ => Err(unsupported()),
        },
    }
}

fn attack(args: &AttackArgs) -> Result<()> {
    if args.task == Task::Clustering {
        let m = clustering_sample_size(args.k, args.z, args.xi)?;
        if args.n0 * args.k != m {
            return Err(invalid(format!(
                "clustering with k = {}, z = {}, xi = {} takes {m} rows; set --n0 {}",
                args.k,
                args.z,
                args.xi,
                m / args.k
            )));
        }
    }
    let alpha = match args.alpha {
        Some(a) => a,
        None => match args.task {
            Task::Averaging | Task::Raw => averaging_alpha(args.lambda),
            Task::Svd => svd_alpha(args.lambda),
            Task::Clustering => clustering_alpha(args.lambda, args.z),
        },
    };
    let config = AttackConfig {
        n0: args.n0,
        beta: args.beta,
        alpha,
        k: args.k,
        lambda: args.lambda,
        task: args.task,
        trials: args.trials,
        seed: resolve_seed(args.seed),
        d0_override: args.d0,
        z: args.z,
        xi: args.xi,
        parallel: !args.sequential,
    };
    config.validate()?;
    if let Some(d0) = args.d0 {
        let full = code_length(args.n0, args.beta, DEFAULT_LENGTH_CONSTANT)?;
        if d0 < full {
            eprintln!("warning: d0 = {d0} is below the full code length {full}; tracing guarantees do not apply");
        }
    }
    let mechs = build_mechanisms(args, &config)?;
    let (report, seconds) = timed(|| estimate_leakage(&mechs, &config, &mut seeded(config.seed)));
    let report = report?;
    let mut w = create(&args.report)?;
    write_json_report(&mut w, &config, &report, args.timing.then_some(seconds))?;
    writeln!(w)?;
    w.flush()?;
    if let Some(path) = &args.csv {
        write_csv_report(create(path)?, &report)?;
    }
    let r = report.rates;
    eprintln!(
        "trace_success {:.4}  false_accusation {:.4}  no_accusation {:.4}  agreement {:.4}",
        r.trace_success, r.false_accusation, r.no_accusation, r.agreement
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gen { n, beta, d, seed, out } => gen(*n, *beta, *d, *seed, out).map(|_| true),
        Command::Trace { codebook, answer } => trace(codebook, answer).map(|_| true),
        Command::LemmaVerify { n, trials, adversary, flip, seed } => {
            lemma_verify(*n, *trials, *adversary, *flip, *seed)
        }
        Command::Attack(args) => attack(args).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
