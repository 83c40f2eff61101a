//! Command-line front end: seed-corpus emission, model fitting, biased
//! generation, ranking, fairness audits and the full sweep.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime
//! failure.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use recruitsim::corpus::{
    Schema, SeedCorpusParams, generate_seed_corpus_sized, ingest_corpus, write_dataset,
};
use recruitsim::error::Error;
use recruitsim::experiment::{ExperimentConfig, emit_failure_manifest, emit_report, run_sweep};
use recruitsim::graph::CausalGraphSpec;
use recruitsim::ranking::{
    RankedPool, RankingModel, default_rnd_thresholds, demographic_parity, rnd_metric,
};
use recruitsim::recruitment::{cvs_from_dataset, fitness_vector, jobs_from_dataset};
use recruitsim::rng::derive_stream;
use recruitsim::scm::{FitOptions, StructuralModel, apply_tilt, fit_scm, sample_records};

#[derive(Parser)]
#[command(
    name = "recruitsim",
    version,
    about = "Causal synthetic recruitment data with controllable bias, plus ranking fairness audits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the reference seed corpora (jobs.csv, curricula.csv).
    SeedCorpus(SeedCorpusArgs),
    /// Fit a structural model from a graph document and a CSV corpus.
    Fit(FitArgs),
    /// Generate records from a fitted model, optionally tilted.
    Generate(GenerateArgs),
    /// Score and rank every candidate against every job offer.
    Rank(RankArgs),
    /// Compute DP and rND per job from a ranked CSV.
    Audit(AuditArgs),
    /// Run the full tilt sweep and emit plot-ready reports.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SeedCorpusArgs {
    /// Seed-corpus parameter file (defaults to the bundled parameters).
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    n_jobs: Option<usize>,
    #[arg(long)]
    n_cvs: Option<usize>,
    /// Overrides the seed in the parameter file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for jobs.csv and curricula.csv.
    #[arg(long, default_value = "data")]
    out: PathBuf,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Graph document (JSON).
    #[arg(long)]
    graph: PathBuf,
    /// Observational corpus (CSV matching the graph schema).
    #[arg(long)]
    corpus: PathBuf,
    /// Laplace pseudo-count override for all variables.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// Fitted model file produced by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tilt strength for the `not_male` group.
    #[arg(long, allow_hyphen_values = true)]
    alpha0: Option<f64>,
    /// Tilt strength for the `male` group.
    #[arg(long, allow_hyphen_values = true)]
    alpha1: Option<f64>,
    /// CSV file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct RankArgs {
    /// Job offers CSV.
    #[arg(long)]
    jobs: PathBuf,
    /// Curricula CSV.
    #[arg(long)]
    cvs: PathBuf,
    /// Job graph document (defaults to the bundled job-offer graph).
    #[arg(long)]
    job_graph: Option<PathBuf>,
    /// Curriculum graph document (defaults to the bundled curriculum graph).
    #[arg(long)]
    cv_graph: Option<PathBuf>,
    /// Comma list: education,experience,skills,working_hours.
    #[arg(long, default_value = "0.8,0.5,1.0,1.0", allow_hyphen_values = true)]
    weights: String,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ranked CSV to write (job,candidate,score,rank,protected).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct AuditArgs {
    /// Ranked CSV produced by `rank`.
    #[arg(long)]
    ranked: PathBuf,
    #[arg(long, default_value_t = 20)]
    dp_k: usize,
    /// Comma list of rND rank prefixes (default: multiples of 5 up to the
    /// pool size).
    #[arg(long)]
    rnd_thresholds: Option<String>,
    /// Per-job CSV to write (job,dp,rnd); summary always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment config file; flags below override individual fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    n_jobs: Option<usize>,
    #[arg(long)]
    n_cvs: Option<usize>,
    /// Scalar or comma list for the alpha0 panel.
    #[arg(long, allow_hyphen_values = true)]
    alpha0: Option<String>,
    /// Scalar or comma list for the alpha1 panel.
    #[arg(long, allow_hyphen_values = true)]
    alpha1: Option<String>,
    /// Scalar or comma list of working-hours weight variants.
    #[arg(long)]
    wh_weight: Option<String>,
    #[arg(long)]
    dp_k: Option<usize>,
    /// Comma list of rND rank prefixes.
    #[arg(long)]
    rnd_thresholds: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not errors.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::SeedCorpus(args) => seed_corpus(args),
        Command::Fit(args) => fit(args),
        Command::Generate(args) => generate(args),
        Command::Rank(args) => rank(args),
        Command::Audit(args) => audit(args),
        Command::Sweep(args) => sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// 1 config error, 2 data error, 3 runtime failure.
fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::ConfigSyntax { .. } | Error::Config(_) | Error::InvalidGraph(_) => 1,
        Error::OutOfDomain { .. }
        | Error::SchemaMismatch(_)
        | Error::EmptyDataset
        | Error::MalformedField { .. }
        | Error::Csv { .. }
        | Error::WouldOverwrite(_)
        | Error::DegeneratePool(_) => 2,
        Error::Mechanism { .. } | Error::Io { .. } => 3,
    }
}

fn read_to_string(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8], overwrite: bool) -> Result<(), Error> {
    if path.exists() && !overwrite {
        return Err(Error::WouldOverwrite(path.to_path_buf()));
    }
    if let Some(parent) = path.parent()
        && !parent.as_os_str().is_empty()
    {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn load_graph(path: Option<&Path>, default_text: &str) -> Result<CausalGraphSpec, Error> {
    let text = match path {
        Some(p) => read_to_string(p)?,
        None => default_text.to_string(),
    };
    let graph = CausalGraphSpec::parse(&text)?;
    graph.ensure_valid()?;
    Ok(graph)
}

fn parse_f64_list(text: &str, flag: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("--{flag}: `{s}` is not a number")))
        })
        .collect()
}

fn parse_usize_list(text: &str, flag: &str) -> Result<Vec<usize>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("--{flag}: `{s}` is not a count")))
        })
        .collect()
}

fn seed_corpus(args: SeedCorpusArgs) -> Result<(), Error> {
    let mut params = match &args.params {
        Some(path) => SeedCorpusParams::parse(&read_to_string(path)?)?,
        None => SeedCorpusParams::default(),
    };
    if let Some(seed) = args.seed {
        params.seed = seed;
    }
    let n_jobs = args.n_jobs.unwrap_or(params.n_jobs);
    let n_cvs = args.n_cvs.unwrap_or(params.n_cvs);
    let (jobs, cvs) = generate_seed_corpus_sized(&params, n_jobs, n_cvs)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let jobs_path = args.out.join("jobs.csv");
    let cvs_path = args.out.join("curricula.csv");
    write_dataset(&jobs, &jobs_path, args.overwrite)?;
    write_dataset(&cvs, &cvs_path, args.overwrite)?;
    println!(
        "wrote {} job offers to {} and {} curricula to {}",
        jobs.len(),
        jobs_path.display(),
        cvs.len(),
        cvs_path.display()
    );
    Ok(())
}

fn fit(args: FitArgs) -> Result<(), Error> {
    let graph = load_graph(Some(&args.graph), "")?;
    let corpus = ingest_corpus(&args.corpus, &Schema::from_graph(&graph))?;
    let model = fit_scm(
        &graph,
        &corpus,
        FitOptions {
            epsilon_override: args.epsilon,
        },
    )?;
    write_file(&args.out, model.to_json_pretty().as_bytes(), args.overwrite)?;
    println!(
        "fitted {} mechanisms from {} rows -> {}",
        model.order().len(),
        corpus.len(),
        args.out.display()
    );
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<(), Error> {
    let model = StructuralModel::from_json(&read_to_string(&args.model)?)?;
    let model = match (args.alpha0, args.alpha1) {
        (None, None) => model,
        (alpha0, alpha1) => {
            let tilt = model
                .graph()
                .tilts
                .first()
                .ok_or_else(|| {
                    Error::Config(
                        "model's graph declares no tilt; --alpha0/--alpha1 unusable".into(),
                    )
                })?
                .clone();
            let mut alphas: BTreeMap<String, f64> = BTreeMap::new();
            if let Some(a0) = alpha0 {
                alphas.insert("not_male".into(), a0);
            }
            if let Some(a1) = alpha1 {
                alphas.insert("male".into(), a1);
            }
            apply_tilt(&model, &tilt.with_alphas(alphas))?
        }
    };
    let mut rng = derive_stream(args.seed, "generate", &[]);
    let dataset = sample_records(&model, args.n, &mut rng)?;
    if args.out.exists() && !args.overwrite {
        return Err(Error::WouldOverwrite(args.out.clone()));
    }
    write_dataset(&dataset, &args.out, args.overwrite)?;
    println!("wrote {} records to {}", dataset.len(), args.out.display());
    Ok(())
}

fn rank(args: RankArgs) -> Result<(), Error> {
    let weights = parse_f64_list(&args.weights, "weights")?;
    let weights: [f64; 4] = weights
        .try_into()
        .map_err(|_| Error::Config("--weights needs exactly 4 numbers".into()))?;
    let model = RankingModel::new(weights, args.sigma)?;

    let job_graph = load_graph(
        args.job_graph.as_deref(),
        recruitsim::DEFAULT_JOB_OFFER_GRAPH,
    )?;
    let cv_graph = load_graph(
        args.cv_graph.as_deref(),
        recruitsim::DEFAULT_CURRICULUM_GRAPH,
    )?;
    let jobs = jobs_from_dataset(&ingest_corpus(&args.jobs, &Schema::from_graph(&job_graph))?)?;
    let cvs = cvs_from_dataset(&ingest_corpus(&args.cvs, &Schema::from_graph(&cv_graph))?)?;
    if jobs.is_empty() || cvs.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut rng = derive_stream(args.seed, "rank", &[]);
    let mut out = Vec::new();
    writeln!(out, "job,candidate,score,rank,protected").unwrap();
    for (j_ix, job) in jobs.iter().enumerate() {
        let scores: Vec<f64> = cvs
            .iter()
            .map(|cv| model.score(&fitness_vector(job, cv), &mut rng))
            .collect();
        let protected: Vec<bool> = cvs.iter().map(|cv| cv.is_protected()).collect();
        let pool = RankedPool::from_scores(&scores, &protected)?;
        for (c_ix, candidate) in pool.candidates().iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                j_ix, c_ix, candidate.score, candidate.rank, candidate.protected
            )
            .unwrap();
        }
    }
    write_file(&args.out, &out, args.overwrite)?;
    println!(
        "ranked {} candidates against {} jobs -> {}",
        cvs.len(),
        jobs.len(),
        args.out.display()
    );
    Ok(())
}

fn audit(args: AuditArgs) -> Result<(), Error> {
    let text = read_to_string(&args.ranked)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or(Error::EmptyDataset)?;
    if header.trim() != "job,candidate,score,rank,protected" {
        return Err(Error::Csv {
            path: args.ranked.clone(),
            message: "expected header job,candidate,score,rank,protected".into(),
            line: Some(1),
        });
    }
    // job -> (scores, protected) in candidate order.
    let mut pools: BTreeMap<u64, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    for (ix, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = |message: &str| Error::Csv {
            path: args.ranked.clone(),
            message: message.into(),
            line: Some(ix as u64 + 2),
        };
        if fields.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let job: u64 = fields[0].parse().map_err(|_| bad("bad job id"))?;
        let score: f64 = fields[2].parse().map_err(|_| bad("bad score"))?;
        let protected: bool = fields[4].parse().map_err(|_| bad("bad protected flag"))?;
        let entry = pools.entry(job).or_default();
        entry.0.push(score);
        entry.1.push(protected);
    }
    if pools.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let thresholds = match &args.rnd_thresholds {
        Some(list) => Some(parse_usize_list(list, "rnd-thresholds")?),
        None => None,
    };

    let mut per_job = Vec::new();
    writeln!(per_job, "job,dp,rnd").unwrap();
    let mut dp_values = Vec::new();
    let mut rnd_values = Vec::new();
    let mut degenerate = 0u64;
    for (job, (scores, protected)) in &pools {
        let pool = RankedPool::from_scores(scores, protected)?;
        let cuts = thresholds
            .clone()
            .unwrap_or_else(|| default_rnd_thresholds(pool.len()));
        let rnd = rnd_metric(&pool, &cuts)?;
        rnd_values.push(rnd);
        match demographic_parity(&pool, args.dp_k) {
            Ok(dp) => {
                dp_values.push(dp);
                writeln!(per_job, "{job},{dp:.6},{rnd:.6}").unwrap();
            }
            Err(Error::DegeneratePool(_)) => {
                degenerate += 1;
                writeln!(per_job, "{job},,{rnd:.6}").unwrap();
            }
            Err(other) => return Err(other),
        }
    }

    let mean = |values: &[f64]| values.iter().sum::<f64>() / values.len() as f64;
    if dp_values.is_empty() {
        println!(
            "dp: undefined for all {} jobs (single-group pools)",
            pools.len()
        );
    } else {
        println!(
            "dp:  mean {:.4} over {} jobs ({} skipped as degenerate)",
            mean(&dp_values),
            dp_values.len(),
            degenerate
        );
    }
    println!(
        "rnd: mean {:.4} over {} jobs",
        mean(&rnd_values),
        rnd_values.len()
    );

    if let Some(out) = &args.out {
        write_file(out, &per_job, args.overwrite)?;
        println!("per-job metrics -> {}", out.display());
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Error> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::parse(&read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(runs) = args.runs {
        config.runs = runs;
    }
    if let Some(n_jobs) = args.n_jobs {
        config.n_jobs = n_jobs;
    }
    if let Some(n_cvs) = args.n_cvs {
        config.n_cvs = n_cvs;
    }
    if let Some(list) = &args.alpha0 {
        config.alpha0_grid = parse_f64_list(list, "alpha0")?;
    }
    if let Some(list) = &args.alpha1 {
        config.alpha1_grid = parse_f64_list(list, "alpha1")?;
    }
    if let Some(list) = &args.wh_weight {
        config.wh_weights = parse_f64_list(list, "wh-weight")?;
    }
    if let Some(k) = args.dp_k {
        config.dp_k = k;
    }
    if let Some(list) = &args.rnd_thresholds {
        config.rnd_thresholds = Some(parse_usize_list(list, "rnd-thresholds")?);
    }
    config.validate()?;

    match run_sweep(&config) {
        Ok(report) => {
            let files = emit_report(&report, &args.out)?;
            for f in &files {
                println!("wrote {}", f.display());
            }
            if report.degenerate_jobs > 0 {
                println!(
                    "note: {} degenerate jobs skipped for dp",
                    report.degenerate_jobs
                );
            }
            Ok(())
        }
        Err(e) => {
            // Leave an auditable record next to any partial output.
            let _ = emit_failure_manifest(&config, &e, &args.out);
            Err(e)
        }
    }
}
