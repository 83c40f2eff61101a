//! The fairness experiment: fit structural models from a corpus, sweep the
//! tilt parameters one at a time (the other held at 0), generate job offers
//! and candidate pools per seeded run, rank every candidate against every
//! offer, and aggregate demographic parity and rND into plot-ready CSV.
//!
//! Reproducibility contract: per-stage streams derive from
//! `(master seed, stage tag, run index)` and never from the sweep setting,
//! so settings share common random numbers within a run and adding stages
//! never perturbs earlier ones. Two sweeps with the same config yield
//! byte-identical reports. Models are fitted once from the corpus and
//! tilted per setting; runs only re-draw the generated datasets.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    Dataset, Schema, SeedCorpusParams, Value, generate_seed_corpus_sized, ingest_corpus,
};
use crate::error::{Error, Result};
use crate::graph::CausalGraphSpec;
use crate::ranking::{RankedPool, default_rnd_thresholds, demographic_parity, rnd_metric};
use crate::recruitment::{Curriculum, JobOffer, cvs_from_dataset, jobs_from_dataset};
use crate::rng::derive_stream;
use crate::scm::{FitOptions, StructuralModel, apply_tilt, fit_scm, sample_records};

/// Which tilt parameter a sweep panel varies. `alpha0` shifts the
/// `not_male` conditional, `alpha1` the `male` conditional; the other
/// parameter stays at 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParam {
    Alpha0,
    Alpha1,
}

impl SweptParam {
    pub fn label(self) -> &'static str {
        match self {
            SweptParam::Alpha0 => "alpha0",
            SweptParam::Alpha1 => "alpha1",
        }
    }

    /// Group value whose conditional this parameter shifts.
    pub fn group_value(self) -> &'static str {
        match self {
            SweptParam::Alpha0 => "not_male",
            SweptParam::Alpha1 => "male",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Dp,
    Rnd,
}

impl MetricKind {
    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Dp => "dp",
            MetricKind::Rnd => "rnd",
        }
    }
}

/// Full experiment configuration. Every field has a default matching the
/// reference experiment; a config file only overrides what it names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed; all stage streams derive from it.
    pub seed: u64,
    pub runs: usize,
    pub n_jobs: usize,
    pub n_cvs: usize,
    pub alpha0_grid: Vec<f64>,
    pub alpha1_grid: Vec<f64>,
    /// Working-hours weight variants of the ranking model.
    pub wh_weights: Vec<f64>,
    /// Fixed weights for (education, experience, skills).
    pub base_weights: [f64; 3],
    /// Standard deviation of the score noise β.
    pub sigma: f64,
    /// Top-k cutoff for demographic parity.
    pub dp_k: usize,
    /// rND rank prefixes; `None` uses multiples of 5 up to the pool size.
    pub rnd_thresholds: Option<Vec<usize>>,
    /// Seed-corpus parameters; `None` uses the bundled defaults. Ignored
    /// when CSV corpora are given.
    pub seed_corpus: Option<SeedCorpusParams>,
    /// Observational corpora as CSV paths (both or neither).
    pub jobs_csv: Option<String>,
    pub cvs_csv: Option<String>,
    /// Graph documents; `None` uses the bundled defaults.
    pub job_graph: Option<String>,
    pub cv_graph: Option<String>,
}

fn default_alpha_grid() -> Vec<f64> {
    (0..=16).map(|i| -4.0 + 0.5 * f64::from(i)).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            runs: 10,
            n_jobs: 300,
            n_cvs: 1000,
            alpha0_grid: default_alpha_grid(),
            alpha1_grid: default_alpha_grid(),
            wh_weights: vec![0.0, 0.5, 0.8, 1.0],
            base_weights: [0.8, 0.5, 1.0],
            sigma: 0.01,
            dp_k: 20,
            rnd_thresholds: None,
            seed_corpus: None,
            jobs_csv: None,
            cvs_csv: None,
            job_graph: None,
            cv_graph: None,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if self.n_jobs < 1 || self.n_cvs < 1 {
            return Err(Error::Config("n_jobs and n_cvs must be >= 1".into()));
        }
        if self.alpha0_grid.is_empty() && self.alpha1_grid.is_empty() {
            return Err(Error::Config(
                "at least one alpha grid must be non-empty".into(),
            ));
        }
        if self.wh_weights.is_empty() {
            return Err(Error::Config("wh_weights must be non-empty".into()));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::Config("sigma must be finite and >= 0".into()));
        }
        if self.dp_k < 1 {
            return Err(Error::Config("dp_k must be >= 1".into()));
        }
        if let Some(thresholds) = &self.rnd_thresholds
            && (thresholds.is_empty() || thresholds.iter().any(|&t| t < 2))
        {
            return Err(Error::Config(
                "rnd_thresholds must be >= 2 and non-empty".into(),
            ));
        }
        if self.jobs_csv.is_some() != self.cvs_csv.is_some() {
            return Err(Error::Config(
                "jobs_csv and cvs_csv must be given together".into(),
            ));
        }
        Ok(())
    }

    fn settings(&self) -> Vec<(SweptParam, f64)> {
        let mut settings: Vec<(SweptParam, f64)> = self
            .alpha0_grid
            .iter()
            .map(|&a| (SweptParam::Alpha0, a))
            .collect();
        settings.extend(self.alpha1_grid.iter().map(|&a| (SweptParam::Alpha1, a)));
        settings
    }
}

/// One aggregated report cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FairnessRow {
    pub swept: SweptParam,
    pub alpha: f64,
    pub wh_weight: f64,
    pub metric: MetricKind,
    /// Mean over runs of the per-run mean over jobs.
    pub mean: f64,
    /// Sample standard deviation over runs (n−1; 0 for a single run).
    pub std: f64,
    /// Per-run means, in run order.
    pub per_run: Vec<f64>,
}

/// Empirical working-hours conditional of one group under one setting,
/// averaged over runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TiltedRow {
    pub swept: SweptParam,
    pub alpha: f64,
    pub group: String,
    pub part: f64,
    pub full: f64,
}

/// Everything a sweep produces before rendering.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub fairness: Vec<FairnessRow>,
    pub tilted: Vec<TiltedRow>,
    /// Jobs skipped because demographic parity was undefined (single-group
    /// pool), summed over runs and settings.
    pub degenerate_jobs: u64,
}

impl SweepReport {
    /// Look up a cell by exact setting coordinates.
    pub fn row(
        &self,
        swept: SweptParam,
        alpha: f64,
        wh_weight: f64,
        metric: MetricKind,
    ) -> Option<&FairnessRow> {
        self.fairness.iter().find(|r| {
            r.swept == swept && r.alpha == alpha && r.wh_weight == wh_weight && r.metric == metric
        })
    }

    /// Fairness rows as CSV bytes: `swept_param,alpha,wh_weight,metric,mean,std`.
    pub fn render_fairness_csv(&self) -> Vec<u8> {
        let mut out = Vec::new();
        writeln!(out, "swept_param,alpha,wh_weight,metric,mean,std").unwrap();
        for row in &self.fairness {
            writeln!(
                out,
                "{},{},{},{},{:.6},{:.6}",
                row.swept.label(),
                row.alpha,
                row.wh_weight,
                row.metric.label(),
                row.mean,
                row.std
            )
            .unwrap();
        }
        out
    }

    /// Tilted working-hours conditionals as CSV bytes.
    pub fn render_tilted_csv(&self) -> Vec<u8> {
        let mut out = Vec::new();
        writeln!(out, "swept_param,alpha,group,part,full").unwrap();
        for row in &self.tilted {
            writeln!(
                out,
                "{},{},{},{:.6},{:.6}",
                row.swept.label(),
                row.alpha,
                row.group,
                row.part,
                row.full
            )
            .unwrap();
        }
        out
    }

    /// Run manifest: configuration (seed included) plus provenance fields.
    pub fn render_manifest(&self) -> Vec<u8> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            generator: &'static str,
            version: &'static str,
            status: &'static str,
            master_seed: u64,
            degenerate_jobs: u64,
            config: &'a ExperimentConfig,
        }
        let manifest = Manifest {
            generator: "recruitsim",
            version: env!("CARGO_PKG_VERSION"),
            status: "complete",
            master_seed: self.config.seed,
            degenerate_jobs: self.degenerate_jobs,
            config: &self.config,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
        bytes.push(b'\n');
        bytes
    }
}

/// Arithmetic mean and sample standard deviation (n−1 denominator; the
/// deviation is 0 when a single value is given).
pub fn aggregate_runs(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Config("cannot aggregate zero runs".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok((mean, std))
}

// --- compiled scoring path ----------------------------------------------------

/// Skill sets as bitmasks for the inner scoring loop. Job and curriculum
/// graphs in a sweep share one vocabulary; 128 bits cover the defaults.
const MAX_FAST_VOCAB: usize = 128;

struct CompiledJob {
    education: i64,
    exp_lo: u32,
    exp_hi: u32,
    skills: u128,
    n_skills: u32,
    part_time: bool,
}

struct CompiledCv {
    education: i64,
    experience: u32,
    skills: u128,
    part_time: bool,
    protected: bool,
}

fn skill_mask(
    labels: &std::collections::BTreeSet<String>,
    vocab_index: &BTreeMap<&str, usize>,
) -> Result<u128> {
    let mut mask = 0u128;
    for label in labels {
        let ix = vocab_index
            .get(label.as_str())
            .ok_or_else(|| Error::OutOfDomain {
                variable: "skills".into(),
                value: label.clone(),
                line: None,
            })?;
        mask |= 1u128 << ix;
    }
    Ok(mask)
}

fn compile_jobs(
    jobs: &[JobOffer],
    vocab_index: &BTreeMap<&str, usize>,
) -> Result<Vec<CompiledJob>> {
    jobs.iter()
        .map(|j| {
            Ok(CompiledJob {
                education: i64::from(j.education_eqf),
                exp_lo: j.experience_range.0,
                exp_hi: j.experience_range.1,
                skills: skill_mask(&j.skills, vocab_index)?,
                n_skills: j.skills.len() as u32,
                part_time: j.working_hours == crate::recruitment::WorkingHours::PartTime,
            })
        })
        .collect()
}

fn compile_cvs(cvs: &[Curriculum], vocab_index: &BTreeMap<&str, usize>) -> Result<Vec<CompiledCv>> {
    cvs.iter()
        .map(|c| {
            Ok(CompiledCv {
                education: i64::from(c.education_eqf),
                experience: c.experience,
                skills: skill_mask(&c.skills, vocab_index)?,
                part_time: c.working_hours == crate::recruitment::WorkingHours::PartTime,
                protected: c.is_protected(),
            })
        })
        .collect()
}

/// Fitness components in compiled form; must agree exactly with
/// [`crate::recruitment::fitness_vector`] (tested).
fn compiled_fitness(job: &CompiledJob, cv: &CompiledCv) -> [f64; 4] {
    let education = f64::from(cv.education >= job.education);
    let experience = f64::from(cv.experience >= job.exp_lo && cv.experience <= job.exp_hi);
    let skills = f64::from((job.skills & cv.skills).count_ones()) / f64::from(job.n_skills);
    let working_hours = f64::from(job.part_time == cv.part_time);
    [education, experience, skills, working_hours]
}

// --- the sweep ------------------------------------------------------------------

struct SweepInputs {
    cv_graph: CausalGraphSpec,
    job_model: StructuralModel,
    cv_model: StructuralModel,
    vocabulary: Vec<String>,
}

fn load_graph(path: Option<&str>, default_text: &str) -> Result<CausalGraphSpec> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => default_text.to_string(),
    };
    let graph = CausalGraphSpec::parse(&text)?;
    graph.ensure_valid()?;
    Ok(graph)
}

fn prepare_inputs(config: &ExperimentConfig) -> Result<SweepInputs> {
    let job_graph = load_graph(config.job_graph.as_deref(), crate::DEFAULT_JOB_OFFER_GRAPH)?;
    let cv_graph = load_graph(config.cv_graph.as_deref(), crate::DEFAULT_CURRICULUM_GRAPH)?;
    if cv_graph.tilts.is_empty() {
        return Err(Error::Config(
            "the curriculum graph declares no tilt; the sweep has nothing to vary".into(),
        ));
    }

    let (jobs_corpus, cvs_corpus) = match (&config.jobs_csv, &config.cvs_csv) {
        (Some(jobs_path), Some(cvs_path)) => {
            let jobs = ingest_corpus(Path::new(jobs_path), &Schema::from_graph(&job_graph))?;
            let cvs = ingest_corpus(Path::new(cvs_path), &Schema::from_graph(&cv_graph))?;
            (jobs, cvs)
        }
        _ => {
            let params = config.seed_corpus.clone().unwrap_or_default();
            let (jobs, cvs) = generate_seed_corpus_sized(&params, params.n_jobs, params.n_cvs)?;
            (jobs, cvs)
        }
    };

    let job_model = fit_scm(&job_graph, &jobs_corpus, FitOptions::default())?;
    let cv_model = fit_scm(&cv_graph, &cvs_corpus, FitOptions::default())?;

    let vocabulary = match &cv_graph.variable("skills").map(|v| &v.domain) {
        Some(crate::graph::Domain::Set { vocabulary, .. }) => vocabulary.clone(),
        _ => {
            return Err(Error::Config(
                "curriculum graph needs a `skills` set variable".into(),
            ));
        }
    };
    if vocabulary.len() > MAX_FAST_VOCAB {
        return Err(Error::Config(format!(
            "sweep scoring supports at most {MAX_FAST_VOCAB} skills, got {}",
            vocabulary.len()
        )));
    }

    Ok(SweepInputs {
        cv_graph,
        job_model,
        cv_model,
        vocabulary,
    })
}

struct RunOutcome {
    /// `[setting][weight]` mean DP over jobs (NaN when every job was
    /// degenerate).
    dp: Vec<Vec<f64>>,
    /// `[setting][weight]` mean rND over jobs.
    rnd: Vec<Vec<f64>>,
    /// `[setting]` jobs skipped for DP.
    degenerate: Vec<u64>,
    /// `[setting]` per-group `(part, total)` counts in the generated pool.
    wh_counts: Vec<BTreeMap<String, (u64, u64)>>,
}

fn gender_wh_counts(cvs: &Dataset) -> BTreeMap<String, (u64, u64)> {
    let gender_col = cvs.schema().index_of("gender").expect("curriculum schema");
    let wh_col = cvs
        .schema()
        .index_of("working_hours")
        .expect("curriculum schema");
    let gender_labels = match &cvs.schema().variables[gender_col].domain {
        crate::graph::Domain::Categorical(vals) => vals.clone(),
        _ => unreachable!("gender is categorical"),
    };
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for row in cvs.rows() {
        let g = match row[gender_col] {
            Value::Categorical(ix) => &gender_labels[ix as usize],
            _ => unreachable!(),
        };
        let part = row[wh_col] == Value::Categorical(1);
        let entry = counts.entry(g.clone()).or_insert((0, 0));
        entry.0 += u64::from(part);
        entry.1 += 1;
    }
    counts
}

fn run_one(
    config: &ExperimentConfig,
    inputs: &SweepInputs,
    tilted_models: &[StructuralModel],
    run: u64,
) -> Result<RunOutcome> {
    let settings = config.settings();
    let vocab_index: BTreeMap<&str, usize> = inputs
        .vocabulary
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();

    // Jobs are tilt-free: one draw per run, shared by every setting.
    let mut jobs_rng = derive_stream(config.seed, "jobs", &[run]);
    let jobs_dataset = sample_records(&inputs.job_model, config.n_jobs, &mut jobs_rng)?;
    let jobs = compile_jobs(&jobs_from_dataset(&jobs_dataset)?, &vocab_index)?;

    // One β per (job, candidate) pair, reused across settings and weight
    // variants: common random numbers keep setting comparisons exact.
    let mut beta_rng = derive_stream(config.seed, "beta", &[run]);
    let normal = rand_distr::Normal::new(0.0, config.sigma).expect("validated sigma");
    let betas: Vec<f64> = (0..config.n_jobs * config.n_cvs)
        .map(|_| rand_distr::Distribution::sample(&normal, &mut beta_rng))
        .collect();

    let thresholds = config
        .rnd_thresholds
        .clone()
        .unwrap_or_else(|| default_rnd_thresholds(config.n_cvs));

    let mut outcome = RunOutcome {
        dp: Vec::with_capacity(settings.len()),
        rnd: Vec::with_capacity(settings.len()),
        degenerate: Vec::with_capacity(settings.len()),
        wh_counts: Vec::with_capacity(settings.len()),
    };

    let mut scores = vec![0.0f64; config.n_cvs];
    for (s_ix, _) in settings.iter().enumerate() {
        // The CV stream derives from (seed, stage, run) only: every setting
        // replays the same draws against its tilted model.
        let mut cvs_rng = derive_stream(config.seed, "cvs", &[run]);
        let cvs_dataset = sample_records(&tilted_models[s_ix], config.n_cvs, &mut cvs_rng)?;
        outcome.wh_counts.push(gender_wh_counts(&cvs_dataset));
        let cvs = compile_cvs(&cvs_from_dataset(&cvs_dataset)?, &vocab_index)?;
        let protected: Vec<bool> = cvs.iter().map(|c| c.protected).collect();

        let mut dp_by_weight = Vec::with_capacity(config.wh_weights.len());
        let mut rnd_by_weight = Vec::with_capacity(config.wh_weights.len());
        let mut degenerate = 0u64;
        for (w_ix, &wh_weight) in config.wh_weights.iter().enumerate() {
            let weights = [
                config.base_weights[0],
                config.base_weights[1],
                config.base_weights[2],
                wh_weight,
            ];
            let mut dp_sum = 0.0;
            let mut dp_count = 0u64;
            let mut rnd_sum = 0.0;
            for (j_ix, job) in jobs.iter().enumerate() {
                for (c_ix, cv) in cvs.iter().enumerate() {
                    let v = compiled_fitness(job, cv);
                    let dot: f64 = weights.iter().zip(v).map(|(w, x)| w * x).sum();
                    scores[c_ix] = dot + betas[j_ix * config.n_cvs + c_ix];
                }
                let pool = RankedPool::from_scores(&scores, &protected)?;
                match demographic_parity(&pool, config.dp_k) {
                    Ok(dp) => {
                        dp_sum += dp;
                        dp_count += 1;
                    }
                    Err(Error::DegeneratePool(_)) => {
                        if w_ix == 0 {
                            degenerate += 1;
                        }
                    }
                    Err(other) => return Err(other),
                }
                rnd_sum += rnd_metric(&pool, &thresholds)?;
            }
            dp_by_weight.push(if dp_count > 0 {
                dp_sum / dp_count as f64
            } else {
                f64::NAN
            });
            rnd_by_weight.push(rnd_sum / jobs.len() as f64);
        }
        outcome.dp.push(dp_by_weight);
        outcome.rnd.push(rnd_by_weight);
        outcome.degenerate.push(degenerate);
    }
    Ok(outcome)
}

/// Run the full sweep described by `config`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let inputs = prepare_inputs(config)?;
    let settings = config.settings();

    // One tilted model per setting, shared across runs.
    let base_tilt = inputs.cv_graph.tilts[0].clone();
    let tilted_models: Vec<StructuralModel> = settings
        .iter()
        .map(|&(param, alpha)| {
            let tilt = base_tilt.with_alphas(
                [(param.group_value().to_string(), alpha)]
                    .into_iter()
                    .collect(),
            );
            apply_tilt(&inputs.cv_model, &tilt)
        })
        .collect::<Result<_>>()?;

    #[cfg(feature = "parallel")]
    let runs_iter = (0..config.runs as u64).into_par_iter();
    #[cfg(not(feature = "parallel"))]
    let runs_iter = 0..config.runs as u64;
    let outcomes: Vec<RunOutcome> = runs_iter
        .map(|run| run_one(config, &inputs, &tilted_models, run))
        .collect::<Result<_>>()?;

    let mut fairness = Vec::new();
    let mut tilted = Vec::new();
    let mut degenerate_jobs = 0u64;
    for (s_ix, &(param, alpha)) in settings.iter().enumerate() {
        degenerate_jobs += outcomes.iter().map(|o| o.degenerate[s_ix]).sum::<u64>();
        for (w_ix, &wh_weight) in config.wh_weights.iter().enumerate() {
            for metric in [MetricKind::Dp, MetricKind::Rnd] {
                let per_run: Vec<f64> = outcomes
                    .iter()
                    .map(|o| match metric {
                        MetricKind::Dp => o.dp[s_ix][w_ix],
                        MetricKind::Rnd => o.rnd[s_ix][w_ix],
                    })
                    .collect();
                let defined: Vec<f64> = per_run.iter().copied().filter(|v| !v.is_nan()).collect();
                let (mean, std) = if defined.is_empty() {
                    (f64::NAN, f64::NAN)
                } else {
                    aggregate_runs(&defined)?
                };
                fairness.push(FairnessRow {
                    swept: param,
                    alpha,
                    wh_weight,
                    metric,
                    mean,
                    std,
                    per_run,
                });
            }
        }
        let mut groups: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        for outcome in &outcomes {
            for (group, &(part, total)) in &outcome.wh_counts[s_ix] {
                let entry = groups.entry(group.clone()).or_insert((0, 0));
                entry.0 += part;
                entry.1 += total;
            }
        }
        for (group, (part, total)) in groups {
            let part_rate = part as f64 / total as f64;
            tilted.push(TiltedRow {
                swept: param,
                alpha,
                group,
                part: part_rate,
                full: 1.0 - part_rate,
            });
        }
    }

    Ok(SweepReport {
        config: config.clone(),
        fairness,
        tilted,
        degenerate_jobs,
    })
}

/// Write `fairness.csv`, `tilted_distributions.csv` and `manifest.json`
/// into `dir` (created if missing). Returns the paths written.
pub fn emit_report(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("fairness.csv", report.render_fairness_csv()),
        ("tilted_distributions.csv", report.render_tilted_csv()),
        ("manifest.json", report.render_manifest()),
    ];
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        let mut file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        file.write_all(&bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Manifest for a failed sweep: written so a crashed invocation still
/// leaves an auditable record next to any partial output.
pub fn emit_failure_manifest(
    config: &ExperimentConfig,
    error: &Error,
    dir: &Path,
) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct FailureManifest<'a> {
        generator: &'static str,
        version: &'static str,
        status: &'static str,
        error: String,
        master_seed: u64,
        config: &'a ExperimentConfig,
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = FailureManifest {
        generator: "recruitsim",
        version: env!("CARGO_PKG_VERSION"),
        status: "failed",
        error: error.to_string(),
        master_seed: config.seed,
        config,
    };
    let path = dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
    bytes.push(b'\n');
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recruitment::fitness_vector;

    /// A sweep small enough for unit tests but exercising both panels.
    fn small_config() -> ExperimentConfig {
        let mut params = SeedCorpusParams::default();
        params.n_jobs = 400;
        params.n_cvs = 1500;
        ExperimentConfig {
            seed: 11,
            runs: 2,
            n_jobs: 30,
            n_cvs: 120,
            alpha0_grid: vec![-2.0, 0.0, 2.0],
            alpha1_grid: vec![0.0],
            wh_weights: vec![0.0, 1.0],
            seed_corpus: Some(params),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn aggregate_runs_examples() {
        assert_eq!(aggregate_runs(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        let (mean, std) = aggregate_runs(&[0.0, 2.0]).unwrap();
        assert_eq!(mean, 1.0);
        assert!((std - 2.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(aggregate_runs(&[0.7]).unwrap(), (0.7, 0.0));
        assert!(aggregate_runs(&[]).is_err());
    }

    #[test]
    fn compiled_fitness_matches_reference_path() {
        let mut params = SeedCorpusParams::default();
        params.n_jobs = 40;
        params.n_cvs = 60;
        let (jobs_ds, cvs_ds) = crate::corpus::generate_seed_corpus(&params).unwrap();
        let jobs = jobs_from_dataset(&jobs_ds).unwrap();
        let cvs = cvs_from_dataset(&cvs_ds).unwrap();
        let vocab = params.skill_vocabulary();
        let vocab_index: BTreeMap<&str, usize> = vocab
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let compiled_jobs = compile_jobs(&jobs, &vocab_index).unwrap();
        let compiled_cvs = compile_cvs(&cvs, &vocab_index).unwrap();
        for (job, cjob) in jobs.iter().zip(&compiled_jobs) {
            for (cv, ccv) in cvs.iter().zip(&compiled_cvs) {
                let reference = fitness_vector(job, cv).as_array();
                let fast = compiled_fitness(cjob, ccv);
                assert_eq!(reference, fast);
            }
        }
    }

    #[test]
    fn report_has_a_row_per_setting_weight_metric() {
        let config = small_config();
        let report = run_sweep(&config).unwrap();
        let settings = config.settings().len();
        assert_eq!(
            report.fairness.len(),
            settings * config.wh_weights.len() * 2
        );
        for row in &report.fairness {
            assert_eq!(row.per_run.len(), config.runs);
            match row.metric {
                MetricKind::Dp => assert!((0.0..=2.0).contains(&row.mean), "dp {}", row.mean),
                MetricKind::Rnd => assert!((0.0..=1.0).contains(&row.mean), "rnd {}", row.mean),
            }
        }
        // 2 groups per setting in the tilted table.
        assert_eq!(report.tilted.len(), settings * 2);
    }

    #[test]
    fn same_seed_byte_identical_outputs() {
        let config = small_config();
        let a = run_sweep(&config).unwrap();
        let b = run_sweep(&config).unwrap();
        assert_eq!(a.render_fairness_csv(), b.render_fairness_csv());
        assert_eq!(a.render_tilted_csv(), b.render_tilted_csv());
        assert_eq!(a.render_manifest(), b.render_manifest());
    }

    #[test]
    fn different_seed_changes_outputs() {
        let config = small_config();
        let mut other = config.clone();
        other.seed = 12;
        let a = run_sweep(&config).unwrap();
        let b = run_sweep(&other).unwrap();
        assert_ne!(a.render_fairness_csv(), b.render_fairness_csv());
    }

    #[test]
    fn zero_weight_metrics_identical_across_settings() {
        // With weight 0 the scores cannot depend on working hours, and the
        // shared per-run streams make every setting's pools identical in
        // all other columns, so the metric values coincide exactly.
        let config = small_config();
        let report = run_sweep(&config).unwrap();
        let reference = report
            .row(SweptParam::Alpha0, -2.0, 0.0, MetricKind::Rnd)
            .unwrap()
            .mean;
        for &alpha in &config.alpha0_grid {
            let row = report
                .row(SweptParam::Alpha0, alpha, 0.0, MetricKind::Rnd)
                .unwrap();
            assert_eq!(row.mean, reference);
        }
    }

    #[test]
    fn emit_report_writes_three_files() {
        let config = ExperimentConfig {
            runs: 1,
            n_jobs: 5,
            n_cvs: 30,
            alpha0_grid: vec![0.0],
            alpha1_grid: vec![],
            wh_weights: vec![1.0],
            seed_corpus: Some({
                let mut p = SeedCorpusParams::default();
                p.n_jobs = 200;
                p.n_cvs = 400;
                p
            }),
            ..ExperimentConfig::default()
        };
        let report = run_sweep(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&report, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        for f in &files {
            assert!(f.exists());
        }
        let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        assert!(manifest.contains("\"master_seed\": 7"));
    }

    #[test]
    fn doubling_runs_stays_within_three_standard_errors() {
        let base = small_config();
        let doubled = ExperimentConfig {
            runs: base.runs * 2,
            ..base.clone()
        };
        let a = run_sweep(&base).unwrap();
        let b = run_sweep(&doubled).unwrap();
        for row in &a.fairness {
            let other = b
                .row(row.swept, row.alpha, row.wh_weight, row.metric)
                .unwrap();
            // Conservative error scale: the larger of the two run spreads
            // (a 2-run std is itself noisy), floored to dodge the exact
            // zero-variance weight-0 cells.
            let se = (row.std.max(other.std) / (base.runs as f64).sqrt()).max(1e-9);
            assert!(
                (row.mean - other.mean).abs() <= 3.0 * se + 0.02,
                "{:?} {} w={} {:?}: {} vs {} (se {se})",
                row.swept,
                row.alpha,
                row.wh_weight,
                row.metric,
                row.mean,
                other.mean
            );
        }
    }

    #[test]
    fn empty_report_renders_headers_only() {
        let report = SweepReport {
            config: ExperimentConfig::default(),
            fairness: vec![],
            tilted: vec![],
            degenerate_jobs: 0,
        };
        assert_eq!(
            report.render_fairness_csv(),
            b"swept_param,alpha,wh_weight,metric,mean,std\n"
        );
        assert_eq!(
            report.render_tilted_csv(),
            b"swept_param,alpha,group,part,full\n"
        );
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let mut config = ExperimentConfig::default();
        config.runs = 0;
        assert!(config.validate().is_err());
        let mut config = ExperimentConfig::default();
        config.jobs_csv = Some("only_one.csv".into());
        assert!(config.validate().is_err());
        let mut config = ExperimentConfig::default();
        config.rnd_thresholds = Some(vec![1]);
        assert!(config.validate().is_err());
    }
}
