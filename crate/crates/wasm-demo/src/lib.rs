//! Browser bindings for the generator: three interactive surfaces over the
//! same engine the CLI drives.
//!
//! * [`tilted_conditionals`] / [`tilt_curve`] — instant exponential-tilt
//!   arithmetic for the slider panel.
//! * [`run_mini_sweep`] — a reduced tilt sweep (fewer runs, smaller pools)
//!   sized for a single browser thread; returns plot-ready rows.
//! * [`rank_demo`] — generates one job offer and a candidate pool at the
//!   chosen tilt, ranks the pool, and reports the top rows plus DP/rND.
//!
//! All functions return JSON strings; the page parses them with
//! `JSON.parse`. Models fitted from the bundled seed corpus are cached
//! after the first call.

use std::sync::OnceLock;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use recruitsim::corpus::{SeedCorpusParams, generate_seed_corpus_sized};
use recruitsim::experiment::{ExperimentConfig, MetricKind, run_sweep};
use recruitsim::graph::CausalGraphSpec;
use recruitsim::ranking::{
    RankedPool, RankingModel, default_rnd_thresholds, demographic_parity, rnd_metric,
};
use recruitsim::recruitment::{cvs_from_dataset, fitness_vector, jobs_from_dataset};
use recruitsim::rng::derive_stream;
use recruitsim::scm::{
    FitOptions, StructuralModel, apply_tilt, fit_scm, sample_records, tilt_distribution,
};

/// Seed corpus kept small so first-call fitting stays well under a second.
const DEMO_CORPUS_JOBS: usize = 1500;
const DEMO_CORPUS_CVS: usize = 6000;

struct DemoModels {
    cv_graph: CausalGraphSpec,
    job_model: StructuralModel,
    cv_model: StructuralModel,
}

static MODELS: OnceLock<Result<DemoModels, String>> = OnceLock::new();

fn models() -> Result<&'static DemoModels, JsValue> {
    MODELS
        .get_or_init(|| {
            let params = SeedCorpusParams::default();
            let (jobs, cvs) =
                generate_seed_corpus_sized(&params, DEMO_CORPUS_JOBS, DEMO_CORPUS_CVS)
                    .map_err(|e| e.to_string())?;
            let job_graph = CausalGraphSpec::parse(recruitsim::DEFAULT_JOB_OFFER_GRAPH)
                .map_err(|e| e.to_string())?;
            let cv_graph = CausalGraphSpec::parse(recruitsim::DEFAULT_CURRICULUM_GRAPH)
                .map_err(|e| e.to_string())?;
            let job_model =
                fit_scm(&job_graph, &jobs, FitOptions::default()).map_err(|e| e.to_string())?;
            let cv_model =
                fit_scm(&cv_graph, &cvs, FitOptions::default()).map_err(|e| e.to_string())?;
            Ok(DemoModels {
                cv_graph,
                job_model,
                cv_model,
            })
        })
        .as_ref()
        .map_err(|e| JsValue::from_str(e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, JsValue> {
    serde_json::to_string(value).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Tilted P(part-time | group) for both groups at the given strengths.
#[wasm_bindgen]
pub fn tilted_conditionals(
    p_part_male: f64,
    p_part_not_male: f64,
    alpha1: f64,
    alpha0: f64,
) -> Result<String, JsValue> {
    #[derive(Serialize)]
    struct Row {
        group: &'static str,
        part: f64,
        full: f64,
    }
    let male = tilt_distribution(p_part_male.clamp(0.0, 1.0), alpha1);
    let not_male = tilt_distribution(p_part_not_male.clamp(0.0, 1.0), alpha0);
    to_json(&vec![
        Row {
            group: "male",
            part: male,
            full: 1.0 - male,
        },
        Row {
            group: "not_male",
            part: not_male,
            full: 1.0 - not_male,
        },
    ])
}

/// The tilt response curve alpha -> P'(part) for one baseline probability.
#[wasm_bindgen]
pub fn tilt_curve(
    p_part: f64,
    alpha_min: f64,
    alpha_max: f64,
    steps: usize,
) -> Result<String, JsValue> {
    if steps < 2 || alpha_min >= alpha_max {
        return Err(JsValue::from_str(
            "need steps >= 2 and alpha_min < alpha_max",
        ));
    }
    let p = p_part.clamp(0.0, 1.0);
    let points: Vec<(f64, f64)> = (0..steps)
        .map(|i| {
            let alpha = alpha_min + (alpha_max - alpha_min) * i as f64 / (steps - 1) as f64;
            (alpha, tilt_distribution(p, alpha))
        })
        .collect();
    to_json(&points)
}

/// A reduced sweep sized for the browser. Returns
/// `{settings: [...], rows: [{swept, alpha, wh_weight, metric, mean, std}]}`.
#[wasm_bindgen]
pub fn run_mini_sweep(
    seed: u64,
    runs: usize,
    n_jobs: usize,
    n_cvs: usize,
    alpha_step: f64,
) -> Result<String, JsValue> {
    if !(0.25..=4.0).contains(&alpha_step) {
        return Err(JsValue::from_str("alpha_step must be in [0.25, 4]"));
    }
    let steps = (8.0 / alpha_step).round() as i64;
    let grid: Vec<f64> = (0..=steps).map(|i| -4.0 + alpha_step * i as f64).collect();
    let params = SeedCorpusParams {
        n_jobs: DEMO_CORPUS_JOBS,
        n_cvs: DEMO_CORPUS_CVS,
        ..SeedCorpusParams::default()
    };
    let config = ExperimentConfig {
        seed,
        runs: runs.clamp(1, 5),
        n_jobs: n_jobs.clamp(5, 100),
        n_cvs: n_cvs.clamp(50, 400),
        alpha0_grid: grid.clone(),
        alpha1_grid: grid,
        wh_weights: vec![0.0, 0.5, 0.8, 1.0],
        seed_corpus: Some(params),
        ..ExperimentConfig::default()
    };
    let report = run_sweep(&config).map_err(|e| JsValue::from_str(&e.to_string()))?;

    #[derive(Serialize)]
    struct Out {
        alphas: Vec<f64>,
        wh_weights: Vec<f64>,
        rows: Vec<RowOut>,
    }
    #[derive(Serialize)]
    struct RowOut {
        swept: &'static str,
        alpha: f64,
        wh_weight: f64,
        metric: &'static str,
        mean: f64,
        std: f64,
    }
    let rows = report
        .fairness
        .iter()
        .map(|r| RowOut {
            swept: r.swept.label(),
            alpha: r.alpha,
            wh_weight: r.wh_weight,
            metric: match r.metric {
                MetricKind::Dp => "dp",
                MetricKind::Rnd => "rnd",
            },
            mean: r.mean,
            std: r.std,
        })
        .collect();
    to_json(&Out {
        alphas: config.alpha0_grid.clone(),
        wh_weights: config.wh_weights.clone(),
        rows,
    })
}

/// Generate one job offer and a candidate pool at the chosen tilt, rank the
/// pool, and return the offer, the top candidates and the fairness metrics.
#[wasm_bindgen]
pub fn rank_demo(
    seed: u64,
    n_cvs: usize,
    alpha0: f64,
    alpha1: f64,
    wh_weight: f64,
    top_k: usize,
) -> Result<String, JsValue> {
    let models = models()?;
    let n_cvs = n_cvs.clamp(20, 500);
    let top_k = top_k.clamp(1, 50);

    let tilt = models.cv_graph.tilts[0].with_alphas(
        [
            ("not_male".to_string(), alpha0),
            ("male".to_string(), alpha1),
        ]
        .into_iter()
        .collect(),
    );
    let tilted =
        apply_tilt(&models.cv_model, &tilt).map_err(|e| JsValue::from_str(&e.to_string()))?;

    let mut job_rng = derive_stream(seed, "demo-job", &[]);
    let jobs_dataset = sample_records(&models.job_model, 1, &mut job_rng)
        .map_err(|e| JsValue::from_str(&e.to_string()))?;
    let job = jobs_from_dataset(&jobs_dataset)
        .map_err(|e| JsValue::from_str(&e.to_string()))?
        .remove(0);

    let mut cv_rng = derive_stream(seed, "demo-cvs", &[]);
    let cvs_dataset = sample_records(&tilted, n_cvs, &mut cv_rng)
        .map_err(|e| JsValue::from_str(&e.to_string()))?;
    let cvs = cvs_from_dataset(&cvs_dataset).map_err(|e| JsValue::from_str(&e.to_string()))?;

    let model = RankingModel::new([0.8, 0.5, 1.0, wh_weight], 0.01)
        .map_err(|e| JsValue::from_str(&e.to_string()))?;
    let mut score_rng = derive_stream(seed, "demo-scores", &[]);
    let scores: Vec<f64> = cvs
        .iter()
        .map(|cv| model.score(&fitness_vector(&job, cv), &mut score_rng))
        .collect();
    let protected: Vec<bool> = cvs.iter().map(|cv| cv.is_protected()).collect();
    let pool = RankedPool::from_scores(&scores, &protected)
        .map_err(|e| JsValue::from_str(&e.to_string()))?;

    let dp = demographic_parity(&pool, top_k.min(pool.len())).ok();
    let rnd = rnd_metric(&pool, &default_rnd_thresholds(pool.len()))
        .map_err(|e| JsValue::from_str(&e.to_string()))?;

    #[derive(Serialize)]
    struct JobOut {
        occupation: String,
        working_hours: &'static str,
        education_eqf: u8,
        experience: String,
        skills: Vec<String>,
    }
    #[derive(Serialize)]
    struct CandidateOut {
        rank: usize,
        score: f64,
        gender: &'static str,
        working_hours: &'static str,
        education_eqf: u8,
        experience: u32,
        shared_skills: usize,
    }
    #[derive(Serialize)]
    struct Out {
        job: JobOut,
        top: Vec<CandidateOut>,
        dp: Option<f64>,
        rnd: f64,
        pool_size: usize,
        protected_share: f64,
    }

    let mut ranked: Vec<(usize, &recruitsim::ranking::RankedCandidate)> =
        pool.candidates().iter().enumerate().collect();
    ranked.sort_by(|a, b| a.1.rank.cmp(&b.1.rank).then(a.0.cmp(&b.0)));
    let top = ranked
        .iter()
        .take(top_k)
        .map(|&(ix, c)| {
            let cv = &cvs[ix];
            CandidateOut {
                rank: c.rank,
                score: c.score,
                gender: cv.gender.label(),
                working_hours: cv.working_hours.label(),
                education_eqf: cv.education_eqf,
                experience: cv.experience,
                shared_skills: job.skills.intersection(&cv.skills).count(),
            }
        })
        .collect();

    to_json(&Out {
        job: JobOut {
            occupation: job.occupation.clone(),
            working_hours: job.working_hours.label(),
            education_eqf: job.education_eqf,
            experience: format!(
                "{}-{} years",
                job.experience_range.0, job.experience_range.1
            ),
            skills: job.skills.iter().cloned().collect(),
        },
        top,
        dp,
        rnd,
        pool_size: pool.len(),
        protected_share: pool.protected_count() as f64 / pool.len() as f64,
    })
}
