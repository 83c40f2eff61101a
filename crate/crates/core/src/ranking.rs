//! Pointwise linear ranking and group-fairness metrics.
//!
//! Candidates are scored `s = wᵀv + β` with `β ~ N(0, σ²)` and ranked by
//! descending score under competition ranking (tied scores share a rank;
//! the next rank skips by the tie count).
//!
//! Two metrics quantify group fairness of a ranked pool:
//!
//! * **Demographic parity difference** at a cutoff `k`:
//!   `DP = 1 − (P(rank ≤ k | protected) − P(rank ≤ k | unprotected))`,
//!   in `[0, 2]`. 1 is parity; 2 means the top-k excludes the protected
//!   group entirely while admitting every unprotected candidate.
//! * **rND**: the log-discounted sum over rank prefixes of the absolute gap
//!   between the protected share in the prefix and the protected share
//!   overall, normalised by the worst achievable value over the two
//!   extremal rankings (all protected first / all protected last), so the
//!   result lies in `[0, 1]` with 0 meaning proportional representation.
//!
//! The [`oracle`] module re-implements both metrics by literal set
//! enumeration; the test suites hold the fast paths to exact agreement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recruitment::{Curriculum, FitnessVector, JobOffer, fitness_vector};
use crate::rng::Stream;

/// Linear pointwise scorer: weights over the four fitness components
/// (education, experience, skills, working hours) plus Gaussian noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingModel {
    pub weights: [f64; 4],
    pub noise_sigma: f64,
}

impl RankingModel {
    pub fn new(weights: [f64; 4], noise_sigma: f64) -> Result<RankingModel> {
        if noise_sigma < 0.0 || !noise_sigma.is_finite() {
            return Err(Error::Config(format!(
                "noise_sigma must be a finite non-negative number, got {noise_sigma}"
            )));
        }
        Ok(RankingModel {
            weights,
            noise_sigma,
        })
    }

    /// `wᵀv + β` with `β ~ N(0, σ²)` drawn from the stream. Always consumes
    /// exactly one draw; with `σ = 0` the noise term is exactly zero.
    pub fn score(&self, v: &FitnessVector, rng: &mut Stream) -> f64 {
        let dot: f64 = self
            .weights
            .iter()
            .zip(v.as_array())
            .map(|(w, x)| w * x)
            .sum();
        let normal = rand_distr::Normal::new(0.0, self.noise_sigma)
            .expect("sigma validated at construction");
        dot + rand_distr::Distribution::sample(&normal, rng)
    }
}

/// One scored candidate inside a ranked pool, in original candidate order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub score: f64,
    /// Competition rank: `1 + |{ candidates with strictly higher score }|`.
    pub rank: usize,
    pub protected: bool,
}

/// A pool of candidates ranked for one job offer.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedPool {
    candidates: Vec<RankedCandidate>,
    /// Ranks in ascending order (one entry per candidate).
    by_rank: Vec<usize>,
    /// `prefix_protected[i]` = protected candidates among the `i` best-ranked.
    prefix_protected: Vec<usize>,
}

impl RankedPool {
    /// Build a pool from scores and protected flags, assigning competition
    /// ranks. Candidate order is preserved for reporting.
    pub fn from_scores(scores: &[f64], protected: &[bool]) -> Result<RankedPool> {
        if scores.is_empty() {
            return Err(Error::Config("candidate pool is empty".into()));
        }
        if scores.len() != protected.len() {
            return Err(Error::Config(
                "scores and protected flags differ in length".into(),
            ));
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .expect("scores must not be NaN")
                .then(a.cmp(&b))
        });
        let mut ranks = vec![0usize; scores.len()];
        let mut by_rank = Vec::with_capacity(scores.len());
        let mut prefix_protected = Vec::with_capacity(scores.len() + 1);
        prefix_protected.push(0);
        let mut group_rank = 1;
        for (pos, &ix) in order.iter().enumerate() {
            if pos > 0 && scores[ix] < scores[order[pos - 1]] {
                group_rank = pos + 1;
            }
            ranks[ix] = group_rank;
            by_rank.push(group_rank);
            prefix_protected.push(prefix_protected[pos] + usize::from(protected[ix]));
        }
        Ok(RankedPool {
            candidates: scores
                .iter()
                .zip(protected)
                .zip(ranks)
                .map(|((&score, &protected), rank)| RankedCandidate {
                    score,
                    rank,
                    protected,
                })
                .collect(),
            by_rank,
            prefix_protected,
        })
    }

    pub fn candidates(&self) -> &[RankedCandidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn protected_count(&self) -> usize {
        *self.prefix_protected.last().expect("non-empty pool")
    }

    /// Number of candidates with rank ≤ `cut` and how many of them are
    /// protected. With ties this set can exceed `cut` members.
    fn prefix_counts(&self, cut: usize) -> (usize, usize) {
        let total = self.by_rank.partition_point(|&r| r <= cut);
        (total, self.prefix_protected[total])
    }
}

/// Score every candidate once (in pool order) and rank them for the job.
/// The protected flag records `gender ≠ male`.
pub fn rank_candidates(
    model: &RankingModel,
    job: &JobOffer,
    pool: &[Curriculum],
    rng: &mut Stream,
) -> Result<RankedPool> {
    if pool.is_empty() {
        return Err(Error::Config("candidate pool is empty".into()));
    }
    let mut scores = Vec::with_capacity(pool.len());
    let mut protected = Vec::with_capacity(pool.len());
    for cv in pool {
        let v = fitness_vector(job, cv);
        scores.push(model.score(&v, rng));
        protected.push(cv.is_protected());
    }
    RankedPool::from_scores(&scores, &protected)
}

/// Demographic parity difference at cutoff `k`; see the module docs for the
/// orientation. Pools with a single group have no defined value: the error
/// signals the caller to skip (and count) the job.
pub fn demographic_parity(pool: &RankedPool, k: usize) -> Result<f64> {
    let protected_total = pool.protected_count();
    let unprotected_total = pool.len() - protected_total;
    if protected_total == 0 || unprotected_total == 0 {
        return Err(Error::DegeneratePool(
            "demographic parity needs both groups present".into(),
        ));
    }
    let (top_total, protected_top) = pool.prefix_counts(k);
    let unprotected_top = top_total - protected_top;
    let dp = 1.0
        - (protected_top as f64 / protected_total as f64
            - unprotected_top as f64 / unprotected_total as f64);
    debug_assert!((0.0..=2.0).contains(&dp));
    Ok(dp)
}

/// Closed-form prefix counts for the two extremal rankings used to
/// normalise rND: every rank distinct, protected candidates all first or
/// all last.
fn extremal_prefix(
    n: usize,
    protected_total: usize,
    cut: usize,
    protected_first: bool,
) -> (usize, usize) {
    let total = cut.min(n);
    let protected = if protected_first {
        total.min(protected_total)
    } else {
        total.saturating_sub(n - protected_total)
    };
    (total, protected)
}

fn rnd_sum(
    thresholds: &[usize],
    overall: f64,
    mut prefix: impl FnMut(usize) -> (usize, usize),
) -> f64 {
    let mut sum = 0.0;
    for &i in thresholds {
        let (total, protected) = prefix(i);
        if total == 0 {
            continue;
        }
        let share = protected as f64 / total as f64;
        sum += (1.0 / (i as f64).log2()) * (share - overall).abs();
    }
    sum
}

/// Normalised discounted difference over the given rank prefixes. Defined
/// as 0 for pools where either group is absent (the worst case is 0 too).
/// Thresholds must be ≥ 2; they are canonicalised to sorted unique order.
pub fn rnd_metric(pool: &RankedPool, thresholds: &[usize]) -> Result<f64> {
    if thresholds.is_empty() {
        return Err(Error::Config("rND threshold list is empty".into()));
    }
    if thresholds.iter().any(|&t| t < 2) {
        return Err(Error::Config(
            "rND thresholds must be >= 2 (log2 discount)".into(),
        ));
    }
    let mut cuts = thresholds.to_vec();
    cuts.sort_unstable();
    cuts.dedup();

    let n = pool.len();
    let protected_total = pool.protected_count();
    if protected_total == 0 || protected_total == n {
        return Ok(0.0);
    }
    let overall = protected_total as f64 / n as f64;

    let unnormalised = rnd_sum(&cuts, overall, |cut| pool.prefix_counts(cut));
    let z_first = rnd_sum(&cuts, overall, |cut| {
        extremal_prefix(n, protected_total, cut, true)
    });
    let z_last = rnd_sum(&cuts, overall, |cut| {
        extremal_prefix(n, protected_total, cut, false)
    });
    let z = z_first.max(z_last);
    if z == 0.0 {
        return Ok(0.0);
    }
    let rnd = unnormalised / z;
    debug_assert!((0.0..=1.0 + 1e-12).contains(&rnd));
    Ok(rnd.min(1.0))
}

/// Default rND prefixes: multiples of 5 from 5 up to the pool size
/// (a pool smaller than 5 gets the single prefix at its size).
pub fn default_rnd_thresholds(pool_size: usize) -> Vec<usize> {
    if pool_size < 5 {
        return vec![pool_size.max(2)];
    }
    (1..=pool_size / 5).map(|m| 5 * m).collect()
}

/// Brute-force re-implementations by literal set enumeration. Slow and
/// simple on purpose: these exist to check the fast paths, not to be used.
pub mod oracle {
    use super::*;

    /// Competition ranks straight from the definition, O(n²).
    pub fn ranks_by_enumeration(scores: &[f64]) -> Vec<usize> {
        scores
            .iter()
            .map(|&s| 1 + scores.iter().filter(|&&t| t > s).count())
            .collect()
    }

    fn top_set(pool: &RankedPool, cut: usize) -> Vec<&RankedCandidate> {
        pool.candidates().iter().filter(|c| c.rank <= cut).collect()
    }

    pub fn demographic_parity(pool: &RankedPool, k: usize) -> Result<f64> {
        let protected: Vec<&RankedCandidate> =
            pool.candidates().iter().filter(|c| c.protected).collect();
        let unprotected: Vec<&RankedCandidate> =
            pool.candidates().iter().filter(|c| !c.protected).collect();
        if protected.is_empty() || unprotected.is_empty() {
            return Err(Error::DegeneratePool(
                "demographic parity needs both groups present".into(),
            ));
        }
        let top = top_set(pool, k);
        let protected_top = top.iter().filter(|c| c.protected).count();
        let unprotected_top = top.iter().filter(|c| !c.protected).count();
        Ok(1.0
            - (protected_top as f64 / protected.len() as f64
                - unprotected_top as f64 / unprotected.len() as f64))
    }

    fn enumerated_sum(pool: &RankedPool, thresholds: &[usize], overall: f64) -> f64 {
        let mut sum = 0.0;
        for &i in thresholds {
            let top = top_set(pool, i);
            if top.is_empty() {
                continue;
            }
            let share = top.iter().filter(|c| c.protected).count() as f64 / top.len() as f64;
            sum += (1.0 / (i as f64).log2()) * (share - overall).abs();
        }
        sum
    }

    /// Build an extremal pool literally: distinct descending scores with the
    /// protected block first or last.
    fn extremal_pool(n: usize, protected_total: usize, protected_first: bool) -> RankedPool {
        let scores: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
        let protected: Vec<bool> = (0..n)
            .map(|i| {
                if protected_first {
                    i < protected_total
                } else {
                    i >= n - protected_total
                }
            })
            .collect();
        RankedPool::from_scores(&scores, &protected).expect("non-empty extremal pool")
    }

    pub fn rnd_metric(pool: &RankedPool, thresholds: &[usize]) -> Result<f64> {
        if thresholds.is_empty() {
            return Err(Error::Config("rND threshold list is empty".into()));
        }
        if thresholds.iter().any(|&t| t < 2) {
            return Err(Error::Config(
                "rND thresholds must be >= 2 (log2 discount)".into(),
            ));
        }
        let mut cuts = thresholds.to_vec();
        cuts.sort_unstable();
        cuts.dedup();

        let n = pool.len();
        let protected_total = pool.protected_count();
        if protected_total == 0 || protected_total == n {
            return Ok(0.0);
        }
        let overall = protected_total as f64 / n as f64;
        let unnormalised = enumerated_sum(pool, &cuts, overall);
        let z = enumerated_sum(&extremal_pool(n, protected_total, true), &cuts, overall).max(
            enumerated_sum(&extremal_pool(n, protected_total, false), &cuts, overall),
        );
        if z == 0.0 {
            return Ok(0.0);
        }
        Ok((unnormalised / z).min(1.0))
    }

    /// Both metrics at once, mirroring the fast-path signatures.
    pub fn oracle_metrics(
        pool: &RankedPool,
        k: usize,
        thresholds: &[usize],
    ) -> (Result<f64>, Result<f64>) {
        (demographic_parity(pool, k), rnd_metric(pool, thresholds))
    }
}
