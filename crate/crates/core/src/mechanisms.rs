//! The three structural-equation families: categorical children are drawn
//! from a fitted probabilistic classifier, continuous children follow an
//! additive-noise equation `x = f(parents) + u` with `u` bootstrapped from
//! training residuals, and set-valued children are drawn without replacement
//! with per-item empirical inclusion probabilities.
//!
//! Two classifier backends satisfy the same contract (features in,
//! distribution out): a smoothed conditional frequency table keyed by the
//! exact parent configuration, and a naive-Bayes model over the one-hot
//! feature encoding for children whose parents include a set variable.
//! Fitted mechanisms are immutable; sampling takes an external stream.

use rand::RngExt as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Value};
use crate::error::{Error, Result};
use crate::graph::{Domain, LearnerKind, MechanismOptions, VariableKind, VariableSpec};
use crate::rng::Stream;

/// Draw one index with probability proportional to `weights`.
///
/// Panics if the total weight is not positive; callers guard degenerate
/// weight vectors and surface them as errors.
pub fn sample_index(weights: &[f64], rng: &mut Stream) -> usize {
    let total: f64 = weights.iter().sum();
    assert!(total > 0.0, "weight vector has no positive mass");
    let mut u = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    last_positive
}

/// Draw `n` distinct indices by successive renormalised draws: each pick is
/// proportional to the remaining weights, and picked items drop out.
/// Inclusion probabilities under this scheme differ from the raw weights.
pub fn weighted_sample_without_replacement(
    weights: &[f64],
    n: usize,
    rng: &mut Stream,
) -> Vec<usize> {
    let mut remaining = weights.to_vec();
    let mut picked = Vec::with_capacity(n);
    for _ in 0..n {
        let ix = sample_index(&remaining, rng);
        remaining[ix] = 0.0;
        picked.push(ix);
    }
    picked
}

/// A realisation of a child's parent set: one value per declared parent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParentAssignment {
    entries: Vec<(String, Value)>,
}

impl ParentAssignment {
    pub fn empty() -> ParentAssignment {
        ParentAssignment::default()
    }

    pub fn new(entries: Vec<(String, Value)>) -> ParentAssignment {
        ParentAssignment { entries }
    }

    pub fn set(&mut self, name: &str, value: Value) {
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = value,
            None => self.entries.push((name.to_string(), value)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Discrete cell usable as an exact configuration-table key.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiscreteValue {
    Cat(u32),
    Ord(i64),
}

impl DiscreteValue {
    fn from_value(value: &Value) -> Option<DiscreteValue> {
        match value {
            Value::Categorical(ix) => Some(DiscreteValue::Cat(*ix)),
            Value::Ordinal(v) => Some(DiscreteValue::Ord(*v)),
            _ => None,
        }
    }
}

/// Feature layout for a child: per parent, in declared order, a one-hot
/// block (categorical), a single numeric slot (ordinal/continuous), or a
/// one-hot block over the vocabulary (set).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub parents: Vec<VariableSpec>,
}

impl FeatureLayout {
    pub fn new(parents: Vec<VariableSpec>) -> FeatureLayout {
        FeatureLayout { parents }
    }

    /// Total vector length; constant for a given child.
    pub fn len(&self) -> usize {
        self.parents
            .iter()
            .map(|p| match &p.domain {
                Domain::Categorical(vals) => vals.len(),
                Domain::Ordinal(_) | Domain::Continuous(_) => 1,
                Domain::Set { vocabulary, .. } => vocabulary.len(),
            })
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether each slot is a 0/1 indicator (one-hot blocks) or numeric.
    fn slot_is_indicator(&self) -> Vec<bool> {
        let mut flags = Vec::with_capacity(self.len());
        for p in &self.parents {
            match &p.domain {
                Domain::Categorical(vals) => flags.extend(std::iter::repeat_n(true, vals.len())),
                Domain::Ordinal(_) | Domain::Continuous(_) => flags.push(false),
                Domain::Set { vocabulary, .. } => {
                    flags.extend(std::iter::repeat_n(true, vocabulary.len()))
                }
            }
        }
        flags
    }

    /// Encode an assignment as a fixed-length numeric vector. Deterministic;
    /// rejects missing parents, extra keys and out-of-domain values.
    pub fn encode(&self, assignment: &ParentAssignment) -> Result<Vec<f64>> {
        if assignment.len() != self.parents.len() {
            return Err(Error::SchemaMismatch(format!(
                "assignment has {} entries, child declares {} parents",
                assignment.len(),
                self.parents.len()
            )));
        }
        let mut out = Vec::with_capacity(self.len());
        for parent in &self.parents {
            let value = assignment.get(&parent.name).ok_or_else(|| {
                Error::SchemaMismatch(format!("missing parent `{}`", parent.name))
            })?;
            if !value.in_domain(&parent.domain) {
                return Err(Error::OutOfDomain {
                    variable: parent.name.clone(),
                    value: format!("{value:?}"),
                    line: None,
                });
            }
            match (&parent.domain, value) {
                (Domain::Categorical(vals), Value::Categorical(ix)) => {
                    let mut block = vec![0.0; vals.len()];
                    block[*ix as usize] = 1.0;
                    out.extend(block);
                }
                (Domain::Ordinal(_), Value::Ordinal(v)) => out.push(*v as f64),
                (Domain::Continuous(_), Value::Continuous(x)) => out.push(*x),
                (Domain::Set { vocabulary, .. }, Value::Set(items)) => {
                    let mut block = vec![0.0; vocabulary.len()];
                    for &i in items {
                        block[i as usize] = 1.0;
                    }
                    out.extend(block);
                }
                _ => unreachable!("in_domain already matched kinds"),
            }
        }
        Ok(out)
    }
}

/// Encode a parent assignment under a child's feature layout.
pub fn encode_parents(assignment: &ParentAssignment, layout: &FeatureLayout) -> Result<Vec<f64>> {
    layout.encode(assignment)
}

// --- naive Bayes over encoded features --------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum NbSlot {
    /// One-hot slot: per-class count of rows with the slot set.
    Bernoulli { on: Vec<u64> },
    /// Numeric slot: per-class running sums for a Gaussian likelihood.
    Gaussian { sum: Vec<f64>, sum_sq: Vec<f64> },
}

/// Naive-Bayes classifier over [`FeatureLayout`] vectors. Indicator slots
/// get Laplace-smoothed Bernoulli likelihoods, numeric slots a Gaussian
/// with a variance floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    class_totals: Vec<u64>,
    slots: Vec<NbSlot>,
    epsilon: f64,
}

const GAUSSIAN_VAR_FLOOR: f64 = 1e-6;

impl NaiveBayesModel {
    fn new(class_count: usize, layout: &FeatureLayout, epsilon: f64) -> NaiveBayesModel {
        let slots = layout
            .slot_is_indicator()
            .into_iter()
            .map(|indicator| {
                if indicator {
                    NbSlot::Bernoulli {
                        on: vec![0; class_count],
                    }
                } else {
                    NbSlot::Gaussian {
                        sum: vec![0.0; class_count],
                        sum_sq: vec![0.0; class_count],
                    }
                }
            })
            .collect();
        NaiveBayesModel {
            class_totals: vec![0; class_count],
            slots,
            epsilon,
        }
    }

    fn observe(&mut self, features: &[f64], class: usize) {
        self.class_totals[class] += 1;
        for (slot, &x) in self.slots.iter_mut().zip(features) {
            match slot {
                NbSlot::Bernoulli { on } => {
                    if x > 0.5 {
                        on[class] += 1;
                    }
                }
                NbSlot::Gaussian { sum, sum_sq } => {
                    sum[class] += x;
                    sum_sq[class] += x * x;
                }
            }
        }
    }

    fn posterior(&self, features: &[f64]) -> Result<Vec<f64>> {
        let k = self.class_totals.len();
        let eps = self.epsilon;
        let mut log_post = vec![0.0f64; k];
        for (c, lp) in log_post.iter_mut().enumerate() {
            let n_c = self.class_totals[c] as f64;
            *lp = (n_c + eps).ln();
            for (slot, &x) in self.slots.iter().zip(features) {
                match slot {
                    NbSlot::Bernoulli { on } => {
                        let p_on = (on[c] as f64 + eps) / (n_c + 2.0 * eps);
                        *lp += if x > 0.5 {
                            p_on.ln()
                        } else {
                            (1.0 - p_on).ln()
                        };
                    }
                    NbSlot::Gaussian { sum, sum_sq } => {
                        let (mean, var) = if n_c > 0.0 {
                            let mean = sum[c] / n_c;
                            let var = (sum_sq[c] / n_c - mean * mean).max(GAUSSIAN_VAR_FLOOR);
                            (mean, var)
                        } else {
                            (0.0, 1.0)
                        };
                        let d = x - mean;
                        *lp += -0.5 * (var.ln() + d * d / var);
                    }
                }
            }
        }
        let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Mechanism {
                variable: String::new(),
                message: "classifier has no training mass and epsilon = 0".into(),
            });
        }
        let mut probs: Vec<f64> = log_post.iter().map(|lp| (lp - max).exp()).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        Ok(probs)
    }
}

// --- categorical mechanism ---------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum CatLearner {
    /// Smoothed frequency table keyed by exact discrete parent configuration.
    Cpt {
        rows: Vec<(Vec<DiscreteValue>, Vec<u64>)>,
    },
    NaiveBayes(NaiveBayesModel),
    /// Explicit conditional distributions; produced by tilt interventions.
    Table {
        rows: Vec<(Vec<DiscreteValue>, Vec<f64>)>,
    },
}

/// Fitted structural equation for a categorical or ordinal child: any
/// in-domain parent assignment maps to a proper distribution over the
/// child's classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalMechanism {
    child: String,
    classes: Vec<Value>,
    parents: Vec<VariableSpec>,
    epsilon: f64,
    learner: CatLearner,
}

fn class_values(domain: &Domain) -> Option<Vec<Value>> {
    match domain {
        Domain::Categorical(vals) => Some((0..vals.len() as u32).map(Value::Categorical).collect()),
        Domain::Ordinal(levels) => Some(levels.iter().map(|&l| Value::Ordinal(l)).collect()),
        _ => None,
    }
}

fn resolve_parents(dataset: &Dataset, parents: &[String]) -> Result<Vec<VariableSpec>> {
    parents
        .iter()
        .map(|name| {
            dataset
                .schema()
                .variable(name)
                .cloned()
                .ok_or_else(|| Error::SchemaMismatch(format!("parent `{name}` not in dataset")))
        })
        .collect()
}

fn all_discrete(parents: &[VariableSpec]) -> bool {
    parents
        .iter()
        .all(|p| matches!(p.kind(), VariableKind::Categorical | VariableKind::Ordinal))
}

fn discrete_key(
    parents: &[VariableSpec],
    assignment: &ParentAssignment,
) -> Result<Vec<DiscreteValue>> {
    if assignment.len() != parents.len() {
        return Err(Error::SchemaMismatch(format!(
            "assignment has {} entries, child declares {} parents",
            assignment.len(),
            parents.len()
        )));
    }
    parents
        .iter()
        .map(|p| {
            let value = assignment
                .get(&p.name)
                .ok_or_else(|| Error::SchemaMismatch(format!("missing parent `{}`", p.name)))?;
            if !value.in_domain(&p.domain) {
                return Err(Error::OutOfDomain {
                    variable: p.name.clone(),
                    value: format!("{value:?}"),
                    line: None,
                });
            }
            DiscreteValue::from_value(value).ok_or_else(|| Error::Mechanism {
                variable: p.name.clone(),
                message: "configuration tables require discrete parents".into(),
            })
        })
        .collect()
}

fn lookup<'a, T>(rows: &'a [(Vec<DiscreteValue>, T)], key: &[DiscreteValue]) -> Option<&'a T> {
    rows.binary_search_by(|(k, _)| k.as_slice().cmp(key))
        .ok()
        .map(|ix| &rows[ix].1)
}

/// Fit a categorical mechanism. The learner is taken from `options`, or
/// dispatched on parent kinds: exact configuration tables when all parents
/// are categorical/ordinal, naive Bayes otherwise.
pub fn fit_categorical(
    dataset: &Dataset,
    child: &str,
    parents: &[String],
    options: &MechanismOptions,
) -> Result<CategoricalMechanism> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let child_spec = dataset
        .schema()
        .variable(child)
        .ok_or_else(|| Error::SchemaMismatch(format!("child `{child}` not in dataset")))?
        .clone();
    let classes = class_values(&child_spec.domain).ok_or_else(|| Error::Mechanism {
        variable: child.to_string(),
        message: "categorical mechanism requires a categorical or ordinal child".into(),
    })?;
    let parent_specs = resolve_parents(dataset, parents)?;
    let child_col = dataset.schema().index_of(child).expect("checked above");
    let parent_cols: Vec<usize> = parents
        .iter()
        .map(|p| dataset.schema().index_of(p).expect("checked above"))
        .collect();

    let class_index = |v: &Value| -> Result<usize> {
        classes
            .iter()
            .position(|c| c == v)
            .ok_or_else(|| Error::OutOfDomain {
                variable: child.to_string(),
                value: format!("{v:?}"),
                line: None,
            })
    };

    let use_cpt = match options.learner {
        Some(LearnerKind::Cpt) => {
            if !all_discrete(&parent_specs) {
                return Err(Error::Mechanism {
                    variable: child.to_string(),
                    message: "cpt learner requires categorical/ordinal parents".into(),
                });
            }
            true
        }
        Some(LearnerKind::NaiveBayes) => false,
        Some(LearnerKind::Knn) => {
            return Err(Error::Mechanism {
                variable: child.to_string(),
                message: "knn is a regressor; not valid for a discrete child".into(),
            });
        }
        None => all_discrete(&parent_specs),
    };

    let learner = if use_cpt {
        let mut table: std::collections::BTreeMap<Vec<DiscreteValue>, Vec<u64>> =
            std::collections::BTreeMap::new();
        for row in dataset.rows() {
            let key: Vec<DiscreteValue> = parent_cols
                .iter()
                .map(|&c| DiscreteValue::from_value(&row[c]).expect("discrete parent"))
                .collect();
            let class = class_index(&row[child_col])?;
            let counts = table.entry(key).or_insert_with(|| vec![0; classes.len()]);
            counts[class] += 1;
        }
        CatLearner::Cpt {
            rows: table.into_iter().collect(),
        }
    } else {
        let layout = FeatureLayout::new(parent_specs.clone());
        let mut model = NaiveBayesModel::new(classes.len(), &layout, options.epsilon);
        for row in dataset.rows() {
            let assignment = ParentAssignment::new(
                parent_specs
                    .iter()
                    .zip(&parent_cols)
                    .map(|(p, &c)| (p.name.clone(), row[c].clone()))
                    .collect(),
            );
            let features = layout.encode(&assignment)?;
            let class = class_index(&row[child_col])?;
            model.observe(&features, class);
        }
        CatLearner::NaiveBayes(model)
    };

    Ok(CategoricalMechanism {
        child: child.to_string(),
        classes,
        parents: parent_specs,
        epsilon: options.epsilon,
        learner,
    })
}

impl CategoricalMechanism {
    pub fn child(&self) -> &str {
        &self.child
    }

    pub fn classes(&self) -> &[Value] {
        &self.classes
    }

    pub fn parents(&self) -> &[VariableSpec] {
        &self.parents
    }

    /// Build a mechanism directly from explicit conditional distributions,
    /// one row per discrete parent configuration. Used by tilt interventions
    /// and handy in tests.
    pub fn from_conditional_table(
        child: &str,
        classes: Vec<Value>,
        parents: Vec<VariableSpec>,
        rows: Vec<(Vec<DiscreteValue>, Vec<f64>)>,
    ) -> Result<CategoricalMechanism> {
        let mut rows = rows;
        rows.sort_by(|(a, _), (b, _)| a.cmp(b));
        for (_, dist) in &rows {
            if dist.len() != classes.len() {
                return Err(Error::Mechanism {
                    variable: child.to_string(),
                    message: "table row length differs from class count".into(),
                });
            }
            let sum: f64 = dist.iter().sum();
            if dist.iter().any(|&p| !(0.0..=1.0 + 1e-9).contains(&p)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Mechanism {
                    variable: child.to_string(),
                    message: format!("table row is not a distribution (sum {sum})"),
                });
            }
        }
        Ok(CategoricalMechanism {
            child: child.to_string(),
            classes,
            parents,
            epsilon: 0.0,
            learner: CatLearner::Table { rows },
        })
    }

    /// The predicted class distribution for an in-domain parent assignment.
    /// Non-negative, sums to 1 within 1e-9, deterministic.
    pub fn distribution(&self, assignment: &ParentAssignment) -> Result<Vec<f64>> {
        let probs = match &self.learner {
            CatLearner::Cpt { rows } => {
                let key = discrete_key(&self.parents, assignment)?;
                let zero;
                let counts = match lookup(rows, &key) {
                    Some(counts) => counts,
                    None => {
                        if self.epsilon == 0.0 {
                            return Err(Error::Mechanism {
                                variable: self.child.clone(),
                                message: "unseen parent configuration with epsilon = 0".into(),
                            });
                        }
                        zero = vec![0u64; self.classes.len()];
                        &zero
                    }
                };
                let total: u64 = counts.iter().sum();
                if total == 0 && self.epsilon == 0.0 {
                    return Err(Error::Mechanism {
                        variable: self.child.clone(),
                        message: "unseen parent configuration with epsilon = 0".into(),
                    });
                }
                let denom = total as f64 + self.epsilon * self.classes.len() as f64;
                counts
                    .iter()
                    .map(|&c| (c as f64 + self.epsilon) / denom)
                    .collect()
            }
            CatLearner::NaiveBayes(model) => {
                let layout = FeatureLayout::new(self.parents.clone());
                let features = layout.encode(assignment)?;
                model.posterior(&features).map_err(|e| match e {
                    Error::Mechanism { message, .. } => Error::Mechanism {
                        variable: self.child.clone(),
                        message,
                    },
                    other => other,
                })?
            }
            CatLearner::Table { rows } => {
                let key = discrete_key(&self.parents, assignment)?;
                lookup(rows, &key)
                    .cloned()
                    .ok_or_else(|| Error::Mechanism {
                        variable: self.child.clone(),
                        message: "parent configuration absent from conditional table".into(),
                    })?
            }
        };
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        debug_assert!(probs.iter().all(|&p| p >= 0.0));
        Ok(probs)
    }

    /// Draw one class; reproducible given the stream state.
    pub fn sample(&self, assignment: &ParentAssignment, rng: &mut Stream) -> Result<Value> {
        let probs = self.distribution(assignment)?;
        Ok(self.classes[sample_index(&probs, rng)].clone())
    }
}

// --- continuous mechanism -----------------------------------------------------

/// Fitted additive-noise equation for a continuous child. The exogenous
/// noise is the full list of training residuals `x − f(parents)`, sampled by
/// uniform bootstrap — no parametric form, no recentring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousMechanism {
    child: String,
    parents: Vec<VariableSpec>,
    k: usize,
    features: Vec<Vec<f64>>,
    targets: Vec<f64>,
    residual_pool: Vec<f64>,
}

/// Fit a continuous mechanism with a k-nearest-neighbour regressor
/// (Euclidean over encoded features, ties broken by row index).
pub fn fit_continuous(
    dataset: &Dataset,
    child: &str,
    parents: &[String],
    options: &MechanismOptions,
) -> Result<ContinuousMechanism> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let child_spec = dataset
        .schema()
        .variable(child)
        .ok_or_else(|| Error::SchemaMismatch(format!("child `{child}` not in dataset")))?;
    if child_spec.kind() != VariableKind::Continuous {
        return Err(Error::Mechanism {
            variable: child.to_string(),
            message: "continuous mechanism requires a continuous child".into(),
        });
    }
    let parent_specs = resolve_parents(dataset, parents)?;
    let layout = FeatureLayout::new(parent_specs.clone());
    let child_col = dataset.schema().index_of(child).expect("checked above");
    let parent_cols: Vec<usize> = parents
        .iter()
        .map(|p| dataset.schema().index_of(p).expect("checked above"))
        .collect();

    let mut features = Vec::with_capacity(dataset.len());
    let mut targets = Vec::with_capacity(dataset.len());
    for row in dataset.rows() {
        let assignment = ParentAssignment::new(
            parent_specs
                .iter()
                .zip(&parent_cols)
                .map(|(p, &c)| (p.name.clone(), row[c].clone()))
                .collect(),
        );
        features.push(layout.encode(&assignment)?);
        match row[child_col] {
            Value::Continuous(x) => targets.push(x),
            ref other => {
                return Err(Error::Mechanism {
                    variable: child.to_string(),
                    message: format!("non-numeric child value {other:?}"),
                });
            }
        }
    }

    let mut mech = ContinuousMechanism {
        child: child.to_string(),
        parents: parent_specs,
        k: options.k.max(1),
        features,
        targets,
        residual_pool: Vec::new(),
    };
    mech.residual_pool = mech
        .features
        .iter()
        .zip(&mech.targets)
        .map(|(f, &y)| y - mech.predict_features(f))
        .collect();
    Ok(mech)
}

impl ContinuousMechanism {
    pub fn child(&self) -> &str {
        &self.child
    }

    pub fn parents(&self) -> &[VariableSpec] {
        &self.parents
    }

    /// Training residuals, one per training row.
    pub fn residual_pool(&self) -> &[f64] {
        &self.residual_pool
    }

    /// Mean of the residual pool — reported, not assumed zero.
    pub fn residual_mean(&self) -> f64 {
        if self.residual_pool.is_empty() {
            0.0
        } else {
            self.residual_pool.iter().sum::<f64>() / self.residual_pool.len() as f64
        }
    }

    fn predict_features(&self, query: &[f64]) -> f64 {
        let mut by_distance: Vec<(f64, usize)> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let d2: f64 = f.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        by_distance.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let k = self.k.min(by_distance.len());
        by_distance[..k]
            .iter()
            .map(|&(_, i)| self.targets[i])
            .sum::<f64>()
            / k as f64
    }

    /// The deterministic regression part `f(parents)`.
    pub fn predict(&self, assignment: &ParentAssignment) -> Result<f64> {
        let layout = FeatureLayout::new(self.parents.clone());
        Ok(self.predict_features(&layout.encode(assignment)?))
    }

    /// `f(parents) + u`, `u` drawn uniformly from the residual pool. The
    /// result may leave any declared range; the sampler upstream records a
    /// warning instead of clamping.
    pub fn sample(&self, assignment: &ParentAssignment, rng: &mut Stream) -> Result<f64> {
        if self.residual_pool.is_empty() {
            return Err(Error::Mechanism {
                variable: self.child.clone(),
                message: "empty residual pool".into(),
            });
        }
        let prediction = self.predict(assignment)?;
        let u = self.residual_pool[rng.random_range(0..self.residual_pool.len())];
        Ok(prediction + u)
    }
}

// --- set mechanism -------------------------------------------------------------

/// Row payload of an inclusion table: total row count for the parent
/// configuration plus per-item presence counts.
type InclusionCounts = (u64, Vec<u64>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum InclusionModel {
    Cpt {
        rows: Vec<(Vec<DiscreteValue>, InclusionCounts)>,
    },
    /// One binary naive-Bayes model per vocabulary item (classes:
    /// absent, present). Used when a parent is itself set-valued.
    PerItemNb(Vec<NaiveBayesModel>),
}

/// Fitted structural equation for a set-valued child: estimates
/// `P(item ∈ child | parents)` per vocabulary item and samples subsets of
/// size `n ~ U(n_min, n_max)` without replacement, proportional to the
/// remaining inclusion weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetMechanism {
    child: String,
    vocabulary: Vec<String>,
    n_min: usize,
    n_max: usize,
    parents: Vec<VariableSpec>,
    epsilon: f64,
    inclusion: InclusionModel,
}

/// Fit a set mechanism from presence counts.
pub fn fit_set(
    dataset: &Dataset,
    child: &str,
    parents: &[String],
    n_min: usize,
    n_max: usize,
    options: &MechanismOptions,
) -> Result<SetMechanism> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let child_spec = dataset
        .schema()
        .variable(child)
        .ok_or_else(|| Error::SchemaMismatch(format!("child `{child}` not in dataset")))?;
    let vocabulary = match &child_spec.domain {
        Domain::Set { vocabulary, .. } => vocabulary.clone(),
        _ => {
            return Err(Error::Mechanism {
                variable: child.to_string(),
                message: "set mechanism requires a set-valued child".into(),
            });
        }
    };
    if vocabulary.is_empty() {
        return Err(Error::Mechanism {
            variable: child.to_string(),
            message: "empty vocabulary".into(),
        });
    }
    if n_min < 1 || n_min > n_max || n_max > vocabulary.len() {
        return Err(Error::Mechanism {
            variable: child.to_string(),
            message: format!(
                "set bounds must satisfy 1 <= n_min <= n_max <= {} (got {n_min}, {n_max})",
                vocabulary.len()
            ),
        });
    }
    let parent_specs = resolve_parents(dataset, parents)?;
    let child_col = dataset.schema().index_of(child).expect("checked above");
    let parent_cols: Vec<usize> = parents
        .iter()
        .map(|p| dataset.schema().index_of(p).expect("checked above"))
        .collect();

    fn items_of<'a>(child: &str, value: &'a Value) -> Result<&'a Vec<u16>> {
        match value {
            Value::Set(items) => Ok(items),
            other => Err(Error::Mechanism {
                variable: child.to_string(),
                message: format!("non-set child value {other:?}"),
            }),
        }
    }

    let inclusion = if all_discrete(&parent_specs) {
        let mut table: std::collections::BTreeMap<Vec<DiscreteValue>, (u64, Vec<u64>)> =
            std::collections::BTreeMap::new();
        for row in dataset.rows() {
            let key: Vec<DiscreteValue> = parent_cols
                .iter()
                .map(|&c| DiscreteValue::from_value(&row[c]).expect("discrete parent"))
                .collect();
            let entry = table
                .entry(key)
                .or_insert_with(|| (0, vec![0; vocabulary.len()]));
            entry.0 += 1;
            for &item in items_of(child, &row[child_col])? {
                entry.1[item as usize] += 1;
            }
        }
        InclusionModel::Cpt {
            rows: table.into_iter().collect(),
        }
    } else {
        let layout = FeatureLayout::new(parent_specs.clone());
        let mut models: Vec<NaiveBayesModel> = (0..vocabulary.len())
            .map(|_| NaiveBayesModel::new(2, &layout, options.epsilon))
            .collect();
        for row in dataset.rows() {
            let assignment = ParentAssignment::new(
                parent_specs
                    .iter()
                    .zip(&parent_cols)
                    .map(|(p, &c)| (p.name.clone(), row[c].clone()))
                    .collect(),
            );
            let features = layout.encode(&assignment)?;
            let items = items_of(child, &row[child_col])?;
            for (j, model) in models.iter_mut().enumerate() {
                let present = items.binary_search(&(j as u16)).is_ok();
                model.observe(&features, usize::from(present));
            }
        }
        InclusionModel::PerItemNb(models)
    };

    Ok(SetMechanism {
        child: child.to_string(),
        vocabulary,
        n_min,
        n_max,
        parents: parent_specs,
        epsilon: options.epsilon,
        inclusion,
    })
}

impl SetMechanism {
    pub fn child(&self) -> &str {
        &self.child
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn parents(&self) -> &[VariableSpec] {
        &self.parents
    }

    pub fn bounds(&self) -> (usize, usize) {
        (self.n_min, self.n_max)
    }

    /// Estimated `P(item ∈ child | assignment)` per vocabulary item.
    pub fn inclusion_probabilities(&self, assignment: &ParentAssignment) -> Result<Vec<f64>> {
        match &self.inclusion {
            InclusionModel::Cpt { rows } => {
                let key = discrete_key(&self.parents, assignment)?;
                let (total, present) = match lookup(rows, &key) {
                    Some(entry) => (entry.0, entry.1.clone()),
                    None => {
                        if self.epsilon == 0.0 {
                            return Err(Error::Mechanism {
                                variable: self.child.clone(),
                                message: "unseen parent configuration with epsilon = 0".into(),
                            });
                        }
                        (0, vec![0; self.vocabulary.len()])
                    }
                };
                Ok(present
                    .iter()
                    .map(|&c| (c as f64 + self.epsilon) / (total as f64 + 2.0 * self.epsilon))
                    .collect())
            }
            InclusionModel::PerItemNb(models) => {
                let layout = FeatureLayout::new(self.parents.clone());
                let features = layout.encode(assignment)?;
                models
                    .iter()
                    .map(|m| Ok(m.posterior(&features)?[1]))
                    .collect()
            }
        }
    }

    /// Draw a subset: `n ~ U(n_min, min(n_max, #positive-weight items))`,
    /// then `n` successive renormalised draws without replacement.
    pub fn sample(&self, assignment: &ParentAssignment, rng: &mut Stream) -> Result<Value> {
        let weights = self.inclusion_probabilities(assignment)?;
        let positive = weights.iter().filter(|&&w| w > 0.0).count();
        if positive < self.n_min {
            return Err(Error::Mechanism {
                variable: self.child.clone(),
                message: format!(
                    "only {positive} items have positive inclusion weight, need n_min = {}",
                    self.n_min
                ),
            });
        }
        let cap = self.n_max.min(positive);
        let n = if self.n_min == cap {
            self.n_min
        } else {
            rng.random_range(self.n_min..=cap)
        };
        let mut items: Vec<u16> = weighted_sample_without_replacement(&weights, n, rng)
            .into_iter()
            .map(|i| i as u16)
            .collect();
        items.sort_unstable();
        Ok(Value::Set(items))
    }
}

// --- mechanism dispatch ---------------------------------------------------------

/// One fitted structural equation of any family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Mechanism {
    Categorical(CategoricalMechanism),
    Continuous(ContinuousMechanism),
    Set(SetMechanism),
}

impl Mechanism {
    pub fn child(&self) -> &str {
        match self {
            Mechanism::Categorical(m) => m.child(),
            Mechanism::Continuous(m) => m.child(),
            Mechanism::Set(m) => m.child(),
        }
    }

    pub fn parents(&self) -> &[VariableSpec] {
        match self {
            Mechanism::Categorical(m) => m.parents(),
            Mechanism::Continuous(m) => m.parents(),
            Mechanism::Set(m) => m.parents(),
        }
    }

    pub fn sample(&self, assignment: &ParentAssignment, rng: &mut Stream) -> Result<Value> {
        match self {
            Mechanism::Categorical(m) => m.sample(assignment, rng),
            Mechanism::Continuous(m) => m.sample(assignment, rng).map(Value::Continuous),
            Mechanism::Set(m) => m.sample(assignment, rng),
        }
    }
}
