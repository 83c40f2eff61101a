//! Structural-model assembly, ancestral sampling, and exponential-tilting
//! interventions.
//!
//! A [`StructuralModel`] pairs a validated graph with one fitted mechanism
//! per variable (root variables carry empty-parent mechanisms, i.e.
//! marginals). Records are generated by visiting variables in topological
//! order and sampling each from its mechanism given the already-sampled
//! parents, so the induced joint factorises as the product of the fitted
//! conditionals.
//!
//! [`apply_tilt`] is a model transformation, not a refit: it replaces the
//! target's conditional `P(boosted | group)` with the exponentially tilted
//! `e^α·p / (e^α·p + (1−p))` per group value and leaves every other
//! mechanism untouched, so one fitted model serves a whole tilt sweep.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Schema, Value};
use crate::error::{Error, Result};
#[cfg(test)]
use crate::graph::MechanismOptions;
use crate::graph::{CausalGraphSpec, Domain, TiltSpec};
use crate::mechanisms::{
    CategoricalMechanism, DiscreteValue, Mechanism, ParentAssignment, fit_categorical,
    fit_continuous, fit_set,
};
use crate::rng::Stream;

/// Global overrides applied on top of each variable's inline options.
#[derive(Clone, Copy, Debug, Default)]
pub struct FitOptions {
    /// Replace every variable's Laplace pseudo-count.
    pub epsilon_override: Option<f64>,
}

/// A fitted structural causal model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralModel {
    graph: CausalGraphSpec,
    mechanisms: BTreeMap<String, Mechanism>,
    order: Vec<String>,
}

/// Bookkeeping from a sampling pass, currently just range excursions of
/// continuous variables (values are kept, not clamped).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleStats {
    pub out_of_range: BTreeMap<String, u64>,
}

/// Fit one mechanism per graph variable from an observational corpus.
/// Root variables are fitted on empty parent sets, yielding marginals.
pub fn fit_scm(
    graph: &CausalGraphSpec,
    dataset: &Dataset,
    options: FitOptions,
) -> Result<StructuralModel> {
    graph.ensure_valid()?;
    for var in &graph.variables {
        match dataset.schema().variable(&var.name) {
            None => {
                return Err(Error::SchemaMismatch(format!(
                    "graph variable `{}` absent from dataset",
                    var.name
                )));
            }
            Some(in_data) if in_data.domain != var.domain => {
                return Err(Error::SchemaMismatch(format!(
                    "domain of `{}` differs between graph and dataset",
                    var.name
                )));
            }
            Some(_) => {}
        }
    }

    let order = graph.topological_order()?;
    let mut mechanisms = BTreeMap::new();
    for var in &graph.variables {
        let parents = graph.parents_of(&var.name);
        let mut var_options = var.mechanism.clone();
        if let Some(eps) = options.epsilon_override {
            var_options.epsilon = eps;
        }
        let mechanism = match &var.domain {
            Domain::Categorical(_) | Domain::Ordinal(_) => {
                Mechanism::Categorical(fit_categorical(dataset, &var.name, &parents, &var_options)?)
            }
            Domain::Continuous(_) => {
                Mechanism::Continuous(fit_continuous(dataset, &var.name, &parents, &var_options)?)
            }
            Domain::Set { n_min, n_max, .. } => Mechanism::Set(fit_set(
                dataset,
                &var.name,
                &parents,
                *n_min,
                *n_max,
                &var_options,
            )?),
        };
        mechanisms.insert(var.name.clone(), mechanism);
    }

    Ok(StructuralModel {
        graph: graph.clone(),
        mechanisms,
        order,
    })
}

impl StructuralModel {
    pub fn graph(&self) -> &CausalGraphSpec {
        &self.graph
    }

    pub fn order(&self) -> &[String] {
        &self.order
    }

    pub fn mechanism(&self, variable: &str) -> Option<&Mechanism> {
        self.mechanisms.get(variable)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialisation cannot fail")
    }

    pub fn from_json(text: &str) -> Result<StructuralModel> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad model file: {e}")))
    }
}

/// Generate `n` records by ancestral sampling. Deterministic given the
/// stream; two calls on identically seeded streams yield identical datasets.
pub fn sample_records(model: &StructuralModel, n: usize, rng: &mut Stream) -> Result<Dataset> {
    sample_records_with_stats(model, n, rng).map(|(dataset, _)| dataset)
}

/// Same as [`sample_records`], also reporting range excursions of
/// continuous variables (the sampler never clamps).
pub fn sample_records_with_stats(
    model: &StructuralModel,
    n: usize,
    rng: &mut Stream,
) -> Result<(Dataset, SampleStats)> {
    if n == 0 {
        return Err(Error::Config("sample size must be >= 1".into()));
    }
    let schema = Schema::from_graph(&model.graph);
    let mut dataset = Dataset::new(schema);
    let mut stats = SampleStats::default();
    let mut current: BTreeMap<&str, Value> = BTreeMap::new();
    for _ in 0..n {
        current.clear();
        for name in &model.order {
            let mechanism = &model.mechanisms[name];
            let assignment = ParentAssignment::new(
                mechanism
                    .parents()
                    .iter()
                    .map(|p| {
                        (
                            p.name.clone(),
                            current
                                .get(p.name.as_str())
                                .expect("topological order places parents first")
                                .clone(),
                        )
                    })
                    .collect(),
            );
            let value = mechanism.sample(&assignment, rng)?;
            if let (Value::Continuous(x), Some(Domain::Continuous(Some((lo, hi))))) =
                (&value, model.graph.variable(name).map(|v| &v.domain))
                && (x < lo || x > hi)
            {
                *stats.out_of_range.entry(name.clone()).or_insert(0) += 1;
            }
            current.insert(name.as_str(), value);
        }
        let row: Vec<Value> = model
            .graph
            .variables
            .iter()
            .map(|v| current[v.name.as_str()].clone())
            .collect();
        dataset.push_row(row)?;
    }
    Ok((dataset, stats))
}

/// Exponential tilt of a binary conditional: returns
/// `e^α·p / (e^α·p + (1−p))`. Identity at `α = 0` (exactly), strictly
/// monotone increasing in `α` for `p ∈ (0,1)`, and maps `[0,1]` to `[0,1]`.
pub fn tilt_distribution(p: f64, alpha: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p), "p must be a probability");
    if alpha == 0.0 {
        return p;
    }
    let boosted = alpha.exp() * p;
    boosted / (boosted + (1.0 - p))
}

/// Apply a tilt intervention, returning a new model; the input is untouched.
/// Requires the target to be binary categorical and its only parent to be
/// the tilt's group variable.
pub fn apply_tilt(model: &StructuralModel, tilt: &TiltSpec) -> Result<StructuralModel> {
    let target_var = model
        .graph
        .variable(&tilt.target)
        .ok_or_else(|| Error::Mechanism {
            variable: tilt.target.clone(),
            message: "tilt target not in graph".into(),
        })?;
    let classes = match &target_var.domain {
        Domain::Categorical(vals) if vals.len() == 2 => vals.clone(),
        _ => {
            return Err(Error::Mechanism {
                variable: tilt.target.clone(),
                message: "tilt target must be categorical with exactly 2 values".into(),
            });
        }
    };
    let boosted_ix = classes
        .iter()
        .position(|v| v == &tilt.boosted_value)
        .ok_or_else(|| Error::Mechanism {
            variable: tilt.target.clone(),
            message: format!(
                "boosted value `{}` not in target domain",
                tilt.boosted_value
            ),
        })?;

    let parents = model.graph.parents_of(&tilt.target);
    if parents != vec![tilt.group_variable.clone()] {
        return Err(Error::Mechanism {
            variable: tilt.target.clone(),
            message: format!(
                "tilt requires the target's only parent to be `{}`, found {parents:?}",
                tilt.group_variable
            ),
        });
    }
    let group_var = model
        .graph
        .variable(&tilt.group_variable)
        .expect("validated graph");
    let group_values = match &group_var.domain {
        Domain::Categorical(vals) => vals.clone(),
        _ => {
            return Err(Error::Mechanism {
                variable: tilt.group_variable.clone(),
                message: "tilt group variable must be categorical".into(),
            });
        }
    };

    let base = match &model.mechanisms[&tilt.target] {
        Mechanism::Categorical(m) => m,
        _ => {
            return Err(Error::Mechanism {
                variable: tilt.target.clone(),
                message: "tilt target mechanism is not categorical".into(),
            });
        }
    };

    let mut rows = Vec::with_capacity(group_values.len());
    for (g_ix, g_value) in group_values.iter().enumerate() {
        let assignment = ParentAssignment::new(vec![(
            tilt.group_variable.clone(),
            Value::Categorical(g_ix as u32),
        )]);
        let dist = base.distribution(&assignment)?;
        let shifted = tilt_distribution(dist[boosted_ix], tilt.alpha_for(g_value));
        let mut row = vec![0.0; 2];
        row[boosted_ix] = shifted;
        row[1 - boosted_ix] = 1.0 - shifted;
        rows.push((vec![DiscreteValue::Cat(g_ix as u32)], row));
    }

    let tilted = CategoricalMechanism::from_conditional_table(
        &tilt.target,
        base.classes().to_vec(),
        base.parents().to_vec(),
        rows,
    )?;

    let mut mechanisms = model.mechanisms.clone();
    mechanisms.insert(tilt.target.clone(), Mechanism::Categorical(tilted));
    Ok(StructuralModel {
        graph: model.graph.clone(),
        mechanisms,
        order: model.order.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SeedCorpusParams, generate_seed_corpus};
    use crate::graph::VariableSpec;
    use crate::rng::derive_stream;

    fn tiny_curriculum_model() -> StructuralModel {
        let mut params = SeedCorpusParams::default();
        params.n_cvs = 4000;
        params.n_jobs = 10;
        let (_, cvs) = generate_seed_corpus(&params).unwrap();
        let graph = CausalGraphSpec::parse(crate::DEFAULT_CURRICULUM_GRAPH).unwrap();
        fit_scm(&graph, &cvs, FitOptions::default()).unwrap()
    }

    fn gender_hours_graph() -> CausalGraphSpec {
        CausalGraphSpec::parse(
            r#"{
                "variables": [
                    {"name": "gender", "kind": "categorical", "domain": ["male", "not_male"]},
                    {"name": "working_hours", "kind": "categorical", "domain": ["full_time", "part_time"]}
                ],
                "edges": [["gender", "working_hours"]],
                "tilts": [{
                    "target": "working_hours",
                    "group_variable": "gender",
                    "boosted_value": "part_time",
                    "alpha_by_group": {}
                }]
            }"#,
        )
        .unwrap()
    }

    /// Dataset realising the documented baselines exactly:
    /// P(part|male) = 0.24, P(part|not_male) = 0.59, genders 50/50.
    fn baseline_dataset(graph: &CausalGraphSpec) -> Dataset {
        let mut d = Dataset::new(Schema::from_graph(graph));
        for i in 0..100 {
            d.push_row(vec![
                Value::Categorical(0),
                Value::Categorical(u32::from(i < 24)),
            ])
            .unwrap();
        }
        for i in 0..100 {
            d.push_row(vec![
                Value::Categorical(1),
                Value::Categorical(u32::from(i < 59)),
            ])
            .unwrap();
        }
        d
    }

    #[test]
    fn tilt_distribution_identity_at_zero_is_exact() {
        for p in [0.0, 0.1, 0.24, 0.5, 0.59, 0.9999, 1.0] {
            assert_eq!(tilt_distribution(p, 0.0), p);
        }
    }

    #[test]
    fn tilt_distribution_matches_reported_shifts() {
        assert!((tilt_distribution(0.24, 1.5) - 0.586).abs() < 1e-3);
        assert!((tilt_distribution(0.59, 4.0) - 0.9874).abs() < 1e-3);
        assert!((tilt_distribution(0.24, -4.0) - 0.0057).abs() < 1e-3);
        assert!((tilt_distribution(0.59, -1.5) - 0.243).abs() < 1e-3);
    }

    #[test]
    fn fit_scm_curriculum_has_all_mechanisms() {
        let model = tiny_curriculum_model();
        assert_eq!(model.order().len(), 7);
        assert!(matches!(model.mechanism("skills"), Some(Mechanism::Set(_))));
        assert!(matches!(
            model.mechanism("working_hours"),
            Some(Mechanism::Categorical(_))
        ));
    }

    #[test]
    fn fit_scm_missing_variable_is_schema_error() {
        let graph = gender_hours_graph();
        let mut bigger = graph.clone();
        bigger.variables.push(VariableSpec {
            name: "salary".into(),
            domain: Domain::Continuous(None),
            mechanism: MechanismOptions::default(),
        });
        let dataset = baseline_dataset(&graph);
        assert!(matches!(
            fit_scm(&bigger, &dataset, FitOptions::default()),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn fit_scm_single_variable_graph_is_marginal() {
        let graph = CausalGraphSpec::parse(
            r#"{"variables": [{"name": "g", "kind": "categorical", "domain": ["a", "b"]}], "edges": []}"#,
        )
        .unwrap();
        let mut d = Dataset::new(Schema::from_graph(&graph));
        d.push_row(vec![Value::Categorical(0)]).unwrap();
        let model = fit_scm(
            &graph,
            &d,
            FitOptions {
                epsilon_override: Some(0.0),
            },
        )
        .unwrap();
        let mut rng = derive_stream(1, "single", &[]);
        let out = sample_records(&model, 1, &mut rng).unwrap();
        assert_eq!(out.rows()[0], vec![Value::Categorical(0)]);
    }

    #[test]
    fn sampling_is_deterministic_under_a_seed() {
        let model = tiny_curriculum_model();
        let mut a = derive_stream(5, "records", &[0]);
        let mut b = derive_stream(5, "records", &[0]);
        let d1 = sample_records(&model, 200, &mut a).unwrap();
        let d2 = sample_records(&model, 200, &mut b).unwrap();
        assert_eq!(d1, d2);
        let mut bytes1 = Vec::new();
        let mut bytes2 = Vec::new();
        crate::corpus::render_dataset_csv(&d1, &mut bytes1);
        crate::corpus::render_dataset_csv(&d2, &mut bytes2);
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn two_variable_chain_matches_factorisation() {
        let graph = gender_hours_graph();
        let dataset = baseline_dataset(&graph);
        let model = fit_scm(
            &graph,
            &dataset,
            FitOptions {
                epsilon_override: Some(0.0),
            },
        )
        .unwrap();
        let mut rng = derive_stream(17, "chain", &[]);
        let sampled = sample_records(&model, 100_000, &mut rng).unwrap();

        // Product-rule oracle: P(g) * P(w|g) from the fitted tables.
        let expected = [[0.5 * 0.76, 0.5 * 0.24], [0.5 * 0.41, 0.5 * 0.59]];
        let mut counts = [[0u32; 2]; 2];
        for row in sampled.rows() {
            let g = match row[0] {
                Value::Categorical(ix) => ix as usize,
                _ => unreachable!(),
            };
            let w = match row[1] {
                Value::Categorical(ix) => ix as usize,
                _ => unreachable!(),
            };
            counts[g][w] += 1;
        }
        for g in 0..2 {
            for w in 0..2 {
                let freq = f64::from(counts[g][w]) / 100_000.0;
                let expect = expected[g][if w == 0 { 0 } else { 1 }];
                assert!(
                    (freq - expect).abs() <= 0.01,
                    "cell ({g},{w}): {freq} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn apply_tilt_zero_alphas_changes_nothing() {
        let graph = gender_hours_graph();
        let dataset = baseline_dataset(&graph);
        let model = fit_scm(
            &graph,
            &dataset,
            FitOptions {
                epsilon_override: Some(0.0),
            },
        )
        .unwrap();
        let tilt = graph.tilts[0].clone();
        let tilted = apply_tilt(&model, &tilt).unwrap();
        for g in 0..2u32 {
            let a = ParentAssignment::new(vec![("gender".into(), Value::Categorical(g))]);
            let before = match model.mechanism("working_hours").unwrap() {
                Mechanism::Categorical(m) => m.distribution(&a).unwrap(),
                _ => unreachable!(),
            };
            let after = match tilted.mechanism("working_hours").unwrap() {
                Mechanism::Categorical(m) => m.distribution(&a).unwrap(),
                _ => unreachable!(),
            };
            for (x, y) in before.iter().zip(&after) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn apply_tilt_shifts_only_the_named_group() {
        let graph = gender_hours_graph();
        let dataset = baseline_dataset(&graph);
        let model = fit_scm(
            &graph,
            &dataset,
            FitOptions {
                epsilon_override: Some(0.0),
            },
        )
        .unwrap();

        // alpha_1 = -4 applied to male: P'(part|male) = 0.24e^-4/(0.24e^-4 + 0.76).
        let tilt = graph.tilts[0].with_alphas([("male".to_string(), -4.0)].into_iter().collect());
        let tilted = apply_tilt(&model, &tilt).unwrap();
        let male = ParentAssignment::new(vec![("gender".into(), Value::Categorical(0))]);
        let not_male = ParentAssignment::new(vec![("gender".into(), Value::Categorical(1))]);
        let dist_male = match tilted.mechanism("working_hours").unwrap() {
            Mechanism::Categorical(m) => m.distribution(&male).unwrap(),
            _ => unreachable!(),
        };
        assert!((dist_male[1] - 0.0057).abs() < 1e-3, "got {}", dist_male[1]);
        let dist_nm = match tilted.mechanism("working_hours").unwrap() {
            Mechanism::Categorical(m) => m.distribution(&not_male).unwrap(),
            _ => unreachable!(),
        };
        assert!((dist_nm[1] - 0.59).abs() < 1e-12, "not_male unchanged");

        // alpha_0 = -1.5 applied to not_male nearly matches the male baseline.
        let tilt =
            graph.tilts[0].with_alphas([("not_male".to_string(), -1.5)].into_iter().collect());
        let tilted = apply_tilt(&model, &tilt).unwrap();
        let dist_nm = match tilted.mechanism("working_hours").unwrap() {
            Mechanism::Categorical(m) => m.distribution(&not_male).unwrap(),
            _ => unreachable!(),
        };
        assert!((dist_nm[1] - 0.243).abs() < 1e-3, "got {}", dist_nm[1]);
    }

    #[test]
    fn apply_tilt_rejects_parent_mismatch_and_nonbinary_target() {
        let model = tiny_curriculum_model();
        let bad_parent = TiltSpec {
            target: "working_hours".into(),
            group_variable: "job_sector".into(),
            boosted_value: "part_time".into(),
            alpha_by_group: BTreeMap::new(),
        };
        assert!(apply_tilt(&model, &bad_parent).is_err());

        let bad_target = TiltSpec {
            target: "job_sector".into(),
            group_variable: "gender".into(),
            boosted_value: "ict".into(),
            alpha_by_group: BTreeMap::new(),
        };
        assert!(apply_tilt(&model, &bad_target).is_err());
    }

    #[test]
    fn apply_tilt_leaves_non_target_columns_identical_under_shared_seed() {
        let model = tiny_curriculum_model();
        let tilt = model.graph().tilts[0]
            .with_alphas([("not_male".to_string(), 2.5)].into_iter().collect());
        let tilted = apply_tilt(&model, &tilt).unwrap();

        let mut a = derive_stream(23, "shared", &[]);
        let mut b = derive_stream(23, "shared", &[]);
        let base = sample_records(&model, 500, &mut a).unwrap();
        let shifted = sample_records(&tilted, 500, &mut b).unwrap();
        let wh_col = base.schema().index_of("working_hours").unwrap();
        for (r1, r2) in base.rows().iter().zip(shifted.rows()) {
            for (c, (v1, v2)) in r1.iter().zip(r2).enumerate() {
                if c != wh_col {
                    assert_eq!(v1, v2, "non-target column {c} diverged");
                }
            }
        }
    }

    #[test]
    fn model_round_trips_through_json() {
        let graph = gender_hours_graph();
        let dataset = baseline_dataset(&graph);
        let model = fit_scm(&graph, &dataset, FitOptions::default()).unwrap();
        let text = model.to_json_pretty();
        let back = StructuralModel::from_json(&text).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn out_of_range_continuous_draws_are_counted_not_clamped() {
        let graph = CausalGraphSpec::parse(
            r#"{
                "variables": [
                    {"name": "x", "kind": "continuous", "range": [0.0, 1.0], "mechanism": {"k": 1}}
                ],
                "edges": []
            }"#,
        )
        .unwrap();
        let mut d = Dataset::new(Schema::from_graph(&graph));
        // Value far outside the declared range; 1-NN reproduces it.
        d.push_row(vec![Value::Continuous(5.0)]).unwrap();
        let model = fit_scm(&graph, &d, FitOptions::default()).unwrap();
        let mut rng = derive_stream(2, "range", &[]);
        let (out, stats) = sample_records_with_stats(&model, 3, &mut rng).unwrap();
        assert_eq!(stats.out_of_range.get("x"), Some(&3));
        assert_eq!(out.rows()[0], vec![Value::Continuous(5.0)]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tilt_maps_unit_interval_to_itself(p in 0.0f64..=1.0, alpha in -8.0f64..8.0) {
                let shifted = tilt_distribution(p, alpha);
                prop_assert!((0.0..=1.0).contains(&shifted));
            }

            #[test]
            fn tilt_strictly_monotone_in_alpha(p in 0.01f64..0.99, a in -6.0f64..6.0, step in 0.01f64..2.0) {
                prop_assert!(tilt_distribution(p, a) < tilt_distribution(p, a + step));
            }

            #[test]
            fn one_sided_tilt_equals_symmetric_form(p in 0.0f64..=1.0, alpha in -6.0f64..6.0) {
                let one_sided = tilt_distribution(p, alpha);
                let half = (alpha / 2.0).exp();
                let symmetric = half * p / (half * p + (1.0 / half) * (1.0 - p));
                prop_assert!((one_sided - symmetric).abs() < 1e-12);
            }
        }
    }
}
