//! Causal-graph configuration: typed variables, directed edges, and the
//! tilt attachments that downstream bias interventions refer to.
//!
//! A graph document is a JSON tree with top-level keys `variables`, `edges`
//! and (optionally) `tilts`. One document fully specifies a generator:
//! variable domains, per-variable mechanism options and tilt declarations
//! all live inline. Specs are immutable after parsing and safe to share
//! across threads.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four structural-equation families a variable can belong to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    Categorical,
    Ordinal,
    Continuous,
    Set,
}

/// Value domain of a variable. Categorical and ordinal domains are finite
/// ordered lists; set domains carry a vocabulary plus size bounds for the
/// sampled subsets; continuous domains may declare an advisory range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Categorical(Vec<String>),
    Ordinal(Vec<i64>),
    Continuous(Option<(f64, f64)>),
    Set {
        vocabulary: Vec<String>,
        n_min: usize,
        n_max: usize,
    },
}

impl Domain {
    pub fn kind(&self) -> VariableKind {
        match self {
            Domain::Categorical(_) => VariableKind::Categorical,
            Domain::Ordinal(_) => VariableKind::Ordinal,
            Domain::Continuous(_) => VariableKind::Continuous,
            Domain::Set { .. } => VariableKind::Set,
        }
    }
}

/// Which probabilistic learner backs a fitted mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    /// Smoothed conditional frequency table keyed by the exact parent
    /// configuration. Requires all parents categorical/ordinal.
    Cpt,
    /// Naive-Bayes over the one-hot feature encoding. Used whenever a
    /// parent is set-valued, where configuration tables explode.
    NaiveBayes,
    /// k-nearest-neighbour regression (continuous children only).
    Knn,
}

/// Per-variable learner options, settable inline in the graph document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MechanismOptions {
    /// Learner override; `None` dispatches on parent kinds.
    pub learner: Option<LearnerKind>,
    /// Laplace pseudo-count for categorical and set-inclusion estimators.
    pub epsilon: f64,
    /// Neighbour count for the kNN regressor.
    pub k: usize,
}

impl Default for MechanismOptions {
    fn default() -> Self {
        MechanismOptions {
            learner: None,
            epsilon: 1.0,
            k: 5,
        }
    }
}

impl MechanismOptions {
    fn is_default(&self) -> bool {
        *self == MechanismOptions::default()
    }
}

/// One typed variable of a causal graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub domain: Domain,
    pub mechanism: MechanismOptions,
}

impl VariableSpec {
    pub fn kind(&self) -> VariableKind {
        self.domain.kind()
    }
}

/// A tilt attachment: shifts the conditional of a binary `target` given
/// `group_variable`, with one tilt strength per group value. Group values
/// missing from `alpha_by_group` default to 0 (no shift).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltSpec {
    pub target: String,
    pub group_variable: String,
    pub boosted_value: String,
    #[serde(default)]
    pub alpha_by_group: BTreeMap<String, f64>,
}

impl TiltSpec {
    /// Tilt strength for a group value; absent entries mean no shift.
    pub fn alpha_for(&self, group_value: &str) -> f64 {
        self.alpha_by_group.get(group_value).copied().unwrap_or(0.0)
    }

    /// The same spec with different strengths, for sweeping one fitted model
    /// over a tilt grid.
    pub fn with_alphas(&self, alpha_by_group: BTreeMap<String, f64>) -> TiltSpec {
        TiltSpec {
            alpha_by_group,
            ..self.clone()
        }
    }
}

/// A validated-on-demand causal graph: variables, directed edges, tilts.
/// The serde derives serve internal formats (model files, manifests); the
/// graph *document* format goes through [`CausalGraphSpec::parse`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalGraphSpec {
    pub variables: Vec<VariableSpec>,
    /// Directed edges as `(parent, child)` pairs, in declaration order.
    pub edges: Vec<(String, String)>,
    pub tilts: Vec<TiltSpec>,
}

impl CausalGraphSpec {
    /// Parse a graph configuration document. Unknown keys, unknown variable
    /// kinds and malformed domains are rejected; syntax errors report the
    /// `line:column` position.
    pub fn parse(text: &str) -> Result<CausalGraphSpec> {
        let raw: RawGraph = serde_json::from_str(text).map_err(|e| {
            if e.is_syntax() || e.is_eof() {
                Error::ConfigSyntax {
                    message: e.to_string(),
                    location: Some((e.line(), e.column())),
                }
            } else {
                Error::Config(e.to_string())
            }
        })?;
        raw.try_into()
    }

    /// Serialise back to the document format. `parse(serialize(g)) == g`.
    pub fn to_json_pretty(&self) -> String {
        let raw = RawGraph::from(self);
        serde_json::to_string_pretty(&raw).expect("graph serialisation cannot fail")
    }

    pub fn variable(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Parent names of `child`, in edge declaration order.
    pub fn parents_of(&self, child: &str) -> Vec<String> {
        self.edges
            .iter()
            .filter(|(_, c)| c == child)
            .map(|(p, _)| p.clone())
            .collect()
    }

    /// Check every structural invariant. Returns one message per violation;
    /// an empty list means the graph is valid.
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let mut seen = BTreeSet::new();
        for v in &self.variables {
            if !seen.insert(v.name.as_str()) {
                issues.push(format!("duplicate variable `{}`", v.name));
            }
            match &v.domain {
                Domain::Categorical(vals) => {
                    if vals.is_empty() {
                        issues.push(format!("variable `{}`: empty categorical domain", v.name));
                    }
                    if has_duplicates(vals.iter()) {
                        issues.push(format!("variable `{}`: duplicate domain values", v.name));
                    }
                }
                Domain::Ordinal(levels) => {
                    if levels.is_empty() {
                        issues.push(format!("variable `{}`: empty ordinal domain", v.name));
                    }
                    if has_duplicates(levels.iter()) {
                        issues.push(format!("variable `{}`: duplicate domain values", v.name));
                    }
                }
                Domain::Continuous(Some((lo, hi))) if lo > hi => {
                    issues.push(format!("variable `{}`: range min > max", v.name));
                }
                Domain::Continuous(_) => {}
                Domain::Set {
                    vocabulary,
                    n_min,
                    n_max,
                } => {
                    if vocabulary.is_empty() {
                        issues.push(format!("variable `{}`: empty vocabulary", v.name));
                    }
                    if has_duplicates(vocabulary.iter()) {
                        issues.push(format!("variable `{}`: duplicate vocabulary items", v.name));
                    }
                    if *n_min < 1 || n_min > n_max || *n_max > vocabulary.len() {
                        issues.push(format!(
                            "variable `{}`: set bounds must satisfy 1 <= n_min <= n_max <= |vocabulary| \
                             (got n_min={n_min}, n_max={n_max}, |vocabulary|={})",
                            v.name,
                            vocabulary.len()
                        ));
                    }
                }
            }
        }

        let declared: BTreeSet<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
        let mut seen_edges = BTreeSet::new();
        for (parent, child) in &self.edges {
            for endpoint in [parent, child] {
                if !declared.contains(endpoint.as_str()) {
                    issues.push(format!(
                        "unknown variable `{endpoint}` in edge {parent}->{child}"
                    ));
                }
            }
            if parent == child {
                issues.push(format!("self-edge on `{parent}`"));
            }
            if !seen_edges.insert((parent.as_str(), child.as_str())) {
                issues.push(format!("duplicate edge {parent}->{child}"));
            }
        }

        // Cycle check only makes sense once the endpoints resolve.
        if issues.is_empty() && self.kahn_order().is_none() {
            issues.push("graph contains a cycle".to_string());
        }

        for t in &self.tilts {
            match self.variable(&t.target) {
                None => issues.push(format!("tilt target `{}` not declared", t.target)),
                Some(v) => {
                    let domain_ok = match &v.domain {
                        Domain::Categorical(vals) => {
                            vals.len() == 2 && vals.contains(&t.boosted_value)
                        }
                        _ => false,
                    };
                    if !domain_ok {
                        issues.push(format!(
                            "tilt target `{}` must be categorical with exactly 2 values \
                             including `{}`",
                            t.target, t.boosted_value
                        ));
                    }
                }
            }
            match self.variable(&t.group_variable) {
                None => issues.push(format!("tilt group `{}` not declared", t.group_variable)),
                Some(v) => {
                    if let Domain::Categorical(vals) = &v.domain {
                        for g in t.alpha_by_group.keys() {
                            if !vals.contains(g) {
                                issues.push(format!(
                                    "tilt on `{}`: alpha key `{g}` not in `{}` domain",
                                    t.target, t.group_variable
                                ));
                            }
                        }
                    } else {
                        issues.push(format!(
                            "tilt group `{}` must be categorical",
                            t.group_variable
                        ));
                    }
                }
            }
        }

        issues
    }

    /// Validate and wrap violations into an error.
    pub fn ensure_valid(&self) -> Result<()> {
        let issues = self.validate();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGraph(issues))
        }
    }

    /// Topological order of the variables. Every parent precedes every
    /// child; ties are broken by declaration order, so the order (and hence
    /// ancestral sampling under a fixed seed) is deterministic.
    pub fn topological_order(&self) -> Result<Vec<String>> {
        self.ensure_valid()?;
        Ok(self.kahn_order().expect("validated graph is acyclic"))
    }

    fn kahn_order(&self) -> Option<Vec<String>> {
        let index: BTreeMap<&str, usize> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect();
        let n = self.variables.len();
        let mut in_degree = vec![0usize; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (parent, child) in &self.edges {
            let (p, c) = (index[parent.as_str()], index[child.as_str()]);
            in_degree[c] += 1;
            children[p].push(c);
        }
        let mut order = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        for _ in 0..n {
            let next = (0..n).find(|&i| !placed[i] && in_degree[i] == 0)?;
            placed[next] = true;
            order.push(self.variables[next].name.clone());
            for &c in &children[next] {
                in_degree[c] -= 1;
            }
        }
        Some(order)
    }
}

fn has_duplicates<T: Ord>(items: impl Iterator<Item = T>) -> bool {
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert(item) {
            return true;
        }
    }
    false
}

// --- document (de)serialisation -------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    variables: Vec<RawVariable>,
    #[serde(default)]
    edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    tilts: Vec<TiltSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariable {
    name: String,
    kind: VariableKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vocabulary: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_min: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "MechanismOptions::is_default")]
    mechanism: MechanismOptions,
}

impl TryFrom<RawGraph> for CausalGraphSpec {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<CausalGraphSpec> {
        let variables = raw
            .variables
            .into_iter()
            .map(raw_variable_into_spec)
            .collect::<Result<Vec<_>>>()?;
        Ok(CausalGraphSpec {
            variables,
            edges: raw.edges,
            tilts: raw.tilts,
        })
    }
}

fn raw_variable_into_spec(raw: RawVariable) -> Result<VariableSpec> {
    let name = raw.name;
    let reject = |field: &str| -> Result<()> {
        Err(Error::Config(format!(
            "variable `{name}`: `{field}` not allowed for kind {:?}",
            raw.kind
        )))
    };
    let domain = match raw.kind {
        VariableKind::Categorical | VariableKind::Ordinal => {
            if raw.range.is_some() {
                reject("range")?;
            }
            if raw.vocabulary.is_some() {
                reject("vocabulary")?;
            }
            if raw.n_min.is_some() || raw.n_max.is_some() {
                reject("n_min/n_max")?;
            }
            let values = raw
                .domain
                .ok_or_else(|| Error::Config(format!("variable `{name}`: missing `domain`")))?;
            if raw.kind == VariableKind::Categorical {
                let vals: Vec<String> = serde_json::from_value(values).map_err(|e| {
                    Error::Config(format!("variable `{name}`: bad categorical domain: {e}"))
                })?;
                Domain::Categorical(vals)
            } else {
                let levels: Vec<i64> = serde_json::from_value(values).map_err(|e| {
                    Error::Config(format!("variable `{name}`: bad ordinal domain: {e}"))
                })?;
                Domain::Ordinal(levels)
            }
        }
        VariableKind::Continuous => {
            if raw.domain.is_some() || raw.vocabulary.is_some() {
                reject("domain/vocabulary")?;
            }
            if raw.n_min.is_some() || raw.n_max.is_some() {
                reject("n_min/n_max")?;
            }
            Domain::Continuous(raw.range)
        }
        VariableKind::Set => {
            if raw.domain.is_some() || raw.range.is_some() {
                reject("domain/range")?;
            }
            let vocabulary = raw
                .vocabulary
                .ok_or_else(|| Error::Config(format!("variable `{name}`: missing `vocabulary`")))?;
            let (n_min, n_max) = match (raw.n_min, raw.n_max) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::Config(format!(
                        "variable `{name}`: set kind requires `n_min` and `n_max`"
                    )));
                }
            };
            Domain::Set {
                vocabulary,
                n_min,
                n_max,
            }
        }
    };
    Ok(VariableSpec {
        name,
        domain,
        mechanism: raw.mechanism,
    })
}

impl From<&CausalGraphSpec> for RawGraph {
    fn from(spec: &CausalGraphSpec) -> RawGraph {
        let variables = spec
            .variables
            .iter()
            .map(|v| {
                let mut raw = RawVariable {
                    name: v.name.clone(),
                    kind: v.kind(),
                    domain: None,
                    range: None,
                    vocabulary: None,
                    n_min: None,
                    n_max: None,
                    mechanism: v.mechanism.clone(),
                };
                match &v.domain {
                    Domain::Categorical(vals) => {
                        raw.domain = Some(serde_json::json!(vals));
                    }
                    Domain::Ordinal(levels) => {
                        raw.domain = Some(serde_json::json!(levels));
                    }
                    Domain::Continuous(range) => {
                        raw.range = *range;
                    }
                    Domain::Set {
                        vocabulary,
                        n_min,
                        n_max,
                    } => {
                        raw.vocabulary = Some(vocabulary.clone());
                        raw.n_min = Some(*n_min);
                        raw.n_max = Some(*n_max);
                    }
                }
                raw
            })
            .collect();
        RawGraph {
            variables,
            edges: spec.edges.clone(),
            tilts: spec.tilts.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_var_doc() -> &'static str {
        r#"{
            "variables": [
                {"name": "gender", "kind": "categorical", "domain": ["male", "not_male"]},
                {"name": "working_hours", "kind": "categorical", "domain": ["full_time", "part_time"]}
            ],
            "edges": [["gender", "working_hours"]]
        }"#
    }

    fn chain(names: &[&str]) -> CausalGraphSpec {
        let variables = names
            .iter()
            .map(|n| VariableSpec {
                name: n.to_string(),
                domain: Domain::Categorical(vec!["x".into(), "y".into()]),
                mechanism: MechanismOptions::default(),
            })
            .collect();
        let edges = names
            .windows(2)
            .map(|w| (w[0].to_string(), w[1].to_string()))
            .collect();
        CausalGraphSpec {
            variables,
            edges,
            tilts: vec![],
        }
    }

    #[test]
    fn parse_two_variable_document() {
        let spec = CausalGraphSpec::parse(two_var_doc()).unwrap();
        assert_eq!(spec.variables.len(), 2);
        assert_eq!(spec.edges.len(), 1);
        assert_eq!(spec.edges[0], ("gender".into(), "working_hours".into()));
    }

    #[test]
    fn edge_to_undeclared_variable_fails_validation() {
        let mut spec = CausalGraphSpec::parse(two_var_doc()).unwrap();
        spec.edges.push(("gender".into(), "salary".into()));
        let issues = spec.validate();
        assert!(
            issues
                .iter()
                .any(|m| m.contains("unknown variable `salary`"))
        );
    }

    #[test]
    fn default_curriculum_graph_matches_shipped_document() {
        let spec = CausalGraphSpec::parse(crate::DEFAULT_CURRICULUM_GRAPH).unwrap();
        spec.ensure_valid().unwrap();
        let names: Vec<&str> = spec.variables.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "job_sector",
                "education",
                "gender",
                "working_hours",
                "age",
                "experience",
                "skills"
            ]
        );
        let edges: BTreeSet<(String, String)> = spec.edges.iter().cloned().collect();
        let expected: BTreeSet<(String, String)> = [
            ("education", "skills"),
            ("experience", "skills"),
            ("job_sector", "skills"),
            ("age", "experience"),
            ("gender", "working_hours"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        assert_eq!(edges, expected);
    }

    #[test]
    fn default_job_offer_graph_parses_and_validates() {
        let spec = CausalGraphSpec::parse(crate::DEFAULT_JOB_OFFER_GRAPH).unwrap();
        spec.ensure_valid().unwrap();
        let edges: BTreeSet<(String, String)> = spec.edges.iter().cloned().collect();
        let expected: BTreeSet<(String, String)> = [
            ("occupation", "skills"),
            ("skills", "education"),
            ("skills", "experience"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        assert_eq!(edges, expected);
    }

    #[test]
    fn unknown_key_rejected() {
        let doc = r#"{"variables": [], "edges": [], "frobnicate": 1}"#;
        assert!(CausalGraphSpec::parse(doc).is_err());
    }

    #[test]
    fn unknown_kind_rejected() {
        let doc = r#"{"variables": [{"name": "x", "kind": "gaussian", "domain": ["a"]}]}"#;
        let err = CausalGraphSpec::parse(doc).unwrap_err();
        assert!(err.to_string().contains("unknown variant"), "{err}");
    }

    #[test]
    fn set_without_bounds_rejected() {
        let doc = r#"{"variables": [{"name": "s", "kind": "set", "vocabulary": ["a", "b"]}]}"#;
        let err = CausalGraphSpec::parse(doc).unwrap_err();
        assert!(err.to_string().contains("n_min"), "{err}");
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = CausalGraphSpec::parse("{\n  \"variables\": [,]\n}").unwrap_err();
        match err {
            Error::ConfigSyntax { location, .. } => assert_eq!(location.map(|l| l.0), Some(2)),
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn validate_chain_ok() {
        assert!(chain(&["A", "B", "C"]).validate().is_empty());
    }

    #[test]
    fn validate_detects_cycle() {
        let mut spec = chain(&["A", "B"]);
        spec.edges.push(("B".into(), "A".into()));
        let issues = spec.validate();
        assert!(issues.iter().any(|m| m.contains("cycle")));
    }

    #[test]
    fn validate_detects_self_edge() {
        let mut spec = chain(&["A"]);
        spec.edges.push(("A".into(), "A".into()));
        let issues = spec.validate();
        assert!(issues.iter().any(|m| m.contains("self-edge")));
    }

    #[test]
    fn topological_order_chain() {
        let order = chain(&["A", "B", "C"]).topological_order().unwrap();
        assert_eq!(order, vec!["A", "B", "C"]);
    }

    #[test]
    fn topological_order_diamond_breaks_ties_by_declaration() {
        let mut spec = chain(&["A", "B", "C", "D"]);
        spec.edges = vec![
            ("A".into(), "B".into()),
            ("A".into(), "C".into()),
            ("B".into(), "D".into()),
            ("C".into(), "D".into()),
        ];
        assert_eq!(spec.topological_order().unwrap(), vec!["A", "B", "C", "D"]);
    }

    #[test]
    fn topological_order_default_curriculum() {
        let spec = CausalGraphSpec::parse(crate::DEFAULT_CURRICULUM_GRAPH).unwrap();
        let order = spec.topological_order().unwrap();
        let pos = |n: &str| order.iter().position(|x| x == n).unwrap();
        for ancestor in ["job_sector", "gender", "age", "education"] {
            assert!(pos(ancestor) < pos("experience") || ancestor == "education");
            assert!(pos(ancestor) < pos("skills"));
        }
        assert!(pos("age") < pos("experience"));
        assert!(pos("experience") < pos("skills"));
        // Independent check: every edge goes forward in the order.
        for (parent, child) in &spec.edges {
            assert!(pos(parent) < pos(child), "{parent}->{child} out of order");
        }
    }

    #[test]
    fn topological_order_rejects_invalid_spec() {
        let mut spec = chain(&["A", "B"]);
        spec.edges.push(("B".into(), "A".into()));
        assert!(spec.topological_order().is_err());
    }

    #[test]
    fn round_trip_preserves_spec() {
        for doc in [
            crate::DEFAULT_CURRICULUM_GRAPH,
            crate::DEFAULT_JOB_OFFER_GRAPH,
        ] {
            let spec = CausalGraphSpec::parse(doc).unwrap();
            let back = CausalGraphSpec::parse(&spec.to_json_pretty()).unwrap();
            assert_eq!(spec, back);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Random DAG: order nodes, then add only forward edges.
        fn arb_dag() -> impl Strategy<Value = CausalGraphSpec> {
            (2usize..8).prop_flat_map(|n| {
                let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
                let pairs: Vec<(usize, usize)> = (0..n)
                    .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                    .collect();
                proptest::sample::subsequence(pairs.clone(), 0..=pairs.len()).prop_map(
                    move |chosen| {
                        let mut spec = chain(&names.iter().map(String::as_str).collect::<Vec<_>>());
                        spec.edges = chosen
                            .into_iter()
                            .map(|(i, j)| (names[i].clone(), names[j].clone()))
                            .collect();
                        spec
                    },
                )
            })
        }

        proptest! {
            #[test]
            fn forward_edge_dags_always_validate(spec in arb_dag()) {
                prop_assert!(spec.validate().is_empty());
            }

            #[test]
            fn backward_edge_always_fails(spec in arb_dag(), a in 0usize..8, b in 0usize..8) {
                let n = spec.variables.len();
                let (a, b) = (a % n, b % n);
                prop_assume!(a != b);
                let (hi, lo) = (a.max(b), a.min(b));
                let mut broken = spec.clone();
                let back = (broken.variables[hi].name.clone(), broken.variables[lo].name.clone());
                prop_assume!(!broken.edges.contains(&back));
                // Ensure a forward path lo -> hi exists so the back edge closes a cycle.
                broken.edges.push((broken.variables[lo].name.clone(), broken.variables[hi].name.clone()));
                broken.edges.dedup();
                broken.edges.push(back);
                prop_assert!(!broken.validate().is_empty());
            }

            #[test]
            fn topological_order_is_edge_respecting_permutation(spec in arb_dag()) {
                let order = spec.topological_order().unwrap();
                let mut sorted = order.clone();
                sorted.sort();
                let mut names: Vec<String> = spec.variables.iter().map(|v| v.name.clone()).collect();
                names.sort();
                prop_assert_eq!(sorted, names);
                let pos = |n: &str| order.iter().position(|x| x == n).unwrap();
                for (p, c) in &spec.edges {
                    prop_assert!(pos(p) < pos(c));
                }
            }
        }
    }
}
