//! Datasets, CSV ingestion and persistence, and the bundled reference seed
//! corpus.
//!
//! Cells hold interned values: categorical cells index into the variable's
//! declared domain and set cells hold sorted vocabulary indices. CSV is the
//! boundary format — labels out, labels in — with set cells `;`-joined in
//! lexicographic label order so files diff deterministically.
//!
//! The seed corpus substitutes for the unavailable source datasets: every
//! documented rate defaults to a reported value (gender split, working-hours
//! conditionals, the full-time share of offers) and everything undocumented
//! is pinned in `configs/seed_corpus.json` so generated corpora are
//! reproducible and auditable.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use rand::RngExt as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CausalGraphSpec, Domain, MechanismOptions, VariableSpec};
use crate::mechanisms::{sample_index, weighted_sample_without_replacement};
use crate::rng::Stream;

/// One cell of a dataset. Categorical cells index into the declared domain,
/// set cells hold sorted, de-duplicated vocabulary indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Categorical(u32),
    Ordinal(i64),
    Continuous(f64),
    Set(Vec<u16>),
}

impl Value {
    pub fn in_domain(&self, domain: &Domain) -> bool {
        match (self, domain) {
            (Value::Categorical(ix), Domain::Categorical(vals)) => (*ix as usize) < vals.len(),
            (Value::Ordinal(v), Domain::Ordinal(levels)) => levels.contains(v),
            (Value::Continuous(x), Domain::Continuous(_)) => x.is_finite(),
            (Value::Set(items), Domain::Set { vocabulary, .. }) => {
                items.windows(2).all(|w| w[0] < w[1])
                    && items.iter().all(|&i| (i as usize) < vocabulary.len())
            }
            _ => false,
        }
    }

    /// Render as a CSV cell using the domain's labels.
    pub fn render(&self, domain: &Domain) -> String {
        match (self, domain) {
            (Value::Categorical(ix), Domain::Categorical(vals)) => vals[*ix as usize].clone(),
            (Value::Ordinal(v), _) => v.to_string(),
            (Value::Continuous(x), _) => x.to_string(),
            (Value::Set(items), Domain::Set { vocabulary, .. }) => {
                let mut labels: Vec<&str> = items
                    .iter()
                    .map(|&i| vocabulary[i as usize].as_str())
                    .collect();
                labels.sort_unstable();
                labels.join(";")
            }
            _ => panic!("value does not match domain"),
        }
    }

    /// Parse a CSV cell against a domain.
    pub fn parse_cell(cell: &str, domain: &Domain) -> Result<Value> {
        match domain {
            Domain::Categorical(vals) => vals
                .iter()
                .position(|v| v == cell)
                .map(|ix| Value::Categorical(ix as u32))
                .ok_or_else(|| Error::MalformedField {
                    field: cell.to_string(),
                    message: "not in categorical domain".into(),
                }),
            Domain::Ordinal(levels) => {
                let v: i64 = cell.trim().parse().map_err(|_| Error::MalformedField {
                    field: cell.to_string(),
                    message: "not an integer".into(),
                })?;
                if levels.contains(&v) {
                    Ok(Value::Ordinal(v))
                } else {
                    Err(Error::MalformedField {
                        field: cell.to_string(),
                        message: "not an ordinal level".into(),
                    })
                }
            }
            Domain::Continuous(_) => {
                let x: f64 = cell.trim().parse().map_err(|_| Error::MalformedField {
                    field: cell.to_string(),
                    message: "not a number".into(),
                })?;
                Ok(Value::Continuous(x))
            }
            Domain::Set { vocabulary, .. } => {
                if cell.is_empty() {
                    return Ok(Value::Set(Vec::new()));
                }
                let mut items = Vec::new();
                for label in cell.split(';') {
                    let ix = vocabulary.iter().position(|v| v == label).ok_or_else(|| {
                        Error::MalformedField {
                            field: label.to_string(),
                            message: "not in vocabulary".into(),
                        }
                    })? as u16;
                    items.push(ix);
                }
                items.sort_unstable();
                let before = items.len();
                items.dedup();
                if items.len() != before {
                    return Err(Error::MalformedField {
                        field: cell.to_string(),
                        message: "duplicate items in set cell".into(),
                    });
                }
                Ok(Value::Set(items))
            }
        }
    }
}

/// Ordered variable list a dataset conforms to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub variables: Vec<VariableSpec>,
}

impl Schema {
    pub fn from_graph(graph: &CausalGraphSpec) -> Schema {
        Schema {
            variables: graph.variables.clone(),
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn variable(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }
}

/// An ordered collection of schema-conforming records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Vec<Value>>,
}

impl Dataset {
    pub fn new(schema: Schema) -> Dataset {
        Dataset {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Append a row after checking it against the schema.
    pub fn push_row(&mut self, row: Vec<Value>) -> Result<()> {
        if row.len() != self.schema.variables.len() {
            return Err(Error::SchemaMismatch(format!(
                "row has {} cells, schema has {} variables",
                row.len(),
                self.schema.variables.len()
            )));
        }
        for (value, var) in row.iter().zip(&self.schema.variables) {
            if !value.in_domain(&var.domain) {
                return Err(Error::OutOfDomain {
                    variable: var.name.clone(),
                    value: format!("{value:?}"),
                    line: None,
                });
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn value_at(&self, row: usize, variable: &str) -> Option<&Value> {
        let col = self.schema.index_of(variable)?;
        self.rows.get(row).map(|r| &r[col])
    }
}

/// A row rejected during lossy ingestion.
#[derive(Clone, Debug)]
pub struct IngestIssue {
    /// 1-based line number in the file (header is line 1).
    pub line: u64,
    pub message: String,
}

/// Ingest a CSV corpus, rejecting the whole file on the first invalid row.
/// The error carries the offending line number.
pub fn ingest_corpus(path: &Path, schema: &Schema) -> Result<Dataset> {
    let (dataset, rejected) = ingest_corpus_lossy(path, schema)?;
    if let Some(first) = rejected.first() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: first.message.clone(),
            line: Some(first.line),
        });
    }
    Ok(dataset)
}

/// Ingest a CSV corpus, collecting invalid rows instead of failing.
/// Accepted rows plus rejected rows account for every data row in the file.
pub fn ingest_corpus_lossy(path: &Path, schema: &Schema) -> Result<(Dataset, Vec<IngestIssue>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
            line: None,
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
            line: Some(1),
        })?
        .clone();
    let mut column_of = Vec::with_capacity(schema.variables.len());
    for var in &schema.variables {
        let ix = headers
            .iter()
            .position(|h| h == var.name)
            .ok_or_else(|| Error::Csv {
                path: path.to_path_buf(),
                message: format!("missing column `{}`", var.name),
                line: Some(1),
            })?;
        column_of.push(ix);
    }

    let mut dataset = Dataset::new(schema.clone());
    let mut rejected = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2; // header occupies line 1
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rejected.push(IngestIssue {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let mut row = Vec::with_capacity(schema.variables.len());
        let mut issue = None;
        for (var, &col) in schema.variables.iter().zip(&column_of) {
            let cell = record.get(col).unwrap_or("");
            match Value::parse_cell(cell, &var.domain) {
                Ok(v) => row.push(v),
                Err(e) => {
                    issue = Some(format!("column `{}`: {e}", var.name));
                    break;
                }
            }
        }
        match issue {
            Some(message) => rejected.push(IngestIssue { line, message }),
            None => dataset.push_row(row).expect("parsed cells are in-domain"),
        }
    }
    Ok((dataset, rejected))
}

/// Write a dataset as CSV. `write ∘ read` is the identity on datasets.
pub fn write_dataset(dataset: &Dataset, path: &Path, overwrite: bool) -> Result<()> {
    if path.exists() && !overwrite {
        return Err(Error::WouldOverwrite(path.to_path_buf()));
    }
    let mut out = Vec::new();
    render_dataset_csv(dataset, &mut out);
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Render a dataset to CSV bytes (used by both file output and the report
/// writer; kept allocation-based so outputs can be compared byte-for-byte).
pub fn render_dataset_csv(dataset: &Dataset, out: &mut Vec<u8>) {
    let mut writer = csv::Writer::from_writer(out);
    let header: Vec<&str> = dataset
        .schema()
        .variables
        .iter()
        .map(|v| v.name.as_str())
        .collect();
    writer.write_record(&header).expect("in-memory write");
    for row in dataset.rows() {
        let cells: Vec<String> = row
            .iter()
            .zip(&dataset.schema().variables)
            .map(|(value, var)| value.render(&var.domain))
            .collect();
        writer.write_record(&cells).expect("in-memory write");
    }
    writer.flush().expect("in-memory flush");
}

// --- seed corpus ------------------------------------------------------------

/// A sector of the reference universe: its occupations, its core skills and
/// the ground-truth conditionals of the job offers it posts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorParams {
    pub name: String,
    pub weight: f64,
    pub occupations: Vec<String>,
    pub core_skills: Vec<String>,
    /// P(required EQF level | sector), keys are levels.
    pub job_education: BTreeMap<String, f64>,
    /// P(required experience interval | sector), keys are `MIN-MAX` labels.
    pub job_experience: BTreeMap<String, f64>,
}

/// Inclusion weights used when drawing skill sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkillInclusion {
    pub core: f64,
    pub general: f64,
    pub other: f64,
}

/// Ground-truth parameters of the reference seed corpus. All documented
/// rates are recoverable from generated output by counting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedCorpusParams {
    pub seed: u64,
    pub n_jobs: usize,
    pub n_cvs: usize,
    /// Share of `not_male` candidates.
    pub gender_split: f64,
    /// P(part_time | gender) among candidates.
    pub cv_part_time_by_gender: BTreeMap<String, f64>,
    /// P(full_time) among job offers.
    pub job_full_time_rate: f64,
    pub general_skills: Vec<String>,
    pub skill_inclusion: SkillInclusion,
    /// `[n_min, n_max]` for candidate skill sets.
    pub cv_skill_count: (usize, usize),
    /// `[n_min, n_max]` for job-offer skill sets.
    pub job_skill_count: (usize, usize),
    pub sectors: Vec<SectorParams>,
    /// Marginal P(EQF level) among candidates.
    pub cv_education: BTreeMap<String, f64>,
    /// Marginal P(age level) among candidates.
    pub cv_age: BTreeMap<String, f64>,
    /// P(years of experience | age level) among candidates.
    pub cv_experience_by_age: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Default for SeedCorpusParams {
    fn default() -> Self {
        serde_json::from_str(crate::DEFAULT_SEED_CORPUS_PARAMS)
            .expect("bundled seed corpus params parse")
    }
}

impl SeedCorpusParams {
    pub fn parse(text: &str) -> Result<SeedCorpusParams> {
        let params: SeedCorpusParams =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let proportion = |name: &str, p: f64| -> Result<()> {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be in [0,1], got {p}")))
            }
        };
        if self.n_jobs == 0 || self.n_cvs == 0 {
            return Err(Error::Config("n_jobs and n_cvs must be >= 1".into()));
        }
        proportion("gender_split", self.gender_split)?;
        proportion("job_full_time_rate", self.job_full_time_rate)?;
        for (g, p) in &self.cv_part_time_by_gender {
            proportion(&format!("cv_part_time_by_gender[{g}]"), *p)?;
        }
        for gender in ["male", "not_male"] {
            if !self.cv_part_time_by_gender.contains_key(gender) {
                return Err(Error::Config(format!(
                    "cv_part_time_by_gender missing `{gender}`"
                )));
            }
        }
        if self.sectors.is_empty() {
            return Err(Error::Config("at least one sector required".into()));
        }
        let weight_sum: f64 = self.sectors.iter().map(|s| s.weight).sum();
        if (weight_sum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "sector weights must sum to 1, got {weight_sum}"
            )));
        }
        let normalized = |name: &str, table: &BTreeMap<String, f64>| -> Result<()> {
            let sum: f64 = table.values().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::Config(format!("{name} must sum to 1, got {sum}")));
            }
            for p in table.values() {
                proportion(name, *p)?;
            }
            Ok(())
        };
        for s in &self.sectors {
            normalized(
                &format!("sector {} job_education", s.name),
                &s.job_education,
            )?;
            normalized(
                &format!("sector {} job_experience", s.name),
                &s.job_experience,
            )?;
            if s.occupations.is_empty() || s.core_skills.is_empty() {
                return Err(Error::Config(format!(
                    "sector {} needs occupations and core_skills",
                    s.name
                )));
            }
        }
        normalized("cv_education", &self.cv_education)?;
        normalized("cv_age", &self.cv_age)?;
        for (age, table) in &self.cv_experience_by_age {
            if !self.cv_age.contains_key(age) {
                return Err(Error::Config(format!(
                    "cv_experience_by_age has unknown age `{age}`"
                )));
            }
            normalized(&format!("cv_experience_by_age[{age}]"), table)?;
        }
        for age in self.cv_age.keys() {
            if !self.cv_experience_by_age.contains_key(age) {
                return Err(Error::Config(format!(
                    "cv_experience_by_age missing age `{age}`"
                )));
            }
        }
        let (lo, hi) = self.cv_skill_count;
        let (jlo, jhi) = self.job_skill_count;
        let vocab = self.skill_vocabulary().len();
        if lo < 1 || lo > hi || hi > vocab || jlo < 1 || jlo > jhi || jhi > vocab {
            return Err(Error::Config("skill count bounds invalid".into()));
        }
        Ok(())
    }

    /// Full skill vocabulary: sector core skills in sector order, then the
    /// general skills. This order defines vocabulary indices everywhere.
    pub fn skill_vocabulary(&self) -> Vec<String> {
        let mut vocab: Vec<String> = self
            .sectors
            .iter()
            .flat_map(|s| s.core_skills.iter().cloned())
            .collect();
        vocab.extend(self.general_skills.iter().cloned());
        vocab
    }

    pub fn occupations(&self) -> Vec<String> {
        self.sectors
            .iter()
            .flat_map(|s| s.occupations.iter().cloned())
            .collect()
    }

    fn sorted_levels(table: &BTreeMap<String, f64>) -> Result<Vec<(i64, f64)>> {
        let mut levels = Vec::with_capacity(table.len());
        for (k, &p) in table {
            let level: i64 = k
                .parse()
                .map_err(|_| Error::Config(format!("table key `{k}` is not an integer level")))?;
            levels.push((level, p));
        }
        levels.sort_by_key(|&(l, _)| l);
        Ok(levels)
    }

    /// Schema the generated curricula conform to (matches
    /// `graphs/curriculum.json` for the bundled parameters).
    pub fn curriculum_schema(&self) -> Result<Schema> {
        let ages: Vec<i64> = Self::sorted_levels(&self.cv_age)?
            .into_iter()
            .map(|(l, _)| l)
            .collect();
        let mut experience_levels: Vec<i64> = self
            .cv_experience_by_age
            .values()
            .flat_map(|t| t.keys())
            .map(|k| {
                k.parse::<i64>()
                    .map_err(|_| Error::Config(format!("bad experience key `{k}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        experience_levels.sort_unstable();
        experience_levels.dedup();
        let education_levels: Vec<i64> = Self::sorted_levels(&self.cv_education)?
            .into_iter()
            .map(|(l, _)| l)
            .collect();
        let var = |name: &str, domain: Domain| VariableSpec {
            name: name.to_string(),
            domain,
            mechanism: MechanismOptions::default(),
        };
        Ok(Schema {
            variables: vec![
                var(
                    "job_sector",
                    Domain::Categorical(self.sectors.iter().map(|s| s.name.clone()).collect()),
                ),
                var("education", Domain::Ordinal(education_levels)),
                var(
                    "gender",
                    Domain::Categorical(vec!["male".into(), "not_male".into()]),
                ),
                var(
                    "working_hours",
                    Domain::Categorical(vec!["full_time".into(), "part_time".into()]),
                ),
                var("age", Domain::Ordinal(ages)),
                var(
                    "experience",
                    Domain::Ordinal(experience_levels_dedup(self)?),
                ),
                var(
                    "skills",
                    Domain::Set {
                        vocabulary: self.skill_vocabulary(),
                        n_min: self.cv_skill_count.0,
                        n_max: self.cv_skill_count.1,
                    },
                ),
            ],
        })
    }

    /// Schema the generated job offers conform to (matches
    /// `graphs/job_offer.json` for the bundled parameters).
    pub fn job_schema(&self) -> Result<Schema> {
        let mut intervals: Vec<String> = self
            .sectors
            .iter()
            .flat_map(|s| s.job_experience.keys().cloned())
            .collect();
        intervals.sort_by_key(|label| {
            label
                .split('-')
                .next()
                .and_then(|s| s.trim().parse::<i64>().ok())
                .unwrap_or(i64::MAX)
        });
        intervals.dedup();
        let education_levels: Vec<i64> = {
            let mut levels: Vec<i64> = self
                .sectors
                .iter()
                .flat_map(|s| s.job_education.keys())
                .map(|k| k.parse::<i64>().unwrap_or(0))
                .collect();
            // Job offers share the candidate EQF scale.
            levels.extend(
                Self::sorted_levels(&self.cv_education)?
                    .into_iter()
                    .map(|(l, _)| l),
            );
            levels.sort_unstable();
            levels.dedup();
            levels
        };
        let var = |name: &str, domain: Domain| VariableSpec {
            name: name.to_string(),
            domain,
            mechanism: MechanismOptions::default(),
        };
        Ok(Schema {
            variables: vec![
                var("occupation", Domain::Categorical(self.occupations())),
                var(
                    "working_hours",
                    Domain::Categorical(vec!["full_time".into(), "part_time".into()]),
                ),
                var(
                    "skills",
                    Domain::Set {
                        vocabulary: self.skill_vocabulary(),
                        n_min: self.job_skill_count.0,
                        n_max: self.job_skill_count.1,
                    },
                ),
                var("education", Domain::Ordinal(education_levels)),
                var("experience", Domain::Categorical(intervals)),
            ],
        })
    }
}

fn experience_levels_dedup(params: &SeedCorpusParams) -> Result<Vec<i64>> {
    let mut levels: Vec<i64> = params
        .cv_experience_by_age
        .values()
        .flat_map(|t| t.keys())
        .map(|k| {
            k.parse::<i64>()
                .map_err(|_| Error::Config(format!("bad experience key `{k}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    levels.sort_unstable();
    levels.dedup();
    Ok(levels)
}

/// Generate the reference corpora: `(job offers, curricula)`.
pub fn generate_seed_corpus(params: &SeedCorpusParams) -> Result<(Dataset, Dataset)> {
    generate_seed_corpus_sized(params, params.n_jobs, params.n_cvs)
}

/// Same, with explicit sizes (the CLI exposes `--n-jobs`/`--n-cvs`).
pub fn generate_seed_corpus_sized(
    params: &SeedCorpusParams,
    n_jobs: usize,
    n_cvs: usize,
) -> Result<(Dataset, Dataset)> {
    params.validate()?;
    let vocab = params.skill_vocabulary();
    let sector_weights: Vec<f64> = params.sectors.iter().map(|s| s.weight).collect();

    // Per-sector inclusion weights over the full vocabulary.
    let inclusion_weights: Vec<Vec<f64>> = params
        .sectors
        .iter()
        .map(|s| {
            vocab
                .iter()
                .map(|skill| {
                    if s.core_skills.contains(skill) {
                        params.skill_inclusion.core
                    } else if params.general_skills.contains(skill) {
                        params.skill_inclusion.general
                    } else {
                        params.skill_inclusion.other
                    }
                })
                .collect()
        })
        .collect();

    let draw_skills = |sector: usize, bounds: (usize, usize), rng: &mut Stream| -> Vec<u16> {
        let n = if bounds.0 == bounds.1 {
            bounds.0
        } else {
            rng.random_range(bounds.0..=bounds.1)
        };
        let mut items: Vec<u16> =
            weighted_sample_without_replacement(&inclusion_weights[sector], n, rng)
                .into_iter()
                .map(|i| i as u16)
                .collect();
        items.sort_unstable();
        items
    };

    let cv_schema = params.curriculum_schema()?;
    let job_schema = params.job_schema()?;

    let age_levels = SeedCorpusParams::sorted_levels(&params.cv_age)?;
    let education_levels = SeedCorpusParams::sorted_levels(&params.cv_education)?;
    let experience_tables: BTreeMap<i64, Vec<(i64, f64)>> = params
        .cv_experience_by_age
        .iter()
        .map(|(age, table)| {
            Ok((
                age.parse::<i64>().expect("validated key"),
                SeedCorpusParams::sorted_levels(table)?,
            ))
        })
        .collect::<Result<_>>()?;

    let mut rng = crate::rng::derive_stream(params.seed, "seed-corpus", &[]);

    let mut jobs = Dataset::new(job_schema.clone());
    let job_exp_domain = match &job_schema.variable("experience").unwrap().domain {
        Domain::Categorical(vals) => vals.clone(),
        _ => unreachable!(),
    };
    for _ in 0..n_jobs {
        let sector = sample_index(&sector_weights, &mut rng);
        let occupation_in_sector = rng.random_range(0..params.sectors[sector].occupations.len());
        let occupation_ix: usize = params.sectors[..sector]
            .iter()
            .map(|s| s.occupations.len())
            .sum::<usize>()
            + occupation_in_sector;
        let full_time = rng.random_bool(params.job_full_time_rate);
        let skills = draw_skills(sector, params.job_skill_count, &mut rng);
        let edu_table = SeedCorpusParams::sorted_levels(&params.sectors[sector].job_education)?;
        let edu_probs: Vec<f64> = edu_table.iter().map(|&(_, p)| p).collect();
        let education = edu_table[sample_index(&edu_probs, &mut rng)].0;
        let exp_labels: Vec<&String> = params.sectors[sector].job_experience.keys().collect();
        let exp_probs: Vec<f64> = params.sectors[sector]
            .job_experience
            .values()
            .copied()
            .collect();
        let exp_label = exp_labels[sample_index(&exp_probs, &mut rng)];
        let exp_ix = job_exp_domain
            .iter()
            .position(|v| v == exp_label)
            .expect("interval in domain") as u32;
        jobs.push_row(vec![
            Value::Categorical(occupation_ix as u32),
            Value::Categorical(if full_time { 0 } else { 1 }),
            Value::Set(skills),
            Value::Ordinal(education),
            Value::Categorical(exp_ix),
        ])?;
    }

    let mut cvs = Dataset::new(cv_schema);
    let edu_probs: Vec<f64> = education_levels.iter().map(|&(_, p)| p).collect();
    let age_probs: Vec<f64> = age_levels.iter().map(|&(_, p)| p).collect();
    for _ in 0..n_cvs {
        let sector = sample_index(&sector_weights, &mut rng);
        let not_male = rng.random_bool(params.gender_split);
        let gender_label = if not_male { "not_male" } else { "male" };
        let education = education_levels[sample_index(&edu_probs, &mut rng)].0;
        let age = age_levels[sample_index(&age_probs, &mut rng)].0;
        let exp_table = &experience_tables[&age];
        let exp_probs: Vec<f64> = exp_table.iter().map(|&(_, p)| p).collect();
        let experience = exp_table[sample_index(&exp_probs, &mut rng)].0;
        let part = rng.random_bool(params.cv_part_time_by_gender[gender_label]);
        let skills = draw_skills(sector, params.cv_skill_count, &mut rng);
        cvs.push_row(vec![
            Value::Categorical(sector as u32),
            Value::Ordinal(education),
            Value::Categorical(if not_male { 1 } else { 0 }),
            Value::Categorical(if part { 1 } else { 0 }),
            Value::Ordinal(age),
            Value::Ordinal(experience),
            Value::Set(skills),
        ])?;
    }

    Ok((jobs, cvs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_where(dataset: &Dataset, pred: impl Fn(&[Value]) -> bool) -> usize {
        dataset.rows().iter().filter(|r| pred(r)).count()
    }

    #[test]
    fn default_params_parse_and_validate() {
        let params = SeedCorpusParams::default();
        params.validate().unwrap();
        assert_eq!(params.skill_vocabulary().len(), 36);
        assert_eq!(params.occupations().len(), 10);
    }

    #[test]
    fn schemas_match_shipped_graphs() {
        let params = SeedCorpusParams::default();
        let cv_graph = CausalGraphSpec::parse(crate::DEFAULT_CURRICULUM_GRAPH).unwrap();
        let job_graph = CausalGraphSpec::parse(crate::DEFAULT_JOB_OFFER_GRAPH).unwrap();
        let from_params = params.curriculum_schema().unwrap();
        let from_graph = Schema::from_graph(&cv_graph);
        for (a, b) in from_params.variables.iter().zip(&from_graph.variables) {
            assert_eq!(a.name, b.name);
            assert_eq!(
                a.domain, b.domain,
                "curriculum domain mismatch for {}",
                a.name
            );
        }
        let from_params = params.job_schema().unwrap();
        let from_graph = Schema::from_graph(&job_graph);
        for (a, b) in from_params.variables.iter().zip(&from_graph.variables) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.domain, b.domain, "job domain mismatch for {}", a.name);
        }
    }

    #[test]
    fn seed_corpus_recovers_documented_conditionals() {
        let mut params = SeedCorpusParams::default();
        params.n_cvs = 100_000;
        params.n_jobs = 100_000;
        let (jobs, cvs) = generate_seed_corpus(&params).unwrap();

        let gender_col = cvs.schema().index_of("gender").unwrap();
        let wh_col = cvs.schema().index_of("working_hours").unwrap();
        let males = count_where(&cvs, |r| r[gender_col] == Value::Categorical(0));
        let male_part = count_where(&cvs, |r| {
            r[gender_col] == Value::Categorical(0) && r[wh_col] == Value::Categorical(1)
        });
        let p_part_male = male_part as f64 / males as f64;
        assert!(
            (p_part_male - 0.24).abs() < 0.01,
            "P(part|male) = {p_part_male}"
        );

        let not_males = cvs.len() - males;
        let nm_part = count_where(&cvs, |r| {
            r[gender_col] == Value::Categorical(1) && r[wh_col] == Value::Categorical(1)
        });
        let p_part_nm = nm_part as f64 / not_males as f64;
        assert!(
            (p_part_nm - 0.59).abs() < 0.01,
            "P(part|not_male) = {p_part_nm}"
        );

        let jwh_col = jobs.schema().index_of("working_hours").unwrap();
        let full = count_where(&jobs, |r| r[jwh_col] == Value::Categorical(0));
        let full_rate = full as f64 / jobs.len() as f64;
        assert!(
            (full_rate - 0.866).abs() < 0.01,
            "full-time rate = {full_rate}"
        );
    }

    #[test]
    fn gender_split_one_forces_not_male() {
        let mut params = SeedCorpusParams::default();
        params.gender_split = 1.0;
        params.n_cvs = 500;
        params.n_jobs = 1;
        let (_, cvs) = generate_seed_corpus(&params).unwrap();
        let gender_col = cvs.schema().index_of("gender").unwrap();
        assert!(
            cvs.rows()
                .iter()
                .all(|r| r[gender_col] == Value::Categorical(1))
        );
    }

    #[test]
    fn round_trip_write_read_identity() {
        let mut params = SeedCorpusParams::default();
        params.n_cvs = 1000;
        params.n_jobs = 200;
        let (jobs, cvs) = generate_seed_corpus(&params).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for (dataset, name) in [(&jobs, "jobs.csv"), (&cvs, "curricula.csv")] {
            let path = dir.path().join(name);
            write_dataset(dataset, &path, false).unwrap();
            let back = ingest_corpus(&path, dataset.schema()).unwrap();
            assert_eq!(dataset, &back);
        }
    }

    #[test]
    fn overwrite_requires_flag() {
        let params = SeedCorpusParams::default();
        let schema = params.job_schema().unwrap();
        let dataset = Dataset::new(schema);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("jobs.csv");
        write_dataset(&dataset, &path, false).unwrap();
        assert!(matches!(
            write_dataset(&dataset, &path, false),
            Err(Error::WouldOverwrite(_))
        ));
        write_dataset(&dataset, &path, true).unwrap();
    }

    #[test]
    fn set_cells_serialize_lexicographically() {
        let schema = Schema {
            variables: vec![VariableSpec {
                name: "skills".into(),
                domain: Domain::Set {
                    vocabulary: vec!["zeta".into(), "alpha".into(), "mid".into()],
                    n_min: 1,
                    n_max: 3,
                },
                mechanism: MechanismOptions::default(),
            }],
        };
        let mut dataset = Dataset::new(schema);
        dataset.push_row(vec![Value::Set(vec![0, 1])]).unwrap();
        let mut out = Vec::new();
        render_dataset_csv(&dataset, &mut out);
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("alpha;zeta"), "{text}");
    }

    #[test]
    fn ingest_reports_line_numbers_for_bad_rows() {
        let params = SeedCorpusParams::default();
        let schema = params.curriculum_schema().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curricula.csv");
        let header = "job_sector,education,gender,working_hours,age,experience,skills";
        let good = "ict,6,male,full_time,27,2,php;java";
        let bad = "ict,6,man,full_time,27,2,php";
        std::fs::write(&path, format!("{header}\n{good}\n{bad}\n{good}\n")).unwrap();

        let err = ingest_corpus(&path, &schema).unwrap_err();
        match err {
            Error::Csv { line, message, .. } => {
                assert_eq!(line, Some(3));
                assert!(message.contains("gender"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }

        let (accepted, rejected) = ingest_corpus_lossy(&path, &schema).unwrap();
        assert_eq!(accepted.len() + rejected.len(), 3);
        assert_eq!(rejected.len(), 1);
        assert_eq!(rejected[0].line, 3);
    }

    #[test]
    fn ingest_header_only_file_yields_empty_dataset() {
        let params = SeedCorpusParams::default();
        let schema = params.curriculum_schema().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(
            &path,
            "job_sector,education,gender,working_hours,age,experience,skills\n",
        )
        .unwrap();
        let dataset = ingest_corpus(&path, &schema).unwrap();
        assert!(dataset.is_empty());
    }

    #[test]
    fn ingest_missing_column_fails() {
        let params = SeedCorpusParams::default();
        let schema = params.curriculum_schema().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing.csv");
        std::fs::write(&path, "job_sector,education\nict,6\n").unwrap();
        let err = ingest_corpus(&path, &schema).unwrap_err();
        assert!(err.to_string().contains("missing column"), "{err}");
    }
}
