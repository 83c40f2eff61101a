//! Concrete job-offer and curriculum schemas, and the matching functions
//! that turn an (offer, candidate) pair into a fitness vector.
//!
//! Matching is deliberately blunt, mirroring screening practice: education
//! passes at-or-above the required EQF level, experience must fall inside
//! the offer's inclusive interval, skills score the fraction of required
//! skills the candidate holds (exact label match), and working hours must
//! agree. All components live in `[0, 1]`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Schema, Value};
use crate::error::{Error, Result};
use crate::graph::Domain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkingHours {
    FullTime,
    PartTime,
}

impl WorkingHours {
    pub fn label(self) -> &'static str {
        match self {
            WorkingHours::FullTime => "full_time",
            WorkingHours::PartTime => "part_time",
        }
    }

    pub fn from_label(label: &str) -> Result<WorkingHours> {
        match label {
            "full_time" => Ok(WorkingHours::FullTime),
            "part_time" => Ok(WorkingHours::PartTime),
            other => Err(Error::MalformedField {
                field: other.to_string(),
                message: "expected full_time or part_time".into(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    NotMale,
}

impl Gender {
    /// `not_male` is the protected group.
    pub fn is_protected(self) -> bool {
        self == Gender::NotMale
    }

    pub fn label(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::NotMale => "not_male",
        }
    }

    pub fn from_label(label: &str) -> Result<Gender> {
        match label {
            "male" => Ok(Gender::Male),
            "not_male" => Ok(Gender::NotMale),
            other => Err(Error::MalformedField {
                field: other.to_string(),
                message: "expected male or not_male".into(),
            }),
        }
    }
}

/// A generated or ingested job offer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobOffer {
    pub occupation: String,
    pub working_hours: WorkingHours,
    /// Minimum required EQF level, 1..=8.
    pub education_eqf: u8,
    /// Inclusive interval of required experience years.
    pub experience_range: (u32, u32),
    pub skills: BTreeSet<String>,
}

impl JobOffer {
    pub fn new(
        occupation: impl Into<String>,
        working_hours: WorkingHours,
        education_eqf: u8,
        experience_range: (u32, u32),
        skills: BTreeSet<String>,
    ) -> Result<JobOffer> {
        check_eqf(education_eqf)?;
        if experience_range.0 > experience_range.1 {
            return Err(Error::MalformedField {
                field: format!("{}-{}", experience_range.0, experience_range.1),
                message: "experience interval has min > max".into(),
            });
        }
        if skills.is_empty() {
            return Err(Error::MalformedField {
                field: "skills".into(),
                message: "job offers require a non-empty skill set".into(),
            });
        }
        Ok(JobOffer {
            occupation: occupation.into(),
            working_hours,
            education_eqf,
            experience_range,
            skills,
        })
    }
}

/// A generated or ingested candidate profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub job_sector: String,
    pub education_eqf: u8,
    pub gender: Gender,
    pub working_hours: WorkingHours,
    pub age: u32,
    pub experience: u32,
    pub skills: BTreeSet<String>,
}

impl Curriculum {
    pub fn is_protected(&self) -> bool {
        self.gender.is_protected()
    }
}

fn check_eqf(level: u8) -> Result<()> {
    if (1..=8).contains(&level) {
        Ok(())
    } else {
        Err(Error::MalformedField {
            field: level.to_string(),
            message: "EQF level must be in 1..=8".into(),
        })
    }
}

/// Per-requirement compatibility of one candidate with one offer, ordered
/// (education, experience, skills, working hours); each component in [0,1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessVector {
    pub education: f64,
    pub experience: f64,
    pub skills: f64,
    pub working_hours: f64,
}

impl FitnessVector {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.education,
            self.experience,
            self.skills,
            self.working_hours,
        ]
    }
}

/// Compute the four matching functions for an (offer, candidate) pair.
pub fn fitness_vector(job: &JobOffer, cv: &Curriculum) -> FitnessVector {
    debug_assert!(!job.skills.is_empty(), "JobOffer::new guarantees skills");
    let education = f64::from(cv.education_eqf >= job.education_eqf);
    let (lo, hi) = job.experience_range;
    let experience = f64::from(cv.experience >= lo && cv.experience <= hi);
    let held = job.skills.intersection(&cv.skills).count();
    let skills = held as f64 / job.skills.len() as f64;
    let working_hours = f64::from(cv.working_hours == job.working_hours);
    FitnessVector {
        education,
        experience,
        skills,
        working_hours,
    }
}

/// Parse an experience interval label of the form `MIN-MAX` (e.g. `1-2`).
pub fn parse_experience_interval(label: &str) -> Result<(u32, u32)> {
    let parts: Vec<&str> = label.split('-').map(str::trim).collect();
    let bad = |msg: &str| Error::MalformedField {
        field: label.to_string(),
        message: msg.into(),
    };
    if parts.len() != 2 {
        return Err(bad("expected MIN-MAX"));
    }
    let lo: u32 = parts[0].parse().map_err(|_| bad("MIN is not an integer"))?;
    let hi: u32 = parts[1].parse().map_err(|_| bad("MAX is not an integer"))?;
    if lo > hi {
        return Err(bad("interval has min > max"));
    }
    Ok((lo, hi))
}

fn field<'a>(schema: &Schema, row: &'a [Value], name: &str) -> Result<(&'a Value, Domain)> {
    let ix = schema
        .index_of(name)
        .ok_or_else(|| Error::SchemaMismatch(format!("missing field `{name}`")))?;
    Ok((&row[ix], schema.variables[ix].domain.clone()))
}

fn cat_label(schema: &Schema, row: &[Value], name: &str) -> Result<String> {
    match field(schema, row, name)? {
        (Value::Categorical(ix), Domain::Categorical(vals)) => Ok(vals[*ix as usize].clone()),
        _ => Err(Error::SchemaMismatch(format!(
            "field `{name}` is not categorical"
        ))),
    }
}

fn ordinal_value(schema: &Schema, row: &[Value], name: &str) -> Result<i64> {
    match field(schema, row, name)? {
        (Value::Ordinal(v), _) => Ok(*v),
        _ => Err(Error::SchemaMismatch(format!(
            "field `{name}` is not ordinal"
        ))),
    }
}

fn skill_labels(schema: &Schema, row: &[Value], name: &str) -> Result<BTreeSet<String>> {
    match field(schema, row, name)? {
        (Value::Set(items), Domain::Set { vocabulary, .. }) => Ok(items
            .iter()
            .map(|&i| vocabulary[i as usize].clone())
            .collect()),
        _ => Err(Error::SchemaMismatch(format!(
            "field `{name}` is not a set"
        ))),
    }
}

fn eqf_from(schema: &Schema, row: &[Value], name: &str) -> Result<u8> {
    let v = ordinal_value(schema, row, name)?;
    let level = u8::try_from(v).map_err(|_| Error::MalformedField {
        field: v.to_string(),
        message: "EQF level must be in 1..=8".into(),
    })?;
    check_eqf(level)?;
    Ok(level)
}

/// Lossless mapping from a job-graph record to a [`JobOffer`].
pub fn record_to_job(schema: &Schema, row: &[Value]) -> Result<JobOffer> {
    let occupation = cat_label(schema, row, "occupation")?;
    let working_hours = WorkingHours::from_label(&cat_label(schema, row, "working_hours")?)?;
    let education_eqf = eqf_from(schema, row, "education")?;
    let experience_range = parse_experience_interval(&cat_label(schema, row, "experience")?)?;
    let skills = skill_labels(schema, row, "skills")?;
    JobOffer::new(
        occupation,
        working_hours,
        education_eqf,
        experience_range,
        skills,
    )
}

/// Lossless mapping from a curriculum-graph record to a [`Curriculum`].
pub fn record_to_cv(schema: &Schema, row: &[Value]) -> Result<Curriculum> {
    let job_sector = cat_label(schema, row, "job_sector")?;
    let education_eqf = eqf_from(schema, row, "education")?;
    let gender = Gender::from_label(&cat_label(schema, row, "gender")?)?;
    let working_hours = WorkingHours::from_label(&cat_label(schema, row, "working_hours")?)?;
    let age =
        u32::try_from(ordinal_value(schema, row, "age")?).map_err(|_| Error::MalformedField {
            field: "age".into(),
            message: "age must be non-negative".into(),
        })?;
    let experience = u32::try_from(ordinal_value(schema, row, "experience")?).map_err(|_| {
        Error::MalformedField {
            field: "experience".into(),
            message: "experience must be non-negative".into(),
        }
    })?;
    let skills = skill_labels(schema, row, "skills")?;
    Ok(Curriculum {
        job_sector,
        education_eqf,
        gender,
        working_hours,
        age,
        experience,
        skills,
    })
}

fn cat_value(schema: &Schema, name: &str, label: &str) -> Result<Value> {
    match &schema
        .variable(name)
        .ok_or_else(|| Error::SchemaMismatch(format!("missing field `{name}`")))?
        .domain
    {
        Domain::Categorical(vals) => vals
            .iter()
            .position(|v| v == label)
            .map(|ix| Value::Categorical(ix as u32))
            .ok_or_else(|| Error::OutOfDomain {
                variable: name.to_string(),
                value: label.to_string(),
                line: None,
            }),
        _ => Err(Error::SchemaMismatch(format!(
            "field `{name}` is not categorical"
        ))),
    }
}

fn set_value(schema: &Schema, name: &str, labels: &BTreeSet<String>) -> Result<Value> {
    match &schema
        .variable(name)
        .ok_or_else(|| Error::SchemaMismatch(format!("missing field `{name}`")))?
        .domain
    {
        Domain::Set { vocabulary, .. } => {
            let mut items = Vec::with_capacity(labels.len());
            for label in labels {
                let ix = vocabulary.iter().position(|v| v == label).ok_or_else(|| {
                    Error::OutOfDomain {
                        variable: name.to_string(),
                        value: label.clone(),
                        line: None,
                    }
                })? as u16;
                items.push(ix);
            }
            items.sort_unstable();
            Ok(Value::Set(items))
        }
        _ => Err(Error::SchemaMismatch(format!(
            "field `{name}` is not a set"
        ))),
    }
}

/// Inverse of [`record_to_job`]; `record_to_job ∘ job_to_record` is the
/// identity for schema-compatible offers.
pub fn job_to_record(job: &JobOffer, schema: &Schema) -> Result<Vec<Value>> {
    let mut row = Vec::with_capacity(schema.variables.len());
    for var in &schema.variables {
        let value = match var.name.as_str() {
            "occupation" => cat_value(schema, "occupation", &job.occupation)?,
            "working_hours" => cat_value(schema, "working_hours", job.working_hours.label())?,
            "education" => Value::Ordinal(i64::from(job.education_eqf)),
            "experience" => cat_value(
                schema,
                "experience",
                &format!("{}-{}", job.experience_range.0, job.experience_range.1),
            )?,
            "skills" => set_value(schema, "skills", &job.skills)?,
            other => {
                return Err(Error::SchemaMismatch(format!(
                    "unexpected job field `{other}`"
                )));
            }
        };
        row.push(value);
    }
    Ok(row)
}

/// Inverse of [`record_to_cv`].
pub fn cv_to_record(cv: &Curriculum, schema: &Schema) -> Result<Vec<Value>> {
    let mut row = Vec::with_capacity(schema.variables.len());
    for var in &schema.variables {
        let value = match var.name.as_str() {
            "job_sector" => cat_value(schema, "job_sector", &cv.job_sector)?,
            "education" => Value::Ordinal(i64::from(cv.education_eqf)),
            "gender" => cat_value(schema, "gender", cv.gender.label())?,
            "working_hours" => cat_value(schema, "working_hours", cv.working_hours.label())?,
            "age" => Value::Ordinal(i64::from(cv.age)),
            "experience" => Value::Ordinal(i64::from(cv.experience)),
            "skills" => set_value(schema, "skills", &cv.skills)?,
            other => {
                return Err(Error::SchemaMismatch(format!(
                    "unexpected curriculum field `{other}`"
                )));
            }
        };
        row.push(value);
    }
    Ok(row)
}

/// Decode a whole dataset of job offers.
pub fn jobs_from_dataset(dataset: &Dataset) -> Result<Vec<JobOffer>> {
    dataset
        .rows()
        .iter()
        .map(|row| record_to_job(dataset.schema(), row))
        .collect()
}

/// Decode a whole dataset of curricula.
pub fn cvs_from_dataset(dataset: &Dataset) -> Result<Vec<Curriculum>> {
    dataset
        .rows()
        .iter()
        .map(|row| record_to_cv(dataset.schema(), row))
        .collect()
}
