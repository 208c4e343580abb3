//! Versioned JSON documents for facts, graphs, runs, reports and pruning.
//!
//! Every document carries a `schema` string of the form `kgstitch.<kind>/<n>`;
//! readers reject any other value. Objects are referenced by id, never by
//! index, so documents stay readable when edited by hand. Floats that may be
//! non-finite are stored as `null`.

use std::collections::BTreeMap;
use std::path::Path;

use kgstitch_core::cone::{OptimalityReport, ReferenceFit};
use kgstitch_core::diff::Tensor;
use kgstitch_core::kg::{BaseFacts, Gender, KnowledgeGraph, Person, Violation};
use kgstitch_core::prune::{PruneResult, RejectReason, ScriptedOracle};
use kgstitch_core::train::{DecoderModel, Layer, Representation, RunRecord, RunStatus};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::TrainSection;
use crate::error::{LabError, LabResult};

pub const FACTS_SCHEMA: &str = "kgstitch.facts/1";
pub const KG_SCHEMA: &str = "kgstitch.kg/1";
pub const RUN_SCHEMA: &str = "kgstitch.run/1";
pub const REPORT_SCHEMA: &str = "kgstitch.report/1";
pub const PRUNE_SCHEMA: &str = "kgstitch.prune/1";
pub const ORACLE_SCHEMA: &str = "kgstitch.oracle/1";

fn check_schema(found: &str, expected: &str) -> LabResult<()> {
    if found == expected {
        Ok(())
    } else {
        Err(LabError::Config(format!(
            "schema `{found}`, expected `{expected}`"
        )))
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn lookup(ids: &BTreeMap<&str, usize>, id: &str) -> LabResult<usize> {
    ids.get(id)
        .copied()
        .ok_or_else(|| LabError::Config(format!("unknown id `{id}`")))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> LabResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonDoc {
    pub id: String,
    /// `male` or `female`.
    pub gender: String,
}

/// Persons, `[parent, child]` pairs and spouse pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactsDoc {
    pub schema: String,
    pub persons: Vec<PersonDoc>,
    pub parents: Vec<[String; 2]>,
    #[serde(default)]
    pub spouses: Vec<[String; 2]>,
}

impl FactsDoc {
    pub fn from_facts(facts: &BaseFacts) -> Self {
        let id = |i: usize| facts.persons()[i].id.clone();
        FactsDoc {
            schema: FACTS_SCHEMA.into(),
            persons: facts
                .persons()
                .iter()
                .map(|p| PersonDoc {
                    id: p.id.clone(),
                    gender: p.gender.as_str().into(),
                })
                .collect(),
            parents: facts
                .parent_pairs()
                .iter()
                .map(|&(p, c)| [id(p), id(c)])
                .collect(),
            spouses: facts
                .spouse_pairs()
                .iter()
                .map(|&(a, b)| [id(a), id(b)])
                .collect(),
        }
    }

    pub fn to_facts(&self) -> LabResult<BaseFacts> {
        check_schema(&self.schema, FACTS_SCHEMA)?;
        let persons = self
            .persons
            .iter()
            .map(|p| Ok(Person::new(p.id.clone(), p.gender.parse::<Gender>()?)))
            .collect::<LabResult<Vec<_>>>()?;
        let ids: BTreeMap<&str, usize> = self
            .persons
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.as_str(), i))
            .collect();
        let pairs = |list: &[[String; 2]]| {
            list.iter()
                .map(|[a, b]| Ok((lookup(&ids, a)?, lookup(&ids, b)?)))
                .collect::<LabResult<Vec<_>>>()
        };
        Ok(BaseFacts::new(
            persons,
            pairs(&self.parents)?,
            pairs(&self.spouses)?,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationDoc {
    pub name: String,
    /// `[subject, object]` pairs for which the relation holds. For
    /// `descendant`, the subject is the descendant of the object.
    pub pairs: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KgDoc {
    pub schema: String,
    pub objects: Vec<String>,
    pub relations: Vec<RelationDoc>,
}

impl KgDoc {
    pub fn from_kg(kg: &KnowledgeGraph) -> Self {
        let obj = |i: usize| kg.objects()[i].clone();
        KgDoc {
            schema: KG_SCHEMA.into(),
            objects: kg.objects().to_vec(),
            relations: kg
                .relations()
                .iter()
                .enumerate()
                .map(|(k, name)| RelationDoc {
                    name: name.clone(),
                    pairs: kg.edges(k).iter().map(|&(i, j)| [obj(i), obj(j)]).collect(),
                })
                .collect(),
        }
    }

    pub fn to_kg(&self) -> LabResult<KnowledgeGraph> {
        check_schema(&self.schema, KG_SCHEMA)?;
        let ids: BTreeMap<&str, usize> = self
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| (o.as_str(), i))
            .collect();
        let edges = self
            .relations
            .iter()
            .map(|r| {
                r.pairs
                    .iter()
                    .map(|[a, b]| Ok((lookup(&ids, a)?, lookup(&ids, b)?)))
                    .collect::<LabResult<Vec<_>>>()
            })
            .collect::<LabResult<Vec<_>>>()?;
        Ok(KnowledgeGraph::new(
            self.objects.clone(),
            self.relations.iter().map(|r| r.name.clone()).collect(),
            edges,
        )?)
    }
}

fn tensor_rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn rows_tensor(rows: &[Vec<f64>], what: &str) -> LabResult<Tensor> {
    Tensor::from_rows(rows).map_err(|e| LabError::Config(format!("{what}: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDoc {
    /// `inputs x outputs`, row-major.
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// A trained model with its config, curves and final metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDoc {
    pub schema: String,
    pub seed: u64,
    pub config: TrainSection,
    pub objects: Vec<String>,
    pub relations: Vec<String>,
    /// One row per object.
    pub embeddings: Vec<Vec<f64>>,
    pub layers: Vec<LayerDoc>,
    pub train_loss_curve: Vec<Option<f64>>,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub train_loss: Option<f64>,
    pub test_loss: Option<f64>,
    pub converged_at: Option<usize>,
    /// `completed` or `diverged`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged_step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged_reason: Option<String>,
}

impl RunDoc {
    pub fn from_record(record: &RunRecord, kg: &KnowledgeGraph) -> Self {
        let (status, diverged_step, diverged_reason) = match &record.status {
            RunStatus::Completed => ("completed", None, None),
            RunStatus::Diverged { step, reason } => ("diverged", Some(*step), Some(reason.clone())),
        };
        RunDoc {
            schema: RUN_SCHEMA.into(),
            seed: record.config.seed,
            config: TrainSection::from_config(&record.config),
            objects: kg.objects().to_vec(),
            relations: kg.relations().to_vec(),
            embeddings: tensor_rows(record.representation.matrix()),
            layers: record
                .decoder
                .layers()
                .iter()
                .map(|l| LayerDoc {
                    weight: tensor_rows(&l.weight),
                    bias: l.bias.data().to_vec(),
                })
                .collect(),
            train_loss_curve: record.train_loss_curve.iter().map(|&x| finite(x)).collect(),
            train_accuracy: finite(record.train_accuracy),
            test_accuracy: finite(record.test_accuracy),
            train_loss: finite(record.train_loss),
            test_loss: finite(record.test_loss),
            converged_at: record.converged_at,
            status: status.into(),
            diverged_step,
            diverged_reason,
        }
    }

    pub fn to_record(&self) -> LabResult<RunRecord> {
        check_schema(&self.schema, RUN_SCHEMA)?;
        let config = self.config.to_config(self.seed)?;
        let representation = Representation::new(rows_tensor(&self.embeddings, "embeddings")?)?;
        if representation.n() != self.objects.len() {
            return Err(LabError::Config(format!(
                "{} embeddings for {} objects",
                representation.n(),
                self.objects.len()
            )));
        }
        let layers = self
            .layers
            .iter()
            .map(|l| {
                Ok(Layer {
                    weight: rows_tensor(&l.weight, "layer weight")?,
                    bias: Tensor::from_vec(1, l.bias.len(), l.bias.clone())?,
                })
            })
            .collect::<LabResult<Vec<_>>>()?;
        let decoder = DecoderModel::new(layers, config.activation)?;
        let status = match self.status.as_str() {
            "completed" => RunStatus::Completed,
            "diverged" => RunStatus::Diverged {
                step: self.diverged_step.unwrap_or(0),
                reason: self.diverged_reason.clone().unwrap_or_default(),
            },
            other => return Err(LabError::Config(format!("unknown run status `{other}`"))),
        };
        let nan = |x: Option<f64>| x.unwrap_or(f64::NAN);
        Ok(RunRecord {
            config,
            representation,
            decoder,
            train_loss_curve: self.train_loss_curve.iter().map(|&x| nan(x)).collect(),
            train_accuracy: nan(self.train_accuracy),
            test_accuracy: nan(self.test_accuracy),
            train_loss: nan(self.train_loss),
            test_loss: nan(self.test_loss),
            converged_at: self.converged_at,
            status,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyCheckDoc {
    pub property: String,
    pub violations: usize,
    /// Violating pairs or triples of object ids, at most ten.
    pub witnesses: Vec<Vec<String>>,
}

/// Outcome of stitching one run into the cone reference and certifying the
/// stitched points under the hard cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDoc {
    pub schema: String,
    pub run: String,
    pub relation: String,
    pub converged: bool,
    pub train_accuracy: Option<f64>,
    pub reference_accuracy: Option<f64>,
    pub reference_loss: Option<f64>,
    pub cone_width: Option<f64>,
    pub epsilon: f64,
    pub n: usize,
    pub optimal: bool,
    pub checks: Vec<PropertyCheckDoc>,
}

impl ReportDoc {
    pub fn new(
        run: &str,
        relation: &str,
        record: &RunRecord,
        fit: &ReferenceFit,
        report: &OptimalityReport,
        objects: &[String],
    ) -> Self {
        let name = |i: usize| objects.get(i).cloned().unwrap_or_else(|| i.to_string());
        ReportDoc {
            schema: REPORT_SCHEMA.into(),
            run: run.into(),
            relation: relation.into(),
            converged: record.converged(),
            train_accuracy: finite(record.train_accuracy),
            reference_accuracy: finite(fit.accuracy),
            reference_loss: finite(fit.fit.loss),
            cone_width: fit.fit.cone_width.and_then(finite),
            epsilon: fit.fit.params.epsilon,
            n: report.n,
            optimal: report.is_optimal(),
            checks: report
                .checks
                .iter()
                .map(|c| PropertyCheckDoc {
                    property: c.property.to_string(),
                    violations: c.violations,
                    witnesses: c
                        .witnesses
                        .iter()
                        .map(|w| match *w {
                            Violation::Pair(a, b) => vec![name(a), name(b)],
                            Violation::Triple(a, b, c) => vec![name(a), name(b), name(c)],
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TallyDoc {
    pub asked: usize,
    pub correct: usize,
    pub positives: usize,
    pub positive_correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisitDoc {
    pub node: String,
    pub accepted: bool,
    pub tally: TallyDoc,
    /// `missed_positive`, `below_threshold` or `oracle_failure`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneDoc {
    pub schema: String,
    pub root: String,
    pub threshold: f64,
    pub oracle: String,
    /// Accepted objects in visit order.
    pub accepted: Vec<String>,
    /// Every visited object in visit order.
    pub visits: Vec<VisitDoc>,
}

impl PruneDoc {
    pub fn new(result: &PruneResult, kg: &KnowledgeGraph, threshold: f64, oracle: &str) -> Self {
        let name = |i: usize| kg.objects()[i].clone();
        let reasons: BTreeMap<usize, &RejectReason> =
            result.rejected.iter().map(|(n, r)| (*n, r)).collect();
        PruneDoc {
            schema: PRUNE_SCHEMA.into(),
            root: name(result.root),
            threshold,
            oracle: oracle.into(),
            accepted: result.accepted.iter().map(|&i| name(i)).collect(),
            visits: result
                .tallies
                .iter()
                .map(|t| {
                    let (reason, detail) = match reasons.get(&t.node) {
                        None => (None, None),
                        Some(RejectReason::MissedPositive { missed }) => {
                            (Some("missed_positive"), Some(format!("{missed} missed")))
                        }
                        Some(RejectReason::BelowThreshold { ratio }) => {
                            (Some("below_threshold"), Some(format!("ratio {ratio}")))
                        }
                        Some(RejectReason::OracleFailure(msg)) => {
                            (Some("oracle_failure"), Some(msg.clone()))
                        }
                    };
                    VisitDoc {
                        node: name(t.node),
                        accepted: reason.is_none(),
                        tally: TallyDoc {
                            asked: t.asked,
                            correct: t.correct,
                            positives: t.positives,
                            positive_correct: t.positive_correct,
                        },
                        reason: reason.map(String::from),
                        detail,
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerDoc {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub answer: bool,
}

/// Explicit oracle answers; questions not listed fall back to the graph when
/// `fallback = "exact"` and fail otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleScriptDoc {
    pub schema: String,
    /// `exact` or `none`.
    #[serde(default = "default_fallback")]
    pub fallback: String,
    pub answers: Vec<AnswerDoc>,
}

fn default_fallback() -> String {
    "exact".into()
}

impl OracleScriptDoc {
    pub fn to_oracle<'a>(&self, kg: &'a KnowledgeGraph) -> LabResult<ScriptedOracle<'a>> {
        check_schema(&self.schema, ORACLE_SCHEMA)?;
        let fallback = match self.fallback.as_str() {
            "exact" => Some(kg),
            "none" => None,
            other => {
                return Err(LabError::Config(format!(
                    "unknown oracle fallback `{other}`"
                )))
            }
        };
        let mut table = BTreeMap::new();
        for a in &self.answers {
            table.insert(
                (
                    kg.object_index(&a.subject)?,
                    kg.relation_index(&a.relation)?,
                    kg.object_index(&a.object)?,
                ),
                a.answer,
            );
        }
        Ok(ScriptedOracle::new(table, fallback))
    }
}
