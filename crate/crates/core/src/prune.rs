//! Breadth-first extraction of the part of a knowledge graph that an oracle
//! answers correctly about.
//!
//! Starting at a root, each visited node `v` is quizzed about every relation
//! between itself and every node accepted so far, in both orientations. It
//! is accepted when every question whose true answer is yes is answered yes
//! and the overall share of correct answers exceeds the threshold. The
//! traversal continues through rejected nodes.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::kg::KnowledgeGraph;
use crate::{Error, Result};

/// Failure of an oracle to produce an answer.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("oracle failed: {0}")]
pub struct OracleError(pub String);

/// Anything that can answer "does `relation(subject, object)` hold?".
pub trait RelationOracle {
    fn answer(
        &mut self,
        subject: usize,
        relation: usize,
        object: usize,
    ) -> Result<bool, OracleError>;
}

/// Answers from the graph itself.
#[derive(Debug, Clone, Copy)]
pub struct ExactOracle<'a> {
    kg: &'a KnowledgeGraph,
}

impl<'a> ExactOracle<'a> {
    pub fn new(kg: &'a KnowledgeGraph) -> Self {
        ExactOracle { kg }
    }
}

impl RelationOracle for ExactOracle<'_> {
    fn answer(
        &mut self,
        subject: usize,
        relation: usize,
        object: usize,
    ) -> Result<bool, OracleError> {
        answer_from(self.kg, subject, relation, object)
    }
}

fn answer_from(kg: &KnowledgeGraph, s: usize, r: usize, o: usize) -> Result<bool, OracleError> {
    if s >= kg.n() || o >= kg.n() || r >= kg.m() {
        return Err(OracleError(format!(
            "question ({s}, {r}, {o}) is outside the graph"
        )));
    }
    Ok(kg.holds(r, s, o))
}

/// How often a [`NoisyOracle`] lies.
#[derive(Debug, Clone, PartialEq)]
pub enum FlipModel {
    /// The same flip probability for every question.
    Global(f64),
    /// One probability per node; a question uses the larger of its two
    /// nodes' probabilities.
    PerNode(Vec<f64>),
}

/// The exact answer, flipped with some probability. Whether a given
/// question is flipped depends only on the seed and the question, so
/// repeated or reordered questions get consistent answers.
#[derive(Debug, Clone)]
pub struct NoisyOracle<'a> {
    kg: &'a KnowledgeGraph,
    flips: FlipModel,
    seed: u64,
}

impl<'a> NoisyOracle<'a> {
    pub fn new(kg: &'a KnowledgeGraph, flips: FlipModel, seed: u64) -> Result<Self> {
        let probs: &[f64] = match &flips {
            FlipModel::Global(p) => core::slice::from_ref(p),
            FlipModel::PerNode(ps) => {
                if ps.len() != kg.n() {
                    return Err(Error::InvalidParameter(format!(
                        "{} flip probabilities for {} nodes",
                        ps.len(),
                        kg.n()
                    )));
                }
                ps
            }
        };
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!(
                "flip probability {p} outside [0, 1]"
            )));
        }
        Ok(NoisyOracle { kg, flips, seed })
    }

    fn flip_probability(&self, s: usize, o: usize) -> f64 {
        match &self.flips {
            FlipModel::Global(p) => *p,
            FlipModel::PerNode(ps) => ps[s].max(ps[o]),
        }
    }
}

fn question_uniform(seed: u64, s: usize, r: usize, o: usize) -> f64 {
    let mut h = seed;
    for part in [s as u64, r as u64, o as u64] {
        h = crate::derive_seed(h, part);
    }
    (h >> 11) as f64 / (1u64 << 53) as f64
}

impl RelationOracle for NoisyOracle<'_> {
    fn answer(
        &mut self,
        subject: usize,
        relation: usize,
        object: usize,
    ) -> Result<bool, OracleError> {
        let truth = answer_from(self.kg, subject, relation, object)?;
        let u = question_uniform(self.seed, subject, relation, object);
        Ok(truth ^ (u < self.flip_probability(subject, object)))
    }
}

/// Answers from an explicit table, falling back to a graph (or failing) for
/// questions not in it.
#[derive(Debug, Clone, Default)]
pub struct ScriptedOracle<'a> {
    table: BTreeMap<(usize, usize, usize), bool>,
    fallback: Option<&'a KnowledgeGraph>,
}

impl<'a> ScriptedOracle<'a> {
    pub fn new(
        table: BTreeMap<(usize, usize, usize), bool>,
        fallback: Option<&'a KnowledgeGraph>,
    ) -> Self {
        ScriptedOracle { table, fallback }
    }

    pub fn set(&mut self, subject: usize, relation: usize, object: usize, answer: bool) {
        self.table.insert((subject, relation, object), answer);
    }

    pub fn table(&self) -> &BTreeMap<(usize, usize, usize), bool> {
        &self.table
    }
}

impl RelationOracle for ScriptedOracle<'_> {
    fn answer(
        &mut self,
        subject: usize,
        relation: usize,
        object: usize,
    ) -> Result<bool, OracleError> {
        if let Some(&a) = self.table.get(&(subject, relation, object)) {
            return Ok(a);
        }
        match self.fallback {
            Some(kg) => answer_from(kg, subject, relation, object),
            None => Err(OracleError(format!(
                "no scripted answer for ({subject}, {relation}, {object})"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneConfig {
    /// Share of correct answers that must be exceeded, in `(0, 1]`.
    pub threshold: f64,
    /// Ask only questions whose true answer is yes.
    pub positive_only: bool,
    /// Relations whose edges (in either direction) the traversal follows;
    /// empty means all relations.
    pub traversal: Vec<String>,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            threshold: 0.8,
            positive_only: false,
            traversal: Vec::new(),
        }
    }
}

/// Questions asked about one node and how they went.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NodeTally {
    pub node: usize,
    pub asked: usize,
    pub correct: usize,
    /// Questions whose true answer is yes.
    pub positives: usize,
    pub positive_correct: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    /// Some yes-question was answered no.
    MissedPositive {
        missed: usize,
    },
    /// Share of correct answers not above the threshold.
    BelowThreshold {
        ratio: f64,
    },
    OracleFailure(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneResult {
    pub root: usize,
    /// Accepted nodes in visit order, starting with the root.
    pub accepted: Vec<usize>,
    /// Every visited node in visit order; the root's tally is empty.
    pub tallies: Vec<NodeTally>,
    pub rejected: Vec<(usize, RejectReason)>,
}

/// Quizzes `node` against every node in `accepted` and decides whether it
/// is accepted (`None`) or why not.
pub fn judge_node(
    kg: &KnowledgeGraph,
    node: usize,
    accepted: &[usize],
    oracle: &mut dyn RelationOracle,
    cfg: &PruneConfig,
) -> (NodeTally, Option<RejectReason>) {
    let mut tally = NodeTally {
        node,
        ..NodeTally::default()
    };
    for &u in accepted {
        for r in 0..kg.m() {
            for (s, o) in [(node, u), (u, node)] {
                let truth = kg.holds(r, s, o);
                if cfg.positive_only && !truth {
                    continue;
                }
                let said = match oracle.answer(s, r, o) {
                    Ok(a) => a,
                    Err(e) => return (tally, Some(RejectReason::OracleFailure(e.0))),
                };
                tally.asked += 1;
                if truth {
                    tally.positives += 1;
                }
                if said == truth {
                    tally.correct += 1;
                    if truth {
                        tally.positive_correct += 1;
                    }
                }
            }
        }
    }
    if tally.positive_correct < tally.positives {
        let missed = tally.positives - tally.positive_correct;
        return (tally, Some(RejectReason::MissedPositive { missed }));
    }
    if tally.asked == 0 || tally.correct == tally.asked {
        return (tally, None);
    }
    let ratio = tally.correct as f64 / tally.asked as f64;
    if ratio > cfg.threshold {
        (tally, None)
    } else {
        (tally, Some(RejectReason::BelowThreshold { ratio }))
    }
}

/// Breadth-first pruning from `root`. Neighbors are taken from the
/// traversal relations in either direction, in ascending index order.
pub fn prune(
    kg: &KnowledgeGraph,
    root: &str,
    oracle: &mut dyn RelationOracle,
    cfg: &PruneConfig,
) -> Result<PruneResult> {
    if !(cfg.threshold > 0.0 && cfg.threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold {} outside (0, 1]",
            cfg.threshold
        )));
    }
    let root = kg.object_index(root)?;
    let traversal: Vec<usize> = if cfg.traversal.is_empty() {
        (0..kg.m()).collect()
    } else {
        cfg.traversal
            .iter()
            .map(|name| kg.relation_index(name))
            .collect::<Result<_>>()?
    };
    let mut adjacency = vec![Vec::new(); kg.n()];
    for &k in &traversal {
        for &(i, j) in kg.edges(k) {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
        list.dedup();
    }

    let mut seen = vec![false; kg.n()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    let mut result = PruneResult {
        root,
        accepted: Vec::new(),
        tallies: Vec::new(),
        rejected: Vec::new(),
    };
    while let Some(v) = queue.pop_front() {
        if v == root {
            result.accepted.push(v);
            result.tallies.push(NodeTally {
                node: v,
                ..NodeTally::default()
            });
        } else {
            let (tally, verdict) = judge_node(kg, v, &result.accepted, oracle, cfg);
            result.tallies.push(tally);
            match verdict {
                None => result.accepted.push(v),
                Some(reason) => result.rejected.push((v, reason)),
            }
        }
        for &u in &adjacency[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{derive_kg, generate_synthetic_tree, RelationSet};
    use alloc::string::ToString;

    fn chain(n: usize) -> KnowledgeGraph {
        KnowledgeGraph::new(
            (0..n).map(|i| format!("v{i}")).collect(),
            vec!["next".to_string()],
            vec![(1..n).map(|i| (i - 1, i)).collect()],
        )
        .unwrap()
    }

    #[test]
    fn exact_oracle_accepts_everything() {
        let kg = chain(5);
        let r = prune(
            &kg,
            "v2",
            &mut ExactOracle::new(&kg),
            &PruneConfig::default(),
        )
        .unwrap();
        assert_eq!(r.accepted, vec![2, 1, 3, 0, 4]);
        assert!(r.rejected.is_empty());
        let strict = PruneConfig {
            threshold: 1.0,
            ..PruneConfig::default()
        };
        assert_eq!(
            prune(&kg, "v2", &mut ExactOracle::new(&kg), &strict)
                .unwrap()
                .accepted
                .len(),
            5
        );
    }

    #[test]
    fn one_negative_error_at_full_threshold() {
        let kg = chain(3);
        let mut oracle = ScriptedOracle::new(BTreeMap::new(), Some(&kg));
        // (v2, next, v0) is false; say yes.
        oracle.set(2, 0, 0, true);
        let strict = PruneConfig {
            threshold: 1.0,
            ..PruneConfig::default()
        };
        let r = prune(&kg, "v0", &mut oracle.clone(), &strict).unwrap();
        assert_eq!(r.accepted, vec![0, 1]);
        assert!(matches!(
            r.rejected[0],
            (2, RejectReason::BelowThreshold { .. })
        ));
        // 3 of 4 correct exceeds 0.7 but not 0.8.
        let loose = PruneConfig {
            threshold: 0.7,
            ..PruneConfig::default()
        };
        assert_eq!(
            prune(&kg, "v0", &mut oracle, &loose).unwrap().accepted,
            vec![0, 1, 2]
        );
    }

    #[test]
    fn missed_positive_rejects_regardless_of_ratio() {
        let kg = chain(3);
        let mut oracle = ScriptedOracle::new(BTreeMap::new(), Some(&kg));
        oracle.set(1, 0, 2, false);
        let r = prune(
            &kg,
            "v0",
            &mut oracle,
            &PruneConfig {
                threshold: 0.1,
                ..PruneConfig::default()
            },
        )
        .unwrap();
        assert_eq!(
            r.rejected,
            vec![(2, RejectReason::MissedPositive { missed: 1 })]
        );
    }

    #[test]
    fn traversal_continues_past_rejected_nodes() {
        let kg = chain(4);
        let mut oracle = ScriptedOracle::new(BTreeMap::new(), Some(&kg));
        oracle.set(0, 0, 1, false);
        let r = prune(&kg, "v0", &mut oracle, &PruneConfig::default()).unwrap();
        assert_eq!(r.accepted, vec![0, 2, 3]);
        assert_eq!(r.tallies.len(), 4);
    }

    #[test]
    fn oracle_failure_is_a_rejection() {
        let kg = chain(3);
        let mut oracle = ScriptedOracle::new(BTreeMap::new(), None);
        let r = prune(&kg, "v0", &mut oracle, &PruneConfig::default()).unwrap();
        assert_eq!(r.accepted, vec![0]);
        assert!(r
            .rejected
            .iter()
            .all(|(_, why)| matches!(why, RejectReason::OracleFailure(_))));
    }

    #[test]
    fn bad_inputs() {
        let kg = chain(3);
        let mut o = ExactOracle::new(&kg);
        assert!(prune(&kg, "nobody", &mut o, &PruneConfig::default()).is_err());
        let zero = PruneConfig {
            threshold: 0.0,
            ..PruneConfig::default()
        };
        assert!(prune(&kg, "v0", &mut o, &zero).is_err());
        assert!(NoisyOracle::new(&kg, FlipModel::Global(1.5), 0).is_err());
        assert!(NoisyOracle::new(&kg, FlipModel::PerNode(vec![0.1]), 0).is_err());
    }

    #[test]
    fn noisy_oracle_is_deterministic() {
        let base = generate_synthetic_tree(3, 3, 0.5, 1).unwrap();
        let kg = derive_kg(&base, RelationSet::Full18);
        let root = kg.objects()[0].clone();
        let run = |seed| {
            let mut o = NoisyOracle::new(&kg, FlipModel::Global(0.05), seed).unwrap();
            prune(&kg, &root, &mut o, &PruneConfig::default()).unwrap()
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn noisy_flip_rate() {
        let kg = chain(30);
        let mut o = NoisyOracle::new(&kg, FlipModel::Global(0.3), 11).unwrap();
        let mut wrong = 0;
        for s in 0..30 {
            for t in 0..30 {
                if o.answer(s, 0, t).unwrap() != kg.holds(0, s, t) {
                    wrong += 1;
                }
            }
        }
        let rate = wrong as f64 / 900.0;
        assert!((rate - 0.3).abs() < 0.05, "rate {rate}");
    }

    #[test]
    fn per_node_noise_targets_one_node() {
        let kg = chain(6);
        let mut probs = vec![0.0; 6];
        probs[4] = 1.0;
        let mut o = NoisyOracle::new(&kg, FlipModel::PerNode(probs), 0).unwrap();
        let r = prune(&kg, "v0", &mut o, &PruneConfig::default()).unwrap();
        assert_eq!(r.accepted, vec![0, 1, 2, 3, 5]);
    }

    /// A pointwise more accurate oracle can shrink the final accepted set:
    /// accepting an extra node adds questions about it for later nodes.
    #[test]
    fn whole_run_monotonicity_counterexample() {
        // root 0 with children 1 and 2.
        let kg = KnowledgeGraph::new(
            vec!["r".into(), "x".into(), "y".into()],
            vec!["child_of".into()],
            vec![vec![(1, 0), (2, 0)]],
        )
        .unwrap();
        let mut worse = ScriptedOracle::new(BTreeMap::new(), Some(&kg));
        let mut better = ScriptedOracle::new(BTreeMap::new(), Some(&kg));
        for (s, o) in [(1, 0), (0, 1), (1, 2), (2, 1)] {
            worse.set(s, 0, o, !kg.holds(0, s, o));
        }
        for (s, o) in [(1, 2), (2, 1)] {
            better.set(s, 0, o, !kg.holds(0, s, o));
        }
        let cfg = PruneConfig::default();
        let a = prune(&kg, "r", &mut worse, &cfg).unwrap();
        let b = prune(&kg, "r", &mut better, &cfg).unwrap();
        assert_eq!(a.accepted, vec![0, 2]);
        assert_eq!(b.accepted, vec![0, 1]);
    }
}
