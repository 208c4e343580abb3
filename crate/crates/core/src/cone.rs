//! Hand-crafted reference decoders and exhaustive optimality certification.
//!
//! The cone decoder predicts `p(E_i, E_j) = s((E_i1 - E_j1) / w) * s((E_i0 - E_j0) / w)`
//! with `s` the logistic function, so `p` is close to 1 when `E_i` dominates
//! `E_j` in both coordinates. In hard mode it is exactly the strict
//! componentwise-dominance order. The Heaviside decoder does the same for
//! scalar embeddings: `H(E_i - E_j)` with `H(0) = 0`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::align::{fit_aat, AatConfig, AatFit, TargetDecoder};
use crate::diff::sigmoid;
use crate::kg::{check_property, KnowledgeGraph, PropertyKind, PropertySpec, Triple, Violation};
use crate::train::Representation;
use crate::{Error, Result};

/// Name of the single relation induced by a hard decoder.
pub const INDUCED_RELATION: &str = "induced";

/// Axis-aligned cone decoder over 2-D embeddings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeDecoder {
    width: f64,
    hard: bool,
}

impl ConeDecoder {
    pub fn soft(width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cone width must be positive, got {width}"
            )));
        }
        Ok(ConeDecoder { width, hard: false })
    }

    pub fn hard() -> Self {
        ConeDecoder {
            width: 1.0,
            hard: true,
        }
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn is_hard(&self) -> bool {
        self.hard
    }
}

/// Probability that the pair is related under the cone decoder.
pub fn cone_predict(ei: &[f64], ej: &[f64], dec: &ConeDecoder) -> Result<f64> {
    if ei.len() != 2 || ej.len() != 2 {
        return Err(Error::Shape {
            op: "cone_predict",
            detail: format!("embeddings of length {} and {}, need 2", ei.len(), ej.len()),
        });
    }
    let d0 = ei[0] - ej[0];
    let d1 = ei[1] - ej[1];
    if dec.hard {
        return Ok(if d0 > 0.0 && d1 > 0.0 { 1.0 } else { 0.0 });
    }
    Ok(sigmoid(d1 / dec.width) * sigmoid(d0 / dec.width))
}

/// `1` iff `ei > ej`.
pub fn heaviside_predict(ei: f64, ej: f64) -> u8 {
    u8::from(ei > ej)
}

/// A decoder with a 0/1 output, used for certification.
#[derive(Debug, Clone, PartialEq)]
pub enum HardDecoder {
    /// Strict componentwise dominance in 2-D.
    Cone,
    /// Strict greater-than on scalars.
    Heaviside,
    /// Memorized answers keyed by the exact embedding pair; unseen pairs
    /// predict 0.
    Lookup(LookupDecoder),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LookupDecoder {
    table: BTreeMap<(Vec<u64>, Vec<u64>), bool>,
}

impl LookupDecoder {
    pub fn new() -> Self {
        LookupDecoder::default()
    }

    fn key(e: &[f64]) -> Vec<u64> {
        e.iter().map(|v| v.to_bits()).collect()
    }

    pub fn memorize(&mut self, ei: &[f64], ej: &[f64], label: bool) {
        self.table.insert((Self::key(ei), Self::key(ej)), label);
    }

    pub fn lookup(&self, ei: &[f64], ej: &[f64]) -> bool {
        self.table
            .get(&(Self::key(ei), Self::key(ej)))
            .copied()
            .unwrap_or(false)
    }
}

impl HardDecoder {
    pub fn predict(&self, ei: &[f64], ej: &[f64]) -> Result<bool> {
        match self {
            HardDecoder::Cone => Ok(cone_predict(ei, ej, &ConeDecoder::hard())? == 1.0),
            HardDecoder::Heaviside => {
                if ei.len() != 1 || ej.len() != 1 {
                    return Err(Error::Shape {
                        op: "heaviside",
                        detail: format!(
                            "embeddings of length {} and {}, need 1",
                            ei.len(),
                            ej.len()
                        ),
                    });
                }
                Ok(heaviside_predict(ei[0], ej[0]) == 1)
            }
            HardDecoder::Lookup(table) => Ok(table.lookup(ei, ej)),
        }
    }

    fn required_dim(&self) -> Option<usize> {
        match self {
            HardDecoder::Cone => Some(2),
            HardDecoder::Heaviside => Some(1),
            HardDecoder::Lookup(_) => None,
        }
    }
}

/// The relation a hard decoder induces on a point cloud, as a one-relation
/// graph named [`INDUCED_RELATION`].
pub fn induced_graph(rep: &Representation, dec: &HardDecoder) -> Result<KnowledgeGraph> {
    if let Some(d) = dec.required_dim() {
        if rep.d() != d {
            return Err(Error::Shape {
                op: "certify",
                detail: format!("decoder needs d = {d}, representation has d = {}", rep.d()),
            });
        }
    }
    let n = rep.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if dec.predict(rep.row(i), rep.row(j))? {
                edges.push((i, j));
            }
        }
    }
    KnowledgeGraph::new(
        (0..n).map(|i| i.to_string()).collect(),
        vec![INDUCED_RELATION.to_string()],
        vec![edges],
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub property: PropertySpec,
    pub violations: usize,
    /// Up to [`OptimalityReport::MAX_WITNESSES`] violating pairs/triples.
    pub witnesses: Vec<Violation>,
}

/// Per-property violation counts of a decoder's induced relation.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport {
    pub n: usize,
    pub checks: Vec<PropertyCheck>,
}

impl OptimalityReport {
    pub const MAX_WITNESSES: usize = 10;

    /// True iff every checked property has zero violations.
    pub fn is_optimal(&self) -> bool {
        self.checks.iter().all(|c| c.violations == 0)
    }

    pub fn total_violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }
}

/// Checks each property of the decoder's induced relation over all pairs
/// and triples of the point cloud.
pub fn certify_optimality(
    rep: &Representation,
    dec: &HardDecoder,
    properties: &[PropertyKind],
) -> Result<OptimalityReport> {
    let kg = induced_graph(rep, dec)?;
    let checks = properties
        .iter()
        .map(|&kind| {
            let spec = match kind {
                PropertyKind::MetaTransitive => PropertySpec::meta_transitive(
                    INDUCED_RELATION,
                    INDUCED_RELATION,
                    INDUCED_RELATION,
                ),
                other => PropertySpec::new(other, vec![INDUCED_RELATION.into()])?,
            };
            let violations = check_property(&kg, &spec)?;
            Ok(PropertyCheck {
                property: spec,
                violations: violations.len(),
                witnesses: violations
                    .into_iter()
                    .take(OptimalityReport::MAX_WITNESSES)
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OptimalityReport { n: rep.n(), checks })
}

/// Result of stitching a representation into the cone reference decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFit {
    /// Accuracy over every ordered pair of the relation.
    pub accuracy: f64,
    pub fit: AatFit,
}

/// Fits an almost-affine map from `rep` to 2-D so that the soft cone
/// decoder (with its width trained alongside) reproduces `relation` of
/// `kg`, and reports the accuracy over all `n^2` pairs.
pub fn fit_to_reference(
    rep: &Representation,
    kg: &KnowledgeGraph,
    relation: &str,
    epsilon: f64,
    cfg: &AatConfig,
) -> Result<ReferenceFit> {
    let k = kg.relation_index(relation)?;
    if rep.n() != kg.n() {
        return Err(Error::Shape {
            op: "fit_to_reference",
            detail: format!("{} embeddings for {} objects", rep.n(), kg.n()),
        });
    }
    let n = kg.n();
    let triples: Vec<Triple> = (0..n)
        .flat_map(|i| {
            (0..n).map(move |j| Triple {
                relation: 0,
                subject: i,
                object: j,
                label: kg.holds(k, i, j),
            })
        })
        .collect();
    let fit = fit_aat(
        rep,
        TargetDecoder::Cone(ConeDecoder::soft(1.0)?),
        None,
        &triples,
        epsilon,
        cfg,
    )?;
    Ok(ReferenceFit {
        accuracy: fit.es,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{greater_than_kg, PropertyKind::*};

    #[test]
    fn cone_values() {
        let soft = ConeDecoder::soft(1.0).unwrap();
        assert_eq!(
            cone_predict(&[0.3, -1.0], &[0.3, -1.0], &soft).unwrap(),
            0.25
        );
        let s1 = 1.0 / (1.0 + libm::exp(-1.0));
        let p = cone_predict(&[1.0, 1.0], &[0.0, 0.0], &soft).unwrap();
        assert!((p - s1 * s1).abs() < 1e-15);
        assert!((p - 0.5344).abs() < 1e-4);
        assert_eq!(
            cone_predict(&[1.0, 1.0], &[0.0, 2.0], &ConeDecoder::hard()).unwrap(),
            0.0
        );
        assert!(cone_predict(&[1.0], &[0.0, 2.0], &soft).is_err());
        assert!(ConeDecoder::soft(0.0).is_err());
    }

    #[test]
    fn heaviside_values() {
        assert_eq!(heaviside_predict(3.0, 1.0), 1);
        assert_eq!(heaviside_predict(1.0, 3.0), 0);
        assert_eq!(heaviside_predict(2.5, 2.5), 0);
    }

    #[test]
    fn heaviside_reproduces_greater_than() {
        let rep = Representation::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let induced = induced_graph(&rep, &HardDecoder::Heaviside).unwrap();
        assert_eq!(induced.edges(0), greater_than_kg(3).unwrap().edges(0));
    }

    #[test]
    fn soft_cone_approaches_hard() {
        let soft = ConeDecoder::soft(1e-6).unwrap();
        let hard = ConeDecoder::hard();
        for (a, b) in [
            ([0.5, 0.2], [0.1, 0.1]),
            ([0.5, 0.2], [0.6, 0.1]),
            ([-1.0, 3.0], [-2.0, 2.99]),
            ([0.0, 0.0], [0.01, -0.01]),
        ] {
            let ps = cone_predict(&a, &b, &soft).unwrap();
            let ph = cone_predict(&a, &b, &hard).unwrap();
            assert!((ps - ph).abs() < 1e-3);
        }
    }

    #[test]
    fn monotone_embedding_certifies() {
        let rep =
            Representation::from_rows(&[vec![0.1], vec![5.0], vec![-2.0], vec![0.3]]).unwrap();
        let r = certify_optimality(&rep, &HardDecoder::Heaviside, &[Transitive, Antisymmetric])
            .unwrap();
        assert!(r.is_optimal());
    }

    #[test]
    fn dimension_mismatch() {
        let rep = Representation::from_rows(&[vec![0.1], vec![5.0]]).unwrap();
        assert!(certify_optimality(&rep, &HardDecoder::Cone, &[Transitive]).is_err());
    }

    #[test]
    fn memorizing_decoder_breaks_transitivity() {
        // Scalar embeddings, random memorized labels; brute-force count of
        // broken transitivity triples must match the report.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 8;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
        let rep = Representation::from_rows(&rows).unwrap();
        let mut labels = vec![false; n * n];
        let mut table = LookupDecoder::new();
        for i in 0..n {
            for j in 0..n {
                labels[i * n + j] = i != j && rng.random_bool(0.4);
                table.memorize(&rows[i], &rows[j], labels[i * n + j]);
            }
        }
        let mut expected = 0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if labels[i * n + j] && labels[j * n + k] && !labels[i * n + k] {
                        expected += 1;
                    }
                }
            }
        }
        assert!(expected > 0);
        let r = certify_optimality(&rep, &HardDecoder::Lookup(table), &[Transitive]).unwrap();
        assert_eq!(r.checks[0].violations, expected);
        assert!(!r.is_optimal());
    }
}
