//! Equivalence scores between trained runs and against random embeddings.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::aat::{fit_aat, AatConfig, TargetDecoder};
use crate::derive_seed;
use crate::diff::Tensor;
use crate::kg::Triple;
use crate::stats::quantile;
use crate::train::{evaluate, Representation, RunRecord};
use crate::{Error, Result};

/// Accuracy of always predicting the more common label.
pub fn majority_rate(triples: &[Triple]) -> f64 {
    if triples.is_empty() {
        return f64::NAN;
    }
    let pos = triples.iter().filter(|t| t.label).count() as f64;
    let total = triples.len() as f64;
    pos.max(total - pos) / total
}

/// ES of `source`'s representation through `target`'s frozen decoder, warm
/// started from the least-squares map onto `target`'s representation.
pub fn es_cell(
    source: &RunRecord,
    target: &RunRecord,
    triples: &[Triple],
    epsilon: f64,
    cfg: &AatConfig,
) -> Result<f64> {
    let fit = fit_aat(
        &source.representation,
        TargetDecoder::Mlp(&target.decoder),
        Some(&target.representation),
        triples,
        epsilon,
        cfg,
    )?;
    Ok(fit.es)
}

/// Pairwise ES table; row `i` feeds run `i`'s representation into run `j`'s
/// decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EsMatrix {
    pub run_ids: Vec<String>,
    /// `None` where the fit failed.
    pub scores: Vec<Vec<Option<f64>>>,
    /// Rows whose run diverged or never reached 100% training accuracy.
    pub flagged: Vec<bool>,
    /// Majority-label accuracy on the scored triples.
    pub chance: f64,
}

impl EsMatrix {
    /// Builds the matrix from per-cell scores computed elsewhere (for
    /// instance in parallel with [`es_cell`]). The diagonal is overwritten
    /// with each run's own accuracy.
    pub fn assemble(
        run_ids: Vec<String>,
        runs: &[RunRecord],
        triples: &[Triple],
        mut scores: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        let k = runs.len();
        if run_ids.len() != k || scores.len() != k || scores.iter().any(|r| r.len() != k) {
            return Err(Error::Shape {
                op: "es_matrix",
                detail: format!(
                    "{} ids and a {}-row score table for {k} runs",
                    run_ids.len(),
                    scores.len()
                ),
            });
        }
        for (i, run) in runs.iter().enumerate() {
            scores[i][i] = evaluate(&run.representation, &run.decoder, triples)
                .ok()
                .map(|e| e.accuracy)
                .filter(|a| a.is_finite());
        }
        Ok(EsMatrix {
            run_ids,
            scores,
            flagged: runs.iter().map(|r| r.failed() || !r.converged()).collect(),
            chance: majority_rate(triples),
        })
    }

    pub fn len(&self) -> usize {
        self.run_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.run_ids.is_empty()
    }

    /// Mean of the present off-diagonal entries between unflagged runs.
    pub fn mean_off_diagonal(&self) -> f64 {
        let vals: Vec<f64> = (0..self.len())
            .flat_map(|i| (0..self.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && !self.flagged[i] && !self.flagged[j])
            .filter_map(|(i, j)| self.scores[i][j])
            .collect();
        crate::stats::mean(&vals)
    }
}

/// Fits every cell sequentially. Every run must share the triple universe.
pub fn es_matrix(
    run_ids: Vec<String>,
    runs: &[RunRecord],
    triples: &[Triple],
    epsilon: f64,
    cfg: &AatConfig,
) -> Result<EsMatrix> {
    let scores = runs
        .iter()
        .enumerate()
        .map(|(i, src)| {
            runs.iter()
                .enumerate()
                .map(|(j, tgt)| {
                    if i == j {
                        None
                    } else {
                        es_cell(src, tgt, triples, epsilon, cfg).ok()
                    }
                })
                .collect()
        })
        .collect();
    EsMatrix::assemble(run_ids, runs, triples, scores)
}

/// ES values of random representations.
#[derive(Debug, Clone, PartialEq)]
pub struct EsHistogram {
    pub values: Vec<f64>,
    /// Trials whose fit diverged.
    pub failed: usize,
}

impl EsHistogram {
    pub fn quantile(&self, q: f64) -> f64 {
        quantile(&self.values, q)
    }

    /// `bins` equal-width bins over `[lo, hi]` as `(left edge, count)`;
    /// values at `hi` fall in the last bin and values outside are dropped.
    pub fn bins(&self, lo: f64, hi: f64, bins: usize) -> Vec<(f64, usize)> {
        if bins == 0 || hi.is_nan() || lo.is_nan() || hi <= lo {
            return Vec::new();
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = alloc::vec![0usize; bins];
        for &v in &self.values {
            if v < lo || v > hi {
                continue;
            }
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(b, c)| (lo + b as f64 * width, c))
            .collect()
    }
}

/// Stitches `trials` fresh standard-Gaussian `n x d` representations into
/// the frozen `target` decoder and records each ES.
#[allow(clippy::too_many_arguments)]
pub fn random_baseline_es(
    target: TargetDecoder<'_>,
    paired: Option<&Representation>,
    triples: &[Triple],
    n: usize,
    d: usize,
    trials: usize,
    epsilon: f64,
    seed: u64,
    cfg: &AatConfig,
) -> Result<EsHistogram> {
    if trials == 0 || n == 0 || d == 0 {
        return Err(Error::InvalidParameter(
            "random baseline needs trials, n and d all positive".into(),
        ));
    }
    let mut values = Vec::with_capacity(trials);
    let mut failed = 0;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
        let rep = Representation::new(Tensor::randn(n, d, 1.0, &mut rng))?;
        let trial_cfg = AatConfig {
            seed: derive_seed(cfg.seed, t as u64),
            ..*cfg
        };
        match fit_aat(&rep, target, paired, triples, epsilon, &trial_cfg) {
            Ok(fit) => values.push(fit.es),
            Err(Error::Diverged(_)) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(EsHistogram { values, failed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::ConeDecoder;
    use crate::kg::greater_than_kg;
    use alloc::vec;

    #[test]
    fn majority() {
        let t = |label| Triple {
            relation: 0,
            subject: 0,
            object: 1,
            label,
        };
        assert_eq!(
            majority_rate(&[t(true), t(false), t(false), t(false)]),
            0.75
        );
    }

    #[test]
    fn histogram_bins() {
        let h = EsHistogram {
            values: vec![0.0, 0.1, 0.5, 1.0, 1.5],
            failed: 0,
        };
        let b = h.bins(0.0, 1.0, 2);
        assert_eq!(b, vec![(0.0, 2), (0.5, 2)]);
    }

    #[test]
    fn baseline_is_deterministic_and_limited() {
        let kg = greater_than_kg(5).unwrap();
        let triples = kg.all_triples();
        let cfg = AatConfig {
            steps: 60,
            restarts: 1,
            ..AatConfig::default()
        };
        let cone = TargetDecoder::Cone(ConeDecoder::soft(1.0).unwrap());
        let a = random_baseline_es(cone, None, &triples, 5, 1, 1, 0.0, 7, &cfg).unwrap();
        let b = random_baseline_es(cone, None, &triples, 5, 1, 1, 0.0, 7, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(random_baseline_es(cone, None, &triples, 5, 1, 0, 0.0, 7, &cfg).is_err());
    }
}
