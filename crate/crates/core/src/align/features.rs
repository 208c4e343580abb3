use alloc::format;
use alloc::vec::Vec;

use crate::diff::Tensor;
use crate::kg::Gender;
use crate::stats::spearman;
use crate::{Error, Result};

/// A per-object label to look for among principal components.
#[derive(Debug, Clone, PartialEq)]
pub enum Attribute {
    Gender(Vec<Gender>),
    Generation(Vec<usize>),
}

impl Attribute {
    pub fn len(&self) -> usize {
        match self {
            Attribute::Gender(g) => g.len(),
            Attribute::Generation(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Best balanced accuracy of a single threshold on `values` predicting
/// `labels`, in either orientation.
pub fn balanced_threshold_accuracy(values: &[f64], labels: &[bool]) -> f64 {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return f64::NAN;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    // Predict "true" above the threshold; sweep the threshold upward.
    let (mut tp, mut tn) = (pos, 0usize);
    let score = |tp: usize, tn: usize| {
        let b = 0.5 * (tp as f64 / pos as f64 + tn as f64 / neg as f64);
        b.max(1.0 - b)
    };
    let mut best = score(tp, tn);
    let mut idx = 0;
    while idx < order.len() {
        let v = values[order[idx]];
        while idx < order.len() && values[order[idx]] == v {
            if labels[order[idx]] {
                tp -= 1;
            } else {
                tn += 1;
            }
            idx += 1;
        }
        best = best.max(score(tp, tn));
    }
    best
}

/// How well the single best column of `components` explains `attribute`:
/// balanced threshold accuracy for gender, absolute Spearman correlation for
/// generation.
pub fn feature_alignment(components: &Tensor, attribute: &Attribute) -> Result<f64> {
    if components.rows() != attribute.len() {
        return Err(Error::Shape {
            op: "feature_alignment",
            detail: format!("{} rows for {} labels", components.rows(), attribute.len()),
        });
    }
    let columns: Vec<Vec<f64>> = (0..components.cols())
        .map(|c| {
            (0..components.rows())
                .map(|r| components.get(r, c))
                .collect()
        })
        .collect();
    let best = match attribute {
        Attribute::Gender(g) => {
            let labels: Vec<bool> = g.iter().map(|&x| x == Gender::Female).collect();
            if labels.iter().all(|&l| l == labels[0]) {
                return Err(Error::Degenerate("gender is constant".into()));
            }
            columns
                .iter()
                .map(|c| balanced_threshold_accuracy(c, &labels))
                .fold(0.0, f64::max)
        }
        Attribute::Generation(g) => {
            if g.iter().all(|&x| x == g[0]) {
                return Err(Error::Degenerate("generation is constant".into()));
            }
            let gen: Vec<f64> = g.iter().map(|&x| x as f64).collect();
            columns
                .iter()
                .map(|c| spearman(c, &gen).abs())
                .filter(|v| v.is_finite())
                .fold(0.0, f64::max)
        }
    };
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn perfect_split() {
        let comps = Tensor::from_vec(4, 2, vec![-1.0, 0.3, -2.0, 0.1, 0.5, 0.2, 3.0, 0.4]).unwrap();
        let g = Attribute::Gender(vec![
            Gender::Male,
            Gender::Male,
            Gender::Female,
            Gender::Female,
        ]);
        assert_eq!(feature_alignment(&comps, &g).unwrap(), 1.0);
        let flipped = Attribute::Gender(vec![
            Gender::Female,
            Gender::Female,
            Gender::Male,
            Gender::Male,
        ]);
        assert_eq!(feature_alignment(&comps, &flipped).unwrap(), 1.0);
    }

    #[test]
    fn generation_rank() {
        let comps = Tensor::from_vec(4, 1, vec![0.1, 0.4, 0.2, 9.0]).unwrap();
        let g = Attribute::Generation(vec![0, 2, 1, 3]);
        assert!((feature_alignment(&comps, &g).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tied_values_cannot_be_split() {
        let v = [1.0, 1.0, 1.0, 1.0];
        assert_eq!(
            balanced_threshold_accuracy(&v, &[true, false, true, false]),
            0.5
        );
    }

    #[test]
    fn errors() {
        let comps = Tensor::zeros(3, 1);
        assert!(feature_alignment(&comps, &Attribute::Generation(vec![1, 1, 1])).is_err());
        assert!(feature_alignment(&comps, &Attribute::Generation(vec![1, 2])).is_err());
    }
}
