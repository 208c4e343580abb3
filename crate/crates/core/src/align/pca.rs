use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::diff::Tensor;
use crate::{Error, Result};

/// Projection onto the top principal axes of column-centered data.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// `n x k` scores.
    pub components: Tensor,
    /// `d x k`, unit columns; each axis's largest-magnitude entry is positive.
    pub axes: Tensor,
    /// Share of total variance per kept axis, non-increasing.
    pub explained_ratio: Vec<f64>,
    /// `1 x d` column means.
    pub mean: Tensor,
}

impl Pca {
    /// Maps the scores back to the original space.
    pub fn reconstruct(&self) -> Result<Tensor> {
        let mut out = self.components.matmul_t(&self.axes)?;
        let d = self.mean.cols();
        for (idx, v) in out.data_mut().iter_mut().enumerate() {
            *v += self.mean.data()[idx % d];
        }
        Ok(out)
    }
}

pub fn pca_project(x: &Tensor, k: usize) -> Result<Pca> {
    let (n, d) = (x.rows(), x.cols());
    if k == 0 || k > n.min(d) {
        return Err(Error::InvalidParameter(format!(
            "k = {k} outside 1..={} for {n} x {d} data",
            n.min(d)
        )));
    }
    let xc = x.centered();
    let cov = xc.t_matmul(&xc)?;
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, cov.data()));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Degenerate("data has zero variance".into()));
    }
    let mut axes = Tensor::zeros(d, k);
    let mut ratios = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let col = eig.eigenvectors.column(idx);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for r in 0..d {
            axes.set(r, c, sign * col[r]);
        }
        ratios.push(eig.eigenvalues[idx].max(0.0) / total);
    }
    Ok(Pca {
        components: xc.matmul(&axes)?,
        axes,
        explained_ratio: ratios,
        mean: x.column_means(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collinear() {
        let x = Tensor::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 2.0],
            vec![2.0, 4.0],
            vec![-3.0, -6.0],
        ])
        .unwrap();
        let p = pca_project(&x, 2).unwrap();
        assert!((p.explained_ratio[0] - 1.0).abs() < 1e-12);
        assert!(p.explained_ratio[1].abs() < 1e-12);
        // Axis along (1, 2) / sqrt(5), positive orientation.
        assert!((p.axes.get(1, 0) - 2.0 / libm::sqrt(5.0)).abs() < 1e-12);
    }

    #[test]
    fn full_rank_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::randn(12, 4, 2.0, &mut rng);
        let p = pca_project(&x, 4).unwrap();
        assert!(p.reconstruct().unwrap().max_abs_diff(&x) < 1e-9);
        let sum: f64 = p.explained_ratio.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(p.explained_ratio.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn range_and_degenerate() {
        let x = Tensor::zeros(3, 2);
        assert!(pca_project(&x, 0).is_err());
        assert!(pca_project(&x, 3).is_err());
        assert!(matches!(pca_project(&x, 1), Err(Error::Degenerate(_))));
    }
}
