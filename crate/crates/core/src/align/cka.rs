use alloc::format;

use crate::diff::Tensor;
use crate::{Error, Result};

/// Linear centered kernel alignment,
/// `|Y'^T X'|_F^2 / (|X'^T X'|_F |Y'^T Y'|_F)` on column-centered data.
pub fn cka(x: &Tensor, y: &Tensor) -> Result<f64> {
    if x.rows() != y.rows() {
        return Err(Error::Shape {
            op: "cka",
            detail: format!("{} rows vs {} rows", x.rows(), y.rows()),
        });
    }
    if x.rows() < 2 {
        return Err(Error::InvalidParameter(
            "cka needs at least two rows".into(),
        ));
    }
    let (xc, yc) = (x.centered(), y.centered());
    let cross = yc.t_matmul(&xc)?.frobenius_norm();
    let xx = xc.t_matmul(&xc)?.frobenius_norm();
    let yy = yc.t_matmul(&yc)?.frobenius_norm();
    if xx == 0.0 || yy == 0.0 {
        return Err(Error::Degenerate("cka of a constant matrix".into()));
    }
    Ok(cross * cross / (xx * yy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::randn(20, 4, 1.0, &mut rng);
        assert!((cka(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::randn(15, 3, 1.0, &mut rng);
        let y = Tensor::randn(15, 2, 1.0, &mut rng);
        let a = cka(&x, &y).unwrap();
        let b = cka(&x.map(|v| 7.5 * v), &y).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let x = Tensor::filled(5, 2, 3.0);
        let y = Tensor::zeros(5, 2);
        assert!(matches!(cka(&x, &y), Err(Error::Degenerate(_))));
        assert!(cka(&Tensor::zeros(4, 2), &Tensor::zeros(5, 2)).is_err());
        assert!(cka(&Tensor::zeros(1, 2), &Tensor::zeros(1, 2)).is_err());
    }

    #[test]
    fn hand_computed() {
        // x = (0,1,2), y = (0,1,4): centered (-1,0,1) and (-5/3,-2/3,7/3);
        // cross = 4, |x'|^2 = 2, |y'|^2 = 78/9.
        let x = Tensor::from_vec(3, 1, alloc::vec![0.0, 1.0, 2.0]).unwrap();
        let y = Tensor::from_vec(3, 1, alloc::vec![0.0, 1.0, 4.0]).unwrap();
        let want = 16.0 / (2.0 * 78.0 / 9.0);
        assert!((cka(&x, &y).unwrap() - want).abs() < 1e-12);
    }
}
