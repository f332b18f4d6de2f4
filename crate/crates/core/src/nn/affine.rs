use super::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug)]
pub struct AffineCache {
    input: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineGrads {
    pub input: DenseMatrix,
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

/// `y = x·W + b`, with `W` shaped `in × out`.
pub fn affine_forward(x: &DenseMatrix, w: &DenseMatrix, b: &[f64]) -> Result<(DenseMatrix, AffineCache)> {
    if b.len() != w.cols() {
        return Err(Error::shape(format!(
            "bias of length {} for {} outputs",
            b.len(),
            w.cols()
        )));
    }
    let mut y = x.matmul(w)?;
    for r in 0..y.rows() {
        for (v, bj) in y.row_mut(r).iter_mut().zip(b) {
            *v += bj;
        }
    }
    Ok((y, AffineCache { input: x.clone() }))
}

pub fn affine_backward(cache: AffineCache, w: &DenseMatrix, grad_y: &DenseMatrix) -> Result<AffineGrads> {
    if grad_y.rows() != cache.input.rows() || grad_y.cols() != w.cols() || cache.input.cols() != w.rows() {
        return Err(Error::shape(format!(
            "affine backward: input {:?}, weight {:?}, grad {:?}",
            cache.input.shape(),
            w.shape(),
            grad_y.shape()
        )));
    }
    Ok(AffineGrads {
        input: grad_y.matmul_t(w)?,
        weight: cache.input.t_matmul(grad_y)?,
        bias: grad_y.column_sums(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer() {
        let x = DenseMatrix::from_vec(2, 2, vec![1., -2., 3., 4.]).unwrap();
        let w = DenseMatrix::identity(2);
        let (y, cache) = affine_forward(&x, &w, &[0., 0.]).unwrap();
        assert_eq!(y, x);
        let g = affine_backward(cache, &w, &x).unwrap();
        assert_eq!(g.input, x);
    }

    #[test]
    fn hand_product() {
        let x = DenseMatrix::from_vec(2, 2, vec![1., 2., 3., 4.]).unwrap();
        let w = DenseMatrix::from_vec(2, 2, vec![5., 6., 7., 8.]).unwrap();
        let (y, cache) = affine_forward(&x, &w, &[1., -1.]).unwrap();
        assert_eq!(y.values(), &[20., 21., 44., 49.]);
        let gy = DenseMatrix::from_vec(2, 2, vec![1., 0., 0., 1.]).unwrap();
        let g = affine_backward(cache, &w, &gy).unwrap();
        // xᵀ·gy = [[1,3],[2,4]]; gy·wᵀ = [[5,7],[6,8]]
        assert_eq!(g.weight.values(), &[1., 3., 2., 4.]);
        assert_eq!(g.input.values(), &[5., 7., 6., 8.]);
        assert_eq!(g.bias, vec![1., 1.]);
    }

    #[test]
    fn shape_mismatch() {
        let x = DenseMatrix::zeros(2, 3);
        let w = DenseMatrix::zeros(2, 2);
        assert!(affine_forward(&x, &w, &[0., 0.]).is_err());
        assert!(affine_forward(&DenseMatrix::zeros(1, 2), &w, &[0.]).is_err());
    }

    #[test]
    fn finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut u = || rng.random_range(-1.0..1.0);
        let x = DenseMatrix::from_fn(3, 4, |_, _| u());
        let w = DenseMatrix::from_fn(4, 2, |_, _| u());
        let b = vec![u(), u()];
        let probe = DenseMatrix::from_fn(3, 2, |_, _| u());
        // L = Σ probe ⊙ y
        let loss = |x: &DenseMatrix, w: &DenseMatrix, b: &[f64]| -> f64 {
            let (y, _) = affine_forward(x, w, b).unwrap();
            y.values().iter().zip(probe.values()).map(|(a, p)| a * p).sum()
        };
        let (_, cache) = affine_forward(&x, &w, &b).unwrap();
        let g = affine_backward(cache, &w, &probe).unwrap();
        let h = 1e-4;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        for i in 0..x.values().len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp.values_mut()[i] += h;
            xm.values_mut()[i] -= h;
            let n = (loss(&xp, &w, &b) - loss(&xm, &w, &b)) / (2.0 * h);
            assert!(rel(g.input.values()[i], n) < 1e-6);
        }
        for i in 0..w.values().len() {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp.values_mut()[i] += h;
            wm.values_mut()[i] -= h;
            let n = (loss(&x, &wp, &b) - loss(&x, &wm, &b)) / (2.0 * h);
            assert!(rel(g.weight.values()[i], n) < 1e-6);
        }
        for i in 0..2 {
            let (mut bp, mut bm) = (b.clone(), b.clone());
            bp[i] += h;
            bm[i] -= h;
            let n = (loss(&x, &w, &bp) - loss(&x, &w, &bm)) / (2.0 * h);
            assert!(rel(g.bias[i], n) < 1e-6);
        }
    }
}
