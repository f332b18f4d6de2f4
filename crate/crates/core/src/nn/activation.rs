use super::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug)]
pub struct ReluCache {
    active: Vec<bool>,
}

impl ReluCache {
    /// Which inputs were strictly positive.
    pub fn active(&self) -> &[bool] {
        &self.active
    }
}

pub fn relu_forward(x: &DenseMatrix) -> (DenseMatrix, ReluCache) {
    let mut y = x.clone();
    let mut active = Vec::with_capacity(x.values().len());
    for v in y.values_mut() {
        let on = *v > 0.0;
        if !on {
            *v = 0.0;
        }
        active.push(on);
    }
    (y, ReluCache { active })
}

pub fn relu_backward(cache: ReluCache, grad_y: &DenseMatrix) -> Result<DenseMatrix> {
    if cache.active.len() != grad_y.values().len() {
        return Err(Error::shape("relu cache does not match gradient"));
    }
    let mut g = grad_y.clone();
    for (v, &on) in g.values_mut().iter_mut().zip(&cache.active) {
        if !on {
            *v = 0.0;
        }
    }
    Ok(g)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on a logit, returning `(loss, ∂loss/∂z)`.
pub fn bce_with_logits(z: f64, y: f64) -> Result<(f64, f64)> {
    if !z.is_finite() {
        return Err(Error::NonFinite("logit".into()));
    }
    // max(z,0) - z·y + ln(1 + e^{-|z|})
    let loss = z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
    Ok((loss, sigmoid(z) - y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetry_point() {
        let (l, g) = bce_with_logits(0.0, 1.0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(g, -0.5);
    }

    #[test]
    fn saturation() {
        let (l, g) = bce_with_logits(800.0, 1.0).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, 0.0);
        let (l, _) = bce_with_logits(-800.0, 1.0).unwrap();
        assert_eq!(l, 800.0);
        assert!(bce_with_logits(f64::NAN, 0.0).is_err());
        assert!(bce_with_logits(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn matches_naive_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let z: f64 = rng.random_range(-20.0..20.0);
            let y = rng.random_range(0..2) as f64;
            // 1 − p is evaluated as σ(−z); subtracting from 1 would itself lose
            // ~8 digits at |z| = 20.
            let p = 1.0 / (1.0 + (-z).exp());
            let q = 1.0 / (1.0 + z.exp());
            let naive = -(y * p.ln() + (1.0 - y) * q.ln());
            let (l, g) = bce_with_logits(z, y).unwrap();
            assert!((l - naive).abs() <= 1e-10, "z={z} y={y}");
            assert!((g - (p - y)).abs() <= 1e-12);
        }
    }

    #[test]
    fn relu_masks() {
        let x = DenseMatrix::from_vec(1, 3, vec![-1., 0., 2.]).unwrap();
        let (y, c) = relu_forward(&x);
        assert_eq!(y.values(), &[0., 0., 2.]);
        let g = relu_backward(c, &DenseMatrix::from_vec(1, 3, vec![1., 1., 1.]).unwrap()).unwrap();
        assert_eq!(g.values(), &[0., 0., 1.]);
    }
}
