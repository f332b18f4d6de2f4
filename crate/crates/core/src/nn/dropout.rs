use rand::Rng;

use super::{DenseMatrix, Mode};
use crate::error::{Error, Result};

/// Per-entry multipliers applied in the forward pass; `None` is identity.
#[derive(Debug)]
pub struct DropoutMask {
    scale: Option<Vec<f64>>,
}

impl DropoutMask {
    pub fn kept(&self) -> Option<usize> {
        self.scale
            .as_ref()
            .map(|s| s.iter().filter(|&&v| v != 0.0).count())
    }
}

/// Inverted dropout: kept entries are scaled by `1/(1-rate)` in train mode.
pub fn dropout_forward<R: Rng + ?Sized>(
    x: &DenseMatrix,
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(DenseMatrix, DropoutMask)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.clone(), DropoutMask { scale: None }));
    }
    let keep = 1.0 / (1.0 - rate);
    let scale: Vec<f64> = (0..x.values().len())
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let mut y = x.clone();
    for (v, s) in y.values_mut().iter_mut().zip(&scale) {
        *v *= s;
    }
    Ok((y, DropoutMask { scale: Some(scale) }))
}

pub fn dropout_backward(mask: DropoutMask, grad_y: &DenseMatrix) -> Result<DenseMatrix> {
    let mut g = grad_y.clone();
    if let Some(scale) = mask.scale {
        if scale.len() != g.values().len() {
            return Err(Error::shape("dropout mask does not match gradient"));
        }
        for (v, s) in g.values_mut().iter_mut().zip(&scale) {
            *v *= s;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rate_and_eval_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = DenseMatrix::from_fn(3, 3, |r, c| (r * 3 + c) as f64);
        let (y, m) = dropout_forward(&x, 0.0, Mode::Train, &mut rng).unwrap();
        assert_eq!(y, x);
        assert_eq!(m.kept(), None);
        let (y, _) = dropout_forward(&x, 0.7, Mode::Eval, &mut rng).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn rate_one_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(dropout_forward(&DenseMatrix::zeros(1, 1), 1.0, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn expectation_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = DenseMatrix::from_vec(1000, 1000, vec![1.0; 1_000_000]).unwrap();
        let (y, _) = dropout_forward(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let mean = y.values().iter().sum::<f64>() / 1e6;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn backward_uses_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = DenseMatrix::from_vec(1, 8, vec![1.0; 8]).unwrap();
        let (y, m) = dropout_forward(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let g = dropout_backward(m, &x).unwrap();
        assert_eq!(g, y);
    }
}
