use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// A shuffled pass over `n` samples cut into fixed-size batches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    order: Vec<usize>,
    batch_size: usize,
}

impl BatchPlan {
    pub fn iter(&self) -> std::slice::Chunks<'_, usize> {
        self.order.chunks(self.batch_size)
    }

    pub fn len(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

pub fn batches(n: usize, batch_size: usize, seed: u64) -> Result<BatchPlan> {
    if batch_size == 0 {
        return Err(Error::config("batch_size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed, &[]));
    Ok(BatchPlan { order, batch_size })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_sizes() {
        let p = batches(10, 4, 0).unwrap();
        let sizes: Vec<usize> = p.iter().map(<[usize]>::len).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn oversized_batch() {
        assert_eq!(batches(5, 9, 0).unwrap().iter().count(), 1);
    }

    #[test]
    fn seeds_permute_same_multiset() {
        let a = batches(50, 7, 1).unwrap();
        let b = batches(50, 7, 2).unwrap();
        assert_ne!(a.order(), b.order());
        let mut sa = a.order().to_vec();
        let mut sb = b.order().to_vec();
        sa.sort();
        sb.sort();
        assert_eq!(sa, (0..50).collect::<Vec<_>>());
        assert_eq!(sa, sb);
        assert_eq!(a, batches(50, 7, 1).unwrap());
    }

    #[test]
    fn zero_batch_size() {
        assert!(batches(3, 0, 0).is_err());
    }
}
