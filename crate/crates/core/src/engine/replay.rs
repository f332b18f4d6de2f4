use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::EncodedSample;
use crate::rng::{self, stream};

/// Reservoir of past training samples (Algorithm R).
#[derive(Debug, Clone)]
pub struct ExemplarBuffer {
    capacity: usize,
    items: Vec<EncodedSample>,
    seen: u64,
    rng: ChaCha8Rng,
}

impl ExemplarBuffer {
    pub fn new(capacity: usize, seed: u64) -> Self {
        ExemplarBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 20)),
            seen: 0,
            rng: rng::seeded(seed, &[stream::REPLAY]),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn items(&self) -> &[EncodedSample] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// The first C samples fill the buffer; the i-th sample after that
    /// replaces a uniform slot with probability C/i.
    pub fn absorb(&mut self, samples: &[EncodedSample]) {
        if self.capacity == 0 {
            self.seen += samples.len() as u64;
            return;
        }
        for s in samples {
            self.seen += 1;
            if self.items.len() < self.capacity {
                self.items.push(s.clone());
            } else {
                let j = self.rng.random_range(0..self.seen);
                if (j as usize) < self.capacity {
                    self.items[j as usize] = s.clone();
                }
            }
        }
    }

    /// Draws `k` stored samples uniformly with replacement.
    pub fn draw(&mut self, k: usize) -> Vec<EncodedSample> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..k)
            .map(|_| self.items[self.rng.random_range(0..self.items.len())].clone())
            .collect()
    }
}

/// Returns the hour's samples followed by ⌊r·|hour|⌋ replayed ones, then
/// absorbs the hour. Replay precedes absorption so an hour never replays
/// itself.
pub fn replay_mix(hour: &[EncodedSample], buf: &mut ExemplarBuffer, mix_ratio: f64) -> Vec<EncodedSample> {
    let k = (mix_ratio * hour.len() as f64).floor() as usize;
    let mut out = hour.to_vec();
    out.extend(buf.draw(k));
    buf.absorb(hour);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(from: u32, n: u32) -> Vec<EncodedSample> {
        (from..from + n)
            .map(|i| EncodedSample {
                field_indices: vec![i],
                label: 0,
                hour_index: 0,
            })
            .collect()
    }

    #[test]
    fn small_streams_are_kept_whole() {
        let mut b = ExemplarBuffer::new(10, 0);
        b.absorb(&samples(0, 7));
        assert_eq!(b.len(), 7);
        b.absorb(&samples(7, 100));
        assert_eq!(b.len(), 10);
        assert_eq!(b.seen(), 107);
    }

    #[test]
    fn zero_capacity_is_a_no_op() {
        let mut b = ExemplarBuffer::new(0, 0);
        let hour = samples(0, 5);
        let mixed = replay_mix(&hour, &mut b, 1.0);
        assert_eq!(mixed, hour);
        assert!(b.is_empty());
    }

    #[test]
    fn mix_sizes_and_isolation() {
        let mut b = ExemplarBuffer::new(50, 1);
        let first = samples(0, 1000);
        assert_eq!(replay_mix(&first, &mut b, 0.5), first);
        let second = samples(1000, 1000);
        let mixed = replay_mix(&second, &mut b, 0.5);
        assert_eq!(mixed.len(), 1500);
        assert!(mixed[1000..].iter().all(|s| s.field_indices[0] < 1000));
        assert_eq!(replay_mix(&second, &mut b, 0.0), second);
    }

    #[test]
    fn deterministic_under_seed() {
        let run = |seed| {
            let mut b = ExemplarBuffer::new(10, seed);
            b.absorb(&samples(0, 500));
            b.items().to_vec()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }
}
