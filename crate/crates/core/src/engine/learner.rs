use serde::{Deserialize, Serialize};

use crate::data::{batches, EncodedSample};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalResult};
use crate::models::{backward, forward, predict, Batch, ModelSpec, ModelState};
use crate::nn::{Checkpoint, Mode, NormKind};
use crate::optim::{OptimSpec, OptimState};
use crate::rng::{self, stream};

/// Training statistics for one pass over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassStats {
    pub batches: usize,
    pub samples: usize,
    /// Samples that could not form a batch (a lone sample under batch norm).
    pub dropped: usize,
    pub mean_loss: Option<f64>,
}

/// A model together with its optimizer.
#[derive(Debug, Clone)]
pub struct Learner {
    pub spec: ModelSpec,
    pub state: ModelState,
    pub optim_spec: OptimSpec,
    pub optim: OptimState,
}

impl Learner {
    pub fn new(spec: ModelSpec, optim_spec: OptimSpec, vocab_sizes: &[usize], seed: u64) -> Result<Self> {
        optim_spec.validate()?;
        let state = ModelState::init(&spec, vocab_sizes, seed)?;
        let optim = OptimState::new(&optim_spec, &state);
        Ok(Learner {
            spec,
            state,
            optim_spec,
            optim,
        })
    }

    fn uses_batch_norm(&self) -> bool {
        self.spec.kind.has_mlp()
            && (self.spec.norm_embed.kind == NormKind::Batch || self.spec.norm_mlp.kind == NormKind::Batch)
    }

    pub fn reset_optimizer(&mut self) {
        self.optim = OptimState::new(&self.optim_spec, &self.state);
    }

    /// One gradient step on `samples`.
    pub fn train_batch<R: rand::Rng + ?Sized>(&mut self, samples: &[&EncodedSample], rng: &mut R) -> Result<f64> {
        let batch = Batch::new(&self.state, samples.iter().copied())?;
        let cache = forward(&mut self.state, &self.spec, &batch, Mode::Train, rng)?;
        let grads = backward(&self.state, &self.spec, cache)?;
        self.optim.step(&mut self.state, &grads, &self.optim_spec)?;
        Ok(grads.loss)
    }

    /// One shuffled pass. `tags` key the batch order and dropout streams so
    /// every pass of a run is reproducible on its own. A trailing batch of
    /// one sample is folded into the previous batch when batch norm is used.
    pub fn train_pass(
        &mut self,
        samples: &[EncodedSample],
        batch_size: usize,
        seed: u64,
        tags: &[u64],
        phase: &str,
    ) -> Result<PassStats> {
        let batch_tags: Vec<u64> = tags.to_vec();
        let plan = batches(samples.len(), batch_size, rng::derive(seed, &batch_tags))?;
        let mut dropout_tags = vec![stream::DROPOUT];
        dropout_tags.extend_from_slice(tags);
        let mut drop_rng = rng::seeded(seed, &dropout_tags);

        let mut chunks: Vec<&[usize]> = plan.iter().collect();
        let order = plan.order();
        let mut dropped = 0;
        if self.uses_batch_norm() && chunks.last().is_some_and(|c| c.len() == 1) {
            if chunks.len() >= 2 {
                chunks.pop();
                let n = chunks.len();
                let start = (n - 1) * batch_size;
                chunks[n - 1] = &order[start..];
            } else {
                chunks.clear();
                dropped = 1;
            }
        }
        let mut loss_sum = 0.0;
        let mut weight = 0usize;
        for (i, chunk) in chunks.iter().enumerate() {
            let refs: Vec<&EncodedSample> = chunk.iter().map(|&j| &samples[j]).collect();
            let loss = self.train_batch(&refs, &mut drop_rng).map_err(|e| Error::Training {
                phase: phase.to_string(),
                batch: i,
                source: Box::new(e),
            })?;
            loss_sum += loss * refs.len() as f64;
            weight += refs.len();
        }
        Ok(PassStats {
            batches: chunks.len(),
            samples: weight,
            dropped,
            mean_loss: (weight > 0).then(|| loss_sum / weight as f64),
        })
    }

    /// Model weights, running statistics and optimizer moments.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = self.state.to_checkpoint();
        self.optim.write_into(&mut ck);
        ck
    }

    pub fn restore(spec: ModelSpec, optim_spec: OptimSpec, ck: &Checkpoint) -> Result<Self> {
        let model_only = Checkpoint {
            tensors: ck.tensors.iter().filter(|t| !t.name.starts_with("optim.")).cloned().collect(),
        };
        let state = ModelState::from_checkpoint(&spec, &model_only)?;
        let mut optim = OptimState::new(&optim_spec, &state);
        optim.read_from(ck)?;
        Ok(Learner {
            spec,
            state,
            optim_spec,
            optim,
        })
    }
}

/// Scores `samples` with a frozen model in eval mode.
pub fn evaluate_model(
    state: &ModelState,
    spec: &ModelSpec,
    samples: &[EncodedSample],
    chunk: usize,
) -> Result<EvalResult> {
    let mut probs = Vec::with_capacity(samples.len());
    for part in samples.chunks(chunk.max(1)) {
        let batch = Batch::new(state, part)?;
        probs.extend(predict(state, spec, &batch)?);
    }
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    evaluate(&probs, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use crate::nn::NormConfig;

    fn data(n: usize) -> Vec<EncodedSample> {
        (0..n)
            .map(|i| EncodedSample {
                field_indices: vec![(i % 3) as u32, (i % 2) as u32],
                label: (i % 2) as u8,
                hour_index: 0,
            })
            .collect()
    }

    fn bn_learner() -> Learner {
        let spec = ModelSpec {
            kind: ModelKind::Dnn,
            embed_dim: 2,
            mlp_widths: vec![3],
            norm_mlp: NormConfig::batch(),
            ..ModelSpec::default()
        };
        Learner::new(spec, OptimSpec::default(), &[3, 2], 0).unwrap()
    }

    #[test]
    fn trailing_singleton_is_folded_under_batch_norm() {
        let mut l = bn_learner();
        let stats = l.train_pass(&data(9), 4, 0, &[1], "test").unwrap();
        assert_eq!((stats.batches, stats.samples, stats.dropped), (2, 9, 0));
        let stats = l.train_pass(&data(1), 4, 0, &[1], "test").unwrap();
        assert_eq!((stats.batches, stats.samples, stats.dropped), (0, 0, 1));
    }

    #[test]
    fn every_sample_is_used_once_per_pass() {
        let spec = ModelSpec {
            kind: ModelKind::Lr,
            ..ModelSpec::default()
        };
        let mut l = Learner::new(spec, OptimSpec::default(), &[3, 2], 0).unwrap();
        let stats = l.train_pass(&data(10), 3, 0, &[1], "test").unwrap();
        assert_eq!((stats.batches, stats.samples), (4, 10));
    }

    #[test]
    fn checkpoint_restores_learner() {
        let mut l = bn_learner();
        l.train_pass(&data(20), 4, 0, &[1], "test").unwrap();
        let ck = Checkpoint::from_bytes(&l.checkpoint().to_bytes()).unwrap();
        let r = Learner::restore(l.spec.clone(), l.optim_spec.clone(), &ck).unwrap();
        assert_eq!(r.state, l.state);
        assert_eq!(r.optim, l.optim);
    }

    #[test]
    fn training_errors_carry_batch_index() {
        let mut l = bn_learner();
        let mut bad = data(8);
        bad[7].field_indices[0] = 99;
        let err = l.train_pass(&bad, 100, 0, &[1], "pretrain").unwrap_err();
        assert!(matches!(err, Error::Training { batch: 0, .. }), "{err}");
        assert!(err.to_string().starts_with("pretrain batch 0"));
    }
}
