use rand::Rng;

use super::spec::ModelSpec;
use super::state::ModelState;
use crate::data::EncodedSample;
use crate::error::{Error, Result};
use crate::nn::{
    affine_forward, dropout_forward, embed_forward, norm_forward, norm_infer, relu_forward, sigmoid,
    AffineCache, DenseMatrix, DropoutMask, Mode, NormCache, ReluCache,
};

/// A minibatch resolved to global table rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Sample-major: `rows[b * F + f] = offsets[f] + index`.
    pub rows: Vec<usize>,
    pub labels: Vec<f64>,
}

impl Batch {
    pub fn new<'a>(state: &ModelState, samples: impl IntoIterator<Item = &'a EncodedSample>) -> Result<Self> {
        let f = state.num_fields();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for s in samples {
            if s.field_indices.len() != f {
                return Err(Error::shape(format!(
                    "sample has {} fields, model expects {f}",
                    s.field_indices.len()
                )));
            }
            for (i, &idx) in s.field_indices.iter().enumerate() {
                let idx = idx as usize;
                if idx >= state.vocab_sizes[i] {
                    return Err(Error::IndexOutOfRange {
                        index: idx,
                        rows: state.vocab_sizes[i],
                    });
                }
                rows.push(state.offsets[i] + idx);
            }
            labels.push(f64::from(s.label));
        }
        Ok(Batch { rows, labels })
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug)]
pub(crate) struct LayerCache {
    pub affine: AffineCache,
    pub norm: NormCache,
    pub relu: ReluCache,
    pub dropout: DropoutMask,
}

#[derive(Debug)]
pub(crate) struct MlpCache {
    pub input_norm: NormCache,
    pub layers: Vec<LayerCache>,
    pub out: AffineCache,
}

/// Everything the backward pass needs. Consumed by [`super::backward`].
#[derive(Debug)]
pub struct ForwardCache {
    pub(crate) rows: Vec<usize>,
    pub(crate) labels: Vec<f64>,
    pub(crate) logits: Vec<f64>,
    /// Concatenated embeddings, `B × F·d`.
    pub(crate) embedded: Option<DenseMatrix>,
    pub(crate) mlp: Option<MlpCache>,
}

impl ForwardCache {
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// ReLU on/off pattern over every hidden layer, in layer order.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.mlp
            .iter()
            .flat_map(|m| &m.layers)
            .flat_map(|l| l.relu.active().iter().copied())
            .collect()
    }
}

fn check_kind(state: &ModelState, spec: &ModelSpec) -> Result<()> {
    if !state.kind_matches(spec.kind) || state.embed_dim != spec.embed_dim && spec.kind.has_embedding() {
        return Err(Error::config("model state was built for a different model spec"));
    }
    Ok(())
}

fn first_order(state: &ModelState, batch: &Batch) -> Vec<f64> {
    let f = state.num_fields();
    match &state.linear {
        Some(l) => batch
            .rows
            .chunks(f)
            .map(|s| l.bias[0] + s.iter().map(|&r| l.weights[r]).sum::<f64>())
            .collect(),
        None => vec![0.0; batch.size()],
    }
}

/// ½ Σ_k [(Σ_f v_fk)² − Σ_f v_fk²] per sample.
fn pairwise(embedded: &DenseMatrix, num_fields: usize, d: usize) -> Vec<f64> {
    (0..embedded.rows())
        .map(|b| {
            let row = embedded.row(b);
            let mut total = 0.0;
            for k in 0..d {
                let (mut s, mut sq) = (0.0, 0.0);
                for f in 0..num_fields {
                    let v = row[f * d + k];
                    s += v;
                    sq += v * v;
                }
                total += s * s - sq;
            }
            0.5 * total
        })
        .collect()
}

fn embedded(state: &ModelState, batch: &Batch) -> Result<Option<DenseMatrix>> {
    state
        .embedding
        .as_ref()
        .map(|t| embed_forward(t, &batch.rows, state.num_fields()))
        .transpose()
}

/// First-order plus pairwise logits (the FM part; LR has no pairwise term).
pub fn fm_logits(state: &ModelState, spec: &ModelSpec, batch: &Batch) -> Result<Vec<f64>> {
    check_kind(state, spec)?;
    let mut z = first_order(state, batch);
    if spec.kind.has_pairwise() {
        let e = embedded(state, batch)?.expect("pairwise models have embeddings");
        for (z, p) in z.iter_mut().zip(pairwise(&e, state.num_fields(), state.embed_dim)) {
            *z += p;
        }
    }
    Ok(z)
}

/// MLP logits in eval mode. Zero for models without an MLP.
pub fn dnn_logits(state: &ModelState, spec: &ModelSpec, batch: &Batch) -> Result<Vec<f64>> {
    check_kind(state, spec)?;
    let Some(m) = &state.mlp else {
        return Ok(vec![0.0; batch.size()]);
    };
    let e = embedded(state, batch)?.expect("mlp models have embeddings");
    let mut h = norm_infer(&e, &spec.norm_embed, &m.input_norm)?;
    for layer in &m.hidden {
        let (a, _) = affine_forward(&h, &layer.weight, &layer.bias)?;
        h = if spec.norm_after_activation {
            norm_infer(&relu_forward(&a).0, &spec.norm_mlp, &layer.norm)?
        } else {
            relu_forward(&norm_infer(&a, &spec.norm_mlp, &layer.norm)?).0
        };
    }
    let (out, _) = affine_forward(&h, &m.out_weight, &m.out_bias)?;
    Ok(out.values().to_vec())
}

/// Eval-mode logits. Leaves the state untouched.
pub fn predict_logits(state: &ModelState, spec: &ModelSpec, batch: &Batch) -> Result<Vec<f64>> {
    let mut z = fm_logits(state, spec, batch)?;
    if spec.kind.has_mlp() {
        for (z, d) in z.iter_mut().zip(dnn_logits(state, spec, batch)?) {
            *z += d;
        }
    }
    Ok(z)
}

/// Eval-mode click probabilities.
pub fn predict(state: &ModelState, spec: &ModelSpec, batch: &Batch) -> Result<Vec<f64>> {
    Ok(predict_logits(state, spec, batch)?.into_iter().map(sigmoid).collect())
}

/// Forward pass that records a cache for [`super::backward`]. In train mode
/// batch-norm running statistics are updated and dropout is sampled from `rng`.
pub fn forward<R: Rng + ?Sized>(
    state: &mut ModelState,
    spec: &ModelSpec,
    batch: &Batch,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardCache> {
    check_kind(state, spec)?;
    if batch.is_empty() {
        return Err(Error::shape("empty batch"));
    }
    let f = state.num_fields();
    let d = state.embed_dim;
    let e = embedded(state, batch)?;
    let mut logits = first_order(state, batch);
    if spec.kind.has_pairwise() {
        let e = e.as_ref().expect("pairwise models have embeddings");
        for (z, p) in logits.iter_mut().zip(pairwise(e, f, d)) {
            *z += p;
        }
    }
    let mlp = match &mut state.mlp {
        None => None,
        Some(m) => {
            let x = e.as_ref().expect("mlp models have embeddings");
            let (mut h, input_norm) = norm_forward(x, &spec.norm_embed, &mut m.input_norm, mode)?;
            let mut layers = Vec::with_capacity(m.hidden.len());
            for layer in &mut m.hidden {
                let (a, affine) = affine_forward(&h, &layer.weight, &layer.bias)?;
                let (act, norm, relu) = if spec.norm_after_activation {
                    let (r, relu) = relu_forward(&a);
                    let (n, norm) = norm_forward(&r, &spec.norm_mlp, &mut layer.norm, mode)?;
                    (n, norm, relu)
                } else {
                    let (n, norm) = norm_forward(&a, &spec.norm_mlp, &mut layer.norm, mode)?;
                    let (r, relu) = relu_forward(&n);
                    (r, norm, relu)
                };
                let (out, dropout) = dropout_forward(&act, spec.dropout, mode, rng)?;
                h = out;
                layers.push(LayerCache {
                    affine,
                    norm,
                    relu,
                    dropout,
                });
            }
            let (out, out_cache) = affine_forward(&h, &m.out_weight, &m.out_bias)?;
            for (z, o) in logits.iter_mut().zip(out.values()) {
                *z += o;
            }
            Some(MlpCache {
                input_norm,
                layers,
                out: out_cache,
            })
        }
    };
    Ok(ForwardCache {
        rows: batch.rows.clone(),
        labels: batch.labels.clone(),
        logits,
        embedded: e,
        mlp,
    })
}
