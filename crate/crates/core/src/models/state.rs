use rand::Rng;

use super::spec::{ModelKind, ModelSpec};
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, DenseMatrix, NamedTensor, NormConfig, NormState};
use crate::rng::{self, stream};

/// Global bias b₀ and one weight per vocabulary entry.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPart {
    /// Length 1.
    pub bias: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
    pub norm: NormState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub input_norm: NormState,
    pub hidden: Vec<HiddenLayer>,
    pub out_weight: DenseMatrix,
    /// Length 1.
    pub out_bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub vocab_sizes: Vec<usize>,
    pub offsets: Vec<usize>,
    pub embed_dim: usize,
    pub linear: Option<LinearPart>,
    /// `V × d`, rows addressed by `offsets[f] + index`.
    pub embedding: Option<DenseMatrix>,
    pub mlp: Option<Mlp>,
}

fn uniform<R: Rng>(rng: &mut R, bound: f64) -> f64 {
    if bound == 0.0 {
        0.0
    } else {
        rng.random_range(-bound..bound)
    }
}

fn norm_params(cfg: &NormConfig, width: usize) -> usize {
    cfg.parameter_count(width)
}

/// Closed-form learned-parameter count of `spec` over `vocab_sizes`.
pub fn parameter_count(spec: &ModelSpec, vocab_sizes: &[usize]) -> usize {
    let v: usize = vocab_sizes.iter().sum();
    let d = spec.embed_dim;
    let mut n = 0;
    if spec.kind.has_linear() {
        n += v + 1;
    }
    if spec.kind.has_embedding() {
        n += v * d;
    }
    if spec.kind.has_mlp() {
        let mut fan_in = vocab_sizes.len() * d;
        n += norm_params(&spec.norm_embed, fan_in);
        for &w in &spec.mlp_widths {
            n += fan_in * w + w + norm_params(&spec.norm_mlp, w);
            fan_in = w;
        }
        n += fan_in + 1;
    }
    n
}

impl ModelState {
    pub fn init(spec: &ModelSpec, vocab_sizes: &[usize], seed: u64) -> Result<Self> {
        spec.validate()?;
        if vocab_sizes.is_empty() || vocab_sizes.contains(&0) {
            return Err(Error::config("every field needs a vocabulary of at least one entry"));
        }
        let mut rng = rng::seeded(seed, &[stream::INIT]);
        let total: usize = vocab_sizes.iter().sum();
        let offsets = vocab_sizes
            .iter()
            .scan(0, |acc, &s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect();
        let d = spec.embed_dim;
        let num_fields = vocab_sizes.len();

        let linear = spec.kind.has_linear().then(|| LinearPart {
            bias: vec![0.0],
            weights: vec![0.0; total],
        });
        let embedding = spec.kind.has_embedding().then(|| {
            let r = spec.init.embed_range;
            DenseMatrix::from_fn(total, d, |_, _| uniform(&mut rng, r))
        });
        let mlp = spec.kind.has_mlp().then(|| {
            let mut fan_in = num_fields * d;
            let input_norm = NormState::new(&spec.norm_embed, fan_in);
            let mut hidden = Vec::with_capacity(spec.mlp_widths.len());
            for &w in &spec.mlp_widths {
                let bound = spec.init.affine_gain / (fan_in as f64).sqrt();
                hidden.push(HiddenLayer {
                    weight: DenseMatrix::from_fn(fan_in, w, |_, _| uniform(&mut rng, bound)),
                    bias: vec![0.0; w],
                    norm: NormState::new(&spec.norm_mlp, w),
                });
                fan_in = w;
            }
            let bound = spec.init.affine_gain / (fan_in as f64).sqrt();
            Mlp {
                input_norm,
                hidden,
                out_weight: DenseMatrix::from_fn(fan_in, 1, |_, _| uniform(&mut rng, bound)),
                out_bias: vec![0.0],
            }
        });
        Ok(ModelState {
            vocab_sizes: vocab_sizes.to_vec(),
            offsets,
            embed_dim: d,
            linear,
            embedding,
            mlp,
        })
    }

    pub fn num_fields(&self) -> usize {
        self.vocab_sizes.len()
    }

    pub fn total_vocab(&self) -> usize {
        self.vocab_sizes.iter().sum()
    }

    pub fn kind_matches(&self, kind: ModelKind) -> bool {
        self.linear.is_some() == kind.has_linear()
            && self.embedding.is_some() == kind.has_embedding()
            && self.mlp.is_some() == kind.has_mlp()
    }

    /// Visits every dense learned tensor in a fixed order. The sparse tables
    /// (first-order weights, embeddings) are not included.
    pub fn visit_dense(&self, mut f: impl FnMut(&str, &[f64])) {
        if let Some(l) = &self.linear {
            f("linear.bias", &l.bias);
        }
        if let Some(m) = &self.mlp {
            visit_norm(&m.input_norm, "mlp.input_norm", &mut f);
            for (i, h) in m.hidden.iter().enumerate() {
                f(&format!("mlp.{i}.weight"), h.weight.values());
                f(&format!("mlp.{i}.bias"), &h.bias);
                visit_norm(&h.norm, &format!("mlp.{i}.norm"), &mut f);
            }
            f("mlp.out.weight", m.out_weight.values());
            f("mlp.out.bias", &m.out_bias);
        }
    }

    pub fn visit_dense_mut(&mut self, mut f: impl FnMut(&str, &mut [f64])) {
        if let Some(l) = &mut self.linear {
            f("linear.bias", &mut l.bias);
        }
        if let Some(m) = &mut self.mlp {
            visit_norm_mut(&mut m.input_norm, "mlp.input_norm", &mut f);
            for (i, h) in m.hidden.iter_mut().enumerate() {
                f(&format!("mlp.{i}.weight"), h.weight.values_mut());
                f(&format!("mlp.{i}.bias"), &mut h.bias);
                visit_norm_mut(&mut h.norm, &format!("mlp.{i}.norm"), &mut f);
            }
            f("mlp.out.weight", m.out_weight.values_mut());
            f("mlp.out.bias", &mut m.out_bias);
        }
    }

    /// Learned parameters actually allocated.
    pub fn num_parameters(&self) -> usize {
        let mut n = 0;
        self.visit_dense(|_, v| n += v.len());
        n + self.linear.as_ref().map_or(0, |l| l.weights.len())
            + self.embedding.as_ref().map_or(0, |e| e.values().len())
    }

    /// Every tensor including running statistics, ready for serialization.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        let sizes = self.vocab_sizes.iter().map(|&s| s as f64).collect();
        ck.push(NamedTensor::new("meta.vocab_sizes", vec![self.vocab_sizes.len()], sizes));
        if let Some(l) = &self.linear {
            ck.push(NamedTensor::new("linear.bias", vec![1], l.bias.clone()));
            ck.push(NamedTensor::new("linear.weights", vec![l.weights.len()], l.weights.clone()));
        }
        if let Some(e) = &self.embedding {
            ck.push(NamedTensor::new("embedding", vec![e.rows(), e.cols()], e.values().to_vec()));
        }
        if let Some(m) = &self.mlp {
            push_norm(&mut ck, &m.input_norm, "mlp.input_norm");
            for (i, h) in m.hidden.iter().enumerate() {
                ck.push(NamedTensor::new(
                    format!("mlp.{i}.weight"),
                    vec![h.weight.rows(), h.weight.cols()],
                    h.weight.values().to_vec(),
                ));
                ck.push(NamedTensor::new(format!("mlp.{i}.bias"), vec![h.bias.len()], h.bias.clone()));
                push_norm(&mut ck, &h.norm, &format!("mlp.{i}.norm"));
            }
            ck.push(NamedTensor::new(
                "mlp.out.weight",
                vec![m.out_weight.rows(), 1],
                m.out_weight.values().to_vec(),
            ));
            ck.push(NamedTensor::new("mlp.out.bias", vec![1], m.out_bias.clone()));
        }
        ck
    }

    /// Rebuilds a state for `spec` from a checkpoint written by
    /// [`ModelState::to_checkpoint`]. Every tensor must be present with the
    /// expected shape and no extra tensors are allowed.
    pub fn from_checkpoint(spec: &ModelSpec, ck: &Checkpoint) -> Result<Self> {
        let sizes = ck
            .get("meta.vocab_sizes")
            .ok_or_else(|| Error::Checkpoint("missing meta.vocab_sizes".into()))?
            .values
            .iter()
            .map(|&v| v as usize)
            .collect::<Vec<_>>();
        let mut state = ModelState::init(spec, &sizes, 0)?;
        let template = state.to_checkpoint();
        if template.tensors.len() != ck.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors for this model, found {}",
                template.tensors.len(),
                ck.tensors.len()
            )));
        }
        for t in &template.tensors {
            let src = ck
                .get(&t.name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {}", t.name)))?;
            if src.shape != t.shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {} has shape {:?}, expected {:?}",
                    t.name, src.shape, t.shape
                )));
            }
        }
        let get = |name: &str| ck.get(name).expect("checked above").values.clone();
        if let Some(l) = &mut state.linear {
            l.bias = get("linear.bias");
            l.weights = get("linear.weights");
        }
        if let Some(e) = &mut state.embedding {
            *e = DenseMatrix::from_vec(e.rows(), e.cols(), get("embedding"))?;
        }
        if let Some(m) = &mut state.mlp {
            load_norm(&mut m.input_norm, "mlp.input_norm", &get);
            for (i, h) in m.hidden.iter_mut().enumerate() {
                h.weight = DenseMatrix::from_vec(h.weight.rows(), h.weight.cols(), get(&format!("mlp.{i}.weight")))?;
                h.bias = get(&format!("mlp.{i}.bias"));
                load_norm(&mut h.norm, &format!("mlp.{i}.norm"), &get);
            }
            m.out_weight = DenseMatrix::from_vec(m.out_weight.rows(), 1, get("mlp.out.weight"))?;
            m.out_bias = get("mlp.out.bias");
        }
        Ok(state)
    }

    /// SHA-256 of the serialized checkpoint.
    pub fn digest(&self) -> String {
        self.to_checkpoint().digest()
    }
}

fn visit_norm(n: &NormState, prefix: &str, f: &mut impl FnMut(&str, &[f64])) {
    if let Some(a) = &n.alpha {
        f(&format!("{prefix}.alpha"), a);
    }
    if let Some(b) = &n.beta {
        f(&format!("{prefix}.beta"), b);
    }
}

fn visit_norm_mut(n: &mut NormState, prefix: &str, f: &mut impl FnMut(&str, &mut [f64])) {
    if let Some(a) = &mut n.alpha {
        f(&format!("{prefix}.alpha"), a);
    }
    if let Some(b) = &mut n.beta {
        f(&format!("{prefix}.beta"), b);
    }
}

fn push_norm(ck: &mut Checkpoint, n: &NormState, prefix: &str) {
    let parts = [
        ("alpha", &n.alpha),
        ("beta", &n.beta),
        ("running_mean", &n.running_mean),
        ("running_var", &n.running_var),
    ];
    for (name, v) in parts {
        if let Some(v) = v {
            ck.push(NamedTensor::new(format!("{prefix}.{name}"), vec![v.len()], v.clone()));
        }
    }
}

fn load_norm(n: &mut NormState, prefix: &str, get: &impl Fn(&str) -> Vec<f64>) {
    let parts = [
        ("alpha", &mut n.alpha),
        ("beta", &mut n.beta),
        ("running_mean", &mut n.running_mean),
        ("running_var", &mut n.running_var),
    ];
    for (name, v) in parts {
        if let Some(v) = v {
            *v = get(&format!("{prefix}.{name}"));
        }
    }
}
