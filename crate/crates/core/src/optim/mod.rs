//! SGD, Adam, AdamW and RMSprop over a [`ModelState`].
//!
//! Sparse tables (embeddings, first-order weights) keep full moment tables,
//! but only rows present in the gradient are read or written. Untouched rows
//! neither decay nor move.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Gradients, ModelState};
use crate::nn::{Checkpoint, NamedTensor, SparseRows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimKind {
    Sgd,
    Adam,
    AdamW,
    RmsProp,
}

impl OptimKind {
    pub const ALL: [OptimKind; 4] = [OptimKind::Sgd, OptimKind::Adam, OptimKind::AdamW, OptimKind::RmsProp];

    fn uses_first_moment(self) -> bool {
        matches!(self, OptimKind::Adam | OptimKind::AdamW)
    }

    fn uses_second_moment(self) -> bool {
        self != OptimKind::Sgd
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimSpec {
    pub kind: OptimKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// RMSprop decay.
    pub rho: f64,
    pub eps: f64,
    /// Decoupled decay, AdamW only.
    pub weight_decay: f64,
}

impl Default for OptimSpec {
    fn default() -> Self {
        OptimSpec {
            kind: OptimKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            rho: 0.9,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl OptimSpec {
    pub fn new(kind: OptimKind) -> Self {
        OptimSpec {
            kind,
            ..OptimSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2), ("rho", self.rho)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::config("eps must be positive"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay must be non-negative"));
        }
        if self.weight_decay > 0.0 && self.kind != OptimKind::AdamW {
            return Err(Error::config("weight_decay is only defined for adamw"));
        }
        Ok(())
    }
}

/// First and second moment buffers. Unused buffers are empty.
#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn new(kind: OptimKind, len: usize) -> Self {
        Moments {
            m: vec![0.0; if kind.uses_first_moment() { len } else { 0 }],
            v: vec![0.0; if kind.uses_second_moment() { len } else { 0 }],
        }
    }

    fn window(&mut self, start: usize, len: usize) -> (&mut [f64], &mut [f64]) {
        let m = if self.m.is_empty() { &mut [][..] } else { &mut self.m[start..start + len] };
        let v = if self.v.is_empty() { &mut [][..] } else { &mut self.v[start..start + len] };
        (m, v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    kind: OptimKind,
    step: u64,
    dense: Vec<(String, Moments)>,
    first_order: Option<Moments>,
    embedding: Option<Moments>,
}

/// Applies one update of `kind` to `params` in place. `t` is the already
/// incremented step count used for bias correction. `m`/`v` may be empty
/// when the optimizer does not use them.
pub fn update_slice(
    spec: &OptimSpec,
    t: u64,
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
) {
    let lr = spec.learning_rate;
    match spec.kind {
        OptimKind::Sgd => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        OptimKind::Adam | OptimKind::AdamW => {
            let (b1, b2) = (spec.beta1, spec.beta2);
            let c1 = 1.0 - b1.powf(t as f64);
            let c2 = 1.0 - b2.powf(t as f64);
            let decay = if spec.kind == OptimKind::AdamW { lr * spec.weight_decay } else { 0.0 };
            for i in 0..params.len() {
                let g = grads[i];
                if decay != 0.0 {
                    params[i] -= decay * params[i];
                }
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                params[i] -= lr * mh / (vh.sqrt() + spec.eps);
            }
        }
        OptimKind::RmsProp => {
            let rho = spec.rho;
            for i in 0..params.len() {
                let g = grads[i];
                v[i] = rho * v[i] + (1.0 - rho) * g * g;
                params[i] -= lr * g / (v[i].sqrt() + spec.eps);
            }
        }
    }
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("gradient of {name}")))
    }
}

fn check_sparse(name: &str, g: &Option<SparseRows>) -> Result<()> {
    if let Some(g) = g {
        for (_, row) in g.iter() {
            check_finite(name, row)?;
        }
    }
    Ok(())
}

impl OptimState {
    pub fn new(spec: &OptimSpec, model: &ModelState) -> Self {
        let mut dense = Vec::new();
        model.visit_dense(|name, v| dense.push((name.to_string(), Moments::new(spec.kind, v.len()))));
        OptimState {
            kind: spec.kind,
            step: 0,
            dense,
            first_order: model.linear.as_ref().map(|l| Moments::new(spec.kind, l.weights.len())),
            embedding: model
                .embedding
                .as_ref()
                .map(|e| Moments::new(spec.kind, e.values().len())),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn kind(&self) -> OptimKind {
        self.kind
    }

    /// Applies one update. Gradients are validated before anything changes.
    pub fn step(&mut self, model: &mut ModelState, grads: &Gradients, spec: &OptimSpec) -> Result<()> {
        if spec.kind != self.kind {
            return Err(Error::config("optimizer state was built for a different optimizer"));
        }
        if grads.dense.len() != self.dense.len()
            || grads.dense.iter().zip(&self.dense).any(|((a, g), (b, m))| {
                a != b || (!m.v.is_empty() && m.v.len() != g.len()) || (!m.m.is_empty() && m.m.len() != g.len())
            })
        {
            return Err(Error::shape("gradients do not match optimizer state"));
        }
        for (name, g) in &grads.dense {
            check_finite(name, g)?;
        }
        check_sparse("linear.weights", &grads.first_order)?;
        check_sparse("embedding", &grads.embedding)?;
        if grads.first_order.is_some() != self.first_order.is_some()
            || grads.embedding.is_some() != self.embedding.is_some()
        {
            return Err(Error::shape("sparse gradients do not match optimizer state"));
        }
        if let (Some(g), Some(l)) = (&grads.first_order, &model.linear) {
            if let Some(r) = g.row_indices().find(|&r| r >= l.weights.len()) {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    rows: l.weights.len(),
                });
            }
        }
        if let (Some(g), Some(e)) = (&grads.embedding, &model.embedding) {
            if g.width() != e.cols() {
                return Err(Error::shape("embedding gradient width does not match table"));
            }
            if let Some(r) = g.row_indices().find(|&r| r >= e.rows()) {
                return Err(Error::IndexOutOfRange { index: r, rows: e.rows() });
            }
        }

        self.step += 1;
        let t = self.step;
        let mut moments = self.dense.iter_mut();
        let mut gs = grads.dense.iter();
        model.visit_dense_mut(|_, p| {
            let (_, mo) = moments.next().expect("length checked");
            let (_, g) = gs.next().expect("length checked");
            let (m, v) = mo.window(0, p.len());
            update_slice(spec, t, p, g, m, v);
        });
        if let (Some(g), Some(l), Some(mo)) = (&grads.first_order, &mut model.linear, &mut self.first_order) {
            for (r, row) in g.iter() {
                let (m, v) = mo.window(r, 1);
                update_slice(spec, t, &mut l.weights[r..r + 1], row, m, v);
            }
        }
        if let (Some(g), Some(e), Some(mo)) = (&grads.embedding, &mut model.embedding, &mut self.embedding) {
            let d = e.cols();
            for (r, row) in g.iter() {
                let (m, v) = mo.window(r * d, d);
                update_slice(spec, t, e.row_mut(r), row, m, v);
            }
        }
        Ok(())
    }

    /// Appends moment buffers and the step count under `optim.*` names.
    pub fn write_into(&self, ck: &mut Checkpoint) {
        ck.push(NamedTensor::new("optim.step", vec![1], vec![self.step as f64]));
        let mut push = |name: &str, mo: &Moments| {
            for (suffix, buf) in [("m", &mo.m), ("v", &mo.v)] {
                if !buf.is_empty() {
                    ck.push(NamedTensor::new(format!("optim.{name}.{suffix}"), vec![buf.len()], buf.clone()));
                }
            }
        };
        for (name, mo) in &self.dense {
            push(name, mo);
        }
        if let Some(mo) = &self.first_order {
            push("linear.weights", mo);
        }
        if let Some(mo) = &self.embedding {
            push("embedding", mo);
        }
    }

    /// Restores buffers written by [`OptimState::write_into`] into a state
    /// freshly built for the same model and optimizer.
    pub fn read_from(&mut self, ck: &Checkpoint) -> Result<()> {
        let step = ck
            .get("optim.step")
            .ok_or_else(|| Error::Checkpoint("missing optim.step".into()))?;
        self.step = step.values.first().copied().unwrap_or(0.0) as u64;
        let load = |name: &str, mo: &mut Moments| -> Result<()> {
            for (suffix, buf) in [("m", &mut mo.m), ("v", &mut mo.v)] {
                if buf.is_empty() {
                    continue;
                }
                let key = format!("optim.{name}.{suffix}");
                let t = ck
                    .get(&key)
                    .ok_or_else(|| Error::Checkpoint(format!("missing tensor {key}")))?;
                if t.values.len() != buf.len() {
                    return Err(Error::Checkpoint(format!("tensor {key} has the wrong length")));
                }
                buf.copy_from_slice(&t.values);
            }
            Ok(())
        };
        for (name, mo) in &mut self.dense {
            load(name, mo)?;
        }
        if let Some(mo) = &mut self.first_order {
            load("linear.weights", mo)?;
        }
        if let Some(mo) = &mut self.embedding {
            load("embedding", mo)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EncodedSample;
    use crate::models::{backward, forward, Batch, ModelKind, ModelSpec};
    use crate::nn::{bce_with_logits, Mode};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(kind: ModelKind) -> (ModelSpec, ModelState) {
        let spec = ModelSpec {
            kind,
            embed_dim: 3,
            mlp_widths: vec![4],
            ..ModelSpec::default()
        };
        let st = ModelState::init(&spec, &[5, 4], 1).unwrap();
        (spec, st)
    }

    fn grads(spec: &ModelSpec, st: &mut ModelState, seed: u64) -> Gradients {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<_> = (0..8)
            .map(|_| EncodedSample {
                field_indices: vec![rng.random_range(0..3), rng.random_range(0..2)],
                label: rng.random_range(0..2),
                hour_index: 0,
            })
            .collect();
        let batch = Batch::new(st, &samples).unwrap();
        let cache = forward(st, spec, &batch, Mode::Train, &mut rng).unwrap();
        backward(st, spec, cache).unwrap()
    }

    fn zero(g: &Gradients) -> Gradients {
        let mut z = g.clone();
        z.dense.iter_mut().for_each(|(_, v)| v.iter_mut().for_each(|x| *x = 0.0));
        for s in [&mut z.first_order, &mut z.embedding].into_iter().flatten() {
            s.iter_mut().for_each(|(_, v)| v.iter_mut().for_each(|x| *x = 0.0));
        }
        z
    }

    #[test]
    fn zero_gradient_sgd_is_identity() {
        let (spec, mut st) = model(ModelKind::DeepFm);
        let g = zero(&grads(&spec, &mut st, 0));
        let before = st.clone();
        let o = OptimSpec::new(OptimKind::Sgd);
        let mut os = OptimState::new(&o, &st);
        os.step(&mut st, &g, &o).unwrap();
        assert_eq!(st, before);
        assert_eq!(os.step_count(), 1);
    }

    #[test]
    fn adam_first_step_is_learning_rate() {
        let o = OptimSpec::default();
        let mut p = vec![0.5; 4];
        let (mut m, mut v) = (vec![0.0; 4], vec![0.0; 4]);
        update_slice(&o, 1, &mut p, &[1.0; 4], &mut m, &mut v);
        // m̂ = 1, v̂ = 1 → Δ = −η/(1+eps)
        for x in p {
            assert!((x - (0.5 - 1e-3 / (1.0 + 1e-8))).abs() < 1e-15);
        }
    }

    #[test]
    fn adamw_without_decay_is_bitwise_adam() {
        let (spec, mut st) = model(ModelKind::DeepFm);
        let g = grads(&spec, &mut st, 3);
        let (mut a, mut b) = (st.clone(), st.clone());
        let oa = OptimSpec::new(OptimKind::Adam);
        let ob = OptimSpec::new(OptimKind::AdamW);
        let (mut sa, mut sb) = (OptimState::new(&oa, &a), OptimState::new(&ob, &b));
        for _ in 0..3 {
            sa.step(&mut a, &g, &oa).unwrap();
            sb.step(&mut b, &g, &ob).unwrap();
        }
        assert_eq!(a.to_checkpoint().to_bytes(), b.to_checkpoint().to_bytes());
    }

    #[test]
    fn adamw_decays_before_the_adam_update() {
        let o = OptimSpec {
            weight_decay: 0.1,
            ..OptimSpec::new(OptimKind::AdamW)
        };
        let mut p = vec![2.0];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        update_slice(&o, 1, &mut p, &[0.0], &mut m, &mut v);
        assert_eq!(p[0], 2.0 - 1e-3 * 0.1 * 2.0);
    }

    #[test]
    fn non_finite_gradient_names_tensor_and_leaves_state() {
        let (spec, mut st) = model(ModelKind::Dnn);
        let mut g = grads(&spec, &mut st, 0);
        g.dense[1].1[0] = f64::NAN;
        let name = g.dense[1].0.clone();
        let o = OptimSpec::default();
        let mut os = OptimState::new(&o, &st);
        let before = st.clone();
        let err = os.step(&mut st, &g, &o).unwrap_err();
        assert!(err.to_string().contains(&name), "{err}");
        assert_eq!(st, before);
        assert_eq!(os.step_count(), 0);
    }

    #[test]
    fn untouched_rows_are_lazy() {
        let (spec, mut st) = model(ModelKind::Fm);
        let g = grads(&spec, &mut st, 0);
        for kind in OptimKind::ALL {
            let o = OptimSpec::new(kind);
            let mut s = st.clone();
            let mut os = OptimState::new(&o, &s);
            os.step(&mut s, &g, &o).unwrap();
            let touched: Vec<_> = g.embedding.as_ref().unwrap().row_indices().collect();
            let (e0, e1) = (st.embedding.as_ref().unwrap(), s.embedding.as_ref().unwrap());
            for r in 0..e0.rows() {
                if !touched.contains(&r) {
                    assert_eq!(e0.row(r), e1.row(r));
                }
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let (spec, mut st) = model(ModelKind::DeepFm);
        let g = grads(&spec, &mut st, 0);
        let o = OptimSpec::default();
        let mut os = OptimState::new(&o, &st);
        os.step(&mut st, &g, &o).unwrap();
        let mut ck = Checkpoint::default();
        os.write_into(&mut ck);
        let mut back = OptimState::new(&o, &st);
        back.read_from(&Checkpoint::from_bytes(&ck.to_bytes()).unwrap()).unwrap();
        assert_eq!(back, os);
    }

    proptest! {
        #[test]
        fn sparse_equals_dense_on_touched_rows(
            kind_ix in 0usize..4,
            steps in 1usize..5,
            seed in 0u64..1000,
        ) {
            let kind = OptimKind::ALL[kind_ix];
            let (spec, st0) = model(ModelKind::Fm);
            let o = OptimSpec {
                weight_decay: if kind == OptimKind::AdamW { 0.01 } else { 0.0 },
                ..OptimSpec::new(kind)
            };
            let mut sparse = st0.clone();
            let mut os = OptimState::new(&o, &sparse);
            let table0 = st0.embedding.as_ref().unwrap().values().to_vec();
            let d = st0.embed_dim;
            // Dense reference: identical gradient sequence applied to the whole table.
            let mut dense = table0.clone();
            let mut mm = vec![0.0; if kind.uses_first_moment() { dense.len() } else { 0 }];
            let mut vv = vec![0.0; if kind.uses_second_moment() { dense.len() } else { 0 }];
            let mut touched = std::collections::BTreeSet::new();
            // Same rows every step, so lazy and dense moments agree on them.
            for s in 0..steps {
                let mut tmp = st0.clone();
                let g = grads(&spec, &mut tmp, seed);
                let mut g = g;
                if let Some(e) = &mut g.embedding {
                    e.iter_mut().for_each(|(_, r)| r.iter_mut().for_each(|x| *x *= 1.0 + s as f64));
                }
                os.step(&mut sparse, &g, &o).unwrap();
                let gd = g.embedding.as_ref().unwrap();
                touched.extend(gd.row_indices());
                let full = gd.to_dense(table0.len() / d);
                update_slice(&o, (s + 1) as u64, &mut dense, &full, &mut mm, &mut vv);
            }
            let got = sparse.embedding.as_ref().unwrap();
            for r in touched {
                for k in 0..d {
                    prop_assert!((got.get(r, k) - dense[r * d + k]).abs() <= 1e-12);
                }
            }
        }
    }

    /// 2-D separable logistic problem; returns the loss after `steps` updates.
    fn logistic_run(kind: OptimKind, steps: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut xs = Vec::new();
        while xs.len() < 200 {
            let x: [f64; 2] = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
            let s = x[0] + 0.5 * x[1];
            if s.abs() > 4.0 {
                xs.push((x, if s > 0.0 { 1.0 } else { 0.0 }));
            }
        }
        let o = OptimSpec::new(kind);
        let mut w = vec![0.0; 2];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        let loss = |w: &[f64]| {
            xs.iter()
                .map(|(x, y)| bce_with_logits(w[0] * x[0] + w[1] * x[1], *y).unwrap().0)
                .sum::<f64>()
                / xs.len() as f64
        };
        for t in 1..=steps {
            let mut g = [0.0; 2];
            for (x, y) in &xs {
                let (_, d) = bce_with_logits(w[0] * x[0] + w[1] * x[1], *y).unwrap();
                g[0] += d * x[0] / xs.len() as f64;
                g[1] += d * x[1] / xs.len() as f64;
            }
            update_slice(&o, t as u64, &mut w, &g, &mut m, &mut v);
        }
        loss(&w)
    }

    #[test]
    fn every_optimizer_converges_on_logistic_problem() {
        for kind in OptimKind::ALL {
            let l = logistic_run(kind, 5000);
            assert!(l < 0.01, "{kind:?} reached {l}");
        }
    }
}
