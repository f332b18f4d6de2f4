use std::collections::{BTreeSet, HashMap};

use super::forward::{Batch, ForwardCache};
use super::spec::ModelSpec;
use super::state::ModelState;
use crate::error::{Error, Result};
use crate::nn::{
    affine_backward, bce_with_logits, dropout_backward, embed_backward, norm_backward, relu_backward,
    DenseMatrix, SparseRows,
};

/// Gradients of the mean batch loss plus L2 terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// In [`ModelState::visit_dense`] order.
    pub dense: Vec<(String, Vec<f64>)>,
    /// Width 1, rows are global first-order indices.
    pub first_order: Option<SparseRows>,
    pub embedding: Option<SparseRows>,
    /// Mean binary cross-entropy before regularization.
    pub loss: f64,
}

impl Gradients {
    pub fn dense(&self, name: &str) -> Option<&[f64]> {
        self.dense.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn is_finite(&self) -> bool {
        let sparse_ok = |s: &Option<SparseRows>| {
            s.as_ref()
                .is_none_or(|s| s.iter().all(|(_, r)| r.iter().all(|v| v.is_finite())))
        };
        self.loss.is_finite()
            && self.dense.iter().all(|(_, v)| v.iter().all(|x| x.is_finite()))
            && sparse_ok(&self.first_order)
            && sparse_ok(&self.embedding)
    }
}

fn touched(rows: &[usize]) -> BTreeSet<usize> {
    rows.iter().copied().collect()
}

/// ½λ_e Σ‖touched rows‖² + ½λ_m Σ‖affine weights‖². Touched rows cover both
/// the embedding table and the first-order weights.
pub fn regularization(state: &ModelState, spec: &ModelSpec, batch: &Batch) -> f64 {
    let mut r = 0.0;
    if spec.l2_embed > 0.0 {
        let mut sq = 0.0;
        for row in touched(&batch.rows) {
            if let Some(l) = &state.linear {
                sq += l.weights[row] * l.weights[row];
            }
            if let Some(e) = &state.embedding {
                sq += e.row(row).iter().map(|v| v * v).sum::<f64>();
            }
        }
        r += 0.5 * spec.l2_embed * sq;
    }
    if spec.l2_mlp > 0.0 {
        if let Some(m) = &state.mlp {
            let sq: f64 = m
                .hidden
                .iter()
                .map(|h| &h.weight)
                .chain([&m.out_weight])
                .flat_map(|w| w.values())
                .map(|v| v * v)
                .sum();
            r += 0.5 * spec.l2_mlp * sq;
        }
    }
    r
}

/// Backward pass through the cached forward computation.
pub fn backward(state: &ModelState, spec: &ModelSpec, cache: ForwardCache) -> Result<Gradients> {
    let ForwardCache {
        rows,
        labels,
        logits,
        embedded,
        mlp,
    } = cache;
    let b = labels.len();
    let f = state.num_fields();
    let d = state.embed_dim;
    if rows.len() != b * f || logits.len() != b {
        return Err(Error::shape("forward cache does not match model"));
    }
    let n = b as f64;
    let mut loss = 0.0;
    let mut dz = Vec::with_capacity(b);
    for (&z, &y) in logits.iter().zip(&labels) {
        let (l, g) = bce_with_logits(z, y)?;
        loss += l;
        dz.push(g / n);
    }
    loss /= n;

    let mut dense: HashMap<String, Vec<f64>> = HashMap::new();
    let mut first_order = None;
    if let Some(l) = &state.linear {
        dense.insert("linear.bias".into(), vec![dz.iter().sum()]);
        let mut g = SparseRows::new(1);
        for (s, &gz) in rows.chunks(f).zip(&dz) {
            for &r in s {
                g.accumulate(r, &[gz]);
            }
        }
        if spec.l2_embed > 0.0 {
            for (r, v) in g.iter_mut() {
                v[0] += spec.l2_embed * l.weights[r];
            }
        }
        first_order = Some(g);
    }

    let mut embedding = state.embedding.as_ref().map(|_| SparseRows::new(d));
    if spec.kind.has_pairwise() {
        let e = embedded.as_ref().ok_or_else(|| Error::shape("cache lacks embeddings"))?;
        let g = embedding.as_mut().expect("pairwise models have embeddings");
        let mut sum = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for (bi, s) in rows.chunks(f).enumerate() {
            let row = e.row(bi);
            sum.iter_mut().for_each(|v| *v = 0.0);
            for fi in 0..f {
                for k in 0..d {
                    sum[k] += row[fi * d + k];
                }
            }
            for (fi, &r) in s.iter().enumerate() {
                for k in 0..d {
                    buf[k] = dz[bi] * (sum[k] - row[fi * d + k]);
                }
                g.accumulate(r, &buf);
            }
        }
    }

    if let (Some(m), Some(mc)) = (&state.mlp, mlp) {
        let gz = DenseMatrix::from_vec(b, 1, dz.clone())?;
        let out = affine_backward(mc.out, &m.out_weight, &gz)?;
        let mut w = out.weight.into_values();
        add_l2(&mut w, m.out_weight.values(), spec.l2_mlp);
        dense.insert("mlp.out.weight".into(), w);
        dense.insert("mlp.out.bias".into(), out.bias);
        let mut g = out.input;
        for (i, (lc, layer)) in mc.layers.into_iter().zip(&m.hidden).enumerate().rev() {
            g = dropout_backward(lc.dropout, &g)?;
            let ng;
            if spec.norm_after_activation {
                ng = norm_backward(&spec.norm_mlp, lc.norm, &layer.norm, &g)?;
                g = relu_backward(lc.relu, &ng.input)?;
            } else {
                let gr = relu_backward(lc.relu, &g)?;
                ng = norm_backward(&spec.norm_mlp, lc.norm, &layer.norm, &gr)?;
                g = ng.input.clone();
            }
            insert_norm(&mut dense, &format!("mlp.{i}.norm"), ng.alpha, ng.beta);
            let ag = affine_backward(lc.affine, &layer.weight, &g)?;
            let mut w = ag.weight.into_values();
            add_l2(&mut w, layer.weight.values(), spec.l2_mlp);
            dense.insert(format!("mlp.{i}.weight"), w);
            dense.insert(format!("mlp.{i}.bias"), ag.bias);
            g = ag.input;
        }
        let ng = norm_backward(&spec.norm_embed, mc.input_norm, &m.input_norm, &g)?;
        insert_norm(&mut dense, "mlp.input_norm", ng.alpha, ng.beta);
        let eg = embed_backward(&ng.input, &rows, f)?;
        let acc = embedding.as_mut().expect("mlp models have embeddings");
        for (r, v) in eg.iter() {
            acc.accumulate(r, v);
        }
    }

    if let (Some(g), Some(table)) = (embedding.as_mut(), &state.embedding) {
        if spec.l2_embed > 0.0 {
            for (r, v) in g.iter_mut() {
                add_l2(v, table.row(r), spec.l2_embed);
            }
        }
    }

    let mut ordered = Vec::with_capacity(dense.len());
    let mut missing = None;
    state.visit_dense(|name, _| match dense.remove(name) {
        Some(v) => ordered.push((name.to_string(), v)),
        None => missing = Some(name.to_string()),
    });
    if let Some(name) = missing {
        return Err(Error::shape(format!("no gradient produced for {name}")));
    }
    Ok(Gradients {
        dense: ordered,
        first_order,
        embedding,
        loss,
    })
}

fn add_l2(g: &mut [f64], w: &[f64], lambda: f64) {
    if lambda > 0.0 {
        g.iter_mut().zip(w).for_each(|(g, w)| *g += lambda * w);
    }
}

fn insert_norm(dense: &mut HashMap<String, Vec<f64>>, prefix: &str, a: Option<Vec<f64>>, b: Option<Vec<f64>>) {
    if let Some(a) = a {
        dense.insert(format!("{prefix}.alpha"), a);
    }
    if let Some(b) = b {
        dense.insert(format!("{prefix}.beta"), b);
    }
}
