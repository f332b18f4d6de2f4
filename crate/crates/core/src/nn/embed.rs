use super::{DenseMatrix, SparseRows};
use crate::error::{Error, Result};

/// Gathers `num_fields` table rows per sample and concatenates them.
/// `rows` is sample-major: `rows[b * num_fields + f]`.
pub fn embed_forward(table: &DenseMatrix, rows: &[usize], num_fields: usize) -> Result<DenseMatrix> {
    if num_fields == 0 || rows.len() % num_fields != 0 {
        return Err(Error::shape(format!(
            "{} row indices do not divide into {num_fields} fields",
            rows.len()
        )));
    }
    let d = table.cols();
    let batch = rows.len() / num_fields;
    let mut out = DenseMatrix::zeros(batch, num_fields * d);
    for (b, sample) in rows.chunks(num_fields).enumerate() {
        let dst = out.row_mut(b);
        for (f, &r) in sample.iter().enumerate() {
            if r >= table.rows() {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    rows: table.rows(),
                });
            }
            dst[f * d..(f + 1) * d].copy_from_slice(table.row(r));
        }
    }
    Ok(out)
}

/// Scatters the output gradient back onto the looked-up rows, summing repeats.
pub fn embed_backward(grad_out: &DenseMatrix, rows: &[usize], num_fields: usize) -> Result<SparseRows> {
    if num_fields == 0 || grad_out.rows() * num_fields != rows.len() || grad_out.cols() % num_fields != 0 {
        return Err(Error::shape(format!(
            "gradient {:?} does not match {} lookups over {num_fields} fields",
            grad_out.shape(),
            rows.len()
        )));
    }
    let d = grad_out.cols() / num_fields;
    let mut grads = SparseRows::new(d);
    for (b, sample) in rows.chunks(num_fields).enumerate() {
        let g = grad_out.row(b);
        for (f, &r) in sample.iter().enumerate() {
            grads.accumulate(r, &g[f * d..(f + 1) * d]);
        }
    }
    Ok(grads)
}
