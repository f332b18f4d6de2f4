use std::collections::BTreeMap;

/// Row-sparse gradient for a table of fixed row width.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRows {
    width: usize,
    rows: BTreeMap<usize, Vec<f64>>,
}

impl SparseRows {
    pub fn new(width: usize) -> Self {
        SparseRows {
            width,
            rows: BTreeMap::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, row: usize) -> Option<&[f64]> {
        self.rows.get(&row).map(Vec::as_slice)
    }

    /// Adds `grad` into `row`, creating it if absent.
    pub fn accumulate(&mut self, row: usize, grad: &[f64]) {
        debug_assert_eq!(grad.len(), self.width);
        let slot = self
            .rows
            .entry(row)
            .or_insert_with(|| vec![0.0; grad.len()]);
        for (s, g) in slot.iter_mut().zip(grad) {
            *s += g;
        }
    }

    pub fn row_mut(&mut self, row: usize) -> &mut Vec<f64> {
        let w = self.width;
        self.rows.entry(row).or_insert_with(|| vec![0.0; w])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.rows.iter().map(|(&r, g)| (r, g.as_slice()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (usize, &mut Vec<f64>)> {
        self.rows.iter_mut().map(|(&r, g)| (r, g))
    }

    pub fn row_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.keys().copied()
    }

    /// Dense `n_rows × width` copy.
    pub fn to_dense(&self, n_rows: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_rows * self.width];
        for (r, g) in &self.rows {
            out[r * self.width..(r + 1) * self.width].copy_from_slice(g);
        }
        out
    }
}
