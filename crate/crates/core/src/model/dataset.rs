use crate::error::{Error, Result};

/// Binary-labelled sparse design matrix stored row-wise (CSR).
///
/// Labels are exactly `−1.0` or `+1.0`. `scale` is the global factor that
/// was applied to every row during normalization (1.0 if none).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    d: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
    scale: f64,
    max_row_norm: f64,
}

impl Dataset {
    /// Builds a dataset from sparse rows of `(index, value)` pairs.
    pub fn from_rows(rows: &[Vec<(usize, f64)>], labels: &[f64], d: usize, scale: f64) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Shape(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for (i, row) in rows.iter().enumerate() {
            let mut prev: Option<usize> = None;
            for &(j, v) in row {
                if j >= d {
                    return Err(Error::Shape(format!("row {i}: feature index {j} >= d = {d}")));
                }
                if prev.is_some_and(|p| p >= j) {
                    return Err(Error::Shape(format!("row {i}: indices not strictly increasing")));
                }
                if !v.is_finite() {
                    return Err(Error::Domain(format!("row {i}: non-finite feature value")));
                }
                prev = Some(j);
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        for (i, &y) in labels.iter().enumerate() {
            if y != 1.0 && y != -1.0 {
                return Err(Error::Domain(format!("label {i} is {y}, expected -1 or +1")));
            }
        }
        let mut ds = Dataset {
            d,
            indptr,
            indices,
            values,
            labels: labels.to_vec(),
            scale,
            max_row_norm: 0.0,
        };
        ds.max_row_norm = (0..ds.n()).map(|i| ds.row_norm(i)).fold(0.0, f64::max);
        Ok(ds)
    }

    /// Dense constructor, mostly for tests and small examples. Zeros are dropped.
    pub fn from_dense(rows: &[Vec<f64>], labels: &[f64]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let sparse: Vec<Vec<(usize, f64)>> = rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("dense rows have unequal lengths".into()));
        }
        Self::from_rows(&sparse, labels, d, 1.0)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn max_row_norm(&self) -> f64 {
        self.max_row_norm
    }

    /// Sparse view of row `i` as parallel index/value slices.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn row_pairs(&self, i: usize) -> Vec<(usize, f64)> {
        let (idx, val) = self.row(i);
        idx.iter().copied().zip(val.iter().copied()).collect()
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `⟨x_i, β⟩`.
    #[inline]
    pub fn dot_row(&self, i: usize, beta: &[f64]) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&j, &v)| v * beta[j]).sum()
    }

    /// `out += a · x_i`.
    #[inline]
    pub fn axpy_row(&self, i: usize, a: f64, out: &mut [f64]) {
        let (idx, val) = self.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            out[j] += a * v;
        }
    }

    /// All margins `⟨x_i, β⟩` in index order.
    pub fn margins(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.dot_row(i, beta)).collect()
    }

    /// Returns a dataset made of the given rows, keeping `d` and `scale`.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut labels = Vec::with_capacity(rows.len());
        indptr.push(0);
        for &i in rows {
            let (idx, val) = self.row(i);
            indices.extend_from_slice(idx);
            values.extend_from_slice(val);
            indptr.push(indices.len());
            labels.push(self.labels[i]);
        }
        let mut ds = Dataset {
            d: self.d,
            indptr,
            indices,
            values,
            labels,
            scale: self.scale,
            max_row_norm: 0.0,
        };
        ds.max_row_norm = (0..ds.n()).map(|i| ds.row_norm(i)).fold(0.0, f64::max);
        ds
    }

    /// Multiplies every feature value by `factor` and folds it into `scale`.
    pub(crate) fn rescale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
        self.scale *= factor;
        self.max_row_norm = (0..self.n()).map(|i| self.row_norm(i)).fold(0.0, f64::max);
    }
}
