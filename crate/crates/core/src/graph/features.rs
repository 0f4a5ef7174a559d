use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};

/// Dense `n × d` node features.
///
/// A compressed view of the non-zero entries is kept alongside the dense
/// data: bag-of-words features are overwhelmingly zero and the first GCN
/// layer only ever multiplies them from the left.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Array2<f64>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Per-non-zero inverted-dropout scale (`0` or `1/(1-p)`).
#[derive(Debug, Clone)]
pub struct FeatureDropout {
    scale: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        let mut row_ptr = Vec::with_capacity(data.nrows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in data.rows() {
            for (j, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    col_idx.push(j);
                    values.push(x);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            data,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Scales every row to unit L1 norm; all-zero rows stay zero.
    pub fn row_normalized(&self) -> Self {
        let mut data = self.data.clone();
        for mut row in data.rows_mut() {
            let s: f64 = row.iter().map(|x| x.abs()).sum();
            if s > 0.0 {
                row.mapv_inplace(|x| x / s);
            }
        }
        Self::new(data).expect("scaling finite rows stays finite")
    }

    /// Samples an inverted-dropout mask over the non-zero entries.
    pub fn sample_dropout<R: Rng + ?Sized>(&self, p: f64, rng: &mut R) -> FeatureDropout {
        FeatureDropout {
            scale: dropout_scales(self.values.len(), p, rng),
        }
    }

    /// `X · w`, optionally with dropout applied to `X` first.
    pub fn matmul(&self, w: ArrayView2<'_, f64>, dropout: Option<&FeatureDropout>) -> Result<Array2<f64>> {
        if w.nrows() != self.d() {
            return Err(Error::Shape(format!(
                "features are {}x{}, weight has {} rows",
                self.n(),
                self.d(),
                w.nrows()
            )));
        }
        let h = w.ncols();
        let w = w.as_standard_layout();
        let w = w.as_slice().expect("standard layout");
        let mut out = vec![0.0; self.n() * h];
        for (i, row) in out.chunks_exact_mut(h.max(1)).enumerate().take(self.n()) {
            for e in self.row_ptr[i]..self.row_ptr[i + 1] {
                let x = self.values[e] * dropout.map_or(1.0, |m| m.scale[e]);
                if x != 0.0 {
                    let src = &w[self.col_idx[e] * h..][..h];
                    row.iter_mut().zip(src).for_each(|(o, &v)| *o += x * v);
                }
            }
        }
        Ok(Array2::from_shape_vec((self.n(), h), out).expect("shape matches"))
    }

    /// `Xᵀ · g` (with the same dropout mask used in the forward pass).
    pub fn t_matmul(&self, g: ArrayView2<'_, f64>, dropout: Option<&FeatureDropout>) -> Result<Array2<f64>> {
        if g.nrows() != self.n() {
            return Err(Error::Shape(format!(
                "features have {} rows, gradient has {}",
                self.n(),
                g.nrows()
            )));
        }
        let h = g.ncols();
        let g = g.as_standard_layout();
        let g = g.as_slice().expect("standard layout");
        let mut out = vec![0.0; self.d() * h];
        for i in 0..self.n() {
            let gi = &g[i * h..][..h];
            for e in self.row_ptr[i]..self.row_ptr[i + 1] {
                let x = self.values[e] * dropout.map_or(1.0, |m| m.scale[e]);
                if x != 0.0 {
                    let dst = &mut out[self.col_idx[e] * h..][..h];
                    dst.iter_mut().zip(gi).for_each(|(o, &v)| *o += x * v);
                }
            }
        }
        Ok(Array2::from_shape_vec((self.d(), h), out).expect("shape matches"))
    }
}

/// `len` inverted-dropout factors: 0 with probability `p`, else `1/(1−p)`.
/// Draws come from bulk `u32` fills compared against `p · 2³²`.
pub fn dropout_scales<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    let threshold = (p * 4_294_967_296.0) as u64;
    let mut bits = vec![0u32; len];
    rng.fill(&mut bits[..]);
    bits.into_iter()
        .map(|b| if (b as u64) < threshold { 0.0 } else { keep })
        .collect()
}
