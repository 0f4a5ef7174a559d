//! Sparse undirected graphs and their normalized adjacency operators.
//!
//! The raw adjacency `A` is stored in CSR form, symmetric, unweighted, with
//! no self-loops and no duplicate entries. Two weighted variants are derived
//! from it:
//!
//! * [`AdjacencyKind::GcnSelfLoop`]: `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃`
//!   is the degree matrix of `A + I`. Used by the GCN layers.
//! * [`AdjacencyKind::PlainSymmetric`]: `D^{-1/2} A D^{-1/2}`. Rows of
//!   isolated nodes are empty. Used by label spreading.

pub mod bundle;
mod features;

use std::sync::OnceLock;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use features::{dropout_scales, FeatureDropout, FeatureMatrix};

/// Below this many output cells `spmm` stays on the calling thread.
const PAR_THRESHOLD: usize = 1 << 16;

#[derive(Debug)]
pub struct SparseGraph {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    gcn: OnceLock<NormalizedAdjacency>,
    plain: OnceLock<NormalizedAdjacency>,
}

impl Clone for SparseGraph {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            gcn: OnceLock::new(),
            plain: OnceLock::new(),
        }
    }
}

impl PartialEq for SparseGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }
}

impl SparseGraph {
    /// Builds a graph from an edge list given in either orientation.
    ///
    /// Edges are symmetrized, duplicates collapse, and self-loops are dropped.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, v) in edges {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::NodeOutOfRange { id, n });
                }
            }
            if u == v {
                continue;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut row in adj {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            gcn: OnceLock::new(),
            plain: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.col_idx.len() / 2
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[node]..self.row_ptr[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.row_ptr[node + 1] - self.row_ptr[node]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Undirected edges as `(u, v)` with `u < v`, in CSR order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Cached normalized operator of the requested kind.
    pub fn normalized(&self, kind: AdjacencyKind) -> &NormalizedAdjacency {
        match kind {
            AdjacencyKind::GcnSelfLoop => self.gcn.get_or_init(|| normalize(self, kind)),
            AdjacencyKind::PlainSymmetric => self.plain.get_or_init(|| normalize(self, kind)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjacencyKind {
    GcnSelfLoop,
    PlainSymmetric,
}

/// A symmetric, real-weighted CSR operator derived from a [`SparseGraph`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    kind: AdjacencyKind,
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Computes the normalized adjacency of `g`.
pub fn normalize(g: &SparseGraph, kind: AdjacencyKind) -> NormalizedAdjacency {
    let n = g.n();
    let self_loop = kind == AdjacencyKind::GcnSelfLoop;
    let deg: Vec<f64> = (0..n)
        .map(|i| (g.degree(i) + usize::from(self_loop)) as f64)
        .collect();
    // One rounding in the sqrt instead of two keeps symmetric cases exact.
    let w = |i: usize, j: usize| 1.0 / (deg[i] * deg[j]).sqrt();

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(g.col_idx.len() + if self_loop { n } else { 0 });
    let mut values = Vec::with_capacity(col_idx.capacity());
    row_ptr.push(0);
    for i in 0..n {
        let nbrs = g.neighbors(i);
        // Keep columns sorted: the self-loop slots in at position i.
        let split = nbrs.partition_point(|&j| j < i);
        for &j in &nbrs[..split] {
            col_idx.push(j);
            values.push(w(i, j));
        }
        if self_loop {
            col_idx.push(i);
            values.push(1.0 / deg[i]);
        }
        for &j in &nbrs[split..] {
            col_idx.push(j);
            values.push(w(i, j));
        }
        row_ptr.push(col_idx.len());
    }
    NormalizedAdjacency {
        kind,
        n,
        row_ptr,
        col_idx,
        values,
    }
}

impl NormalizedAdjacency {
    pub fn kind(&self) -> AdjacencyKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, weight)` pairs of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                out[[i, j]] = w;
            }
        }
        out
    }

    /// Sparse-dense product `self · m`.
    pub fn spmm(&self, m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.n, m.ncols()));
        self.spmm_into(m, &mut out)?;
        Ok(out)
    }

    /// Writes `self · m` into `out`, overwriting it.
    pub fn spmm_into(&self, m: ArrayView2<'_, f64>, out: &mut Array2<f64>) -> Result<()> {
        if m.nrows() != self.n {
            return Err(Error::Shape(format!(
                "spmm: operator is {}x{}, right-hand side has {} rows",
                self.n,
                self.n,
                m.nrows()
            )));
        }
        if out.dim() != (self.n, m.ncols()) {
            return Err(Error::Shape(format!(
                "spmm: output is {:?}, expected ({}, {})",
                out.dim(),
                self.n,
                m.ncols()
            )));
        }
        let h = m.ncols();
        if h == 0 {
            return Ok(());
        }
        let m = m.as_standard_layout();
        let m = m.as_slice().expect("standard layout");
        let fill = |(i, row): (usize, &mut [f64])| {
            row.fill(0.0);
            for (j, w) in self.row(i) {
                let src = &m[j * h..][..h];
                row.iter_mut().zip(src).for_each(|(o, &v)| *o += w * v);
            }
        };
        let run = |dst: &mut [f64]| {
            if self.n * h >= PAR_THRESHOLD {
                dst.par_chunks_mut(h).enumerate().for_each(fill);
            } else {
                dst.chunks_mut(h).enumerate().for_each(fill);
            }
        };
        match out.as_slice_mut() {
            Some(dst) => run(dst),
            None => {
                let mut tmp = vec![0.0; self.n * h];
                run(&mut tmp);
                out.assign(&ArrayView2::from_shape((self.n, h), &tmp).expect("shape matches"));
            }
        }
        Ok(())
    }

    /// `self · v` for a single column.
    pub fn spmv(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.row(i).map(|(j, w)| w * v[j]).sum();
        }
    }
}
