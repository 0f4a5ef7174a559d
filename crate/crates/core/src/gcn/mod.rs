//! Two-layer graph convolutional network trained by manual backpropagation.
//!
//! ```text
//! logits = Â · dropout(ReLU(Â · dropout(X) · W1)) · W2
//! probs  = softmax(logits)                       (row-wise)
//! loss   = mean_{i ∈ V_l} −ln probs[i, y_i] + λ‖W1‖²_F
//! ```
//!
//! `Â` is the self-loop normalized adjacency. Dropout is inverted (scaled
//! by `1/(1-p)` at training time) and only active in training passes.

mod adam;
pub mod metrics;

use ndarray::{Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{dropout_scales, AdjacencyKind, FeatureMatrix, NormalizedAdjacency};
use crate::labels::LabelState;

pub use adam::Adam;
pub use metrics::{evaluate, F1Scores};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcnConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    /// L2 coefficient λ.
    pub weight_decay: f64,
    /// Also penalize the output layer (default: first layer only).
    pub regularize_all: bool,
}

impl Default for GcnConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            dropout: 0.5,
            lr: 0.01,
            weight_decay: 5e-4,
            regularize_all: false,
        }
    }
}

/// Class posterior and intermediate activations of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    /// Row-stochastic `n × K`.
    pub probs: Array2<f64>,
    pub logits: Array2<f64>,
    /// Post-ReLU first-layer activations, `n × h`.
    pub hidden: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct GcnModel {
    config: GcnConfig,
    w1: Array2<f64>,
    w2: Array2<f64>,
    adam: Adam,
    rng: ChaCha8Rng,
}

/// Everything the backward pass needs from a forward pass.
struct Tape {
    x_drop: Option<crate::graph::FeatureDropout>,
    pre_relu: Array2<f64>,
    h_scale: Option<Array2<f64>>,
    h_drop: Array2<f64>,
    post: Posterior,
}

fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let r = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-r..r))
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut probs = logits.clone();
    for mut row in probs.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let s = row.sum();
        row.mapv_inplace(|x| x / s);
    }
    probs
}

fn check_adj(adj: &NormalizedAdjacency, x: &FeatureMatrix) -> Result<()> {
    if adj.kind() != AdjacencyKind::GcnSelfLoop {
        return Err(Error::Shape("GCN layers need the self-loop normalized adjacency".into()));
    }
    if adj.n() != x.n() {
        return Err(Error::Shape(format!(
            "adjacency has {} nodes, features {}",
            adj.n(),
            x.n()
        )));
    }
    Ok(())
}

impl GcnModel {
    /// Glorot-initialized model for `d` input features and `k` classes.
    pub fn new(d: usize, k: usize, config: GcnConfig, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", config.dropout)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = glorot(d, config.hidden, &mut rng);
        let w2 = glorot(config.hidden, k, &mut rng);
        Ok(Self::from_weights(config, w1, w2, rng.gen()))
    }

    pub fn from_weights(config: GcnConfig, w1: Array2<f64>, w2: Array2<f64>, seed: u64) -> Self {
        let adam = Adam::new(&[w1.dim(), w2.dim()]);
        Self {
            config,
            w1,
            w2,
            adam,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn config(&self) -> &GcnConfig {
        &self.config
    }

    pub fn w1(&self) -> &Array2<f64> {
        &self.w1
    }

    pub fn w2(&self) -> &Array2<f64> {
        &self.w2
    }

    pub fn w1_mut(&mut self) -> &mut Array2<f64> {
        &mut self.w1
    }

    pub fn w2_mut(&mut self) -> &mut Array2<f64> {
        &mut self.w2
    }

    pub fn adam(&self) -> &Adam {
        &self.adam
    }

    pub fn num_classes(&self) -> usize {
        self.w2.ncols()
    }

    /// λ·(‖W1‖² [+ ‖W2‖²]).
    pub fn l2_penalty(&self) -> f64 {
        let sq = |w: &Array2<f64>| w.iter().map(|x| x * x).sum::<f64>();
        let mut p = sq(&self.w1);
        if self.config.regularize_all {
            p += sq(&self.w2);
        }
        self.config.weight_decay * p
    }

    fn run(
        &self,
        adj: &NormalizedAdjacency,
        x: &FeatureMatrix,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Tape> {
        check_adj(adj, x)?;
        let p = self.config.dropout;
        let (x_drop, h_mask_rng) = match rng {
            Some(rng) if p > 0.0 => (Some(x.sample_dropout(p, rng)), Some(rng)),
            _ => (None, None),
        };
        let support = x.matmul(self.w1.view(), x_drop.as_ref())?;
        let pre_relu = adj.spmm(support.view())?;
        let hidden = pre_relu.mapv(|v| v.max(0.0));
        let (h_scale, h_drop) = match h_mask_rng {
            Some(rng) => {
                let scale = Array2::from_shape_vec(hidden.dim(), dropout_scales(hidden.len(), p, rng))
                    .expect("shape matches");
                let dropped = &hidden * &scale;
                (Some(scale), dropped)
            }
            None => (None, hidden.clone()),
        };
        let logits = adj.spmm(h_drop.dot(&self.w2).view())?;
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("GCN logits"));
        }
        let probs = softmax_rows(&logits);
        Ok(Tape {
            x_drop,
            pre_relu,
            h_scale,
            h_drop,
            post: Posterior {
                probs,
                logits,
                hidden,
            },
        })
    }

    /// Inference-mode forward pass (no dropout). Deterministic.
    pub fn forward(&self, adj: &NormalizedAdjacency, x: &FeatureMatrix) -> Result<Posterior> {
        Ok(self.run(adj, x, None)?.post)
    }

    /// Training-mode forward pass; consumes dropout randomness from the model's rng.
    pub fn forward_train(&mut self, adj: &NormalizedAdjacency, x: &FeatureMatrix) -> Result<Posterior> {
        let mut rng = self.rng.clone();
        let tape = self.run(adj, x, Some(&mut rng))?;
        self.rng = rng;
        Ok(tape.post)
    }

    fn backward(
        &self,
        adj: &NormalizedAdjacency,
        x: &FeatureMatrix,
        state: &LabelState,
        tape: &Tape,
    ) -> Result<(f64, Gradients)> {
        let loss = loss(&tape.post, state, self)?;
        let m = state.labeled().len() as f64;

        let mut d_logits = Array2::zeros(tape.post.probs.dim());
        for (i, y) in state.labeled_pairs() {
            let mut row = d_logits.row_mut(i);
            row.assign(&tape.post.probs.row(i));
            row[y] -= 1.0;
            row.mapv_inplace(|v| v / m);
        }
        // Â is symmetric, so Âᵀ· is Â·.
        let d_s2 = adj.spmm(d_logits.view())?;
        let mut g2 = tape.h_drop.t().dot(&d_s2);
        let mut d_h = d_s2.dot(&self.w2.t());
        if let Some(scale) = &tape.h_scale {
            d_h *= scale;
        }
        Zip::from(&mut d_h)
            .and(&tape.pre_relu)
            .for_each(|g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
        let d_s1 = adj.spmm(d_h.view())?;
        let mut g1 = x.t_matmul(d_s1.view(), tape.x_drop.as_ref())?;

        let lambda = self.config.weight_decay;
        g1.scaled_add(2.0 * lambda, &self.w1);
        if self.config.regularize_all {
            g2.scaled_add(2.0 * lambda, &self.w2);
        }
        Ok((loss, Gradients { w1: g1, w2: g2 }))
    }

    /// Loss and analytic gradients with dropout disabled.
    pub fn loss_and_gradients(
        &self,
        adj: &NormalizedAdjacency,
        x: &FeatureMatrix,
        state: &LabelState,
    ) -> Result<(f64, Gradients)> {
        let tape = self.run(adj, x, None)?;
        self.backward(adj, x, state, &tape)
    }

    /// One full-batch Adam step on the labeled set. Returns the pre-step loss.
    pub fn train_step(
        &mut self,
        adj: &NormalizedAdjacency,
        x: &FeatureMatrix,
        state: &LabelState,
        lr: f64,
    ) -> Result<f64> {
        if state.labeled().is_empty() {
            return Err(Error::EmptyLabeledSet);
        }
        let mut rng = self.rng.clone();
        let tape = self.run(adj, x, Some(&mut rng))?;
        self.rng = rng;
        let (loss, grads) = self.backward(adj, x, state, &tape)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch: self.adam.step_count() as usize,
                loss,
            });
        }
        self.adam
            .update(&mut [&mut self.w1, &mut self.w2], &[grads.w1, grads.w2], lr);
        if self.w1.iter().chain(self.w2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch: self.adam.step_count() as usize,
                loss,
            });
        }
        Ok(loss)
    }

    /// Re-draws the weights and clears the optimizer state.
    pub fn reinitialize(&mut self) {
        let (d, h) = self.w1.dim();
        let k = self.w2.ncols();
        self.w1 = glorot(d, h, &mut self.rng);
        self.w2 = glorot(h, k, &mut self.rng);
        self.adam.reset();
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            d: self.w1.nrows(),
            k: self.w2.ncols(),
            step: self.adam.step_count(),
            w1: self.w1.iter().copied().collect(),
            w2: self.w2.iter().copied().collect(),
        }
    }
}

/// Mean cross-entropy over the labeled nodes plus the L2 penalty.
pub fn loss(post: &Posterior, state: &LabelState, model: &GcnModel) -> Result<f64> {
    if state.labeled().is_empty() {
        return Err(Error::EmptyLabeledSet);
    }
    let mut nll = 0.0;
    for (i, y) in state.labeled_pairs() {
        let z = post.logits.row(i);
        let max = z.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        nll += lse - z[y];
    }
    Ok(nll / state.labeled().len() as f64 + model.l2_penalty())
}

/// JSON-serializable weights plus hyperparameter header.
///
/// Weights are stored row-major. Meant for debugging; the layout may change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: GcnConfig,
    pub d: usize,
    pub k: usize,
    pub step: u64,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl Checkpoint {
    pub fn into_model(self, seed: u64) -> Result<GcnModel> {
        let h = self.config.hidden;
        let w1 = Array2::from_shape_vec((self.d, h), self.w1)
            .map_err(|e| Error::Shape(format!("checkpoint w1: {e}")))?;
        let w2 = Array2::from_shape_vec((h, self.k), self.w2)
            .map_err(|e| Error::Shape(format!("checkpoint w2: {e}")))?;
        Ok(GcnModel::from_weights(self.config, w1, w2, seed))
    }
}

/// Row sums of a probability matrix; used in invariant checks.
pub fn row_sums(probs: &Array2<f64>) -> Vec<f64> {
    probs.sum_axis(Axis(1)).to_vec()
}
