//! Labeled / unlabeled / held-out partition of the nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which labels are visible to training and query strategies.
///
/// Non-test, non-validation nodes are split into the labeled set (with
/// class ids) and the unlabeled set. Test and validation nodes are never
/// candidates and their classes are not stored here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelState {
    k: usize,
    labels: Vec<Option<usize>>,
    labeled: Vec<usize>,
    n_init: usize,
    unlabeled: Vec<bool>,
    test_mask: Vec<bool>,
    val_mask: Vec<bool>,
    budget: usize,
    budget_remaining: usize,
}

impl LabelState {
    /// `init` holds the initially revealed `(node, class)` pairs; `budget`
    /// is the number of further queries allowed.
    pub fn new(
        k: usize,
        test_mask: Vec<bool>,
        val_mask: Vec<bool>,
        init: &[(usize, usize)],
        budget: usize,
    ) -> Result<Self> {
        let n = test_mask.len();
        if val_mask.len() != n {
            return Err(Error::Shape(format!(
                "test mask has {n} entries, validation mask {}",
                val_mask.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| test_mask[i] && val_mask[i]) {
            return Err(Error::Split(format!("node {i} is in both test and validation sets")));
        }
        let unlabeled = (0..n).map(|i| !test_mask[i] && !val_mask[i]).collect();
        let mut state = Self {
            k,
            labels: vec![None; n],
            labeled: Vec::with_capacity(init.len() + budget),
            n_init: init.len(),
            unlabeled,
            test_mask,
            val_mask,
            budget,
            budget_remaining: budget,
        };
        for &(node, class) in init {
            state.insert(node, class)?;
        }
        Ok(state)
    }

    fn insert(&mut self, node: usize, class: usize) -> Result<()> {
        if node >= self.n() {
            return Err(Error::NodeOutOfRange { id: node, n: self.n() });
        }
        if class >= self.k {
            return Err(Error::ClassCountMismatch {
                meta: self.k,
                found: class + 1,
            });
        }
        if !self.unlabeled[node] {
            return Err(Error::Split(format!("node {node} is not an unlabeled candidate")));
        }
        self.unlabeled[node] = false;
        self.labels[node] = Some(class);
        self.labeled.push(node);
        Ok(())
    }

    /// Records the oracle's answer for a queried node and spends one unit of budget.
    pub fn reveal(&mut self, node: usize, class: usize) -> Result<()> {
        if self.budget_remaining == 0 {
            return Err(Error::Config("labeling budget exhausted".into()));
        }
        self.insert(node, class)?;
        self.budget_remaining -= 1;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn label(&self, node: usize) -> Option<usize> {
        self.labels[node]
    }

    /// Labeled nodes in the order they were labeled (initial ones first).
    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn labeled_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.labeled
            .iter()
            .map(|&v| (v, self.labels[v].expect("labeled node has a class")))
    }

    /// Nodes obtained through queries, in query order.
    pub fn queried(&self) -> &[usize] {
        &self.labeled[self.n_init..]
    }

    pub fn is_unlabeled(&self, node: usize) -> bool {
        self.unlabeled[node]
    }

    /// Unlabeled candidate nodes in ascending id order.
    pub fn unlabeled(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.unlabeled[i]).collect()
    }

    pub fn num_unlabeled(&self) -> usize {
        self.unlabeled.iter().filter(|&&u| u).count()
    }

    pub fn test_mask(&self) -> &[bool] {
        &self.test_mask
    }

    pub fn val_mask(&self) -> &[bool] {
        &self.val_mask
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn budget_remaining(&self) -> usize {
        self.budget_remaining
    }
}
