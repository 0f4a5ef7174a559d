use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, RunSeeds};
use crate::error::{Error, Result};

/// Redraws of the validation set before giving up on initial labels.
pub const MAX_SPLIT_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub test_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    /// Initial `(node, class)` pairs, `l_init` per class, grouped by class.
    pub initial: Vec<(usize, usize)>,
}

impl Splits {
    pub fn test_nodes(&self) -> Vec<usize> {
        mask_nodes(&self.test_mask)
    }

    pub fn val_nodes(&self) -> Vec<usize> {
        mask_nodes(&self.val_mask)
    }
}

fn mask_nodes(mask: &[bool]) -> Vec<usize> {
    (0..mask.len()).filter(|&i| mask[i]).collect()
}

fn sample_mask(pool: &[usize], size: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &v in pool.choose_multiple(rng, size) {
        mask[v] = true;
    }
    mask
}

/// Draws the test set (from `seeds.test`), a validation set from the
/// remaining nodes (from `seeds.val`), then `l_init` initial labels per class
/// among the rest (from the run seed).
///
/// If some class has fewer than `l_init` nodes left, the validation set is
/// redrawn up to [`MAX_SPLIT_RETRIES`] times before failing.
pub fn make_splits(labels: &[usize], k: usize, cfg: &ExperimentConfig, seeds: &RunSeeds) -> Result<Splits> {
    let (test_size, val_size, l_init) = (cfg.test_size, cfg.val_size, cfg.l_init);
    let n = labels.len();
    if n < test_size + val_size + l_init * k {
        return Err(Error::Split(format!(
            "{n} nodes cannot hold {test_size} test + {val_size} validation + {} initial labels",
            l_init * k
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&c| c >= k) {
        return Err(Error::ClassCountMismatch { meta: k, found: bad + 1 });
    }
    let all: Vec<usize> = (0..n).collect();
    let test_mask = sample_mask(&all, test_size, n, &mut ChaCha8Rng::seed_from_u64(seeds.test));
    let rest: Vec<usize> = all.iter().copied().filter(|&v| !test_mask[v]).collect();

    let mut val_rng = ChaCha8Rng::seed_from_u64(seeds.val);
    let mut init_rng = ChaCha8Rng::seed_from_u64(seeds.stream(0));
    let mut short = 0;
    for _ in 0..MAX_SPLIT_RETRIES {
        let val_mask = sample_mask(&rest, val_size, n, &mut val_rng);
        let mut by_class = vec![Vec::new(); k];
        for &v in &rest {
            if !val_mask[v] {
                by_class[labels[v]].push(v);
            }
        }
        if let Some(c) = (0..k).find(|&c| by_class[c].len() < l_init) {
            short = c;
            continue;
        }
        let initial = by_class
            .iter()
            .enumerate()
            .flat_map(|(c, nodes)| {
                let mut picked: Vec<usize> = nodes.choose_multiple(&mut init_rng, l_init).copied().collect();
                picked.sort_unstable();
                picked.into_iter().map(move |v| (v, c))
            })
            .collect();
        return Ok(Splits {
            test_mask,
            val_mask,
            initial,
        });
    }
    Err(Error::Split(format!(
        "class {short} has fewer than {l_init} nodes outside test/validation after {MAX_SPLIT_RETRIES} draws"
    )))
}
