use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Array2<f64>,
    pub assignment: Vec<usize>,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// A cluster that loses all its points is re-seeded at the point farthest
/// from its current centroid.
pub fn kmeans<R: Rng>(points: ArrayView2<'_, f64>, k: usize, max_iter: usize, rng: &mut R) -> KMeans {
    let n = points.nrows();
    assert!(n > 0 && k > 0, "k-means needs points and clusters");
    let k = k.min(n);
    let dim = points.ncols();

    let mut centroids = Array2::zeros((k, dim));
    centroids.row_mut(0).assign(&points.row(rng.gen_range(0..n)));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centroids.row(c)));
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(points.row(i), centroids.row(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            sums.row_mut(c).scaled_add(1.0, &points.row(i));
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            } else {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(points.row(a), centroids.row(assignment[a]));
                        let db = sq_dist(points.row(b), centroids.row(assignment[b]));
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("non-empty");
                centroids.row_mut(c).assign(&points.row(far));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    KMeans {
        centroids,
        assignment,
    }
}

impl KMeans {
    /// Euclidean distance of each point to its assigned centroid.
    pub fn distances(&self, points: ArrayView2<'_, f64>) -> Vec<f64> {
        self.assignment
            .iter()
            .enumerate()
            .map(|(i, &c)| sq_dist(points.row(i), self.centroids.row(c)).sqrt())
            .collect()
    }
}
