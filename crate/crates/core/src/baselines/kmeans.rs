use crate::ndcore::{Matrix, Rng};
use crate::{Error, Result};

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_TOL: f64 = 1e-6;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid and its squared distance, lowest index on ties.
fn nearest(centroids: &Matrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..centroids.rows() {
        let d = sq_dist(centroids.row(j), x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct KmeansModel {
    pub centroids: Matrix,
}

impl KmeansModel {
    /// Lloyd iterations from `clusters` distinct seeded training points.
    /// Stops when no centroid moves more than the tolerance.
    pub fn fit(x: &Matrix, clusters: usize, seed: u64) -> Result<Self> {
        let (n, c) = x.shape();
        if n == 0 {
            return Err(Error::config("KMeans needs a non-empty training set"));
        }
        if clusters == 0 || clusters > n {
            return Err(Error::config(format!(
                "KMeans clusters {clusters} outside 1..={n}"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        Rng::new(seed).shuffle(&mut idx);
        let mut centroids = Matrix::from_fn(clusters, c, |j, k| x[(idx[j], k)]);
        for _ in 0..KMEANS_MAX_ITER {
            let assign: Vec<(usize, f64)> =
                crate::par::map_range(n, |t| nearest(&centroids, x.row(t)));
            let mut sums = Matrix::zeros(clusters, c);
            let mut counts = vec![0usize; clusters];
            for (t, &(j, _)) in assign.iter().enumerate() {
                counts[j] += 1;
                for (s, v) in sums.row_mut(j).iter_mut().zip(x.row(t)) {
                    *s += v;
                }
            }
            let mut next = Matrix::zeros(clusters, c);
            let mut taken = vec![false; n];
            for j in 0..clusters {
                if counts[j] > 0 {
                    for (d, s) in next.row_mut(j).iter_mut().zip(sums.row(j)) {
                        *d = s / counts[j] as f64;
                    }
                } else {
                    // reseed from the point farthest from its centroid
                    let mut far = (usize::MAX, -1.0);
                    for (t, &(_, d)) in assign.iter().enumerate() {
                        if !taken[t] && d > far.1 {
                            far = (t, d);
                        }
                    }
                    taken[far.0] = true;
                    next.row_mut(j).copy_from_slice(x.row(far.0));
                }
            }
            let shift = (0..clusters)
                .map(|j| sq_dist(centroids.row(j), next.row(j)).sqrt())
                .fold(0.0, f64::max);
            centroids = next;
            if shift <= KMEANS_TOL {
                break;
            }
        }
        Ok(Self { centroids })
    }

    /// Euclidean distance to the nearest centroid.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.centroids.cols() {
            return Err(Error::Contract(format!(
                "KMeans fitted on {} channels, got {}",
                self.centroids.cols(),
                x.cols()
            )));
        }
        Ok(crate::par::map_range(x.rows(), |t| {
            nearest(&self.centroids, x.row(t)).1.sqrt()
        }))
    }
}
