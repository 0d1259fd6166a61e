use crate::ndcore::Matrix;
use crate::{Error, Result};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exact brute-force k-nearest-neighbour scorer.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnModel {
    pub train: Matrix,
    pub k: usize,
}

impl KnnModel {
    pub fn fit(x: &Matrix, k: usize) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::config("KNN needs a non-empty training set"));
        }
        if k == 0 {
            return Err(Error::config("KNN needs k >= 1"));
        }
        Ok(Self {
            train: x.clone(),
            k,
        })
    }

    /// Mean Euclidean distance to the `k` nearest training vectors
    /// (fewer if the training set is smaller).
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.train.cols() {
            return Err(Error::Contract(format!(
                "KNN fitted on {} channels, got {}",
                self.train.cols(),
                x.cols()
            )));
        }
        let k = self.k.min(self.train.rows());
        Ok(crate::par::map_range(x.rows(), |t| {
            let q = x.row(t);
            // sorted k smallest squared distances
            let mut best: Vec<f64> = Vec::with_capacity(k + 1);
            for i in 0..self.train.rows() {
                let d = sq_dist(q, self.train.row(i));
                if best.len() < k || d < best[k - 1] {
                    let pos = best.partition_point(|&b| b <= d);
                    best.insert(pos, d);
                    best.truncate(k);
                }
            }
            best.iter().map(|d| d.sqrt()).sum::<f64>() / k as f64
        }))
    }
}
