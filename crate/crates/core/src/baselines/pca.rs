use nalgebra::{DMatrix, SymmetricEigen};

use crate::ndcore::Matrix;
use crate::{Error, Result};

/// Mean and top-`k` principal directions (rows of `basis`).
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub basis: Matrix,
}

impl PcaModel {
    pub fn fit(x: &Matrix, rank: usize) -> Result<Self> {
        let (n, c) = x.shape();
        if n == 0 {
            return Err(Error::config("PCA needs a non-empty training set"));
        }
        if rank == 0 || rank > c {
            return Err(Error::config(format!("PCA rank {rank} outside 1..={c}")));
        }
        let mut mean = vec![0.0; c];
        for t in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(t)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = DMatrix::<f64>::zeros(c, c);
        for t in 0..n {
            let row = x.row(t);
            for i in 0..c {
                let di = row[i] - mean[i];
                for j in i..c {
                    cov[(i, j)] += di * (row[j] - mean[j]);
                }
            }
        }
        for i in 0..c {
            for j in i..c {
                let v = cov[(i, j)] / n as f64;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..c).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let basis = Matrix::from_fn(rank, c, |r, j| eig.eigenvectors[(j, order[r])]);
        Ok(Self { mean, basis })
    }

    pub fn rank(&self) -> usize {
        self.basis.rows()
    }

    /// Squared reconstruction error of each row through the subspace.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.mean.len() {
            return Err(Error::Contract(format!(
                "PCA fitted on {} channels, got {}",
                self.mean.len(),
                x.cols()
            )));
        }
        Ok(crate::par::map_range(x.rows(), |t| {
            let centered: Vec<f64> = x
                .row(t)
                .iter()
                .zip(&self.mean)
                .map(|(v, m)| v - m)
                .collect();
            let mut coeffs = vec![0.0; self.rank()];
            self.basis.matvec_acc(&centered, &mut coeffs);
            let mut resid = centered;
            self.basis
                .matvec_t_acc(&coeffs.iter().map(|v| -v).collect::<Vec<_>>(), &mut resid);
            resid.iter().map(|r| r * r).sum()
        }))
    }
}
