//! Reference detectors sharing STAND's score-sequence interface.

mod kmeans;
mod knn;
mod logreg;
mod pca;
mod random;

use serde::{Deserialize, Serialize};

use crate::data::TimeSeriesDataset;
use crate::ndcore::Matrix;
use crate::stand::{Checkpoint, StandConfig, StandModel, STAND_KIND};
use crate::{Error, Result};

pub use kmeans::{KmeansModel, KMEANS_MAX_ITER, KMEANS_TOL};
pub use knn::KnnModel;
pub use logreg::{logreg_gradient, LogregConfig, LogregModel};
pub use pca::PcaModel;
pub use random::random_score;

pub const DEFAULT_KNN_K: usize = 5;
pub const DEFAULT_PCA_MAX_RANK: usize = 10;
pub const DEFAULT_CLUSTERS: usize = 10;

pub const DETECTOR_KINDS: [&str; 6] = ["random", "pca", "knn", "kmeans", "logreg", "stand"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupervisionMode {
    /// Classical unsupervised.
    #[serde(rename = "UTAD-I")]
    UtadI,
    /// Deep unsupervised.
    #[serde(rename = "UTAD-II")]
    UtadII,
    #[serde(rename = "STAD")]
    Stad,
}

impl SupervisionMode {
    pub fn is_supervised(self) -> bool {
        self == SupervisionMode::Stad
    }
}

/// Detector kind plus hyperparameters, before fitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorSpec {
    Random,
    Pca {
        /// Defaults to min(C, 10).
        #[serde(default)]
        rank: Option<usize>,
    },
    Knn {
        k: usize,
    },
    Kmeans {
        clusters: usize,
    },
    Logreg(LogregConfig),
    /// `channels` and `seed` are overridden per fit.
    Stand(StandConfig),
}

impl DetectorSpec {
    /// Spec with documented default hyperparameters.
    pub fn from_kind(kind: &str) -> Result<Self> {
        Ok(match kind {
            "random" => DetectorSpec::Random,
            "pca" => DetectorSpec::Pca { rank: None },
            "knn" => DetectorSpec::Knn { k: DEFAULT_KNN_K },
            "kmeans" => DetectorSpec::Kmeans {
                clusters: DEFAULT_CLUSTERS,
            },
            "logreg" => DetectorSpec::Logreg(LogregConfig::default()),
            "stand" => DetectorSpec::Stand(StandConfig::new(1)),
            other => {
                return Err(Error::config(format!(
                    "unknown detector `{other}` (expected one of {})",
                    DETECTOR_KINDS.join(", ")
                )))
            }
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DetectorSpec::Random => "random",
            DetectorSpec::Pca { .. } => "pca",
            DetectorSpec::Knn { .. } => "knn",
            DetectorSpec::Kmeans { .. } => "kmeans",
            DetectorSpec::Logreg(_) => "logreg",
            DetectorSpec::Stand(_) => STAND_KIND,
        }
    }

    pub fn mode(&self) -> SupervisionMode {
        match self {
            DetectorSpec::Logreg(_) | DetectorSpec::Stand(_) => SupervisionMode::Stad,
            _ => SupervisionMode::UtadI,
        }
    }

    /// Fits on `train`. Unsupervised kinds only see the values.
    pub fn fit(&self, train: &TimeSeriesDataset, seed: u64) -> Result<Detector> {
        let x = train.values();
        Ok(match self {
            DetectorSpec::Random => Detector::Random { seed },
            DetectorSpec::Pca { rank } => {
                let rank = rank.unwrap_or(train.channels().min(DEFAULT_PCA_MAX_RANK));
                Detector::Pca(PcaModel::fit(x, rank)?)
            }
            DetectorSpec::Knn { k } => Detector::Knn(KnnModel::fit(x, *k)?),
            DetectorSpec::Kmeans { clusters } => {
                Detector::Kmeans(KmeansModel::fit(x, *clusters, seed)?)
            }
            DetectorSpec::Logreg(cfg) => {
                let y = train.require_labels("logreg")?;
                Detector::Logreg(LogregModel::fit(x, y, cfg)?)
            }
            DetectorSpec::Stand(cfg) => {
                let mut cfg = cfg.clone();
                cfg.channels = train.channels();
                cfg.seed = seed;
                Detector::Stand(StandModel::fit(train, &cfg)?.0)
            }
        })
    }
}

/// A fitted detector; immutable after fit.
#[derive(Clone, Debug)]
pub enum Detector {
    Random { seed: u64 },
    Pca(PcaModel),
    Knn(KnnModel),
    Kmeans(KmeansModel),
    Logreg(LogregModel),
    Stand(StandModel),
}

impl Detector {
    pub fn kind(&self) -> &'static str {
        match self {
            Detector::Random { .. } => "random",
            Detector::Pca(_) => "pca",
            Detector::Knn(_) => "knn",
            Detector::Kmeans(_) => "kmeans",
            Detector::Logreg(_) => "logreg",
            Detector::Stand(_) => STAND_KIND,
        }
    }

    pub fn mode(&self) -> SupervisionMode {
        match self {
            Detector::Logreg(_) | Detector::Stand(_) => SupervisionMode::Stad,
            _ => SupervisionMode::UtadI,
        }
    }

    /// One score per row of `x`, higher = more anomalous.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if !x.is_finite() {
            return Err(Error::Contract("input contains non-finite values".into()));
        }
        match self {
            Detector::Random { seed } => Ok(random_score(x.rows(), *seed)),
            Detector::Pca(m) => m.score(x),
            Detector::Knn(m) => m.score(x),
            Detector::Kmeans(m) => m.score(x),
            Detector::Logreg(m) => m.score(x),
            Detector::Stand(m) => {
                if x.cols() != m.config.channels {
                    return Err(Error::Contract(format!(
                        "STAND fitted on {} channels, got {}",
                        m.config.channels,
                        x.cols()
                    )));
                }
                m.infer(x)
            }
        }
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let row = |v: &[f64]| Matrix::from_vec(1, v.len(), v.to_vec());
        Ok(match self {
            Detector::Stand(m) => m.to_checkpoint()?,
            Detector::Random { seed } => Checkpoint::new(
                "random",
                serde_json::json!({ "seed": seed }).to_string(),
                vec![],
            ),
            Detector::Pca(m) => Checkpoint::new(
                "pca",
                "{}".into(),
                vec![
                    ("mean".into(), row(&m.mean)?),
                    ("basis".into(), m.basis.clone()),
                ],
            ),
            Detector::Knn(m) => Checkpoint::new(
                "knn",
                serde_json::json!({ "k": m.k }).to_string(),
                vec![("train".into(), m.train.clone())],
            ),
            Detector::Kmeans(m) => Checkpoint::new(
                "kmeans",
                "{}".into(),
                vec![("centroids".into(), m.centroids.clone())],
            ),
            Detector::Logreg(m) => Checkpoint::new(
                "logreg",
                "{}".into(),
                vec![
                    ("weight".into(), row(&m.weight)?),
                    ("bias".into(), row(&[m.bias])?),
                ],
            ),
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: serde_json::Value = serde_json::from_str(&ck.config_json)?;
        let field = |name: &str| {
            config
                .get(name)
                .and_then(|v| v.as_u64())
                .ok_or_else(|| Error::Checkpoint(format!("{} checkpoint lacks `{name}`", ck.kind)))
        };
        let vector = |name: &str| -> Result<Vec<f64>> {
            let m = ck.tensor(name)?;
            if m.rows() != 1 {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` must be a row vector"
                )));
            }
            Ok(m.as_slice().to_vec())
        };
        let det = match ck.kind.as_str() {
            STAND_KIND => Detector::Stand(StandModel::from_checkpoint(ck)?),
            "random" => Detector::Random {
                seed: field("seed")?,
            },
            "pca" => {
                let mean = vector("mean")?;
                let basis = ck.tensor("basis")?.clone();
                if basis.cols() != mean.len() {
                    return Err(Error::Checkpoint("PCA basis and mean disagree".into()));
                }
                Detector::Pca(PcaModel { mean, basis })
            }
            "knn" => Detector::Knn(KnnModel::fit(ck.tensor("train")?, field("k")? as usize)?),
            "kmeans" => Detector::Kmeans(KmeansModel {
                centroids: ck.tensor("centroids")?.clone(),
            }),
            "logreg" => {
                let bias = vector("bias")?;
                if bias.len() != 1 {
                    return Err(Error::Checkpoint("logreg bias must be a scalar".into()));
                }
                Detector::Logreg(LogregModel {
                    weight: vector("weight")?,
                    bias: bias[0],
                })
            }
            other => {
                return Err(Error::Checkpoint(format!(
                    "unknown detector kind `{other}`"
                )))
            }
        };
        Ok(det)
    }
}
