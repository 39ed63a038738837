//! Dataset generation, ingestion, and preprocessing: the synthetic Gaussian
//! model, IDX image and CSV table loaders, the [-1, 1] rescaling step,
//! test-only noise injection, and t-test feature selection.

mod idx;
mod preprocess;
mod synthetic;
mod table;
mod ttest;

pub use idx::load_idx;
pub use preprocess::{add_test_noise, rescale_unit_interval, ScalingRecord};
pub use synthetic::{gen_synthetic, MahalanobisSigma, SyntheticModel, SyntheticSpec};
pub use table::load_csv;
pub use ttest::{select_columns, ttest_pvalues, ttest_select};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::LabeledTrainingSet;

/// Provenance and preprocessing record for a loaded or generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub source: String,
    pub dim: usize,
    /// The affine record applied to reach [-1, 1], when rescaling ran.
    pub scaling: Option<ScalingRecord>,
}

/// A binary-classification dataset: a labeled training pool and per-class
/// test pools (possibly empty for freshly loaded single-file sources).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: LabeledTrainingSet,
    pub test0: Array2<f64>,
    pub test1: Array2<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.train.dim()
    }

    /// Rescales to [-1, 1] using a single global min/max computed over the
    /// training pool; the same record maps the test pools, whose images may
    /// exceed the interval.
    pub fn rescaled(&self) -> Dataset {
        let stacked = ndarray::concatenate(
            ndarray::Axis(0),
            &[self.train.class0(), self.train.class1()],
        )
        .expect("classes share dimension");
        let (_, record) = rescale_unit_interval(&stacked);
        let train = LabeledTrainingSet::new(
            record.apply(&self.train.class0().to_owned()),
            record.apply(&self.train.class1().to_owned()),
        )
        .expect("rescaling preserves shape");
        Dataset {
            train,
            test0: record.apply(&self.test0),
            test1: record.apply(&self.test1),
            meta: DatasetMeta { scaling: Some(record), ..self.meta.clone() },
        }
    }

    /// Moves a fraction of each training class into the test pools,
    /// shuffled deterministically by `seed`. Used for single-file sources
    /// that ship without a test partition.
    pub fn split_off_test(&self, test_fraction: f64, seed: u64) -> Result<Dataset> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::invalid("test_fraction must be in [0, 1)"));
        }
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);

        let split = |block: ndarray::ArrayView2<'_, f64>,
                     rng: &mut rand_chacha::ChaCha12Rng|
         -> (Array2<f64>, Array2<f64>) {
            let n = block.nrows();
            let n_test = ((n as f64) * test_fraction).floor() as usize;
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            let take = |ids: &[usize]| -> Array2<f64> {
                let mut out = Array2::zeros((ids.len(), block.ncols()));
                for (r, &i) in ids.iter().enumerate() {
                    out.row_mut(r).assign(&block.row(i));
                }
                out
            };
            (take(&idx[n_test..]), take(&idx[..n_test]))
        };

        let (train0, test0) = split(self.train.class0(), &mut rng);
        let (train1, test1) = split(self.train.class1(), &mut rng);
        Ok(Dataset {
            train: LabeledTrainingSet::new(train0, train1)?,
            test0,
            test1,
            meta: self.meta.clone(),
        })
    }

    /// Returns a copy whose test pools carry added Gaussian noise; the
    /// training pool is untouched by construction.
    pub fn with_noisy_tests(&self, sigma: f64, seed: u64) -> Dataset {
        Dataset {
            train: self.train.clone(),
            test0: add_test_noise(&self.test0, sigma, seed),
            test1: add_test_noise(&self.test1, sigma, seed.wrapping_add(1)),
            meta: self.meta.clone(),
        }
    }

    /// Projects every partition onto the given feature columns.
    pub fn select_features(&self, indices: &[usize]) -> Result<Dataset> {
        let train = LabeledTrainingSet::new(
            select_columns(&self.train.class0().to_owned(), indices)?,
            select_columns(&self.train.class1().to_owned(), indices)?,
        )?;
        Ok(Dataset {
            train,
            test0: select_columns(&self.test0, indices)?,
            test1: select_columns(&self.test1, indices)?,
            meta: DatasetMeta { dim: indices.len(), ..self.meta.clone() },
        })
    }
}
