//! Synthetic Gaussian model: Σ₀ has unit diagonal and constant off-diagonal,
//! Σ₁ = Σ₀ + I, and the means sit at ±a·1 with `a` chosen so the
//! between-class Mahalanobis distance reaches the requested δ².

use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::stats::LabeledTrainingSet;

/// Which covariance enters the δ² = (m₀-m₁)ᵀ Σ⁻¹ (m₀-m₁) definition used to
/// size the class separation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MahalanobisSigma {
    /// The average of the two class covariances, (Σ₀ + Σ₁)/2.
    #[default]
    Average,
    /// Class 0's covariance alone.
    Class0,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub p: usize,
    /// Squared between-class Mahalanobis distance.
    pub delta2: f64,
    /// Off-diagonal value of Σ₀.
    pub offdiag: f64,
    pub n0: usize,
    pub n1: usize,
    pub test_per_class: usize,
    pub seed: u64,
    pub sigma_convention: MahalanobisSigma,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            p: 100,
            delta2: 9.0,
            offdiag: 0.1,
            n0: 50,
            n1: 50,
            test_per_class: 500,
            seed: 0,
            sigma_convention: MahalanobisSigma::Average,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !(self.delta2 > 0.0) {
            return Err(Error::invalid("delta2 must be positive"));
        }
        if self.offdiag.abs() >= 1.0 {
            return Err(Error::invalid("off-diagonal magnitude must be below 1"));
        }
        if self.n0 == 0 || self.n1 == 0 {
            return Err(Error::invalid("class sizes must be at least 1"));
        }
        Ok(())
    }
}

/// The ground-truth model behind a [`SyntheticSpec`]: exact means,
/// covariances, and their Cholesky factors for sampling. Also the source of
/// true parameters for oracle scoring.
#[derive(Debug, Clone)]
pub struct SyntheticModel {
    p: usize,
    m0: Array1<f64>,
    sigma0: Array2<f64>,
    sigma1: Array2<f64>,
    chol0: Array2<f64>,
    chol1: Array2<f64>,
    delta2: f64,
    convention: MahalanobisSigma,
}

impl SyntheticModel {
    pub fn new(spec: &SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let p = spec.p;
        let rho = spec.offdiag;
        let sigma0 =
            Array2::from_shape_fn((p, p), |(i, j)| if i == j { 1.0 } else { rho });
        let sigma1 =
            Array2::from_shape_fn((p, p), |(i, j)| if i == j { 2.0 } else { rho });

        let chol = |m: &Array2<f64>| -> Result<Array2<f64>> {
            let dm = DMatrix::from_fn(p, p, |i, j| m[[i, j]]);
            let c = Cholesky::new(dm)
                .ok_or_else(|| Error::invalid("class covariance is not positive definite"))?;
            let l = c.l();
            Ok(Array2::from_shape_fn((p, p), |(i, j)| l[(i, j)]))
        };
        let chol0 = chol(&sigma0)?;
        let chol1 = chol(&sigma1)?;

        // a = sqrt(δ² / (4 · 1ᵀ Σ⁻¹ 1)) so that (m₀-m₁)ᵀ Σ⁻¹ (m₀-m₁) = δ²
        // with m₁ = -m₀ = -a·1.
        let sigma_delta = match spec.sigma_convention {
            MahalanobisSigma::Average => {
                Array2::from_shape_fn((p, p), |(i, j)| 0.5 * (sigma0[[i, j]] + sigma1[[i, j]]))
            }
            MahalanobisSigma::Class0 => sigma0.clone(),
        };
        let dm = DMatrix::from_fn(p, p, |i, j| sigma_delta[[i, j]]);
        let c = Cholesky::new(dm)
            .ok_or_else(|| Error::invalid("Mahalanobis covariance is not positive definite"))?;
        let ones = DVector::from_element(p, 1.0);
        let solved = c.solve(&ones);
        let quad = ones.dot(&solved);
        if !(quad > 0.0) {
            return Err(Error::numeric("quadratic form 1ᵀΣ⁻¹1 is not positive"));
        }
        let a = (spec.delta2 / (4.0 * quad)).sqrt();

        Ok(SyntheticModel {
            p,
            m0: Array1::from_elem(p, a),
            sigma0,
            sigma1,
            chol0,
            chol1,
            delta2: spec.delta2,
            convention: spec.sigma_convention,
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn m0(&self) -> &Array1<f64> {
        &self.m0
    }

    /// `m₁ = -m₀` by construction.
    pub fn m1(&self) -> Array1<f64> {
        -&self.m0
    }

    pub fn sigma0(&self) -> &Array2<f64> {
        &self.sigma0
    }

    pub fn sigma1(&self) -> &Array2<f64> {
        &self.sigma1
    }

    /// (Σ₀ + Σ₁)/2, the common-covariance proxy for oracle scoring.
    pub fn sigma_average(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.p, self.p), |(i, j)| {
            0.5 * (self.sigma0[[i, j]] + self.sigma1[[i, j]])
        })
    }

    pub fn convention(&self) -> MahalanobisSigma {
        self.convention
    }

    /// Recomputes (m₀-m₁)ᵀ Σ⁻¹ (m₀-m₁) under the configured convention;
    /// equals the requested δ² up to solver round-off.
    pub fn mahalanobis_squared(&self) -> f64 {
        let sigma = match self.convention {
            MahalanobisSigma::Average => self.sigma_average(),
            MahalanobisSigma::Class0 => self.sigma0.clone(),
        };
        let dm = DMatrix::from_fn(self.p, self.p, |i, j| sigma[[i, j]]);
        let c = Cholesky::new(dm).expect("validated at construction");
        let diff = DVector::from_fn(self.p, |i, _| 2.0 * self.m0[i]);
        diff.dot(&c.solve(&diff))
    }

    /// Draws `count` samples from the requested class as rows, via the
    /// Cholesky factor applied to standard-normal draws.
    pub fn sample_class(&self, class: usize, count: usize, rng: &mut ChaCha12Rng) -> Array2<f64> {
        let (mean_sign, chol) = match class {
            0 => (1.0, &self.chol0),
            _ => (-1.0, &self.chol1),
        };
        let eps = Array2::from_shape_fn((count, self.p), |_| rng.sample::<f64, _>(StandardNormal));
        let mut samples = eps.dot(&chol.t());
        for mut row in samples.rows_mut() {
            row += &(mean_sign * &self.m0);
        }
        samples
    }

    fn delta2(&self) -> f64 {
        self.delta2
    }
}

/// Generates a full dataset: `n_i` training rows and `test_per_class` test
/// rows per class, reproducible from the seed.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let model = SyntheticModel::new(spec)?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let train0 = model.sample_class(0, spec.n0, &mut rng);
    let train1 = model.sample_class(1, spec.n1, &mut rng);
    let test0 = model.sample_class(0, spec.test_per_class, &mut rng);
    let test1 = model.sample_class(1, spec.test_per_class, &mut rng);
    Ok(Dataset {
        train: LabeledTrainingSet::new(train0, train1)?,
        test0,
        test1,
        meta: DatasetMeta {
            name: format!(
                "synthetic-p{}-delta2-{}-rho{}-seed{}",
                spec.p, model.delta2(), spec.offdiag, spec.seed
            ),
            source: "synthetic".into(),
            dim: spec.p,
            scaling: None,
        },
    })
}
