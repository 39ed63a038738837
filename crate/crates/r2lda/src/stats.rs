//! Class-statistic estimation: per-class means and covariances, the pooled
//! covariance, mean sum/difference vectors, and priors.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Labeled binary training data; class `i` holds `n_i` rows of dimension `p`.
#[derive(Debug, Clone)]
pub struct LabeledTrainingSet {
    class0: Array2<f64>,
    class1: Array2<f64>,
}

impl LabeledTrainingSet {
    /// Requires a nonempty sample block per class, matching dimensions, and
    /// finite entries. Statistic estimation additionally needs two samples
    /// per class (the per-class covariance divides by `n_i - 1`); that is
    /// enforced where the covariance is computed, so loaders can still
    /// represent one-sample classes.
    pub fn new(class0: Array2<f64>, class1: Array2<f64>) -> Result<Self> {
        if class0.nrows() < 1 || class1.nrows() < 1 {
            return Err(Error::invalid(format!(
                "each class needs at least 1 sample, got {} and {}",
                class0.nrows(),
                class1.nrows()
            )));
        }
        if class0.ncols() != class1.ncols() {
            return Err(Error::invalid(format!(
                "classes disagree on dimension: {} vs {}",
                class0.ncols(),
                class1.ncols()
            )));
        }
        if class0.ncols() == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if class0.iter().chain(class1.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("training samples contain non-finite entries"));
        }
        Ok(LabeledTrainingSet { class0, class1 })
    }

    pub fn class0(&self) -> ArrayView2<'_, f64> {
        self.class0.view()
    }

    pub fn class1(&self) -> ArrayView2<'_, f64> {
        self.class1.view()
    }

    pub fn n0(&self) -> usize {
        self.class0.nrows()
    }

    pub fn n1(&self) -> usize {
        self.class1.nrows()
    }

    pub fn dim(&self) -> usize {
        self.class0.ncols()
    }

    /// A copy with the class labels exchanged.
    pub fn swapped(&self) -> Self {
        LabeledTrainingSet { class0: self.class1.clone(), class1: self.class0.clone() }
    }
}

/// Which denominator the pooled covariance uses.
///
/// `Paper` divides by `n0 + n1 + 1`; `Conventional` is the
/// textbook unbiased pooling over `n0 + n1 - 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PooledDenominator {
    #[default]
    Paper,
    Conventional,
}

impl PooledDenominator {
    fn value(self, n0: usize, n1: usize) -> f64 {
        match self {
            PooledDenominator::Paper => (n0 + n1 + 1) as f64,
            PooledDenominator::Conventional => (n0 + n1 - 2) as f64,
        }
    }
}

/// Estimation switches. Defaults: empirical priors, `n0 + n1 + 1` pooling.
#[derive(Debug, Clone, Copy, Default)]
pub struct StatsOptions {
    pub priors_override: Option<(f64, f64)>,
    pub pooled_denominator: PooledDenominator,
}

/// All first- and second-order statistics a score function needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassStats {
    pub m0: Array1<f64>,
    pub m1: Array1<f64>,
    /// `m0 + m1`
    pub m_plus: Array1<f64>,
    /// `m0 - m1`
    pub m_minus: Array1<f64>,
    pub sigma0: SymMatrix,
    pub sigma1: SymMatrix,
    pub sigma_pooled: SymMatrix,
    pub n0: usize,
    pub n1: usize,
    pub prior0: f64,
    pub prior1: f64,
}

impl ClassStats {
    pub fn estimate(train: &LabeledTrainingSet, opts: &StatsOptions) -> Result<Self> {
        let (m0, m1) = estimate_means(train)?;
        let sigma0 = class_covariance(train.class0(), m0.view())?;
        let sigma1 = class_covariance(train.class1(), m1.view())?;
        let sigma_pooled = pooled_covariance(
            &sigma0,
            &sigma1,
            train.n0(),
            train.n1(),
            opts.pooled_denominator,
        )?;
        let (prior0, prior1) = estimate_priors(train.n0(), train.n1(), opts.priors_override)?;
        let m_plus = &m0 + &m1;
        let m_minus = &m0 - &m1;
        Ok(ClassStats {
            m0,
            m1,
            m_plus,
            m_minus,
            sigma0,
            sigma1,
            sigma_pooled,
            n0: train.n0(),
            n1: train.n1(),
            prior0,
            prior1,
        })
    }

    pub fn dim(&self) -> usize {
        self.m0.len()
    }

    pub fn log_prior_ratio(&self) -> f64 {
        (self.prior1 / self.prior0).ln()
    }
}

/// Per-class sample means.
pub fn estimate_means(train: &LabeledTrainingSet) -> Result<(Array1<f64>, Array1<f64>)> {
    let m0 = train.class0.mean_axis(Axis(0)).ok_or_else(|| Error::invalid("empty class 0"))?;
    let m1 = train.class1.mean_axis(Axis(0)).ok_or_else(|| Error::invalid("empty class 1"))?;
    Ok((m0, m1))
}

/// Sample covariance `(1/(n-1)) Σ (x - m)(x - m)ᵀ` around a supplied mean.
pub fn class_covariance(samples: ArrayView2<'_, f64>, mean: ArrayView1<'_, f64>) -> Result<SymMatrix> {
    let n = samples.nrows();
    let p = samples.ncols();
    if n < 2 {
        return Err(Error::invalid(format!("covariance needs at least 2 samples, got {n}")));
    }
    if mean.len() != p {
        return Err(Error::invalid("mean length does not match sample dimension"));
    }
    let centered = &samples - &mean.insert_axis(ndarray::Axis(0));
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    SymMatrix::new(cov)
}

/// Pooled covariance `((n0-1)Σ0 + (n1-1)Σ1) / denom`.
pub fn pooled_covariance(
    sigma0: &SymMatrix,
    sigma1: &SymMatrix,
    n0: usize,
    n1: usize,
    denominator: PooledDenominator,
) -> Result<SymMatrix> {
    if sigma0.dim() != sigma1.dim() {
        return Err(Error::invalid("class covariances disagree on dimension"));
    }
    let denom = denominator.value(n0, n1);
    let pooled = ((n0 as f64 - 1.0) * sigma0.entries() + (n1 as f64 - 1.0) * sigma1.entries()) / denom;
    SymMatrix::new(pooled)
}

/// Empirical class priors `(n0/n, n1/n)`, unless overridden.
pub fn estimate_priors(n0: usize, n1: usize, overridden: Option<(f64, f64)>) -> Result<(f64, f64)> {
    if n0 == 0 || n1 == 0 {
        return Err(Error::invalid("both classes need at least one sample"));
    }
    match overridden {
        Some((p0, p1)) => {
            if !(p0 > 0.0 && p1 > 0.0 && (p0 + p1 - 1.0).abs() <= 1e-12) {
                return Err(Error::invalid(format!(
                    "prior override must be positive and sum to 1, got ({p0}, {p1})"
                )));
            }
            Ok((p0, p1))
        }
        None => {
            let n = (n0 + n1) as f64;
            Ok((n0 as f64 / n, n1 as f64 / n))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn set(class0: Array2<f64>, class1: Array2<f64>) -> LabeledTrainingSet {
        LabeledTrainingSet::new(class0, class1).unwrap()
    }

    #[test]
    fn two_point_average() {
        let t = set(array![[1.0, 1.0], [3.0, 3.0]], array![[0.0, 0.0], [0.0, 0.0]]);
        let (m0, _) = estimate_means(&t).unwrap();
        assert_eq!(m0, array![2.0, 2.0]);
    }

    #[test]
    fn constant_class_mean_is_the_constant() {
        let t = set(array![[5.0, -1.0], [5.0, -1.0], [5.0, -1.0]], array![[0.0, 0.0], [0.0, 0.0]]);
        let (m0, _) = estimate_means(&t).unwrap();
        assert_eq!(m0, array![5.0, -1.0]);
    }

    #[test]
    fn mean_monte_carlo_oracle() {
        // 1000 draws from N(m, I); the sample mean lands within 0.15 per
        // coordinate (standard-error bound 3/sqrt(1000) with fixed seed).
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1000);
        let truth = [1.0, -1.0];
        let class0 = Array2::from_shape_fn((1000, 2), |(_, j)| {
            truth[j] + rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let t = set(class0, array![[0.0, 0.0], [0.0, 0.0]]);
        let (m0, _) = estimate_means(&t).unwrap();
        assert!((m0[0] - 1.0).abs() < 0.15);
        assert!((m0[1] + 1.0).abs() < 0.15);
    }

    #[test]
    fn covariance_hand_values() {
        let cov = class_covariance(array![[0.0], [2.0]].view(), array![1.0].view()).unwrap();
        assert_eq!(cov.entries()[[0, 0]], 2.0);

        let cov = class_covariance(
            array![[1.0, 0.0], [-1.0, 0.0]].view(),
            array![0.0, 0.0].view(),
        )
        .unwrap();
        assert_eq!(cov.entries().clone(), array![[2.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn covariance_of_identical_samples_is_zero() {
        let cov = class_covariance(
            array![[3.0, 4.0], [3.0, 4.0], [3.0, 4.0]].view(),
            array![3.0, 4.0].view(),
        )
        .unwrap();
        assert!(cov.entries().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn covariance_rejects_single_sample() {
        assert!(class_covariance(array![[1.0]].view(), array![1.0].view()).is_err());
    }

    #[test]
    fn pooled_hand_values() {
        let s2 = SymMatrix::new(array![[2.0]]).unwrap();
        let pooled = pooled_covariance(&s2, &s2, 2, 2, PooledDenominator::Paper).unwrap();
        assert!((pooled.entries()[[0, 0]] - 0.8).abs() < 1e-15);

        let zero = SymMatrix::new(array![[0.0]]).unwrap();
        let pooled = pooled_covariance(&zero, &zero, 5, 7, PooledDenominator::Paper).unwrap();
        assert_eq!(pooled.entries()[[0, 0]], 0.0);

        let s1 = SymMatrix::new(array![[1.0]]).unwrap();
        let s4 = SymMatrix::new(array![[4.0]]).unwrap();
        let pooled = pooled_covariance(&s1, &s4, 3, 2, PooledDenominator::Paper).unwrap();
        assert!((pooled.entries()[[0, 0]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conventional_denominator_switch() {
        let s2 = SymMatrix::new(array![[2.0]]).unwrap();
        let pooled = pooled_covariance(&s2, &s2, 2, 2, PooledDenominator::Conventional).unwrap();
        assert!((pooled.entries()[[0, 0]] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn priors_empirical_and_override() {
        assert_eq!(estimate_priors(50, 50, None).unwrap(), (0.5, 0.5));
        assert_eq!(estimate_priors(30, 70, None).unwrap(), (0.3, 0.7));
        assert_eq!(estimate_priors(10, 90, Some((0.5, 0.5))).unwrap(), (0.5, 0.5));
        assert!(estimate_priors(10, 90, Some((0.5, 0.6))).is_err());
        assert!(estimate_priors(10, 90, Some((-0.5, 1.5))).is_err());
    }

    #[test]
    fn class_swap_negates_mean_difference() {
        let t = set(
            array![[1.0, 2.0], [3.0, 0.0], [2.0, 1.0]],
            array![[-1.0, 0.5], [0.0, -0.5]],
        );
        let s = ClassStats::estimate(&t, &StatsOptions::default()).unwrap();
        let sw = ClassStats::estimate(&t.swapped(), &StatsOptions::default()).unwrap();
        for j in 0..2 {
            assert!((s.m_minus[j] + sw.m_minus[j]).abs() < 1e-15);
            assert!((s.m_plus[j] - sw.m_plus[j]).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn pooled_matches_formula_entrywise(
            vals in proptest::collection::vec(-5.0f64..5.0, 24),
            n0 in 2usize..30,
            n1 in 2usize..30,
        ) {
            let b0 = Array2::from_shape_vec((4, 3), vals[..12].to_vec()).unwrap();
            let b1 = Array2::from_shape_vec((4, 3), vals[12..].to_vec()).unwrap();
            let s0 = SymMatrix::new(b0.t().dot(&b0)).unwrap();
            let s1 = SymMatrix::new(b1.t().dot(&b1)).unwrap();
            let pooled = pooled_covariance(&s0, &s1, n0, n1, PooledDenominator::Paper).unwrap();
            let denom = (n0 + n1 + 1) as f64;
            for i in 0..3 {
                for j in 0..3 {
                    let expect = ((n0 as f64 - 1.0) * s0.entries()[[i, j]]
                        + (n1 as f64 - 1.0) * s1.entries()[[i, j]]) / denom;
                    prop_assert!((pooled.entries()[[i, j]] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
                }
            }
        }

        #[test]
        fn translation_equivariance(
            shift in proptest::collection::vec(-10.0f64..10.0, 3),
            raw in proptest::collection::vec(-3.0f64..3.0, 30),
        ) {
            let class0 = Array2::from_shape_vec((5, 3), raw[..15].to_vec()).unwrap();
            let class1 = Array2::from_shape_vec((5, 3), raw[15..].to_vec()).unwrap();
            let t = Array1::from_vec(shift);
            let shifted0 = &class0 + &t.view().insert_axis(Axis(0));
            let shifted1 = &class1 + &t.view().insert_axis(Axis(0));

            let a = ClassStats::estimate(&set(class0, class1), &StatsOptions::default()).unwrap();
            let b = ClassStats::estimate(&set(shifted0, shifted1), &StatsOptions::default()).unwrap();

            for j in 0..3 {
                prop_assert!((b.m0[j] - a.m0[j] - t[j]).abs() < 1e-12);
                prop_assert!((b.m1[j] - a.m1[j] - t[j]).abs() < 1e-12);
                prop_assert!((b.m_minus[j] - a.m_minus[j]).abs() < 1e-12);
            }
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((b.sigma0.entries()[[i, j]] - a.sigma0.entries()[[i, j]]).abs() < 1e-12);
                    prop_assert!((b.sigma1.entries()[[i, j]] - a.sigma1.entries()[[i, j]]).abs() < 1e-12);
                    prop_assert!((b.sigma_pooled.entries()[[i, j]] - a.sigma_pooled.entries()[[i, j]]).abs() < 1e-12);
                }
            }
        }
    }
}
