//! Preprocessing: the affine map onto [-1, 1] and test-only Gaussian noise.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// The global min/max pair behind the affine map to [-1, 1]. Derived from
/// training data and reused for test data, whose image may leave the
/// interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub min: f64,
    pub max: f64,
}

impl ScalingRecord {
    /// A constant data block has no spread to map; everything goes to zero.
    pub fn is_degenerate(&self) -> bool {
        self.max <= self.min
    }

    pub fn map(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            2.0 * (x - self.min) / (self.max - self.min) - 1.0
        }
    }

    pub fn unmap(&self, y: f64) -> f64 {
        if self.is_degenerate() {
            self.min
        } else {
            self.min + (y + 1.0) * (self.max - self.min) / 2.0
        }
    }

    pub fn apply(&self, data: &Array2<f64>) -> Array2<f64> {
        data.mapv(|x| self.map(x))
    }
}

/// Computes the global min/max over all entries and maps the block onto
/// [-1, 1]. A constant block maps to all zeros (the record flags itself as
/// degenerate so callers can warn).
pub fn rescale_unit_interval(data: &Array2<f64>) -> (Array2<f64>, ScalingRecord) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &x in data.iter() {
        min = min.min(x);
        max = max.max(x);
    }
    let record = ScalingRecord { min, max };
    (record.apply(data), record)
}

/// Adds zero-mean Gaussian noise with standard deviation `sigma` to a test
/// block, reproducibly from the seed. `sigma = 0` is the exact identity.
pub fn add_test_noise(test: &Array2<f64>, sigma: f64, seed: u64) -> Array2<f64> {
    assert!(sigma >= 0.0, "noise level must be nonnegative");
    if sigma == 0.0 {
        return test.clone();
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    test.mapv(|x| x + sigma * rng.sample::<f64, _>(StandardNormal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn affine_endpoints() {
        let (scaled, record) = rescale_unit_interval(&array![[0.0, 255.0], [127.5, 10.0]]);
        assert_eq!(record, ScalingRecord { min: 0.0, max: 255.0 });
        assert_eq!(scaled[[0, 0]], -1.0);
        assert_eq!(scaled[[0, 1]], 1.0);
        assert_eq!(scaled[[1, 0]], 0.0);
    }

    #[test]
    fn exact_interval_is_unchanged() {
        let data = array![[-1.0, 1.0], [0.25, -0.5]];
        let (scaled, _) = rescale_unit_interval(&data);
        for (a, b) in scaled.iter().zip(data.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn test_values_may_leave_interval() {
        let record = ScalingRecord { min: 0.0, max: 255.0 };
        let mapped = record.map(300.0);
        assert!((mapped - (600.0 / 255.0 - 1.0)).abs() < 1e-12);
        assert!(mapped > 1.0);
    }

    #[test]
    fn constant_data_maps_to_zeros() {
        let (scaled, record) = rescale_unit_interval(&array![[3.0, 3.0], [3.0, 3.0]]);
        assert!(record.is_degenerate());
        assert!(scaled.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_sigma_is_identity() {
        let data = array![[1.0, 2.0], [3.0, 4.0]];
        let noisy = add_test_noise(&data, 0.0, 7);
        assert_eq!(noisy, data);
    }

    #[test]
    fn noise_moments_match_monte_carlo() {
        let rows = 50_000;
        let zeros = Array2::zeros((rows, 2));
        let sigma = 0.7;
        let noisy = add_test_noise(&zeros, sigma, 123);
        for j in 0..2 {
            let col = noisy.column(j);
            let n = col.len() as f64;
            let mean = col.sum() / n;
            assert!(mean.abs() < 3.0 * sigma / n.sqrt() * 1.5, "mean {mean}");
            let var = col.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            assert!((var - sigma * sigma).abs() < 0.05 * sigma * sigma, "var {var}");
        }
    }

    #[test]
    fn noise_is_seeded_and_reproducible() {
        let data = Array2::zeros((4, 3));
        let a = add_test_noise(&data, 1.0, 9);
        let b = add_test_noise(&data, 1.0, 9);
        let c = add_test_noise(&data, 1.0, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn rescale_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 8)) {
            let data = Array2::from_shape_vec((4, 2), values).unwrap();
            let (scaled, record) = rescale_unit_interval(&data);
            if !record.is_degenerate() {
                for (orig, s) in data.iter().zip(scaled.iter()) {
                    let back = record.unmap(*s);
                    let tol = 1e-12 * orig.abs().max(record.max - record.min);
                    prop_assert!((back - orig).abs() <= tol);
                }
            }
        }
    }
}
