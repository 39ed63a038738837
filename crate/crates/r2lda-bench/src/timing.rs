//! Wall-clock measurement over a monotonic clock.

use std::time::Instant;

use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingStats {
    pub mean_s: f64,
    pub min_s: f64,
    pub repetitions: usize,
}

/// Runs `work` the given number of times and reports mean and minimum
/// wall-clock seconds.
pub fn measure_runtime(mut work: impl FnMut(), repetitions: usize) -> Result<TimingStats> {
    if repetitions == 0 {
        return Err(HarnessError::Config("repetitions must be at least 1".into()));
    }
    let mut total = 0.0;
    let mut min = f64::INFINITY;
    for _ in 0..repetitions {
        let t0 = Instant::now();
        work();
        let elapsed = t0.elapsed().as_secs_f64();
        total += elapsed;
        min = min.min(elapsed);
    }
    Ok(TimingStats { mean_s: total / repetitions as f64, min_s: min, repetitions })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noop_is_near_zero() {
        let stats = measure_runtime(|| {}, 10).unwrap();
        assert!(stats.mean_s >= 0.0);
        assert!(stats.mean_s < 5e-3);
    }

    #[test]
    fn sleep_workload_lands_in_expected_band() {
        let stats = measure_runtime(|| std::thread::sleep(std::time::Duration::from_millis(10)), 3).unwrap();
        assert!(stats.mean_s >= 0.009, "mean {}", stats.mean_s);
        assert!(stats.mean_s <= 0.050, "mean {}", stats.mean_s);
        assert!(stats.min_s <= stats.mean_s);
    }

    #[test]
    fn zero_repetitions_rejected() {
        assert!(measure_runtime(|| {}, 0).is_err());
    }
}
