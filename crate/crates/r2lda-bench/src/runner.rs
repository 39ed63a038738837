//! The experiment loop: per-cell, per-trial training and scoring with
//! deterministic seeding derived from (master seed, dataset, classifier,
//! n, σ, trial index) so results never depend on cell or thread order.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use r2lda::classify::{assign, train_r2lda, ClassLabel, LdaModel, R2ldaModel, RldaModel};
use r2lda::datasets::{
    rescale_unit_interval, select_columns, ttest_select, Dataset, ScalingRecord, SyntheticModel,
    SyntheticSpec,
};
use r2lda::linalg::{partition_eig, sym_eig};
use r2lda::regsel::{copra_select, LinearModelView, RegSelector};
use r2lda::stats::{ClassStats, LabeledTrainingSet, StatsOptions};

use crate::config::{ClassifierSpec, DatasetConfig, ExperimentConfig};
use crate::report::CellReport;
use crate::{config, HarnessError, Result};

/// A cell that could not be completed; recorded in the metadata sidecar
/// instead of aborting the run.
#[derive(Debug, Clone, Serialize)]
pub struct CellFailure {
    pub classifier: String,
    pub selector: String,
    pub n_per_class: usize,
    pub sigma: f64,
    pub message: String,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub reports: Vec<CellReport>,
    pub failures: Vec<CellFailure>,
}

/// The prepared data source shared by every cell of a run.
pub enum DataSource {
    Synthetic { model: SyntheticModel, rescale: bool, name: String },
    Pool { dataset: Dataset },
}

impl DataSource {
    pub fn prepare(cfg: &DatasetConfig) -> Result<Self> {
        match cfg {
            DatasetConfig::Synthetic { p, delta2, offdiag, sigma_convention, rescale } => {
                let spec = SyntheticSpec {
                    p: *p,
                    delta2: *delta2,
                    offdiag: *offdiag,
                    n0: 2,
                    n1: 2,
                    test_per_class: 1,
                    seed: 0,
                    sigma_convention: *sigma_convention,
                };
                let model = SyntheticModel::new(&spec)?;
                let name = format!("synthetic-p{p}-delta2-{delta2}-rho{offdiag}");
                Ok(DataSource::Synthetic { model, rescale: *rescale, name })
            }
            DatasetConfig::Manifest { path } => {
                let dataset = config::load_manifest_dataset(path)?;
                Ok(DataSource::Pool { dataset })
            }
        }
    }

    pub fn name(&self) -> &str {
        match self {
            DataSource::Synthetic { name, .. } => name,
            DataSource::Pool { dataset } => &dataset.meta.name,
        }
    }
}

/// Runs every (classifier, n, σ) cell of the configuration. A failing cell
/// is recorded and skipped; the rest of the run proceeds.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let source = DataSource::prepare(&cfg.dataset)?;
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for classifier in &cfg.classifiers {
        for &n in &cfg.train_sizes {
            for &sigma in &cfg.noise_sigmas {
                match run_cell(cfg, &source, *classifier, n, sigma) {
                    Ok(report) => reports.push(report),
                    Err(e) => {
                        let (c, s) = classifier.csv_names();
                        failures.push(CellFailure {
                            classifier: c.into(),
                            selector: s.into(),
                            n_per_class: n,
                            sigma,
                            message: e.to_string(),
                        });
                    }
                }
            }
        }
    }
    reports.sort_by(|a, b| {
        (&a.classifier, &a.selector, a.n_per_class, a.sigma.to_bits()).cmp(&(
            &b.classifier,
            &b.selector,
            b.n_per_class,
            b.sigma.to_bits(),
        ))
    });
    Ok(RunOutcome { reports, failures })
}

/// Runs one cell: `trials_train` independent training draws, each scored on
/// `trials_test` test draws (one fresh sample per class per draw).
pub fn run_cell(
    cfg: &ExperimentConfig,
    source: &DataSource,
    classifier: ClassifierSpec,
    n_per_class: usize,
    sigma: f64,
) -> Result<CellReport> {
    let trials: Vec<std::result::Result<TrialOutcome, String>> = (0..cfg.trials_train)
        .into_par_iter()
        .map(|trial| {
            run_trial(cfg, source, classifier, n_per_class, sigma, trial).map_err(|e| e.to_string())
        })
        .collect();

    let mut outcomes = Vec::with_capacity(trials.len());
    for t in trials {
        outcomes.push(t.map_err(HarnessError::Trial)?);
    }
    let mut report = aggregate(classifier, n_per_class, sigma, &outcomes);
    if !cfg.measure_runtime {
        // timing jitter would break the byte-identical replay contract
        report.train_s = 0.0;
        report.score_s_per_sample = 0.0;
    }
    Ok(report)
}

struct TrialOutcome {
    errors: u64,
    scored: u64,
    train_seconds: f64,
    score_seconds: f64,
    gamma_b: Option<f64>,
    gamma_b_fallback: bool,
    gamma_z_sum: f64,
    gamma_z_count: u64,
    gamma_z_fallbacks: u64,
}

/// Deterministic per-trial stream: SHA-256 over the cell key seeds ChaCha12.
fn trial_rng(
    master_seed: u64,
    dataset: &str,
    classifier_id: &str,
    n: usize,
    sigma: f64,
    trial: usize,
) -> ChaCha12Rng {
    let key = format!("r2lda-bench|{master_seed}|{dataset}|{classifier_id}|n={n}|sigma={sigma}|trial={trial}");
    let digest = Sha256::digest(key.as_bytes());
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(seed)
}

fn sample_rows(
    pool: ArrayView2<'_, f64>,
    count: usize,
    replace: bool,
    rng: &mut ChaCha12Rng,
) -> Result<Array2<f64>> {
    let n = pool.nrows();
    if n == 0 || (!replace && count > n) {
        return Err(HarnessError::Trial(format!(
            "pool of {n} rows cannot supply {count} draws"
        )));
    }
    let mut out = Array2::zeros((count, pool.ncols()));
    if replace {
        for r in 0..count {
            out.row_mut(r).assign(&pool.row(rng.random_range(0..n)));
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        for (r, &i) in idx[..count].iter().enumerate() {
            out.row_mut(r).assign(&pool.row(i));
        }
    }
    Ok(out)
}

fn run_trial(
    cfg: &ExperimentConfig,
    source: &DataSource,
    classifier: ClassifierSpec,
    n_per_class: usize,
    sigma: f64,
    trial: usize,
) -> Result<TrialOutcome> {
    let mut rng = trial_rng(
        cfg.master_seed,
        source.name(),
        classifier.id(),
        n_per_class,
        sigma,
        trial,
    );

    // training draw; synthetic draws are rescaled with a record computed on
    // this trial's training data
    let (train_raw, record): (LabeledTrainingSet, Option<ScalingRecord>) = match source {
        DataSource::Synthetic { model, rescale, .. } => {
            let c0 = model.sample_class(0, n_per_class, &mut rng);
            let c1 = model.sample_class(1, n_per_class, &mut rng);
            if *rescale {
                let stacked = concatenate(Axis(0), &[c0.view(), c1.view()]).expect("same dim");
                let (_, rec) = rescale_unit_interval(&stacked);
                (LabeledTrainingSet::new(rec.apply(&c0), rec.apply(&c1))?, Some(rec))
            } else {
                (LabeledTrainingSet::new(c0, c1)?, None)
            }
        }
        DataSource::Pool { dataset } => {
            let c0 = sample_rows(dataset.train.class0(), n_per_class, false, &mut rng)?;
            let c1 = sample_rows(dataset.train.class1(), n_per_class, false, &mut rng)?;
            // the pool was rescaled once at load time
            (LabeledTrainingSet::new(c0, c1)?, None)
        }
    };

    // feature selection on this trial's training data only
    let selected: Option<Vec<usize>> = match cfg.feature_selection_k {
        Some(k) => Some(ttest_select(&train_raw, k)?),
        None => None,
    };
    let train = match &selected {
        Some(idx) => LabeledTrainingSet::new(
            select_columns(&train_raw.class0().to_owned(), idx)?,
            select_columns(&train_raw.class1().to_owned(), idx)?,
        )?,
        None => train_raw,
    };

    let started = Instant::now();
    let model = TrainedModel::fit(classifier, &train, source, record.as_ref(), selected.as_deref())?;
    let train_seconds = started.elapsed().as_secs_f64();

    let mut outcome = TrialOutcome {
        errors: 0,
        scored: 0,
        train_seconds,
        score_seconds: 0.0,
        gamma_b: model.gamma_b(),
        gamma_b_fallback: model.gamma_b_fallback(),
        gamma_z_sum: 0.0,
        gamma_z_count: 0,
        gamma_z_fallbacks: 0,
    };

    let dim = train.dim();
    for _ in 0..cfg.trials_test {
        for class in 0..2usize {
            let raw: Array1<f64> = match source {
                DataSource::Synthetic { model: truth, .. } => {
                    truth.sample_class(class, 1, &mut rng).row(0).to_owned()
                }
                DataSource::Pool { dataset } => {
                    let pool = if class == 0 { dataset.test0.view() } else { dataset.test1.view() };
                    sample_rows(pool, 1, true, &mut rng)?.row(0).to_owned()
                }
            };
            let mapped = match &record {
                Some(rec) => raw.mapv(|x| rec.map(x)),
                None => raw,
            };
            let projected = match &selected {
                Some(idx) => Array1::from_iter(idx.iter().map(|&i| mapped[i])),
                None => mapped,
            };
            let x = if sigma > 0.0 {
                &projected + &Array1::from_shape_fn(dim, |_| sigma * rng.sample::<f64, _>(StandardNormal))
            } else {
                projected
            };

            let t0 = Instant::now();
            let scored = model.score(&x)?;
            outcome.score_seconds += t0.elapsed().as_secs_f64();

            let label = assign(scored.w, model.threshold());
            if label.index() != class {
                outcome.errors += 1;
            }
            outcome.scored += 1;
            if let Some((gz, fb)) = scored.gamma_z {
                outcome.gamma_z_sum += gz;
                outcome.gamma_z_count += 1;
                if fb {
                    outcome.gamma_z_fallbacks += 1;
                }
            }
        }
    }
    Ok(outcome)
}

fn aggregate(
    classifier: ClassifierSpec,
    n_per_class: usize,
    sigma: f64,
    outcomes: &[TrialOutcome],
) -> CellReport {
    let total_errors: u64 = outcomes.iter().map(|o| o.errors).sum();
    let total_scored: u64 = outcomes.iter().map(|o| o.scored).sum();
    let error_pct = 100.0 * total_errors as f64 / total_scored as f64;

    let rates: Vec<f64> =
        outcomes.iter().map(|o| 100.0 * o.errors as f64 / o.scored as f64).collect();
    let mean_rate = rates.iter().sum::<f64>() / rates.len() as f64;
    let stderr_pct = if rates.len() > 1 {
        let var = rates.iter().map(|r| (r - mean_rate) * (r - mean_rate)).sum::<f64>()
            / (rates.len() as f64 - 1.0);
        (var / rates.len() as f64).sqrt()
    } else {
        0.0
    };

    let train_s = outcomes.iter().map(|o| o.train_seconds).sum::<f64>() / outcomes.len() as f64;
    let score_s_per_sample =
        outcomes.iter().map(|o| o.score_seconds).sum::<f64>() / total_scored as f64;

    let fallback_count: u64 = outcomes
        .iter()
        .map(|o| o.gamma_z_fallbacks + u64::from(o.gamma_b_fallback))
        .sum();

    let gammas_b: Vec<f64> = outcomes.iter().filter_map(|o| o.gamma_b).collect();
    let mean_gamma_b = if gammas_b.is_empty() {
        0.0
    } else {
        gammas_b.iter().sum::<f64>() / gammas_b.len() as f64
    };
    let z_count: u64 = outcomes.iter().map(|o| o.gamma_z_count).sum();
    let mean_gamma_z = if z_count == 0 {
        0.0
    } else {
        outcomes.iter().map(|o| o.gamma_z_sum).sum::<f64>() / z_count as f64
    };

    let (classifier_name, selector_name) = classifier.csv_names();
    CellReport {
        classifier: classifier_name.into(),
        selector: selector_name.into(),
        n_per_class,
        sigma,
        error_pct,
        stderr_pct,
        train_s,
        score_s_per_sample,
        fallback_count,
        mean_gamma_b,
        mean_gamma_z,
    }
}

/// Writes the metadata sidecar next to the report CSV: seeds, the full
/// configuration, recorded cell failures, and the switches that pin the
/// run's conventions.
pub fn emit_metadata(cfg: &ExperimentConfig, outcome: &RunOutcome) -> Result<()> {
    let sidecar = serde_json::json!({
        "format_version": 1,
        "harness_version": env!("CARGO_PKG_VERSION"),
        "master_seed": cfg.master_seed,
        "seeding": "chacha12(sha256(r2lda-bench|master|dataset|classifier|n=..|sigma=..|trial=..))",
        "switches": {
            "pooled_denominator": "paper",
            "mahalanobis_sigma": match &cfg.dataset {
                DatasetConfig::Synthetic { sigma_convention, .. } => format!("{sigma_convention:?}"),
                DatasetConfig::Manifest { .. } => "n/a".to_string(),
            },
            "test_draws": "one sample per class per test trial",
        },
        "config": cfg,
        "failures": outcome.failures,
    });
    let path = format!("{}.meta.json", cfg.output.display());
    let text = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| HarnessError::Serde(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

struct ScoredSample {
    w: f64,
    gamma_z: Option<(f64, bool)>,
}

/// One trained classifier instance, dispatched per trial.
enum TrainedModel {
    Lda(LdaModel),
    Rlda(RldaModel),
    R2lda(R2ldaModel),
    Oracle(OracleLda),
}

impl TrainedModel {
    fn fit(
        classifier: ClassifierSpec,
        train: &LabeledTrainingSet,
        source: &DataSource,
        record: Option<&ScalingRecord>,
        selected: Option<&[usize]>,
    ) -> Result<Self> {
        match classifier {
            ClassifierSpec::Lda => Ok(TrainedModel::Lda(LdaModel::train(train)?)),
            ClassifierSpec::RldaStatic => {
                // static baseline: one COPRA selection on the mean-difference
                // view, reused as the single regularization parameter
                let stats = ClassStats::estimate(train, &StatsOptions::default())?;
                let eig = sym_eig(&stats.sigma_pooled)?;
                let pe = partition_eig(&eig, train.n0() + train.n1())?;
                let view = LinearModelView::new(&eig, stats.m_minus.view())?;
                let sel = RegSelector::copra();
                let gamma = copra_select(&pe, view.d(), &sel.newton, sel.fallback_gamma_scale)?;
                Ok(TrainedModel::Rlda(RldaModel::from_parts(stats, eig, gamma.gamma)?))
            }
            ClassifierSpec::R2lda(kind) => {
                Ok(TrainedModel::R2lda(train_r2lda(train, RegSelector::new(kind))?))
            }
            ClassifierSpec::OracleLda => {
                let DataSource::Synthetic { model, .. } = source else {
                    return Err(HarnessError::Config(
                        "oracle scoring needs the synthetic ground truth".into(),
                    ));
                };
                Ok(TrainedModel::Oracle(OracleLda::from_truth(model, record, selected)?))
            }
        }
    }

    fn score(&self, x: &Array1<f64>) -> Result<ScoredSample> {
        match self {
            TrainedModel::Lda(m) => Ok(ScoredSample { w: m.score(x)?, gamma_z: None }),
            TrainedModel::Rlda(m) => Ok(ScoredSample { w: m.score(x)?, gamma_z: None }),
            TrainedModel::R2lda(m) => {
                let s = m.score(x)?;
                Ok(ScoredSample { w: s.w, gamma_z: Some((s.gamma_z, s.fallback)) })
            }
            TrainedModel::Oracle(m) => Ok(ScoredSample { w: m.score(x), gamma_z: None }),
        }
    }

    fn threshold(&self) -> f64 {
        match self {
            TrainedModel::Lda(m) => m.log_prior_ratio(),
            TrainedModel::Rlda(m) => m.log_prior_ratio(),
            TrainedModel::R2lda(m) => m.log_prior_ratio(),
            TrainedModel::Oracle(_) => 0.0,
        }
    }

    fn gamma_b(&self) -> Option<f64> {
        match self {
            TrainedModel::Rlda(m) => Some(m.gamma()),
            TrainedModel::R2lda(m) => Some(m.gamma_b()),
            _ => None,
        }
    }

    fn gamma_b_fallback(&self) -> bool {
        match self {
            TrainedModel::R2lda(m) => m.gamma_b_fallback(),
            _ => false,
        }
    }
}

/// LDA with the true synthetic parameters, mapped through the trial's
/// affine rescale and feature projection so it sees the same coordinates
/// as the empirical classifiers. The common covariance is the average of
/// the two class covariances.
pub struct OracleLda {
    direction: Array1<f64>,
    mid: Array1<f64>,
}

impl OracleLda {
    pub fn from_truth(
        truth: &SyntheticModel,
        record: Option<&ScalingRecord>,
        selected: Option<&[usize]>,
    ) -> Result<Self> {
        let p_full = truth.dim();
        let all: Vec<usize> = (0..p_full).collect();
        let idx: &[usize] = selected.unwrap_or(&all);
        let p = idx.len();

        // affine map x' = αx + β applied to the true parameters
        let (alpha, _beta) = match record {
            Some(r) if !r.is_degenerate() => (2.0 / (r.max - r.min), -2.0 * r.min / (r.max - r.min) - 1.0),
            Some(_) => (0.0, 0.0),
            None => (1.0, 0.0),
        };
        let map = |v: f64| match record {
            Some(r) => r.map(v),
            None => v,
        };

        let m0: Array1<f64> = Array1::from_iter(idx.iter().map(|&j| map(truth.m0()[j])));
        let m1: Array1<f64> = Array1::from_iter(idx.iter().map(|&j| map(-truth.m0()[j])));
        let sigma_avg = truth.sigma_average();
        let cov = DMatrix::from_fn(p, p, |i, j| alpha * alpha * sigma_avg[[idx[i], idx[j]]]);
        let chol = Cholesky::new(cov).ok_or_else(|| {
            HarnessError::Trial("oracle covariance is not positive definite".into())
        })?;
        let diff = DVector::from_fn(p, |i, _| m0[i] - m1[i]);
        let solved = chol.solve(&diff);
        Ok(OracleLda {
            direction: Array1::from_iter(solved.iter().cloned()),
            mid: (&m0 + &m1) * 0.5,
        })
    }

    pub fn score(&self, x: &Array1<f64>) -> f64 {
        (x - &self.mid).dot(&self.direction)
    }
}

/// Mean error percentage of oracle LDA over freshly drawn, optionally noisy
/// samples; the Monte Carlo reference the synthetic acceptance checks use.
pub fn oracle_error_rate(
    truth: &SyntheticModel,
    samples_per_class: usize,
    sigma: f64,
    seed: u64,
) -> Result<f64> {
    let oracle = OracleLda::from_truth(truth, None, None)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut errors = 0u64;
    for class in 0..2usize {
        let block = truth.sample_class(class, samples_per_class, &mut rng);
        for row in block.rows() {
            let mut x = row.to_owned();
            if sigma > 0.0 {
                x += &Array1::from_shape_fn(x.len(), |_| sigma * rng.sample::<f64, _>(StandardNormal));
            }
            let label = assign(oracle.score(&x), 0.0);
            if label != expected_label(class) {
                errors += 1;
            }
        }
    }
    Ok(100.0 * errors as f64 / (2 * samples_per_class) as f64)
}

fn expected_label(class: usize) -> ClassLabel {
    if class == 0 {
        ClassLabel::Class0
    } else {
        ClassLabel::Class1
    }
}
