//! Score functions and the class-assignment rule: plain LDA with a spectral
//! pseudo-inverse, the single-γ RLDA baseline, and the doubly regularized
//! R2LDA classifier whose second parameter is tuned per test sample.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{partition_eig, sym_eig, EigenDecomposition, PartitionedEig};
use crate::regsel::{ridge_estimate, LinearModelView, RegSelector};
use crate::stats::{ClassStats, LabeledTrainingSet, StatsOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassLabel {
    Class0,
    Class1,
}

impl ClassLabel {
    pub fn index(self) -> usize {
        match self {
            ClassLabel::Class0 => 0,
            ClassLabel::Class1 => 1,
        }
    }
}

/// Assignment rule: class 0 iff the score strictly exceeds `log(π1/π0)`.
/// A score exactly on the threshold goes to class 1.
pub fn assign(w: f64, log_prior_ratio: f64) -> ClassLabel {
    if w > log_prior_ratio {
        ClassLabel::Class0
    } else {
        ClassLabel::Class1
    }
}

/// Plain LDA; the covariance inverse is realized as a spectral
/// pseudo-inverse over the clamped spectrum (zero eigenvalues map to zero).
#[derive(Debug, Clone)]
pub struct LdaModel {
    stats: ClassStats,
    eig: EigenDecomposition,
    dm: Array1<f64>,
}

impl LdaModel {
    pub fn train(train: &LabeledTrainingSet) -> Result<Self> {
        Self::train_with(train, &StatsOptions::default())
    }

    pub fn train_with(train: &LabeledTrainingSet, opts: &StatsOptions) -> Result<Self> {
        let stats = ClassStats::estimate(train, opts)?;
        let eig = sym_eig(&stats.sigma_pooled)?;
        Self::from_parts(stats, eig)
    }

    /// Assembles a model from precomputed statistics and the decomposition
    /// of their pooled covariance.
    pub fn from_parts(stats: ClassStats, eig: EigenDecomposition) -> Result<Self> {
        if eig.dim() != stats.dim() {
            return Err(Error::invalid("decomposition dimension does not match statistics"));
        }
        let dm = eig.project(stats.m_minus.view())?;
        Ok(LdaModel { stats, eig, dm })
    }

    pub fn stats(&self) -> &ClassStats {
        &self.stats
    }

    pub fn score(&self, x: &Array1<f64>) -> Result<f64> {
        score_lda(self, x)
    }

    pub fn predict(&self, x: &Array1<f64>) -> Result<ClassLabel> {
        Ok(assign(self.score(x)?, self.log_prior_ratio()))
    }

    pub fn log_prior_ratio(&self) -> f64 {
        self.stats.log_prior_ratio()
    }
}

/// `W = (x - m⁺/2)ᵀ Σ̂⁺ m̂⁻` through the eigenbasis.
pub fn score_lda(model: &LdaModel, x: &Array1<f64>) -> Result<f64> {
    let dx = project_centered(&model.eig, &model.stats, x)?;
    let d2 = model.eig.d2();
    let mut w = 0.0;
    for k in 0..d2.len() {
        if d2[k] > 0.0 {
            w += dx[k] * model.dm[k] / d2[k];
        }
    }
    Ok(w)
}

/// RLDA baseline with a caller-supplied static regularization parameter;
/// the score applies `H = (I + γΣ̂)⁻¹` spectrally.
#[derive(Debug, Clone)]
pub struct RldaModel {
    stats: ClassStats,
    eig: EigenDecomposition,
    gamma: f64,
    dm: Array1<f64>,
}

impl RldaModel {
    pub fn train_with_gamma(train: &LabeledTrainingSet, gamma: f64) -> Result<Self> {
        let stats = ClassStats::estimate(train, &StatsOptions::default())?;
        let eig = sym_eig(&stats.sigma_pooled)?;
        Self::from_parts(stats, eig, gamma)
    }

    pub fn from_parts(stats: ClassStats, eig: EigenDecomposition, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::invalid(format!("rlda gamma must be positive, got {gamma}")));
        }
        if eig.dim() != stats.dim() {
            return Err(Error::invalid("decomposition dimension does not match statistics"));
        }
        let dm = eig.project(stats.m_minus.view())?;
        Ok(RldaModel { stats, eig, gamma, dm })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn score(&self, x: &Array1<f64>) -> Result<f64> {
        score_rlda(self, x)
    }

    pub fn predict(&self, x: &Array1<f64>) -> Result<ClassLabel> {
        Ok(assign(self.score(x)?, self.log_prior_ratio()))
    }

    pub fn log_prior_ratio(&self) -> f64 {
        self.stats.log_prior_ratio()
    }
}

/// `W = (x - m⁺/2)ᵀ (I + γΣ̂)⁻¹ m̂⁻ = Σ_k dx_k dm_k / (1 + γ d2_k)`.
pub fn score_rlda(model: &RldaModel, x: &Array1<f64>) -> Result<f64> {
    let dx = project_centered(&model.eig, &model.stats, x)?;
    let d2 = model.eig.d2();
    let mut w = 0.0;
    for k in 0..d2.len() {
        w += dx[k] * model.dm[k] / (1.0 + model.gamma * d2[k]);
    }
    Ok(w)
}

/// The trained doubly regularized classifier: class statistics, the pooled
/// covariance eigendecomposition with its `p1 = min(n, p)` partition, the
/// offline parameter `γ_b` with its cached ridge estimate `b̂`, and the
/// selector configuration reused per test sample for `γ_z`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct R2ldaModel {
    stats: ClassStats,
    eig: EigenDecomposition,
    p1: usize,
    selector: RegSelector,
    gamma_b: f64,
    gamma_b_fallback: bool,
    b_hat: Array1<f64>,
    dm: Array1<f64>,
}

/// One scored test sample: the score value, the per-sample parameter that
/// produced it, and whether that parameter came from the fallback path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct R2ldaScore {
    pub w: f64,
    pub gamma_z: f64,
    pub fallback: bool,
}

pub fn train_r2lda(train: &LabeledTrainingSet, selector: RegSelector) -> Result<R2ldaModel> {
    train_r2lda_with(train, selector, &StatsOptions::default())
}

/// Training: estimate statistics, decompose the pooled covariance, select
/// `γ_b` on the mean-difference view, and cache `b̂`. Identical class means
/// surface as a degenerate-observation error.
pub fn train_r2lda_with(
    train: &LabeledTrainingSet,
    selector: RegSelector,
    opts: &StatsOptions,
) -> Result<R2ldaModel> {
    let stats = ClassStats::estimate(train, opts)?;
    let eig = sym_eig(&stats.sigma_pooled)?;
    let pe = partition_eig(&eig, train.n0() + train.n1())?;
    let view = LinearModelView::new(&eig, stats.m_minus.view())?;
    let selected = selector.select(&pe, view.d())?;
    let b_hat = ridge_estimate(&view, selected.gamma)?;
    let dm = view.d().clone();
    let p1 = pe.p1();
    Ok(R2ldaModel {
        stats,
        eig,
        p1,
        selector,
        gamma_b: selected.gamma,
        gamma_b_fallback: selected.fallback,
        b_hat,
        dm,
    })
}

impl R2ldaModel {
    pub fn stats(&self) -> &ClassStats {
        &self.stats
    }

    pub fn eig(&self) -> &EigenDecomposition {
        &self.eig
    }

    pub fn partitioned(&self) -> PartitionedEig<'_> {
        partition_eig(&self.eig, self.p1).expect("stored p1 is valid")
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn selector(&self) -> &RegSelector {
        &self.selector
    }

    pub fn gamma_b(&self) -> f64 {
        self.gamma_b
    }

    pub fn gamma_b_fallback(&self) -> bool {
        self.gamma_b_fallback
    }

    pub fn b_hat(&self) -> &Array1<f64> {
        &self.b_hat
    }

    pub fn dim(&self) -> usize {
        self.stats.dim()
    }

    pub fn log_prior_ratio(&self) -> f64 {
        self.stats.log_prior_ratio()
    }

    pub fn score(&self, x: &Array1<f64>) -> Result<R2ldaScore> {
        score_r2lda(self, x)
    }

    pub fn predict(&self, x: &Array1<f64>) -> Result<ClassLabel> {
        Ok(assign(self.score(x)?.w, self.log_prior_ratio()))
    }

    /// Re-validates the structural invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        let p = self.stats.dim();
        if self.eig.dim() != p || self.b_hat.len() != p || self.dm.len() != p {
            return Err(Error::invalid("model parts disagree on dimension"));
        }
        if self.p1 == 0 || self.p1 > p {
            return Err(Error::invalid("stored partition index out of range"));
        }
        if !(self.gamma_b > 0.0) {
            return Err(Error::invalid("stored gamma_b must be positive"));
        }
        Ok(())
    }

    fn fallback_gamma(&self) -> f64 {
        let sig = &self.eig.d2().as_slice().expect("contiguous")[..self.p1];
        let mean = sig.iter().sum::<f64>() / sig.len() as f64;
        self.selector.fallback_gamma_scale * if mean > 0.0 { mean } else { 1.0 }
    }
}

/// Scores one test sample: centers it, selects `γ_z` on its eigenbasis view,
/// and evaluates `W = Σ_k d2_k dx_k dm_k / ((d2_k+γ_z)(d2_k+γ_b))`.
///
/// A test vector that centers to exactly zero cannot drive the selection;
/// it scores `W = 0` under the fallback γ, flagged for the caller's logs.
pub fn score_r2lda(model: &R2ldaModel, x: &Array1<f64>) -> Result<R2ldaScore> {
    if x.len() != model.dim() {
        return Err(Error::invalid(format!(
            "test vector length {} does not match model dimension {}",
            x.len(),
            model.dim()
        )));
    }
    let centered = x - &(0.5 * &model.stats.m_plus);
    if centered.iter().all(|&v| v == 0.0) {
        return Ok(R2ldaScore { w: 0.0, gamma_z: model.fallback_gamma(), fallback: true });
    }
    let dx = model.eig.project(centered.view())?;
    let pe = model.partitioned();
    let selected = model.selector.select(&pe, &dx)?;
    let w = r2lda_score_sum(
        model.eig.d2().as_slice().expect("contiguous"),
        dx.as_slice().expect("contiguous"),
        model.dm.as_slice().expect("contiguous"),
        selected.gamma,
        model.gamma_b,
    );
    Ok(R2ldaScore { w, gamma_z: selected.gamma, fallback: selected.fallback })
}

/// The doubly regularized score as a scalar sum over the spectrum. Terms
/// with a zero eigenvalue contribute nothing (their numerator carries the
/// eigenvalue as a factor), which also makes the γ → 0 limit well defined
/// on rank-deficient spectra.
pub fn r2lda_score_sum(d2: &[f64], dx: &[f64], dm: &[f64], gamma_z: f64, gamma_b: f64) -> f64 {
    let mut w = 0.0;
    for k in 0..d2.len() {
        let e = d2[k];
        if e == 0.0 {
            continue;
        }
        w += e * dx[k] * dm[k] / ((e + gamma_z) * (e + gamma_b));
    }
    w
}

fn project_centered(
    eig: &EigenDecomposition,
    stats: &ClassStats,
    x: &Array1<f64>,
) -> Result<Array1<f64>> {
    if x.len() != stats.dim() {
        return Err(Error::invalid(format!(
            "test vector length {} does not match model dimension {}",
            x.len(),
            stats.dim()
        )));
    }
    let centered = x - &(0.5 * &stats.m_plus);
    eig.project(centered.view())
}
