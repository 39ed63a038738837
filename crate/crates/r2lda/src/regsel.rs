//! Ridge estimation on the linear model `y = Σ̂^{1/2} c + v` and the three
//! automatic regularization-parameter selectors: COPRA (secular-equation
//! root with eigenvalue partitioning), BPR (the same equation without
//! partitioning), and GCV (log-grid minimization of the generalized
//! cross-validation function).
//!
//! Every trace expression is evaluated as an O(p) scalar sum over the
//! covariance eigenvalues, never as an explicit matrix product, so a single
//! γ evaluation costs O(p) instead of O(p³).

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{EigenDecomposition, PartitionedEig};

/// Residual is considered zero when below this fraction of the equation's
/// term magnitude.
const RESIDUAL_RATIO: f64 = 1e-12;
/// A secular function whose value stays below this fraction of its term
/// magnitude across the whole scan is treated as identically zero.
const FLAT_RATIO: f64 = 1e-13;
/// Root certification: |F(γ)| must be at most this fraction of the larger
/// of |F(γ/2)|, |F(2γ)| and 1.
const CERT_RATIO: f64 = 1e-7;
const SCAN_POINTS: usize = 60;
const SCAN_LO_RATIO: f64 = 1e-8;
const SCAN_HI_RATIO: f64 = 1e8;

/// An observation seen through the eigenbasis of the pooled covariance:
/// `d = Uᵀy`. The orthogonal projection preserves the Euclidean norm, which
/// is checked at construction.
#[derive(Debug, Clone)]
pub struct LinearModelView<'a> {
    eig: &'a EigenDecomposition,
    d: Array1<f64>,
}

impl<'a> LinearModelView<'a> {
    pub fn new(eig: &'a EigenDecomposition, y: ArrayView1<'_, f64>) -> Result<Self> {
        let d = eig.project(y)?;
        let ny = y.dot(&y).sqrt();
        let nd = d.dot(&d).sqrt();
        if (ny - nd).abs() > 1e-10 * ny.max(1e-300) {
            return Err(Error::numeric("eigenbasis projection failed to preserve the norm"));
        }
        Ok(LinearModelView { eig, d })
    }

    pub fn eig(&self) -> &'a EigenDecomposition {
        self.eig
    }

    /// The transformed observation `Uᵀy`.
    pub fn d(&self) -> &Array1<f64> {
        &self.d
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }
}

/// Newton-iteration settings for the COPRA/BPR secular equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// The start value is this factor times the mean significant eigenvalue;
    /// a small positive start avoids stepping over the smallest root.
    pub initial_gamma_scale: f64,
    /// Relative step size below which the iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { initial_gamma_scale: 1e-6, tol: 1e-9, max_iter: 100 }
    }
}

impl NewtonConfig {
    fn validate(&self) -> Result<()> {
        if self.initial_gamma_scale > 0.0 && self.tol > 0.0 && self.max_iter > 0 {
            Ok(())
        } else {
            Err(Error::invalid("Newton settings must be strictly positive"))
        }
    }
}

/// Search-grid settings for GCV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcvGrid {
    pub num_points: usize,
    /// The lower grid bound never drops below this fraction of the largest
    /// eigenvalue, even when the spectrum reaches (numerical) zero.
    pub floor_ratio: f64,
}

impl Default for GcvGrid {
    fn default() -> Self {
        GcvGrid { num_points: 200, floor_ratio: 1e-12 }
    }
}

impl GcvGrid {
    fn validate(&self) -> Result<()> {
        if self.num_points >= 2 && self.floor_ratio > 0.0 && self.floor_ratio < 1.0 {
            Ok(())
        } else {
            Err(Error::invalid("GCV grid needs num_points >= 2 and floor_ratio in (0, 1)"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    Copra,
    Bpr,
    Gcv,
}

impl std::fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SelectorKind::Copra => "copra",
            SelectorKind::Bpr => "bpr",
            SelectorKind::Gcv => "gcv",
        };
        f.write_str(s)
    }
}

/// A configured regularization-parameter selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegSelector {
    pub kind: SelectorKind,
    pub newton: NewtonConfig,
    pub grid: GcvGrid,
    /// When an equation is degenerate (flat, or without a sign change on the
    /// scan interval) the selector returns this factor times the mean
    /// significant eigenvalue, flagged.
    pub fallback_gamma_scale: f64,
}

impl RegSelector {
    pub fn new(kind: SelectorKind) -> Self {
        RegSelector {
            kind,
            newton: NewtonConfig::default(),
            grid: GcvGrid::default(),
            fallback_gamma_scale: 1e-3,
        }
    }

    pub fn copra() -> Self {
        Self::new(SelectorKind::Copra)
    }

    pub fn bpr() -> Self {
        Self::new(SelectorKind::Bpr)
    }

    pub fn gcv() -> Self {
        Self::new(SelectorKind::Gcv)
    }

    /// Runs the configured selector on a transformed observation `d = Uᵀy`.
    ///
    /// A zero observation is a degenerate-observation error (the caller
    /// owns the fallback policy there). A fully clamped spectrum cannot
    /// drive any of the equations and yields the flagged fallback value.
    pub fn select(&self, pe: &PartitionedEig<'_>, d: &Array1<f64>) -> Result<SelectedGamma> {
        if self.fallback_gamma_scale <= 0.0 {
            return Err(Error::invalid("fallback_gamma_scale must be positive"));
        }
        match self.kind {
            SelectorKind::Copra => copra_select(pe, d, &self.newton, self.fallback_gamma_scale),
            SelectorKind::Bpr => bpr_select(pe.parent(), d, &self.newton, self.fallback_gamma_scale),
            SelectorKind::Gcv => {
                if d.dot(d) == 0.0 {
                    return Err(Error::DegenerateObservation(
                        "observation is identically zero".into(),
                    ));
                }
                if !pe.parent().d2().iter().any(|&e| e > 0.0) {
                    return Ok(SelectedGamma {
                        gamma: self.fallback_gamma_scale * fallback_reference(pe.d2_sig()),
                        fallback: true,
                        iterations: 0,
                        brackets: 0,
                    });
                }
                gcv_select(pe.parent(), d, &self.grid)
            }
        }
    }
}

/// A selected regularization parameter plus diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectedGamma {
    pub gamma: f64,
    /// True when the defining equation was degenerate and the conservative
    /// fallback value was returned instead of a certified root.
    pub fallback: bool,
    /// Newton iterations spent (zero for GCV and fallback paths).
    pub iterations: usize,
    /// Sign-change brackets observed on the safety scan; more than one means
    /// the equation admits multiple candidate roots (the smallest is taken).
    pub brackets: usize,
}

/// Ridge estimate `ĉ = (Σ̂ + γI)⁻¹ Σ̂^{1/2} y`, evaluated spectrally as
/// `U diag(√d2_k / (d2_k + γ)) Uᵀ y`.
pub fn ridge_estimate(view: &LinearModelView<'_>, gamma: f64) -> Result<Array1<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("ridge gamma must be positive, got {gamma}")));
    }
    let d2 = view.eig().d2();
    let filtered = Array1::from_shape_fn(view.dim(), |k| {
        let e = d2[k];
        e.sqrt() / (e + gamma) * view.d()[k]
    });
    Ok(view.eig().u().dot(&filtered))
}

/// Closed-form MSE-optimal ridge parameter `γ = p σ_v² / tr(Σ_cc)` for the
/// linear model with known noise level and signal covariance trace. The
/// statistics are never observable at runtime; this exists for validation.
pub fn mse_optimal_gamma(sigma_v2: f64, trace_scc: f64, p: usize) -> Result<f64> {
    if !(sigma_v2 > 0.0) || !(trace_scc > 0.0) || p == 0 {
        return Err(Error::invalid("mse_optimal_gamma needs positive inputs"));
    }
    Ok(p as f64 * sigma_v2 / trace_scc)
}

struct SecularTerms {
    value: f64,
    deriv: f64,
    /// Sum of the absolute magnitudes of the terms composing `value`; the
    /// natural scale against which a residual counts as zero.
    magnitude: f64,
}

enum SecularEq<'a> {
    Copra { d2: &'a [f64], d: &'a [f64], p1: usize },
    Bpr { d2: &'a [f64], d: &'a [f64] },
}

impl SecularEq<'_> {
    fn eval(&self, gamma: f64) -> SecularTerms {
        match self {
            SecularEq::Copra { d2, d, p1 } => {
                let p = d2.len() as f64;
                let p1f = *p1 as f64;
                let ratio = p / p1f;
                // full-spectrum traces against ddᵀ
                let (mut a, mut c, mut da, mut dc) = (0.0, 0.0, 0.0, 0.0);
                for (&e, &dk) in d2.iter().zip(d.iter()) {
                    let dk2 = dk * dk;
                    let u = e + gamma;
                    let u2 = u * u;
                    let u3 = u2 * u;
                    a += e * dk2 / u2;
                    c += dk2 / u2;
                    da -= 2.0 * e * dk2 / u3;
                    dc -= 2.0 * dk2 / u3;
                }
                // traces restricted to the significant block, weighted by
                // (p/p1)·D₁² + γI
                let (mut b, mut w, mut db, mut dw) = (0.0, 0.0, 0.0, 0.0);
                for &e in &d2[..*p1] {
                    let u = e + gamma;
                    let u2 = u * u;
                    let u3 = u2 * u;
                    let num = ratio * e + gamma;
                    let dnum = e * (1.0 - 2.0 * ratio) - gamma;
                    b += num / u2;
                    w += e * num / u2;
                    db += dnum / u3;
                    dw += e * dnum / u3;
                }
                let p2 = p - p1f;
                let t1 = a * b;
                let t2 = p2 * a / gamma;
                let t3 = c * w;
                SecularTerms {
                    value: t1 + t2 - t3,
                    deriv: da * b + a * db + p2 * (da * gamma - a) / (gamma * gamma)
                        - dc * w
                        - c * dw,
                    magnitude: t1.abs() + t2.abs() + t3.abs(),
                }
            }
            SecularEq::Bpr { d2, d } => {
                let p = d2.len() as f64;
                let (mut inv_tr, mut proj, mut c) = (0.0, 0.0, 0.0);
                let (mut d_inv_tr, mut d_proj, mut dc) = (0.0, 0.0, 0.0);
                for (&e, &dk) in d2.iter().zip(d.iter()) {
                    let dk2 = dk * dk;
                    let u = e + gamma;
                    let u2 = u * u;
                    let u3 = u2 * u;
                    inv_tr += 1.0 / u;
                    proj += dk2 / u;
                    c += dk2 / u2;
                    d_inv_tr -= 1.0 / u2;
                    d_proj -= dk2 / u2;
                    dc -= 2.0 * dk2 / u3;
                }
                let t1 = inv_tr * proj;
                let t3 = p * c;
                SecularTerms {
                    value: t1 - t3,
                    deriv: d_inv_tr * proj + inv_tr * d_proj - p * dc,
                    magnitude: t1.abs() + t3.abs(),
                }
            }
        }
    }
}

fn fallback_reference(d2_sig: &[f64]) -> f64 {
    let m = mean_of(d2_sig);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

fn mean_of(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn certified(eq: &SecularEq<'_>, gamma: f64) -> bool {
    let at_root = eq.eval(gamma).value.abs();
    let below = eq.eval(0.5 * gamma).value.abs();
    let above = eq.eval(2.0 * gamma).value.abs();
    at_root <= CERT_RATIO * below.max(above).max(1.0)
}

/// A Newton fixed point only counts as a root when a sign change brackets
/// it locally. This rejects the γ → ∞ asymptote, where the function decays
/// to zero without ever crossing it and a pure residual criterion would
/// falsely report convergence.
fn verified_root(eq: &SecularEq<'_>, gamma: f64) -> bool {
    let at = eq.eval(gamma).value;
    if at == 0.0 {
        return certified(eq, gamma);
    }
    let below = eq.eval(gamma * (1.0 - 1e-6)).value;
    let above = eq.eval(gamma * (1.0 + 1e-6)).value;
    let crossing = below == 0.0
        || above == 0.0
        || (below.is_finite() && above.is_finite() && below * above < 0.0);
    crossing && certified(eq, gamma)
}

/// Shared root-finding machinery: flatness scan, Newton from a small
/// positive start, bisection on the smallest sign-change bracket, and a
/// flagged fallback when the equation carries no usable root.
fn solve_secular(
    eq: &SecularEq<'_>,
    ref_scale: f64,
    newton: &NewtonConfig,
    fallback_gamma_scale: f64,
) -> SelectedGamma {
    let scale = if ref_scale > 0.0 { ref_scale } else { 1.0 };
    let fallback = SelectedGamma {
        gamma: fallback_gamma_scale * scale,
        fallback: true,
        iterations: 0,
        brackets: 0,
    };
    if ref_scale <= 0.0 {
        // fully clamped spectrum; every term of the equation vanishes
        return fallback;
    }

    // Scan once: detects identically-zero equations (isotropic spectra make
    // every trace factorize and cancel) and collects sign-change brackets
    // for the bisection safeguard.
    let lo = SCAN_LO_RATIO * scale;
    let hi = SCAN_HI_RATIO * scale;
    let log_lo = lo.ln();
    let log_step = (hi.ln() - log_lo) / (SCAN_POINTS as f64 - 1.0);
    let mut flat = true;
    let mut brackets: Vec<(f64, f64)> = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..SCAN_POINTS {
        let g = (log_lo + log_step * i as f64).exp();
        let t = eq.eval(g);
        if t.value.abs() > FLAT_RATIO * t.magnitude {
            flat = false;
        }
        if let Some((pg, pv)) = prev {
            if pv.is_finite() && t.value.is_finite() && pv != 0.0 && pv * t.value < 0.0 {
                brackets.push((pg, g));
            }
        }
        prev = Some((g, t.value));
    }
    if flat {
        return SelectedGamma { brackets: brackets.len(), ..fallback };
    }

    // Newton's method from a positive start close to zero.
    let mut gamma = newton.initial_gamma_scale * scale;
    let mut iterations = 0;
    let mut newton_root = None;
    for it in 1..=newton.max_iter {
        iterations = it;
        let t = eq.eval(gamma);
        if !(t.value.is_finite() && t.deriv.is_finite()) {
            break;
        }
        if t.value.abs() <= RESIDUAL_RATIO * t.magnitude {
            newton_root = Some(gamma);
            break;
        }
        if t.deriv == 0.0 {
            break;
        }
        let next = gamma - t.value / t.deriv;
        if !next.is_finite() || next <= 0.0 {
            break; // left the positive axis
        }
        if (next - gamma).abs() <= newton.tol * next {
            newton_root = Some(next);
            break;
        }
        gamma = next;
    }
    if let Some(root) = newton_root {
        if verified_root(eq, root) {
            return SelectedGamma {
                gamma: root,
                fallback: false,
                iterations,
                brackets: brackets.len(),
            };
        }
    }

    // Bisection on the smallest-γ bracket found by the scan.
    if let Some(&(a0, b0)) = brackets.first() {
        let (mut a, mut b) = (a0, b0);
        let mut fa = eq.eval(a).value;
        for _ in 0..200 {
            if (b - a) <= 1e-13 * a {
                break;
            }
            let mid = 0.5 * (a + b);
            let fm = eq.eval(mid).value;
            if fm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if fa * fm < 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        let root = 0.5 * (a + b);
        if certified(eq, root) {
            return SelectedGamma {
                gamma: root,
                fallback: false,
                iterations,
                brackets: brackets.len(),
            };
        }
    }

    SelectedGamma { iterations, brackets: brackets.len(), ..fallback }
}

/// Left-hand side of the COPRA secular equation at `gamma`, with all traces
/// reduced to scalar sums over the eigenvalues.
pub fn copra_secular(gamma: f64, pe: &PartitionedEig<'_>, d: &Array1<f64>) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma must be positive"));
    }
    if d.len() != pe.parent().dim() {
        return Err(Error::invalid("observation length does not match decomposition"));
    }
    let eq = SecularEq::Copra {
        d2: pe.parent().d2().as_slice().expect("contiguous"),
        d: d.as_slice().expect("contiguous"),
        p1: pe.p1(),
    };
    let v = eq.eval(gamma).value;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numeric("secular equation produced a non-finite value"))
    }
}

/// Left-hand side of the BPR equation (the COPRA equation with `p1 = p`,
/// algebraically simplified).
pub fn bpr_secular(gamma: f64, eig: &EigenDecomposition, d: &Array1<f64>) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma must be positive"));
    }
    if d.len() != eig.dim() {
        return Err(Error::invalid("observation length does not match decomposition"));
    }
    let eq = SecularEq::Bpr {
        d2: eig.d2().as_slice().expect("contiguous"),
        d: d.as_slice().expect("contiguous"),
    };
    let v = eq.eval(gamma).value;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numeric("secular equation produced a non-finite value"))
    }
}

/// COPRA: the smallest positive root of the partitioned secular equation,
/// or the flagged fallback when the equation is flat or never changes sign
/// on `[1e-8, 1e8] × mean(d2_sig)`.
pub fn copra_select(
    pe: &PartitionedEig<'_>,
    d: &Array1<f64>,
    newton: &NewtonConfig,
    fallback_gamma_scale: f64,
) -> Result<SelectedGamma> {
    newton.validate()?;
    if fallback_gamma_scale <= 0.0 {
        return Err(Error::invalid("fallback_gamma_scale must be positive"));
    }
    if d.len() != pe.parent().dim() {
        return Err(Error::invalid("observation length does not match decomposition"));
    }
    if d.dot(d) == 0.0 {
        return Err(Error::DegenerateObservation("observation is identically zero".into()));
    }
    let eq = SecularEq::Copra {
        d2: pe.parent().d2().as_slice().expect("contiguous"),
        d: d.as_slice().expect("contiguous"),
        p1: pe.p1(),
    };
    Ok(solve_secular(&eq, mean_of(pe.d2_sig()), newton, fallback_gamma_scale))
}

/// BPR: as [`copra_select`] but on the unpartitioned equation.
pub fn bpr_select(
    eig: &EigenDecomposition,
    d: &Array1<f64>,
    newton: &NewtonConfig,
    fallback_gamma_scale: f64,
) -> Result<SelectedGamma> {
    newton.validate()?;
    if fallback_gamma_scale <= 0.0 {
        return Err(Error::invalid("fallback_gamma_scale must be positive"));
    }
    if d.len() != eig.dim() {
        return Err(Error::invalid("observation length does not match decomposition"));
    }
    if d.dot(d) == 0.0 {
        return Err(Error::DegenerateObservation("observation is identically zero".into()));
    }
    let eq = SecularEq::Bpr {
        d2: eig.d2().as_slice().expect("contiguous"),
        d: d.as_slice().expect("contiguous"),
    };
    Ok(solve_secular(&eq, mean_of(eig.d2().as_slice().expect("contiguous")), newton, fallback_gamma_scale))
}

/// The GCV function `G(γ) = Σ (γ/(d2_k+γ))² d_k² / (Σ γ/(d2_k+γ))²`.
///
/// At `γ = 0` a zero eigenvalue contributes its limit factor 1; a full-rank
/// spectrum at `γ = 0` makes the denominator vanish and returns `+∞`.
pub fn gcv_function(gamma: f64, d2: &[f64], d: &[f64]) -> f64 {
    debug_assert_eq!(d2.len(), d.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for (&e, &dk) in d2.iter().zip(d.iter()) {
        let factor = if e == 0.0 && gamma == 0.0 { 1.0 } else { gamma / (e + gamma) };
        num += factor * factor * dk * dk;
        den += factor;
    }
    if den == 0.0 {
        return f64::INFINITY;
    }
    num / (den * den)
}

/// Log-spaced γ grid spanning the covariance spectrum: from the smallest
/// eigenvalue (floored at `floor_ratio` times the largest) up to the
/// largest eigenvalue, ascending, consecutive duplicates removed.
pub fn gcv_grid_bounds(d2: &[f64], grid: &GcvGrid) -> Result<Vec<f64>> {
    grid.validate()?;
    let hi = d2.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > 0.0) {
        return Err(Error::invalid("spectrum has no positive eigenvalue"));
    }
    let min = d2.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
    let lo = min.max(grid.floor_ratio * hi);
    if lo >= hi {
        return Ok(vec![hi]);
    }
    let n = grid.num_points;
    let (log_lo, log_hi) = (lo.ln(), hi.ln());
    let mut gammas = Vec::with_capacity(n);
    for i in 0..n {
        let g = if i == 0 {
            lo
        } else if i == n - 1 {
            hi
        } else {
            (log_lo + (log_hi - log_lo) * i as f64 / (n as f64 - 1.0)).exp()
        };
        if gammas.last() != Some(&g) {
            gammas.push(g);
        }
    }
    Ok(gammas)
}

/// GCV selection: the grid γ minimizing [`gcv_function`], ties resolved
/// toward the smallest γ. A flat function (relative spread below 1e-12)
/// returns the geometric midpoint of the grid, flagged.
pub fn gcv_select(
    eig: &EigenDecomposition,
    d: &Array1<f64>,
    grid: &GcvGrid,
) -> Result<SelectedGamma> {
    if d.len() != eig.dim() {
        return Err(Error::invalid("observation length does not match decomposition"));
    }
    if d.dot(d) == 0.0 {
        return Err(Error::DegenerateObservation("observation is identically zero".into()));
    }
    let d2 = eig.d2().as_slice().expect("contiguous");
    let ds = d.as_slice().expect("contiguous");
    let gammas = gcv_grid_bounds(d2, grid)?;
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    let mut max_val = f64::NEG_INFINITY;
    for (i, &g) in gammas.iter().enumerate() {
        let v = gcv_function(g, d2, ds);
        if v < best_val {
            best_val = v;
            best = i;
        }
        if v > max_val {
            max_val = v;
        }
    }
    let flat = max_val - best_val <= 1e-12 * max_val.abs();
    if flat {
        let mid = (gammas[0] * gammas[gammas.len() - 1]).sqrt();
        Ok(SelectedGamma { gamma: mid, fallback: true, iterations: 0, brackets: 0 })
    } else {
        Ok(SelectedGamma { gamma: gammas[best], fallback: false, iterations: 0, brackets: 0 })
    }
}
