//! Two-sample t-test feature selection in the Welch (unequal variance)
//! form, with Welch–Satterthwaite degrees of freedom and two-sided
//! p-values.

use ndarray::Array2;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::stats::LabeledTrainingSet;

/// Per-feature two-sided Welch p-values. A feature with zero variance in
/// both classes is uninformative (p = 1) unless its class means actually
/// differ, in which case the separation is perfect (p = 0).
pub fn ttest_pvalues(train: &LabeledTrainingSet) -> Result<Vec<f64>> {
    let n0 = train.n0();
    let n1 = train.n1();
    if n0 < 2 || n1 < 2 {
        return Err(Error::invalid("the t-test needs at least 2 samples per class"));
    }
    let p = train.dim();
    let c0 = train.class0();
    let c1 = train.class1();

    let mut pvalues = Vec::with_capacity(p);
    for j in 0..p {
        let col0 = c0.column(j);
        let col1 = c1.column(j);
        let m0 = col0.sum() / n0 as f64;
        let m1 = col1.sum() / n1 as f64;
        let v0 = col0.iter().map(|&x| (x - m0) * (x - m0)).sum::<f64>() / (n0 as f64 - 1.0);
        let v1 = col1.iter().map(|&x| (x - m1) * (x - m1)).sum::<f64>() / (n1 as f64 - 1.0);

        if v0 == 0.0 && v1 == 0.0 {
            pvalues.push(if m0 == m1 { 1.0 } else { 0.0 });
            continue;
        }
        let se0 = v0 / n0 as f64;
        let se1 = v1 / n1 as f64;
        let se2 = se0 + se1;
        let t = (m0 - m1) / se2.sqrt();
        let df = se2 * se2
            / (se0 * se0 / (n0 as f64 - 1.0) + se1 * se1 / (n1 as f64 - 1.0));
        let dist = StudentsT::new(0.0, 1.0, df)
            .map_err(|e| Error::numeric(format!("t distribution with df {df}: {e}")))?;
        pvalues.push((2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0));
    }
    Ok(pvalues)
}

/// The `k` feature indices with the smallest Welch p-values on the training
/// data, ties broken toward the smaller index. Returned sorted ascending by
/// index for stable downstream projection.
pub fn ttest_select(train: &LabeledTrainingSet, k: usize) -> Result<Vec<usize>> {
    if k > train.dim() {
        return Err(Error::invalid(format!(
            "cannot select {k} features out of {}",
            train.dim()
        )));
    }
    let pvalues = ttest_pvalues(train)?;
    let mut order: Vec<usize> = (0..pvalues.len()).collect();
    order.sort_by(|&a, &b| {
        pvalues[a]
            .partial_cmp(&pvalues[b])
            .expect("p-values are finite")
            .then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = order.into_iter().take(k).collect();
    selected.sort_unstable();
    Ok(selected)
}

/// Projects a sample block onto the given feature columns.
pub fn select_columns(data: &Array2<f64>, indices: &[usize]) -> Result<Array2<f64>> {
    for &i in indices {
        if i >= data.ncols() {
            return Err(Error::invalid(format!(
                "feature index {i} out of range for dimension {}",
                data.ncols()
            )));
        }
    }
    let mut out = Array2::zeros((data.nrows(), indices.len()));
    for (dst, &src) in indices.iter().enumerate() {
        out.column_mut(dst).assign(&data.column(src));
    }
    Ok(out)
}
