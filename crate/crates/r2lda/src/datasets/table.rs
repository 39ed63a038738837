//! CSV table ingestion: a rectangular numeric table with a named label
//! column, split into two classes by a designated positive label.

use std::path::Path;

use ndarray::Array2;

use super::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::stats::LabeledTrainingSet;

/// Loads a headed CSV file. Rows whose label equals `positive_label` become
/// class 0. With `negative_label = None` every other row is class 1;
/// otherwise only rows matching the negative label are kept, which is how a
/// binary pair is carved out of a multi-class table.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    positive_label: &str,
    negative_label: Option<&str>,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())
        .map_err(|e| Error::format(format!("cannot open csv: {e}")))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::format(format!("cannot read csv header: {e}")))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::format(format!("label column {label_column:?} not found")))?;
    let p = headers.len() - 1;
    if p == 0 {
        return Err(Error::format("table has no feature columns"));
    }

    let mut class0: Vec<f64> = Vec::new();
    let mut class1: Vec<f64> = Vec::new();
    let mut n0 = 0usize;
    let mut n1 = 0usize;
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(format!("row {}: {e}", row_no + 2)))?;
        if record.len() != headers.len() {
            return Err(Error::format(format!(
                "row {} has {} fields, header has {}",
                row_no + 2,
                record.len(),
                headers.len()
            )));
        }
        let label = record.get(label_idx).unwrap_or("");
        let dst = if label == positive_label {
            n0 += 1;
            &mut class0
        } else if negative_label.is_none() || Some(label) == negative_label {
            n1 += 1;
            &mut class1
        } else {
            continue;
        };
        for (col, field) in record.iter().enumerate() {
            if col == label_idx {
                continue;
            }
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::format(format!(
                    "row {}, column {:?}: non-numeric value {field:?}",
                    row_no + 2,
                    headers.get(col).unwrap_or("")
                ))
            })?;
            dst.push(value);
        }
    }
    if n0 == 0 || n1 == 0 {
        return Err(Error::invalid(format!(
            "labels split into {n0} positive and {n1} negative rows; need both classes"
        )));
    }

    let train = LabeledTrainingSet::new(
        Array2::from_shape_vec((n0, p), class0).expect("row-major fill"),
        Array2::from_shape_vec((n1, p), class1).expect("row-major fill"),
    )?;
    Ok(Dataset {
        train,
        test0: Array2::zeros((0, p)),
        test1: Array2::zeros((0, p)),
        meta: DatasetMeta {
            name: format!("csv-{positive_label}-vs-{}", negative_label.unwrap_or("rest")),
            source: path.as_ref().display().to_string(),
            dim: p,
            scaling: None,
        },
    })
}
