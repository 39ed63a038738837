//! Versioned on-disk document for trained R2LDA models (JSON; f64 values
//! survive the round trip exactly).

use std::path::Path;

use serde::{Deserialize, Serialize};

use r2lda::classify::R2ldaModel;

use crate::{HarnessError, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    model: R2ldaModel,
}

pub fn model_to_json(model: &R2ldaModel) -> Result<String> {
    serde_json::to_string(&ModelDocument { format_version: MODEL_FORMAT_VERSION, model: model.clone() })
        .map_err(|e| HarnessError::Serde(e.to_string()))
}

pub fn model_from_json(text: &str) -> Result<R2ldaModel> {
    let doc: ModelDocument =
        serde_json::from_str(text).map_err(|e| HarnessError::Serde(e.to_string()))?;
    if doc.format_version != MODEL_FORMAT_VERSION {
        return Err(HarnessError::Serde(format!(
            "unsupported model format version {} (this build reads {MODEL_FORMAT_VERSION})",
            doc.format_version
        )));
    }
    doc.model.validate()?;
    Ok(doc.model)
}

pub fn save_model(model: &R2ldaModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<R2ldaModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use r2lda::classify::train_r2lda;
    use r2lda::datasets::{gen_synthetic, SyntheticSpec};
    use r2lda::regsel::RegSelector;
    use rand::prelude::*;

    #[test]
    fn round_trip_preserves_scores_exactly() {
        let spec = SyntheticSpec { p: 12, n0: 20, n1: 20, test_per_class: 2, seed: 3, ..Default::default() };
        let data = gen_synthetic(&spec).unwrap();
        let model = train_r2lda(&data.train, RegSelector::gcv()).unwrap();

        let json = model_to_json(&model).unwrap();
        let restored = model_from_json(&json).unwrap();

        assert_eq!(model.gamma_b().to_bits(), restored.gamma_b().to_bits());
        assert_eq!(model.p1(), restored.p1());
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
        for _ in 0..5 {
            let x = Array1::from_shape_fn(12, |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let a = model.score(&x).unwrap();
            let b = restored.score(&x).unwrap();
            assert_eq!(a.w.to_bits(), b.w.to_bits());
            assert_eq!(a.gamma_z.to_bits(), b.gamma_z.to_bits());
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let spec = SyntheticSpec { p: 4, n0: 6, n1: 6, test_per_class: 1, seed: 1, ..Default::default() };
        let data = gen_synthetic(&spec).unwrap();
        let model = train_r2lda(&data.train, RegSelector::bpr()).unwrap();
        let json = model_to_json(&model).unwrap().replace("\"format_version\":1", "\"format_version\":99");
        assert!(model_from_json(&json).is_err());
    }

    #[test]
    fn save_and_load_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let spec = SyntheticSpec { p: 6, n0: 10, n1: 10, test_per_class: 1, seed: 2, ..Default::default() };
        let data = gen_synthetic(&spec).unwrap();
        let model = train_r2lda(&data.train, RegSelector::copra()).unwrap();
        save_model(&model, &path).unwrap();
        let restored = load_model(&path).unwrap();
        assert_eq!(model.gamma_b().to_bits(), restored.gamma_b().to_bits());
    }
}
