//! Versioned JSON persistence for trained models.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{NormalizationParams, RawRecord};
use crate::error::{Error, Result};
use crate::grnn::GrnnModel;
use crate::linalg::Matrix;
use crate::metrics::MetricsReport;
use crate::mlp::{MlpNetwork, TrainRecord};
use crate::pipeline::PipelineConfig;
use crate::rbfnn::{GrowthRecord, RbfNetwork};
use crate::sweep::{MlpSetup, ModelFamily};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelPayload {
    Mlp {
        setup: MlpSetup,
        network: MlpNetwork,
        record: TrainRecord,
    },
    Rbf {
        network: RbfNetwork,
        growth: GrowthRecord,
    },
    Grnn {
        model: GrnnModel,
    },
}

impl ModelPayload {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelPayload::Mlp { .. } => ModelFamily::Mlp,
            ModelPayload::Rbf { .. } => ModelFamily::Rbf,
            ModelPayload::Grnn { .. } => ModelFamily::Grnn,
        }
    }

    /// Raw outputs for normalized inputs.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ModelPayload::Mlp { network, .. } => network.predict(x),
            ModelPayload::Rbf { network, .. } => network.predict(x),
            ModelPayload::Grnn { model } => model.predict(x),
        }
    }

    pub fn predict_all(&self, inputs: &Matrix) -> Matrix {
        match self {
            ModelPayload::Mlp { network, .. } => network.predict_all(inputs),
            ModelPayload::Rbf { network, .. } => network.predict_all(inputs),
            ModelPayload::Grnn { model } => model.predict_all(inputs),
        }
    }
}

/// Metrics of one named partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionMetrics {
    pub partition: String,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub metrics: Vec<PartitionMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub family: ModelFamily,
    pub normalizer: NormalizationParams,
    pub variety_vocab: Vec<String>,
    pub model: ModelPayload,
    pub training: TrainingMeta,
}

impl ModelFile {
    pub fn new(
        normalizer: NormalizationParams,
        variety_vocab: Vec<String>,
        model: ModelPayload,
        training: TrainingMeta,
    ) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            family: model.family(),
            normalizer,
            variety_vocab,
            model,
            training,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Schema("model file has no format_version".into()))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(Error::Version(version.try_into().unwrap_or(u32::MAX)));
        }
        let file: ModelFile = serde_json::from_value(value)?;
        if file.family != file.model.family() {
            return Err(Error::Schema(format!(
                "family {} does not match payload {}",
                file.family,
                file.model.family()
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Normalized feature vector of a raw record.
    pub fn encode(&self, record: &RawRecord) -> Result<[f64; 6]> {
        let code = crate::dataset::variety_code(&self.variety_vocab, &record.variety)?;
        Ok(self.normalizer.normalize(&record.features(code)))
    }

    pub fn predict_record(&self, record: &RawRecord) -> Result<Vec<f64>> {
        Ok(self.model.predict(&self.encode(record)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grnn::GrnnModel;

    fn grnn_file() -> ModelFile {
        let model = GrnnModel {
            patterns: Matrix::from_rows(&[[0.1, -0.2, 0.3, 0.0, 1.0, -1.0], [0.7, 0.2, -0.3, 0.5, 0.0, 1.0]]).unwrap(),
            targets: Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).unwrap(),
            sigma: 0.1 + 0.2,
        };
        ModelFile::new(
            NormalizationParams {
                min: [0.0, 15.0, 2.0, 8.0, 30.0, 0.0],
                max: [400.0, 32.0, 15.0, 23.0, 95.0, 3.0],
            },
            vec!["V01".into(), "V02".into()],
            ModelPayload::Grnn { model },
            TrainingMeta {
                seed: 7,
                pipeline: PipelineConfig::default(),
                metrics: vec![],
            },
        )
    }

    #[test]
    fn json_round_trip_is_exact() {
        let file = grnn_file();
        let back = ModelFile::from_json(&file.to_json().unwrap()).unwrap();
        assert_eq!(back, file);
    }

    #[test]
    fn rejects_other_versions() {
        let text = grnn_file()
            .to_json()
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(ModelFile::from_json(&text), Err(Error::Version(2))));
        assert!(matches!(ModelFile::from_json("{}"), Err(Error::Schema(_))));
    }
}
