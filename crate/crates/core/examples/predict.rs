//! Trains a GRNN, saves it as a model file, reloads it and classifies a
//! new season given in raw units.

use severity_nn::cli::{ModelFile, ModelPayload, TrainingMeta};
use severity_nn::dataset::{RawRecord, Severity};
use severity_nn::grnn::train_grnn;
use severity_nn::mlp::class_from_outputs;
use severity_nn::pipeline::{prepare, PipelineConfig};
use severity_nn::synthgen::{generate, SynthConfig};

fn main() -> severity_nn::Result<()> {
    let records = generate(&SynthConfig::default())?;
    let pipeline = PipelineConfig::default();
    let prepared = prepare(&records, &pipeline)?;
    let model = train_grnn(&prepared.data, &prepared.split.train, 0.1)?;
    let file = ModelFile::new(
        prepared.normalizer.clone(),
        prepared.vocab().to_vec(),
        ModelPayload::Grnn { model },
        TrainingMeta {
            seed: pipeline.seed,
            pipeline,
            metrics: vec![],
        },
    );
    let path = std::env::temp_dir().join("severity-grnn.json");
    file.save(&path)?;
    let loaded = ModelFile::load(&path)?;

    let season = RawRecord {
        year: 2019,
        rainfall: 320.0,
        tmax: 24.0,
        tmin: 11.0,
        tavg: 17.5,
        rel_humidity: 85.0,
        variety: "V01".into(),
        // ignored for prediction
        severity: Severity::Low,
    };
    let outputs = loaded.predict_record(&season)?;
    println!("model file: {}", path.display());
    println!("outputs (high, medium, low): {outputs:.3?}");
    println!("predicted severity: {}", class_from_outputs(&outputs));
    Ok(())
}
