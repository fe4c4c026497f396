//! Fits a general regression network and scans its smoothing factor.

use severity_nn::grnn::train_grnn;
use severity_nn::metrics::compute_metrics;
use severity_nn::pipeline::{prepare, PipelineConfig};
use severity_nn::synthgen::{generate, SynthConfig};

fn main() -> severity_nn::Result<()> {
    let records = generate(&SynthConfig::default())?;
    let prepared = prepare(&records, &PipelineConfig::default())?;
    let train = prepared.data.subset(&prepared.split.train);
    let val = prepared.data.subset(&prepared.split.val);
    let base = train_grnn(&prepared.data, &prepared.split.train, 0.1)?;

    println!("{:>6} {:>10} {:>10}", "sigma", "train", "val");
    for k in 1..=10 {
        let model = base.with_sigma(k as f64 / 10.0)?;
        let tr = compute_metrics(&model.predict_all(&train.features), &train.targets)?;
        let va = compute_metrics(&model.predict_all(&val.features), &val.targets)?;
        println!("{:>6.1} {:>10.5} {:>10.5}", model.sigma, tr.mse, va.mse);
    }
    Ok(())
}
