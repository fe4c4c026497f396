//! Trains the default perceptron (8 logsig hidden units, linear outputs,
//! Levenberg-Marquardt) and reports the early-stopping trajectory.

use severity_nn::metrics::compute_metrics;
use severity_nn::pipeline::{prepare, PipelineConfig};
use severity_nn::sweep::MlpSetup;
use severity_nn::synthgen::{generate, SynthConfig};

fn main() -> severity_nn::Result<()> {
    let records = generate(&SynthConfig::default())?;
    let prepared = prepare(&records, &PipelineConfig::default())?;
    let setup = MlpSetup::default();
    let (net, record) = setup.fit(&prepared, 7)?;

    println!(
        "{} with {} hidden neurons, {}/{}",
        setup.algorithm(),
        setup.hidden,
        setup.f_hidden,
        setup.f_out
    );
    for e in &record.epochs {
        let marker = if e.epoch == record.best_epoch { " <- best" } else { "" };
        println!(
            "epoch {:>3}  train {:.5}  val {:.5}{marker}",
            e.epoch, e.train_mse, e.val_mse
        );
    }
    println!("stopped: {:?}", record.stop_reason);

    let test = prepared.data.subset(&prepared.split.test);
    let m = compute_metrics(&net.predict_all(&test.features), &test.targets)?;
    println!("test mse {:.5}  r {:.4}", m.mse, m.r.unwrap_or(f64::NAN));
    Ok(())
}
