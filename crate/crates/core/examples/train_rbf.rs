//! Grows a radial basis network one center at a time and shows how the
//! training and validation errors evolve with the neuron count.

use severity_nn::pipeline::{prepare, PipelineConfig};
use severity_nn::rbfnn::{train_rbf, RbfTrainConfig};
use severity_nn::synthgen::{generate, SynthConfig};

fn main() -> severity_nn::Result<()> {
    let records = generate(&SynthConfig::default())?;
    let prepared = prepare(&records, &PipelineConfig::default())?;
    let n_train = prepared.split.train.len();
    let cfg = RbfTrainConfig {
        neurons_between_records: 10,
        ..RbfTrainConfig::for_training_size(n_train, 0.8)
    };
    let (net, growth) = train_rbf(&prepared.data, &prepared.split.train, &prepared.split.val, &cfg)?;

    println!("{:>8} {:>10} {:>10}", "neurons", "train", "val");
    for p in &growth.points {
        println!(
            "{:>8} {:>10.5} {:>10.5}",
            p.neurons,
            p.train_mse,
            p.val_mse.unwrap_or(f64::NAN)
        );
    }
    let best = growth.best_validation().expect("validation rows present");
    println!(
        "final network: {} neurons; best validation at {} neurons",
        net.n_neurons(),
        best.neurons
    );
    Ok(())
}
