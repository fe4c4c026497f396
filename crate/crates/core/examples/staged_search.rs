//! Five-stage perceptron design search: hidden width, divide function,
//! transfer functions, learning rule and training algorithm, each stage
//! fixing its winner before the next. Takes a few seconds in release mode.

use severity_nn::pipeline::PipelineConfig;
use severity_nn::sweep::{staged_mlp_search, SweepData};
use severity_nn::synthgen::{generate, SynthConfig};

fn main() -> severity_nn::Result<()> {
    let records = generate(&SynthConfig::default())?;
    let data = SweepData::new(&records, &PipelineConfig::default())?;
    let search = staged_mlp_search(&data, 7, 3, None)?;
    for stage in &search.stages {
        println!("{}", stage.family.name());
        for (i, row) in stage.rows.iter().enumerate() {
            let mark = if stage.selected == Some(i) { "*" } else { " " };
            match row.best_val_mse {
                Some(v) => println!("  {mark} {:<28} val {v:.5}", row.value.to_string()),
                None => println!("  {mark} {:<28} failed", row.value.to_string()),
            }
        }
    }
    let w = &search.winner;
    println!(
        "winner: {} hidden, {}/{}, {}, {}, {}",
        w.hidden,
        w.f_hidden,
        w.f_out,
        w.divide.name(),
        w.learning.name(),
        w.algorithm()
    );
    Ok(())
}
