//! Trains one model of each family on the same split and prints the
//! side-by-side report with training times.

use severity_nn::pipeline::{prepare, PipelineConfig};
use severity_nn::sweep::{compare_models, ComparisonConfig, ComparisonRow};
use severity_nn::synthgen::{generate, SynthConfig};

fn main() -> severity_nn::Result<()> {
    let records = generate(&SynthConfig::default())?;
    let prepared = prepare(&records, &PipelineConfig::default())?;
    let report = compare_models(&prepared, &ComparisonConfig::default())?;

    print!("{:<7}", "model");
    for col in ComparisonRow::METRIC_COLUMNS {
        print!("{col:>11}");
    }
    println!("{:>12}", "train_secs");
    for row in &report.rows {
        print!("{:<7}", row.family.to_string());
        for cell in row.metric_cells() {
            print!("{cell:>11.4}");
        }
        println!("{:>12.6}", row.train_seconds);
    }
    Ok(())
}
