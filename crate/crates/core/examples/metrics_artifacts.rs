//! Regression fit, error histogram and confusion matrix for a trained
//! perceptron on its test partition.

use severity_nn::dataset::Severity;
use severity_nn::metrics::{confusion, error_histogram, regression_plot};
use severity_nn::mlp::class_from_outputs;
use severity_nn::pipeline::{prepare, PipelineConfig};
use severity_nn::sweep::MlpSetup;
use severity_nn::synthgen::{generate, SynthConfig};

fn main() -> severity_nn::Result<()> {
    let records = generate(&SynthConfig::default())?;
    let prepared = prepare(&records, &PipelineConfig::default())?;
    let (net, _) = MlpSetup::default().fit(&prepared, 7)?;
    let test = prepared.data.subset(&prepared.split.test);
    let outputs = net.predict_all(&test.features);

    let fit = regression_plot(&outputs, &test.targets)?;
    println!(
        "output ~ {:.4}·target + {:.4}  (r = {:.4})",
        fit.slope, fit.intercept, fit.r
    );

    let hist = error_histogram(&outputs, &test.targets)?;
    for (i, count) in hist.counts.iter().enumerate() {
        println!("{:>8.3} {}", hist.bin_center(i), "#".repeat(*count));
    }

    let predicted: Vec<Severity> = outputs.row_iter().map(class_from_outputs).collect();
    let cm = confusion(&predicted, &test.classes())?;
    print!("{:>8}", "");
    for p in Severity::BY_POSITION {
        print!("{:>8}", p.to_string());
    }
    println!();
    for truth in Severity::BY_POSITION {
        print!("{:>8}", truth.to_string());
        for p in Severity::BY_POSITION {
            print!("{:>8}", cm.get(truth, p));
        }
        println!();
    }
    println!("accuracy {:.3}", cm.accuracy());
    Ok(())
}
