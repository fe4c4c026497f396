//! Writes a synthetic season table and prints its class balance.
//!
//! `cargo run --example generate_dataset -- seasons.csv`

use severity_nn::dataset::{save_csv, Severity};
use severity_nn::synthgen::{generate, SynthConfig};

fn main() -> severity_nn::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "seasons.csv".into());
    let cfg = SynthConfig::default();
    let records = generate(&cfg)?;
    save_csv(&out, &records)?;
    println!(
        "wrote {} rows ({} varieties, noise {}) to {out}",
        records.len(),
        cfg.n_varieties,
        cfg.noise_sd
    );
    for class in Severity::BY_POSITION {
        let n = records.iter().filter(|r| r.severity == class).count();
        println!("{:>6}: {n}", class.to_string());
    }
    Ok(())
}
