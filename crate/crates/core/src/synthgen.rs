//! Deterministic synthetic seasons with a known severity rule.
//!
//! Every row draws weather means from fixed plausible ranges and a variety
//! with a hidden susceptibility. A latent score
//!
//! ```text
//! s = 2.0·rain + 1.0·rh + 0.8·exp(−((tavg − 0.6)/0.25)²) + 0.6·susceptibility + ε
//! ```
//!
//! is computed from batch min-max scaled inputs (all in `[0, 1]`), and the
//! lower, middle and upper thirds of the scores become Low, Medium and High.
//! Rainfall dominates, humidity follows, and temperature acts through a
//! bell-shaped optimum.

use serde::{Deserialize, Serialize};

use crate::dataset::{RawRecord, Severity};
use crate::error::{Error, Result};
use crate::linalg::SeededRng;

pub const RAINFALL_RANGE: (f64, f64) = (0.0, 400.0);
pub const TMIN_RANGE: (f64, f64) = (2.0, 15.0);
pub const TMAX_RANGE: (f64, f64) = (15.0, 32.0);
pub const RH_RANGE: (f64, f64) = (30.0, 95.0);
/// Half-width of the uniform offset of `tavg` from the min/max midpoint.
pub const TAVG_JITTER: f64 = 1.5;

pub const RAIN_WEIGHT: f64 = 2.0;
pub const HUMIDITY_WEIGHT: f64 = 1.0;
pub const TEMPERATURE_WEIGHT: f64 = 0.8;
pub const VARIETY_WEIGHT: f64 = 0.6;
pub const TEMPERATURE_OPTIMUM: f64 = 0.6;
pub const TEMPERATURE_WIDTH: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_rows: usize,
    /// Inclusive.
    pub year_range: (i32, i32),
    pub n_varieties: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_rows: 500,
            year_range: (2000, 2018),
            n_varieties: 2,
            noise_sd: 0.1,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rows < 3 {
            return Err(Error::Config(format!("n_rows must be at least 3, got {}", self.n_rows)));
        }
        if self.year_range.0 > self.year_range.1 {
            return Err(Error::Config(format!("empty year range {:?}", self.year_range)));
        }
        if self.n_varieties == 0 {
            return Err(Error::Config("n_varieties must be at least 1".into()));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::Config(format!(
                "noise_sd must be finite and >= 0, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }
}

/// Score from inputs already scaled to `[0, 1]`, without noise.
pub fn latent_score(rain: f64, rh: f64, tavg: f64, susceptibility: f64) -> f64 {
    let z = (tavg - TEMPERATURE_OPTIMUM) / TEMPERATURE_WIDTH;
    RAIN_WEIGHT * rain + HUMIDITY_WEIGHT * rh + TEMPERATURE_WEIGHT * (-z * z).exp() + VARIETY_WEIGHT * susceptibility
}

pub fn variety_label(i: usize) -> String {
    format!("V{:02}", i + 1)
}

fn one_decimal(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn min_max_scale(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect()
}

/// Records and their latent scores (noise included).
#[derive(Clone, Debug, PartialEq)]
pub struct SynthBatch {
    pub records: Vec<RawRecord>,
    pub scores: Vec<f64>,
    pub susceptibility: Vec<f64>,
}

pub fn generate_batch(cfg: &SynthConfig) -> Result<SynthBatch> {
    cfg.validate()?;
    let mut rng = SeededRng::new(cfg.seed);
    let susceptibility: Vec<f64> = (0..cfg.n_varieties).map(|_| rng.next_f64()).collect();
    let n_years = (cfg.year_range.1 - cfg.year_range.0) as usize + 1;

    let mut records = Vec::with_capacity(cfg.n_rows);
    let mut varieties = Vec::with_capacity(cfg.n_rows);
    for _ in 0..cfg.n_rows {
        let year = cfg.year_range.0 + rng.index(n_years) as i32;
        let rainfall = one_decimal(rng.uniform(RAINFALL_RANGE.0, RAINFALL_RANGE.1));
        let tmin = one_decimal(rng.uniform(TMIN_RANGE.0, TMIN_RANGE.1));
        let tmax = one_decimal(rng.uniform(TMAX_RANGE.0, TMAX_RANGE.1));
        let jitter = rng.uniform(-TAVG_JITTER, TAVG_JITTER);
        let tavg = one_decimal(0.5 * (tmin + tmax) + jitter).clamp(tmin, tmax);
        let rel_humidity = one_decimal(rng.uniform(RH_RANGE.0, RH_RANGE.1));
        let variety = rng.index(cfg.n_varieties);
        varieties.push(variety);
        records.push(RawRecord {
            year,
            rainfall,
            tmax,
            tmin,
            tavg,
            rel_humidity,
            variety: variety_label(variety),
            severity: Severity::Low,
        });
    }

    let rain = min_max_scale(&records.iter().map(|r| r.rainfall).collect::<Vec<_>>());
    let rh = min_max_scale(&records.iter().map(|r| r.rel_humidity).collect::<Vec<_>>());
    let tavg = min_max_scale(&records.iter().map(|r| r.tavg).collect::<Vec<_>>());
    let scores: Vec<f64> = (0..cfg.n_rows)
        .map(|i| latent_score(rain[i], rh[i], tavg[i], susceptibility[varieties[i]]) + rng.normal(0.0, cfg.noise_sd))
        .collect();

    // tertiles by rank; equal scores keep row order
    let mut order: Vec<usize> = (0..cfg.n_rows).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    for (rank, &i) in order.iter().enumerate() {
        records[i].severity = match 3 * rank / cfg.n_rows {
            0 => Severity::Low,
            1 => Severity::Medium,
            _ => Severity::High,
        };
    }
    Ok(SynthBatch {
        records,
        scores,
        susceptibility,
    })
}

pub fn generate(cfg: &SynthConfig) -> Result<Vec<RawRecord>> {
    generate_batch(cfg).map(|b| b.records)
}
