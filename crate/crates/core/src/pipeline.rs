//! Raw records to normalized, split training data.
//!
//! Order of operations: optional chronological holdout of the latest
//! seasons, division of the remaining rows into train/validation/test,
//! min-max fitting on the training rows only, normalization of everything.

use serde::{Deserialize, Serialize};

use crate::dataset::{
    chronological_holdout, encode, encode_with_vocab, fit_normalizer, split_contiguous, split_random, Dataset,
    NormalizationParams, RawRecord, SplitIndices, SplitRatios,
};
use crate::error::{Error, Result};
use crate::linalg::SeededRng;

pub const DEFAULT_CUTOFF_YEAR: i32 = 2016;

/// How development rows are divided into train/validation/test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DivideFn {
    /// Seeded random permutation.
    Random,
    /// Consecutive blocks in file order.
    Index,
}

impl DivideFn {
    pub fn name(self) -> &'static str {
        match self {
            DivideFn::Random => "dividerand",
            DivideFn::Index => "divideind",
        }
    }

    pub fn split(self, n: usize, ratios: SplitRatios, seed: u64) -> Result<SplitIndices> {
        match self {
            DivideFn::Random => split_random(n, ratios, &mut SeededRng::new(seed)),
            DivideFn::Index => split_contiguous(n, ratios),
        }
    }
}

impl std::str::FromStr for DivideFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dividerand" | "rand" | "random" => Ok(DivideFn::Random),
            "divideind" | "ind" | "index" => Ok(DivideFn::Index),
            _ => Err(Error::Config(format!("unknown divide function {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Rows with `year > cutoff` form a separate holdout set.
    pub cutoff_year: Option<i32>,
    pub ratios: SplitRatios,
    pub divide: DivideFn,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            cutoff_year: Some(DEFAULT_CUTOFF_YEAR),
            ratios: SplitRatios::default(),
            divide: DivideFn::Random,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    /// Normalized development rows; `split` indexes into these.
    pub data: Dataset,
    pub split: SplitIndices,
    /// Normalized rows after the cutoff year.
    pub holdout: Option<Dataset>,
    pub normalizer: NormalizationParams,
}

impl Prepared {
    pub fn vocab(&self) -> &[String] {
        &self.data.variety_vocab
    }
}

pub fn prepare(records: &[RawRecord], cfg: &PipelineConfig) -> Result<Prepared> {
    if records.is_empty() {
        return Err(Error::EmptyInput("dataset has no rows"));
    }
    // one vocabulary for the whole file, so holdout varieties are known
    let vocab = encode(records)?.variety_vocab;
    let (dev, later) = match cfg.cutoff_year {
        Some(year) => {
            let (dev, later) = chronological_holdout(records, year)?;
            (dev, Some(later))
        }
        None => (records.to_vec(), None),
    };
    let dev = encode_with_vocab(&dev, &vocab)?;
    let split = cfg.divide.split(dev.len(), cfg.ratios, cfg.seed)?;
    let normalizer = fit_normalizer(&dev, &split.train)?;
    let holdout = later
        .map(|rows| encode_with_vocab(&rows, &vocab).map(|d| d.normalized(&normalizer)))
        .transpose()?;
    Ok(Prepared {
        data: dev.normalized(&normalizer),
        split,
        holdout,
        normalizer,
    })
}

/// Encodes and normalizes records with a stored vocabulary and normalizer.
pub fn apply(records: &[RawRecord], vocab: &[String], normalizer: &NormalizationParams) -> Result<Dataset> {
    Ok(encode_with_vocab(records, vocab)?.normalized(normalizer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate, SynthConfig};

    #[test]
    fn default_pipeline_on_synthetic_rows() {
        let records = generate(&SynthConfig::default()).unwrap();
        let p = prepare(&records, &PipelineConfig::default()).unwrap();
        let n_dev = records.iter().filter(|r| r.year <= DEFAULT_CUTOFF_YEAR).count();
        assert_eq!(p.data.len(), n_dev);
        assert_eq!(p.holdout.as_ref().unwrap().len(), records.len() - n_dev);
        let (a, b, c) = p.split.sizes();
        assert_eq!(a + b + c, n_dev);
        let train = p.data.subset(&p.split.train);
        for &v in train.features.as_slice() {
            assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn no_cutoff_uses_all_rows() {
        let records = generate(&SynthConfig {
            n_rows: 100,
            ..SynthConfig::default()
        })
        .unwrap();
        let cfg = PipelineConfig {
            cutoff_year: None,
            ..PipelineConfig::default()
        };
        let p = prepare(&records, &cfg).unwrap();
        assert_eq!(p.split.sizes(), (70, 15, 15));
        assert!(p.holdout.is_none());
        assert_eq!(p, prepare(&records, &cfg).unwrap());
    }

    #[test]
    fn divide_names() {
        assert_eq!("dividerand".parse::<DivideFn>().unwrap(), DivideFn::Random);
        assert_eq!("DIVIDEIND".parse::<DivideFn>().unwrap(), DivideFn::Index);
        assert!("divideblock".parse::<DivideFn>().is_err());
    }
}
