//! Tabular weather/variety/severity records: CSV ingestion, encoding,
//! min-max normalization and train/validation/test partitioning.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rand_permutation, Matrix, SeededRng};

pub const NUM_FEATURES: usize = 6;
pub const NUM_CLASSES: usize = 3;

/// Column header of the dataset CSV, in order.
pub const CSV_HEADER: [&str; 8] = [
    "year",
    "rainfall_mm",
    "tmax_c",
    "tmin_c",
    "tavg_c",
    "rh_pct",
    "variety",
    "severity",
];

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = ["rainfall_mm", "tmax_c", "tmin_c", "tavg_c", "rh_pct", "variety"];

/// Three-level severity class.
///
/// Output position 0 is High, 1 is Medium and 2 is Low, so the one-hot
/// target of High is `(1, 0, 0)` and of Low is `(0, 0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    Medium,
    High,
}

impl Severity {
    /// Classes in output-position order.
    pub const BY_POSITION: [Severity; NUM_CLASSES] = [Severity::High, Severity::Medium, Severity::Low];

    pub fn position(self) -> usize {
        match self {
            Severity::High => 0,
            Severity::Medium => 1,
            Severity::Low => 2,
        }
    }

    pub fn from_position(pos: usize) -> Option<Severity> {
        Severity::BY_POSITION.get(pos).copied()
    }

    pub fn one_hot(self) -> [f64; NUM_CLASSES] {
        let mut t = [0.0; NUM_CLASSES];
        t[self.position()] = 1.0;
        t
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(Severity::Low),
            "medium" => Ok(Severity::Medium),
            "high" => Ok(Severity::High),
            other => Err(format!("unknown severity {other:?}")),
        }
    }
}

/// One season of weather means for a variety, with its observed severity.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    pub year: i32,
    pub rainfall: f64,
    pub tmax: f64,
    pub tmin: f64,
    pub tavg: f64,
    pub rel_humidity: f64,
    pub variety: String,
    pub severity: Severity,
}

impl RawRecord {
    /// Checks the physical invariants of a record.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let values = [
            ("rainfall_mm", self.rainfall),
            ("tmax_c", self.tmax),
            ("tmin_c", self.tmin),
            ("tavg_c", self.tavg),
            ("rh_pct", self.rel_humidity),
        ];
        if let Some((name, _)) = values.iter().find(|(_, v)| !v.is_finite()) {
            return Err(format!("{name} is not finite"));
        }
        if self.rainfall < 0.0 {
            return Err(format!("rainfall_mm {} is negative", self.rainfall));
        }
        if !(0.0..=100.0).contains(&self.rel_humidity) {
            return Err(format!("rh_pct {} outside [0, 100]", self.rel_humidity));
        }
        if !(self.tmin <= self.tavg && self.tavg <= self.tmax) {
            return Err(format!(
                "temperatures violate tmin <= tavg <= tmax ({}, {}, {})",
                self.tmin, self.tavg, self.tmax
            ));
        }
        if self.variety.trim().is_empty() {
            return Err("variety is empty".into());
        }
        Ok(())
    }

    /// The five weather features in column order, followed by the variety code.
    pub fn features(&self, variety_code: usize) -> [f64; NUM_FEATURES] {
        [
            self.rainfall,
            self.tmax,
            self.tmin,
            self.tavg,
            self.rel_humidity,
            variety_code as f64,
        ]
    }
}

fn parse_field<T: FromStr>(raw: &str, column: &str, line: usize) -> Result<T> {
    raw.trim().parse::<T>().map_err(|_| Error::Parse {
        row: line,
        message: format!("cannot parse {column} value {raw:?}"),
    })
}

/// Reads a dataset CSV. Row numbers in errors are 1-based file line numbers.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<RawRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != CSV_HEADER {
        return Err(Error::Schema(format!(
            "expected header {:?}, found {:?}",
            CSV_HEADER.join(","),
            found.join(",")
        )));
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != CSV_HEADER.len() {
            return Err(Error::Parse {
                row: line,
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), row.len()),
            });
        }
        let record = RawRecord {
            year: parse_field(&row[0], "year", line)?,
            rainfall: parse_field(&row[1], "rainfall_mm", line)?,
            tmax: parse_field(&row[2], "tmax_c", line)?,
            tmin: parse_field(&row[3], "tmin_c", line)?,
            tavg: parse_field(&row[4], "tavg_c", line)?,
            rel_humidity: parse_field(&row[5], "rh_pct", line)?,
            variety: row[6].trim().to_string(),
            severity: row[7].parse().map_err(|message| Error::Parse { row: line, message })?,
        };
        record
            .validate()
            .map_err(|message| Error::Range { row: line, message })?;
        records.push(record);
    }
    Ok(records)
}

/// Writes records with the dataset header and `\n` line endings.
pub fn write_csv<W: Write>(writer: W, records: &[RawRecord]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    for r in records {
        wtr.write_record([
            r.year.to_string(),
            r.rainfall.to_string(),
            r.tmax.to_string(),
            r.tmin.to_string(),
            r.tavg.to_string(),
            r.rel_humidity.to_string(),
            r.variety.clone(),
            r.severity.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, records: &[RawRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), records)
}

/// Per-feature min/max fitted on the training partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: [f64; NUM_FEATURES],
    pub max: [f64; NUM_FEATURES],
}

impl NormalizationParams {
    /// Constant columns normalize to 0.
    pub fn is_constant(&self, i: usize) -> bool {
        self.max[i] == self.min[i]
    }

    /// Maps each feature to `2·(x − min)/(max − min) − 1`.
    pub fn normalize(&self, x: &[f64]) -> [f64; NUM_FEATURES] {
        let mut y = [0.0; NUM_FEATURES];
        for i in 0..NUM_FEATURES {
            y[i] = if self.is_constant(i) {
                0.0
            } else {
                2.0 * (x[i] - self.min[i]) / (self.max[i] - self.min[i]) - 1.0
            };
        }
        y
    }

    /// Inverse of [`normalize`](Self::normalize); constant columns map back to their value.
    pub fn denormalize(&self, y: &[f64]) -> [f64; NUM_FEATURES] {
        let mut x = [0.0; NUM_FEATURES];
        for i in 0..NUM_FEATURES {
            x[i] = if self.is_constant(i) {
                self.min[i]
            } else {
                (y[i] + 1.0) * 0.5 * (self.max[i] - self.min[i]) + self.min[i]
            };
        }
        x
    }
}

/// Encoded rows: six features and a one-hot severity target per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub targets: Matrix,
    pub variety_vocab: Vec<String>,
    pub normalizer: Option<NormalizationParams>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            targets: self.targets.select_rows(indices),
            variety_vocab: self.variety_vocab.clone(),
            normalizer: self.normalizer.clone(),
        }
    }

    /// Copy with every feature row normalized by `params`.
    pub fn normalized(&self, params: &NormalizationParams) -> Dataset {
        let mut features = self.features.clone();
        for i in 0..features.rows() {
            let y = params.normalize(features.row(i));
            features.row_mut(i).copy_from_slice(&y);
        }
        Dataset {
            features,
            targets: self.targets.clone(),
            variety_vocab: self.variety_vocab.clone(),
            normalizer: Some(params.clone()),
        }
    }

    /// True class of each row.
    pub fn classes(&self) -> Vec<Severity> {
        self.targets
            .row_iter()
            .map(|t| {
                let pos = t.iter().position(|&v| v == 1.0).unwrap_or(0);
                Severity::BY_POSITION[pos]
            })
            .collect()
    }
}

/// Encodes records, assigning variety codes in order of first appearance.
pub fn encode(records: &[RawRecord]) -> Result<Dataset> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to encode"));
    }
    let mut vocab: Vec<String> = Vec::new();
    for r in records {
        if !vocab.contains(&r.variety) {
            vocab.push(r.variety.clone());
        }
    }
    encode_with_vocab(records, &vocab)
}

/// Encodes records against an existing vocabulary; unknown varieties are errors.
pub fn encode_with_vocab(records: &[RawRecord], vocab: &[String]) -> Result<Dataset> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to encode"));
    }
    let mut features = Matrix::zeros(records.len(), NUM_FEATURES);
    let mut targets = Matrix::zeros(records.len(), NUM_CLASSES);
    for (i, r) in records.iter().enumerate() {
        let code = variety_code(vocab, &r.variety)?;
        features.row_mut(i).copy_from_slice(&r.features(code));
        targets.row_mut(i).copy_from_slice(&r.severity.one_hot());
    }
    Ok(Dataset {
        features,
        targets,
        variety_vocab: vocab.to_vec(),
        normalizer: None,
    })
}

pub fn variety_code(vocab: &[String], label: &str) -> Result<usize> {
    vocab
        .iter()
        .position(|v| v == label)
        .ok_or_else(|| Error::Vocabulary(label.to_string()))
}

/// Min/max of every feature over the training rows.
pub fn fit_normalizer(ds: &Dataset, train_idx: &[usize]) -> Result<NormalizationParams> {
    if train_idx.is_empty() {
        return Err(Error::EmptyInput("normalizer needs at least one training row"));
    }
    let mut min = [f64::INFINITY; NUM_FEATURES];
    let mut max = [f64::NEG_INFINITY; NUM_FEATURES];
    for &i in train_idx {
        for (j, &v) in ds.features.row(i).iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(NormalizationParams { min, max })
}

/// Train/validation/test row indices, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    /// Partition sizes for `n` rows: floor on validation and test, the
    /// remainder goes to training.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|v| !(*v > 0.0)) || ((r.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios must be positive and sum to 1, got {:?}",
                r
            )));
        }
        // the small offset keeps products like 0.15 * 60 from flooring to 8
        let n_val = (self.val * n as f64 + 1e-9).floor() as usize;
        let n_test = (self.test * n as f64 + 1e-9).floor() as usize;
        let n_train = n.saturating_sub(n_val + n_test);
        if n < 3 || n_val == 0 || n_test == 0 || n_train == 0 {
            return Err(Error::TooFewRows { n });
        }
        Ok((n_train, n_val, n_test))
    }
}

/// Random division of `0..n` into train/validation/test.
pub fn split_random(n: usize, ratios: SplitRatios, rng: &mut SeededRng) -> Result<SplitIndices> {
    let (n_train, n_val, _) = ratios.sizes(n)?;
    let perm = rand_permutation(rng, n);
    let mut train = perm[..n_train].to_vec();
    let mut val = perm[n_train..n_train + n_val].to_vec();
    let mut test = perm[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, val, test })
}

/// Contiguous blocks in row order: first training rows, then validation, then test.
pub fn split_contiguous(n: usize, ratios: SplitRatios) -> Result<SplitIndices> {
    let (n_train, n_val, _) = ratios.sizes(n)?;
    split_by_index(
        (0..n_train).collect(),
        (n_train..n_train + n_val).collect(),
        (n_train + n_val..n).collect(),
        n,
    )
}

/// Validates an explicit partition of `0..n` and returns it unchanged.
pub fn split_by_index(train: Vec<usize>, val: Vec<usize>, test: Vec<usize>, n: usize) -> Result<SplitIndices> {
    let mut seen = vec![false; n];
    for &i in train.iter().chain(&val).chain(&test) {
        if i >= n {
            return Err(Error::Coverage(i));
        }
        if seen[i] {
            return Err(Error::Overlap(i));
        }
        seen[i] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Coverage(missing));
    }
    Ok(SplitIndices { train, val, test })
}

/// Splits records into a development set (`year <= cutoff_year`) and a
/// later-years test set, preserving order.
pub fn chronological_holdout(records: &[RawRecord], cutoff_year: i32) -> Result<(Vec<RawRecord>, Vec<RawRecord>)> {
    let (dev, test): (Vec<_>, Vec<_>) = records.iter().cloned().partition(|r| r.year <= cutoff_year);
    if dev.is_empty() {
        return Err(Error::EmptyPartition("no records on or before the cutoff year"));
    }
    if test.is_empty() {
        return Err(Error::EmptyPartition("no records after the cutoff year"));
    }
    Ok((dev, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const HEADER: &str = "year,rainfall_mm,tmax_c,tmin_c,tavg_c,rh_pct,variety,severity\n";

    fn record(year: i32, variety: &str, severity: Severity) -> RawRecord {
        RawRecord {
            year,
            rainfall: 120.0,
            tmax: 24.0,
            tmin: 9.0,
            tavg: 16.5,
            rel_humidity: 70.0,
            variety: variety.into(),
            severity,
        }
    }

    #[test]
    fn loads_single_row() {
        let csv = format!("{HEADER}2005,120.5,24,9,16.5,70,Kubsa,low\n");
        let recs = read_csv(csv.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].variety, "Kubsa");
        assert_eq!(recs[0].rainfall, 120.5);
    }

    #[test]
    fn severity_is_case_insensitive() {
        let csv = format!("{HEADER}2005,120.5,24,9,16.5,70,Kubsa,HIGH\n");
        let recs = read_csv(csv.as_bytes()).unwrap();
        assert_eq!(recs[0].severity, Severity::High);
    }

    #[test]
    fn humidity_out_of_range_reports_row() {
        let csv = format!("{HEADER}2005,120.5,24,9,16.5,70,Kubsa,low\n2006,100,24,9,16.5,150,Kubsa,low\n");
        match read_csv(csv.as_bytes()).unwrap_err() {
            Error::Range { row, .. } => assert_eq!(row, 3),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn schema_and_parse_errors() {
        let csv = "year,rainfall_mm,tmax_c,tmin_c,tavg_c,rh_pct,variety\n2005,1,2,1,1.5,3,K\n";
        assert!(matches!(read_csv(csv.as_bytes()), Err(Error::Schema(_))));
        let csv = format!("{HEADER}2005,abc,24,9,16.5,70,Kubsa,low\n");
        assert!(matches!(read_csv(csv.as_bytes()), Err(Error::Parse { row: 2, .. })));
        let csv = format!("{HEADER}2005,1,24,9,16.5,70,Kubsa,severe\n");
        assert!(matches!(read_csv(csv.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let recs = vec![
            record(2001, "Kubsa", Severity::High),
            record(2017, "Digalu", Severity::Medium),
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &recs).unwrap();
        assert!(buf.starts_with(HEADER.as_bytes()));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn encode_one_hot_and_codes() {
        let recs = vec![
            record(2001, "Kubsa", Severity::High),
            record(2002, "Digalu", Severity::Low),
            record(2003, "Kubsa", Severity::Medium),
        ];
        let ds = encode(&recs).unwrap();
        assert_eq!(ds.targets.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(ds.targets.row(1), &[0.0, 0.0, 1.0]);
        assert_eq!(ds.targets.row(2), &[0.0, 1.0, 0.0]);
        assert_eq!(ds.features.column(5), vec![0.0, 1.0, 0.0]);
        assert_eq!(ds.variety_vocab, vec!["Kubsa", "Digalu"]);
        assert_eq!(ds.classes(), vec![Severity::High, Severity::Low, Severity::Medium]);
        assert!(matches!(encode(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn unknown_variety_is_error() {
        let recs = vec![record(2001, "Kakaba", Severity::High)];
        let err = encode_with_vocab(&recs, &["Kubsa".to_string()]).unwrap_err();
        assert!(matches!(err, Error::Vocabulary(ref v) if v == "Kakaba"));
    }

    #[test]
    fn normalizer_fits_training_rows_only() {
        let mut recs = vec![record(2001, "A", Severity::Low); 3];
        recs[0].rainfall = 0.0;
        recs[1].rainfall = 10.0;
        recs[2].rainfall = 500.0;
        let ds = encode(&recs).unwrap();
        let p = fit_normalizer(&ds, &[0, 1]).unwrap();
        assert_eq!((p.min[0], p.max[0]), (0.0, 10.0));
        assert!(p.is_constant(1));

        let single = fit_normalizer(&ds, &[2]).unwrap();
        assert_eq!(single.min, single.max);
        assert!(matches!(fit_normalizer(&ds, &[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn normalize_formula() {
        let p = NormalizationParams {
            min: [0.0; 6],
            max: [10.0, 10.0, 10.0, 10.0, 10.0, 0.0],
        };
        let y = p.normalize(&[5.0, 0.0, 10.0, 12.0, 2.5, 7.0]);
        assert_abs_diff_eq!(y[0], 0.0);
        assert_abs_diff_eq!(y[1], -1.0);
        assert_abs_diff_eq!(y[2], 1.0);
        assert_abs_diff_eq!(y[3], 1.4, epsilon = 1e-15);
        assert_abs_diff_eq!(y[4], -0.5);
        assert_eq!(y[5], 0.0);

        let x = p.denormalize(&[0.0, -1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(x[0], 5.0);
        assert_abs_diff_eq!(x[1], 0.0);
        assert_abs_diff_eq!(x[2], 10.0);
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let r = SplitRatios::default();
        assert_eq!(r.sizes(100).unwrap(), (70, 15, 15));
        assert_eq!(r.sizes(10).unwrap(), (8, 1, 1));
        assert!(matches!(r.sizes(6), Err(Error::TooFewRows { n: 6 })));
        let s = split_random(100, r, &mut SeededRng::new(3)).unwrap();
        assert_eq!(s.sizes(), (70, 15, 15));
        assert_eq!(s, split_random(100, r, &mut SeededRng::new(3)).unwrap());
        let bad = SplitRatios {
            train: 0.5,
            val: 0.5,
            test: 0.5,
        };
        assert!(matches!(bad.sizes(100), Err(Error::Config(_))));
    }

    #[test]
    fn explicit_split_validation() {
        let s = split_by_index(vec![0, 1], vec![2], vec![3], 4).unwrap();
        assert_eq!(s.train, vec![0, 1]);
        assert!(matches!(
            split_by_index(vec![0, 1], vec![1], vec![2, 3], 4),
            Err(Error::Overlap(1))
        ));
        assert!(matches!(
            split_by_index(vec![0, 1], vec![2], vec![], 4),
            Err(Error::Coverage(3))
        ));
        let c = split_contiguous(20, SplitRatios::default()).unwrap();
        assert_eq!(c.val, vec![14, 15, 16]);
        assert_eq!(c.test, vec![17, 18, 19]);
    }

    #[test]
    fn holdout_by_year() {
        let recs = vec![record(2016, "A", Severity::Low), record(2017, "A", Severity::High)];
        let (dev, test) = chronological_holdout(&recs, 2016).unwrap();
        assert_eq!(dev[0].year, 2016);
        assert_eq!(test[0].year, 2017);
        assert!(matches!(
            chronological_holdout(&recs, 2020),
            Err(Error::EmptyPartition(_))
        ));
        assert!(matches!(
            chronological_holdout(&recs, 1990),
            Err(Error::EmptyPartition(_))
        ));
    }
}
