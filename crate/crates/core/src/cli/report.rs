//! Headered CSV tables and the fixed-width metrics summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::dataset::Severity;
use crate::error::{Error, Result};
use crate::metrics::{ConfusionMatrix, ErrorHistogram, MetricsReport, RegressionPlotData};
use crate::mlp::TrainRecord;
use crate::rbfnn::GrowthRecord;
use crate::sweep::{ComparisonReport, ComparisonRow, SweepResult};

use super::model_file::PartitionMetrics;

/// A CSV table held in memory; cells are already formatted.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: ToString>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(ToString::to_string).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        wtr.write_record(&self.header)?;
        for row in &self.rows {
            wtr.write_record(row)?;
        }
        wtr.flush().map_err(|e| Error::io("<table output>", e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file))
    }
}

/// Shortest round-trip decimal form; always uses `.` as separator.
pub fn num(v: f64) -> String {
    v.to_string()
}

pub fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn metrics_table(parts: &[PartitionMetrics]) -> Table {
    let mut t = Table::new(&["partition", "n", "mse", "rmse", "mae", "r", "r2", "mape", "mbe"]);
    for p in parts {
        let m = &p.metrics;
        t.push(vec![
            p.partition.clone(),
            m.n.to_string(),
            num(m.mse),
            num(m.rmse),
            num(m.mae),
            opt(m.r),
            opt(m.r2),
            opt(m.mape),
            num(m.mbe),
        ]);
    }
    t
}

/// Fixed-width summary printed by `train` and `eval`.
pub fn format_metrics_summary(parts: &[PartitionMetrics]) -> String {
    let fixed = |v: Option<f64>| v.map_or_else(|| format!("{:>10}", "-"), |x| format!("{x:>10.6}"));
    let mut out = format!(
        "{:<10}{:>6}{:>10}{:>10}{:>10}{:>10}{:>10}\n",
        "partition", "n", "mse", "rmse", "mae", "r", "r2"
    );
    for p in parts {
        let m: &MetricsReport = &p.metrics;
        out.push_str(&format!(
            "{:<10}{:>6}{}{}{}{}{}\n",
            p.partition,
            m.n,
            fixed(Some(m.mse)),
            fixed(Some(m.rmse)),
            fixed(Some(m.mae)),
            fixed(m.r),
            fixed(m.r2)
        ));
    }
    out
}

pub fn regression_points_table(parts: &[(String, RegressionPlotData)]) -> Table {
    let mut t = Table::new(&["partition", "target", "output"]);
    for (name, data) in parts {
        for (target, output) in &data.points {
            t.push(vec![name.clone(), num(*target), num(*output)]);
        }
    }
    t
}

pub fn regression_fit_table(parts: &[(String, RegressionPlotData)]) -> Table {
    let mut t = Table::new(&["partition", "slope", "intercept", "r"]);
    for (name, data) in parts {
        t.push(vec![name.clone(), num(data.slope), num(data.intercept), num(data.r)]);
    }
    t
}

pub fn histogram_table(h: &ErrorHistogram) -> Table {
    let mut t = Table::new(&["bin", "lower", "upper", "center", "count"]);
    for (i, count) in h.counts.iter().enumerate() {
        t.push(vec![
            (i + 1).to_string(),
            num(h.bin_edges[i]),
            num(h.bin_edges[i + 1]),
            num(h.bin_center(i)),
            count.to_string(),
        ]);
    }
    t
}

pub fn confusion_table(cm: &ConfusionMatrix) -> Table {
    let mut header = vec!["true_class".to_string()];
    header.extend(Severity::BY_POSITION.iter().map(|s| format!("pred_{s}")));
    let mut t = Table::new(&header);
    for truth in Severity::BY_POSITION {
        let mut row = vec![truth.to_string()];
        row.extend(Severity::BY_POSITION.iter().map(|&p| cm.get(truth, p).to_string()));
        t.push(row);
    }
    t
}

pub fn train_record_table(rec: &TrainRecord) -> Table {
    let mut t = Table::new(&[
        "epoch",
        "train_mse",
        "val_mse",
        "test_mse",
        "gradient_norm",
        "mu",
        "best",
    ]);
    for e in &rec.epochs {
        t.push(vec![
            e.epoch.to_string(),
            num(e.train_mse),
            num(e.val_mse),
            opt(e.test_mse),
            num(e.gradient_norm),
            opt(e.mu),
            u8::from(e.epoch == rec.best_epoch).to_string(),
        ]);
    }
    t
}

pub fn growth_table(rec: &GrowthRecord) -> Table {
    let mut t = Table::new(&["neurons", "train_mse", "val_mse"]);
    for p in &rec.points {
        t.push(vec![p.neurons.to_string(), num(p.train_mse), opt(p.val_mse)]);
    }
    t
}

/// One row per grid point. Wall-clock times are kept out of this table so
/// that repeated sweeps produce identical files.
pub fn sweep_table(result: &SweepResult) -> Table {
    let mut t = Table::new(&[
        result.family.grid_column(),
        "neurons",
        "best_val_mse",
        "epoch",
        "train_mse",
        "test_mse",
        "seed",
        "selected",
        "error",
    ]);
    for (i, row) in result.rows.iter().enumerate() {
        t.push(vec![
            row.value.to_string(),
            opt(row.neurons),
            opt(row.best_val_mse),
            opt(row.epoch),
            opt(row.train_mse),
            opt(row.test_mse),
            row.seed.to_string(),
            u8::from(result.selected == Some(i)).to_string(),
            row.error.clone().unwrap_or_default(),
        ]);
    }
    t
}

pub fn sweep_timing_table(result: &SweepResult) -> Table {
    let mut t = Table::new(&[result.family.grid_column(), "seconds"]);
    for row in &result.rows {
        t.push(vec![row.value.to_string(), format!("{:.6}", row.seconds)]);
    }
    t
}

pub fn comparison_table(report: &ComparisonReport) -> Table {
    let mut header = vec!["model".to_string()];
    header.extend(ComparisonRow::METRIC_COLUMNS.iter().map(|s| s.to_string()));
    let mut t = Table::new(&header);
    for row in &report.rows {
        let mut cells = vec![row.family.to_string()];
        cells.extend(row.metric_cells().iter().map(|v| num(*v)));
        t.push(cells);
    }
    t
}

pub fn comparison_timing_table(report: &ComparisonReport) -> Table {
    let mut t = Table::new(&["model", "train_seconds"]);
    for row in &report.rows {
        t.push(vec![row.family.to_string(), format!("{:.6}", row.train_seconds)]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_use_newline_terminators() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![num(0.1), opt::<f64>(None)]);
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n0.1,\n");
    }
}
