//! Regression metrics over multi-output predictions and the diagnostic
//! tables built from them: regression-line data, residual histogram and
//! class confusion matrix.
//!
//! Residuals are always `target − output`. Correlations treat the `N×3`
//! matrices as flattened vectors of `3N` values.

use serde::{Deserialize, Serialize};

use crate::dataset::{Severity, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const HISTOGRAM_BINS: usize = 20;
const DEGENERATE_PADDING: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    /// Pearson correlation of flattened outputs and targets; `None` when
    /// either side has zero variance.
    pub r: Option<f64>,
    /// `1 − SSE/SST`; `None` when the targets have zero variance.
    pub r2: Option<f64>,
    /// Correlation per output column.
    pub per_output_r: Vec<Option<f64>>,
    /// Mean of `|t − y| / |t|` over entries with `t ≠ 0`, in percent.
    pub mape: Option<f64>,
    /// Mean of `y − t`.
    pub mbe: f64,
}

impl MetricsReport {
    /// `r`, failing with [`Error::DegenerateTargets`] when it is undefined.
    pub fn r_value(&self) -> Result<f64> {
        self.r.ok_or(Error::DegenerateTargets)
    }
}

fn check_shapes(outputs: &Matrix, targets: &Matrix) -> Result<()> {
    if outputs.rows() != targets.rows() || outputs.cols() != targets.cols() {
        return Err(Error::ShapeMismatch(format!(
            "outputs {}x{} vs targets {}x{}",
            outputs.rows(),
            outputs.cols(),
            targets.rows(),
            targets.cols()
        )));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Returns `(cov, var_x, var_y)` as centered sums (not divided by n).
fn centered_sums(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).fold((0.0, 0.0, 0.0), |(c, vx, vy), (a, b)| {
        let (da, db) = (a - mx, b - my);
        (c + da * db, vx + da * da, vy + db * db)
    })
}

/// Pearson correlation; `None` if either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (c, vx, vy) = centered_sums(x, y);
    if vx <= 0.0 || vy <= 0.0 {
        return None;
    }
    Some((c / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

pub fn compute_metrics(outputs: &Matrix, targets: &Matrix) -> Result<MetricsReport> {
    check_shapes(outputs, targets)?;
    if targets.rows() < 2 {
        return Err(Error::EmptyInput("metrics need at least two rows"));
    }
    let y = outputs.as_slice();
    let t = targets.as_slice();
    let m = y.len() as f64;
    let sse: f64 = y.iter().zip(t).map(|(a, b)| (b - a) * (b - a)).sum();
    let mse = sse / m;
    let mae = y.iter().zip(t).map(|(a, b)| (b - a).abs()).sum::<f64>() / m;
    let mbe = y.iter().zip(t).map(|(a, b)| a - b).sum::<f64>() / m;
    let t_mean = mean(t);
    let sst: f64 = t.iter().map(|v| (v - t_mean) * (v - t_mean)).sum();
    let r2 = (sst > 0.0).then(|| 1.0 - sse / sst);
    let per_output_r = (0..outputs.cols())
        .map(|c| pearson(&outputs.column(c), &targets.column(c)))
        .collect();
    let nonzero: Vec<f64> = y
        .iter()
        .zip(t)
        .filter(|(_, b)| **b != 0.0)
        .map(|(a, b)| ((b - a) / b).abs())
        .collect();
    let mape = (!nonzero.is_empty()).then(|| 100.0 * mean(&nonzero));
    Ok(MetricsReport {
        n: targets.rows(),
        mse,
        rmse: mse.sqrt(),
        mae,
        r: pearson(y, t),
        r2,
        per_output_r,
        mape,
        mbe,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub min_error: f64,
    pub max_error: f64,
}

impl ErrorHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }
}

/// Twenty equal-width bins over `[min, max]` of the residuals; the last bin
/// is closed on the right. A zero-width range is padded by ±1e-9.
pub fn error_histogram(outputs: &Matrix, targets: &Matrix) -> Result<ErrorHistogram> {
    check_shapes(outputs, targets)?;
    let residuals: Vec<f64> = targets
        .as_slice()
        .iter()
        .zip(outputs.as_slice())
        .map(|(t, y)| t - y)
        .collect();
    histogram_of(&residuals)
}

pub fn histogram_of(residuals: &[f64]) -> Result<ErrorHistogram> {
    if residuals.is_empty() {
        return Err(Error::EmptyInput("histogram needs at least one residual"));
    }
    let min_error = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    let max_error = residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if max_error > min_error {
        (min_error, max_error)
    } else {
        (min_error - DEGENERATE_PADDING, max_error + DEGENERATE_PADDING)
    };
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut bin_edges: Vec<f64> = (0..=HISTOGRAM_BINS).map(|i| lo + width * i as f64).collect();
    bin_edges[HISTOGRAM_BINS] = hi;
    let mut counts = vec![0; HISTOGRAM_BINS];
    for &e in residuals {
        let idx = (((e - lo) / width).floor() as usize).min(HISTOGRAM_BINS - 1);
        counts[idx] += 1;
    }
    Ok(ErrorHistogram {
        bin_edges,
        counts,
        min_error,
        max_error,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionPlotData {
    /// `(target, output)` pairs, row-major over the flattened matrices.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
}

/// Least-squares line of output on target.
pub fn regression_plot(outputs: &Matrix, targets: &Matrix) -> Result<RegressionPlotData> {
    check_shapes(outputs, targets)?;
    let t = targets.as_slice();
    let y = outputs.as_slice();
    if t.len() < 2 {
        return Err(Error::EmptyInput("regression line needs at least two points"));
    }
    let (c, vt, vy) = centered_sums(t, y);
    if vt <= 0.0 {
        return Err(Error::DegenerateTargets);
    }
    let slope = c / vt;
    let intercept = mean(y) - slope * mean(t);
    // a constant output is an exact (flat) line with no defined correlation
    let r = if vy > 0.0 {
        (c / (vt.sqrt() * vy.sqrt())).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Ok(RegressionPlotData {
        points: t.iter().copied().zip(y.iter().copied()).collect(),
        slope,
        intercept,
        r,
    })
}

/// Rows are the true class, columns the predicted class, both in
/// `Severity::BY_POSITION` order (High, Medium, Low).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    pub fn get(&self, truth: Severity, predicted: Severity) -> usize {
        self.counts[truth.position()][predicted.position()]
    }
}

pub fn confusion(predicted: &[Severity], truth: &[Severity]) -> Result<ConfusionMatrix> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput("confusion matrix needs at least one sample"));
    }
    let mut counts = [[0; NUM_CLASSES]; NUM_CLASSES];
    for (p, t) in predicted.iter().zip(truth) {
        counts[t.position()][p.position()] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[[f64; 3]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn perfect_fit() {
        let t = m(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let rep = compute_metrics(&t, &t).unwrap();
        assert_eq!((rep.mse, rep.rmse, rep.mae), (0.0, 0.0, 0.0));
        assert_abs_diff_eq!(rep.r.unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(rep.r2, Some(1.0));
        assert_eq!(rep.mbe, 0.0);
    }

    #[test]
    fn hand_counted_mse() {
        let y = m(&[[1.0, 0.0, 0.0]]);
        let t = m(&[[0.0, 0.0, 0.0]]);
        assert!(compute_metrics(&y, &t).is_err());
        let y = m(&[[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let t = m(&[[0.0; 3], [0.0; 3]]);
        let rep = compute_metrics(&y, &t).unwrap();
        assert_abs_diff_eq!(rep.mse, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(rep.r2, None);
        assert!(matches!(rep.r_value(), Err(Error::DegenerateTargets)));
    }

    #[test]
    fn pearson_hand_value() {
        // centered y = (-1.5,-.5,.5,1.5), t = (-1.75,.25,1.25,.25)
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 5.0, 4.0]).unwrap();
        assert_abs_diff_eq!(r, 3.5 / (5.0f64 * 4.75).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r, 0.7182, epsilon = 1e-4);
    }

    #[test]
    fn shape_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(3, 3);
        assert!(matches!(compute_metrics(&a, &b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn histogram_one_per_bin() {
        let residuals: Vec<f64> = (0..20).map(|i| i as f64 + 0.5).collect();
        let mut with_ends = residuals.clone();
        with_ends[0] = 0.0;
        with_ends[19] = 20.0;
        let h = histogram_of(&with_ends).unwrap();
        assert_eq!(h.counts, vec![1; 20]);
        assert_eq!(h.bin_edges.len(), 21);
        assert!(h.bin_edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn histogram_degenerate_range() {
        let h = histogram_of(&[0.0; 12]).unwrap();
        assert_eq!(h.total(), 12);
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert!(h.bin_edges.windows(2).all(|w| w[0] < w[1]));
        assert!(histogram_of(&[]).is_err());
    }

    #[test]
    fn regression_lines() {
        let t = m(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let p = regression_plot(&t, &t).unwrap();
        assert_abs_diff_eq!(p.slope, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.intercept, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.r, 1.0, epsilon = 1e-15);

        let mut y = t.clone();
        y.as_mut_slice().iter_mut().for_each(|v| *v = 2.0 * *v + 1.0);
        let p = regression_plot(&y, &t).unwrap();
        assert_abs_diff_eq!(p.slope, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.intercept, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.r, 1.0, epsilon = 1e-14);

        y.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
        assert_abs_diff_eq!(regression_plot(&y, &t).unwrap().r, -1.0, epsilon = 1e-14);

        let flat = Matrix::zeros(2, 3);
        assert!(matches!(regression_plot(&t, &flat), Err(Error::DegenerateTargets)));
    }

    #[test]
    fn confusion_counts() {
        use Severity::*;
        let truth = [High, Medium, Low, Low];
        let cm = confusion(&truth, &truth).unwrap();
        assert_eq!(cm.accuracy(), 1.0);
        assert_eq!(cm.counts, [[1, 0, 0], [0, 1, 0], [0, 0, 2]]);

        let cm = confusion(&[Low], &[High]).unwrap();
        assert_eq!(cm.get(High, Low), 1);
        assert_eq!(cm.accuracy(), 0.0);
        assert!(matches!(confusion(&[Low], &[]), Err(Error::LengthMismatch { .. })));
    }
}
