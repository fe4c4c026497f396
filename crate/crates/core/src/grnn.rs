//! General regression network: Gaussian-kernel weighted average of stored
//! training targets with one smoothing factor.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrnnModel {
    pub patterns: Matrix,
    pub targets: Matrix,
    pub sigma: f64,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveSigma(sigma))
    }
}

/// Stores the selected training rows; there is nothing to optimize.
pub fn train_grnn(data: &Dataset, train_idx: &[usize], sigma: f64) -> Result<GrnnModel> {
    check_sigma(sigma)?;
    if train_idx.is_empty() {
        return Err(Error::EmptyInput("GRNN needs at least one stored pattern"));
    }
    let rows = data.subset(train_idx);
    Ok(GrnnModel {
        patterns: rows.features,
        targets: rows.targets,
        sigma,
    })
}

impl GrnnModel {
    pub fn with_sigma(&self, sigma: f64) -> Result<GrnnModel> {
        check_sigma(sigma)?;
        Ok(GrnnModel { sigma, ..self.clone() })
    }

    fn target_mean(&self) -> Vec<f64> {
        let n = self.targets.rows() as f64;
        (0..self.targets.cols())
            .map(|c| self.targets.column(c).iter().sum::<f64>() / n)
            .collect()
    }

    /// `Σ yᵢwᵢ / Σ wᵢ`, `wᵢ = exp(−‖x−xᵢ‖²/(2σ²))`, evaluated relative to the
    /// largest exponent so the nearest pattern always has weight 1.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let scale = 2.0 * self.sigma * self.sigma;
        let exponents: Vec<f64> = self
            .patterns
            .row_iter()
            .map(|p| -squared_distance(x, p) / scale)
            .collect();
        let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return self.target_mean();
        }
        let mut out = vec![0.0; self.targets.cols()];
        let mut total = 0.0;
        for (i, e) in exponents.iter().enumerate() {
            let w = (e - top).exp();
            total += w;
            for (o, t) in out.iter_mut().zip(self.targets.row(i)) {
                *o += w * t;
            }
        }
        if !(total > 0.0) || !total.is_finite() {
            return self.target_mean();
        }
        out.iter_mut().for_each(|o| *o /= total);
        out
    }

    pub fn predict_all(&self, inputs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(inputs.rows(), self.targets.cols());
        for i in 0..inputs.rows() {
            let y = self.predict(inputs.row(i));
            out.row_mut(i).copy_from_slice(&y);
        }
        out
    }
}

pub fn predict_grnn(model: &GrnnModel, x: &[f64]) -> Vec<f64> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model(patterns: &[[f64; 2]], targets: &[[f64; 3]], sigma: f64) -> GrnnModel {
        GrnnModel {
            patterns: Matrix::from_rows(patterns).unwrap(),
            targets: Matrix::from_rows(targets).unwrap(),
            sigma,
        }
    }

    #[test]
    fn stores_rows_verbatim() {
        let ds = Dataset {
            features: Matrix::from_vec(10, 6, (0..60).map(f64::from).collect()).unwrap(),
            targets: Matrix::from_vec(10, 3, vec![0.5; 30]).unwrap(),
            variety_vocab: vec![],
            normalizer: None,
        };
        let idx: Vec<usize> = (0..10).collect();
        let m = train_grnn(&ds, &idx, 0.3).unwrap();
        assert_eq!(m.patterns.rows(), 10);
        assert_eq!(m, train_grnn(&ds, &idx, 0.3).unwrap());
        assert!(matches!(train_grnn(&ds, &idx, 0.0), Err(Error::NonPositiveSigma(_))));
        assert!(matches!(train_grnn(&ds, &[], 0.3), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn single_pattern_returns_its_target() {
        let m = model(&[[0.2, 0.1]], &[[0.0, 1.0, 0.0]], 0.05);
        assert_eq!(m.predict(&[-5.0, 9.0]), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn equidistant_query_averages() {
        let m = model(&[[1.0, 0.0], [-1.0, 0.0]], &[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], 0.5);
        let y = m.predict(&[0.0, 0.7]);
        assert_abs_diff_eq!(y[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(y[2], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn kernel_limits() {
        let pats = [[0.0, 0.0], [0.3, -0.2], [0.9, 0.9]];
        let tgts = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.4, 0.6]];
        let narrow = model(&pats, &tgts, 1e-4);
        for (p, t) in pats.iter().zip(&tgts) {
            let y = narrow.predict(p);
            for c in 0..3 {
                assert_abs_diff_eq!(y[c], t[c], epsilon = 1e-9);
            }
        }
        let flat = model(&pats, &tgts, 1e6);
        let y = flat.predict(&[0.5, -0.5]);
        assert_abs_diff_eq!(y[0], 1.0 / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(y[1], 1.4 / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(y[2], 0.6 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn far_query_stays_defined() {
        let m = model(&[[0.0, 0.0], [1.0, 0.0]], &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], 1e-3);
        let y = m.predict(&[1e200, 1e200]);
        assert_eq!(y, vec![0.5, 0.5, 0.0]);
        let y = m.predict(&[1e3, 0.0]);
        assert_abs_diff_eq!(y[1], 1.0, epsilon = 1e-12);
    }
}
