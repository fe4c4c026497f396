//! Radial basis function network grown one neuron at a time.
//!
//! Training starts from a bias-only model. Each step takes the training
//! input whose current residual has the largest norm, adds it as a Gaussian
//! center and re-solves the output layer by least squares. The least-squares
//! solve is kept incremental: the design-matrix columns are orthogonalized
//! as they arrive (modified Gram-Schmidt with one reorthogonalization pass),
//! so adding neuron `k` costs `O(N·k)` instead of a full refactorization.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::linalg::{dot, squared_distance, Matrix};

/// `√(−ln 0.5)`: scales distances so the response is 0.5 at `distance = spread`.
const HALF_RESPONSE: f64 = 0.832_554_611_157_697_7;

/// Largest network the default configuration will grow.
pub const DEFAULT_NEURON_CAP: usize = 2000;

/// A candidate column whose component orthogonal to the current basis is
/// below this fraction of its norm adds nothing and is skipped.
const DEPENDENCE_TOLERANCE: f64 = 1e-10;

pub fn beta_for_spread(spread: f64) -> Result<f64> {
    if !(spread > 0.0) || !spread.is_finite() {
        return Err(Error::NonPositiveSpread(spread));
    }
    Ok(HALF_RESPONSE / spread)
}

/// Gaussian response `exp(−(distance·beta)²)` with `beta = √(−ln 0.5)/spread`.
pub fn radbas(distance: f64, spread: f64) -> Result<f64> {
    let beta = beta_for_spread(spread)?;
    let z = distance * beta;
    Ok((-z * z).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfNetwork {
    pub centers: Matrix,
    pub spread: f64,
    pub beta: f64,
    /// Output weights, `outputs × neurons`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl RbfNetwork {
    pub fn n_neurons(&self) -> usize {
        self.centers.rows()
    }

    fn activation(&self, x: &[f64], center: &[f64]) -> f64 {
        (-squared_distance(x, center) * self.beta * self.beta).exp()
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let phi: Vec<f64> = self.centers.row_iter().map(|c| self.activation(x, c)).collect();
        self.weights
            .row_iter()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, &phi) + b)
            .collect()
    }

    pub fn predict_all(&self, inputs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(inputs.rows(), self.bias.len());
        for i in 0..inputs.rows() {
            let y = self.predict(inputs.row(i));
            out.row_mut(i).copy_from_slice(&y);
        }
        out
    }
}

pub fn predict_rbf(net: &RbfNetwork, x: &[f64]) -> Vec<f64> {
    net.predict(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfTrainConfig {
    pub goal_mse: f64,
    pub max_neurons: usize,
    pub spread: f64,
    /// Growth record granularity, in neurons.
    pub neurons_between_records: usize,
}

impl RbfTrainConfig {
    /// Goal 0, one record per neuron and at most `min(n_train, 2000)` neurons.
    pub fn for_training_size(n_train: usize, spread: f64) -> Self {
        RbfTrainConfig {
            goal_mse: 0.0,
            max_neurons: n_train.min(DEFAULT_NEURON_CAP),
            spread,
            neurons_between_records: 1,
        }
    }

    fn validate(&self, n_train: usize) -> Result<()> {
        beta_for_spread(self.spread)?;
        if !(self.goal_mse >= 0.0) {
            return Err(Error::Config("goal_mse must be >= 0".into()));
        }
        if self.max_neurons == 0 || self.max_neurons > n_train {
            return Err(Error::Config(format!(
                "max_neurons must lie in 1..={n_train}, got {}",
                self.max_neurons
            )));
        }
        if self.neurons_between_records == 0 {
            return Err(Error::Config("neurons_between_records must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub neurons: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRecord {
    pub points: Vec<GrowthPoint>,
    /// Training-set row index of each center, in order of addition.
    pub center_rows: Vec<usize>,
}

impl GrowthRecord {
    /// Record point with the lowest validation MSE (earliest on ties).
    pub fn best_validation(&self) -> Option<&GrowthPoint> {
        self.points
            .iter()
            .filter(|p| p.val_mse.is_some_and(f64::is_finite))
            .fold(None, |best: Option<&GrowthPoint>, p| match best {
                Some(b) if b.val_mse <= p.val_mse => Some(b),
                _ => Some(p),
            })
    }

    pub fn final_train_mse(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.train_mse)
    }
}

/// Orthogonalized design matrix `[1, φ_1, …, φ_k]` with `R` factor and
/// projected targets.
struct IncrementalLs {
    q: Vec<Vec<f64>>,
    /// Column `j` of the upper-triangular factor, `j + 1` entries.
    r: Vec<Vec<f64>>,
    /// `qⱼᵀ t` for every output.
    qt_targets: Vec<[f64; NUM_CLASSES]>,
}

impl IncrementalLs {
    fn new() -> Self {
        IncrementalLs {
            q: Vec::new(),
            r: Vec::new(),
            qt_targets: Vec::new(),
        }
    }

    /// Orthogonalizes `column` against the basis; returns the unit vector and
    /// the new `R` column, or `None` if the column is numerically dependent.
    fn orthogonalize(&self, column: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let col_norm = dot(column, column).sqrt();
        if col_norm == 0.0 {
            return None;
        }
        let mut v = column.to_vec();
        let mut coeffs = vec![0.0; self.q.len() + 1];
        for _pass in 0..2 {
            for (j, qj) in self.q.iter().enumerate() {
                let c = dot(qj, &v);
                coeffs[j] += c;
                for (vi, qi) in v.iter_mut().zip(qj) {
                    *vi -= c * qi;
                }
            }
        }
        let nu = dot(&v, &v).sqrt();
        if !(nu > DEPENDENCE_TOLERANCE * col_norm) {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= nu);
        *coeffs.last_mut().unwrap() = nu;
        Some((v, coeffs))
    }

    fn push(&mut self, q: Vec<f64>, r_col: Vec<f64>, targets: &Matrix, residual: &mut Matrix) {
        let mut qt = [0.0; NUM_CLASSES];
        for c in 0..NUM_CLASSES {
            let mut proj_t = 0.0;
            let mut proj_res = 0.0;
            for (i, qi) in q.iter().enumerate() {
                proj_t += qi * targets[(i, c)];
                proj_res += qi * residual[(i, c)];
            }
            qt[c] = proj_t;
            for (i, qi) in q.iter().enumerate() {
                residual[(i, c)] -= proj_res * qi;
            }
        }
        self.q.push(q);
        self.r.push(r_col);
        self.qt_targets.push(qt);
    }

    /// Back-substitution for the coefficients of every basis column.
    fn coefficients(&self) -> Vec<[f64; NUM_CLASSES]> {
        let k = self.r.len();
        let mut theta = vec![[0.0; NUM_CLASSES]; k];
        for j in (0..k).rev() {
            for c in 0..NUM_CLASSES {
                let mut acc = self.qt_targets[j][c];
                for (l, th) in theta.iter().enumerate().skip(j + 1) {
                    acc -= self.r[l][j] * th[c];
                }
                theta[j][c] = acc / self.r[j][j];
            }
        }
        theta
    }
}

fn mean_squared(m: &Matrix) -> f64 {
    m.as_slice().iter().map(|v| v * v).sum::<f64>() / m.as_slice().len() as f64
}

/// Grows an RBF network on the (normalized) training rows of `data`.
///
/// Centers are chosen greedily by maximum residual norm, ties broken by the
/// lowest training-row index; inputs identical to an existing center are
/// never reselected. A center whose activation column is numerically
/// dependent on the existing basis keeps a zero output weight. Growth stops
/// once the training MSE reaches `cfg.goal_mse`, the network has
/// `cfg.max_neurons` neurons, or every distinct input is a center.
pub fn train_rbf(
    data: &Dataset,
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &RbfTrainConfig,
) -> Result<(RbfNetwork, GrowthRecord)> {
    if train_idx.is_empty() {
        return Err(Error::EmptyInput("RBF training needs at least one row"));
    }
    cfg.validate(train_idx.len())?;
    let beta = beta_for_spread(cfg.spread)?;
    let train = data.subset(train_idx);
    let val = data.subset(val_idx);
    let n = train.len();
    let targets = &train.targets;
    let act = |x: &[f64], c: &[f64]| (-squared_distance(x, c) * beta * beta).exp();

    let mut ls = IncrementalLs::new();
    let mut residual = targets.clone();
    let (q0, r0) = ls
        .orthogonalize(&vec![1.0; n])
        .expect("constant column is never dependent");
    ls.push(q0, r0, targets, &mut residual);

    let mut available = vec![true; n];
    let mut center_rows: Vec<usize> = Vec::new();
    // neuron index of basis column j + 1
    let mut basis_neuron: Vec<usize> = Vec::new();
    let mut val_columns: Vec<Vec<f64>> = Vec::new();
    let mut points = Vec::new();

    let record = |ls: &IncrementalLs, val_columns: &[Vec<f64>], residual: &Matrix, neurons: usize| {
        let val_mse = (!val.is_empty()).then(|| {
            let theta = ls.coefficients();
            let mut sse = 0.0;
            for i in 0..val.len() {
                for c in 0..NUM_CLASSES {
                    let mut y = theta[0][c];
                    for (k, col) in val_columns.iter().enumerate() {
                        y += theta[k + 1][c] * col[i];
                    }
                    let e = val.targets[(i, c)] - y;
                    sse += e * e;
                }
            }
            sse / (val.len() * NUM_CLASSES) as f64
        });
        GrowthPoint {
            neurons,
            train_mse: mean_squared(residual),
            val_mse,
        }
    };

    loop {
        // highest residual norm among remaining candidates, lowest index on ties
        let Some(pick) = (0..n)
            .filter(|&i| available[i])
            .map(|i| (i, residual.row(i).iter().map(|v| v * v).sum::<f64>()))
            .fold(None, |best: Option<(usize, f64)>, (i, r)| match best {
                Some((_, br)) if br >= r => best,
                _ => Some((i, r)),
            })
            .map(|(i, _)| i)
        else {
            let k = center_rows.len();
            if points.last().map(|p: &GrowthPoint| p.neurons) != Some(k) {
                points.push(record(&ls, &val_columns, &residual, k));
            }
            break;
        };
        let center = train.features.row(pick).to_vec();
        for i in 0..n {
            if available[i] && train.features.row(i) == center.as_slice() {
                available[i] = false;
            }
        }
        let column: Vec<f64> = (0..n).map(|i| act(train.features.row(i), &center)).collect();
        if let Some((q, r_col)) = ls.orthogonalize(&column) {
            ls.push(q, r_col, targets, &mut residual);
            basis_neuron.push(center_rows.len());
            val_columns.push((0..val.len()).map(|i| act(val.features.row(i), &center)).collect());
        }
        center_rows.push(pick);

        let k = center_rows.len();
        let mse = mean_squared(&residual);
        let done = mse <= cfg.goal_mse || k >= cfg.max_neurons;
        if done || k.is_multiple_of(cfg.neurons_between_records) {
            points.push(record(&ls, &val_columns, &residual, k));
            if k.is_multiple_of(50) {
                log::debug!("rbf spread {}: {k} neurons, train mse {mse:.6}", cfg.spread);
            }
        }
        if done {
            break;
        }
    }

    let theta = ls.coefficients();
    let mut weights = Matrix::zeros(NUM_CLASSES, center_rows.len());
    for (th, &neuron) in theta.iter().skip(1).zip(&basis_neuron) {
        for c in 0..NUM_CLASSES {
            weights[(c, neuron)] = th[c];
        }
    }
    let net = RbfNetwork {
        centers: train.features.select_rows(&center_rows),
        spread: cfg.spread,
        beta,
        weights,
        bias: theta[0].to_vec(),
    };
    if !net.weights.as_slice().iter().chain(&net.bias).all(|v| v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok((net, GrowthRecord { points, center_rows }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn basis_values() {
        assert_eq!(radbas(0.0, 0.3).unwrap(), 1.0);
        assert_abs_diff_eq!(radbas(0.3, 0.3).unwrap(), 0.5, epsilon = 1e-15);
        // exp(-4 ln 2) = 1/16
        assert_abs_diff_eq!(radbas(0.6, 0.3).unwrap(), 0.0625, epsilon = 1e-15);
        assert!(matches!(radbas(1.0, 0.0), Err(Error::NonPositiveSpread(_))));
        assert!(matches!(radbas(1.0, -1.0), Err(Error::NonPositiveSpread(_))));
    }

    #[test]
    fn half_response_constant() {
        assert_abs_diff_eq!(HALF_RESPONSE, (-(0.5f64).ln()).sqrt(), epsilon = 1e-16);
    }

    fn dataset(rows: &[[f64; 6]], targets: &[[f64; 3]]) -> Dataset {
        Dataset {
            features: Matrix::from_rows(rows).unwrap(),
            targets: Matrix::from_rows(targets).unwrap(),
            variety_vocab: vec!["A".into()],
            normalizer: None,
        }
    }

    #[test]
    fn three_points_interpolate() {
        let ds = dataset(
            &[
                [0.0; 6],
                [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                [0.0, -1.0, 0.5, 0.0, 0.0, 0.0],
            ],
            &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        );
        let cfg = RbfTrainConfig {
            goal_mse: 0.0,
            max_neurons: 3,
            spread: 0.01,
            neurons_between_records: 1,
        };
        let (net, rec) = train_rbf(&ds, &[0, 1, 2], &[], &cfg).unwrap();
        let out = net.predict_all(&ds.features);
        let mse = mean_squared(&out.sub(&ds.targets).unwrap());
        assert!(mse < 1e-6, "{mse}");
        assert!(rec.final_train_mse() < 1e-6);
        for i in 0..3 {
            for c in 0..3 {
                assert_abs_diff_eq!(out[(i, c)], ds.targets[(i, c)], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn infinite_goal_stops_after_one_neuron() {
        let ds = dataset(&[[0.0; 6], [1.0; 6]], &[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let cfg = RbfTrainConfig {
            goal_mse: f64::INFINITY,
            max_neurons: 2,
            spread: 1.0,
            neurons_between_records: 1,
        };
        let (net, rec) = train_rbf(&ds, &[0, 1], &[], &cfg).unwrap();
        assert_eq!(net.n_neurons(), 1);
        assert_eq!(rec.points.len(), 1);
    }

    #[test]
    fn wide_spread_single_neuron_is_constant() {
        let ds = dataset(&[[0.0; 6], [0.5; 6]], &[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let cfg = RbfTrainConfig {
            goal_mse: 0.0,
            max_neurons: 1,
            spread: 1e6,
            neurons_between_records: 1,
        };
        let (net, _) = train_rbf(&ds, &[0, 1], &[], &cfg).unwrap();
        let a = net.predict(&[0.9; 6]);
        let b = net.predict(&[-0.7; 6]);
        for c in 0..3 {
            assert_abs_diff_eq!(a[c], net.weights[(c, 0)] + net.bias[c], epsilon = 1e-9);
            assert_abs_diff_eq!(a[c], b[c], epsilon = 1e-9);
        }
    }

    #[test]
    fn symmetric_centers_contribute_equally() {
        let net = RbfNetwork {
            centers: Matrix::from_rows(&[[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0]]).unwrap(),
            spread: 0.8,
            beta: beta_for_spread(0.8).unwrap(),
            weights: Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap(),
            bias: vec![0.0; 3],
        };
        let y = net.predict(&[0.0, 0.3, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(y[0], y[1]);
    }

    #[test]
    fn config_errors() {
        let ds = dataset(&[[0.0; 6]], &[[1.0, 0.0, 0.0]]);
        let mut cfg = RbfTrainConfig::for_training_size(1, 0.0);
        assert!(matches!(
            train_rbf(&ds, &[0], &[], &cfg),
            Err(Error::NonPositiveSpread(_))
        ));
        cfg.spread = 1.0;
        cfg.max_neurons = 2;
        assert!(matches!(train_rbf(&ds, &[0], &[], &cfg), Err(Error::Config(_))));
        assert!(matches!(train_rbf(&ds, &[], &[], &cfg), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn duplicate_inputs_are_not_reselected() {
        let ds = dataset(
            &[[0.0; 6], [0.0; 6], [0.5; 6]],
            &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        );
        let cfg = RbfTrainConfig::for_training_size(3, 0.2);
        let (net, rec) = train_rbf(&ds, &[0, 1, 2], &[], &cfg).unwrap();
        assert_eq!(net.n_neurons(), 2);
        let mut rows = rec.center_rows.clone();
        rows.sort();
        assert!(rows == vec![0, 2] || rows == vec![1, 2]);
    }
}
