//! One-hidden-layer perceptron with selectable transfer functions.
//!
//! Parameters are flattened in a fixed order used by every optimizer, the
//! gradient and the Jacobian: `W1` row-major, `b1`, `W2` row-major, `b2`.
//! The loss is the mean squared error over all samples *and* output units.

mod optim;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Severity, NUM_CLASSES, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SeededRng};

pub use train::{
    fit, train, train_with_hook, EarlyStopping, EpochStats, StopReason, TrainAlgorithm, TrainConfig, TrainRecord,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransferFn {
    /// `tansig`: `2/(1+e^(−2n)) − 1`
    HyperbolicTangentSigmoid,
    /// `logsig`: `1/(1+e^(−n))`
    LogSigmoid,
    /// `purelin`: identity
    Linear,
}

impl TransferFn {
    pub const ALL: [TransferFn; 3] = [
        TransferFn::HyperbolicTangentSigmoid,
        TransferFn::LogSigmoid,
        TransferFn::Linear,
    ];

    #[inline]
    pub fn apply(self, n: f64) -> f64 {
        match self {
            TransferFn::HyperbolicTangentSigmoid => 2.0 / (1.0 + (-2.0 * n).exp()) - 1.0,
            TransferFn::LogSigmoid => 1.0 / (1.0 + (-n).exp()),
            TransferFn::Linear => n,
        }
    }

    /// Derivative expressed through the activation `a = f(n)`.
    #[inline]
    fn deriv_from_output(self, a: f64) -> f64 {
        match self {
            TransferFn::HyperbolicTangentSigmoid => 1.0 - a * a,
            TransferFn::LogSigmoid => a * (1.0 - a),
            TransferFn::Linear => 1.0,
        }
    }

    pub fn derivative(self, n: f64) -> f64 {
        self.deriv_from_output(self.apply(n))
    }

    pub fn alias(self) -> &'static str {
        match self {
            TransferFn::HyperbolicTangentSigmoid => "tansig",
            TransferFn::LogSigmoid => "logsig",
            TransferFn::Linear => "purelin",
        }
    }
}

impl fmt::Display for TransferFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.alias())
    }
}

impl FromStr for TransferFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tansig" | "tanh" => Ok(TransferFn::HyperbolicTangentSigmoid),
            "logsig" | "sigmoid" => Ok(TransferFn::LogSigmoid),
            "purelin" | "linear" => Ok(TransferFn::Linear),
            other => Err(Error::Config(format!("unknown transfer function {other:?}"))),
        }
    }
}

pub fn transfer(f: TransferFn, n: f64) -> f64 {
    f.apply(n)
}

pub fn transfer_deriv(f: TransferFn, n: f64) -> f64 {
    f.derivative(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
}

impl MlpShape {
    /// Six inputs, three severity outputs.
    pub fn severity(n_hidden: usize) -> Self {
        MlpShape {
            n_in: NUM_FEATURES,
            n_hidden,
            n_out: NUM_CLASSES,
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_hidden * self.n_in + self.n_hidden + self.n_out * self.n_hidden + self.n_out
    }
}

/// Common rules of thumb for the hidden-layer width given `n_in` inputs:
/// `2n+1`, `2n`, `n` and `n/2`.
pub fn hidden_neuron_heuristics(n_in: usize) -> [(&'static str, usize); 4] {
    [
        ("2n+1", 2 * n_in + 1),
        ("2n", 2 * n_in),
        ("n", n_in),
        ("n/2", (n_in / 2).max(1)),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    pub shape: MlpShape,
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub f_hidden: TransferFn,
    pub f_out: TransferFn,
}

/// Weights uniform in `[−0.5, 0.5] / √fan_in`, drawn in flattening order.
pub fn init_network(
    shape: MlpShape,
    f_hidden: TransferFn,
    f_out: TransferFn,
    rng: &mut SeededRng,
) -> Result<MlpNetwork> {
    if shape.n_in == 0 || shape.n_hidden == 0 || shape.n_out == 0 {
        return Err(Error::Config(format!("invalid network shape {shape:?}")));
    }
    let mut net = MlpNetwork::zeros(shape, f_hidden, f_out);
    let s1 = 1.0 / (shape.n_in as f64).sqrt();
    let s2 = 1.0 / (shape.n_hidden as f64).sqrt();
    for w in net.w1.as_mut_slice() {
        *w = rng.uniform(-0.5, 0.5) * s1;
    }
    for b in &mut net.b1 {
        *b = rng.uniform(-0.5, 0.5) * s1;
    }
    for w in net.w2.as_mut_slice() {
        *w = rng.uniform(-0.5, 0.5) * s2;
    }
    for b in &mut net.b2 {
        *b = rng.uniform(-0.5, 0.5) * s2;
    }
    Ok(net)
}

impl MlpNetwork {
    pub fn zeros(shape: MlpShape, f_hidden: TransferFn, f_out: TransferFn) -> Self {
        MlpNetwork {
            shape,
            w1: Matrix::zeros(shape.n_hidden, shape.n_in),
            b1: vec![0.0; shape.n_hidden],
            w2: Matrix::zeros(shape.n_out, shape.n_hidden),
            b2: vec![0.0; shape.n_out],
            f_hidden,
            f_out,
        }
    }

    pub fn n_params(&self) -> usize {
        self.shape.n_params()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(self.w1.as_slice());
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(self.w2.as_slice());
        p.extend_from_slice(&self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params(), "parameter vector length");
        let (w1, rest) = p.split_at(self.w1.as_slice().len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.as_slice().len());
        self.w1.as_mut_slice().copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.as_mut_slice().copy_from_slice(w2);
        self.b2.copy_from_slice(b2);
    }

    pub fn with_params(&self, p: &[f64]) -> MlpNetwork {
        let mut net = self.clone();
        net.set_params(p);
        net
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }

    /// Returns `(outputs, hidden activations)`.
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut hidden = Vec::with_capacity(self.shape.n_hidden);
        for (j, w) in self.w1.row_iter().enumerate() {
            let n: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b1[j];
            hidden.push(self.f_hidden.apply(n));
        }
        let mut out = Vec::with_capacity(self.shape.n_out);
        for (k, w) in self.w2.row_iter().enumerate() {
            let n: f64 = w.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>() + self.b2[k];
            out.push(self.f_out.apply(n));
        }
        (out, hidden)
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).0
    }

    /// Outputs for every row of `inputs`.
    pub fn predict_all(&self, inputs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(inputs.rows(), self.shape.n_out);
        for i in 0..inputs.rows() {
            let y = self.predict(inputs.row(i));
            out.row_mut(i).copy_from_slice(&y);
        }
        out
    }

    pub fn mse(&self, inputs: &Matrix, targets: &Matrix) -> Result<f64> {
        check_batch(self, inputs, targets)?;
        let mut sse = 0.0;
        for i in 0..inputs.rows() {
            let y = self.predict(inputs.row(i));
            sse += y
                .iter()
                .zip(targets.row(i))
                .map(|(y, t)| (t - y) * (t - y))
                .sum::<f64>();
        }
        Ok(sse / (inputs.rows() * self.shape.n_out) as f64)
    }

    /// Gradient of the batch MSE with respect to the flattened parameters.
    pub fn backprop_gradient(&self, inputs: &Matrix, targets: &Matrix) -> Result<Vec<f64>> {
        Ok(self.loss_and_gradient(inputs, targets)?.1)
    }

    /// MSE and its gradient in one pass.
    pub fn loss_and_gradient(&self, inputs: &Matrix, targets: &Matrix) -> Result<(f64, Vec<f64>)> {
        check_batch(self, inputs, targets)?;
        let MlpShape { n_in, n_hidden, n_out } = self.shape;
        let m = (inputs.rows() * n_out) as f64;
        let mut grad = vec![0.0; self.n_params()];
        let (g_w1, rest) = grad.split_at_mut(n_hidden * n_in);
        let (g_b1, rest) = rest.split_at_mut(n_hidden);
        let (g_w2, g_b2) = rest.split_at_mut(n_out * n_hidden);

        let mut sse = 0.0;
        let mut delta_out = vec![0.0; n_out];
        let mut delta_hidden = vec![0.0; n_hidden];
        for i in 0..inputs.rows() {
            let x = inputs.row(i);
            let (y, h) = self.forward(x);
            for k in 0..n_out {
                let e = targets[(i, k)] - y[k];
                sse += e * e;
                delta_out[k] = -2.0 * e / m * self.f_out.deriv_from_output(y[k]);
            }
            for j in 0..n_hidden {
                let back: f64 = (0..n_out).map(|k| self.w2[(k, j)] * delta_out[k]).sum();
                delta_hidden[j] = back * self.f_hidden.deriv_from_output(h[j]);
            }
            for k in 0..n_out {
                let row = &mut g_w2[k * n_hidden..(k + 1) * n_hidden];
                for (g, &hj) in row.iter_mut().zip(&h) {
                    *g += delta_out[k] * hj;
                }
                g_b2[k] += delta_out[k];
            }
            for j in 0..n_hidden {
                let row = &mut g_w1[j * n_in..(j + 1) * n_in];
                for (g, &xi) in row.iter_mut().zip(x) {
                    *g += delta_hidden[j] * xi;
                }
                g_b1[j] += delta_hidden[j];
            }
        }
        Ok((sse / m, grad))
    }

    /// Jacobian of the residuals `e = target − output` with respect to the
    /// parameters, with rows ordered sample-major (`sample · n_out + output`),
    /// together with the residual vector.
    ///
    /// The MSE gradient equals `2·Jᵀe / (samples · n_out)`.
    pub fn jacobian(&self, inputs: &Matrix, targets: &Matrix) -> Result<(Matrix, Vec<f64>)> {
        check_batch(self, inputs, targets)?;
        let MlpShape { n_in, n_hidden, n_out } = self.shape;
        let n_params = self.n_params();
        let off_b1 = n_hidden * n_in;
        let off_w2 = off_b1 + n_hidden;
        let off_b2 = off_w2 + n_out * n_hidden;

        let mut jac = Matrix::zeros(inputs.rows() * n_out, n_params);
        let mut errors = Vec::with_capacity(inputs.rows() * n_out);
        let mut dh = vec![0.0; n_hidden];
        for i in 0..inputs.rows() {
            let x = inputs.row(i);
            let (y, h) = self.forward(x);
            for (j, d) in dh.iter_mut().enumerate() {
                *d = self.f_hidden.deriv_from_output(h[j]);
            }
            for k in 0..n_out {
                errors.push(targets[(i, k)] - y[k]);
                // residual derivative is the negated output derivative
                let dout = -self.f_out.deriv_from_output(y[k]);
                let row = jac.row_mut(i * n_out + k);
                for j in 0..n_hidden {
                    let dn1 = dout * self.w2[(k, j)] * dh[j];
                    if dn1 != 0.0 {
                        for (r, &xi) in row[j * n_in..(j + 1) * n_in].iter_mut().zip(x) {
                            *r = dn1 * xi;
                        }
                    }
                    row[off_b1 + j] = dn1;
                    row[off_w2 + k * n_hidden + j] = dout * h[j];
                }
                row[off_b2 + k] = dout;
            }
        }
        Ok((jac, errors))
    }
}

fn check_batch(net: &MlpNetwork, inputs: &Matrix, targets: &Matrix) -> Result<()> {
    if inputs.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    if inputs.rows() != targets.rows() || inputs.cols() != net.shape.n_in || targets.cols() != net.shape.n_out {
        return Err(Error::ShapeMismatch(format!(
            "inputs {}x{}, targets {}x{} for a {}-{}-{} network",
            inputs.rows(),
            inputs.cols(),
            targets.rows(),
            targets.cols(),
            net.shape.n_in,
            net.shape.n_hidden,
            net.shape.n_out
        )));
    }
    Ok(())
}

/// Argmax over the three outputs; ties go to the more severe class.
pub fn class_from_outputs(y: &[f64]) -> Severity {
    let mut best = 0;
    for (k, v) in y.iter().enumerate().take(NUM_CLASSES) {
        if *v > y[best] {
            best = k;
        }
    }
    Severity::BY_POSITION[best]
}

pub fn predict_class(net: &MlpNetwork, x: &[f64]) -> Severity {
    class_from_outputs(&net.predict(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny(f_hidden: TransferFn, f_out: TransferFn) -> MlpNetwork {
        let shape = MlpShape {
            n_in: 1,
            n_hidden: 1,
            n_out: 1,
        };
        let mut net = MlpNetwork::zeros(shape, f_hidden, f_out);
        net.set_params(&[1.0, 0.0, 1.0, 0.0]);
        net
    }

    #[test]
    fn transfer_values() {
        assert_eq!(transfer(TransferFn::LogSigmoid, 0.0), 0.5);
        assert_eq!(transfer(TransferFn::HyperbolicTangentSigmoid, 0.0), 0.0);
        assert_eq!(transfer(TransferFn::Linear, 3.7), 3.7);
        assert_abs_diff_eq!(transfer_deriv(TransferFn::LogSigmoid, 0.0), 0.25);
        assert_abs_diff_eq!(
            transfer(TransferFn::HyperbolicTangentSigmoid, 0.7),
            0.7f64.tanh(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn transfer_derivatives_match_finite_differences() {
        let h = 1e-6;
        for f in TransferFn::ALL {
            for k in -40..=40 {
                let n = k as f64 * 0.1;
                let fd = (f.apply(n + h) - f.apply(n - h)) / (2.0 * h);
                assert!((fd - f.derivative(n)).abs() < 1e-6, "{f} at {n}");
            }
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let shape = MlpShape::severity(8);
        let a = init_network(
            shape,
            TransferFn::LogSigmoid,
            TransferFn::Linear,
            &mut SeededRng::new(5),
        )
        .unwrap();
        let b = init_network(
            shape,
            TransferFn::LogSigmoid,
            TransferFn::Linear,
            &mut SeededRng::new(5),
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_params(), 83);
        assert_eq!(a.params().len(), 83);
        let bound = 0.5 / 6f64.sqrt();
        assert!(a.w1.as_slice().iter().all(|w| w.is_finite() && w.abs() <= bound));
    }

    #[test]
    fn forward_examples() {
        let shape = MlpShape::severity(4);
        let zero = MlpNetwork::zeros(shape, TransferFn::LogSigmoid, TransferFn::Linear);
        assert_eq!(zero.predict(&[0.3; 6]), vec![0.0; 3]);
        let zero = MlpNetwork::zeros(shape, TransferFn::LogSigmoid, TransferFn::LogSigmoid);
        assert_eq!(zero.predict(&[0.3; 6]), vec![0.5; 3]);
        let net = tiny(TransferFn::LogSigmoid, TransferFn::Linear);
        assert_eq!(net.predict(&[0.0]), vec![0.5]);
    }

    #[test]
    fn hand_computed_gradient() {
        let net = tiny(TransferFn::LogSigmoid, TransferFn::Linear);
        let x = Matrix::from_rows(&[[0.0]]).unwrap();
        let t = Matrix::from_rows(&[[0.0]]).unwrap();
        let g = net.backprop_gradient(&x, &t).unwrap();
        // order: w1, b1, w2, b2
        assert_abs_diff_eq!(g[0], 0.0);
        assert_abs_diff_eq!(g[1], 0.25);
        assert_abs_diff_eq!(g[2], 0.5);
        assert_abs_diff_eq!(g[3], 1.0);
    }

    #[test]
    fn zero_gradient_at_exact_fit() {
        let net = tiny(TransferFn::LogSigmoid, TransferFn::Linear);
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let t = net.predict_all(&x);
        let g = net.backprop_gradient(&x, &t).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn jacobian_shape_and_scaling() {
        let shape = MlpShape::severity(8);
        let mut rng = SeededRng::new(11);
        let net = init_network(
            shape,
            TransferFn::HyperbolicTangentSigmoid,
            TransferFn::LogSigmoid,
            &mut rng,
        )
        .unwrap();
        let x = Matrix::from_rows(&[[0.1, -0.2, 0.3, 0.9, -1.0, 0.5]]).unwrap();
        let t = Matrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        let (j, e) = net.jacobian(&x, &t).unwrap();
        assert_eq!((j.rows(), j.cols()), (3, 83));
        let g = net.backprop_gradient(&x, &t).unwrap();
        let jte = j.tr_mul_vec(&e).unwrap();
        for (a, b) in g.iter().zip(&jte) {
            assert!((a - 2.0 * b / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_net_jacobian_in_output_layer_is_parameter_free() {
        let shape = MlpShape::severity(3);
        let x = Matrix::from_rows(&[[0.1, -0.2, 0.3, 0.9, -1.0, 0.5]]).unwrap();
        let t = Matrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        let a = init_network(shape, TransferFn::Linear, TransferFn::Linear, &mut SeededRng::new(1)).unwrap();
        let (ja, _) = a.jacobian(&x, &t).unwrap();
        // b2 columns: residual derivative is -1 regardless of parameters
        for k in 0..3 {
            assert_eq!(ja[(k, shape.n_params() - 3 + k)], -1.0);
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let net = tiny(TransferFn::Linear, TransferFn::Linear);
        let x = Matrix::zeros(0, 1);
        assert!(matches!(net.backprop_gradient(&x, &x), Err(Error::EmptyBatch)));
        assert!(matches!(net.jacobian(&x, &x), Err(Error::EmptyBatch)));
    }

    #[test]
    fn class_decoding_and_ties() {
        assert_eq!(class_from_outputs(&[0.9, 0.2, 0.1]), Severity::High);
        assert_eq!(class_from_outputs(&[0.1, 0.1, 0.8]), Severity::Low);
        assert_eq!(class_from_outputs(&[0.5, 0.5, 0.2]), Severity::High);
        assert_eq!(class_from_outputs(&[0.1, 0.5, 0.5]), Severity::Medium);
    }

    #[test]
    fn heuristics_for_six_inputs() {
        let h: Vec<usize> = hidden_neuron_heuristics(6).iter().map(|(_, n)| *n).collect();
        assert_eq!(h, vec![13, 12, 6, 3]);
    }
}
