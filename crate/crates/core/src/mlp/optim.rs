//! Full-batch optimizers for the perceptron. Each call to [`Optimizer::step`]
//! is one training epoch.

use crate::error::{Error, Result};
use crate::linalg::{damped_solve, dot, norm, Matrix};

use super::train::{TrainAlgorithm, TrainConfig};
use super::MlpNetwork;

/// Training objective over a fixed batch: MSE as a function of the
/// flattened parameter vector.
pub(crate) struct Objective<'a> {
    template: &'a MlpNetwork,
    inputs: &'a Matrix,
    targets: &'a Matrix,
}

impl<'a> Objective<'a> {
    pub(crate) fn new(template: &'a MlpNetwork, inputs: &'a Matrix, targets: &'a Matrix) -> Result<Self> {
        template.mse(inputs, targets)?;
        Ok(Objective {
            template,
            inputs,
            targets,
        })
    }

    pub(crate) fn loss(&self, p: &[f64]) -> f64 {
        let mse = self
            .template
            .with_params(p)
            .mse(self.inputs, self.targets)
            .expect("batch validated in Objective::new");
        if mse.is_finite() {
            mse
        } else {
            f64::INFINITY
        }
    }

    pub(crate) fn loss_grad(&self, p: &[f64]) -> (f64, Vec<f64>) {
        self.template
            .with_params(p)
            .loss_and_gradient(self.inputs, self.targets)
            .expect("batch validated in Objective::new")
    }

    fn jacobian(&self, p: &[f64]) -> (Matrix, Vec<f64>) {
        self.template
            .with_params(p)
            .jacobian(self.inputs, self.targets)
            .expect("batch validated in Objective::new")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum StepOutcome {
    Moved,
    /// No acceptable step was found; parameters are unchanged.
    Stalled,
    /// Levenberg-Marquardt damping exceeded its ceiling.
    MuOverflow,
}

pub(crate) trait Optimizer {
    /// Advances `params` by one epoch given the current loss and gradient.
    fn step(&mut self, obj: &Objective, params: &mut [f64], loss: f64, grad: &[f64]) -> Result<StepOutcome>;

    fn mu(&self) -> Option<f64> {
        None
    }
}

pub(crate) fn make_optimizer(cfg: &TrainConfig, n_params: usize) -> Box<dyn Optimizer> {
    match cfg.algorithm {
        TrainAlgorithm::LevenbergMarquardt => Box::new(LevenbergMarquardt {
            mu: cfg.lm_mu0,
            mu_inc: cfg.lm_mu_inc,
            mu_dec: cfg.lm_mu_dec,
            mu_max: cfg.lm_mu_max,
        }),
        TrainAlgorithm::QuasiNewtonBfgs => Box::new(Bfgs::default()),
        TrainAlgorithm::ResilientBackprop => Box::new(Rprop::new(n_params)),
        TrainAlgorithm::GdAdaptiveLrMomentum => Box::new(GdAdaptive {
            lr: cfg.learning_rate,
            momentum: cfg.momentum,
            velocity: vec![0.0; n_params],
        }),
        TrainAlgorithm::ScaledConjugateGradient => Box::new(Scg::new()),
        TrainAlgorithm::ConjugateGradientPowellBeale => Box::new(ConjugateGradient::new(CgUpdate::PowellBeale)),
        TrainAlgorithm::OneStepSecant => Box::new(OneStepSecant::default()),
        TrainAlgorithm::ConjugateGradientFletcherReeves => Box::new(ConjugateGradient::new(CgUpdate::FletcherReeves)),
        TrainAlgorithm::GdMomentum => Box::new(GdMomentum {
            lr: cfg.learning_rate,
            momentum: cfg.momentum,
            velocity: vec![0.0; n_params],
        }),
        TrainAlgorithm::GradientDescent => Box::new(GradientDescent { lr: cfg.learning_rate }),
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn offset(w: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    w.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

/// Armijo constant for sufficient decrease.
const LS_SUFFICIENT_DECREASE: f64 = 1e-4;
/// Maximum bracketing (expansion or backtracking) steps per search.
const LS_MAX_STEPS: usize = 20;

/// Line search along descent direction `d` from `w`.
///
/// An initial step meeting the sufficient-decrease condition is doubled while
/// the loss keeps falling; otherwise the step is backtracked using quadratic
/// then cubic interpolation, each new step clamped to `[0.1, 0.5]` of the
/// previous one. Returns the accepted step and its loss.
pub(crate) fn line_search(
    obj: &Objective,
    w: &[f64],
    d: &[f64],
    f0: f64,
    slope: f64,
    alpha0: f64,
) -> Option<(f64, f64)> {
    debug_assert!(slope < 0.0);
    let armijo = |alpha: f64, f: f64| f <= f0 + LS_SUFFICIENT_DECREASE * alpha * slope;

    let mut alpha = alpha0;
    let mut f = obj.loss(&offset(w, alpha, d));
    if armijo(alpha, f) {
        for _ in 0..LS_MAX_STEPS {
            let a2 = 2.0 * alpha;
            let f2 = obj.loss(&offset(w, a2, d));
            if f2 < f && armijo(a2, f2) {
                alpha = a2;
                f = f2;
            } else {
                break;
            }
        }
        return Some((alpha, f));
    }

    let mut prev: Option<(f64, f64)> = None;
    for _ in 0..LS_MAX_STEPS {
        let candidate = match prev {
            _ if !f.is_finite() => 0.1 * alpha,
            None => -slope * alpha * alpha / (2.0 * (f - f0 - slope * alpha)),
            Some((a_prev, f_prev)) => cubic_minimizer(f0, slope, alpha, f, a_prev, f_prev),
        };
        let next = if candidate.is_finite() {
            candidate.clamp(0.1 * alpha, 0.5 * alpha)
        } else {
            0.5 * alpha
        };
        prev = Some((alpha, f));
        alpha = next;
        f = obj.loss(&offset(w, alpha, d));
        if armijo(alpha, f) {
            return Some((alpha, f));
        }
    }
    None
}

/// Minimizer of the cubic through `(0, f0)` with slope `g0` and the two
/// most recent trial points.
fn cubic_minimizer(f0: f64, g0: f64, a1: f64, f1: f64, a2: f64, f2: f64) -> f64 {
    let r1 = f1 - f0 - g0 * a1;
    let r2 = f2 - f0 - g0 * a2;
    let denom = a1 - a2;
    let a = (r1 / (a1 * a1) - r2 / (a2 * a2)) / denom;
    let b = (-a2 * r1 / (a1 * a1) + a1 * r2 / (a2 * a2)) / denom;
    if a.abs() < f64::EPSILON {
        return -g0 / (2.0 * b);
    }
    let disc = b * b - 3.0 * a * g0;
    if disc < 0.0 {
        return 0.5 * a1;
    }
    (-b + disc.sqrt()) / (3.0 * a)
}

struct GradientDescent {
    lr: f64,
}

impl Optimizer for GradientDescent {
    fn step(&mut self, _: &Objective, params: &mut [f64], _: f64, grad: &[f64]) -> Result<StepOutcome> {
        axpy(-self.lr, grad, params);
        Ok(StepOutcome::Moved)
    }
}

/// Classical momentum: `v ← momentum·v − lr·g`, `w ← w + v`.
struct GdMomentum {
    lr: f64,
    momentum: f64,
    velocity: Vec<f64>,
}

impl Optimizer for GdMomentum {
    fn step(&mut self, _: &Objective, params: &mut [f64], _: f64, grad: &[f64]) -> Result<StepOutcome> {
        for ((v, w), g) in self.velocity.iter_mut().zip(params.iter_mut()).zip(grad) {
            *v = self.momentum * *v - self.lr * g;
            *w += *v;
        }
        Ok(StepOutcome::Moved)
    }
}

/// Momentum with an adaptive learning rate: a step that raises the loss is
/// discarded and the rate shrinks by 0.7; a step that lowers it grows the
/// rate by 1.05.
struct GdAdaptive {
    lr: f64,
    momentum: f64,
    velocity: Vec<f64>,
}

const GDX_LR_INC: f64 = 1.05;
const GDX_LR_DEC: f64 = 0.7;

impl Optimizer for GdAdaptive {
    fn step(&mut self, obj: &Objective, params: &mut [f64], loss: f64, grad: &[f64]) -> Result<StepOutcome> {
        let trial_v: Vec<f64> = self
            .velocity
            .iter()
            .zip(grad)
            .map(|(v, g)| self.momentum * v - self.lr * g)
            .collect();
        let trial_w = offset(params, 1.0, &trial_v);
        let trial_loss = obj.loss(&trial_w);
        if !(trial_loss <= loss) {
            self.lr *= GDX_LR_DEC;
            self.velocity.iter_mut().for_each(|v| *v = 0.0);
            return Ok(StepOutcome::Stalled);
        }
        if trial_loss < loss {
            self.lr *= GDX_LR_INC;
        }
        params.copy_from_slice(&trial_w);
        self.velocity = trial_v;
        Ok(StepOutcome::Moved)
    }
}

/// Sign-based per-parameter steps (iRprop−).
struct Rprop {
    step_size: Vec<f64>,
    prev_grad: Vec<f64>,
}

const RPROP_DELTA0: f64 = 0.07;
const RPROP_INC: f64 = 1.2;
const RPROP_DEC: f64 = 0.5;
const RPROP_DELTA_MAX: f64 = 50.0;
const RPROP_DELTA_MIN: f64 = 1e-9;

impl Rprop {
    fn new(n: usize) -> Self {
        Rprop {
            step_size: vec![RPROP_DELTA0; n],
            prev_grad: vec![0.0; n],
        }
    }
}

impl Optimizer for Rprop {
    fn step(&mut self, _: &Objective, params: &mut [f64], _: f64, grad: &[f64]) -> Result<StepOutcome> {
        for i in 0..params.len() {
            let mut g = grad[i];
            let agreement = g * self.prev_grad[i];
            if agreement > 0.0 {
                self.step_size[i] = (self.step_size[i] * RPROP_INC).min(RPROP_DELTA_MAX);
            } else if agreement < 0.0 {
                self.step_size[i] = (self.step_size[i] * RPROP_DEC).max(RPROP_DELTA_MIN);
                g = 0.0;
            }
            if g > 0.0 {
                params[i] -= self.step_size[i];
            } else if g < 0.0 {
                params[i] += self.step_size[i];
            }
            self.prev_grad[i] = g;
        }
        Ok(StepOutcome::Moved)
    }
}

/// Damped Gauss-Newton on the residual Jacobian. A trial step is accepted
/// only if it strictly lowers the loss; otherwise `mu` grows and the step is
/// retried from the same parameters.
struct LevenbergMarquardt {
    mu: f64,
    mu_inc: f64,
    mu_dec: f64,
    mu_max: f64,
}

impl Optimizer for LevenbergMarquardt {
    fn step(&mut self, obj: &Objective, params: &mut [f64], loss: f64, _: &[f64]) -> Result<StepOutcome> {
        let (jac, errors) = obj.jacobian(params);
        let gram = jac.gram();
        let jte = jac.tr_mul_vec(&errors)?;
        while self.mu <= self.mu_max {
            let mut damped = gram.clone();
            for i in 0..damped.rows() {
                damped[(i, i)] += self.mu;
            }
            match damped_solve(damped, jte.clone()) {
                Ok(delta) => {
                    let trial = offset(params, -1.0, &delta);
                    let trial_loss = obj.loss(&trial);
                    if trial_loss < loss {
                        params.copy_from_slice(&trial);
                        self.mu *= self.mu_dec;
                        return Ok(StepOutcome::Moved);
                    }
                }
                Err(Error::SingularSystem) => {}
                Err(e) => return Err(e),
            }
            self.mu *= self.mu_inc;
        }
        Ok(StepOutcome::MuOverflow)
    }

    fn mu(&self) -> Option<f64> {
        Some(self.mu)
    }
}

/// BFGS on the inverse Hessian with the shared line search.
#[derive(Default)]
struct Bfgs {
    inv_hessian: Option<Matrix>,
    prev: Option<(Vec<f64>, Vec<f64>)>,
    alpha: Option<f64>,
}

impl Bfgs {
    fn update(&mut self, s: &[f64], y: &[f64]) {
        let sy = dot(s, y);
        if !(sy > 1e-12 * norm(s) * norm(y)) {
            return;
        }
        let n = s.len();
        let h = self.inv_hessian.get_or_insert_with(|| {
            let mut h = Matrix::identity(n);
            let scale = sy / dot(y, y);
            h.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
            h
        });
        let rho = 1.0 / sy;
        let hy = h.mul_vec(y).expect("square inverse Hessian");
        let yhy = dot(y, &hy);
        let c = rho * rho * yhy + rho;
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] += c * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
            }
        }
    }
}

impl Optimizer for Bfgs {
    fn step(&mut self, obj: &Objective, params: &mut [f64], loss: f64, grad: &[f64]) -> Result<StepOutcome> {
        if let Some((w_prev, g_prev)) = self.prev.take() {
            let s: Vec<f64> = params.iter().zip(&w_prev).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = grad.iter().zip(&g_prev).map(|(a, b)| a - b).collect();
            self.update(&s, &y);
        }
        let mut d: Vec<f64> = match &self.inv_hessian {
            Some(h) => h.mul_vec(grad)?.into_iter().map(|v| -v).collect(),
            None => grad.iter().map(|g| -g).collect(),
        };
        let mut slope = dot(&d, grad);
        if !(slope < 0.0) {
            self.inv_hessian = None;
            d = grad.iter().map(|g| -g).collect();
            slope = dot(&d, grad);
        }
        if !(slope < 0.0) {
            return Ok(StepOutcome::Stalled);
        }
        let alpha0 = if self.inv_hessian.is_some() {
            1.0
        } else {
            self.alpha.unwrap_or(1.0)
        };
        match line_search(obj, params, &d, loss, slope, alpha0) {
            Some((alpha, _)) => {
                self.prev = Some((params.to_vec(), grad.to_vec()));
                axpy(alpha, &d, params);
                self.alpha = Some(alpha);
                Ok(StepOutcome::Moved)
            }
            None => {
                self.inv_hessian = None;
                Ok(StepOutcome::Stalled)
            }
        }
    }
}

/// One-step secant: a BFGS direction built from the identity and only the
/// most recent step, so no matrix is stored.
#[derive(Default)]
struct OneStepSecant {
    prev: Option<(Vec<f64>, Vec<f64>)>,
    alpha: Option<f64>,
}

impl Optimizer for OneStepSecant {
    fn step(&mut self, obj: &Objective, params: &mut [f64], loss: f64, grad: &[f64]) -> Result<StepOutcome> {
        let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut secant = false;
        if let Some((w_prev, g_prev)) = self.prev.take() {
            let s: Vec<f64> = params.iter().zip(&w_prev).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = grad.iter().zip(&g_prev).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * norm(&s) * norm(&y) {
                let sg = dot(&s, grad);
                let yg = dot(&y, grad);
                let a = -(1.0 + dot(&y, &y) / sy) * (sg / sy) + yg / sy;
                let b = sg / sy;
                axpy(a, &s, &mut d);
                axpy(b, &y, &mut d);
                secant = true;
            }
        }
        let mut slope = dot(&d, grad);
        if !(slope < 0.0) {
            d = grad.iter().map(|g| -g).collect();
            slope = dot(&d, grad);
            secant = false;
        }
        if !(slope < 0.0) {
            return Ok(StepOutcome::Stalled);
        }
        let alpha0 = if secant { 1.0 } else { self.alpha.unwrap_or(1.0) };
        match line_search(obj, params, &d, loss, slope, alpha0) {
            Some((alpha, _)) => {
                self.prev = Some((params.to_vec(), grad.to_vec()));
                axpy(alpha, &d, params);
                self.alpha = Some(alpha);
                Ok(StepOutcome::Moved)
            }
            None => Ok(StepOutcome::Stalled),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CgUpdate {
    FletcherReeves,
    /// Hestenes-Stiefel with Beale's three-term recurrence and Powell's
    /// restart test `|g_{k−1}·g_k| ≥ 0.2·|g_k|²`.
    PowellBeale,
}

struct ConjugateGradient {
    update: CgUpdate,
    prev: Option<(Vec<f64>, Vec<f64>)>,
    /// Restart direction `d_t` and gradient change `y_t` for Beale's term.
    restart: Option<(Vec<f64>, Vec<f64>)>,
    since_restart: usize,
    alpha: Option<f64>,
}

const POWELL_ORTHOGONALITY: f64 = 0.2;

impl ConjugateGradient {
    fn new(update: CgUpdate) -> Self {
        ConjugateGradient {
            update,
            prev: None,
            restart: None,
            since_restart: 0,
            alpha: None,
        }
    }

    fn direction(&mut self, grad: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
        let Some((g_prev, d_prev)) = self.prev.take() else {
            self.restart = None;
            self.since_restart = 0;
            return d;
        };
        if self.since_restart >= grad.len() {
            self.restart = None;
            self.since_restart = 0;
            return d;
        }
        match self.update {
            CgUpdate::FletcherReeves => {
                let beta = dot(grad, grad) / dot(&g_prev, &g_prev);
                if beta.is_finite() {
                    axpy(beta, &d_prev, &mut d);
                }
            }
            CgUpdate::PowellBeale => {
                let y: Vec<f64> = grad.iter().zip(&g_prev).map(|(a, b)| a - b).collect();
                let dy = dot(&d_prev, &y);
                let beta = if dy.abs() > 0.0 { dot(grad, &y) / dy } else { 0.0 };
                let orthogonality_lost = dot(&g_prev, grad).abs() >= POWELL_ORTHOGONALITY * dot(grad, grad);
                if beta.is_finite() {
                    axpy(beta, &d_prev, &mut d);
                }
                match &self.restart {
                    Some((d_t, y_t)) if !orthogonality_lost => {
                        let denom = dot(d_t, y_t);
                        let gamma = if denom.abs() > 0.0 { dot(grad, y_t) / denom } else { 0.0 };
                        if gamma.is_finite() {
                            axpy(gamma, d_t, &mut d);
                        }
                    }
                    _ => {
                        self.restart = Some((d_prev, y));
                        self.since_restart = 0;
                    }
                }
            }
        }
        d
    }
}

impl Optimizer for ConjugateGradient {
    fn step(&mut self, obj: &Objective, params: &mut [f64], loss: f64, grad: &[f64]) -> Result<StepOutcome> {
        let mut d = self.direction(grad);
        let mut slope = dot(&d, grad);
        if !(slope < 0.0) {
            d = grad.iter().map(|g| -g).collect();
            slope = dot(&d, grad);
            self.restart = None;
            self.since_restart = 0;
        }
        if !(slope < 0.0) {
            return Ok(StepOutcome::Stalled);
        }
        match line_search(obj, params, &d, loss, slope, self.alpha.unwrap_or(1.0)) {
            Some((alpha, _)) => {
                axpy(alpha, &d, params);
                self.prev = Some((grad.to_vec(), d));
                self.alpha = Some(alpha);
                self.since_restart += 1;
                Ok(StepOutcome::Moved)
            }
            None => {
                self.restart = None;
                Ok(StepOutcome::Stalled)
            }
        }
    }
}

/// Scaled conjugate gradient: a Levenberg-Marquardt style trust scaling of
/// the conjugate direction replaces the line search. Curvature along the
/// direction comes from a finite difference of gradients.
struct Scg {
    p: Vec<f64>,
    r: Vec<f64>,
    s: Vec<f64>,
    delta: f64,
    lambda: f64,
    lambda_bar: f64,
    success: bool,
    k: usize,
}

const SCG_SIGMA: f64 = 5e-5;
const SCG_LAMBDA0: f64 = 5e-7;

impl Scg {
    fn new() -> Self {
        Scg {
            p: Vec::new(),
            r: Vec::new(),
            s: Vec::new(),
            delta: 0.0,
            lambda: SCG_LAMBDA0,
            lambda_bar: 0.0,
            success: true,
            k: 0,
        }
    }
}

impl Optimizer for Scg {
    fn step(&mut self, obj: &Objective, params: &mut [f64], loss: f64, grad: &[f64]) -> Result<StepOutcome> {
        let n = params.len();
        if self.k == 0 {
            self.r = grad.iter().map(|g| -g).collect();
            self.p = self.r.clone();
            self.success = true;
            self.k = 1;
        }
        let p_norm2 = dot(&self.p, &self.p);
        if !(p_norm2 > 0.0) || norm(&self.r) == 0.0 {
            return Ok(StepOutcome::Stalled);
        }

        if self.success {
            let sigma = SCG_SIGMA / p_norm2.sqrt();
            let (_, g_shift) = obj.loss_grad(&offset(params, sigma, &self.p));
            self.s = g_shift.iter().zip(grad).map(|(a, b)| (a - b) / sigma).collect();
            self.delta = dot(&self.p, &self.s);
        }

        let scale = self.lambda - self.lambda_bar;
        axpy(scale, &self.p.clone(), &mut self.s);
        self.delta += scale * p_norm2;

        if self.delta <= 0.0 {
            let fix = self.lambda - 2.0 * self.delta / p_norm2;
            axpy(fix, &self.p.clone(), &mut self.s);
            self.lambda_bar = 2.0 * (self.lambda - self.delta / p_norm2);
            self.delta = -self.delta + self.lambda * p_norm2;
            self.lambda = self.lambda_bar;
        }

        let mu = dot(&self.p, &self.r);
        let alpha = mu / self.delta;
        let trial = offset(params, alpha, &self.p);
        let trial_loss = obj.loss(&trial);
        let comparison = 2.0 * self.delta * (loss - trial_loss) / (mu * mu);

        let outcome = if comparison >= 0.0 {
            params.copy_from_slice(&trial);
            let (_, g_new) = obj.loss_grad(params);
            let r_new: Vec<f64> = g_new.iter().map(|g| -g).collect();
            self.lambda_bar = 0.0;
            self.success = true;
            if self.k.is_multiple_of(n) {
                self.p = r_new.clone();
            } else {
                let beta = (dot(&r_new, &r_new) - dot(&r_new, &self.r)) / mu;
                let p_old = std::mem::take(&mut self.p);
                self.p = r_new.iter().zip(&p_old).map(|(r, p)| r + beta * p).collect();
            }
            self.r = r_new;
            if comparison >= 0.75 {
                self.lambda *= 0.25;
            }
            StepOutcome::Moved
        } else {
            self.lambda_bar = self.lambda;
            self.success = false;
            StepOutcome::Stalled
        };

        if !(comparison >= 0.25) {
            self.lambda += self.delta * (1.0 - comparison.max(-1e300)) / p_norm2;
            if !self.lambda.is_finite() {
                self.lambda = f64::MAX;
            }
        }
        self.k += 1;
        Ok(outcome)
    }
}
