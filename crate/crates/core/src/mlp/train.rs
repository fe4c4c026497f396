use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SplitIndices};
use crate::error::{Error, Result};
use crate::linalg::{norm, SeededRng};

use super::optim::{make_optimizer, Objective, StepOutcome};
use super::{init_network, MlpNetwork, MlpShape, TransferFn};

/// The ten supported training algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrainAlgorithm {
    LevenbergMarquardt,
    QuasiNewtonBfgs,
    ResilientBackprop,
    GdAdaptiveLrMomentum,
    ScaledConjugateGradient,
    ConjugateGradientPowellBeale,
    OneStepSecant,
    ConjugateGradientFletcherReeves,
    GdMomentum,
    GradientDescent,
}

impl TrainAlgorithm {
    pub const ALL: [TrainAlgorithm; 10] = [
        TrainAlgorithm::LevenbergMarquardt,
        TrainAlgorithm::QuasiNewtonBfgs,
        TrainAlgorithm::ResilientBackprop,
        TrainAlgorithm::GdAdaptiveLrMomentum,
        TrainAlgorithm::ScaledConjugateGradient,
        TrainAlgorithm::ConjugateGradientPowellBeale,
        TrainAlgorithm::OneStepSecant,
        TrainAlgorithm::ConjugateGradientFletcherReeves,
        TrainAlgorithm::GdMomentum,
        TrainAlgorithm::GradientDescent,
    ];

    /// Short flag value, e.g. `lm` or `scg`.
    pub fn short_name(self) -> &'static str {
        match self {
            TrainAlgorithm::LevenbergMarquardt => "lm",
            TrainAlgorithm::QuasiNewtonBfgs => "bfg",
            TrainAlgorithm::ResilientBackprop => "rp",
            TrainAlgorithm::GdAdaptiveLrMomentum => "gdx",
            TrainAlgorithm::ScaledConjugateGradient => "scg",
            TrainAlgorithm::ConjugateGradientPowellBeale => "cgb",
            TrainAlgorithm::OneStepSecant => "oss",
            TrainAlgorithm::ConjugateGradientFletcherReeves => "cgf",
            TrainAlgorithm::GdMomentum => "gdm",
            TrainAlgorithm::GradientDescent => "gd",
        }
    }

    /// Conventional toolbox name, e.g. `trainlm`.
    pub fn alias(self) -> String {
        format!("train{}", self.short_name())
    }
}

impl fmt::Display for TrainAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.alias())
    }
}

impl FromStr for TrainAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let short = lower.strip_prefix("train").unwrap_or(&lower);
        let short = if short == "seg" { "scg" } else { short };
        TrainAlgorithm::ALL
            .into_iter()
            .find(|a| a.short_name() == short)
            .ok_or_else(|| Error::Config(format!("unknown training algorithm {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: TrainAlgorithm,
    pub max_epochs: usize,
    pub goal_mse: f64,
    /// Consecutive epochs without a new best validation MSE before stopping.
    pub patience: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub lm_mu0: f64,
    pub lm_mu_inc: f64,
    pub lm_mu_dec: f64,
    pub lm_mu_max: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: TrainAlgorithm::LevenbergMarquardt,
            max_epochs: 1000,
            goal_mse: 0.0,
            patience: 6,
            learning_rate: 0.01,
            momentum: 0.9,
            lm_mu0: 0.001,
            lm_mu_inc: 10.0,
            lm_mu_dec: 0.1,
            lm_mu_max: 1e10,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_algorithm(algorithm: TrainAlgorithm) -> Self {
        TrainConfig {
            algorithm,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.goal_mse >= 0.0) {
            return bad("goal_mse must be >= 0");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.lm_mu0 > 0.0 && self.lm_mu_max > 0.0) {
            return bad("lm_mu0 and lm_mu_max must be positive");
        }
        if !(self.lm_mu_inc > 1.0) {
            return bad("lm_mu_inc must exceed 1");
        }
        if !(self.lm_mu_dec > 0.0 && self.lm_mu_dec < 1.0) {
            return bad("lm_mu_dec must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    GoalMet,
    MaxEpochs,
    ValidationStop,
    MuOverflow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub test_mse: Option<f64>,
    pub gradient_norm: f64,
    pub mu: Option<f64>,
}

/// Per-epoch history of a training run. Epoch 0 is the initial network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainRecord {
    pub fn best(&self) -> &EpochStats {
        &self.epochs[self.best_epoch]
    }

    pub fn best_val_mse(&self) -> f64 {
        self.best().val_mse
    }

    pub fn final_epoch(&self) -> usize {
        self.epochs.last().map_or(0, |e| e.epoch)
    }
}

/// Validation-failure counter: stops after `patience` epochs whose
/// validation MSE exceeds the best, with no new best in between. An epoch
/// that ties the best neither counts nor resets the counter.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    failures: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            failures: 0,
        }
    }

    /// Records an epoch's validation MSE; returns true when training should stop.
    pub fn observe(&mut self, epoch: usize, val_mse: f64) -> bool {
        if val_mse < self.best {
            self.best = val_mse;
            self.best_epoch = epoch;
            self.failures = 0;
            false
        } else {
            if val_mse > self.best {
                self.failures += 1;
            }
            self.failures >= self.patience
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn is_best(&self, epoch: usize) -> bool {
        self.best_epoch == epoch
    }
}

/// Initializes a network from `cfg.rng_seed` and trains it.
pub fn fit(
    shape: MlpShape,
    f_hidden: TransferFn,
    f_out: TransferFn,
    data: &Dataset,
    split: &SplitIndices,
    cfg: &TrainConfig,
) -> Result<(MlpNetwork, TrainRecord)> {
    let net = init_network(shape, f_hidden, f_out, &mut SeededRng::new(cfg.rng_seed))?;
    train(&net, data, split, cfg)
}

/// Full-batch training with validation early stopping.
///
/// `data` must already be normalized. The returned network always carries
/// the parameters of the best-validation epoch.
pub fn train(
    net: &MlpNetwork,
    data: &Dataset,
    split: &SplitIndices,
    cfg: &TrainConfig,
) -> Result<(MlpNetwork, TrainRecord)> {
    train_with_hook(net, data, split, cfg, |_, val| val)
}

/// Like [`train`], but the validation MSE used for early stopping is
/// `val_hook(epoch, measured)`.
pub fn train_with_hook<F>(
    net: &MlpNetwork,
    data: &Dataset,
    split: &SplitIndices,
    cfg: &TrainConfig,
    mut val_hook: F,
) -> Result<(MlpNetwork, TrainRecord)>
where
    F: FnMut(usize, f64) -> f64,
{
    cfg.validate()?;
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::Config(
            "training and validation partitions must be non-empty".into(),
        ));
    }
    if let Some(&i) = split
        .train
        .iter()
        .chain(&split.val)
        .chain(&split.test)
        .find(|&&i| i >= data.len())
    {
        return Err(Error::Coverage(i));
    }

    let train_set = data.subset(&split.train);
    let val_set = data.subset(&split.val);
    let test_set = (!split.test.is_empty()).then(|| data.subset(&split.test));
    let objective = Objective::new(net, &train_set.features, &train_set.targets)?;
    let evaluate = |params: &[f64]| -> Result<(f64, Option<f64>)> {
        let candidate = net.with_params(params);
        let val = candidate.mse(&val_set.features, &val_set.targets)?;
        let test = match &test_set {
            Some(t) => Some(candidate.mse(&t.features, &t.targets)?),
            None => None,
        };
        Ok((val, test))
    };

    let mut optimizer = make_optimizer(cfg, net.n_params());
    let mut params = net.params();
    let mut best_params = params.clone();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut epochs = Vec::new();

    let (mut loss, mut grad) = objective.loss_grad(&params);
    let mut epoch = 0;
    let stop_reason = loop {
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        let (val_mse, test_mse) = evaluate(&params)?;
        epochs.push(EpochStats {
            epoch,
            train_mse: loss,
            val_mse,
            test_mse,
            gradient_norm: norm(&grad),
            mu: optimizer.mu(),
        });
        let stop_on_val = stopper.observe(epoch, val_hook(epoch, val_mse));
        if stopper.is_best(epoch) {
            best_params.copy_from_slice(&params);
        }
        if loss <= cfg.goal_mse {
            break StopReason::GoalMet;
        }
        if stop_on_val {
            break StopReason::ValidationStop;
        }
        if epoch >= cfg.max_epochs {
            break StopReason::MaxEpochs;
        }

        match optimizer.step(&objective, &mut params, loss, &grad)? {
            StepOutcome::MuOverflow => break StopReason::MuOverflow,
            StepOutcome::Moved | StepOutcome::Stalled => {}
        }
        epoch += 1;
        (loss, grad) = objective.loss_grad(&params);
    };

    log::debug!("{} stopped at epoch {epoch}: {stop_reason:?}", cfg.algorithm);
    let record = TrainRecord {
        epochs,
        best_epoch: stopper.best_epoch(),
        stop_reason,
    };
    Ok((net.with_params(&best_params), record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::split_by_index;
    use crate::linalg::Matrix;

    #[test]
    fn algorithm_names_round_trip() {
        for a in TrainAlgorithm::ALL {
            assert_eq!(a.short_name().parse::<TrainAlgorithm>().unwrap(), a);
            assert_eq!(a.alias().parse::<TrainAlgorithm>().unwrap(), a);
        }
        assert_eq!(
            "Trainseg".parse::<TrainAlgorithm>().unwrap(),
            TrainAlgorithm::ScaledConjugateGradient
        );
        assert!("trainfoo".parse::<TrainAlgorithm>().is_err());
    }

    #[test]
    fn early_stopping_counts_consecutive_failures() {
        let mut es = EarlyStopping::new(3);
        let vals = [0.5, 0.4, 0.45, 0.3, 0.31, 0.32, 0.33, 0.2];
        let stops: Vec<bool> = vals.iter().enumerate().map(|(e, v)| es.observe(e, *v)).collect();
        assert_eq!(stops, vec![false, false, false, false, false, false, true, false]);
        assert_eq!(es.best_epoch(), 7);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            momentum: 1.0,
            ..TrainConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = TrainConfig {
            lm_mu_dec: 1.5,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    fn toy_data() -> (Dataset, SplitIndices) {
        let mut rng = SeededRng::new(2);
        let n = 40;
        let mut x = Matrix::zeros(n, 6);
        let mut t = Matrix::zeros(n, 3);
        for i in 0..n {
            for j in 0..6 {
                x[(i, j)] = rng.uniform(-1.0, 1.0);
            }
            let c = if x[(i, 0)] > 0.3 {
                0
            } else if x[(i, 0)] > -0.3 {
                1
            } else {
                2
            };
            t[(i, c)] = 1.0;
        }
        let ds = Dataset {
            features: x,
            targets: t,
            variety_vocab: vec!["A".into()],
            normalizer: None,
        };
        let split = split_by_index((0..28).collect(), (28..34).collect(), (34..40).collect(), n).unwrap();
        (ds, split)
    }

    #[test]
    fn huge_goal_stops_immediately() {
        let (ds, split) = toy_data();
        let cfg = TrainConfig {
            goal_mse: f64::MAX,
            ..TrainConfig::default()
        };
        let (_, rec) = fit(
            MlpShape::severity(4),
            TransferFn::LogSigmoid,
            TransferFn::Linear,
            &ds,
            &split,
            &cfg,
        )
        .unwrap();
        assert_eq!(rec.stop_reason, StopReason::GoalMet);
        assert_eq!(rec.epochs.len(), 1);
    }

    #[test]
    fn stub_validation_sequence_triggers_stop_at_best() {
        let (ds, split) = toy_data();
        let cfg = TrainConfig {
            algorithm: TrainAlgorithm::GradientDescent,
            patience: 4,
            ..TrainConfig::default()
        };
        let net = init_network(
            MlpShape::severity(3),
            TransferFn::LogSigmoid,
            TransferFn::Linear,
            &mut SeededRng::new(1),
        )
        .unwrap();
        // falls until epoch 5, then rises
        let seq = |e: usize| {
            if e <= 5 {
                1.0 - 0.1 * e as f64
            } else {
                0.5 + 0.01 * e as f64
            }
        };
        let (trained, rec) = train_with_hook(&net, &ds, &split, &cfg, |e, _| seq(e)).unwrap();
        assert_eq!(rec.stop_reason, StopReason::ValidationStop);
        assert_eq!(rec.best_epoch, 5);
        assert_eq!(rec.final_epoch(), 9);
        let val5 = trained
            .mse(&ds.subset(&split.val).features, &ds.subset(&split.val).targets)
            .unwrap();
        assert_eq!(val5, rec.epochs[5].val_mse);
    }

    #[test]
    fn gd_momentum_zero_matches_plain_gd() {
        let (ds, split) = toy_data();
        let base = TrainConfig {
            max_epochs: 50,
            patience: 1000,
            learning_rate: 0.2,
            ..TrainConfig::default()
        };
        let gd = TrainConfig {
            algorithm: TrainAlgorithm::GradientDescent,
            ..base.clone()
        };
        let gdm = TrainConfig {
            algorithm: TrainAlgorithm::GdMomentum,
            momentum: 0.0,
            ..base
        };
        let shape = MlpShape::severity(5);
        let a = fit(
            shape,
            TransferFn::HyperbolicTangentSigmoid,
            TransferFn::Linear,
            &ds,
            &split,
            &gd,
        )
        .unwrap();
        let b = fit(
            shape,
            TransferFn::HyperbolicTangentSigmoid,
            TransferFn::Linear,
            &ds,
            &split,
            &gdm,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_algorithm_reduces_training_error() {
        let (ds, split) = toy_data();
        for algorithm in TrainAlgorithm::ALL {
            let cfg = TrainConfig {
                algorithm,
                max_epochs: 60,
                patience: 1000,
                learning_rate: 0.1,
                ..TrainConfig::default()
            };
            let (_, rec) = fit(
                MlpShape::severity(5),
                TransferFn::LogSigmoid,
                TransferFn::Linear,
                &ds,
                &split,
                &cfg,
            )
            .unwrap();
            let first = rec.epochs[0].train_mse;
            let last = rec.epochs.last().unwrap().train_mse;
            assert!(last < first, "{algorithm}: {first} -> {last}");
        }
    }

    #[test]
    fn lm_accepted_losses_are_monotone() {
        let (ds, split) = toy_data();
        let cfg = TrainConfig {
            max_epochs: 40,
            patience: 1000,
            ..TrainConfig::default()
        };
        let (_, rec) = fit(
            MlpShape::severity(6),
            TransferFn::LogSigmoid,
            TransferFn::Linear,
            &ds,
            &split,
            &cfg,
        )
        .unwrap();
        for w in rec.epochs.windows(2) {
            assert!(w[1].train_mse < w[0].train_mse);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let (ds, split) = toy_data();
        let cfg = TrainConfig {
            algorithm: TrainAlgorithm::GradientDescent,
            learning_rate: 1e6,
            patience: 1000,
            max_epochs: 200,
            ..TrainConfig::default()
        };
        let err = fit(
            MlpShape::severity(4),
            TransferFn::Linear,
            TransferFn::Linear,
            &ds,
            &split,
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }));
    }
}
