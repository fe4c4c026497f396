//! Hyperparameter sweeps, the staged MLP search and the three-family
//! comparison.
//!
//! A sweep trains one model per grid point and repetition. Repetition `r`
//! initializes from seed `base_seed + r` at every grid point, so grid points
//! are compared on equal footing, and each row reports its best repetition.
//! Failed runs (divergence, singular systems) become rows with an error
//! message instead of aborting the sweep.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::RawRecord;
use crate::error::{Error, Result};
use crate::grnn::train_grnn;
use crate::metrics::{compute_metrics, MetricsReport};
use crate::mlp::{fit, MlpNetwork, MlpShape, TrainAlgorithm, TrainConfig, TrainRecord, TransferFn};
use crate::pipeline::{prepare, DivideFn, PipelineConfig, Prepared};
use crate::rbfnn::{train_rbf, GrowthRecord, RbfNetwork, RbfTrainConfig};

pub const DEFAULT_REPETITIONS: usize = 7;
pub const MLP_HIDDEN_GRID: std::ops::RangeInclusive<usize> = 3..=13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelFamily {
    #[serde(rename = "MLP")]
    Mlp,
    #[serde(rename = "RBFNN")]
    Rbf,
    #[serde(rename = "GRNN")]
    Grnn,
}

impl ModelFamily {
    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Mlp => "MLP",
            ModelFamily::Rbf => "RBFNN",
            ModelFamily::Grnn => "GRNN",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(ModelFamily::Mlp),
            "rbf" | "rbfnn" => Ok(ModelFamily::Rbf),
            "grnn" => Ok(ModelFamily::Grnn),
            _ => Err(Error::Config(format!("unknown model family {s:?}"))),
        }
    }
}

/// Weight-update rule used by the gradient-descent algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LearningRule {
    /// Gradient descent with momentum.
    Momentum,
    /// Plain gradient descent.
    Plain,
}

impl LearningRule {
    pub fn name(self) -> &'static str {
        match self {
            LearningRule::Momentum => "learngdm",
            LearningRule::Plain => "learngd",
        }
    }

    pub fn momentum(self) -> f64 {
        match self {
            LearningRule::Momentum => 0.9,
            LearningRule::Plain => 0.0,
        }
    }
}

impl FromStr for LearningRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "learngdm" | "gdm" => Ok(LearningRule::Momentum),
            "learngd" | "gd" => Ok(LearningRule::Plain),
            _ => Err(Error::Config(format!("unknown learning function {s:?}"))),
        }
    }
}

/// Everything that defines one MLP training run apart from its seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSetup {
    pub hidden: usize,
    pub f_hidden: TransferFn,
    pub f_out: TransferFn,
    pub divide: DivideFn,
    pub learning: LearningRule,
    /// Training settings; `momentum` follows `learning` and `rng_seed` is
    /// replaced by the run seed.
    pub train: TrainConfig,
}

impl Default for MlpSetup {
    /// Eight hidden neurons, logsig/purelin, Levenberg-Marquardt.
    fn default() -> Self {
        MlpSetup {
            hidden: 8,
            f_hidden: TransferFn::LogSigmoid,
            f_out: TransferFn::Linear,
            divide: DivideFn::Random,
            learning: LearningRule::Momentum,
            train: TrainConfig::default(),
        }
    }
}

impl MlpSetup {
    /// Starting point of the staged search: tansig in both layers.
    pub fn search_baseline() -> Self {
        MlpSetup {
            f_hidden: TransferFn::HyperbolicTangentSigmoid,
            f_out: TransferFn::HyperbolicTangentSigmoid,
            ..MlpSetup::default()
        }
    }

    pub fn algorithm(&self) -> TrainAlgorithm {
        self.train.algorithm
    }

    pub fn shape(&self) -> MlpShape {
        MlpShape::severity(self.hidden)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            momentum: self.learning.momentum(),
            rng_seed: seed,
            ..self.train.clone()
        }
    }

    pub fn fit(&self, data: &Prepared, seed: u64) -> Result<(MlpNetwork, TrainRecord)> {
        fit(
            self.shape(),
            self.f_hidden,
            self.f_out,
            &data.data,
            &data.split,
            &self.train_config(seed),
        )
    }
}

/// Grows an RBF network and keeps the neuron count with the lowest
/// validation MSE. `max_neurons` defaults to `min(n_train, 2000)`.
pub fn fit_rbf_selected(
    data: &Prepared,
    spread: f64,
    max_neurons: Option<usize>,
) -> Result<(RbfNetwork, GrowthRecord)> {
    let mut cfg = RbfTrainConfig::for_training_size(data.split.train.len(), spread);
    if let Some(k) = max_neurons {
        cfg.max_neurons = k;
    }
    let (net, growth) = train_rbf(&data.data, &data.split.train, &data.split.val, &cfg)?;
    let best = growth.best_validation().map_or(net.n_neurons(), |p| p.neurons);
    if best == net.n_neurons() {
        return Ok((net, growth));
    }
    cfg.max_neurons = best;
    let (net, _) = train_rbf(&data.data, &data.split.train, &data.split.val, &cfg)?;
    Ok((net, growth))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepFamily {
    MlpHiddenNeurons,
    MlpDivideFn,
    MlpTransferFn,
    MlpLearningStage,
    MlpTrainAlgorithm,
    RbfSpread,
    GrnnSigma,
}

impl SweepFamily {
    pub fn name(self) -> &'static str {
        match self {
            SweepFamily::MlpHiddenNeurons => "mlp-hidden",
            SweepFamily::MlpDivideFn => "mlp-divide",
            SweepFamily::MlpTransferFn => "mlp-transfer",
            SweepFamily::MlpLearningStage => "mlp-learning",
            SweepFamily::MlpTrainAlgorithm => "mlp-algorithm",
            SweepFamily::RbfSpread => "rbf-spread",
            SweepFamily::GrnnSigma => "grnn-sigma",
        }
    }

    /// Column header for the grid value.
    pub fn grid_column(self) -> &'static str {
        match self {
            SweepFamily::MlpHiddenNeurons => "hidden_neurons",
            SweepFamily::MlpDivideFn => "divide_function",
            SweepFamily::MlpTransferFn => "transfer_functions",
            SweepFamily::MlpLearningStage => "learning_function",
            SweepFamily::MlpTrainAlgorithm => "training_algorithm",
            SweepFamily::RbfSpread => "spread",
            SweepFamily::GrnnSigma => "smoothing_factor",
        }
    }

    pub fn is_mlp(self) -> bool {
        !matches!(self, SweepFamily::RbfSpread | SweepFamily::GrnnSigma)
    }

    /// The full grid for this family.
    pub fn default_grid(self) -> Vec<GridValue> {
        match self {
            SweepFamily::MlpHiddenNeurons => MLP_HIDDEN_GRID.map(GridValue::Hidden).collect(),
            SweepFamily::MlpDivideFn => vec![GridValue::Divide(DivideFn::Random), GridValue::Divide(DivideFn::Index)],
            SweepFamily::MlpTransferFn => TransferFn::ALL
                .iter()
                .flat_map(|&h| TransferFn::ALL.iter().map(move |&o| GridValue::Transfer(h, o)))
                .collect(),
            SweepFamily::MlpLearningStage => vec![
                GridValue::Learning(LearningRule::Momentum),
                GridValue::Learning(LearningRule::Plain),
            ],
            SweepFamily::MlpTrainAlgorithm => TrainAlgorithm::ALL.iter().map(|&a| GridValue::Algorithm(a)).collect(),
            SweepFamily::RbfSpread => (1..=20).map(|i| GridValue::Spread(i as f64 / 10.0)).collect(),
            SweepFamily::GrnnSigma => (1..=10).map(|i| GridValue::Sigma(i as f64 / 10.0)).collect(),
        }
    }
}

impl FromStr for SweepFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SweepFamily::MlpHiddenNeurons,
            SweepFamily::MlpDivideFn,
            SweepFamily::MlpTransferFn,
            SweepFamily::MlpLearningStage,
            SweepFamily::MlpTrainAlgorithm,
            SweepFamily::RbfSpread,
            SweepFamily::GrnnSigma,
        ]
        .into_iter()
        .find(|f| f.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown sweep family {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GridValue {
    Hidden(usize),
    Divide(DivideFn),
    Transfer(TransferFn, TransferFn),
    Learning(LearningRule),
    Algorithm(TrainAlgorithm),
    Spread(f64),
    Sigma(f64),
}

impl GridValue {
    fn family(self) -> SweepFamily {
        match self {
            GridValue::Hidden(_) => SweepFamily::MlpHiddenNeurons,
            GridValue::Divide(_) => SweepFamily::MlpDivideFn,
            GridValue::Transfer(..) => SweepFamily::MlpTransferFn,
            GridValue::Learning(_) => SweepFamily::MlpLearningStage,
            GridValue::Algorithm(_) => SweepFamily::MlpTrainAlgorithm,
            GridValue::Spread(_) => SweepFamily::RbfSpread,
            GridValue::Sigma(_) => SweepFamily::GrnnSigma,
        }
    }

    /// `base` with this grid value substituted.
    pub fn apply(self, base: &MlpSetup) -> MlpSetup {
        let mut s = base.clone();
        match self {
            GridValue::Hidden(h) => s.hidden = h,
            GridValue::Divide(d) => s.divide = d,
            GridValue::Transfer(h, o) => {
                s.f_hidden = h;
                s.f_out = o;
            }
            GridValue::Learning(l) => {
                s.learning = l;
                s.train.momentum = l.momentum();
            }
            GridValue::Algorithm(a) => s.train.algorithm = a,
            GridValue::Spread(_) | GridValue::Sigma(_) => {}
        }
        s
    }
}

impl fmt::Display for GridValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridValue::Hidden(h) => write!(f, "{h}"),
            GridValue::Divide(d) => f.write_str(d.name()),
            GridValue::Transfer(h, o) => write!(f, "{h}/{o}"),
            GridValue::Learning(l) => f.write_str(l.name()),
            GridValue::Algorithm(a) => f.write_str(&a.alias()),
            GridValue::Spread(v) | GridValue::Sigma(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub family: SweepFamily,
    pub grid: Vec<GridValue>,
    /// Configuration the grid value is substituted into (MLP families).
    pub mlp: MlpSetup,
    pub repetitions: usize,
    pub base_seed: u64,
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
}

impl SweepSpec {
    pub fn new(family: SweepFamily, mlp: MlpSetup, base_seed: u64) -> Self {
        SweepSpec {
            family,
            grid: family.default_grid(),
            mlp,
            repetitions: DEFAULT_REPETITIONS,
            base_seed,
            jobs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if let Some(v) = self.grid.iter().find(|v| v.family() != self.family) {
            return Err(Error::Config(format!(
                "grid value {v} does not belong to {}",
                self.family.name()
            )));
        }
        self.mlp.train.validate()
    }

    /// RBF and GRNN training is deterministic, so one repetition suffices.
    fn effective_repetitions(&self) -> usize {
        if self.family.is_mlp() {
            self.repetitions
        } else {
            1
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: GridValue,
    /// Hidden neurons of the MLP, or neurons of the selected RBF network.
    pub neurons: Option<usize>,
    pub best_val_mse: Option<f64>,
    pub train_mse: Option<f64>,
    pub test_mse: Option<f64>,
    /// Epoch of the best validation MSE (MLP only).
    pub epoch: Option<usize>,
    /// Seed of the reported repetition.
    pub seed: u64,
    /// Parameter count, used to break validation ties.
    pub model_size: usize,
    pub seconds: f64,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(value: GridValue, seed: u64, seconds: f64, err: &Error) -> Self {
        SweepRow {
            value,
            neurons: None,
            best_val_mse: None,
            train_mse: None,
            test_mse: None,
            epoch: None,
            seed,
            model_size: 0,
            seconds,
            error: Some(err.to_string()),
        }
    }

    fn is_better_than(&self, other: &SweepRow) -> bool {
        match (self.best_val_mse, other.best_val_mse) {
            (Some(a), Some(b)) => a < b || (a == b && self.model_size < other.model_size),
            (Some(_), None) => true,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub family: SweepFamily,
    /// In grid order.
    pub rows: Vec<SweepRow>,
    /// Index of the winning row; `None` if every row failed.
    pub selected: Option<usize>,
}

impl SweepResult {
    pub fn selected_row(&self) -> Option<&SweepRow> {
        self.selected.map(|i| &self.rows[i])
    }
}

/// Lowest validation MSE, then smaller model, then earlier grid position.
pub fn select_row(rows: &[SweepRow]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        if row.best_val_mse.is_some_and(f64::is_finite) && best.is_none_or(|b| row.is_better_than(&rows[b])) {
            best = Some(i);
        }
    }
    best
}

/// Prepared data for every divide function, built once per sweep.
#[derive(Clone, Debug)]
pub struct SweepData {
    pub pipeline: PipelineConfig,
    random: Prepared,
    index: Prepared,
}

impl SweepData {
    pub fn new(records: &[RawRecord], pipeline: &PipelineConfig) -> Result<Self> {
        let with = |divide| {
            prepare(
                records,
                &PipelineConfig {
                    divide,
                    ..pipeline.clone()
                },
            )
        };
        Ok(SweepData {
            pipeline: pipeline.clone(),
            random: with(DivideFn::Random)?,
            index: with(DivideFn::Index)?,
        })
    }

    pub fn prepared(&self, divide: DivideFn) -> &Prepared {
        match divide {
            DivideFn::Random => &self.random,
            DivideFn::Index => &self.index,
        }
    }

    /// Data divided by the pipeline's own divide function.
    pub fn default_prepared(&self) -> &Prepared {
        self.prepared(self.pipeline.divide)
    }
}

fn partition_mse(
    outputs: impl Fn(&crate::linalg::Matrix) -> crate::linalg::Matrix,
    data: &Prepared,
    idx: &[usize],
) -> Option<f64> {
    if idx.is_empty() {
        return None;
    }
    let part = data.data.subset(idx);
    let y = outputs(&part.features);
    let n = y.as_slice().len() as f64;
    Some(
        y.as_slice()
            .iter()
            .zip(part.targets.as_slice())
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            / n,
    )
}

fn run_one(spec: &SweepSpec, data: &SweepData, value: GridValue, seed: u64) -> SweepRow {
    let start = Instant::now();
    let result = (|| -> Result<SweepRow> {
        match value {
            GridValue::Spread(spread) => {
                let prepared = data.default_prepared();
                let (net, growth) = fit_rbf_selected(prepared, spread, None)?;
                let best = growth.best_validation().ok_or(Error::EmptyPartition("validation"))?;
                Ok(SweepRow {
                    value,
                    neurons: Some(net.n_neurons()),
                    best_val_mse: best.val_mse,
                    train_mse: Some(best.train_mse),
                    test_mse: partition_mse(|x| net.predict_all(x), prepared, &prepared.split.test),
                    epoch: None,
                    seed,
                    model_size: net.n_neurons(),
                    seconds: 0.0,
                    error: None,
                })
            }
            GridValue::Sigma(sigma) => {
                let prepared = data.default_prepared();
                let model = train_grnn(&prepared.data, &prepared.split.train, sigma)?;
                let mse = |idx: &[usize]| partition_mse(|x| model.predict_all(x), prepared, idx);
                Ok(SweepRow {
                    value,
                    neurons: None,
                    best_val_mse: mse(&prepared.split.val),
                    train_mse: mse(&prepared.split.train),
                    test_mse: mse(&prepared.split.test),
                    epoch: None,
                    seed,
                    model_size: prepared.split.train.len(),
                    seconds: 0.0,
                    error: None,
                })
            }
            _ => {
                let setup = value.apply(&spec.mlp);
                let prepared = data.prepared(setup.divide);
                let (net, record) = setup.fit(prepared, seed)?;
                let best = record.best();
                Ok(SweepRow {
                    value,
                    neurons: Some(setup.hidden),
                    best_val_mse: Some(best.val_mse),
                    train_mse: Some(best.train_mse),
                    test_mse: best.test_mse,
                    epoch: Some(best.epoch),
                    seed,
                    model_size: net.n_params(),
                    seconds: 0.0,
                    error: None,
                })
            }
        }
    })();
    let seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(row) => SweepRow { seconds, ..row },
        Err(e) => {
            log::warn!("{} = {value}, seed {seed}: {e}", spec.family.name());
            SweepRow::failed(value, seed, seconds, &e)
        }
    }
}

fn with_pool<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(work()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(work))
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}"))),
    }
}

/// Trains every grid point `spec.repetitions` times and reports the best
/// repetition of each. Output is independent of scheduling.
pub fn run_sweep(spec: &SweepSpec, data: &SweepData) -> Result<SweepResult> {
    spec.validate()?;
    let reps = spec.effective_repetitions();
    let tasks: Vec<(usize, u64)> = (0..spec.grid.len())
        .flat_map(|g| (0..reps as u64).map(move |r| (g, r)))
        .collect();
    let runs: Vec<SweepRow> = with_pool(spec.jobs, || {
        tasks
            .par_iter()
            .map(|&(g, r)| run_one(spec, data, spec.grid[g], spec.base_seed.wrapping_add(r)))
            .collect()
    })?;
    let rows: Vec<SweepRow> = runs
        .chunks(reps)
        .map(|group| {
            let best = select_row(group).unwrap_or(0);
            group[best].clone()
        })
        .collect();
    let selected = select_row(&rows);
    Ok(SweepResult {
        family: spec.family,
        rows,
        selected,
    })
}

pub const STAGES: [SweepFamily; 5] = [
    SweepFamily::MlpHiddenNeurons,
    SweepFamily::MlpDivideFn,
    SweepFamily::MlpTransferFn,
    SweepFamily::MlpLearningStage,
    SweepFamily::MlpTrainAlgorithm,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagedSearch {
    pub stages: Vec<SweepResult>,
    pub winner: MlpSetup,
}

/// Runs the five MLP stages in order (hidden neurons, divide function,
/// transfer functions, learning function, training algorithm), fixing each
/// stage's winner before the next.
pub fn staged_mlp_search(
    data: &SweepData,
    base_seed: u64,
    repetitions: usize,
    jobs: Option<usize>,
) -> Result<StagedSearch> {
    let mut setup = MlpSetup {
        divide: data.pipeline.divide,
        ..MlpSetup::search_baseline()
    };
    let mut stages = Vec::with_capacity(STAGES.len());
    for family in STAGES {
        let spec = SweepSpec {
            repetitions,
            jobs,
            ..SweepSpec::new(family, setup.clone(), base_seed)
        };
        let result = run_sweep(&spec, data)?;
        let row = result
            .selected_row()
            .ok_or_else(|| Error::Config(format!("every run of stage {} failed", family.name())))?;
        setup = row.value.apply(&setup);
        log::info!("stage {}: selected {}", family.name(), row.value);
        stages.push(result);
    }
    Ok(StagedSearch { stages, winner: setup })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub mlp: MlpSetup,
    pub mlp_seed: u64,
    pub rbf_spread: f64,
    /// `None` picks the neuron count with the lowest validation MSE.
    pub rbf_neurons: Option<usize>,
    pub grnn_sigma: f64,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            mlp: MlpSetup::default(),
            mlp_seed: 7,
            rbf_spread: 0.2,
            rbf_neurons: None,
            grnn_sigma: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub family: ModelFamily,
    pub train: MetricsReport,
    pub test: MetricsReport,
    pub train_seconds: f64,
}

impl ComparisonRow {
    pub const METRIC_COLUMNS: [&'static str; 8] = [
        "train_rmse",
        "train_r",
        "train_r2",
        "train_mae",
        "test_rmse",
        "test_r",
        "test_r2",
        "test_mae",
    ];

    /// The eight metric cells in [`Self::METRIC_COLUMNS`] order; undefined
    /// correlations are NaN.
    pub fn metric_cells(&self) -> [f64; 8] {
        let nan = f64::NAN;
        [
            self.train.rmse,
            self.train.r.unwrap_or(nan),
            self.train.r2.unwrap_or(nan),
            self.train.mae,
            self.test.rmse,
            self.test.r.unwrap_or(nan),
            self.test.r2.unwrap_or(nan),
            self.test.mae,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn row(&self, family: ModelFamily) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.family == family)
    }
}

/// Trains one model per family on the same split and scores the training
/// and test partitions. Only training is timed.
pub fn compare_models(data: &Prepared, cfg: &ComparisonConfig) -> Result<ComparisonReport> {
    let train = data.data.subset(&data.split.train);
    let test = data.data.subset(&data.split.test);
    let score =
        |predict: &dyn Fn(&crate::linalg::Matrix) -> crate::linalg::Matrix| -> Result<(MetricsReport, MetricsReport)> {
            Ok((
                compute_metrics(&predict(&train.features), &train.targets)?,
                compute_metrics(&predict(&test.features), &test.targets)?,
            ))
        };
    let mut rows = Vec::with_capacity(3);

    let start = Instant::now();
    let (mlp, _) = cfg.mlp.fit(data, cfg.mlp_seed)?;
    let seconds = start.elapsed().as_secs_f64();
    let (tr, te) = score(&|x| mlp.predict_all(x))?;
    rows.push(ComparisonRow {
        family: ModelFamily::Mlp,
        train: tr,
        test: te,
        train_seconds: seconds,
    });

    let start = Instant::now();
    let (rbf, _) = fit_rbf_selected(data, cfg.rbf_spread, cfg.rbf_neurons)?;
    let seconds = start.elapsed().as_secs_f64();
    let (tr, te) = score(&|x| rbf.predict_all(x))?;
    rows.push(ComparisonRow {
        family: ModelFamily::Rbf,
        train: tr,
        test: te,
        train_seconds: seconds,
    });

    let start = Instant::now();
    let grnn = train_grnn(&data.data, &data.split.train, cfg.grnn_sigma)?;
    let seconds = start.elapsed().as_secs_f64();
    let (tr, te) = score(&|x| grnn.predict_all(x))?;
    rows.push(ComparisonRow {
        family: ModelFamily::Grnn,
        train: tr,
        test: te,
        train_seconds: seconds,
    });

    Ok(ComparisonReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate, SynthConfig};

    fn small_data() -> SweepData {
        let records = generate(&SynthConfig {
            n_rows: 120,
            ..SynthConfig::default()
        })
        .unwrap();
        SweepData::new(&records, &PipelineConfig::default()).unwrap()
    }

    fn row(val: Option<f64>, size: usize) -> SweepRow {
        SweepRow {
            value: GridValue::Hidden(size),
            neurons: None,
            best_val_mse: val,
            train_mse: None,
            test_mse: None,
            epoch: None,
            seed: 0,
            model_size: size,
            seconds: 0.0,
            error: None,
        }
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(SweepFamily::MlpHiddenNeurons.default_grid().len(), 11);
        assert_eq!(SweepFamily::MlpTransferFn.default_grid().len(), 9);
        assert_eq!(SweepFamily::MlpTrainAlgorithm.default_grid().len(), 10);
        assert_eq!(SweepFamily::RbfSpread.default_grid().len(), 20);
        assert_eq!(SweepFamily::GrnnSigma.default_grid().len(), 10);
        let labels: Vec<String> = SweepFamily::RbfSpread
            .default_grid()
            .iter()
            .map(|v| v.to_string())
            .collect();
        assert_eq!(labels[0], "0.1");
        assert_eq!(labels[2], "0.3");
        assert_eq!(labels[19], "2");
    }

    #[test]
    fn selection_tie_breaks() {
        let rows = vec![
            row(Some(0.2), 5),
            row(None, 1),
            row(Some(0.1), 9),
            row(Some(0.1), 4),
            row(Some(0.1), 4),
        ];
        assert_eq!(select_row(&rows), Some(3));
        assert_eq!(select_row(&[row(None, 1)]), None);
    }

    #[test]
    fn grnn_sweep_is_deterministic() {
        let data = small_data();
        let spec = SweepSpec::new(SweepFamily::GrnnSigma, MlpSetup::default(), 3);
        let a = run_sweep(&spec, &data).unwrap();
        assert_eq!(a.rows.len(), 10);
        let strip = |r: &SweepResult| r.rows.iter().map(|r| (r.best_val_mse, r.train_mse)).collect::<Vec<_>>();
        let b = run_sweep(&SweepSpec { jobs: Some(1), ..spec }, &data).unwrap();
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.selected, b.selected);
        let sel = a.selected.unwrap();
        assert!(a
            .rows
            .iter()
            .all(|r| r.best_val_mse.unwrap() >= a.rows[sel].best_val_mse.unwrap()));
    }

    #[test]
    fn mlp_sweep_records_failures() {
        let data = small_data();
        let mut setup = MlpSetup::default();
        setup.train.max_epochs = 5;
        let spec = SweepSpec {
            grid: vec![GridValue::Hidden(0), GridValue::Hidden(3)],
            repetitions: 2,
            ..SweepSpec::new(SweepFamily::MlpHiddenNeurons, setup, 1)
        };
        let res = run_sweep(&spec, &data).unwrap();
        assert!(res.rows[0].error.is_some());
        assert_eq!(res.selected, Some(1));
    }

    #[test]
    fn invalid_spec() {
        let data = small_data();
        let mut spec = SweepSpec::new(SweepFamily::GrnnSigma, MlpSetup::default(), 0);
        spec.repetitions = 0;
        assert!(run_sweep(&spec, &data).is_err());
        spec.repetitions = 1;
        spec.grid = vec![GridValue::Hidden(3)];
        assert!(run_sweep(&spec, &data).is_err());
        spec.grid.clear();
        assert!(run_sweep(&spec, &data).is_err());
    }

    #[test]
    fn comparison_schema() {
        let data = small_data();
        let report = compare_models(data.default_prepared(), &ComparisonConfig::default()).unwrap();
        assert_eq!(report.rows.len(), 3);
        for r in &report.rows {
            assert_eq!(r.metric_cells().len(), ComparisonRow::METRIC_COLUMNS.len());
        }
        let again = compare_models(data.default_prepared(), &ComparisonConfig::default()).unwrap();
        for (a, b) in report.rows.iter().zip(&again.rows) {
            assert_eq!(a.metric_cells().map(f64::to_bits), b.metric_cells().map(f64::to_bits));
        }
    }
}
