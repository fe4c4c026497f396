use severity_nn::dataset::{Dataset, SplitIndices};
use severity_nn::linalg::{solve_least_squares, Matrix, SeededRng};
use severity_nn::mlp::{fit, MlpShape, StopReason, TrainAlgorithm, TrainConfig, TransferFn};
use severity_nn::pipeline::{prepare, PipelineConfig};
use severity_nn::rbfnn::{train_rbf, RbfTrainConfig};
use severity_nn::sweep::{run_sweep, MlpSetup, SweepData, SweepFamily, SweepSpec};
use severity_nn::synthgen::{generate, SynthConfig};

fn linear_task(n: usize, seed: u64) -> (Dataset, Matrix) {
    let mut rng = SeededRng::new(seed);
    let x = Matrix::from_vec(n, 6, (0..n * 6).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
    let mut design = Matrix::zeros(n, 7);
    let mut t = Matrix::zeros(n, 3);
    for i in 0..n {
        design.row_mut(i)[..6].copy_from_slice(x.row(i));
        design[(i, 6)] = 1.0;
        for o in 0..3 {
            t[(i, o)] = (0..6).map(|j| (o + j) as f64 * 0.1 * x[(i, j)]).sum::<f64>() - 0.2 * o as f64;
        }
    }
    let data = Dataset {
        features: x,
        targets: t,
        variety_vocab: vec![],
        normalizer: None,
    };
    (data, design)
}

#[test]
fn lm_on_noise_free_linear_target_reaches_zero() {
    let (data, design) = linear_task(120, 4);
    let split = SplitIndices {
        train: (0..100).collect(),
        val: (100..110).collect(),
        test: (110..120).collect(),
    };
    let train = data.subset(&split.train);
    let oracle = solve_least_squares(&design.select_rows(&split.train), &train.targets).unwrap();
    let residual = design
        .select_rows(&split.train)
        .matmul(&oracle)
        .unwrap()
        .sub(&train.targets)
        .unwrap();
    assert!(residual.norm() < 1e-10);

    let cfg = TrainConfig {
        max_epochs: 5,
        ..TrainConfig::with_algorithm(TrainAlgorithm::LevenbergMarquardt)
    };
    let shape = MlpShape {
        n_in: 6,
        n_hidden: 6,
        n_out: 3,
    };
    let (net, record) = fit(shape, TransferFn::Linear, TransferFn::Linear, &data, &split, &cfg).unwrap();
    assert!(net.mse(&train.features, &train.targets).unwrap() < 1e-8);
    assert!(record.epochs.len() <= 6);
}

#[test]
fn every_algorithm_trains_on_synthetic_data() {
    let records = generate(&SynthConfig {
        n_rows: 200,
        ..SynthConfig::default()
    })
    .unwrap();
    let prepared = prepare(&records, &PipelineConfig::default()).unwrap();
    for algorithm in TrainAlgorithm::ALL {
        let cfg = TrainConfig {
            max_epochs: 40,
            ..TrainConfig::with_algorithm(algorithm)
        };
        let shape = MlpShape::severity(6);
        let (net, record) = fit(
            shape,
            TransferFn::HyperbolicTangentSigmoid,
            TransferFn::Linear,
            &prepared.data,
            &prepared.split,
            &cfg,
        )
        .unwrap();
        assert!(net.is_finite(), "{algorithm}");
        assert!(record.best_val_mse() < record.epochs[0].val_mse + 1e-12, "{algorithm}");
        assert!(record.epochs.len() <= 41);
        assert_ne!(record.stop_reason, StopReason::MuOverflow, "{algorithm}");
    }
}

#[test]
fn rbf_with_every_row_interpolates_training_targets() {
    let (data, _) = linear_task(40, 9);
    let idx: Vec<usize> = (0..40).collect();
    let cfg = RbfTrainConfig::for_training_size(40, 0.8);
    let (net, growth) = train_rbf(&data, &idx, &[], &cfg).unwrap();
    assert_eq!(net.n_neurons(), 40);
    assert!(growth.final_train_mse() < 1e-12);
}

#[test]
fn sweep_is_reproducible_with_parallel_workers() {
    let records = generate(&SynthConfig {
        n_rows: 150,
        ..SynthConfig::default()
    })
    .unwrap();
    let data = SweepData::new(&records, &PipelineConfig::default()).unwrap();
    let spec = |jobs| SweepSpec {
        repetitions: 2,
        jobs: Some(jobs),
        mlp: MlpSetup {
            train: TrainConfig {
                max_epochs: 30,
                ..TrainConfig::default()
            },
            ..MlpSetup::default()
        },
        ..SweepSpec::new(SweepFamily::MlpTransferFn, MlpSetup::default(), 3)
    };
    let strip = |mut r: severity_nn::sweep::SweepResult| {
        r.rows.iter_mut().for_each(|row| row.seconds = 0.0);
        r
    };
    let one = strip(run_sweep(&spec(1), &data).unwrap());
    let four = strip(run_sweep(&spec(4), &data).unwrap());
    assert_eq!(one, four);
    assert_eq!(one.rows.len(), 9);
}
