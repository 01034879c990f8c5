use qshiftdp::circuit::{AnsatzSpec, EncoderSpec, LabelObservables, Model};
use qshiftdp::data::{gen_bars_stripes, BarsStripesOptions};
use qshiftdp::rng::purpose;
use qshiftdp::train::{evaluate, train, Mode, TrainConfig};
use qshiftdp::{Shots, Stream};

fn setup(seed: u64) -> (Model, LabelObservables, qshiftdp::data::Dataset, qshiftdp::data::Dataset) {
    let model = Model::new(EncoderSpec::Angle { n_qubits: 4 }, AnsatzSpec::strongly_entangling(4, 1).unwrap()).unwrap();
    let labels = LabelObservables::wire_readout(4, 1).unwrap();
    let data = Stream::new(seed).split(purpose::DATA);
    let tr = gen_bars_stripes(1000, BarsStripesOptions::default(), data.split(0)).unwrap();
    let te = gen_bars_stripes(500, BarsStripesOptions::default(), data.split(1)).unwrap();
    (model, labels, tr, te)
}

#[test]
fn non_private_analytic_training_reaches_high_accuracy() {
    let (model, labels, tr, te) = setup(0);
    let config = TrainConfig {
        mode: Mode::NonPrivate,
        shots: Shots::Infinite,
        ..Default::default()
    };
    let out = train(&tr, &model, &labels, config).unwrap();
    let e = evaluate(&out.theta, &te, &model, &labels).unwrap();
    assert!(e.accuracy >= 0.95, "{}", e.accuracy);
    assert!(out.metrics.epsilon.is_none());
    let first = out.metrics.steps().first().unwrap().loss;
    let last = out.metrics.steps().last().unwrap().loss;
    assert!(last < first);
}

#[test]
fn larger_budget_is_not_worse() {
    let mut acc = [0.0; 2];
    for seed in 0..5 {
        let (model, labels, tr, te) = setup(seed);
        for (i, eps) in [1.0, 0.1].into_iter().enumerate() {
            let config = TrainConfig {
                epsilon: eps,
                seed,
                ..Default::default()
            };
            let out = train(&tr, &model, &labels, config).unwrap();
            let e = evaluate(&out.theta, &te, &model, &labels).unwrap();
            acc[i] += e.accuracy / 5.0;
        }
    }
    assert!(acc[0] >= acc[1], "eps=1: {} eps=0.1: {}", acc[0], acc[1]);
}

#[test]
fn full_runs_are_reproducible() {
    let (model, labels, tr, _) = setup(1);
    for mode in Mode::ALL {
        let config = TrainConfig {
            mode,
            steps: 4,
            batch: 128,
            shots: Shots::Finite(500),
            alpha: 0.1,
            seed: 9,
            ..Default::default()
        };
        let a = train(&tr, &model, &labels, config).unwrap();
        let b = train(&tr, &model, &labels, config).unwrap();
        assert_eq!(a, b, "{mode}");
        let c = train(&tr, &model, &labels, TrainConfig { seed: 10, ..config }).unwrap();
        assert_ne!(a.theta, c.theta, "{mode}");
    }
}

#[test]
fn pixeldp_declares_its_budget_and_noises_inputs() {
    let (model, labels, tr, te) = setup(2);
    let config = TrainConfig {
        mode: Mode::PixelDp,
        epsilon: 0.5,
        ..Default::default()
    };
    let out = train(&tr, &model, &labels, config).unwrap();
    assert_eq!(out.metrics.epsilon, Some(0.5));
    assert!(out.calibration.is_none());
    assert!(out.metrics.steps().iter().all(|r| r.sigma2 == 0.0));
    evaluate(&out.theta, &te, &model, &labels).unwrap();
}
