use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use respverify::model_io::{
    LinearModel, Link, ModelHandle, ModelSpec, PredictError, Prediction, PredictionTarget,
};

const STUB: &str = env!("CARGO_BIN_EXE_linear-stub");

fn stub(args: &[&str]) -> ModelSpec {
    ModelSpec::Subprocess {
        command: STUB.into(),
        args: args.iter().map(|s| s.to_string()).collect(),
    }
}

fn points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect()
}

#[test]
fn subprocess_scores_match_the_builtin_model_exactly() {
    let weights = [0.3, -1.25, 2.0, 1e-3];
    let builtin = LinearModel::new(weights.to_vec(), -0.7, Link::Logistic);
    let mut child = stub(&["--weights", "0.3,-1.25,2,0.001", "--intercept", "-0.7", "--link", "logistic"])
        .open(4)
        .unwrap();
    let xs = points(1_000, 4, 1);
    let got = child.predict_batch(&xs).unwrap();
    let want: Vec<Prediction> = xs.iter().map(|x| builtin.predict(x)).collect();
    assert_eq!(got, want);
}

#[test]
fn out_of_order_replies_are_matched_by_id() {
    let builtin = LinearModel::new(vec![1.0, 2.0], 0.0, Link::Identity).with_threshold(0.0);
    let mut child = stub(&["--weights", "1,2", "--threshold", "0", "--shuffle", "8"])
        .open(2)
        .unwrap();
    for seed in 0..3 {
        let xs = points(64, 2, seed);
        let got = child.predict_batch(&xs).unwrap();
        let want: Vec<Prediction> = xs.iter().map(|x| builtin.predict(x)).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn labels_pass_through() {
    let mut child = stub(&["--weights", "0,0", "--constant", "approve"]).open(2).unwrap();
    let preds = child.predict_batch(&points(10, 2, 3)).unwrap();
    assert!(preds.iter().all(|p| *p == Prediction::Label("approve".into())));
    let target = PredictionTarget::LabelSet {
        labels: vec!["approve".into()],
    };
    assert!(target.contains(&preds[0], &preds[1]).unwrap());
}

#[test]
fn child_failure_surfaces_its_stderr() {
    let mut child = stub(&["--weights", "1", "--fail-after", "5"]).open(1).unwrap();
    child.predict_batch(&points(5, 1, 0)).unwrap();
    match child.predict_batch(&points(5, 1, 1)) {
        Err(PredictError::Transport { stderr, .. }) => {
            assert!(!stderr.is_empty(), "stderr was not captured");
        }
        other => panic!("expected a transport error, got {other:?}"),
    }
}

#[test]
fn malformed_replies_are_transport_errors() {
    let mut child = stub(&["--weights", "1", "--garbage"]).open(1).unwrap();
    assert!(matches!(
        child.predict_batch(&points(3, 1, 0)),
        Err(PredictError::Transport { .. })
    ));
}

#[test]
fn inputs_are_checked_before_they_are_sent() {
    let mut child = stub(&["--weights", "1,1"]).open(2).unwrap();
    assert!(matches!(
        child.predict_batch(&[vec![1.0, 2.0], vec![1.0]]),
        Err(PredictError::Dimension { index: 1, got: 1, want: 2 })
    ));
    assert!(matches!(
        child.predict_batch(&[vec![f64::NAN, 0.0]]),
        Err(PredictError::NonFinite { index: 0 })
    ));
    // the child is still usable
    assert_eq!(child.predict(&[1.0, 2.0]).unwrap(), Prediction::Score(3.0));
}

#[test]
fn missing_executable_is_a_spawn_error() {
    let spec = ModelSpec::Subprocess {
        command: "/nonexistent/model-binary".into(),
        args: vec![],
    };
    assert!(matches!(spec.open(1), Err(PredictError::Spawn { .. })));
}

#[test]
fn builtin_dimension_is_checked_on_open() {
    let spec = ModelSpec::BuiltinLinear(LinearModel::new(vec![1.0; 3], 0.0, Link::Identity));
    assert!(spec.open(4).is_err());
    assert!(matches!(spec.open(3), Ok(ModelHandle::Builtin(_))));
}

#[test]
fn targets_relative_to_the_baseline() {
    let flip = PredictionTarget::FlipOfCurrent;
    let below = PredictionTarget::BelowCurrent;
    let l = |s: &str| Prediction::Label(s.into());
    assert!(flip.contains(&l("1"), &l("0")).unwrap());
    assert!(!flip.contains(&l("0"), &l("0")).unwrap());
    assert!(below.contains(&Prediction::Score(0.2), &Prediction::Score(0.3)).unwrap());
    assert!(!below.contains(&Prediction::Score(0.3), &Prediction::Score(0.3)).unwrap());
    assert!(below.contains(&l("a"), &Prediction::Score(1.0)).is_err());
}
