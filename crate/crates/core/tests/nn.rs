use posecontrast::error::Error;
use posecontrast::geometry::{AngleHeadOutput, PoseLabel};
use posecontrast::gradcheck::{run_gradcheck, GradcheckConfig};
use posecontrast::losses::{angle_loss, AngleLossConfig};
use posecontrast::nn::{
    adam_step, forward, read_checkpoint, write_checkpoint, Architecture, ModelParams, OptimizerConfig, ParamGrads, Tensor,
};
use posecontrast::rng;
use rand::Rng;

fn small_arch() -> Architecture {
    Architecture { input_dim: 6, encoder_hidden: vec![5], feature_dim: 4, predictor_hidden: vec![7] }
}

fn random_input(seed: u64, rows: usize, cols: usize) -> Tensor {
    let mut r = rng::stream(seed, "tests/nn/input", 0);
    Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

fn rows(t: &Tensor, idx: &[usize]) -> Tensor {
    let (_, c) = t.dims2().unwrap();
    Tensor::new(vec![idx.len(), c], idx.iter().flat_map(|&i| t.row(i).to_vec()).collect()).unwrap()
}

fn heads_close(a: &AngleHeadOutput, b: &AngleHeadOutput, tol: f64) -> bool {
    let flat = |h: &AngleHeadOutput| {
        [&h.azimuth, &h.elevation, &h.inplane]
            .iter()
            .flat_map(|x| x.scores.iter().chain(&x.offsets).copied().collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    flat(a).iter().zip(flat(b)).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn whole_model_gradients_match_finite_differences() {
    let report = run_gradcheck(&GradcheckConfig { instances: 10, model_coordinates: 50, ..Default::default() }).unwrap();
    let model = report.check("whole_model").unwrap();
    assert!(model.passed, "{report}");
    assert_eq!(model.coordinates, 500);
}

#[test]
fn outputs_do_not_depend_on_batch_mates() {
    let params = ModelParams::init(&small_arch(), 1).unwrap();
    let x = random_input(2, 9, 6);
    let full = forward(&params, &x).unwrap();
    for i in 0..9 {
        let alone = forward(&params, &rows(&x, &[i])).unwrap();
        assert!(heads_close(&full.head(i), &alone.head(0), 1e-12));
        let e = &full.embeddings()[i * 4..(i + 1) * 4];
        assert!(e.iter().zip(alone.embeddings()).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

#[test]
fn permuting_rows_permutes_outputs() {
    let params = ModelParams::init(&small_arch(), 3).unwrap();
    let x = random_input(4, 6, 6);
    let order = [3, 0, 5, 1, 4, 2];
    let a = forward(&params, &x).unwrap();
    let b = forward(&params, &rows(&x, &order)).unwrap();
    for (j, &i) in order.iter().enumerate() {
        assert!(heads_close(&a.head(i), &b.head(j), 1e-12));
    }
}

#[test]
fn duplicated_sample_doubles_its_gradient() {
    let params = ModelParams::init(&small_arch(), 5).unwrap();
    let x = random_input(6, 1, 6);
    let pose = PoseLabel::new(0.4, -0.2, 0.1).unwrap();
    let cfg = AngleLossConfig::default();
    let grads_for = |input: &Tensor| -> ParamGrads {
        let pass = forward(&params, input).unwrap();
        let head_grads: Vec<_> =
            pass.heads().iter().map(|h| angle_loss(h, &pose, &cfg).unwrap().1).collect();
        pass.backward(None, &head_grads).unwrap()
    };
    let single = grads_for(&x);
    let double = grads_for(&rows(&x, &[0, 0]));
    for (s, d) in single.flat().zip(double.flat()) {
        assert!((2.0 * s - d).abs() <= 1e-12 * (1.0 + d.abs()));
    }
}

#[test]
fn wrong_input_width_is_rejected() {
    let params = ModelParams::init(&small_arch(), 0).unwrap();
    assert!(matches!(forward(&params, &random_input(0, 2, 5)), Err(Error::ShapeMismatch(_))));
}

#[test]
fn init_is_deterministic_per_seed() {
    let a = ModelParams::init(&Architecture::default(), 9).unwrap();
    assert_eq!(a, ModelParams::init(&Architecture::default(), 9).unwrap());
    assert_ne!(a, ModelParams::init(&Architecture::default(), 10).unwrap());
}

fn trained_params() -> ModelParams {
    let mut params = ModelParams::init(&small_arch(), 7).unwrap();
    let x = random_input(8, 4, 6);
    let pose = PoseLabel::new(1.0, 0.3, -0.1).unwrap();
    for step in 0..5 {
        let pass = forward(&params, &x).unwrap();
        let g: Vec<_> = pass.heads().iter().map(|h| angle_loss(h, &pose, &AngleLossConfig::default()).unwrap().1).collect();
        let grads = pass.backward(None, &g).unwrap();
        adam_step(&mut params, &grads, &OptimizerConfig::default(), step as f64 / 5.0).unwrap();
    }
    params
}

#[test]
fn checkpoint_roundtrip_is_exact() {
    let params = trained_params();
    assert_eq!(params.step, 5);
    let mut bytes = Vec::new();
    write_checkpoint(&params, serde_json::json!({"note": 1}), &mut bytes).unwrap();
    let (back, header) = read_checkpoint(bytes.as_slice(), Some(&small_arch())).unwrap();
    assert_eq!(back, params);
    assert_eq!(header.hyperparameters["note"], 1);
    let mut again = Vec::new();
    write_checkpoint(&back, header.hyperparameters, &mut again).unwrap();
    assert_eq!(bytes, again);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let mut bytes = Vec::new();
    write_checkpoint(&trained_params(), serde_json::Value::Null, &mut bytes).unwrap();
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(read_checkpoint(bad_magic.as_slice(), None), Err(Error::Format(_))));
    for cut in [3, 10, bytes.len() / 2, bytes.len() - 1] {
        assert!(read_checkpoint(&bytes[..cut], None).is_err(), "truncated at {cut}");
    }
    let other = Architecture { feature_dim: 8, ..small_arch() };
    assert!(read_checkpoint(bytes.as_slice(), Some(&other)).is_err());
}

#[test]
fn learning_rate_decays_once() {
    let cfg = OptimizerConfig::default();
    assert_eq!(cfg.effective_lr(0.0), 1e-4);
    assert_eq!(cfg.effective_lr(0.79), 1e-4);
    assert!((cfg.effective_lr(0.8) - 1e-5).abs() < 1e-20);
    assert!((cfg.effective_lr(1.0) - 1e-5).abs() < 1e-20);
}

#[test]
fn non_finite_gradients_leave_parameters_untouched() {
    let mut params = trained_params();
    let before = params.clone();
    let mut grads = ParamGrads::zeros_like(&params);
    grads.0[0][0] = f64::NAN;
    assert!(adam_step(&mut params, &grads, &OptimizerConfig::default(), 0.0).is_err());
    assert_eq!(params, before);
}
