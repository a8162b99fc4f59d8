#![allow(dead_code)]

use icad::models::{SvddModel, VaeModel};
use icad::neural::{grad_check, Activation, ForwardCache, Gradients, Mlp, GRAD_CHECK_FLOOR};
use icad::Example;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const GRAD_TOLERANCE: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_examples(rng: &mut ChaCha8Rng, n: usize, mean: &[f64], sd: f64) -> Vec<Example> {
    (0..n)
        .map(|_| {
            let v = mean
                .iter()
                .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Example::new(v).unwrap()
        })
        .collect()
}

/// Largest relative error over encoder and decoder parameters of one VAE
/// example loss, with an optional corruption of the analytic gradient.
pub fn vae_grad_error(seed: u64, corrupt: bool) -> f64 {
    let mut r = rng(seed);
    let vae = VaeModel::random(5, &[6], 2, &mut r).unwrap();
    let z: Vec<f64> = (0..5).map(|_| r.random_range(-1.0..1.0)).collect();
    let noise: Vec<f64> = (0..2).map(|_| r.sample(StandardNormal)).collect();

    let mut enc_g = Gradients::zeros_like(vae.encoder());
    let mut dec_g = Gradients::zeros_like(vae.decoder());
    let mut caches = (ForwardCache::default(), ForwardCache::default());
    vae.accumulate_gradients(&z, &noise, 1.0, &mut enc_g, &mut dec_g, &mut caches)
        .unwrap();
    if corrupt {
        enc_g.scale(2.0);
        dec_g.scale(2.0);
    }

    let dec = vae.decoder().clone();
    let mut enc = vae.encoder().clone();
    let e = grad_check(
        &mut enc,
        &enc_g,
        |m| {
            VaeModel::new(m.clone(), dec.clone())
                .unwrap()
                .loss(&z, &noise)
                .unwrap()
                .total
        },
        GRAD_TOLERANCE,
    );
    let enc_fixed = vae.encoder().clone();
    let mut dec = vae.decoder().clone();
    let d = grad_check(
        &mut dec,
        &dec_g,
        |m| {
            VaeModel::new(enc_fixed.clone(), m.clone())
                .unwrap()
                .loss(&z, &noise)
                .unwrap()
                .total
        },
        GRAD_TOLERANCE,
    );
    e.max_relative_error.max(d.max_relative_error)
}

/// Relative error of the full SVDD objective (distance term plus weight
/// decay) on a random batch.
pub fn svdd_grad_error(seed: u64, corrupt: bool) -> f64 {
    let mut r = rng(seed);
    let lambda = r.random_range(0.0..0.1);
    let mut svdd = SvddModel::random(4, &[5], 3, lambda, &mut r).unwrap();
    let batch = gaussian_examples(&mut r, 6, &[0.0; 4], 1.0);
    svdd.init_center(&batch).unwrap();
    let center = svdd.center().unwrap().to_vec();
    let (_, mut grads) = svdd.loss_and_gradients(&batch, true).unwrap();
    if corrupt {
        grads.scale(2.0);
    }
    let mut mapper = svdd.mapper().clone();
    grad_check(
        &mut mapper,
        &grads,
        |m| {
            SvddModel::with_center(m.clone(), center.clone(), lambda)
                .unwrap()
                .loss(&batch)
                .unwrap()
        },
        GRAD_TOLERANCE,
    )
    .max_relative_error
}

/// Relative error of `1/2 |f(x) - y|^2` for a random biased MLP.
pub fn mlp_grad_error(seed: u64, hidden: Activation) -> f64 {
    let mut r = rng(seed);
    let mut net = Mlp::random(&[4, 5, 3], hidden, Activation::Identity, true, &mut r).unwrap();
    let x: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
    let (out, cache) = net.forward(&x).unwrap();
    let dy: Vec<f64> = out.iter().zip(&y).map(|(o, t)| o - t).collect();
    let (grads, _) = net.backward(&cache, &dy).unwrap();
    grad_check(
        &mut net,
        &grads,
        |m| {
            let o = m.predict(&x).unwrap();
            0.5 * o.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        },
        GRAD_TOLERANCE,
    )
    .max_relative_error
}

pub fn assert_floor_is_documented() {
    assert_eq!(GRAD_CHECK_FLOOR, 1e-4);
}

pub const TOY_DIM: usize = 4;

/// Toy two-blob task: in-distribution blob around `+2`, OOD blob around `-2`.
pub struct Blobs {
    pub train: Vec<Example>,
    pub cal: Vec<Example>,
    pub held_in: Vec<Example>,
    pub held_ood: Vec<Example>,
}

pub fn two_blobs(seed: u64) -> Blobs {
    let mut r = rng(seed);
    let inside = [2.0; TOY_DIM];
    let outside = [-2.0; TOY_DIM];
    Blobs {
        train: gaussian_examples(&mut r, 400, &inside, 0.5),
        cal: gaussian_examples(&mut r, 400, &inside, 0.5),
        held_in: gaussian_examples(&mut r, 200, &inside, 0.5),
        held_ood: gaussian_examples(&mut r, 200, &outside, 0.5),
    }
}

pub fn toy_config(seed: u64) -> icad::models::TrainConfig {
    icad::models::TrainConfig {
        epochs: 40,
        learning_rate: 1e-3,
        fine_tune_epochs: 10,
        fine_tune_learning_rate: 1e-4,
        batch_size: 32,
        seed,
    }
}

/// SVDD on the toy in-distribution blob; returns the training record.
pub fn toy_svdd(blobs: &Blobs, seed: u64, pretrain: bool) -> icad::models::SvddTraining {
    let cfg = toy_config(seed);
    let svdd = SvddModel::random(TOY_DIM, &[16], 4, 1e-6, &mut rng(seed)).unwrap();
    let (svdd, _) = icad::models::pretrain_autoencoder_then_copy(svdd, &blobs.train, &cfg, pretrain).unwrap();
    icad::models::train_svdd(svdd, &blobs.train, &cfg).unwrap()
}

pub fn toy_vae(blobs: &Blobs, seed: u64) -> VaeModel {
    let vae = VaeModel::random(TOY_DIM, &[16], 2, &mut rng(seed)).unwrap();
    icad::models::train_vae(vae, &blobs.train, &toy_config(seed))
        .unwrap()
        .model
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 60)
}

/// Round-trips every file format for one seed; `Err` names the first mismatch.
pub fn round_trip_all(seed: u64) -> Result<(), String> {
    use icad::conformal::{Backbone, CalibrationSet};
    use icad::nonconformity::ScorerKind;
    use icad::persistence::*;

    let mut r = rng(seed);
    let input = r.random_range(1..6);
    let hidden = [r.random_range(1..6)];
    let mut svdd = SvddModel::random(input, &hidden, r.random_range(1..4), r.random_range(0.0..1.0), &mut r).unwrap();
    let data = gaussian_examples(&mut r, 5, &vec![0.0; input], 1.0);
    svdd.init_center(&data).unwrap();
    let vae = VaeModel::random(input, &hidden, r.random_range(1..4), &mut r).unwrap();

    for backbone in [Backbone::Svdd(svdd), Backbone::Vae(vae)] {
        let q = quantize(&backbone).map_err(|e| e.to_string())?;
        let bytes = encode_backbone(&q).unwrap();
        let back = decode_backbone(&bytes).unwrap();
        if back != q || encode_backbone(&back).unwrap() != bytes {
            return Err(format!("model {:?}", backbone.method()));
        }
    }

    let n = r.random_range(1..50);
    let scores: Vec<f64> = (0..n).map(|_| r.random_range(-1e3..1e3)).collect();
    let cal = CalibrationSet::new(scores, ScorerKind::Svdd, r.random()).unwrap();
    if decode_calibration(&encode_calibration(&cal)).unwrap() != cal {
        return Err("calibration".into());
    }

    let count = r.random_range(1..20);
    let dim = r.random_range(1..10);
    let examples = (0..count)
        .map(|_| Example::new((0..dim).map(|_| (r.random::<f32>() * 40.0 - 20.0) as f64).collect()).unwrap())
        .collect();
    let rs = r
        .random_bool(0.5)
        .then(|| (0..count).map(|_| r.random_range(0.0..30.0)).collect());
    let ds = Dataset { examples, r: rs };
    if decode_dataset(&encode_dataset(&ds).unwrap()).unwrap() != ds {
        return Err("dataset".into());
    }

    let mut cfg = KeyValueConfig::new();
    for i in 0..r.random_range(0..8) {
        cfg.set(&format!("key_{i}"), r.random::<f64>());
    }
    if KeyValueConfig::parse(&cfg.render()).unwrap() != cfg {
        return Err("config".into());
    }
    Ok(())
}

/// Error codes for a model with corrupted magic and a calibration file with
/// descending scores.
pub fn rejection_codes() -> (u16, u16) {
    use icad::conformal::{Backbone, CalibrationSet};
    use icad::nonconformity::ScorerKind;
    use icad::persistence::*;

    let vae = VaeModel::random(3, &[4], 2, &mut rng(0)).unwrap();
    let mut bytes = encode_backbone(&Backbone::Vae(vae)).unwrap();
    bytes[0] ^= 0xff;
    let magic = decode_backbone(&bytes).unwrap_err().code();

    let cal = CalibrationSet::new(vec![1.0, 2.0], ScorerKind::Knn, [0; 8]).unwrap();
    let mut bytes = encode_calibration(&cal);
    let n = bytes.len();
    bytes[n - 16..n - 8].copy_from_slice(&2.0f64.to_le_bytes());
    bytes[n - 8..].copy_from_slice(&1.0f64.to_le_bytes());
    let unsorted = decode_calibration(&bytes).unwrap_err().code();
    (magic, unsorted)
}

/// Quickly trained 8x8 pipelines for harness tests; detection quality is not
/// the point here.
pub fn small_pipelines() -> (
    icad::episodes::SceneGenerator,
    icad::conformal::Pipeline,
    icad::conformal::Pipeline,
) {
    use icad::conformal::{calibrate_with, Backbone, Pipeline, VaeCalibration};
    use icad::episodes::SceneGenerator;
    use icad::models::{pretrain_autoencoder_then_copy, train_svdd, train_vae, TrainConfig};

    let gen = SceneGenerator::with_side(8, 3);
    let (data, _) = gen.generate_dataset(300, (0.0, 20.0)).unwrap();
    let (cal, _) = SceneGenerator { seed: 4, ..gen.clone() }
        .generate_dataset(300, (0.0, 20.0))
        .unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        fine_tune_epochs: 1,
        ..TrainConfig::default()
    };
    let mut r = rng(1);
    let vae = train_vae(VaeModel::random(64, &[16], 4, &mut r).unwrap(), &data, &cfg)
        .unwrap()
        .model;
    let svdd = SvddModel::random(64, &[16], 8, 1e-6, &mut r).unwrap();
    let (svdd, _) = pretrain_autoencoder_then_copy(svdd, &data, &cfg, true).unwrap();
    let svdd = train_svdd(svdd, &data, &cfg).unwrap().model;
    let bind = |b: Backbone| {
        let c = calibrate_with(
            &b.clone().into_scorer().unwrap(),
            &cal,
            VaeCalibration::MeanReconstruction,
        )
        .unwrap();
        Pipeline::new(b, c).unwrap()
    };
    (gen, bind(Backbone::Vae(vae)), bind(Backbone::Svdd(svdd)))
}
