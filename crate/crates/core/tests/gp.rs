use orbitlearn::data::{build_dataset, DatasetProvenance, SampledDataset};
use orbitlearn::dynamics::{propagate_and_sample, CartesianState, TrajectorySpec};
use orbitlearn::gp::*;
use orbitlearn::gravity::ZonalGravityField;
use orbitlearn::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
        .collect()
}

fn trajectory_dataset() -> SampledDataset {
    let field = ZonalGravityField::bennu_normalized();
    let s0 = CartesianState::new(Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 0.6, 0.2)).unwrap();
    let spec = TrajectorySpec::new(4.0, 25).unwrap().with_steps_per_period(400).unwrap();
    build_dataset(&propagate_and_sample(&field, &s0, &spec).unwrap(), DatasetProvenance::new(30.0))
}

fn hp(ls: f64, sf2: f64, sn2: f64, mean: f64) -> GpHyperparams {
    GpHyperparams {
        log_lengthscales: [ls.ln(); 3],
        log_signal_variance: sf2.ln(),
        log_noise_variance: sn2.ln(),
        constant_mean: mean,
    }
}

fn diagnostics() -> GpDiagnostics {
    GpDiagnostics {
        initial_mll: 0.0,
        final_mll: 0.0,
        final_loss: 0.0,
        epochs_run: [0; 3],
        fit_points: 0,
        instability_flag: false,
        jitter: [0.0; 3],
    }
}

fn targets_from(xs: &[Vec3]) -> Vec<Vec3> {
    xs.iter().map(|x| Vec3::new(x.x.sin(), x.y * x.z, (0.5 * x.x + x.z).cos())).collect()
}

#[test]
fn kernel_at_root_two() {
    let h = hp(1.0, 1.0, 1e-2, 0.0);
    let k = rbf_kernel(&Vec3::zeros(), &Vec3::new(1.0, 1.0, 0.0), &h);
    assert!((k - (-1.0f64).exp()).abs() < 1e-15);
}

#[test]
fn likelihood_gradient_matches_finite_difference() {
    let xs = cloud(30, 1);
    let ys: Vec<f64> = xs.iter().map(|x| x.x.sin() + 0.3 * x.y).collect();
    let base = GpHyperparams {
        log_lengthscales: [0.2, -0.1, 0.4],
        log_signal_variance: 0.3,
        log_noise_variance: -3.0,
        constant_mean: 0.1,
    };
    let eval = marginal_log_likelihood_with_gradient(&base, &xs, &ys, 1e-6).unwrap();
    let pack = |h: &GpHyperparams| {
        [h.log_lengthscales[0], h.log_lengthscales[1], h.log_lengthscales[2], h.log_signal_variance, h.log_noise_variance, h.constant_mean]
    };
    let unpack = |a: [f64; 6]| GpHyperparams {
        log_lengthscales: [a[0], a[1], a[2]],
        log_signal_variance: a[3],
        log_noise_variance: a[4],
        constant_mean: a[5],
    };
    let step = 1e-5;
    for k in 0..6 {
        let (mut up, mut dn) = (pack(&base), pack(&base));
        up[k] += step;
        dn[k] -= step;
        let fd = (marginal_log_likelihood(&unpack(up), &xs, &ys, 1e-6).unwrap()
            - marginal_log_likelihood(&unpack(dn), &xs, &ys, 1e-6).unwrap())
            / (2.0 * step);
        let g = eval.gradient[k];
        assert!((g - fd).abs() <= 1e-4 * fd.abs().max(1.0), "param {k}: {g} vs {fd}");
    }
}

#[test]
fn small_jitter_barely_moves_the_likelihood() {
    let xs = cloud(50, 2);
    let ys: Vec<f64> = xs.iter().map(|x| x.norm().cos()).collect();
    let h = hp(0.8, 1.0, 1e-2, 0.0);
    let with = hp(0.8, 1.0, 1e-2 + 1e-6, 0.0);
    let a = marginal_log_likelihood(&h, &xs, &ys, 0.0).unwrap();
    let b = marginal_log_likelihood(&with, &xs, &ys, 0.0).unwrap();
    assert!((a - b).abs() < 1e-3);
}

#[test]
fn scalar_densities() {
    let x = [Vec3::zeros()];
    let h = hp(1.0, 0.5, 0.5, 0.0);
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    assert!((marginal_log_likelihood(&h, &x, &[0.0], 0.0).unwrap() + 0.5 * ln2pi).abs() < 1e-12);
    assert!((marginal_log_likelihood(&h, &x, &[1.0], 0.0).unwrap() + 0.5 + 0.5 * ln2pi).abs() < 1e-12);
}

#[test]
fn near_noise_free_posterior_interpolates() {
    let xs = cloud(40, 3);
    let ys = targets_from(&xs);
    let h = hp(1.0, 1.0, 1e-12, 0.0);
    let (gp, escalated) = TrainedGp::condition([h; 3], xs.clone(), ys.clone(), 1e-6, diagnostics()).unwrap();
    assert!(!escalated);
    for (m, y) in gp.predict_mean(&xs).iter().zip(&ys) {
        assert!((m - y).amax() < 1e-4, "{m:?} vs {y:?}");
    }
}

#[test]
fn far_field_reverts_to_prior() {
    let xs = cloud(20, 4);
    let ys = targets_from(&xs);
    let h = hp(0.7, 2.5, 1e-3, 0.4);
    let (gp, _) = TrainedGp::condition([h; 3], xs.clone(), ys, 1e-6, diagnostics()).unwrap();
    let far = [Vec3::new(1e6, 0.0, 0.0), Vec3::new(0.0, -1e6, 0.0)];
    let (means, far_vars) = predict_gp(&gp, &far);
    for (m, v) in means.iter().zip(&far_vars) {
        assert!((m - Vec3::repeat(0.4)).amax() < 1e-12);
        assert!((v - Vec3::repeat(2.5)).amax() < 1e-12);
    }
    let (_, near_vars) = predict_gp(&gp, &xs);
    for v in &near_vars {
        assert!(v.iter().all(|&c| c <= 2.5));
    }
}

#[test]
fn training_improves_likelihood_and_is_deterministic() {
    let ds = trajectory_dataset();
    let cfg = GpTrainConfig { epochs: 60, fit_points: None, ..GpTrainConfig::default() };
    let a = train_gp(&ds, &cfg).unwrap();
    let b = train_gp(&ds, &cfg).unwrap();
    assert_eq!(a.hyperparams, b.hyperparams);
    let d = &a.diagnostics;
    assert!(d.final_mll >= d.initial_mll || d.instability_flag, "{d:?}");
    assert_eq!(d.fit_points, ds.len());
}

#[test]
fn strided_fit_keeps_full_posterior() {
    let ds = trajectory_dataset();
    let cfg = GpTrainConfig { epochs: 5, fit_points: Some(30), ..GpTrainConfig::default() };
    let gp = train_gp(&ds, &cfg).unwrap();
    assert_eq!(gp.diagnostics.fit_points, 30);
    assert_eq!(gp.inputs.len(), ds.len());
}
