use nalgebra::{DMatrix, DVector};
use orbitlearn::data::{DatasetProvenance, SampledDataset};
use orbitlearn::gravity::ZonalGravityField;
use orbitlearn::nn::*;
use orbitlearn::{Regressor, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    v.normalize()
}

fn orbit_dataset(n: usize) -> SampledDataset {
    let field = ZonalGravityField::bennu_normalized();
    let inputs: Vec<Vec3> = (0..n)
        .map(|i| {
            let t = i as f64 * 0.11;
            Vec3::new(2.2 * t.cos(), 2.0 * t.sin(), 0.6 * (0.7 * t).sin())
        })
        .collect();
    let targets: Vec<Vec3> = inputs.iter().map(|x| field.acceleration(x).unwrap() * 10.0).collect();
    SampledDataset {
        times: (0..n).map(|i| i as f64).collect(),
        truth_inputs: inputs.clone(),
        truth_targets: targets.clone(),
        inputs,
        targets,
        provenance: DatasetProvenance::new(10.0),
    }
}

#[test]
fn power_iteration_matches_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    for _ in 0..5 {
        let w = DMatrix::from_fn(80, 80, |_, _| rng.sample::<f64, _>(StandardNormal));
        let exact = w.clone().singular_values().max();
        let (u, v) = (unit(80, &mut rng), unit(80, &mut rng));
        // 50 iterations leaves ~1.5e-3 on matrices with a narrow top gap
        let sn = spectral_normalize(&w, &u, &v, 200, f64::INFINITY);
        assert!((sn.sigma - exact).abs() <= 1e-3 * exact, "{} vs {exact}", sn.sigma);
        assert!(sn.sigma <= exact + 1e-9);
        assert_eq!(sn.weight, w);
        let capped = spectral_normalize(&w, &u, &v, 200, 1.0);
        assert!((capped.weight.clone().singular_values().max() - exact / sn.sigma).abs() < 1e-12);
    }
}

#[test]
fn sampled_lipschitz_bound() {
    let gamma = 5.0;
    let net = MlpNetwork::new(gamma, 17);
    // the bound is exact only once (u, v) are the true singular vectors
    let mut settled = net.clone();
    for l in &mut settled.layers {
        let svd = l.weight.clone().svd(true, true);
        let k = svd.singular_values.imax();
        l.u = svd.u.unwrap().column(k).into_owned();
        l.v = svd.v_t.unwrap().row(k).transpose();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut draw = || Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    for _ in 0..1000 {
        let (a, b) = (draw(), draw());
        let lhs = (settled.forward(&a) - settled.forward(&b)).norm();
        assert!(lhs <= gamma * (a - b).norm() * (1.0 + 1e-2));
    }
}

#[test]
fn backprop_matches_finite_difference() {
    let ds = orbit_dataset(16);
    for budget in [1.0, 1e4] {
        let net = MlpNetwork::new(budget, 5);
        let (_, grads) = net.mse_gradients(&ds.inputs, &ds.targets);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let l = rng.random_range(0..net.layers.len());
            let (r, c) = net.layers[l].weight.shape();
            let (i, j) = (rng.random_range(0..r), rng.random_range(0..c));
            let h = 1e-6;
            let mut up = net.clone();
            up.layers[l].weight[(i, j)] += h;
            let mut dn = net.clone();
            dn.layers[l].weight[(i, j)] -= h;
            let fd = (up.mse(&ds.inputs, &ds.targets) - dn.mse(&ds.inputs, &ds.targets)) / (2.0 * h);
            let g = grads.weights[l][(i, j)];
            assert!((g - fd).abs() <= 1e-4 * fd.abs() + 1e-8, "budget {budget} layer {l} ({i},{j}): {g} vs {fd}");
        }
        for l in 0..net.layers.len() {
            let mut up = net.clone();
            up.layers[l].bias[0] += 1e-6;
            let mut dn = net.clone();
            dn.layers[l].bias[0] -= 1e-6;
            let fd = (up.mse(&ds.inputs, &ds.targets) - dn.mse(&ds.inputs, &ds.targets)) / 2e-6;
            assert!((grads.biases[l][0] - fd).abs() <= 1e-4 * fd.abs() + 1e-8);
        }
    }
}

#[test]
fn training_runs_exact_step_count_and_descends() {
    let ds = orbit_dataset(250);
    let cfg = NnTrainConfig { epochs: 12, batch_size: Some(64), seed: 4, ..NnTrainConfig::default() };
    let net = train_nn(&ds, &cfg).unwrap();
    assert_eq!(net.diagnostics.epochs_run, 12);
    assert_eq!(net.diagnostics.optimizer_steps, 12 * 4);
    assert!(net.diagnostics.final_mse < net.diagnostics.initial_mse);
    assert!(!net.unstable());
    assert_eq!(train_nn(&ds, &cfg).unwrap(), net);
}

#[test]
fn prediction_is_independent_of_batching() {
    let net = MlpNetwork::new(50.0, 2);
    let xs: Vec<Vec3> = (0..2500).map(|i| Vec3::new(i as f64 * 1e-3, 1.0, -0.5)).collect();
    let all = predict_nn(&net, &xs);
    let piecewise: Vec<Vec3> = xs.chunks(7).flat_map(|c| predict_nn(&net, c)).collect();
    let worst = all.iter().zip(&piecewise).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    // gemm blocking depends on the column count, so only rounding may differ
    assert!(worst < 1e-13, "{worst}");
    assert_eq!(predict_nn(&net, &xs[..1]), vec![net.forward(&xs[0])]);
    assert!(predict_nn(&net, &[]).is_empty());
}

#[test]
fn too_few_samples_is_config_error() {
    let ds = orbit_dataset(10);
    let cfg = NnTrainConfig { epochs: 1, batch_size: Some(64), ..NnTrainConfig::default() };
    assert!(train_nn(&ds, &cfg).is_err());
}
