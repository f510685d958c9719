use orbitlearn::data::*;
use orbitlearn::dynamics::{elements_to_state, propagate_and_sample, CollisionScreen, KeplerianElements, TrajectorySpec};
use orbitlearn::gravity::ZonalGravityField;
use orbitlearn::{Error, Vec3};

fn ks_uniform(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (x - lo) / (hi - lo);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn synthetic(n: usize, scale: f64) -> SampledDataset {
    let field = ZonalGravityField::bennu_normalized();
    let inputs: Vec<Vec3> = (0..n)
        .map(|i| {
            let t = i as f64 * 0.37;
            Vec3::new(2.0 * t.cos(), 2.0 * t.sin(), 0.5 * (0.3 * t).sin())
        })
        .collect();
    let targets: Vec<Vec3> = inputs.iter().map(|x| field.acceleration(x).unwrap() * scale).collect();
    SampledDataset {
        times: (0..n).map(|i| i as f64).collect(),
        truth_inputs: inputs.clone(),
        truth_targets: targets.clone(),
        inputs,
        targets,
        provenance: DatasetProvenance::new(scale),
    }
}

#[test]
fn element_marginals_are_uniform() {
    let ranges = ElementRanges::default();
    let els = sample_initial_conditions(&ranges, 10_000, 2024).unwrap();
    for (k, (lo, hi)) in ranges.bounds().into_iter().enumerate() {
        let d = ks_uniform(els.iter().map(|e| e.as_array()[k]).collect(), lo, hi);
        assert!(d < 0.02, "element {k}: KS {d}");
    }
    assert!(sample_initial_conditions(&ranges, 0, 1).unwrap().is_empty());
}

#[test]
fn acceleration_noise_has_requested_spread() {
    let ds = synthetic(100_000 / 3 + 1, 10.0);
    let noise = NoiseSpec { sigma_state: 0.0, sigma_accel: 0.3 };
    let out = inject_noise(&ds, &noise, &ZonalGravityField::bennu_normalized(), 5).unwrap();
    let d: Vec<f64> = out
        .targets
        .iter()
        .zip(&ds.targets)
        .flat_map(|(a, b)| (a - b).iter().copied().collect::<Vec<_>>())
        .collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt();
    assert!((0.294..=0.306).contains(&sd), "sd {sd}");
    assert_eq!(out.inputs, ds.inputs);
}

#[test]
fn state_noise_targets_follow_the_field() {
    let field = ZonalGravityField::bennu_normalized();
    let ds = synthetic(500, 7.0);
    let noise = NoiseSpec { sigma_state: 0.1, sigma_accel: 0.0 };
    let out = inject_noise(&ds, &noise, &field, 9).unwrap();
    assert_eq!(out.len(), ds.len());
    for (x, a) in out.inputs.iter().zip(&out.targets) {
        assert_eq!(*a, field.acceleration(x).unwrap() * 7.0);
    }
    assert_eq!(out.truth_inputs, ds.truth_inputs);
    assert_ne!(out.inputs, ds.inputs);
}

#[test]
fn zero_noise_is_identity() {
    let ds = synthetic(50, 3.0);
    let out = inject_noise(&ds, &NoiseSpec::none(), &ZonalGravityField::bennu_normalized(), 1).unwrap();
    assert_eq!(out.inputs, ds.inputs);
    assert_eq!(out.targets, ds.targets);
}

#[test]
fn split_is_a_partition() {
    let ds = synthetic(500, 1.0);
    let (train, test) = shuffle_split(&ds, 0.05, 3).unwrap();
    assert_eq!((train.len(), test.len()), (475, 25));
    let mut all: Vec<f64> = train.times.iter().chain(&test.times).copied().collect();
    all.sort_by(f64::total_cmp);
    assert_eq!(all, ds.times);
    let again = shuffle_split(&ds, 0.05, 3).unwrap();
    assert_eq!(again.0, train);
    assert!(matches!(shuffle_split(&ds, 1.0, 3), Err(Error::Config(_))));
}

#[test]
fn trajectory_dataset_volume() {
    let field = ZonalGravityField::bennu_normalized();
    let el = KeplerianElements::from_array([2.2, 0.1, 0.5, 0.1, 0.2, 0.3]);
    let traj = propagate_and_sample(&field, &elements_to_state(&el, 1.0).unwrap(), &TrajectorySpec::new(10.0, 25).unwrap()).unwrap();
    let ds = build_dataset(&traj, DatasetProvenance::new(2.0));
    assert_eq!(ds.len(), 250);
    assert_eq!(ds.data_volume(), 1500);
    assert_eq!(ds.inputs, ds.truth_inputs);
    for (x, s) in ds.inputs.iter().zip(&traj.states) {
        assert_eq!(*x, s.position);
    }
}

#[test]
fn collision_partition() {
    let field = ZonalGravityField::bennu_normalized();
    let low = KeplerianElements::from_array([1.25, 0.75, 0.3, 0.0, 0.0, 0.0]);
    let high = KeplerianElements::from_array([3.0, 0.05, 0.3, 0.0, 0.0, 0.0]);
    let (free, colliding) = filter_collision_free(&field, &[low, high, low], &CollisionScreen::default());
    assert_eq!(free, vec![high]);
    assert_eq!(colliding, vec![low, low]);
    let (a, b) = filter_collision_free(&field, &[], &CollisionScreen::default());
    assert!(a.is_empty() && b.is_empty());
}

#[test]
fn bundle_sizes_and_rejection() {
    let field = ZonalGravityField::bennu_normalized();
    let ic_a = KeplerianElements::from_array([2.5, 0.1, 0.5, 0.1, 0.2, 0.3]);
    let ic_b = KeplerianElements::from_array([2.8, 0.2, 1.5, 0.4, 0.9, 1.3]);
    let spec = BundleSpec {
        train: TrajectorySpec::new(10.0, 25).unwrap().with_steps_per_period(200).unwrap(),
        extrap: TrajectorySpec::new(3.0, 25).unwrap().with_steps_per_period(200).unwrap(),
        noise: NoiseSpec::none(),
        siphon_fraction: 0.05,
        accel_scale: 10.0,
        screen: CollisionScreen { periods: 5.0, ..CollisionScreen::default() },
    };
    let seeds = BundleSeeds::derive(1, 0);
    let b = build_bundle(&field, &ic_a, &ic_b, &spec, &seeds).unwrap();
    assert_eq!(b.train.len() + b.interp_test.len(), 250);
    assert_eq!(b.interp_test.len(), 13);
    assert_eq!(b.extrap_test.len(), 75);
    assert!(matches!(build_bundle(&field, &ic_a, &ic_a, &spec, &seeds), Err(Error::RejectedIc(_))));
}

#[test]
fn csv_sidecar_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let mut ds = synthetic(40, 4.0);
    ds.provenance.noise_seed = Some(12);
    ds.write_with_sidecar(&path).unwrap();
    let back = SampledDataset::read_with_sidecar(&path).unwrap();
    assert_eq!(back, ds);
}
