//! Dataset generation: initial-condition sampling, collision filtering,
//! trajectory datasets, state/acceleration noise injection and the
//! train / interpolation / extrapolation split.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    classify_collision, elements_to_state, propagate_and_sample, CollisionScreen,
    KeplerianElements, SampledTrajectory, TrajectorySpec,
};
use crate::gravity::ZonalGravityField;
use crate::seed;
use crate::{Error, Result, Vec3};

/// Target median acceleration magnitude after scaling.
pub const ACCEL_SCALE_TARGET: f64 = 10.0;
/// Number of domain samples used to calibrate the acceleration scale.
pub const ACCEL_SCALE_SAMPLES: usize = 10_000;
pub const DEFAULT_SIPHON_FRACTION: f64 = 0.05;

/// Uniform sampling bounds for the instantaneous orbital elements. Angles in
/// degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementRanges {
    pub semi_major: (f64, f64),
    pub eccentricity: (f64, f64),
    pub inclination_deg: (f64, f64),
    pub raan_deg: (f64, f64),
    pub arg_periapsis_deg: (f64, f64),
    pub true_anomaly_deg: (f64, f64),
}

impl Default for ElementRanges {
    fn default() -> Self {
        Self {
            semi_major: (1.25, 3.0),
            eccentricity: (0.05, 0.75),
            inclination_deg: (0.0, 180.0),
            raan_deg: (0.0, 180.0),
            arg_periapsis_deg: (0.0, 180.0),
            true_anomaly_deg: (0.0, 180.0),
        }
    }
}

impl ElementRanges {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, (lo, hi): (f64, f64)| -> Result<()> {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("range {name} = [{lo}, {hi}] is invalid")));
            }
            Ok(())
        };
        check("semi_major", self.semi_major)?;
        check("eccentricity", self.eccentricity)?;
        if self.semi_major.0 <= 0.0 {
            return Err(Error::Config("semi_major lower bound must be positive".into()));
        }
        if self.eccentricity.0 < 0.0 || self.eccentricity.1 >= 1.0 {
            return Err(Error::Config("eccentricity must lie in [0, 1)".into()));
        }
        check("inclination", self.inclination_deg)?;
        if self.inclination_deg.0 < 0.0 || self.inclination_deg.1 > 180.0 {
            return Err(Error::Config("inclination must lie in [0, 180] degrees".into()));
        }
        for (name, r) in [
            ("raan", self.raan_deg),
            ("arg_periapsis", self.arg_periapsis_deg),
            ("true_anomaly", self.true_anomaly_deg),
        ] {
            check(name, r)?;
            if r.0 < 0.0 || r.1 > 360.0 {
                return Err(Error::Config(format!("{name} must lie in [0, 360] degrees")));
            }
        }
        Ok(())
    }

    /// Bounds in working units (angles in radians), ordered like
    /// [`KeplerianElements::as_array`].
    pub fn bounds(&self) -> [(f64, f64); 6] {
        let rad = |(lo, hi): (f64, f64)| (lo.to_radians(), hi.to_radians());
        [
            self.semi_major,
            self.eccentricity,
            rad(self.inclination_deg),
            rad(self.raan_deg),
            rad(self.arg_periapsis_deg),
            rad(self.true_anomaly_deg),
        ]
    }
}

fn draw_elements<R: Rng>(ranges: &ElementRanges, rng: &mut R) -> KeplerianElements {
    let b = ranges.bounds();
    let mut v = [0.0; 6];
    for (slot, (lo, hi)) in v.iter_mut().zip(b) {
        let u: f64 = rng.random();
        *slot = lo + (hi - lo) * u;
    }
    // 360 degrees is the same angle as 0
    for a in &mut v[3..] {
        if *a >= 2.0 * PI {
            *a -= 2.0 * PI;
        }
    }
    KeplerianElements::from_array(v)
}

/// Independent uniform draws of every element within its bounds.
pub fn sample_initial_conditions(
    ranges: &ElementRanges,
    count: usize,
    rng_seed: u64,
) -> Result<Vec<KeplerianElements>> {
    ranges.validate()?;
    let mut rng = seed::rng(rng_seed);
    Ok((0..count).map(|_| draw_elements(ranges, &mut rng)).collect())
}

/// Continuous stream of draws for rejection sampling.
pub(crate) struct ElementStream {
    ranges: ElementRanges,
    rng: rand_chacha::ChaCha8Rng,
}

impl ElementStream {
    pub(crate) fn new(ranges: ElementRanges, rng_seed: u64) -> Result<Self> {
        ranges.validate()?;
        Ok(Self {
            ranges,
            rng: seed::rng(rng_seed),
        })
    }

    pub(crate) fn next_elements(&mut self) -> KeplerianElements {
        draw_elements(&self.ranges, &mut self.rng)
    }
}

/// Splits initial conditions into (collision-free, colliding), preserving order.
pub fn filter_collision_free(
    field: &ZonalGravityField,
    ics: &[KeplerianElements],
    screen: &CollisionScreen,
) -> (Vec<KeplerianElements>, Vec<KeplerianElements>) {
    let mut free = Vec::new();
    let mut colliding = Vec::new();
    for el in ics {
        if is_collision_free(field, el, screen) {
            free.push(*el);
        } else {
            colliding.push(*el);
        }
    }
    (free, colliding)
}

pub fn is_collision_free(field: &ZonalGravityField, el: &KeplerianElements, screen: &CollisionScreen) -> bool {
    match elements_to_state(el, field.mu()) {
        Ok(state) => !classify_collision(field, &state, screen),
        Err(_) => false,
    }
}

/// Multiplier applied to every acceleration so the median magnitude over a
/// uniform sample of the initial-condition domain equals
/// [`ACCEL_SCALE_TARGET`].
pub fn calibrate_accel_scale(field: &ZonalGravityField, ranges: &ElementRanges, rng_seed: u64) -> Result<f64> {
    let els = sample_initial_conditions(ranges, ACCEL_SCALE_SAMPLES, rng_seed)?;
    let mut mags = Vec::with_capacity(els.len());
    for el in &els {
        let s = elements_to_state(el, field.mu())?;
        mags.push(field.acceleration(&s.position)?.norm());
    }
    mags.sort_by(|a, b| a.total_cmp(b));
    let n = mags.len();
    let median = if n % 2 == 1 {
        mags[n / 2]
    } else {
        0.5 * (mags[n / 2 - 1] + mags[n / 2])
    };
    if !(median > 0.0) {
        return Err(Error::Domain("median acceleration is zero".into()));
    }
    Ok(ACCEL_SCALE_TARGET / median)
}

/// Zero-mean isotropic Gaussian noise levels. `sigma_accel` is in scaled
/// acceleration units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_state: f64,
    pub sigma_accel: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_state >= 0.0 && self.sigma_accel >= 0.0)
            || !self.sigma_state.is_finite()
            || !self.sigma_accel.is_finite()
        {
            return Err(Error::Config(format!("noise levels must be nonnegative: {self:?}")));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.sigma_state == 0.0 && self.sigma_accel == 0.0
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProvenance {
    pub ic: Option<KeplerianElements>,
    pub spec: Option<TrajectorySpec>,
    pub base_period: Option<f64>,
    pub accel_scale: f64,
    pub noise: NoiseSpec,
    pub noise_seed: Option<u64>,
    pub shuffle_seed: Option<u64>,
    /// Samples dropped because a state-noise draw landed inside the body twice.
    pub dropped: usize,
}

impl DatasetProvenance {
    pub fn new(accel_scale: f64) -> Self {
        Self {
            ic: None,
            spec: None,
            base_period: None,
            accel_scale,
            noise: NoiseSpec::none(),
            noise_seed: None,
            shuffle_seed: None,
            dropped: 0,
        }
    }
}

/// Position / acceleration pairs as seen by a learner, plus the pre-noise
/// truth kept for evaluation only.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDataset {
    pub times: Vec<f64>,
    pub inputs: Vec<Vec3>,
    pub targets: Vec<Vec3>,
    pub truth_inputs: Vec<Vec3>,
    pub truth_targets: Vec<Vec3>,
    pub provenance: DatasetProvenance,
}

impl SampledDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Number of stored values, `6 N`.
    pub fn data_volume(&self) -> usize {
        6 * self.len()
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            times: indices.iter().map(|&i| self.times[i]).collect(),
            inputs: indices.iter().map(|&i| self.inputs[i]).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            truth_inputs: indices.iter().map(|&i| self.truth_inputs[i]).collect(),
            truth_targets: indices.iter().map(|&i| self.truth_targets[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if [
            self.times.len(),
            self.targets.len(),
            self.truth_inputs.len(),
            self.truth_targets.len(),
        ]
        .iter()
        .any(|&m| m != n)
        {
            return Err(Error::Parse("dataset columns have different lengths".into()));
        }
        Ok(())
    }

    /// Writes `t,x1,x2,x3,ax,ay,az,true_x1,true_x2,true_x3,true_ax,true_ay,true_az`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record([
            "t", "x1", "x2", "x3", "ax", "ay", "az", "true_x1", "true_x2", "true_x3", "true_ax",
            "true_ay", "true_az",
        ])
        .map_err(|e| csv_err(path, e))?;
        for i in 0..self.len() {
            let mut row = Vec::with_capacity(13);
            row.push(self.times[i].to_string());
            for v in [&self.inputs[i], &self.targets[i], &self.truth_inputs[i], &self.truth_targets[i]] {
                row.extend(v.iter().map(|c| c.to_string()));
            }
            w.write_record(&row).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, provenance: DatasetProvenance) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut ds = SampledDataset {
            times: vec![],
            inputs: vec![],
            targets: vec![],
            truth_inputs: vec![],
            truth_targets: vec![],
            provenance,
        };
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            if rec.len() != 13 {
                return Err(Error::Parse(format!("{}: expected 13 columns", path.display())));
            }
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("{}: {e}", path.display()))))
                .collect::<Result<_>>()?;
            let v3 = |k: usize| Vec3::new(vals[k], vals[k + 1], vals[k + 2]);
            ds.times.push(vals[0]);
            ds.inputs.push(v3(1));
            ds.targets.push(v3(4));
            ds.truth_inputs.push(v3(7));
            ds.truth_targets.push(v3(10));
        }
        Ok(ds)
    }

    /// Writes the CSV plus a `.json` provenance sidecar next to it.
    pub fn write_with_sidecar(&self, csv_path: &Path) -> Result<()> {
        self.write_csv(csv_path)?;
        let sidecar = csv_path.with_extension("json");
        let json = serde_json::to_string_pretty(&self.provenance).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(&sidecar, json + "\n").map_err(|e| Error::io(sidecar, e))
    }

    pub fn read_with_sidecar(csv_path: &Path) -> Result<Self> {
        let sidecar = csv_path.with_extension("json");
        let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let prov: DatasetProvenance =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", sidecar.display())))?;
        Self::read_csv(csv_path, prov)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse(format!("{}: {other:?}", path.display())),
        }
    } else {
        Error::Parse(format!("{}: {e}", path.display()))
    }
}

/// Positions become inputs and scaled truth accelerations become targets.
pub fn build_dataset(traj: &SampledTrajectory, provenance: DatasetProvenance) -> SampledDataset {
    let scale = provenance.accel_scale;
    let inputs: Vec<Vec3> = traj.states.iter().map(|s| s.position).collect();
    let targets: Vec<Vec3> = traj.true_accelerations.iter().map(|a| a * scale).collect();
    SampledDataset {
        times: traj.times.clone(),
        truth_inputs: inputs.clone(),
        truth_targets: targets.clone(),
        inputs,
        targets,
        provenance: DatasetProvenance {
            base_period: Some(traj.base_period),
            ..provenance
        },
    }
}

fn normal3<R: Rng>(rng: &mut R) -> Vec3 {
    Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Observed pairs `x = x_true + e_s`, `a = a(x_true + e_s) + e_a`.
///
/// State noise corrupts the target through the field itself. A state draw
/// landing inside the reference sphere is redrawn once, then the sample is
/// dropped. Standard-normal draws are consumed identically for every noise
/// level so runs that differ only in sigma share their random numbers.
pub fn inject_noise(
    ds: &SampledDataset,
    noise: &NoiseSpec,
    field: &ZonalGravityField,
    rng_seed: u64,
) -> Result<SampledDataset> {
    noise.validate()?;
    let mut out = ds.clone();
    out.provenance.noise = *noise;
    out.provenance.noise_seed = Some(rng_seed);
    if noise.is_identity() {
        return Ok(out);
    }
    let scale = ds.provenance.accel_scale;
    let body = field.reference_radius();
    let mut rng = seed::rng(rng_seed);
    let mut keep = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let x_true = ds.truth_inputs[i];
        let mut z_state = normal3(&mut rng);
        let z_accel = normal3(&mut rng);
        let mut x_obs = x_true + z_state * noise.sigma_state;
        if noise.sigma_state > 0.0 && x_obs.norm() < body {
            z_state = normal3(&mut rng);
            x_obs = x_true + z_state * noise.sigma_state;
            if x_obs.norm() < body {
                log::warn!("sample {i}: state noise landed inside the body twice, dropped");
                out.provenance.dropped += 1;
                continue;
            }
        }
        let a_clean = if noise.sigma_state > 0.0 {
            field.acceleration(&x_obs)? * scale
        } else {
            ds.truth_targets[i]
        };
        out.inputs[i] = x_obs;
        out.targets[i] = a_clean + z_accel * noise.sigma_accel;
        keep.push(i);
    }
    if keep.len() == ds.len() {
        Ok(out)
    } else {
        let prov = out.provenance.clone();
        let mut kept = out.select(&keep);
        kept.provenance = prov;
        Ok(kept)
    }
}

/// Uniform random permutation; the first `round(fraction * N)` samples become
/// the interpolation test set. Returns `(train, interp_test)`.
pub fn shuffle_split(
    ds: &SampledDataset,
    siphon_fraction: f64,
    rng_seed: u64,
) -> Result<(SampledDataset, SampledDataset)> {
    if !(siphon_fraction > 0.0 && siphon_fraction < 1.0) {
        return Err(Error::Config(format!(
            "siphon fraction must lie in (0, 1), got {siphon_fraction}"
        )));
    }
    if ds.len() < 2 {
        return Err(Error::Config("shuffle_split needs at least two samples".into()));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut seed::rng(rng_seed));
    let n_test = ((siphon_fraction * ds.len() as f64).round() as usize).clamp(0, ds.len());
    let mut test = ds.select(&order[..n_test]);
    let mut train = ds.select(&order[n_test..]);
    test.provenance.shuffle_seed = Some(rng_seed);
    train.provenance.shuffle_seed = Some(rng_seed);
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub train: SampledDataset,
    pub interp_test: SampledDataset,
    pub extrap_test: SampledDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleSeeds {
    pub shuffle: u64,
    pub train_noise: u64,
    pub extrap_noise: u64,
}

impl BundleSeeds {
    pub fn derive(base_seed: u64, ic_index: u64) -> Self {
        Self {
            shuffle: seed::derive_seed(base_seed, ic_index, seed::STREAM_SHUFFLE),
            train_noise: seed::derive_seed(base_seed, ic_index, seed::STREAM_TRAIN_NOISE),
            extrap_noise: seed::derive_seed(base_seed, ic_index, seed::STREAM_EXTRAP_NOISE),
        }
    }
}

/// Everything needed to build a bundle besides the field and the ICs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleSpec {
    pub train: TrajectorySpec,
    pub extrap: TrajectorySpec,
    pub noise: NoiseSpec,
    pub siphon_fraction: f64,
    pub accel_scale: f64,
    pub screen: CollisionScreen,
}

/// Training/interpolation data from one initial condition and extrapolation
/// data from a second, distinct one.
pub fn build_bundle(
    field: &ZonalGravityField,
    ic_train: &KeplerianElements,
    ic_extrap: &KeplerianElements,
    spec: &BundleSpec,
    seeds: &BundleSeeds,
) -> Result<DatasetBundle> {
    if ic_train == ic_extrap {
        return Err(Error::RejectedIc(
            "extrapolation trajectory must start from a different initial condition".into(),
        ));
    }
    for (name, ic) in [("training", ic_train), ("extrapolation", ic_extrap)] {
        if !is_collision_free(field, ic, &spec.screen) {
            return Err(Error::RejectedIc(format!("{name} initial condition fails the collision screen")));
        }
    }
    let make = |ic: &KeplerianElements, tspec: &TrajectorySpec, noise_seed: u64| -> Result<SampledDataset> {
        let state = elements_to_state(ic, field.mu())?;
        let traj = propagate_and_sample(field, &state, tspec)?;
        let mut prov = DatasetProvenance::new(spec.accel_scale);
        prov.ic = Some(*ic);
        prov.spec = Some(*tspec);
        let ds = build_dataset(&traj, prov);
        inject_noise(&ds, &spec.noise, field, noise_seed)
    };
    let full = make(ic_train, &spec.train, seeds.train_noise)?;
    let (train, interp_test) = shuffle_split(&full, spec.siphon_fraction, seeds.shuffle)?;
    let extrap_test = make(ic_extrap, &spec.extrap, seeds.extrap_noise)?;
    Ok(DatasetBundle {
        train,
        interp_test,
        extrap_test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::CartesianState;

    fn small_dataset() -> SampledDataset {
        let f = ZonalGravityField::bennu_normalized();
        let s = CartesianState::new(Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 0.6, 0.2)).unwrap();
        let traj = propagate_and_sample(&f, &s, &TrajectorySpec::new(2.0, 25).unwrap()).unwrap();
        build_dataset(&traj, DatasetProvenance::new(30.0))
    }

    #[test]
    fn empty_and_deterministic_draws() {
        let r = ElementRanges::default();
        assert!(sample_initial_conditions(&r, 0, 1).unwrap().is_empty());
        let a = sample_initial_conditions(&r, 50, 9).unwrap();
        assert_eq!(a, sample_initial_conditions(&r, 50, 9).unwrap());
        assert_ne!(a, sample_initial_conditions(&r, 50, 10).unwrap());
    }

    #[test]
    fn draws_within_bounds() {
        let r = ElementRanges::default();
        for el in sample_initial_conditions(&r, 2000, 3).unwrap() {
            for (v, (lo, hi)) in el.as_array().iter().zip(r.bounds()) {
                assert!(*v >= lo && *v <= hi);
            }
        }
    }

    #[test]
    fn invalid_ranges_rejected() {
        let r = ElementRanges {
            eccentricity: (0.5, 0.2),
            ..Default::default()
        };
        assert!(sample_initial_conditions(&r, 1, 0).is_err());
        let r = ElementRanges {
            raan_deg: (0.0, 400.0),
            ..Default::default()
        };
        assert!(r.validate().is_err());
        let r = ElementRanges {
            raan_deg: (0.0, 360.0),
            ..Default::default()
        };
        assert!(r.validate().is_ok());
    }

    #[test]
    fn build_dataset_volume_and_order() {
        let ds = small_dataset();
        assert_eq!(ds.len(), 50);
        assert_eq!(ds.data_volume(), 300);
        assert_eq!(ds.inputs, ds.truth_inputs);
        assert_eq!(ds.targets, ds.truth_targets);
        assert!(ds.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn zero_noise_is_identity() {
        let ds = small_dataset();
        let f = ZonalGravityField::bennu_normalized();
        let out = inject_noise(&ds, &NoiseSpec::none(), &f, 4).unwrap();
        assert_eq!(out.inputs, ds.inputs);
        assert_eq!(out.targets, ds.targets);
    }

    #[test]
    fn state_noise_passes_through_field() {
        let ds = small_dataset();
        let f = ZonalGravityField::bennu_normalized();
        let noise = NoiseSpec {
            sigma_state: 0.1,
            sigma_accel: 0.0,
        };
        let out = inject_noise(&ds, &noise, &f, 4).unwrap();
        assert_eq!(out.truth_inputs, ds.truth_inputs);
        for (x, a) in out.inputs.iter().zip(&out.targets) {
            assert_eq!(*a, f.acceleration(x).unwrap() * 30.0);
        }
        assert!(out.inputs.iter().zip(&ds.inputs).any(|(a, b)| a != b));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let mut ds = small_dataset();
        // grow to 500 samples by repetition
        let idx: Vec<usize> = (0..500).map(|i| i % 50).collect();
        ds = ds.select(&idx);
        let (train, test) = shuffle_split(&ds, 0.05, 11).unwrap();
        assert_eq!((train.len(), test.len()), (475, 25));
        let (train2, test2) = shuffle_split(&ds, 0.05, 11).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        assert!(shuffle_split(&ds, 0.0, 1).is_err());
        assert!(shuffle_split(&ds, 1.0, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = small_dataset();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        ds.write_with_sidecar(&p).unwrap();
        let back = SampledDataset::read_with_sidecar(&p).unwrap();
        assert_eq!(back, ds);
        let header = std::fs::read_to_string(&p).unwrap();
        assert!(header.starts_with("t,x1,x2,x3,ax,ay,az,true_x1,true_x2,true_x3,true_ax,true_ay,true_az\n"));
    }
}
