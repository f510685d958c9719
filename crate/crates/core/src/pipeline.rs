//! Initial-condition lists, single runs, parallel sweeps and their outputs.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::characterize::{
    characterize, loglog_fit, summarize_values, CharacterizationReport, CorrelationFit, ErrorSummary, SetLabel,
    TruthModel,
};
use crate::config::{ContextConfig, DataVolume, Framework, RunConfig, SweepSpec};
use crate::data::{build_bundle, is_collision_free, BundleSeeds, BundleSpec, DatasetBundle, ElementStream, NoiseSpec, SampledDataset};
use crate::dynamics::{KeplerianElements, TrajectorySpec};
use crate::gp::{train_gp, GpDiagnostics, GpHyperparams, TrainedGp};
use crate::nn::{train_nn, Layer, MlpNetwork, NnDiagnostics};
use crate::{seed, Error, Regressor, Result, Vec3};

/// Minimum screen acceptance rate, checked once this many draws are made.
pub const IC_ACCEPTANCE_FLOOR: f64 = 0.01;
pub const IC_ACCEPTANCE_CHECK_DRAWS: usize = 100_000;

/// Training and extrapolation initial conditions for one sweep slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcPair {
    pub index: usize,
    pub train: KeplerianElements,
    pub extrap: KeplerianElements,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcList {
    pub seed: u64,
    pub pairs: Vec<IcPair>,
}

const IC_COLUMNS: [&str; 6] = ["a", "e", "i", "raan", "argp", "nu"];

impl IcList {
    pub fn get(&self, index: usize) -> Result<&IcPair> {
        self.pairs
            .iter()
            .find(|p| p.index == index)
            .ok_or_else(|| Error::NotFound(format!("initial condition {index}")))
    }

    /// One row per pair: index, seed, then the training and extrapolation
    /// elements (angles in radians).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,seed");
        for prefix in ["train", "extrap"] {
            for c in IC_COLUMNS {
                out.push_str(&format!(",{prefix}_{c}"));
            }
        }
        out.push('\n');
        for p in &self.pairs {
            out.push_str(&format!("{},{}", p.index, self.seed));
            for el in [&p.train, &p.extrap] {
                for v in el.as_array() {
                    out.push_str(&format!(",{v}"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut seed = 0;
        let mut pairs = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            if rec.len() != 14 {
                return Err(Error::Parse(format!("{}: expected 14 columns", path.display())));
            }
            let bad = |e: String| Error::Parse(format!("{}: {e}", path.display()));
            let index: usize = rec[0].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
            seed = rec[1].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
            let vals: Vec<f64> = (2..14)
                .map(|k| rec[k].parse::<f64>().map_err(|e| bad(e.to_string())))
                .collect::<Result<_>>()?;
            let el = |o: usize| KeplerianElements::from_array([vals[o], vals[o + 1], vals[o + 2], vals[o + 3], vals[o + 4], vals[o + 5]]);
            pairs.push(IcPair {
                index,
                train: el(0),
                extrap: el(6),
            });
        }
        Ok(Self { seed, pairs })
    }
}

/// Rejection-samples `count` pairs of collision-free initial conditions.
pub fn generate_ic_list(ctx: &ContextConfig, count: usize, rng_seed: u64) -> Result<IcList> {
    let mut stream = ElementStream::new(ctx.ranges, rng_seed)?;
    let mut accepted = Vec::with_capacity(2 * count);
    let mut draws = 0usize;
    while accepted.len() < 2 * count {
        let el = stream.next_elements();
        draws += 1;
        if is_collision_free(&ctx.field, &el, &ctx.screen) {
            accepted.push(el);
        }
        if draws == IC_ACCEPTANCE_CHECK_DRAWS && (accepted.len() as f64) < IC_ACCEPTANCE_FLOOR * draws as f64 {
            return Err(Error::Infeasible(format!(
                "only {} of {draws} draws passed the collision screen",
                accepted.len()
            )));
        }
    }
    let pairs = accepted
        .chunks_exact(2)
        .enumerate()
        .map(|(index, c)| IcPair {
            index,
            train: c[0],
            extrap: c[1],
        })
        .collect();
    Ok(IcList { seed: rng_seed, pairs })
}

/// A trained model of any supported framework.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Gp(TrainedGp),
    Nn(MlpNetwork),
    Truth(TruthModel),
}

impl Regressor for TrainedModel {
    fn predict(&self, positions: &[Vec3]) -> Vec<Vec3> {
        match self {
            TrainedModel::Gp(m) => m.predict(positions),
            TrainedModel::Nn(m) => m.predict(positions),
            TrainedModel::Truth(m) => m.predict(positions),
        }
    }

    fn unstable(&self) -> bool {
        match self {
            TrainedModel::Gp(m) => m.unstable(),
            TrainedModel::Nn(m) => m.unstable(),
            TrainedModel::Truth(m) => m.unstable(),
        }
    }
}

impl TrainedModel {
    pub fn framework(&self) -> Framework {
        match self {
            TrainedModel::Gp(_) => Framework::Gp,
            TrainedModel::Nn(_) => Framework::Nn,
            TrainedModel::Truth(_) => Framework::Truth,
        }
    }

    fn diagnostics_json(&self) -> serde_json::Value {
        match self {
            TrainedModel::Gp(m) => serde_json::to_value(&m.diagnostics),
            TrainedModel::Nn(m) => serde_json::to_value(&m.diagnostics),
            TrainedModel::Truth(_) => Ok(serde_json::Value::Null),
        }
        .expect("diagnostics serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub shuffle: u64,
    pub train_noise: u64,
    pub extrap_noise: u64,
    pub model: u64,
}

impl RunSeeds {
    pub fn derive(base_seed: u64, ic_index: u64) -> Self {
        let b = BundleSeeds::derive(base_seed, ic_index);
        Self {
            shuffle: b.shuffle,
            train_noise: b.train_noise,
            extrap_noise: b.extrap_noise,
            model: seed::derive_seed(base_seed, ic_index, seed::STREAM_MODEL),
        }
    }

    pub fn bundle(&self) -> BundleSeeds {
        BundleSeeds {
            shuffle: self.shuffle,
            train_noise: self.train_noise,
            extrap_noise: self.extrap_noise,
        }
    }
}

/// Everything recorded about one characterization run. Wall-clock timing is
/// kept out so that reruns produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub framework: Framework,
    pub ic_index: usize,
    pub ic: IcPair,
    pub noise: NoiseSpec,
    pub volume: DataVolume,
    pub accel_scale: f64,
    pub seeds: RunSeeds,
    pub config_hash: String,
    /// Samples dropped by state noise, training then extrapolation trajectory.
    pub dropped: [usize; 2],
    pub characterization: CharacterizationReport,
    pub model_diagnostics: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub model: TrainedModel,
    pub bundle: DatasetBundle,
    pub wall_clock_seconds: f64,
}

pub fn bundle_spec(ctx: &ContextConfig, run: &RunConfig) -> Result<BundleSpec> {
    let spec = |periods: f64| {
        TrajectorySpec::new(periods, run.samples_per_period).and_then(|s| s.with_steps_per_period(run.steps_per_period))
    };
    Ok(BundleSpec {
        train: spec(run.volume.train_periods)?,
        extrap: spec(run.volume.extrap_periods)?,
        noise: run.noise,
        siphon_fraction: run.siphon_fraction,
        accel_scale: ctx.accel_scale,
        screen: ctx.screen,
    })
}

pub fn train_model(ctx: &ContextConfig, run: &RunConfig, train: &SampledDataset, model_seed: u64) -> Result<TrainedModel> {
    Ok(match run.framework {
        Framework::Gp => TrainedModel::Gp(train_gp(train, &run.gp)?),
        Framework::Nn => {
            let cfg = crate::nn::NnTrainConfig {
                seed: model_seed,
                ..run.nn
            };
            TrainedModel::Nn(train_nn(train, &cfg)?)
        }
        Framework::Truth => TrainedModel::Truth(TruthModel {
            field: ctx.field.clone(),
            accel_scale: ctx.accel_scale,
        }),
    })
}

/// Builds the data bundle for one IC pair, trains and characterizes.
pub fn run_single(ctx: &ContextConfig, run: &RunConfig, ic: &IcPair, config_hash: &str) -> Result<RunOutcome> {
    run.validate()?;
    let start = Instant::now();
    let seeds = RunSeeds::derive(run.base_seed, ic.index as u64);
    let bundle = build_bundle(&ctx.field, &ic.train, &ic.extrap, &bundle_spec(ctx, run)?, &seeds.bundle())?;
    let model = train_model(ctx, run, &bundle.train, seeds.model)?;
    let characterization = characterize(&model, &bundle)?;
    let report = RunReport {
        framework: run.framework,
        ic_index: ic.index,
        ic: *ic,
        noise: run.noise,
        volume: run.volume,
        accel_scale: ctx.accel_scale,
        seeds,
        config_hash: config_hash.to_string(),
        dropped: [bundle.train.provenance.dropped, bundle.extrap_test.provenance.dropped],
        characterization,
        model_diagnostics: model.diagnostics_json(),
    };
    Ok(RunOutcome {
        report,
        model,
        bundle,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(seed::sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnLayerFile {
    pub rows: usize,
    pub cols: usize,
    /// Raw weight, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// On-disk model format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "framework", rename_all = "lowercase")]
pub enum ModelFile {
    Gp {
        hyperparams: [GpHyperparams; 3],
        diagnostics: GpDiagnostics,
        /// Training CSV, relative to the model file, with a provenance sidecar.
        training_data: String,
        training_sha256: String,
    },
    Nn {
        lipschitz_budget: f64,
        diagnostics: NnDiagnostics,
        layers: Vec<NnLayerFile>,
    },
    Truth {
        field: crate::gravity::ZonalGravityField,
        accel_scale: f64,
    },
}

fn nn_to_file(net: &MlpNetwork) -> ModelFile {
    ModelFile::Nn {
        lipschitz_budget: net.lipschitz_budget,
        diagnostics: net.diagnostics.clone(),
        layers: net
            .layers
            .iter()
            .map(|l| NnLayerFile {
                rows: l.weight.nrows(),
                cols: l.weight.ncols(),
                weight: l.weight.transpose().as_slice().to_vec(),
                bias: l.bias.as_slice().to_vec(),
                u: l.u.as_slice().to_vec(),
                v: l.v.as_slice().to_vec(),
            })
            .collect(),
    }
}

fn nn_from_file(lipschitz_budget: f64, diagnostics: NnDiagnostics, layers: Vec<NnLayerFile>) -> Result<MlpNetwork> {
    let layers = layers
        .into_iter()
        .map(|l| {
            if l.weight.len() != l.rows * l.cols || l.bias.len() != l.rows || l.u.len() != l.rows || l.v.len() != l.cols {
                return Err(Error::Parse("inconsistent layer shapes in model file".into()));
            }
            Ok(Layer {
                weight: DMatrix::from_row_slice(l.rows, l.cols, &l.weight),
                bias: DVector::from_vec(l.bias),
                u: DVector::from_vec(l.u),
                v: DVector::from_vec(l.v),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if layers.len() != crate::nn::AFFINE_LAYERS {
        return Err(Error::Parse(format!("expected {} layers", crate::nn::AFFINE_LAYERS)));
    }
    Ok(MlpNetwork {
        layers,
        lipschitz_budget,
        diagnostics,
    })
}

/// Writes a model; GP models also write their training set next to it.
pub fn save_model(model: &TrainedModel, train: &SampledDataset, path: &Path) -> Result<()> {
    let file = match model {
        TrainedModel::Gp(gp) => {
            let data_name = format!(
                "{}.train.csv",
                path.file_stem().and_then(|s| s.to_str()).unwrap_or("model")
            );
            let data_path = path.with_file_name(&data_name);
            // the posterior conditions on exactly these points
            let mut ds = train.clone();
            ds.inputs = gp.inputs.clone();
            ds.targets = gp.targets.clone();
            ds.write_with_sidecar(&data_path)?;
            ModelFile::Gp {
                hyperparams: gp.hyperparams,
                diagnostics: gp.diagnostics.clone(),
                training_data: data_name,
                training_sha256: file_sha256(&data_path)?,
            }
        }
        TrainedModel::Nn(net) => nn_to_file(net),
        TrainedModel::Truth(t) => ModelFile::Truth {
            field: t.field.clone(),
            accel_scale: t.accel_scale,
        },
    };
    write_file(path, &to_json(&file))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    match read_json::<ModelFile>(path)? {
        ModelFile::Gp {
            hyperparams,
            diagnostics,
            training_data,
            training_sha256,
        } => {
            let data_path = path.parent().unwrap_or(Path::new(".")).join(&training_data);
            let digest = file_sha256(&data_path)?;
            if digest != training_sha256 {
                return Err(Error::Parse(format!("{} does not match its recorded hash", data_path.display())));
            }
            let ds = SampledDataset::read_with_sidecar(&data_path)?;
            Ok(TrainedModel::Gp(TrainedGp::restore(hyperparams, ds.inputs, ds.targets, diagnostics)?))
        }
        ModelFile::Nn {
            lipschitz_budget,
            diagnostics,
            layers,
        } => Ok(TrainedModel::Nn(nn_from_file(lipschitz_budget, diagnostics, layers)?)),
        ModelFile::Truth { field, accel_scale } => Ok(TrainedModel::Truth(TruthModel { field, accel_scale })),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_seconds: f64,
}

/// Writes `report.json`, `samples.csv`, `model.json` (plus GP training data),
/// the three dataset CSVs with provenance sidecars, and `timing.json`.
pub fn write_run_outputs(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("report.json"), &to_json(&outcome.report))?;
    let label = format!("{}-ic{}", outcome.report.framework, outcome.report.ic_index);
    write_file(&dir.join("samples.csv"), &outcome.report.characterization.samples_csv(&label))?;
    for (name, ds) in [
        ("train.csv", &outcome.bundle.train),
        ("interp_test.csv", &outcome.bundle.interp_test),
        ("extrap_test.csv", &outcome.bundle.extrap_test),
    ] {
        ds.write_with_sidecar(&dir.join(name))?;
    }
    save_model(&outcome.model, &outcome.bundle.train, &dir.join("model.json"))?;
    write_file(
        &dir.join("timing.json"),
        &to_json(&Timing {
            wall_clock_seconds: outcome.wall_clock_seconds,
        }),
    )
}

pub fn read_run_report(path: &Path) -> Result<RunReport> {
    read_json(path)
}

/// Outcome of one (instance, IC) job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: usize,
    pub ic_index: usize,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

/// Across-run statistics for one parameter instance. Set summaries are
/// taken over the per-run medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceAggregate {
    pub instance: usize,
    pub framework: Framework,
    pub noise: NoiseSpec,
    pub runs: usize,
    pub failed: usize,
    pub flagged: usize,
    pub train: Option<ErrorSummary>,
    pub interp_test: Option<ErrorSummary>,
    pub extrap_test: Option<ErrorSummary>,
    pub interp_fit: Option<CorrelationFit>,
    pub extrap_fit: Option<CorrelationFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<InstanceAggregate>,
    pub aborted: bool,
}

impl SweepResult {
    pub fn reports_for(&self, instance: usize) -> impl Iterator<Item = &RunReport> {
        self.records
            .iter()
            .filter(move |r| r.instance == instance)
            .filter_map(|r| r.report.as_ref())
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.report.is_none()).count()
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".into()
    }
}

/// Runs every (instance, IC) job on a worker pool. Results are ordered by
/// job index regardless of completion order. Once more than half of the
/// jobs have failed the remaining jobs are skipped and the result is marked
/// aborted.
pub fn run_sweep(ctx: &ContextConfig, spec: &SweepSpec, ics: &IcList, config_hash: &str) -> Result<SweepResult> {
    use rayon::prelude::*;

    if ics.pairs.is_empty() {
        return Err(Error::EmptySet("initial-condition list".into()));
    }
    let jobs: Vec<(usize, &IcPair)> = (0..spec.instances.len())
        .flat_map(|i| ics.pairs.iter().map(move |p| (i, p)))
        .collect();
    let total = jobs.len();
    let failures = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let records: Vec<RunRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(instance, ic)| {
                let mut record = RunRecord {
                    instance,
                    ic_index: ic.index,
                    report: None,
                    error: None,
                };
                if failures.load(Ordering::SeqCst) * 2 > total {
                    record.error = Some("skipped: sweep aborted".into());
                    return record;
                }
                let run = spec.run_config(&spec.instances[instance]);
                let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                    run_single(ctx, &run, ic, config_hash)
                }));
                match result {
                    Ok(Ok(outcome)) => record.report = Some(outcome.report),
                    Ok(Err(e)) => record.error = Some(e.to_string()),
                    Err(p) => record.error = Some(format!("panic: {}", panic_message(p))),
                }
                if record.report.is_none() {
                    failures.fetch_add(1, Ordering::SeqCst);
                    log::warn!(
                        "instance {instance} ic {}: {}",
                        ic.index,
                        record.error.as_deref().unwrap_or("")
                    );
                }
                record
            })
            .collect()
    });
    let failed = records.iter().filter(|r| r.report.is_none()).count();
    let aggregates = aggregate(spec, &records);
    Ok(SweepResult {
        spec: spec.clone(),
        records,
        aggregates,
        aborted: failed * 2 > total,
    })
}

pub fn aggregate(spec: &SweepSpec, records: &[RunRecord]) -> Vec<InstanceAggregate> {
    spec.instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let mine: Vec<&RunRecord> = records.iter().filter(|r| r.instance == i).collect();
            let reports: Vec<&RunReport> = mine.iter().filter_map(|r| r.report.as_ref()).collect();
            let medians = |label: SetLabel| -> Vec<f64> {
                reports.iter().map(|r| r.characterization.median(label)).collect()
            };
            let (train, interp, extrap) = (
                medians(SetLabel::Train),
                medians(SetLabel::InterpTest),
                medians(SetLabel::ExtrapTest),
            );
            InstanceAggregate {
                instance: i,
                framework: inst.framework,
                noise: inst.noise,
                runs: reports.len(),
                failed: mine.len() - reports.len(),
                flagged: reports.iter().filter(|r| r.characterization.instability_flag).count(),
                train: summarize_values(&train, 0).ok(),
                interp_test: summarize_values(&interp, 0).ok(),
                extrap_test: summarize_values(&extrap, 0).ok(),
                interp_fit: loglog_fit(&train, &interp).ok(),
                extrap_fit: loglog_fit(&train, &extrap).ok(),
            }
        })
        .collect()
}

pub fn summary_csv(aggregates: &[InstanceAggregate]) -> String {
    let mut out = String::from(
        "instance,framework,sigma_state,sigma_accel,runs,failed,flagged,\
train_median,train_q1,train_q3,interp_median,interp_q1,interp_q3,extrap_median,extrap_q1,extrap_q3,\
interp_slope,interp_intercept,interp_r2,extrap_slope,extrap_intercept,extrap_r2\n",
    );
    let summ = |s: &Option<ErrorSummary>| match s {
        Some(s) => format!("{},{},{}", s.median, s.q1, s.q3),
        None => ",,".into(),
    };
    let fit = |f: &Option<CorrelationFit>| match f {
        Some(f) => format!("{},{},{}", f.slope, f.intercept, f.r_squared),
        None => ",,".into(),
    };
    for a in aggregates {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            a.instance,
            a.framework,
            a.noise.sigma_state,
            a.noise.sigma_accel,
            a.runs,
            a.failed,
            a.flagged,
            summ(&a.train),
            summ(&a.interp_test),
            summ(&a.extrap_test),
            fit(&a.interp_fit),
            fit(&a.extrap_fit),
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub instance: usize,
    pub ic_index: usize,
    pub status: String,
    pub report: Option<String>,
    pub report_sha256: Option<String>,
    pub seeds: RunSeeds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub config: serde_json::Value,
    pub ic_seed: u64,
    pub ic_sha256: String,
    pub spec: SweepSpec,
    pub aborted: bool,
    pub runs: Vec<ManifestEntry>,
}

pub fn run_file_stem(instance: usize, ic_index: usize) -> String {
    format!("i{instance:03}_ic{ic_index:03}")
}

/// Writes `summary.csv`, `aggregates.json`, `runs/*.json` (plus per-run
/// sample CSVs) and `manifest.json`.
pub fn emit_outputs(result: &SweepResult, ics: &IcList, config: &crate::config::Config, dir: &Path) -> Result<()> {
    let runs_dir = dir.join("runs");
    std::fs::create_dir_all(&runs_dir).map_err(|e| Error::io(&runs_dir, e))?;
    let mut entries = Vec::with_capacity(result.records.len());
    for r in &result.records {
        let stem = run_file_stem(r.instance, r.ic_index);
        let seeds = RunSeeds::derive(result.spec.base.base_seed, r.ic_index as u64);
        let (status, report, digest) = match &r.report {
            Some(rep) => {
                let json = to_json(rep);
                let name = format!("runs/{stem}.json");
                write_file(&dir.join(&name), &json)?;
                write_file(
                    &runs_dir.join(format!("{stem}.samples.csv")),
                    &rep.characterization.samples_csv(&stem),
                )?;
                ("ok".to_string(), Some(name), Some(seed::sha256_hex(json.as_bytes())))
            }
            None => (format!("failed: {}", r.error.as_deref().unwrap_or("")), None, None),
        };
        entries.push(ManifestEntry {
            instance: r.instance,
            ic_index: r.ic_index,
            status,
            report,
            report_sha256: digest,
            seeds,
        });
    }
    write_file(&dir.join("summary.csv"), &summary_csv(&result.aggregates))?;
    write_file(&dir.join("aggregates.json"), &to_json(&result.aggregates))?;
    let manifest = Manifest {
        config_hash: config.hash(),
        config: serde_json::from_str(&config.echo_json()).expect("echo is JSON"),
        ic_seed: ics.seed,
        ic_sha256: seed::sha256_hex(ics.to_csv().as_bytes()),
        spec: result.spec.clone(),
        aborted: result.aborted,
        runs: entries,
    };
    write_file(&dir.join("manifest.json"), &to_json(&manifest))
}

/// Rebuilds a sweep result from a directory written by [`emit_outputs`].
pub fn load_sweep(dir: &Path) -> Result<SweepResult> {
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
    let mut records = Vec::with_capacity(manifest.runs.len());
    for e in &manifest.runs {
        let report = match &e.report {
            Some(name) => Some(read_run_report(&dir.join(name))?),
            None => None,
        };
        records.push(RunRecord {
            instance: e.instance,
            ic_index: e.ic_index,
            error: if report.is_none() { Some(e.status.clone()) } else { None },
            report,
        });
    }
    let aggregates = aggregate(&manifest.spec, &records);
    Ok(SweepResult {
        spec: manifest.spec,
        records,
        aggregates,
        aborted: manifest.aborted,
    })
}

pub fn output_dir_is_sweep(dir: &Path) -> bool {
    dir.join("manifest.json").is_file()
}

pub fn run_dir_report(dir: &Path) -> PathBuf {
    dir.join("report.json")
}
