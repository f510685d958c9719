//! C ABI over `orbitlearn`.
//!
//! Objects are handed out as opaque pointers and released with the matching
//! `*_free`. Every fallible function returns an [`OlStatus`]; on failure a
//! description is available from [`ol_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use orbitlearn::characterize::fractional_error;
use orbitlearn::config::Config;
use orbitlearn::dynamics::{
    classify_collision, elements_to_state, propagate_and_sample, state_to_elements, CartesianState, CollisionScreen,
    KeplerianElements, SampledTrajectory, TrajectorySpec,
};
use orbitlearn::gravity::{influence_radius, InfluenceQuery, ZonalGravityField};
use orbitlearn::pipeline::{self, IcList, TrainedModel};
use orbitlearn::{Error, Regressor, Vec3};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    NotFound = 4,
    UnsupportedOrbit = 5,
    Integration = 6,
    Config = 7,
    Instability = 8,
    Io = 9,
    Parse = 10,
    Panic = 11,
    Other = 12,
}

impl From<&Error> for OlStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => OlStatus::Domain,
            Error::NotFound(_) => OlStatus::NotFound,
            Error::UnsupportedOrbit(_) | Error::DegenerateOrbit(_) => OlStatus::UnsupportedOrbit,
            Error::Integration(_) => OlStatus::Integration,
            Error::Config(_) | Error::Infeasible(_) | Error::RejectedIc(_) => OlStatus::Config,
            Error::Instability(_) => OlStatus::Instability,
            Error::Io { .. } => OlStatus::Io,
            Error::Parse(_) => OlStatus::Parse,
            Error::EmptySet(_) | Error::SweepAborted { .. } => OlStatus::Other,
        }
    }
}

/// Classical elements; angles in radians.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OlElements {
    pub semi_major: f64,
    pub eccentricity: f64,
    pub inclination: f64,
    pub raan: f64,
    pub arg_periapsis: f64,
    pub true_anomaly: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OlState {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

pub struct OlField {
    inner: ZonalGravityField,
}

pub struct OlTrajectory {
    inner: SampledTrajectory,
}

pub struct OlModel {
    inner: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(OlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(OlStatus::from(&e), e.to_string())
    }
}

fn null() -> Failure {
    Failure(OlStatus::NullPointer, "null pointer argument".into())
}

fn invalid(msg: &str) -> Failure {
    Failure(OlStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            OlStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            OlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(null)
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(null)
}

unsafe fn vec3(p: *const f64) -> Result<Vec3, Failure> {
    if p.is_null() {
        return Err(null());
    }
    let s = std::slice::from_raw_parts(p, 3);
    Ok(Vec3::new(s[0], s[1], s[2]))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null());
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

fn to_elements(e: &OlElements) -> KeplerianElements {
    KeplerianElements::from_array([
        e.semi_major,
        e.eccentricity,
        e.inclination,
        e.raan,
        e.arg_periapsis,
        e.true_anomaly,
    ])
}

fn from_elements(e: &KeplerianElements) -> OlElements {
    let a = e.as_array();
    OlElements {
        semi_major: a[0],
        eccentricity: a[1],
        inclination: a[2],
        raan: a[3],
        arg_periapsis: a[4],
        true_anomaly: a[5],
    }
}

fn to_state(s: &OlState) -> Result<CartesianState, Failure> {
    let p = s.position;
    let v = s.velocity;
    Ok(CartesianState::new(Vec3::new(p[0], p[1], p[2]), Vec3::new(v[0], v[1], v[2]))?)
}

fn from_state(s: &CartesianState) -> OlState {
    OlState {
        position: [s.position.x, s.position.y, s.position.z],
        velocity: [s.velocity.x, s.velocity.y, s.velocity.z],
    }
}

/// Message for the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn ol_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ol_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds a zonal field from `count` (degree, normalized coefficient) pairs.
///
/// # Safety
/// `degrees` and `coefficients` must point to `count` elements (or be null
/// when `count` is 0); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ol_field_new(
    mu: f64,
    reference_radius: f64,
    degrees: *const u32,
    coefficients: *const f64,
    count: usize,
    out_field: *mut *mut OlField,
) -> OlStatus {
    guard(|| {
        let slot = out(out_field)?;
        let zonals = if count == 0 {
            Vec::new()
        } else {
            if degrees.is_null() || coefficients.is_null() {
                return Err(null());
            }
            let d = std::slice::from_raw_parts(degrees, count);
            let c = std::slice::from_raw_parts(coefficients, count);
            d.iter().copied().zip(c.iter().copied()).collect()
        };
        let field = ZonalGravityField::new(mu, reference_radius, zonals)?;
        *slot = Box::into_raw(Box::new(OlField { inner: field }));
        Ok(())
    })
}

/// Bennu in normalized units (`mu = 1`, reference radius 1).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ol_field_bennu_normalized(out_field: *mut *mut OlField) -> OlStatus {
    guard(|| {
        *out(out_field)? = Box::into_raw(Box::new(OlField {
            inner: ZonalGravityField::bennu_normalized(),
        }));
        Ok(())
    })
}

/// Bennu in SI units.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ol_field_bennu_physical(out_field: *mut *mut OlField) -> OlStatus {
    guard(|| {
        *out(out_field)? = Box::into_raw(Box::new(OlField {
            inner: ZonalGravityField::bennu_physical(),
        }));
        Ok(())
    })
}

/// # Safety
/// `field` must come from an `ol_field_*` constructor and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn ol_field_free(field: *mut OlField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// # Safety
/// `position` must point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn ol_field_potential(field: *const OlField, position: *const f64, out_value: *mut f64) -> OlStatus {
    guard(|| {
        let f = deref(field)?;
        let slot = out(out_value)?;
        *slot = f.inner.potential(&vec3(position)?)?;
        Ok(())
    })
}

/// # Safety
/// `position` must point to 3 doubles and `out_accel` to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ol_field_acceleration(
    field: *const OlField,
    position: *const f64,
    out_accel: *mut f64,
) -> OlStatus {
    guard(|| {
        let f = deref(field)?;
        if out_accel.is_null() {
            return Err(null());
        }
        let a = f.inner.acceleration(&vec3(position)?)?;
        std::slice::from_raw_parts_mut(out_accel, 3).copy_from_slice(a.as_slice());
        Ok(())
    })
}

/// Radius beyond which the degree-`degree` term stays below
/// `fraction * mu / hill_radius`. `*found` is false where `P_n` vanishes.
///
/// # Safety
/// Output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ol_influence_radius(
    field: *const OlField,
    degree: u32,
    colatitude: f64,
    fraction: f64,
    hill_radius: f64,
    out_radius: *mut f64,
    found: *mut bool,
) -> OlStatus {
    guard(|| {
        let f = deref(field)?;
        let r = out(out_radius)?;
        let flag = out(found)?;
        let q = InfluenceQuery {
            degree,
            colatitude,
            fraction,
            hill_radius,
        };
        match influence_radius(&f.inner, &q)? {
            Some(v) => {
                *r = v;
                *flag = true;
            }
            None => {
                *r = f64::NAN;
                *flag = false;
            }
        }
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ol_elements_to_state(elements: *const OlElements, mu: f64, out_state: *mut OlState) -> OlStatus {
    guard(|| {
        let e = deref(elements)?;
        let slot = out(out_state)?;
        *slot = from_state(&elements_to_state(&to_elements(e), mu)?);
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ol_state_to_elements(state: *const OlState, mu: f64, out_elements: *mut OlElements) -> OlStatus {
    guard(|| {
        let s = to_state(deref(state)?)?;
        let slot = out(out_elements)?;
        *slot = from_elements(&state_to_elements(&s, mu)?);
        Ok(())
    })
}

/// Propagates with RK4 and samples evenly in time.
///
/// # Safety
/// Pointers must be valid; the trajectory must be released with
/// [`ol_trajectory_free`].
#[no_mangle]
pub unsafe extern "C" fn ol_propagate(
    field: *const OlField,
    state: *const OlState,
    n_periods: f64,
    samples_per_period: u32,
    steps_per_period: u32,
    out_trajectory: *mut *mut OlTrajectory,
) -> OlStatus {
    guard(|| {
        let f = deref(field)?;
        let s = to_state(deref(state)?)?;
        let slot = out(out_trajectory)?;
        let spec = TrajectorySpec::new(n_periods, samples_per_period)?.with_steps_per_period(steps_per_period)?;
        let traj = propagate_and_sample(&f.inner, &s, &spec)?;
        *slot = Box::into_raw(Box::new(OlTrajectory { inner: traj }));
        Ok(())
    })
}

/// # Safety
/// `trajectory` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ol_trajectory_len(trajectory: *const OlTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |t| t.inner.len())
}

/// Reads sample `index`: time, state and truth acceleration (unscaled).
///
/// # Safety
/// `out_accel` must point to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ol_trajectory_sample(
    trajectory: *const OlTrajectory,
    index: usize,
    out_time: *mut f64,
    out_state: *mut OlState,
    out_accel: *mut f64,
) -> OlStatus {
    guard(|| {
        let t = &deref(trajectory)?.inner;
        if index >= t.len() {
            return Err(invalid("sample index out of range"));
        }
        *out(out_time)? = t.times[index];
        *out(out_state)? = from_state(&t.states[index]);
        if out_accel.is_null() {
            return Err(null());
        }
        std::slice::from_raw_parts_mut(out_accel, 3).copy_from_slice(t.true_accelerations[index].as_slice());
        Ok(())
    })
}

/// # Safety
/// `trajectory` must come from [`ol_propagate`] and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn ol_trajectory_free(trajectory: *mut OlTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// True if the orbit enters the sphere of `radius` within `periods`
/// Keplerian periods.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ol_classify_collision(
    field: *const OlField,
    state: *const OlState,
    periods: f64,
    radius: f64,
    steps_per_period: u32,
    out_collides: *mut bool,
) -> OlStatus {
    guard(|| {
        let f = deref(field)?;
        let s = to_state(deref(state)?)?;
        let slot = out(out_collides)?;
        if !(periods > 0.0) || steps_per_period == 0 {
            return Err(invalid("periods and steps_per_period must be positive"));
        }
        let screen = CollisionScreen {
            periods,
            radius,
            steps_per_period,
        };
        *slot = classify_collision(&f.inner, &s, &screen);
        Ok(())
    })
}

/// `|a_true - a_pred| / |a_true|`; fails with `OL_STATUS_DOMAIN` when the
/// true acceleration is zero.
///
/// # Safety
/// Both inputs must point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn ol_fractional_error(a_true: *const f64, a_pred: *const f64, out_value: *mut f64) -> OlStatus {
    guard(|| {
        let t = vec3(a_true)?;
        let p = vec3(a_pred)?;
        let slot = out(out_value)?;
        *slot = fractional_error(&t, &p).ok_or_else(|| Failure(OlStatus::Domain, "zero true acceleration".into()))?;
        Ok(())
    })
}

/// Runs one characterization from a config file and writes its outputs
/// (report, samples, model, datasets) into `out_dir`. `ics_path` may be null
/// to use the list named in the config.
///
/// # Safety
/// String arguments must be NUL-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn ol_run_single(
    config_path: *const c_char,
    ics_path: *const c_char,
    ic_index: usize,
    out_dir: *const c_char,
) -> OlStatus {
    guard(|| {
        let cfg = Config::load(&path_arg(config_path)?)?;
        let ics = if ics_path.is_null() {
            cfg.ics
                .clone()
                .ok_or_else(|| Failure(OlStatus::Config, "no initial-condition list given".into()))?
        } else {
            path_arg(ics_path)?
        };
        let dir = path_arg(out_dir)?;
        let list = IcList::read(&ics)?;
        let outcome = pipeline::run_single(&cfg.context, &cfg.run, list.get(ic_index)?, &cfg.hash())?;
        pipeline::write_run_outputs(&outcome, &dir)?;
        Ok(())
    })
}

/// Loads a model written by a run.
///
/// # Safety
/// `path` must be NUL-terminated UTF-8; release with [`ol_model_free`].
#[no_mangle]
pub unsafe extern "C" fn ol_model_load(path: *const c_char, out_model: *mut *mut OlModel) -> OlStatus {
    guard(|| {
        let slot = out(out_model)?;
        let model = pipeline::load_model(&path_arg(path)?)?;
        *slot = Box::into_raw(Box::new(OlModel { inner: model }));
        Ok(())
    })
}

/// Predicts scaled accelerations for `count` positions laid out as
/// `x0 y0 z0 x1 y1 z1 ...`.
///
/// # Safety
/// `positions` and `out_accel` must each hold `3 * count` doubles.
#[no_mangle]
pub unsafe extern "C" fn ol_model_predict(
    model: *const OlModel,
    positions: *const f64,
    count: usize,
    out_accel: *mut f64,
) -> OlStatus {
    guard(|| {
        let m = deref(model)?;
        if count == 0 {
            return Ok(());
        }
        if positions.is_null() || out_accel.is_null() {
            return Err(null());
        }
        let xs: Vec<Vec3> = std::slice::from_raw_parts(positions, 3 * count)
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0], c[1], c[2]))
            .collect();
        let dst = std::slice::from_raw_parts_mut(out_accel, 3 * count);
        for (d, a) in dst.chunks_exact_mut(3).zip(m.inner.predict(&xs)) {
            d.copy_from_slice(a.as_slice());
        }
        Ok(())
    })
}

/// Whether training reported a numerical instability.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ol_model_unstable(model: *const OlModel) -> bool {
    model.as_ref().is_some_and(|m| m.inner.unstable())
}

/// # Safety
/// `model` must come from [`ol_model_load`] and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn ol_model_free(model: *mut OlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
