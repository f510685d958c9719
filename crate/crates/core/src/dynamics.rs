//! Orbital element conversions, fixed-step RK4 propagation and collision
//! screening against the Brillouin sphere.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::gravity::ZonalGravityField;
use crate::{Error, Result, Vec3};

/// Below this eccentricity the argument of periapsis is undefined and set to 0.
pub const CIRCULAR_TOLERANCE: f64 = 1e-8;
/// Below this `sin i` the node is undefined and the RAAN is set to 0.
pub const EQUATORIAL_TOLERANCE: f64 = 1e-8;
/// Default number of internal RK4 steps per instantaneous Keplerian period.
pub const DEFAULT_STEPS_PER_PERIOD: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    pub position: Vec3,
    pub velocity: Vec3,
}

impl CartesianState {
    pub fn new(position: Vec3, velocity: Vec3) -> Result<Self> {
        let state = Self { position, velocity };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.position.iter().chain(self.velocity.iter()).all(|c| c.is_finite());
        if !finite {
            return Err(Error::Domain("state has non-finite components".into()));
        }
        if self.position.norm() == 0.0 {
            return Err(Error::Domain("state position is at the origin".into()));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        self.position.norm()
    }

    fn axpy(&self, h: f64, d: &Derivative) -> Self {
        Self {
            position: self.position + d.velocity * h,
            velocity: self.velocity + d.acceleration * h,
        }
    }
}

/// Osculating Keplerian elements. Angles in radians on `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerianElements {
    pub semi_major: f64,
    pub eccentricity: f64,
    pub inclination: f64,
    pub raan: f64,
    pub arg_periapsis: f64,
    pub true_anomaly: f64,
}

impl KeplerianElements {
    pub fn periapsis(&self) -> f64 {
        self.semi_major * (1.0 - self.eccentricity)
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.semi_major,
            self.eccentricity,
            self.inclination,
            self.raan,
            self.arg_periapsis,
            self.true_anomaly,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            semi_major: a[0],
            eccentricity: a[1],
            inclination: a[2],
            raan: a[3],
            arg_periapsis: a[4],
            true_anomaly: a[5],
        }
    }
}

/// Wraps an angle onto `[0, 2 pi)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Instantaneous Keplerian period `2 pi sqrt(a^3 / mu)`.
pub fn keplerian_period(semi_major: f64, mu: f64) -> Result<f64> {
    if !(semi_major > 0.0 && mu > 0.0) {
        return Err(Error::Domain(format!(
            "period needs positive semi-major axis and mu, got a = {semi_major}, mu = {mu}"
        )));
    }
    Ok(TAU * (semi_major.powi(3) / mu).sqrt())
}

pub fn elements_to_state(el: &KeplerianElements, mu: f64) -> Result<CartesianState> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    if !(el.eccentricity >= 0.0 && el.eccentricity < 1.0) {
        return Err(Error::UnsupportedOrbit(format!(
            "eccentricity {} is not elliptical",
            el.eccentricity
        )));
    }
    if !(el.semi_major > 0.0) {
        return Err(Error::UnsupportedOrbit(format!(
            "semi-major axis {} is not positive",
            el.semi_major
        )));
    }
    let e = el.eccentricity;
    let p = el.semi_major * (1.0 - e * e);
    let (sn, cn) = el.true_anomaly.sin_cos();
    let r = p / (1.0 + e * cn);
    let r_pf = Vec3::new(r * cn, r * sn, 0.0);
    let v_pf = Vec3::new(-sn, e + cn, 0.0) * (mu / p).sqrt();

    let rot = perifocal_to_inertial(el.raan, el.inclination, el.arg_periapsis);
    CartesianState::new(rot * r_pf, rot * v_pf)
}

fn perifocal_to_inertial(raan: f64, inc: f64, argp: f64) -> nalgebra::Matrix3<f64> {
    let (so, co) = raan.sin_cos();
    let (si, ci) = inc.sin_cos();
    let (sw, cw) = argp.sin_cos();
    nalgebra::Matrix3::new(
        co * cw - so * sw * ci,
        -co * sw - so * cw * ci,
        so * si,
        so * cw + co * sw * ci,
        -so * sw + co * cw * ci,
        -co * si,
        sw * si,
        cw * si,
        ci,
    )
}

/// Signed angle from `from` to `to` about the axis `normal` (unit vectors
/// assumed in the plane perpendicular to `normal`).
fn plane_angle(from: &Vec3, to: &Vec3, normal: &Vec3) -> f64 {
    wrap_angle(from.cross(to).dot(normal).atan2(from.dot(to)))
}

pub fn state_to_elements(state: &CartesianState, mu: f64) -> Result<KeplerianElements> {
    state.validate()?;
    let r_vec = state.position;
    let v_vec = state.velocity;
    let r = r_vec.norm();
    let v2 = v_vec.norm_squared();
    let energy = 0.5 * v2 - mu / r;
    if !(energy < 0.0) {
        return Err(Error::UnsupportedOrbit(format!(
            "specific energy {energy} is not bound"
        )));
    }
    let h_vec = r_vec.cross(&v_vec);
    let h = h_vec.norm();
    if h <= 1e-14 * r * v2.sqrt().max(f64::MIN_POSITIVE) || h == 0.0 {
        return Err(Error::DegenerateOrbit("zero angular momentum".into()));
    }
    let h_hat = h_vec / h;
    let semi_major = -mu / (2.0 * energy);
    let e_vec = (r_vec * (v2 - mu / r) - v_vec * r_vec.dot(&v_vec)) / mu;
    let e = e_vec.norm();
    let inclination = h_hat.z.clamp(-1.0, 1.0).acos();

    let node = Vec3::z().cross(&h_vec);
    let (raan, node_hat) = if inclination.sin() < EQUATORIAL_TOLERANCE || node.norm() == 0.0 {
        (0.0, Vec3::x())
    } else {
        let n_hat = node.normalize();
        (wrap_angle(n_hat.y.atan2(n_hat.x)), n_hat)
    };
    // Reference direction inside the orbit plane. For an equatorial orbit the
    // x axis already lies in the plane.
    let r_hat = r_vec / r;
    let (arg_periapsis, true_anomaly) = if e < CIRCULAR_TOLERANCE {
        (0.0, plane_angle(&node_hat, &r_hat, &h_hat))
    } else {
        let e_hat = e_vec / e;
        (
            plane_angle(&node_hat, &e_hat, &h_hat),
            plane_angle(&e_hat, &r_hat, &h_hat),
        )
    };
    Ok(KeplerianElements {
        semi_major,
        eccentricity: e,
        inclination,
        raan,
        arg_periapsis,
        true_anomaly,
    })
}

struct Derivative {
    velocity: Vec3,
    acceleration: Vec3,
}

fn derivative(field: &ZonalGravityField, s: &CartesianState) -> Result<Derivative> {
    Ok(Derivative {
        velocity: s.velocity,
        acceleration: field.acceleration(&s.position)?,
    })
}

/// One classical fourth-order Runge-Kutta step of `x' = v, v' = a(x)`.
pub fn rk4_step(field: &ZonalGravityField, state: &CartesianState, h: f64) -> Result<CartesianState> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("step size must be positive, got {h}")));
    }
    let k1 = derivative(field, state)?;
    let k2 = derivative(field, &state.axpy(0.5 * h, &k1))?;
    let k3 = derivative(field, &state.axpy(0.5 * h, &k2))?;
    let k4 = derivative(field, &state.axpy(h, &k3))?;
    let next = CartesianState {
        position: state.position
            + (k1.velocity + (k2.velocity + k3.velocity) * 2.0 + k4.velocity) * (h / 6.0),
        velocity: state.velocity
            + (k1.acceleration + (k2.acceleration + k3.acceleration) * 2.0 + k4.acceleration)
                * (h / 6.0),
    };
    if next.validate().is_err() {
        return Err(Error::Integration("state became singular during RK4 step".into()));
    }
    Ok(next)
}

/// Propagation length and sampling density, in units of the initial
/// condition's instantaneous Keplerian period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub n_periods: f64,
    pub samples_per_period: u32,
    pub steps_per_period: u32,
}

impl TrajectorySpec {
    pub fn new(n_periods: f64, samples_per_period: u32) -> Result<Self> {
        let spec = Self {
            n_periods,
            samples_per_period,
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_steps_per_period(mut self, steps: u32) -> Result<Self> {
        self.steps_per_period = steps;
        self.validate()?;
        Ok(self)
    }

    pub fn sample_count(&self) -> usize {
        (self.n_periods * f64::from(self.samples_per_period) - 1e-9).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_periods > 0.0 && self.n_periods.is_finite()) {
            return Err(Error::Config(format!("n_periods must be positive, got {}", self.n_periods)));
        }
        if self.samples_per_period == 0 || self.steps_per_period == 0 {
            return Err(Error::Config("samples and steps per period must be positive".into()));
        }
        if self.sample_count() < 2 {
            return Err(Error::Config("trajectory needs at least two samples".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory {
    pub base_period: f64,
    pub times: Vec<f64>,
    pub states: Vec<CartesianState>,
    /// Truth-field accelerations at the sampled positions (unscaled).
    pub true_accelerations: Vec<Vec3>,
}

impl SampledTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Instantaneous Keplerian period of a state in the given field.
pub fn instantaneous_period(field: &ZonalGravityField, state: &CartesianState) -> Result<f64> {
    let el = state_to_elements(state, field.mu())?;
    keplerian_period(el.semi_major, field.mu())
}

/// Integrates for `n_periods` instantaneous periods and samples evenly in
/// time. Between samples the interval is split into the smallest number of
/// equal RK4 steps not longer than `tau / steps_per_period`, so sample times
/// are hit exactly.
pub fn propagate_and_sample(
    field: &ZonalGravityField,
    state0: &CartesianState,
    spec: &TrajectorySpec,
) -> Result<SampledTrajectory> {
    spec.validate()?;
    state0.validate()?;
    let tau = instantaneous_period(field, state0)?;
    let count = spec.sample_count();
    let spacing = tau / f64::from(spec.samples_per_period);
    let h_max = tau / f64::from(spec.steps_per_period);
    let substeps = (spacing / h_max - 1e-9).ceil().max(1.0) as usize;
    let h = spacing / substeps as f64;

    let mut times = Vec::with_capacity(count);
    let mut states = Vec::with_capacity(count);
    let mut accels = Vec::with_capacity(count);
    let mut state = *state0;
    for k in 0..count {
        if k > 0 {
            for _ in 0..substeps {
                state = rk4_step(field, &state, h)?;
            }
        }
        times.push(k as f64 * spacing);
        accels.push(field.acceleration(&state.position)?);
        states.push(state);
    }
    Ok(SampledTrajectory {
        base_period: tau,
        times,
        states,
        true_accelerations: accels,
    })
}

/// Collision screen settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionScreen {
    pub periods: f64,
    pub radius: f64,
    pub steps_per_period: u32,
}

impl Default for CollisionScreen {
    fn default() -> Self {
        Self {
            periods: 50.0,
            radius: 1.0,
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
        }
    }
}

/// True iff any internal integration step over `screen.periods`
/// instantaneous periods lies strictly inside the collision sphere.
///
/// A propagation that fails numerically (passes through the origin) is
/// counted as a collision.
pub fn classify_collision(
    field: &ZonalGravityField,
    state0: &CartesianState,
    screen: &CollisionScreen,
) -> bool {
    if !(screen.radius > 0.0) {
        return false;
    }
    if state0.radius() < screen.radius {
        return true;
    }
    let Ok(tau) = instantaneous_period(field, state0) else {
        // unbound or degenerate; a radial plunge collides
        return true;
    };
    let h = tau / f64::from(screen.steps_per_period.max(1));
    let steps = (screen.periods * f64::from(screen.steps_per_period) - 1e-9).ceil().max(0.0) as u64;
    let mut state = *state0;
    for _ in 0..steps {
        match rk4_step(field, &state, h) {
            Ok(next) => state = next,
            Err(_) => return true,
        }
        if state.radius() < screen.radius {
            return true;
        }
    }
    false
}
