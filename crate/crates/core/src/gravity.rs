//! Point-mass plus normalized zonal harmonic gravity field.
//!
//! The potential uses the force-function sign convention
//! `U = (mu/r) [1 - sum_n J_n (R/r)^n P_n(z/r)]`, so `U > 0` and the
//! acceleration is `+grad U`. Coefficients are stored fully normalized and
//! converted with `J_n = sqrt(2n + 1) * Jbar_n`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

/// Brillouin sphere radius of 101955 Bennu in metres.
pub const BENNU_RADIUS_M: f64 = 290.0;
/// Gravitational parameter of 101955 Bennu in m^3/s^2.
pub const BENNU_MU: f64 = 4.89;
/// Normalized zonal coefficients of 101955 Bennu, degrees 2 through 5.
pub const BENNU_ZONALS: [(u32, f64); 4] =
    [(2, 1.93e-2), (3, -1.22e-3), (4, -6.50e-3), (5, 6.73e-5)];

/// Legendre polynomial `P_n(x)` and its derivative, by the three-term
/// recurrence. Valid on `[-1, 1]` including the endpoints.
pub fn legendre(n: u32, x: f64) -> (f64, f64) {
    let (mut p_prev, mut p) = (1.0, x);
    let (mut d_prev, mut d) = (0.0, 1.0);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = f64::from(k);
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        // P'_{k+1} = P'_{k-1} + (2k + 1) P_k
        let d_next = d_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

/// Unnormalized zonal coefficient from a fully normalized one.
pub fn unnormalize_zonal(degree: u32, normalized: f64) -> f64 {
    (2.0 * f64::from(degree) + 1.0).sqrt() * normalized
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonalGravityField {
    mu: f64,
    reference_radius: f64,
    normalized_zonals: Vec<(u32, f64)>,
}

impl ZonalGravityField {
    pub fn new(mu: f64, reference_radius: f64, normalized_zonals: Vec<(u32, f64)>) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Config(format!("mu must be positive, got {mu}")));
        }
        if !(reference_radius > 0.0 && reference_radius.is_finite()) {
            return Err(Error::Config(format!(
                "reference_radius must be positive, got {reference_radius}"
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(n, c) in &normalized_zonals {
            if n < 2 {
                return Err(Error::Config(format!("zonal degree {n} is below 2")));
            }
            if !seen.insert(n) {
                return Err(Error::Config(format!("zonal degree {n} listed twice")));
            }
            if !c.is_finite() {
                return Err(Error::Config(format!("zonal J{n} is not finite")));
            }
        }
        Ok(Self {
            mu,
            reference_radius,
            normalized_zonals,
        })
    }

    pub fn point_mass(mu: f64) -> Result<Self> {
        Self::new(mu, 1.0, Vec::new())
    }

    /// Bennu in normalized units: `mu = 1`, lengths in Brillouin radii.
    pub fn bennu_normalized() -> Self {
        Self::new(1.0, 1.0, BENNU_ZONALS.to_vec()).expect("constant field is valid")
    }

    /// Bennu in SI units (metres, seconds).
    pub fn bennu_physical() -> Self {
        Self::new(BENNU_MU, BENNU_RADIUS_M, BENNU_ZONALS.to_vec()).expect("constant field is valid")
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn reference_radius(&self) -> f64 {
        self.reference_radius
    }

    pub fn normalized_zonals(&self) -> &[(u32, f64)] {
        &self.normalized_zonals
    }

    pub fn max_degree(&self) -> u32 {
        self.normalized_zonals.iter().map(|&(n, _)| n).max().unwrap_or(0)
    }

    fn unnormalized(&self, degree: u32) -> Option<f64> {
        self.normalized_zonals
            .iter()
            .find(|&&(n, _)| n == degree)
            .map(|&(n, c)| unnormalize_zonal(n, c))
    }

    fn radius_checked(position: &Vec3) -> Result<f64> {
        let r = position.norm();
        if r > 0.0 && r.is_finite() {
            Ok(r)
        } else {
            Err(Error::Domain(format!("gravity evaluated at |r| = {r}")))
        }
    }

    /// Contribution `u_n` of one zonal degree to the potential.
    pub fn zonal_term_potential(&self, degree: u32, position: &Vec3) -> Result<f64> {
        let j = self
            .unnormalized(degree)
            .ok_or_else(|| Error::NotFound(format!("zonal degree {degree} not in field")))?;
        let r = Self::radius_checked(position)?;
        let (p, _) = legendre(degree, position.z / r);
        Ok(-(self.mu / r) * j * (self.reference_radius / r).powi(degree as i32) * p)
    }

    pub fn potential(&self, position: &Vec3) -> Result<f64> {
        let r = Self::radius_checked(position)?;
        let s = position.z / r;
        let rho = self.reference_radius / r;
        let series: f64 = self
            .normalized_zonals
            .iter()
            .map(|&(n, c)| unnormalize_zonal(n, c) * rho.powi(n as i32) * legendre(n, s).0)
            .sum();
        Ok(self.mu / r * (1.0 - series))
    }

    /// Analytic gradient of the potential.
    ///
    /// Written directly in Cartesian form using `s = z/r`, which has no
    /// singularity on the polar axis (only `P_n` and `P_n'` on `[-1, 1]`).
    pub fn acceleration(&self, position: &Vec3) -> Result<Vec3> {
        let r = Self::radius_checked(position)?;
        let r2 = r * r;
        let mut acc = position * (-self.mu / (r2 * r));
        if self.normalized_zonals.is_empty() {
            return Ok(acc);
        }
        let s = position.z / r;
        let unit = position / r;
        let zhat = Vec3::z();
        for &(n, c) in &self.normalized_zonals {
            let j = unnormalize_zonal(n, c);
            let (p, dp) = legendre(n, s);
            // u_n = -mu J_n R^n r^-(n+1) P_n(s)
            let k = -self.mu * j * self.reference_radius.powi(n as i32) / r.powi(n as i32 + 2);
            let radial = -(f64::from(n) + 1.0) * p;
            acc += (unit * radial + (zhat - unit * s) * dp) * k;
        }
        Ok(acc)
    }
}

/// Threshold-radius query for the influence of a single zonal term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluenceQuery {
    pub degree: u32,
    /// Colatitude in radians, `[0, pi]`.
    pub colatitude: f64,
    /// Fraction of the Hill-radius potential, `(0, 1]`.
    pub fraction: f64,
    pub hill_radius: f64,
}

/// Radius at which `|u_n|` equals `fraction * mu / hill_radius` at the given
/// colatitude. `None` when `P_n(cos theta)` vanishes.
pub fn influence_radius(field: &ZonalGravityField, query: &InfluenceQuery) -> Result<Option<f64>> {
    if !(query.fraction > 0.0 && query.fraction <= 1.0) {
        return Err(Error::Config(format!(
            "fraction must lie in (0, 1], got {}",
            query.fraction
        )));
    }
    if !(query.hill_radius > field.reference_radius()) {
        return Err(Error::Config("hill_radius must exceed the reference radius".into()));
    }
    if !(0.0..=std::f64::consts::PI).contains(&query.colatitude) {
        return Err(Error::Config(format!(
            "colatitude {} outside [0, pi]",
            query.colatitude
        )));
    }
    let j = field
        .unnormalized(query.degree)
        .ok_or_else(|| Error::NotFound(format!("zonal degree {} not in field", query.degree)))?;
    let (p, _) = legendre(query.degree, query.colatitude.cos());
    if p.abs() <= 1e-15 {
        return Ok(None);
    }
    let numerator = j.abs() * field.reference_radius().powi(query.degree as i32) * p.abs();
    let r_pow = numerator * query.hill_radius / query.fraction;
    Ok(Some(r_pow.powf(1.0 / (f64::from(query.degree) + 1.0))))
}
