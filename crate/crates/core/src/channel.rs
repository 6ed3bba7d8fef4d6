//! Line-of-sight DC optical gain of a Lambertian emitter.
//!
//! The gain between the LED and a photodiode is
//!
//! ```text
//! Ω = (n_L + 1)·A_pd / 2π · cos^{n_L}(φ)·cos(θ) / R²
//! ```
//!
//! where φ is the emission angle measured from the LED normal, θ the incidence
//! angle measured from the photodiode normal and R the separation. The vector
//! form evaluates the same quantity from positions and normals, with
//! `v = r_pd − r_led`. Since the photodiode faces the LED, `vᵀn_pd` is negative
//! for a lit detector; the incidence cosine is taken as `−vᵀn_pd/‖v‖`, which is
//! what the leading minus sign of the vector expression accounts for. Gains are
//! therefore positive for every in-view geometry and clamp to zero otherwise.
//! Receiver field-of-view limits are not modeled.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn from_f64(v: [f64; 3]) -> Self {
        Self::new(T::lit(v[0]), T::lit(v[1]), T::lit(v[2]))
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction; zero and non-finite vectors are rejected.
    pub fn normalized(self) -> Result<Self> {
        let n = self.norm();
        if !(n.is_finite() && n > T::zero()) {
            return Err(Error::domain(
                "orientation vector",
                "must be finite and nonzero",
            ));
        }
        Ok(self * n.recip())
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Which photodiode a gain refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    /// The remote VLC receiver.
    Remote,
    /// The luminous-feedback photodiode next to the LED.
    Feedback,
}

/// Poses of the LED and of both photodiodes.
///
/// Normals are stored as unit vectors; [`LinkGeometry::new`] rescales whatever
/// it is given, so integer normals such as `[0, 0, -1]` are fine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry<T> {
    pub led_pos: Vec3<T>,
    pub led_normal: Vec3<T>,
    pub rx_pos: Vec3<T>,
    pub rx_normal: Vec3<T>,
    pub fb_pos: Vec3<T>,
    pub fb_normal: Vec3<T>,
    /// Lambertian mode number n_L.
    pub lambert_order: T,
    /// Photodiode sensing area in m², identical for both detectors.
    pub pd_area: T,
}

impl<T: Real> LinkGeometry<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        led_pos: Vec3<T>,
        led_normal: Vec3<T>,
        rx_pos: Vec3<T>,
        rx_normal: Vec3<T>,
        fb_pos: Vec3<T>,
        fb_normal: Vec3<T>,
        lambert_order: T,
        pd_area: T,
    ) -> Result<Self> {
        if !(lambert_order > T::zero()) {
            return Err(Error::domain("lambert_order", "must be > 0"));
        }
        if !(pd_area > T::zero()) {
            return Err(Error::domain("pd_area", "must be > 0"));
        }
        Ok(Self {
            led_pos,
            led_normal: led_normal.normalized()?,
            rx_pos,
            rx_normal: rx_normal.normalized()?,
            fb_pos,
            fb_normal: fb_normal.normalized()?,
            lambert_order,
            pd_area,
        })
    }

    /// The room geometry of the reference setup: LED on the ceiling at
    /// (2, 2, 3) m pointing down, remote PD 2 m below it pointing up, feedback
    /// PD tilted 45° next to the LED, n_L = 0.5, 1 mm² detectors.
    pub fn reference() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(
            Vec3::from_f64([2.0, 2.0, 3.0]),
            Vec3::from_f64([0.0, 0.0, -1.0]),
            Vec3::from_f64([2.0, 2.0, 1.0]),
            Vec3::from_f64([0.0, 0.0, 1.0]),
            Vec3::from_f64([1.98, 2.0, 2.98]),
            Vec3::from_f64([h, 0.0, h]),
            T::lit(0.5),
            T::lit(1e-6),
        )
        .expect("reference geometry is valid")
    }

    fn pose(&self, link: Link) -> (Vec3<T>, Vec3<T>) {
        match link {
            Link::Remote => (self.rx_pos, self.rx_normal),
            Link::Feedback => (self.fb_pos, self.fb_normal),
        }
    }

    /// Moves the remote photodiode along the LED→PD line so it sits `distance`
    /// meters from the LED, keeping every orientation.
    pub fn with_remote_distance(&self, distance: T) -> Result<Self> {
        if !(distance > T::zero()) {
            return Err(Error::domain("distance", "must be > 0"));
        }
        let v = self.rx_pos - self.led_pos;
        let r = v.norm();
        if r == T::zero() {
            return Err(Error::domain("remote link", "LED and PD positions coincide"));
        }
        let mut out = *self;
        out.rx_pos = self.led_pos + v * (distance / r);
        Ok(out)
    }
}

/// Angle form of the Lambertian DC gain.
pub fn lambertian_gain_angles<T: Real>(
    phi: T,
    theta: T,
    distance: T,
    pd_area: T,
    lambert_order: T,
) -> Result<T> {
    if !(distance > T::zero()) {
        return Err(Error::domain("distance", format!("must be > 0, got {distance}")));
    }
    if !(pd_area > T::zero()) {
        return Err(Error::domain("pd_area", format!("must be > 0, got {pd_area}")));
    }
    if !(lambert_order > T::zero()) {
        return Err(Error::domain("lambert_order", "must be > 0"));
    }
    let right = T::FRAC_PI_2();
    if phi.abs() >= right || theta.abs() >= right {
        return Ok(T::zero());
    }
    Ok(lambert_prefactor(pd_area, lambert_order) * phi.cos().powf(lambert_order) * theta.cos()
        / (distance * distance))
}

fn lambert_prefactor<T: Real>(pd_area: T, lambert_order: T) -> T {
    (lambert_order + T::one()) * pd_area / (T::lit(2.0) * T::PI())
}

/// Vector form of the Lambertian DC gain for the remote or feedback detector.
pub fn gain_from_vectors<T: Real>(geometry: &LinkGeometry<T>, which: Link) -> Result<T> {
    let (pd_pos, pd_normal) = geometry.pose(which);
    let v = pd_pos - geometry.led_pos;
    let r = v.norm();
    if !(r > T::zero()) {
        return Err(Error::domain(
            "link geometry",
            "LED and photodiode positions coincide",
        ));
    }
    let emit = v.dot(geometry.led_normal);
    let incident = -v.dot(pd_normal);
    if emit <= T::zero() || incident <= T::zero() {
        return Ok(T::zero());
    }
    let n = geometry.lambert_order;
    Ok(lambert_prefactor(geometry.pd_area, n) * emit.powf(n) * incident
        / r.powf(n + T::lit(3.0)))
}

/// Emission angle, incidence angle and distance for one detector.
pub fn link_angles<T: Real>(geometry: &LinkGeometry<T>, which: Link) -> Result<(T, T, T)> {
    let (pd_pos, pd_normal) = geometry.pose(which);
    let v = pd_pos - geometry.led_pos;
    let r = v.norm();
    if !(r > T::zero()) {
        return Err(Error::domain(
            "link geometry",
            "LED and photodiode positions coincide",
        ));
    }
    let clamp = |c: T| c.max(-T::one()).min(T::one());
    let phi = clamp(v.dot(geometry.led_normal) / r).acos();
    let theta = clamp(-v.dot(pd_normal) / r).acos();
    Ok((phi, theta, r))
}
