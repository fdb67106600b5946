//! Spherical-earth geodesy.

use serde::{Deserialize, Serialize};

use super::GraphError;

/// Mean earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_009.0;

/// A geodetic position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLng {
    pub lat: f64,
    pub lng: f64,
}

impl LatLng {
    pub const fn new(lat: f64, lng: f64) -> Self {
        Self { lat, lng }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lng)
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(a: LatLng, b: LatLng) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lng - a.lng).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Initial great-circle bearing from `a` to `b`, in degrees `[0, 360)`,
/// with 0 = North and 90 = East.
pub fn initial_bearing_deg(a: LatLng, b: LatLng) -> Result<f64, GraphError> {
    if a == b {
        return Err(GraphError::CoincidentPoints(a.lat, a.lng));
    }
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dlambda = (b.lng - a.lng).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    Ok(normalize_deg(y.atan2(x).to_degrees()))
}

/// Wraps an angle into `[0, 360)`.
pub fn normalize_deg(angle: f64) -> f64 {
    let a = angle.rem_euclid(360.0);
    // rem_euclid rounds tiny negative inputs up to exactly 360.0
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

/// Wraps an angle into `[-180, 180)`.
pub fn signed_deg(angle: f64) -> f64 {
    normalize_deg(angle + 180.0) - 180.0
}

/// Equirectangular tangent-plane approximation around an origin.
///
/// `x` points East and `y` North, both in meters. Exact enough for the
/// few-kilometer extents of a region; used for hull areas and layout.
#[derive(Debug, Clone, Copy)]
pub struct TangentPlane {
    origin: LatLng,
    cos_lat: f64,
}

impl TangentPlane {
    pub fn new(origin: LatLng) -> Self {
        Self {
            origin,
            cos_lat: origin.lat.to_radians().cos(),
        }
    }

    pub fn origin(&self) -> LatLng {
        self.origin
    }

    pub fn to_local(&self, p: LatLng) -> (f64, f64) {
        let x = (p.lng - self.origin.lng).to_radians() * EARTH_RADIUS_M * self.cos_lat;
        let y = (p.lat - self.origin.lat).to_radians() * EARTH_RADIUS_M;
        (x, y)
    }

    pub fn to_latlng(&self, x: f64, y: f64) -> LatLng {
        LatLng {
            lat: self.origin.lat + (y / EARTH_RADIUS_M).to_degrees(),
            lng: self.origin.lng + (x / (EARTH_RADIUS_M * self.cos_lat)).to_degrees(),
        }
    }
}
