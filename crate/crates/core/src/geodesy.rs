//! Spherical-earth geometric primitives shared by every other module.
//!
//! All geometry in this crate runs on a sphere with the haversine metric:
//! distances, bearings, and destination points stay mutually consistent,
//! which is what makes ball-tree pruning bounds valid.

use serde::{Deserialize, Serialize};

/// Mean-sphere earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A WGS84 latitude/longitude pair in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoCoord {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl GeoCoord {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Self {
        Self { lat_deg, lon_deg }
    }

    /// True when both components are finite and inside the WGS84 value ranges.
    pub fn is_valid(&self) -> bool {
        self.lat_deg.is_finite()
            && self.lon_deg.is_finite()
            && (-90.0..=90.0).contains(&self.lat_deg)
            && (-180.0..=180.0).contains(&self.lon_deg)
    }
}

/// The same position expressed in radians, as stored inside the spatial index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadCoord {
    pub lat_rad: f64,
    pub lon_rad: f64,
}

/// Spherical earth model. Injected everywhere so tests can run on a unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    pub radius_m: f64,
}

impl Default for EarthModel {
    fn default() -> Self {
        Self {
            radius_m: EARTH_RADIUS_M,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum GeodesyError {
    /// Bearing between coincident points is undefined; callers mark it invalid.
    #[error("bearing is undefined for identical points")]
    IdenticalPoints,
    /// Destination did not evaluate to a finite coordinate (e.g. NaN input).
    #[error("destination is not a finite coordinate")]
    InvalidResult,
}

/// Converts a degree coordinate to radians.
pub fn to_radians(c: GeoCoord) -> RadCoord {
    RadCoord {
        lat_rad: c.lat_deg.to_radians(),
        lon_rad: c.lon_deg.to_radians(),
    }
}

/// Converts a radian coordinate back to degrees, normalizing longitude to [-180, 180].
pub fn to_degrees(c: RadCoord) -> GeoCoord {
    GeoCoord {
        lat_deg: c.lat_rad.to_degrees(),
        lon_deg: normalize_lon_deg(c.lon_rad.to_degrees()),
    }
}

fn normalize_lon_deg(mut lon: f64) -> f64 {
    if lon > 180.0 {
        lon -= 360.0;
    } else if lon < -180.0 {
        lon += 360.0;
    }
    lon
}

/// Haversine central angle between two radian coordinates, in radians.
///
/// This is the single distance primitive shared by the ball tree, the
/// brute-force scan, and [`haversine_distance`]; keeping one code path is
/// what lets tree queries match the linear scan bit-for-bit.
pub fn central_angle(a: RadCoord, b: RadCoord) -> f64 {
    let sin_half_dlat = ((b.lat_rad - a.lat_rad) * 0.5).sin();
    let sin_half_dlon = ((b.lon_rad - a.lon_rad) * 0.5).sin();
    let h = sin_half_dlat * sin_half_dlat
        + a.lat_rad.cos() * b.lat_rad.cos() * sin_half_dlon * sin_half_dlon;
    let h = h.clamp(0.0, 1.0);
    2.0 * h.sqrt().atan2((1.0 - h).sqrt())
}

/// Great-circle distance in meters between two degree coordinates.
pub fn haversine_distance(a: GeoCoord, b: GeoCoord, earth: EarthModel) -> f64 {
    earth.radius_m * central_angle(to_radians(a), to_radians(b))
}

/// Forward azimuth of the great circle from `a` to `b`, degrees clockwise
/// from true north in [0, 360). Errors when the points coincide exactly.
pub fn initial_bearing(a: GeoCoord, b: GeoCoord) -> Result<f64, GeodesyError> {
    if a.lat_deg == b.lat_deg && a.lon_deg == b.lon_deg {
        return Err(GeodesyError::IdenticalPoints);
    }
    let ar = to_radians(a);
    let br = to_radians(b);
    let dlon = br.lon_rad - ar.lon_rad;
    let y = dlon.sin() * br.lat_rad.cos();
    let x = ar.lat_rad.cos() * br.lat_rad.sin() - ar.lat_rad.sin() * br.lat_rad.cos() * dlon.cos();
    Ok(normalize_bearing(y.atan2(x).to_degrees()))
}

fn normalize_bearing(deg: f64) -> f64 {
    ((deg % 360.0) + 360.0) % 360.0
}

/// Solves the direct geodesic problem on the sphere: the point reached by
/// traveling `distance_m` from `origin` with the given initial bearing.
pub fn destination_point(
    origin: GeoCoord,
    bearing_deg: f64,
    distance_m: f64,
    earth: EarthModel,
) -> Result<GeoCoord, GeodesyError> {
    let o = to_radians(origin);
    let theta = bearing_deg.to_radians();
    let delta = distance_m / earth.radius_m;

    let (sin_lat, cos_lat) = (o.lat_rad.sin(), o.lat_rad.cos());
    let (sin_delta, cos_delta) = (delta.sin(), delta.cos());

    let lat2 = (sin_lat * cos_delta + cos_lat * sin_delta * theta.cos())
        .clamp(-1.0, 1.0)
        .asin();
    let lon2 =
        o.lon_rad + (theta.sin() * sin_delta * cos_lat).atan2(cos_delta - sin_lat * lat2.sin());

    let dest = to_degrees(RadCoord {
        lat_rad: lat2,
        lon_rad: wrap_lon_rad(lon2),
    });
    if dest.is_valid() {
        Ok(dest)
    } else {
        Err(GeodesyError::InvalidResult)
    }
}

fn wrap_lon_rad(lon: f64) -> f64 {
    use std::f64::consts::PI;
    let mut l = lon % (2.0 * PI);
    if l > PI {
        l -= 2.0 * PI;
    } else if l < -PI {
        l += 2.0 * PI;
    }
    l
}
