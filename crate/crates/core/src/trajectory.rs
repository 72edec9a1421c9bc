//! Resampling raw fixes to a fixed time interval and attaching forward
//! bearings, producing the per-trip tracks the visibility pass consumes.

use crate::geodesy::{initial_bearing, GeoCoord};
use crate::ingest::RawTrip;

/// One resampled trajectory point. `bearing_deg` is `None` when the heading
/// is unobservable (terminal point, or coincident with its successor).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub t: f64,
    pub coord: GeoCoord,
    pub bearing_deg: Option<f64>,
}

/// A trip resampled onto the exact time grid t0, t0+interval, t0+2*interval, ...
#[derive(Debug, Clone, PartialEq)]
pub struct TripTrack {
    pub trip_id: String,
    pub points: Vec<TrackPoint>,
    pub interval_s: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("trip {trip_id}: fewer than 2 fixes or time span shorter than the interval")]
    TooShort { trip_id: String },
}

/// Resamples a time-sorted trip to `interval_s`-spaced points via linear
/// lat/lon interpolation between bracketing fixes.
///
/// Grid instants that coincide with a fix time reproduce that fix exactly;
/// every interpolated coordinate stays inside the lat/lon box of its two
/// bracketing fixes.
pub fn interpolate_trip(trip: &RawTrip, interval_s: f64) -> Result<TripTrack, TrajectoryError> {
    let fixes = &trip.fixes;
    let too_short = || TrajectoryError::TooShort {
        trip_id: trip.trip_id.clone(),
    };
    if fixes.len() < 2 || interval_s.is_nan() || interval_s <= 0.0 {
        return Err(too_short());
    }
    let t0 = fixes[0].t;
    let t_last = fixes[fixes.len() - 1].t;
    if t_last - t0 < interval_s {
        return Err(too_short());
    }

    let mut points = Vec::with_capacity(((t_last - t0) / interval_s) as usize + 1);
    let mut j = 0usize;
    let mut k = 0u64;
    loop {
        let t = t0 + (k as f64) * interval_s;
        if t > t_last {
            break;
        }
        while fixes[j + 1].t < t {
            j += 1;
        }
        let a = &fixes[j];
        let b = &fixes[j + 1];
        let coord = if t == a.t {
            a.coord
        } else if t == b.t {
            b.coord
        } else {
            let w = (t - a.t) / (b.t - a.t);
            GeoCoord::new(
                lerp_clamped(a.coord.lat_deg, b.coord.lat_deg, w),
                lerp_clamped(a.coord.lon_deg, b.coord.lon_deg, w),
            )
        };
        points.push(TrackPoint {
            t,
            coord,
            bearing_deg: None,
        });
        k += 1;
    }

    Ok(TripTrack {
        trip_id: trip.trip_id.clone(),
        points,
        interval_s,
    })
}

// Linear interpolation clamped into [min(a,b), max(a,b)] so float rounding
// can never push a point outside its bracket.
fn lerp_clamped(a: f64, b: f64, w: f64) -> f64 {
    (a + w * (b - a)).clamp(a.min(b), a.max(b))
}

/// Sets each point's bearing to the forward azimuth toward its successor.
/// The terminal point, and any point coincident with its successor, keep
/// an unobservable (`None`) bearing.
pub fn assign_bearings(mut track: TripTrack) -> TripTrack {
    let n = track.points.len();
    for i in 0..n.saturating_sub(1) {
        let here = track.points[i].coord;
        let next = track.points[i + 1].coord;
        track.points[i].bearing_deg = initial_bearing(here, next).ok();
    }
    if let Some(last) = track.points.last_mut() {
        last.bearing_deg = None;
    }
    track
}

/// Interpolates and assigns bearings for every trip, dropping trips that are
/// too short to resample. Returns the tracks and the dropped-trip count.
pub fn resample_all(trips: &[RawTrip], interval_s: f64) -> (Vec<TripTrack>, usize) {
    let mut tracks = Vec::with_capacity(trips.len());
    let mut dropped = 0usize;
    for trip in trips {
        match interpolate_trip(trip, interval_s) {
            Ok(track) => tracks.push(assign_bearings(track)),
            Err(TrajectoryError::TooShort { .. }) => dropped += 1,
        }
    }
    (tracks, dropped)
}
