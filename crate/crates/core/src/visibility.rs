//! Per-trip visibility counting (forward viewing circles against the point
//! corpus) and cross-trip aggregation keyed by rounded coordinates.

use crate::balltree::RadiusQuery;
use crate::densify::{PointCorpus, PointId};
use crate::geodesy::{destination_point, to_radians, EarthModel, GeoCoord};
use crate::trajectory::{TrackPoint, TripTrack};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

/// Viewing-circle geometry: a disc of `radius_m` centered `lead_m` ahead of
/// the vehicle along its bearing, evaluated every `interval_s` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewParams {
    pub radius_m: f64,
    pub lead_m: f64,
    pub interval_s: f64,
}

impl Default for ViewParams {
    fn default() -> Self {
        Self {
            radius_m: 50.0,
            lead_m: 50.0,
            interval_s: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VisibilityError {
    #[error("track point has no observable bearing")]
    InvalidBearing,
    #[error("viewing center is not a finite coordinate")]
    InvalidCenter,
    #[error("point id {0} is not in the corpus")]
    UnknownPointId(String),
}

/// Where one track point looks: `lead_m` ahead along the bearing.
pub fn viewing_center(
    p: &TrackPoint,
    params: &ViewParams,
    earth: EarthModel,
) -> Result<GeoCoord, VisibilityError> {
    let bearing = p.bearing_deg.ok_or(VisibilityError::InvalidBearing)?;
    destination_point(p.coord, bearing, params.lead_m, earth)
        .map_err(|_| VisibilityError::InvalidCenter)
}

/// Per-trip visibility: how many viewing circles of this trip each corpus
/// point fell inside. Zero-count points are absent; `skipped_points` tallies
/// track points with no usable viewing circle.
#[derive(Debug, Clone, PartialEq)]
pub struct TripVisibility {
    pub trip_id: String,
    pub counts: BTreeMap<PointId, u64>,
    pub skipped_points: usize,
}

impl TripVisibility {
    /// Total (track point, circle) containment events of this trip.
    pub fn event_count(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Runs the viewing-circle pass for one trip: every track point with a
/// valid bearing projects a circle, and every corpus point the radius query
/// returns gets one count.
pub fn trip_visibility(
    track: &TripTrack,
    index: &impl RadiusQuery,
    corpus: &PointCorpus,
    params: &ViewParams,
    earth: EarthModel,
) -> TripVisibility {
    let mut per_ordinal: Vec<u64> = vec![0; corpus.len()];
    let mut skipped = 0usize;
    for point in &track.points {
        let center = match viewing_center(point, params, earth) {
            Ok(c) => c,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        for ordinal in index.query_radius(to_radians(center), params.radius_m, earth) {
            per_ordinal[ordinal] += 1;
        }
    }

    let counts = per_ordinal
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(ordinal, c)| (corpus.id_of(ordinal).clone(), c))
        .collect();
    TripVisibility {
        trip_id: track.trip_id.clone(),
        counts,
        skipped_points: skipped,
    }
}

/// Grouping key: latitude and longitude rounded to `precision` decimals,
/// held as scaled integers so key equality is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointKey {
    pub lat_scaled: i64,
    pub lon_scaled: i64,
}

pub fn point_key(coord: GeoCoord, precision: u32) -> PointKey {
    let scale = 10f64.powi(precision as i32);
    PointKey {
        lat_scaled: (coord.lat_deg * scale).round() as i64,
        lon_scaled: (coord.lon_deg * scale).round() as i64,
    }
}

/// One aggregated entry: a rounded-coordinate key, the exact coordinate of
/// its first contributing corpus point (lowest ordinal), and the summed count.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateEntry {
    pub key: PointKey,
    pub coord: GeoCoord,
    pub total_count: u64,
}

/// Cross-trip aggregate, entries in ascending key order.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateVisibility {
    pub precision: u32,
    pub entries: Vec<AggregateEntry>,
}

impl AggregateVisibility {
    pub fn total_events(&self) -> u64 {
        self.entries.iter().map(|e| e.total_count).sum()
    }

    pub fn totals(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.total_count).collect()
    }

    /// Rebuilds an aggregate from rows read back out of a CSV export.
    /// Keys are re-derived at `precision`; rows landing on the same key merge
    /// by summing, so a coarser precision than the export used is fine.
    pub fn from_rows(rows: &[AggregateRow], precision: u32) -> AggregateVisibility {
        let mut groups: BTreeMap<PointKey, (GeoCoord, u64)> = BTreeMap::new();
        for row in rows {
            let coord = GeoCoord::new(row.lat, row.lon);
            let slot = groups
                .entry(point_key(coord, precision))
                .or_insert((coord, 0));
            slot.1 += row.total_count;
        }
        let entries = groups
            .into_iter()
            .map(|(key, (coord, total_count))| AggregateEntry {
                key,
                coord,
                total_count,
            })
            .collect();
        AggregateVisibility { precision, entries }
    }
}

/// Sums per-trip counts into rounded-coordinate groups.
///
/// The representative coordinate of a key is the exact coordinate of the
/// first contributing corpus point in corpus order, so the result is
/// independent of trip order and of how trips are batched.
pub fn aggregate(
    per_trip: &[TripVisibility],
    corpus: &PointCorpus,
    precision: u32,
) -> Result<AggregateVisibility, VisibilityError> {
    let mut ordinal_of: std::collections::HashMap<&PointId, usize> =
        std::collections::HashMap::with_capacity(corpus.len());
    for (ordinal, point) in corpus.points.iter().enumerate() {
        ordinal_of.entry(&point.id).or_insert(ordinal);
    }

    let mut groups: BTreeMap<PointKey, (usize, u64)> = BTreeMap::new();
    for trip in per_trip {
        for (id, &count) in &trip.counts {
            let &ordinal = ordinal_of
                .get(id)
                .ok_or_else(|| VisibilityError::UnknownPointId(id.to_string()))?;
            let key = point_key(corpus.points[ordinal].coord, precision);
            let slot = groups.entry(key).or_insert((ordinal, 0));
            slot.0 = slot.0.min(ordinal);
            slot.1 += count;
        }
    }

    let entries = groups
        .into_iter()
        .map(|(key, (ordinal, total_count))| AggregateEntry {
            key,
            coord: corpus.points[ordinal].coord,
            total_count,
        })
        .collect();
    Ok(AggregateVisibility { precision, entries })
}

// Writes one scaled key component as a plain decimal with `precision`
// digits, without going through float formatting.
fn format_scaled(scaled: i64, precision: u32) -> String {
    if precision == 0 {
        return scaled.to_string();
    }
    let divisor = 10i64.pow(precision);
    let sign = if scaled < 0 { "-" } else { "" };
    let magnitude = scaled.unsigned_abs();
    let int_part = magnitude / divisor as u64;
    let frac_part = magnitude % divisor as u64;
    format!(
        "{sign}{int_part}.{frac_part:0width$}",
        width = precision as usize
    )
}

/// Writes the aggregate as CSV `lat,lon,total_count` with the rounded key
/// coordinates at `precision` decimals, ascending key order.
pub fn write_aggregate_csv(path: &Path, agg: &AggregateVisibility) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "lat,lon,total_count")?;
    for e in &agg.entries {
        writeln!(
            out,
            "{},{},{}",
            format_scaled(e.key.lat_scaled, agg.precision),
            format_scaled(e.key.lon_scaled, agg.precision),
            e.total_count
        )?;
    }
    out.flush()
}

/// One row of an aggregate CSV read back for downstream analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub lat: f64,
    pub lon: f64,
    pub total_count: u64,
}

/// Reads an aggregate CSV written by [`write_aggregate_csv`].
pub fn load_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>, crate::ingest::IngestError> {
    use crate::ingest::IngestError;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IngestError::Geo {
            context: path.display().to_string(),
            reason: e.to_string(),
        })?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Parse {
            row: 0,
            reason: e.to_string(),
        })?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |name: &str| IngestError::Parse {
            row,
            reason: format!("bad {name} field"),
        };
        if record.len() != 3 {
            return Err(parse_err("record"));
        }
        rows.push(AggregateRow {
            lat: record[0].parse().map_err(|_| parse_err("lat"))?,
            lon: record[1].parse().map_err(|_| parse_err("lon"))?,
            total_count: record[2].parse().map_err(|_| parse_err("total_count"))?,
        });
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    Ok(rows)
}

const CIRCLE_SEGMENTS: usize = 64;

/// GeoJSON view of one trip: the track as a LineString plus a 64-gon
/// approximation of every viewing circle.
pub fn trip_geojson(track: &TripTrack, params: &ViewParams, earth: EarthModel) -> Value {
    let line: Vec<[f64; 2]> = track
        .points
        .iter()
        .map(|p| [p.coord.lon_deg, p.coord.lat_deg])
        .collect();
    let mut features = vec![json!({
        "type": "Feature",
        "properties": { "trip_id": track.trip_id, "kind": "track" },
        "geometry": { "type": "LineString", "coordinates": line },
    })];

    for point in &track.points {
        let Ok(center) = viewing_center(point, params, earth) else {
            continue;
        };
        let mut ring: Vec<[f64; 2]> = Vec::with_capacity(CIRCLE_SEGMENTS + 1);
        for k in 0..CIRCLE_SEGMENTS {
            let bearing = 360.0 * k as f64 / CIRCLE_SEGMENTS as f64;
            let Ok(v) = destination_point(center, bearing, params.radius_m, earth) else {
                continue;
            };
            ring.push([v.lon_deg, v.lat_deg]);
        }
        if ring.len() < 3 {
            continue;
        }
        ring.push(ring[0]);
        features.push(json!({
            "type": "Feature",
            "properties": {
                "trip_id": track.trip_id,
                "kind": "viewing_circle",
                "t": point.t,
                "bearing": point.bearing_deg,
            },
            "geometry": { "type": "Polygon", "coordinates": [ring] },
        }));
    }

    json!({ "type": "FeatureCollection", "features": features })
}
