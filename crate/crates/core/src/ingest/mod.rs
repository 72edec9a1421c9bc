//! Input loading, validation, and bounding-box filtering for trajectory
//! fixes and building footprints.

pub mod geojson;
pub mod overpass;

pub use geojson::{
    load_buildings, parse_buildings, write_buildings, BuildingFootprint, BuildingSet,
};

use crate::geodesy::GeoCoord;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}: {reason}")]
    Parse { row: u64, reason: String },
    #[error("parse error in {context}: {reason}")]
    Geo { context: String, reason: String },
    #[error("no usable records in input")]
    EmptyInput,
    #[error("invalid bounding box: {0}")]
    InvalidBbox(String),
}

impl IngestError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// One timestamped GPS observation belonging to a trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFix {
    pub trip_id: String,
    pub t: f64,
    pub coord: GeoCoord,
}

/// All fixes of one trip, time-ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrip {
    pub trip_id: String,
    pub fixes: Vec<RawFix>,
}

/// Axis-aligned WGS84 filter window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BoundingBox {
    pub fn new(
        min_lon: f64,
        min_lat: f64,
        max_lon: f64,
        max_lat: f64,
    ) -> Result<Self, IngestError> {
        let b = Self {
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        };
        if !(min_lon.is_finite()
            && min_lat.is_finite()
            && max_lon.is_finite()
            && max_lat.is_finite())
        {
            return Err(IngestError::InvalidBbox("non-finite bound".into()));
        }
        if min_lon >= max_lon || min_lat >= max_lat {
            return Err(IngestError::InvalidBbox(format!(
                "min must be strictly below max, got lon [{min_lon}, {max_lon}], lat [{min_lat}, {max_lat}]"
            )));
        }
        Ok(b)
    }

    /// Strict interior test; boundary coordinates are outside.
    pub fn contains(&self, c: GeoCoord) -> bool {
        c.lon_deg > self.min_lon
            && c.lon_deg < self.max_lon
            && c.lat_deg > self.min_lat
            && c.lat_deg < self.max_lat
    }

    pub fn center(&self) -> GeoCoord {
        GeoCoord::new(
            0.5 * (self.min_lat + self.max_lat),
            0.5 * (self.min_lon + self.max_lon),
        )
    }
}

const TRAJECTORY_HEADER: [&str; 4] = ["trip_id", "t", "lat", "lon"];

/// Loads a trajectory CSV (`trip_id,t,lat,lon`), grouping fixes by trip in
/// first-appearance order and sorting each trip by time.
///
/// Duplicate timestamps inside a trip collapse to the last occurrence in
/// file order.
pub fn load_trajectories(path: &Path) -> Result<Vec<RawTrip>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(e, 1))?;

    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    if header.iter().collect::<Vec<_>>() != TRAJECTORY_HEADER {
        return Err(IngestError::Parse {
            row: 1,
            reason: format!("expected header trip_id,t,lat,lon, got {:?}", header),
        });
    }

    let mut trips: Vec<RawTrip> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();

    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            return Err(IngestError::Parse {
                row,
                reason: format!("expected 4 fields, got {}", record.len()),
            });
        }
        let trip_id = record[0].to_string();
        let t = parse_field(&record[1], "t", row)?;
        let lat = parse_field(&record[2], "lat", row)?;
        let lon = parse_field(&record[3], "lon", row)?;
        let coord = GeoCoord::new(lat, lon);
        if !t.is_finite() {
            return Err(IngestError::Parse {
                row,
                reason: format!("t = {t} is not finite"),
            });
        }
        if !coord.is_valid() {
            return Err(IngestError::Parse {
                row,
                reason: format!("coordinate ({lat}, {lon}) outside WGS84 ranges"),
            });
        }
        let fix = RawFix {
            trip_id: trip_id.clone(),
            t,
            coord,
        };
        match index.get(&trip_id) {
            Some(&i) => trips[i].fixes.push(fix),
            None => {
                index.insert(trip_id.clone(), trips.len());
                trips.push(RawTrip {
                    trip_id,
                    fixes: vec![fix],
                });
            }
        }
    }

    if trips.is_empty() {
        return Err(IngestError::EmptyInput);
    }

    for trip in &mut trips {
        trip.fixes.sort_by(|a, b| a.t.total_cmp(&b.t));
        collapse_duplicate_times(&mut trip.fixes);
    }
    Ok(trips)
}

fn parse_field(raw: &str, name: &str, row: u64) -> Result<f64, IngestError> {
    raw.parse::<f64>().map_err(|_| IngestError::Parse {
        row,
        reason: format!("{name} = {raw:?} is not a number"),
    })
}

fn csv_error(e: csv::Error, fallback_row: u64) -> IngestError {
    let row = e.position().map(|p| p.line()).unwrap_or(fallback_row);
    if let csv::ErrorKind::Io(io) = e.into_kind() {
        IngestError::Io {
            path: PathBuf::new(),
            source: io,
        }
    } else {
        IngestError::Parse {
            row,
            reason: "malformed CSV record".into(),
        }
    }
}

// Keeps the last fix of every equal-timestamp run; input must be sorted by t.
fn collapse_duplicate_times(fixes: &mut Vec<RawFix>) {
    let mut kept: Vec<RawFix> = Vec::with_capacity(fixes.len());
    for fix in fixes.drain(..) {
        if kept.last().map(|k| k.t == fix.t).unwrap_or(false) {
            *kept.last_mut().unwrap() = fix;
        } else {
            kept.push(fix);
        }
    }
    *fixes = kept;
}

/// Writes trips back to the trajectory CSV schema. Floats use the shortest
/// representation that round-trips, so load -> write -> load is an identity.
pub fn write_trajectories(path: &Path, trips: &[RawTrip]) -> Result<(), IngestError> {
    let mut out =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| IngestError::io(path, e))?);
    writeln!(out, "trip_id,t,lat,lon").map_err(|e| IngestError::io(path, e))?;
    for trip in trips {
        for fix in &trip.fixes {
            writeln!(
                out,
                "{},{},{},{}",
                trip.trip_id, fix.t, fix.coord.lat_deg, fix.coord.lon_deg
            )
            .map_err(|e| IngestError::io(path, e))?;
        }
    }
    out.flush().map_err(|e| IngestError::io(path, e))
}

/// Keeps only fixes strictly inside `bbox`, preserving order; trips left
/// with no fixes are dropped.
pub fn filter_trips(trips: Vec<RawTrip>, bbox: &BoundingBox) -> Vec<RawTrip> {
    trips
        .into_iter()
        .filter_map(|mut trip| {
            trip.fixes.retain(|f| bbox.contains(f.coord));
            if trip.fixes.is_empty() {
                None
            } else {
                Some(trip)
            }
        })
        .collect()
}

/// Keeps footprints with at least one ring vertex strictly inside `bbox`.
pub fn filter_footprints(
    footprints: Vec<BuildingFootprint>,
    bbox: &BoundingBox,
) -> Vec<BuildingFootprint> {
    footprints
        .into_iter()
        .filter(|fp| {
            fp.rings
                .iter()
                .any(|ring| ring.iter().any(|&v| bbox.contains(v)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(file.path(), content).unwrap();
        file
    }

    #[test]
    fn loads_and_groups_fixes() {
        let f = write_temp("trip_id,t,lat,lon\nA,0,0,0\nA,10,0,0.001\n");
        let trips = load_trajectories(f.path()).unwrap();
        assert_eq!(trips.len(), 1);
        assert_eq!(trips[0].trip_id, "A");
        assert_eq!(trips[0].fixes.len(), 2);
        assert_eq!(trips[0].fixes[1].coord.lon_deg, 0.001);
    }

    #[test]
    fn sorts_out_of_order_rows() {
        let f = write_temp("trip_id,t,lat,lon\nA,10,1,1\nA,0,0,0\nA,5,0.5,0.5\n");
        let trips = load_trajectories(f.path()).unwrap();
        let times: Vec<f64> = trips[0].fixes.iter().map(|x| x.t).collect();
        assert_eq!(times, vec![0.0, 5.0, 10.0]);
    }

    #[test]
    fn duplicate_timestamp_keeps_last_occurrence() {
        let f = write_temp("trip_id,t,lat,lon\nA,0,0,0\nA,5,1,1\nA,5,2,2\nA,10,3,3\n");
        let trips = load_trajectories(f.path()).unwrap();
        assert_eq!(trips[0].fixes.len(), 3);
        assert_eq!(trips[0].fixes[1].coord.lat_deg, 2.0);
    }

    #[test]
    fn out_of_range_latitude_is_a_row_error() {
        let f = write_temp("trip_id,t,lat,lon\nA,0,0,0\nA,5,91,0\n");
        match load_trajectories(f.path()) {
            Err(IngestError::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_time_is_a_row_error() {
        let f = write_temp("trip_id,t,lat,lon\nA,zero,0,0\n");
        assert!(matches!(
            load_trajectories(f.path()),
            Err(IngestError::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn header_only_file_is_empty_input() {
        let f = write_temp("trip_id,t,lat,lon\n");
        assert!(matches!(
            load_trajectories(f.path()),
            Err(IngestError::EmptyInput)
        ));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let f = write_temp("id,time,lat,lon\nA,0,0,0\n");
        assert!(matches!(
            load_trajectories(f.path()),
            Err(IngestError::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn trips_preserve_first_appearance_order() {
        let f = write_temp("trip_id,t,lat,lon\nB,0,0,0\nA,0,0,0\nB,5,1,1\n");
        let trips = load_trajectories(f.path()).unwrap();
        let ids: Vec<&str> = trips.iter().map(|t| t.trip_id.as_str()).collect();
        assert_eq!(ids, vec!["B", "A"]);
    }

    #[test]
    fn round_trip_is_identity() {
        let f = write_temp("trip_id,t,lat,lon\nA,10,1,1\nA,0,0,0\nB,3.5,-33.9144,151.2001\n");
        let first = load_trajectories(f.path()).unwrap();
        let copy = tempfile::NamedTempFile::new().unwrap();
        write_trajectories(copy.path(), &first).unwrap();
        let second = load_trajectories(copy.path()).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn bbox_rejects_inverted_bounds() {
        assert!(BoundingBox::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn bbox_containment_is_strict() {
        let bbox = BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(bbox.contains(GeoCoord::new(0.5, 0.5)));
        assert!(!bbox.contains(GeoCoord::new(0.0, 0.5)));
        assert!(!bbox.contains(GeoCoord::new(0.5, 1.0)));
        assert!(!bbox.contains(GeoCoord::new(2.0, 0.5)));
    }

    #[test]
    fn table_style_bbox_excludes_origin() {
        let bbox = BoundingBox::new(151.18943, -33.91441, 151.21681, -33.89325).unwrap();
        assert!(!bbox.contains(GeoCoord::new(0.0, 0.0)));
        assert!(bbox.contains(bbox.center()));
    }

    #[test]
    fn filter_trips_keeps_inside_fixes_and_drops_empty_trips() {
        let bbox = BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let mk = |id: &str, pts: &[(f64, f64, f64)]| RawTrip {
            trip_id: id.into(),
            fixes: pts
                .iter()
                .map(|&(t, lat, lon)| RawFix {
                    trip_id: id.into(),
                    t,
                    coord: GeoCoord::new(lat, lon),
                })
                .collect(),
        };
        let trips = vec![
            mk("in", &[(0.0, 0.5, 0.5), (5.0, 0.6, 0.6), (10.0, 5.0, 5.0)]),
            mk("out", &[(0.0, 5.0, 5.0)]),
        ];
        let kept = filter_trips(trips, &bbox);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].fixes.len(), 2);
    }

    #[test]
    fn filter_trips_is_idempotent() {
        let bbox = BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let trips = vec![RawTrip {
            trip_id: "A".into(),
            fixes: vec![
                RawFix {
                    trip_id: "A".into(),
                    t: 0.0,
                    coord: GeoCoord::new(0.5, 0.5),
                },
                RawFix {
                    trip_id: "A".into(),
                    t: 5.0,
                    coord: GeoCoord::new(1.5, 0.5),
                },
            ],
        }];
        let once = filter_trips(trips, &bbox);
        let twice = filter_trips(once.clone(), &bbox);
        assert_eq!(once, twice);
    }
}
