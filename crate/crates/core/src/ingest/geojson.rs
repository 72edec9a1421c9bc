//! GeoJSON building-footprint reading and writing.
//!
//! Accepts RFC 7946 FeatureCollections of Polygon/MultiPolygon features.
//! Other geometry types are skipped and counted, not fatal.

use super::IngestError;
use crate::geodesy::GeoCoord;
use serde_json::{json, Value};
use std::path::Path;

/// One building outline: an exterior ring plus any interior (courtyard)
/// rings, each closed (first coordinate = last).
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingFootprint {
    pub building_id: String,
    pub rings: Vec<Vec<GeoCoord>>,
}

/// Result of a footprint load: the usable footprints plus a tally of
/// skipped non-areal geometries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BuildingSet {
    pub footprints: Vec<BuildingFootprint>,
    pub skipped_geometries: usize,
}

/// Loads building footprints from a GeoJSON file.
pub fn load_buildings(path: &Path) -> Result<BuildingSet, IngestError> {
    let raw = std::fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let doc: Value = serde_json::from_str(&raw).map_err(|e| IngestError::Geo {
        context: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_buildings(&doc)
}

/// Parses a GeoJSON FeatureCollection document into footprints.
pub fn parse_buildings(doc: &Value) -> Result<BuildingSet, IngestError> {
    if doc["type"] != "FeatureCollection" {
        return Err(IngestError::Geo {
            context: "document".into(),
            reason: format!("expected FeatureCollection, got {}", doc["type"]),
        });
    }
    let features = doc["features"].as_array().ok_or_else(|| IngestError::Geo {
        context: "document".into(),
        reason: "missing features array".into(),
    })?;

    let mut set = BuildingSet::default();
    for (idx, feature) in features.iter().enumerate() {
        let id = feature_id(feature, idx);
        let geometry = &feature["geometry"];
        match geometry["type"].as_str() {
            Some("Polygon") => {
                let rings = parse_rings(&geometry["coordinates"], &id)?;
                set.footprints.push(BuildingFootprint {
                    building_id: id,
                    rings,
                });
            }
            Some("MultiPolygon") => {
                let polys = geometry["coordinates"]
                    .as_array()
                    .ok_or_else(|| geo_err(&id, "MultiPolygon coordinates missing"))?;
                for (k, poly) in polys.iter().enumerate() {
                    let part_id = format!("{id}:{k}");
                    let rings = parse_rings(poly, &part_id)?;
                    set.footprints.push(BuildingFootprint {
                        building_id: part_id,
                        rings,
                    });
                }
            }
            _ => set.skipped_geometries += 1,
        }
    }
    Ok(set)
}

fn feature_id(feature: &Value, idx: usize) -> String {
    if let Some(id) = value_as_id(&feature["id"]) {
        return id;
    }
    if let Some(id) = value_as_id(&feature["properties"]["@id"]) {
        return id;
    }
    format!("feature-{idx}")
}

fn value_as_id(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn geo_err(context: &str, reason: impl Into<String>) -> IngestError {
    IngestError::Geo {
        context: context.to_string(),
        reason: reason.into(),
    }
}

fn parse_rings(coordinates: &Value, id: &str) -> Result<Vec<Vec<GeoCoord>>, IngestError> {
    let rings = coordinates
        .as_array()
        .ok_or_else(|| geo_err(id, "polygon coordinates are not an array"))?;
    if rings.is_empty() {
        return Err(geo_err(id, "polygon has no rings"));
    }
    rings.iter().map(|r| parse_ring(r, id)).collect()
}

fn parse_ring(ring: &Value, id: &str) -> Result<Vec<GeoCoord>, IngestError> {
    let positions = ring
        .as_array()
        .ok_or_else(|| geo_err(id, "ring is not an array"))?;
    let mut coords = Vec::with_capacity(positions.len() + 1);
    for pos in positions {
        let pos = pos
            .as_array()
            .ok_or_else(|| geo_err(id, "position is not an array"))?;
        if pos.len() < 2 {
            return Err(geo_err(id, "position has fewer than 2 numbers"));
        }
        let lon = pos[0]
            .as_f64()
            .ok_or_else(|| geo_err(id, "non-numeric longitude"))?;
        let lat = pos[1]
            .as_f64()
            .ok_or_else(|| geo_err(id, "non-numeric latitude"))?;
        let c = GeoCoord::new(lat, lon);
        if !c.is_valid() {
            return Err(geo_err(
                id,
                format!("coordinate ({lat}, {lon}) outside WGS84 ranges"),
            ));
        }
        // Consecutive duplicate vertices collapse; they carry no outline.
        if coords.last() != Some(&c) {
            coords.push(c);
        }
    }
    if coords.first() != coords.last() {
        let first = *coords.first().ok_or_else(|| geo_err(id, "empty ring"))?;
        coords.push(first);
    }
    if coords.len() < 4 {
        return Err(geo_err(
            id,
            format!(
                "ring has {} distinct coordinates, need a closed ring of at least 4",
                coords.len()
            ),
        ));
    }
    Ok(coords)
}

/// Writes footprints as a GeoJSON FeatureCollection of Polygons.
/// Floats serialize to their shortest round-tripping form, so
/// load -> write -> load is an identity.
pub fn write_buildings(path: &Path, footprints: &[BuildingFootprint]) -> Result<(), IngestError> {
    let doc = buildings_to_geojson(footprints);
    let text = serde_json::to_string_pretty(&doc).expect("footprint JSON is serializable");
    std::fs::write(path, text).map_err(|e| IngestError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// In-memory GeoJSON form of footprints.
pub fn buildings_to_geojson(footprints: &[BuildingFootprint]) -> Value {
    let features: Vec<Value> = footprints
        .iter()
        .map(|fp| {
            let rings: Vec<Vec<[f64; 2]>> = fp
                .rings
                .iter()
                .map(|ring| ring.iter().map(|c| [c.lon_deg, c.lat_deg]).collect())
                .collect();
            json!({
                "type": "Feature",
                "id": fp.building_id,
                "properties": {},
                "geometry": { "type": "Polygon", "coordinates": rings },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}
