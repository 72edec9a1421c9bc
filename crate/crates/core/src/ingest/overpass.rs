//! Client for fetching building footprints from an Overpass API endpoint,
//! with a file cache so repeated runs stay offline.

use super::BoundingBox;
use serde_json::{json, Value};
use std::path::Path;
use std::time::Duration;

pub const DEFAULT_ENDPOINT: &str = "https://overpass-api.de/api/interpreter";

#[derive(Debug, thiserror::Error)]
pub enum OverpassError {
    #[error("network failure after {attempts} attempt(s): {reason}")]
    Network { attempts: u32, reason: String },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("cache {path}: {source}")]
    CacheIo {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Fetch configuration. `backoff_base_ms` doubles per retry.
#[derive(Debug, Clone)]
pub struct OverpassClient {
    pub endpoint: String,
    pub timeout_s: u64,
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
}

impl Default for OverpassClient {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            timeout_s: 25,
            max_attempts: 3,
            backoff_base_ms: 500,
        }
    }
}

impl OverpassClient {
    /// Returns the building FeatureCollection for `bbox`.
    ///
    /// A readable cache file short-circuits the network entirely; otherwise
    /// the endpoint is queried (with retries), the converted GeoJSON is
    /// written to `cache_path`, and the document is returned.
    pub fn fetch_buildings(
        &self,
        bbox: &BoundingBox,
        cache_path: &Path,
    ) -> Result<Value, OverpassError> {
        if cache_path.exists() {
            let raw = std::fs::read_to_string(cache_path).map_err(|e| OverpassError::CacheIo {
                path: cache_path.to_path_buf(),
                source: e,
            })?;
            return serde_json::from_str(&raw)
                .map_err(|e| OverpassError::MalformedResponse(format!("cached document: {e}")));
        }

        let response = self.request_with_retry(&overpass_query(bbox, self.timeout_s))?;
        let doc = ways_to_geojson(&response)?;

        if let Some(parent) = cache_path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| OverpassError::CacheIo {
                    path: cache_path.to_path_buf(),
                    source: e,
                })?;
            }
        }
        let text = serde_json::to_string_pretty(&doc).expect("GeoJSON is serializable");
        std::fs::write(cache_path, text).map_err(|e| OverpassError::CacheIo {
            path: cache_path.to_path_buf(),
            source: e,
        })?;
        Ok(doc)
    }

    fn request_with_retry(&self, query: &str) -> Result<Value, OverpassError> {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(self.timeout_s))
            .build();
        let attempts = self.max_attempts.max(1);
        let mut last_rate_limited = false;
        let mut last_reason = String::new();

        for attempt in 1..=attempts {
            if attempt > 1 {
                let backoff = self.backoff_base_ms << (attempt - 2);
                std::thread::sleep(Duration::from_millis(backoff));
            }
            match agent.post(&self.endpoint).send_form(&[("data", query)]) {
                Ok(response) => {
                    return response
                        .into_json::<Value>()
                        .map_err(|e| OverpassError::MalformedResponse(e.to_string()));
                }
                Err(ureq::Error::Status(429, _)) => {
                    last_rate_limited = true;
                    last_reason = "HTTP 429".into();
                }
                Err(ureq::Error::Status(code, _)) if (500..600).contains(&code) => {
                    last_rate_limited = false;
                    last_reason = format!("HTTP {code}");
                }
                Err(ureq::Error::Status(code, _)) => {
                    // Client errors other than 429 will not improve on retry.
                    return Err(OverpassError::Network {
                        attempts: attempt,
                        reason: format!("HTTP {code}"),
                    });
                }
                Err(ureq::Error::Transport(t)) => {
                    last_rate_limited = false;
                    last_reason = t.to_string();
                }
            }
        }

        if last_rate_limited {
            Err(OverpassError::RateLimited { attempts })
        } else {
            Err(OverpassError::Network {
                attempts,
                reason: last_reason,
            })
        }
    }
}

/// The Overpass QL query for all building ways inside `bbox`.
pub fn overpass_query(bbox: &BoundingBox, timeout_s: u64) -> String {
    format!(
        "[out:json][timeout:{timeout_s}];way[\"building\"]({},{},{},{});out geom;",
        bbox.min_lat, bbox.min_lon, bbox.max_lat, bbox.max_lon
    )
}

/// Converts an Overpass `out geom` response to a GeoJSON FeatureCollection
/// of Polygons. Ways too short to close into a ring are dropped.
pub fn ways_to_geojson(response: &Value) -> Result<Value, OverpassError> {
    let elements = response["elements"]
        .as_array()
        .ok_or_else(|| OverpassError::MalformedResponse("missing elements array".into()))?;

    let mut features = Vec::new();
    for element in elements {
        if element["type"] != "way" {
            continue;
        }
        let Some(geometry) = element["geometry"].as_array() else {
            continue;
        };
        let mut ring: Vec<[f64; 2]> = Vec::with_capacity(geometry.len() + 1);
        for node in geometry {
            let (Some(lat), Some(lon)) = (node["lat"].as_f64(), node["lon"].as_f64()) else {
                return Err(OverpassError::MalformedResponse(
                    "way geometry node without lat/lon".into(),
                ));
            };
            let p = [lon, lat];
            if ring.last() != Some(&p) {
                ring.push(p);
            }
        }
        if ring.first() != ring.last() {
            if let Some(&first) = ring.first() {
                ring.push(first);
            }
        }
        if ring.len() < 4 {
            continue;
        }
        let id = element["id"]
            .as_i64()
            .map(|n| format!("way/{n}"))
            .unwrap_or_else(|| format!("way/unknown-{}", features.len()));
        let properties = element["tags"].clone();
        features.push(json!({
            "type": "Feature",
            "id": id,
            "properties": if properties.is_object() { properties } else { json!({}) },
            "geometry": { "type": "Polygon", "coordinates": [ring] },
        }));
    }
    Ok(json!({ "type": "FeatureCollection", "features": features }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_buildings;

    fn test_bbox() -> BoundingBox {
        BoundingBox::new(151.18943, -33.91441, 151.21681, -33.89325).unwrap()
    }

    fn offline_client() -> OverpassClient {
        OverpassClient {
            // Nothing listens here; any network attempt fails immediately.
            endpoint: "http://127.0.0.1:1".to_string(),
            timeout_s: 1,
            max_attempts: 3,
            backoff_base_ms: 1,
        }
    }

    #[test]
    fn query_uses_south_west_north_east_order() {
        let q = overpass_query(&test_bbox(), 25);
        assert_eq!(
            q,
            "[out:json][timeout:25];way[\"building\"](-33.91441,151.18943,-33.89325,151.21681);out geom;"
        );
    }

    #[test]
    fn cache_hit_avoids_network() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("buildings.geojson");
        let doc = json!({ "type": "FeatureCollection", "features": [] });
        std::fs::write(&cache, serde_json::to_string(&doc).unwrap()).unwrap();

        let fetched = offline_client()
            .fetch_buildings(&test_bbox(), &cache)
            .unwrap();
        assert_eq!(fetched, doc);
    }

    #[test]
    fn unreachable_endpoint_fails_after_all_attempts() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("missing.geojson");
        match offline_client().fetch_buildings(&test_bbox(), &cache) {
            Err(OverpassError::Network { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected network error, got {other:?}"),
        }
        assert!(!cache.exists());
    }

    #[test]
    fn ways_convert_to_closed_polygons() {
        let response = json!({
            "elements": [
                {
                    "type": "way",
                    "id": 42,
                    "tags": { "building": "yes" },
                    "geometry": [
                        { "lat": 0.0, "lon": 0.0 },
                        { "lat": 0.0, "lon": 1.0 },
                        { "lat": 1.0, "lon": 1.0 },
                        { "lat": 1.0, "lon": 0.0 },
                    ],
                },
                { "type": "node", "id": 7, "lat": 0.0, "lon": 0.0 },
                { "type": "way", "id": 43, "geometry": [
                    { "lat": 0.0, "lon": 0.0 }, { "lat": 1.0, "lon": 1.0 },
                ]},
            ],
        });
        let doc = ways_to_geojson(&response).unwrap();
        let features = doc["features"].as_array().unwrap();
        assert_eq!(features.len(), 1);
        assert_eq!(features[0]["id"], "way/42");
        let ring = features[0]["geometry"]["coordinates"][0]
            .as_array()
            .unwrap();
        assert_eq!(ring.len(), 5);
        assert_eq!(ring.first(), ring.last());
        // The converted document is also valid footprint input.
        let set = parse_buildings(&doc).unwrap();
        assert_eq!(set.footprints.len(), 1);
        assert_eq!(set.footprints[0].building_id, "way/42");
    }

    #[test]
    fn malformed_elements_are_an_error() {
        let response = json!({ "not_elements": [] });
        assert!(matches!(
            ways_to_geojson(&response),
            Err(OverpassError::MalformedResponse(_))
        ));
    }
}
