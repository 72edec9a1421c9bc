//! Densifies building polygon outlines into points spaced no farther apart
//! than a given bound, each carrying a stable identity. The resulting corpus
//! is what the spatial index is built over.

use crate::geodesy::{
    destination_point, haversine_distance, initial_bearing, to_radians, EarthModel, GeoCoord,
    RadCoord,
};
use crate::ingest::BuildingFootprint;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

/// Stable identity of a densified point: which building, ring, and edge it
/// came from, and its subdivision step along that edge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PointId {
    pub building_id: String,
    pub ring_idx: u32,
    pub edge_idx: u32,
    pub step_idx: u32,
}

impl std::fmt::Display for PointId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}/r{}/e{}/s{}",
            self.building_id, self.ring_idx, self.edge_idx, self.step_idx
        )
    }
}

/// One densified outline point.
#[derive(Debug, Clone, PartialEq)]
pub struct DensePoint {
    pub id: PointId,
    pub coord: GeoCoord,
    /// Meters from the start vertex of this point's edge; 0 for vertices.
    pub offset_m: f64,
}

/// The ordered point corpus. A point's position in `points` is its ordinal,
/// the index the spatial index reports back; `id_of` maps it to identity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCorpus {
    pub points: Vec<DensePoint>,
    /// Zero-length edges dropped during densification.
    pub degenerate_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DensifyError {
    #[error("no usable rings: corpus would be empty")]
    EmptyCorpus,
}

impl PointCorpus {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn id_of(&self, ordinal: usize) -> &PointId {
        &self.points[ordinal].id
    }

    /// Corpus coordinates in radians, ordinal order.
    pub fn points_rad(&self) -> Vec<RadCoord> {
        self.points.iter().map(|p| to_radians(p.coord)).collect()
    }
}

/// Densifies one closed ring. Each edge of length L emits
/// n = ceil(L / spacing_m) points at offsets k * (L / n), k = 0..n-1: the
/// start vertex is included, the end vertex is the next edge's start.
/// Returns the points and the count of skipped zero-length edges.
pub fn densify_ring(
    building_id: &str,
    ring_idx: u32,
    ring: &[GeoCoord],
    spacing_m: f64,
    earth: EarthModel,
) -> (Vec<DensePoint>, usize) {
    let mut points = Vec::new();
    let mut degenerate = 0usize;
    if ring.len() < 2 {
        return (points, degenerate);
    }
    for edge_idx in 0..ring.len() - 1 {
        let a = ring[edge_idx];
        let b = ring[edge_idx + 1];
        let length = haversine_distance(a, b, earth);
        let Ok(bearing) = initial_bearing(a, b) else {
            degenerate += 1;
            continue;
        };
        if length.is_nan() || length <= 0.0 {
            degenerate += 1;
            continue;
        }
        let n = (length / spacing_m).ceil().max(1.0) as u32;
        let step_m = length / n as f64;
        for step_idx in 0..n {
            let offset_m = step_idx as f64 * step_m;
            // The start vertex is emitted verbatim, not routed through the
            // direct-problem formula, so original vertices survive exactly.
            let coord = if step_idx == 0 {
                a
            } else {
                match destination_point(a, bearing, offset_m, earth) {
                    Ok(c) => c,
                    Err(_) => continue,
                }
            };
            points.push(DensePoint {
                id: PointId {
                    building_id: building_id.to_string(),
                    ring_idx,
                    edge_idx: edge_idx as u32,
                    step_idx,
                },
                coord,
                offset_m,
            });
        }
    }
    (points, degenerate)
}

/// Builds the corpus: densify_ring over every ring of every footprint, in
/// input order. Deterministic for a fixed input order.
pub fn build_corpus(
    footprints: &[BuildingFootprint],
    spacing_m: f64,
    earth: EarthModel,
) -> Result<PointCorpus, DensifyError> {
    let mut points = Vec::new();
    let mut degenerate_edges = 0usize;
    for fp in footprints {
        for (ring_idx, ring) in fp.rings.iter().enumerate() {
            let (mut ring_points, skipped) =
                densify_ring(&fp.building_id, ring_idx as u32, ring, spacing_m, earth);
            points.append(&mut ring_points);
            degenerate_edges += skipped;
        }
    }
    if points.is_empty() {
        return Err(DensifyError::EmptyCorpus);
    }
    Ok(PointCorpus {
        points,
        degenerate_edges,
    })
}

/// Dumps the corpus as CSV: `building_id,ring_idx,edge_idx,step_idx,lat,lon`.
pub fn write_corpus_csv(path: &Path, corpus: &PointCorpus) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "building_id,ring_idx,edge_idx,step_idx,lat,lon")?;
    for p in &corpus.points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.id.building_id,
            p.id.ring_idx,
            p.id.edge_idx,
            p.id.step_idx,
            p.coord.lat_deg,
            p.coord.lon_deg
        )?;
    }
    out.flush()
}
