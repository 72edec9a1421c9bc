//! Self-contained query benchmark: scatters a corpus and query centers
//! uniformly over an area, times the spatial index against the linear
//! scan, and cross-checks that both return identical ordinals.
//!
//! The linear scan is only timed on an evenly strided subsample of the
//! queries; at benchmark sizes a full scan pass would dominate the wall
//! clock without changing the estimate.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::balltree::{BruteForceScan, IndexStats, RadiusQuery, SpatialIndex};
use crate::densify::{DensePoint, PointCorpus, PointId};
use crate::geodesy::{to_radians, EarthModel, GeoCoord, RadCoord};
use crate::ingest::BoundingBox;

/// Roughly 9 x 11 km at Sydney's latitude.
pub fn default_area() -> BoundingBox {
    BoundingBox::new(151.15, -33.95, 151.25, -33.85).expect("static bbox is valid")
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub corpus_points: usize,
    pub queries: usize,
    pub radius_m: f64,
    pub leaf_size: usize,
    pub build_ms: f64,
    pub tree_total_ms: f64,
    pub tree_mean_us: f64,
    pub tree_median_us: f64,
    pub brute_sampled: usize,
    pub brute_mean_us: f64,
    /// brute mean time / tree mean time.
    pub speedup: f64,
    pub mean_hits: f64,
    pub max_hits: usize,
    /// Largest result set as a fraction of the corpus.
    pub max_hit_fraction: f64,
    /// Tree and scan agreed on every sampled query.
    pub sampled_sets_equal: bool,
    pub index: IndexStats,
}

/// Uniform random corpus over the area; ordinals are encoded into the
/// point ids so results stay traceable.
pub fn scatter_corpus(n: usize, bbox: &BoundingBox, rng: &mut ChaCha8Rng) -> PointCorpus {
    let points = (0..n)
        .map(|i| DensePoint {
            id: PointId {
                building_id: "scatter".to_string(),
                ring_idx: 0,
                edge_idx: i as u32,
                step_idx: 0,
            },
            coord: random_coord(bbox, rng),
            offset_m: 0.0,
        })
        .collect();
    PointCorpus {
        points,
        degenerate_edges: 0,
    }
}

fn random_coord(bbox: &BoundingBox, rng: &mut ChaCha8Rng) -> GeoCoord {
    GeoCoord::new(
        rng.gen_range(bbox.min_lat..bbox.max_lat),
        rng.gen_range(bbox.min_lon..bbox.max_lon),
    )
}

pub fn run_benchmark(
    n_points: usize,
    n_queries: usize,
    radius_m: f64,
    leaf_size: usize,
    seed: u64,
    brute_sample: usize,
) -> BenchReport {
    assert!(n_points > 0 && n_queries > 0 && brute_sample > 0);
    let earth = EarthModel::default();
    let bbox = default_area();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus = scatter_corpus(n_points, &bbox, &mut rng);
    let queries: Vec<RadCoord> = (0..n_queries)
        .map(|_| to_radians(random_coord(&bbox, &mut rng)))
        .collect();

    let t = Instant::now();
    let index =
        SpatialIndex::from_radians(corpus.points_rad(), leaf_size).expect("non-empty corpus");
    let build_ms = t.elapsed().as_secs_f64() * 1e3;

    let mut tree_ns: Vec<u128> = Vec::with_capacity(n_queries);
    let mut results: Vec<Vec<usize>> = Vec::with_capacity(n_queries);
    for &q in &queries {
        let t = Instant::now();
        let hits = index.query_radius(q, radius_m, earth);
        tree_ns.push(t.elapsed().as_nanos());
        results.push(hits);
    }
    let tree_total_ns: u128 = tree_ns.iter().sum();
    let mut sorted_ns = tree_ns.clone();
    sorted_ns.sort_unstable();
    let tree_median_us = sorted_ns[sorted_ns.len() / 2] as f64 / 1e3;
    let tree_mean_us = tree_total_ns as f64 / n_queries as f64 / 1e3;

    // Evenly strided subsample for the scan; deterministic given counts.
    let scan = BruteForceScan::from_radians(corpus.points_rad());
    let stride = (n_queries / brute_sample).max(1);
    let sample_idx: Vec<usize> = (0..n_queries).step_by(stride).take(brute_sample).collect();
    let mut brute_total_ns: u128 = 0;
    let mut sampled_sets_equal = true;
    for &i in &sample_idx {
        let t = Instant::now();
        let hits = scan.query_radius(queries[i], radius_m, earth);
        brute_total_ns += t.elapsed().as_nanos();
        if hits != results[i] {
            sampled_sets_equal = false;
        }
    }
    let brute_mean_us = brute_total_ns as f64 / sample_idx.len() as f64 / 1e3;

    let max_hits = results.iter().map(Vec::len).max().unwrap_or(0);
    let mean_hits = results.iter().map(Vec::len).sum::<usize>() as f64 / n_queries as f64;

    BenchReport {
        corpus_points: n_points,
        queries: n_queries,
        radius_m,
        leaf_size,
        build_ms,
        tree_total_ms: tree_total_ns as f64 / 1e6,
        tree_mean_us,
        tree_median_us,
        brute_sampled: sample_idx.len(),
        brute_mean_us,
        speedup: brute_mean_us / tree_mean_us,
        mean_hits,
        max_hits,
        max_hit_fraction: max_hits as f64 / n_points as f64,
        sampled_sets_equal,
        index: index.stats(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_benchmark_agrees_with_scan() {
        let report = run_benchmark(2000, 40, 300.0, 32, 99, 10);
        assert!(report.sampled_sets_equal);
        assert_eq!(report.brute_sampled, 10);
        assert!(report.tree_mean_us > 0.0);
        assert!(report.brute_mean_us > 0.0);
        assert!(report.speedup.is_finite() && report.speedup > 0.0);
        assert_eq!(report.index.point_count, 2000);
    }

    #[test]
    fn scatter_is_deterministic() {
        let bbox = default_area();
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let a = scatter_corpus(100, &bbox, &mut r1);
        let b = scatter_corpus(100, &bbox, &mut r2);
        assert_eq!(a, b);
        for p in &a.points {
            assert!(bbox.contains(p.coord));
        }
    }

    #[test]
    fn hit_stats_are_consistent() {
        let report = run_benchmark(500, 30, 1000.0, 16, 7, 5);
        assert!(report.max_hits >= report.mean_hits as usize);
        assert!(report.max_hit_fraction <= 1.0);
    }
}
