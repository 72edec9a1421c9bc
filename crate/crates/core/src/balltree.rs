//! From-scratch ball tree over radian coordinates under the haversine
//! metric, with exact radius queries, plus the brute-force linear scan it
//! is validated and benchmarked against.
//!
//! Exactness contract: a radius query returns precisely the ordinals the
//! linear scan returns. Both paths share one distance predicate, and the
//! tree's pruning/inclusion bounds carry guard bands so float rounding in
//! the triangle-inequality arithmetic can never change the result set:
//! borderline subtrees simply fall through to per-point checks.

use crate::densify::PointCorpus;
use crate::geodesy::{central_angle, EarthModel, RadCoord};
use serde::Serialize;
use std::collections::BTreeMap;

pub const DEFAULT_LEAF_SIZE: usize = 32;

// Guard bands for pruning / whole-subtree inclusion decisions.
const BOUND_SLACK_REL: f64 = 1e-12;
const BOUND_SLACK_ABS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    Internal { left: usize, right: usize },
    Leaf,
}

/// One ball: every member point lies within `radius_rad` of `center`
/// (haversine central angle). Members are `order[start..end]`.
#[derive(Debug, Clone)]
pub struct BallNode {
    pub center: RadCoord,
    pub radius_rad: f64,
    pub start: usize,
    pub end: usize,
    pub kind: NodeKind,
}

/// Immutable spatial index over a point corpus. Safe for concurrent
/// read-only queries.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    nodes: Vec<BallNode>,
    order: Vec<u32>,
    points_rad: Vec<RadCoord>,
    leaf_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,
    #[error("index audit failed: {0}")]
    Audit(String),
}

/// Radius search: every corpus ordinal within `radius_m` of `center`
/// (boundary inclusive), ascending. Implemented by both the ball tree and
/// the brute-force scan so either can drive the visibility pass.
pub trait RadiusQuery: Sync {
    fn query_radius(&self, center: RadCoord, radius_m: f64, earth: EarthModel) -> Vec<usize>;
}

/// Builds a ball tree over the corpus. Single-threaded and deterministic
/// for a fixed input order and leaf size.
pub fn build_index(corpus: &PointCorpus, leaf_size: usize) -> Result<SpatialIndex, IndexError> {
    SpatialIndex::from_radians(corpus.points_rad(), leaf_size)
}

/// The definitional answer: a linear scan of the corpus.
pub fn brute_force_radius(
    corpus: &PointCorpus,
    center: RadCoord,
    radius_m: f64,
    earth: EarthModel,
) -> Vec<usize> {
    BruteForceScan::from_radians(corpus.points_rad()).query_radius(center, radius_m, earth)
}

impl SpatialIndex {
    /// Builds the tree directly from radian coordinates (ordinal order).
    pub fn from_radians(points_rad: Vec<RadCoord>, leaf_size: usize) -> Result<Self, IndexError> {
        if points_rad.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        let leaf_size = leaf_size.max(1);
        let n = points_rad.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes: Vec<BallNode> = Vec::with_capacity(2 * (n / leaf_size + 1));

        nodes.push(placeholder_node());
        // Explicit work stack: build depth never touches the call stack.
        let mut work: Vec<(usize, usize, usize)> = vec![(0, n, 0)];
        while let Some((start, end, slot)) = work.pop() {
            let center = centroid(&points_rad, &order[start..end]);
            let radius_rad = max_angle(center, &points_rad, &order[start..end]);
            if end - start <= leaf_size {
                nodes[slot] = BallNode {
                    center,
                    radius_rad,
                    start,
                    end,
                    kind: NodeKind::Leaf,
                };
            } else {
                let mid = split_span(&points_rad, &mut order, start, end, center);
                let left = nodes.len();
                nodes.push(placeholder_node());
                let right = nodes.len();
                nodes.push(placeholder_node());
                nodes[slot] = BallNode {
                    center,
                    radius_rad,
                    start,
                    end,
                    kind: NodeKind::Internal { left, right },
                };
                work.push((start, mid, left));
                work.push((mid, end, right));
            }
        }

        Ok(Self {
            nodes,
            order,
            points_rad,
            leaf_size,
        })
    }

    pub fn len(&self) -> usize {
        self.points_rad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points_rad.is_empty()
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    /// All corpus ordinals within `radius_m` of `center`, boundary
    /// inclusive, ascending. Exactly equals the brute-force scan.
    pub fn query_radius(&self, center: RadCoord, radius_m: f64, earth: EarthModel) -> Vec<usize> {
        let r_ang = radius_m / earth.radius_m;
        let mut hits: Vec<usize> = Vec::new();
        let mut stack: Vec<usize> = vec![0];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            let d = central_angle(center, node.center);

            let prune_bound = (node.radius_rad + r_ang) * (1.0 + BOUND_SLACK_REL) + BOUND_SLACK_ABS;
            if d > prune_bound {
                continue;
            }
            let include_bound = r_ang * (1.0 - BOUND_SLACK_REL) - BOUND_SLACK_ABS;
            if d + node.radius_rad <= include_bound {
                hits.extend(self.order[node.start..node.end].iter().map(|&i| i as usize));
                continue;
            }
            match node.kind {
                NodeKind::Leaf => {
                    for &i in &self.order[node.start..node.end] {
                        if central_angle(center, self.points_rad[i as usize]) <= r_ang {
                            hits.push(i as usize);
                        }
                    }
                }
                NodeKind::Internal { left, right } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        hits.sort_unstable();
        hits
    }

    /// Exhaustive structural check: `order` is a permutation, spans nest,
    /// leaves respect `leaf_size`, and every ball contains its members.
    pub fn audit(&self) -> Result<(), IndexError> {
        let n = self.points_rad.len();
        let mut seen = vec![false; n];
        for &i in &self.order {
            let i = i as usize;
            if i >= n || seen[i] {
                return Err(IndexError::Audit(format!(
                    "order is not a permutation at {i}"
                )));
            }
            seen[i] = true;
        }

        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            if node.start >= node.end {
                return Err(IndexError::Audit(format!("node {idx} has empty span")));
            }
            for k in node.start..node.end {
                let p = self.points_rad[self.order[k] as usize];
                let d = central_angle(node.center, p);
                if d > node.radius_rad {
                    return Err(IndexError::Audit(format!(
                        "node {idx}: member at slot {k} lies {d} rad out, radius {}",
                        node.radius_rad
                    )));
                }
            }
            match node.kind {
                NodeKind::Leaf => {
                    if node.end - node.start > self.leaf_size {
                        return Err(IndexError::Audit(format!(
                            "leaf {idx} holds {} > leaf_size {}",
                            node.end - node.start,
                            self.leaf_size
                        )));
                    }
                }
                NodeKind::Internal { left, right } => {
                    let (l, r) = (&self.nodes[left], &self.nodes[right]);
                    if l.start != node.start || l.end != r.start || r.end != node.end {
                        return Err(IndexError::Audit(format!(
                            "node {idx} children do not partition its span"
                        )));
                    }
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> IndexStats {
        let mut stats = IndexStats {
            point_count: self.points_rad.len(),
            node_count: self.nodes.len(),
            leaf_count: 0,
            max_depth: 0,
            leaf_occupancy: BTreeMap::new(),
        };
        let mut stack = vec![(0usize, 0usize)];
        while let Some((idx, depth)) = stack.pop() {
            let node = &self.nodes[idx];
            stats.max_depth = stats.max_depth.max(depth);
            match node.kind {
                NodeKind::Leaf => {
                    stats.leaf_count += 1;
                    *stats
                        .leaf_occupancy
                        .entry(node.end - node.start)
                        .or_insert(0) += 1;
                }
                NodeKind::Internal { left, right } => {
                    stack.push((left, depth + 1));
                    stack.push((right, depth + 1));
                }
            }
        }
        stats
    }
}

impl RadiusQuery for SpatialIndex {
    fn query_radius(&self, center: RadCoord, radius_m: f64, earth: EarthModel) -> Vec<usize> {
        SpatialIndex::query_radius(self, center, radius_m, earth)
    }
}

/// Tree shape summary for benchmark reports.
#[derive(Debug, Clone, Serialize)]
pub struct IndexStats {
    pub point_count: usize,
    pub node_count: usize,
    pub leaf_count: usize,
    pub max_depth: usize,
    /// occupancy -> number of leaves with that occupancy
    pub leaf_occupancy: BTreeMap<usize, usize>,
}

/// Linear scan over precomputed radian coordinates; the testing and
/// benchmarking baseline.
#[derive(Debug, Clone)]
pub struct BruteForceScan {
    points_rad: Vec<RadCoord>,
}

impl BruteForceScan {
    pub fn new(corpus: &PointCorpus) -> Self {
        Self {
            points_rad: corpus.points_rad(),
        }
    }

    pub fn from_radians(points_rad: Vec<RadCoord>) -> Self {
        Self { points_rad }
    }
}

impl RadiusQuery for BruteForceScan {
    fn query_radius(&self, center: RadCoord, radius_m: f64, earth: EarthModel) -> Vec<usize> {
        let r_ang = radius_m / earth.radius_m;
        (0..self.points_rad.len())
            .filter(|&i| central_angle(center, self.points_rad[i]) <= r_ang)
            .collect()
    }
}

fn placeholder_node() -> BallNode {
    BallNode {
        center: RadCoord {
            lat_rad: 0.0,
            lon_rad: 0.0,
        },
        radius_rad: 0.0,
        start: 0,
        end: 0,
        kind: NodeKind::Leaf,
    }
}

// Normalized 3D mean of the member unit vectors. Falls back to the first
// member when the mean degenerates (antipodal spread). A single member is
// its own centroid, keeping the node radius exactly zero.
fn centroid(points: &[RadCoord], members: &[u32]) -> RadCoord {
    if members.len() == 1 {
        return points[members[0] as usize];
    }
    let (mut x, mut y, mut z) = (0.0f64, 0.0f64, 0.0f64);
    for &i in members {
        let p = points[i as usize];
        let (sin_lat, cos_lat) = p.lat_rad.sin_cos();
        let (sin_lon, cos_lon) = p.lon_rad.sin_cos();
        x += cos_lat * cos_lon;
        y += cos_lat * sin_lon;
        z += sin_lat;
    }
    let norm = (x * x + y * y + z * z).sqrt();
    if norm < 1e-12 {
        return points[members[0] as usize];
    }
    RadCoord {
        lat_rad: (z / norm).clamp(-1.0, 1.0).asin(),
        lon_rad: y.atan2(x),
    }
}

fn max_angle(center: RadCoord, points: &[RadCoord], members: &[u32]) -> f64 {
    members
        .iter()
        .map(|&i| central_angle(center, points[i as usize]))
        .fold(0.0, f64::max)
}

// Farthest-pair split: pole A is the member farthest from the centroid,
// pole B the member farthest from A; members go to the nearer pole (ties
// to A). Falls back to a median split when one side would be empty.
// Returns the first index of the right half. Both halves are non-empty.
fn split_span(
    points: &[RadCoord],
    order: &mut [u32],
    start: usize,
    end: usize,
    centroid: RadCoord,
) -> usize {
    let span = &order[start..end];
    let pole_a = points[far_point(points, span, centroid) as usize];
    let pole_b = points[far_point(points, span, pole_a) as usize];

    let mut left: Vec<u32> = Vec::with_capacity(span.len());
    let mut right: Vec<u32> = Vec::with_capacity(span.len());
    for &i in span {
        let p = points[i as usize];
        if central_angle(p, pole_a) <= central_angle(p, pole_b) {
            left.push(i);
        } else {
            right.push(i);
        }
    }

    if left.is_empty() || right.is_empty() {
        let mut tmp: Vec<u32> = order[start..end].to_vec();
        tmp.sort_by(|&i, &j| {
            central_angle(points[i as usize], pole_a)
                .total_cmp(&central_angle(points[j as usize], pole_a))
                .then(i.cmp(&j))
        });
        let mid = tmp.len() / 2;
        order[start..end].copy_from_slice(&tmp);
        return start + mid;
    }

    let mid = start + left.len();
    order[start..start + left.len()].copy_from_slice(&left);
    order[mid..end].copy_from_slice(&right);
    mid
}

// Member farthest from `from`; first encountered wins ties.
fn far_point(points: &[RadCoord], span: &[u32], from: RadCoord) -> u32 {
    let mut best = span[0];
    let mut best_d = -1.0f64;
    for &i in span {
        let d = central_angle(from, points[i as usize]);
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::{to_radians, GeoCoord, EARTH_RADIUS_M};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EARTH: EarthModel = EarthModel {
        radius_m: EARTH_RADIUS_M,
    };

    fn rad(lat: f64, lon: f64) -> RadCoord {
        to_radians(GeoCoord::new(lat, lon))
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<RadCoord> {
        (0..n)
            .map(|_| rad(rng.gen_range(-85.0..85.0), rng.gen_range(-180.0..180.0)))
            .collect()
    }

    #[test]
    fn single_point_is_one_zero_radius_leaf() {
        let index = SpatialIndex::from_radians(vec![rad(1.0, 2.0)], 32).unwrap();
        assert_eq!(index.stats().node_count, 1);
        assert_eq!(index.nodes[0].radius_rad, 0.0);
        index.audit().unwrap();
    }

    #[test]
    fn leaf_size_points_stay_in_one_leaf() {
        let points: Vec<RadCoord> = (0..32).map(|i| rad(i as f64 * 0.01, 0.0)).collect();
        let index = SpatialIndex::from_radians(points, 32).unwrap();
        assert_eq!(index.stats().node_count, 1);
        index.audit().unwrap();
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert_eq!(
            SpatialIndex::from_radians(vec![], 32).unwrap_err(),
            IndexError::EmptyCorpus
        );
    }

    #[test]
    fn zero_radius_on_a_corpus_point_returns_it() {
        let points = vec![rad(0.0, 0.0), rad(0.1, 0.1), rad(0.2, 0.2)];
        let index = SpatialIndex::from_radians(points, 2).unwrap();
        assert_eq!(index.query_radius(rad(0.1, 0.1), 0.0, EARTH), vec![1]);
    }

    #[test]
    fn far_center_returns_nothing() {
        let points = vec![rad(0.0, 0.0), rad(0.1, 0.1)];
        let index = SpatialIndex::from_radians(points, 2).unwrap();
        assert!(index
            .query_radius(rad(45.0, 90.0), 1000.0, EARTH)
            .is_empty());
    }

    #[test]
    fn planet_sized_radius_returns_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let points = random_points(&mut rng, 200);
        let index = SpatialIndex::from_radians(points, 16).unwrap();
        let all = index.query_radius(rad(10.0, 10.0), 2.0e7, EARTH);
        assert_eq!(all, (0..200).collect::<Vec<_>>());
    }

    #[test]
    fn identical_points_build_and_query() {
        let points = vec![rad(5.0, 5.0); 100];
        let index = SpatialIndex::from_radians(points, 8).unwrap();
        index.audit().unwrap();
        assert_eq!(index.query_radius(rad(5.0, 5.0), 1.0, EARTH).len(), 100);
        assert!(index.query_radius(rad(6.0, 5.0), 1.0, EARTH).is_empty());
    }

    #[test]
    fn matches_brute_force_on_seeded_corpora() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for round in 0..60 {
            let n = rng.gen_range(1..=1000);
            let leaf = rng.gen_range(1..=48);
            let points = random_points(&mut rng, n);
            let index = SpatialIndex::from_radians(points.clone(), leaf).unwrap();
            let brute = BruteForceScan::from_radians(points);
            for _ in 0..5 {
                let center = rad(rng.gen_range(-85.0..85.0), rng.gen_range(-180.0..180.0));
                let radius_m = rng.gen_range(1.0..5_000_000.0);
                assert_eq!(
                    index.query_radius(center, radius_m, EARTH),
                    brute.query_radius(center, radius_m, EARTH),
                    "round {round}, n {n}, leaf {leaf}"
                );
            }
        }
    }

    #[test]
    fn boundary_point_is_included_by_both_paths() {
        // A point exactly r_ang away: predicate is <=, so it must appear.
        let center = rad(0.0, 0.0);
        let points = vec![center, rad(0.0, 0.001)];
        let d_m = crate::geodesy::haversine_distance(
            GeoCoord::new(0.0, 0.0),
            GeoCoord::new(0.0, 0.001),
            EARTH,
        );
        let index = SpatialIndex::from_radians(points.clone(), 1).unwrap();
        let brute = BruteForceScan::from_radians(points);
        assert_eq!(index.query_radius(center, d_m, EARTH), vec![0, 1]);
        assert_eq!(brute.query_radius(center, d_m, EARTH), vec![0, 1]);
    }

    #[test]
    fn stats_account_for_every_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points = random_points(&mut rng, 2_000);
        let index = SpatialIndex::from_radians(points, 32).unwrap();
        let stats = index.stats();
        let occupancy_total: usize = stats
            .leaf_occupancy
            .iter()
            .map(|(size, count)| size * count)
            .sum();
        assert_eq!(occupancy_total, 2_000);
        assert_eq!(stats.node_count, 2 * stats.leaf_count - 1);
        assert!(stats.max_depth >= 6, "depth {}", stats.max_depth);
    }

    #[test]
    fn audit_passes_on_uniform_build() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points = random_points(&mut rng, 10_000);
        let index = SpatialIndex::from_radians(points, 32).unwrap();
        index.audit().unwrap();
    }

    proptest! {
        #[test]
        fn equals_brute_force(
            seed in 0u64..1_000_000,
            n in 1usize..300,
            leaf in 1usize..40,
            radius_m in 1.0..5_000_000.0f64,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points = random_points(&mut rng, n);
            let center = rad(rng.gen_range(-85.0..85.0), rng.gen_range(-180.0..180.0));
            let index = SpatialIndex::from_radians(points.clone(), leaf).unwrap();
            let brute = BruteForceScan::from_radians(points);
            prop_assert_eq!(
                index.query_radius(center, radius_m, EARTH),
                brute.query_radius(center, radius_m, EARTH)
            );
        }

        #[test]
        fn grows_monotonically_with_radius(
            seed in 0u64..1_000_000,
            n in 1usize..200,
            r1 in 1.0..2_000_000.0f64,
            extra in 0.0..2_000_000.0f64,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points = random_points(&mut rng, n);
            let center = rad(rng.gen_range(-85.0..85.0), rng.gen_range(-180.0..180.0));
            let index = SpatialIndex::from_radians(points, 16).unwrap();
            let small = index.query_radius(center, r1, EARTH);
            let large = index.query_radius(center, r1 + extra, EARTH);
            let large_set: std::collections::HashSet<usize> = large.into_iter().collect();
            prop_assert!(small.iter().all(|i| large_set.contains(i)));
        }

        #[test]
        fn audit_holds_for_any_leaf_size(
            seed in 0u64..1_000_000,
            n in 1usize..400,
            leaf in 1usize..64,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points = random_points(&mut rng, n);
            let index = SpatialIndex::from_radians(points, leaf).unwrap();
            prop_assert!(index.audit().is_ok());
        }
    }
}
