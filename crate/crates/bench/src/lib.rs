//! Deterministic fixtures for the index benchmarks: scattered corpora and
//! query centers over the default benchmark area.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sightline::bench::{default_area, scatter_corpus};
use sightline::geodesy::{to_radians, RadCoord};
use sightline::{GeoCoord, PointCorpus};

pub fn corpus(n: usize, seed: u64) -> PointCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    scatter_corpus(n, &default_area(), &mut rng)
}

pub fn query_centers(n: usize, seed: u64) -> Vec<RadCoord> {
    let area = default_area();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            to_radians(GeoCoord::new(
                rng.gen_range(area.min_lat..area.max_lat),
                rng.gen_range(area.min_lon..area.max_lon),
            ))
        })
        .collect()
}
