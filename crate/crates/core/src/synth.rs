//! Deterministic synthetic scenario generator: a street-grid city with
//! axis-aligned buildings and vehicles random-walking the grid.
//!
//! Geometry is laid out in a local meter frame anchored at the bbox
//! south-west corner and converted to degrees at emit time, so sizes and
//! speeds are exact in meters regardless of latitude. All randomness
//! flows from one seeded ChaCha8 stream in a fixed draw order: equal
//! configs produce byte-identical outputs.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geodesy::{GeoCoord, EARTH_RADIUS_M};
use crate::ingest::{BoundingBox, BuildingFootprint, RawFix, RawTrip};

/// Street grid pitch in meters.
const GRID_PITCH_M: f64 = 80.0;
/// Grid inset from the bbox edge; also bounds the lane offset.
const MARGIN_M: f64 = 40.0;
/// Half-width of a street corridor; buildings stay outside it.
const STREET_HALF_WIDTH_M: f64 = 6.0;
/// Minimum clear distance between buildings in a block.
const BUILDING_GAP_M: f64 = 2.0;
const BUILDING_SIDE_M: (f64, f64) = (8.0, 40.0);
const MAX_PLACEMENT_ATTEMPTS: usize = 100;
/// Fix epochs start here so timestamps look like real unix seconds.
const EPOCH_BASE_S: f64 = 1_700_000_000.0;

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub seed: u64,
    pub bbox: BoundingBox,
    pub n_trips: usize,
    pub n_buildings: usize,
    pub trip_duration_s: f64,
    /// Uniform speed range per trip, meters per second.
    pub speed_range_mps: (f64, f64),
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("could not place building {index} after {attempts} attempts; bbox too crowded")]
    PlacementFailure { index: usize, attempts: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub trips: Vec<RawTrip>,
    pub footprints: Vec<BuildingFootprint>,
}

/// Meter frame over the bbox: equirectangular with the cosine taken at
/// the central latitude, exact enough over the sub-kilometer extents the
/// generator is meant for.
struct Frame {
    lat0: f64,
    lon0: f64,
    m_per_deg_lat: f64,
    m_per_deg_lon: f64,
    width_m: f64,
    height_m: f64,
}

impl Frame {
    fn new(bbox: &BoundingBox) -> Frame {
        let m_per_deg_lat = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        let mid_lat = 0.5 * (bbox.min_lat + bbox.max_lat);
        let m_per_deg_lon = m_per_deg_lat * mid_lat.to_radians().cos();
        Frame {
            lat0: bbox.min_lat,
            lon0: bbox.min_lon,
            m_per_deg_lat,
            m_per_deg_lon,
            width_m: (bbox.max_lon - bbox.min_lon) * m_per_deg_lon,
            height_m: (bbox.max_lat - bbox.min_lat) * m_per_deg_lat,
        }
    }

    fn coord(&self, x_m: f64, y_m: f64) -> GeoCoord {
        GeoCoord::new(
            self.lat0 + y_m / self.m_per_deg_lat,
            self.lon0 + x_m / self.m_per_deg_lon,
        )
    }
}

#[derive(Clone, Copy)]
struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Rect {
    fn too_close(&self, other: &Rect, gap: f64) -> bool {
        !(self.x1 + gap <= other.x0
            || other.x1 + gap <= self.x0
            || self.y1 + gap <= other.y0
            || other.y1 + gap <= self.y0)
    }
}

/// Headings are grid directions: index into DIRS (E, N, W, S) as unit
/// steps in the meter frame.
const DIRS: [(f64, f64); 4] = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];

pub fn generate(config: &SynthConfig) -> Result<SynthOutput, SynthError> {
    validate(config)?;
    let frame = Frame::new(&config.bbox);

    // Street nodes sit every GRID_PITCH_M starting MARGIN_M inside.
    let nx = grid_count(frame.width_m);
    let ny = grid_count(frame.height_m);
    if nx < 2 || ny < 2 {
        return Err(SynthError::InvalidConfig(format!(
            "bbox spans {:.0}m x {:.0}m; need at least a 2x2 street grid ({}m pitch, {}m margin)",
            frame.width_m, frame.height_m, GRID_PITCH_M, MARGIN_M
        )));
    }
    let node_x = |i: usize| MARGIN_M + GRID_PITCH_M * i as f64;
    let node_y = |j: usize| MARGIN_M + GRID_PITCH_M * j as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Buildings fill the blocks between streets.
    let mut by_cell: HashMap<(usize, usize), Vec<Rect>> = HashMap::new();
    let mut footprints = Vec::with_capacity(config.n_buildings);
    for b in 0..config.n_buildings {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let ci = rng.gen_range(0..nx - 1);
            let cj = rng.gen_range(0..ny - 1);
            let cx0 = node_x(ci) + STREET_HALF_WIDTH_M;
            let cx1 = node_x(ci + 1) - STREET_HALF_WIDTH_M;
            let cy0 = node_y(cj) + STREET_HALF_WIDTH_M;
            let cy1 = node_y(cj + 1) - STREET_HALF_WIDTH_M;
            let w = rng.gen_range(BUILDING_SIDE_M.0..BUILDING_SIDE_M.1);
            let h = rng.gen_range(BUILDING_SIDE_M.0..BUILDING_SIDE_M.1);
            if w > cx1 - cx0 || h > cy1 - cy0 {
                continue;
            }
            let x0 = rng.gen_range(cx0..=cx1 - w);
            let y0 = rng.gen_range(cy0..=cy1 - h);
            let rect = Rect {
                x0,
                y0,
                x1: x0 + w,
                y1: y0 + h,
            };
            let cell = by_cell.entry((ci, cj)).or_default();
            if cell.iter().any(|r| r.too_close(&rect, BUILDING_GAP_M)) {
                continue;
            }
            cell.push(rect);
            let ring = vec![
                frame.coord(rect.x0, rect.y0),
                frame.coord(rect.x1, rect.y0),
                frame.coord(rect.x1, rect.y1),
                frame.coord(rect.x0, rect.y1),
                frame.coord(rect.x0, rect.y0),
            ];
            footprints.push(BuildingFootprint {
                building_id: format!("b{b:04}"),
                rings: vec![ring],
            });
            placed = true;
            break;
        }
        if !placed {
            return Err(SynthError::PlacementFailure {
                index: b,
                attempts: MAX_PLACEMENT_ATTEMPTS,
            });
        }
    }

    // Trips random-walk the grid: straight 0.5, left 0.25, right 0.25,
    // renormalized over turns that stay on the grid.
    let mut trips = Vec::with_capacity(config.n_trips);
    for trip in 0..config.n_trips {
        let speed = rng.gen_range(config.speed_range_mps.0..=config.speed_range_mps.1);
        let lane = rng.gen_range(-3.0..=3.0);
        let mut node = (rng.gen_range(0..nx), rng.gen_range(0..ny));
        let mut heading = pick_start_heading(&mut rng, node, nx, ny);
        let mut pos = (node_x(node.0), node_y(node.1));
        let t0 = EPOCH_BASE_S + 900.0 * trip as f64;

        let mut fixes = Vec::new();
        let emit = |fixes: &mut Vec<RawFix>, t: f64, pos: (f64, f64), heading: usize| {
            // Lane offset shifts perpendicular to travel.
            let (dx, dy) = DIRS[heading];
            let coord = frame.coord(pos.0 - dy * lane, pos.1 + dx * lane);
            fixes.push(RawFix {
                trip_id: format!("t{trip:04}"),
                t,
                coord,
            });
        };
        emit(&mut fixes, t0, pos, heading);

        let mut elapsed = 0.0;
        loop {
            let dt = rng.gen_range(1..=9) as f64;
            if elapsed + dt > config.trip_duration_s {
                break;
            }
            elapsed += dt;
            let mut dist = speed * dt;
            while dist > 0.0 {
                let target = step(node, heading);
                let tx = node_x(target.0);
                let ty = node_y(target.1);
                let remaining = (tx - pos.0).abs() + (ty - pos.1).abs();
                if dist < remaining {
                    let (dx, dy) = DIRS[heading];
                    pos = (pos.0 + dx * dist, pos.1 + dy * dist);
                    dist = 0.0;
                } else {
                    dist -= remaining;
                    pos = (tx, ty);
                    node = target;
                    heading = pick_turn(&mut rng, node, heading, nx, ny);
                }
            }
            emit(&mut fixes, t0 + elapsed, pos, heading);
        }
        trips.push(RawTrip {
            trip_id: format!("t{trip:04}"),
            fixes,
        });
    }

    Ok(SynthOutput { trips, footprints })
}

fn validate(config: &SynthConfig) -> Result<(), SynthError> {
    if config.n_trips == 0 {
        return Err(SynthError::InvalidConfig("n_trips must be positive".into()));
    }
    if config.trip_duration_s.is_nan() || config.trip_duration_s < 10.0 {
        return Err(SynthError::InvalidConfig(
            "trip duration must be at least 10 seconds".into(),
        ));
    }
    let (lo, hi) = config.speed_range_mps;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(SynthError::InvalidConfig(format!(
            "speed range ({lo}, {hi}) must satisfy 0 < lo <= hi"
        )));
    }
    Ok(())
}

fn grid_count(extent_m: f64) -> usize {
    let usable = extent_m - 2.0 * MARGIN_M;
    if usable < 0.0 {
        0
    } else {
        (usable / GRID_PITCH_M).floor() as usize + 1
    }
}

fn in_grid(node: (isize, isize), nx: usize, ny: usize) -> bool {
    node.0 >= 0 && node.1 >= 0 && (node.0 as usize) < nx && (node.1 as usize) < ny
}

fn step(node: (usize, usize), heading: usize) -> (usize, usize) {
    let (dx, dy) = DIRS[heading];
    (
        (node.0 as isize + dx as isize) as usize,
        (node.1 as isize + dy as isize) as usize,
    )
}

fn neighbor_exists(node: (usize, usize), heading: usize, nx: usize, ny: usize) -> bool {
    let (dx, dy) = DIRS[heading];
    in_grid(
        (node.0 as isize + dx as isize, node.1 as isize + dy as isize),
        nx,
        ny,
    )
}

fn pick_start_heading(rng: &mut ChaCha8Rng, node: (usize, usize), nx: usize, ny: usize) -> usize {
    let options: Vec<usize> = (0..4)
        .filter(|&h| neighbor_exists(node, h, nx, ny))
        .collect();
    options[rng.gen_range(0..options.len())]
}

/// Turn choice on arriving at a node. Going straight is twice as likely
/// as either turn; exits that leave the grid are excluded; reversing is
/// only allowed at a dead end (impossible on a 2x2+ rectangular grid).
fn pick_turn(
    rng: &mut ChaCha8Rng,
    node: (usize, usize),
    heading: usize,
    nx: usize,
    ny: usize,
) -> usize {
    let candidates = [
        (heading, 0.5),
        ((heading + 1) % 4, 0.25),
        ((heading + 3) % 4, 0.25),
    ];
    let mut total = 0.0;
    for &(h, w) in &candidates {
        if neighbor_exists(node, h, nx, ny) {
            total += w;
        }
    }
    if total == 0.0 {
        return (heading + 2) % 4;
    }
    let mut draw = rng.gen_range(0.0..total);
    for &(h, w) in &candidates {
        if neighbor_exists(node, h, nx, ny) {
            if draw < w {
                return h;
            }
            draw -= w;
        }
    }
    candidates[0].0
}
