//! End-to-end orchestration: raw trips and footprints in, aggregated
//! visibility totals out, with stage timings and tallies for the run
//! manifest.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::balltree::{build_index, IndexError, DEFAULT_LEAF_SIZE};
use crate::densify::build_corpus;
use crate::geodesy::EarthModel;
use crate::ingest::{filter_footprints, filter_trips, BoundingBox, BuildingSet, RawTrip};
use crate::trajectory::resample_all;
use crate::visibility::{
    aggregate, trip_visibility, AggregateVisibility, TripVisibility, ViewParams, VisibilityError,
};

#[derive(Clone, Debug)]
pub struct PipelineParams {
    pub view: ViewParams,
    /// Maximum gap between densified outline points, meters.
    pub spacing_m: f64,
    /// Decimal places used for the aggregation key.
    pub precision: u32,
    pub leaf_size: usize,
    /// Optional analysis window; trips and footprints outside it are
    /// dropped before any computation.
    pub bbox: Option<BoundingBox>,
    /// Worker threads for the per-trip pass; 0 uses the global pool.
    pub workers: usize,
    pub earth: EarthModel,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            view: ViewParams::default(),
            spacing_m: 10.0,
            precision: 6,
            leaf_size: DEFAULT_LEAF_SIZE,
            bbox: None,
            workers: 0,
            earth: EarthModel::default(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PipelineTimings {
    pub resample_ms: u64,
    pub densify_ms: u64,
    pub index_ms: u64,
    pub visibility_ms: u64,
    pub aggregate_ms: u64,
    pub total_ms: u64,
}

/// Tallies from one pipeline run. Conservation invariant: every circle
/// membership event appears exactly once, so `circle_events` equals both
/// the sum of per-trip counts and the sum of aggregate totals.
#[derive(Clone, Debug, Default, Serialize)]
pub struct PipelineDiagnostics {
    pub trips_in: usize,
    pub fixes_in: usize,
    pub trips_after_bbox: usize,
    pub fixes_after_bbox: usize,
    pub trips_too_short: usize,
    pub tracks: usize,
    pub track_points: usize,
    pub skipped_track_points: usize,
    pub footprints_in: usize,
    pub footprints_after_bbox: usize,
    pub skipped_geometries: usize,
    pub corpus_points: usize,
    pub degenerate_edges: usize,
    pub index_nodes: usize,
    pub index_depth: usize,
    pub circle_events: u64,
    pub aggregate_entries: usize,
    pub timings: PipelineTimings,
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub aggregate: AggregateVisibility,
    pub per_trip: Vec<TripVisibility>,
    pub diagnostics: PipelineDiagnostics,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("spatial index: {0}")]
    Index(#[from] IndexError),
    #[error("visibility: {0}")]
    Visibility(#[from] VisibilityError),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Runs the full pipeline. An empty intersection of inputs and bbox is
/// not an error: the result is an empty aggregate with diagnostics
/// explaining where the data went.
pub fn run_pipeline(
    trips: Vec<RawTrip>,
    buildings: BuildingSet,
    params: &PipelineParams,
) -> Result<PipelineOutput, PipelineError> {
    let t_total = Instant::now();
    let mut diag = PipelineDiagnostics {
        trips_in: trips.len(),
        fixes_in: trips.iter().map(|t| t.fixes.len()).sum(),
        footprints_in: buildings.footprints.len(),
        skipped_geometries: buildings.skipped_geometries,
        ..PipelineDiagnostics::default()
    };

    let (trips, footprints) = match &params.bbox {
        Some(b) => (
            filter_trips(trips, b),
            filter_footprints(buildings.footprints, b),
        ),
        None => (trips, buildings.footprints),
    };
    diag.trips_after_bbox = trips.len();
    diag.fixes_after_bbox = trips.iter().map(|t| t.fixes.len()).sum();
    diag.footprints_after_bbox = footprints.len();

    let t = Instant::now();
    let (tracks, dropped) = resample_all(&trips, params.view.interval_s);
    diag.timings.resample_ms = t.elapsed().as_millis() as u64;
    diag.trips_too_short = dropped;
    diag.tracks = tracks.len();
    diag.track_points = tracks.iter().map(|t| t.points.len()).sum();

    let t = Instant::now();
    // An empty corpus is a legitimate outcome here (bbox kept no
    // buildings), handled downstream as an empty aggregate.
    let corpus = build_corpus(&footprints, params.spacing_m, params.earth).unwrap_or_default();
    diag.timings.densify_ms = t.elapsed().as_millis() as u64;
    diag.corpus_points = corpus.len();
    diag.degenerate_edges = corpus.degenerate_edges;

    if corpus.is_empty() || tracks.is_empty() {
        diag.timings.total_ms = t_total.elapsed().as_millis() as u64;
        return Ok(PipelineOutput {
            aggregate: AggregateVisibility {
                precision: params.precision,
                entries: vec![],
            },
            per_trip: vec![],
            diagnostics: diag,
        });
    }

    let t = Instant::now();
    let index = build_index(&corpus, params.leaf_size)?;
    diag.timings.index_ms = t.elapsed().as_millis() as u64;
    let stats = index.stats();
    diag.index_nodes = stats.node_count;
    diag.index_depth = stats.max_depth;

    let t = Instant::now();
    let view = params.view;
    let earth = params.earth;
    let pass = || -> Vec<TripVisibility> {
        tracks
            .par_iter()
            .map(|track| trip_visibility(track, &index, &corpus, &view, earth))
            .collect()
    };
    let per_trip = if params.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(params.workers)
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))?;
        pool.install(pass)
    } else {
        pass()
    };
    diag.timings.visibility_ms = t.elapsed().as_millis() as u64;
    diag.circle_events = per_trip.iter().map(|v| v.event_count()).sum();
    diag.skipped_track_points = per_trip.iter().map(|v| v.skipped_points).sum();

    let t = Instant::now();
    let agg = aggregate(&per_trip, &corpus, params.precision)?;
    diag.timings.aggregate_ms = t.elapsed().as_millis() as u64;
    diag.aggregate_entries = agg.entries.len();
    diag.timings.total_ms = t_total.elapsed().as_millis() as u64;

    Ok(PipelineOutput {
        aggregate: agg,
        per_trip,
        diagnostics: diag,
    })
}
