//! Street-level visibility analysis for vehicle trajectories.
//!
//! The library answers one question: which parts of a city's building
//! outlines do vehicles actually see? Trajectories are resampled onto a
//! fixed time grid, each resampled point projects a viewing circle ahead
//! of the vehicle along its bearing, and densified building outline
//! points falling inside a circle are counted as sighting events. Totals
//! are aggregated per rounded coordinate and characterized statistically
//! (histogram, quantile hotspot groups, ranked distribution fits).
//!
//! Modules follow the data path:
//!
//! - [`ingest`]: trajectory CSV and building GeoJSON parsing, bbox
//!   filtering, optional Overpass download with a file cache
//! - [`trajectory`]: time-grid interpolation and forward bearings
//! - [`densify`]: building outlines to identified outline points
//! - [`balltree`]: the spatial index and its linear-scan reference
//! - [`visibility`]: viewing circles, per-trip counts, aggregation
//! - [`stats`]: histograms, hotspot quantiles, distribution fitting
//! - [`pipeline`]: the orchestrated end-to-end run
//! - [`synth`]: deterministic synthetic scenarios
//! - [`bench`]: tree-versus-scan timing harness

pub mod balltree;
pub mod bench;
pub mod densify;
pub mod geodesy;
pub mod ingest;
pub mod pipeline;
pub mod stats;
pub mod synth;
pub mod trajectory;
pub mod visibility;

pub use balltree::{
    brute_force_radius, build_index, BruteForceScan, RadiusQuery, SpatialIndex, DEFAULT_LEAF_SIZE,
};
pub use densify::{build_corpus, DensePoint, PointCorpus, PointId};
pub use geodesy::{EarthModel, GeoCoord, RadCoord, EARTH_RADIUS_M};
pub use ingest::{BoundingBox, BuildingFootprint, BuildingSet, RawFix, RawTrip};
pub use pipeline::{run_pipeline, PipelineOutput, PipelineParams};
pub use stats::{
    fit_all, fit_distribution, histogram, ks_statistic, quantile_classify, rank_fits,
    wasserstein_distance, FitFamily, FitResult, FittedDist,
};
pub use synth::{generate, SynthConfig, SynthOutput};
pub use trajectory::{interpolate_trip, resample_all, TrackPoint, TripTrack};
pub use visibility::{
    aggregate, trip_visibility, viewing_center, AggregateVisibility, TripVisibility, ViewParams,
};
