//! Subcommand implementations. Every command creates its output directory,
//! writes its artifacts, and finishes with a `manifest.json` describing the
//! run. Errors split into two exit classes: bad input (2) and everything
//! the user cannot fix by editing their files or flags (1).

use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Args;
use serde_json::{json, Value};

use sightline::ingest::overpass::{OverpassClient, DEFAULT_ENDPOINT};
use sightline::ingest::{self, geojson, BoundingBox};
use sightline::stats;
use sightline::trajectory;
use sightline::visibility::{self, AggregateVisibility, ViewParams};
use sightline::{
    fit_all, quantile_classify, rank_fits, run_pipeline, EarthModel, PipelineParams, SynthConfig,
};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_INTERNAL: u8 = 1;

/// The env var consulted when `--endpoint` is not given.
pub const OVERPASS_ENDPOINT_VAR: &str = "SIGHTLINE_OVERPASS_ENDPOINT";

pub struct CliError {
    pub source: anyhow::Error,
    pub exit: u8,
}

pub type CmdResult = Result<(), CliError>;

fn input(err: impl Into<anyhow::Error>) -> CliError {
    CliError {
        source: err.into(),
        exit: EXIT_INPUT,
    }
}

fn internal(err: impl Into<anyhow::Error>) -> CliError {
    CliError {
        source: err.into(),
        exit: EXIT_INTERNAL,
    }
}

/// Parses `min_lon,min_lat,max_lon,max_lat`.
pub fn parse_bbox(s: &str) -> Result<BoundingBox, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(format!(
            "expected min_lon,min_lat,max_lon,max_lat, got {} value(s)",
            parts.len()
        ));
    }
    let mut vals = [0f64; 4];
    for (slot, part) in vals.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("{part:?}: {e}"))?;
    }
    BoundingBox::new(vals[0], vals[1], vals[2], vals[3]).map_err(|e| e.to_string())
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| internal(anyhow!("creating output directory {}: {e}", dir.display())))
}

fn require_positive(name: &str, value: f64) -> Result<(), CliError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(input(anyhow!(
            "--{name} must be a positive finite number, got {value}"
        )))
    }
}

/// Viewing geometry flags shared by `run` and `trip-geojson`.
#[derive(Args, Debug, Clone, Copy)]
pub struct ViewFlags {
    /// Viewing circle radius, meters
    #[arg(long, default_value_t = 50.0)]
    pub radius: f64,
    /// How far ahead of the vehicle the circle is centered, meters
    #[arg(long, default_value_t = 50.0)]
    pub lead: f64,
    /// Trajectory resampling interval, seconds
    #[arg(long, default_value_t = 5.0)]
    pub interval: f64,
}

impl ViewFlags {
    fn validated(&self) -> Result<ViewParams, CliError> {
        require_positive("radius", self.radius)?;
        require_positive("interval", self.interval)?;
        if !self.lead.is_finite() || self.lead < 0.0 {
            return Err(input(anyhow!(
                "--lead must be a non-negative finite number, got {}",
                self.lead
            )));
        }
        Ok(ViewParams {
            radius_m: self.radius,
            lead_m: self.lead,
            interval_s: self.interval,
        })
    }

    fn as_json(&self) -> Value {
        json!({ "radius_m": self.radius, "lead_m": self.lead, "interval_s": self.interval })
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Trajectory CSV with header trip_id,t,lat,lon
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Building footprint GeoJSON FeatureCollection
    #[arg(long)]
    pub buildings: PathBuf,
    /// Analysis window min_lon,min_lat,max_lon,max_lat; data outside is dropped
    #[arg(long, value_parser = parse_bbox)]
    pub bbox: Option<BoundingBox>,
    #[command(flatten)]
    pub view: ViewFlags,
    /// Maximum gap between densified outline points, meters
    #[arg(long, default_value_t = 10.0)]
    pub spacing: f64,
    /// Decimal places of the aggregation key
    #[arg(long, default_value_t = 6)]
    pub precision: u32,
    /// Maximum points per index leaf
    #[arg(long, default_value_t = 32)]
    pub leaf_size: usize,
    /// Worker threads for the per-trip pass (0 = one per core)
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Output directory for aggregate.csv and manifest.json
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run(args: RunArgs) -> CmdResult {
    let view = args.view.validated()?;
    require_positive("spacing", args.spacing)?;
    if args.precision > 9 {
        return Err(input(anyhow!(
            "--precision must be at most 9, got {}",
            args.precision
        )));
    }
    if args.leaf_size == 0 {
        return Err(input(anyhow!("--leaf-size must be at least 1")));
    }

    let trips = ingest::load_trajectories(&args.trajectories).map_err(input)?;
    let buildings = geojson::load_buildings(&args.buildings).map_err(input)?;

    let params = PipelineParams {
        view,
        spacing_m: args.spacing,
        precision: args.precision,
        leaf_size: args.leaf_size,
        bbox: args.bbox,
        workers: args.workers,
        earth: EarthModel::default(),
    };
    let out = run_pipeline(trips, buildings, &params).map_err(internal)?;

    ensure_out_dir(&args.out_dir)?;
    let agg_path = args.out_dir.join("aggregate.csv");
    visibility::write_aggregate_csv(&agg_path, &out.aggregate).map_err(internal)?;
    if out.aggregate.entries.is_empty() {
        eprintln!(
            "warning: aggregate is empty; no viewing circle contained any building point \
             (check the bbox against the input extent)"
        );
    }

    let mut manifest = crate::manifest::RunManifest::new(
        "run",
        json!({
            "view": args.view.as_json(),
            "spacing_m": args.spacing,
            "precision": args.precision,
            "leaf_size": args.leaf_size,
            "workers": args.workers,
            "bbox": args.bbox,
        }),
    );
    manifest.add_input(&args.trajectories).map_err(internal)?;
    manifest.add_input(&args.buildings).map_err(internal)?;
    manifest.add_output(&agg_path).map_err(internal)?;
    manifest.diagnostics = serde_json::to_value(&out.diagnostics).map_err(internal)?;
    manifest.write(&args.out_dir).map_err(internal)?;

    let d = &out.diagnostics;
    println!(
        "trips {} (fixes {}) -> tracks {} ({} points), corpus {} points from {} footprints",
        d.trips_in, d.fixes_in, d.tracks, d.track_points, d.corpus_points, d.footprints_after_bbox
    );
    println!(
        "events {} across {} aggregate points",
        d.circle_events, d.aggregate_entries
    );
    let t = &d.timings;
    println!(
        "timings ms: resample {} densify {} index {} visibility {} aggregate {} total {}",
        t.resample_ms, t.densify_ms, t.index_ms, t.visibility_ms, t.aggregate_ms, t.total_ms
    );
    println!("wrote {}", agg_path.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Aggregate CSV produced by `run`
    #[arg(long)]
    pub aggregate: PathBuf,
    /// Histogram bin count
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Output directory for fits.json, histogram.csv and manifest.json
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn fit(args: FitArgs) -> CmdResult {
    let rows = visibility::load_aggregate_csv(&args.aggregate).map_err(input)?;
    let totals: Vec<f64> = rows.iter().map(|r| r.total_count as f64).collect();

    let fits = fit_all(&totals).map_err(input)?;
    let ranked = rank_fits(fits);
    let hist = stats::histogram(&totals, args.bins).map_err(input)?;

    ensure_out_dir(&args.out_dir)?;
    let fits_path = args.out_dir.join("fits.json");
    let report = json!({ "sample_size": totals.len(), "fits": ranked });
    let mut text = serde_json::to_string_pretty(&report).map_err(internal)?;
    text.push('\n');
    std::fs::write(&fits_path, text).map_err(internal)?;

    let hist_path = args.out_dir.join("histogram.csv");
    stats::write_histogram_csv(&hist_path, &hist).map_err(internal)?;

    let mut manifest = crate::manifest::RunManifest::new("fit", json!({ "bins": args.bins }));
    manifest.add_input(&args.aggregate).map_err(internal)?;
    manifest.add_output(&fits_path).map_err(internal)?;
    manifest.add_output(&hist_path).map_err(internal)?;
    manifest.diagnostics = json!({
        "sample_size": totals.len(),
        "best_family": ranked[0].family.name(),
        "best_ks_d": ranked[0].ks_d,
    });
    manifest.write(&args.out_dir).map_err(internal)?;

    print!("{}", stats::fit_table(&ranked));
    println!("wrote {}", fits_path.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct HotspotsArgs {
    /// Aggregate CSV produced by `run`
    #[arg(long)]
    pub aggregate: PathBuf,
    /// Quantile cut points, ascending, each in (0,1)
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.90, 0.95, 0.99])]
    pub cuts: Vec<f64>,
    /// Decimal places of the aggregation key
    #[arg(long, default_value_t = 6)]
    pub precision: u32,
    /// Output directory for hotspots.geojson and manifest.json
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn hotspots(args: HotspotsArgs) -> CmdResult {
    if args.precision > 9 {
        return Err(input(anyhow!(
            "--precision must be at most 9, got {}",
            args.precision
        )));
    }
    let rows = visibility::load_aggregate_csv(&args.aggregate).map_err(input)?;
    let agg = AggregateVisibility::from_rows(&rows, args.precision);
    let cls = quantile_classify(&agg, &args.cuts).map_err(input)?;

    ensure_out_dir(&args.out_dir)?;
    let geo_path = args.out_dir.join("hotspots.geojson");
    let doc = stats::quantile_geojson(&agg, &cls);
    let mut text = serde_json::to_string_pretty(&doc).map_err(internal)?;
    text.push('\n');
    std::fs::write(&geo_path, text).map_err(internal)?;

    let mut manifest = crate::manifest::RunManifest::new(
        "hotspots",
        json!({ "cuts": args.cuts, "precision": args.precision }),
    );
    manifest.add_input(&args.aggregate).map_err(internal)?;
    manifest.add_output(&geo_path).map_err(internal)?;
    manifest.diagnostics = json!({
        "thresholds": cls.thresholds,
        "group_names": cls.group_names,
        "group_sizes": cls.group_sizes,
        "group_totals": cls.group_totals,
        "shares": cls.shares,
        "grand_total": cls.grand_total,
    });
    manifest.write(&args.out_dir).map_err(internal)?;

    print!("{}", stats::shares_table(&cls));
    println!("wrote {}", geo_path.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct TripGeojsonArgs {
    /// Trajectory CSV with header trip_id,t,lat,lon
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Trip to export
    #[arg(long)]
    pub trip_id: String,
    #[command(flatten)]
    pub view: ViewFlags,
    /// Output directory for trip.geojson and manifest.json
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn trip_geojson(args: TripGeojsonArgs) -> CmdResult {
    let view = args.view.validated()?;
    let trips = ingest::load_trajectories(&args.trajectories).map_err(input)?;
    let trip = trips
        .iter()
        .find(|t| t.trip_id == args.trip_id)
        .ok_or_else(|| {
            input(anyhow!(
                "trip id {:?} not found in {}",
                args.trip_id,
                args.trajectories.display()
            ))
        })?;
    let track = trajectory::interpolate_trip(trip, view.interval_s).map_err(input)?;
    let track = trajectory::assign_bearings(track);

    ensure_out_dir(&args.out_dir)?;
    let geo_path = args.out_dir.join("trip.geojson");
    let doc = visibility::trip_geojson(&track, &view, EarthModel::default());
    let mut text = serde_json::to_string_pretty(&doc).map_err(internal)?;
    text.push('\n');
    std::fs::write(&geo_path, text).map_err(internal)?;

    let circles = track
        .points
        .iter()
        .filter(|p| p.bearing_deg.is_some())
        .count();
    let mut manifest = crate::manifest::RunManifest::new(
        "trip-geojson",
        json!({ "trip_id": args.trip_id, "view": args.view.as_json() }),
    );
    manifest.add_input(&args.trajectories).map_err(internal)?;
    manifest.add_output(&geo_path).map_err(internal)?;
    manifest.diagnostics = json!({ "track_points": track.points.len(), "circles": circles });
    manifest.write(&args.out_dir).map_err(internal)?;

    println!(
        "trip {} -> {} track points, {} viewing circles",
        args.trip_id,
        track.points.len(),
        circles
    );
    println!("wrote {}", geo_path.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Corpus size
    #[arg(long, default_value_t = 100_000)]
    pub points: usize,
    /// Number of radius queries
    #[arg(long, default_value_t = 10_000)]
    pub queries: usize,
    /// Query radius, meters
    #[arg(long, default_value_t = 300.0)]
    pub radius: f64,
    /// Maximum points per index leaf
    #[arg(long, default_value_t = 32)]
    pub leaf_size: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// How many queries also run against the linear-scan baseline
    #[arg(long, default_value_t = 256)]
    pub brute_sample: usize,
    /// Output directory for bench.json and manifest.json
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn bench(args: BenchArgs) -> CmdResult {
    require_positive("radius", args.radius)?;
    for (name, v) in [
        ("points", args.points),
        ("queries", args.queries),
        ("leaf-size", args.leaf_size),
        ("brute-sample", args.brute_sample),
    ] {
        if v == 0 {
            return Err(input(anyhow!("--{name} must be at least 1")));
        }
    }

    let report = sightline::bench::run_benchmark(
        args.points,
        args.queries,
        args.radius,
        args.leaf_size,
        args.seed,
        args.brute_sample,
    );
    if !report.sampled_sets_equal {
        return Err(internal(anyhow!(
            "index results diverged from the linear scan; the index is broken"
        )));
    }

    ensure_out_dir(&args.out_dir)?;
    let bench_path = args.out_dir.join("bench.json");
    let mut text = serde_json::to_string_pretty(&report).map_err(internal)?;
    text.push('\n');
    std::fs::write(&bench_path, text).map_err(internal)?;

    let mut manifest = crate::manifest::RunManifest::new(
        "bench",
        json!({
            "points": args.points,
            "queries": args.queries,
            "radius_m": args.radius,
            "leaf_size": args.leaf_size,
            "seed": args.seed,
            "brute_sample": args.brute_sample,
        }),
    );
    manifest.add_output(&bench_path).map_err(internal)?;
    manifest.diagnostics = serde_json::to_value(&report).map_err(internal)?;
    manifest.write(&args.out_dir).map_err(internal)?;

    println!(
        "corpus {} points, {} queries at {} m, leaf size {}",
        report.corpus_points, report.queries, report.radius_m, report.leaf_size
    );
    println!(
        "build {:.1} ms; tree mean {:.1} us, median {:.1} us; brute mean {:.1} us over {} sampled",
        report.build_ms,
        report.tree_mean_us,
        report.tree_median_us,
        report.brute_mean_us,
        report.brute_sampled
    );
    println!(
        "speedup {:.1}x, mean hits {:.1}, max hits {} ({:.3}% of corpus), sampled sets equal: {}",
        report.speedup,
        report.mean_hits,
        report.max_hits,
        100.0 * report.max_hit_fraction,
        report.sampled_sets_equal
    );
    println!("wrote {}", bench_path.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Area to fill, min_lon,min_lat,max_lon,max_lat
    #[arg(long, value_parser = parse_bbox, default_value = "151.2,-33.906,151.21,-33.898")]
    pub bbox: BoundingBox,
    #[arg(long, default_value_t = 80)]
    pub trips: usize,
    #[arg(long, default_value_t = 60)]
    pub buildings: usize,
    /// Trip duration, seconds
    #[arg(long, default_value_t = 150.0)]
    pub duration: f64,
    /// Slowest trip speed, meters per second
    #[arg(long, default_value_t = 8.0)]
    pub speed_min: f64,
    /// Fastest trip speed, meters per second
    #[arg(long, default_value_t = 14.0)]
    pub speed_max: f64,
    /// Output directory for trajectories.csv, buildings.geojson and manifest.json
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn synth(args: SynthArgs) -> CmdResult {
    let config = SynthConfig {
        seed: args.seed,
        bbox: args.bbox,
        n_trips: args.trips,
        n_buildings: args.buildings,
        trip_duration_s: args.duration,
        speed_range_mps: (args.speed_min, args.speed_max),
    };
    // Config and placement failures both mean "ask for something feasible".
    let out = sightline::generate(&config).map_err(input)?;

    ensure_out_dir(&args.out_dir)?;
    let traj_path = args.out_dir.join("trajectories.csv");
    let bld_path = args.out_dir.join("buildings.geojson");
    ingest::write_trajectories(&traj_path, &out.trips).map_err(internal)?;
    geojson::write_buildings(&bld_path, &out.footprints).map_err(internal)?;

    let fixes: usize = out.trips.iter().map(|t| t.fixes.len()).sum();
    let mut manifest = crate::manifest::RunManifest::new(
        "synth",
        json!({
            "seed": args.seed,
            "bbox": args.bbox,
            "trips": args.trips,
            "buildings": args.buildings,
            "duration_s": args.duration,
            "speed_range_mps": [args.speed_min, args.speed_max],
        }),
    );
    manifest.add_output(&traj_path).map_err(internal)?;
    manifest.add_output(&bld_path).map_err(internal)?;
    manifest.diagnostics =
        json!({ "trips": out.trips.len(), "fixes": fixes, "footprints": out.footprints.len() });
    manifest.write(&args.out_dir).map_err(internal)?;

    println!(
        "generated {} trips ({} fixes) and {} footprints",
        out.trips.len(),
        fixes,
        out.footprints.len()
    );
    println!("wrote {} and {}", traj_path.display(), bld_path.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct FetchArgs {
    /// Area to download, min_lon,min_lat,max_lon,max_lat
    #[arg(long, value_parser = parse_bbox)]
    pub bbox: BoundingBox,
    /// Overpass endpoint; SIGHTLINE_OVERPASS_ENDPOINT overrides the default
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Request timeout, seconds
    #[arg(long, default_value_t = 25)]
    pub timeout: u64,
    /// Output directory for buildings.geojson and manifest.json
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn fetch(args: FetchArgs) -> CmdResult {
    let endpoint = args
        .endpoint
        .clone()
        .or_else(|| std::env::var(OVERPASS_ENDPOINT_VAR).ok())
        .unwrap_or_else(|| DEFAULT_ENDPOINT.to_string());
    let client = OverpassClient {
        endpoint: endpoint.clone(),
        timeout_s: args.timeout,
        ..OverpassClient::default()
    };

    ensure_out_dir(&args.out_dir)?;
    let cache_path = args.out_dir.join("buildings.geojson");
    let cached = cache_path.exists();
    // Network and server failures are environmental, not input errors.
    let doc = client
        .fetch_buildings(&args.bbox, &cache_path)
        .map_err(internal)?;
    let set = geojson::parse_buildings(&doc).map_err(internal)?;

    let mut manifest = crate::manifest::RunManifest::new(
        "fetch",
        json!({ "bbox": args.bbox, "endpoint": endpoint, "timeout_s": args.timeout }),
    );
    manifest.add_output(&cache_path).map_err(internal)?;
    manifest.diagnostics = json!({
        "footprints": set.footprints.len(),
        "skipped_geometries": set.skipped_geometries,
        "from_cache": cached,
    });
    manifest.write(&args.out_dir).map_err(internal)?;

    println!(
        "{} footprints ({} geometries skipped){}",
        set.footprints.len(),
        set.skipped_geometries,
        if cached { " [cache hit]" } else { "" }
    );
    println!("wrote {}", cache_path.display());
    Ok(())
}
