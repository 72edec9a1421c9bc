//! `sightline`: street-front visibility analysis for vehicle trajectories.
//!
//! Exit codes: 0 success, 1 internal or environmental failure, 2 bad input.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "sightline",
    version,
    about = "Counts how often street-front building points fall inside forward viewing circles",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: trajectories + buildings -> aggregate visibility CSV
    Run(commands::RunArgs),
    /// Fit distribution families to aggregate totals and rank them
    Fit(commands::FitArgs),
    /// Split aggregate points into quantile groups, exported as GeoJSON
    Hotspots(commands::HotspotsArgs),
    /// Export one trip's track and viewing circles as GeoJSON
    TripGeojson(commands::TripGeojsonArgs),
    /// Time the spatial index against a linear scan on a scattered corpus
    Bench(commands::BenchArgs),
    /// Generate a deterministic synthetic street grid with trips
    Synth(commands::SynthArgs),
    /// Download building footprints for a bbox from Overpass (cached)
    Fetch(commands::FetchArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run(args),
        Command::Fit(args) => commands::fit(args),
        Command::Hotspots(args) => commands::hotspots(args),
        Command::TripGeojson(args) => commands::trip_geojson(args),
        Command::Bench(args) => commands::bench(args),
        Command::Synth(args) => commands::synth(args),
        Command::Fetch(args) => commands::fetch(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {:#}", err.source);
            ExitCode::from(err.exit)
        }
    }
}
