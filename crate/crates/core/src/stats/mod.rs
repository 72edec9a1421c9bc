//! Distribution characterization for aggregate visibility totals:
//! histograms, quantile hotspot groups, and goodness-of-fit metrics for
//! the fitted families in [`dist`] and [`fit`].

pub mod dist;
pub mod fit;

use std::fs::File;
use std::io::{self, BufWriter, Write as _};
use std::path::Path;

use serde_json::{json, Value};
use thiserror::Error;

use crate::visibility::AggregateVisibility;

pub use dist::{FitFamily, FittedDist};
pub use fit::{fit_all, fit_distribution, FitResult};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("sample size {0} is below the minimum of 30")]
    SampleTooSmall(usize),
    #[error("sample is constant; nothing to fit")]
    DegenerateSample,
    #[error("sample contains a non-finite value")]
    NonFiniteSample,
    #[error("histogram requires at least one bin")]
    InvalidBins,
    #[error("invalid quantile cuts: {0}")]
    InvalidCuts(String),
}

/// Equal-width histogram. `edges` has one more element than `counts`.
#[derive(Clone, Debug)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Bins `values` into `bins` equal-width buckets spanning [min, max].
/// A constant sample degenerates to zero-width bins with everything in
/// bucket 0. The counts always sum to the input length.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if bins == 0 {
        return Err(StatsError::InvalidBins);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFiniteSample);
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let idx = if width > 0.0 {
            (((v - min) / width).floor() as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    let edges = (0..=bins).map(|i| min + width * i as f64).collect();
    Ok(Histogram { edges, counts })
}

pub fn write_histogram_csv(path: &Path, hist: &Histogram) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "bin_low,bin_high,count")?;
    for (i, &c) in hist.counts.iter().enumerate() {
        writeln!(w, "{},{},{}", hist.edges[i], hist.edges[i + 1], c)?;
    }
    w.flush()
}

/// Tolerance for treating `q * n` as an exact integer rank. `0.9 * 100`
/// lands at 90.00000000000001 in binary floating point; without the
/// tolerance the nearest-rank ceiling would skip to rank 91.
const NEAR_INT_EPS: f64 = 1e-9;

/// Nearest-rank quantile of an ascending-sorted slice: the value at rank
/// `ceil(q * n)` (1-based), with near-integer products snapped down.
pub fn nearest_rank_threshold(sorted: &[u64], q: f64) -> u64 {
    let n = sorted.len();
    assert!(n > 0, "nearest_rank_threshold on empty slice");
    let x = q * n as f64;
    let fl = x.floor();
    let k = if x - fl <= NEAR_INT_EPS {
        fl as i64
    } else {
        fl as i64 + 1
    };
    let k = k.clamp(1, n as i64) as usize;
    sorted[k - 1]
}

/// Assignment of every aggregate entry to a quantile hotspot group.
/// Groups are ordered coldest to hottest; vectors indexed by group have
/// `cuts.len() + 1` elements, `group_of` is indexed by aggregate entry.
#[derive(Clone, Debug)]
pub struct QuantileClassification {
    pub cuts: Vec<f64>,
    pub thresholds: Vec<u64>,
    pub group_names: Vec<String>,
    pub group_of: Vec<usize>,
    pub group_sizes: Vec<usize>,
    pub group_totals: Vec<u64>,
    pub shares: Vec<f64>,
    pub grand_total: u64,
}

fn fmt_pct(q: f64) -> String {
    let v = q * 100.0;
    let r = v.round();
    if (v - r).abs() < 1e-6 {
        format!("{}", r as i64)
    } else {
        format!("{v}")
    }
}

fn group_names(cuts: &[f64]) -> Vec<String> {
    let mut names = Vec::with_capacity(cuts.len() + 1);
    names.push(format!("Bottom {}%", fmt_pct(cuts[0])));
    for i in 1..cuts.len() {
        names.push(format!("{}th-{}th", fmt_pct(cuts[i - 1]), fmt_pct(cuts[i])));
    }
    names.push(format!("Top {}%", fmt_pct(1.0 - cuts[cuts.len() - 1])));
    names
}

/// Splits aggregate entries into hotspot groups at the given quantile
/// cuts (e.g. `[0.90, 0.95, 0.99]`). An entry joins the hottest group
/// whose threshold its total strictly exceeds; totals tied with a
/// threshold fall into the colder group.
pub fn quantile_classify(
    agg: &AggregateVisibility,
    cuts: &[f64],
) -> Result<QuantileClassification, StatsError> {
    if agg.entries.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if cuts.is_empty() {
        return Err(StatsError::InvalidCuts("no cut points given".into()));
    }
    for &c in cuts {
        if !c.is_finite() || c <= 0.0 || c >= 1.0 {
            return Err(StatsError::InvalidCuts(format!(
                "cut {c} must lie strictly inside (0, 1)"
            )));
        }
    }
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            return Err(StatsError::InvalidCuts(format!(
                "cuts must be strictly ascending, got {} then {}",
                w[0], w[1]
            )));
        }
    }

    let mut sorted: Vec<u64> = agg.entries.iter().map(|e| e.total_count).collect();
    sorted.sort_unstable();
    let thresholds: Vec<u64> = cuts
        .iter()
        .map(|&q| nearest_rank_threshold(&sorted, q))
        .collect();

    let n_groups = cuts.len() + 1;
    let mut group_of = Vec::with_capacity(agg.entries.len());
    let mut group_sizes = vec![0usize; n_groups];
    let mut group_totals = vec![0u64; n_groups];
    for e in &agg.entries {
        let g = thresholds.iter().filter(|&&t| e.total_count > t).count();
        group_of.push(g);
        group_sizes[g] += 1;
        group_totals[g] += e.total_count;
    }
    let grand_total: u64 = group_totals.iter().sum();
    let shares = group_totals
        .iter()
        .map(|&t| t as f64 / grand_total as f64)
        .collect();

    Ok(QuantileClassification {
        cuts: cuts.to_vec(),
        thresholds,
        group_names: group_names(cuts),
        group_of,
        group_sizes,
        group_totals,
        shares,
        grand_total,
    })
}

/// GeoJSON FeatureCollection of aggregate points tagged with their
/// hotspot group, for dropping into any GeoJSON viewer.
pub fn quantile_geojson(agg: &AggregateVisibility, cls: &QuantileClassification) -> Value {
    let features: Vec<Value> = agg
        .entries
        .iter()
        .zip(&cls.group_of)
        .map(|(e, &g)| {
            json!({
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [e.coord.lon_deg, e.coord.lat_deg],
                },
                "properties": {
                    "total_count": e.total_count,
                    "quantile_group": cls.group_names[g],
                },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

/// Text table of group occupancy and share of all sighting events.
pub fn shares_table(cls: &QuantileClassification) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:>8} {:>12} {:>9}\n",
        "group", "points", "events", "share"
    ));
    for g in 0..cls.group_names.len() {
        out.push_str(&format!(
            "{:<14} {:>8} {:>12} {:>8.4}%\n",
            cls.group_names[g],
            cls.group_sizes[g],
            cls.group_totals[g],
            cls.shares[g] * 100.0
        ));
    }
    out
}

/// Two-sided Kolmogorov-Smirnov statistic of an ascending-sorted sample
/// against a reference CDF: the largest gap between the empirical step
/// function (evaluated on both sides of each step) and the CDF.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let above = (i as f64 + 1.0) / n - f;
        let below = f - i as f64 / n;
        d = d.max(above.max(below));
    }
    d
}

/// First Wasserstein distance between an ascending-sorted sample and a
/// reference distribution, as the mean absolute gap between sample values
/// and the reference quantiles at midpoint plotting positions.
pub fn wasserstein_distance(sorted: &[f64], quantile: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let total: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - quantile((i as f64 + 0.5) / n)).abs())
        .sum();
    total / n
}

/// Orders fit results best first: by KS statistic, ties broken by
/// Wasserstein distance.
pub fn rank_fits(mut fits: Vec<FitResult>) -> Vec<FitResult> {
    fits.sort_by(|a, b| {
        a.ks_d
            .total_cmp(&b.ks_d)
            .then(a.wasserstein.total_cmp(&b.wasserstein))
    });
    fits
}

/// Text table of ranked fits for terminal output.
pub fn fit_table(fits: &[FitResult]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<4} {:<12} {:>12} {:>14} {:>14} {:>10} {:>12} {:>9}\n",
        "rank", "family", "shape", "loc", "scale", "ks_d", "wasserstein", "converged"
    ));
    for (i, f) in fits.iter().enumerate() {
        let shape = match f.shape {
            Some(s) => format!("{s:.6}"),
            None => "-".to_string(),
        };
        out.push_str(&format!(
            "{:<4} {:<12} {:>12} {:>14.6} {:>14.6} {:>10.6} {:>12.6} {:>9}\n",
            i + 1,
            f.family.name(),
            shape,
            f.loc,
            f.scale,
            f.ks_d,
            f.wasserstein,
            f.converged
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::dist::std_normal_quantile;
    use super::*;
    use crate::geodesy::GeoCoord;
    use crate::visibility::{AggregateEntry, AggregateVisibility, PointKey};

    fn agg_from_totals(totals: &[u64]) -> AggregateVisibility {
        let entries = totals
            .iter()
            .enumerate()
            .map(|(i, &t)| AggregateEntry {
                key: PointKey {
                    lat_scaled: i as i64,
                    lon_scaled: 0,
                },
                coord: GeoCoord::new(i as f64 * 1e-6, 0.0),
                total_count: t,
            })
            .collect();
        AggregateVisibility {
            precision: 6,
            entries,
        }
    }

    #[test]
    fn histogram_uniform_decades() {
        let values: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let h = histogram(&values, 10).unwrap();
        assert_eq!(h.counts, vec![10; 10]);
        assert_eq!(h.edges.len(), 11);
        assert_eq!(h.edges[0], 0.0);
        assert_eq!(h.edges[10], 99.0);
        assert_eq!(h.counts.iter().sum::<u64>(), 100);
    }

    #[test]
    fn histogram_constant_sample_lands_in_first_bin() {
        let h = histogram(&[7.0; 25], 5).unwrap();
        assert_eq!(h.counts[0], 25);
        assert_eq!(h.counts[1..], [0, 0, 0, 0]);
    }

    #[test]
    fn histogram_max_value_stays_in_last_bin() {
        let h = histogram(&[0.0, 0.5, 1.0], 4).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 3);
        assert_eq!(h.counts[3], 1);
    }

    #[test]
    fn histogram_rejects_bad_input() {
        assert!(matches!(histogram(&[], 4), Err(StatsError::EmptyInput)));
        assert!(matches!(histogram(&[1.0], 0), Err(StatsError::InvalidBins)));
        assert!(matches!(
            histogram(&[1.0, f64::NAN], 2),
            Err(StatsError::NonFiniteSample)
        ));
    }

    #[test]
    fn nearest_rank_snaps_float_products() {
        let sorted: Vec<u64> = (1..=100).collect();
        // 0.9 * 100 floats to 90.00000000000001; rank must stay 90.
        assert_eq!(nearest_rank_threshold(&sorted, 0.9), 90);
        assert_eq!(nearest_rank_threshold(&sorted, 0.95), 95);
        assert_eq!(nearest_rank_threshold(&sorted, 0.99), 99);
        assert_eq!(nearest_rank_threshold(&sorted, 0.001), 1);
        assert_eq!(nearest_rank_threshold(&sorted, 0.999995), 100);
    }

    #[test]
    fn classify_top_decile_share_is_exact() {
        let totals: Vec<u64> = (1..=100).collect();
        let agg = agg_from_totals(&totals);
        let cls = quantile_classify(&agg, &[0.9]).unwrap();
        assert_eq!(cls.thresholds, vec![90]);
        assert_eq!(cls.group_sizes, vec![90, 10]);
        assert_eq!(cls.group_totals, vec![4095, 955]);
        assert_eq!(cls.grand_total, 5050);
        assert!((cls.shares[1] - 955.0 / 5050.0).abs() < 1e-12);
        assert_eq!(cls.group_names, vec!["Bottom 90%", "Top 10%"]);
    }

    #[test]
    fn classify_default_cut_labels() {
        let totals: Vec<u64> = (1..=100).collect();
        let agg = agg_from_totals(&totals);
        let cls = quantile_classify(&agg, &[0.9, 0.95, 0.99]).unwrap();
        assert_eq!(
            cls.group_names,
            vec!["Bottom 90%", "90th-95th", "95th-99th", "Top 1%"]
        );
        assert_eq!(cls.group_sizes, vec![90, 5, 4, 1]);
        // Entry equal to a threshold falls into the colder group.
        assert_eq!(cls.group_of[89], 0);
        assert_eq!(cls.group_of[90], 1);
        assert_eq!(cls.group_of[99], 3);
    }

    #[test]
    fn classify_ties_fall_low() {
        // Nine 1s and one 5: the 0.9 threshold is 1, so only the 5 is hot.
        let agg = agg_from_totals(&[1, 1, 1, 1, 1, 1, 1, 1, 1, 5]);
        let cls = quantile_classify(&agg, &[0.9]).unwrap();
        assert_eq!(cls.group_sizes, vec![9, 1]);
        assert_eq!(cls.group_totals, vec![9, 5]);
    }

    #[test]
    fn classify_rejects_bad_cuts() {
        let agg = agg_from_totals(&[1, 2, 3]);
        assert!(matches!(
            quantile_classify(&agg, &[]),
            Err(StatsError::InvalidCuts(_))
        ));
        assert!(matches!(
            quantile_classify(&agg, &[0.9, 0.9]),
            Err(StatsError::InvalidCuts(_))
        ));
        assert!(matches!(
            quantile_classify(&agg, &[0.5, 1.0]),
            Err(StatsError::InvalidCuts(_))
        ));
        assert!(matches!(
            quantile_classify(&agg, &[f64::NAN]),
            Err(StatsError::InvalidCuts(_))
        ));
        let empty = AggregateVisibility {
            precision: 6,
            entries: vec![],
        };
        assert!(matches!(
            quantile_classify(&empty, &[0.9]),
            Err(StatsError::EmptyInput)
        ));
    }

    #[test]
    fn quantile_geojson_carries_groups() {
        let agg = agg_from_totals(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 100]);
        let cls = quantile_classify(&agg, &[0.9]).unwrap();
        let gj = quantile_geojson(&agg, &cls);
        let feats = gj["features"].as_array().unwrap();
        assert_eq!(feats.len(), 10);
        assert_eq!(feats[9]["properties"]["total_count"], 100);
        assert_eq!(feats[9]["properties"]["quantile_group"], "Top 10%");
        assert_eq!(feats[0]["properties"]["quantile_group"], "Bottom 90%");
    }

    #[test]
    fn ks_statistic_on_ideal_quantile_sample() {
        // Sample placed at the quartile midpoints of the standard normal:
        // the empirical CDF misses by exactly 1/(2n) on each side.
        let sample: Vec<f64> = [0.125, 0.375, 0.625, 0.875]
            .iter()
            .map(|&p| std_normal_quantile(p))
            .collect();
        let d = ks_statistic(&sample, dist::std_normal_cdf);
        // Tolerance bounded by the erfc backend, not the construction.
        assert!((d - 0.125).abs() < 1e-10);
    }

    #[test]
    fn ks_statistic_detects_shift() {
        let sample: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0 + 10.0).collect();
        // Against Uniform(0,1) treated via its CDF clamp, everything sits
        // above the support, so D is essentially 1.
        let d = ks_statistic(&sample, |x| x.clamp(0.0, 1.0).min(1.0));
        assert!(d > 0.99);
    }

    #[test]
    fn wasserstein_zero_on_exact_quantiles() {
        let q = |p: f64| std_normal_quantile(p);
        let sample: Vec<f64> = (0..50).map(|i| q((i as f64 + 0.5) / 50.0)).collect();
        assert_eq!(wasserstein_distance(&sample, q), 0.0);
    }

    #[test]
    fn wasserstein_measures_translation() {
        // Shifting a sample by c moves W1 by exactly c.
        let q = |p: f64| p; // Uniform(0,1) quantile
        let sample: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0 + 2.5).collect();
        let w = wasserstein_distance(&sample, q);
        assert!((w - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rank_orders_by_ks_then_wasserstein() {
        let mk = |family, ks_d: f64, w: f64| FitResult {
            family,
            shape: None,
            loc: 0.0,
            scale: 1.0,
            ks_d,
            wasserstein: w,
            converged: true,
        };
        let fits = vec![
            mk(FitFamily::Normal, 0.2, 1.0),
            mk(FitFamily::GumbelR, 0.1, 9.0),
            mk(FitFamily::Exponential, 0.1, 2.0),
        ];
        let ranked = rank_fits(fits);
        assert_eq!(ranked[0].family, FitFamily::Exponential);
        assert_eq!(ranked[1].family, FitFamily::GumbelR);
        assert_eq!(ranked[2].family, FitFamily::Normal);
    }

    #[test]
    fn tables_render() {
        let cls =
            quantile_classify(&agg_from_totals(&(1..=100).collect::<Vec<_>>()), &[0.9]).unwrap();
        let t = shares_table(&cls);
        assert!(t.contains("Top 10%"));
        let fits = vec![FitResult {
            family: FitFamily::LogNormal,
            shape: Some(1.2),
            loc: 0.0,
            scale: 3.0,
            ks_d: 0.05,
            wasserstein: 1.5,
            converged: true,
        }];
        let ft = fit_table(&fits);
        assert!(ft.contains("lognormal"));
        assert!(ft.contains("1.200000"));
    }
}
