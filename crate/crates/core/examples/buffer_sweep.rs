//! Leave-one-out accuracy of every feature variant on a synthetic log.
//!
//! `cargo run --release --example buffer_sweep -- [seed] [seconds-per-area] [--continuous]`
//!
//! By default each area is a separate stretch; `--continuous` drives the
//! three areas back to back in one segment instead.

use std::time::Instant;

use vibroute::classifier::{select_sigma, LabeledFeatures, SigmaGrid};
use vibroute::features::{apply_ranges, fit_ranges, FeatureConfig, FeatureVariant, STANDARD_BUFFERS};
use vibroute::telemetry::{synth_route, synth_stretches, AreaLabel, NoiseSpec, RouteGeometry, DEFAULT_MAX_GAP};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let secs: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(600);
    let profile = [(AreaLabel::A1, secs), (AreaLabel::A2, secs), (AreaLabel::A3, secs)];
    let continuous = args.next().as_deref() == Some("--continuous");
    let noise = NoiseSpec::default();
    let log = if continuous {
        synth_route(&profile, &noise, seed)
    } else {
        synth_stretches(&profile, &noise, &RouteGeometry::default(), seed)
    }
    .expect("profile");

    let mut configs: Vec<FeatureConfig> = [FeatureVariant::RawXyz, FeatureVariant::RawXz, FeatureVariant::RawYz]
        .into_iter()
        .map(FeatureConfig::raw)
        .collect();
    configs.extend(STANDARD_BUFFERS.iter().map(|&b| FeatureConfig::std_yz(b)));

    for cfg in configs {
        let started = Instant::now();
        let raw = LabeledFeatures::from_logs(std::slice::from_ref(&log), &cfg, DEFAULT_MAX_GAP).expect("features");
        let ranges = fit_ranges(&raw.features).expect("ranges");
        let set = LabeledFeatures {
            features: apply_ranges(&ranges, &raw.features).expect("normalize"),
            labels: raw.labels.clone(),
        };
        let sel = select_sigma(&set, &SigmaGrid::default()).expect("sigma");
        println!(
            "{:<24} cases {:>5}  sigma {:.7}  jackknife {:>6.2}%  ({} sigmas, {:.1?})",
            cfg.to_string(),
            set.len(),
            sel.sigma,
            100.0 * sel.accuracy,
            sel.evaluated.len(),
            started.elapsed()
        );
    }
}
