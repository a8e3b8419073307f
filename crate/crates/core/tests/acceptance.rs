//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use vibroute::classifier::{train_on_features, LabeledFeatures, PnnModel, SigmaGrid, TrainOptions};
use vibroute::features::{build_features, FeatureConfig, FeatureVariant, NormalizationRanges, STANDARD_BUFFERS};
use vibroute::routestore::RouteRecord;
use vibroute::scoring::{compare_routes, reference, route_index, route_score, AreaDurations, Weights};
use vibroute::telemetry::{
    segment, synth_route, synth_stretches, write_log, AreaLabel, NoiseSpec, RouteGeometry, TelemetryLog,
    TelemetrySample, DEFAULT_MAX_GAP,
};
use vibroute::trip::classify_trip;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(started: Instant, limit: Duration) -> Result<(), String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

fn check_scenario(scenario: &reference::Scenario, index: [f64; 2], score: [f64; 2], want_deviation: bool) -> Outcome {
    let started = Instant::now();
    let w = Weights::default();
    let cmp = compare_routes(&scenario.routes, &w).map_err(|e| e.to_string())?;
    for (k, id) in ["light-blue", "dark-blue"].iter().enumerate() {
        let r = cmp.get(id).ok_or_else(|| format!("{id} missing"))?;
        ensure((r.metrics.index - index[k]).abs() <= 1e-9, || {
            format!("{id} index {} != {}", r.metrics.index, index[k])
        })?;
        ensure((r.metrics.score - score[k]).abs() <= 1e-4, || {
            format!("{id} score {} != {}", r.metrics.score, score[k])
        })?;
    }
    ensure(cmp.recommended == scenario.preferred, || {
        format!("recommended {} not {}", cmp.recommended, scenario.preferred)
    })?;
    let report = cmp.render(&scenario.published);
    let flagged = cmp.deviations(&scenario.published);
    if want_deviation {
        let dark = flagged.iter().any(|d| d.id == "dark-blue" && d.field == "score");
        ensure(dark && report.contains("Deviation: dark-blue score"), || {
            format!("report does not flag the dark-blue score:\n{report}")
        })?;
    }
    within(started, Duration::from_secs(1))?;
    let r = |id: &str| cmp.get(id).map(|r| r.metrics.clone()).unwrap();
    let (l, d) = (r("light-blue"), r("dark-blue"));
    Ok(format!(
        "light {:.1}/{:.4}, dark {:.1}/{:.4}, recommended {}, {} deviation(s) flagged",
        l.index,
        l.score,
        d.index,
        d.score,
        cmp.recommended,
        flagged.len()
    ))
}

fn criterion_1() -> Outcome {
    check_scenario(&reference::scenario_one(), [444.5, 394.0], [1.6966, 1.7909], false)
}

fn criterion_2() -> Outcome {
    let scenario = reference::scenario_three();
    let w = Weights::default();
    for (id, d) in &scenario.routes {
        let want = if id == "light-blue" { 713.0 } else { 744.0 };
        ensure(route_index(d, &w) == want, || format!("{id} index {} != {want}", route_index(d, &w)))?;
    }
    check_scenario(&scenario, [713.0, 744.0], [1.4463, 1.6000], true)
}

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let profile = [(AreaLabel::A1, 600), (AreaLabel::A2, 600), (AreaLabel::A3, 600)];
    let log = synth_stretches(&profile, &NoiseSpec::default(), &RouteGeometry::default(), 42)
        .map_err(|e| e.to_string())?;
    let accuracy = |cfg: FeatureConfig| -> Result<f64, String> {
        let raw = LabeledFeatures::from_logs(std::slice::from_ref(&log), &cfg, DEFAULT_MAX_GAP)
            .map_err(|e| e.to_string())?;
        let trained = train_on_features(&raw, &cfg, &SigmaGrid::default()).map_err(|e| e.to_string())?;
        Ok(trained.selection.accuracy)
    };
    let raw_yz = accuracy(FeatureConfig::raw(FeatureVariant::RawYz))?;
    let by_buffer = STANDARD_BUFFERS
        .iter()
        .map(|&b| accuracy(FeatureConfig::std_yz(b)))
        .collect::<Result<Vec<_>, _>>()?;
    let std29 = by_buffer[3];
    let listing = by_buffer
        .iter()
        .zip(STANDARD_BUFFERS)
        .map(|(a, b)| format!("{b}s {:.2}%", 100.0 * a))
        .collect::<Vec<_>>()
        .join(", ");
    let detail = format!("std-yz {listing}; raw-yz {:.2}%", 100.0 * raw_yz);
    ensure(std29 >= 0.95, || format!("(a) buffer 29 below 95%: {detail}"))?;
    ensure(by_buffer.windows(2).all(|w| w[0] <= w[1]), || format!("(b) not non-decreasing: {detail}"))?;
    ensure(std29 >= raw_yz, || format!("(c) std-yz 29 below raw-yz: {detail}"))?;
    within(started, Duration::from_secs(60))?;
    Ok(format!("{detail} in {:.1?}", started.elapsed()))
}

// Direct-domain kernel density, written without reference to the library.
fn oracle(patterns: &[Vec<f64>], labels: &[usize], sigma: f64, weight: [f64; 3], x: &[f64]) -> (usize, [f64; 3]) {
    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    for (p, &l) in patterns.iter().zip(labels) {
        let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        sums[l] += (-d2 / (2.0 * sigma * sigma)).exp();
        counts[l] += 1;
    }
    let scores: [f64; 3] = std::array::from_fn(|k| weight[k] * sums[k] / counts[k] as f64);
    let total: f64 = scores.iter().sum();
    let mut best = 0;
    for k in 1..3 {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    (best, scores.map(|s| s / total))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let variants = [
        FeatureVariant::RawXyz,
        FeatureVariant::RawXz,
        FeatureVariant::RawYz,
        FeatureVariant::StdYz,
    ];
    let mut worst = 0.0f64;
    let mut queries = 0;
    for instance in 0..200 {
        let variant = variants[rng.random_range(0..variants.len())];
        let cfg = if variant == FeatureVariant::StdYz {
            FeatureConfig::std_yz(29)
        } else {
            FeatureConfig::raw(variant)
        };
        let dim = variant.dimension();
        let n = rng.random_range(3..=10);
        let mut labels: Vec<usize> = (0..n).map(|i| if i < 3 { i } else { rng.random_range(0..3) }).collect();
        for i in (1..n).rev() {
            labels.swap(i, rng.random_range(0..=i));
        }
        let patterns: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
        let sigma = rng.random_range(0.1..1.0);
        let priors: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.5..2.0));
        let costs: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.5..2.0));
        let model = PnnModel::new(
            cfg,
            NormalizationRanges::identity(dim),
            patterns.clone(),
            labels.iter().map(|&l| AreaLabel::ALL[l]).collect(),
            sigma,
        )
        .and_then(|m| m.with_priors(priors))
        .and_then(|m| m.with_costs(costs))
        .map_err(|e| format!("instance {instance}: {e}"))?;
        let weight: [f64; 3] = std::array::from_fn(|k| priors[k] * costs[k]);
        for _ in 0..5 {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.2..1.2)).collect();
            let got = model.classify(&x).map_err(|e| e.to_string())?;
            let (label, post) = oracle(&patterns, &labels, sigma, weight, &x);
            ensure(got.label.index() == label, || {
                format!("instance {instance}: label {} vs oracle {}", got.label, AreaLabel::ALL[label])
            })?;
            for k in 0..3 {
                let diff = (got.posteriors[k] - post[k]).abs();
                worst = worst.max(diff);
                ensure(diff <= 1e-12, || format!("instance {instance}: posterior {k} differs by {diff:e}"))?;
            }
            queries += 1;
        }
    }
    Ok(format!("200 instances, {queries} queries, max posterior difference {worst:.1e}"))
}

fn plain_log(times: &[i64]) -> TelemetryLog {
    TelemetryLog {
        samples: times
            .iter()
            .enumerate()
            .map(|(i, &t)| TelemetrySample {
                t,
                lat: 39.0,
                lon: -0.18,
                v_kmh: 40.0 + (i % 7) as f64,
                ax: 0.0,
                ay: ((i * 31) % 11) as f64 * 0.1,
                az: 9.81 + ((i * 17) % 13) as f64 * 0.05,
            })
            .collect(),
        labels: None,
        meta: String::new(),
    }
}

fn criterion_5() -> Outcome {
    let law = |n: usize, b: u32| (n + 1).saturating_sub(b as usize);
    let mut checked = 0;
    for &b in &STANDARD_BUFFERS {
        let cfg = FeatureConfig::std_yz(b);
        for n in 1..=100usize {
            let times: Vec<i64> = (0..n as i64).collect();
            let log = plain_log(&times);
            let segs = segment(&log, DEFAULT_MAX_GAP);
            let got = build_features(&log, &segs, &cfg).map_err(|e| e.to_string())?.len();
            ensure(got == law(n, b), || format!("n={n} buffer={b}: {got} features, law {}", law(n, b)))?;
            checked += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let b = STANDARD_BUFFERS[rng.random_range(0..4)];
        let cfg = FeatureConfig::std_yz(b);
        let parts: Vec<usize> = (0..rng.random_range(1..5)).map(|_| rng.random_range(1..=100)).collect();
        let mut times = Vec::new();
        let mut t = 0i64;
        for &len in &parts {
            for _ in 0..len {
                times.push(t);
                t += 1;
            }
            t += rng.random_range(DEFAULT_MAX_GAP + 1..=DEFAULT_MAX_GAP + 30);
        }
        let log = plain_log(&times);
        let segs = segment(&log, DEFAULT_MAX_GAP);
        let features = build_features(&log, &segs, &cfg).map_err(|e| e.to_string())?;
        let want: usize = parts.iter().map(|&n| law(n, b)).sum();
        ensure(features.len() == want, || format!("gapped {parts:?} buffer {b}: {} != {want}", features.len()))?;
        let h = (b / 2) as usize;
        for f in &features {
            let (lo, hi) = (f.center_index - h, f.center_index + h);
            ensure(log.samples[hi].t - log.samples[lo].t == 2 * h as i64, || {
                format!("window at {} straddles a gap", f.center_index)
            })?;
        }
    }
    Ok(format!("{checked} (n, buffer) pairs plus 200 gapped logs"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let w = Weights::default();
    let weights = [w.w1, w.w2, w.w3];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..1000 {
        let t: [u64; 3] = std::array::from_fn(|_| rng.random_range(0..100_000));
        let d = AreaDurations::new(t[0], t[1], t[2]);
        if d.total > 0 {
            let s = route_score(&d, &w).map_err(|e| e.to_string())?;
            ensure((1.0..=2.0).contains(&s), || format!("triple {t:?}: score {s}"))?;
            lo = lo.min(s);
            hi = hi.max(s);
        }
        let u: [u64; 3] = std::array::from_fn(|_| rng.random_range(0..100_000));
        let e = AreaDurations::new(u[0], u[1], u[2]);
        ensure(route_index(&(d + e), &w) == route_index(&d, &w) + route_index(&e, &w), || {
            format!("additivity fails for {t:?} + {u:?}")
        })?;
        let c = rng.random_range(0..50u64);
        let scaled = AreaDurations::new(c * t[0], c * t[1], c * t[2]);
        ensure(route_index(&scaled, &w) == c as f64 * route_index(&d, &w), || {
            format!("homogeneity fails for {c} x {t:?}")
        })?;
        let (a, b) = match i % 3 {
            0 => (0, 1),
            1 => (1, 2),
            _ => (0, 2),
        };
        if t[a] > 0 {
            let mut moved = t;
            moved[a] -= 1;
            moved[b] += 1;
            let m = AreaDurations::new(moved[0], moved[1], moved[2]);
            let delta = route_index(&m, &w) - route_index(&d, &w);
            ensure(delta == weights[b] - weights[a], || {
                format!("moving 1 s A{}->A{} in {t:?} changed index by {delta}", a + 1, b + 1)
            })?;
        }
    }
    Ok(format!("1000 triples, score range [{lo:.4}, {hi:.4}]"))
}

fn criterion_7() -> Outcome {
    let geometry = RouteGeometry::default();
    let noise = NoiseSpec::default();
    let profile = [(AreaLabel::A1, 200), (AreaLabel::A2, 200), (AreaLabel::A3, 200)];
    let tagged = synth_stretches(&profile, &noise, &geometry, 7).map_err(|e| e.to_string())?;
    let cfg = FeatureConfig::std_yz(9);
    let trained = vibroute::classifier::train(std::slice::from_ref(&tagged), &cfg, &TrainOptions::default())
        .map_err(|e| e.to_string())?;
    let model = trained.model;
    let json = model.to_json().map_err(|e| e.to_string())?;
    let back = PnnModel::from_json(&json).map_err(|e| e.to_string())?;
    ensure(back == model, || "model differs after round trip".into())?;
    ensure(back.to_json().map_err(|e| e.to_string())? == json, || "re-serialized model differs".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for q in 0..1000 {
        let x: Vec<f64> = (0..cfg.variant.dimension())
            .map(|k| {
                let (lo, hi) = (model.ranges.min[k], model.ranges.max[k]);
                rng.random_range(lo - 0.1 * (hi - lo)..hi + 0.1 * (hi - lo))
            })
            .collect();
        let (a, b) = (model.classify(&x), back.classify(&x));
        let same = match (&a, &b) {
            (Ok(a), Ok(b)) => a.label == b.label && a.posteriors.map(f64::to_bits) == b.posteriors.map(f64::to_bits),
            _ => false,
        };
        ensure(same, || format!("query {q}: {a:?} vs {b:?}"))?;
    }

    let route = synth_route(&[(AreaLabel::A1, 90), (AreaLabel::A3, 40), (AreaLabel::A2, 60)], &noise, 8)
        .map_err(|e| e.to_string())?;
    let trip = classify_trip(&model, &route, DEFAULT_MAX_GAP).map_err(|e| e.to_string())?;
    let record = RouteRecord::new("round-trip", trip, Weights::default(), 1_650_000_999).map_err(|e| e.to_string())?;
    let doc = record.to_document();
    let restored = RouteRecord::from_document(&doc).map_err(|e| e.to_string())?;
    ensure(restored == record, || "route record differs after round trip".into())?;
    ensure(restored.to_document() == doc, || "re-serialized record differs".into())?;

    let csv = |seed| synth_route(&profile, &noise, seed).map(|l| write_log(&l)).map_err(|e| e.to_string());
    ensure(csv(11)? == csv(11)?, || "same seed gave different CSV".into())?;
    ensure(csv(11)? != csv(12)?, || "different seeds gave identical CSV".into())?;
    Ok("1000 identical predictions, field-equal record, byte-identical CSVs".into())
}

fn vibroute(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_vibroute"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "vibroute {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn criterion_8() -> Outcome {
    let started = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let run = |args: &[&str]| vibroute(dir, args);
    run(&["synth", "--separate", "--profile", "A1:600,A2:600,A3:600", "--seed", "42", "--out", "train.csv"])?;
    run(&["train", "train.csv", "--model", "model.json", "--variant", "std-yz", "--buffer", "29"])?;
    run(&["synth", "--profile", "A1:420,A2:60,A3:30", "--seed", "1", "--out", "smooth.csv"])?;
    run(&["synth", "--profile", "A1:60,A2:150,A3:200", "--seed", "2", "--out", "rough.csv"])?;
    let mut samples = std::collections::BTreeMap::new();
    for id in ["smooth", "rough"] {
        let input = format!("{id}.csv");
        let geo = format!("{id}.geojson");
        let text = run(&["classify", &input, "--model", "model.json", "--store", "store", "--geojson", &geo])?;
        ensure(text.contains(&format!("stored route {id}")), || format!("unexpected classify output: {text}"))?;
        let n = std::fs::read_to_string(dir.join(&input))
            .map_err(|e| e.to_string())?
            .lines()
            .filter(|l| !l.starts_with('#'))
            .count()
            - 1;
        samples.insert(id, n);
    }

    let g = RouteGeometry::default();
    let (o, d) = (g.origin.to_string(), g.destination.to_string());
    let out = run(&["recommend", "--store", "store", "--origin", &o, "--destination", &d, "--format", "json"])?;
    let v: Value = serde_json::from_str(&out).map_err(|e| e.to_string())?;
    let cmp = &v["comparison"];
    let ranked = cmp["ranked"].as_array().ok_or("no ranked routes")?;
    ensure(ranked.len() == 2, || format!("{} candidates found", ranked.len()))?;
    let index_of = |id: &str| {
        ranked
            .iter()
            .find(|r| r["id"] == id)
            .and_then(|r| r["metrics"]["index"].as_f64())
            .ok_or_else(|| format!("{id} missing from ranking"))
    };
    let (smooth, rough) = (index_of("smooth")?, index_of("rough")?);
    let lower = if smooth <= rough { "smooth" } else { "rough" };
    ensure(cmp["recommended"] == lower, || format!("recommended {} but {lower} has the lower index", cmp["recommended"]))?;

    for (id, n) in &samples {
        let exported = format!("{id}.export.geojson");
        run(&["export-geojson", "--store", "store", "--id", id, "--out", &exported])?;
        for file in [format!("{id}.geojson"), exported] {
            let text = std::fs::read_to_string(dir.join(&file)).map_err(|e| e.to_string())?;
            let gj: Value = serde_json::from_str(&text).map_err(|e| format!("{file}: {e}"))?;
            ensure(gj["type"] == "FeatureCollection", || format!("{file}: not a FeatureCollection"))?;
            let features = gj["features"].as_array().ok_or_else(|| format!("{file}: no features"))?;
            ensure(features.len() == *n, || format!("{file}: {} features for {n} samples", features.len()))?;
            for f in features {
                let c = f["geometry"]["coordinates"].as_array().map(|c| c.iter().filter_map(Value::as_f64).collect::<Vec<_>>());
                let ok = f["type"] == "Feature"
                    && f["geometry"]["type"] == "Point"
                    && matches!(c.as_deref(), Some([lon, lat]) if lon.abs() <= 180.0 && lat.abs() <= 90.0)
                    && matches!(f["properties"]["area"].as_str(), Some("A1" | "A2" | "A3"));
                ensure(ok, || format!("{file}: malformed feature {f}"))?;
            }
        }
    }
    within(started, Duration::from_secs(120))?;
    Ok(format!(
        "smooth index {smooth}, rough index {rough}, recommended {lower}, {:.1?}",
        started.elapsed()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("reference scenario one: indexes, scores, recommendation", criterion_1),
        ("reference scenario three: exact indexes, recommendation, flagged deviation", criterion_2),
        ("synthetic accuracy: buffer 29 >= 95%, non-decreasing in buffer, beats raw-yz", criterion_3),
        ("classifier matches brute-force kernel density oracle", criterion_4),
        ("window count law and gap isolation", criterion_5),
        ("scoring bounds, linearity and severity monotonicity", criterion_6),
        ("determinism and serialization round trips", criterion_7),
        ("end-to-end synth, train, classify, recommend, GeoJSON", criterion_8),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("[PASS] criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] criterion {}: {name} ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
