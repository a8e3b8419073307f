//! Seeded generator of tagged 1 Hz telemetry for tests and fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{AreaLabel, GeoPoint, TelemetryLog, TelemetrySample};
use crate::error::{Error, Result};

/// Per-area noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaNoise {
    pub ax_sigma: f64,
    pub ay_sigma: f64,
    pub az_sigma: f64,
    pub v_mean_kmh: f64,
    pub v_sigma_kmh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Indexed by `AreaLabel::index()`.
    pub areas: [AreaNoise; 3],
    pub gravity: f64,
    /// Mean bump impulses per second on A3 stretches.
    pub bump_rate_hz: f64,
    pub bump_min: f64,
    pub bump_max: f64,
    /// AR(1) coefficient of the speed process.
    pub speed_persistence: f64,
    /// White measurement noise on reported speed, km/h.
    pub speed_jitter_kmh: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            areas: [
                AreaNoise {
                    ax_sigma: 0.05,
                    ay_sigma: 0.04,
                    az_sigma: 0.05,
                    v_mean_kmh: 80.0,
                    v_sigma_kmh: 12.0,
                },
                AreaNoise {
                    ax_sigma: 0.2,
                    ay_sigma: 0.25,
                    az_sigma: 0.3,
                    v_mean_kmh: 55.0,
                    v_sigma_kmh: 12.0,
                },
                AreaNoise {
                    ax_sigma: 0.5,
                    ay_sigma: 0.7,
                    az_sigma: 0.9,
                    v_mean_kmh: 35.0,
                    v_sigma_kmh: 12.0,
                },
            ],
            gravity: 9.81,
            bump_rate_hz: 0.1,
            bump_min: 3.0,
            bump_max: 6.0,
            speed_persistence: 0.9,
            speed_jitter_kmh: 4.0,
        }
    }
}

impl NoiseSpec {
    pub fn area(&self, label: AreaLabel) -> &AreaNoise {
        &self.areas[label.index()]
    }
}

/// Where the synthetic vehicle starts and ends, and the first timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteGeometry {
    pub origin: GeoPoint,
    pub destination: GeoPoint,
    pub start_t: i64,
}

impl Default for RouteGeometry {
    fn default() -> Self {
        Self {
            origin: GeoPoint::new(38.9680, -0.1840),
            destination: GeoPoint::new(39.0180, -0.1960),
            start_t: 1_650_000_000,
        }
    }
}

/// Generate a tagged log following `profile` with the default geometry.
pub fn synth_route(profile: &[(AreaLabel, u32)], noise: &NoiseSpec, seed: u64) -> Result<TelemetryLog> {
    synth_route_with(profile, noise, &RouteGeometry::default(), seed)
}

/// Generate a tagged log following `profile`. Positions move along the
/// straight line from origin to destination in proportion to distance
/// driven, so the first and last samples sit exactly on the endpoints.
pub fn synth_route_with(
    profile: &[(AreaLabel, u32)],
    noise: &NoiseSpec,
    geometry: &RouteGeometry,
    seed: u64,
) -> Result<TelemetryLog> {
    if profile.is_empty() || profile.iter().all(|&(_, d)| d == 0) {
        return Err(Error::EmptyProfile);
    }
    let labels: Vec<AreaLabel> = profile
        .iter()
        .flat_map(|&(area, dur)| std::iter::repeat_n(area, dur as usize))
        .collect();
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let bumps = Poisson::new(noise.bump_rate_hz.max(f64::MIN_POSITIVE)).expect("positive rate");

    let phi = noise.speed_persistence.clamp(0.0, 0.999);
    let innovation = (1.0 - phi * phi).sqrt();
    let mut speed_dev = std_normal.sample(&mut rng);

    let mut samples = Vec::with_capacity(n);
    let mut travelled = Vec::with_capacity(n);
    let mut dist = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let p = noise.area(label);
        if i > 0 {
            speed_dev = phi * speed_dev + innovation * std_normal.sample(&mut rng);
        }
        let true_v = (p.v_mean_kmh + p.v_sigma_kmh * speed_dev).max(0.0);
        let v_kmh = (true_v + noise.speed_jitter_kmh * std_normal.sample(&mut rng)).max(0.0);
        let ax = p.ax_sigma * std_normal.sample(&mut rng);
        let ay = p.ay_sigma * std_normal.sample(&mut rng);
        let mut az = noise.gravity + p.az_sigma * std_normal.sample(&mut rng);
        if label == AreaLabel::A3 && noise.bump_rate_hz > 0.0 {
            let count = bumps.sample(&mut rng) as u32;
            for _ in 0..count {
                let magnitude = rng.random_range(noise.bump_min..=noise.bump_max);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                az += sign * magnitude;
            }
        }
        if i > 0 {
            dist += true_v / 3.6;
        }
        travelled.push(dist);
        samples.push(TelemetrySample {
            t: geometry.start_t + i as i64,
            lat: 0.0,
            lon: 0.0,
            v_kmh,
            ax,
            ay,
            az,
        });
    }

    let (o, d) = (geometry.origin, geometry.destination);
    for (i, s) in samples.iter_mut().enumerate() {
        let frac = if dist > 0.0 {
            travelled[i] / dist
        } else if n > 1 {
            i as f64 / (n - 1) as f64
        } else {
            0.0
        };
        if i + 1 == n && n > 1 {
            s.lat = d.lat;
            s.lon = d.lon;
        } else {
            s.lat = o.lat + frac * (d.lat - o.lat);
            s.lon = o.lon + frac * (d.lon - o.lon);
        }
    }

    let meta = profile
        .iter()
        .map(|(a, d)| format!("{a}:{d}"))
        .collect::<Vec<_>>()
        .join(",");
    Ok(TelemetryLog {
        samples,
        labels: Some(labels),
        meta: format!("synthetic profile {meta} seed {seed}"),
    })
}

/// Seconds of silence inserted between stretches by [`synth_stretches`].
pub const STRETCH_GAP_S: i64 = 60;

/// Generate each run of `profile` as its own drive, concatenated into one
/// log with a [`STRETCH_GAP_S`] hole between drives so segmentation keeps
/// windows from straddling two areas. This mirrors tagged training data
/// recorded stretch by stretch rather than as one continuous trip.
pub fn synth_stretches(
    profile: &[(AreaLabel, u32)],
    noise: &NoiseSpec,
    geometry: &RouteGeometry,
    seed: u64,
) -> Result<TelemetryLog> {
    let runs: Vec<(AreaLabel, u32)> = profile.iter().copied().filter(|&(_, d)| d > 0).collect();
    if runs.is_empty() {
        return Err(Error::EmptyProfile);
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut start_t = geometry.start_t;
    for run in &runs {
        let g = RouteGeometry { start_t, ..*geometry };
        let part = synth_route_with(std::slice::from_ref(run), noise, &g, seeds.random())?;
        start_t = part.samples.last().map_or(start_t, |s| s.t) + STRETCH_GAP_S + 1;
        samples.extend(part.samples);
        labels.extend(part.labels.unwrap_or_default());
    }
    let meta = runs.iter().map(|(a, d)| format!("{a}:{d}")).collect::<Vec<_>>().join(",");
    Ok(TelemetryLog {
        samples,
        labels: Some(labels),
        meta: format!("synthetic stretches {meta} seed {seed}"),
    })
}
