//! 1 Hz telemetry registers: sample types, CSV ingestion, gap segmentation
//! and a seeded synthetic route generator.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

mod csv_io;
mod synth;

pub use csv_io::{parse_log, write_log, LogFormat};
pub use synth::{synth_route, synth_route_with, synth_stretches, AreaNoise, NoiseSpec, RouteGeometry, STRETCH_GAP_S};

/// Default largest tolerated timestamp step inside one segment, in seconds.
pub const DEFAULT_MAX_GAP: i64 = 2;

/// Mobility area by vibration severity. Ordered `A1 < A2 < A3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AreaLabel {
    /// Interurban roads with good pavement.
    A1,
    /// Interurban roads with regular pavement, urban avenues.
    A2,
    /// Urban streets, interurban roads with bad pavement.
    A3,
}

impl AreaLabel {
    pub const ALL: [AreaLabel; 3] = [AreaLabel::A1, AreaLabel::A2, AreaLabel::A3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AreaLabel::A1 => "A1",
            AreaLabel::A2 => "A2",
            AreaLabel::A3 => "A3",
        }
    }
}

impl fmt::Display for AreaLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AreaLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A1" | "a1" => Ok(AreaLabel::A1),
            "A2" | "a2" => Ok(AreaLabel::A2),
            "A3" | "a3" => Ok(AreaLabel::A3),
            other => Err(format!("unknown mobility area `{other}`")),
        }
    }
}

/// WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    /// Great-circle distance in meters (haversine).
    pub fn haversine_m(&self, other: &GeoPoint) -> f64 {
        let (p1, p2) = (self.lat.to_radians(), other.lat.to_radians());
        let dp = p2 - p1;
        let dl = (other.lon - self.lon).to_radians();
        let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * Self::EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.lat, self.lon)
    }
}

impl FromStr for GeoPoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lat, lon) = s
            .split_once(',')
            .ok_or_else(|| format!("expected `lat,lon`, got `{s}`"))?;
        let lat: f64 = lat.trim().parse().map_err(|_| format!("bad latitude `{lat}`"))?;
        let lon: f64 = lon.trim().parse().map_err(|_| format!("bad longitude `{lon}`"))?;
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(format!("position `{s}` out of range"));
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// One register: epoch seconds, position, speed in km/h and 3-axis
/// acceleration in m/s².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub t: i64,
    pub lat: f64,
    pub lon: f64,
    pub v_kmh: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl TelemetrySample {
    pub fn position(&self) -> GeoPoint {
        GeoPoint::new(self.lat, self.lon)
    }
}

/// An ordered telemetry recording with optional per-sample area tags.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TelemetryLog {
    pub samples: Vec<TelemetrySample>,
    /// Present for tagged training data; one label per sample.
    pub labels: Option<Vec<AreaLabel>>,
    /// Free-form route name or notes.
    pub meta: String,
}

impl TelemetryLog {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = i64> + '_ {
        self.samples.iter().map(|s| s.t)
    }
}

/// Contiguous index range of a log with no recording gap inside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub range: Range<usize>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

/// Split a log wherever consecutive timestamps differ by more than `max_gap`
/// seconds. Segments are disjoint, ordered and cover every sample.
pub fn segment(log: &TelemetryLog, max_gap: i64) -> Vec<Segment> {
    let max_gap = max_gap.max(1);
    let mut out = Vec::new();
    if log.samples.is_empty() {
        return out;
    }
    let mut start = 0;
    for (i, pair) in log.samples.windows(2).enumerate() {
        if pair[1].t - pair[0].t > max_gap {
            out.push(Segment { range: start..i + 1 });
            start = i + 1;
        }
    }
    out.push(Segment {
        range: start..log.samples.len(),
    });
    out
}
