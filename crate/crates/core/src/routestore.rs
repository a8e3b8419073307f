//! On-disk store of classified trips keyed by endpoints, route lookup,
//! recommendation and alert replay.
//!
//! Layout: `<dir>/index.json` lists every route with its endpoints;
//! `<dir>/routes/<id>.route` holds one record document each. A record
//! document is a `key: value` header terminated by `---`, followed by the
//! trip as tagged telemetry CSV.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scoring::{compare_routes, sole_route, AreaDurations, RouteComparison, RouteMetrics, Weights};
use crate::telemetry::{parse_log, write_log, AreaLabel, GeoPoint, LogFormat};

pub use crate::trip::ClassifiedTrip;

pub const DEFAULT_RADIUS_M: f64 = 100.0;
pub const DEFAULT_LOOKAHEAD_S: i64 = 5;

const RECORD_MAGIC: &str = "# vibroute-route";
const RECORD_VERSION: u32 = 1;
const INDEX_FILE: &str = "index.json";
const ROUTES_DIR: &str = "routes";

#[derive(Debug, Clone, PartialEq)]
pub struct RouteRecord {
    pub id: String,
    pub origin: GeoPoint,
    pub destination: GeoPoint,
    pub trip: ClassifiedTrip,
    pub metrics: RouteMetrics,
    /// Epoch seconds.
    pub created_at: i64,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl RouteRecord {
    /// Build a record whose endpoints and metrics derive from `trip`.
    pub fn new(id: impl Into<String>, trip: ClassifiedTrip, weights: Weights, created_at: i64) -> Result<Self> {
        let first = trip.log.samples.first().ok_or(Error::EmptyTrip)?.position();
        let last = trip.log.samples.last().ok_or(Error::EmptyTrip)?.position();
        let metrics = RouteMetrics::of_trip(&trip, weights)?;
        let rec = Self {
            id: id.into(),
            origin: first,
            destination: last,
            trip,
            metrics,
            created_at,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InconsistentRecord(m));
        if !valid_id(&self.id) {
            return bad(format!("invalid id `{}`", self.id));
        }
        if self.trip.labels.len() != self.trip.log.samples.len() {
            return bad("label count differs from sample count".into());
        }
        let (Some(first), Some(last)) = (self.trip.log.samples.first(), self.trip.log.samples.last()) else {
            return Err(Error::EmptyTrip);
        };
        if first.position() != self.origin {
            return bad(format!("origin {} is not the first sample position", self.origin));
        }
        if last.position() != self.destination {
            return bad(format!("destination {} is not the last sample position", self.destination));
        }
        let expected = RouteMetrics::of_trip(&self.trip, self.metrics.weights)?;
        if expected != self.metrics {
            return bad(format!(
                "metrics {:?} do not match the trip (expected {:?})",
                self.metrics, expected
            ));
        }
        Ok(())
    }

    pub fn to_document(&self) -> String {
        let m = &self.metrics;
        let d = &m.durations;
        let mut out = String::new();
        let _ = writeln!(out, "{RECORD_MAGIC} {RECORD_VERSION}");
        let _ = writeln!(out, "id: {}", self.id);
        let _ = writeln!(out, "created_at: {}", self.created_at);
        let _ = writeln!(out, "origin: {}", self.origin);
        let _ = writeln!(out, "destination: {}", self.destination);
        let _ = writeln!(out, "weights: {}", m.weights);
        let _ = writeln!(out, "durations: {},{},{},{}", d.t1, d.t2, d.t3, d.total);
        let _ = writeln!(out, "index: {}", m.index);
        let _ = writeln!(out, "score: {}", m.score);
        out.push_str("---\n");
        out.push_str(&write_log(&self.trip.tagged_log()));
        out
    }

    pub fn from_document(text: &str) -> Result<Self> {
        let malformed = |line: u64, message: String| Error::Malformed { line, message };
        let (head, body) = text
            .split_once("\n---\n")
            .ok_or_else(|| malformed(1, "missing `---` header terminator".into()))?;
        let mut lines = head.lines();
        let magic = lines.next().unwrap_or_default();
        let version = magic
            .strip_prefix(RECORD_MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| malformed(1, format!("not a route record: `{magic}`")))?;
        if version != RECORD_VERSION {
            return Err(malformed(1, format!("unsupported record version {version}")));
        }

        let mut fields = std::collections::HashMap::new();
        for (n, line) in lines.enumerate() {
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| malformed(n as u64 + 2, format!("expected `key: value`, got `{line}`")))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| Error::MissingColumn(k.to_string()));
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse::<f64>()
                .map_err(|_| malformed(1, format!("field `{k}` is not a number")))
        };
        let point = |k: &str| -> Result<GeoPoint> { get(k)?.parse().map_err(|m: String| malformed(1, m)) };

        let durations: Vec<u64> = get("durations")?
            .split(',')
            .map(|p| p.trim().parse::<u64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| malformed(1, "field `durations` must be four integers".into()))?;
        let [t1, t2, t3, total] = durations[..] else {
            return Err(malformed(1, "field `durations` must be four integers".into()));
        };

        let header_lines = head.lines().count() as u64 + 1;
        let log = parse_log(body, LogFormat::Tagged).map_err(|e| match e {
            Error::Malformed { line, message } => Error::Malformed {
                line: line + header_lines,
                message,
            },
            other => other,
        })?;

        let rec = Self {
            id: get("id")?.to_string(),
            created_at: get("created_at")?
                .parse()
                .map_err(|_| malformed(1, "field `created_at` must be an integer".into()))?,
            origin: point("origin")?,
            destination: point("destination")?,
            metrics: RouteMetrics {
                durations: AreaDurations { t1, t2, t3, total },
                weights: get("weights")?.parse().map_err(|m: String| Error::InvalidWeights(m))?,
                index: num("index")?,
                score: num("score")?,
            },
            trip: ClassifiedTrip::from_tagged(log)?,
        };
        rec.validate()?;
        Ok(rec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    id: String,
    origin: GeoPoint,
    destination: GeoPoint,
}

/// Directory-backed route store. Readers may share a directory; writes go
/// through `&mut self` and replace files atomically.
#[derive(Debug)]
pub struct RouteStore {
    dir: PathBuf,
}

impl RouteStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let routes = dir.join(ROUTES_DIR);
        fs::create_dir_all(&routes).map_err(|e| Error::io(&routes, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record_path(&self, id: &str) -> PathBuf {
        self.dir.join(ROUTES_DIR).join(format!("{id}.route"))
    }

    fn read_index(&self) -> Result<Vec<IndexEntry>> {
        let path = self.dir.join(INDEX_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(serde_json::from_str(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    fn write_atomic(&self, path: &Path, contents: &str) -> Result<()> {
        let parent = path.parent().unwrap_or(&self.dir);
        let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(parent, e))?;
        tmp.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))?;
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
        Ok(())
    }

    /// Store a record. Re-putting identical content is a no-op; a different
    /// record under an existing id is rejected.
    pub fn put(&mut self, record: &RouteRecord) -> Result<String> {
        record.validate()?;
        let doc = record.to_document();
        let path = self.record_path(&record.id);
        match fs::read_to_string(&path) {
            Ok(existing) if existing == doc => {}
            Ok(_) => return Err(Error::IdCollision(record.id.clone())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => self.write_atomic(&path, &doc)?,
            Err(e) => return Err(Error::io(path, e)),
        }
        let mut index = self.read_index()?;
        if !index.iter().any(|e| e.id == record.id) {
            index.push(IndexEntry {
                id: record.id.clone(),
                origin: record.origin,
                destination: record.destination,
            });
            index.sort_by(|a, b| a.id.cmp(&b.id));
            let text = serde_json::to_string_pretty(&index)? + "\n";
            self.write_atomic(&self.dir.join(INDEX_FILE), &text)?;
        }
        Ok(record.id.clone())
    }

    pub fn get(&self, id: &str) -> Result<RouteRecord> {
        if !valid_id(id) {
            return Err(Error::RouteNotFound(id.to_string()));
        }
        let path = self.record_path(id);
        let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::RouteNotFound(id.to_string()),
            _ => Error::io(&path, e),
        })?;
        RouteRecord::from_document(&text)
    }

    pub fn ids(&self) -> Result<Vec<String>> {
        Ok(self.read_index()?.into_iter().map(|e| e.id).collect())
    }

    /// Records whose origin and destination both lie within `radius_m` of the
    /// queried ones, in that direction. Sorted by id.
    pub fn find_candidates(&self, origin: &GeoPoint, destination: &GeoPoint, radius_m: f64) -> Result<Vec<RouteRecord>> {
        self.read_index()?
            .into_iter()
            .filter(|e| e.origin.haversine_m(origin) <= radius_m && e.destination.haversine_m(destination) <= radius_m)
            .map(|e| self.get(&e.id))
            .collect()
    }

    /// Rank the known routes between two endpoints under `weights`.
    pub fn recommend(
        &self,
        origin: &GeoPoint,
        destination: &GeoPoint,
        weights: &Weights,
        radius_m: f64,
    ) -> Result<RouteComparison> {
        let found = self.find_candidates(origin, destination, radius_m)?;
        match found.as_slice() {
            [] => Err(Error::NoKnownRoute),
            [only] => sole_route(&only.id, only.metrics.durations, weights),
            many => {
                let cands: Vec<(String, AreaDurations)> =
                    many.iter().map(|r| (r.id.clone(), r.metrics.durations)).collect();
                compare_routes(&cands, weights)
            }
        }
    }
}

/// Warning issued before the vehicle enters a rougher zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub t_alert: i64,
    pub t_entry: i64,
    pub zone: AreaLabel,
}

/// One alert per entry into A2 or A3 from a less severe zone (or at trip
/// start), raised `lookahead` seconds early but never before the trip starts.
pub fn alert_replay(trip: &ClassifiedTrip, lookahead: i64) -> Vec<AlertEvent> {
    let lookahead = lookahead.max(0);
    let Some(start) = trip.log.samples.first().map(|s| s.t) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut prev = AreaLabel::A1;
    for (s, &label) in trip.log.samples.iter().zip(&trip.labels) {
        if label > prev {
            out.push(AlertEvent {
                t_alert: (s.t - lookahead).max(start),
                t_entry: s.t,
                zone: label,
            });
        }
        prev = label;
    }
    out
}

/// Point FeatureCollection, one feature per sample, `[lon, lat]` order.
pub fn trip_geojson(trip: &ClassifiedTrip) -> Value {
    let features: Vec<Value> = trip
        .log
        .samples
        .iter()
        .zip(&trip.labels)
        .map(|(s, l)| {
            json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [s.lon, s.lat] },
                "properties": { "area": l.as_str(), "t": s.t, "v_kmh": s.v_kmh },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}
