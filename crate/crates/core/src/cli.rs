//! Command-line surface: data gathering (`synth`, `classify`), training and
//! evaluation, route recommendation and alert replay.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::classifier::{evaluate, train, LabeledFeatures, PnnModel, TrainOptions};
use crate::error::Error;
use crate::features::{FeatureConfig, FeatureVariant, STANDARD_BUFFERS};
use crate::routestore::{alert_replay, trip_geojson, RouteRecord, RouteStore, DEFAULT_LOOKAHEAD_S, DEFAULT_RADIUS_M};
use crate::scoring::{PublishedRow, Weights};
use crate::telemetry::{
    parse_log, synth_route_with, synth_stretches, write_log, AreaLabel, GeoPoint, LogFormat, NoiseSpec, RouteGeometry, TelemetryLog,
    DEFAULT_MAX_GAP,
};
use crate::trip::classify_trip;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if e.is_io() => EXIT_IO,
            CliError::Core(_) => EXIT_DOMAIN,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "vibroute", version, about = "Classify road vibration and recommend the smoothest ambulance route")]
pub struct Cli {
    #[command(flatten)]
    pub shared: SharedArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
}

fn parse_buffer(s: &str) -> std::result::Result<u32, String> {
    let b: u32 = s.parse().map_err(|_| format!("`{s}` is not an integer"))?;
    if STANDARD_BUFFERS.contains(&b) {
        Ok(b)
    } else {
        Err(format!("buffer must be one of 5, 9, 15, 29 (got {b})"))
    }
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct SharedArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Model file (written by `train`, read by `evaluate` and `classify`).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Route store directory.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// Std-dev window in seconds.
    #[arg(long, global = true, value_parser = parse_buffer)]
    pub buffer: Option<u32>,
    /// raw-xyz, raw-xz, raw-yz or std-yz.
    #[arg(long, global = true)]
    pub variant: Option<FeatureVariant>,
    /// Area weights `w1,w2,w3`.
    #[arg(long, global = true)]
    pub weights: Option<Weights>,
    /// Endpoint matching radius in meters.
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Alert lead time in seconds.
    #[arg(long, global = true)]
    pub lookahead: Option<i64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Largest timestamp step, in seconds, inside one segment.
    #[arg(long, global = true)]
    pub max_gap: Option<i64>,
    #[arg(long, global = true, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a classifier on tagged telemetry CSVs.
    Train {
        #[arg(required = true)]
        tagged: Vec<PathBuf>,
    },
    /// Confusion matrix of the model on tagged telemetry.
    Evaluate {
        #[arg(required = true)]
        tagged: Vec<PathBuf>,
    },
    /// Classify a raw trip, store it and export GeoJSON.
    #[command(alias = "ingest")]
    Classify {
        input: PathBuf,
        /// Route id; defaults to the input file stem.
        #[arg(long)]
        id: Option<String>,
        /// GeoJSON output path; defaults to `<id>.geojson` in the store.
        #[arg(long)]
        geojson: Option<PathBuf>,
        /// Record timestamp; defaults to the last sample time.
        #[arg(long)]
        created_at: Option<i64>,
    },
    /// Rank the stored routes between two endpoints.
    Recommend {
        #[arg(long)]
        origin: GeoPoint,
        #[arg(long)]
        destination: GeoPoint,
        /// CSV `route,index,score` of published figures to check against.
        #[arg(long)]
        published: Option<PathBuf>,
    },
    /// Print the alert timeline of a stored route.
    Replay {
        #[arg(long)]
        id: String,
    },
    /// Generate tagged synthetic telemetry.
    Synth {
        /// Comma-separated `AREA:seconds` runs, e.g. `A1:600,A2:600,A3:600`.
        #[arg(long)]
        profile: String,
        #[arg(long)]
        origin: Option<GeoPoint>,
        #[arg(long)]
        destination: Option<GeoPoint>,
        #[arg(long)]
        start_t: Option<i64>,
        /// Record each run as a separate drive, with a time gap between runs.
        #[arg(long)]
        separate: bool,
        /// Output path; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the GeoJSON of a stored route.
    ExportGeojson {
        #[arg(long)]
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn default_store() -> PathBuf {
    PathBuf::from("vibroute-store")
}

fn default_model() -> PathBuf {
    PathBuf::from("model.json")
}

/// Effective settings after merging the config file and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub store: PathBuf,
    pub model: PathBuf,
    pub variant: FeatureVariant,
    pub buffer: u32,
    pub weights: Weights,
    pub max_gap: i64,
    pub radius: f64,
    pub lookahead: i64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let f = FeatureConfig::default();
        Self {
            store: default_store(),
            model: default_model(),
            variant: f.variant,
            buffer: f.buffer,
            weights: Weights::default(),
            max_gap: DEFAULT_MAX_GAP,
            radius: DEFAULT_RADIUS_M,
            lookahead: DEFAULT_LOOKAHEAD_S,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn resolve(shared: &SharedArgs) -> CliResult<Self> {
        let mut cfg = match &shared.config {
            Some(path) => {
                let text = read(path)?;
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = &shared.store {
            cfg.store = v.clone();
        }
        if let Some(v) = &shared.model {
            cfg.model = v.clone();
        }
        if let Some(v) = shared.variant {
            cfg.variant = v;
        }
        if let Some(v) = shared.buffer {
            cfg.buffer = v;
        }
        if let Some(v) = shared.weights {
            cfg.weights = v;
        }
        if let Some(v) = shared.max_gap {
            cfg.max_gap = v;
        }
        if let Some(v) = shared.radius {
            cfg.radius = v;
        }
        if let Some(v) = shared.lookahead {
            cfg.lookahead = v;
        }
        if let Some(v) = shared.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        self.features().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.weights.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.max_gap < 1 {
            return Err(CliError::Usage("max_gap must be at least 1 s".into()));
        }
        if !(self.radius > 0.0) {
            return Err(CliError::Usage("radius must be positive".into()));
        }
        if self.lookahead < 0 {
            return Err(CliError::Usage("lookahead must be non-negative".into()));
        }
        Ok(())
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            variant: self.variant,
            buffer: self.buffer,
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e).into())
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e).into())
}

fn read_log(path: &Path, format: LogFormat) -> CliResult<TelemetryLog> {
    let log = parse_log(&read(path)?, format)?;
    if log.is_empty() {
        return Err(Error::EmptyLog(path.display().to_string()).into());
    }
    Ok(log)
}

fn load_model(path: &Path) -> CliResult<PnnModel> {
    Ok(PnnModel::from_json(&read(path)?)?)
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).unwrap_or_default() + "\n"
}

/// Parse `A1:600,A2:30` into synthetic profile runs.
pub fn parse_profile(spec: &str) -> std::result::Result<Vec<(AreaLabel, u32)>, String> {
    spec.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|part| {
            let (a, d) = part
                .split_once(':')
                .ok_or_else(|| format!("expected `AREA:seconds`, got `{part}`"))?;
            let area: AreaLabel = a.parse()?;
            let secs: u32 = d.trim().parse().map_err(|_| format!("bad duration `{d}`"))?;
            if secs == 0 {
                return Err(format!("duration of `{part}` must be at least 1 s"));
            }
            Ok((area, secs))
        })
        .collect()
}

fn parse_published(text: &str) -> CliResult<Vec<PublishedRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(Error::from)?;
        let bad = || CliError::Usage(format!("published row `{}` is not `route,index,score`", rec.iter().collect::<Vec<_>>().join(",")));
        if rec.len() != 3 {
            return Err(bad());
        }
        let decimals = rec[2].split_once('.').map_or(0, |(_, f)| f.len() as u32);
        out.push(PublishedRow {
            id: rec[0].to_string(),
            index: Some(rec[1].parse().map_err(|_| bad())?),
            score: Some(rec[2].parse().map_err(|_| bad())?),
            decimals,
        });
    }
    Ok(out)
}

/// Execute one command; returns what it prints on standard output.
pub fn run(cli: &Cli) -> CliResult<String> {
    let cfg = RunConfig::resolve(&cli.shared)?;
    let json_out = cli.shared.format == OutputFormat::Json;

    match &cli.command {
        Command::Synth {
            profile,
            origin,
            destination,
            start_t,
            separate,
            out,
        } => {
            let profile = parse_profile(profile).map_err(CliError::Usage)?;
            let mut geometry = RouteGeometry::default();
            if let Some(o) = origin {
                geometry.origin = *o;
            }
            if let Some(d) = destination {
                geometry.destination = *d;
            }
            if let Some(t) = start_t {
                geometry.start_t = *t;
            }
            let log = if *separate {
                synth_stretches(&profile, &NoiseSpec::default(), &geometry, cfg.seed)?
            } else {
                synth_route_with(&profile, &NoiseSpec::default(), &geometry, cfg.seed)?
            };
            let csv = write_log(&log);
            match out {
                Some(path) => {
                    write(path, &csv)?;
                    Ok(if json_out {
                        pretty(&json!({ "out": path, "samples": log.len(), "seed": cfg.seed }))
                    } else {
                        format!("wrote {} samples to {}\n", log.len(), path.display())
                    })
                }
                None => Ok(csv),
            }
        }

        Command::Train { tagged } => {
            let logs = tagged
                .iter()
                .map(|p| read_log(p, LogFormat::Tagged))
                .collect::<CliResult<Vec<_>>>()?;
            let opts = TrainOptions {
                max_gap: cfg.max_gap,
                ..TrainOptions::default()
            };
            let trained = train(&logs, &cfg.features(), &opts)?;
            write(&cfg.model, &trained.model.to_json()?)?;
            let c = trained.class_counts;
            if json_out {
                Ok(pretty(&json!({
                    "model": cfg.model,
                    "features": cfg.features(),
                    "patterns": trained.model.patterns.len(),
                    "class_counts": { "A1": c[0], "A2": c[1], "A3": c[2] },
                    "sigma": trained.selection.sigma,
                    "jackknife_accuracy": trained.selection.accuracy,
                })))
            } else {
                Ok(format!(
                    "model written to {}\nfeatures: {}\npatterns: {} (A1 {}, A2 {}, A3 {})\nsphere of influence: {}\njackknife accuracy: {:.2}%\n",
                    cfg.model.display(),
                    cfg.features(),
                    trained.model.patterns.len(),
                    c[0],
                    c[1],
                    c[2],
                    trained.selection.sigma,
                    100.0 * trained.selection.accuracy
                ))
            }
        }

        Command::Evaluate { tagged } => {
            let model = load_model(&cfg.model)?;
            let logs = tagged
                .iter()
                .map(|p| read_log(p, LogFormat::Tagged))
                .collect::<CliResult<Vec<_>>>()?;
            let set = LabeledFeatures::from_logs(&logs, &model.cfg, cfg.max_gap)?;
            if set.is_empty() {
                return Err(Error::NoFeatures {
                    buffer: model.cfg.buffer,
                }
                .into());
            }
            let m = evaluate(&model, &set)?;
            if json_out {
                Ok(pretty(&json!({
                    "features": model.cfg,
                    "sigma": model.sigma,
                    "counts": m.counts,
                    "row_percentages": AreaLabel::ALL.map(|a| m.row_percentages(a)),
                    "accuracy": m.accuracy(),
                    "total": m.total(),
                })))
            } else {
                Ok(m.render(Some(model.sigma)))
            }
        }

        Command::Classify {
            input,
            id,
            geojson,
            created_at,
        } => {
            let model = load_model(&cfg.model)?;
            let log = read_log(input, LogFormat::Raw)?;
            let id = match id {
                Some(id) => id.clone(),
                None => input
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .ok_or_else(|| CliError::Usage("cannot derive a route id; pass --id".into()))?,
            };
            let trip = classify_trip(&model, &log, cfg.max_gap)?;
            let created = created_at.unwrap_or_else(|| log.samples.last().map_or(0, |s| s.t));
            let record = RouteRecord::new(id, trip, cfg.weights, created)?;
            let mut store = RouteStore::open(&cfg.store)?;
            store.put(&record)?;
            let geo_path = geojson
                .clone()
                .unwrap_or_else(|| cfg.store.join(format!("{}.geojson", record.id)));
            write(&geo_path, &pretty(&trip_geojson(&record.trip)))?;
            let m = &record.metrics;
            let d = &m.durations;
            if json_out {
                Ok(pretty(&json!({
                    "id": record.id,
                    "origin": record.origin,
                    "destination": record.destination,
                    "durations": d,
                    "index": m.index,
                    "score": m.score,
                    "geojson": geo_path,
                })))
            } else {
                Ok(format!(
                    "stored route {}: total {} s (A1 {} s, A2 {} s, A3 {} s), index {}, score {:.4}\ngeojson: {}\n",
                    record.id,
                    d.total,
                    d.t1,
                    d.t2,
                    d.t3,
                    m.index,
                    m.score,
                    geo_path.display()
                ))
            }
        }

        Command::Recommend {
            origin,
            destination,
            published,
        } => {
            let store = RouteStore::open(&cfg.store)?;
            let comparison = store.recommend(origin, destination, &cfg.weights, cfg.radius)?;
            let published = match published {
                Some(p) => parse_published(&read(p)?)?,
                None => Vec::new(),
            };
            if json_out {
                Ok(pretty(&json!({
                    "comparison": comparison,
                    "deviations": comparison.deviations(&published),
                })))
            } else {
                Ok(comparison.render(&published))
            }
        }

        Command::Replay { id } => {
            let store = RouteStore::open(&cfg.store)?;
            let record = store.get(id)?;
            let events = alert_replay(&record.trip, cfg.lookahead);
            if json_out {
                return Ok(pretty(&json!({ "id": id, "lookahead": cfg.lookahead, "alerts": events })));
            }
            if events.is_empty() {
                return Ok(format!("{id}: no alerts\n"));
            }
            let mut out = String::new();
            for e in events {
                out.push_str(&format!(
                    "t={} alert: entering {} at t={} ({} s ahead)\n",
                    e.t_alert,
                    e.zone,
                    e.t_entry,
                    e.t_entry - e.t_alert
                ));
            }
            Ok(out)
        }

        Command::ExportGeojson { id, out } => {
            let store = RouteStore::open(&cfg.store)?;
            let record = store.get(id)?;
            let text = pretty(&trip_geojson(&record.trip));
            match out {
                Some(path) => {
                    write(path, &text)?;
                    Ok(format!("wrote {} features to {}\n", record.trip.len(), path.display()))
                }
                None => Ok(text),
            }
        }
    }
}
