use std::fmt::Write as _;

use csv::{ReaderBuilder, StringRecord, Trim};

use super::{AreaLabel, TelemetryLog, TelemetrySample};
use crate::error::{Error, Result};

const COLUMNS: [&str; 7] = ["t", "lat", "lon", "v_kmh", "ax", "ay", "az"];
const AREA_COLUMN: &str = "area";

/// Whether the `area` column is required, forbidden-and-ignored, or optional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogFormat {
    /// Accept the column when present.
    #[default]
    Auto,
    /// Require `area` (training and evaluation data).
    Tagged,
    /// Ignore any `area` column.
    Raw,
}

/// Parse a telemetry CSV. Leading `# ` lines are kept as free-form metadata.
pub fn parse_log(text: &str, format: LogFormat) -> Result<TelemetryLog> {
    let mut meta_lines = Vec::new();
    let mut body_start = 0;
    let mut meta_line_count = 0u64;
    for line in text.split_inclusive('\n') {
        match line.strip_prefix('#') {
            Some(rest) => {
                let rest = rest.trim_end_matches(['\n', '\r']);
                meta_lines.push(rest.strip_prefix(' ').unwrap_or(rest).to_string());
                body_start += line.len();
                meta_line_count += 1;
            }
            None => break,
        }
    }
    let body = &text[body_start..];

    let mut rdr = ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(body.as_bytes());

    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::MissingColumn(COLUMNS[0].to_string()));
    }
    for (i, name) in COLUMNS.iter().enumerate() {
        if header.get(i) != Some(name) {
            return Err(Error::MissingColumn(name.to_string()));
        }
    }
    let has_area = header.get(7) == Some(AREA_COLUMN);
    if header.len() > 8 || (header.len() == 8 && !has_area) {
        return Err(Error::Malformed {
            line: meta_line_count + 1,
            message: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    if format == LogFormat::Tagged && !has_area {
        return Err(Error::MissingColumn(AREA_COLUMN.to_string()));
    }
    let keep_area = has_area && format != LogFormat::Raw;

    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut record = StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line()) + meta_line_count;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != header.len() {
            return Err(Error::Malformed {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let sample = parse_sample(&record, line)?;
        if let Some(prev) = samples.last().map(|s: &TelemetrySample| s.t) {
            if sample.t <= prev {
                return Err(Error::NonMonotonic {
                    line,
                    t: sample.t,
                    prev,
                });
            }
        }
        samples.push(sample);
        if keep_area {
            let label = record[7].parse::<AreaLabel>().map_err(|message| Error::Malformed {
                line,
                message: format!("field `area`: {message}"),
            })?;
            labels.push(label);
        }
    }

    Ok(TelemetryLog {
        samples,
        labels: keep_area.then_some(labels),
        meta: meta_lines.join("\n"),
    })
}

fn parse_sample(record: &StringRecord, line: u64) -> Result<TelemetrySample> {
    let t = record[0].parse::<i64>().map_err(|_| Error::Malformed {
        line,
        message: format!("field `t`: expected integer epoch seconds, got `{}`", &record[0]),
    })?;
    let mut vals = [0.0f64; 6];
    for (i, v) in vals.iter_mut().enumerate() {
        let raw = &record[i + 1];
        *v = raw.parse::<f64>().map_err(|_| Error::Malformed {
            line,
            message: format!("field `{}`: invalid number `{raw}`", COLUMNS[i + 1]),
        })?;
        if !v.is_finite() {
            return Err(Error::OutOfRange {
                line,
                field: COLUMNS[i + 1],
                value: *v,
            });
        }
    }
    let [lat, lon, v_kmh, ax, ay, az] = vals;
    let check = |ok: bool, field: &'static str, value: f64| {
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfRange { line, field, value })
        }
    };
    check((-90.0..=90.0).contains(&lat), "lat", lat)?;
    check((-180.0..=180.0).contains(&lon), "lon", lon)?;
    check(v_kmh >= 0.0, "v_kmh", v_kmh)?;
    Ok(TelemetrySample {
        t,
        lat,
        lon,
        v_kmh,
        ax,
        ay,
        az,
    })
}

/// Serialize a log as CSV. Decimals use the shortest representation that
/// parses back to the same `f64`.
pub fn write_log(log: &TelemetryLog) -> String {
    let mut out = String::with_capacity(64 * (log.samples.len() + 1));
    for line in log.meta.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str(&COLUMNS.join(","));
    if log.labels.is_some() {
        out.push(',');
        out.push_str(AREA_COLUMN);
    }
    out.push('\n');
    for (i, s) in log.samples.iter().enumerate() {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{}",
            s.t, s.lat, s.lon, s.v_kmh, s.ax, s.ay, s.az
        );
        if let Some(labels) = &log.labels {
            let _ = write!(out, ",{}", labels[i]);
        }
        out.push('\n');
    }
    out
}
