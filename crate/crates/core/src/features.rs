//! Classifier inputs: raw-axis vectors, centered std-dev windows and
//! min-max normalization.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::{AreaLabel, Segment, TelemetryLog};

/// Buffers evaluated for the std-dev variant, in seconds.
pub const STANDARD_BUFFERS: [u32; 4] = [5, 9, 15, 29];
pub const DEFAULT_BUFFER: u32 = 29;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureVariant {
    /// `(ax, ay, az, v)` per sample.
    RawXyz,
    /// `(ax, az, v)` per sample.
    RawXz,
    /// `(ay, az, v)` per sample.
    RawYz,
    /// `(std ay, std az, v at center)` per centered window.
    StdYz,
}

impl FeatureVariant {
    pub fn dimension(self) -> usize {
        match self {
            FeatureVariant::RawXyz => 4,
            _ => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureVariant::RawXyz => "raw-xyz",
            FeatureVariant::RawXz => "raw-xz",
            FeatureVariant::RawYz => "raw-yz",
            FeatureVariant::StdYz => "std-yz",
        }
    }
}

impl fmt::Display for FeatureVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "raw-xyz" => Ok(FeatureVariant::RawXyz),
            "raw-xz" => Ok(FeatureVariant::RawXz),
            "raw-yz" => Ok(FeatureVariant::RawYz),
            "std-yz" => Ok(FeatureVariant::StdYz),
            other => Err(format!(
                "unknown variant `{other}` (expected raw-xyz, raw-xz, raw-yz or std-yz)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub variant: FeatureVariant,
    /// Window length in seconds; only read by `StdYz`.
    pub buffer: u32,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            variant: FeatureVariant::StdYz,
            buffer: DEFAULT_BUFFER,
        }
    }
}

impl FeatureConfig {
    pub fn raw(variant: FeatureVariant) -> Self {
        Self { variant, buffer: 1 }
    }

    pub fn std_yz(buffer: u32) -> Self {
        Self {
            variant: FeatureVariant::StdYz,
            buffer,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variant == FeatureVariant::StdYz && (self.buffer < 3 || self.buffer % 2 == 0) {
            return Err(Error::InvalidConfig(format!(
                "buffer must be odd and at least 3 s, got {}",
                self.buffer
            )));
        }
        Ok(())
    }

    /// Samples at each segment edge that cannot be the center of a window.
    pub fn half_window(&self) -> usize {
        match self.variant {
            FeatureVariant::StdYz => (self.buffer as usize) / 2,
            _ => 0,
        }
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.variant {
            FeatureVariant::StdYz => write!(f, "{} (buffer {} s)", self.variant, self.buffer),
            v => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Index of the source (or window center) sample in its log.
    pub center_index: usize,
}

/// Sample standard deviation over every fully contained centered window.
/// Returns `(center index, stddev)` pairs; a series shorter than the buffer
/// yields nothing.
pub fn window_stddev(series: &[f64], buffer: u32) -> Vec<(usize, f64)> {
    let b = buffer as usize;
    if b == 0 || series.len() < b {
        return Vec::new();
    }
    let half = b / 2;
    series
        .windows(b)
        .enumerate()
        .map(|(start, w)| (start + half, sample_stddev(w)))
        .collect()
}

fn sample_stddev(w: &[f64]) -> f64 {
    if w.len() < 2 {
        return 0.0;
    }
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let ss: f64 = w.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Build feature vectors for every segment. Output is ordered by
/// `center_index`; std-dev windows never cross a segment boundary.
pub fn build_features(log: &TelemetryLog, segments: &[Segment], cfg: &FeatureConfig) -> Result<Vec<FeatureVector>> {
    cfg.validate()?;
    let s = &log.samples;
    let mut out = Vec::new();
    for seg in segments {
        match cfg.variant {
            FeatureVariant::RawXyz => out.extend(seg.range.clone().map(|i| FeatureVector {
                values: vec![s[i].ax, s[i].ay, s[i].az, s[i].v_kmh],
                center_index: i,
            })),
            FeatureVariant::RawXz => out.extend(seg.range.clone().map(|i| FeatureVector {
                values: vec![s[i].ax, s[i].az, s[i].v_kmh],
                center_index: i,
            })),
            FeatureVariant::RawYz => out.extend(seg.range.clone().map(|i| FeatureVector {
                values: vec![s[i].ay, s[i].az, s[i].v_kmh],
                center_index: i,
            })),
            FeatureVariant::StdYz => {
                let seg_samples = &s[seg.range.clone()];
                let ay: Vec<f64> = seg_samples.iter().map(|x| x.ay).collect();
                let az: Vec<f64> = seg_samples.iter().map(|x| x.az).collect();
                let sy = window_stddev(&ay, cfg.buffer);
                let sz = window_stddev(&az, cfg.buffer);
                out.extend(sy.into_iter().zip(sz).map(|((c, y), (_, z))| {
                    let center = seg.range.start + c;
                    FeatureVector {
                        values: vec![y, z, s[center].v_kmh],
                        center_index: center,
                    }
                }));
            }
        }
    }
    out.sort_by_key(|f| f.center_index);
    Ok(out)
}

/// Tag each feature with the label of its center sample.
pub fn center_labels(features: &[FeatureVector], labels: &[AreaLabel]) -> Vec<AreaLabel> {
    features.iter().map(|f| labels[f.center_index]).collect()
}

/// Per-feature `(min, max)` learned from a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRanges {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationRanges {
    /// Ranges mapping every coordinate onto itself.
    pub fn identity(dim: usize) -> Self {
        Self {
            min: vec![0.0; dim],
            max: vec![1.0; dim],
        }
    }

    pub fn dimension(&self) -> usize {
        self.min.len()
    }

    /// Affine map onto the unit interval; constant features map to 0.5.
    /// Values outside the training range are not clamped.
    pub fn apply_one(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: values.len(),
            });
        }
        Ok(values
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| if hi > lo { (x - lo) / (hi - lo) } else { 0.5 })
            .collect())
    }
}

pub fn fit_ranges(features: &[FeatureVector]) -> Result<NormalizationRanges> {
    let first = features.first().ok_or(Error::EmptyFeatures)?;
    let dim = first.values.len();
    let mut min = vec![f64::INFINITY; dim];
    let mut max = vec![f64::NEG_INFINITY; dim];
    for f in features {
        if f.values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f.values.len(),
            });
        }
        for (k, &v) in f.values.iter().enumerate() {
            min[k] = min[k].min(v);
            max[k] = max[k].max(v);
        }
    }
    Ok(NormalizationRanges { min, max })
}

pub fn apply_ranges(ranges: &NormalizationRanges, features: &[FeatureVector]) -> Result<Vec<FeatureVector>> {
    features
        .iter()
        .map(|f| {
            Ok(FeatureVector {
                values: ranges.apply_one(&f.values)?,
                center_index: f.center_index,
            })
        })
        .collect()
}

/// Feature dump: `center_t,f1,f2,f3[,f4][,area]`.
pub fn write_feature_csv(log: &TelemetryLog, features: &[FeatureVector], labels: Option<&[AreaLabel]>) -> String {
    let dim = features.first().map_or(3, |f| f.values.len());
    let mut out = String::from("center_t");
    for k in 1..=dim {
        let _ = write!(out, ",f{k}");
    }
    if labels.is_some() {
        out.push_str(",area");
    }
    out.push('\n');
    for (i, f) in features.iter().enumerate() {
        let _ = write!(out, "{}", log.samples[f.center_index].t);
        for v in &f.values {
            let _ = write!(out, ",{v}");
        }
        if let Some(l) = labels {
            let _ = write!(out, ",{}", l[i]);
        }
        out.push('\n');
    }
    out
}
