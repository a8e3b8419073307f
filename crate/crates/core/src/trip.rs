//! Per-sample area labels aligned to a telemetry log.

use crate::classifier::PnnModel;
use crate::error::{Error, Result};
use crate::features::build_features;
use crate::telemetry::{segment, AreaLabel, Segment, TelemetryLog};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedTrip {
    pub log: TelemetryLog,
    /// One label per sample.
    pub labels: Vec<AreaLabel>,
}

impl ClassifiedTrip {
    /// Any tags already on `log` are dropped in favour of `labels`.
    pub fn new(mut log: TelemetryLog, labels: Vec<AreaLabel>) -> Result<Self> {
        log.labels = None;
        if labels.len() != log.samples.len() {
            return Err(Error::InconsistentRecord(format!(
                "{} labels for {} samples",
                labels.len(),
                log.samples.len()
            )));
        }
        Ok(Self { log, labels })
    }

    /// Use the log's own tags as the trip labels.
    pub fn from_tagged(mut log: TelemetryLog) -> Result<Self> {
        let labels = log.labels.take().ok_or_else(|| Error::MissingColumn("area".into()))?;
        Self::new(log, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The log with labels embedded as its `area` column.
    pub fn tagged_log(&self) -> TelemetryLog {
        TelemetryLog {
            labels: Some(self.labels.clone()),
            ..self.log.clone()
        }
    }
}

/// Fill unlabeled samples with the label of the nearest labeled sample in
/// the same segment (the earlier one on equal distance).
pub fn pad_labels(partial: &[Option<AreaLabel>], segments: &[Segment]) -> Result<Vec<AreaLabel>> {
    let mut out = Vec::with_capacity(partial.len());
    for seg in segments {
        let known: Vec<usize> = seg.range.clone().filter(|&i| partial[i].is_some()).collect();
        if known.is_empty() {
            return Err(Error::Unlabeled { index: seg.range.start });
        }
        let mut k = 0;
        for i in seg.range.clone() {
            while k + 1 < known.len() && known[k + 1] <= i {
                k += 1;
            }
            let left = known[k];
            let pick = if left >= i {
                left
            } else {
                match known.get(k + 1) {
                    Some(&right) if right - i < i - left => right,
                    _ => left,
                }
            };
            out.push(partial[pick].expect("known index"));
        }
    }
    if out.len() != partial.len() {
        return Err(Error::Unlabeled { index: out.len() });
    }
    Ok(out)
}

/// Classify each window center of `log`, then pad segment edges.
pub fn classify_trip(model: &PnnModel, log: &TelemetryLog, max_gap: i64) -> Result<ClassifiedTrip> {
    let segments = segment(log, max_gap);
    let features = build_features(log, &segments, &model.cfg)?;
    if features.is_empty() && !log.is_empty() {
        return Err(Error::NoFeatures {
            buffer: model.cfg.buffer,
        });
    }
    let mut partial = vec![None; log.len()];
    for f in &features {
        partial[f.center_index] = Some(model.classify(&f.values)?.label);
    }
    let labels = pad_labels(&partial, &segments)?;
    let log = TelemetryLog {
        labels: None,
        ..log.clone()
    };
    ClassifiedTrip::new(log, labels)
}
