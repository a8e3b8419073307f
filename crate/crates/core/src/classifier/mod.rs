//! Three-class probabilistic neural network (Gaussian Parzen classifier).
//!
//! The pattern layer holds one unit per normalized training vector; the
//! summation layer averages kernel activations per mobility area; the output
//! layer picks the area with the largest prior·cost·density. A single
//! smoothing width, the sphere of influence, is tuned by leave-one-out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    apply_ranges, build_features, center_labels, fit_ranges, FeatureConfig, FeatureVector, NormalizationRanges,
};
use crate::telemetry::{segment, AreaLabel, TelemetryLog};

mod confusion;
mod jackknife;

pub use confusion::{evaluate, ConfusionMatrix};
pub use jackknife::{jackknife_accuracy, select_sigma, SigmaGrid, SigmaSelection};

pub const MODEL_FORMAT: &str = "vibroute-pnn";
pub const MODEL_VERSION: u32 = 1;

/// Feature vectors with one area tag each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledFeatures {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<AreaLabel>,
}

impl LabeledFeatures {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }

    /// Build features for each tagged log and tag them by center sample.
    pub fn from_logs(logs: &[TelemetryLog], cfg: &FeatureConfig, max_gap: i64) -> Result<Self> {
        let mut out = LabeledFeatures::default();
        for log in logs {
            let labels = log
                .labels
                .as_ref()
                .ok_or_else(|| Error::MissingColumn("area".into()))?;
            let feats = build_features(log, &segment(log, max_gap), cfg)?;
            out.labels.extend(center_labels(&feats, labels));
            out.features.extend(feats);
        }
        Ok(out)
    }
}

/// Area decision with normalized posteriors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub label: AreaLabel,
    pub posteriors: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnnModel {
    pub format: String,
    pub version: u32,
    pub cfg: FeatureConfig,
    pub ranges: NormalizationRanges,
    /// Kernel width on the normalized feature scale.
    pub sigma: f64,
    pub priors: [f64; 3],
    pub costs: [f64; 3],
    /// Normalized training vectors.
    pub patterns: Vec<Vec<f64>>,
    pub labels: Vec<AreaLabel>,
}

impl PnnModel {
    /// Build a model with uniform priors and costs.
    pub fn new(
        cfg: FeatureConfig,
        ranges: NormalizationRanges,
        patterns: Vec<Vec<f64>>,
        labels: Vec<AreaLabel>,
        sigma: f64,
    ) -> Result<Self> {
        let model = Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            cfg,
            ranges,
            sigma,
            priors: [1.0; 3],
            costs: [1.0; 3],
            patterns,
            labels,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_priors(mut self, priors: [f64; 3]) -> Result<Self> {
        self.priors = priors;
        self.validate()?;
        Ok(self)
    }

    pub fn with_costs(mut self, costs: [f64; 3]) -> Result<Self> {
        self.costs = costs;
        self.validate()?;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.ranges.dimension()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return bad(format!("unsupported format {} v{}", self.format, self.version));
        }
        self.cfg.validate()?;
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.priors.iter().chain(&self.costs).any(|&p| !(p > 0.0 && p.is_finite())) {
            return bad("priors and costs must be positive".into());
        }
        if self.patterns.len() != self.labels.len() {
            return bad(format!(
                "{} patterns but {} labels",
                self.patterns.len(),
                self.labels.len()
            ));
        }
        let dim = self.dimension();
        if dim != self.cfg.variant.dimension() || self.ranges.max.len() != dim {
            return bad(format!("ranges have dimension {dim}, variant expects {}", self.cfg.variant.dimension()));
        }
        if let Some(p) = self.patterns.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        let mut counts = [0usize; 3];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(Error::MissingClass(AreaLabel::ALL[k]));
        }
        Ok(())
    }

    fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }

    /// Mean Gaussian kernel activation of class `k` at normalized point `x`.
    pub fn class_density(&self, x: &[f64], k: AreaLabel) -> Result<f64> {
        self.check_dim(x)?;
        let two_s2 = 2.0 * self.sigma * self.sigma;
        let (mut sum, mut n) = (0.0, 0usize);
        for (p, _) in self.patterns.iter().zip(&self.labels).filter(|(_, &l)| l == k) {
            sum += (-sq_dist(x, p) / two_s2).exp();
            n += 1;
        }
        Ok(if n == 0 { 0.0 } else { sum / n as f64 })
    }

    /// Classify a vector given on the raw feature scale.
    pub fn classify(&self, raw: &[f64]) -> Result<Classification> {
        let x = self.ranges.apply_one(raw)?;
        self.classify_normalized(&x)
    }

    /// Classify a vector already mapped through `self.ranges`.
    pub fn classify_normalized(&self, x: &[f64]) -> Result<Classification> {
        self.check_dim(x)?;
        let inv_two_s2 = 1.0 / (2.0 * self.sigma * self.sigma);
        let mut acc = [LogSumExp::default(); 3];
        for (p, l) in self.patterns.iter().zip(&self.labels) {
            acc[l.index()].push(-sq_dist(x, p) * inv_two_s2);
        }
        let counts = self.class_counts();
        let mut scores = [f64::NEG_INFINITY; 3];
        for k in 0..3 {
            scores[k] = self.log_weight(k) + acc[k].value() - (counts[k] as f64).ln();
        }
        Ok(decide(&scores))
    }

    pub(crate) fn log_weight(&self, k: usize) -> f64 {
        (self.priors[k] * self.costs[k]).ln()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: PnnModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Streaming log-sum-exp; keeps kernel sums representable for tiny sigma.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogSumExp {
    #[inline]
    pub(crate) fn push(&mut self, x: f64) {
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else if self.max == f64::NEG_INFINITY {
            self.max = x;
            self.sum = 1.0;
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Argmax over log scores, lowest area on ties, plus softmax posteriors.
pub(crate) fn decide(scores: &[f64; 3]) -> Classification {
    let mut best = 0;
    for k in 1..3 {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    let top = scores[best];
    let posteriors = if top == f64::NEG_INFINITY || top.is_nan() {
        [1.0 / 3.0; 3]
    } else {
        let e = scores.map(|s| (s - top).exp());
        let z: f64 = e.iter().sum();
        e.map(|v| v / z)
    };
    Classification {
        label: AreaLabel::ALL[best],
        posteriors,
    }
}

/// Options for [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub max_gap: i64,
    pub grid: SigmaGrid,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            max_gap: crate::telemetry::DEFAULT_MAX_GAP,
            grid: SigmaGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: PnnModel,
    pub selection: SigmaSelection,
    pub class_counts: [usize; 3],
}

/// Build features from tagged logs, normalize, tune sigma by leave-one-out
/// and return the fitted model.
pub fn train(tagged: &[TelemetryLog], cfg: &FeatureConfig, opts: &TrainOptions) -> Result<TrainedModel> {
    cfg.validate()?;
    let raw = LabeledFeatures::from_logs(tagged, cfg, opts.max_gap)?;
    train_on_features(&raw, cfg, &opts.grid)
}

pub fn train_on_features(raw: &LabeledFeatures, cfg: &FeatureConfig, grid: &SigmaGrid) -> Result<TrainedModel> {
    if raw.is_empty() {
        return Err(Error::NoFeatures { buffer: cfg.buffer });
    }
    let class_counts = raw.class_counts();
    if let Some(k) = class_counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingClass(AreaLabel::ALL[k]));
    }
    let ranges = fit_ranges(&raw.features)?;
    let normalized = LabeledFeatures {
        features: apply_ranges(&ranges, &raw.features)?,
        labels: raw.labels.clone(),
    };
    let selection = select_sigma(&normalized, grid)?;
    let patterns = normalized.features.into_iter().map(|f| f.values).collect();
    let model = PnnModel::new(*cfg, ranges, patterns, normalized.labels, selection.sigma)?;
    Ok(TrainedModel {
        model,
        selection,
        class_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVariant;

    fn model(patterns: Vec<Vec<f64>>, labels: Vec<AreaLabel>, sigma: f64) -> PnnModel {
        let dim = patterns[0].len();
        let cfg = if dim == 4 {
            FeatureConfig::raw(FeatureVariant::RawXyz)
        } else {
            FeatureConfig::raw(FeatureVariant::RawYz)
        };
        PnnModel::new(cfg, NormalizationRanges::identity(dim), patterns, labels, sigma).unwrap()
    }

    use AreaLabel::*;

    #[test]
    fn density_of_coincident_single_pattern_is_one() {
        let m = model(vec![vec![0.1, 0.2, 0.3], vec![0.9, 0.9, 0.9], vec![0.5, 0.0, 0.5]], vec![A1, A2, A3], 0.1);
        assert_eq!(m.class_density(&[0.1, 0.2, 0.3], A1).unwrap(), 1.0);
    }

    #[test]
    fn density_one_sigma_away() {
        let sigma = 0.05;
        let m = model(vec![vec![0.0; 3], vec![1.0; 3], vec![0.5; 3]], vec![A1, A2, A3], sigma);
        let d = m.class_density(&[sigma, 0.0, 0.0], A1).unwrap();
        assert!((d - (-0.5f64).exp()).abs() < 1e-15);
        assert!((d - 0.606531).abs() < 1e-6);
    }

    #[test]
    fn wide_kernel_flattens_densities() {
        let m = model(vec![vec![0.0; 3], vec![1.0; 3], vec![0.5; 3]], vec![A1, A2, A3], 1e6);
        for k in AreaLabel::ALL {
            assert!((m.class_density(&[0.3, 0.7, 0.1], k).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dominant_kernel_wins() {
        let m = model(vec![vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], vec![A1, A2, A3], 0.05);
        let c = m.classify(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(c.label, A2);
        assert!(c.posteriors[1] > 0.99);
    }

    #[test]
    fn equidistant_tie_goes_to_lowest_area() {
        let m = model(
            vec![vec![0.25, 0.5, 0.5], vec![0.5, 0.5, 64.0], vec![0.75, 0.5, 0.5]],
            vec![A1, A2, A3],
            0.125,
        );
        let c = m.classify(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(c.label, A1);
        assert_eq!(c.posteriors[0], c.posteriors[2]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = model(vec![vec![0.0; 3], vec![1.0; 3], vec![0.5; 3]], vec![A1, A2, A3], 0.1);
        assert!(matches!(m.classify(&[0.0, 0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(m.class_density(&[0.0; 4], A1).is_err());
    }

    #[test]
    fn invalid_models_rejected() {
        let r = NormalizationRanges::identity(3);
        let cfg = FeatureConfig::raw(FeatureVariant::RawYz);
        let pats = vec![vec![0.0; 3], vec![1.0; 3]];
        assert!(matches!(
            PnnModel::new(cfg, r.clone(), pats.clone(), vec![A1, A2], 0.1),
            Err(Error::MissingClass(A3))
        ));
        let pats = vec![vec![0.0; 3], vec![1.0; 3], vec![0.5; 3]];
        assert!(PnnModel::new(cfg, r.clone(), pats.clone(), vec![A1, A2, A3], 0.0).is_err());
        let m = PnnModel::new(cfg, r, pats, vec![A1, A2, A3], 0.1).unwrap();
        assert!(m.with_priors([1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn tiny_sigma_still_classifies_by_nearest_pattern() {
        let m = model(vec![vec![0.0; 3], vec![0.6; 3], vec![1.0; 3]], vec![A1, A2, A3], 1e-6);
        assert_eq!(m.classify(&[0.7, 0.7, 0.7]).unwrap().label, A2);
        assert_eq!(m.classify(&[0.9, 0.9, 0.9]).unwrap().label, A3);
    }

    #[test]
    fn logsumexp_matches_direct_sum() {
        let xs = [-3.0, -0.5, -7.25, 0.0, -1.0];
        let mut acc = LogSumExp::default();
        xs.iter().for_each(|&x| acc.push(x));
        let direct: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((acc.value() - direct).abs() < 1e-14);
    }

    #[test]
    fn json_round_trip() {
        let m = model(vec![vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6], vec![0.7, 0.8, 0.9]], vec![A1, A2, A3], 0.0125);
        let back = PnnModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
