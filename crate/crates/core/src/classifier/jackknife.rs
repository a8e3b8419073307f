//! Leave-one-out accuracy and sphere-of-influence selection.

use rayon::prelude::*;

use super::{decide, sq_dist, LabeledFeatures, LogSumExp};
use crate::error::{Error, Result};
use crate::telemetry::AreaLabel;

/// Candidate kernel widths: integer multiples of `step` up to
/// `max_multiple · step`, scanned log-spaced then refined one step at a
/// time between the neighbours of the coarse optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaGrid {
    pub step: f64,
    pub max_multiple: u32,
    pub coarse_points: usize,
    pub refine: bool,
}

impl Default for SigmaGrid {
    fn default() -> Self {
        Self {
            step: 1.0 / 1280.0,
            max_multiple: 1280,
            coarse_points: 20,
            refine: true,
        }
    }
}

impl SigmaGrid {
    /// Distinct multiples for the coarse scan, ascending.
    pub fn coarse_multiples(&self) -> Vec<u32> {
        let max = self.max_multiple.max(1);
        let n = self.coarse_points.max(1);
        let mut out: Vec<u32> = (0..n)
            .map(|i| {
                if n == 1 {
                    return max;
                }
                let e = i as f64 / (n - 1) as f64;
                ((max as f64).powf(e).round() as u32).clamp(1, max)
            })
            .collect();
        out.dedup();
        out
    }

    pub fn sigma(&self, multiple: u32) -> f64 {
        multiple as f64 * self.step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSelection {
    pub sigma: f64,
    pub multiple: u32,
    pub accuracy: f64,
    /// Every `(sigma, accuracy)` pair evaluated, ascending by sigma.
    pub evaluated: Vec<(f64, f64)>,
}

/// Flat copy of normalized training vectors for the O(n²) scans.
struct Patterns {
    data: Vec<f64>,
    dim: usize,
    labels: Vec<u8>,
    counts: [usize; 3],
}

impl Patterns {
    fn new(training: &LabeledFeatures) -> Result<Self> {
        if training.features.len() != training.labels.len() {
            return Err(Error::InvalidModel(format!(
                "{} features but {} labels",
                training.features.len(),
                training.labels.len()
            )));
        }
        let dim = training.features.first().ok_or(Error::EmptyFeatures)?.values.len();
        let counts = training.class_counts();
        for (k, &count) in counts.iter().enumerate() {
            if count < 2 {
                return Err(Error::TooFewPatterns {
                    label: AreaLabel::ALL[k],
                    count,
                });
            }
        }
        let mut data = Vec::with_capacity(dim * training.len());
        for f in &training.features {
            if f.values.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: f.values.len(),
                });
            }
            data.extend_from_slice(&f.values);
        }
        Ok(Self {
            data,
            dim,
            labels: training.labels.iter().map(|l| l.index() as u8).collect(),
            counts,
        })
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Is pattern `i` classified correctly by all other patterns?
    fn held_out_correct(&self, i: usize, inv_two_s2: f64) -> bool {
        let xi = self.row(i);
        let mut acc = [LogSumExp::default(); 3];
        for j in (0..self.len()).filter(|&j| j != i) {
            acc[self.labels[j] as usize].push(-sq_dist(xi, self.row(j)) * inv_two_s2);
        }
        let own = self.labels[i] as usize;
        let mut scores = [0.0; 3];
        for k in 0..3 {
            let n = self.counts[k] - usize::from(k == own);
            scores[k] = acc[k].value() - (n as f64).ln();
        }
        decide(&scores).label.index() == own
    }

    fn correct_count(&self, sigma: f64) -> usize {
        let inv_two_s2 = 1.0 / (2.0 * sigma * sigma);
        (0..self.len())
            .into_par_iter()
            .filter(|&i| self.held_out_correct(i, inv_two_s2))
            .count()
    }
}

/// Fraction of patterns classified correctly when each is held out and
/// classified by the others (uniform priors and costs).
pub fn jackknife_accuracy(training: &LabeledFeatures, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidModel(format!("sigma must be positive, got {sigma}")));
    }
    let p = Patterns::new(training)?;
    Ok(p.correct_count(sigma) as f64 / p.len() as f64)
}

/// Sigma with the best leave-one-out accuracy over `grid`; ties go to the
/// smaller sigma.
pub fn select_sigma(training: &LabeledFeatures, grid: &SigmaGrid) -> Result<SigmaSelection> {
    let p = Patterns::new(training)?;
    let eval = |ms: &[u32]| -> Vec<(u32, usize)> {
        ms.par_iter().map(|&m| (m, p.correct_count(grid.sigma(m)))).collect()
    };

    let coarse = grid.coarse_multiples();
    let mut results = eval(&coarse);
    let best_coarse = best(&results);

    if grid.refine {
        let pos = coarse.iter().position(|&m| m == best_coarse).unwrap_or(0);
        let lo = if pos > 0 { coarse[pos - 1] } else { coarse[pos] };
        let hi = coarse.get(pos + 1).copied().unwrap_or(coarse[pos]);
        let fine: Vec<u32> = (lo..=hi).filter(|m| !coarse.contains(m)).collect();
        results.extend(eval(&fine));
    }
    results.sort_by_key(|&(m, _)| m);
    let multiple = best(&results);
    let n = p.len() as f64;
    let correct = results.iter().find(|r| r.0 == multiple).map_or(0, |r| r.1);
    Ok(SigmaSelection {
        sigma: grid.sigma(multiple),
        multiple,
        accuracy: correct as f64 / n,
        evaluated: results
            .iter()
            .map(|&(m, c)| (grid.sigma(m), c as f64 / n))
            .collect(),
    })
}

/// Highest count, smallest multiple on ties; independent of input order.
fn best(results: &[(u32, usize)]) -> u32 {
    results
        .iter()
        .copied()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(1, |r| r.0)
}
