use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{LabeledFeatures, PnnModel};
use crate::error::Result;
use crate::telemetry::AreaLabel;

/// Rows are tagged areas, columns assigned areas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (AreaLabel, AreaLabel)>) -> Self {
        let mut m = Self::default();
        for (tagged, assigned) in pairs {
            m.counts[tagged.index()][assigned.index()] += 1;
        }
        m
    }

    pub fn row_total(&self, tagged: AreaLabel) -> u64 {
        self.counts[tagged.index()].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..3).map(|k| self.counts[k][k]).sum()
    }

    /// Trace over total, in [0, 1]; zero for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    /// Percentages of each row, 0 for empty rows.
    pub fn row_percentages(&self, tagged: AreaLabel) -> [f64; 3] {
        let total = self.row_total(tagged);
        self.counts[tagged.index()].map(|c| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 })
    }

    /// Plain-text table: one row per tagged area with counts and row
    /// percentages, overall correctly-assigned percentage on the first row.
    pub fn render(&self, sigma: Option<f64>) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<22}{:>16}{:>16}{:>16}{:>22}",
            "Tagged Mobility Area", "A1", "A2", "A3", "% Correctly Assigned"
        );
        for tagged in AreaLabel::ALL {
            let pct = self.row_percentages(tagged);
            let head = format!("{} ({})", tagged, self.row_total(tagged));
            let _ = write!(out, "{head:<22}");
            for assigned in AreaLabel::ALL {
                let cell = format!(
                    "{} ({:.2}%)",
                    self.counts[tagged.index()][assigned.index()],
                    pct[assigned.index()]
                );
                let _ = write!(out, "{cell:>16}");
            }
            if tagged == AreaLabel::A1 {
                let _ = write!(out, "{:>21.2}%", 100.0 * self.accuracy());
            }
            out.push('\n');
        }
        if let Some(s) = sigma {
            let _ = writeln!(out, "Sphere of influence equal to {s}.");
        }
        out
    }
}

/// Classify every (raw-scale) feature and tabulate against its tag.
pub fn evaluate(model: &PnnModel, tagged: &LabeledFeatures) -> Result<ConfusionMatrix> {
    let mut m = ConfusionMatrix::default();
    for (f, &l) in tagged.features.iter().zip(&tagged.labels) {
        let c = model.classify(&f.values)?;
        m.counts[l.index()][c.label.index()] += 1;
    }
    Ok(m)
}
