//! Severity-weighted route time (index), its per-second average (score) and
//! route ranking.

use std::cmp::Ordering;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::AreaLabel;
use crate::trip::ClassifiedTrip;

/// Seconds represented by one 1 Hz sample.
pub const CADENCE_S: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            w1: 1.0,
            w2: 1.5,
            w3: 2.0,
        }
    }
}

impl Weights {
    pub fn new(w1: f64, w2: f64, w3: f64) -> Result<Self> {
        let w = Self { w1, w2, w3 };
        w.validate()?;
        Ok(w)
    }

    /// Weights must penalize severity monotonically: `1 ≤ w1 ≤ w2 ≤ w3`.
    pub fn validate(&self) -> Result<()> {
        let ok = [self.w1, self.w2, self.w3].iter().all(|w| w.is_finite())
            && 1.0 <= self.w1
            && self.w1 <= self.w2
            && self.w2 <= self.w3;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidWeights(format!(
                "need 1 <= w1 <= w2 <= w3, got {},{},{}",
                self.w1, self.w2, self.w3
            )))
        }
    }

    pub fn of(&self, area: AreaLabel) -> f64 {
        match area {
            AreaLabel::A1 => self.w1,
            AreaLabel::A2 => self.w2,
            AreaLabel::A3 => self.w3,
        }
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.w1, self.w2, self.w3)
    }
}

impl FromStr for Weights {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad weight `{p}`")))
            .collect::<std::result::Result<_, _>>()?;
        match parts[..] {
            [w1, w2, w3] => Weights::new(w1, w2, w3).map_err(|e| e.to_string()),
            _ => Err(format!("expected three weights `w1,w2,w3`, got `{s}`")),
        }
    }
}

/// Seconds spent in each area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AreaDurations {
    pub t1: u64,
    pub t2: u64,
    pub t3: u64,
    pub total: u64,
}

impl AreaDurations {
    pub fn new(t1: u64, t2: u64, t3: u64) -> Self {
        Self {
            t1,
            t2,
            t3,
            total: t1 + t2 + t3,
        }
    }

    pub fn get(&self, area: AreaLabel) -> u64 {
        match area {
            AreaLabel::A1 => self.t1,
            AreaLabel::A2 => self.t2,
            AreaLabel::A3 => self.t3,
        }
    }
}

impl std::ops::Add for AreaDurations {
    type Output = AreaDurations;

    fn add(self, o: AreaDurations) -> AreaDurations {
        AreaDurations::new(self.t1 + o.t1, self.t2 + o.t2, self.t3 + o.t3)
    }
}

/// Count labeled samples per area; every sample stands for one cadence.
pub fn area_durations(trip: &ClassifiedTrip) -> Result<AreaDurations> {
    if trip.is_empty() {
        return Err(Error::EmptyTrip);
    }
    let mut c = [0u64; 3];
    for l in &trip.labels {
        c[l.index()] += CADENCE_S;
    }
    Ok(AreaDurations::new(c[0], c[1], c[2]))
}

pub fn route_index(d: &AreaDurations, w: &Weights) -> f64 {
    w.w1 * d.t1 as f64 + w.w2 * d.t2 as f64 + w.w3 * d.t3 as f64
}

pub fn route_score(d: &AreaDurations, w: &Weights) -> Result<f64> {
    if d.total == 0 {
        return Err(Error::ZeroDuration);
    }
    Ok(route_index(d, w) / d.total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteMetrics {
    pub durations: AreaDurations,
    pub weights: Weights,
    pub index: f64,
    pub score: f64,
}

impl RouteMetrics {
    pub fn compute(durations: AreaDurations, weights: Weights) -> Result<Self> {
        Ok(Self {
            durations,
            weights,
            index: route_index(&durations, &weights),
            score: route_score(&durations, &weights)?,
        })
    }

    pub fn of_trip(trip: &ClassifiedTrip, weights: Weights) -> Result<Self> {
        Self::compute(area_durations(trip)?, weights)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRoute {
    pub id: String,
    pub metrics: RouteMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteComparison {
    /// Ascending by index.
    pub ranked: Vec<RankedRoute>,
    pub recommended: String,
    /// Route with the least total time.
    pub shortest: String,
    /// Set when only one route was known.
    pub no_alternative: bool,
}

fn rank_order(a: &RankedRoute, b: &RankedRoute) -> Ordering {
    a.metrics
        .index
        .total_cmp(&b.metrics.index)
        .then(a.metrics.score.total_cmp(&b.metrics.score))
        .then(a.metrics.durations.total.cmp(&b.metrics.durations.total))
        .then(a.id.cmp(&b.id))
}

/// Rank by index, then score, then total time, then id; recommend the first.
pub fn compare_routes(candidates: &[(String, AreaDurations)], w: &Weights) -> Result<RouteComparison> {
    if candidates.len() < 2 {
        return Err(Error::TooFewCandidates(candidates.len()));
    }
    rank(candidates, w, false)
}

/// A single known route, recommended by default and flagged as such.
pub fn sole_route(id: &str, d: AreaDurations, w: &Weights) -> Result<RouteComparison> {
    rank(&[(id.to_string(), d)], w, true)
}

fn rank(candidates: &[(String, AreaDurations)], w: &Weights, no_alternative: bool) -> Result<RouteComparison> {
    w.validate()?;
    let mut ranked = candidates
        .iter()
        .map(|(id, d)| {
            Ok(RankedRoute {
                id: id.clone(),
                metrics: RouteMetrics::compute(*d, *w)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(rank_order);
    let shortest = ranked
        .iter()
        .min_by(|a, b| a.metrics.durations.total.cmp(&b.metrics.durations.total).then(a.id.cmp(&b.id)))
        .map(|r| r.id.clone())
        .unwrap_or_default();
    Ok(RouteComparison {
        recommended: ranked[0].id.clone(),
        ranked,
        shortest,
        no_alternative,
    })
}

/// A published index/score for one route, printed with `decimals` digits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedRow {
    pub id: String,
    pub index: Option<f64>,
    pub score: Option<f64>,
    pub decimals: u32,
}

/// Computed value that does not round to the published one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub id: String,
    pub field: String,
    pub computed: f64,
    pub published: f64,
}

impl fmt::Display for Deviation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: computed {:.4} but published {} (not a rounding of the computed value)",
            self.id, self.field, self.computed, self.published
        )
    }
}

impl RouteComparison {
    pub fn get(&self, id: &str) -> Option<&RankedRoute> {
        self.ranked.iter().find(|r| r.id == id)
    }

    pub fn deviations(&self, published: &[PublishedRow]) -> Vec<Deviation> {
        let mut out = Vec::new();
        for p in published {
            let Some(r) = self.get(&p.id) else { continue };
            let scale = 10f64.powi(p.decimals as i32);
            let mut check = |field: &str, computed: f64, published: Option<f64>| {
                if let Some(pv) = published {
                    if ((computed * scale).round() - (pv * scale).round()).abs() > 0.5 {
                        out.push(Deviation {
                            id: p.id.clone(),
                            field: field.to_string(),
                            computed,
                            published: pv,
                        });
                    }
                }
            };
            check("index", r.metrics.index, p.index);
            check("score", r.metrics.score, p.score);
        }
        out
    }

    /// Table with total time, seconds per area, index, shortest and
    /// preferred marks and score; deviations from `published` are listed
    /// underneath.
    pub fn render(&self, published: &[PublishedRow]) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16}{:>16}{:>8}{:>8}{:>8}{:>11}{:>15}{:>17}{:>8}",
            "Route", "Total Time (s)", "No. A1", "No. A2", "No. A3", "Index (s)", "Shorten Route", "Preferred Route", "Score"
        );
        for r in &self.ranked {
            let d = &r.metrics.durations;
            let mark = |b: bool| if b { "✓" } else { "" };
            let _ = writeln!(
                out,
                "{:<16}{:>16}{:>8}{:>8}{:>8}{:>11.1}{:>15}{:>17}{:>8.4}",
                r.id,
                d.total,
                d.t1,
                d.t2,
                d.t3,
                r.metrics.index,
                mark(r.id == self.shortest),
                mark(r.id == self.recommended),
                r.metrics.score
            );
        }
        let _ = writeln!(out, "Recommended route: {}", self.recommended);
        if self.no_alternative {
            let _ = writeln!(out, "Note: no alternative route known");
        }
        for d in self.deviations(published) {
            let _ = writeln!(out, "Deviation: {d}");
        }
        out
    }
}

/// Published per-route figures of the two reference scenarios.
pub mod reference {
    use super::{AreaDurations, PublishedRow};

    pub struct Scenario {
        pub routes: Vec<(String, AreaDurations)>,
        pub published: Vec<PublishedRow>,
        pub preferred: &'static str,
    }

    fn row(id: &str, index: f64, score: f64) -> PublishedRow {
        PublishedRow {
            id: id.to_string(),
            index: Some(index),
            score: Some(score),
            decimals: 2,
        }
    }

    /// First scenario: the shorter, rougher route wins.
    pub fn scenario_one() -> Scenario {
        Scenario {
            routes: vec![
                ("light-blue".into(), AreaDurations::new(32, 95, 135)),
                ("dark-blue".into(), AreaDurations::new(21, 50, 149)),
            ],
            published: vec![row("light-blue", 444.5, 1.70), row("dark-blue", 394.0, 1.80)],
            preferred: "dark-blue",
        }
    }

    /// Third scenario: the longer, smoother route wins.
    pub fn scenario_three() -> Scenario {
        Scenario {
            routes: vec![
                ("light-blue".into(), AreaDurations::new(173, 200, 120)),
                ("dark-blue".into(), AreaDurations::new(104, 164, 197)),
            ],
            published: vec![row("light-blue", 713.0, 1.43), row("dark-blue", 744.0, 1.49)],
            preferred: "light-blue",
        }
    }
}
