//! Lorenz curve and Gini index of accessibility over the population, and the
//! exact per-line score: the change in Gini when the line is taken out.
//!
//! Everything is computed at hexagon granularity with populations as
//! weights, which is the same as listing every resident with the
//! accessibility of their hexagon.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accessibility::{AccessibilityField, Scenario};
use crate::error::{Error, Result};
use crate::geodata::HexGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorenzCurve {
    /// `(population share, accessibility share)`, from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
}

impl LorenzCurve {
    /// Trapezoid area under the curve.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }

    /// Gini from the area between the diagonal and the curve.
    pub fn gini(&self) -> f64 {
        1.0 - 2.0 * self.area()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e| Error::csv("writing lorenz curve", e);
        w.write_record(["x", "y"]).map_err(err)?;
        for (x, y) in &self.points {
            w.write_record([x.to_string(), y.to_string()]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("writing lorenz curve", e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct GiniScore {
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineDelta {
    pub line_id: String,
    pub line_name: String,
    /// Gini of the network without the line.
    pub gini_without: f64,
    /// `gini_without - base`. Positive means the line reduces inequity.
    pub delta_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactEquityScores {
    pub depart: u32,
    pub base: GiniScore,
    /// In line-table order.
    pub lines: Vec<LineDelta>,
}

impl ExactEquityScores {
    /// Writes `line_id,line_name,delta_g`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e| Error::csv("writing exact scores", e);
        w.write_record(["line_id", "line_name", "delta_g"]).map_err(err)?;
        for l in &self.lines {
            w.write_record([l.line_id.as_str(), l.line_name.as_str(), &l.delta_g.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("writing exact scores", e))
    }
}

/// `(weight, accessibility)` pairs sorted by accessibility, with totals.
struct Sorted {
    pairs: Vec<(f64, f64)>,
    total_w: f64,
    total_wa: f64,
}

fn sorted(mut pairs: Vec<(f64, f64)>) -> Result<Sorted> {
    if pairs.iter().any(|&(w, a)| !(w >= 0.0) || !(a >= 0.0) || !w.is_finite() || !a.is_finite()) {
        return Err(Error::invalid("weights and accessibilities must be finite and non-negative"));
    }
    // Stable sort keeps the caller's order (hexagon id) among ties.
    pairs.sort_by(|x, y| x.1.total_cmp(&y.1));
    let total_w: f64 = pairs.iter().map(|p| p.0).sum();
    let total_wa: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    if total_w == 0.0 {
        return Err(Error::Degenerate("total population is zero".into()));
    }
    if total_wa == 0.0 {
        return Err(Error::Degenerate("accessibility is zero everywhere".into()));
    }
    Ok(Sorted {
        pairs,
        total_w,
        total_wa,
    })
}

/// Population-weighted Gini of `(weight, accessibility)` pairs in
/// O(n log n): after sorting by accessibility,
/// `G = Σ w_i a_i (2 C_{i-1} + w_i - W) / (W Σ w a)` with `C` the running
/// weight.
pub fn weighted_gini(pairs: &[(f64, f64)]) -> Result<f64> {
    let s = sorted(pairs.to_vec())?;
    let mut before = 0.0;
    let mut acc = 0.0;
    for &(w, a) in &s.pairs {
        acc += w * a * (2.0 * before + w - s.total_w);
        before += w;
    }
    Ok((acc / (s.total_w * s.total_wa)).clamp(0.0, 1.0))
}

/// Lorenz curve of `(weight, accessibility)` pairs. Runs of equal
/// accessibility collapse into one segment.
pub fn weighted_lorenz(pairs: &[(f64, f64)]) -> Result<LorenzCurve> {
    let s = sorted(pairs.to_vec())?;
    let mut points = vec![(0.0, 0.0)];
    let (mut cw, mut cwa) = (0.0, 0.0);
    let mut i = 0;
    while i < s.pairs.len() {
        let a = s.pairs[i].1;
        while i < s.pairs.len() && s.pairs[i].1 == a {
            cw += s.pairs[i].0;
            cwa += s.pairs[i].0 * a;
            i += 1;
        }
        let p = (cw / s.total_w, cwa / s.total_wa);
        if p.0 > points.last().unwrap().0 {
            points.push(p);
        }
    }
    // Pin the end point against rounding in the running sums.
    *points.last_mut().unwrap() = (1.0, 1.0);
    Ok(LorenzCurve { points })
}

fn field_pairs(field: &AccessibilityField, grid: &HexGrid) -> Result<Vec<(f64, f64)>> {
    field.check_grid(grid)?;
    Ok(grid
        .hexagons()
        .iter()
        .map(|h| (h.population as f64, field.scores[&h.id] as f64))
        .collect())
}

pub fn lorenz(field: &AccessibilityField, grid: &HexGrid) -> Result<LorenzCurve> {
    weighted_lorenz(&field_pairs(field, grid)?)
}

pub fn gini(field: &AccessibilityField, grid: &HexGrid) -> Result<GiniScore> {
    Ok(GiniScore {
        value: weighted_gini(&field_pairs(field, grid)?)?,
    })
}

/// Gini of the full network, then for every line the Gini without it.
/// Lines are spread over the scenario's worker pool; each evaluates a full
/// accessibility field, so the whole run costs `(lines + 1) * hexagons`
/// scans.
pub fn exact_scores(scenario: &Scenario) -> Result<ExactEquityScores> {
    let grid = scenario.grid();
    let tt = scenario.timetable();
    let base = gini(&scenario.field(), grid)?;
    let lines = tt.lines();
    let deltas: Vec<Result<LineDelta>> = scenario.install(|| {
        (0..lines.len())
            .into_par_iter()
            .map(|l| {
                let reduced = tt.without_lines(&[l as u32])?;
                let variant = scenario.with_timetable(Arc::new(reduced), format!("without:{}", lines[l].id))?;
                let g = gini(&variant.field_in_current_pool(), grid)?;
                Ok(LineDelta {
                    line_id: lines[l].id.clone(),
                    line_name: lines[l].name.clone(),
                    gini_without: g.value,
                    delta_g: g.value - base.value,
                })
            })
            .collect()
    });
    Ok(ExactEquityScores {
        depart: scenario.window().depart,
        base,
        lines: deltas.into_iter().collect::<Result<_>>()?,
    })
}
