//! The fast equity score. Every accessibility scan also yields a journey
//! tree; the meters each line contributes to that tree are its importance
//! for the origin hexagon. Summing importance over hexagons from the least
//! to the most accessible and reading the sum at a percentile gives the
//! score of every line from a single accessibility pass.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accessibility::{AccessibilityField, Scenario};
use crate::error::{Error, Result};
use crate::geodata::HexGrid;
use crate::gtfs::Timetable;
use crate::router::{journey_tree, JourneyTree};

/// Meters travelled on each line (by line index) inside a journey tree.
/// Lines the tree does not use are absent.
pub fn line_importance(tree: &JourneyTree, tt: &Timetable) -> BTreeMap<u32, f64> {
    let mut out = BTreeMap::new();
    for &c in &tree.used {
        let c = &tt.connections()[c as usize];
        *out.entry(c.line).or_insert(0.0) += c.length_m;
    }
    out
}

/// Importance of every line for every hexagon, stored sparsely by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceMatrix {
    pub depart: u32,
    pub hex_ids: Vec<u32>,
    pub line_ids: Vec<String>,
    pub line_names: Vec<String>,
    /// Per hexagon (same order as `hex_ids`): `(line index, meters)`.
    pub rows: Vec<Vec<(u32, f64)>>,
}

impl ImportanceMatrix {
    pub fn get(&self, hex_id: u32, line: u32) -> f64 {
        let Ok(pos) = self.hex_ids.binary_search(&hex_id) else {
            return 0.0;
        };
        self.rows[pos]
            .binary_search_by_key(&line, |e| e.0)
            .map_or(0.0, |i| self.rows[pos][i].1)
    }

    /// Sum over hexagons, per line.
    pub fn column_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.line_ids.len()];
        for row in &self.rows {
            for &(l, m) in row {
                totals[l as usize] += m;
            }
        }
        totals
    }
}

/// One scan per hexagon producing both the accessibility field and the
/// importance matrix.
pub fn importance_matrix(scenario: &Scenario) -> Result<(AccessibilityField, ImportanceMatrix)> {
    let grid = scenario.grid();
    let tt = scenario.timetable();
    type Row = (u64, Vec<(u32, f64)>);
    let per_hex: Vec<Result<Row>> = scenario.install(|| {
        (0..grid.len())
            .into_par_iter()
            .map(|pos| {
                let state = scenario.scan(pos);
                let a = scenario.accessibility_from(pos, &state);
                let tree = journey_tree(&state, tt)?;
                Ok((a, line_importance(&tree, tt).into_iter().collect()))
            })
            .collect()
    });
    let mut scores = BTreeMap::new();
    let mut rows = Vec::with_capacity(grid.len());
    for (h, r) in grid.hexagons().iter().zip(per_hex) {
        let (a, row) = r?;
        scores.insert(h.id, a);
        rows.push(row);
    }
    let window = scenario.window();
    let field = AccessibilityField {
        depart: window.depart,
        horizon: window.horizon,
        line_set_tag: scenario.tag().to_string(),
        scores,
    };
    let matrix = ImportanceMatrix {
        depart: window.depart,
        hex_ids: grid.hexagons().iter().map(|h| h.id).collect(),
        line_ids: tt.lines().iter().map(|l| l.id.clone()).collect(),
        line_names: tt.lines().iter().map(|l| l.name.clone()).collect(),
        rows,
    };
    Ok((field, matrix))
}

/// Prefix sums of importance along hexagons sorted from the least to the
/// most accessible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeImportance {
    pub depart: u32,
    /// Hexagon ids by ascending accessibility, ties by id.
    pub hex_order: Vec<u32>,
    /// Population of each hexagon in `hex_order`.
    pub populations: Vec<u64>,
    pub line_ids: Vec<String>,
    pub line_names: Vec<String>,
    /// `prefix[line][k]` sums the first `k + 1` hexagons of `hex_order`.
    pub prefix: Vec<Vec<f64>>,
}

impl CumulativeImportance {
    pub fn len(&self) -> usize {
        self.hex_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hex_order.is_empty()
    }

    /// Writes `rank,hex_id,line_id,I` with 1-based ranks.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e| Error::csv("writing cumulative importance", e);
        w.write_record(["rank", "hex_id", "line_id", "I"]).map_err(err)?;
        for (k, hex) in self.hex_order.iter().enumerate() {
            for (l, id) in self.line_ids.iter().enumerate() {
                w.write_record([(k + 1).to_string(), hex.to_string(), id.clone(), self.prefix[l][k].to_string()])
                    .map_err(err)?;
            }
        }
        w.flush().map_err(|e| Error::io("writing cumulative importance", e))
    }
}

pub fn cumulative_importance(
    matrix: &ImportanceMatrix,
    field: &AccessibilityField,
    grid: &HexGrid,
) -> Result<CumulativeImportance> {
    field.check_grid(grid)?;
    let same_ids = matrix.hex_ids.len() == field.scores.len() && matrix.hex_ids.iter().all(|id| field.scores.contains_key(id));
    if !same_ids {
        return Err(Error::invalid("importance matrix and accessibility field cover different hexagons"));
    }
    let mut order: Vec<usize> = (0..matrix.hex_ids.len()).collect();
    order.sort_by_key(|&p| (field.scores[&matrix.hex_ids[p]], matrix.hex_ids[p]));

    let mut prefix = vec![Vec::with_capacity(order.len()); matrix.line_ids.len()];
    let mut running = vec![0.0; matrix.line_ids.len()];
    for &p in &order {
        for &(l, m) in &matrix.rows[p] {
            running[l as usize] += m;
        }
        for (col, &v) in prefix.iter_mut().zip(&running) {
            col.push(v);
        }
    }
    let hex_order: Vec<u32> = order.iter().map(|&p| matrix.hex_ids[p]).collect();
    let populations = hex_order
        .iter()
        .map(|id| grid.hexagon(*id).map(|h| h.population).unwrap_or(0))
        .collect();
    Ok(CumulativeImportance {
        depart: matrix.depart,
        hex_order,
        populations,
        line_ids: matrix.line_ids.clone(),
        line_names: matrix.line_names.clone(),
        prefix,
    })
}

/// What the percentile counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PercentileWeighting {
    /// Share of hexagons.
    #[default]
    Hexagons,
    /// Share of residents.
    Population,
}

// Absorbs products like 0.65 * 20 = 13.000000000000002.
const RANK_EPSILON: f64 = 1e-9;

/// 1-based rank of the `percentile` hexagon among `n`: `ceil(percentile * n)`.
pub fn percentile_rank(n: usize, percentile: f64) -> Result<usize> {
    if n == 0 {
        return Err(Error::invalid("no hexagons to rank"));
    }
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(Error::invalid(format!("percentile must be in (0, 1], got {percentile}")));
    }
    Ok(((percentile * n as f64 - RANK_EPSILON).ceil() as usize).clamp(1, n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFastScore {
    pub line_id: String,
    pub line_name: String,
    /// Meters.
    pub e_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastEquityScores {
    pub depart: u32,
    pub percentile: f64,
    pub weighting: PercentileWeighting,
    /// 1-based rank in `hex_order` the scores are read at.
    pub rank: usize,
    pub hex_id: u32,
    /// In line-table order.
    pub lines: Vec<LineFastScore>,
}

impl FastEquityScores {
    /// Writes `line_id,line_name,e_score`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e| Error::csv("writing fast scores", e);
        w.write_record(["line_id", "line_name", "e_score"]).map_err(err)?;
        for l in &self.lines {
            w.write_record([l.line_id.as_str(), l.line_name.as_str(), &l.e_score.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("writing fast scores", e))
    }
}

pub fn fast_scores(
    cum: &CumulativeImportance,
    percentile: f64,
    weighting: PercentileWeighting,
) -> Result<FastEquityScores> {
    let rank = match weighting {
        PercentileWeighting::Hexagons => percentile_rank(cum.len(), percentile)?,
        PercentileWeighting::Population => {
            percentile_rank(cum.len(), percentile)?;
            let total: u64 = cum.populations.iter().sum();
            if total == 0 {
                return Err(Error::Degenerate("total population is zero".into()));
            }
            let target = percentile * total as f64 * (1.0 - 1e-12);
            let mut running = 0u64;
            cum.populations
                .iter()
                .position(|&p| {
                    running += p;
                    running as f64 >= target
                })
                .map_or(cum.len(), |k| k + 1)
        }
    };
    Ok(FastEquityScores {
        depart: cum.depart,
        percentile,
        weighting,
        rank,
        hex_id: cum.hex_order[rank - 1],
        lines: cum
            .line_ids
            .iter()
            .zip(&cum.line_names)
            .zip(&cum.prefix)
            .map(|((id, name), col)| LineFastScore {
                line_id: id.clone(),
                line_name: name.clone(),
                e_score: col[rank - 1],
            })
            .collect(),
    })
}
