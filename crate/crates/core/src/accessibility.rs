//! Accessibility per hexagon: the number of residents whose hexagon
//! barycenter can be reached from the origin barycenter within the time
//! budget, by walking, riding and walking again.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geodata::{great_circle_m, GeoPoint, HexGrid};
use crate::gtfs::Timetable;
use crate::router::{earliest_arrival, ArrivalState, Query, WalkModel};
use crate::Seconds;

/// Tag of the unmodified timetable in [`AccessibilityField::line_set_tag`].
pub const ALL_LINES: &str = "all";

/// Departure time and budget shared by every origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub depart: Seconds,
    pub horizon: Seconds,
}

impl Default for TimeWindow {
    fn default() -> Self {
        TimeWindow {
            depart: 28_800,
            horizon: 3_600,
        }
    }
}

impl TimeWindow {
    pub fn query(&self, origin: GeoPoint) -> Query {
        Query {
            origin,
            depart: self.depart,
            horizon: self.horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessibilityField {
    pub depart: Seconds,
    pub horizon: Seconds,
    pub line_set_tag: String,
    /// Persons reachable, by hexagon id.
    pub scores: BTreeMap<u32, u64>,
}

impl AccessibilityField {
    pub fn get(&self, hex_id: u32) -> Option<u64> {
        self.scores.get(&hex_id).copied()
    }

    /// Fails unless the field covers exactly the grid's hexagons.
    pub fn check_grid(&self, grid: &HexGrid) -> Result<()> {
        let same = self.scores.len() == grid.len() && grid.hexagons().iter().all(|h| self.scores.contains_key(&h.id));
        if same {
            Ok(())
        } else {
            Err(Error::invalid("accessibility field and grid have different hexagons"))
        }
    }

    /// Writes `hex_id,lat,lon,population,accessibility`.
    pub fn write_csv<W: Write>(&self, grid: &HexGrid, out: W) -> Result<()> {
        self.check_grid(grid)?;
        let mut w = csv::Writer::from_writer(out);
        let err = |e| Error::csv("writing accessibility", e);
        w.write_record(["hex_id", "lat", "lon", "population", "accessibility"]).map_err(err)?;
        for h in grid.hexagons() {
            w.write_record([
                h.id.to_string(),
                format!("{:.6}", h.center.lat),
                format!("{:.6}", h.center.lon),
                h.population.to_string(),
                self.scores[&h.id].to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("writing accessibility", e))
    }

    /// Reads what [`AccessibilityField::write_csv`] wrote; lines starting
    /// with `#` are skipped.
    pub fn read_csv(path: &Path, depart: Seconds, horizon: Seconds, tag: &str) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        #[derive(Deserialize)]
        struct Row {
            hex_id: u32,
            accessibility: u64,
        }
        let context = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::csv(&context, e))?;
        let mut scores = BTreeMap::new();
        for row in reader.deserialize::<Row>() {
            let row = row.map_err(|e| Error::csv(&context, e))?;
            scores.insert(row.hex_id, row.accessibility);
        }
        Ok(AccessibilityField {
            depart,
            horizon,
            line_set_tag: tag.to_string(),
            scores,
        })
    }
}

/// Walking links, precomputed once per grid, stop set and walk model.
#[derive(Debug)]
struct WalkIndex {
    /// Per hexagon position: `(stop, seconds)` sorted by stop.
    access: Vec<Vec<(u32, Seconds)>>,
    /// Per stop: `(hexagon position, seconds)` sorted by seconds.
    egress: Vec<Vec<(u32, Seconds)>>,
    /// Per hexagon position: positions reachable on foot within the horizon.
    on_foot: Vec<Vec<u32>>,
}

/// Buckets planar points into square cells of side `cell`.
struct Buckets {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<u32>>,
}

impl Buckets {
    fn new(points: &[(f64, f64)], cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            cells.entry(Self::key(cell, x, y)).or_default().push(i as u32);
        }
        Buckets { cell, cells }
    }

    fn key(cell: f64, x: f64, y: f64) -> (i64, i64) {
        ((x / cell).floor() as i64, (y / cell).floor() as i64)
    }

    /// Candidates in the 3x3 block of cells around `(x, y)`, ascending.
    fn near(&self, x: f64, y: f64) -> Vec<u32> {
        let (cx, cy) = Self::key(self.cell, x, y);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(v) = self.cells.get(&(cx + dx, cy + dy)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

// Slack on bucket size for the distortion of the local projection.
const BUCKET_SLACK: f64 = 1.02;

impl WalkIndex {
    fn build(grid: &HexGrid, tt: &Timetable, walk: &WalkModel, horizon: Seconds) -> Self {
        let proj = grid.projection();
        let hexes = grid.hexagons();
        let stops = tt.stops();
        let hex_xy: Vec<(f64, f64)> = hexes.iter().map(|h| proj.forward(h.center)).collect();

        let mut access: Vec<Vec<(u32, Seconds)>> = vec![Vec::new(); hexes.len()];
        match &walk.matrix {
            Some(matrix) => {
                for (pos, h) in hexes.iter().enumerate() {
                    access[pos] = matrix
                        .row(h.id)
                        .into_iter()
                        .filter(|&(s, t)| (s as usize) < stops.len() && t <= walk.max_access_s)
                        .collect();
                }
            }
            None => {
                let stop_xy: Vec<(f64, f64)> = stops.iter().map(|s| proj.forward(s.location)).collect();
                let buckets = Buckets::new(&stop_xy, walk.reach_m(walk.max_access_s) * BUCKET_SLACK + 1.0);
                for (pos, h) in hexes.iter().enumerate() {
                    let (x, y) = hex_xy[pos];
                    access[pos] = buckets
                        .near(x, y)
                        .into_iter()
                        .filter_map(|s| walk.access(h.id, h.center, s, stops[s as usize].location).map(|t| (s, t)))
                        .collect();
                }
            }
        }

        let mut egress: Vec<Vec<(u32, Seconds)>> = vec![Vec::new(); stops.len()];
        for (pos, row) in access.iter().enumerate() {
            for &(s, t) in row {
                egress[s as usize].push((pos as u32, t));
            }
        }
        for row in &mut egress {
            row.sort_unstable_by_key(|&(pos, t)| (t, pos));
        }

        let buckets = Buckets::new(&hex_xy, walk.reach_m(horizon) * BUCKET_SLACK + 1.0);
        let on_foot = hexes
            .iter()
            .enumerate()
            .map(|(pos, h)| {
                let (x, y) = hex_xy[pos];
                buckets
                    .near(x, y)
                    .into_iter()
                    .filter(|&o| walk.seconds(great_circle_m(h.center, hexes[o as usize].center)) <= horizon)
                    .collect()
            })
            .collect();

        WalkIndex { access, egress, on_foot }
    }
}

/// Everything needed to evaluate accessibility for one timetable variant.
/// Clones made with [`Scenario::with_timetable`] share the walk index, the
/// worker pool and the scan counter.
#[derive(Clone)]
pub struct Scenario {
    grid: Arc<HexGrid>,
    timetable: Arc<Timetable>,
    walk: WalkModel,
    window: TimeWindow,
    tag: String,
    index: Arc<WalkIndex>,
    pool: Option<Arc<rayon::ThreadPool>>,
    scans: Arc<AtomicU64>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("hexagons", &self.grid.len())
            .field("connections", &self.timetable.connections().len())
            .field("window", &self.window)
            .field("tag", &self.tag)
            .finish()
    }
}

impl Scenario {
    pub fn new(grid: Arc<HexGrid>, timetable: Arc<Timetable>, walk: WalkModel, window: TimeWindow) -> Result<Self> {
        walk.validate()?;
        if window.horizon == 0 || window.depart.checked_add(window.horizon).is_none() {
            return Err(Error::invalid("time window must have a positive horizon"));
        }
        let index = Arc::new(WalkIndex::build(&grid, &timetable, &walk, window.horizon));
        Ok(Scenario {
            grid,
            timetable,
            walk,
            window,
            tag: ALL_LINES.to_string(),
            index,
            pool: None,
            scans: Arc::new(AtomicU64::new(0)),
        })
    }

    /// Caps parallel loops at `threads` workers; `None` uses rayon's global
    /// pool.
    pub fn with_threads(mut self, threads: Option<usize>) -> Result<Self> {
        self.pool = match threads {
            None => None,
            Some(n) => Some(Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::Internal(format!("thread pool: {e}")))?,
            )),
        };
        Ok(self)
    }

    /// Same grid, walks and window over another timetable with the same
    /// stops, such as one with a line removed.
    pub fn with_timetable(&self, timetable: Arc<Timetable>, tag: impl Into<String>) -> Result<Self> {
        if timetable.stops() != self.timetable.stops() {
            return Err(Error::invalid("replacement timetable has a different stop set"));
        }
        Ok(Scenario {
            timetable,
            tag: tag.into(),
            ..self.clone()
        })
    }

    pub fn grid(&self) -> &HexGrid {
        &self.grid
    }

    pub fn timetable(&self) -> &Timetable {
        &self.timetable
    }

    pub fn walk(&self) -> &WalkModel {
        &self.walk
    }

    pub fn window(&self) -> TimeWindow {
        self.window
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    /// Scans run so far by this scenario and every clone of it.
    pub fn scan_count(&self) -> u64 {
        self.scans.load(Ordering::Relaxed)
    }

    pub fn reset_scan_count(&self) {
        self.scans.store(0, Ordering::Relaxed);
    }

    /// Runs `f` inside the scenario's worker pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    /// Earliest-arrival scan from the hexagon at position `pos` of
    /// [`HexGrid::hexagons`].
    pub fn scan(&self, pos: usize) -> ArrivalState {
        self.scans.fetch_add(1, Ordering::Relaxed);
        let q = self.window.query(self.grid.hexagons()[pos].center);
        earliest_arrival(&self.timetable, &q, &self.index.access[pos])
    }

    /// Positions of the hexagons reached from `pos`, ascending.
    pub fn reachable_from(&self, pos: usize, state: &ArrivalState) -> Vec<u32> {
        let mut hit = vec![false; self.grid.len()];
        self.mark_reached(pos, state, &mut hit);
        (0..hit.len() as u32).filter(|&p| hit[p as usize]).collect()
    }

    fn mark_reached(&self, pos: usize, state: &ArrivalState, hit: &mut [bool]) {
        hit[pos] = true;
        for &o in &self.index.on_foot[pos] {
            hit[o as usize] = true;
        }
        let deadline = state.query.deadline();
        for (stop, t) in state.reached_stops() {
            let budget = deadline - t;
            for &(h, w) in &self.index.egress[stop as usize] {
                if w > budget {
                    break;
                }
                hit[h as usize] = true;
            }
        }
    }

    /// Persons reached from `pos` given its scan.
    pub fn accessibility_from(&self, pos: usize, state: &ArrivalState) -> u64 {
        let mut hit = vec![false; self.grid.len()];
        self.mark_reached(pos, state, &mut hit);
        self.grid
            .hexagons()
            .iter()
            .zip(&hit)
            .filter(|(_, &h)| h)
            .map(|(h, _)| h.population)
            .sum()
    }

    pub fn accessibility_of(&self, hex_id: u32) -> Result<u64> {
        let pos = self
            .grid
            .position(hex_id)
            .ok_or_else(|| Error::invalid(format!("unknown hexagon {hex_id}")))?;
        Ok(self.accessibility_from(pos, &self.scan(pos)))
    }

    fn field_from(&self, values: Vec<u64>) -> AccessibilityField {
        AccessibilityField {
            depart: self.window.depart,
            horizon: self.window.horizon,
            line_set_tag: self.tag.clone(),
            scores: self.grid.hexagons().iter().map(|h| h.id).zip(values).collect(),
        }
    }

    /// One scan per hexagon, spread over the worker pool.
    pub fn field(&self) -> AccessibilityField {
        self.install(|| self.field_in_current_pool())
    }

    /// Like [`Scenario::field`] but assumes the caller already runs inside
    /// the intended pool.
    pub(crate) fn field_in_current_pool(&self) -> AccessibilityField {
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|pos| self.accessibility_from(pos, &self.scan(pos)))
            .collect();
        self.field_from(values)
    }

    /// Single-threaded evaluation, hexagon by hexagon.
    pub fn field_sequential(&self) -> AccessibilityField {
        let values = (0..self.grid.len())
            .map(|pos| self.accessibility_from(pos, &self.scan(pos)))
            .collect();
        self.field_from(values)
    }
}

/// Hexagons reached by a scan, by direct check of every (stop, hexagon)
/// pair. The origin is the hexagon containing the query origin.
pub fn reachable_hexes(grid: &HexGrid, tt: &Timetable, state: &ArrivalState, walk: &WalkModel) -> BTreeSet<u32> {
    let q = &state.query;
    let deadline = q.deadline();
    let mut out = BTreeSet::new();
    if let Some(id) = grid.locate(q.origin) {
        out.insert(id);
    }
    for h in grid.hexagons() {
        if walk.seconds(great_circle_m(q.origin, h.center)) <= q.horizon {
            out.insert(h.id);
            continue;
        }
        let by_transit = state.reached_stops().any(|(s, t)| {
            walk.access(h.id, h.center, s, tt.stops()[s as usize].location)
                .is_some_and(|w| t + w <= deadline)
        });
        if by_transit {
            out.insert(h.id);
        }
    }
    out
}

/// Builds a scenario and evaluates the whole field with the global pool.
pub fn accessibility_field(
    grid: Arc<HexGrid>,
    tt: Arc<Timetable>,
    walk: WalkModel,
    window: TimeWindow,
) -> Result<AccessibilityField> {
    Ok(Scenario::new(grid, tt, walk, window)?.field())
}

/// FeatureCollection with one polygon per hexagon carrying `hex_id` and
/// `population`, plus `accessibility` when a field is given.
pub fn grid_geojson(grid: &HexGrid, field: Option<&AccessibilityField>) -> Result<Value> {
    if let Some(f) = field {
        f.check_grid(grid)?;
    }
    let round = |v: f64| (v * 1e7).round() / 1e7;
    let features: Vec<Value> = grid
        .hexagons()
        .iter()
        .map(|h| {
            let ring: Vec<Value> = grid
                .ring(h)
                .iter()
                .map(|p| json!([round(p.lon), round(p.lat)]))
                .collect();
            let mut props = serde_json::Map::new();
            props.insert("hex_id".into(), json!(h.id));
            props.insert("population".into(), json!(h.population));
            if let Some(f) = field {
                props.insert("accessibility".into(), json!(f.scores[&h.id]));
            }
            json!({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": props,
            })
        })
        .collect();
    Ok(json!({"type": "FeatureCollection", "features": features}))
}
