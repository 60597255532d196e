//! On-disk pipeline. `ingest` turns a GTFS directory and a population file
//! into a workspace of plain JSON and CSV snapshots; later commands read
//! the workspace, compute, and write their results next to it. Every CSV
//! starts with a `# config_hash=...` line and every JSON output carries a
//! `config_hash` field.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::accessibility::{grid_geojson, AccessibilityField, Scenario, ALL_LINES};
use crate::config::RunConfig;
use crate::equity::{exact_scores, gini, lorenz, GiniScore};
use crate::error::{Error, Result};
use crate::geodata::{
    assign_population, bounding_box, build_grid, filter_low_density, read_population_csv, AssignmentReport, GeoPoint,
    HexGrid,
};
use crate::gtfs::synth::{synthesize_network, SynthManifest, SynthSpec};
use crate::gtfs::{
    build_timetable, parse_feed, Connection, Footpath, Line, LineMode, Stop, Timetable, TimetableStats, TripInstance,
};
use crate::importance::{cumulative_importance, fast_scores, importance_matrix};
use crate::router::WalkMatrix;
use crate::stats::{correlate, rank_lines, CorrelationReport};

pub const FORMAT_VERSION: u32 = 1;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.json";
pub const GRID: &str = "grid.json";
pub const STOPS: &str = "stops.csv";
pub const LINES: &str = "lines.csv";
pub const TRIPS: &str = "trips.csv";
pub const CONNECTIONS: &str = "connections.csv";
pub const FOOTPATHS: &str = "footpaths.csv";
pub const WALK_MATRIX: &str = "walk_matrix.csv";
pub const ACCESSIBILITY: &str = "accessibility.csv";
pub const GINI: &str = "gini.json";
pub const LORENZ: &str = "lorenz.csv";
pub const SCORES_EXACT: &str = "scores_exact.csv";
pub const SCORES_FAST: &str = "scores_fast.csv";
pub const CUMULATIVE: &str = "cumulative_importance.csv";
pub const CORRELATION: &str = "correlation.json";
pub const RANKING_EXACT: &str = "ranking_exact.csv";
pub const RANKING_FAST: &str = "ranking_fast.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceManifest {
    pub format: u32,
    pub config_hash: String,
    pub hexagons: usize,
    pub population: u64,
    /// Hexagons dropped by the density filter.
    pub sparse_hexagons: usize,
    pub assignment: AssignmentReport,
    pub timetable: TimetableStats,
    /// SHA-256 of every snapshot file.
    pub files: BTreeMap<String, String>,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::io(path.display().to_string(), e)
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_line(hash: &str) -> String {
    format!("# config_hash={hash}\n")
}

/// Writes `# config_hash=` followed by whatever `body` writes.
fn write_csv_file(path: &Path, hash: &str, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = hash_line(hash).into_bytes();
    body(&mut buf)?;
    fs::write(path, &buf).map_err(|e| io_err(path, e))?;
    Ok(buf)
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    text.push('\n');
    fs::write(path, &text).map_err(|e| io_err(path, e))?;
    Ok(text.into_bytes())
}

fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

fn csv_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let context = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::csv(&context, e))?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::csv(&context, e))
}

fn csv_body<T: Serialize>(rows: impl IntoIterator<Item = T>) -> impl FnOnce(&mut Vec<u8>) -> Result<()> {
    move |buf| {
        let mut w = csv::Writer::from_writer(buf);
        for row in rows {
            w.serialize(row).map_err(|e| Error::csv("writing workspace table", e))?;
        }
        w.flush().map_err(|e| Error::io("writing workspace table", e))
    }
}

#[derive(Serialize, Deserialize)]
struct StopRow {
    stop_id: String,
    name: String,
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct LineRow {
    line_id: String,
    mode: LineMode,
    name: String,
}

#[derive(Serialize, Deserialize)]
struct TripRow {
    trip_id: String,
    line: u32,
}

/// Fixed parameters of a persisted timetable.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TimetableMeta {
    min_transfer_s: u32,
    service_date: Option<chrono::NaiveDate>,
}

/// Runs ingestion: reads inputs named by `config`, builds the grid and the
/// timetable, and writes the workspace snapshot into `dir`.
pub fn cmd_ingest(config: &RunConfig, dir: &Path) -> Result<WorkspaceManifest> {
    config.validate()?;
    let gtfs_dir = config
        .gtfs_dir
        .as_deref()
        .ok_or_else(|| Error::invalid("config has no gtfs_dir"))?;
    let population_csv = config
        .population_csv
        .as_deref()
        .ok_or_else(|| Error::invalid("config has no population_csv"))?;
    let cells = read_population_csv(population_csv)?;
    if !gtfs_dir.is_dir() {
        return Err(Error::MissingInput(gtfs_dir.to_path_buf()));
    }
    let feed = parse_feed(gtfs_dir)?;
    let tt = build_timetable(&feed, &config.timetable_options())?;

    let (sw, ne) = match &config.bbox {
        Some(b) => b.corners()?,
        None => bounding_box(cells.iter().map(|c| c.location))
            .ok_or_else(|| Error::invalid(format!("{} has no cells", population_csv.display())))?,
    };
    let full = build_grid(sw, ne, config.side_m)?;
    let (populated, assignment) = assign_population(&full, &cells)?;
    let grid = filter_low_density(&populated, config.min_density)?;

    let matrix_bytes = match &config.walk_matrix {
        Some(path) => {
            WalkMatrix::read_csv(path, tt.stops())?;
            Some(fs::read(path).map_err(|e| io_err(path, e))?)
        }
        None => None,
    };

    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let hash = config.hash();
    let mut files = BTreeMap::new();
    let mut record = |name: &str, bytes: Vec<u8>| {
        files.insert(name.to_string(), sha256(&bytes));
    };

    record(CONFIG, write_json_file(&dir.join(CONFIG), config)?);
    record(GRID, write_json_file(&dir.join(GRID), &grid)?);
    record(
        STOPS,
        write_csv_file(
            &dir.join(STOPS),
            &hash,
            csv_body(tt.stops().iter().map(|s| StopRow {
                stop_id: s.id.clone(),
                name: s.name.clone(),
                lat: s.location.lat,
                lon: s.location.lon,
            })),
        )?,
    );
    record(
        LINES,
        write_csv_file(
            &dir.join(LINES),
            &hash,
            csv_body(tt.lines().iter().map(|l| LineRow {
                line_id: l.id.clone(),
                mode: l.mode,
                name: l.name.clone(),
            })),
        )?,
    );
    record(
        TRIPS,
        write_csv_file(
            &dir.join(TRIPS),
            &hash,
            csv_body(tt.trips().iter().map(|t| TripRow {
                trip_id: t.id.clone(),
                line: t.line,
            })),
        )?,
    );
    record(
        CONNECTIONS,
        write_csv_file(&dir.join(CONNECTIONS), &hash, csv_body(tt.connections().iter().copied()))?,
    );
    record(
        FOOTPATHS,
        write_csv_file(&dir.join(FOOTPATHS), &hash, csv_body(tt.footpaths().iter().copied()))?,
    );
    let meta = TimetableMeta {
        min_transfer_s: tt.min_transfer_s(),
        service_date: tt.service_date(),
    };
    record("timetable.json", write_json_file(&dir.join("timetable.json"), &meta)?);
    if let Some(bytes) = matrix_bytes {
        fs::write(dir.join(WALK_MATRIX), &bytes).map_err(|e| io_err(&dir.join(WALK_MATRIX), e))?;
        record(WALK_MATRIX, bytes);
    }

    let manifest = WorkspaceManifest {
        format: FORMAT_VERSION,
        config_hash: hash,
        hexagons: grid.len(),
        population: grid.total_population(),
        sparse_hexagons: populated.len() - grid.len(),
        assignment,
        timetable: tt.stats(),
        files,
    };
    write_json_file(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

/// A loaded workspace.
#[derive(Debug, Clone)]
pub struct Workspace {
    dir: PathBuf,
    manifest: WorkspaceManifest,
    config: RunConfig,
    grid: Arc<HexGrid>,
    timetable: Arc<Timetable>,
    walk_matrix: Option<Arc<WalkMatrix>>,
    threads: Option<usize>,
}

impl Workspace {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST);
        if !manifest_path.exists() {
            return Err(Error::State(format!(
                "{} is not a workspace (no {MANIFEST}); run `ingest` first",
                dir.display()
            )));
        }
        let manifest: WorkspaceManifest = read_json_file(&manifest_path)?;
        if manifest.format != FORMAT_VERSION {
            return Err(Error::State(format!(
                "workspace format {} is not supported (expected {FORMAT_VERSION})",
                manifest.format
            )));
        }
        let config: RunConfig = read_json_file(&dir.join(CONFIG))?;
        let grid: HexGrid = read_json_file(&dir.join(GRID))?;

        let stops: Vec<Stop> = csv_rows::<StopRow>(&dir.join(STOPS))?
            .into_iter()
            .map(|r| {
                Ok(Stop {
                    id: r.stop_id,
                    name: r.name,
                    location: GeoPoint::new(r.lat, r.lon)?,
                })
            })
            .collect::<Result<_>>()?;
        let lines: Vec<Line> = csv_rows::<LineRow>(&dir.join(LINES))?
            .into_iter()
            .map(|r| Line {
                id: r.line_id,
                mode: r.mode,
                name: r.name,
            })
            .collect();
        let trips: Vec<TripInstance> = csv_rows::<TripRow>(&dir.join(TRIPS))?
            .into_iter()
            .map(|r| TripInstance { id: r.trip_id, line: r.line })
            .collect();
        let connections: Vec<Connection> = csv_rows(&dir.join(CONNECTIONS))?;
        let footpaths: Vec<Footpath> = csv_rows(&dir.join(FOOTPATHS))?;
        let meta: TimetableMeta = read_json_file(&dir.join("timetable.json"))?;
        let timetable = Timetable::new(
            stops,
            lines,
            trips,
            connections,
            footpaths,
            meta.min_transfer_s,
            meta.service_date,
        )?;
        let walk_matrix = if config.walk_matrix.is_some() {
            Some(Arc::new(WalkMatrix::read_csv(&dir.join(WALK_MATRIX), timetable.stops())?))
        } else {
            None
        };
        Ok(Workspace {
            dir: dir.to_path_buf(),
            threads: config.threads,
            manifest,
            config,
            grid: Arc::new(grid),
            timetable: Arc::new(timetable),
            walk_matrix,
        })
    }

    /// Overrides the configured worker cap.
    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        if threads.is_some() {
            self.threads = threads;
        }
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn manifest(&self) -> &WorkspaceManifest {
        &self.manifest
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn config_hash(&self) -> &str {
        &self.manifest.config_hash
    }

    pub fn grid(&self) -> &Arc<HexGrid> {
        &self.grid
    }

    pub fn timetable(&self) -> &Arc<Timetable> {
        &self.timetable
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let mut walk = self.config.walk_model();
        walk.matrix = self.walk_matrix.clone();
        Scenario::new(self.grid.clone(), self.timetable.clone(), walk, self.config.window())?.with_threads(self.threads)
    }

    fn write_accessibility(&self, field: &AccessibilityField) -> Result<()> {
        write_csv_file(&self.path(ACCESSIBILITY), self.config_hash(), |buf| field.write_csv(&self.grid, buf))?;
        Ok(())
    }

    fn read_accessibility(&self) -> Result<AccessibilityField> {
        let path = self.path(ACCESSIBILITY);
        if !path.exists() {
            return Err(Error::State(format!(
                "{} not found; run `accessibility` or `score --method fast` first",
                path.display()
            )));
        }
        let field = AccessibilityField::read_csv(&path, self.config.depart_s, self.config.horizon_s, ALL_LINES)?;
        field.check_grid(&self.grid)?;
        Ok(field)
    }
}

/// Computes and writes `accessibility.csv`.
pub fn cmd_accessibility(ws: &Workspace) -> Result<AccessibilityField> {
    let field = ws.scenario()?.field();
    ws.write_accessibility(&field)?;
    Ok(field)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiniReport {
    pub config_hash: String,
    pub depart: u32,
    pub horizon: u32,
    pub gini: f64,
    pub hexagons: usize,
    pub population: u64,
}

/// Gini and Lorenz curve of the stored accessibility field.
pub fn cmd_gini(ws: &Workspace) -> Result<GiniReport> {
    let field = ws.read_accessibility()?;
    let g = gini(&field, &ws.grid)?;
    let curve = lorenz(&field, &ws.grid)?;
    write_csv_file(&ws.path(LORENZ), ws.config_hash(), |buf| curve.write_csv(buf))?;
    let report = GiniReport {
        config_hash: ws.config_hash().to_string(),
        depart: field.depart,
        horizon: field.horizon,
        gini: g.value,
        hexagons: ws.grid.len(),
        population: ws.grid.total_population(),
    };
    write_json_file(&ws.path(GINI), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Fast,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Fast => "fast",
        }
    }

    pub fn scores_file(self) -> &'static str {
        match self {
            Method::Exact => SCORES_EXACT,
            Method::Fast => SCORES_FAST,
        }
    }

    pub fn meta_file(self) -> String {
        format!("score_{}_meta.json", self.name())
    }
}

/// Timing and bookkeeping of one scoring run, written next to the scores so
/// the score CSV itself stays reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMeta {
    pub config_hash: String,
    pub method: Method,
    pub base_gini: f64,
    pub hexagons: usize,
    pub lines: usize,
    /// Earliest-arrival scans performed.
    pub scans: u64,
    pub wall_seconds: f64,
    pub threads: Option<usize>,
    /// Fast method only: percentile and the rank it maps to.
    pub percentile: Option<f64>,
    pub rank: Option<usize>,
}

/// Scores every line with the chosen method and writes the score CSV and
/// its metadata.
pub fn cmd_score(ws: &Workspace, method: Method) -> Result<ScoreMeta> {
    let scenario = ws.scenario()?;
    let hash = ws.config_hash().to_string();
    let started = Instant::now();
    let mut meta = ScoreMeta {
        config_hash: hash.clone(),
        method,
        base_gini: 0.0,
        hexagons: ws.grid.len(),
        lines: ws.timetable.lines().len(),
        scans: 0,
        wall_seconds: 0.0,
        threads: ws.threads,
        percentile: None,
        rank: None,
    };
    match method {
        Method::Exact => {
            let scores = exact_scores(&scenario)?;
            meta.wall_seconds = started.elapsed().as_secs_f64();
            meta.base_gini = scores.base.value;
            write_csv_file(&ws.path(SCORES_EXACT), &hash, |buf| scores.write_csv(buf))?;
        }
        Method::Fast => {
            let (field, matrix) = importance_matrix(&scenario)?;
            let base: GiniScore = gini(&field, &ws.grid)?;
            let cum = cumulative_importance(&matrix, &field, &ws.grid)?;
            let scores = fast_scores(&cum, ws.config.percentile, ws.config.percentile_weighting)?;
            meta.wall_seconds = started.elapsed().as_secs_f64();
            meta.base_gini = base.value;
            meta.percentile = Some(scores.percentile);
            meta.rank = Some(scores.rank);
            write_csv_file(&ws.path(SCORES_FAST), &hash, |buf| scores.write_csv(buf))?;
            write_csv_file(&ws.path(CUMULATIVE), &hash, |buf| cum.write_csv(buf))?;
            ws.write_accessibility(&field)?;
        }
    }
    meta.scans = scenario.scan_count();
    write_json_file(&ws.path(&method.meta_file()), &meta)?;
    Ok(meta)
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    line_id: String,
    #[serde(alias = "delta_g", alias = "e_score")]
    value: f64,
}

/// Line scores from a score CSV, in file order.
pub fn read_scores(path: &Path) -> Result<Vec<(String, f64)>> {
    Ok(csv_rows::<ScoreRow>(path)?.into_iter().map(|r| (r.line_id, r.value)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationOutput {
    pub config_hash: String,
    #[serde(flatten)]
    pub report: CorrelationReport,
    pub exact_ranking: Vec<(String, f64)>,
    pub fast_ranking: Vec<(String, f64)>,
}

/// Pearson correlation between the exact and fast scores of the lines
/// present in both files.
pub fn cmd_correlate(ws: &Workspace) -> Result<CorrelationOutput> {
    let load = |m: Method| {
        let path = ws.path(m.scores_file());
        if !path.exists() {
            return Err(Error::State(format!(
                "{} not found; run `score --method {}` first",
                path.display(),
                m.name()
            )));
        }
        read_scores(&path)
    };
    let exact = load(Method::Exact)?;
    let fast: HashMap<String, f64> = load(Method::Fast)?.into_iter().collect();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut common = Vec::new();
    for (id, dg) in &exact {
        if let Some(&e) = fast.get(id) {
            xs.push(*dg);
            ys.push(e);
            common.push(id.clone());
        }
    }
    if xs.len() < 3 {
        return Err(Error::Degenerate(format!(
            "only {} lines appear in both score files; at least 3 are needed",
            xs.len()
        )));
    }
    let report = correlate(&xs, &ys)?;
    let exact_ranking = rank_lines(common.iter().cloned().zip(xs.iter().copied()));
    let fast_ranking = rank_lines(common.iter().cloned().zip(ys.iter().copied()));
    let hash = ws.config_hash();
    for (name, ranking) in [(RANKING_EXACT, &exact_ranking), (RANKING_FAST, &fast_ranking)] {
        let rows = ranking.iter().enumerate().map(|(i, (id, v))| (i + 1, id.as_str(), *v));
        write_csv_file(&ws.path(name), hash, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            let err = |e| Error::csv("writing ranking", e);
            w.write_record(["rank", "line_id", "value"]).map_err(err)?;
            for (rank, id, v) in rows {
                w.write_record([rank.to_string(), id.to_string(), v.to_string()]).map_err(err)?;
            }
            w.flush().map_err(|e| Error::io("writing ranking", e))
        })?;
    }
    let out = CorrelationOutput {
        config_hash: hash.to_string(),
        report,
        exact_ranking,
        fast_ranking,
    };
    write_json_file(&ws.path(CORRELATION), &out)?;
    Ok(out)
}

/// Generates a synthetic city into `out`: `gtfs/`, `population.csv`,
/// `synth.json`.
pub fn cmd_synth(spec: &SynthSpec, seed: u64, out: &Path) -> Result<SynthManifest> {
    let city = synthesize_network(spec, seed)?;
    city.write(out)?;
    Ok(city.manifest)
}

/// Reads a synthetic city spec from JSON; absent keys take defaults.
pub fn load_synth_spec(path: &Path) -> Result<SynthSpec> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    read_json_file(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Grid,
    Accessibility,
    Lorenz,
}

/// Writes `grid.geojson`, `accessibility.geojson` or `lorenz.csv` and
/// returns its path.
pub fn cmd_export_geojson(ws: &Workspace, layer: Layer) -> Result<PathBuf> {
    match layer {
        Layer::Grid => {
            let path = ws.path("grid.geojson");
            write_geojson(&path, ws.config_hash(), grid_geojson(&ws.grid, None)?)?;
            Ok(path)
        }
        Layer::Accessibility => {
            let field = ws.read_accessibility()?;
            let path = ws.path("accessibility.geojson");
            write_geojson(&path, ws.config_hash(), grid_geojson(&ws.grid, Some(&field))?)?;
            Ok(path)
        }
        Layer::Lorenz => {
            let field = ws.read_accessibility()?;
            let curve = lorenz(&field, &ws.grid)?;
            let path = ws.path(LORENZ);
            write_csv_file(&path, ws.config_hash(), |buf| curve.write_csv(buf))?;
            Ok(path)
        }
    }
}

fn write_geojson(path: &Path, hash: &str, mut value: serde_json::Value) -> Result<()> {
    value["config_hash"] = serde_json::Value::String(hash.to_string());
    let mut text = serde_json::to_string(&value).map_err(|e| Error::json(path.display().to_string(), e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gtfs::synth::SynthSpec;

    fn small_spec() -> SynthSpec {
        SynthSpec {
            radius_m: 5_000.0,
            radial_lines: 4,
            circulator_lines: 2,
            rings: 2,
            ..SynthSpec::default()
        }
    }

    fn ingested(tmp: &Path) -> (RunConfig, PathBuf) {
        cmd_synth(&small_spec(), 1, &tmp.join("city")).unwrap();
        let config = RunConfig {
            gtfs_dir: Some(tmp.join("city/gtfs")),
            population_csv: Some(tmp.join("city/population.csv")),
            ..RunConfig::default()
        };
        let ws = tmp.join("ws");
        cmd_ingest(&config, &ws).unwrap();
        (config, ws)
    }

    #[test]
    fn ingest_round_trips_the_timetable() {
        let tmp = tempfile::tempdir().unwrap();
        let (config, dir) = ingested(tmp.path());
        let ws = Workspace::open(&dir).unwrap();
        let direct = build_timetable(
            &parse_feed(config.gtfs_dir.as_deref().unwrap()).unwrap(),
            &config.timetable_options(),
        )
        .unwrap();
        assert_eq!(ws.timetable().connections(), direct.connections());
        assert_eq!(ws.timetable().footpaths(), direct.footpaths());
        assert_eq!(ws.timetable().stops(), direct.stops());
        assert_eq!(ws.manifest().hexagons, ws.grid().len());
        assert!(ws.manifest().timetable.connections > 0);

        let first = fs::read(dir.join(MANIFEST)).unwrap();
        cmd_ingest(&config, &dir).unwrap();
        assert_eq!(sha256(&first), sha256(&fs::read(dir.join(MANIFEST)).unwrap()));
    }

    #[test]
    fn missing_inputs_and_state_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let config = RunConfig {
            gtfs_dir: Some(tmp.path().join("gtfs")),
            population_csv: Some(tmp.path().join("nope.csv")),
            ..RunConfig::default()
        };
        let err = cmd_ingest(&config, &tmp.path().join("ws")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("nope.csv"));

        assert_eq!(Workspace::open(tmp.path()).unwrap_err().exit_code(), 3);

        let (_, dir) = ingested(tmp.path());
        let ws = Workspace::open(&dir).unwrap();
        assert_eq!(cmd_gini(&ws).unwrap_err().exit_code(), 3);
        assert_eq!(cmd_correlate(&ws).unwrap_err().exit_code(), 3);
        assert_eq!(cmd_export_geojson(&ws, Layer::Accessibility).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn outputs_carry_the_config_hash() {
        let tmp = tempfile::tempdir().unwrap();
        let (config, dir) = ingested(tmp.path());
        let ws = Workspace::open(&dir).unwrap();
        cmd_accessibility(&ws).unwrap();
        let g = cmd_gini(&ws).unwrap();
        assert!(g.gini > 0.0 && g.gini < 1.0);
        let line = hash_line(&config.hash());
        for f in [ACCESSIBILITY, LORENZ, STOPS, CONNECTIONS] {
            assert!(fs::read_to_string(dir.join(f)).unwrap().starts_with(&line), "{f}");
        }
        let path = cmd_export_geojson(&ws, Layer::Grid).unwrap();
        let gj: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(gj["config_hash"], serde_json::json!(config.hash()));
    }
}
