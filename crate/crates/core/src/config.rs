//! Run configuration shared by every pipeline command.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::accessibility::TimeWindow;
use crate::error::{Error, Result};
use crate::geodata::GeoPoint;
use crate::gtfs::{FootpathParams, LineGrouping, TimetableOptions};
use crate::importance::PercentileWeighting;
use crate::router::WalkModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

impl BBox {
    pub fn corners(&self) -> Result<(GeoPoint, GeoPoint)> {
        Ok((GeoPoint::new(self.south, self.west)?, GeoPoint::new(self.north, self.east)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gtfs_dir: Option<PathBuf>,
    pub population_csv: Option<PathBuf>,
    /// Defaults to the extent of the population cells.
    pub bbox: Option<BBox>,
    pub side_m: f64,
    /// Persons per km² below which a hexagon is dropped.
    pub min_density: f64,
    pub depart_s: u32,
    pub horizon_s: u32,
    pub walk_speed_mps: f64,
    pub walk_detour: f64,
    pub max_access_s: u32,
    /// Optional `hex_id,stop_id,seconds` file replacing straight-line
    /// access walks.
    pub walk_matrix: Option<PathBuf>,
    pub footpath_radius_m: f64,
    pub min_transfer_s: u32,
    pub percentile: f64,
    pub percentile_weighting: PercentileWeighting,
    pub line_grouping: LineGrouping,
    pub service_date: Option<NaiveDate>,
    /// Worker cap. Not part of the config hash: results do not depend on it.
    pub threads: Option<usize>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gtfs_dir: None,
            population_csv: None,
            bbox: None,
            side_m: 1000.0,
            min_density: 100.0,
            depart_s: 28_800,
            horizon_s: 3_600,
            walk_speed_mps: 1.39,
            walk_detour: 1.3,
            max_access_s: 1_200,
            walk_matrix: None,
            footpath_radius_m: 500.0,
            min_transfer_s: 60,
            percentile: 0.65,
            percentile_weighting: PercentileWeighting::Hexagons,
            line_grouping: LineGrouping::RouteId,
            service_date: None,
            threads: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(path.to_path_buf())
            } else {
                Error::io(format!("reading {}", path.display()), e)
            }
        })?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::invalid(msg));
        if !(self.side_m > 0.0 && self.side_m.is_finite()) {
            return fail(format!("side_m must be positive, got {}", self.side_m));
        }
        if !(self.min_density >= 0.0) {
            return fail(format!("min_density must be non-negative, got {}", self.min_density));
        }
        if self.horizon_s == 0 || self.depart_s.checked_add(self.horizon_s).is_none() {
            return fail("horizon_s must be positive".into());
        }
        if !(self.walk_speed_mps > 0.0 && self.walk_speed_mps.is_finite()) {
            return fail("walk_speed_mps must be positive".into());
        }
        if !(self.walk_detour >= 1.0 && self.walk_detour.is_finite()) {
            return fail("walk_detour must be at least 1".into());
        }
        if !(self.footpath_radius_m >= 0.0) {
            return fail("footpath_radius_m must be non-negative".into());
        }
        if !(self.percentile > 0.0 && self.percentile <= 1.0) {
            return fail(format!("percentile must be in (0, 1], got {}", self.percentile));
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        if let Some(b) = &self.bbox {
            b.corners()?;
            if !(b.north > b.south && b.east > b.west) {
                return fail("bbox must have north > south and east > west".into());
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of every field except `threads`.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("threads");
        }
        let canonical = serde_json::to_string(&value).expect("json value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn window(&self) -> TimeWindow {
        TimeWindow {
            depart: self.depart_s,
            horizon: self.horizon_s,
        }
    }

    /// Walk model without the matrix, which needs the stop table to load.
    pub fn walk_model(&self) -> WalkModel {
        WalkModel {
            speed_mps: self.walk_speed_mps,
            detour: self.walk_detour,
            max_access_s: self.max_access_s,
            matrix: None,
        }
    }

    pub fn timetable_options(&self) -> TimetableOptions {
        TimetableOptions {
            service_date: self.service_date,
            line_grouping: self.line_grouping,
            footpaths: FootpathParams {
                radius_m: self.footpath_radius_m,
                walk_speed_mps: self.walk_speed_mps,
                detour: self.walk_detour,
                min_transfer_s: self.min_transfer_s,
            },
        }
    }
}
