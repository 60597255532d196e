//! GTFS ingestion: feed parsing, expansion of one service day into a sorted
//! connection timetable, walking transfers between nearby stops, line
//! removal, and a synthetic city generator for desk-scale experiments.

mod feed;
mod footpaths;
pub mod synth;
mod timetable;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodata::GeoPoint;

pub use feed::{parse_feed, parse_time, write_feed, format_time};
pub use footpaths::{build_footpaths, FootpathParams};
pub use timetable::{
    build_timetable, default_service_date, Connection, Footpath, LineGrouping, Timetable,
    TimetableOptions, TimetableStats, TripInstance,
};

#[derive(Debug, Error)]
pub enum GtfsError {
    #[error("missing required GTFS file `{file}` in {}", dir.display())]
    MissingFile { file: String, dir: PathBuf },

    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: u64,
        message: String,
    },

    #[error("{file}:{line}: unknown {kind} `{id}`")]
    UnknownReference {
        file: String,
        line: u64,
        kind: &'static str,
        id: String,
    },

    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub id: String,
    pub name: String,
    pub location: GeoPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineMode {
    Tram,
    Metro,
    Rail,
    Bus,
    Ferry,
    Other,
}

impl LineMode {
    /// Maps basic and extended GTFS `route_type` values.
    pub fn from_route_type(route_type: u16) -> Self {
        match route_type {
            0 | 900..=999 => LineMode::Tram,
            1 | 400..=499 => LineMode::Metro,
            2 | 100..=199 => LineMode::Rail,
            3 | 11 | 200..=299 | 700..=799 => LineMode::Bus,
            4 | 1000..=1099 | 1200 => LineMode::Ferry,
            _ => LineMode::Other,
        }
    }

    pub fn route_type(self) -> u16 {
        match self {
            LineMode::Tram => 0,
            LineMode::Metro => 1,
            LineMode::Rail => 2,
            LineMode::Bus => 3,
            LineMode::Ferry => 4,
            LineMode::Other => 7,
        }
    }
}

/// A transit line: the unit that equity scores are attached to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub mode: LineMode,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub id: String,
    pub short_name: String,
    pub long_name: String,
    pub route_type: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub id: String,
    pub route_id: String,
    pub service_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopTime {
    pub trip_id: String,
    pub arrival: Option<u32>,
    pub departure: Option<u32>,
    pub stop_id: String,
    pub stop_sequence: u32,
    pub shape_dist_traveled: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calendar {
    pub service_id: String,
    /// Monday first.
    pub weekdays: [bool; 7],
    pub start_date: chrono::NaiveDate,
    pub end_date: chrono::NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ServiceException {
    Added,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalendarDate {
    pub service_id: String,
    pub date: chrono::NaiveDate,
    pub exception: ServiceException,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub from_stop_id: String,
    pub to_stop_id: String,
    pub transfer_type: u8,
    pub min_transfer_time: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub trip_id: String,
    pub start_time: u32,
    pub end_time: u32,
    pub headway_s: u32,
    pub exact_times: bool,
}

/// In-memory GTFS feed restricted to the files the engine uses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Feed {
    pub stops: Vec<Stop>,
    pub routes: Vec<Route>,
    pub trips: Vec<Trip>,
    pub stop_times: Vec<StopTime>,
    pub calendars: Vec<Calendar>,
    pub calendar_dates: Vec<CalendarDate>,
    pub transfers: Vec<Transfer>,
    pub frequencies: Vec<Frequency>,
}
