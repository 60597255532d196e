use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::{build_footpaths, Feed, FootpathParams, Line, LineMode, ServiceException, Stop, StopTime};
use crate::geodata::great_circle_m;
use crate::{Error, Result};

/// One vehicle movement between two consecutive stops of a trip.
/// Stop, trip and line fields are indices into the owning [`Timetable`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub from: u32,
    pub to: u32,
    pub dep: u32,
    pub arr: u32,
    pub trip: u32,
    pub line: u32,
    /// Position of the hop within its trip.
    pub hop: u32,
    pub length_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footpath {
    pub from: u32,
    pub to: u32,
    pub duration_s: u32,
}

/// A dated vehicle run. Frequency-based trips expand into several instances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripInstance {
    pub id: String,
    pub line: u32,
}

/// How GTFS routes are grouped into lines.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineGrouping {
    #[default]
    RouteId,
    /// Routes sharing a `route_short_name` form one line.
    ShortName,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimetableOptions {
    /// Defaults to the first Wednesday with active service.
    pub service_date: Option<NaiveDate>,
    pub line_grouping: LineGrouping,
    pub footpaths: FootpathParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimetableStats {
    pub service_date: Option<NaiveDate>,
    pub stops: usize,
    pub lines: usize,
    pub active_trips: usize,
    pub trip_instances: usize,
    pub connections: usize,
    pub footpaths: usize,
    pub dropped_trips: usize,
    pub warnings: Vec<String>,
}

/// Connections of one service day sorted by departure, with the stop,
/// line and trip tables they index into and the footpath graph.
#[derive(Debug, Clone)]
pub struct Timetable {
    stops: Arc<[Stop]>,
    lines: Arc<[Line]>,
    trips: Arc<[TripInstance]>,
    footpaths: Arc<[Footpath]>,
    footpath_offsets: Arc<[u32]>,
    stop_index: Arc<HashMap<String, u32>>,
    line_index: Arc<HashMap<String, u32>>,
    connections: Vec<Connection>,
    trip_offsets: Vec<u32>,
    trip_connections: Vec<u32>,
    /// Position of each connection within its trip's riding order.
    trip_position: Vec<u32>,
    min_transfer_s: u32,
    service_date: Option<NaiveDate>,
    build: Arc<BuildReport>,
}

#[derive(Debug, Clone, Default)]
struct BuildReport {
    active_trips: usize,
    dropped_trips: usize,
    warnings: Vec<String>,
}

impl Timetable {
    /// Validates and indexes the parts; connections are sorted by
    /// `(dep, arr, trip, hop)` and footpaths by `(from, to)`.
    pub fn new(
        stops: Vec<Stop>,
        lines: Vec<Line>,
        trips: Vec<TripInstance>,
        connections: Vec<Connection>,
        mut footpaths: Vec<Footpath>,
        min_transfer_s: u32,
        service_date: Option<NaiveDate>,
    ) -> Result<Self> {
        let n_stops = stops.len() as u32;
        let mut stop_index = HashMap::with_capacity(stops.len());
        for (i, s) in stops.iter().enumerate() {
            if stop_index.insert(s.id.clone(), i as u32).is_some() {
                return Err(Error::invalid(format!("duplicate stop id `{}`", s.id)));
            }
        }
        let mut line_index = HashMap::with_capacity(lines.len());
        for (i, l) in lines.iter().enumerate() {
            if line_index.insert(l.id.clone(), i as u32).is_some() {
                return Err(Error::invalid(format!("duplicate line id `{}`", l.id)));
            }
        }
        if let Some(t) = trips.iter().find(|t| t.line as usize >= lines.len()) {
            return Err(Error::invalid(format!("trip `{}` references unknown line", t.id)));
        }
        for f in &footpaths {
            if f.from >= n_stops || f.to >= n_stops || f.from == f.to {
                return Err(Error::invalid(format!("invalid footpath {} -> {}", f.from, f.to)));
            }
        }
        footpaths.sort_by_key(|f| (f.from, f.to));
        let mut footpath_offsets = vec![0u32; stops.len() + 1];
        for f in &footpaths {
            footpath_offsets[f.from as usize + 1] += 1;
        }
        for i in 0..stops.len() {
            footpath_offsets[i + 1] += footpath_offsets[i];
        }

        Timetable {
            stops: stops.into(),
            lines: lines.into(),
            trips: trips.into(),
            footpaths: footpaths.into(),
            footpath_offsets: footpath_offsets.into(),
            stop_index: Arc::new(stop_index),
            line_index: Arc::new(line_index),
            connections: Vec::new(),
            trip_offsets: Vec::new(),
            trip_connections: Vec::new(),
            trip_position: Vec::new(),
            min_transfer_s,
            service_date,
            build: Arc::default(),
        }
        .with_connections(connections)
    }

    /// Same stops, lines, trips and footpaths with a new connection set.
    fn with_connections(&self, mut connections: Vec<Connection>) -> Result<Self> {
        let n_stops = self.stops.len() as u32;
        for c in &connections {
            if c.from >= n_stops || c.to >= n_stops || c.from == c.to {
                return Err(Error::invalid(format!("connection with invalid stops {} -> {}", c.from, c.to)));
            }
            if c.arr < c.dep {
                return Err(Error::invalid(format!("connection arrives before it departs ({} < {})", c.arr, c.dep)));
            }
            if !(c.length_m >= 0.0) || !c.length_m.is_finite() {
                return Err(Error::invalid(format!("connection length {} is not a non-negative number", c.length_m)));
            }
            match self.trips.get(c.trip as usize) {
                Some(t) if t.line == c.line => {}
                _ => return Err(Error::invalid(format!("connection trip {} / line {} mismatch", c.trip, c.line))),
            }
        }
        connections.sort_by_key(|c| (c.dep, c.arr, c.trip, c.hop, c.from, c.to));

        let mut trip_offsets = vec![0u32; self.trips.len() + 1];
        for c in &connections {
            trip_offsets[c.trip as usize + 1] += 1;
        }
        for i in 0..self.trips.len() {
            trip_offsets[i + 1] += trip_offsets[i];
        }
        let mut fill = trip_offsets.clone();
        let mut trip_connections = vec![0u32; connections.len()];
        let mut trip_position = vec![0u32; connections.len()];
        for (idx, c) in connections.iter().enumerate() {
            let slot = &mut fill[c.trip as usize];
            trip_connections[*slot as usize] = idx as u32;
            trip_position[idx] = *slot - trip_offsets[c.trip as usize];
            *slot += 1;
        }
        for t in 0..self.trips.len() {
            let hops = &trip_connections[trip_offsets[t] as usize..trip_offsets[t + 1] as usize];
            for w in hops.windows(2) {
                let (a, b) = (&connections[w[0] as usize], &connections[w[1] as usize]);
                if a.to != b.from || a.arr > b.dep || a.hop >= b.hop {
                    return Err(Error::invalid(format!(
                        "trip `{}` is not a continuous sequence of hops",
                        self.trips[t].id
                    )));
                }
            }
        }

        Ok(Timetable {
            stops: self.stops.clone(),
            lines: self.lines.clone(),
            trips: self.trips.clone(),
            footpaths: self.footpaths.clone(),
            footpath_offsets: self.footpath_offsets.clone(),
            stop_index: self.stop_index.clone(),
            line_index: self.line_index.clone(),
            connections,
            trip_offsets,
            trip_connections,
            trip_position,
            min_transfer_s: self.min_transfer_s,
            service_date: self.service_date,
            build: self.build.clone(),
        })
    }

    pub fn stops(&self) -> &[Stop] {
        &self.stops
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn trips(&self) -> &[TripInstance] {
        &self.trips
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn footpaths(&self) -> &[Footpath] {
        &self.footpaths
    }

    pub fn footpaths_from(&self, stop: u32) -> &[Footpath] {
        let lo = self.footpath_offsets[stop as usize] as usize;
        let hi = self.footpath_offsets[stop as usize + 1] as usize;
        &self.footpaths[lo..hi]
    }

    /// Connection indices of a trip, in riding order.
    pub fn trip_connections(&self, trip: u32) -> &[u32] {
        let lo = self.trip_offsets[trip as usize] as usize;
        let hi = self.trip_offsets[trip as usize + 1] as usize;
        &self.trip_connections[lo..hi]
    }

    /// Position of connection `idx` within [`Timetable::trip_connections`].
    pub fn trip_position(&self, idx: u32) -> u32 {
        self.trip_position[idx as usize]
    }

    pub fn stop_index(&self, id: &str) -> Option<u32> {
        self.stop_index.get(id).copied()
    }

    pub fn line_index(&self, id: &str) -> Option<u32> {
        self.line_index.get(id).copied()
    }

    pub fn min_transfer_s(&self) -> u32 {
        self.min_transfer_s
    }

    pub fn service_date(&self) -> Option<NaiveDate> {
        self.service_date
    }

    /// Index of the first connection departing at or after `t`.
    pub fn first_departing_at(&self, t: u32) -> usize {
        self.connections.partition_point(|c| c.dep < t)
    }

    /// Counts of the current timetable plus what was dropped while
    /// expanding the feed.
    pub fn stats(&self) -> TimetableStats {
        TimetableStats {
            service_date: self.service_date,
            stops: self.stops.len(),
            lines: self.lines.len(),
            active_trips: self.build.active_trips,
            trip_instances: self.trips.len(),
            connections: self.connections.len(),
            footpaths: self.footpaths.len(),
            dropped_trips: self.build.dropped_trips,
            warnings: self.build.warnings.clone(),
        }
    }

    pub fn connection_count_by_line(&self) -> Vec<usize> {
        let mut counts = vec![0; self.lines.len()];
        for c in &self.connections {
            counts[c.line as usize] += 1;
        }
        counts
    }

    /// Timetable without the connections of line `line_id`. Everything else,
    /// including the line table itself, is kept.
    pub fn remove_line(&self, line_id: &str) -> Result<Timetable> {
        let line = self
            .line_index(line_id)
            .ok_or_else(|| Error::invalid(format!("unknown line `{line_id}`")))?;
        self.without_lines(&[line])
    }

    /// Timetable without the connections of the given line indices.
    pub fn without_lines(&self, lines: &[u32]) -> Result<Timetable> {
        if let Some(bad) = lines.iter().find(|&&l| l as usize >= self.lines.len()) {
            return Err(Error::invalid(format!("unknown line index {bad}")));
        }
        let removed: HashSet<u32> = lines.iter().copied().collect();
        let kept = self
            .connections
            .iter()
            .filter(|c| !removed.contains(&c.line))
            .copied()
            .collect();
        self.with_connections(kept)
    }
}

fn active_services(feed: &Feed, date: NaiveDate) -> HashSet<&str> {
    let weekday = date.weekday().num_days_from_monday() as usize;
    let mut active: HashSet<&str> = feed
        .calendars
        .iter()
        .filter(|c| c.start_date <= date && date <= c.end_date && c.weekdays[weekday])
        .map(|c| c.service_id.as_str())
        .collect();
    for cd in feed.calendar_dates.iter().filter(|cd| cd.date == date) {
        match cd.exception {
            ServiceException::Added => {
                active.insert(cd.service_id.as_str());
            }
            ServiceException::Removed => {
                active.remove(cd.service_id.as_str());
            }
        }
    }
    active
}

/// First Wednesday covered by the feed's calendars on which at least one
/// service runs.
pub fn default_service_date(feed: &Feed) -> Option<NaiveDate> {
    let starts = feed
        .calendars
        .iter()
        .map(|c| c.start_date)
        .chain(feed.calendar_dates.iter().map(|c| c.date));
    let ends = feed
        .calendars
        .iter()
        .map(|c| c.end_date)
        .chain(feed.calendar_dates.iter().map(|c| c.date));
    let (first, last) = (starts.min()?, ends.max()?);
    let to_wednesday = (Weekday::Wed.num_days_from_monday() + 7 - first.weekday().num_days_from_monday()) % 7;
    let mut day = first + Duration::days(i64::from(to_wednesday));
    while day <= last {
        if !active_services(feed, day).is_empty() {
            return Some(day);
        }
        day += Duration::days(7);
    }
    None
}

/// Fills missing arrival/departure values. Stops without any time are
/// interpolated linearly (by stop count) between the surrounding timed
/// stops. Returns `None` when the first or last stop is untimed.
fn resolve_times(stop_times: &[&StopTime]) -> Option<Vec<(u32, u32)>> {
    let partial: Vec<Option<(u32, u32)>> = stop_times
        .iter()
        .map(|st| match (st.arrival, st.departure) {
            (Some(a), Some(d)) => Some((a, d)),
            (Some(a), None) => Some((a, a)),
            (None, Some(d)) => Some((d, d)),
            (None, None) => None,
        })
        .collect();
    partial.first()?.as_ref()?;
    partial.last()?.as_ref()?;
    let mut out = Vec::with_capacity(partial.len());
    let mut prev = 0usize;
    for (i, times) in partial.iter().enumerate() {
        match times {
            Some(t) => {
                out.push(*t);
                prev = i;
            }
            None => {
                let next = (i..partial.len()).find(|&j| partial[j].is_some())?;
                let (_, from) = partial[prev]?;
                let (to, _) = partial[next]?;
                let frac = (i - prev) as f64 / (next - prev) as f64;
                let t = from as f64 + frac * (f64::from(to) - f64::from(from));
                let t = t.round() as u32;
                out.push((t, t));
            }
        }
    }
    Some(out)
}

/// Hop length: `shape_dist_traveled` delta when it is present, non-negative
/// and within [0.5x, 3x] of the straight-line distance, else straight line.
fn hop_length(a: &StopTime, b: &StopTime, straight: f64) -> f64 {
    if let (Some(da), Some(db)) = (a.shape_dist_traveled, b.shape_dist_traveled) {
        let delta = db - da;
        if delta >= 0.0 && delta.is_finite() {
            if straight == 0.0 {
                if delta == 0.0 {
                    return 0.0;
                }
            } else if delta >= 0.5 * straight && delta <= 3.0 * straight {
                return delta;
            }
        }
    }
    straight
}

/// Expands the trips active on the service date into a connection
/// timetable and computes footpaths.
pub fn build_timetable(feed: &Feed, options: &TimetableOptions) -> Result<Timetable> {
    let mut warnings = Vec::new();
    let service_date = options.service_date.or_else(|| default_service_date(feed));
    let active = match service_date {
        Some(date) => active_services(feed, date),
        None => HashSet::new(),
    };
    if active.is_empty() {
        warnings.push(match service_date {
            Some(date) => format!("no active service on {date}; timetable is empty"),
            None => "feed calendars cover no service day; timetable is empty".to_string(),
        });
    }

    // Lines, in first-appearance order of their routes.
    let mut lines: Vec<Line> = Vec::new();
    let mut line_of_route: HashMap<&str, u32> = HashMap::new();
    let mut line_by_key: HashMap<String, u32> = HashMap::new();
    for r in &feed.routes {
        let name = if r.short_name.is_empty() {
            r.long_name.clone()
        } else {
            r.short_name.clone()
        };
        let key = match options.line_grouping {
            LineGrouping::RouteId => r.id.clone(),
            LineGrouping::ShortName if !r.short_name.is_empty() => r.short_name.clone(),
            LineGrouping::ShortName => r.id.clone(),
        };
        let idx = *line_by_key.entry(key.clone()).or_insert_with(|| {
            lines.push(Line {
                id: key,
                mode: LineMode::from_route_type(r.route_type),
                name,
            });
            (lines.len() - 1) as u32
        });
        line_of_route.insert(r.id.as_str(), idx);
    }

    let stop_index: HashMap<&str, u32> = feed
        .stops
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i as u32))
        .collect();

    let mut by_trip: HashMap<&str, Vec<&StopTime>> = HashMap::new();
    for st in &feed.stop_times {
        by_trip.entry(st.trip_id.as_str()).or_default().push(st);
    }
    let mut frequencies: HashMap<&str, Vec<&super::Frequency>> = HashMap::new();
    for f in &feed.frequencies {
        frequencies.entry(f.trip_id.as_str()).or_default().push(f);
    }

    let mut trips = Vec::new();
    let mut connections = Vec::new();
    let mut active_trips = 0;
    let mut dropped_trips = 0;
    for trip in feed.trips.iter().filter(|t| active.contains(t.service_id.as_str())) {
        let Some(stop_times) = by_trip.get_mut(trip.id.as_str()) else {
            continue;
        };
        let line = *line_of_route
            .get(trip.route_id.as_str())
            .ok_or_else(|| Error::invalid(format!("trip `{}` references unknown route", trip.id)))?;
        stop_times.sort_by_key(|st| st.stop_sequence);
        let Some(times) = resolve_times(stop_times) else {
            dropped_trips += 1;
            continue;
        };

        // (from, to, dep, arr, length) relative to the scheduled run.
        let mut hops = Vec::new();
        let mut valid = true;
        for i in 1..stop_times.len() {
            let (a, b) = (stop_times[i - 1], stop_times[i]);
            let (Some(&from), Some(&to)) = (stop_index.get(a.stop_id.as_str()), stop_index.get(b.stop_id.as_str())) else {
                return Err(Error::invalid(format!("trip `{}` references unknown stop", trip.id)));
            };
            let (dep, arr) = (times[i - 1].1, times[i].0);
            if arr < dep || times[i].1 < times[i].0 {
                valid = false;
                break;
            }
            if from == to {
                continue;
            }
            let straight = great_circle_m(feed.stops[from as usize].location, feed.stops[to as usize].location);
            hops.push((from, to, dep, arr, hop_length(a, b, straight)));
        }
        if !valid {
            dropped_trips += 1;
            continue;
        }
        active_trips += 1;

        // Start offsets of each vehicle run relative to the timetable.
        let base = times.first().map_or(0, |t| t.1);
        let runs: Vec<(String, i64)> = match frequencies.get(trip.id.as_str()) {
            None => vec![(trip.id.clone(), 0)],
            Some(entries) => {
                let mut runs = Vec::new();
                for f in entries {
                    let mut start = f.start_time;
                    while start < f.end_time {
                        runs.push((format!("{}#{}", trip.id, runs.len()), i64::from(start) - i64::from(base)));
                        start += f.headway_s;
                    }
                }
                runs
            }
        };
        for (run_id, shift) in runs {
            let shifted = |t: u32| u32::try_from(i64::from(t) + shift).ok();
            let trip_idx = trips.len() as u32;
            let mut run = Vec::with_capacity(hops.len());
            for (hop, &(from, to, dep, arr, length_m)) in hops.iter().enumerate() {
                let (Some(dep), Some(arr)) = (shifted(dep), shifted(arr)) else {
                    run.clear();
                    break;
                };
                run.push(Connection {
                    from,
                    to,
                    dep,
                    arr,
                    trip: trip_idx,
                    line,
                    hop: hop as u32,
                    length_m,
                });
            }
            trips.push(TripInstance { id: run_id, line });
            connections.extend(run);
        }
    }

    let footpaths = build_footpaths(&feed.stops, &options.footpaths, &feed.transfers);
    let tt = Timetable::new(
        feed.stops.clone(),
        lines,
        trips,
        connections,
        footpaths,
        options.footpaths.min_transfer_s,
        service_date,
    )?;
    if dropped_trips > 0 {
        warnings.push(format!("{dropped_trips} trips dropped for missing or non-monotone times"));
    }
    Ok(Timetable {
        build: Arc::new(BuildReport {
            active_trips,
            dropped_trips,
            warnings,
        }),
        ..tt
    })
}
