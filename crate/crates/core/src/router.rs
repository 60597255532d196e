//! Earliest-arrival routing over a [`Timetable`] with the Connection Scan
//! Algorithm, walk access and egress, and reconstruction of the journey
//! tree that the fast equity score is built from.
//!
//! Every stop carries two labels. `arrival` is the earliest time a traveller
//! can stand at the stop. `ready` is the earliest time they can board there:
//! a vehicle arrival plus the minimum transfer time, or a walking arrival
//! with no extra slack.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::{great_circle_m, GeoPoint, HexGrid};
use crate::gtfs::{Stop, Timetable};
use crate::Seconds;

/// Marker for "no value" in the per-stop and per-trip arrays.
pub const UNREACHED: Seconds = Seconds::MAX;
const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub origin: GeoPoint,
    pub depart: Seconds,
    pub horizon: Seconds,
}

impl Query {
    pub fn new(origin: GeoPoint, depart: Seconds, horizon: Seconds) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        if depart.checked_add(horizon).is_none() {
            return Err(Error::invalid("depart + horizon overflows"));
        }
        Ok(Query { origin, depart, horizon })
    }

    /// 8:00 departure, one hour budget.
    pub fn at(origin: GeoPoint) -> Self {
        Query {
            origin,
            depart: 28_800,
            horizon: 3_600,
        }
    }

    pub fn deadline(&self) -> Seconds {
        self.depart + self.horizon
    }
}

/// Precomputed walking times from hexagon barycenters to stops, keyed by
/// `(hex id, stop index)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WalkMatrix {
    entries: HashMap<(u32, u32), Seconds>,
}

impl WalkMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, hex_id: u32, stop: u32, seconds: Seconds) {
        self.entries.insert((hex_id, stop), seconds);
    }

    pub fn get(&self, hex_id: u32, stop: u32) -> Option<Seconds> {
        self.entries.get(&(hex_id, stop)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries for one hexagon, sorted by stop.
    pub fn row(&self, hex_id: u32) -> Vec<(u32, Seconds)> {
        let mut row: Vec<_> = self
            .entries
            .iter()
            .filter(|((h, _), _)| *h == hex_id)
            .map(|((_, s), &t)| (*s, t))
            .collect();
        row.sort_unstable();
        row
    }

    /// Reads `hex_id,stop_id,seconds`. Unknown stops are an input error.
    pub fn read_csv(path: &Path, stops: &[Stop]) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        #[derive(Deserialize)]
        struct Row {
            hex_id: u32,
            stop_id: String,
            seconds: u32,
        }
        let index: HashMap<&str, u32> = stops.iter().enumerate().map(|(i, s)| (s.id.as_str(), i as u32)).collect();
        let context = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::csv(&context, e))?;
        let mut matrix = WalkMatrix::new();
        for (n, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::csv(&context, e))?;
            let Some(&stop) = index.get(row.stop_id.as_str()) else {
                return Err(Error::invalid(format!(
                    "{context}:{}: unknown stop `{}`",
                    n + 2,
                    row.stop_id
                )));
            };
            matrix.insert(row.hex_id, stop, row.seconds);
        }
        Ok(matrix)
    }
}

/// Straight-line walking at `speed_mps` scaled by `detour`, or a matrix
/// lookup when one is loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkModel {
    pub speed_mps: f64,
    pub detour: f64,
    /// Cap on access and egress walks between a barycenter and a stop.
    pub max_access_s: Seconds,
    pub matrix: Option<std::sync::Arc<WalkMatrix>>,
}

impl Default for WalkModel {
    fn default() -> Self {
        WalkModel {
            speed_mps: 1.39,
            detour: 1.3,
            max_access_s: 1200,
            matrix: None,
        }
    }
}

impl WalkModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_mps > 0.0 && self.speed_mps.is_finite()) {
            return Err(Error::invalid("walk speed must be positive"));
        }
        if !(self.detour >= 1.0 && self.detour.is_finite()) {
            return Err(Error::invalid("walk detour must be at least 1"));
        }
        Ok(())
    }

    /// Walking time over a straight-line distance, rounded up.
    pub fn seconds(&self, meters: f64) -> Seconds {
        (self.detour * meters / self.speed_mps).ceil() as Seconds
    }

    /// Longest straight-line distance walkable in `budget` seconds.
    pub fn reach_m(&self, budget: Seconds) -> f64 {
        budget as f64 * self.speed_mps / self.detour
    }

    /// Walk from a barycenter to a stop, `None` beyond `max_access_s`.
    pub fn access(&self, hex_id: u32, center: GeoPoint, stop: u32, at: GeoPoint) -> Option<Seconds> {
        let t = match &self.matrix {
            Some(m) => m.get(hex_id, stop)?,
            None => self.seconds(great_circle_m(center, at)),
        };
        (t <= self.max_access_s).then_some(t)
    }
}

/// Stops within the access budget of hexagon `hex_id`, sorted by stop index.
pub fn access_stops(grid: &HexGrid, hex_id: u32, stops: &[Stop], walk: &WalkModel) -> Result<Vec<(u32, Seconds)>> {
    let hex = grid
        .hexagon(hex_id)
        .ok_or_else(|| Error::invalid(format!("unknown hexagon {hex_id}")))?;
    Ok(stops
        .iter()
        .enumerate()
        .filter_map(|(i, s)| walk.access(hex_id, hex.center, i as u32, s.location).map(|t| (i as u32, t)))
        .collect())
}

/// How a label was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pred {
    Unreached,
    /// Walked straight from the origin.
    Origin,
    /// Alighted from this connection.
    Connection(u32),
    /// Walked a footpath from this stop.
    Footpath(u32),
}

/// Result of one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalState {
    pub query: Query,
    pub arrival: Vec<Seconds>,
    pub ready: Vec<Seconds>,
    pub arrival_pred: Vec<Pred>,
    pub ready_pred: Vec<Pred>,
    /// First boarded connection of each trip, or `u32::MAX`.
    pub trip_entry: Vec<u32>,
}

impl ArrivalState {
    pub fn arrival_at(&self, stop: u32) -> Option<Seconds> {
        let t = self.arrival[stop as usize];
        (t != UNREACHED).then_some(t)
    }

    pub fn trip_reached(&self, trip: u32) -> bool {
        self.trip_entry[trip as usize] != NONE
    }

    pub fn reached_stops(&self) -> impl Iterator<Item = (u32, Seconds)> + '_ {
        self.arrival
            .iter()
            .enumerate()
            .filter(|(_, &t)| t != UNREACHED)
            .map(|(i, &t)| (i as u32, t))
    }
}

struct Labels<'a> {
    tt: &'a Timetable,
    deadline: Seconds,
    arrival: Vec<Seconds>,
    ready: Vec<Seconds>,
    arrival_pred: Vec<Pred>,
    ready_pred: Vec<Pred>,
    heap: BinaryHeap<Reverse<(Seconds, u32)>>,
}

impl Labels<'_> {
    /// Records a vehicle or origin arrival; returns whether it improved.
    fn arrive(&mut self, stop: u32, t: Seconds, slack: Seconds, pred: Pred) -> bool {
        let s = stop as usize;
        if t > self.deadline || t >= self.arrival[s] {
            return false;
        }
        self.arrival[s] = t;
        self.arrival_pred[s] = pred;
        let r = t.saturating_add(slack);
        if r < self.ready[s] {
            self.ready[s] = r;
            self.ready_pred[s] = pred;
        }
        self.heap.push(Reverse((t, stop)));
        true
    }

    fn relax_footpaths(&mut self) {
        while let Some(Reverse((t, s))) = self.heap.pop() {
            if t > self.arrival[s as usize] {
                continue;
            }
            for f in self.tt.footpaths_from(s) {
                let nt = t + f.duration_s;
                self.arrive(f.to, nt, 0, Pred::Footpath(s));
            }
        }
    }
}

/// One-to-all earliest arrival from the access stops of `q.origin`.
///
/// A connection is boardable when its trip was already boarded or the
/// traveller is ready at its departure stop by its departure time. Ties keep
/// the earlier label.
pub fn earliest_arrival(tt: &Timetable, q: &Query, access: &[(u32, Seconds)]) -> ArrivalState {
    let n = tt.stops().len();
    let deadline = q.deadline();
    let mut labels = Labels {
        tt,
        deadline,
        arrival: vec![UNREACHED; n],
        ready: vec![UNREACHED; n],
        arrival_pred: vec![Pred::Unreached; n],
        ready_pred: vec![Pred::Unreached; n],
        heap: BinaryHeap::new(),
    };
    for &(stop, walk) in access {
        labels.arrive(stop, q.depart.saturating_add(walk), 0, Pred::Origin);
    }
    labels.relax_footpaths();

    let slack = tt.min_transfer_s();
    let mut trip_entry = vec![NONE; tt.trips().len()];
    let conns = tt.connections();
    for (idx, c) in conns.iter().enumerate().skip(tt.first_departing_at(q.depart)) {
        if c.dep > deadline {
            break;
        }
        let entry = &mut trip_entry[c.trip as usize];
        if *entry == NONE {
            if labels.ready[c.from as usize] > c.dep {
                continue;
            }
            *entry = idx as u32;
        }
        if labels.arrive(c.to, c.arr, slack, Pred::Connection(idx as u32)) {
            labels.relax_footpaths();
        }
    }

    ArrivalState {
        query: *q,
        arrival: labels.arrival,
        ready: labels.ready,
        arrival_pred: labels.arrival_pred,
        ready_pred: labels.ready_pred,
        trip_entry,
    }
}

/// Connections used by the earliest-arrival paths from one origin, each
/// counted once however many destinations it serves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JourneyTree {
    pub origin: GeoPoint,
    /// Connection indices, ascending.
    pub used: Vec<u32>,
    pub reached_stops: usize,
}

impl JourneyTree {
    /// In-vehicle meters of the whole tree.
    pub fn in_vehicle_m(&self, tt: &Timetable) -> f64 {
        self.used.iter().map(|&c| tt.connections()[c as usize].length_m).sum()
    }
}

/// Follows predecessor links from every reached stop back to the origin.
pub fn journey_tree(state: &ArrivalState, tt: &Timetable) -> Result<JourneyTree> {
    let n = state.arrival.len();
    if n != tt.stops().len() || state.trip_entry.len() != tt.trips().len() {
        return Err(Error::Internal("arrival state does not match timetable".into()));
    }
    let conns = tt.connections();
    // Per node: 0 unvisited, else the id of the chain that visited it.
    let mut seen_arrival = vec![0u32; n];
    let mut seen_ready = vec![0u32; n];
    let mut last_alight = vec![NONE; tt.trips().len()];
    let mut reached = 0;

    #[derive(Clone, Copy)]
    enum Node {
        Arrival(u32),
        Ready(u32),
    }

    for stop in 0..n as u32 {
        if state.arrival[stop as usize] == UNREACHED {
            continue;
        }
        reached += 1;
        let chain = stop + 1;
        let mut node = Node::Arrival(stop);
        loop {
            let (seen, pred) = match node {
                Node::Arrival(s) => (&mut seen_arrival[s as usize], state.arrival_pred[s as usize]),
                Node::Ready(s) => (&mut seen_ready[s as usize], state.ready_pred[s as usize]),
            };
            if *seen == chain {
                return Err(Error::Internal(format!("cyclic predecessor chain from stop {stop}")));
            }
            if *seen != 0 {
                break;
            }
            *seen = chain;
            node = match pred {
                Pred::Origin => break,
                Pred::Unreached => {
                    return Err(Error::Internal(format!("reached stop {stop} leads to an unreached label")));
                }
                Pred::Footpath(from) => Node::Arrival(from),
                Pred::Connection(c) => {
                    let trip = conns[c as usize].trip;
                    let entry = state.trip_entry[trip as usize];
                    if entry == NONE {
                        return Err(Error::Internal(format!("connection {c} used by an unboarded trip")));
                    }
                    let pos = tt.trip_position(c);
                    let last = &mut last_alight[trip as usize];
                    if *last == NONE || pos > *last {
                        *last = pos;
                    }
                    Node::Ready(conns[entry as usize].from)
                }
            };
        }
    }

    let mut used = Vec::new();
    for (trip, &last) in last_alight.iter().enumerate() {
        if last == NONE {
            continue;
        }
        let first = tt.trip_position(state.trip_entry[trip]);
        used.extend_from_slice(&tt.trip_connections(trip as u32)[first as usize..=last as usize]);
    }
    used.sort_unstable();
    Ok(JourneyTree {
        origin: state.query.origin,
        used,
        reached_stops: reached,
    })
}
