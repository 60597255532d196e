#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use transit_equity::config::RunConfig;
use transit_equity::geodata::{GeoPoint, LocalProjection};
use transit_equity::gtfs::synth::{LineRole, SynthManifest, SynthSpec};
use transit_equity::gtfs::{Connection, Footpath, Line, LineMode, Stop, Timetable, TripInstance};
use transit_equity::router::{Query, UNREACHED};
use transit_equity::workspace::{cmd_ingest, cmd_synth, Workspace};

pub fn origin() -> GeoPoint {
    GeoPoint { lat: 45.0, lon: 7.0 }
}

/// Random timetable: stops scattered over six kilometres, trips visiting
/// random stop sequences, symmetric footpaths, 60 s transfer slack.
pub fn random_instance(seed: u64, n_stops: usize, n_conns: usize) -> Timetable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let proj = LocalProjection::new(origin());
    let stops: Vec<Stop> = (0..n_stops)
        .map(|i| Stop {
            id: format!("S{i}"),
            name: format!("S{i}"),
            location: proj.inverse(rng.gen_range(-3000.0..3000.0), rng.gen_range(-3000.0..3000.0)),
        })
        .collect();
    let n_lines = rng.gen_range(2..6);
    let lines: Vec<Line> = (0..n_lines)
        .map(|l| Line {
            id: format!("L{l}"),
            mode: LineMode::Bus,
            name: format!("L{l}"),
        })
        .collect();
    let mut trips = Vec::new();
    let mut connections = Vec::new();
    while connections.len() < n_conns {
        let trip = trips.len() as u32;
        let line = rng.gen_range(0..n_lines) as u32;
        trips.push(TripInstance {
            id: format!("T{trip}"),
            line,
        });
        let hops = rng.gen_range(1..8).min(n_conns - connections.len());
        let mut t = rng.gen_range(28_000..31_500);
        let mut at = rng.gen_range(0..n_stops) as u32;
        for hop in 0..hops {
            let mut next = rng.gen_range(0..n_stops) as u32;
            if next == at {
                next = (next + 1) % n_stops as u32;
            }
            let dep = t + if hop == 0 { 0 } else { rng.gen_range(0..60) };
            let arr = dep + rng.gen_range(0..600);
            connections.push(Connection {
                from: at,
                to: next,
                dep,
                arr,
                trip,
                line,
                hop: hop as u32,
                length_m: 250.0,
            });
            t = arr;
            at = next;
        }
    }
    let mut footpaths: Vec<Footpath> = Vec::new();
    for _ in 0..n_stops {
        let a = rng.gen_range(0..n_stops) as u32;
        let b = rng.gen_range(0..n_stops) as u32;
        if a != b && !footpaths.iter().any(|f| f.from == a && f.to == b) {
            let d = rng.gen_range(60..400);
            footpaths.push(Footpath { from: a, to: b, duration_s: d });
            footpaths.push(Footpath { from: b, to: a, duration_s: d });
        }
    }
    Timetable::new(stops, lines, trips, connections, footpaths, 60, None).unwrap()
}

pub fn random_access(seed: u64, n_stops: usize) -> Vec<(u32, u32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xacce55);
    let mut picked: Vec<u32> = (0..n_stops as u32).filter(|_| rng.gen_bool(0.1)).collect();
    if picked.is_empty() {
        picked.push(0);
    }
    picked.into_iter().map(|s| (s, rng.gen_range(0..900))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Event {
    Walked(u32),
    VehArr(u32),
    Ready(u32),
    Board(u32),
}

/// Earliest arrival per stop by Dijkstra over the time-expanded graph.
/// Walking arrivals may board at once, vehicle arrivals wait the transfer
/// slack, staying on board is free. A later copy of an event is dominated
/// by the first one popped, so each event is settled once.
pub fn dijkstra_oracle(tt: &Timetable, q: &Query, access: &[(u32, u32)]) -> Vec<u32> {
    let deadline = q.deadline();
    let slack = tt.min_transfer_s();
    let conns = tt.connections();
    let mut by_from: Vec<Vec<u32>> = vec![Vec::new(); tt.stops().len()];
    for (i, c) in conns.iter().enumerate() {
        by_from[c.from as usize].push(i as u32);
    }
    let mut best = vec![UNREACHED; tt.stops().len()];
    let mut heap = BinaryHeap::new();
    let mut done = HashSet::new();
    for &(s, w) in access {
        if q.depart + w <= deadline {
            heap.push(Reverse((q.depart + w, Event::Walked(s))));
        }
    }
    while let Some(Reverse((t, ev))) = heap.pop() {
        if !done.insert(ev) {
            continue;
        }
        match ev {
            Event::Walked(s) | Event::VehArr(s) => {
                best[s as usize] = best[s as usize].min(t);
                let ready = if matches!(ev, Event::Walked(_)) { t } else { t + slack };
                heap.push(Reverse((ready, Event::Ready(s))));
                for f in tt.footpaths_from(s) {
                    if t + f.duration_s <= deadline {
                        heap.push(Reverse((t + f.duration_s, Event::Walked(f.to))));
                    }
                }
            }
            Event::Ready(s) => {
                for &c in &by_from[s as usize] {
                    let dep = conns[c as usize].dep;
                    if dep >= t && dep >= q.depart && dep <= deadline {
                        heap.push(Reverse((dep, Event::Board(c))));
                    }
                }
            }
            Event::Board(c) => {
                let cc = conns[c as usize];
                if cc.arr <= deadline {
                    heap.push(Reverse((cc.arr, Event::VehArr(cc.to))));
                }
                let in_trip = tt.trip_connections(cc.trip);
                if let Some(&next) = in_trip.get(tt.trip_position(c) as usize + 1) {
                    let nd = conns[next as usize].dep;
                    if nd <= deadline {
                        heap.push(Reverse((nd, Event::Board(next))));
                    }
                }
            }
        }
    }
    best
}

/// Pairwise-difference Gini of `(weight, accessibility)` pairs:
/// sum of w_i w_j |a_i - a_j| over 2 W sum(w a).
pub fn pairwise_gini(pairs: &[(f64, f64)]) -> f64 {
    let w: f64 = pairs.iter().map(|p| p.0).sum();
    let wa: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    let mut acc = 0.0;
    for &(wi, ai) in pairs {
        for &(wj, aj) in pairs {
            acc += wi * wj * (ai - aj).abs();
        }
    }
    acc / (2.0 * w * wa)
}

/// Synthesizes a city under `root/city` and ingests it into `root/ws`.
pub fn city_workspace(spec: &SynthSpec, seed: u64, root: &Path, threads: Option<usize>) -> (SynthManifest, Workspace) {
    let city = root.join("city");
    let manifest = cmd_synth(spec, seed, &city).unwrap();
    let config = RunConfig {
        gtfs_dir: Some(city.join("gtfs")),
        population_csv: Some(city.join("population.csv")),
        seed,
        threads,
        ..RunConfig::default()
    };
    let ws_dir = root.join("ws");
    cmd_ingest(&config, &ws_dir).unwrap();
    let ws = Workspace::open(&ws_dir).unwrap().with_threads(threads);
    (manifest, ws)
}

pub fn line_with_role(manifest: &SynthManifest, role: LineRole) -> String {
    manifest
        .roles
        .iter()
        .find(|(_, r)| **r == role)
        .map(|(id, _)| id.clone())
        .unwrap_or_else(|| panic!("no line with role {role:?}"))
}
