//! Earliest arrivals and the journey tree on a hand-built timetable.
//!
//! Line R runs A -> B -> C, line S runs B -> D. A rider walking to A for
//! 8:00 reaches C on R and D by changing at B.

use transit_equity::geodata::GeoPoint;
use transit_equity::gtfs::{format_time, Connection, Line, LineMode, Stop, Timetable, TripInstance};
use transit_equity::router::{earliest_arrival, journey_tree, Query};

fn stop(id: &str, lat: f64) -> Stop {
    Stop { id: id.into(), name: id.into(), location: GeoPoint { lat, lon: 7.0 } }
}

fn hop(from: u32, to: u32, dep: u32, arr: u32, trip: u32, line: u32, hop: u32) -> Connection {
    Connection { from, to, dep, arr, trip, line, hop, length_m: 1_500.0 }
}

fn main() -> transit_equity::Result<()> {
    let stops = vec![stop("A", 45.00), stop("B", 45.01), stop("C", 45.02), stop("D", 45.03)];
    let lines = vec![
        Line { id: "R".into(), mode: LineMode::Tram, name: "R".into() },
        Line { id: "S".into(), mode: LineMode::Bus, name: "S".into() },
    ];
    let trips = vec![
        TripInstance { id: "r1".into(), line: 0 },
        TripInstance { id: "s1".into(), line: 1 },
        TripInstance { id: "s2".into(), line: 1 },
    ];
    let connections = vec![
        hop(0, 1, 28_800, 29_100, 0, 0, 0),
        hop(1, 2, 29_130, 29_400, 0, 0, 1),
        // Leaves B 30 s after R arrives: too tight for the 60 s change.
        hop(1, 3, 29_130, 29_700, 1, 1, 0),
        hop(1, 3, 29_400, 30_000, 2, 1, 0),
    ];
    let tt = Timetable::new(stops, lines, trips, connections, vec![], 60, None)?;

    let q = Query::new(tt.stops()[0].location, 28_800, 3_600)?;
    let state = earliest_arrival(&tt, &q, &[(0, 0)]);
    for (s, t) in state.reached_stops() {
        println!("{} reached at {}", tt.stops()[s as usize].id, format_time(t));
    }
    println!("trip s1 boarded: {}", state.trip_reached(1));

    let tree = journey_tree(&state, &tt)?;
    println!("tree uses {} connections, {} m in vehicles", tree.used.len(), tree.in_vehicle_m(&tt));
    Ok(())
}
