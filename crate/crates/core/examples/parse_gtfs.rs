//! Parse a GTFS directory and expand one service day into connections.
//!
//! ```bash
//! cargo run --example parse_gtfs -- path/to/gtfs
//! ```
//! Without an argument a small synthetic feed is generated first.

use std::path::PathBuf;

use transit_equity::gtfs::synth::{synthesize_network, SynthSpec};
use transit_equity::gtfs::{build_timetable, format_time, parse_feed, TimetableOptions};

fn main() -> transit_equity::Result<()> {
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let spec = SynthSpec { radial_lines: 3, circulator_lines: 1, ..SynthSpec::default() };
            synthesize_network(&spec, 7)?.write(tmp.path())?;
            tmp.path().join("gtfs")
        }
    };

    let feed = parse_feed(&dir)?;
    let tt = build_timetable(&feed, &TimetableOptions::default())?;
    let stats = tt.stats();
    println!("service date {:?}", stats.service_date);
    println!(
        "{} stops, {} lines, {} trip instances, {} connections, {} footpaths",
        stats.stops, stats.lines, stats.trip_instances, stats.connections, stats.footpaths
    );
    for w in &stats.warnings {
        println!("warning: {w}");
    }

    let counts = tt.connection_count_by_line();
    for (line, n) in tt.lines().iter().zip(counts).take(8) {
        println!("  {:<14} {:?} {n} connections", line.id, line.mode);
    }

    let first = tt.first_departing_at(8 * 3600);
    for c in &tt.connections()[first..(first + 5).min(tt.connections().len())] {
        println!(
            "  {} {} -> {} {} ({})",
            format_time(c.dep),
            tt.stops()[c.from as usize].name,
            tt.stops()[c.to as usize].name,
            format_time(c.arr),
            tt.lines()[c.line as usize].id
        );
    }
    Ok(())
}
