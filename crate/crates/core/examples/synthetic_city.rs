//! Generate a synthetic city: GTFS feed, population raster and a manifest
//! naming the role of every line.
//!
//! ```bash
//! cargo run --example synthetic_city -- /tmp/city 3
//! ```

use std::path::PathBuf;

use transit_equity::gtfs::synth::{synthesize_network, LineRole, SynthSpec};

fn main() -> transit_equity::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synthetic-city".into()));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed must be an integer"));

    let spec = SynthSpec::default();
    let city = synthesize_network(&spec, seed)?;
    city.write(&out)?;

    let persons: f64 = city.population.iter().map(|c| c.persons).sum();
    println!("{} stops, {} trips, {} stop times", city.feed.stops.len(), city.feed.trips.len(), city.feed.stop_times.len());
    println!("{} population cells, {:.0} persons", city.population.len(), persons);
    for (id, role) in &city.manifest.roles {
        if !matches!(role, LineRole::Radial | LineRole::Circulator) {
            println!("  {id}: {role:?}");
        }
    }
    println!("written to {}", out.display());
    Ok(())
}
