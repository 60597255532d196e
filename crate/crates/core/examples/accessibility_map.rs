//! Accessibility of every hexagon of a synthetic city, written as GeoJSON.
//!
//! ```bash
//! cargo run --release --example accessibility_map -- accessibility.geojson
//! ```

use std::sync::Arc;

use transit_equity::accessibility::{grid_geojson, Scenario, TimeWindow};
use transit_equity::geodata::{assign_population, bounding_box, build_grid, filter_low_density};
use transit_equity::gtfs::synth::{synthesize_network, SynthSpec};
use transit_equity::gtfs::{build_timetable, TimetableOptions};
use transit_equity::router::WalkModel;

fn main() -> transit_equity::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "accessibility.geojson".into());
    let city = synthesize_network(&SynthSpec::default(), 1)?;

    let (sw, ne) = bounding_box(city.population.iter().map(|c| c.location)).expect("city has population");
    let (populated, _) = assign_population(&build_grid(sw, ne, 1_000.0)?, &city.population)?;
    let grid = Arc::new(filter_low_density(&populated, 100.0)?);
    let tt = Arc::new(build_timetable(&city.feed, &TimetableOptions::default())?);

    let scenario = Scenario::new(grid.clone(), tt, WalkModel::default(), TimeWindow::default())?;
    let field = scenario.field();

    let mut ranked: Vec<(u32, u64)> = field.scores.iter().map(|(&id, &a)| (id, a)).collect();
    ranked.sort_by_key(|&(id, a)| (a, id));
    let total = grid.total_population();
    for (label, (id, a)) in [("worst", ranked[0]), ("median", ranked[ranked.len() / 2]), ("best", ranked[ranked.len() - 1])] {
        println!("{label:>6}: hexagon {id:>4} reaches {a:>7} of {total} residents");
    }

    let geojson = grid_geojson(&grid, Some(&field))?;
    std::fs::write(&out, serde_json::to_string(&geojson).expect("geojson serializes")).expect("writing geojson");
    println!("{} hexagons -> {out}", grid.len());
    Ok(())
}
