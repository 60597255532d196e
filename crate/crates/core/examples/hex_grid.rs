//! Tessellate a bounding box, drop sparse hexagons and locate points.

use transit_equity::geodata::{assign_population, build_grid, filter_low_density, GeoPoint, PopulationCell};

fn main() -> transit_equity::Result<()> {
    let sw = GeoPoint::new(45.00, 7.60)?;
    let ne = GeoPoint::new(45.10, 7.75)?;
    let grid = build_grid(sw, ne, 1_000.0)?;
    println!("{} hexagons of {:.3} km²", grid.len(), grid.hexagon_area_km2());

    // A dense block in the north-east corner, a few scattered farms elsewhere.
    let mut cells = Vec::new();
    for i in 0..20 {
        for j in 0..20 {
            let lat = 45.06 + i as f64 * 0.002;
            let lon = 7.68 + j as f64 * 0.003;
            cells.push(PopulationCell { location: GeoPoint::new(lat, lon)?, persons: 40.0 });
        }
    }
    cells.push(PopulationCell { location: GeoPoint::new(45.01, 7.61)?, persons: 12.0 });

    let (populated, report) = assign_population(&grid, &cells)?;
    let kept = filter_low_density(&populated, 100.0)?;
    println!("assigned {} persons, {} hexagons above 100 / km²", report.assigned_population, kept.len());

    let station = GeoPoint::new(45.075, 7.70)?;
    let id = kept.locate(station).expect("station lies in a kept hexagon");
    let hex = kept.hexagon(id).unwrap();
    println!("station is in hexagon {id} ({} persons), centre {:.5},{:.5}", hex.population, hex.center.lat, hex.center.lon);
    for corner in kept.ring(hex) {
        println!("  {:.5} {:.5}", corner.lat, corner.lon);
    }
    Ok(())
}
