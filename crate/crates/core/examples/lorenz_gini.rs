//! Weighted Gini index and Lorenz curve of a handful of districts.

use transit_equity::equity::{weighted_gini, weighted_lorenz};

fn main() -> transit_equity::Result<()> {
    // (residents, residents reachable within the hour)
    let districts = [
        (12_000.0, 410_000.0),
        (8_000.0, 390_000.0),
        (5_000.0, 120_000.0),
        (3_000.0, 35_000.0),
        (2_500.0, 35_000.0),
        (900.0, 4_000.0),
    ];
    let g = weighted_gini(&districts)?;
    let curve = weighted_lorenz(&districts)?;
    println!("gini {g:.4} (from the curve: {:.4})", curve.gini());
    println!("{:>10} {:>10}", "population", "access");
    for (x, y) in &curve.points {
        println!("{x:>10.3} {y:>10.3}");
    }

    let one_rich = [(1.0, 0.0), (1.0, 0.0), (1.0, 0.0), (1.0, 100.0)];
    println!("three with nothing, one with everything: {}", weighted_gini(&one_rich)?);
    Ok(())
}
