//! Score every line of a synthetic city twice: by removing it and
//! recomputing the Gini index, and by reading its cumulative importance at
//! the 65th percentile. Prints both rankings and their correlation.
//!
//! ```bash
//! cargo run --release --example exact_vs_fast -- 2
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use transit_equity::accessibility::{Scenario, TimeWindow};
use transit_equity::equity::exact_scores;
use transit_equity::geodata::{assign_population, bounding_box, build_grid, filter_low_density};
use transit_equity::gtfs::synth::{synthesize_network, SynthSpec};
use transit_equity::gtfs::{build_timetable, TimetableOptions};
use transit_equity::importance::{cumulative_importance, fast_scores, importance_matrix, PercentileWeighting};
use transit_equity::router::WalkModel;
use transit_equity::stats::{correlate, rank_lines};

fn main() -> transit_equity::Result<()> {
    let seed = std::env::args().nth(1).map_or(1, |s| s.parse().expect("seed must be an integer"));
    let city = synthesize_network(&SynthSpec::default(), seed)?;
    let (sw, ne) = bounding_box(city.population.iter().map(|c| c.location)).expect("city has population");
    let (populated, _) = assign_population(&build_grid(sw, ne, 1_000.0)?, &city.population)?;
    let grid = Arc::new(filter_low_density(&populated, 100.0)?);
    let tt = Arc::new(build_timetable(&city.feed, &TimetableOptions::default())?);
    let scenario = Scenario::new(grid.clone(), tt, WalkModel::default(), TimeWindow::default())?;

    let started = Instant::now();
    let (field, matrix) = importance_matrix(&scenario)?;
    let cum = cumulative_importance(&matrix, &field, &grid)?;
    let fast = fast_scores(&cum, 0.65, PercentileWeighting::Hexagons)?;
    let fast_s = started.elapsed().as_secs_f64();
    let fast_scans = scenario.scan_count();

    scenario.reset_scan_count();
    let started = Instant::now();
    let exact = exact_scores(&scenario)?;
    let exact_s = started.elapsed().as_secs_f64();

    println!("base gini {:.4}", exact.base.value);
    println!("fast: {fast_scans} scans in {fast_s:.3} s, exact: {} scans in {exact_s:.3} s", scenario.scan_count());

    let dg: BTreeMap<_, _> = exact.lines.iter().map(|l| (l.line_id.clone(), l.delta_g)).collect();
    let e: BTreeMap<_, _> = fast.lines.iter().map(|l| (l.line_id.clone(), l.e_score)).collect();
    let by_dg = rank_lines(dg.iter().map(|(k, v)| (k.clone(), *v)));
    let by_e = rank_lines(e.iter().map(|(k, v)| (k.clone(), *v)));
    println!("{:>4}  {:<16}{:>10}  {:<16}{:>10}", "rank", "by delta G", "", "by e", "km");
    for (i, ((a, x), (b, y))) in by_dg.iter().zip(&by_e).take(10).enumerate() {
        println!("{:>4}  {a:<16}{x:>10.5}  {b:<16}{:>10.1}", i + 1, y / 1_000.0);
    }

    let (xs, ys): (Vec<f64>, Vec<f64>) = dg.iter().map(|(k, v)| (*v, e[k])).unzip();
    let c = correlate(&xs, &ys)?;
    println!("pearson r = {:.3}, p = {:.2e}, n = {}", c.r, c.p, c.n);
    Ok(())
}
