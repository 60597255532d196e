//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use transit_equity::accessibility::{AccessibilityField, Scenario};
use transit_equity::equity::{weighted_gini, weighted_lorenz};
use transit_equity::gtfs::synth::{LineRole, SynthManifest, SynthSpec};
use transit_equity::router::{earliest_arrival, Query, UNREACHED};
use transit_equity::stats::{p_value, pearson, P_FLOOR};
use transit_equity::workspace::{cmd_correlate, cmd_score, read_scores, Method, ScoreMeta, Workspace};

use common::{city_workspace, dijkstra_oracle, line_with_role, origin, pairwise_gini, random_access, random_instance};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

struct City {
    _dir: TempDir,
    manifest: SynthManifest,
    ws: Workspace,
    exact: ScoreMeta,
    fast: ScoreMeta,
}

impl City {
    fn scores(&self, method: Method) -> BTreeMap<String, f64> {
        read_scores(&self.ws.path(method.scores_file())).unwrap().into_iter().collect()
    }
}

fn scored_city(spec: &SynthSpec, seed: u64) -> City {
    let dir = TempDir::new().unwrap();
    let (manifest, ws) = city_workspace(spec, seed, dir.path(), Some(1));
    let fast = cmd_score(&ws, Method::Fast).unwrap();
    let exact = cmd_score(&ws, Method::Exact).unwrap();
    City {
        _dir: dir,
        manifest,
        ws,
        exact,
        fast,
    }
}

fn routing_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut stops_checked, mut by_transit) = (0usize, 0usize);
    for i in 0..20u64 {
        let n_stops = rng.gen_range(10..=50);
        let n_conns = rng.gen_range(100..=300);
        let tt = random_instance(1000 + i, n_stops, n_conns);
        for k in 0..5 {
            let access = random_access(1000 * i + k, n_stops);
            let q = Query::new(origin(), 28_800, 3_600).unwrap();
            let state = earliest_arrival(&tt, &q, &access);
            let oracle = dijkstra_oracle(&tt, &q, &access);
            ensure(state.arrival == oracle, || format!("instance {i}, access set {k}: arrivals differ"))?;
            stops_checked += n_stops;
            by_transit += oracle
                .iter()
                .enumerate()
                .filter(|(s, &t)| t != UNREACHED && !access.iter().any(|a| a.0 as usize == *s))
                .count();
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(by_transit > 500, || format!("instances too sparse: {by_transit} stops reached beyond access"))?;
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("20 instances, {stops_checked} stop labels equal, {secs:.2} s"))
}

fn dominated(sub: &AccessibilityField, sup: &AccessibilityField) -> usize {
    sub.scores.iter().filter(|(id, &a)| a > sup.scores[id]).count()
}

fn without(scenario: &Scenario, lines: &[u32]) -> AccessibilityField {
    let tt = scenario.timetable().without_lines(lines).unwrap();
    scenario.with_timetable(Arc::new(tt), "subset").unwrap().field()
}

fn monotone_in_lines(city: &City) -> Outcome {
    let scenario = city.ws.scenario().unwrap();
    let base = scenario.field();
    let n_lines = scenario.timetable().lines().len() as u32;
    let mut violations = 0;
    let mut changed = 0;
    for l in 0..n_lines {
        let f = without(&scenario, &[l]);
        violations += dominated(&f, &base);
        changed += usize::from(f != base);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let all: Vec<u32> = (0..n_lines).collect();
    for _ in 0..20 {
        let k = rng.gen_range(2..=n_lines as usize / 2);
        let mut pick: Vec<u32> = all.choose_multiple(&mut rng, k + 1).copied().collect();
        let extra = pick.pop().unwrap();
        let smaller_removal = without(&scenario, &pick);
        pick.push(extra);
        let larger_removal = without(&scenario, &pick);
        violations += dominated(&smaller_removal, &base);
        violations += dominated(&larger_removal, &smaller_removal);
    }
    ensure(violations == 0, || format!("{violations} hexagon violations"))?;
    ensure(changed > 0, || "no single removal changed the field".into())?;
    Ok(format!("{n_lines} single removals and 20 nested subsets, 0 violations"))
}

fn gini_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0f64;
    for case in 0..100 {
        let n = rng.gen_range(1..=200);
        let levels = rng.gen_range(1..=50);
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(0..5_000) as f64, rng.gen_range(0..levels) as f64 * 1_000.0))
            .collect();
        let w: f64 = pairs.iter().map(|p| p.0).sum();
        let wa: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
        if w == 0.0 || wa == 0.0 {
            continue;
        }
        let g = weighted_gini(&pairs).unwrap();
        let oracle = pairwise_gini(&pairs);
        let from_curve = weighted_lorenz(&pairs).unwrap().gini();
        worst = worst.max((g - oracle).abs()).max((from_curve - oracle).abs());
        ensure((g - oracle).abs() <= 1e-9, || format!("case {case}: closed form {g} vs pairwise {oracle}"))?;
        ensure((from_curve - oracle).abs() <= 1e-9, || format!("case {case}: lorenz {from_curve} vs pairwise {oracle}"))?;
    }
    for n in [1, 2, 17, 200] {
        let uniform: Vec<(f64, f64)> = (0..n).map(|i| (1.0 + i as f64, 4_321.0)).collect();
        let g = weighted_gini(&uniform).unwrap();
        ensure(g <= 1e-12, || format!("uniform field of {n} gives {g}"))?;
    }
    let skewed = [(1.0, 0.0), (1.0, 0.0), (1.0, 0.0), (1.0, 100.0)];
    let g = weighted_gini(&skewed).unwrap();
    ensure(g == 0.75, || format!("[0,0,0,100] gives {g}"))?;
    Ok(format!("100 fields, max deviation {worst:.1e}; uniform 0; [0,0,0,100] = 0.75"))
}

fn null_line() -> Outcome {
    let spec = SynthSpec {
        null_line: true,
        ..SynthSpec::default()
    };
    let city = scored_city(&spec, 1);
    let id = line_with_role(&city.manifest, LineRole::Null);
    let dg = city.scores(Method::Exact)[&id];
    let e = city.scores(Method::Fast)[&id];
    ensure(dg == 0.0 && e == 0.0, || format!("line {id}: delta_g {dg}, e {e}"))?;
    Ok(format!("line {id}: delta_g 0, e 0"))
}

fn correlation(cities: &[City]) -> Outcome {
    let mut rs = Vec::new();
    for (seed, city) in SEEDS.iter().zip(cities) {
        ensure(city.ws.timetable().lines().len() >= 30, || format!("seed {seed}: fewer than 30 lines"))?;
        let r = cmd_correlate(&city.ws).map_err(|e| e.to_string())?.report.r;
        rs.push(format!("{r:.3}"));
        ensure(r >= 0.3, || format!("seed {seed}: r = {r:.3}"))?;
    }
    Ok(format!("r by seed: {}", rs.join(", ")))
}

fn ranking(cities: &[City]) -> Outcome {
    for (seed, city) in SEEDS.iter().zip(cities) {
        let connector = line_with_role(&city.manifest, LineRole::SuburbanConnector);
        let center = line_with_role(&city.manifest, LineRole::CenterCirculator);
        for method in [Method::Exact, Method::Fast] {
            let s = city.scores(method);
            ensure(s[&connector] > s[&center], || {
                format!(
                    "seed {seed}, {}: {connector} {} <= {center} {}",
                    method.name(),
                    s[&connector],
                    s[&center]
                )
            })?;
        }
    }
    Ok(format!("connector above center loop under both scores for {} seeds", SEEDS.len()))
}

fn speedup(city: &City) -> Outcome {
    let hexes = city.ws.grid().len() as u64;
    let lines = city.ws.timetable().lines().len() as u64;
    ensure(city.fast.scans == hexes, || format!("fast: {} scans for {hexes} hexagons", city.fast.scans))?;
    ensure(city.exact.scans == (lines + 1) * hexes, || {
        format!("exact: {} scans, expected {}", city.exact.scans, (lines + 1) * hexes)
    })?;
    let gain = city.exact.wall_seconds / city.fast.wall_seconds;
    ensure(gain >= lines as f64 / 4.0, || format!("wall gain {gain:.1} below {}", lines as f64 / 4.0))?;
    Ok(format!(
        "scans {} vs {}, wall gain {gain:.1} for {lines} lines",
        city.fast.scans, city.exact.scans
    ))
}

fn normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * u2;
    (radius * angle.cos(), radius * angle.sin())
}

fn statistics() -> Outcome {
    for n in 3..200 {
        ensure(p_value(0.0, n).unwrap() == 1.0, || format!("p(0, {n}) != 1"))?;
    }
    let mut floor_gap = 1.0f64;
    for n in [5, 30, 281, 2_000] {
        let mut prev = 1.0f64;
        for step in 1..1_000 {
            let r = step as f64 / 1_000.0;
            let p = p_value(r, n).unwrap();
            ensure(p == p_value(-r, n).unwrap(), || format!("p not symmetric at r={r}, n={n}"))?;
            if prev > P_FLOOR {
                ensure(p < prev, || format!("p not decreasing at r={r}, n={n}"))?;
            }
            ensure(p >= P_FLOOR, || format!("p({r}, {n}) = {p} below the floor"))?;
            if p > P_FLOOR {
                floor_gap = floor_gap.min(p);
            }
            prev = p;
        }
    }
    ensure(floor_gap < 1e-290, || format!("smallest value above the floor is {floor_gap:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 20;
    let mut compared = Vec::new();
    for rho in [0.0, 0.2, 0.35, 0.5, 0.6] {
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|_| {
                let (a, b) = normal_pair(&mut rng);
                (a, rho * a + (1.0 - rho * rho).sqrt() * b)
            })
            .unzip();
        let r = pearson(&xs, &ys).unwrap();
        let p = p_value(r, n).unwrap();
        if p < 1e-3 {
            continue;
        }
        let permutations = 200_000;
        let mut shuffled = ys.clone();
        let mut hits = 0u64;
        for _ in 0..permutations {
            shuffled.shuffle(&mut rng);
            if pearson(&xs, &shuffled).unwrap().abs() >= r.abs() - 1e-12 {
                hits += 1;
            }
        }
        let perm = (hits + 1) as f64 / (permutations + 1) as f64;
        let ratio = perm / p;
        ensure((0.5..=2.0).contains(&ratio), || format!("r={r:.3}: t-test {p:.2e}, permutation {perm:.2e}"))?;
        compared.push(format!("{p:.1e}/{perm:.1e}"));
    }
    ensure(compared.len() >= 3, || "too few samples with p >= 1e-3".into())?;
    Ok(format!(
        "p(0)=1, strictly decreasing, smallest {floor_gap:.0e}; t-test/permutation {}",
        compared.join(" ")
    ))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_transit-equity")).args(args).output().unwrap();
    ensure(out.status.success(), || {
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn fast_outputs(ws: &Path) -> Vec<(&'static str, Vec<u8>)> {
    ["scores_fast.csv", "cumulative_importance.csv", "accessibility.csv"]
        .into_iter()
        .map(|f| (f, std::fs::read(ws.join(f)).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let dir = TempDir::new().unwrap();
    let city = dir.path().join("city");
    let ws = dir.path().join("ws");
    let (city_s, ws_s) = (city.to_str().unwrap(), ws.to_str().unwrap());
    run_cli(&["synth", "--seed", "3", "--out", city_s])?;
    let gtfs = city.join("gtfs");
    let population = city.join("population.csv");
    run_cli(&[
        "ingest",
        "-w",
        ws_s,
        "--gtfs",
        gtfs.to_str().unwrap(),
        "--population",
        population.to_str().unwrap(),
        "--seed",
        "3",
    ])?;
    run_cli(&["score", "-w", ws_s, "--method", "fast", "--threads", "1"])?;
    let single = fast_outputs(&ws);
    run_cli(&["score", "-w", ws_s, "--method", "fast", "--threads", "4"])?;
    let pooled = fast_outputs(&ws);
    for ((name, a), (_, b)) in single.iter().zip(&pooled) {
        ensure(a == b, || format!("{name} differs between 1 and 4 threads"))?;
    }
    Ok(format!("{} files byte-identical with 1 and 4 threads", single.len()))
}

fn report(outcomes: &mut Vec<bool>, label: &str, f: impl FnOnce() -> Outcome) {
    let started = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = started.elapsed().as_secs_f64();
    match &outcome {
        Ok(detail) => println!("PASS {label}: {detail} [{secs:.1} s]"),
        Err(detail) => println!("FAIL {label}: {detail} [{secs:.1} s]"),
    }
    outcomes.push(outcome.is_ok());
}

fn main() {
    let mut outcomes = Vec::new();
    report(&mut outcomes, "1 routing matches time-expanded dijkstra", routing_oracle);

    let spec = SynthSpec::default();
    let started = Instant::now();
    let cities: Vec<City> = SEEDS.iter().map(|&s| scored_city(&spec, s)).collect();
    println!(
        "     (built and scored {} synthetic cities in {:.1} s)",
        cities.len(),
        started.elapsed().as_secs_f64()
    );

    report(&mut outcomes, "2 accessibility never grows when lines are removed", || {
        monotone_in_lines(&cities[0])
    });
    report(&mut outcomes, "3 gini closed form, pairwise and lorenz agree", gini_oracles);
    report(&mut outcomes, "4 line outside the city scores zero", null_line);
    report(&mut outcomes, "5 exact and fast scores correlate", || correlation(&cities));
    report(&mut outcomes, "6 connector outranks center loop", || ranking(&cities));
    report(&mut outcomes, "7 fast scoring saves scans and time", || speedup(&cities[0]));
    report(&mut outcomes, "8 p-values", statistics);
    report(&mut outcomes, "9 fast scores independent of thread count", determinism);

    let failed = outcomes.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria pass", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
