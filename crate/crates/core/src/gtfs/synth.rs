//! Deterministic synthetic cities: a dense center with a population decaying
//! towards the suburbs, radial lines feeding the center, circulators around
//! it, plus optionally labelled lines whose equity role is known by design.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{write_feed, Calendar, Feed, LineMode, Route, Stop, StopTime, Trip};
use crate::geodata::{bounding_box, write_population_csv, GeoPoint, LocalProjection, PopulationCell};
use crate::{Error, Result};

pub const SUBURBAN_CONNECTOR: &str = "connector";
pub const CENTER_CIRCULATOR: &str = "center-loop";
pub const NULL_LINE: &str = "null";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Headways {
    pub radial_s: u32,
    pub circulator_s: u32,
    pub connector_s: u32,
    pub center_s: u32,
}

impl Default for Headways {
    fn default() -> Self {
        Headways {
            radial_s: 600,
            circulator_s: 900,
            connector_s: 600,
            center_s: 900,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Speeds {
    pub bus_mps: f64,
    pub rail_mps: f64,
    /// Added to every hop.
    pub dwell_s: u32,
}

impl Default for Speeds {
    fn default() -> Self {
        Speeds {
            bus_mps: 6.0,
            rail_mps: 16.0,
            dwell_s: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationSpec {
    pub center_density_per_km2: f64,
    /// e-folding distance of the density.
    pub decay_m: f64,
    pub cell_m: f64,
    /// Multiplicative noise amplitude in [0, 1).
    pub noise: f64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            center_density_per_km2: 9000.0,
            decay_m: 3500.0,
            cell_m: 500.0,
            noise: 0.5,
        }
    }
}

/// Parameters of a synthetic city.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub center: GeoPoint,
    /// Radius of the populated disc.
    pub radius_m: f64,
    /// Number of concentric rings the circulators are spread over.
    pub rings: u32,
    /// Radius of the outermost ring as a fraction of `radius_m`.
    pub circulator_reach: f64,
    pub radial_lines: u32,
    pub circulator_lines: u32,
    /// Fast rail line from the outer suburbs to the center.
    pub suburban_connector: bool,
    /// Short loop in the densest area.
    pub center_circulator: bool,
    /// Line far outside the populated area.
    pub null_line: bool,
    pub headways: Headways,
    /// Each radial and circulator line draws its headway as the base value
    /// times one of these factors.
    pub headway_factors: Vec<f64>,
    pub stop_spacing_m: f64,
    pub connector_stop_spacing_m: f64,
    pub speeds: Speeds,
    pub service_start_s: u32,
    pub service_end_s: u32,
    pub population: PopulationSpec,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            center: GeoPoint {
                lat: 45.0703,
                lon: 7.6869,
            },
            radius_m: 12_000.0,
            rings: 3,
            circulator_reach: 0.5,
            radial_lines: 16,
            circulator_lines: 12,
            suburban_connector: true,
            center_circulator: true,
            null_line: false,
            headways: Headways::default(),
            headway_factors: vec![0.5, 1.0, 1.5, 2.0],
            stop_spacing_m: 600.0,
            connector_stop_spacing_m: 1000.0,
            speeds: Speeds::default(),
            service_start_s: 7 * 3600,
            service_end_s: 9 * 3600 + 1800,
            population: PopulationSpec::default(),
            start_date: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
            end_date: NaiveDate::from_ymd_opt(2024, 12, 31).expect("valid date"),
        }
    }
}

impl SynthSpec {
    pub fn line_count(&self) -> u32 {
        self.radial_lines
            + self.circulator_lines
            + u32::from(self.suburban_connector)
            + u32::from(self.center_circulator)
            + u32::from(self.null_line)
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::invalid(format!("synthetic city spec: {msg}")));
        if self.line_count() == 0 {
            return fail("at least one line is required");
        }
        if self.circulator_lines > 0 && self.rings == 0 {
            return fail("circulators need at least one ring");
        }
        if !(self.circulator_reach > 0.0 && self.circulator_reach <= 1.0) {
            return fail("circulator reach must be in (0, 1]");
        }
        if !(self.radius_m > 0.0) || !(self.stop_spacing_m > 0.0) || !(self.connector_stop_spacing_m > 0.0) {
            return fail("radius and stop spacing must be positive");
        }
        let h = &self.headways;
        if h.radial_s == 0 || h.circulator_s == 0 || h.connector_s == 0 || h.center_s == 0 {
            return fail("headways must be positive");
        }
        if self.headway_factors.is_empty() || self.headway_factors.iter().any(|f| !(*f > 0.0)) {
            return fail("headway factors must be positive and non-empty");
        }
        if !(self.speeds.bus_mps > 0.0) || !(self.speeds.rail_mps > 0.0) {
            return fail("speeds must be positive");
        }
        if self.service_end_s <= self.service_start_s {
            return fail("service window must be non-empty");
        }
        let p = &self.population;
        if !(p.center_density_per_km2 >= 0.0) || !(p.decay_m > 0.0) || !(p.cell_m > 0.0) || !(0.0..1.0).contains(&p.noise) {
            return fail("invalid population parameters");
        }
        if self.end_date < self.start_date {
            return fail("end date precedes start date");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineRole {
    Radial,
    Circulator,
    SuburbanConnector,
    CenterCirculator,
    Null,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub spec: SynthSpec,
    pub seed: u64,
    /// `(south_west, north_east)` of the population cells.
    pub bbox: (GeoPoint, GeoPoint),
    pub roles: BTreeMap<String, LineRole>,
}

#[derive(Debug, Clone)]
pub struct SynthCity {
    pub feed: Feed,
    pub population: Vec<PopulationCell>,
    pub manifest: SynthManifest,
}

impl SynthCity {
    /// Writes `gtfs/`, `population.csv` and `synth.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        write_feed(&self.feed, &dir.join("gtfs"))?;
        write_population_csv(&dir.join("population.csv"), &self.population)?;
        let json = serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::json("encoding synth manifest", e))?;
        fs::write(dir.join("synth.json"), json + "\n").map_err(|e| Error::io("writing synth.json", e))
    }
}

struct Builder<'a> {
    spec: &'a SynthSpec,
    proj: LocalProjection,
    rng: ChaCha8Rng,
    feed: Feed,
    roles: BTreeMap<String, LineRole>,
}

impl Builder<'_> {
    #[allow(clippy::too_many_arguments)]
    fn add_line(
        &mut self,
        id: &str,
        name: &str,
        role: LineRole,
        mode: LineMode,
        points: &[(f64, f64)],
        headway_s: u32,
        speed_mps: f64,
        bidirectional: bool,
    ) {
        self.roles.insert(id.to_string(), role);
        self.feed.routes.push(Route {
            id: id.to_string(),
            short_name: id.to_string(),
            long_name: name.to_string(),
            route_type: mode.route_type(),
        });
        let stop_base = self.feed.stops.len();
        for (k, &(x, y)) in points.iter().enumerate() {
            self.feed.stops.push(Stop {
                id: format!("{id}-{k:02}"),
                name: format!("{name} {k}"),
                location: self.proj.inverse(x, y),
            });
        }
        // Loops repeat their first stop at the end.
        let is_loop = points.len() > 2 && points.first() == points.last();
        let stop_of = |k: usize| {
            if is_loop && k == points.len() - 1 {
                stop_base
            } else {
                stop_base + k
            }
        };
        if is_loop {
            self.feed.stops.pop();
        }

        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let d = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
            cumulative.push(cumulative.last().unwrap() + d);
        }
        let hop_s: Vec<u32> = points
            .windows(2)
            .map(|w| ((w[1].0 - w[0].0).hypot(w[1].1 - w[0].1) / speed_mps).ceil() as u32 + self.spec.speeds.dwell_s)
            .collect();

        let directions: &[bool] = if bidirectional { &[false, true] } else { &[false] };
        for &reverse in directions {
            let order: Vec<usize> = if reverse {
                (0..points.len()).rev().collect()
            } else {
                (0..points.len()).collect()
            };
            let total = *cumulative.last().unwrap();
            let phase = self.rng.gen_range(0..headway_s);
            let mut departure = self.spec.service_start_s + phase;
            let mut run = 0;
            while departure < self.spec.service_end_s {
                let trip_id = format!("{id}-{}-{run:03}", if reverse { "b" } else { "a" });
                self.feed.trips.push(Trip {
                    id: trip_id.clone(),
                    route_id: id.to_string(),
                    service_id: "daily".to_string(),
                });
                let mut t = departure;
                for (seq, &k) in order.iter().enumerate() {
                    if seq > 0 {
                        let hop = if reverse { order[seq] } else { order[seq - 1] };
                        t += hop_s[hop];
                    }
                    let dist = if reverse { total - cumulative[k] } else { cumulative[k] };
                    self.feed.stop_times.push(StopTime {
                        trip_id: trip_id.clone(),
                        arrival: Some(t),
                        departure: Some(t),
                        stop_id: self.feed.stops[stop_of(k)].id.clone(),
                        stop_sequence: seq as u32 + 1,
                        shape_dist_traveled: Some((dist * 10.0).round() / 10.0),
                    });
                }
                run += 1;
                departure += headway_s;
            }
        }
    }
}

fn polyline(from: (f64, f64), to: (f64, f64), spacing: f64) -> Vec<(f64, f64)> {
    let length = (to.0 - from.0).hypot(to.1 - from.1);
    let hops = ((length / spacing).ceil() as usize).max(1);
    (0..=hops)
        .map(|k| {
            let t = k as f64 / hops as f64;
            (from.0 + t * (to.0 - from.0), from.1 + t * (to.1 - from.1))
        })
        .collect()
}

fn arc(radius: f64, start: f64, span: f64, spacing: f64) -> Vec<(f64, f64)> {
    let hops = ((radius * span.abs() / spacing).ceil() as usize).max(2);
    (0..=hops)
        .map(|k| {
            let a = start + span * k as f64 / hops as f64;
            (radius * a.cos(), radius * a.sin())
        })
        .collect()
}

fn full_loop(radius: f64, start: f64, spacing: f64) -> Vec<(f64, f64)> {
    let mut points = arc(radius, start, 2.0 * PI, spacing);
    // Close exactly so the last point is recognised as the first stop.
    let first = points[0];
    *points.last_mut().unwrap() = first;
    points
}

/// Generates the synthetic city for `(spec, seed)`.
pub fn synthesize_network(spec: &SynthSpec, seed: u64) -> Result<SynthCity> {
    spec.validate()?;
    let mut b = Builder {
        spec,
        proj: LocalProjection::new(spec.center),
        rng: ChaCha8Rng::seed_from_u64(seed),
        feed: Feed::default(),
        roles: BTreeMap::new(),
    };
    let radius = spec.radius_m;
    let spacing = spec.stop_spacing_m;

    let n_radial = spec.radial_lines;
    for i in 0..n_radial {
        let sector = 2.0 * PI / f64::from(n_radial);
        let angle = sector * f64::from(i) + b.rng.gen_range(-0.3..0.3) * sector;
        let length = radius * b.rng.gen_range(0.5..0.95);
        let headway = (f64::from(spec.headways.radial_s) * spec.headway_factors[b.rng.gen_range(0..spec.headway_factors.len())]) as u32;
        let outer = (length * angle.cos(), length * angle.sin());
        let points = polyline(outer, (0.0, 0.0), spacing);
        let id = format!("radial-{:02}", i + 1);
        b.add_line(&id, &format!("Radial {}", i + 1), LineRole::Radial, LineMode::Bus, &points, headway.max(60), spec.speeds.bus_mps, true);
    }

    for j in 0..spec.circulator_lines {
        let ring = j % spec.rings + 1;
        let ring_radius = radius * spec.circulator_reach * f64::from(ring) / f64::from(spec.rings) * b.rng.gen_range(0.85..1.15);
        let start = b.rng.gen_range(0.0..2.0 * PI);
        let headway = (f64::from(spec.headways.circulator_s) * spec.headway_factors[b.rng.gen_range(0..spec.headway_factors.len())]) as u32;
        let points = if j < spec.rings {
            full_loop(ring_radius, start, spacing)
        } else {
            arc(ring_radius, start, b.rng.gen_range(0.5..1.5) * PI, spacing)
        };
        let id = format!("circ-{:02}", j + 1);
        b.add_line(&id, &format!("Circulator {}", j + 1), LineRole::Circulator, LineMode::Bus, &points, headway.max(60), spec.speeds.bus_mps, true);
    }

    if spec.suburban_connector {
        let angle = b.rng.gen_range(0.0..2.0 * PI);
        let outer = (0.97 * radius * angle.cos(), 0.97 * radius * angle.sin());
        let points = polyline(outer, (0.0, 0.0), spec.connector_stop_spacing_m);
        b.add_line(SUBURBAN_CONNECTOR, "Suburban rail", LineRole::SuburbanConnector, LineMode::Rail, &points, spec.headways.connector_s, spec.speeds.rail_mps, true);
    }

    if spec.center_circulator {
        let start = b.rng.gen_range(0.0..2.0 * PI);
        let points = full_loop((0.08 * radius).max(500.0), start, (0.6 * spacing).max(200.0));
        b.add_line(CENTER_CIRCULATOR, "Center loop", LineRole::CenterCirculator, LineMode::Bus, &points, spec.headways.center_s, spec.speeds.bus_mps, true);
    }

    if spec.null_line {
        let offset = 5.0 * radius + 30_000.0;
        let points = polyline((offset, 0.0), (offset + 4.0 * spacing, 0.0), spacing);
        b.add_line(NULL_LINE, "Remote shuttle", LineRole::Null, LineMode::Bus, &points, spec.headways.radial_s, spec.speeds.bus_mps, true);
    }

    b.feed.calendars.push(Calendar {
        service_id: "daily".to_string(),
        weekdays: [true; 7],
        start_date: spec.start_date,
        end_date: spec.end_date,
    });

    let pop = &spec.population;
    let cell_km2 = (pop.cell_m / 1000.0).powi(2);
    let reach = (radius / pop.cell_m).ceil() as i64;
    let mut population = Vec::new();
    for gy in -reach..=reach {
        for gx in -reach..=reach {
            let (x, y) = (gx as f64 * pop.cell_m, gy as f64 * pop.cell_m);
            let d = x.hypot(y);
            let noise = 1.0 + pop.noise * b.rng.gen_range(-1.0..1.0);
            if d > radius {
                continue;
            }
            let persons = (pop.center_density_per_km2 * cell_km2 * (-d / pop.decay_m).exp() * noise).round();
            if persons > 0.0 {
                population.push(PopulationCell {
                    location: b.proj.inverse(x, y),
                    persons,
                });
            }
        }
    }
    let bbox = bounding_box(population.iter().map(|c| c.location)).unwrap_or((spec.center, spec.center));

    Ok(SynthCity {
        feed: b.feed,
        population,
        manifest: SynthManifest {
            spec: spec.clone(),
            seed,
            bbox,
            roles: b.roles,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gtfs::{build_timetable, parse_feed, TimetableOptions};

    fn single_radial() -> SynthSpec {
        SynthSpec {
            radial_lines: 1,
            circulator_lines: 0,
            suburban_connector: false,
            center_circulator: false,
            headways: Headways {
                radial_s: 600,
                ..Headways::default()
            },
            headway_factors: vec![1.0],
            service_start_s: 7 * 3600,
            service_end_s: 9 * 3600,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn trips_per_direction_follow_window_over_headway() {
        for seed in 0..10 {
            let city = synthesize_network(&single_radial(), seed).unwrap();
            let first_departures = |dir: &str| -> Vec<u32> {
                city.feed
                    .stop_times
                    .iter()
                    .filter(|s| s.stop_sequence == 1 && s.trip_id.contains(dir))
                    .map(|s| s.departure.unwrap())
                    .collect()
            };
            for dir in ["-a-", "-b-"] {
                let times = first_departures(dir);
                assert_eq!(times.len(), 12, "seed {seed}");
                assert!(times.windows(2).all(|w| w[1] - w[0] == 600));
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec::default();
        let a = synthesize_network(&spec, 5).unwrap();
        let b = synthesize_network(&spec, 5).unwrap();
        let c = synthesize_network(&spec, 6).unwrap();
        assert_eq!(a.feed, b.feed);
        assert_eq!(a.population, b.population);
        assert_ne!(a.feed, c.feed);

        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        a.write(d1.path()).unwrap();
        b.write(d2.path()).unwrap();
        for file in ["gtfs/stops.txt", "gtfs/stop_times.txt", "gtfs/trips.txt", "population.csv", "synth.json"] {
            assert_eq!(fs::read(d1.path().join(file)).unwrap(), fs::read(d2.path().join(file)).unwrap(), "{file}");
        }
    }

    #[test]
    fn thirty_line_city_round_trips_through_parser() {
        let spec = SynthSpec::default();
        assert_eq!(spec.line_count(), 30);
        let city = synthesize_network(&spec, 1).unwrap();
        assert_eq!(city.feed.routes.len(), 30);
        let dir = tempfile::tempdir().unwrap();
        city.write(dir.path()).unwrap();
        let parsed = parse_feed(&dir.path().join("gtfs")).unwrap();
        assert_eq!(parsed, city.feed);

        let direct = build_timetable(&city.feed, &TimetableOptions::default()).unwrap();
        let reparsed = build_timetable(&parsed, &TimetableOptions::default()).unwrap();
        assert_eq!(direct.connections(), reparsed.connections());
        assert!(direct.connections().len() > 1000);
        // Shape distances pass the sanity band, so hops use them.
        assert!(direct.connections().iter().all(|c| c.length_m > 0.0));
    }

    #[test]
    fn roles_are_recorded() {
        let spec = SynthSpec {
            null_line: true,
            ..SynthSpec::default()
        };
        let city = synthesize_network(&spec, 2).unwrap();
        let roles = &city.manifest.roles;
        assert_eq!(roles[SUBURBAN_CONNECTOR], LineRole::SuburbanConnector);
        assert_eq!(roles[CENTER_CIRCULATOR], LineRole::CenterCirculator);
        assert_eq!(roles[NULL_LINE], LineRole::Null);
        assert_eq!(roles.len(), 31);
        let (sw, ne) = city.manifest.bbox;
        let null_stop = city.feed.stops.iter().find(|s| s.id.starts_with(NULL_LINE)).unwrap();
        assert!(null_stop.location.lon > ne.lon || null_stop.location.lon < sw.lon);
    }

    #[test]
    fn inconsistent_specs_are_rejected() {
        let none = SynthSpec {
            radial_lines: 0,
            circulator_lines: 0,
            suburban_connector: false,
            center_circulator: false,
            ..SynthSpec::default()
        };
        assert!(matches!(synthesize_network(&none, 0), Err(Error::InvalidInput(_))));
        let bad_window = SynthSpec {
            service_end_s: 0,
            ..SynthSpec::default()
        };
        assert!(synthesize_network(&bad_window, 0).is_err());
    }
}
