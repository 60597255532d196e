use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{Footpath, Stop, Transfer};
use crate::geodata::great_circle_m;

/// Straight-line walking model between stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootpathParams {
    pub radius_m: f64,
    pub walk_speed_mps: f64,
    /// Ratio of street distance to straight-line distance.
    pub detour: f64,
    pub min_transfer_s: u32,
}

impl Default for FootpathParams {
    fn default() -> Self {
        FootpathParams {
            radius_m: 500.0,
            walk_speed_mps: 1.39,
            detour: 1.3,
            min_transfer_s: 60,
        }
    }
}

const METERS_PER_DEGREE: f64 = 111_194.926_644_558_7;

/// Walking transfers between every pair of distinct stops closer than
/// `radius_m`. Durations are `detour * distance / speed` rounded up and
/// floored at `min_transfer_s` (and at one second); a larger `min_transfer_time` from
/// `transfers.txt` (type 2) wins, and type 3 forbids the transfer. The
/// result is symmetric and sorted by `(from, to)`.
pub fn build_footpaths(stops: &[Stop], params: &FootpathParams, transfers: &[Transfer]) -> Vec<Footpath> {
    let floor = params.min_transfer_s.max(1);
    let walk = |d: f64| ((params.detour * d / params.walk_speed_mps).ceil() as u32).max(floor);

    // Keyed by (low index, high index).
    let mut pairs: BTreeMap<(u32, u32), u32> = BTreeMap::new();

    if params.radius_m > 0.0 && !stops.is_empty() {
        let max_abs_lat = stops.iter().map(|s| s.location.lat.abs()).fold(0.0, f64::max);
        let cos_lat = max_abs_lat.to_radians().cos();
        let cell_lat = params.radius_m / METERS_PER_DEGREE;
        if cos_lat > 1e-3 && cell_lat < 10.0 {
            let cell_lon = cell_lat / cos_lat;
            let cell_of = |s: &Stop| {
                (
                    (s.location.lat / cell_lat).floor() as i64,
                    (s.location.lon / cell_lon).floor() as i64,
                )
            };
            let mut cells: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
            for (i, s) in stops.iter().enumerate() {
                cells.entry(cell_of(s)).or_default().push(i as u32);
            }
            for (i, s) in stops.iter().enumerate() {
                let (cy, cx) = cell_of(s);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let Some(bucket) = cells.get(&(cy + dy, cx + dx)) else {
                            continue;
                        };
                        for &j in bucket.iter().filter(|&&j| j as usize > i) {
                            let d = great_circle_m(s.location, stops[j as usize].location);
                            if d <= params.radius_m {
                                pairs.insert((i as u32, j), walk(d));
                            }
                        }
                    }
                }
            }
        } else {
            for i in 0..stops.len() {
                for j in i + 1..stops.len() {
                    let d = great_circle_m(stops[i].location, stops[j].location);
                    if d <= params.radius_m {
                        pairs.insert((i as u32, j as u32), walk(d));
                    }
                }
            }
        }
    }

    let index: HashMap<&str, u32> = stops.iter().enumerate().map(|(i, s)| (s.id.as_str(), i as u32)).collect();
    for t in transfers {
        let (Some(&a), Some(&b)) = (index.get(t.from_stop_id.as_str()), index.get(t.to_stop_id.as_str())) else {
            continue;
        };
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        match (t.transfer_type, t.min_transfer_time) {
            (3, _) => {
                pairs.remove(&key);
            }
            (2, Some(min_time)) => {
                let entry = pairs.entry(key).or_insert(floor);
                *entry = (*entry).max(min_time);
            }
            _ => {}
        }
    }

    let mut paths: Vec<Footpath> = pairs
        .into_iter()
        .flat_map(|((a, b), duration_s)| {
            [
                Footpath { from: a, to: b, duration_s },
                Footpath { from: b, to: a, duration_s },
            ]
        })
        .collect();
    paths.sort_by_key(|f| (f.from, f.to));
    paths
}
