//! Hexagonal tessellation of the study area, population attachment and the
//! geodesic primitives used by walking and connection lengths.
//!
//! Hexagons are flat-top and live on an axial lattice laid out in a local
//! azimuthal equidistant projection centred on the grid origin, so distances
//! from the origin are metric-true. Axial maths follows the usual cube
//! coordinate conventions (`q + r + s = 0`).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::invalid(format!(
                "coordinate out of range: lat {lat}, lon {lon}"
            )));
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// Haversine distance in meters.
pub fn great_circle_m(a: GeoPoint, b: GeoPoint) -> f64 {
    EARTH_RADIUS_M * central_angle(a, b)
}

fn central_angle(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * h.sqrt().min(1.0).asin()
}

/// Spherical azimuthal equidistant projection around `origin`.
/// `x` points east and `y` north, both in meters.
#[derive(Debug, Clone, Copy)]
pub struct LocalProjection {
    origin: GeoPoint,
}

impl LocalProjection {
    pub fn new(origin: GeoPoint) -> Self {
        LocalProjection { origin }
    }

    pub fn forward(&self, p: GeoPoint) -> (f64, f64) {
        let c = central_angle(self.origin, p);
        if c == 0.0 {
            return (0.0, 0.0);
        }
        let phi1 = self.origin.lat.to_radians();
        let phi = p.lat.to_radians();
        let dlambda = (p.lon - self.origin.lon).to_radians();
        let azimuth = f64::atan2(
            dlambda.sin() * phi.cos(),
            phi1.cos() * phi.sin() - phi1.sin() * phi.cos() * dlambda.cos(),
        );
        let rho = EARTH_RADIUS_M * c;
        (rho * azimuth.sin(), rho * azimuth.cos())
    }

    pub fn inverse(&self, x: f64, y: f64) -> GeoPoint {
        let rho = x.hypot(y);
        if rho == 0.0 {
            return self.origin;
        }
        let c = rho / EARTH_RADIUS_M;
        let azimuth = f64::atan2(x, y);
        let phi1 = self.origin.lat.to_radians();
        let phi = (phi1.sin() * c.cos() + phi1.cos() * c.sin() * azimuth.cos()).asin();
        let dlambda = f64::atan2(
            azimuth.sin() * c.sin() * phi1.cos(),
            c.cos() - phi1.sin() * phi.sin(),
        );
        let mut lon = self.origin.lon + dlambda.to_degrees();
        if lon > 180.0 {
            lon -= 360.0;
        } else if lon < -180.0 {
            lon += 360.0;
        }
        GeoPoint {
            lat: phi.to_degrees(),
            lon,
        }
    }
}

/// Axial hexagon coordinate; the third cube coordinate is `-q - r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Axial {
    pub q: i32,
    pub r: i32,
}

impl Axial {
    /// Planar center of a flat-top hexagon with circumradius `side`.
    pub fn to_plane(self, side: f64) -> (f64, f64) {
        let q = f64::from(self.q);
        let r = f64::from(self.r);
        (side * 1.5 * q, side * SQRT_3 * (r + q / 2.0))
    }

    /// Hexagon containing a planar point, by cube rounding.
    pub fn from_plane(x: f64, y: f64, side: f64) -> Self {
        let q = (2.0 / 3.0) * x / side;
        let r = (-x / 3.0 + SQRT_3 / 3.0 * y) / side;
        cube_round(q, r)
    }
}

fn cube_round(q: f64, r: f64) -> Axial {
    let s = -q - r;
    let (mut rq, mut rr, rs) = (q.round(), r.round(), s.round());
    let (dq, dr, ds) = ((rq - q).abs(), (rr - r).abs(), (rs - s).abs());
    if dq > dr && dq > ds {
        rq = -rr - rs;
    } else if dr > ds {
        rr = -rq - rs;
    }
    Axial {
        q: rq as i32,
        r: rr as i32,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hexagon {
    pub id: u32,
    pub axial: Axial,
    /// Barycenter.
    pub center: GeoPoint,
    pub population: u64,
}

/// A population point mass, e.g. one census raster cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationCell {
    pub location: GeoPoint,
    pub persons: f64,
}

/// What `assign_population` could not place.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentReport {
    pub assigned_cells: usize,
    pub assigned_population: u64,
    pub outside_cells: usize,
    pub outside_population: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridRepr {
    origin: GeoPoint,
    side_m: f64,
    hexagons: Vec<Hexagon>,
}

/// Flat-top hexagonal tessellation. Hexagons are kept sorted by id.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct HexGrid {
    origin: GeoPoint,
    side_m: f64,
    hexagons: Vec<Hexagon>,
    by_axial: HashMap<Axial, usize>,
}

impl TryFrom<GridRepr> for HexGrid {
    type Error = Error;

    fn try_from(repr: GridRepr) -> Result<Self> {
        HexGrid::from_parts(repr.origin, repr.side_m, repr.hexagons)
    }
}

impl From<HexGrid> for GridRepr {
    fn from(grid: HexGrid) -> Self {
        GridRepr {
            origin: grid.origin,
            side_m: grid.side_m,
            hexagons: grid.hexagons,
        }
    }
}

impl HexGrid {
    pub fn from_parts(origin: GeoPoint, side_m: f64, mut hexagons: Vec<Hexagon>) -> Result<Self> {
        if !(side_m > 0.0) {
            return Err(Error::invalid(format!("hexagon side must be positive, got {side_m}")));
        }
        hexagons.sort_by_key(|h| h.id);
        let mut by_axial = HashMap::with_capacity(hexagons.len());
        for (pos, h) in hexagons.iter().enumerate() {
            if pos > 0 && hexagons[pos - 1].id == h.id {
                return Err(Error::invalid(format!("duplicate hexagon id {}", h.id)));
            }
            if by_axial.insert(h.axial, pos).is_some() {
                return Err(Error::invalid(format!(
                    "duplicate hexagon at axial ({}, {})",
                    h.axial.q, h.axial.r
                )));
            }
        }
        Ok(HexGrid {
            origin,
            side_m,
            hexagons,
            by_axial,
        })
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn side_m(&self) -> f64 {
        self.side_m
    }

    pub fn hexagons(&self) -> &[Hexagon] {
        &self.hexagons
    }

    pub fn len(&self) -> usize {
        self.hexagons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hexagons.is_empty()
    }

    pub fn projection(&self) -> LocalProjection {
        LocalProjection::new(self.origin)
    }

    /// Position of hexagon `id` in [`HexGrid::hexagons`].
    pub fn position(&self, id: u32) -> Option<usize> {
        self.hexagons.binary_search_by_key(&id, |h| h.id).ok()
    }

    pub fn hexagon(&self, id: u32) -> Option<&Hexagon> {
        self.position(id).map(|pos| &self.hexagons[pos])
    }

    pub fn total_population(&self) -> u64 {
        self.hexagons.iter().map(|h| h.population).sum()
    }

    /// Area of one hexagon in km².
    pub fn hexagon_area_km2(&self) -> f64 {
        hexagon_area_km2(self.side_m)
    }

    /// Id of the hexagon containing `p`, if that hexagon is part of the grid.
    pub fn locate(&self, p: GeoPoint) -> Option<u32> {
        self.locate_position(p).map(|pos| self.hexagons[pos].id)
    }

    pub(crate) fn locate_position(&self, p: GeoPoint) -> Option<usize> {
        let (x, y) = self.projection().forward(p);
        let axial = Axial::from_plane(x, y, self.side_m);
        self.by_axial.get(&axial).copied()
    }

    /// Closed exterior ring of a hexagon, counter-clockwise, first vertex
    /// repeated at the end.
    pub fn ring(&self, hex: &Hexagon) -> Vec<GeoPoint> {
        let proj = self.projection();
        let (cx, cy) = hex.axial.to_plane(self.side_m);
        let mut ring: Vec<GeoPoint> = (0..6)
            .map(|i| {
                let angle = PI / 3.0 * f64::from(i);
                proj.inverse(cx + self.side_m * angle.cos(), cy + self.side_m * angle.sin())
            })
            .collect();
        ring.push(ring[0]);
        ring
    }

    fn with_hexagons(&self, hexagons: Vec<Hexagon>) -> HexGrid {
        let by_axial = hexagons.iter().enumerate().map(|(pos, h)| (h.axial, pos)).collect();
        HexGrid {
            origin: self.origin,
            side_m: self.side_m,
            hexagons,
            by_axial,
        }
    }
}

pub fn hexagon_area_km2(side_m: f64) -> f64 {
    let side_km = side_m / 1000.0;
    1.5 * SQRT_3 * side_km * side_km
}

/// Every lattice hexagon whose center falls inside the bounding box
/// `(south_west, north_east)`. The lattice is anchored at the box center.
pub fn build_grid(south_west: GeoPoint, north_east: GeoPoint, side_m: f64) -> Result<HexGrid> {
    if !(side_m > 0.0) || !side_m.is_finite() {
        return Err(Error::invalid(format!("hexagon side must be positive, got {side_m}")));
    }
    if !(north_east.lat > south_west.lat) || !(north_east.lon > south_west.lon) {
        return Err(Error::invalid(format!(
            "bounding box must have positive extent with corners (south-west, north-east), got \
             ({}, {}) - ({}, {})",
            south_west.lat, south_west.lon, north_east.lat, north_east.lon
        )));
    }
    let origin = GeoPoint {
        lat: (south_west.lat + north_east.lat) / 2.0,
        lon: (south_west.lon + north_east.lon) / 2.0,
    };
    let proj = LocalProjection::new(origin);

    // Box edges are curved in the projection; sample them densely and pad.
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    const SAMPLES: usize = 32;
    for i in 0..=SAMPLES {
        let t = i as f64 / SAMPLES as f64;
        let lat = south_west.lat + t * (north_east.lat - south_west.lat);
        let lon = south_west.lon + t * (north_east.lon - south_west.lon);
        for p in [
            GeoPoint { lat, lon: south_west.lon },
            GeoPoint { lat, lon: north_east.lon },
            GeoPoint { lat: south_west.lat, lon },
            GeoPoint { lat: north_east.lat, lon },
        ] {
            let (x, y) = proj.forward(p);
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    let pad = 2.0 * side_m;
    let (xmin, xmax, ymin, ymax) = (xmin - pad, xmax + pad, ymin - pad, ymax + pad);

    let q_lo = (xmin / (1.5 * side_m)).floor() as i32;
    let q_hi = (xmax / (1.5 * side_m)).ceil() as i32;
    let mut hexagons = Vec::new();
    for q in q_lo..=q_hi {
        let half_q = f64::from(q) / 2.0;
        let r_lo = (ymin / (SQRT_3 * side_m) - half_q).floor() as i32;
        let r_hi = (ymax / (SQRT_3 * side_m) - half_q).ceil() as i32;
        for r in r_lo..=r_hi {
            let axial = Axial { q, r };
            let (x, y) = axial.to_plane(side_m);
            let center = proj.inverse(x, y);
            if (south_west.lat..=north_east.lat).contains(&center.lat)
                && (south_west.lon..=north_east.lon).contains(&center.lon)
            {
                hexagons.push((axial, center));
            }
        }
    }
    hexagons.sort_by_key(|(axial, _)| *axial);
    let hexagons = hexagons
        .into_iter()
        .enumerate()
        .map(|(id, (axial, center))| Hexagon {
            id: id as u32,
            axial,
            center,
            population: 0,
        })
        .collect();
    HexGrid::from_parts(origin, side_m, hexagons)
}

/// Adds each cell's population to the hexagon containing it. Counts are
/// rounded to whole persons. Cells outside the grid are tallied in the
/// report.
pub fn assign_population(
    grid: &HexGrid,
    cells: &[PopulationCell],
) -> Result<(HexGrid, AssignmentReport)> {
    if let Some(bad) = cells.iter().find(|c| !(c.persons >= 0.0) || !c.persons.is_finite()) {
        return Err(Error::invalid(format!(
            "population must be a non-negative number, got {} at ({}, {})",
            bad.persons, bad.location.lat, bad.location.lon
        )));
    }
    let mut hexagons = grid.hexagons.clone();
    let mut report = AssignmentReport::default();
    for cell in cells {
        let persons = cell.persons.round() as u64;
        match grid.locate_position(cell.location) {
            Some(pos) => {
                hexagons[pos].population += persons;
                report.assigned_cells += 1;
                report.assigned_population += persons;
            }
            None => {
                report.outside_cells += 1;
                report.outside_population += persons;
            }
        }
    }
    Ok((grid.with_hexagons(hexagons), report))
}

/// Keeps hexagons whose density (persons per km²) is at least `min_density`.
pub fn filter_low_density(grid: &HexGrid, min_density: f64) -> Result<HexGrid> {
    if !(min_density >= 0.0) {
        return Err(Error::invalid(format!(
            "minimum density must be non-negative, got {min_density}"
        )));
    }
    let area = grid.hexagon_area_km2();
    let kept = grid
        .hexagons
        .iter()
        .filter(|h| h.population as f64 / area >= min_density)
        .cloned()
        .collect();
    Ok(grid.with_hexagons(kept))
}

#[derive(Debug, Deserialize)]
struct PopulationRow {
    lat: f64,
    lon: f64,
    population: f64,
}

/// Reads a `lat,lon,population` CSV.
pub fn read_population_csv(path: &Path) -> Result<Vec<PopulationCell>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let context = || format!("reading population file {}", path.display());
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(context(), e))?;
    let mut cells = Vec::new();
    for row in reader.deserialize::<PopulationRow>() {
        let row = row.map_err(|e| Error::csv(context(), e))?;
        cells.push(PopulationCell {
            location: GeoPoint::new(row.lat, row.lon)?,
            persons: row.population,
        });
    }
    Ok(cells)
}

pub fn write_population_csv(path: &Path, cells: &[PopulationCell]) -> Result<()> {
    let context = || format!("writing population file {}", path.display());
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::csv(context(), e))?;
    writer
        .write_record(["lat", "lon", "population"])
        .map_err(|e| Error::csv(context(), e))?;
    for c in cells {
        writer
            .write_record([
                c.location.lat.to_string(),
                c.location.lon.to_string(),
                c.persons.to_string(),
            ])
            .map_err(|e| Error::csv(context(), e))?;
    }
    writer.flush().map_err(|e| Error::io(context(), e))
}

/// Bounding box `(south_west, north_east)` of a set of points, or `None`
/// when empty.
pub fn bounding_box(points: impl IntoIterator<Item = GeoPoint>) -> Option<(GeoPoint, GeoPoint)> {
    points.into_iter().fold(None, |acc, p| match acc {
        None => Some((p, p)),
        Some((sw, ne)) => Some((
            GeoPoint {
                lat: sw.lat.min(p.lat),
                lon: sw.lon.min(p.lon),
            },
            GeoPoint {
                lat: ne.lat.max(p.lat),
                lon: ne.lon.max(p.lon),
            },
        )),
    })
}
