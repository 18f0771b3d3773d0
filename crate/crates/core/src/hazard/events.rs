use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geojson::{FeatureCollection, Geometry};
use crate::geometry::{point_segment_distance, BBox, Point};

pub const HAIL_CELL_M: f64 = 10_000.0;
pub const HAIL_RECORD_YEARS: f64 = 70.0;
pub const HAIL_MIN_DIAMETER_IN: f64 = 1.0;
pub const TORNADO_RECORD_YEARS: f64 = 29.0;

/// EF rating to estimated wind speed (m/s), linear between EF0 = 29 and
/// EF5 = 89.
pub fn ef_to_wind_mps(ef: u8) -> Option<f64> {
    (ef <= 5).then_some(29.0 + 12.0 * ef as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct HailEvent {
    pub x: f64,
    pub y: f64,
    pub diameter_in: f64,
}

/// Sparse per-cell hail surfaces on a square grid anchored at `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct HailSurfaces {
    pub cell_m: f64,
    pub origin: Point,
    pub record_years: f64,
    /// cell → (event count, max diameter)
    pub cells: BTreeMap<(i64, i64), (u64, f64)>,
}

impl HailSurfaces {
    fn key(&self, p: Point) -> (i64, i64) {
        (
            ((p.x - self.origin.x) / self.cell_m).floor() as i64,
            ((p.y - self.origin.y) / self.cell_m).floor() as i64,
        )
    }

    /// `(annual rate, max diameter)` of the cell containing `p`; `None` for
    /// empty cells.
    pub fn sample(&self, p: Point) -> Option<(f64, f64)> {
        self.cells
            .get(&self.key(p))
            .map(|(n, d)| (*n as f64 / self.record_years, *d))
    }

    pub fn read_events(path: &Path) -> Result<Vec<HailEvent>> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut out = Vec::new();
        for (i, row) in rdr.deserialize::<HailEvent>().enumerate() {
            let ev = row.map_err(|e| {
                Error::validation(format!("{}: record {}: {e}", path.display(), i + 1))
            })?;
            if !(ev.x.is_finite() && ev.y.is_finite() && ev.diameter_in.is_finite()) {
                return Err(Error::validation(format!(
                    "{}: record {}: non-finite value",
                    path.display(),
                    i + 1
                )));
            }
            out.push(ev);
        }
        Ok(out)
    }
}

/// Count events and track the maximum diameter per grid cell. Events below
/// the significant-hail threshold are ignored.
pub fn rasterize_hail(
    events: &[HailEvent],
    cell_m: f64,
    origin: Point,
    record_years: f64,
) -> Result<HailSurfaces> {
    if !(cell_m > 0.0) || !(record_years > 0.0) {
        return Err(Error::validation("hail cell size and record years must be positive"));
    }
    let mut s = HailSurfaces {
        cell_m,
        origin,
        record_years,
        cells: BTreeMap::new(),
    };
    for ev in events.iter().filter(|e| e.diameter_in >= HAIL_MIN_DIAMETER_IN) {
        let k = s.key(Point::new(ev.x, ev.y));
        let e = s.cells.entry(k).or_insert((0, f64::NEG_INFINITY));
        e.0 += 1;
        e.1 = e.1.max(ev.diameter_in);
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TornadoTrack {
    pub id: String,
    pub path: Vec<Point>,
    /// `None` for unknown magnitude.
    pub ef: Option<u8>,
    pub width_m: f64,
}

impl TornadoTrack {
    fn radius(&self) -> f64 {
        self.width_m / 2.0
    }

    fn bbox(&self) -> BBox {
        BBox::from_points(&self.path).unwrap().expand(self.radius())
    }

    /// Whether `p` lies inside the swath (track buffered by half the path
    /// width on each side, closed set).
    pub fn swath_contains(&self, p: Point) -> bool {
        let r = self.radius();
        if self.path.len() == 1 {
            return self.path[0].distance(&p) <= r;
        }
        self.path
            .windows(2)
            .any(|w| point_segment_distance(p, w[0], w[1]).0 <= r)
    }

    /// Tracks from CSV (`track_id, ef, width_m, start_x, start_y, end_x,
    /// end_y`) or GeoJSON LineStrings with `ef` and `width_m` properties.
    /// Negative or missing `ef` marks an unknown magnitude.
    pub fn read(path: &Path) -> Result<Vec<TornadoTrack>> {
        let is_json = matches!(
            path.extension().and_then(|e| e.to_str()),
            Some("geojson") | Some("json")
        );
        let parse_ef = |v: Option<f64>| match v {
            Some(e) if (0.0..=5.0).contains(&e) && e.fract() == 0.0 => Some(e as u8),
            _ => None,
        };
        let mut out = Vec::new();
        if is_json {
            let fc = FeatureCollection::read(path)?;
            for (i, f) in fc.features.iter().enumerate() {
                let Geometry::LineString(path_pts) = &f.geometry else {
                    return Err(Error::validation(format!(
                        "{}: feature {i}: expected LineString",
                        path.display()
                    )));
                };
                let width = f.prop_f64("width_m").ok_or_else(|| {
                    Error::validation(format!("{}: feature {i}: missing width_m", path.display()))
                })?;
                out.push(TornadoTrack {
                    id: f.identifier().unwrap_or_else(|| format!("track{i}")),
                    path: path_pts.clone(),
                    ef: parse_ef(f.prop_f64("ef")),
                    width_m: width,
                });
            }
        } else {
            #[derive(Deserialize)]
            struct Row {
                track_id: String,
                ef: Option<f64>,
                width_m: f64,
                start_x: f64,
                start_y: f64,
                end_x: f64,
                end_y: f64,
            }
            let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
            for (i, row) in rdr.deserialize::<Row>().enumerate() {
                let r = row.map_err(|e| {
                    Error::validation(format!("{}: record {}: {e}", path.display(), i + 1))
                })?;
                out.push(TornadoTrack {
                    id: r.track_id,
                    path: vec![Point::new(r.start_x, r.start_y), Point::new(r.end_x, r.end_y)],
                    ef: parse_ef(r.ef),
                    width_m: r.width_m,
                });
            }
        }
        for t in &out {
            if t.path.is_empty() || !(t.width_m >= 0.0) || t.path.iter().any(|p| !p.is_finite()) {
                return Err(Error::validation(format!(
                    "{}: track {}: invalid geometry or width",
                    path.display(),
                    t.id
                )));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TornadoExposure {
    pub hit_count: u32,
    pub ef2plus_hits: u32,
    pub ef2plus_rate: f64,
    /// Wind speed of the strongest swath containing the asset.
    pub max_ef_wind_mps: Option<f64>,
}

/// Per-asset swath containment counts. Tracks of unknown magnitude are
/// excluded.
pub fn tornado_intersect(
    tracks: &[TornadoTrack],
    assets: &[Point],
    record_years: f64,
) -> Vec<TornadoExposure> {
    let known: Vec<(&TornadoTrack, BBox)> = tracks
        .iter()
        .filter(|t| t.ef.is_some())
        .map(|t| (t, t.bbox()))
        .collect();
    assets
        .par_iter()
        .map(|p| {
            let mut e = TornadoExposure::default();
            let mut max_ef: Option<u8> = None;
            for (t, bb) in &known {
                if !bb.contains(p) || !t.swath_contains(*p) {
                    continue;
                }
                let ef = t.ef.unwrap();
                e.hit_count += 1;
                if ef >= 2 {
                    e.ef2plus_hits += 1;
                }
                max_ef = Some(max_ef.map_or(ef, |m| m.max(ef)));
            }
            e.ef2plus_rate = e.ef2plus_hits as f64 / record_years;
            e.max_ef_wind_mps = max_ef.and_then(ef_to_wind_mps);
            e
        })
        .collect()
}
