use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{segments_properly_cross, Point, Polygon, RingPosition};

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonRecord {
    pub id: String,
    pub polygon: Polygon,
    pub values: BTreeMap<String, f64>,
}

/// Administrative partition (counties, states) with per-polygon values.
/// Records are kept sorted by id so containment ties resolve to the lowest.
#[derive(Debug, Clone)]
pub struct PolygonTable {
    pub crs: String,
    records: Vec<PolygonRecord>,
}

/// Numeric ids compare numerically, everything else lexically.
pub(crate) fn id_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

fn overlaps(a: &Polygon, b: &Polygon) -> bool {
    if !a.bbox().intersects(&b.bbox()) {
        return false;
    }
    for ra in a.rings() {
        for rb in b.rings() {
            for i in 0..ra.len() {
                let (p, q) = (ra[i], ra[(i + 1) % ra.len()]);
                for j in 0..rb.len() {
                    if segments_properly_cross(p, q, rb[j], rb[(j + 1) % rb.len()]) {
                        return true;
                    }
                }
            }
        }
    }
    let strictly_inside = |x: &Polygon, y: &Polygon| {
        x.exterior.iter().any(|p| y.position(*p) == RingPosition::Inside)
            || x.exterior.iter().enumerate().any(|(i, p)| {
                let q = x.exterior[(i + 1) % x.exterior.len()];
                y.position(Point::new((p.x + q.x) / 2.0, (p.y + q.y) / 2.0)) == RingPosition::Inside
            })
    };
    strictly_inside(a, b) || strictly_inside(b, a) || a == b
}

impl PolygonTable {
    /// Build a table, rejecting duplicate ids and overlapping polygons.
    pub fn new(mut records: Vec<PolygonRecord>, crs: impl Into<String>) -> Result<Self> {
        records.sort_by(|a, b| id_cmp(&a.id, &b.id));
        for w in records.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::validation(format!("duplicate polygon id {}", w[0].id)));
            }
        }
        for i in 0..records.len() {
            for j in (i + 1)..records.len() {
                if overlaps(&records[i].polygon, &records[j].polygon) {
                    return Err(Error::validation(format!(
                        "polygons {} and {} overlap",
                        records[i].id, records[j].id
                    )));
                }
            }
        }
        Ok(Self {
            crs: crs.into(),
            records,
        })
    }

    pub fn records(&self) -> &[PolygonRecord] {
        &self.records
    }

    /// Lowest-id polygon containing `p` (boundary inclusive).
    pub fn locate(&self, p: Point) -> Option<&PolygonRecord> {
        self.records
            .iter()
            .find(|r| r.polygon.bbox().contains(&p) && r.polygon.contains(p))
    }

    /// CSV with an id column, a `wkt` polygon column, and numeric value
    /// columns. Every non-id, non-geometry column is read as a value.
    pub fn read_csv(path: &Path, id_column: &str, crs: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
        let id_idx = headers
            .iter()
            .position(|h| h == id_column)
            .ok_or_else(|| Error::validation(format!("{}: missing `{id_column}` column", path.display())))?;
        let wkt_idx = headers
            .iter()
            .position(|h| h == "wkt")
            .ok_or_else(|| Error::validation(format!("{}: missing `wkt` column", path.display())))?;
        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| Error::csv(path, e))?;
            let ctx = |msg: String| {
                Error::validation(format!("{}: record {}: {msg}", path.display(), i + 1))
            };
            let polygon = Polygon::from_wkt(&row[wkt_idx]).map_err(|e| ctx(e.to_string()))?;
            let mut values = BTreeMap::new();
            for (k, h) in headers.iter().enumerate() {
                if k == id_idx || k == wkt_idx || row[k].trim().is_empty() {
                    continue;
                }
                let v: f64 = row[k]
                    .trim()
                    .parse()
                    .map_err(|_| ctx(format!("column `{h}` is not numeric")))?;
                values.insert(h.to_string(), v);
            }
            records.push(PolygonRecord {
                id: row[id_idx].to_string(),
                polygon,
                values,
            });
        }
        PolygonTable::new(records, crs).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }
}

/// Value of `column` from the polygon containing each point; `None` when no
/// polygon covers the point or the polygon lacks the column.
pub fn join_polygon(table: &PolygonTable, column: &str, points: &[Point]) -> Vec<Option<f64>> {
    points
        .iter()
        .map(|p| table.locate(*p).and_then(|r| r.values.get(column).copied()))
        .collect()
}
