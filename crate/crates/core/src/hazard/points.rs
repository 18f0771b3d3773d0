use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{BBox, Point};

/// Scattered grid points with values, indexed for nearest-neighbour lookup.
/// A point's id is its position in the input.
#[derive(Debug, Clone)]
pub struct PointGrid {
    pub crs: String,
    points: Vec<(Point, f64)>,
    bbox: BBox,
    bucket: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

#[derive(Deserialize)]
struct Row {
    x: f64,
    y: f64,
    value: f64,
}

impl PointGrid {
    pub fn new(points: Vec<(Point, f64)>, crs: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::validation("point grid is empty"));
        }
        if points.iter().any(|(p, v)| !p.is_finite() || !v.is_finite()) {
            return Err(Error::validation("point grid has non-finite entries"));
        }
        let bbox = BBox::from_points(points.iter().map(|(p, _)| p)).unwrap();
        let span = (bbox.max_x - bbox.min_x).max(bbox.max_y - bbox.min_y);
        let per_side = (points.len() as f64).sqrt().ceil().max(1.0);
        let bucket = if span > 0.0 { span / per_side } else { 1.0 };
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, (p, _)) in points.iter().enumerate() {
            buckets.entry(Self::key(&bbox, bucket, *p)).or_default().push(i);
        }
        Ok(Self {
            crs: crs.into(),
            points,
            bbox,
            bucket,
            buckets,
        })
    }

    fn key(bbox: &BBox, bucket: f64, p: Point) -> (i64, i64) {
        (
            ((p.x - bbox.min_x) / bucket).floor() as i64,
            ((p.y - bbox.min_y) / bucket).floor() as i64,
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(Point, f64)] {
        &self.points
    }

    /// Index and distance of the nearest point; equal distances resolve to
    /// the lowest index.
    pub fn nearest(&self, q: Point) -> (usize, f64) {
        let (kx, ky) = Self::key(&self.bbox, self.bucket, q);
        let mut best: Option<(usize, f64)> = None;
        let nx = ((self.bbox.max_x - self.bbox.min_x) / self.bucket).ceil() as i64 + 1;
        let ny = ((self.bbox.max_y - self.bbox.min_y) / self.bucket).ceil() as i64 + 1;
        // Rings closer than `r0` lie entirely outside the occupied grid.
        let r0 = [-kx, kx - nx, -ky, ky - ny, 0].into_iter().max().unwrap();
        let mut r = r0;
        loop {
            let mut visit = |cx: i64, cy: i64| {
                if let Some(ids) = self.buckets.get(&(cx, cy)) {
                    for &i in ids {
                        let d = self.points[i].0.distance(&q);
                        let better = match best {
                            None => true,
                            Some((bi, bd)) => d < bd || (d == bd && i < bi),
                        };
                        if better {
                            best = Some((i, d));
                        }
                    }
                }
            };
            // Walk the ring's perimeter, clipped to the grid extent.
            let (x0, x1) = ((kx - r).max(0), (kx + r).min(nx));
            let (y0, y1) = ((ky - r + 1).max(0), (ky + r - 1).min(ny));
            for cy in [ky - r, ky + r] {
                if (0..=ny).contains(&cy) {
                    for cx in x0..=x1 {
                        visit(cx, cy);
                    }
                }
                if r == 0 {
                    break;
                }
            }
            for cx in [kx - r, kx + r] {
                if r > 0 && (0..=nx).contains(&cx) {
                    for cy in y0..=y1 {
                        visit(cx, cy);
                    }
                }
            }
            // Every point in ring r+1 or beyond is at least r·bucket away.
            if let Some((_, bd)) = best {
                if bd < r as f64 * self.bucket {
                    break;
                }
            }
            if r > r0 + nx.max(ny) + 1 {
                break;
            }
            r += 1;
        }
        best.expect("point grid is non-empty")
    }

    pub fn read_csv(path: &Path, crs: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut points = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| {
                Error::validation(format!("{}: record {}: {e}", path.display(), i + 1))
            })?;
            points.push((Point::new(row.x, row.y), row.value));
        }
        PointGrid::new(points, crs).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }
}

/// Value of the grid point nearest to `point`.
pub fn sample_nearest(grid: &PointGrid, point: Point) -> f64 {
    let (i, _) = grid.nearest(point);
    grid.points[i].1
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &[(Point, f64)], q: Point) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, (p, _)) in points.iter().enumerate() {
            let d = p.distance(&q);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    #[test]
    fn coincident_and_tie_examples() {
        let g = PointGrid::new(
            vec![(Point::new(0.0, 0.0), 0.2), (Point::new(10.0, 0.0), 0.4), (Point::new(3.0, 3.0), 0.5)],
            "c",
        )
        .unwrap();
        assert_eq!(sample_nearest(&g, Point::new(3.0, 3.0)), 0.5);
        // equidistant from the 0.2 and 0.4 points (and farther from 0.5)
        assert_eq!(sample_nearest(&g, Point::new(5.0, -10.0)), 0.2);
        let single = PointGrid::new(vec![(Point::new(1.0, 1.0), 7.0)], "c").unwrap();
        assert_eq!(sample_nearest(&single, Point::new(-1e6, 5e6)), 7.0);
        assert!(PointGrid::new(vec![], "c").is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            pts in prop::collection::vec((-1000.0f64..1000.0, -1000.0f64..1000.0, 0.0f64..1.0), 1..60),
            qs in prop::collection::vec((-3000.0f64..3000.0, -3000.0f64..3000.0), 1..20),
        ) {
            let points: Vec<(Point, f64)> = pts.iter().map(|(x, y, v)| (Point::new(*x, *y), *v)).collect();
            let g = PointGrid::new(points.clone(), "c").unwrap();
            for (x, y) in qs {
                let q = Point::new(x, y);
                prop_assert_eq!(g.nearest(q).0, brute(&points, q));
            }
        }
    }
}
