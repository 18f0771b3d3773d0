//! Planar geometry in projected (equal-area, metre) coordinates.
//!
//! Only what the pipeline needs: polylines with arc-length parameterization,
//! simple polygons with holes, point/segment distances, convex hulls and
//! half-plane clipping for service-area tessellation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METERS_PER_MILE: f64 = 1609.344;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Distance from `p` to segment `ab` and the clamped parameter `t ∈ [0,1]`
/// of the closest point.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> (f64, f64) {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return (p.distance(&a), 0.0);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    let q = Point::new(a.x + t * dx, a.y + t * dy);
    (p.distance(&q), t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Point>) -> Option<Self> {
        let mut it = pts.into_iter();
        let first = it.next()?;
        let mut b = BBox {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        };
        for p in it {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        Some(b)
    }

    pub fn expand(&self, d: f64) -> Self {
        BBox {
            min_x: self.min_x - d,
            min_y: self.min_y - d,
            max_x: self.max_x + d,
            max_y: self.max_y + d,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn intersects(&self, o: &BBox) -> bool {
        self.min_x <= o.max_x && o.min_x <= self.max_x && self.min_y <= o.max_y && o.min_y <= self.max_y
    }
}

/// A polyline parameterized by cumulative straight-segment distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<Point>,
    cumulative: Vec<f64>,
}

impl Polyline {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::validation("polyline needs at least two vertices"));
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::validation("polyline has non-finite coordinates"));
        }
        let mut cumulative = Vec::with_capacity(vertices.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in vertices.windows(2) {
            acc += w[0].distance(&w[1]);
            cumulative.push(acc);
        }
        Ok(Self {
            vertices,
            cumulative,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn bbox(&self) -> BBox {
        BBox::from_points(&self.vertices).unwrap()
    }

    /// Closest point on the line: `(distance, arc position)`.
    /// Ties between segments resolve to the smallest arc position.
    pub fn project(&self, p: Point) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for (i, w) in self.vertices.windows(2).enumerate() {
            let (d, t) = point_segment_distance(p, w[0], w[1]);
            if d < best.0 {
                let seg = self.cumulative[i + 1] - self.cumulative[i];
                best = (d, self.cumulative[i] + t * seg);
            }
        }
        best
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        self.project(p).0
    }

    /// Point at arc-length `s`, clamped to `[0, length]`.
    pub fn point_at(&self, s: f64) -> Point {
        let s = s.clamp(0.0, self.length());
        let i = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => return self.vertices[i],
            Err(i) => i.max(1) - 1,
        };
        let i = i.min(self.vertices.len() - 2);
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        if seg == 0.0 {
            return self.vertices[i];
        }
        let t = (s - self.cumulative[i]) / seg;
        let (a, b) = (self.vertices[i], self.vertices[i + 1]);
        Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
    }
}

/// Signed shoelace area of a ring (positive for counter-clockwise).
pub fn ring_signed_area(ring: &[Point]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let scale = (b.x - a.x).abs().max((b.y - a.y).abs()).max(1.0);
    point_segment_distance(p, a, b).0 <= 1e-9 * scale
}

/// Boundary-inclusive point-in-ring test (even-odd rule).
pub fn ring_contains(ring: &[Point], p: Point) -> RingPosition {
    let n = ring.len();
    if n < 3 {
        return RingPosition::Outside;
    }
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if on_segment(p, a, b) {
            return RingPosition::Boundary;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    if inside {
        RingPosition::Inside
    } else {
        RingPosition::Outside
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingPosition {
    Inside,
    Boundary,
    Outside,
}

/// Simple polygon with optional holes. Rings are stored open (no repeated
/// closing vertex).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Vec<Point>,
    pub holes: Vec<Vec<Point>>,
}

fn open_ring(mut ring: Vec<Point>) -> Vec<Point> {
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring
}

impl Polygon {
    pub fn new(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self> {
        let exterior = open_ring(exterior);
        if exterior.len() < 3 {
            return Err(Error::validation("polygon ring needs at least three vertices"));
        }
        if exterior.iter().chain(holes.iter().flatten()).any(|p| !p.is_finite()) {
            return Err(Error::validation("polygon has non-finite coordinates"));
        }
        Ok(Self {
            exterior,
            holes: holes.into_iter().map(open_ring).collect(),
        })
    }

    pub fn rect(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            exterior: vec![
                Point::new(min_x, min_y),
                Point::new(max_x, min_y),
                Point::new(max_x, max_y),
                Point::new(min_x, max_y),
            ],
            holes: Vec::new(),
        }
    }

    pub fn area(&self) -> f64 {
        ring_signed_area(&self.exterior).abs()
            - self
                .holes
                .iter()
                .map(|h| ring_signed_area(h).abs())
                .sum::<f64>()
    }

    pub fn bbox(&self) -> BBox {
        BBox::from_points(&self.exterior).unwrap()
    }

    pub fn position(&self, p: Point) -> RingPosition {
        match ring_contains(&self.exterior, p) {
            RingPosition::Outside => RingPosition::Outside,
            RingPosition::Boundary => RingPosition::Boundary,
            RingPosition::Inside => {
                for h in &self.holes {
                    match ring_contains(h, p) {
                        RingPosition::Inside => return RingPosition::Outside,
                        RingPosition::Boundary => return RingPosition::Boundary,
                        RingPosition::Outside => {}
                    }
                }
                RingPosition::Inside
            }
        }
    }

    /// Closed-set containment (boundary counts as inside).
    pub fn contains(&self, p: Point) -> bool {
        self.position(p) != RingPosition::Outside
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(|h| h.as_slice()))
    }

    /// Well-known-text rendering of the polygon.
    pub fn to_wkt(&self) -> String {
        let ring = |r: &[Point]| {
            let mut s: Vec<String> = r.iter().map(|p| format!("{} {}", p.x, p.y)).collect();
            if let Some(p) = r.first() {
                s.push(format!("{} {}", p.x, p.y));
            }
            format!("({})", s.join(", "))
        };
        let rings: Vec<String> = self.rings().map(ring).collect();
        format!("POLYGON ({})", rings.join(", "))
    }

    /// Parse a `POLYGON ((x y, ...), (...))` WKT string.
    pub fn from_wkt(s: &str) -> Result<Self> {
        let s = s.trim();
        let upper = s.to_ascii_uppercase();
        let body = upper
            .strip_prefix("POLYGON")
            .ok_or_else(|| Error::validation(format!("expected POLYGON WKT, got `{s}`")))?
            .trim();
        let body = body
            .strip_prefix('(')
            .and_then(|b| b.strip_suffix(')'))
            .ok_or_else(|| Error::validation("malformed POLYGON WKT"))?;
        let mut rings = Vec::new();
        let mut rest = body.trim();
        while !rest.is_empty() {
            let rest_open = rest
                .strip_prefix('(')
                .ok_or_else(|| Error::validation("malformed POLYGON ring"))?;
            let end = rest_open
                .find(')')
                .ok_or_else(|| Error::validation("unterminated POLYGON ring"))?;
            let coords = &rest_open[..end];
            let mut ring = Vec::new();
            for pair in coords.split(',') {
                let mut it = pair.split_whitespace();
                let parse = |v: Option<&str>| -> Result<f64> {
                    v.and_then(|t| t.parse::<f64>().ok())
                        .ok_or_else(|| Error::validation(format!("bad WKT coordinate `{pair}`")))
                };
                let x = parse(it.next())?;
                let y = parse(it.next())?;
                ring.push(Point::new(x, y));
            }
            rings.push(ring);
            rest = rest_open[end + 1..].trim_start().trim_start_matches(',').trim_start();
        }
        let mut rings = rings.into_iter();
        let exterior = rings
            .next()
            .ok_or_else(|| Error::validation("empty POLYGON WKT"))?;
        Polygon::new(exterior, rings.collect())
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Whether segments `ab` and `cd` cross at a single interior point of both.
pub fn segments_properly_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Convex hull (Andrew's monotone chain), counter-clockwise, no collinear points.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Outward buffer of a convex counter-clockwise ring by `distance`, with
/// circular corners approximated by `arc_steps` segments per vertex.
pub fn buffer_convex(ring: &[Point], distance: f64, arc_steps: usize) -> Vec<Point> {
    let n = ring.len();
    let steps = arc_steps.max(1);
    if n == 0 {
        return Vec::new();
    }
    if n < 3 {
        // Degenerate hull: buffer every point and hull the result.
        let mut pts = Vec::new();
        for p in ring {
            for k in 0..(4 * steps) {
                let a = std::f64::consts::TAU * k as f64 / (4 * steps) as f64;
                pts.push(Point::new(p.x + distance * a.cos(), p.y + distance * a.sin()));
            }
        }
        return convex_hull(&pts);
    }
    let normal = |a: Point, b: Point| {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len = dx.hypot(dy);
        (dy / len, -dx / len)
    };
    let mut out = Vec::with_capacity(n * (steps + 1));
    for i in 0..n {
        let prev = ring[(i + n - 1) % n];
        let cur = ring[i];
        let next = ring[(i + 1) % n];
        let (nx0, ny0) = normal(prev, cur);
        let (nx1, ny1) = normal(cur, next);
        let a0 = ny0.atan2(nx0);
        let mut a1 = ny1.atan2(nx1);
        while a1 < a0 {
            a1 += std::f64::consts::TAU;
        }
        for k in 0..=steps {
            let a = a0 + (a1 - a0) * k as f64 / steps as f64;
            out.push(Point::new(cur.x + distance * a.cos(), cur.y + distance * a.sin()));
        }
    }
    out
}

/// Clip a ring to the half-plane `{p : p · normal <= offset}`.
pub fn clip_half_plane(ring: &[Point], normal: (f64, f64), offset: f64) -> Vec<Point> {
    let side = |p: &Point| p.x * normal.0 + p.y * normal.1 - offset;
    let n = ring.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let cur = ring[i];
        let next = ring[(i + 1) % n];
        let (sc, sn) = (side(&cur), side(&next));
        if sc <= 0.0 {
            out.push(cur);
        }
        if (sc < 0.0 && sn > 0.0) || (sc > 0.0 && sn < 0.0) {
            let t = sc / (sc - sn);
            out.push(Point::new(
                cur.x + t * (next.x - cur.x),
                cur.y + t * (next.y - cur.y),
            ));
        }
    }
    out
}
