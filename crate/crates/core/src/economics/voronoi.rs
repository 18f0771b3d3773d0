use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{buffer_convex, clip_half_plane, convex_hull, ring_signed_area, Point, Polygon};
use crate::hazard::id_cmp;

/// Outward margin of the default clipping boundary around the sites.
pub const DEFAULT_BOUNDARY_BUFFER_M: f64 = 50_000.0;
const BUFFER_ARC_STEPS: usize = 8;

/// Voronoi cell of one site. Coincident substations share a site; `ids` is
/// sorted so `ids[0]` is the representative.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceArea {
    pub ids: Vec<String>,
    pub site: Point,
    /// Counter-clockwise open ring.
    pub ring: Vec<Point>,
}

impl ServiceArea {
    pub fn representative(&self) -> &str {
        &self.ids[0]
    }

    pub fn area(&self) -> f64 {
        ring_signed_area(&self.ring).abs()
    }

    pub fn polygon(&self) -> Polygon {
        Polygon {
            exterior: self.ring.clone(),
            holes: Vec::new(),
        }
    }
}

/// Convex hull of the sites buffered outward by 50 km.
pub fn default_boundary(sites: &[Point]) -> Polygon {
    let hull = convex_hull(sites);
    Polygon {
        exterior: buffer_convex(&hull, DEFAULT_BOUNDARY_BUFFER_M, BUFFER_ARC_STEPS),
        holes: Vec::new(),
    }
}

/// Voronoi cells of the substations clipped to `boundary` (default: the
/// buffered hull). Each cell is the boundary intersected with the bisector
/// half-planes of its neighbours; the candidate loop stops once the next
/// site is farther than twice the cell's current radius, since no bisector
/// beyond that can reach the cell.
pub fn build_service_areas(substations: &[(String, Point)], boundary: Option<&Polygon>) -> Result<Vec<ServiceArea>> {
    if substations.iter().any(|(_, p)| !p.is_finite()) {
        return Err(Error::validation("substation coordinates must be finite"));
    }
    // Merge coincident coordinates into one site.
    let mut by_coord: BTreeMap<(u64, u64), Vec<String>> = BTreeMap::new();
    for (id, p) in substations {
        // +0.0 normalises the sign of zero so -0 and 0 coincide
        by_coord
            .entry(((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits()))
            .or_default()
            .push(id.clone());
    }
    let mut sites: Vec<(Vec<String>, Point)> = by_coord
        .into_iter()
        .map(|((x, y), mut ids)| {
            ids.sort_by(|a, b| id_cmp(a, b));
            (ids, Point::new(f64::from_bits(x), f64::from_bits(y)))
        })
        .collect();
    sites.sort_by(|a, b| id_cmp(&a.0[0], &b.0[0]));
    if sites.len() < 3 {
        return Err(Error::validation(format!(
            "service areas need at least 3 distinct substation sites, got {}",
            sites.len()
        )));
    }
    let pts: Vec<Point> = sites.iter().map(|s| s.1).collect();
    let boundary = match boundary {
        Some(b) => {
            if !b.holes.is_empty() {
                return Err(Error::validation("service-area boundary must not have holes"));
            }
            b.clone()
        }
        None => default_boundary(&pts),
    };

    let cells: Vec<ServiceArea> = sites
        .iter()
        .enumerate()
        .map(|(i, (ids, s))| {
            let mut others: Vec<(f64, Point)> = pts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, p)| (p.distance(s), *p))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0));
            // work in site-local coordinates for precision
            let mut ring: Vec<Point> = boundary
                .exterior
                .iter()
                .map(|p| Point::new(p.x - s.x, p.y - s.y))
                .collect();
            if ring_signed_area(&ring) < 0.0 {
                ring.reverse();
            }
            for (d, t) in others {
                let radius = ring.iter().map(|p| p.x.hypot(p.y)).fold(0.0, f64::max);
                if d > 2.0 * radius || ring.is_empty() {
                    break;
                }
                let n = (t.x - s.x, t.y - s.y);
                ring = clip_half_plane(&ring, n, (n.0 * n.0 + n.1 * n.1) / 2.0);
            }
            ServiceArea {
                ids: ids.clone(),
                site: *s,
                ring: ring.into_iter().map(|p| Point::new(p.x + s.x, p.y + s.y)).collect(),
            }
        })
        .collect();
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn subs(pts: &[(f64, f64)]) -> Vec<(String, Point)> {
        pts.iter()
            .enumerate()
            .map(|(i, (x, y))| (format!("s{i}"), Point::new(*x, *y)))
            .collect()
    }

    #[test]
    fn four_quadrants() {
        let b = Polygon::rect(0.0, 0.0, 2.0, 2.0);
        let areas = build_service_areas(&subs(&[(0.5, 0.5), (1.5, 0.5), (0.5, 1.5), (1.5, 1.5)]), Some(&b)).unwrap();
        assert_eq!(areas.len(), 4);
        for a in &areas {
            assert!((a.area() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicates_merge() {
        let s = vec![
            ("b".to_string(), Point::new(0.0, 0.0)),
            ("a".to_string(), Point::new(0.0, 0.0)),
            ("c".to_string(), Point::new(10.0, 0.0)),
            ("d".to_string(), Point::new(0.0, 10.0)),
        ];
        let areas = build_service_areas(&s, None).unwrap();
        assert_eq!(areas.len(), 3);
        assert_eq!(areas[0].ids, vec!["a", "b"]);
        assert_eq!(areas[0].representative(), "a");
        let two = vec![s[0].clone(), s[1].clone(), s[2].clone()];
        assert!(build_service_areas(&two, None).is_err());
    }

    #[test]
    fn random_sites_match_nearest_site() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<(f64, f64)> = (0..50).map(|_| (rng.gen_range(0.0..100_000.0), rng.gen_range(0.0..100_000.0))).collect();
        let s = subs(&pts);
        let areas = build_service_areas(&s, None).unwrap();
        let boundary = default_boundary(&s.iter().map(|x| x.1).collect::<Vec<_>>());
        let total: f64 = areas.iter().map(ServiceArea::area).sum();
        assert!((total - boundary.area()).abs() / boundary.area() < 1e-9);
        let polys: std::collections::HashMap<&str, Polygon> =
            areas.iter().map(|a| (a.representative(), a.polygon())).collect();
        for _ in 0..2000 {
            let q = Point::new(rng.gen_range(-40_000.0..140_000.0), rng.gen_range(-40_000.0..140_000.0));
            if !boundary.contains(q) {
                continue;
            }
            let nearest = (0..pts.len())
                .min_by(|a, b| s[*a].1.distance(&q).total_cmp(&s[*b].1.distance(&q)))
                .unwrap();
            assert!(polys[s[nearest].0.as_str()].contains(q));
        }
    }
}
