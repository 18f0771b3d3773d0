//! Transmission network: substations, line segments and along-line sample
//! nodes, with voltage snapping, tower matching and gap densification.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geojson::{Feature, FeatureCollection, Geometry};
use crate::geometry::{Point, Polyline, METERS_PER_MILE};

/// Standard voltage levels (kV) used for cost and tier assignment.
pub const STANDARD_VOLTAGES_KV: [u32; 7] = [69, 115, 161, 230, 345, 500, 765];

pub const DEFAULT_CRS: &str = "EPSG:5070";

/// Towers farther than this from every line are dropped.
pub const TOWER_BUFFER_M: f64 = 250.0;
/// Inter-node gaps longer than this are filled.
pub const MAX_GAP_M: f64 = 400.0;
/// Spacing of synthetic fill nodes along the geometry.
pub const SYNTHETIC_SPACING_M: f64 = 200.0;
/// Candidates (and duplicate towers) this close to an existing node are skipped.
pub const DEDUP_M: f64 = 50.0;
/// Line ends are linked to the nearest substation within this distance when
/// the line does not name its endpoints.
pub const ENDPOINT_SNAP_M: f64 = 1000.0;

/// Snap a reported voltage to the nearest standard level; exact ties go to
/// the higher level.
pub fn snap_voltage(nominal_kv: f64) -> Result<u32> {
    if !nominal_kv.is_finite() || nominal_kv <= 0.0 {
        return Err(Error::validation(format!(
            "voltage must be positive and finite, got {nominal_kv}"
        )));
    }
    let mut best = STANDARD_VOLTAGES_KV[0];
    let mut best_diff = f64::INFINITY;
    for &v in &STANDARD_VOLTAGES_KV {
        let diff = (nominal_kv - v as f64).abs();
        if diff <= best_diff {
            best = v;
            best_diff = diff;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substation {
    pub id: String,
    pub location: Point,
    pub max_connected_voltage_kv: u32,
    pub service_population: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSegment {
    pub id: String,
    pub geometry: Polyline,
    pub nominal_voltage_kv: f64,
    pub snapped_voltage_kv: u32,
    pub length_miles: f64,
    pub endpoint_substation_ids: Vec<String>,
}

impl LineSegment {
    pub fn new(
        id: impl Into<String>,
        geometry: Polyline,
        nominal_voltage_kv: f64,
        endpoint_substation_ids: Vec<String>,
    ) -> Result<Self> {
        let id = id.into();
        let snapped = snap_voltage(nominal_voltage_kv)
            .map_err(|e| Error::validation(format!("line {id}: {e}")))?;
        let length_m = geometry.length();
        if length_m <= 0.0 {
            return Err(Error::validation(format!("line {id}: zero-length geometry")));
        }
        Ok(Self {
            id,
            length_miles: length_m / METERS_PER_MILE,
            geometry,
            nominal_voltage_kv,
            snapped_voltage_kv: snapped,
            endpoint_substation_ids,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeOrigin {
    RealTower,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleNode {
    pub id: String,
    pub location: Point,
    pub parent_line_id: String,
    pub origin: NodeOrigin,
    /// Position of the node's projection along the parent geometry (m).
    pub arc_m: f64,
}

#[derive(Debug, Clone)]
pub struct Tower {
    pub id: String,
    pub location: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub substations: Vec<Substation>,
    pub lines: Vec<LineSegment>,
    pub nodes: Vec<SampleNode>,
    pub crs_tag: String,
}

/// One row of the ingest diagnostics table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Diagnostic {
    pub category: String,
    pub id: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub entries: Vec<Diagnostic>,
}

impl Diagnostics {
    pub fn push(&mut self, category: &str, id: &str, detail: impl Into<String>) {
        self.entries.push(Diagnostic {
            category: category.to_string(),
            id: id.to_string(),
            detail: detail.into(),
        });
    }

    pub fn count(&self, category: &str) -> usize {
        self.entries.iter().filter(|d| d.category == category).count()
    }

    /// Writes per-category counts followed by the individual entries.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["category", "id", "detail"])
            .map_err(|e| Error::csv(path, e))?;
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for d in &self.entries {
            *counts.entry(d.category.as_str()).or_default() += 1;
        }
        for (cat, n) in &counts {
            w.write_record(["count", cat, &n.to_string()])
                .map_err(|e| Error::csv(path, e))?;
        }
        for d in &self.entries {
            w.write_record([&d.category, &d.id, &d.detail])
                .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Attach towers to the nearest line within the tower buffer. Exact distance
/// ties go to the lowest line id. Returns the matched nodes (in tower input
/// order) and the number of towers that matched no line.
pub fn match_towers(lines: &[LineSegment], towers: &[Tower]) -> (Vec<SampleNode>, usize) {
    let boxes: Vec<_> = lines
        .iter()
        .map(|l| l.geometry.bbox().expand(TOWER_BUFFER_M))
        .collect();
    let matched: Vec<Option<SampleNode>> = towers
        .par_iter()
        .map(|t| {
            let mut best: Option<(f64, &LineSegment, f64)> = None;
            for (line, bb) in lines.iter().zip(&boxes) {
                if !bb.contains(&t.location) {
                    continue;
                }
                let (d, s) = line.geometry.project(t.location);
                if d > TOWER_BUFFER_M {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bd, bl, _)) => d < bd || (d == bd && line.id < bl.id),
                };
                if better {
                    best = Some((d, line, s));
                }
            }
            best.map(|(_, line, s)| SampleNode {
                id: t.id.clone(),
                location: t.location,
                parent_line_id: line.id.clone(),
                origin: NodeOrigin::RealTower,
                arc_m: s,
            })
        })
        .collect();
    let dropped = matched.iter().filter(|m| m.is_none()).count();
    (matched.into_iter().flatten().collect(), dropped)
}

fn synthetic(line: &LineSegment, arc: f64, ordinal: usize) -> SampleNode {
    SampleNode {
        id: format!("{}:syn{:05}", line.id, ordinal),
        location: line.geometry.point_at(arc),
        parent_line_id: line.id.clone(),
        origin: NodeOrigin::Synthetic,
        arc_m: arc,
    }
}

/// Fill gaps longer than [`MAX_GAP_M`] with synthetic nodes every
/// [`SYNTHETIC_SPACING_M`] along the geometry, skipping candidates within
/// [`DEDUP_M`] of an existing node.
///
/// The line's start and end count as anchors for gap measurement; if no
/// existing node lies within the dedup distance of an end, a synthetic node
/// is placed there. `existing` must be sorted by arc position. The result is
/// sorted by arc position.
pub fn densify_line(line: &LineSegment, existing: &[SampleNode]) -> Result<Vec<SampleNode>> {
    let length = line.geometry.length();
    if length <= 0.0 {
        return Err(Error::validation(format!("line {}: zero-length geometry", line.id)));
    }
    if existing.windows(2).any(|w| w[0].arc_m > w[1].arc_m) {
        return Err(Error::validation(format!(
            "line {}: existing nodes not sorted by arc position",
            line.id
        )));
    }

    let near_existing = |s: f64| existing.iter().any(|n| (n.arc_m - s).abs() <= DEDUP_M);

    let mut anchors: Vec<(f64, Option<&SampleNode>)> = Vec::with_capacity(existing.len() + 2);
    let mut ordinal = 0usize;
    let mut out: Vec<SampleNode> = Vec::new();

    let start_node = (!near_existing(0.0)).then(|| {
        ordinal += 1;
        synthetic(line, 0.0, ordinal - 1)
    });
    let end_needed = !near_existing(length) && (start_node.is_none() || length > DEDUP_M);

    if let Some(n) = &start_node {
        anchors.push((0.0, None));
        out.push(n.clone());
    }
    for n in existing {
        anchors.push((n.arc_m, Some(n)));
    }
    if end_needed {
        anchors.push((length, None));
    }

    let mut fills: Vec<(usize, Vec<f64>)> = Vec::new();
    for (k, w) in anchors.windows(2).enumerate() {
        let (a, b) = (w[0].0, w[1].0);
        if b - a <= MAX_GAP_M {
            continue;
        }
        let mut cands = Vec::new();
        let mut j = 1;
        loop {
            let c = a + SYNTHETIC_SPACING_M * j as f64;
            if c >= b {
                break;
            }
            if (c - a).abs() > DEDUP_M && (b - c).abs() > DEDUP_M {
                cands.push(c);
            }
            j += 1;
        }
        fills.push((k, cands));
    }

    // Emit in arc order: anchor, its fills, next anchor, ...
    let mut fill_iter = fills.into_iter().peekable();
    for (k, (_, node)) in anchors.iter().enumerate() {
        if let Some(n) = node {
            out.push((*n).clone());
        }
        if let Some((fk, _)) = fill_iter.peek() {
            if *fk == k {
                let (_, cands) = fill_iter.next().unwrap();
                for c in cands {
                    out.push(synthetic(line, c, ordinal));
                    ordinal += 1;
                }
            }
        }
    }
    if end_needed {
        out.push(synthetic(line, length, ordinal));
    }
    Ok(out)
}

/// Raw line record as read from the source network file.
#[derive(Debug, Clone)]
pub struct RawLine {
    pub id: String,
    pub vertices: Vec<Point>,
    pub voltage_kv: Option<f64>,
    pub substations: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct RawSubstation {
    pub id: String,
    pub location: Point,
    pub voltage_kv: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RawNetwork {
    pub crs: Option<String>,
    pub lines: Vec<RawLine>,
    pub substations: Vec<RawSubstation>,
    pub towers: Vec<Tower>,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Lines whose snapped voltage falls below this level are excluded.
    pub min_line_voltage_kv: Option<u32>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            min_line_voltage_kv: Some(161),
        }
    }
}

impl RawNetwork {
    fn ensure_crs(&mut self, crs: Option<&String>, path: &Path) -> Result<()> {
        match (&self.crs, crs) {
            (Some(a), Some(b)) if a != b => Err(Error::validation(format!(
                "{}: CRS {b} does not match {a}",
                path.display()
            ))),
            (None, Some(b)) => {
                self.crs = Some(b.clone());
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn add_lines(&mut self, path: &Path) -> Result<()> {
        let fc = FeatureCollection::read(path)?;
        self.ensure_crs(fc.crs.as_ref(), path)?;
        for (i, f) in fc.features.iter().enumerate() {
            let ctx = || format!("{}: feature {i}", path.display());
            let Geometry::LineString(vertices) = &f.geometry else {
                return Err(Error::validation(format!("{}: expected LineString", ctx())));
            };
            let id = f
                .identifier()
                .ok_or_else(|| Error::validation(format!("{}: missing id", ctx())))?;
            let voltage_kv = f.prop_f64("voltage").or_else(|| f.prop_f64("voltage_kv"));
            let substations = match f.properties.get("substations") {
                Some(Value::Array(a)) => Some(
                    a.iter()
                        .map(|v| match v {
                            Value::String(s) => Ok(s.clone()),
                            Value::Number(n) => Ok(n.to_string()),
                            _ => Err(Error::validation(format!(
                                "{}: bad substation reference",
                                ctx()
                            ))),
                        })
                        .collect::<Result<Vec<_>>>()?,
                ),
                _ => None,
            };
            self.lines.push(RawLine {
                id,
                vertices: vertices.clone(),
                voltage_kv,
                substations,
            });
        }
        Ok(())
    }

    pub fn add_substations(&mut self, path: &Path) -> Result<()> {
        let fc = FeatureCollection::read(path)?;
        self.ensure_crs(fc.crs.as_ref(), path)?;
        for (i, f) in fc.features.iter().enumerate() {
            let Geometry::Point(location) = f.geometry else {
                return Err(Error::validation(format!(
                    "{}: feature {i}: expected Point",
                    path.display()
                )));
            };
            let id = f.identifier().ok_or_else(|| {
                Error::validation(format!("{}: feature {i}: missing id", path.display()))
            })?;
            self.substations.push(RawSubstation {
                id,
                location,
                voltage_kv: f.prop_f64("voltage").or_else(|| f.prop_f64("voltage_kv")),
            });
        }
        Ok(())
    }

    pub fn add_towers(&mut self, path: &Path) -> Result<()> {
        let fc = FeatureCollection::read(path)?;
        self.ensure_crs(fc.crs.as_ref(), path)?;
        for (i, f) in fc.features.iter().enumerate() {
            let Geometry::Point(location) = f.geometry else {
                return Err(Error::validation(format!(
                    "{}: feature {i}: expected Point",
                    path.display()
                )));
            };
            let id = f.identifier().unwrap_or_else(|| format!("tower{i}"));
            self.towers.push(Tower { id, location });
        }
        Ok(())
    }

    /// Validate, snap, link, match towers and densify.
    pub fn build(self, opts: BuildOptions) -> Result<(Network, Diagnostics)> {
        let mut diag = Diagnostics::default();
        let crs_tag = self.crs.unwrap_or_else(|| DEFAULT_CRS.to_string());

        let mut seen = HashSet::new();
        for s in &self.substations {
            if !seen.insert(s.id.clone()) {
                return Err(Error::validation(format!("duplicate substation id {}", s.id)));
            }
            if !s.location.is_finite() {
                return Err(Error::validation(format!("substation {}: non-finite location", s.id)));
            }
        }
        let sub_index: HashMap<&str, &RawSubstation> =
            self.substations.iter().map(|s| (s.id.as_str(), s)).collect();

        let mut line_ids = HashSet::new();
        let mut lines = Vec::new();
        for raw in self.lines {
            if !line_ids.insert(raw.id.clone()) {
                return Err(Error::validation(format!("duplicate line id {}", raw.id)));
            }
            let nominal = match raw.voltage_kv {
                Some(v) if v.is_finite() && v > 0.0 => v,
                other => {
                    diag.push(
                        "rejected_line",
                        &raw.id,
                        format!("missing or non-positive voltage ({other:?})"),
                    );
                    continue;
                }
            };
            let geometry = match Polyline::new(raw.vertices.clone()) {
                Ok(g) if g.length() > 0.0 => g,
                Ok(_) => {
                    diag.push("rejected_line", &raw.id, "zero-length geometry");
                    continue;
                }
                Err(e) => {
                    diag.push("rejected_line", &raw.id, e.to_string());
                    continue;
                }
            };
            let snapped = snap_voltage(nominal)?;
            if let Some(floor) = opts.min_line_voltage_kv {
                if snapped < floor {
                    diag.push(
                        "rejected_line",
                        &raw.id,
                        format!("voltage {nominal} kV below {floor} kV floor"),
                    );
                    continue;
                }
            }
            let endpoints = match raw.substations {
                Some(ids) => {
                    for id in &ids {
                        if !sub_index.contains_key(id.as_str()) {
                            return Err(Error::validation(format!(
                                "line {}: unknown endpoint substation {id}",
                                raw.id
                            )));
                        }
                    }
                    ids
                }
                None => infer_endpoints(&geometry, &self.substations),
            };
            lines.push(LineSegment::new(raw.id, geometry, nominal, endpoints)?);
        }
        lines.sort_by(|a, b| a.id.cmp(&b.id));

        let mut max_kv: HashMap<&str, u32> = HashMap::new();
        for l in &lines {
            for s in &l.endpoint_substation_ids {
                let e = max_kv.entry(s.as_str()).or_insert(0);
                *e = (*e).max(l.snapped_voltage_kv);
            }
        }
        let mut substations = Vec::new();
        for s in &self.substations {
            let kv = match max_kv.get(s.id.as_str()) {
                Some(&kv) => kv,
                None => match s.voltage_kv.map(snap_voltage) {
                    Some(Ok(kv)) => kv,
                    _ => {
                        diag.push(
                            "rejected_substation",
                            &s.id,
                            "no connected line and no voltage attribute",
                        );
                        continue;
                    }
                },
            };
            substations.push(Substation {
                id: s.id.clone(),
                location: s.location,
                max_connected_voltage_kv: kv,
                service_population: None,
            });
        }
        substations.sort_by(|a, b| a.id.cmp(&b.id));

        let mut tower_ids = HashSet::new();
        for t in &self.towers {
            if !tower_ids.insert(t.id.as_str()) {
                return Err(Error::validation(format!("duplicate tower id {}", t.id)));
            }
        }
        let (matched, _) = match_towers(&lines, &self.towers);
        let matched_ids: HashSet<&str> = matched.iter().map(|n| n.id.as_str()).collect();
        for t in &self.towers {
            if !matched_ids.contains(t.id.as_str()) {
                diag.push("dropped_tower", &t.id, "no line within 250 m");
            }
        }
        let mut per_line: HashMap<String, Vec<SampleNode>> = HashMap::new();
        for n in matched {
            per_line.entry(n.parent_line_id.clone()).or_default().push(n);
        }
        let mut kept_per_line: Vec<Vec<SampleNode>> = Vec::with_capacity(lines.len());
        for l in &lines {
            let mut ns = per_line.remove(&l.id).unwrap_or_default();
            ns.sort_by(|a, b| a.arc_m.total_cmp(&b.arc_m).then_with(|| a.id.cmp(&b.id)));
            let mut kept: Vec<SampleNode> = Vec::with_capacity(ns.len());
            for n in ns {
                match kept.last() {
                    Some(prev) if n.arc_m - prev.arc_m <= DEDUP_M => {
                        diag.push(
                            "duplicate_tower",
                            &n.id,
                            format!("within 50 m of {} on line {}", prev.id, l.id),
                        );
                    }
                    _ => kept.push(n),
                }
            }
            kept_per_line.push(kept);
        }
        let nodes: Vec<SampleNode> = lines
            .par_iter()
            .zip(kept_per_line.par_iter())
            .map(|(l, existing)| densify_line(l, existing))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();

        let network = Network {
            substations,
            lines,
            nodes,
            crs_tag,
        };
        network.validate()?;
        Ok((network, diag))
    }
}

fn infer_endpoints(geometry: &Polyline, subs: &[RawSubstation]) -> Vec<String> {
    let v = geometry.vertices();
    let ends = [v[0], v[v.len() - 1]];
    let mut out: Vec<String> = Vec::new();
    for end in ends {
        let best = subs
            .iter()
            .map(|s| (s.location.distance(&end), s))
            .filter(|(d, _)| *d <= ENDPOINT_SNAP_M)
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
        if let Some((_, s)) = best {
            if !out.contains(&s.id) {
                out.push(s.id.clone());
            }
        }
    }
    out
}

impl Network {
    /// Check referential integrity and per-type invariants.
    pub fn validate(&self) -> Result<()> {
        let mut subs = HashSet::new();
        for s in &self.substations {
            if !subs.insert(s.id.as_str()) {
                return Err(Error::validation(format!("duplicate substation id {}", s.id)));
            }
            if !STANDARD_VOLTAGES_KV.contains(&s.max_connected_voltage_kv) {
                return Err(Error::validation(format!(
                    "substation {}: non-standard voltage {}",
                    s.id, s.max_connected_voltage_kv
                )));
            }
            if matches!(s.service_population, Some(p) if !(p >= 0.0)) {
                return Err(Error::validation(format!("substation {}: negative population", s.id)));
            }
        }
        let mut lines: HashMap<&str, &LineSegment> = HashMap::new();
        for l in &self.lines {
            if lines.insert(l.id.as_str(), l).is_some() {
                return Err(Error::validation(format!("duplicate line id {}", l.id)));
            }
            if !(l.length_miles > 0.0) {
                return Err(Error::validation(format!("line {}: non-positive length", l.id)));
            }
            if !STANDARD_VOLTAGES_KV.contains(&l.snapped_voltage_kv) {
                return Err(Error::validation(format!("line {}: non-standard voltage", l.id)));
            }
            for e in &l.endpoint_substation_ids {
                if !subs.contains(e.as_str()) {
                    return Err(Error::validation(format!(
                        "line {}: endpoint {e} does not resolve",
                        l.id
                    )));
                }
            }
        }
        let mut node_ids = HashSet::new();
        let mut last: HashMap<&str, f64> = HashMap::new();
        for n in &self.nodes {
            if !node_ids.insert(n.id.as_str()) {
                return Err(Error::validation(format!("duplicate node id {}", n.id)));
            }
            let line = lines.get(n.parent_line_id.as_str()).ok_or_else(|| {
                Error::validation(format!("node {}: parent line does not resolve", n.id))
            })?;
            if line.geometry.distance_to(n.location) > TOWER_BUFFER_M + 1e-6 {
                return Err(Error::validation(format!(
                    "node {}: farther than 250 m from its line",
                    n.id
                )));
            }
            if let Some(prev) = last.insert(n.parent_line_id.as_str(), n.arc_m) {
                if n.arc_m - prev <= DEDUP_M {
                    return Err(Error::validation(format!(
                        "node {}: within 50 m of the previous node on its line",
                        n.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn substation(&self, id: &str) -> Option<&Substation> {
        self.substations.iter().find(|s| s.id == id)
    }

    pub fn line(&self, id: &str) -> Option<&LineSegment> {
        self.lines.iter().find(|l| l.id == id)
    }

    pub fn to_feature_collection(&self) -> FeatureCollection {
        let mut features = Vec::with_capacity(self.substations.len() + self.lines.len() + self.nodes.len());
        for s in &self.substations {
            let mut p = Map::new();
            p.insert("kind".into(), json!("substation"));
            p.insert("id".into(), json!(s.id));
            p.insert("max_connected_voltage_kv".into(), json!(s.max_connected_voltage_kv));
            if let Some(pop) = s.service_population {
                p.insert("service_population".into(), json!(pop));
            }
            features.push(Feature {
                id: None,
                geometry: Geometry::Point(s.location),
                properties: p,
            });
        }
        for l in &self.lines {
            let mut p = Map::new();
            p.insert("kind".into(), json!("line"));
            p.insert("id".into(), json!(l.id));
            p.insert("nominal_voltage_kv".into(), json!(l.nominal_voltage_kv));
            p.insert("snapped_voltage_kv".into(), json!(l.snapped_voltage_kv));
            p.insert("length_miles".into(), json!(l.length_miles));
            p.insert("substations".into(), json!(l.endpoint_substation_ids));
            features.push(Feature {
                id: None,
                geometry: Geometry::LineString(l.geometry.vertices().to_vec()),
                properties: p,
            });
        }
        for n in &self.nodes {
            let mut p = Map::new();
            p.insert("kind".into(), json!("node"));
            p.insert("id".into(), json!(n.id));
            p.insert("parent_line_id".into(), json!(n.parent_line_id));
            p.insert("origin".into(), serde_json::to_value(n.origin).unwrap());
            p.insert("arc_m".into(), json!(n.arc_m));
            features.push(Feature {
                id: None,
                geometry: Geometry::Point(n.location),
                properties: p,
            });
        }
        FeatureCollection {
            crs: Some(self.crs_tag.clone()),
            features,
        }
    }

    pub fn write_geojson(&self, path: &Path) -> Result<()> {
        self.to_feature_collection().write(path)
    }

    /// Read a network previously written by [`Network::write_geojson`].
    pub fn read_geojson(path: &Path) -> Result<Self> {
        let fc = FeatureCollection::read(path)?;
        let ctx = |i: usize, what: &str| {
            Error::validation(format!("{}: feature {i}: {what}", path.display()))
        };
        let mut net = Network {
            substations: Vec::new(),
            lines: Vec::new(),
            nodes: Vec::new(),
            crs_tag: fc.crs.clone().unwrap_or_else(|| DEFAULT_CRS.to_string()),
        };
        for (i, f) in fc.features.iter().enumerate() {
            let id = f.identifier().ok_or_else(|| ctx(i, "missing id"))?;
            match (f.prop_str("kind").as_deref(), &f.geometry) {
                (Some("substation"), Geometry::Point(p)) => net.substations.push(Substation {
                    id,
                    location: *p,
                    max_connected_voltage_kv: f
                        .prop_f64("max_connected_voltage_kv")
                        .ok_or_else(|| ctx(i, "missing max_connected_voltage_kv"))?
                        as u32,
                    service_population: f.prop_f64("service_population"),
                }),
                (Some("line"), Geometry::LineString(vs)) => {
                    let geometry = Polyline::new(vs.clone())?;
                    let nominal = f
                        .prop_f64("nominal_voltage_kv")
                        .ok_or_else(|| ctx(i, "missing nominal_voltage_kv"))?;
                    let subs = match f.properties.get("substations") {
                        Some(Value::Array(a)) => a
                            .iter()
                            .filter_map(|v| v.as_str().map(str::to_string))
                            .collect(),
                        _ => Vec::new(),
                    };
                    net.lines.push(LineSegment::new(id, geometry, nominal, subs)?);
                }
                (Some("node"), Geometry::Point(p)) => {
                    let origin = match f.prop_str("origin").as_deref() {
                        Some("real_tower") => NodeOrigin::RealTower,
                        Some("synthetic") => NodeOrigin::Synthetic,
                        _ => return Err(ctx(i, "bad node origin")),
                    };
                    net.nodes.push(SampleNode {
                        id,
                        location: *p,
                        parent_line_id: f
                            .prop_str("parent_line_id")
                            .ok_or_else(|| ctx(i, "missing parent_line_id"))?,
                        origin,
                        arc_m: f.prop_f64("arc_m").ok_or_else(|| ctx(i, "missing arc_m"))?,
                    });
                }
                _ => return Err(ctx(i, "unknown feature kind")),
            }
        }
        net.validate()?;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(id: &str, len: f64) -> LineSegment {
        LineSegment::new(
            id,
            Polyline::new(vec![Point::new(0.0, 0.0), Point::new(len, 0.0)]).unwrap(),
            345.0,
            vec![],
        )
        .unwrap()
    }

    fn tower_at(line: &LineSegment, id: &str, s: f64) -> SampleNode {
        SampleNode {
            id: id.into(),
            location: line.geometry.point_at(s),
            parent_line_id: line.id.clone(),
            origin: NodeOrigin::RealTower,
            arc_m: s,
        }
    }

    fn synthetic_positions(nodes: &[SampleNode]) -> Vec<f64> {
        nodes
            .iter()
            .filter(|n| n.origin == NodeOrigin::Synthetic)
            .map(|n| n.arc_m)
            .collect()
    }

    #[test]
    fn snap_examples() {
        assert_eq!(snap_voltage(161.0).unwrap(), 161);
        assert_eq!(snap_voltage(138.0).unwrap(), 161);
        assert_eq!(snap_voltage(400.0).unwrap(), 345);
        assert_eq!(snap_voltage(1.0).unwrap(), 69);
        assert_eq!(snap_voltage(2000.0).unwrap(), 765);
        assert!(snap_voltage(0.0).is_err());
        assert!(snap_voltage(-5.0).is_err());
        assert!(snap_voltage(f64::NAN).is_err());
        assert!(snap_voltage(f64::INFINITY).is_err());
    }

    #[test]
    fn densify_fills_long_gap() {
        let line = straight("A", 1000.0);
        let ex = [tower_at(&line, "t0", 0.0), tower_at(&line, "t1", 1000.0)];
        let nodes = densify_line(&line, &ex).unwrap();
        assert_eq!(synthetic_positions(&nodes), vec![200.0, 400.0, 600.0, 800.0]);
        assert_eq!(nodes.len(), 6);
        assert!(nodes.windows(2).all(|w| w[0].arc_m < w[1].arc_m));
    }

    #[test]
    fn densify_leaves_short_gap() {
        let line = straight("A", 300.0);
        let ex = [tower_at(&line, "t0", 0.0), tower_at(&line, "t1", 300.0)];
        let nodes = densify_line(&line, &ex).unwrap();
        assert!(synthetic_positions(&nodes).is_empty());
    }

    #[test]
    fn densify_skips_candidate_near_existing_tower() {
        let line = straight("A", 1000.0);
        let ex = [
            tower_at(&line, "t0", 0.0),
            tower_at(&line, "t1", 210.0),
            tower_at(&line, "t2", 1000.0),
        ];
        let nodes = densify_line(&line, &ex).unwrap();
        let syn = synthetic_positions(&nodes);
        assert!(!syn.contains(&200.0));
        assert!(syn.iter().all(|s| (s - 210.0).abs() > DEDUP_M));
        assert_eq!(syn, vec![410.0, 610.0, 810.0]);
    }

    #[test]
    fn densify_anchors_line_ends() {
        let line = straight("A", 900.0);
        let nodes = densify_line(&line, &[]).unwrap();
        assert_eq!(synthetic_positions(&nodes), vec![0.0, 200.0, 400.0, 600.0, 800.0, 900.0]);
        // candidate landing within 50 m of the end anchor is skipped
        let line = straight("B", 830.0);
        let nodes = densify_line(&line, &[]).unwrap();
        assert_eq!(synthetic_positions(&nodes), vec![0.0, 200.0, 400.0, 600.0, 830.0]);
    }

    #[test]
    fn densify_rejects_unsorted_input() {
        let line = straight("A", 1000.0);
        let ex = [tower_at(&line, "t1", 500.0), tower_at(&line, "t0", 10.0)];
        assert!(densify_line(&line, &ex).is_err());
    }

    #[test]
    fn zero_length_line_rejected() {
        let geom = Polyline::new(vec![Point::new(1.0, 1.0), Point::new(1.0, 1.0)]).unwrap();
        assert!(LineSegment::new("Z", geom, 230.0, vec![]).is_err());
    }

    #[test]
    fn towers_match_nearest_line_in_buffer() {
        let a = LineSegment::new(
            "A",
            Polyline::new(vec![Point::new(0.0, 0.0), Point::new(1000.0, 0.0)]).unwrap(),
            345.0,
            vec![],
        )
        .unwrap();
        let b = LineSegment::new(
            "B",
            Polyline::new(vec![Point::new(0.0, 400.0), Point::new(1000.0, 400.0)]).unwrap(),
            345.0,
            vec![],
        )
        .unwrap();
        let lines = [a, b];
        let towers = [
            Tower { id: "t1".into(), location: Point::new(500.0, 100.0) },
            Tower { id: "t2".into(), location: Point::new(500.0, -260.0) },
            Tower { id: "t3".into(), location: Point::new(500.0, 50.0) },
            // equidistant from A and B
            Tower { id: "t4".into(), location: Point::new(500.0, 200.0) },
        ];
        let (nodes, dropped) = match_towers(&lines, &towers);
        assert_eq!(dropped, 1);
        let by_id: HashMap<_, _> = nodes.iter().map(|n| (n.id.as_str(), n)).collect();
        assert_eq!(by_id["t1"].parent_line_id, "A");
        assert_eq!(by_id["t3"].parent_line_id, "A");
        assert_eq!(by_id["t4"].parent_line_id, "A");
        assert!(!by_id.contains_key("t2"));
    }

    #[test]
    fn tower_nearest_line_brute_force() {
        // tower 50 m from A and 80 m from B
        let a = LineSegment::new(
            "B-line",
            Polyline::new(vec![Point::new(0.0, 0.0), Point::new(1000.0, 0.0)]).unwrap(),
            345.0,
            vec![],
        )
        .unwrap();
        let b = LineSegment::new(
            "A-line",
            Polyline::new(vec![Point::new(0.0, 130.0), Point::new(1000.0, 130.0)]).unwrap(),
            345.0,
            vec![],
        )
        .unwrap();
        let tower = Tower { id: "t".into(), location: Point::new(300.0, 50.0) };
        let lines = [a, b];
        let oracle = lines
            .iter()
            .map(|l| {
                let vs = l.geometry.vertices();
                let d = crate::geometry::point_segment_distance(tower.location, vs[0], vs[1]).0;
                (d, l.id.clone())
            })
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .unwrap();
        assert_eq!(oracle.0, 50.0);
        let (nodes, _) = match_towers(&lines, &[tower]);
        assert_eq!(nodes[0].parent_line_id, oracle.1);
    }

    fn fc(v: serde_json::Value, dir: &Path, name: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, v.to_string()).unwrap();
        p
    }

    #[test]
    fn build_rejects_bad_lines_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let lines = fc(
            json!({"type": "FeatureCollection", "features": [
                {"type": "Feature", "geometry": {"type": "LineString", "coordinates": [[0,0],[2000,0]]},
                 "properties": {"id": "L1", "voltage": 345}},
                {"type": "Feature", "geometry": {"type": "LineString", "coordinates": [[0,0],[0,2000]]},
                 "properties": {"id": "L2", "voltage": 0}},
                {"type": "Feature", "geometry": {"type": "LineString", "coordinates": [[0,0],[0,3000]]},
                 "properties": {"id": "L3"}},
                {"type": "Feature", "geometry": {"type": "LineString", "coordinates": [[0,0],[-2000,0]]},
                 "properties": {"id": "L4", "voltage": 69}}
            ]}),
            dir.path(),
            "lines.geojson",
        );
        let subs = fc(
            json!({"type": "FeatureCollection", "features": [
                {"type": "Feature", "geometry": {"type": "Point", "coordinates": [0,0]}, "properties": {"id": "S1"}},
                {"type": "Feature", "geometry": {"type": "Point", "coordinates": [2000,10]}, "properties": {"id": "S2"}},
                {"type": "Feature", "geometry": {"type": "Point", "coordinates": [9e5,9e5]}, "properties": {"id": "S3"}}
            ]}),
            dir.path(),
            "subs.geojson",
        );
        let towers = fc(
            json!({"type": "FeatureCollection", "features": [
                {"type": "Feature", "geometry": {"type": "Point", "coordinates": [1000,30]}, "properties": {"id": "T1"}},
                {"type": "Feature", "geometry": {"type": "Point", "coordinates": [1020,-30]}, "properties": {"id": "T2"}},
                {"type": "Feature", "geometry": {"type": "Point", "coordinates": [1000,900]}, "properties": {"id": "T3"}}
            ]}),
            dir.path(),
            "towers.geojson",
        );
        let mut raw = RawNetwork::default();
        raw.add_lines(&lines).unwrap();
        raw.add_substations(&subs).unwrap();
        raw.add_towers(&towers).unwrap();
        let (net, diag) = raw.build(BuildOptions::default()).unwrap();
        assert_eq!(net.lines.len(), 1);
        assert_eq!(diag.count("rejected_line"), 3);
        assert_eq!(diag.count("dropped_tower"), 1);
        assert_eq!(diag.count("duplicate_tower"), 1);
        assert_eq!(diag.count("rejected_substation"), 1);
        assert_eq!(net.lines[0].endpoint_substation_ids, vec!["S1", "S2"]);
        assert_eq!(net.substation("S1").unwrap().max_connected_voltage_kv, 345);

        let out = dir.path().join("net.geojson");
        net.write_geojson(&out).unwrap();
        let back = Network::read_geojson(&out).unwrap();
        assert_eq!(back, net);
    }
}
