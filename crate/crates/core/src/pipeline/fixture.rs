//! Synthetic desk-scale input set: a small network, one layer per hazard
//! (covering every source kind), curves, costs, toy accounts and exposure.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::economics::SECTORS;
use crate::error::{Error, Result};
use crate::fragility::FragilityDb;
use crate::geojson::{Feature, FeatureCollection, Geometry};
use crate::geometry::{Point, Polygon};
use crate::hazard::{sample_layer, HazardId, HazardLayer, LayerEntry, LayerManifest, Raster, SourceKind};
use crate::loss::CostSchedule;
use crate::network::{BuildOptions, RawNetwork, DEFAULT_CRS};
use crate::util::{create_dir, fmt_f64, write_json, CsvOut};

use super::config::{LineAggregateChoice, NetworkPaths, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureParams {
    pub seed: u64,
    pub n_substations: usize,
    pub n_lines: usize,
    /// Cells per side of every raster layer.
    pub grid: usize,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self {
            seed: 42,
            n_substations: 25,
            n_lines: 40,
            grid: 50,
        }
    }
}

const ORIGIN: (f64, f64) = (1_000_000.0, 1_500_000.0);
const EXTENT_M: f64 = 150_000.0;
const MARGIN_M: f64 = 10_000.0;
const TOWER_SPACING_M: f64 = 350.0;
const TOWER_SKIP_P: f64 = 0.08;
const NODATA: f64 = -9999.0;
const RAW_KV: [f64; 9] = [161.0, 230.0, 220.0, 345.0, 340.0, 500.0, 765.0, 138.0, 115.0];
const SECTOR_NAMES: [&str; SECTORS] = [
    "Agriculture",
    "Mining",
    "Utilities",
    "Construction",
    "Manufacturing",
    "Trade",
    "Transportation",
    "Information",
    "Finance",
    "Services",
];

fn r2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Smooth random field on the domain with values in [0, 1].
struct Field {
    bumps: Vec<(Point, f64, f64)>,
}

impl Field {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let bumps = (0..4)
            .map(|_| {
                let c = Point::new(
                    ORIGIN.0 + rng.gen_range(0.0..EXTENT_M),
                    ORIGIN.1 + rng.gen_range(0.0..EXTENT_M),
                );
                (c, rng.gen_range(20_000.0..50_000.0), rng.gen_range(0.4..1.0))
            })
            .collect();
        Self { bumps }
    }

    fn at(&self, p: Point) -> f64 {
        let v: f64 = self
            .bumps
            .iter()
            .map(|(c, s, a)| a * (-p.distance(c).powi(2) / (2.0 * s * s)).exp())
            .sum();
        v.min(1.0)
    }
}

struct Grid {
    n: usize,
    cell: f64,
}

impl Grid {
    fn center(&self, row: usize, col: usize) -> Point {
        Point::new(
            ORIGIN.0 + (col as f64 + 0.5) * self.cell,
            ORIGIN.1 + EXTENT_M - (row as f64 + 0.5) * self.cell,
        )
    }

    fn raster(&self, mut f: impl FnMut(Point) -> f64, nodata: Option<f64>) -> Result<Raster> {
        let mut values = Vec::with_capacity(self.n * self.n);
        for row in 0..self.n {
            for col in 0..self.n {
                values.push(f(self.center(row, col)));
            }
        }
        Raster::new(self.n, self.n, ORIGIN.0, ORIGIN.1, self.cell, values, nodata, DEFAULT_CRS)
    }
}

fn feature(id: &str, geometry: Geometry, props: Value) -> Feature {
    let mut properties: Map<String, Value> = props.as_object().cloned().unwrap_or_default();
    properties.insert("id".into(), json!(id));
    Feature {
        id: None,
        geometry,
        properties,
    }
}

fn collection(features: Vec<Feature>) -> FeatureCollection {
    FeatureCollection {
        crs: Some(DEFAULT_CRS.to_string()),
        features,
    }
}

fn entry(h: HazardId, kind: SourceKind, units: &str, bands: &[(&str, String)]) -> LayerEntry {
    LayerEntry {
        hazard_id: h,
        source_kind: kind,
        units: units.into(),
        crs: None,
        bands: bands.iter().map(|(k, v)| (k.to_string(), PathBuf::from(v))).collect(),
        nodata: None,
        record_years: None,
        cell_size_m: None,
        grid_origin: None,
        id_column: None,
        value_column: None,
    }
}

/// Rectangular polygon tiling of the domain, `k × k` tiles.
fn tiles(k: usize) -> Vec<Polygon> {
    let w = EXTENT_M / k as f64;
    let mut out = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let x = ORIGIN.0 + j as f64 * w;
            let y = ORIGIN.1 + i as f64 * w;
            out.push(Polygon::rect(x, y, x + w, y + w));
        }
    }
    out
}

fn centroid(p: &Polygon) -> Point {
    let n = p.exterior.len() as f64;
    Point::new(
        p.exterior.iter().map(|q| q.x).sum::<f64>() / n,
        p.exterior.iter().map(|q| q.y).sum::<f64>() / n,
    )
}

/// Write a complete input set under `dir` and return the config path.
/// The same seed always yields byte-identical files.
pub fn generate_fixture(dir: &Path, params: FixtureParams) -> Result<PathBuf> {
    if params.n_substations < 3 {
        return Err(Error::validation("a fixture needs at least 3 substations"));
    }
    if params.grid == 0 {
        return Err(Error::validation("fixture grid must have at least one cell"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for sub in ["network", "layers"] {
        create_dir(&dir.join(sub))?;
    }

    // substations
    let subs: Vec<(String, Point)> = (0..params.n_substations)
        .map(|i| {
            let p = Point::new(
                r2(ORIGIN.0 + rng.gen_range(MARGIN_M..EXTENT_M - MARGIN_M)),
                r2(ORIGIN.1 + rng.gen_range(MARGIN_M..EXTENT_M - MARGIN_M)),
            );
            (format!("S{:03}", i + 1), p)
        })
        .collect();

    // lines: spanning tree to the nearest earlier substation, then extras to
    // one of the three nearest
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut seen = BTreeSet::new();
    let nearest = |i: usize, among: &mut dyn Iterator<Item = usize>| -> Vec<usize> {
        let mut v: Vec<usize> = among.filter(|j| *j != i).collect();
        v.sort_by(|a, b| subs[i].1.distance(&subs[*a].1).total_cmp(&subs[i].1.distance(&subs[*b].1)));
        v
    };
    for i in 1..params.n_substations {
        if pairs.len() >= params.n_lines {
            break;
        }
        let j = nearest(i, &mut (0..i))[0];
        seen.insert((j.min(i), j.max(i)));
        pairs.push((j, i));
    }
    let mut attempts = 0;
    while pairs.len() < params.n_lines && attempts < 100 * params.n_lines {
        attempts += 1;
        let i = rng.gen_range(0..params.n_substations);
        let cands = nearest(i, &mut (0..params.n_substations));
        let j = cands[rng.gen_range(0..cands.len().min(3))];
        if seen.insert((i.min(j), i.max(j))) {
            pairs.push((i, j));
        }
    }

    let mut line_features = Vec::new();
    let mut tower_features = Vec::new();
    let mut sub_kv: BTreeMap<usize, f64> = BTreeMap::new();
    for (k, (a, b)) in pairs.iter().enumerate() {
        let id = format!("L{:03}", k + 1);
        let kv = RAW_KV[rng.gen_range(0..RAW_KV.len())];
        for s in [a, b] {
            let e = sub_kv.entry(*s).or_insert(0.0);
            *e = e.max(kv);
        }
        let (pa, pb) = (subs[*a].1, subs[*b].1);
        let len = pa.distance(&pb);
        let (ux, uy) = ((pb.x - pa.x) / len, (pb.y - pa.y) / len);
        let mut ts: Vec<f64> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(0.2..0.8)).collect();
        ts.sort_by(f64::total_cmp);
        let mut verts = vec![pa];
        for t in ts {
            let off = rng.gen_range(-0.03..0.03) * len;
            verts.push(Point::new(r2(pa.x + t * (pb.x - pa.x) - uy * off), r2(pa.y + t * (pb.y - pa.y) + ux * off)));
        }
        verts.push(pb);
        let poly = crate::geometry::Polyline::new(verts.clone())?;
        let total = poly.length();
        let mut s = 200.0;
        let mut n = 0;
        while s < total - 200.0 {
            if !rng.gen_bool(TOWER_SKIP_P) {
                let p = poly.point_at(s);
                let ang = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = rng.gen_range(0.0..40.0);
                n += 1;
                tower_features.push(feature(
                    &format!("T{}-{n:04}", &id[1..]),
                    Geometry::Point(Point::new(r2(p.x + r * ang.cos()), r2(p.y + r * ang.sin()))),
                    json!({}),
                ));
            }
            s += TOWER_SPACING_M + rng.gen_range(-30.0..30.0);
        }
        line_features.push(feature(
            &id,
            Geometry::LineString(verts),
            json!({"voltage": kv, "substations": [subs[*a].0, subs[*b].0]}),
        ));
    }
    let sub_features = subs
        .iter()
        .enumerate()
        .map(|(i, (id, p))| feature(id, Geometry::Point(*p), json!({"voltage": sub_kv.get(&i).copied().unwrap_or(230.0)})))
        .collect();
    collection(sub_features).write(&dir.join("network/substations.geojson"))?;
    collection(line_features).write(&dir.join("network/lines.geojson"))?;
    collection(tower_features).write(&dir.join("network/towers.geojson"))?;

    let layers = dir.join("layers");
    let grid = Grid {
        n: params.grid,
        cell: EXTENT_M / params.grid as f64,
    };
    let s0 = subs[0].1;
    let mut manifest = Vec::new();

    // earthquake: PGA point grid at cell centres
    let f = Field::new(&mut rng);
    let mut csv = CsvOut::new(["x", "y", "value"]);
    for row in 0..grid.n {
        for col in 0..grid.n {
            let p = grid.center(row, col);
            csv.row([fmt_f64(p.x), fmt_f64(p.y), fmt_f64(r2(0.02 + 0.8 * f.at(p)))]);
        }
    }
    csv.write(&layers.join("earthquake_pga.csv"))?;
    manifest.push(entry(HazardId::Earthquake, SourceKind::PointGrid, "g", &[("points", "earthquake_pga.csv".into())]));

    // flood: depth with scattered nodata
    let f = Field::new(&mut rng);
    let r = grid.raster(|p| if rng.gen_bool(0.03) { NODATA } else { r2((4.0 * f.at(p) - 0.5).max(0.0)) }, Some(NODATA))?;
    r.write_ascii(&layers.join("flood_depth.asc"))?;
    manifest.push(entry(HazardId::Flood, SourceKind::RasterGrid, "m", &[("depth", "flood_depth.asc".into())]));

    // landslide: one GeoTIFF band, one ASCII band
    let (f1, f2) = (Field::new(&mut rng), Field::new(&mut rng));
    grid.raster(|p| (100.0 * f1.at(p)).round(), None)?.write_geotiff(&layers.join("landslide_n10.tif"))?;
    grid.raster(|p| (100.0 * f2.at(p)).round(), None)?.write_ascii(&layers.join("landslide_lw.asc"))?;
    manifest.push(entry(
        HazardId::Landslide,
        SourceKind::RasterGrid,
        "score",
        &[("n10", "landslide_n10.tif".into()), ("lw", "landslide_lw.asc".into())],
    ));

    // wildfire: class 1–7 (6 and 7 masked) and continuous WHP
    let (f1, f2) = (Field::new(&mut rng), Field::new(&mut rng));
    grid.raster(|p| 1.0 + (f1.at(p) * 6.99).floor(), None)?.write_ascii(&layers.join("wildfire_cls.asc"))?;
    grid.raster(|p| (20_000.0 * f2.at(p)).round(), None)?.write_geotiff(&layers.join("wildfire_cnt.tif"))?;
    manifest.push(entry(
        HazardId::Wildfire,
        SourceKind::RasterGrid,
        "whp",
        &[("whp_cls", "wildfire_cls.asc".into()), ("whp_cnt", "wildfire_cnt.tif".into())],
    ));

    // lightning: monthly daily flash rates with a summer peak
    let f = Field::new(&mut rng);
    let mut bands = Vec::new();
    for m in 1..=12 {
        let season = (-((m as f64 - 7.0).powi(2)) / 6.0).exp();
        let name = format!("lightning_{m:02}.asc");
        grid.raster(|p| (1e4 * 0.15 * season * (0.2 + f.at(p))).round() / 1e4, None)?
            .write_ascii(&layers.join(&name))?;
        bands.push((format!("month_{m:02}"), name));
    }
    let band_refs: Vec<(&str, String)> = bands.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    manifest.push(entry(HazardId::Lightning, SourceKind::RasterGrid, "flashes/km2/yr", &band_refs));

    // tc_wind: 6×6 tiles of sustained wind in knots
    let f = Field::new(&mut rng);
    let mut csv = CsvOut::new(["polygon_id", "wkt", "wind_kn"]);
    for (i, t) in tiles(6).iter().enumerate() {
        csv.row([(i + 1).to_string(), t.to_wkt(), fmt_f64((40.0 + 110.0 * f.at(centroid(t))).round())]);
    }
    csv.write(&layers.join("tc_wind.csv"))?;
    manifest.push(entry(HazardId::TcWind, SourceKind::PolygonTable, "m/s", &[("polygons", "tc_wind.csv".into())]));

    // fzg: 5×5 tiles of SPIA tiers; the first substation's tile is tier 5
    let f = Field::new(&mut rng);
    let mut csv = CsvOut::new(["polygon_id", "wkt", "spia"]);
    for (i, t) in tiles(5).iter().enumerate() {
        let tier = if t.contains(s0) { 5.0 } else { (f.at(centroid(t)) * 5.99).floor() };
        csv.row([(i + 1).to_string(), t.to_wkt(), fmt_f64(tier)]);
    }
    csv.write(&layers.join("fzg_spia.csv"))?;
    manifest.push(entry(HazardId::Fzg, SourceKind::PolygonTable, "tier", &[("polygons", "fzg_spia.csv".into())]));

    // hail: point reports, one of them on the first substation
    let mut csv = CsvOut::new(["x", "y", "diameter_in"]);
    csv.row([fmt_f64(s0.x), fmt_f64(s0.y), "2.5".into()]);
    for _ in 0..400 {
        csv.row([
            fmt_f64(r2(ORIGIN.0 + rng.gen_range(0.0..EXTENT_M))),
            fmt_f64(r2(ORIGIN.1 + rng.gen_range(0.0..EXTENT_M))),
            fmt_f64((rng.gen_range(0.75..3.0f64) * 4.0).round() / 4.0),
        ]);
    }
    csv.write(&layers.join("hail_events.csv"))?;
    let mut e = entry(HazardId::Hail, SourceKind::EventSet, "in", &[("events", "hail_events.csv".into())]);
    e.record_years = Some(crate::hazard::HAIL_RECORD_YEARS);
    manifest.push(e);

    // tornado: straight tracks, one EF3 through the first substation
    let mut csv = CsvOut::new(["track_id", "ef", "width_m", "start_x", "start_y", "end_x", "end_y"]);
    csv.row([
        "TR001".to_string(),
        "3".into(),
        "400".into(),
        fmt_f64(s0.x - 3000.0),
        fmt_f64(s0.y - 2000.0),
        fmt_f64(s0.x + 3000.0),
        fmt_f64(s0.y + 2000.0),
    ]);
    for i in 2..=40 {
        let (x, y) = (ORIGIN.0 + rng.gen_range(0.0..EXTENT_M), ORIGIN.1 + rng.gen_range(0.0..EXTENT_M));
        let (len, ang) = (rng.gen_range(2_000.0..30_000.0), rng.gen_range(0.0..std::f64::consts::TAU));
        let ef = match rng.gen_range(0..20) {
            0 => String::new(),
            k => [0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 4, 4, 5][k - 1].to_string(),
        };
        csv.row([
            format!("TR{i:03}"),
            ef,
            fmt_f64((rng.gen_range(50.0..800.0f64)).round()),
            fmt_f64(r2(x)),
            fmt_f64(r2(y)),
            fmt_f64(r2(x + len * ang.cos())),
            fmt_f64(r2(y + len * ang.sin())),
        ]);
    }
    csv.write(&layers.join("tornado_tracks.csv"))?;
    let mut e = entry(HazardId::Tornado, SourceKind::EventSet, "m/s", &[("tracks", "tornado_tracks.csv".into())]);
    e.record_years = Some(crate::hazard::TORNADO_RECORD_YEARS);
    manifest.push(e);

    // geomag: upstream failure probabilities per substation
    let mut csv = CsvOut::new(["substation_id", "failure_probability"]);
    for (id, _) in &subs {
        csv.row([id.clone(), fmt_f64((rng.gen_range(0.0..0.8f64) * 1000.0).round() / 1000.0)]);
    }
    csv.write(&layers.join("geomag.csv"))?;
    manifest.push(entry(HazardId::Geomag, SourceKind::AssetTable, "probability", &[("probabilities", "geomag.csv".into())]));

    manifest.sort_by_key(|e| e.hazard_id);
    write_json(&layers.join("manifest.json"), &LayerManifest { layers: manifest })?;

    FragilityDb::builtin().write_csv(&dir.join("fragility.csv"))?;
    CostSchedule::builtin().write_csv(&dir.join("costs.csv"))?;

    // exposure and a toy economy whose grid population is the exposure total
    let mut header = vec!["substation_id".to_string(), "population".to_string()];
    header.extend((1..=SECTORS).map(|i| format!("gdp_sector_{i}")));
    let mut csv = CsvOut::new(header);
    let mut p_grid = 0.0;
    for (id, _) in &subs {
        let pop = rng.gen_range(1_000..200_000) as f64;
        p_grid += pop;
        let mut rec = vec![id.clone(), fmt_f64(pop)];
        rec.extend((0..SECTORS).map(|_| fmt_f64(rng.gen_range(1_000_000..50_000_000) as f64)));
        csv.row(rec);
    }
    csv.write(&dir.join("exposure.csv"))?;
    let mut a = vec![vec![0.0; SECTORS]; SECTORS];
    for c in 0..SECTORS {
        let raw: Vec<f64> = (0..SECTORS).map(|_| rng.gen_range(0.0..1.0)).collect();
        let target = rng.gen_range(0.2..0.5);
        let sum: f64 = raw.iter().sum();
        for (row, v) in a.iter_mut().zip(&raw) {
            row[c] = (v / sum * target * 1e4).round() / 1e4;
        }
    }
    let accounts = crate::economics::EconomicAccounts {
        sector_names: SECTOR_NAMES.iter().map(|s| s.to_string()).collect(),
        a,
        f_cons: (0..SECTORS).map(|_| rng.gen_range(1_000_000_000i64..50_000_000_000) as f64).collect(),
        p_grid,
    };
    write_json(&dir.join("accounts.json"), &accounts)?;

    let cfg = RunConfig {
        network: NetworkPaths {
            lines: "network/lines.geojson".into(),
            substations: "network/substations.geojson".into(),
            towers: Some("network/towers.geojson".into()),
            min_line_voltage_kv: Some(161),
        },
        layers: "layers/manifest.json".into(),
        fragility: Some("fragility.csv".into()),
        costs: Some("costs.csv".into()),
        accounts: "accounts.json".into(),
        exposure: "exposure.csv".into(),
        boundary: None,
        hazards: Vec::new(),
        line_aggregate: LineAggregateChoice::Max,
        output_dir: "out".into(),
        seed: Some(params.seed),
        base_dir: PathBuf::new(),
    };
    let cfg_path = dir.join("config.json");
    write_json(&cfg_path, &cfg)?;

    let coverage = coverage_scan(&cfg_path)?;
    if let Some((h, _)) = coverage.iter().find(|(_, n)| **n == 0) {
        return Err(Error::validation(format!("fixture layer {h} covers no asset")));
    }
    Ok(cfg_path)
}

/// Per hazard, the number of assets with a non-null (and, for event sets,
/// non-zero) intensity.
pub fn coverage_scan(config: &Path) -> Result<BTreeMap<HazardId, usize>> {
    let cfg = RunConfig::load(config)?;
    let mut raw = RawNetwork::default();
    raw.add_substations(&cfg.resolve(&cfg.network.substations))?;
    raw.add_lines(&cfg.resolve(&cfg.network.lines))?;
    if let Some(t) = &cfg.network.towers {
        raw.add_towers(&cfg.resolve(t))?;
    }
    let (network, _) = raw.build(BuildOptions {
        min_line_voltage_kv: cfg.network.min_line_voltage_kv,
    })?;
    let manifest_path = cfg.resolve(&cfg.layers);
    let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut out = BTreeMap::new();
    for e in &LayerManifest::read(&manifest_path)?.layers {
        let layer = HazardLayer::load(e, &base)?;
        let event_set = layer.source_kind() == SourceKind::EventSet;
        let n = sample_layer(&layer, &network)?
            .assets
            .iter()
            .filter(|a| matches!(a.intensity, Some(v) if !event_set || v > 0.0))
            .count();
        out.insert(e.hazard_id, n);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
        let mut out = BTreeMap::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn same_seed_same_files() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let p = FixtureParams { grid: 20, ..Default::default() };
        generate_fixture(a.path(), p).unwrap();
        generate_fixture(b.path(), p).unwrap();
        assert_eq!(tree(a.path()), tree(b.path()));
        let c = tempfile::tempdir().unwrap();
        generate_fixture(c.path(), FixtureParams { seed: 7, ..p }).unwrap();
        assert_ne!(tree(a.path()), tree(c.path()));
    }

    #[test]
    fn every_hazard_covered() {
        let d = tempfile::tempdir().unwrap();
        let cfg = generate_fixture(d.path(), FixtureParams::default()).unwrap();
        let cov = coverage_scan(&cfg).unwrap();
        assert_eq!(cov.len(), 10);
        assert!(cov.values().all(|n| *n > 0), "{cov:?}");
    }

    #[test]
    fn three_substations_minimum() {
        let d = tempfile::tempdir().unwrap();
        let p = FixtureParams { n_substations: 3, n_lines: 2, grid: 10, seed: 1 };
        generate_fixture(d.path(), p).unwrap();
        assert!(generate_fixture(d.path(), FixtureParams { n_substations: 2, ..p }).is_err());
    }
}
