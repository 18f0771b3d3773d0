//! Layer manifest, layer loading and per-asset sampling for every hazard.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::events::{rasterize_hail, tornado_intersect, HailSurfaces, TornadoTrack};
use super::points::{sample_nearest, PointGrid};
use super::polygons::{join_polygon, PolygonTable};
use super::raster::Raster;
use super::stats::{aggregate_line, LineAggregate};
use super::{
    knots_to_mps, landslide_score, lightning_annualize, wildfire_mask, AssetExposure, HazardId,
    SourceKind, HAIL_CELL_M,
};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::network::{Network, DEFAULT_CRS};
use crate::util::{fmt_f64, fmt_opt, parse_opt, CsvOut};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerManifest {
    pub layers: Vec<LayerEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerEntry {
    pub hazard_id: HazardId,
    pub source_kind: SourceKind,
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crs: Option<String>,
    /// Band role → file path (relative to the manifest).
    pub bands: BTreeMap<String, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodata: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_years: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_size_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_origin: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_column: Option<String>,
}

impl LayerManifest {
    pub fn read(path: &Path) -> Result<Self> {
        crate::util::read_json(path)
    }

    pub fn entry(&self, hazard: HazardId) -> Option<&LayerEntry> {
        self.layers.iter().find(|l| l.hazard_id == hazard)
    }
}

const LIGHTNING_BANDS: [&str; 12] = [
    "month_01", "month_02", "month_03", "month_04", "month_05", "month_06", "month_07",
    "month_08", "month_09", "month_10", "month_11", "month_12",
];

fn expected_kind(h: HazardId) -> SourceKind {
    match h {
        HazardId::Earthquake => SourceKind::PointGrid,
        HazardId::Flood | HazardId::Landslide | HazardId::Wildfire | HazardId::Lightning => {
            SourceKind::RasterGrid
        }
        HazardId::TcWind | HazardId::Fzg => SourceKind::PolygonTable,
        HazardId::Hail | HazardId::Tornado => SourceKind::EventSet,
        HazardId::Geomag => SourceKind::AssetTable,
    }
}

fn required_bands(h: HazardId) -> Vec<&'static str> {
    match h {
        HazardId::Earthquake => vec!["points"],
        HazardId::Flood => vec!["depth"],
        HazardId::Landslide => vec!["n10", "lw"],
        HazardId::Wildfire => vec!["whp_cls", "whp_cnt"],
        HazardId::TcWind | HazardId::Fzg => vec!["polygons"],
        HazardId::Hail => vec!["events"],
        HazardId::Tornado => vec!["tracks"],
        HazardId::Lightning => LIGHTNING_BANDS.to_vec(),
        HazardId::Geomag => vec!["probabilities"],
    }
}

#[derive(Debug, Clone)]
pub enum LayerData {
    Raster(BTreeMap<String, Raster>),
    PointGrid(PointGrid),
    Hail(HailSurfaces),
    Tornado {
        tracks: Vec<TornadoTrack>,
        record_years: f64,
    },
    Polygons {
        table: PolygonTable,
        column: String,
    },
    /// Substation id → value.
    AssetTable(BTreeMap<String, f64>),
}

#[derive(Debug, Clone)]
pub struct HazardLayer {
    pub hazard_id: HazardId,
    pub units: String,
    pub crs: String,
    pub data: LayerData,
}

impl HazardLayer {
    pub fn source_kind(&self) -> SourceKind {
        match self.data {
            LayerData::Raster(_) => SourceKind::RasterGrid,
            LayerData::PointGrid(_) => SourceKind::PointGrid,
            LayerData::Hail(_) | LayerData::Tornado { .. } => SourceKind::EventSet,
            LayerData::Polygons { .. } => SourceKind::PolygonTable,
            LayerData::AssetTable(_) => SourceKind::AssetTable,
        }
    }

    /// Load the layer described by `entry`; relative paths resolve against
    /// `base_dir`.
    pub fn load(entry: &LayerEntry, base_dir: &Path) -> Result<Self> {
        let h = entry.hazard_id;
        let ctx = |msg: String| Error::validation(format!("layer {h}: {msg}"));
        if entry.units.trim().is_empty() {
            return Err(ctx("units must be non-empty".into()));
        }
        if entry.source_kind != expected_kind(h) {
            return Err(ctx(format!(
                "source_kind {:?} is not supported, expected {:?}",
                entry.source_kind,
                expected_kind(h)
            )));
        }
        let mut paths = BTreeMap::new();
        for role in required_bands(h) {
            let p = entry
                .bands
                .get(role)
                .ok_or_else(|| ctx(format!("missing band `{role}`")))?;
            paths.insert(role, base_dir.join(p));
        }
        let crs = entry.crs.clone().unwrap_or_else(|| DEFAULT_CRS.to_string());
        let data = match h {
            HazardId::Earthquake => LayerData::PointGrid(PointGrid::read_csv(&paths["points"], &crs)?),
            HazardId::Flood | HazardId::Landslide | HazardId::Wildfire | HazardId::Lightning => {
                let mut bands = BTreeMap::new();
                for (role, p) in &paths {
                    bands.insert(role.to_string(), Raster::read(p, entry.nodata, &crs)?);
                }
                LayerData::Raster(bands)
            }
            HazardId::TcWind | HazardId::Fzg => {
                let column = entry.value_column.clone().unwrap_or_else(|| {
                    if h == HazardId::Fzg { "spia" } else { "wind_kn" }.to_string()
                });
                let id_col = entry.id_column.as_deref().unwrap_or("polygon_id");
                LayerData::Polygons {
                    table: PolygonTable::read_csv(&paths["polygons"], id_col, &crs)?,
                    column,
                }
            }
            HazardId::Hail => {
                let years = entry
                    .record_years
                    .ok_or_else(|| ctx("event sets must declare record_years".into()))?;
                let events = HailSurfaces::read_events(&paths["events"])?;
                let origin = entry.grid_origin.map(|[x, y]| Point::new(x, y)).unwrap_or(Point::new(0.0, 0.0));
                LayerData::Hail(rasterize_hail(
                    &events,
                    entry.cell_size_m.unwrap_or(HAIL_CELL_M),
                    origin,
                    years,
                )?)
            }
            HazardId::Tornado => {
                let record_years = entry
                    .record_years
                    .filter(|y| *y > 0.0)
                    .ok_or_else(|| ctx("event sets must declare positive record_years".into()))?;
                LayerData::Tornado {
                    tracks: TornadoTrack::read(&paths["tracks"])?,
                    record_years,
                }
            }
            HazardId::Geomag => {
                LayerData::AssetTable(read_asset_table(&paths["probabilities"], entry.value_column.as_deref())?)
            }
        };
        Ok(HazardLayer {
            hazard_id: h,
            units: entry.units.clone(),
            crs,
            data,
        })
    }
}

fn read_asset_table(path: &Path, column: Option<&str>) -> Result<BTreeMap<String, f64>> {
    let column = column.unwrap_or("failure_probability");
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::validation(format!("{}: missing `{name}` column", path.display())))
    };
    let (id_idx, v_idx) = (find("substation_id")?, find(column)?);
    let mut out = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let ctx = |msg: &str| Error::validation(format!("{}: record {}: {msg}", path.display(), i + 1));
        let v: f64 = row[v_idx].trim().parse().map_err(|_| ctx("value is not numeric"))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(ctx("failure probability outside [0, 1]"));
        }
        if out.insert(row[id_idx].to_string(), v).is_some() {
            return Err(ctx("duplicate substation id"));
        }
    }
    Ok(out)
}

/// All exposures of one hazard: substations first, then sample nodes, both
/// in network order.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardExposures {
    pub hazard_id: HazardId,
    pub units: String,
    pub assets: Vec<AssetExposure>,
}

struct Target<'a> {
    id: &'a str,
    location: Point,
    is_substation: bool,
}

fn spia_tier(v: f64) -> Result<f64> {
    if v.fract() == 0.0 && (0.0..=5.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::validation(format!("SPIA tier must be an integer in 0..=5, got {v}")))
    }
}

/// Sample one layer at every substation and sample node.
pub fn sample_layer(layer: &HazardLayer, network: &Network) -> Result<HazardExposures> {
    if layer.crs != network.crs_tag {
        return Err(Error::validation(format!(
            "layer {}: projection mismatch ({} vs network {})",
            layer.hazard_id, layer.crs, network.crs_tag
        )));
    }
    let targets: Vec<Target> = network
        .substations
        .iter()
        .map(|s| Target { id: &s.id, location: s.location, is_substation: true })
        .chain(network.nodes.iter().map(|n| Target {
            id: &n.id,
            location: n.location,
            is_substation: false,
        }))
        .collect();
    let h = layer.hazard_id;
    let per_target_ctx = |t: &Target, e: Error| Error::validation(format!("layer {h}: asset {}: {e}", t.id));

    // (intensity, rate) per target. Event sets cover the whole domain: an
    // asset no event touched has zero intensity and zero rate.
    let values: Vec<(Option<f64>, f64)> = match &layer.data {
        LayerData::Tornado { tracks, record_years } => {
            let pts: Vec<Point> = targets.iter().map(|t| t.location).collect();
            tornado_intersect(tracks, &pts, *record_years)
                .into_iter()
                .map(|e| (Some(e.max_ef_wind_mps.unwrap_or(0.0)), e.ef2plus_rate))
                .collect()
        }
        LayerData::Polygons { table, column } => {
            let pts: Vec<Point> = targets.iter().map(|t| t.location).collect();
            let joined = join_polygon(table, column, &pts);
            joined
                .into_iter()
                .zip(&targets)
                .map(|(v, t)| {
                    let v = match v {
                        None => None,
                        Some(v) if h == HazardId::TcWind => {
                            Some(knots_to_mps(v).map_err(|e| per_target_ctx(t, e))?)
                        }
                        Some(v) => Some(spia_tier(v).map_err(|e| per_target_ctx(t, e))?),
                    };
                    Ok((v, 1.0))
                })
                .collect::<Result<_>>()?
        }
        _ => targets
            .par_iter()
            .map(|t| sample_point(layer, t).map_err(|e| per_target_ctx(t, e)))
            .collect::<Result<_>>()?,
    };

    let assets = targets
        .iter()
        .zip(values)
        .map(|(t, (intensity, rate))| AssetExposure {
            asset_id: t.id.to_string(),
            hazard_id: h,
            intensity,
            occurrence_rate_per_year: rate,
            samples_aggregated: 1,
        })
        .collect();
    Ok(HazardExposures {
        hazard_id: h,
        units: layer.units.clone(),
        assets,
    })
}

fn sample_point(layer: &HazardLayer, t: &Target) -> Result<(Option<f64>, f64)> {
    let p = t.location;
    let v = match &layer.data {
        LayerData::PointGrid(g) => (Some(sample_nearest(g, p)), 1.0),
        LayerData::Raster(bands) => {
            let band = |role: &str| bands[role].value_at(p);
            let v = match layer.hazard_id {
                HazardId::Flood => band("depth"),
                HazardId::Landslide => landslide_score(band("n10"), band("lw")),
                HazardId::Wildfire => match (band("whp_cls"), band("whp_cnt")) {
                    (Some(cls), Some(cnt)) => {
                        if cls.fract() != 0.0 {
                            return Err(Error::validation(format!("wildfire class {cls} is not an integer")));
                        }
                        wildfire_mask(cls as i64, cnt)?
                    }
                    _ => None,
                },
                HazardId::Lightning => {
                    let mut monthly = [0.0; 12];
                    let mut covered = true;
                    for (m, role) in LIGHTNING_BANDS.iter().enumerate() {
                        match band(role) {
                            Some(v) => monthly[m] = v,
                            None => covered = false,
                        }
                    }
                    if covered {
                        Some(lightning_annualize(&monthly)?)
                    } else {
                        None
                    }
                }
                other => unreachable!("{other} is not a raster hazard"),
            };
            (v, 1.0)
        }
        LayerData::Hail(s) => match s.sample(p) {
            Some((rate, d)) => (Some(d), rate),
            None => (Some(0.0), 0.0),
        },
        LayerData::AssetTable(table) => {
            let v = if t.is_substation { table.get(t.id).copied() } else { None };
            (v, 1.0)
        }
        LayerData::Tornado { .. } | LayerData::Polygons { .. } => unreachable!("handled in bulk"),
    };
    Ok(v)
}

impl HazardExposures {
    /// Columns: `asset_id, hazard_id, intensity, rate, units`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = CsvOut::new(["asset_id", "hazard_id", "intensity", "rate", "units"]);
        for a in &self.assets {
            out.row([
                a.asset_id.as_str(),
                self.hazard_id.as_str(),
                &fmt_opt(a.intensity),
                &fmt_f64(a.occurrence_rate_per_year),
                &self.units,
            ]);
        }
        out.write(path)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            asset_id: String,
            hazard_id: HazardId,
            intensity: String,
            rate: f64,
            units: String,
        }
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut assets = Vec::new();
        let mut meta: Option<(HazardId, String)> = None;
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let ctx = |msg: String| Error::validation(format!("{}: record {}: {msg}", path.display(), i + 1));
            let r = row.map_err(|e| ctx(e.to_string()))?;
            match &meta {
                None => meta = Some((r.hazard_id, r.units.clone())),
                Some((h, _)) if *h != r.hazard_id => return Err(ctx("mixed hazards".into())),
                _ => {}
            }
            assets.push(AssetExposure {
                asset_id: r.asset_id,
                hazard_id: r.hazard_id,
                intensity: parse_opt(&r.intensity).map_err(|e| ctx(e.to_string()))?,
                occurrence_rate_per_year: r.rate,
                samples_aggregated: 1,
            });
        }
        let (hazard_id, units) =
            meta.ok_or_else(|| Error::validation(format!("{}: no exposure records", path.display())))?;
        Ok(Self { hazard_id, units, assets })
    }

    /// Intensity and rate aggregates per line over its covered nodes.
    pub fn line_aggregates(&self, network: &Network) -> Vec<(LineAggregate, LineAggregate)> {
        let by_id: HashMap<&str, &AssetExposure> =
            self.assets.iter().map(|a| (a.asset_id.as_str(), a)).collect();
        let mut per_line: HashMap<&str, Vec<&AssetExposure>> = HashMap::new();
        for n in &network.nodes {
            if let Some(a) = by_id.get(n.id.as_str()) {
                per_line.entry(n.parent_line_id.as_str()).or_default().push(a);
            }
        }
        network
            .lines
            .iter()
            .map(|l| {
                let samples = per_line.get(l.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
                let intensities: Vec<Option<f64>> = samples.iter().map(|a| a.intensity).collect();
                let rates: Vec<Option<f64>> = samples
                    .iter()
                    .map(|a| a.intensity.map(|_| a.occurrence_rate_per_year))
                    .collect();
                (
                    aggregate_line(&l.id, self.hazard_id, &intensities),
                    aggregate_line(&l.id, self.hazard_id, &rates),
                )
            })
            .collect()
    }
}

pub fn write_line_aggregates(path: &Path, rows: &[(LineAggregate, LineAggregate)]) -> Result<()> {
    let mut out = CsvOut::new([
        "line_id", "hazard_id", "samples", "mean", "max", "p95", "rate_mean", "rate_max", "rate_p95",
    ]);
    for (i, r) in rows {
        out.row([
            i.line_id.clone(),
            i.hazard_id.to_string(),
            i.samples.to_string(),
            fmt_opt(i.mean_intensity),
            fmt_opt(i.max_intensity),
            fmt_opt(i.p95_intensity),
            fmt_opt(r.mean_intensity),
            fmt_opt(r.max_intensity),
            fmt_opt(r.p95_intensity),
        ]);
    }
    out.write(path)
}

pub fn read_line_aggregates(path: &Path) -> Result<Vec<(LineAggregate, LineAggregate)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let ctx = |e: Error| Error::validation(format!("{}: record {}: {e}", path.display(), i + 1));
        let h: HazardId = row[1].parse().map_err(ctx)?;
        let samples: usize = row[2]
            .parse()
            .map_err(|_| ctx(Error::validation("bad sample count")))?;
        let f = |k: usize| parse_opt(&row[k]);
        let agg = |m: usize| -> Result<LineAggregate> {
            Ok(LineAggregate {
                line_id: row[0].to_string(),
                hazard_id: h,
                samples,
                mean_intensity: f(m)?,
                max_intensity: f(m + 1)?,
                p95_intensity: f(m + 2)?,
            })
        };
        out.push((agg(3).map_err(ctx)?, agg(6).map_err(ctx)?));
    }
    Ok(out)
}
