//! Affected population over substation service areas and Leontief
//! propagation of the resulting demand shock.

mod leontief;
mod voronoi;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hazard::HazardId;
use crate::util::{fmt_f64, CsvOut};

pub use leontief::{
    demand_shock, leontief_propagate, EconomicAccounts, Propagation, MAX_RELATIVE_RESIDUAL, SECTORS,
};
pub use voronoi::{build_service_areas, default_boundary, ServiceArea, DEFAULT_BOUNDARY_BUFFER_M};

/// Per-substation population and sectoral GDP (precomputed upstream).
#[derive(Debug, Clone, PartialEq)]
pub struct SubstationExposure {
    pub substation_id: String,
    pub population: f64,
    pub gdp: Vec<f64>,
}

/// Columns: `substation_id, population, gdp_sector_1 … gdp_sector_10`.
pub fn read_exposure_csv(path: &Path) -> Result<BTreeMap<String, SubstationExposure>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let mut want = vec!["substation_id".to_string(), "population".to_string()];
    want.extend((1..=SECTORS).map(|i| format!("gdp_sector_{i}")));
    let idx: Vec<usize> = want
        .iter()
        .map(|w| {
            headers
                .iter()
                .position(|h| h == w)
                .ok_or_else(|| Error::validation(format!("{}: missing `{w}` column", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let ctx = |msg: String| Error::validation(format!("{}: record {}: {msg}", path.display(), i + 1));
        let num = |k: usize| -> Result<f64> {
            let v: f64 = row[idx[k]]
                .trim()
                .parse()
                .map_err(|_| ctx(format!("`{}` is not numeric", want[k])))?;
            if v >= 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(ctx(format!("`{}` must be non-negative", want[k])))
            }
        };
        let rec = SubstationExposure {
            substation_id: row[idx[0]].to_string(),
            population: num(1)?,
            gdp: (2..2 + SECTORS).map(num).collect::<Result<_>>()?,
        };
        if out.insert(rec.substation_id.clone(), rec).is_some() {
            return Err(ctx(format!("duplicate substation id {}", &row[idx[0]])));
        }
    }
    Ok(out)
}

pub fn write_exposure_csv(path: &Path, rows: &BTreeMap<String, SubstationExposure>) -> Result<()> {
    let mut header = vec!["substation_id".to_string(), "population".to_string()];
    header.extend((1..=SECTORS).map(|i| format!("gdp_sector_{i}")));
    let mut out = CsvOut::new(header);
    for r in rows.values() {
        let mut rec = vec![r.substation_id.clone(), fmt_f64(r.population)];
        rec.extend(r.gdp.iter().map(|v| fmt_f64(*v)));
        out.row(rec);
    }
    out.write(path)
}

/// L_pop = Σ population over service areas with any constituent in `affected`.
/// A merged (coincident) site counts once, with its representative's
/// population.
pub fn affected_population(
    affected: &BTreeSet<String>,
    areas: &[ServiceArea],
    exposure: &BTreeMap<String, SubstationExposure>,
) -> Result<f64> {
    let known: BTreeSet<&str> = areas.iter().flat_map(|a| a.ids.iter().map(String::as_str)).collect();
    let unknown: Vec<&str> = affected.iter().map(String::as_str).filter(|id| !known.contains(id)).collect();
    if !unknown.is_empty() {
        return Err(Error::validation(format!("affected substations without a service area: {}", unknown.join(", "))));
    }
    let mut missing = Vec::new();
    let mut total = 0.0;
    for a in areas {
        if !a.ids.iter().any(|id| affected.contains(id)) {
            continue;
        }
        match exposure.get(a.representative()) {
            Some(e) => total += e.population,
            None => missing.push(a.representative().to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::validation(format!(
            "substations missing from the exposure table: {}",
            missing.join(", ")
        )));
    }
    Ok(total)
}

/// Grid-served population: one representative per service area.
pub fn grid_population(areas: &[ServiceArea], exposure: &BTreeMap<String, SubstationExposure>) -> Result<f64> {
    let all: BTreeSet<String> = areas.iter().flat_map(|a| a.ids.iter().cloned()).collect();
    affected_population(&all, areas, exposure)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockResult {
    pub hazard_id: HazardId,
    pub affected_substations: usize,
    pub l_pop: f64,
    pub rho: f64,
    /// Daily direct final-demand change per sector (negative, USD/day).
    pub delta_f: Vec<f64>,
    /// Daily total output change per sector (negative, USD/day).
    pub delta_x: Vec<f64>,
    pub multiplier: Option<f64>,
    pub relative_residual: f64,
}

pub fn propagate_hazard(
    hazard: HazardId,
    affected: &BTreeSet<String>,
    areas: &[ServiceArea],
    exposure: &BTreeMap<String, SubstationExposure>,
    accounts: &EconomicAccounts,
) -> Result<ShockResult> {
    let l_pop = affected_population(affected, areas, exposure)?;
    let delta_f = demand_shock(l_pop, accounts)?;
    let p = leontief_propagate(&delta_f, accounts)?;
    Ok(ShockResult {
        hazard_id: hazard,
        affected_substations: affected.len(),
        l_pop,
        rho: l_pop / accounts.p_grid,
        delta_f,
        delta_x: p.delta_x,
        multiplier: p.multiplier,
        relative_residual: p.relative_residual,
    })
}

/// One report row; magnitudes in cents, with indirect defined as
/// total − direct so the identity holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorRow {
    pub hazard_id: HazardId,
    pub sector: String,
    pub direct_cents: i64,
    pub indirect_cents: i64,
    pub total_cents: i64,
}

pub fn sector_report(results: &[ShockResult], accounts: &EconomicAccounts) -> Vec<SectorRow> {
    let mag = |v: f64| (v.abs() * 100.0).round() as i64;
    results
        .iter()
        .flat_map(|r| {
            (0..SECTORS).map(move |s| {
                let direct = mag(r.delta_f[s]);
                let total = mag(r.delta_x[s]);
                SectorRow {
                    hazard_id: r.hazard_id,
                    sector: accounts.sector_names[s].clone(),
                    direct_cents: direct,
                    indirect_cents: total - direct,
                    total_cents: total,
                }
            })
        })
        .collect()
}

pub fn write_sector_csv(path: &Path, rows: &[SectorRow]) -> Result<()> {
    let mut out = CsvOut::new(["hazard_id", "sector", "direct_cents", "indirect_cents", "total_cents"]);
    for r in rows {
        out.row([
            r.hazard_id.to_string(),
            r.sector.clone(),
            r.direct_cents.to_string(),
            r.indirect_cents.to_string(),
            r.total_cents.to_string(),
        ]);
    }
    out.write(path)
}

pub fn read_sector_csv(path: &Path) -> Result<Vec<SectorRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    rdr.deserialize::<SectorRow>()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::validation(format!("{}: record {}: {e}", path.display(), i + 1))))
        .collect()
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Horizontal stacked bars per sector: direct (dark) and indirect (light).
pub fn sector_chart_svg(hazard: HazardId, rows: &[SectorRow]) -> String {
    let rows: Vec<&SectorRow> = rows.iter().filter(|r| r.hazard_id == hazard).collect();
    let (label_w, bar_w, row_h, top) = (220.0, 520.0, 24.0, 40.0);
    let max = rows.iter().map(|r| r.total_cents).max().unwrap_or(0).max(1) as f64;
    let height = top + row_h * rows.len() as f64 + 20.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="12">"#,
        label_w + bar_w + 140.0
    );
    let _ = writeln!(svg, r#"<text x="10" y="20" font-size="14">{hazard}: daily output loss by sector</text>"#);
    for (i, r) in rows.iter().enumerate() {
        let y = top + row_h * i as f64;
        let wd = bar_w * r.direct_cents as f64 / max;
        let wi = bar_w * r.indirect_cents.max(0) as f64 / max;
        let _ = writeln!(svg, r#"<text x="10" y="{}">{}</text>"#, y + 15.0, escape_xml(&r.sector));
        let _ = writeln!(svg, r##"<rect x="{label_w}" y="{y}" width="{wd:.2}" height="18" fill="#1f4e79"/>"##);
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{y}" width="{wi:.2}" height="18" fill="#9dc3e6"/>"##,
            label_w + wd
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}">${:.0}/day</text>"#,
            label_w + wd + wi + 6.0,
            y + 15.0,
            r.total_cents as f64 / 100.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Polygon};

    fn setup() -> (Vec<ServiceArea>, BTreeMap<String, SubstationExposure>) {
        let subs: Vec<(String, Point)> = [("a", 0.5, 0.5), ("b", 1.5, 0.5), ("c", 0.5, 1.5), ("d", 1.5, 1.5), ("d2", 1.5, 1.5)]
            .iter()
            .map(|(id, x, y)| (id.to_string(), Point::new(*x, *y)))
            .collect();
        let areas = build_service_areas(&subs, Some(&Polygon::rect(0.0, 0.0, 2.0, 2.0))).unwrap();
        let exposure = [("a", 1000.0), ("b", 2500.0), ("c", 500.0), ("d", 6000.0), ("d2", 99.0)]
            .iter()
            .map(|(id, p)| {
                (id.to_string(), SubstationExposure { substation_id: id.to_string(), population: *p, gdp: vec![0.0; SECTORS] })
            })
            .collect();
        (areas, exposure)
    }

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn population_examples() {
        let (areas, ex) = setup();
        assert_eq!(affected_population(&set(&[]), &areas, &ex).unwrap(), 0.0);
        assert_eq!(affected_population(&set(&["a", "b"]), &areas, &ex).unwrap(), 3500.0);
        // merged site counts once, via its representative
        assert_eq!(affected_population(&set(&["d2"]), &areas, &ex).unwrap(), 6000.0);
        assert_eq!(affected_population(&set(&["d", "d2"]), &areas, &ex).unwrap(), 6000.0);
        let p_grid = grid_population(&areas, &ex).unwrap();
        assert_eq!(p_grid, 10_000.0);
        assert_eq!(affected_population(&set(&["a", "b", "c", "d", "d2"]), &areas, &ex).unwrap(), p_grid);
        let err = affected_population(&set(&["zz"]), &areas, &ex).unwrap_err();
        assert!(err.to_string().contains("zz"));
        let mut partial = ex.clone();
        partial.remove("c");
        assert!(affected_population(&set(&["c"]), &areas, &partial).unwrap_err().to_string().contains('c'));
    }

    #[test]
    fn report_identity_and_zero_matrix() {
        let (areas, ex) = setup();
        let acc = EconomicAccounts {
            sector_names: (1..=SECTORS).map(|i| format!("s{i}")).collect(),
            a: vec![vec![0.0; SECTORS]; SECTORS],
            f_cons: (1..=SECTORS).map(|i| 1e9 * i as f64).collect(),
            p_grid: 10_000.0,
        };
        let r = propagate_hazard(HazardId::Flood, &set(&["a", "b"]), &areas, &ex, &acc).unwrap();
        assert_eq!(r.multiplier, Some(1.0));
        let rows = sector_report(&[r], &acc);
        assert!(rows.iter().all(|r| r.indirect_cents == 0));
        assert!(rows.iter().all(|r| r.direct_cents + r.indirect_cents == r.total_cents));
        assert!(sector_chart_svg(HazardId::Flood, &rows).starts_with("<svg"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_sector_csv(&p, &rows).unwrap();
        assert_eq!(read_sector_csv(&p).unwrap(), rows);
    }

    #[test]
    fn exposure_csv_round_trip() {
        let (_, ex) = setup();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        write_exposure_csv(&p, &ex).unwrap();
        assert_eq!(read_exposure_csv(&p).unwrap(), ex);
    }
}
