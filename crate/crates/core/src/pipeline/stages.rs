use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::economics::{
    build_service_areas, propagate_hazard, read_exposure_csv, read_sector_csv, sector_chart_svg, sector_report,
    write_sector_csv, EconomicAccounts, SectorRow, ShockResult,
};
use crate::error::{Error, Result};
use crate::fragility::{assess as assess_asset, AssetClass, DamageResult, FragilityDb, VoltageTier};
use crate::geometry::Polygon;
use crate::hazard::{
    hotspots, read_line_aggregates, sample_layer, write_line_aggregates, HazardExposures, HazardId, HazardLayer,
    LayerManifest, LineAggregate,
};
use crate::loss::{
    classify_failures, read_loss_csv, scenario_conditioned, summarize, write_loss_csv, CostSchedule, LossRecord,
    LossSummary,
};
use crate::network::{BuildOptions, Network, RawNetwork};
use crate::util::{create_dir, fmt_f64, fmt_opt, read_json, sha256_file, write_json, CsvOut};

use super::config::{LineAggregateChoice, RunConfig};

/// Damage-state columns in the damage CSV; hazards with fewer states leave
/// the rest blank.
const MAX_STATES: usize = 4;

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn dir(&self, stage: &str) -> PathBuf {
        self.root.join(stage)
    }

    pub fn network(&self) -> PathBuf {
        self.dir("ingest").join("network.geojson")
    }

    pub fn diagnostics(&self) -> PathBuf {
        self.dir("ingest").join("diagnostics.csv")
    }

    pub fn exposure(&self, h: HazardId) -> PathBuf {
        self.dir("sample").join(format!("{h}_exposure.csv"))
    }

    pub fn line_aggregates(&self, h: HazardId) -> PathBuf {
        self.dir("sample").join(format!("{h}_lines.csv"))
    }

    pub fn hotspots(&self, h: HazardId) -> PathBuf {
        self.dir("sample").join(format!("{h}_hotspots.json"))
    }

    pub fn damage(&self, h: HazardId) -> PathBuf {
        self.dir("assess").join(format!("{h}_damage.csv"))
    }

    pub fn loss(&self, h: HazardId) -> PathBuf {
        self.dir("assess").join(format!("{h}_loss.csv"))
    }

    pub fn failures(&self, h: HazardId) -> PathBuf {
        self.dir("assess").join(format!("{h}_failures.json"))
    }

    pub fn service_areas(&self) -> PathBuf {
        self.dir("econ").join("service_areas.csv")
    }

    pub fn shocks(&self) -> PathBuf {
        self.dir("econ").join("shocks.json")
    }

    pub fn econ_sectors(&self) -> PathBuf {
        self.dir("econ").join("sectors.csv")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.dir("report")
    }

    pub fn summary(&self) -> PathBuf {
        self.dir("report").join("run_summary.json")
    }
}

/// Hazards selected by the config, or every hazard in the manifest.
pub fn selected_hazards(cfg: &RunConfig) -> Result<Vec<HazardId>> {
    if !cfg.hazards.is_empty() {
        let mut v = cfg.hazards.clone();
        v.sort();
        return Ok(v);
    }
    let manifest = LayerManifest::read(&cfg.resolve(&cfg.layers))?;
    let mut v: Vec<HazardId> = manifest.layers.iter().map(|l| l.hazard_id).collect();
    v.sort();
    v.dedup();
    if v.is_empty() {
        return Err(Error::validation("layer manifest lists no hazards"));
    }
    Ok(v)
}

pub fn ingest(cfg: &RunConfig, out: &Layout) -> Result<Network> {
    let mut raw = RawNetwork::default();
    raw.add_substations(&cfg.resolve(&cfg.network.substations))?;
    raw.add_lines(&cfg.resolve(&cfg.network.lines))?;
    if let Some(t) = &cfg.network.towers {
        raw.add_towers(&cfg.resolve(t))?;
    }
    let (network, diag) = raw.build(BuildOptions {
        min_line_voltage_kv: cfg.network.min_line_voltage_kv,
    })?;
    create_dir(&out.dir("ingest"))?;
    network.write_geojson(&out.network())?;
    diag.write_csv(&out.diagnostics())?;
    Ok(network)
}

fn chosen(agg: &LineAggregate, choice: LineAggregateChoice) -> Option<f64> {
    match choice {
        LineAggregateChoice::Mean => agg.mean_intensity,
        LineAggregateChoice::Max => agg.max_intensity,
        LineAggregateChoice::P95 => agg.p95_intensity,
    }
}

pub fn sample(cfg: &RunConfig, hazards: &[HazardId], out: &Layout) -> Result<()> {
    let network = Network::read_geojson(&out.network())?;
    let manifest_path = cfg.resolve(&cfg.layers);
    let manifest = LayerManifest::read(&manifest_path)?;
    let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    create_dir(&out.dir("sample"))?;
    hazards.par_iter().try_for_each(|&h| -> Result<()> {
        let entry = manifest
            .entry(h)
            .ok_or_else(|| Error::validation(format!("layer manifest has no entry for {h}")))?;
        let layer = HazardLayer::load(entry, &base)?;
        let exposures = sample_layer(&layer, &network)?;
        exposures.write_csv(&out.exposure(h))?;
        let aggregates = exposures.line_aggregates(&network);
        write_line_aggregates(&out.line_aggregates(h), &aggregates)?;
        // hotspots over assets: substations by point value, lines by the
        // configured aggregate
        let mut values: Vec<(String, Option<f64>)> = exposures
            .assets
            .iter()
            .filter(|a| network.substation(&a.asset_id).is_some())
            .map(|a| (a.asset_id.clone(), a.intensity))
            .collect();
        values.extend(aggregates.iter().map(|(i, _)| (i.line_id.clone(), chosen(i, cfg.line_aggregate))));
        write_json(&out.hotspots(h), &hotspots(h, &values))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    #[serde(flatten)]
    pub summary: LossSummary,
    pub failed_substation_ids: Vec<String>,
    pub failed_line_ids: Vec<String>,
    pub indirect_substation_ids: Vec<String>,
    pub affected_substation_ids: Vec<String>,
}

fn load_fragility(cfg: &RunConfig) -> Result<FragilityDb> {
    match &cfg.fragility {
        Some(p) => FragilityDb::read_csv(&cfg.resolve(p)),
        None => Ok(FragilityDb::builtin()),
    }
}

fn load_costs(cfg: &RunConfig) -> Result<CostSchedule> {
    match &cfg.costs {
        Some(p) => CostSchedule::read_csv(&cfg.resolve(p)),
        None => Ok(CostSchedule::builtin()),
    }
}

/// Rate used for loss. Return-period hazards are scenario-conditioned and
/// must carry λ = 1; anything else in the exposure file is an error.
fn checked_rate(h: HazardId, asset: &str, rate: f64) -> Result<f64> {
    if scenario_conditioned(h) && rate != 1.0 {
        return Err(Error::validation(format!(
            "asset {asset} ({h}): return-period hazard carries occurrence rate {rate}, expected 1"
        )));
    }
    Ok(rate)
}

pub fn assess(cfg: &RunConfig, hazards: &[HazardId], out: &Layout) -> Result<()> {
    let network = Network::read_geojson(&out.network())?;
    let db = load_fragility(cfg)?;
    let costs = load_costs(cfg)?;
    create_dir(&out.dir("assess"))?;
    hazards.par_iter().try_for_each(|&h| -> Result<()> {
        let exposures = HazardExposures::read_csv(&out.exposure(h))?;
        if exposures.hazard_id != h {
            return Err(Error::validation(format!("{}: holds {} records", out.exposure(h).display(), exposures.hazard_id)));
        }
        let by_id: BTreeMap<&str, _> = exposures.assets.iter().map(|a| (a.asset_id.as_str(), a)).collect();
        let aggregates: BTreeMap<String, (LineAggregate, LineAggregate)> = read_line_aggregates(&out.line_aggregates(h))?
            .into_iter()
            .map(|p| (p.0.line_id.clone(), p))
            .collect();

        let mut damage: Vec<(AssetClass, Option<f64>, DamageResult)> = Vec::new();
        let mut records = Vec::new();
        for s in &network.substations {
            let exp = by_id
                .get(s.id.as_str())
                .ok_or_else(|| Error::validation(format!("{h}: no exposure record for substation {}", s.id)))?;
            let tier = VoltageTier::from_kv(s.max_connected_voltage_kv);
            let d = assess_asset(&db, h, AssetClass::Substation, tier, &s.id, exp.intensity)?;
            let rate = checked_rate(h, &s.id, exp.occurrence_rate_per_year)?;
            let cost = costs.substation_cost_cents(s.max_connected_voltage_kv)?;
            records.push(LossRecord::new(&s.id, AssetClass::Substation, h, d.edr, cost, rate)?);
            damage.push((AssetClass::Substation, exp.intensity, d));
        }
        for l in &network.lines {
            let (ia, ra) = aggregates
                .get(&l.id)
                .ok_or_else(|| Error::validation(format!("{h}: no line aggregate for {}", l.id)))?;
            let intensity = chosen(ia, cfg.line_aggregate);
            let tier = VoltageTier::from_kv(l.snapped_voltage_kv);
            let d = assess_asset(&db, h, AssetClass::Line, tier, &l.id, intensity)?;
            // uncovered lines carry no loss; keep λ = 1 for scenario hazards
            let rate = match chosen(ra, cfg.line_aggregate) {
                Some(r) => checked_rate(h, &l.id, r)?,
                None if scenario_conditioned(h) => 1.0,
                None => 0.0,
            };
            let cost = costs.line_cost_cents(l.snapped_voltage_kv, l.length_miles)?;
            records.push(LossRecord::new(&l.id, AssetClass::Line, h, d.edr, cost, rate)?);
            damage.push((AssetClass::Line, intensity, d));
        }

        let failures = classify_failures(&mut records, &network)?;
        write_damage_csv(&out.damage(h), &damage)?;
        write_loss_csv(&out.loss(h), &records)?;
        let report = FailureReport {
            summary: summarize(h, &records, &failures),
            failed_substation_ids: failures.failed_substations.into_iter().collect(),
            failed_line_ids: failures.failed_lines.into_iter().collect(),
            indirect_substation_ids: failures.indirect_substations.into_iter().collect(),
            affected_substation_ids: failures.affected.into_iter().collect(),
        };
        write_json(&out.failures(h), &report)
    })
}

fn write_damage_csv(path: &Path, rows: &[(AssetClass, Option<f64>, DamageResult)]) -> Result<()> {
    let mut header = vec!["asset_id".to_string(), "asset_class".into(), "hazard_id".into(), "intensity".into()];
    header.extend((1..=MAX_STATES).map(|i| format!("p_ds{i}")));
    header.push("edr".into());
    let mut out = CsvOut::new(header);
    for (class, intensity, d) in rows {
        let mut rec = vec![d.asset_id.clone(), class.as_str().to_string(), d.hazard_id.to_string(), fmt_opt(*intensity)];
        rec.extend((0..MAX_STATES).map(|i| d.exceedance_probs.get(i).map(|p| fmt_f64(*p)).unwrap_or_default()));
        rec.push(fmt_opt(d.edr));
        out.row(rec);
    }
    out.write(path)
}

pub fn econ(cfg: &RunConfig, hazards: &[HazardId], out: &Layout) -> Result<Vec<ShockResult>> {
    let network = Network::read_geojson(&out.network())?;
    let accounts: EconomicAccounts = read_json(&cfg.resolve(&cfg.accounts))?;
    accounts.validate()?;
    let exposure = read_exposure_csv(&cfg.resolve(&cfg.exposure))?;
    let boundary = match &cfg.boundary {
        Some(p) => {
            let path = cfg.resolve(p);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            Some(Polygon::from_wkt(text.trim()).map_err(|e| Error::validation(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let sites: Vec<_> = network.substations.iter().map(|s| (s.id.clone(), s.location)).collect();
    let areas = build_service_areas(&sites, boundary.as_ref())?;

    create_dir(&out.dir("econ"))?;
    let mut csv = CsvOut::new(["representative_id", "member_ids", "site_x", "site_y", "area_m2", "population", "wkt"]);
    for a in &areas {
        csv.row([
            a.representative().to_string(),
            a.ids.join(";"),
            fmt_f64(a.site.x),
            fmt_f64(a.site.y),
            fmt_f64(a.area()),
            fmt_opt(exposure.get(a.representative()).map(|e| e.population)),
            a.polygon().to_wkt(),
        ]);
    }
    csv.write(&out.service_areas())?;

    let results: Vec<ShockResult> = hazards
        .iter()
        .map(|&h| {
            let f: FailureReport = read_json(&out.failures(h))?;
            let affected: BTreeSet<String> = f.affected_substation_ids.into_iter().collect();
            propagate_hazard(h, &affected, &areas, &exposure, &accounts)
        })
        .collect::<Result<_>>()?;
    write_json(&out.shocks(), &results)?;
    write_sector_csv(&out.econ_sectors(), &sector_report(&results, &accounts))?;
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardSummary {
    pub hazard_id: HazardId,
    pub scenario_conditioned: bool,
    pub total_eal_cents: i64,
    pub total_ead_cents: i64,
    pub failed_substations: usize,
    pub failed_lines: usize,
    pub affected_substations: usize,
    pub l_pop: f64,
    pub direct_loss_cents_per_day: i64,
    pub total_output_loss_cents_per_day: i64,
    pub multiplier: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub hazards: Vec<HazardSummary>,
    pub total_ead_cents: i64,
    pub line_aggregate: LineAggregateChoice,
    /// Config-relative input path → SHA-256.
    pub input_checksums: BTreeMap<String, String>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// SHA-256 of every configured input and every layer file the manifest
/// references, keyed by path relative to the config directory.
pub fn input_checksums(cfg: &RunConfig) -> Result<BTreeMap<String, String>> {
    let mut files = cfg.input_files();
    let manifest_dir = cfg.layers.parent().map(Path::to_path_buf).unwrap_or_default();
    for e in LayerManifest::read(&cfg.resolve(&cfg.layers))?.layers {
        for band in e.bands.values() {
            let rel = manifest_dir.join(band);
            files.push((rel.to_string_lossy().replace('\\', "/"), cfg.resolve(&rel)));
        }
    }
    files.into_iter().map(|(name, p)| Ok((name, sha256_file(&p)?))).collect()
}

pub fn report(cfg: &RunConfig, hazards: &[HazardId], out: &Layout) -> Result<RunSummary> {
    let shocks: Vec<ShockResult> = read_json(&out.shocks())?;
    let sectors: Vec<SectorRow> = read_sector_csv(&out.econ_sectors())?;
    let dir = out.report_dir();
    create_dir(&dir.join("charts"))?;

    let mut rows = Vec::new();
    for &h in hazards {
        let f: FailureReport = read_json(&out.failures(h))?;
        // totals come from the per-asset file, not the cached summary
        let records = read_loss_csv(&out.loss(h))?;
        let eal: i64 = records.iter().map(|r| r.eal_cents).sum();
        let ead: i64 = records.iter().map(|r| r.ead_cents).sum();
        if eal != f.summary.total_eal_cents || ead != f.summary.total_ead_cents {
            return Err(Error::validation(format!("{h}: loss totals disagree with {}", out.loss(h).display())));
        }
        let shock = shocks
            .iter()
            .find(|s| s.hazard_id == h)
            .ok_or_else(|| Error::validation(format!("{}: no shock for {h}", out.shocks().display())))?;
        let mine: Vec<&SectorRow> = sectors.iter().filter(|r| r.hazard_id == h).collect();
        rows.push(HazardSummary {
            hazard_id: h,
            scenario_conditioned: scenario_conditioned(h),
            total_eal_cents: eal,
            total_ead_cents: ead,
            failed_substations: f.summary.failed_substations,
            failed_lines: f.summary.failed_lines,
            affected_substations: f.summary.affected_substations,
            l_pop: shock.l_pop,
            direct_loss_cents_per_day: mine.iter().map(|r| r.direct_cents).sum(),
            total_output_loss_cents_per_day: mine.iter().map(|r| r.total_cents).sum(),
            multiplier: shock.multiplier,
        });
    }

    let mut ranking: Vec<&HazardSummary> = rows.iter().collect();
    ranking.sort_by(|a, b| b.total_ead_cents.cmp(&a.total_ead_cents).then(a.hazard_id.cmp(&b.hazard_id)));
    let mut csv = CsvOut::new(["rank", "hazard_id", "ead_cents", "ead_usd", "eal_cents", "scenario_conditioned"]);
    for (i, r) in ranking.iter().enumerate() {
        csv.row([
            (i + 1).to_string(),
            r.hazard_id.to_string(),
            r.total_ead_cents.to_string(),
            cents_to_usd(r.total_ead_cents),
            r.total_eal_cents.to_string(),
            r.scenario_conditioned.to_string(),
        ]);
    }
    csv.write(&dir.join("ead_ranking.csv"))?;

    let mut csv = CsvOut::new([
        "hazard_id",
        "failed_substations",
        "failed_lines",
        "affected_substations",
        "l_pop",
        "direct_usd_per_day",
        "indirect_usd_per_day",
        "multiplier",
    ]);
    for r in &rows {
        csv.row([
            r.hazard_id.to_string(),
            r.failed_substations.to_string(),
            r.failed_lines.to_string(),
            r.affected_substations.to_string(),
            fmt_f64(r.l_pop),
            cents_to_usd(r.direct_loss_cents_per_day),
            cents_to_usd(r.total_output_loss_cents_per_day - r.direct_loss_cents_per_day),
            fmt_opt(r.multiplier),
        ]);
    }
    csv.write(&dir.join("failures.csv"))?;

    let selected: Vec<SectorRow> = sectors.into_iter().filter(|r| hazards.contains(&r.hazard_id)).collect();
    write_sector_csv(&dir.join("sectors.csv"), &selected)?;
    for &h in hazards {
        let path = dir.join("charts").join(format!("{h}.svg"));
        std::fs::write(&path, sector_chart_svg(h, &selected)).map_err(|e| Error::io(&path, e))?;
    }

    let summary = RunSummary {
        total_ead_cents: rows.iter().map(|r| r.total_ead_cents).sum(),
        hazards: rows,
        line_aggregate: cfg.line_aggregate,
        input_checksums: input_checksums(cfg)?,
        wall_time_s: 0.0,
    };
    write_json(&out.summary(), &summary)?;
    Ok(summary)
}

fn cents_to_usd(c: i64) -> String {
    let sign = if c < 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", c.unsigned_abs() / 100, c.unsigned_abs() % 100)
}

/// Check the occurrence-rate convention over a completed run: λ = 1 for
/// every scenario-conditioned hazard; tornado and hail substations carry
/// exactly the empirical rate sampled for them.
pub fn check_rate_discipline(out: &Layout, hazards: &[HazardId]) -> Result<()> {
    for &h in hazards {
        let records = read_loss_csv(&out.loss(h))?;
        if scenario_conditioned(h) {
            if let Some(r) = records.iter().find(|r| r.rate != 1.0) {
                return Err(Error::validation(format!("{h}: asset {} has λ = {}", r.asset_id, r.rate)));
            }
        } else {
            let exposures = HazardExposures::read_csv(&out.exposure(h))?;
            let by_id: BTreeMap<&str, f64> =
                exposures.assets.iter().map(|a| (a.asset_id.as_str(), a.occurrence_rate_per_year)).collect();
            for r in records.iter().filter(|r| r.asset_class == AssetClass::Substation) {
                if by_id.get(r.asset_id.as_str()) != Some(&r.rate) {
                    return Err(Error::validation(format!(
                        "{h}: substation {} has λ = {} but sampled {:?}",
                        r.asset_id,
                        r.rate,
                        by_id.get(r.asset_id.as_str())
                    )));
                }
            }
        }
    }
    Ok(())
}
