//! Replacement costs, expected annual/daily damage and failure
//! classification. Money is carried as integer cents.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragility::AssetClass;
use crate::hazard::HazardId;
use crate::network::{Network, STANDARD_VOLTAGES_KV};
use crate::util::{fmt_f64, fmt_opt, parse_opt, CsvOut};

pub const FAILURE_EDR: f64 = 0.50;
pub const DAYS_PER_YEAR: f64 = 365.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub voltage_kv: u32,
    pub line_usd_per_mile: f64,
    pub substation_usd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSchedule {
    rows: BTreeMap<u32, CostRow>,
}

/// Dollars to the nearest cent (half away from zero).
pub fn usd_to_cents(usd: f64) -> i64 {
    (usd * 100.0).round() as i64
}

impl CostSchedule {
    pub fn new(rows: Vec<CostRow>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for r in rows {
            if !(r.line_usd_per_mile > 0.0 && r.substation_usd > 0.0)
                || !r.line_usd_per_mile.is_finite()
                || !r.substation_usd.is_finite()
            {
                return Err(Error::validation(format!("cost row {} kV: costs must be positive", r.voltage_kv)));
            }
            if map.insert(r.voltage_kv, r).is_some() {
                return Err(Error::validation(format!("cost row {} kV listed twice", r.voltage_kv)));
            }
        }
        let keys: Vec<u32> = map.keys().copied().collect();
        if keys != STANDARD_VOLTAGES_KV {
            return Err(Error::validation(format!(
                "cost schedule must list exactly {STANDARD_VOLTAGES_KV:?} kV, got {keys:?}"
            )));
        }
        let vals: Vec<&CostRow> = map.values().collect();
        for w in vals.windows(2) {
            if w[1].line_usd_per_mile < w[0].line_usd_per_mile || w[1].substation_usd < w[0].substation_usd {
                return Err(Error::validation(format!(
                    "costs must not decrease with voltage ({} kV → {} kV)",
                    w[0].voltage_kv, w[1].voltage_kv
                )));
            }
        }
        Ok(Self { rows: map })
    }

    /// MISO MTEP24 planning-level unit costs (2023 USD).
    pub fn builtin() -> Self {
        let table = [
            (69, 1_500_000.0, 8.0e6),
            (115, 2_500_000.0, 15.0e6),
            (161, 2_750_000.0, 20.0e6),
            (230, 3_000_000.0, 37.5e6),
            (345, 3_050_000.0, 75.0e6),
            (500, 3_600_000.0, 150.0e6),
            (765, 5_900_000.0, 300.0e6),
        ];
        Self::new(
            table
                .iter()
                .map(|&(v, l, s)| CostRow { voltage_kv: v, line_usd_per_mile: l, substation_usd: s })
                .collect(),
        )
        .expect("built-in cost schedule is valid")
    }

    fn row(&self, kv: u32) -> Result<&CostRow> {
        self.rows
            .get(&kv)
            .ok_or_else(|| Error::validation(format!("no replacement cost for {kv} kV")))
    }

    pub fn line_cost_cents(&self, kv: u32, length_miles: f64) -> Result<i64> {
        Ok(usd_to_cents(self.row(kv)?.line_usd_per_mile * length_miles))
    }

    pub fn substation_cost_cents(&self, kv: u32) -> Result<i64> {
        Ok(usd_to_cents(self.row(kv)?.substation_usd))
    }

    /// Columns: `voltage_kv, line_usd_per_mile, substation_usd`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let rows = rdr
            .deserialize::<CostRow>()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| Error::validation(format!("{}: record {}: {e}", path.display(), i + 1))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = CsvOut::new(["voltage_kv", "line_usd_per_mile", "substation_usd"]);
        for r in self.rows.values() {
            out.row([r.voltage_kv.to_string(), fmt_f64(r.line_usd_per_mile), fmt_f64(r.substation_usd)]);
        }
        out.write(path)
    }
}

/// EAL = edr·cost·λ and EAD = EAL/365, both in (unrounded) cents.
pub fn compute_loss(edr: f64, cost_cents: i64, rate: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&edr) {
        return Err(Error::validation(format!("EDR outside [0, 1]: {edr}")));
    }
    if cost_cents <= 0 {
        return Err(Error::validation("replacement cost must be positive"));
    }
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::validation(format!("occurrence rate must be non-negative, got {rate}")));
    }
    let eal = edr * cost_cents as f64 * rate;
    Ok((eal, eal / DAYS_PER_YEAR))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossRecord {
    pub asset_id: String,
    pub asset_class: AssetClass,
    pub hazard_id: HazardId,
    pub edr: Option<f64>,
    pub replacement_cost_cents: i64,
    pub rate: f64,
    pub eal_cents: i64,
    pub ead_cents: i64,
    pub failed: bool,
    /// Substations only: connected to a failed line.
    pub indirectly_affected: bool,
}

impl LossRecord {
    /// Both money fields are rounded from the unrounded EAL so EAD never
    /// inherits EAL's rounding.
    pub fn new(
        asset_id: &str,
        asset_class: AssetClass,
        hazard_id: HazardId,
        edr: Option<f64>,
        cost_cents: i64,
        rate: f64,
    ) -> Result<Self> {
        let (eal, ead) = match edr {
            Some(e) => compute_loss(e, cost_cents, rate)
                .map_err(|err| Error::validation(format!("asset {asset_id} ({hazard_id}): {err}")))?,
            None => (0.0, 0.0),
        };
        Ok(Self {
            asset_id: asset_id.to_string(),
            asset_class,
            hazard_id,
            edr,
            replacement_cost_cents: cost_cents,
            rate,
            eal_cents: eal.round() as i64,
            ead_cents: ead.round() as i64,
            failed: matches!(edr, Some(e) if e >= FAILURE_EDR),
            indirectly_affected: false,
        })
    }
}

/// Return-period hazards are scenario-conditioned (λ = 1); only tornado and
/// hail carry empirical rates.
pub fn scenario_conditioned(h: HazardId) -> bool {
    !h.has_empirical_rate()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Failures {
    pub failed_substations: BTreeSet<String>,
    pub failed_lines: BTreeSet<String>,
    /// Endpoints of failed lines.
    pub indirect_substations: BTreeSet<String>,
    /// Affected set: failed substations ∪ endpoints of failed lines.
    pub affected: BTreeSet<String>,
}

/// Mark failed assets, flag substations connected to failed lines, and
/// return the affected substation set.
pub fn classify_failures(records: &mut [LossRecord], network: &Network) -> Result<Failures> {
    let mut f = Failures::default();
    for r in records.iter() {
        if r.failed {
            match r.asset_class {
                AssetClass::Substation => f.failed_substations.insert(r.asset_id.clone()),
                AssetClass::Line => f.failed_lines.insert(r.asset_id.clone()),
            };
        }
    }
    for id in &f.failed_lines {
        let line = network
            .line(id)
            .ok_or_else(|| Error::validation(format!("loss record for unknown line {id}")))?;
        f.indirect_substations.extend(line.endpoint_substation_ids.iter().cloned());
    }
    for r in records.iter_mut() {
        if r.asset_class == AssetClass::Substation {
            r.indirectly_affected = f.indirect_substations.contains(&r.asset_id);
        }
    }
    f.affected = f.failed_substations.union(&f.indirect_substations).cloned().collect();
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub hazard_id: HazardId,
    pub scenario_conditioned: bool,
    pub assessed_assets: usize,
    pub covered_assets: usize,
    pub total_eal_cents: i64,
    pub total_ead_cents: i64,
    pub failed_substations: usize,
    pub failed_lines: usize,
    pub indirectly_affected_substations: usize,
    pub affected_substations: usize,
}

pub fn summarize(hazard: HazardId, records: &[LossRecord], failures: &Failures) -> LossSummary {
    LossSummary {
        hazard_id: hazard,
        scenario_conditioned: scenario_conditioned(hazard),
        assessed_assets: records.len(),
        covered_assets: records.iter().filter(|r| r.edr.is_some()).count(),
        total_eal_cents: records.iter().map(|r| r.eal_cents).sum(),
        total_ead_cents: records.iter().map(|r| r.ead_cents).sum(),
        failed_substations: failures.failed_substations.len(),
        failed_lines: failures.failed_lines.len(),
        indirectly_affected_substations: failures.indirect_substations.len(),
        affected_substations: failures.affected.len(),
    }
}

const LOSS_HEADER: [&str; 11] = [
    "asset_id",
    "asset_class",
    "hazard_id",
    "edr",
    "replacement_cost_cents",
    "rate",
    "eal_cents",
    "ead_cents",
    "failed",
    "indirectly_affected",
    "scenario_conditioned",
];

pub fn write_loss_csv(path: &Path, records: &[LossRecord]) -> Result<()> {
    let mut out = CsvOut::new(LOSS_HEADER);
    for r in records {
        out.row([
            r.asset_id.clone(),
            r.asset_class.as_str().to_string(),
            r.hazard_id.to_string(),
            fmt_opt(r.edr),
            r.replacement_cost_cents.to_string(),
            fmt_f64(r.rate),
            r.eal_cents.to_string(),
            r.ead_cents.to_string(),
            r.failed.to_string(),
            r.indirectly_affected.to_string(),
            scenario_conditioned(r.hazard_id).to_string(),
        ]);
    }
    out.write(path)
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<LossRecord>> {
    #[derive(Deserialize)]
    struct Row {
        asset_id: String,
        asset_class: AssetClass,
        hazard_id: HazardId,
        edr: String,
        replacement_cost_cents: i64,
        rate: f64,
        eal_cents: i64,
        ead_cents: i64,
        failed: bool,
        indirectly_affected: bool,
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    rdr.deserialize::<Row>()
        .enumerate()
        .map(|(i, r)| {
            let ctx = |msg: String| Error::validation(format!("{}: record {}: {msg}", path.display(), i + 1));
            let r = r.map_err(|e| ctx(e.to_string()))?;
            Ok(LossRecord {
                asset_id: r.asset_id,
                asset_class: r.asset_class,
                hazard_id: r.hazard_id,
                edr: parse_opt(&r.edr).map_err(|e| ctx(e.to_string()))?,
                replacement_cost_cents: r.replacement_cost_cents,
                rate: r.rate,
                eal_cents: r.eal_cents,
                ead_cents: r.ead_cents,
                failed: r.failed,
                indirectly_affected: r.indirectly_affected,
            })
        })
        .collect()
}
