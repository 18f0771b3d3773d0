//! Lognormal fragility curves, expected damage ratios and the parameter
//! database.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hazard::HazardId;
use crate::util::{fmt_f64, CsvOut};

/// Standard normal CDF, Φ(z) = erfc(−z/√2)/2.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetClass {
    Substation,
    Line,
}

impl AssetClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssetClass::Substation => "substation",
            AssetClass::Line => "line",
        }
    }
}

impl FromStr for AssetClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "substation" => Ok(AssetClass::Substation),
            "line" => Ok(AssetClass::Line),
            _ => Err(Error::validation(format!("unknown asset class `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VoltageTier {
    /// ≤ 161 kV
    #[serde(rename = "LV")]
    Lv,
    /// 162–345 kV
    #[serde(rename = "MV")]
    Mv,
    /// > 345 kV
    #[serde(rename = "HV")]
    Hv,
}

impl VoltageTier {
    pub const ALL: [VoltageTier; 3] = [VoltageTier::Lv, VoltageTier::Mv, VoltageTier::Hv];

    pub fn from_kv(kv: u32) -> Self {
        match kv {
            0..=161 => VoltageTier::Lv,
            162..=345 => VoltageTier::Mv,
            _ => VoltageTier::Hv,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            VoltageTier::Lv => "LV",
            VoltageTier::Mv => "MV",
            VoltageTier::Hv => "HV",
        }
    }
}

impl fmt::Display for VoltageTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VoltageTier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LV" => Ok(VoltageTier::Lv),
            "MV" => Ok(VoltageTier::Mv),
            "HV" => Ok(VoltageTier::Hv),
            _ => Err(Error::validation(format!("unknown voltage tier `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DamageState {
    pub name: String,
    /// Median capacity in intensity-measure units.
    pub theta: f64,
    pub beta: f64,
    pub dr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FragilitySpec {
    pub hazard_id: HazardId,
    pub asset_class: AssetClass,
    pub voltage_tier: VoltageTier,
    pub states: Vec<DamageState>,
    /// Where the numbers come from, e.g. `literature_synthesis`.
    pub basis: String,
}

impl FragilitySpec {
    pub fn validate(&self) -> Result<()> {
        let ctx = |msg: &str| {
            Error::validation(format!(
                "fragility {}/{}/{}: {msg}",
                self.hazard_id,
                self.asset_class.as_str(),
                self.voltage_tier
            ))
        };
        if self.states.is_empty() {
            return Err(ctx("no damage states"));
        }
        for s in &self.states {
            if !(s.theta > 0.0 && s.theta.is_finite()) {
                return Err(ctx("theta must be positive"));
            }
            if !(s.beta > 0.0 && s.beta.is_finite()) {
                return Err(ctx("beta must be positive"));
            }
            if !(0.0..=1.0).contains(&s.dr) {
                return Err(ctx("damage ratio outside [0, 1]"));
            }
        }
        for w in self.states.windows(2) {
            if w[1].theta <= w[0].theta {
                return Err(ctx("theta must increase across states"));
            }
            if w[1].dr <= w[0].dr {
                return Err(ctx("damage ratio must increase across states"));
            }
            // Lognormal curves with different dispersions cross somewhere,
            // which would make a damage-state occupancy negative.
            if w[1].beta != w[0].beta {
                return Err(ctx("all states must share one beta"));
            }
        }
        Ok(())
    }

    pub fn max_dr(&self) -> f64 {
        self.states.last().map_or(0.0, |s| s.dr)
    }
}

fn check_intensity(h: f64) -> Result<()> {
    if h >= 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!("intensity must be finite and non-negative, got {h}")))
    }
}

/// P(DS ≥ dsᵢ | h) for every state.
pub fn exceedance(spec: &FragilitySpec, h: f64) -> Result<Vec<f64>> {
    check_intensity(h)?;
    Ok(spec
        .states
        .iter()
        .map(|s| if h == 0.0 { 0.0 } else { std_normal_cdf((h / s.theta).ln() / s.beta) })
        .collect())
}

/// Σ drᵢ(Pᵢ − Pᵢ₊₁), evaluated in the telescoped form Σ (drᵢ − drᵢ₋₁)·Pᵢ so
/// that each term is non-negative.
pub fn edr_from_exceedance(probs: &[f64], drs: &[f64]) -> f64 {
    let mut prev = 0.0;
    let mut edr = 0.0;
    for (p, dr) in probs.iter().zip(drs) {
        edr += (dr - prev) * p;
        prev = *dr;
    }
    edr
}

pub fn edr_multistate(spec: &FragilitySpec, h: f64) -> Result<f64> {
    let probs = exceedance(spec, h)?;
    let drs: Vec<f64> = spec.states.iter().map(|s| s.dr).collect();
    Ok(edr_from_exceedance(&probs, &drs))
}

pub fn edr_single_state(spec: &FragilitySpec, h: f64) -> Result<f64> {
    if spec.states.len() != 1 {
        return Err(Error::validation(format!(
            "single-state fragility for {} has {} states",
            spec.hazard_id,
            spec.states.len()
        )));
    }
    Ok(spec.states[0].dr * exceedance(spec, h)?[0])
}

pub const SPIA_DR: [f64; 6] = [0.0, 0.05, 0.15, 0.40, 0.70, 1.00];

pub fn edr_spia(tier: f64) -> Result<f64> {
    if tier.fract() == 0.0 && (0.0..=5.0).contains(&tier) {
        Ok(SPIA_DR[tier as usize])
    } else {
        Err(Error::validation(format!("SPIA tier must be an integer in 0..=5, got {tier}")))
    }
}

/// Published transformer failure probability, used directly as the damage
/// ratio toward the binary failure state.
pub fn edr_geomag(p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::validation(format!("failure probability outside [0, 1]: {p}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DamageResult {
    pub asset_id: String,
    pub hazard_id: HazardId,
    /// Empty for hazards without damage-state curves.
    pub exceedance_probs: Vec<f64>,
    /// `None` when the asset is not covered by the layer.
    pub edr: Option<f64>,
}

/// Editable set of fragility curves keyed by hazard, asset class and tier.
#[derive(Debug, Clone, PartialEq)]
pub struct FragilityDb {
    specs: BTreeMap<(HazardId, AssetClass, VoltageTier), FragilitySpec>,
}

const HEADER: [&str; 8] = ["hazard", "asset_class", "voltage_tier", "state", "theta", "beta", "dr", "basis"];

#[derive(Deserialize)]
struct DbRow {
    hazard: HazardId,
    asset_class: AssetClass,
    voltage_tier: VoltageTier,
    state: String,
    theta: f64,
    beta: f64,
    dr: f64,
    basis: String,
}

impl FragilityDb {
    pub fn new(specs: Vec<FragilitySpec>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for s in specs {
            if matches!(s.hazard_id, HazardId::Fzg | HazardId::Geomag) {
                return Err(Error::validation(format!(
                    "{} does not use parametric fragility curves",
                    s.hazard_id
                )));
            }
            s.validate()?;
            let key = (s.hazard_id, s.asset_class, s.voltage_tier);
            if map.insert(key, s).is_some() {
                return Err(Error::validation(format!(
                    "duplicate fragility entry {}/{}/{}",
                    key.0,
                    key.1.as_str(),
                    key.2
                )));
            }
        }
        Ok(Self { specs: map })
    }

    pub fn get(&self, h: HazardId, class: AssetClass, tier: VoltageTier) -> Result<&FragilitySpec> {
        self.specs.get(&(h, class, tier)).ok_or_else(|| {
            Error::validation(format!("no fragility curve for {h}/{}/{tier}", class.as_str()))
        })
    }

    pub fn specs(&self) -> impl Iterator<Item = &FragilitySpec> {
        self.specs.values()
    }

    /// Every hazard with parametric curves must cover both asset classes and
    /// all three tiers.
    pub fn check_complete(&self) -> Result<()> {
        for h in HazardId::ALL {
            if matches!(h, HazardId::Fzg | HazardId::Geomag) {
                continue;
            }
            for class in [AssetClass::Substation, AssetClass::Line] {
                for tier in VoltageTier::ALL {
                    self.get(h, class, tier)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut grouped: BTreeMap<(HazardId, AssetClass, VoltageTier), FragilitySpec> = BTreeMap::new();
        for (i, row) in rdr.deserialize::<DbRow>().enumerate() {
            let r = row.map_err(|e| Error::validation(format!("{}: record {}: {e}", path.display(), i + 1)))?;
            let spec = grouped
                .entry((r.hazard, r.asset_class, r.voltage_tier))
                .or_insert_with(|| FragilitySpec {
                    hazard_id: r.hazard,
                    asset_class: r.asset_class,
                    voltage_tier: r.voltage_tier,
                    states: Vec::new(),
                    basis: r.basis.clone(),
                });
            spec.states.push(DamageState {
                name: r.state,
                theta: r.theta,
                beta: r.beta,
                dr: r.dr,
            });
        }
        Self::new(grouped.into_values().collect())
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = CsvOut::new(HEADER);
        for s in self.specs.values() {
            for st in &s.states {
                out.row([
                    s.hazard_id.as_str(),
                    s.asset_class.as_str(),
                    s.voltage_tier.as_str(),
                    &st.name,
                    &fmt_f64(st.theta),
                    &fmt_f64(st.beta),
                    &fmt_f64(st.dr),
                    &s.basis,
                ]);
            }
        }
        out.write(path)
    }

    /// Built-in parameters. HV substation curves are the published
    /// representative values; other tiers and line curves follow the stated
    /// per-tier and per-class adjustments where given and otherwise copy the
    /// HV values. The `basis` column records which is which.
    pub fn builtin() -> Self {
        const MULTI: [&str; 4] = ["slight", "moderate", "extensive", "complete"];
        const DRS: [f64; 4] = [0.05, 0.20, 0.50, 1.00];
        let multi: [(HazardId, [f64; 4], f64); 3] = [
            (HazardId::Earthquake, [0.11, 0.15, 0.20, 0.47], 0.50),
            (HazardId::Flood, [0.50, 1.00, 1.50, 3.00], 0.40),
            (HazardId::TcWind, [30.0, 42.0, 55.0, 67.0], 0.25),
        ];
        let mut specs = Vec::new();
        for (h, thetas, beta) in multi {
            for class in [AssetClass::Substation, AssetClass::Line] {
                for tier in VoltageTier::ALL {
                    let basis = if class == AssetClass::Substation && tier == VoltageTier::Hv {
                        "literature_synthesis"
                    } else {
                        "copied_from_hv_substation"
                    };
                    specs.push(FragilitySpec {
                        hazard_id: h,
                        asset_class: class,
                        voltage_tier: tier,
                        states: (0..4)
                            .map(|i| DamageState { name: MULTI[i].into(), theta: thetas[i], beta, dr: DRS[i] })
                            .collect(),
                        basis: basis.into(),
                    });
                }
            }
        }

        // (hazard, state, class, tier) -> (theta, beta, dr, basis)
        let single = |h: HazardId, class: AssetClass, tier: VoltageTier| -> (&'static str, f64, f64, f64, &'static str) {
            use AssetClass::*;
            use VoltageTier::*;
            match (h, class, tier) {
                (HazardId::Tornado, _, Lv) => ("complete", 60.0, 0.3, 1.0, "physical_reasoning"),
                (HazardId::Tornado, _, Mv) => ("complete", 65.0, 0.3, 1.0, "interpolated"),
                (HazardId::Tornado, _, Hv) => ("complete", 70.0, 0.3, 1.0, "physical_reasoning"),
                (HazardId::Wildfire, Substation, _) => ("moderate", 10000.0, 0.5, 0.30, "physical_reasoning"),
                (HazardId::Wildfire, Line, _) => ("moderate", 8000.0, 0.5, 0.20, "physical_reasoning"),
                (HazardId::Hail, _, Lv) => ("slight", 1.5, 0.4, 0.03, "physical_reasoning"),
                (HazardId::Hail, _, Mv) => ("slight", 2.0, 0.4, 0.04, "interpolated"),
                (HazardId::Hail, _, Hv) => ("slight", 2.5, 0.4, 0.05, "physical_reasoning"),
                (HazardId::Lightning, Substation, _) => ("moderate", 10.0, 0.5, 0.10, "physical_reasoning"),
                (HazardId::Lightning, Line, _) => ("moderate", 10.0, 0.5, 0.05, "physical_reasoning"),
                (HazardId::Landslide, Substation, _) => ("complete", 60.0, 0.5, 1.00, "physical_reasoning"),
                (HazardId::Landslide, Line, _) => ("complete", 50.0, 0.5, 0.80, "physical_reasoning"),
                _ => unreachable!(),
            }
        };
        for h in [HazardId::Tornado, HazardId::Wildfire, HazardId::Hail, HazardId::Lightning, HazardId::Landslide] {
            for class in [AssetClass::Substation, AssetClass::Line] {
                for tier in VoltageTier::ALL {
                    let (name, theta, beta, dr, basis) = single(h, class, tier);
                    specs.push(FragilitySpec {
                        hazard_id: h,
                        asset_class: class,
                        voltage_tier: tier,
                        states: vec![DamageState { name: name.into(), theta, beta, dr }],
                        basis: basis.into(),
                    });
                }
            }
        }
        Self::new(specs).expect("built-in fragility parameters are valid")
    }
}

/// Damage for one asset under one hazard. `intensity` is the sampled value
/// (substations) or the chosen line aggregate (lines).
pub fn assess(
    db: &FragilityDb,
    hazard: HazardId,
    class: AssetClass,
    tier: VoltageTier,
    asset_id: &str,
    intensity: Option<f64>,
) -> Result<DamageResult> {
    let mut out = DamageResult {
        asset_id: asset_id.to_string(),
        hazard_id: hazard,
        exceedance_probs: Vec::new(),
        edr: None,
    };
    let Some(h) = intensity else {
        return Ok(out);
    };
    let ctx = |e: Error| Error::validation(format!("asset {asset_id} ({hazard}): {e}"));
    out.edr = Some(match hazard {
        HazardId::Fzg => edr_spia(h).map_err(ctx)?,
        HazardId::Geomag => edr_geomag(h).map_err(ctx)?,
        _ => {
            let spec = db.get(hazard, class, tier)?;
            out.exceedance_probs = exceedance(spec, h).map_err(ctx)?;
            if spec.states.len() == 1 {
                edr_single_state(spec, h).map_err(ctx)?
            } else {
                edr_multistate(spec, h).map_err(ctx)?
            }
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Maclaurin series of Φ, accurate to ~1e-14 for |z| ≤ 3.
    fn phi_series(z: f64) -> f64 {
        let mut term = z;
        let mut sum = z;
        for n in 1..200 {
            term *= -z * z / (2.0 * n as f64);
            sum += term / (2 * n + 1) as f64;
        }
        0.5 + sum / (2.0 * std::f64::consts::PI).sqrt()
    }

    fn hv_sub(h: HazardId) -> FragilitySpec {
        FragilityDb::builtin().get(h, AssetClass::Substation, VoltageTier::Hv).unwrap().clone()
    }

    #[test]
    fn cdf_matches_series_and_table() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(1.0) - 0.8413447460685429).abs() < 1e-15);
        assert!((std_normal_cdf(-1.0) - (1.0 - std_normal_cdf(1.0))).abs() < 1e-15);
        for i in -300..=300 {
            let z = i as f64 / 100.0;
            assert!((std_normal_cdf(z) - phi_series(z)).abs() < 1e-12, "z={z}");
        }
        // far tail keeps relative precision
        assert!(std_normal_cdf(-30.0) > 0.0);
    }

    #[test]
    fn exceedance_examples() {
        let eq = hv_sub(HazardId::Earthquake);
        let p = exceedance(&eq, 0.47 * 0.5f64.exp()).unwrap();
        assert!((p[3] - 0.8413447460685429).abs() < 1e-12);
        assert_eq!(exceedance(&eq, 0.0).unwrap(), vec![0.0; 4]);
        assert!(exceedance(&eq, -1.0).is_err());
        assert!(exceedance(&eq, f64::NAN).is_err());
    }

    #[test]
    fn earthquake_edr_hand_value() {
        let eq = hv_sub(HazardId::Earthquake);
        let p = exceedance(&eq, 0.15).unwrap();
        for (got, want) in p.iter().zip([0.7324, 0.5000, 0.2825, 0.0112]) {
            assert!((got - want).abs() < 1e-4, "{got} vs {want}");
        }
        // 0.05(P1-P2) + 0.2(P2-P3) + 0.5(P3-P4) + 1.0·P4 with the rounded P's
        let edr = edr_multistate(&eq, 0.15).unwrap();
        assert!((edr - 0.2020).abs() < 5e-4, "{edr}");
        assert!(edr_multistate(&eq, 1e9).unwrap() > 0.999999);
        assert_eq!(edr_multistate(&eq, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn single_state_examples() {
        let t = hv_sub(HazardId::Tornado);
        assert!((edr_single_state(&t, 70.0).unwrap() - 0.5).abs() < 1e-15);
        let hail = hv_sub(HazardId::Hail);
        assert!((edr_single_state(&hail, 1e12).unwrap() - 0.05).abs() < 1e-12);
        let l = hv_sub(HazardId::Lightning);
        let v = edr_single_state(&l, 10.0 * 0.5f64.exp()).unwrap();
        assert!((v - 0.10 * 0.8413447460685429).abs() < 1e-12);
        assert!(edr_single_state(&hv_sub(HazardId::Flood), 1.0).is_err());
    }

    #[test]
    fn spia_and_geomag() {
        assert_eq!(edr_spia(0.0).unwrap(), 0.0);
        assert_eq!(edr_spia(4.0).unwrap(), 0.70);
        assert_eq!(edr_spia(5.0).unwrap(), 1.00);
        assert!(edr_spia(6.0).is_err());
        assert!(edr_spia(-1.0).is_err());
        assert!(edr_spia(2.5).is_err());
        for p in [0.0, 0.5, 1.0] {
            assert_eq!(edr_geomag(p).unwrap(), p);
        }
        assert!(edr_geomag(1.01).is_err());
    }

    #[test]
    fn builtin_database() {
        let db = FragilityDb::builtin();
        db.check_complete().unwrap();
        // every state of every curve is anchored at its median
        for s in db.specs() {
            let p = exceedance(s, s.states[0].theta).unwrap();
            assert!((p[0] - 0.5).abs() <= 1e-12);
            for (i, st) in s.states.iter().enumerate() {
                assert!((exceedance(s, st.theta).unwrap()[i] - 0.5).abs() <= 1e-12);
            }
        }
        let get = |h, c, t| db.get(h, c, t).unwrap().states[0].clone();
        assert_eq!(get(HazardId::Wildfire, AssetClass::Line, VoltageTier::Mv).theta, 8000.0);
        assert_eq!(get(HazardId::Landslide, AssetClass::Line, VoltageTier::Hv).dr, 0.80);
        assert_eq!(get(HazardId::Hail, AssetClass::Substation, VoltageTier::Lv).theta, 1.5);
        assert_eq!(get(HazardId::Lightning, AssetClass::Line, VoltageTier::Lv).dr, 0.05);
        assert_eq!(VoltageTier::from_kv(161), VoltageTier::Lv);
        assert_eq!(VoltageTier::from_kv(230), VoltageTier::Mv);
        assert_eq!(VoltageTier::from_kv(345), VoltageTier::Mv);
        assert_eq!(VoltageTier::from_kv(500), VoltageTier::Hv);
    }

    #[test]
    fn database_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let db = FragilityDb::builtin();
        db.write_csv(&p).unwrap();
        assert_eq!(FragilityDb::read_csv(&p).unwrap(), db);
        std::fs::write(&p, "hazard,asset_class,voltage_tier,state,theta,beta,dr,basis\nflood,line,HV,a,2,0.4,0.5,x\nflood,line,HV,b,1,0.4,0.9,x\n").unwrap();
        assert!(FragilityDb::read_csv(&p).is_err());
        std::fs::write(&p, "hazard,asset_class,voltage_tier,state,theta,beta,dr,basis\nflood,line,HV,a,1,0.4,0.5,x\nflood,line,HV,b,2,0.5,0.9,x\n").unwrap();
        assert!(FragilityDb::read_csv(&p).is_err());
    }

    #[test]
    fn assess_dispatch() {
        let db = FragilityDb::builtin();
        let r = assess(&db, HazardId::Fzg, AssetClass::Line, VoltageTier::Hv, "L", Some(4.0)).unwrap();
        assert_eq!(r.edr, Some(0.70));
        let r = assess(&db, HazardId::Flood, AssetClass::Substation, VoltageTier::Hv, "S", None).unwrap();
        assert_eq!(r.edr, None);
        let r = assess(&db, HazardId::Tornado, AssetClass::Substation, VoltageTier::Lv, "S", Some(60.0)).unwrap();
        assert!((r.edr.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn telescoping_single_terminal_ratio() {
        let probs = [0.9, 0.6, 0.3, 0.123456789];
        assert_eq!(edr_from_exceedance(&probs, &[0.0, 0.0, 0.0, 1.0]), 0.123456789);
    }

    fn arb_spec() -> impl Strategy<Value = FragilitySpec> {
        (1usize..=4, 0.01f64..10.0, 0.01f64..1.0, prop::collection::vec((0.05f64..2.0, 0.05f64..1.0), 4))
            .prop_map(|(n, theta0, beta, steps)| {
                let mut theta = theta0;
                let mut dr_acc = 0.0;
                let total: f64 = steps[..n].iter().map(|s| s.1).sum();
                let states = steps[..n]
                    .iter()
                    .enumerate()
                    .map(|(i, (dt, ddr))| {
                        if i > 0 {
                            theta *= 1.0 + dt;
                        }
                        dr_acc += ddr / total;
                        DamageState { name: format!("s{i}"), theta, beta, dr: dr_acc.min(1.0) }
                    })
                    .collect();
                FragilitySpec {
                    hazard_id: HazardId::Flood,
                    asset_class: AssetClass::Substation,
                    voltage_tier: VoltageTier::Hv,
                    states,
                    basis: "test".into(),
                }
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn edr_matches_direct_differencing(spec in arb_spec(), h in 0.0f64..100.0) {
            let probs = exceedance(&spec, h).unwrap();
            // occupancy of each state, then weight by its ratio
            let n = probs.len();
            let direct: f64 = (0..n)
                .map(|i| {
                    let next = if i + 1 < n { probs[i + 1] } else { 0.0 };
                    spec.states[i].dr * (probs[i] - next)
                })
                .sum();
            let edr = edr_multistate(&spec, h).unwrap();
            prop_assert!((edr - direct).abs() <= 1e-12);
        }

        #[test]
        fn edr_monotone_and_bounded(spec in arb_spec(), a in 0.0f64..100.0, b in 0.0f64..100.0) {
            prop_assume!(spec.validate().is_ok());
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (e_lo, e_hi) = (edr_multistate(&spec, lo).unwrap(), edr_multistate(&spec, hi).unwrap());
            prop_assert!(e_lo <= e_hi + 1e-15);
            prop_assert!((0.0..=spec.max_dr() + 1e-15).contains(&e_hi));
            let p = exceedance(&spec, hi).unwrap();
            prop_assert!(p.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
