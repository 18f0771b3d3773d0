//! Hazard intensity layers and per-asset exposure sampling.

mod events;
mod layer;
mod points;
mod polygons;
mod raster;
mod stats;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use events::{
    ef_to_wind_mps, rasterize_hail, tornado_intersect, HailEvent, HailSurfaces, TornadoExposure,
    TornadoTrack, HAIL_CELL_M, HAIL_MIN_DIAMETER_IN, HAIL_RECORD_YEARS, TORNADO_RECORD_YEARS,
};
pub use layer::{
    read_line_aggregates, sample_layer, write_line_aggregates, HazardExposures, HazardLayer, LayerData,
    LayerEntry, LayerManifest,
};
pub use points::{sample_nearest, PointGrid};
pub(crate) use polygons::id_cmp;
pub use polygons::{join_polygon, PolygonRecord, PolygonTable};
pub use raster::{sample_raster, Raster};
pub use stats::{aggregate_line, hotspots, quantile_linear, Hotspots, LineAggregate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HazardId {
    Earthquake,
    Flood,
    Landslide,
    Wildfire,
    TcWind,
    Hail,
    Tornado,
    Lightning,
    Geomag,
    Fzg,
}

impl HazardId {
    pub const ALL: [HazardId; 10] = [
        HazardId::Earthquake,
        HazardId::Flood,
        HazardId::Landslide,
        HazardId::Wildfire,
        HazardId::TcWind,
        HazardId::Hail,
        HazardId::Tornado,
        HazardId::Lightning,
        HazardId::Geomag,
        HazardId::Fzg,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            HazardId::Earthquake => "earthquake",
            HazardId::Flood => "flood",
            HazardId::Landslide => "landslide",
            HazardId::Wildfire => "wildfire",
            HazardId::TcWind => "tc_wind",
            HazardId::Hail => "hail",
            HazardId::Tornado => "tornado",
            HazardId::Lightning => "lightning",
            HazardId::Geomag => "geomag",
            HazardId::Fzg => "fzg",
        }
    }

    /// Hazards with an empirical per-asset occurrence rate; every other
    /// hazard is a single return-period scenario with unit rate.
    pub fn has_empirical_rate(&self) -> bool {
        matches!(self, HazardId::Tornado | HazardId::Hail)
    }

    /// Hazards whose hotspots are defined categorically (catastrophic tier).
    pub fn is_categorical(&self) -> bool {
        matches!(self, HazardId::Fzg)
    }
}

impl fmt::Display for HazardId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HazardId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HazardId::ALL
            .into_iter()
            .find(|h| h.as_str() == s.trim())
            .ok_or_else(|| Error::validation(format!("unknown hazard id `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    RasterGrid,
    PointGrid,
    EventSet,
    PolygonTable,
    /// Per-asset values consumed directly from an upstream model.
    AssetTable,
}

pub const KNOTS_TO_MPS: f64 = 0.514444;

pub fn knots_to_mps(v_kn: f64) -> Result<f64> {
    if !(v_kn >= 0.0) || !v_kn.is_finite() {
        return Err(Error::validation(format!(
            "wind speed must be a non-negative number of knots, got {v_kn}"
        )));
    }
    Ok(v_kn * KNOTS_TO_MPS)
}

/// Equal-weight mean of the neighborhood-count and warning-level bands.
pub fn landslide_score(n10: Option<f64>, lw: Option<f64>) -> Option<f64> {
    Some((n10? + lw?) / 2.0)
}

/// Continuous wildfire potential, masked where the class band marks
/// non-burnable (6) or water (7).
pub fn wildfire_mask(whp_cls: i64, whp_cnt: f64) -> Result<Option<f64>> {
    match whp_cls {
        1..=5 => Ok(Some(whp_cnt)),
        6 | 7 => Ok(None),
        other => Err(Error::validation(format!(
            "wildfire class must be in 1..=7, got {other}"
        ))),
    }
}

pub const DAYS_PER_MONTH: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

/// Monthly flash densities (per km² per day) to an annual density.
pub fn lightning_annualize(monthly_rates: &[f64; 12]) -> Result<f64> {
    if let Some(r) = monthly_rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(Error::validation(format!(
            "monthly flash rate must be non-negative, got {r}"
        )));
    }
    Ok(monthly_rates
        .iter()
        .zip(DAYS_PER_MONTH)
        .map(|(r, d)| r * d as f64)
        .sum())
}

/// Intensity of one hazard at one asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetExposure {
    pub asset_id: String,
    pub hazard_id: HazardId,
    /// `None` when the layer does not cover the asset.
    pub intensity: Option<f64>,
    pub occurrence_rate_per_year: f64,
    pub samples_aggregated: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hazard_ids_round_trip() {
        for h in HazardId::ALL {
            assert_eq!(h.as_str().parse::<HazardId>().unwrap(), h);
            assert_eq!(
                serde_json::to_string(&h).unwrap(),
                format!("\"{}\"", h.as_str())
            );
        }
        assert!("volcano".parse::<HazardId>().is_err());
    }

    #[test]
    fn landslide_examples() {
        assert_eq!(landslide_score(Some(40.0), Some(2.0)), Some(21.0));
        assert_eq!(landslide_score(Some(0.0), Some(0.0)), Some(0.0));
        assert_eq!(landslide_score(Some(81.0), Some(81.0)), Some(81.0));
        assert_eq!(landslide_score(None, Some(3.0)), None);
        assert_eq!(landslide_score(Some(3.0), None), None);
    }

    #[test]
    fn wildfire_examples() {
        assert_eq!(wildfire_mask(3, 12000.0).unwrap(), Some(12000.0));
        assert_eq!(wildfire_mask(6, 12000.0).unwrap(), None);
        assert_eq!(wildfire_mask(7, 500.0).unwrap(), None);
        assert!(wildfire_mask(0, 1.0).is_err());
        assert!(wildfire_mask(8, 1.0).is_err());
    }

    #[test]
    fn knots_examples() {
        assert_eq!(knots_to_mps(0.0).unwrap(), 0.0);
        assert!((knots_to_mps(100.0).unwrap() - 51.4444).abs() < 1e-12);
        // inverse conversion: 100 m/s is 194.384 kn
        assert!((knots_to_mps(194.384).unwrap() - 100.0).abs() < 1e-3);
        assert!(knots_to_mps(-1.0).is_err());
        assert!(knots_to_mps(f64::NAN).is_err());
    }

    #[test]
    fn lightning_examples() {
        assert_eq!(lightning_annualize(&[0.0; 12]).unwrap(), 0.0);
        assert!((lightning_annualize(&[0.01; 12]).unwrap() - 3.65).abs() < 1e-12);
        let mut jan = [0.0; 12];
        jan[0] = 1.0;
        assert_eq!(lightning_annualize(&jan).unwrap(), 31.0);
        let mut neg = [0.0; 12];
        neg[5] = -0.1;
        assert!(lightning_annualize(&neg).is_err());
    }

    proptest::proptest! {
        #[test]
        fn conversions_are_linear(x in 0.0f64..500.0, a in 0.0f64..10.0, rates in proptest::array::uniform12(0.0f64..1.0)) {
            let lhs = knots_to_mps(a * x).unwrap();
            let rhs = a * knots_to_mps(x).unwrap();
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
            let scaled: [f64; 12] = rates.map(|r| r * a);
            let lhs = lightning_annualize(&scaled).unwrap();
            let rhs = a * lightning_annualize(&rates).unwrap();
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }
}
