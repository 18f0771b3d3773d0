use serde::Serialize;

use super::HazardId;

/// Quantile by linear interpolation between order statistics at rank
/// `(n-1)·p`. `sorted` must be ascending and non-empty.
pub fn quantile_linear(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let rank = (sorted.len() - 1) as f64 * p;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineAggregate {
    pub line_id: String,
    pub hazard_id: HazardId,
    pub samples: usize,
    pub mean_intensity: Option<f64>,
    pub max_intensity: Option<f64>,
    pub p95_intensity: Option<f64>,
}

/// Mean, maximum and 95th percentile of the non-null node samples of a line.
pub fn aggregate_line(line_id: &str, hazard_id: HazardId, samples: &[Option<f64>]) -> LineAggregate {
    let mut vals: Vec<f64> = samples.iter().flatten().copied().collect();
    vals.sort_by(f64::total_cmp);
    let (mean, max, p95) = if vals.is_empty() {
        (None, None, None)
    } else {
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        // Floating-point summation can nudge the mean past the extremes of a
        // near-constant sample.
        let mean = mean.clamp(vals[0], *vals.last().unwrap());
        let p95 = quantile_linear(&vals, 0.95);
        (Some(mean), Some(*vals.last().unwrap()), Some(p95))
    };
    LineAggregate {
        line_id: line_id.to_string(),
        hazard_id,
        samples: vals.len(),
        mean_intensity: mean,
        max_intensity: max,
        p95_intensity: p95,
    }
}

pub const MIN_HOTSPOT_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Hotspots {
    Defined { threshold: Option<f64>, asset_ids: Vec<String> },
    /// Too few covered assets for a percentile threshold.
    Undefined { samples: usize },
}

/// Assets above the 95th percentile of covered intensities; for the
/// categorical freezing-rain hazard, assets at the catastrophic tier (5).
pub fn hotspots(hazard: HazardId, exposures: &[(String, Option<f64>)]) -> Hotspots {
    if hazard.is_categorical() {
        let ids = exposures
            .iter()
            .filter(|(_, v)| matches!(v, Some(t) if *t >= 5.0))
            .map(|(id, _)| id.clone())
            .collect();
        return Hotspots::Defined {
            threshold: None,
            asset_ids: ids,
        };
    }
    let mut vals: Vec<f64> = exposures.iter().filter_map(|(_, v)| *v).collect();
    if vals.len() < MIN_HOTSPOT_SAMPLES {
        return Hotspots::Undefined { samples: vals.len() };
    }
    vals.sort_by(f64::total_cmp);
    let thr = quantile_linear(&vals, 0.95);
    let ids = exposures
        .iter()
        .filter(|(_, v)| matches!(v, Some(x) if *x > thr))
        .map(|(id, _)| id.clone())
        .collect();
    Hotspots::Defined {
        threshold: Some(thr),
        asset_ids: ids,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent quantile: walk the piecewise-linear curve through the
    /// points `(i/(n-1), x_(i))` and interpolate at `p`.
    fn oracle_quantile(vals: &[f64], p: f64) -> f64 {
        let mut v = vals.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 1 {
            return v[0];
        }
        for i in 0..n - 1 {
            let (a, b) = (i as f64 / (n - 1) as f64, (i + 1) as f64 / (n - 1) as f64);
            if p >= a && p <= b {
                return v[i] + (p - a) / (b - a) * (v[i + 1] - v[i]);
            }
        }
        v[n - 1]
    }

    #[test]
    fn quantile_oracle_value() {
        let vals: Vec<f64> = (1..=100).map(f64::from).collect();
        let want = oracle_quantile(&vals, 0.95);
        assert!((want - 95.05).abs() < 1e-9);
        assert!((quantile_linear(&vals, 0.95) - 95.05).abs() < 1e-12);
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate_line("L", HazardId::Flood, &[Some(2.0)]);
        assert_eq!((a.mean_intensity, a.max_intensity, a.p95_intensity), (Some(2.0), Some(2.0), Some(2.0)));
        let s: Vec<Option<f64>> = (1..=100).map(|i| Some(i as f64)).collect();
        let a = aggregate_line("L", HazardId::Flood, &s);
        assert_eq!(a.mean_intensity, Some(50.5));
        assert_eq!(a.max_intensity, Some(100.0));
        assert!((a.p95_intensity.unwrap() - 95.05).abs() < 1e-12);
        let a = aggregate_line("L", HazardId::Flood, &[None, None]);
        assert_eq!(a.samples, 0);
        assert_eq!((a.mean_intensity, a.max_intensity, a.p95_intensity), (None, None, None));
    }

    #[test]
    fn skewed_sample_p95_below_mean() {
        let mut s = vec![Some(0.0); 20];
        s.push(Some(1000.0));
        let a = aggregate_line("L", HazardId::Flood, &s);
        assert_eq!(a.p95_intensity, Some(0.0));
        assert!(a.mean_intensity.unwrap() > 47.0);
    }

    #[test]
    fn hotspot_examples() {
        let ex: Vec<(String, Option<f64>)> = (1..=100).map(|i| (format!("a{i}"), Some(i as f64))).collect();
        let Hotspots::Defined { threshold, asset_ids } = hotspots(HazardId::Earthquake, &ex) else {
            panic!()
        };
        assert!((threshold.unwrap() - 95.05).abs() < 1e-12);
        assert_eq!(asset_ids, vec!["a96", "a97", "a98", "a99", "a100"]);

        let flat: Vec<(String, Option<f64>)> = (0..30).map(|i| (format!("a{i}"), Some(3.0))).collect();
        assert_eq!(
            hotspots(HazardId::Flood, &flat),
            Hotspots::Defined { threshold: Some(3.0), asset_ids: vec![] }
        );

        let few: Vec<(String, Option<f64>)> = (0..19).map(|i| (format!("a{i}"), Some(i as f64))).collect();
        assert_eq!(hotspots(HazardId::Flood, &few), Hotspots::Undefined { samples: 19 });

        let fzg: Vec<(String, Option<f64>)> =
            vec![("a".into(), Some(5.0)), ("b".into(), Some(5.0)), ("c".into(), Some(4.0)), ("d".into(), None)];
        assert_eq!(
            hotspots(HazardId::Fzg, &fzg),
            Hotspots::Defined { threshold: None, asset_ids: vec!["a".into(), "b".into()] }
        );
    }

    proptest! {
        #[test]
        fn aggregate_bounds(samples in prop::collection::vec(prop::option::of(-1e6f64..1e6), 0..80)) {
            let a = aggregate_line("L", HazardId::Flood, &samples);
            let vals: Vec<f64> = samples.iter().flatten().copied().collect();
            if vals.is_empty() {
                prop_assert!(a.mean_intensity.is_none());
            } else {
                let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let (mean, p95, max) = (a.mean_intensity.unwrap(), a.p95_intensity.unwrap(), a.max_intensity.unwrap());
                // mean <= p95 does not hold for heavily skewed samples, e.g. {0 x20, 1000}
                prop_assert!(min <= mean && mean <= max);
                prop_assert!(min <= p95 && p95 <= max);
                prop_assert!((p95 - oracle_quantile(&vals, 0.95)).abs() <= 1e-9 * max.abs().max(1.0));
            }
        }
    }
}
