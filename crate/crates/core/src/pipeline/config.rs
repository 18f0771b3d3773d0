use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hazard::HazardId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineAggregateChoice {
    Mean,
    #[default]
    Max,
    P95,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkPaths {
    pub lines: PathBuf,
    pub substations: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub towers: Option<PathBuf>,
    /// Lines below this snapped voltage are excluded; `null` keeps all.
    #[serde(default = "default_min_voltage")]
    pub min_line_voltage_kv: Option<u32>,
}

fn default_min_voltage() -> Option<u32> {
    Some(161)
}

/// Run configuration. Relative paths resolve against the directory that
/// holds the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkPaths,
    pub layers: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragility: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<PathBuf>,
    pub accounts: PathBuf,
    pub exposure: PathBuf,
    /// WKT polygon file clipping the service areas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<PathBuf>,
    /// Empty means every hazard in the layer manifest.
    #[serde(default)]
    pub hazards: Vec<HazardId>,
    #[serde(default)]
    pub line_aggregate: LineAggregateChoice,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = crate::util::read_json(path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Every configured input file, as (path as written, resolved path).
    pub fn input_files(&self) -> Vec<(String, PathBuf)> {
        let mut v: Vec<&PathBuf> = vec![&self.network.lines, &self.network.substations];
        v.extend(self.network.towers.iter());
        v.push(&self.layers);
        v.extend(self.fragility.iter());
        v.extend(self.costs.iter());
        v.push(&self.accounts);
        v.push(&self.exposure);
        v.extend(self.boundary.iter());
        v.into_iter()
            .map(|p| (p.to_string_lossy().replace('\\', "/"), self.resolve(p)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in self.input_files() {
            if !p.is_file() {
                return Err(Error::validation(format!("config: input `{name}` not found at {}", p.display())));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for h in &self.hazards {
            if !seen.insert(h) {
                return Err(Error::validation(format!("config: hazard {h} listed twice")));
            }
        }
        Ok(())
    }
}

/// Parse a comma-separated hazard list such as `flood,fzg`.
pub fn parse_hazard_list(s: &str) -> Result<Vec<HazardId>> {
    let v: Vec<HazardId> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(Error::validation("hazard list is empty"));
    }
    Ok(v)
}
