//! Run configuration, read from TOML or JSON.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use rvs_core::geo::BoundingBox;
use rvs_core::mapgraph::BuildOptions;
use rvs_core::osm::IngestConfig;
use rvs_core::par::Workers;
use rvs_core::quantize::QuantizeConfig;
use rvs_core::embedding::TrainConfig;
use rvs_core::taskio::{City, PathConfig};
use rvs_core::worldgraph::{WalkConfig, WorldGraphConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds walks, embedding training, quantization and sampling.
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub city: City,
    pub artifacts_dir: PathBuf,
    pub osm: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    /// Study areas per city; cities without an entry use a built-in box.
    pub regions: BTreeMap<City, BoundingBox>,
    pub ingest: IngestConfig,
    pub graph: GraphSection,
    pub world: WorldGraphConfig,
    pub walks: WalksSection,
    pub embedding: TrainConfig,
    pub quantize: QuantizeConfig,
    pub paths: PathConfig,
    pub baselines: BaselineSection,
    pub sampling: SamplingSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 0,
            city: City::Manhattan,
            artifacts_dir: PathBuf::from("artifacts"),
            osm: None,
            dataset: None,
            regions: BTreeMap::new(),
            ingest: IngestConfig::default(),
            graph: GraphSection::default(),
            world: WorldGraphConfig::default(),
            walks: WalksSection::default(),
            embedding: TrainConfig::default(),
            quantize: QuantizeConfig::default(),
            paths: PathConfig::default(),
            baselines: BaselineSection::default(),
            sampling: SamplingSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub max_projections: usize,
    pub max_projection_m: f64,
    pub merge_tolerance_m: f64,
}

impl Default for GraphSection {
    fn default() -> Self {
        let b = BuildOptions::default();
        Self {
            max_projections: b.max_projections,
            max_projection_m: b.max_projection_m,
            merge_tolerance_m: b.merge_tolerance_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalksSection {
    pub walks_per_node: usize,
    pub walk_length: usize,
}

impl Default for WalksSection {
    fn default() -> Self {
        let w = WalkConfig::default();
        Self {
            walks_per_node: w.walks_per_node,
            walk_length: w.walk_length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub radius_m: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self { radius_m: 1000.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub max_path_m: f64,
    pub count: usize,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self {
            max_path_m: 2000.0,
            count: 1000,
        }
    }
}

impl RunConfig {
    /// Reads `path` as JSON when it ends in `.json`, TOML otherwise.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
                .map_err(invalid)?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
                .map_err(invalid)?
        };
        // relative paths in a config file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(cfg.rebased(base))
    }

    fn rebased(mut self, base: &Path) -> RunConfig {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.artifacts_dir);
        if let Some(p) = self.osm.as_mut() {
            fix(p);
        }
        if let Some(p) = self.dataset.as_mut() {
            fix(p);
        }
        self
    }

    pub fn region(&self, city: City) -> BoundingBox {
        self.regions.get(&city).copied().unwrap_or_else(|| city.default_region())
    }

    pub fn workers(&self) -> Workers {
        Workers(self.workers)
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            max_projections: self.graph.max_projections,
            max_projection_m: self.graph.max_projection_m,
            merge_tolerance_m: self.graph.merge_tolerance_m,
            workers: self.workers(),
        }
    }

    pub fn walk_config(&self) -> WalkConfig {
        WalkConfig {
            walks_per_node: self.walks.walks_per_node,
            walk_length: self.walks.walk_length,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.embedding
        }
    }

    pub fn quantize_config(&self) -> QuantizeConfig {
        QuantizeConfig {
            seed: self.seed,
            ..self.quantize
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.region(self.city).validate().map_err(|e| invalid(anyhow::anyhow!("region of {}: {e}", self.city)))?;
        if self.embedding.dim == 0 || self.quantize.k == 0 || self.quantize.layers == 0 {
            return Err(invalid(anyhow::anyhow!("embedding dim, k and layers must be positive")));
        }
        if self.walks.walk_length < 2 || self.walks.walks_per_node == 0 {
            return Err(invalid(anyhow::anyhow!("walks need a length of at least 2")));
        }
        Ok(())
    }
}

/// Marks an error as a validation failure for the exit code.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(e: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(Invalid(format!("{e:#}")))
}

/// `south,west,north,east` in degrees.
pub fn parse_region(s: &str) -> Result<BoundingBox> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("region {s:?} is not four numbers"))?;
    if v.len() != 4 {
        bail!("region {s:?} needs south,west,north,east");
    }
    Ok(BoundingBox::new(v[0], v[1], v[2], v[3])?)
}
