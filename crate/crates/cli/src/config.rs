//! Optional TOML config. Every physical quantity carries its unit in the key.

use std::path::{Path, PathBuf};

use chemautomata::{AliquotRecipe, Error, Language, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub lang: Option<Language>,
    pub tau_s: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub max_len: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub recipe: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    #[serde(default)]
    pub tune: TuneSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSection {
    pub budget: Option<usize>,
    pub n_max: Option<usize>,
    #[serde(rename = "band_floor_Vs")]
    pub band_floor_vs: Option<f64>,
    pub frequency_weight: Option<f64>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Config = toml::from_str(&text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Configuration(format!(
                "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                path.display(),
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }
}

/// Recipe file: a schema version plus the aliquot table, e.g.
///
/// ```toml
/// schema_version = 1
/// id = "fa-strong"
/// [aliquots.a]
/// volume_dm3 = 0.01
/// amounts_mol = { "K+" = 2e-3, "IO3-" = 2e-3 }
/// ```
#[derive(Deserialize)]
struct RecipeFile {
    schema_version: u32,
    #[serde(flatten)]
    recipe: AliquotRecipe,
}

pub fn load_recipe(path: &Path) -> Result<AliquotRecipe> {
    let text = std::fs::read_to_string(path)?;
    let f: RecipeFile = toml::from_str(&text)?;
    if f.schema_version != SCHEMA_VERSION {
        return Err(Error::Configuration(format!(
            "{}: recipe schema_version {} is not supported",
            path.display(),
            f.schema_version
        )));
    }
    f.recipe.validate()?;
    Ok(f.recipe)
}
