use restorekit::degrade::DegradationRecipe;
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradeItem {
    /// Input file name (no directory).
    pub input: String,
    pub output: String,
    pub seed: u64,
    pub recipe: DegradationRecipe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradeManifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub items: Vec<DegradeItem>,
}

pub fn version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}
