//! Config file format. Every key is optional; flags given on the command
//! line win over the file, and the file wins over built-in defaults.
//!
//! ```toml
//! seed = 7
//! threads = 1
//!
//! [spectrum]
//! k = 50
//! shift = -0.01
//! mass = "consistent"      # or "lumped"
//!
//! [curate]                 # any CurationPolicy field
//! target_vertex_range = [1750, 2250]
//! dedupe_mode = "absolute"
//! rotations_per_mesh = 5
//!
//! [train]
//! optimizer = "adam"
//! loss = "rpd"
//! preset = "desk"
//! batch_size = 16
//! weight_decay = 1e-5
//! checkpoint_every = 50
//! schedule = [{ epochs = 500, lr = 1e-4 }, { epochs = 500, lr = 1e-5 }]
//! ```

use std::path::Path;

use lbnet_core::curation::CurationPolicy;
use lbnet_core::fem::MassKind;
use lbnet_core::nn::{LossKind, LrStage, OptimizerKind, WidthPreset};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub spectrum: SpectrumSection,
    pub curate: CurationPolicy,
    pub train: TrainSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub k: Option<usize>,
    pub shift: Option<f64>,
    pub mass: Option<MassKind>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub optimizer: Option<OptimizerKind>,
    pub loss: Option<LossKind>,
    pub preset: Option<WidthPreset>,
    pub batch_size: Option<usize>,
    pub weight_decay: Option<f64>,
    pub checkpoint_every: Option<usize>,
    pub schedule: Option<Vec<LrStage>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// `EPOCHS:LR[,EPOCHS:LR...]`.
pub fn parse_schedule(s: &str) -> Result<Vec<LrStage>, CliError> {
    s.split(',')
        .map(|part| {
            let (e, lr) = part
                .trim()
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("schedule stage '{part}' is not EPOCHS:LR")))?;
            let epochs = e.trim().parse().map_err(|_| CliError::Usage(format!("bad epoch count '{e}'")))?;
            let lr = lr.trim().parse().map_err(|_| CliError::Usage(format!("bad learning rate '{lr}'")))?;
            Ok(LrStage { epochs, lr })
        })
        .collect()
}
