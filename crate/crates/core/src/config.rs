//! Run configuration, read from TOML. Every table and key is optional.
//!
//! ```toml
//! [tracker]
//! min_iou = 0.25          # IoU matching threshold
//! min_sim = 0.5           # cosine matching threshold
//!
//! [tracker.kalman]
//! min_iou = 0.25
//! max_misses = 2
//! process_noise = [0.1, 0.05, 0.5]     # position, size, velocity
//! measurement_noise = [0.1, 0.05]      # position, size
//! initial_velocity_var = 10.0
//!
//! [inference]
//! threshold = 0.3
//! mask_threshold = 0.5
//! mode = "split"          # or "unified"
//!
//! [labelgen]
//! margin = 0.0
//! max_distance = inf
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infer::InferenceParams;
use crate::labelgen::LabelParams;
use crate::track::TrackerParams;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub tracker: TrackerParams,
    pub inference: InferenceParams,
    pub labelgen: LabelParams,
}

impl Config {
    pub fn from_toml(text: &str, path: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(&p, e))?;
        Self::from_toml(&text, &p)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }
}
