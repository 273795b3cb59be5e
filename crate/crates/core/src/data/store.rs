use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    build_sequences, k_core_filter, leave_one_out_split, Catalog, DatasetSplit, Interaction,
};
use crate::error::{Error, Result};

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepareConfig {
    pub k_core: usize,
    pub max_len: usize,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            k_core: 5,
            max_len: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub raw_interactions: usize,
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub avg_length: f64,
    /// `1 − interactions / (users · items)`
    pub sparsity: f64,
    pub dropped_users: usize,
}

/// Canonical prepared dataset: catalog maps, split, drop log and stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub version: u32,
    pub config: PrepareConfig,
    pub stats: DatasetStats,
    pub catalog: Catalog,
    pub split: DatasetSplit,
}

impl DatasetFile {
    /// k-core filter, sequence construction and leave-one-out in one go.
    pub fn prepare(raw: &[Interaction], config: &PrepareConfig) -> Result<Self> {
        if config.k_core == 0 {
            return Err(Error::config("k_core must be at least 1"));
        }
        if config.max_len < 3 {
            return Err(Error::config("max_len must be at least 3"));
        }
        let core = k_core_filter(raw, config.k_core);
        if core.is_empty() {
            return Err(Error::config(format!(
                "the {}-core of {} interactions is empty",
                config.k_core,
                raw.len()
            )));
        }
        let catalog = Catalog::build(&core);
        let sequences = build_sequences(&core, &catalog, config.max_len);
        let split = leave_one_out_split(&sequences, catalog.num_items());
        let users = catalog.num_users();
        let items = catalog.num_items();
        let stats = DatasetStats {
            raw_interactions: raw.len(),
            users,
            items,
            interactions: core.len(),
            avg_length: core.len() as f64 / users as f64,
            sparsity: 1.0 - core.len() as f64 / (users as f64 * items as f64),
            dropped_users: split.dropped.len(),
        };
        Ok(Self {
            version: DATASET_FORMAT_VERSION,
            config: config.clone(),
            stats,
            catalog,
            split,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("dataset serialises");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Self = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: PathBuf::from(path),
            message: e.to_string(),
        })?;
        if file.version != DATASET_FORMAT_VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("unsupported dataset version {}", file.version),
            });
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparsity_and_average_length() {
        let mut raw = Vec::new();
        for u in 0..6 {
            for i in 0..5 {
                raw.push(Interaction {
                    user: format!("u{u}"),
                    item: format!("i{}", (u + i) % 6),
                    timestamp: i as u64,
                });
            }
        }
        let ds = DatasetFile::prepare(&raw, &PrepareConfig::default()).unwrap();
        assert_eq!(ds.stats.users, 6);
        assert_eq!(ds.stats.items, 6);
        assert_eq!(ds.stats.interactions, 30);
        assert!((ds.stats.sparsity - (1.0 - 30.0 / 36.0)).abs() < 1e-15);
        assert_eq!(ds.stats.avg_length, 5.0);
        let round: DatasetFile = serde_json::from_str(&ds.to_json()).unwrap();
        assert_eq!(round, ds);
    }

    #[test]
    fn empty_core_is_an_error() {
        let raw = vec![Interaction {
            user: "u".into(),
            item: "i".into(),
            timestamp: 0,
        }];
        assert!(DatasetFile::prepare(&raw, &PrepareConfig::default()).is_err());
    }
}
