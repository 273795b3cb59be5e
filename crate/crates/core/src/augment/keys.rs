use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Catalog, DatasetSplit};
use crate::error::{Error, Result};

/// Key positions per user, indexed into the user's test input. Keys come
/// from outside (e.g. an annotation pipeline); the file is a json object
/// mapping raw user id to a list of positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct KeyAnnotation {
    pub positions: BTreeMap<String, Vec<usize>>,
}

impl KeyAnnotation {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("keys serialise");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Keys aligned with `split.users`, after checking that every position
    /// is inside the test input and at most half the input is key.
    /// Users without an entry get an empty key set.
    pub fn resolve(&self, split: &DatasetSplit, catalog: &Catalog) -> Result<Vec<Vec<usize>>> {
        let index = catalog.user_index();
        let mut by_user: BTreeMap<usize, &Vec<usize>> = BTreeMap::new();
        for (raw, pos) in &self.positions {
            let &u = index
                .get(raw.as_str())
                .ok_or_else(|| Error::config(format!("key annotation for unknown user {raw:?}")))?;
            by_user.insert(u, pos);
        }
        split
            .users
            .iter()
            .map(|u| {
                let len = u.train.len() + 1;
                let Some(pos) = by_user.get(&u.user) else {
                    return Ok(Vec::new());
                };
                let mut pos = (*pos).clone();
                pos.sort_unstable();
                pos.dedup();
                if let Some(&bad) = pos.iter().find(|&&p| p >= len) {
                    return Err(Error::Index {
                        what: "key position",
                        index: bad,
                        size: len,
                    });
                }
                if pos.len() > len / 2 {
                    return Err(Error::config(format!(
                        "user {:?} has {} keys for a sequence of {len}",
                        catalog.users[u.user],
                        pos.len()
                    )));
                }
                Ok(pos)
            })
            .collect()
    }
}
