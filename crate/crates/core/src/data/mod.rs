//! Interaction logs → k-core → chronological per-user sequences →
//! leave-one-out splits.

mod expand;
mod kcore;
mod load;
mod store;
pub mod synth;

use std::collections::HashMap;

use log::info;
use serde::{Deserialize, Serialize};

pub use expand::expand_training_set;
pub use kcore::{is_k_core, k_core_filter};
pub use load::{load_interactions, write_interactions_csv, InputFormat, LoadedInteractions};
pub use store::{DatasetFile, DatasetStats, PrepareConfig, DATASET_FORMAT_VERSION};

/// One raw `(user, item, timestamp)` record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub timestamp: u64,
}

/// Dense id assignment. Users map to `[0, |U|)`, items to `[1, |V|]`;
/// item id 0 is padding and `|V| + 1` the mask token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    /// Raw user keys indexed by dense user id.
    pub users: Vec<String>,
    /// Raw item keys; `items[i]` has dense id `i + 1`.
    pub items: Vec<String>,
}

pub const PADDING_ID: usize = 0;

impl Catalog {
    /// Assigns ids in order of first appearance.
    pub fn build(interactions: &[Interaction]) -> Self {
        let mut seen_u: HashMap<&str, ()> = HashMap::new();
        let mut seen_i: HashMap<&str, ()> = HashMap::new();
        let mut users = Vec::new();
        let mut items = Vec::new();
        for x in interactions {
            if seen_u.insert(&x.user, ()).is_none() {
                users.push(x.user.clone());
            }
            if seen_i.insert(&x.item, ()).is_none() {
                items.push(x.item.clone());
            }
        }
        Self { users, items }
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn mask_id(&self) -> usize {
        self.items.len() + 1
    }

    pub fn user_index(&self) -> HashMap<&str, usize> {
        self.users.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect()
    }

    pub fn item_index(&self) -> HashMap<&str, usize> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i + 1))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSequence {
    pub user: usize,
    pub items: Vec<usize>,
}

/// Per user, items sorted by `(timestamp, input order)` and truncated to the
/// most recent `max_len`. Users are returned in dense-id order.
pub fn build_sequences(
    interactions: &[Interaction],
    catalog: &Catalog,
    max_len: usize,
) -> Vec<UserSequence> {
    assert!(max_len >= 3, "max_len must be at least 3");
    let users = catalog.user_index();
    let items = catalog.item_index();
    let mut per_user: Vec<Vec<(u64, usize)>> = vec![Vec::new(); catalog.num_users()];
    for x in interactions {
        let u = users[x.user.as_str()];
        per_user[u].push((x.timestamp, items[x.item.as_str()]));
    }
    per_user
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(user, mut v)| {
            // stable: equal timestamps keep input order
            v.sort_by_key(|&(t, _)| t);
            let start = v.len().saturating_sub(max_len);
            UserSequence {
                user,
                items: v[start..].iter().map(|&(_, i)| i).collect(),
            }
        })
        .collect()
}

/// Evaluation view of one user after leave-one-out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSplit {
    pub user: usize,
    pub train: Vec<usize>,
    pub valid_target: usize,
    pub test_target: usize,
}

impl UserSplit {
    /// Everything except the test target.
    pub fn test_input(&self) -> Vec<usize> {
        let mut v = self.train.clone();
        v.push(self.valid_target);
        v
    }

    pub fn full_sequence(&self) -> Vec<usize> {
        let mut v = self.test_input();
        v.push(self.test_target);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropEntry {
    pub user: usize,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub num_items: usize,
    /// Evaluation users in dense-id order.
    pub users: Vec<UserSplit>,
    /// Training input sequences. Initially one per user; training-time
    /// expansion appends augmented copies.
    pub train: Vec<UserSequence>,
    pub dropped: Vec<DropEntry>,
}

impl DatasetSplit {
    pub fn mask_id(&self) -> usize {
        self.num_items + 1
    }
}

/// Last item → test target, second-to-last → validation target, rest →
/// training input. Sequences shorter than three are dropped and logged.
pub fn leave_one_out_split(sequences: &[UserSequence], num_items: usize) -> DatasetSplit {
    let mut users = Vec::with_capacity(sequences.len());
    let mut dropped = Vec::new();
    for s in sequences {
        let n = s.items.len();
        if n < 3 {
            dropped.push(DropEntry {
                user: s.user,
                length: n,
            });
            continue;
        }
        users.push(UserSplit {
            user: s.user,
            train: s.items[..n - 2].to_vec(),
            valid_target: s.items[n - 2],
            test_target: s.items[n - 1],
        });
    }
    if !dropped.is_empty() {
        info!("leave-one-out dropped {} short sequences", dropped.len());
    }
    let train = users
        .iter()
        .map(|u| UserSequence {
            user: u.user,
            items: u.train.clone(),
        })
        .collect();
    DatasetSplit {
        num_items,
        users,
        train,
        dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ix(user: &str, item: &str, t: u64) -> Interaction {
        Interaction {
            user: user.into(),
            item: item.into(),
            timestamp: t,
        }
    }

    #[test]
    fn catalog_reserves_padding_and_mask() {
        let xs = vec![ix("a", "x", 1), ix("b", "y", 2), ix("a", "y", 3)];
        let cat = Catalog::build(&xs);
        assert_eq!(cat.num_users(), 2);
        assert_eq!(cat.item_index()["x"], 1);
        assert_eq!(cat.item_index()["y"], 2);
        assert_eq!(cat.mask_id(), 3);
    }

    #[test]
    fn sequences_keep_most_recent_max_len() {
        let xs: Vec<_> = (0..60u64)
            .rev()
            .map(|t| ix("u", &format!("i{t}"), t))
            .collect();
        let cat = Catalog::build(&xs);
        let seqs = build_sequences(&xs, &cat, 50);
        assert_eq!(seqs[0].items.len(), 50);
        let idx = cat.item_index();
        assert_eq!(seqs[0].items[0], idx["i10"]);
        assert_eq!(*seqs[0].items.last().unwrap(), idx["i59"]);
    }

    #[test]
    fn short_sequences_follow_timestamp_order() {
        let xs = vec![
            ix("u", "c", 30),
            ix("u", "a", 10),
            ix("u", "e", 50),
            ix("u", "b", 20),
            ix("u", "d", 40),
        ];
        let cat = Catalog::build(&xs);
        let idx = cat.item_index();
        let seqs = build_sequences(&xs, &cat, 50);
        let want: Vec<_> = ["a", "b", "c", "d", "e"].iter().map(|k| idx[k]).collect();
        assert_eq!(seqs[0].items, want);
    }

    #[test]
    fn equal_timestamps_keep_input_order() {
        let xs = vec![ix("u", "late", 5), ix("u", "first", 5), ix("u", "early", 1)];
        let cat = Catalog::build(&xs);
        let idx = cat.item_index();
        let seqs = build_sequences(&xs, &cat, 50);
        assert_eq!(seqs[0].items, vec![idx["early"], idx["late"], idx["first"]]);
    }

    #[test]
    fn leave_one_out_cases() {
        let seqs = vec![
            UserSequence {
                user: 0,
                items: vec![1, 2, 3, 4, 5],
            },
            UserSequence {
                user: 1,
                items: vec![1, 2, 3],
            },
            UserSequence {
                user: 2,
                items: vec![4, 5],
            },
        ];
        let split = leave_one_out_split(&seqs, 5);
        assert_eq!(split.users[0].train, vec![1, 2, 3]);
        assert_eq!(split.users[0].valid_target, 4);
        assert_eq!(split.users[0].test_target, 5);
        assert_eq!(split.users[0].test_input(), vec![1, 2, 3, 4]);
        assert_eq!(split.users[1].train, vec![1]);
        assert_eq!((split.users[1].valid_target, split.users[1].test_target), (2, 3));
        assert_eq!(split.dropped, vec![DropEntry { user: 2, length: 2 }]);
        assert_eq!(split.train.len(), 2);
    }
}
