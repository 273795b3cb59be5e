use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How operated positions are chosen within a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SelectionPolicy {
    /// Uniform without replacement.
    #[default]
    Random,
    /// Key positions first (in random order), then non-key ones.
    KeyFirst,
    /// Non-key positions first, then key ones.
    NonKeyFirst,
    /// `⌊count · p⌋` positions from the key set (capped at its size), the
    /// rest from the non-key set.
    FixedProportion { p: f64 },
}

impl SelectionPolicy {
    pub fn needs_keys(&self) -> bool {
        !matches!(self, SelectionPolicy::Random)
    }

    pub fn validate(&self) -> Result<()> {
        if let SelectionPolicy::FixedProportion { p } = *self {
            if !(0.05..=0.95).contains(&p) {
                return Err(Error::config(format!(
                    "fixed-proportion key fraction {p} outside [0.05, 0.95]"
                )));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            SelectionPolicy::Random => "random".into(),
            SelectionPolicy::KeyFirst => "kf".into(),
            SelectionPolicy::NonKeyFirst => "nkf".into(),
            SelectionPolicy::FixedProportion { p } => format!("fr{p}"),
        }
    }
}

/// Number of operated positions for a ratio: `max(1, ⌊ratio · len⌋)`.
///
/// A tiny epsilon absorbs representation error so that e.g. `0.3 · 10`
/// counts as 3.
pub fn operated_count(ratio: f64, len: usize) -> usize {
    floor_count(ratio, len).max(1).min(len)
}

/// `⌊ratio · len⌋` with the same epsilon as [`operated_count`].
pub fn floor_count(ratio: f64, len: usize) -> usize {
    ((ratio * len as f64) + 1e-9).floor().max(0.0) as usize
}

/// Picks `count` distinct positions in `[0, seq_len)`, returned ascending.
pub fn select_positions<R: Rng + ?Sized>(
    seq_len: usize,
    count: usize,
    policy: &SelectionPolicy,
    keys: Option<&[usize]>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if count == 0 || count > seq_len {
        return Err(Error::Contract(format!(
            "cannot select {count} of {seq_len} positions"
        )));
    }
    let mut picked = match policy {
        SelectionPolicy::Random => index::sample(rng, seq_len, count).into_vec(),
        _ => {
            let keys = keys.ok_or_else(|| {
                Error::config(format!(
                    "selection policy {} requires key annotations",
                    policy.label()
                ))
            })?;
            let mut is_key = vec![false; seq_len];
            for &k in keys {
                if k >= seq_len {
                    return Err(Error::Index {
                        what: "key position",
                        index: k,
                        size: seq_len,
                    });
                }
                is_key[k] = true;
            }
            let mut key_pos: Vec<usize> = (0..seq_len).filter(|&i| is_key[i]).collect();
            let mut other: Vec<usize> = (0..seq_len).filter(|&i| !is_key[i]).collect();
            key_pos.shuffle(rng);
            other.shuffle(rng);
            match *policy {
                SelectionPolicy::KeyFirst => key_pos.into_iter().chain(other).take(count).collect(),
                SelectionPolicy::NonKeyFirst => other.into_iter().chain(key_pos).take(count).collect(),
                SelectionPolicy::FixedProportion { p } => {
                    let from_keys = floor_count(p, count).min(key_pos.len());
                    let from_other = (count - from_keys).min(other.len());
                    // top up from the key set when non-keys run out
                    let top_up = count - from_keys - from_other;
                    key_pos[..from_keys + top_up]
                        .iter()
                        .chain(&other[..from_other])
                        .copied()
                        .collect()
                }
                SelectionPolicy::Random => unreachable!(),
            }
        }
    };
    picked.sort_unstable();
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn random_full_count_is_every_position() {
        let got = select_positions(10, 10, &SelectionPolicy::Random, None, &mut seeded(1)).unwrap();
        assert_eq!(got, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn key_first_takes_the_keys() {
        let got =
            select_positions(8, 2, &SelectionPolicy::KeyFirst, Some(&[6, 2]), &mut seeded(2)).unwrap();
        assert_eq!(got, vec![2, 6]);
    }

    #[test]
    fn non_key_first_avoids_keys() {
        for s in 0..20 {
            let got =
                select_positions(8, 5, &SelectionPolicy::NonKeyFirst, Some(&[0, 1, 2]), &mut seeded(s))
                    .unwrap();
            assert_eq!(got, vec![3, 4, 5, 6, 7]);
        }
    }

    #[test]
    fn fixed_proportion_quota() {
        let policy = SelectionPolicy::FixedProportion { p: 0.5 };
        for s in 0..20 {
            let got = select_positions(10, 4, &policy, Some(&[0, 1, 2]), &mut seeded(s)).unwrap();
            assert_eq!(got.len(), 4);
            assert_eq!(got.iter().filter(|&&i| i <= 2).count(), 2);
        }
    }

    #[test]
    fn key_policies_need_keys() {
        let err = select_positions(5, 1, &SelectionPolicy::KeyFirst, None, &mut seeded(0)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(SelectionPolicy::FixedProportion { p: 0.99 }.validate().is_err());
        assert!(SelectionPolicy::FixedProportion { p: 0.05 }.validate().is_ok());
    }

    #[test]
    fn counts_use_floor_with_minimum_one() {
        assert_eq!(operated_count(0.4, 5), 2);
        assert_eq!(operated_count(0.01, 5), 1);
        assert_eq!(operated_count(0.3, 10), 3);
        assert_eq!(floor_count(0.6, 10), 6);
        assert_eq!(floor_count(0.05, 10), 0);
    }
}
