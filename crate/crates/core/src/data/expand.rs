use super::{DatasetSplit, UserSequence};
use crate::augment::{apply_id_level, ops, AugmentContext, AugmentationSpec, ItemSimilarityIndex};
use crate::error::{Error, Result};
use crate::rng::variant_stream;

/// Training-time augmentation: appends augmented copies of every training
/// input. Sliding windows add every window; other operators add one
/// variant per sequence. Validation and test targets are untouched.
pub fn expand_training_set(
    split: &DatasetSplit,
    spec: &AugmentationSpec,
    seed: u64,
    max_len: usize,
    index: Option<&ItemSimilarityIndex<'_>>,
) -> Result<DatasetSplit> {
    spec.validate()?;
    if spec.is_representation_level() {
        return Err(Error::config(format!(
            "{} acts on representations and cannot expand a training set",
            spec.name()
        )));
    }
    if spec.selection().needs_keys() {
        return Err(Error::config("training-time expansion supports random selection only"));
    }
    if spec.uses_similarity_index() && index.is_none() {
        return Err(Error::config(format!("{} needs an item similarity index", spec.name())));
    }
    let ctx = AugmentContext {
        mask_id: split.mask_id(),
        max_len,
        index,
        keys: None,
    };
    let mut out = split.clone();
    for s in &split.train {
        let added: Vec<Vec<usize>> = match spec {
            AugmentationSpec::SlidingWindow { window } => {
                if *window >= s.items.len() {
                    Vec::new()
                } else {
                    ops::sliding_windows(&s.items, *window)
                }
            }
            _ if s.items.is_empty() => Vec::new(),
            _ => {
                // a variant index no TTA run uses
                let mut rng = variant_stream(seed, s.user, usize::MAX);
                vec![apply_id_level(spec, &s.items, &ctx, &mut rng)?]
            }
        };
        out.train.extend(added.into_iter().map(|items| UserSequence { user: s.user, items }));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::NoiseStage;
    use crate::data::UserSplit;

    fn split(train: Vec<Vec<usize>>) -> DatasetSplit {
        let users: Vec<UserSplit> = train
            .iter()
            .enumerate()
            .map(|(u, t)| UserSplit {
                user: u,
                train: t.clone(),
                valid_target: 1,
                test_target: 2,
            })
            .collect();
        DatasetSplit {
            num_items: 20,
            train: users
                .iter()
                .map(|u| UserSequence {
                    user: u.user,
                    items: u.train.clone(),
                })
                .collect(),
            users,
            dropped: Vec::new(),
        }
    }

    #[test]
    fn windows_are_added() {
        let s = split(vec![vec![1, 2, 3, 4, 5]]);
        let out = expand_training_set(&s, &AugmentationSpec::SlidingWindow { window: 3 }, 0, 50, None).unwrap();
        assert_eq!(out.train.len(), 4);
        assert_eq!(out.train[3].items, vec![3, 4, 5]);
        assert_eq!(out.users, s.users);
    }

    #[test]
    fn representation_operators_are_rejected() {
        let s = split(vec![vec![1, 2, 3]]);
        let spec = AugmentationSpec::tnoise_from_pair(1.0, 0.5, NoiseStage::Embedding);
        assert!(matches!(expand_training_set(&s, &spec, 0, 50, None), Err(Error::Config(_))));
    }

    #[test]
    fn combination_expansion_is_seeded() {
        let s = split((0..10).map(|u| (1..=8).map(|i| (i + u) % 20 + 1).collect()).collect());
        let spec = AugmentationSpec::Cmr { ratio: 0.5 };
        let a = expand_training_set(&s, &spec, 3, 50, None).unwrap();
        assert_eq!(a.train.len(), 20);
        assert_eq!(a, expand_training_set(&s, &spec, 3, 50, None).unwrap());
    }
}
