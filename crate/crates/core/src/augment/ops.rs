use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::index::ItemSimilarityIndex;
use super::select::{floor_count, operated_count, select_positions, SelectionPolicy};
use crate::error::{Error, Result};

/// Contiguous slice of length `max(1, ⌊ratio·n⌋)` at a random start.
pub fn crop<R: Rng + ?Sized>(seq: &[usize], ratio: f64, rng: &mut R) -> Vec<usize> {
    if seq.is_empty() {
        return Vec::new();
    }
    let len = operated_count(ratio, seq.len());
    let start = rng.gen_range(0..=seq.len() - len);
    seq[start..start + len].to_vec()
}

/// Shuffles one random contiguous window of length `max(1, ⌊ratio·n⌋)`.
pub fn reorder<R: Rng + ?Sized>(seq: &[usize], ratio: f64, rng: &mut R) -> Vec<usize> {
    let mut out = seq.to_vec();
    if seq.is_empty() {
        return out;
    }
    let len = operated_count(ratio, seq.len());
    let start = rng.gen_range(0..=seq.len() - len);
    out[start..start + len].shuffle(rng);
    out
}

/// Every contiguous window of length `window`. A window longer than the
/// sequence yields the whole sequence.
pub fn sliding_windows(seq: &[usize], window: usize) -> Vec<Vec<usize>> {
    if window == 0 || window >= seq.len() {
        if window > seq.len() {
            warn!("window {window} longer than sequence of {}; using whole sequence", seq.len());
        }
        return vec![seq.to_vec()];
    }
    seq.windows(window).map(<[usize]>::to_vec).collect()
}

/// One uniformly chosen window of length `window`.
pub fn sliding_window_sample<R: Rng + ?Sized>(seq: &[usize], window: usize, rng: &mut R) -> Vec<usize> {
    if window == 0 || window >= seq.len() {
        if window > seq.len() {
            warn!("window {window} longer than sequence of {}; using whole sequence", seq.len());
        }
        return seq.to_vec();
    }
    let start = rng.gen_range(0..=seq.len() - window);
    seq[start..start + window].to_vec()
}

/// Replaces the selected positions with `mask_id`.
pub fn mask<R: Rng + ?Sized>(
    seq: &[usize],
    ratio: f64,
    mask_id: usize,
    policy: &SelectionPolicy,
    keys: Option<&[usize]>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut out = seq.to_vec();
    if seq.is_empty() {
        return Ok(out);
    }
    for p in select_positions(seq.len(), operated_count(ratio, seq.len()), policy, keys, rng)? {
        out[p] = mask_id;
    }
    Ok(out)
}

fn check_items(seq: &[usize], index: &ItemSimilarityIndex<'_>) -> Result<()> {
    match seq.iter().find(|&&i| i == 0 || i > index.num_items()) {
        Some(&bad) => Err(Error::Index {
            what: "item id for similarity lookup",
            index: bad,
            size: index.num_items() + 1,
        }),
        None => Ok(()),
    }
}

/// Replaces each selected item with its most similar other item.
pub fn substitute<R: Rng + ?Sized>(
    seq: &[usize],
    ratio: f64,
    index: &ItemSimilarityIndex<'_>,
    policy: &SelectionPolicy,
    keys: Option<&[usize]>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut out = seq.to_vec();
    if seq.is_empty() {
        return Ok(out);
    }
    check_items(seq, index)?;
    for p in select_positions(seq.len(), operated_count(ratio, seq.len()), policy, keys, rng)? {
        out[p] = index.nearest(seq[p]);
    }
    Ok(out)
}

/// Inserts the most similar item right after each selected position, then
/// keeps the most recent `max_len` items.
pub fn insert<R: Rng + ?Sized>(
    seq: &[usize],
    ratio: f64,
    index: &ItemSimilarityIndex<'_>,
    policy: &SelectionPolicy,
    keys: Option<&[usize]>,
    max_len: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if seq.is_empty() {
        return Ok(Vec::new());
    }
    check_items(seq, index)?;
    let picked = select_positions(seq.len(), operated_count(ratio, seq.len()), policy, keys, rng)?;
    let mut out = Vec::with_capacity(seq.len() + picked.len());
    let mut next = picked.iter().peekable();
    for (i, &item) in seq.iter().enumerate() {
        out.push(item);
        if next.peek() == Some(&&i) {
            next.next();
            out.push(index.nearest(item));
        }
    }
    let excess = out.len().saturating_sub(max_len);
    out.drain(..excess);
    Ok(out)
}

/// Deletes `⌊σ·L⌋` random positions, keeping at least one item.
pub fn tmask_r<R: Rng + ?Sized>(seq: &[usize], sigma: f64, rng: &mut R) -> Vec<usize> {
    if seq.is_empty() {
        return Vec::new();
    }
    let remove = floor_count(sigma, seq.len()).min(seq.len() - 1);
    if remove == 0 {
        return seq.to_vec();
    }
    let mut drop = rand::seq::index::sample(rng, seq.len(), remove).into_vec();
    drop.sort_unstable();
    let mut d = drop.iter().peekable();
    seq.iter()
        .enumerate()
        .filter(|(i, _)| {
            if d.peek() == Some(&i) {
                d.next();
                false
            } else {
                true
            }
        })
        .map(|(_, &x)| x)
        .collect()
}

/// Member operator chosen by a combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComboMember {
    Crop,
    Mask,
    Reorder,
    Substitute,
    Insert,
}

pub const CMR_POOL: [ComboMember; 3] = [ComboMember::Crop, ComboMember::Mask, ComboMember::Reorder];
pub const CMRSI_POOL: [ComboMember; 5] = [
    ComboMember::Crop,
    ComboMember::Mask,
    ComboMember::Reorder,
    ComboMember::Substitute,
    ComboMember::Insert,
];

/// Applies one uniformly chosen member of `pool` with random selection.
/// `index` is required when the pool contains Substitute or Insert.
pub fn combo<R: Rng + ?Sized>(
    seq: &[usize],
    pool: &[ComboMember],
    ratio: f64,
    mask_id: usize,
    index: Option<&ItemSimilarityIndex<'_>>,
    max_len: usize,
    rng: &mut R,
) -> Result<(ComboMember, Vec<usize>)> {
    let member = *pool
        .choose(rng)
        .ok_or_else(|| Error::config("empty combination pool"))?;
    let need_index = || index.ok_or_else(|| Error::config("combination needs a similarity index"));
    let random = SelectionPolicy::Random;
    let out = match member {
        ComboMember::Crop => crop(seq, ratio, rng),
        ComboMember::Reorder => reorder(seq, ratio, rng),
        ComboMember::Mask => mask(seq, ratio, mask_id, &random, None, rng)?,
        ComboMember::Substitute => substitute(seq, ratio, need_index()?, &random, None, rng)?,
        ComboMember::Insert => insert(seq, ratio, need_index()?, &random, None, max_len, rng)?,
    };
    Ok((member, out))
}
