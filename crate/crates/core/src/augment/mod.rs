//! Sequence augmentation operators.
//!
//! ID-level operators rewrite item-id sequences. Representation-level
//! operators (TNoise, TMask-B) become [`EncodeHooks`] that perturb the
//! embedded or encoded sequence inside the model.

mod index;
mod keys;
pub mod ops;
pub mod repr;
mod select;
mod spec;

pub use index::{IndexMode, ItemSimilarityIndex};
pub use keys::KeyAnnotation;
pub use ops::{ComboMember, CMRSI_POOL, CMR_POOL};
pub use select::{floor_count, operated_count, select_positions, SelectionPolicy};
pub use spec::{AugmentationSpec, NoiseStage};

use crate::error::{Error, Result};
use crate::model::EncodeHooks;
use crate::rng::StreamRng;

/// Per-call inputs shared by the ID-level operators.
#[derive(Clone, Copy)]
pub struct AugmentContext<'a> {
    pub mask_id: usize,
    pub max_len: usize,
    pub index: Option<&'a ItemSimilarityIndex<'a>>,
    /// Key positions of the sequence being augmented.
    pub keys: Option<&'a [usize]>,
}

impl<'a> AugmentContext<'a> {
    pub fn new(mask_id: usize, max_len: usize) -> Self {
        Self {
            mask_id,
            max_len,
            index: None,
            keys: None,
        }
    }

    fn index(&self) -> Result<&'a ItemSimilarityIndex<'a>> {
        self.index
            .ok_or_else(|| Error::config("operator needs an item similarity index"))
    }
}

/// Applies an ID-level operator once. Representation-level specs are
/// rejected; use [`representation_hooks`] for those.
pub fn apply_id_level(
    spec: &AugmentationSpec,
    seq: &[usize],
    ctx: &AugmentContext<'_>,
    rng: &mut StreamRng,
) -> Result<Vec<usize>> {
    use AugmentationSpec::*;
    Ok(match spec {
        Crop { ratio } => ops::crop(seq, *ratio, rng),
        Reorder { ratio } => ops::reorder(seq, *ratio, rng),
        SlidingWindow { window } => ops::sliding_window_sample(seq, *window, rng),
        Mask { ratio, selection } => ops::mask(seq, *ratio, ctx.mask_id, selection, ctx.keys, rng)?,
        Substitute {
            ratio, selection, ..
        } => ops::substitute(seq, *ratio, ctx.index()?, selection, ctx.keys, rng)?,
        Insert {
            ratio, selection, ..
        } => ops::insert(seq, *ratio, ctx.index()?, selection, ctx.keys, ctx.max_len, rng)?,
        Cmr { ratio } => ops::combo(seq, &CMR_POOL, *ratio, ctx.mask_id, None, ctx.max_len, rng)?.1,
        Cmrsi { ratio, .. } => {
            ops::combo(seq, &CMRSI_POOL, *ratio, ctx.mask_id, Some(ctx.index()?), ctx.max_len, rng)?.1
        }
        TMaskR { sigma } => ops::tmask_r(seq, *sigma, rng),
        TNoise { .. } | TMaskB { .. } => {
            return Err(Error::Contract(format!(
                "{} acts on representations, not item ids",
                spec.name()
            )))
        }
    })
}

/// Encoder hooks for a representation-level spec. The hooks own `rng`.
pub fn representation_hooks(spec: &AugmentationSpec, mut rng: StreamRng) -> Result<EncodeHooks<'static>> {
    let mut hooks = EncodeHooks::none();
    match *spec {
        AugmentationSpec::TNoise {
            lo,
            hi,
            stage,
            centered,
        } => {
            let (lo, hi) = if centered { (-hi, hi) } else { (lo, hi) };
            let f = Box::new(move |m: &crate::tensor::Matrix| repr::tnoise(m, lo, hi, None, &mut rng));
            match stage {
                NoiseStage::Embedding => hooks.post_embedding = Some(f),
                NoiseStage::Hidden => hooks.post_encoder = Some(f),
            }
        }
        AugmentationSpec::TMaskB { sigma } => {
            hooks.post_embedding = Some(Box::new(move |m: &crate::tensor::Matrix| {
                repr::tmask_b(m, sigma, None, &mut rng).0
            }));
        }
        _ => {
            return Err(Error::Contract(format!(
                "{} is not a representation-level operator",
                spec.name()
            )))
        }
    }
    Ok(hooks)
}
