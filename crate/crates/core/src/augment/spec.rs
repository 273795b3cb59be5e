use serde::{Deserialize, Serialize};

use super::index::IndexMode;
use super::select::SelectionPolicy;
use crate::error::{Error, Result};

/// Where TNoise is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseStage {
    /// The embedded sequence `E_u`.
    #[default]
    Embedding,
    /// The encoder output `H_u`.
    Hidden,
}

/// One augmentation operator with exactly its own parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum AugmentationSpec {
    #[serde(rename = "crop")]
    Crop { ratio: f64 },
    #[serde(rename = "reorder")]
    Reorder { ratio: f64 },
    #[serde(rename = "sliding-window")]
    SlidingWindow { window: usize },
    #[serde(rename = "mask")]
    Mask {
        ratio: f64,
        #[serde(default)]
        selection: SelectionPolicy,
    },
    #[serde(rename = "substitute")]
    Substitute {
        ratio: f64,
        #[serde(default)]
        selection: SelectionPolicy,
        #[serde(default)]
        index: IndexMode,
    },
    #[serde(rename = "insert")]
    Insert {
        ratio: f64,
        #[serde(default)]
        selection: SelectionPolicy,
        #[serde(default)]
        index: IndexMode,
    },
    /// Uniform pick of Crop, Mask or Reorder per call.
    #[serde(rename = "cmr")]
    Cmr { ratio: f64 },
    /// Uniform pick of Crop, Mask, Reorder, Substitute or Insert per call.
    #[serde(rename = "cmrsi")]
    Cmrsi {
        ratio: f64,
        #[serde(default)]
        index: IndexMode,
    },
    /// Elementwise `Uniform[lo, hi]` noise, or `Uniform[-hi, hi]` when centered.
    #[serde(rename = "tnoise")]
    TNoise {
        lo: f64,
        hi: f64,
        #[serde(default)]
        stage: NoiseStage,
        #[serde(default)]
        centered: bool,
    },
    #[serde(rename = "tmask-b")]
    TMaskB { sigma: f64 },
    #[serde(rename = "tmask-r")]
    TMaskR { sigma: f64 },
}

fn check_fraction(name: &str, v: f64, upper_inclusive: bool) -> Result<()> {
    let ok = v > 0.0 && (v < 1.0 || (upper_inclusive && v == 1.0));
    if ok {
        Ok(())
    } else {
        Err(Error::config(format!("{name} = {v} outside (0, 1)")))
    }
}

impl AugmentationSpec {
    /// TNoise from a reported `(a, b)` pair; the interval is `[min, max]`.
    pub fn tnoise_from_pair(a: f64, b: f64, stage: NoiseStage) -> Self {
        AugmentationSpec::TNoise {
            lo: a.min(b),
            hi: a.max(b),
            stage,
            centered: false,
        }
    }

    /// Zero-width TNoise; leaves every representation unchanged.
    pub fn identity() -> Self {
        AugmentationSpec::TNoise {
            lo: 0.0,
            hi: 0.0,
            stage: NoiseStage::Embedding,
            centered: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        use AugmentationSpec::*;
        match self {
            Crop { ratio } | Reorder { ratio } | Cmr { ratio } | Cmrsi { ratio, .. } => {
                check_fraction("ratio", *ratio, true)
            }
            Mask { ratio, selection }
            | Substitute {
                ratio, selection, ..
            }
            | Insert {
                ratio, selection, ..
            } => {
                check_fraction("ratio", *ratio, true)?;
                selection.validate()
            }
            SlidingWindow { window } => {
                if *window == 0 {
                    Err(Error::config("sliding window length must be at least 1"))
                } else {
                    Ok(())
                }
            }
            TNoise { lo, hi, centered, .. } => {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    Err(Error::config(format!("noise interval [{lo}, {hi}] is invalid")))
                } else if *centered && *hi < 0.0 {
                    Err(Error::config("centered noise needs a non-negative radius"))
                } else {
                    Ok(())
                }
            }
            TMaskB { sigma } | TMaskR { sigma } => check_fraction("sigma", *sigma, false),
        }
    }

    /// TNoise and TMask-B act on matrices inside the encoder; everything
    /// else rewrites the item-id sequence.
    pub fn is_representation_level(&self) -> bool {
        matches!(self, AugmentationSpec::TNoise { .. } | AugmentationSpec::TMaskB { .. })
    }

    pub fn uses_similarity_index(&self) -> bool {
        matches!(
            self,
            AugmentationSpec::Substitute { .. }
                | AugmentationSpec::Insert { .. }
                | AugmentationSpec::Cmrsi { .. }
        )
    }

    pub fn selection(&self) -> SelectionPolicy {
        match self {
            AugmentationSpec::Mask { selection, .. }
            | AugmentationSpec::Substitute { selection, .. }
            | AugmentationSpec::Insert { selection, .. } => *selection,
            _ => SelectionPolicy::Random,
        }
    }

    pub fn index_mode(&self) -> IndexMode {
        match self {
            AugmentationSpec::Substitute { index, .. }
            | AugmentationSpec::Insert { index, .. }
            | AugmentationSpec::Cmrsi { index, .. } => *index,
            _ => IndexMode::Live,
        }
    }

    pub fn name(&self) -> &'static str {
        use AugmentationSpec::*;
        match self {
            Crop { .. } => "crop",
            Reorder { .. } => "reorder",
            SlidingWindow { .. } => "sliding-window",
            Mask { .. } => "mask",
            Substitute { .. } => "substitute",
            Insert { .. } => "insert",
            Cmr { .. } => "cmr",
            Cmrsi { .. } => "cmrsi",
            TNoise { .. } => "tnoise",
            TMaskB { .. } => "tmask-b",
            TMaskR { .. } => "tmask-r",
        }
    }

    /// Short label including parameters, e.g. `tmask-r(0.5)`.
    pub fn label(&self) -> String {
        use AugmentationSpec::*;
        let sel = |s: &SelectionPolicy| match s {
            SelectionPolicy::Random => String::new(),
            other => format!(",{}", other.label()),
        };
        match self {
            Crop { ratio } | Reorder { ratio } | Cmr { ratio } | Cmrsi { ratio, .. } => {
                format!("{}({ratio})", self.name())
            }
            Mask { ratio, selection }
            | Substitute {
                ratio, selection, ..
            }
            | Insert {
                ratio, selection, ..
            } => format!("{}({ratio}{})", self.name(), sel(selection)),
            SlidingWindow { window } => format!("sliding-window({window})"),
            TNoise {
                lo,
                hi,
                stage,
                centered,
            } => {
                let st = match stage {
                    NoiseStage::Embedding => "",
                    NoiseStage::Hidden => ",hidden",
                };
                if *centered {
                    format!("tnoise(±{hi}{st})")
                } else {
                    format!("tnoise({lo},{hi}{st})")
                }
            }
            TMaskB { sigma } | TMaskR { sigma } => format!("{}({sigma})", self.name()),
        }
    }

    /// Replaces the sigma of a TMask spec.
    pub fn with_sigma(&self, value: f64) -> Result<Self> {
        match self {
            AugmentationSpec::TMaskB { .. } => Ok(AugmentationSpec::TMaskB { sigma: value }),
            AugmentationSpec::TMaskR { .. } => Ok(AugmentationSpec::TMaskR { sigma: value }),
            other => Err(Error::config(format!("{} has no sigma", other.name()))),
        }
    }

    /// Replaces the ratio of a ratio-based spec.
    pub fn with_ratio(&self, value: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            AugmentationSpec::Crop { ratio }
            | AugmentationSpec::Reorder { ratio }
            | AugmentationSpec::Cmr { ratio }
            | AugmentationSpec::Cmrsi { ratio, .. }
            | AugmentationSpec::Mask { ratio, .. }
            | AugmentationSpec::Substitute { ratio, .. }
            | AugmentationSpec::Insert { ratio, .. } => *ratio = value,
            other => return Err(Error::config(format!("{} has no ratio", other.name()))),
        }
        Ok(out)
    }

    /// Replaces the TNoise interval, canonicalising the pair.
    pub fn with_noise_pair(&self, a: f64, b: f64) -> Result<Self> {
        match self {
            AugmentationSpec::TNoise {
                stage, centered, ..
            } => Ok(AugmentationSpec::TNoise {
                lo: a.min(b),
                hi: a.max(b),
                stage: *stage,
                centered: *centered,
            }),
            other => Err(Error::config(format!("{} has no noise interval", other.name()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_tagged_toml() {
        let s: AugmentationSpec = toml::from_str("kind = \"tmask-r\"\nsigma = 0.5\n").unwrap();
        assert_eq!(s, AugmentationSpec::TMaskR { sigma: 0.5 });
        let s: AugmentationSpec = toml::from_str(
            "kind = \"mask\"\nratio = 0.3\nselection = { mode = \"fixed-proportion\", p = 0.5 }\n",
        )
        .unwrap();
        assert_eq!(
            s,
            AugmentationSpec::Mask {
                ratio: 0.3,
                selection: SelectionPolicy::FixedProportion { p: 0.5 }
            }
        );
    }

    #[test]
    fn rejects_foreign_parameters() {
        assert!(toml::from_str::<AugmentationSpec>("kind = \"crop\"\nratio = 0.5\nsigma = 0.2\n").is_err());
        assert!(toml::from_str::<AugmentationSpec>("kind = \"tmask-b\"\nratio = 0.5\n").is_err());
    }

    #[test]
    fn noise_pair_is_canonicalised() {
        let s = AugmentationSpec::tnoise_from_pair(1.0, 0.5, NoiseStage::Embedding);
        assert!(matches!(s, AugmentationSpec::TNoise { lo, hi, .. } if lo == 0.5 && hi == 1.0));
        let bad = AugmentationSpec::TNoise {
            lo: 1.0,
            hi: 0.5,
            stage: NoiseStage::Embedding,
            centered: false,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn validation_bounds() {
        assert!(AugmentationSpec::TMaskR { sigma: 1.0 }.validate().is_err());
        assert!(AugmentationSpec::Crop { ratio: 1.0 }.validate().is_ok());
        assert!(AugmentationSpec::Mask {
            ratio: 0.0,
            selection: SelectionPolicy::Random
        }
        .validate()
        .is_err());
        assert!(AugmentationSpec::SlidingWindow { window: 0 }.validate().is_err());
        assert!(AugmentationSpec::identity().validate().is_ok());
    }
}
