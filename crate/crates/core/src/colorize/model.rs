use crate::error::{Error, Result};
use crate::imaging::{join_labels, ChannelLabel, ChannelStack, RgbImage};

/// A co-registered source/target patch pair.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub source: ChannelStack,
    pub target: RgbImage,
}

impl TrainingPair {
    pub fn new(source: ChannelStack, target: RgbImage) -> Result<Self> {
        if source.dims() != target.dims() {
            return Err(Error::Shape(format!(
                "source is {}x{}, target is {}x{}",
                source.height(),
                source.width(),
                target.height,
                target.width
            )));
        }
        Ok(Self { source, target })
    }
}

/// A trained source-to-RGB generator.
pub trait TranslationModel: Send + Sync {
    /// Channel labels, in the order the model was trained on.
    fn input_labels(&self) -> &[ChannelLabel];

    /// Translate one patch. Output has the patch's dimensions.
    fn predict(&self, patch: &ChannelStack) -> Result<RgbImage>;

    fn backend_name(&self) -> &'static str;
}

/// Something that can train a [`TranslationModel`] from paired patches.
pub trait ColorizerBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn fit(&self, pairs: &[TrainingPair]) -> Result<Box<dyn TranslationModel>>;
}

/// Reject a stack whose channel labels or order differ from the model's.
pub fn check_labels(expected: &[ChannelLabel], stack: &ChannelStack) -> Result<()> {
    let got = stack.labels();
    if got != expected {
        return Err(Error::Contract(format!(
            "model expects channels [{}], received [{}]",
            join_labels(expected),
            join_labels(&got)
        )));
    }
    Ok(())
}

/// Training pairs must all carry the same channels in the same order.
pub(crate) fn common_labels(pairs: &[TrainingPair]) -> Result<Vec<ChannelLabel>> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::Data("no training pairs".into()))?;
    let labels = first.source.labels();
    if labels.is_empty() {
        return Err(Error::Data("training stacks have no channels".into()));
    }
    for (i, p) in pairs.iter().enumerate() {
        check_labels(&labels, &p.source).map_err(|e| e.context(format!("training pair {i}")))?;
    }
    Ok(labels)
}
