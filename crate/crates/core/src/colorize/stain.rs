use crate::colorize::model::{check_labels, TranslationModel};
use crate::error::{Error, Result};
use crate::imaging::{patchify, stitch, ChannelStack, PatchGrid, RgbImage};

/// Stride for a fractional overlap, at least one pixel.
pub fn overlap_stride(patch_size: usize, overlap: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Parameter(format!("overlap must be in [0, 1), got {overlap}")));
    }
    Ok(((patch_size as f64 * (1.0 - overlap)).round() as usize).clamp(1, patch_size.max(1)))
}

/// Translate a whole stack patch by patch and blend the overlaps.
///
/// Patches larger than the image shrink to its shorter side.
pub fn virtual_stain(stack: &ChannelStack, model: &dyn TranslationModel, patch_size: usize, overlap: f64) -> Result<RgbImage> {
    check_labels(model.input_labels(), stack)?;
    if patch_size == 0 {
        return Err(Error::Parameter("patch size must be positive".into()));
    }
    let (h, w) = stack.dims();
    let patch = patch_size.min(h).min(w);
    let stride = overlap_stride(patch, overlap)?;
    let grid = patchify(stack, patch, stride)?;
    let predicted = crate::par::map_slice(&grid.patches, |p| model.predict(p))
        .into_iter()
        .collect::<Result<Vec<RgbImage>>>()?;
    if let Some(bad) = predicted.iter().find(|p| p.dims() != (patch, patch)) {
        return Err(Error::Contract(format!(
            "model returned a {}x{} patch for a {patch}x{patch} input",
            bad.height, bad.width
        )));
    }
    stitch(&PatchGrid {
        patch_size: grid.patch_size,
        stride: grid.stride,
        height: grid.height,
        width: grid.width,
        origins: grid.origins,
        patches: predicted,
    })
}
