//! Channel stacks, RGB targets, and the preprocessing / patching / warping
//! steps applied to them.

mod patch;
mod preprocess;
mod stack;
mod warp;

pub use patch::{axis_offsets, patchify, ramp_weight, stitch, PatchGrid, Patchable};
pub use preprocess::{preprocess, quantile_sorted, Preprocessed};
pub use stack::{join_labels, ChannelLabel, ChannelStack, Plane, RgbImage};
pub use warp::{
    bilinear, warp_with_control_points, ControlPoint, ControlPointSet, ThinPlateSpline, Warpable,
};
