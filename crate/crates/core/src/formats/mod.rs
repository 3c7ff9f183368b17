//! On-disk formats: the binary `PTDC`, `PCHS`, `PFST` and `PLCM` files
//! (all little-endian), PNG images and CSV tables.

mod binary;
pub mod pchs;
pub mod pfst;
pub mod plcm;
pub mod png;
pub mod ptdc;
pub mod tables;

pub use pchs::{decode_stack, encode_stack, read_stack, write_stack};
pub use pfst::{decode_feature_set, encode_feature_set, read_feature_set, write_feature_set};
pub use plcm::{decode_linear, encode_linear, read_linear, write_linear};
pub use png::{read_gray_png, read_png, write_gray_png, write_png};
pub use ptdc::{decode_cube, encode_cube, read_cube, write_cube};
pub use tables::{append_metric_row, read_control_points, write_control_points, write_loss_curves};
