//! Multi-channel colorization: channel adaptation around a translation
//! model, a closed-form linear colorizer and a tiny adversarial trainer.

pub mod adapt;
pub mod adversarial;
pub mod linear;
pub mod model;
pub mod stain;

pub use adapt::{collapse_output, expand_target, quantize};
pub use adversarial::{fit_adversarial, tile_pairs, AdversarialBackend, AdversarialModel, EpochRecord, TrainConfig, TrainReport};
pub use linear::{fit_linear_colorizer, LinearBackend, LinearColorizer};
pub use model::{check_labels, ColorizerBackend, TrainingPair, TranslationModel};
pub use stain::{overlap_stride, virtual_stain};
