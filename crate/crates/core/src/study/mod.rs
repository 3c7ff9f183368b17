//! Channel-combination studies: choosing the number of features (K-study)
//! and ranking every subset of the channel array (C-study).

mod combos;
mod run;
mod table;

pub use combos::{enumerate_combinations, CombinationId, MAX_CHANNELS};
pub use run::{
    channel_array, preprocess_stack, run_c_study, run_k_study, train_and_score, KReport, KStudy, SpatialSplit,
    StudyConfig,
};
pub use table::{competition_ranks, select_best, RowStatus, StudyMeta, StudyRow, StudyTable};
