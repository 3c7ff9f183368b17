//! Noise-insensitive time-domain feature learning and feature-image
//! extraction.

mod centroid;
mod distance;
mod featureset;
mod kmeans;

pub use centroid::{canonicalize_sign, cluster_centroid, POWER_MAX_ITER, POWER_TOL};
pub use distance::angular_distance;
pub use featureset::{
    extract_features, learning_subset, pseudo_inverse_columns, FeatureImages, FeatureSet, LearnMeta,
};
pub use kmeans::{kmeans_fit, kmeans_fit_detailed, KMeansConfig, KMeansFit};
