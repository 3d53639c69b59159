//! Feature aggregation and LDA classification.

mod features;
mod lda;

pub use features::{aggregate_features, DEFAULT_ALIGN_TOLERANCE};
pub use lda::{lda_fit, lda_predict, LdaModel, PredictMode, Prediction, DEFAULT_RIDGE, MODEL_VERSION};
