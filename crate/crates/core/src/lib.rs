//! Paragraph retrieval by weighted fusion of many query generators and evaluators.
mod codec;
pub mod corpus;
pub mod error;
pub mod features;
pub mod fusion;
pub mod index;
pub mod lda;
pub mod pipeline;
pub mod scalar;
pub mod seed;
pub mod synthetic;
pub mod textproc;
pub mod tuner;

pub use error::{Error, Result};

pub type FeatureMatrix = fusion::FeatureMatrix<f64>;
pub type WeightVector = fusion::WeightVector<f64>;
pub type RankedList = fusion::RankedList<f64>;
pub type TopicVector = lda::TopicVector<f64>;
pub type TuningResult = tuner::TuningResult<f64>;

pub type FeatureMatrixF32 = fusion::FeatureMatrix<f32>;
pub type WeightVectorF32 = fusion::WeightVector<f32>;
pub type RankedListF32 = fusion::RankedList<f32>;
pub type TopicVectorF32 = lda::TopicVector<f32>;
pub type TuningResultF32 = tuner::TuningResult<f32>;
