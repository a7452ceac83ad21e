//! Neural mention ranker: recurrent encoders over token and mention context, a
//! one-hidden-layer scorer and a margin ranking loss.

pub mod embedding;
mod lstm;
mod model;
mod train;

pub use embedding::{CachedEmbedding, EmbeddingProvider, HashEmbedding};
pub use model::{
    candidate_features, mention_left_sequence, mention_right_sequence, ranking_loss, token_left_sequence,
    token_right_sequence, Encoded, EpochRecord, FeatureSet, MentionToken, ModelConfig, Ranker, TrainingMetadata,
    Vocab, CANDIDATE_FEATURES, MENTION_FEATURES,
};
pub use train::{accuracy, argmax, train};
