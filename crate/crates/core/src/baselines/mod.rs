//! Non-transformer comparators: aggregation features and a contrastive GRU.

pub mod coles;
pub mod feateng;

pub use coles::{
    coles_embed, coles_embed_accounts, coles_sample_pairs, coles_train, retrieval_accuracy, ColesConfig, ColesModel,
};
pub use feateng::{feat_eng, feature_names, schema_len, schema_manifest};
