//! The joint entity and relation model: embeddings, token mixers, the
//! entity and relation heads, training and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod embedding;
pub mod error;
pub mod heads;
pub mod instance;
pub mod layers;
pub mod mixers;
pub mod model;
pub mod params;
pub mod train;

pub use checkpoint::{from_bytes, load_checkpoint, save_checkpoint, to_bytes, Checkpoint};
pub use config::{MixerConfig, MixerKind, ModelConfig, Pooling};
pub use embedding::{load_table, positional_encoding, EmbeddingTable};
pub use error::{CoreError, Result};
pub use heads::{
    argmax_rows, decode_bio, distance_matrix, joint_loss, ner_head, ner_loss, partition_spans, predict_relations,
    re_loss, relation_scores, selective_pool, Pooled, RelationHeads, RelationTargets, SpanRef, RELATION_HEADS,
};
pub use instance::{GoldRelation, Instance};
pub use layers::{LayerNorm, Linear, Mlp, LN_EPS};
pub use mixers::{fnet_block, mixer_block, mlp_mixer_block, windowed_attention_block, BlockParams, SharedLm};
pub use model::{Encoded, Jnrf, Layout, LossValues, LossVars, PoolSource, Prediction};
pub use params::{accumulate_grads, ParamStore};
pub use train::{
    batches, fit, select_best, train_epoch, AdamConfig, EpochStats, FitResult, Granularity, OptimizerState,
    TrainConfig,
};

pub type Jnrf32 = Jnrf<f32>;
pub type Jnrf64 = Jnrf<f64>;
