//! Two-layer graph convolutional network: model, gradients, Adam, training,
//! checkpoints and embedding export.

mod adam;
mod checkpoint;
mod embedding;
mod model;
mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{
    load_checkpoint, read_model, save_checkpoint, write_model, CheckpointMeta, CHECKPOINT_VERSION,
};
pub use embedding::{pca, write_embeddings_csv, write_projection_csv};
pub use model::{
    argmax_row, backward, forward, forward_with_masks, loss, predict, softmax_rows, DropoutMasks,
    ForwardPass, GcnModel, Gradients, Predictions, DEFAULT_DROPOUT, DEFAULT_HIDDEN, PROB_FLOOR,
};
pub use train::{
    train, train_with, NodeMasks, RunMetrics, Selection, SplitRole, TrainConfig, TrainRun,
    DEFAULT_EPOCHS,
};
