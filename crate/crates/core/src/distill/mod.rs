//! Future-to-past feature distillation: losses, gradient checks, pair
//! sampling, checkpoints and a toy training experiment.

pub mod checkpoint;
pub mod feature;
pub mod gradcheck;
pub mod loss;
pub mod pairs;
pub mod toy;

pub use checkpoint::{average_checkpoints, read_checkpoint, write_checkpoint, write_curves};
pub use feature::FeatureMap;
pub use loss::{
    combined_loss, combined_loss_grad, cross_entropy, distill_loss, gap_mse_loss, mean_similarity, mse_loss,
    similarity_matrix, FeatureLoss, LossGrad, LossWeights, SIMILARITY_FLOOR,
};
pub use pairs::{sample_pairs, window_label, PairExample};
pub use toy::{train_seeds, train_toy, ToyConfig, ToyEncoder, ToyRun, TrainMode};
