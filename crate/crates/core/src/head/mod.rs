//! Temporal attention classifier over per-frame features.

mod features;
mod loss;
mod model;
mod optim;
mod store;
mod train;

pub use features::{
    clip_descriptors, frame_descriptor, normalize_time, pool_time, sequence_from_plan, FeatureSequence,
};
pub use loss::{focal_loss, gelu, gelu_grad, softmax, FocalConfig};
pub use model::{head_backward, head_forward, param_shapes, HeadCache, HeadConfig, HeadParams, PARAM_NAMES};
pub use optim::{centralize, one_cycle_lr, ranger_step, Ranger, RangerSettings};
pub use store::{load_model, save_model, HeadModel, ModelManifest, TensorEntry, MANIFEST};
pub use train::{argmax, evaluate, predict, predict_tta, train_head, EpochStats, Prediction, TrainSettings, BATCH_SIZE};
