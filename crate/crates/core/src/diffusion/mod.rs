//! Conditional DDPM over key-action windows.
//!
//! A window is `slots = 1 + window_key_count` rows: the dense initial state
//! followed by key actions, each row holding the human pose, object pose,
//! contact probabilities and the key's frame offset from the initial state.
//! The denoiser predicts the clean window directly and is trained with an L1
//! loss; sampling runs the standard posterior reverse process.

mod checkpoint;
mod condition;
mod model;
mod sample;
mod schedule;
mod tensor;
mod train;

pub use checkpoint::{Checkpoint, ScheduleSpec, CHECKPOINT_VERSION};
pub use condition::{build_condition, toy_text_embed, ConditionBundle, EncodedCondition, TEXT_DIM};
pub use model::{
    evaluate_loss, random_problem, step_embedding, training_loss, Denoiser, DenoiserConfig,
    DenoiserParams, FixedDenoiser, ModelContext, ParamLayout, TrainingSample,
};
pub use sample::{sample_normalized, LongCondition, Sampler};
pub use schedule::{build_schedule, NoiseSchedule, Variance};
pub use tensor::{
    nearest_rotation, unpack, GeneratedKeys, Normalizer, SampleTensor, SlotState, WindowLayout,
    MIN_STD,
};
pub use train::{evaluate_windows, fine_tune, train, GeometryTable, LossRecord, TrainConfig};
