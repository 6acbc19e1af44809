//! Toy CTC recognizer: differentiable log-mel front end, context-stacked
//! perceptron, CTC loss, greedy decoding and a minibatch trainer.

mod ctc;
mod decode;
mod features;
mod model;
mod train;

pub use ctc::{ctc_loss, ctc_nll, min_frames, BLANK};
pub use decode::{best_path, collapse, greedy_decode};
pub use features::{mel_filterbank, Frontend, DFT_BINS, FEATURE_FLOOR, MEL_BANDS};
pub use model::{sidecar_path, AcousticModel, FrameConfig, ModelConfig, CONTEXT, HIDDEN, INPUT_DIM, NUM_CLASSES};
pub use train::{train_asr, EpochStats, TrainConfig, TrainReport};
