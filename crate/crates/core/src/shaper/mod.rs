//! Command shaping: a fixed bank of moving-average and scaling filters mixed
//! per channel by the softmax output of a convolutional gating network.

pub mod demos;
pub mod filters;
pub mod linear;
pub mod model;
pub mod network;
pub mod nn;
pub mod train;

pub use demos::{augment, synth_demo_suite, DemoPair, ManoeuvreConfig};
pub use filters::{CommandWindow, FilterBank, FilterSpec, N_FILTERS, SAMPLE_RATE, WINDOW_LEN};
pub use linear::{fit_linear_baseline, LinearFilter};
pub use model::{load_model, save_model};
pub use network::{Architecture, ModelKind, Network};
pub use nn::LayerSpec;
pub use train::{loss_and_gradients, mse, train, windows_from_demos, Sample, TrainConfig, TrainOutcome};

#[cfg(test)]
mod tests;
