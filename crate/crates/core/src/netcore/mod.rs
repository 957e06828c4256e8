//! Small classifiers with hand-derived gradients, SGD with momentum and a
//! cosine learning-rate schedule.

mod eval;
mod model;
mod optim;
mod persist;

pub use eval::{evaluate, predict, Evaluation};
pub use model::{
    loss_and_grad, loss_and_grad_neg, Architecture, Batch, Gradients, ModelState, Prediction,
};
pub use optim::{learning_rate, sgd_step, Schedule, TrainConfig};
pub use persist::{decode_model, encode_model, read_model, write_model};
