//! Graph convolution network with a small tape-based autodiff.
//!
//! Training runs in `f32`; the same code in `f64` backs the gradient checks.

pub mod batch;
pub mod loss;
pub mod model;
pub mod optim;
pub mod tape;
pub mod train;

pub use batch::{FeatureNormalizer, GraphBatch, GraphInput};
pub use loss::{loss_l1, loss_l2, loss_rpd, LossKind, RPD_EPS};
pub use model::{graph_conv, GcnModel, ModelSpec, WidthPreset, GCN_WIDTHS, LEAKY_SLOPE, SPECTRUM_OUTPUTS, SYNTHETIC_OUTPUTS};
pub use optim::{Optimizer, OptimizerKind};
pub use tape::{SpMat, Tape, Var};
pub use train::{
    evaluate_loss, read_history_csv, train, train_from, write_history_csv, Checkpoint, EpochRecord, LrStage, ParamArray,
    Predictor, Sample, TrainConfig, TrainOutcome, CHECKPOINT_FORMAT_VERSION,
};

/// Float type the network can run in.
pub trait Scalar: ndarray::NdFloat + Default {}

impl Scalar for f32 {}
impl Scalar for f64 {}
