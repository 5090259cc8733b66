//! Kernel machinery, CMMD losses, minibatch training, cross-validated
//! architecture selection, and the maximum-likelihood flow baseline.

pub mod base;
pub mod cv;
pub mod kernel;
pub mod loss;
pub mod train;

pub use base::{BaseDistribution, BaseFamily, FlowScm};
pub use cv::{fit_candidate, kfold_select, Candidate, CvConfig, CvOutcome, CvReport, SelectedModel};
pub use kernel::{kernel_matrix, median_bandwidth, sq_dist, KernelConfig};
pub use loss::{cmmd_minibatch_grad, cmmd_value, CmmdBatchLoss, CmmdVariant, NllBatchLoss};
pub use train::{train_cocycle, train_scm, LossSpec, TrainConfig, TrainOutcome};
