//! Self-consuming training loops for Gaussian generative models, with a
//! correction operator applied to synthetic data before each refit.

pub mod bounds;
pub mod correction;
pub mod engine;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod model;

pub use correction::{CorrectionMode, CorrectionSpec, Gamma};
pub use engine::{run_loop, Accrual, LoopConfig, Trajectory};
pub use error::{CoreError, Result};
pub use exec::Execution;
pub use model::{Dataset, GaussianParams};
