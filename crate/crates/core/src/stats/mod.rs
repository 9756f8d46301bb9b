//! Statistical utilities shared by the experiments.

pub mod estimate;
pub mod ks;
pub mod normal;
pub mod report;
pub mod rng;

pub use estimate::{chi_square_survival, Summary};
pub use ks::{ks_one_sample, KsResult};
pub use normal::normal_cdf;
pub use report::{McReport, McRow, Provenance};
pub use rng::{stream_for, ReplicateRng};
