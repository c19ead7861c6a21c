//! Distribution comparison and correlation utilities.

mod correlation;
mod ks;

pub use correlation::{pearson, CorrelationResult};
pub(crate) use correlation::t_two_sided;
pub use ks::{cap_values, capped_sample, kolmogorov_sf, ks_matrix, ks_matrix_from_samples, ks_two_sample, KsCell, KsMatrix, KsTest, DEFAULT_KS_CAP};
