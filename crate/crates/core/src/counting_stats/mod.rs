//! Photon-counting statistics from the non-Hermitian propagator
//! `T_t = e^{−iGt}`: conditional vectors for up to two counts, exclusive
//! densities and count-number probabilities.

mod mesh;
mod pairs;
mod probabilities;

pub use pairs::{density_pair, no_count_pair, one_count_pair, two_count_pair, CountRecord, DensityPair, MAX_COUNTS};
pub use probabilities::{exclusive_density, one_count_density_scan, prob_m_counts, prob_no_counts, QuadratureOptions};
