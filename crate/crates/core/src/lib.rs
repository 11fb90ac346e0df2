//! Random integral matrices: cokernel statistics, exact reference laws and
//! the column-exposure machinery behind their universality.

pub mod cli;
pub mod exposure;
pub mod measures;
pub mod modarith;
pub mod partitions;
pub mod sampler;
pub mod spectral;
pub mod stats;
