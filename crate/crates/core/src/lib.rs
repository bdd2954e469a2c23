//! Jacobian eigenvalue geometry of dense autoencoders.

pub mod dataio;
pub mod experiment;
pub mod jacobian;
pub mod linalg;
pub mod network;
pub mod spectra;
pub mod training;

#[cfg(test)]
pub(crate) mod testutil;
