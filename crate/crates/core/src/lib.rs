pub mod cqa;
pub mod error;
pub mod fl;
pub mod gmm;
pub mod harness;
pub mod rem;
pub mod rng;
pub mod scenario;
pub mod spectral;
pub mod synth;
