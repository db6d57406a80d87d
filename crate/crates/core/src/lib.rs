//! Finite oblivious arbitrarily varying channels (AVCs) under list decoding.
//!
//! The crate decides the various symmetrizability notions of a finite AVC by
//! linear-programming feasibility, evaluates capacity expressions, builds the
//! canonical separating channels, and runs jamming attacks against concrete
//! codebooks at desk scale.
//!
//! Module map:
//!
//! - [`probkit`]: distributions, types, information measures, nets, polytopes
//! - [`channel`]: channel laws, memoryless sampling, channel-spec files
//! - [`symcheck`]: symmetrization systems, LP feasibility, verdicts
//! - [`cpcone`]: completely positive distributions and copositive witnesses
//! - [`capacity`]: inner minimization, capacity estimates, fading capacity
//! - [`codegen`]: codebook sampling and structural analysis
//! - [`attack`]: jamming strategies
//! - [`decode`]: list decoders and error probabilities
//! - [`canonical`]: canonical channels and separation demos

pub mod attack;
pub mod canonical;
pub mod capacity;
pub mod channel;
pub mod codegen;
pub mod cpcone;
pub mod decode;
mod error;
pub mod probkit;
pub mod rng;
pub mod symcheck;

pub use error::{Error, Result};
