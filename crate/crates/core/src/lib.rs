//! Covert communication over binary-input multiple-access channels watched
//! by a warden: channel pairs, covert-process information measures, the
//! square-root-law throughput region, random-coding simulation and the
//! warden's detection performance.

pub mod assumptions;
pub mod channel;
pub mod coding;
pub mod error;
pub mod experiments;
pub mod info;
pub mod lp;
pub mod pmf;
pub mod process;
pub mod region;
pub mod rng;
pub mod stats;
mod tuples;
pub mod warden;

pub use channel::{ChannelPair, Side};
pub use error::{Error, Result};
pub use info::RhoVector;
pub use pmf::Pmf;
