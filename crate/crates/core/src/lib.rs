pub mod bench;
pub mod board;
pub mod elgamal;
pub mod encode;
pub mod error;
pub mod fhe;
pub mod group;
pub mod mixnet;
pub mod nizk;
pub mod payload;
pub mod pet;
pub mod protocol;
pub mod tally;
pub mod threshold;

pub use error::{Error, Result};
