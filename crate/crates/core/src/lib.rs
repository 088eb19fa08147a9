//! Non-binary LDPC convolutional codes over GF(2^p).
//!
//! Codes are built from a randomly placed base matrix, unwrapped along its
//! diagonal into a periodic syndrome former, and decoded with an FFT-based
//! q-ary sum-product decoder over either the whole terminated block or a
//! sliding window.

pub mod channel;
pub mod code;
pub mod de;
pub mod decoder;
pub mod encoder;
pub mod gf;
pub mod rate;
pub mod sim;

pub use channel::{Likelihoods, MessageVector};
pub use code::{CodeParams, ConvCode};
pub use decoder::{decode_block, decode_sliding_window, DecodeOutput};
pub use encoder::{encode, syndrome_check, SymbolSequence};
pub use gf::{Field, Symbol};
