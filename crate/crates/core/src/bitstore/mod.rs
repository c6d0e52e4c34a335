//! Packed bit sequences, trial records, and their bit-exact file formats.
//!
//! Bit order convention: bit `j` of a [`BitString`] lives in octet `j / 8`
//! at in-octet position `j % 8`, least-significant bit first. Backing
//! storage is `u64` words with the same LSB-first layout, so octet `k` of
//! the serialized form is byte `k % 8` of word `k / 8` in little-endian
//! order. External indices are 0-based.

mod bits;
mod io;
mod trials;

pub use bits::{deinterleave, interleave, xor_pad, BitString};
pub use io::{
    read_bits, read_bits_file, read_trials, read_trials_file, write_bits, write_bits_file,
    write_trials, write_trials_file, BITS_MAGIC, TRIALS_MAGIC,
};
pub use trials::{CountTable16, Trial, TrialRecordSet};
