//! Bit-exact file formats.
//!
//! `RABITS01`: 8-octet magic, 8-octet little-endian bit length, then the
//! packed payload octets. `RATRIAL1`: 8-octet magic, 8-octet little-endian
//! trial count, then two trials per octet, low nibble first.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::bits::BitString;
use super::trials::TrialRecordSet;

pub const BITS_MAGIC: &[u8; 8] = b"RABITS01";
pub const TRIALS_MAGIC: &[u8; 8] = b"RATRIAL1";

fn read_header<R: Read>(r: &mut R, magic: &'static [u8; 8]) -> Result<u64> {
    let mut head = [0u8; 8];
    let got = read_up_to(r, &mut head)?;
    if got < 8 || &head != magic {
        return Err(Error::BadMagic {
            expected: std::str::from_utf8(magic).unwrap(),
            found: head[..got].to_vec(),
        });
    }
    let mut len = [0u8; 8];
    let got = read_up_to(r, &mut len)?;
    if got < 8 {
        return Err(Error::Truncated { declared: 8, found: got as u64 });
    }
    Ok(u64::from_le_bytes(len))
}

/// Fill as much of `buf` as the stream offers; returns bytes read.
fn read_up_to<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            k => filled += k,
        }
    }
    Ok(filled)
}

fn read_payload<R: Read>(r: &mut R, nbytes: u64) -> Result<Vec<u8>> {
    let mut payload = vec![0u8; nbytes as usize];
    let got = read_up_to(r, &mut payload)?;
    if (got as u64) < nbytes {
        return Err(Error::Truncated { declared: nbytes, found: got as u64 });
    }
    // Anything after the payload is an error, not silently ignored.
    let mut probe = [0u8; 1];
    let mut extra = 0u64;
    loop {
        match r.read(&mut probe)? {
            0 => break,
            k => extra += k as u64,
        }
    }
    if extra > 0 {
        return Err(Error::TrailingGarbage { extra });
    }
    Ok(payload)
}

/// Serialize `bits`; returns the number of octets written.
pub fn write_bits<W: Write>(bits: &BitString, sink: &mut W) -> Result<u64> {
    sink.write_all(BITS_MAGIC)?;
    sink.write_all(&bits.len().to_le_bytes())?;
    let payload = bits.to_bytes();
    sink.write_all(&payload)?;
    Ok(16 + payload.len() as u64)
}

pub fn read_bits<R: Read>(source: &mut R) -> Result<BitString> {
    let len = read_header(source, BITS_MAGIC)?;
    let payload = read_payload(source, len.div_ceil(8))?;
    BitString::from_bytes(len, &payload)
}

pub fn write_bits_file<P: AsRef<Path>>(bits: &BitString, path: P) -> Result<u64> {
    let mut w = BufWriter::new(File::create(path)?);
    let n = write_bits(bits, &mut w)?;
    w.flush()?;
    Ok(n)
}

pub fn read_bits_file<P: AsRef<Path>>(path: P) -> Result<BitString> {
    read_bits(&mut BufReader::new(File::open(path)?))
}

pub fn write_trials<W: Write>(trials: &TrialRecordSet, sink: &mut W) -> Result<u64> {
    sink.write_all(TRIALS_MAGIC)?;
    sink.write_all(&trials.n().to_le_bytes())?;
    sink.write_all(trials.packed_bytes())?;
    Ok(16 + trials.packed_bytes().len() as u64)
}

pub fn read_trials<R: Read>(source: &mut R) -> Result<TrialRecordSet> {
    let n = read_header(source, TRIALS_MAGIC)?;
    let payload = read_payload(source, n.div_ceil(2))?;
    TrialRecordSet::from_packed(n, payload)
}

pub fn write_trials_file<P: AsRef<Path>>(trials: &TrialRecordSet, path: P) -> Result<u64> {
    let mut w = BufWriter::new(File::create(path)?);
    let n = write_trials(trials, &mut w)?;
    w.flush()?;
    Ok(n)
}

pub fn read_trials_file<P: AsRef<Path>>(path: P) -> Result<TrialRecordSet> {
    read_trials(&mut BufReader::new(File::open(path)?))
}
