use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One protocol trial: inputs (x, y) and outputs (a, b).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trial {
    pub x: bool,
    pub y: bool,
    pub a: bool,
    pub b: bool,
}

impl Trial {
    /// 4-bit cell: bit0 = x, bit1 = y, bit2 = a, bit3 = b.
    pub fn pack(self) -> u8 {
        self.x as u8 | (self.y as u8) << 1 | (self.a as u8) << 2 | (self.b as u8) << 3
    }

    pub fn unpack(cell: u8) -> Self {
        debug_assert!(cell < 16);
        Trial {
            x: cell & 1 != 0,
            y: cell & 2 != 0,
            a: cell & 4 != 0,
            b: cell & 8 != 0,
        }
    }
}

/// Per-trial records packed two to an octet, low nibble first.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecordSet {
    n: u64,
    packed: Vec<u8>,
}

fn bytes_for(n: u64) -> usize {
    n.div_ceil(2) as usize
}

impl TrialRecordSet {
    pub fn new() -> Self {
        TrialRecordSet { n: 0, packed: Vec::new() }
    }

    pub fn with_capacity(n: u64) -> Self {
        TrialRecordSet { n: 0, packed: Vec::with_capacity(bytes_for(n)) }
    }

    /// Construct from packed nibbles; the pad nibble of an odd-count set
    /// must be zero.
    pub fn from_packed(n: u64, packed: Vec<u8>) -> Result<Self> {
        if packed.len() != bytes_for(n) {
            return Err(Error::domain(format!(
                "packed length {} does not match {} trials",
                packed.len(),
                n
            )));
        }
        if n % 2 == 1 && packed.last().is_some_and(|&b| b >> 4 != 0) {
            return Err(Error::NonzeroPadding);
        }
        Ok(TrialRecordSet { n, packed })
    }

    pub fn from_trials(trials: &[Trial]) -> Self {
        let mut set = TrialRecordSet::with_capacity(trials.len() as u64);
        for &t in trials {
            set.push(t);
        }
        set
    }

    pub fn push(&mut self, t: Trial) {
        let cell = t.pack();
        if self.n.is_multiple_of(2) {
            self.packed.push(cell);
        } else {
            *self.packed.last_mut().unwrap() |= cell << 4;
        }
        self.n += 1;
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Cell value (0..16) of trial `i`.
    pub fn cell(&self, i: u64) -> u8 {
        debug_assert!(i < self.n);
        let byte = self.packed[(i / 2) as usize];
        if i.is_multiple_of(2) {
            byte & 0x0F
        } else {
            byte >> 4
        }
    }

    pub fn trial(&self, i: u64) -> Trial {
        Trial::unpack(self.cell(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = Trial> + '_ {
        (0..self.n).map(move |i| self.trial(i))
    }

    pub fn packed_bytes(&self) -> &[u8] {
        &self.packed
    }

    /// Records `[lo, hi)` as a new set (used for block-wise statistics).
    pub fn slice(&self, lo: u64, hi: u64) -> TrialRecordSet {
        debug_assert!(lo <= hi && hi <= self.n);
        let mut out = TrialRecordSet::with_capacity(hi - lo);
        for i in lo..hi {
            out.push(self.trial(i));
        }
        out
    }
}

impl Default for TrialRecordSet {
    fn default() -> Self {
        TrialRecordSet::new()
    }
}

impl std::fmt::Debug for TrialRecordSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TrialRecordSet[{} trials]", self.n)
    }
}

/// Joint tally of the 16 possible (a, b, x, y) tuples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable16 {
    counts: [u64; 16],
}

impl CountTable16 {
    /// Cell index with digit order (a, b, x, y), `a` most significant.
    pub fn index(a: bool, b: bool, x: bool, y: bool) -> usize {
        (a as usize) << 3 | (b as usize) << 2 | (x as usize) << 1 | y as usize
    }

    pub fn new() -> Self {
        CountTable16 { counts: [0; 16] }
    }

    pub fn from_counts(counts: [u64; 16]) -> Self {
        CountTable16 { counts }
    }

    pub fn add(&mut self, t: Trial) {
        self.counts[Self::index(t.a, t.b, t.x, t.y)] += 1;
    }

    pub fn merge(&mut self, other: &CountTable16) {
        for (c, o) in self.counts.iter_mut().zip(other.counts.iter()) {
            *c += o;
        }
    }

    pub fn count(&self, a: bool, b: bool, x: bool, y: bool) -> u64 {
        self.counts[Self::index(a, b, x, y)]
    }

    pub fn counts(&self) -> &[u64; 16] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Trials with input pair (x, y), regardless of outcome.
    pub fn input_pair_total(&self, x: bool, y: bool) -> u64 {
        let mut sum = 0;
        for a in [false, true] {
            for b in [false, true] {
                sum += self.count(a, b, x, y);
            }
        }
        sum
    }
}

impl Default for CountTable16 {
    fn default() -> Self {
        CountTable16::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_nibble_layout() {
        // x=1, y=0, a=1, b=1 -> 0b1101 = 0xD
        let t = Trial { x: true, y: false, a: true, b: true };
        assert_eq!(t.pack(), 0x0D);
        assert_eq!(Trial::unpack(0x0D), t);
    }

    #[test]
    fn two_trials_per_octet_low_nibble_first() {
        let t0 = Trial { x: true, y: false, a: true, b: true }; // 0xD
        let t1 = Trial { x: false, y: true, a: false, b: false }; // 0x2
        let set = TrialRecordSet::from_trials(&[t0, t1]);
        assert_eq!(set.packed_bytes(), &[0x2D]);
        assert_eq!(set.trial(0), t0);
        assert_eq!(set.trial(1), t1);
    }

    #[test]
    fn odd_count_pads_with_zero_nibble() {
        let t = Trial { x: true, y: true, a: true, b: true };
        let set = TrialRecordSet::from_trials(&[t]);
        assert_eq!(set.packed_bytes(), &[0x0F]);
        assert!(TrialRecordSet::from_packed(1, vec![0x1F]).is_err());
    }

    #[test]
    fn count_table_index_order() {
        // (a,b,x,y) = (0,0,0,0) is cell 0; (0,1,0,1) is 0b0101 = 5.
        assert_eq!(CountTable16::index(false, false, false, false), 0);
        assert_eq!(CountTable16::index(false, true, false, true), 5);
        assert_eq!(CountTable16::index(true, false, true, false), 10);
        assert_eq!(CountTable16::index(false, false, true, true), 3);
        let mut tab = CountTable16::new();
        tab.add(Trial { x: false, y: false, a: false, b: false });
        assert_eq!(tab.count(false, false, false, false), 1);
        assert_eq!(tab.total(), 1);
    }
}
