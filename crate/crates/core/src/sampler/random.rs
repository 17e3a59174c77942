//! Lazily extended uniform reals in `[0, 1)`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use num_bigint::BigUint;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use smallvec::SmallVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("entropy source failed")]
pub struct EntropyExhausted;

/// A real whose binary expansion is revealed 64 bits at a time. Extending it
/// only appends bits, so a prefix never changes once observed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct RandomReal {
    words: SmallVec<[u64; 2]>,
}

impl RandomReal {
    pub fn new() -> Self {
        RandomReal::default()
    }

    /// Rebuilds a real from previously observed words.
    pub fn from_words(words: &[u64]) -> Self {
        RandomReal { words: SmallVec::from_slice(words) }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Number of bits fetched so far.
    pub fn len(&self) -> u32 {
        self.words.len() as u32 * 64
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Makes at least `bits` bits available.
    pub fn extend_to<R: RngCore + ?Sized>(&mut self, bits: u32, rng: &mut R) -> Result<(), EntropyExhausted> {
        while self.len() < bits {
            let mut buf = [0u8; 8];
            rng.try_fill_bytes(&mut buf).map_err(|_| EntropyExhausted)?;
            self.words.push(u64::from_be_bytes(buf));
        }
        Ok(())
    }

    /// The first `bits` bits as an integer `t`, so that `r ∈ [t, t+1)·2^-bits`.
    /// Requires `bits ≤ 128` and enough fetched bits.
    pub fn prefix_u128(&self, bits: u32) -> u128 {
        debug_assert!(bits <= 128 && bits <= self.len());
        if bits == 0 {
            return 0;
        }
        let hi = self.words[0] as u128;
        let lo = self.words.get(1).copied().unwrap_or(0) as u128;
        let full = (hi << 64) | lo;
        full >> (128 - bits)
    }

    /// The first `bits` bits as an arbitrary-size integer.
    pub fn prefix_big(&self, bits: u32) -> BigUint {
        debug_assert!(bits <= self.len());
        let words = bits.div_ceil(64) as usize;
        let mut acc = BigUint::default();
        for w in &self.words[..words] {
            acc = (acc << 64u32) + BigUint::from(*w);
        }
        acc >> (words as u32 * 64 - bits)
    }

    /// Hex digits of all fetched bits, most significant first.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.words.len() * 16);
        for w in &self.words {
            let _ = write!(s, "{w:016x}");
        }
        s
    }

    /// Parses [`RandomReal::to_hex`] output (a multiple of 16 hex digits).
    pub fn from_hex(hex: &str) -> Option<Self> {
        if hex.len() % 16 != 0 || !hex.is_ascii() {
            return None;
        }
        let words: Option<Vec<u64>> = (0..hex.len() / 16).map(|i| u64::from_str_radix(&hex[16 * i..16 * i + 16], 16).ok()).collect();
        Some(RandomReal::from_words(&words?))
    }
}

/// The entropy stream for attempt number `attempt` under `seed`: every
/// attempt gets an independent ChaCha stream, so results do not depend on
/// how attempts are scheduled.
pub fn attempt_rng(seed: u64, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefixes_agree() {
        let r = RandomReal::from_words(&[0xF0F0_0000_0000_0001, 0x8000_0000_0000_0000]);
        assert_eq!(r.prefix_u128(4), 0xF);
        assert_eq!(r.prefix_u128(8), 0xF0);
        assert_eq!(r.prefix_u128(65), (0xF0F0_0000_0000_0001u128 << 1) | 1);
        for bits in [1, 7, 64, 65, 100, 128] {
            assert_eq!(r.prefix_big(bits), BigUint::from(r.prefix_u128(bits)));
        }
        assert_eq!(RandomReal::from_hex(&r.to_hex()), Some(r));
    }

    #[test]
    fn extension_appends() {
        let mut rng = attempt_rng(7, 3);
        let mut r = RandomReal::new();
        r.extend_to(10, &mut rng).unwrap();
        let before = r.prefix_u128(64);
        r.extend_to(200, &mut rng).unwrap();
        assert_eq!(r.len(), 256);
        assert_eq!(r.prefix_u128(64), before);
    }

    #[test]
    fn streams_are_independent() {
        let a = attempt_rng(1, 0).next_u64();
        let b = attempt_rng(1, 1).next_u64();
        assert_ne!(a, b);
        assert_eq!(a, attempt_rng(1, 0).next_u64());
    }
}
