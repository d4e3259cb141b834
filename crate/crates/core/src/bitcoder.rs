//! MSB-first bit I/O with unary and minimal-binary (truncated binary) codes.
//!
//! A Golomb codeword for `M` under parameter `m` is `floor(M/m)` in unary
//! (that many one-bits, then a zero) followed by `M mod m` in minimal binary.

use crate::error::{Error, Result};

/// Default bound on a single unary run, in bits.
pub const DEFAULT_UNARY_LIMIT: u64 = 1 << 20;

/// Golomb parameter `m` with its derived minimal-binary constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GolombParam {
    m: u64,
    /// `ceil(lg m)`
    bits: u32,
    /// `2^bits - m`; remainders below this take `bits - 1` bits.
    threshold: u64,
}

impl GolombParam {
    pub fn new(m: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("golomb parameter m must be >= 1"));
        }
        if m > 1 << 62 {
            return Err(Error::invalid(format!("golomb parameter {m} too large")));
        }
        let bits = 64 - (m - 1).leading_zeros();
        let threshold = (1u64 << bits) - m;
        Ok(GolombParam { m, bits, threshold })
    }

    #[inline]
    pub fn m(self) -> u64 {
        self.m
    }

    #[inline]
    pub fn ceil_lg(self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn threshold(self) -> u64 {
        self.threshold
    }

    pub fn is_power_of_two(self) -> bool {
        self.threshold == 0
    }

    /// Bits taken by remainder `k` in minimal binary.
    #[inline]
    pub fn minimal_binary_len(self, k: u64) -> u32 {
        if k < self.threshold {
            self.bits - 1
        } else {
            self.bits
        }
    }
}

/// Codeword length of `value` under `g`, without touching a stream.
#[inline]
pub fn code_length(value: u64, g: GolombParam) -> u64 {
    value / g.m + 1 + u64::from(g.minimal_binary_len(value % g.m))
}

/// Append-only bit buffer.
#[derive(Debug, Clone)]
pub struct BitSink {
    bytes: Vec<u8>,
    acc: u8,
    filled: u32,
    written: u64,
    unary_limit: u64,
}

impl Default for BitSink {
    fn default() -> Self {
        Self::new()
    }
}

impl BitSink {
    pub fn new() -> Self {
        Self::with_unary_limit(DEFAULT_UNARY_LIMIT)
    }

    pub fn with_unary_limit(unary_limit: u64) -> Self {
        BitSink {
            bytes: Vec::new(),
            acc: 0,
            filled: 0,
            written: 0,
            unary_limit,
        }
    }

    /// Total bits written so far, excluding padding.
    pub fn bits_written(&self) -> u64 {
        self.written
    }

    #[inline]
    pub fn write_bit(&mut self, bit: bool) {
        self.acc = (self.acc << 1) | bit as u8;
        self.filled += 1;
        self.written += 1;
        if self.filled == 8 {
            self.bytes.push(self.acc);
            self.acc = 0;
            self.filled = 0;
        }
    }

    /// Writes the low `n` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, n: u32) {
        debug_assert!(n <= 64);
        for i in (0..n).rev() {
            self.write_bit((value >> i) & 1 == 1);
        }
    }

    fn write_ones(&mut self, mut n: u64) {
        while n > 0 && self.filled != 0 {
            self.write_bit(true);
            n -= 1;
        }
        while n >= 8 {
            self.bytes.push(0xff);
            self.written += 8;
            n -= 8;
        }
        for _ in 0..n {
            self.write_bit(true);
        }
    }

    /// `j` one-bits followed by a zero-bit.
    pub fn write_unary(&mut self, j: u64) -> Result<()> {
        if j > self.unary_limit {
            return Err(Error::invalid(format!(
                "unary run of {j} exceeds limit {}",
                self.unary_limit
            )));
        }
        self.write_ones(j);
        self.write_bit(false);
        Ok(())
    }

    /// Truncated binary: `k < u` in `b-1` bits, otherwise `k+u` in `b` bits.
    pub fn write_minimal_binary(&mut self, k: u64, g: GolombParam) -> Result<()> {
        if k >= g.m {
            return Err(Error::invalid(format!("remainder {k} >= m = {}", g.m)));
        }
        if k < g.threshold {
            self.write_bits(k, g.bits - 1);
        } else {
            self.write_bits(k + g.threshold, g.bits);
        }
        Ok(())
    }

    pub fn write_golomb(&mut self, value: u64, g: GolombParam) -> Result<()> {
        self.write_unary(value / g.m)?;
        self.write_minimal_binary(value % g.m, g)
    }

    /// Pads the last partial byte with zero-bits and returns the buffer.
    pub fn finish(mut self) -> Vec<u8> {
        if self.filled > 0 {
            self.bytes.push(self.acc << (8 - self.filled));
        }
        self.bytes
    }
}

/// Sequential reader over a byte slice.
#[derive(Debug, Clone)]
pub struct BitSource<'a> {
    data: &'a [u8],
    pos: u64,
    unary_limit: u64,
}

impl<'a> BitSource<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self::with_unary_limit(data, DEFAULT_UNARY_LIMIT)
    }

    pub fn with_unary_limit(data: &'a [u8], unary_limit: u64) -> Self {
        BitSource {
            data,
            pos: 0,
            unary_limit,
        }
    }

    /// Bits consumed so far.
    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.data.len() as u64 * 8 - self.pos
    }

    #[inline]
    pub fn read_bit(&mut self) -> Result<bool> {
        let byte = *self
            .data
            .get((self.pos >> 3) as usize)
            .ok_or(Error::UnexpectedEof)?;
        let bit = (byte >> (7 - (self.pos & 7))) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, n: u32) -> Result<u64> {
        debug_assert!(n <= 64);
        if u64::from(n) > self.remaining() {
            return Err(Error::UnexpectedEof);
        }
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_unary(&mut self) -> Result<u64> {
        let mut j = 0u64;
        while self.read_bit()? {
            j += 1;
            if j > self.unary_limit {
                return Err(Error::Corrupt(format!(
                    "unary run longer than {} bits",
                    self.unary_limit
                )));
            }
        }
        Ok(j)
    }

    pub fn read_minimal_binary(&mut self, g: GolombParam) -> Result<u64> {
        if g.bits == 0 {
            return Ok(0);
        }
        let v = self.read_bits(g.bits - 1)?;
        if v < g.threshold {
            return Ok(v);
        }
        let v = (v << 1) | self.read_bit()? as u64;
        let k = v - g.threshold;
        if k >= g.m {
            return Err(Error::Corrupt(format!("remainder {k} >= m = {}", g.m)));
        }
        Ok(k)
    }

    pub fn read_golomb(&mut self, g: GolombParam) -> Result<u64> {
        let j = self.read_unary()?;
        let k = self.read_minimal_binary(g)?;
        j.checked_mul(g.m)
            .and_then(|v| v.checked_add(k))
            .ok_or_else(|| Error::Corrupt("mapped residual overflows u64".into()))
    }
}
