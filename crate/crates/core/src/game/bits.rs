//! Bit-exact buffers and mixed-radix packing of weight tuples.

use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A bit string stored MSB-first; trailing padding bits of the last byte are
/// zero and not part of the length.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitBuf {
    bytes: Vec<u8>,
    len: usize,
}

impl BitBuf {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a buffer from its bytes and declared bit length.
    pub fn from_parts(bytes: Vec<u8>, len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Malformed(alloc::format!(
                "{} bytes cannot hold exactly {len} bits",
                bytes.len()
            )));
        }
        let buf = BitBuf { bytes, len };
        if buf.padding_bits() > 0 {
            let last = *buf.bytes.last().unwrap();
            if last & ((1u8 << buf.padding_bits()) - 1) != 0 {
                return Err(Error::Malformed("nonzero padding bits".into()));
            }
        }
        Ok(buf)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn padding_bits(&self) -> usize {
        self.bytes.len() * 8 - self.len
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bytes[i / 8] >> (7 - i % 8) & 1 == 1
    }

    /// Flips one bit (fault injection in tests and the acceptance harness).
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range");
        self.bytes[i / 8] ^= 1 << (7 - i % 8);
    }

    fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 1 << (7 - self.len % 8);
        }
        self.len += 1;
    }
}

#[derive(Debug, Default)]
pub struct BitWriter {
    buf: BitBuf,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.buf.len
    }

    pub fn is_empty(&self) -> bool {
        self.buf.len == 0
    }

    pub fn write_bit(&mut self, bit: bool) {
        self.buf.push(bit);
    }

    /// Writes `value` in exactly `bits` bits.
    pub fn write_u64(&mut self, value: u64, bits: u32) -> Result<()> {
        if bits < 64 && value >> bits != 0 {
            return Err(Error::ValueOverflow {
                value: value as u128,
                word_bits: bits,
            });
        }
        for i in (0..bits).rev() {
            self.buf.push(value >> i & 1 == 1);
        }
        Ok(())
    }

    pub fn write_big(&mut self, value: &BigUint, bits: usize) -> Result<()> {
        if value.bits() > bits as u64 {
            return Err(Error::invalid(alloc::format!(
                "a {}-bit integer does not fit {bits} bits",
                value.bits()
            )));
        }
        for i in (0..bits as u64).rev() {
            self.buf.push(value.bit(i));
        }
        Ok(())
    }

    pub fn finish(self) -> BitBuf {
        self.buf
    }
}

pub struct BitReader<'a> {
    buf: &'a BitBuf,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(buf: &'a BitBuf) -> Self {
        BitReader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len - self.pos
    }

    fn need(&self, bits: usize) -> Result<()> {
        if bits > self.remaining() {
            return Err(Error::Malformed(alloc::format!(
                "wanted {bits} bits, {} left",
                self.remaining()
            )));
        }
        Ok(())
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        self.need(1)?;
        let b = self.buf.bit(self.pos);
        self.pos += 1;
        Ok(b)
    }

    pub fn read_u64(&mut self, bits: u32) -> Result<u64> {
        if bits > 64 {
            return Err(Error::invalid("cannot read more than 64 bits into a word"));
        }
        self.need(bits as usize)?;
        let mut v = 0u64;
        for _ in 0..bits {
            v = v << 1 | self.buf.bit(self.pos) as u64;
            self.pos += 1;
        }
        Ok(v)
    }

    pub fn read_big(&mut self, bits: usize) -> Result<BigUint> {
        self.need(bits)?;
        let pad = (8 - bits % 8) % 8;
        let mut bytes = alloc::vec![0u8; (bits + pad) / 8];
        for k in 0..bits {
            if self.buf.bit(self.pos + k) {
                let at = pad + k;
                bytes[at / 8] |= 1 << (7 - at % 8);
            }
        }
        self.pos += bits;
        Ok(BigUint::from_bytes_be(&bytes))
    }

    /// Fails unless every bit was consumed.
    pub fn finish(self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Malformed(alloc::format!(
                "{} trailing bits",
                self.remaining()
            )));
        }
        Ok(())
    }
}

/// `Σ values[i]·radix^i`, one big integer in `[radix^len]`.
pub fn pack_mixed_radix(values: &[u64], radix: u64) -> Result<BigUint> {
    let r = BigUint::from(radix);
    let mut acc = BigUint::zero();
    for &v in values.iter().rev() {
        if v >= radix {
            return Err(Error::invalid(alloc::format!("digit {v} not below radix {radix}")));
        }
        acc = acc * &r + BigUint::from(v);
    }
    Ok(acc)
}

pub fn unpack_mixed_radix(packed: &BigUint, radix: u64, count: usize) -> Result<Vec<u64>> {
    let r = BigUint::from(radix);
    let mut rest = packed.clone();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push((&rest % &r).to_u64().expect("remainder below a u64 radix"));
        rest /= &r;
    }
    if !rest.is_zero() {
        return Err(Error::Malformed("packed integer exceeds radix^count".into()));
    }
    Ok(out)
}

/// Bits of `radix^count - 1`, which is `⌈count·lg radix⌉` when `radix` is not
/// a power of two.
pub fn mixed_radix_bits(radix: u64, count: usize) -> usize {
    if count == 0 {
        return 0;
    }
    let top = num_traits::pow(BigUint::from(radix), count) - BigUint::one();
    top.bits() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_round_trip() {
        let mut w = BitWriter::new();
        w.write_bit(true);
        w.write_u64(5, 3).unwrap();
        w.write_u64(0xabc, 12).unwrap();
        assert!(w.write_u64(8, 3).is_err());
        let buf = w.finish();
        assert_eq!(buf.len(), 16);
        let mut r = BitReader::new(&buf);
        assert!(r.read_bit().unwrap());
        assert_eq!(r.read_u64(3).unwrap(), 5);
        assert_eq!(r.read_u64(12).unwrap(), 0xabc);
        assert!(r.read_bit().is_err());
        r.finish().unwrap();
    }

    #[test]
    fn padding_is_checked() {
        let mut w = BitWriter::new();
        w.write_u64(3, 2).unwrap();
        let buf = w.finish();
        assert_eq!(buf.padding_bits(), 6);
        assert_eq!(BitBuf::from_parts(buf.bytes().to_vec(), 2).unwrap(), buf);
        assert!(BitBuf::from_parts(alloc::vec![0xc1], 2).is_err());
        assert!(BitBuf::from_parts(alloc::vec![0xc0, 0], 2).is_err());
    }

    #[test]
    fn five_weights_take_67_bits() {
        assert_eq!(mixed_radix_bits(9973, 5), 67);
        let weights = [9972, 0, 17, 9000, 1];
        let packed = pack_mixed_radix(&weights, 9973).unwrap();
        let mut w = BitWriter::new();
        w.write_big(&packed, 67).unwrap();
        let buf = w.finish();
        let mut r = BitReader::new(&buf);
        let back = r.read_big(67).unwrap();
        assert_eq!(unpack_mixed_radix(&back, 9973, 5).unwrap(), weights);
        assert!(pack_mixed_radix(&[9973], 9973).is_err());
        assert_eq!(mixed_radix_bits(9973, 0), 0);
    }

    #[test]
    fn bit_counts_match_ceiling_formula() {
        for (radix, count) in [(390581u64, 20usize), (37480959979, 21), (65521, 7), (3, 11)] {
            let expected = libm::ceil(count as f64 * libm::log2(radix as f64)) as usize;
            assert_eq!(mixed_radix_bits(radix, count), expected);
        }
    }
}
