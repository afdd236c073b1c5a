//! Fixed-length bit vectors over GF(2).
//!
//! Bit 0 is the least significant position. Textual forms (parsing and
//! `Display`) are most-significant-first, so `"101010"` has bit 0 = 0 and
//! bit 5 = 1.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const WORD: usize = 64;

/// Largest vector length accepted by [`cip_census`].
pub const CENSUS_MAX_BITS: usize = 24;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(WORD)],
        }
    }

    /// Builds a vector from the low `len` bits of `value`.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= WORD, "from_u64 supports at most 64 bits");
        let mut v = Self::zeros(len);
        if len > 0 {
            let mask = if len == WORD { u64::MAX } else { (1u64 << len) - 1 };
            v.words[0] = value & mask;
        }
        v
    }

    /// Bits in index order, `bits[0]` being the least significant.
    pub fn from_bits_lsb_first<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut v = Self::default();
        for b in bits {
            v.push(b);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, index: usize) -> bool {
        assert!(index < self.len, "bit index {index} out of range {}", self.len);
        (self.words[index / WORD] >> (index % WORD)) & 1 == 1
    }

    pub fn set(&mut self, index: usize, value: bool) {
        assert!(index < self.len, "bit index {index} out of range {}", self.len);
        let mask = 1u64 << (index % WORD);
        if value {
            self.words[index / WORD] |= mask;
        } else {
            self.words[index / WORD] &= !mask;
        }
    }

    pub fn flip(&mut self, index: usize) {
        let b = self.get(index);
        self.set(index, !b);
    }

    /// Appends a new most significant bit.
    pub fn push(&mut self, value: bool) {
        if self.len.is_multiple_of(WORD) {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn parity(&self) -> bool {
        self.count_ones() % 2 == 1
    }

    /// Low 64 bits as an integer; `None` when the vector is longer than 64.
    pub fn to_u64(&self) -> Option<u64> {
        match self.len {
            0 => Some(0),
            l if l <= WORD => Some(self.words[0]),
            _ => None,
        }
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                left: self.len,
                right: other.len,
            });
        }
        Ok(())
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.xor_assign(other)?;
        Ok(out)
    }

    pub fn xor_assign(&mut self, other: &Self) -> Result<()> {
        self.check_len(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(())
    }

    pub fn inner_product_mod2(&self, other: &Self) -> Result<bool> {
        self.check_len(other)?;
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        Ok(ones % 2 == 1)
    }

    /// Copies bits `range.start .. range.end` into a new vector, bit order preserved.
    pub fn slice(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.len && range.start <= range.end);
        Self::from_bits_lsb_first(range.map(|i| self.get(i)))
    }

    /// `high ‖ self`: the bits of `high` become the more significant part.
    pub fn concat_high(&self, high: &Self) -> Self {
        let mut out = self.clone();
        for b in high.iter() {
            out.push(b);
        }
        out
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.len).rev() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl FromStr for BitVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for (pos, c) in s.chars().enumerate() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(Error::Parse {
                        input: s.to_owned(),
                        reason: format!("unexpected character {other:?} at position {pos}"),
                    })
                }
            }
        }
        Ok(Self::from_bits_lsb_first(bits.into_iter().rev()))
    }
}

impl Serialize for BitVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn inner_product_mod2(x: &BitVector, y: &BitVector) -> Result<bool> {
    x.inner_product_mod2(y)
}

pub fn xor(x: &BitVector, y: &BitVector) -> Result<BitVector> {
    x.xor(y)
}

/// Per-agent PIV lengths together with their prefix-sum boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SegmentLayout {
    lengths: Vec<usize>,
    boundaries: Vec<usize>,
}

impl SegmentLayout {
    pub fn new(lengths: Vec<usize>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::Empty("segment layout needs at least one length"));
        }
        if lengths.contains(&0) {
            return Err(Error::Empty("segment lengths must be positive"));
        }
        let boundaries = lengths
            .iter()
            .scan(0, |acc, &l| {
                *acc += l;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            lengths,
            boundaries,
        })
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    /// `boundaries()[j]` is the sum of the first `j + 1` lengths; the last entry is the total.
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn total(&self) -> usize {
        *self.boundaries.last().expect("layout is nonempty")
    }

    pub fn segment_count(&self) -> usize {
        self.lengths.len()
    }

    pub fn range(&self, j: usize) -> Result<Range<usize>> {
        if j >= self.segment_count() {
            return Err(Error::SegmentOutOfRange {
                index: j,
                count: self.segment_count(),
            });
        }
        let start = if j == 0 { 0 } else { self.boundaries[j - 1] };
        Ok(start..self.boundaries[j])
    }

    /// Index of the segment containing bit `position`.
    pub fn segment_of(&self, position: usize) -> Option<usize> {
        self.boundaries.iter().position(|&b| position < b)
    }
}

/// Concatenates PIVs into the aggregated vector, `pivs[0]` in the least significant bits.
pub fn concat_aiv(pivs: &[BitVector]) -> Result<(BitVector, SegmentLayout)> {
    if pivs.is_empty() {
        return Err(Error::Empty("at least one PIV is required"));
    }
    let layout = SegmentLayout::new(pivs.iter().map(BitVector::len).collect())?;
    let aiv = pivs
        .iter()
        .fold(BitVector::default(), |acc, piv| acc.concat_high(piv));
    Ok((aiv, layout))
}

pub fn segment(v: &BitVector, layout: &SegmentLayout, j: usize) -> Result<BitVector> {
    if v.len() != layout.total() {
        return Err(Error::LengthMismatch {
            left: v.len(),
            right: layout.total(),
        });
    }
    Ok(v.slice(layout.range(j)?))
}

/// Counts the `x` in B^m with `c·x = 0` and with `c·x = 1`, by exhaustive enumeration.
pub fn cip_census(c: &BitVector) -> Result<(u64, u64)> {
    let m = c.len();
    if m > CENSUS_MAX_BITS {
        return Err(Error::CensusTooLarge {
            bits: m,
            cap: CENSUS_MAX_BITS,
        });
    }
    let mask = c.to_u64().expect("census length fits in a word");
    let ones = (0u64..1 << m)
        .filter(|x| (x & mask).count_ones() % 2 == 1)
        .count() as u64;
    Ok(((1u64 << m) - ones, ones))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bv(s: &str) -> BitVector {
        s.parse().unwrap()
    }

    #[test]
    fn parse_is_msb_first() {
        let v = bv("101");
        assert!(v.get(0));
        assert!(!v.get(1));
        assert!(v.get(2));
        assert_eq!(v.to_u64(), Some(5));
        assert_eq!(v.to_string(), "101");
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(matches!("10a".parse::<BitVector>(), Err(Error::Parse { .. })));
    }

    #[test]
    fn inner_products() {
        assert!(!inner_product_mod2(&bv("000000"), &bv("101010")).unwrap());
        assert!(inner_product_mod2(&bv("101010"), &bv("101010")).unwrap());
        // 100111 has four ones, so its product with the all-ones vector is even.
        assert!(!inner_product_mod2(&bv("111111"), &bv("100111")).unwrap());
        let naive = |x: &str, y: &str| x.bytes().zip(y.bytes()).filter(|&(a, b)| a == b'1' && b == b'1').count() % 2 == 1;
        for (x, y) in [("000000", "101010"), ("101010", "101010"), ("111111", "100111"), ("110", "011")] {
            assert_eq!(inner_product_mod2(&bv(x), &bv(y)).unwrap(), naive(x, y));
        }
        assert_eq!(
            inner_product_mod2(&bv("1"), &bv("10")),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn xor_examples() {
        assert_eq!(xor(&bv("111"), &bv("111")).unwrap(), bv("000"));
        let c = xor(&xor(&bv("111"), &bv("111")).unwrap(), &bv("010")).unwrap();
        assert_eq!(c, bv("010"));
        let b = xor(&xor(&bv("111"), &bv("100")).unwrap(), &bv("110")).unwrap();
        assert_eq!(b, bv("101"));
        assert!(xor(&bv("11"), &bv("1")).is_err());
    }

    #[test]
    fn aiv_concatenation() {
        let (aiv, layout) = concat_aiv(&[bv("010"), bv("101")]).unwrap();
        assert_eq!(aiv, bv("101010"));
        assert_eq!(layout.lengths(), &[3, 3]);

        let (aiv, _) = concat_aiv(&[bv("1")]).unwrap();
        assert_eq!(aiv, bv("1"));

        let (aiv, layout) = concat_aiv(&[bv("11"), bv("0"), bv("101")]).unwrap();
        assert_eq!(aiv, bv("101011"));
        assert_eq!(layout.boundaries(), &[2, 3, 6]);

        assert!(concat_aiv(&[]).is_err());
        assert!(concat_aiv(&[bv("1"), BitVector::default()]).is_err());
    }

    #[test]
    fn segments() {
        let layout = SegmentLayout::new(vec![3, 3]).unwrap();
        assert_eq!(segment(&bv("111111"), &layout, 0).unwrap(), bv("111"));
        assert_eq!(segment(&bv("110010"), &layout, 1).unwrap(), bv("110"));
        assert_eq!(segment(&bv("101010"), &layout, 1).unwrap(), bv("101"));
        assert_eq!(segment(&bv("110010"), &layout, 0).unwrap(), bv("010"));
        assert!(matches!(
            segment(&bv("101010"), &layout, 2),
            Err(Error::SegmentOutOfRange { .. })
        ));
        assert!(segment(&bv("10101"), &layout, 0).is_err());
        assert_eq!(layout.segment_of(2), Some(0));
        assert_eq!(layout.segment_of(3), Some(1));
        assert_eq!(layout.segment_of(6), None);
    }

    #[test]
    fn census_examples() {
        assert_eq!(cip_census(&bv("0000")).unwrap(), (16, 0));
        assert_eq!(cip_census(&bv("0001")).unwrap(), (8, 8));
        assert_eq!(cip_census(&bv("1011")).unwrap(), (8, 8));
        assert_eq!(cip_census(&BitVector::default()).unwrap(), (1, 0));
        assert!(matches!(
            cip_census(&BitVector::zeros(25)),
            Err(Error::CensusTooLarge { .. })
        ));
    }

    #[test]
    fn long_vectors_span_words() {
        let mut v = BitVector::zeros(130);
        v.set(129, true);
        v.set(64, true);
        assert_eq!(v.count_ones(), 2);
        assert_eq!(v.to_u64(), None);
        let s = v.to_string();
        assert_eq!(s.len(), 130);
        assert_eq!(s.parse::<BitVector>().unwrap(), v);
        assert_eq!(v.slice(64..66), bv("01"));
    }

    fn pair(max: usize) -> impl Strategy<Value = (BitVector, BitVector)> {
        (0..=max).prop_flat_map(|len| {
            (
                prop::collection::vec(any::<bool>(), len),
                prop::collection::vec(any::<bool>(), len),
            )
                .prop_map(|(a, b)| {
                    (
                        BitVector::from_bits_lsb_first(a),
                        BitVector::from_bits_lsb_first(b),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn inner_product_symmetric((x, y) in pair(150)) {
            prop_assert_eq!(x.inner_product_mod2(&y).unwrap(), y.inner_product_mod2(&x).unwrap());
        }

        #[test]
        fn xor_group_laws((x, y) in pair(150), seed in any::<u64>()) {
            let z = BitVector::from_bits_lsb_first((0..x.len()).map(|i| (seed >> (i % 64)) & 1 == 1));
            prop_assert_eq!(x.xor(&y).unwrap(), y.xor(&x).unwrap());
            prop_assert_eq!(x.xor(&y).unwrap().xor(&z).unwrap(), x.xor(&y.xor(&z).unwrap()).unwrap());
            prop_assert!(x.xor(&x).unwrap().is_zero());
        }

        #[test]
        fn census_splits_evenly(len in 1usize..=16, raw in any::<u64>()) {
            let c = BitVector::from_u64(raw, len);
            let (zeros, ones) = cip_census(&c).unwrap();
            if c.is_zero() {
                prop_assert_eq!((zeros, ones), (1 << len, 0));
            } else {
                prop_assert_eq!((zeros, ones), (1 << (len - 1), 1 << (len - 1)));
            }
        }

        #[test]
        fn concat_then_segment_round_trips(
            pivs in prop::collection::vec(prop::collection::vec(any::<bool>(), 1..10), 1..7)
        ) {
            let pivs: Vec<BitVector> = pivs.into_iter().map(BitVector::from_bits_lsb_first).collect();
            let (aiv, layout) = concat_aiv(&pivs).unwrap();
            for (j, piv) in pivs.iter().enumerate() {
                prop_assert_eq!(&segment(&aiv, &layout, j).unwrap(), piv);
            }
        }

        #[test]
        fn text_round_trip(bits in prop::collection::vec(any::<bool>(), 0..200)) {
            let v = BitVector::from_bits_lsb_first(bits);
            prop_assert_eq!(v.to_string().parse::<BitVector>().unwrap(), v);
        }
    }
}
