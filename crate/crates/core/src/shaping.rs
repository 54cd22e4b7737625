//! Sphere shaping over short amplitude blocks, realised as a look-up table,
//! and the PAS framing that adds uniform sign bits.
//!
//! A codebook holds the `2^k` amplitude blocks of length `N` with the lowest
//! energy `sum(a_i^2)`, ordered by (energy, lexicographic tuple). The
//! information bits of a block are read as a big-endian integer that indexes
//! this list directly.

use crate::error::{invalid, Error, Result};

/// Largest `|levels|^N` accepted by [`SphereCodebook::build`]; the inverse
/// table is dense over all blocks.
pub const MAX_ENUMERATED_BLOCKS: usize = 1 << 24;

/// Positive odd amplitude levels of one PAM rail, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmplitudeAlphabet {
    levels: Vec<u16>,
}

impl AmplitudeAlphabet {
    pub fn new(levels: Vec<u16>) -> Result<Self> {
        if levels.is_empty() || !levels.len().is_power_of_two() {
            return Err(invalid(format!(
                "alphabet size must be a power of two, got {}",
                levels.len()
            )));
        }
        if levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(
                "alphabet levels must be positive and strictly increasing",
            ));
        }
        Ok(AmplitudeAlphabet { levels })
    }

    /// Amplitudes `{1, 3, ..., sqrt(M) - 1}` of square M-QAM.
    pub fn for_qam(order: u32) -> Result<Self> {
        let side = qam_side(order)?;
        if side < 4 {
            return Err(invalid(format!(
                "{order}-QAM has no amplitude degree of freedom"
            )));
        }
        Self::new((0..side / 2).map(|i| (2 * i + 1) as u16).collect())
    }

    pub fn levels(&self) -> &[u16] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn bits_per_amplitude(&self) -> usize {
        self.levels.len().trailing_zeros() as usize
    }

    /// Position of `amplitude` in the alphabet.
    pub fn index_of(&self, amplitude: u16) -> Option<usize> {
        self.levels.binary_search(&amplitude).ok()
    }
}

/// Number of PAM levels per rail of a square QAM.
pub(crate) fn qam_side(order: u32) -> Result<usize> {
    let side = (order as f64).sqrt().round() as u32;
    if order < 4 || side * side != order || !side.is_power_of_two() {
        return Err(invalid(format!(
            "{order}-QAM is not a square power-of-two QAM"
        )));
    }
    Ok(side as usize)
}

/// Minimum-energy amplitude blocks realising the distribution matcher LUT.
#[derive(Debug, Clone)]
pub struct SphereCodebook {
    alphabet: AmplitudeAlphabet,
    block_len: usize,
    k_bits: usize,
    /// `2^k_bits` blocks of `block_len` amplitudes, flattened.
    entries: Vec<u16>,
    /// Codebook index of every block (mixed-radix over level indices).
    inverse: Vec<Option<u32>>,
}

fn block_energy(block: &[u16]) -> u64 {
    block.iter().map(|&a| (a as u64) * (a as u64)).sum()
}

impl SphereCodebook {
    /// Enumerates all `|levels|^N` blocks and keeps the `2^k` lowest-energy
    /// ones, ties broken lexicographically.
    pub fn build(alphabet: AmplitudeAlphabet, block_len: usize, k_bits: usize) -> Result<Self> {
        if block_len == 0 {
            return Err(invalid("block length must be at least 1"));
        }
        let total = alphabet
            .len()
            .checked_pow(block_len as u32)
            .filter(|&t| t <= MAX_ENUMERATED_BLOCKS)
            .ok_or_else(|| invalid("alphabet^N is too large to enumerate"))?;
        if k_bits >= usize::BITS as usize || (1usize << k_bits) > total {
            return Err(invalid(format!(
                "2^{k_bits} blocks requested but only {total} exist"
            )));
        }
        let levels = alphabet.levels();
        let radix = alphabet.len();
        let mut blocks: Vec<Vec<u16>> = (0..total)
            .map(|mut code| {
                let mut b = vec![0u16; block_len];
                for slot in b.iter_mut().rev() {
                    *slot = levels[code % radix];
                    code /= radix;
                }
                b
            })
            .collect();
        blocks.sort_by(|a, b| block_energy(a).cmp(&block_energy(b)).then_with(|| a.cmp(b)));
        blocks.truncate(1 << k_bits);

        let mut inverse = vec![None; total];
        for (idx, b) in blocks.iter().enumerate() {
            let code = b.iter().fold(0usize, |acc, &a| {
                acc * radix + alphabet.index_of(a).unwrap()
            });
            inverse[code] = Some(idx as u32);
        }
        Ok(SphereCodebook {
            alphabet,
            block_len,
            k_bits,
            entries: blocks.concat(),
            inverse,
        })
    }

    pub fn alphabet(&self) -> &AmplitudeAlphabet {
        &self.alphabet
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn k_bits(&self) -> usize {
        self.k_bits
    }

    pub fn len(&self) -> usize {
        1 << self.k_bits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn entry(&self, index: usize) -> &[u16] {
        &self.entries[index * self.block_len..(index + 1) * self.block_len]
    }

    pub fn entries(&self) -> impl Iterator<Item = &[u16]> {
        self.entries.chunks_exact(self.block_len)
    }

    pub fn energy(&self, index: usize) -> u64 {
        block_energy(self.entry(index))
    }

    /// Mean block energy over the (uniformly used) entries.
    pub fn mean_block_energy(&self) -> f64 {
        let sum: u64 = self.entries().map(block_energy).sum();
        sum as f64 / self.len() as f64
    }

    /// Maps `k_bits` bits (big-endian) to an amplitude block.
    pub fn dm_encode(&self, bits: &[u8]) -> Result<&[u16]> {
        if bits.len() != self.k_bits {
            return Err(Error::LengthMismatch(format!(
                "distribution matcher takes {} bits, got {}",
                self.k_bits,
                bits.len()
            )));
        }
        Ok(self.entry(bits_to_index(bits)))
    }

    /// Index of `block` in the codebook; `Ok(None)` if the block is a valid
    /// word over the alphabet but not a codebook entry.
    pub fn index_of(&self, block: &[u16]) -> Result<Option<usize>> {
        if block.len() != self.block_len {
            return Err(Error::LengthMismatch(format!(
                "block has {} amplitudes, expected {}",
                block.len(),
                self.block_len
            )));
        }
        let radix = self.alphabet.len();
        let mut code = 0usize;
        for &a in block {
            let i = self
                .alphabet
                .index_of(a)
                .ok_or_else(|| invalid(format!("amplitude {a} is not in the alphabet")))?;
            code = code * radix + i;
        }
        Ok(self.inverse[code].map(|i| i as usize))
    }

    /// Inverse of [`SphereCodebook::dm_encode`].
    pub fn dm_decode(&self, block: &[u16]) -> Result<Option<Vec<u8>>> {
        Ok(self
            .index_of(block)?
            .map(|idx| index_to_bits(idx, self.k_bits)))
    }

    /// LUT sizes in bits: `(tx, rx)`. The TX table stores every entry, the RX
    /// table maps every possible block to its index.
    pub fn lut_size_bits(&self) -> (u64, u64) {
        let tx = (self.len() * self.block_len * self.alphabet.bits_per_amplitude()) as u64;
        let rx = (self.alphabet.len().pow(self.block_len as u32) * self.k_bits) as u64;
        (tx, rx)
    }

    /// Information bits per PAS frame: DM bits plus one sign bit per
    /// amplitude.
    pub fn frame_bits(&self) -> usize {
        self.k_bits + self.block_len
    }

    /// PAS rate in bit per 2D (two real dimensions).
    pub fn rate_per_2d(&self) -> f64 {
        2.0 * self.frame_bits() as f64 / self.block_len as f64
    }
}

pub(crate) fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter()
        .fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize)
}

pub(crate) fn index_to_bits(index: usize, n: usize) -> Vec<u8> {
    (0..n).rev().map(|i| ((index >> i) & 1) as u8).collect()
}

/// One PAS frame: DM bits, sign bits and the resulting signed amplitudes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PasFrame {
    pub dm_bits: Vec<u8>,
    pub sign_bits: Vec<u8>,
    /// Signed PAM values, `+a` for sign bit 0 and `-a` for sign bit 1.
    pub symbol: Vec<i16>,
}

impl PasFrame {
    pub fn amplitudes(&self) -> Vec<u16> {
        self.symbol.iter().map(|v| v.unsigned_abs()).collect()
    }
}

/// Splits `bits` into frames of `k_bits` DM bits followed by `N` sign bits.
pub fn pas_map(cb: &SphereCodebook, bits: &[u8]) -> Result<Vec<PasFrame>> {
    let frame = cb.frame_bits();
    if !bits.len().is_multiple_of(frame) {
        return Err(Error::LengthMismatch(format!(
            "{} bits is not a multiple of the {frame}-bit PAS frame",
            bits.len()
        )));
    }
    bits.chunks_exact(frame)
        .map(|chunk| {
            let (dm_bits, sign_bits) = chunk.split_at(cb.k_bits());
            let amps = cb.dm_encode(dm_bits)?;
            let symbol = amps
                .iter()
                .zip(sign_bits)
                .map(|(&a, &s)| if s & 1 == 0 { a as i16 } else { -(a as i16) })
                .collect();
            Ok(PasFrame {
                dm_bits: dm_bits.to_vec(),
                sign_bits: sign_bits.to_vec(),
                symbol,
            })
        })
        .collect()
}

/// Relative frequency of each alphabet level over all amplitudes in `frames`.
pub fn empirical_amplitude_distribution(
    alphabet: &AmplitudeAlphabet,
    frames: &[PasFrame],
) -> Result<Vec<f64>> {
    if frames.is_empty() {
        return Err(invalid("need at least one frame"));
    }
    let mut counts = vec![0usize; alphabet.len()];
    let mut total = 0usize;
    for f in frames {
        for a in f.amplitudes() {
            let i = alphabet
                .index_of(a)
                .ok_or_else(|| invalid(format!("amplitude {a} is not in the alphabet")))?;
            counts[i] += 1;
            total += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / total as f64)
        .collect())
}
