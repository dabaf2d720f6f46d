//! Uniform midrise quantizer with saturation and subtractive dither.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported resolution; indices live in a `u64`.
pub const MAX_BITS: u32 = 62;

/// `2^bits` levels `−ζ + Δ(i + ½)` with `Δ = ζ / 2^(bits−1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    bits: u32,
    bound: f64,
    step: f64,
}

impl QuantizerSpec {
    pub fn new(bits: u32, bound: f64) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::Config(format!(
                "quantizer resolution {bits} not in 1..={MAX_BITS}"
            )));
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::Config(format!("quantizer bound {bound} must be positive")));
        }
        Ok(Self {
            bits,
            bound,
            step: bound / (1u64 << (bits - 1)) as f64,
        })
    }

    /// Same step on a range widened by `2^headroom`, so that inputs up to
    /// `bound·2^headroom` pass without clamping.
    pub fn with_headroom(bits: u32, bound: f64, headroom: u32) -> Result<Self> {
        if headroom >= 64 {
            return Err(Error::Config(format!("headroom {headroom} too large")));
        }
        Self::new(bits + headroom, bound * (1u64 << headroom) as f64)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn levels(&self) -> u64 {
        1u64 << self.bits
    }

    pub fn max_index(&self) -> u64 {
        self.levels() - 1
    }

    /// Variance of the dither and of the dithered quantization error.
    pub fn error_variance(&self) -> f64 {
        self.step * self.step / 12.0
    }
}

/// Index of the cell containing `x`, clamped to the extreme cells.
#[inline]
pub fn quantize_index(spec: &QuantizerSpec, x: f64) -> (u64, bool) {
    let raw = ((x + spec.bound) / spec.step).floor();
    let max = spec.max_index();
    if raw < 0.0 {
        (0, true)
    } else if raw > max as f64 {
        (max, true)
    } else {
        (raw as u64, false)
    }
}

#[inline]
pub fn dequantize(spec: &QuantizerSpec, index: u64) -> Result<f64> {
    if index > spec.max_index() {
        return Err(Error::IndexOutOfRange {
            index,
            max: spec.max_index(),
        });
    }
    Ok(level(spec, index))
}

#[inline]
pub(crate) fn level(spec: &QuantizerSpec, index: u64) -> f64 {
    -spec.bound + spec.step * (index as f64 + 0.5)
}

/// `Q(x + d) − d` together with the saturation flag.
#[inline]
pub fn dithered_quantize(spec: &QuantizerSpec, x: f64, d: f64) -> (f64, bool) {
    let (i, sat) = quantize_index(spec, x + d);
    (level(spec, i) - d, sat)
}

/// Top `n` of `total_bits` bits.
pub fn msb(index: u64, total_bits: u32, n: u32) -> Result<u64> {
    if n > total_bits || total_bits > 64 {
        return Err(Error::BitRange(format!("msb of {n} bits from a {total_bits}-bit word")));
    }
    if total_bits < 64 && index >> total_bits != 0 {
        return Err(Error::BitRange(format!("index {index} exceeds {total_bits} bits")));
    }
    Ok(if n == 0 { 0 } else { index >> (total_bits - n) })
}

/// Bottom `n` bits.
pub fn lsb(index: u64, n: u32) -> Result<u64> {
    match n {
        0 => Ok(0),
        1..=63 => Ok(index & ((1u64 << n) - 1)),
        64 => Ok(index),
        _ => Err(Error::BitRange(format!("lsb of {n} bits"))),
    }
}

/// `ζ² / (3·2^(2b))`, the variance of the `b`-bit dithered quantization
/// error.
pub fn noise_covariance(bits: u32, bound: f64) -> f64 {
    bound * bound / (3.0 * 4f64.powi(bits as i32))
}

/// Uniform dither on `[−Δ/2, Δ/2]` from a seeded stream. Clones continue
/// identically, which is how the transmitter and receiver stay in step.
#[derive(Debug, Clone)]
pub struct DitherStream {
    step: f64,
    seed: u64,
    cursor: u64,
    rng: Option<ChaCha8Rng>,
}

impl DitherStream {
    pub fn new(step: f64, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            step,
            seed,
            cursor: 0,
            rng: Some(rng),
        }
    }

    /// Always yields zero.
    pub fn disabled(step: f64) -> Self {
        Self {
            step,
            seed: 0,
            cursor: 0,
            rng: None,
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    #[inline]
    pub fn next_dither(&mut self) -> f64 {
        self.cursor += 1;
        match &mut self.rng {
            Some(rng) => self.step * (rng.random::<f64>() - 0.5),
            None => 0.0,
        }
    }
}
