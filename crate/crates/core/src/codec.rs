//! Period-two encoders and decoders for the three channel strategies.
//!
//! Each channel use carries one `b`-bit payload per output component.
//!
//! * Strategy I quantizes every sample at `b` bits.
//! * Strategy II quantizes even samples at `2b` bits and sends the high
//!   half now and the low half at the following odd time.
//! * Strategy III quantizes even samples at `b+r` bits and odd samples at
//!   `b−r` bits; the odd payload carries the `r` leftover bits of the even
//!   sample above the coarse odd index.
//!
//! A nonzero `headroom` widens every quantizer by that many bits at the top
//! without changing its step, which turns saturation off for simulation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::{dequantize, lsb, msb, noise_covariance, quantize_index, DitherStream, QuantizerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    I,
    II,
    III,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::I, StrategyKind::II, StrategyKind::III];
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::I => "I",
            StrategyKind::II => "II",
            StrategyKind::III => "III",
        })
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "i" | "1" => Ok(StrategyKind::I),
            "II" | "ii" | "2" => Ok(StrategyKind::II),
            "III" | "iii" | "3" => Ok(StrategyKind::III),
            _ => Err(Error::Config(format!("unknown strategy '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Channel bits per transmission.
    pub bits: u32,
    /// Refinement bits moved from odd to even samples (Strategy III only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<u32>,
    pub bound: f64,
    #[serde(default)]
    pub headroom: u32,
}

/// Stand-in covariances of the effective measurement errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseLevels {
    /// Even-time error (and every error for Strategy I).
    pub even: f64,
    /// Fine error on the even sample, revealed at the odd time (II and III).
    pub refined: Option<f64>,
    /// Odd-sample error (Strategy III).
    pub odd: Option<f64>,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind, bits: u32, bound: f64) -> Self {
        Self {
            kind,
            bits,
            split: None,
            bound,
            headroom: 0,
        }
    }

    pub fn strategy_iii(bits: u32, split: u32, bound: f64) -> Self {
        Self {
            kind: StrategyKind::III,
            bits,
            split: Some(split),
            bound,
            headroom: 0,
        }
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self
    }

    pub fn with_headroom(mut self, headroom: u32) -> Self {
        self.headroom = headroom;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 {
            return Err(Error::Config("bits must be at least 1".into()));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(Error::Config(format!("bound {} must be positive", self.bound)));
        }
        let top = match self.kind {
            StrategyKind::I => self.bits,
            StrategyKind::II => 2 * self.bits,
            StrategyKind::III => match self.split {
                Some(r) if r >= 1 && r < self.bits => self.bits + r,
                Some(r) => {
                    return Err(Error::Config(format!(
                        "split r={r} must satisfy 1 <= r <= b-1 with b={}",
                        self.bits
                    )))
                }
                None => return Err(Error::Config("strategy III needs a split r".into())),
            },
        };
        if top + self.headroom > crate::quantizer::MAX_BITS {
            return Err(Error::Config(format!("{} total bits is too many", top + self.headroom)));
        }
        Ok(())
    }

    fn r(&self) -> u32 {
        self.split.unwrap_or(0)
    }

    fn spec(&self, bits: u32) -> QuantizerSpec {
        QuantizerSpec::with_headroom(bits, self.bound, self.headroom).expect("validated strategy configuration")
    }

    pub fn payload_bits(&self) -> u32 {
        self.bits + self.headroom
    }

    /// Quantizer applied to even samples (every sample for Strategy I).
    pub fn even_quantizer(&self) -> QuantizerSpec {
        match self.kind {
            StrategyKind::I => self.spec(self.bits),
            StrategyKind::II => self.spec(2 * self.bits),
            StrategyKind::III => self.spec(self.bits + self.r()),
        }
    }

    /// Quantizer applied to odd samples, if odd samples are quantized.
    pub fn odd_quantizer(&self) -> Option<QuantizerSpec> {
        match self.kind {
            StrategyKind::I => Some(self.spec(self.bits)),
            StrategyKind::II => None,
            StrategyKind::III => Some(self.spec(self.bits - self.r())),
        }
    }

    /// `b`-bit grid used for the undithered even-time reconstruction.
    pub fn coarse_quantizer(&self) -> QuantizerSpec {
        self.spec(self.bits)
    }

    pub fn noise_levels(&self) -> NoiseLevels {
        let s = |bits| noise_covariance(bits, self.bound);
        match self.kind {
            StrategyKind::I => NoiseLevels {
                even: s(self.bits),
                refined: None,
                odd: None,
            },
            StrategyKind::II => NoiseLevels {
                even: s(self.bits),
                refined: Some(s(2 * self.bits)),
                odd: None,
            },
            StrategyKind::III => NoiseLevels {
                even: s(self.bits),
                refined: Some(s(self.bits + self.r())),
                odd: Some(s(self.bits - self.r())),
            },
        }
    }

    /// Variance of the dither added at the transmitter, averaged over the
    /// two phases.
    pub fn dither_variance(&self) -> f64 {
        match self.odd_quantizer() {
            Some(odd) if self.kind == StrategyKind::III => {
                0.5 * (self.even_quantizer().error_variance() + odd.error_variance())
            }
            _ => self.even_quantizer().error_variance(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChannelMessage {
    pub t: u64,
    pub payload: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Encoded {
    pub msg: ChannelMessage,
    /// Quantizer input `y + d`, if a sample was quantized for this message.
    pub z: Option<f64>,
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReconstructionKind {
    /// Strategy I sample.
    Every,
    /// Undithered coarse even sample (II and III).
    CoarseEven,
    /// Strategy II: fine reconstruction of the previous even sample.
    RefinedEven,
    /// Strategy III: refined even sample in `p_prime`, odd sample in `p`.
    RefinedEvenAndOdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecodedMeasurement {
    pub t: u64,
    pub p: f64,
    pub p_prime: Option<f64>,
    pub kind: ReconstructionKind,
}

fn check_payload(cfg: &StrategyConfig, msg: &ChannelMessage) -> Result<()> {
    let max = (1u64 << cfg.payload_bits()) - 1;
    if msg.payload > max {
        return Err(Error::IndexOutOfRange {
            index: msg.payload,
            max,
        });
    }
    Ok(())
}

fn fits(cfg: &StrategyConfig, payload: u64) -> u64 {
    assert!(
        payload >> cfg.payload_bits() == 0,
        "payload {payload} exceeds {} bits",
        cfg.payload_bits()
    );
    payload
}

pub fn encode_i(cfg: &StrategyConfig, t: u64, y: f64, dither: f64) -> Encoded {
    let z = y + dither;
    let (i, saturated) = quantize_index(&cfg.even_quantizer(), z);
    Encoded {
        msg: ChannelMessage {
            t,
            payload: fits(cfg, i),
        },
        z: Some(z),
        saturated,
    }
}

pub fn decode_i(cfg: &StrategyConfig, msg: &ChannelMessage, dither: f64) -> Result<DecodedMeasurement> {
    check_payload(cfg, msg)?;
    Ok(DecodedMeasurement {
        t: msg.t,
        p: dequantize(&cfg.even_quantizer(), msg.payload)? - dither,
        p_prime: None,
        kind: ReconstructionKind::Every,
    })
}

/// Even-time message for II and III: the top `b` bits of the fine index.
/// Returns the message and the full fine index.
fn encode_even_fine(cfg: &StrategyConfig, t: u64, y: f64, dither: f64) -> (Encoded, u64) {
    let spec = cfg.even_quantizer();
    let z = y + dither;
    let (i, saturated) = quantize_index(&spec, z);
    let high = msb(i, spec.bits(), cfg.payload_bits()).expect("fine index wider than payload");
    let msg = ChannelMessage {
        t,
        payload: fits(cfg, high),
    };
    (
        Encoded {
            msg,
            z: Some(z),
            saturated,
        },
        i,
    )
}

/// Undithered `b`-bit reconstruction of an even message.
pub fn decode_even_coarse(cfg: &StrategyConfig, msg: &ChannelMessage) -> Result<DecodedMeasurement> {
    check_payload(cfg, msg)?;
    Ok(DecodedMeasurement {
        t: msg.t,
        p: dequantize(&cfg.coarse_quantizer(), msg.payload)?,
        p_prime: None,
        kind: ReconstructionKind::CoarseEven,
    })
}

/// Strategy II, both messages for the pair `(2k, 2k+1)` from `y_{2k}`.
pub fn encode_ii(cfg: &StrategyConfig, t_even: u64, y_even: f64, dither: f64) -> (Encoded, Encoded) {
    let (even, i) = encode_even_fine(cfg, t_even, y_even, dither);
    let low = lsb(i, cfg.bits).expect("bits within range");
    let odd = Encoded {
        msg: ChannelMessage {
            t: t_even + 1,
            payload: fits(cfg, low),
        },
        z: None,
        saturated: even.saturated,
    };
    (even, odd)
}

/// Strategy II odd-time reconstruction `p_{2k+1}` of `y_{2k}` at `2b` bits.
pub fn decode_ii_odd(
    cfg: &StrategyConfig,
    even: &ChannelMessage,
    odd: &ChannelMessage,
    dither: f64,
) -> Result<DecodedMeasurement> {
    check_payload(cfg, even)?;
    if odd.payload >> cfg.bits != 0 {
        return Err(Error::IndexOutOfRange {
            index: odd.payload,
            max: (1 << cfg.bits) - 1,
        });
    }
    let i = (even.payload << cfg.bits) | odd.payload;
    Ok(DecodedMeasurement {
        t: odd.t,
        p: dequantize(&cfg.even_quantizer(), i)? - dither,
        p_prime: None,
        kind: ReconstructionKind::RefinedEven,
    })
}

/// Strategy II: `(p_{2k}, p_{2k+1})`.
pub fn decode_ii(cfg: &StrategyConfig, even: &ChannelMessage, odd: &ChannelMessage, dither: f64) -> Result<(f64, f64)> {
    Ok((
        decode_even_coarse(cfg, even)?.p,
        decode_ii_odd(cfg, even, odd, dither)?.p,
    ))
}

/// Odd payload layout for Strategy III: refinement bits above the coarse
/// odd index.
pub fn pack_odd(refinement: u64, coarse: u64, coarse_bits: u32) -> u64 {
    (refinement << coarse_bits) | coarse
}

pub fn unpack_odd(payload: u64, coarse_bits: u32) -> (u64, u64) {
    (payload >> coarse_bits, payload & ((1u64 << coarse_bits) - 1))
}

/// Strategy III even time. Returns the message and the `r` refinement bits
/// held back for the next odd message.
pub fn encode_iii_even(cfg: &StrategyConfig, t: u64, y: f64, dither: f64) -> (Encoded, u64) {
    let (enc, i) = encode_even_fine(cfg, t, y, dither);
    (enc, lsb(i, cfg.r()).expect("split within range"))
}

pub fn encode_iii_odd(cfg: &StrategyConfig, t: u64, refinement: u64, y: f64, dither: f64) -> Encoded {
    let spec = cfg.odd_quantizer().expect("strategy III quantizes odd samples");
    let z = y + dither;
    let (j, saturated) = quantize_index(&spec, z);
    Encoded {
        msg: ChannelMessage {
            t,
            payload: fits(cfg, pack_odd(refinement, j, spec.bits())),
        },
        z: Some(z),
        saturated,
    }
}

pub fn encode_iii(
    cfg: &StrategyConfig,
    t_even: u64,
    y_even: f64,
    y_odd: f64,
    dither_even: f64,
    dither_odd: f64,
) -> (Encoded, Encoded) {
    let (even, refinement) = encode_iii_even(cfg, t_even, y_even, dither_even);
    let odd = encode_iii_odd(cfg, t_even + 1, refinement, y_odd, dither_odd);
    (even, odd)
}

/// Strategy III odd time: `p = p_{2k+1}` and `p_prime = p′_{2k}`.
pub fn decode_iii_odd(
    cfg: &StrategyConfig,
    even: &ChannelMessage,
    odd: &ChannelMessage,
    dither_even: f64,
    dither_odd: f64,
) -> Result<DecodedMeasurement> {
    check_payload(cfg, even)?;
    check_payload(cfg, odd)?;
    let fine = cfg.even_quantizer();
    let coarse_odd = cfg.odd_quantizer().expect("strategy III quantizes odd samples");
    let (refinement, j) = unpack_odd(odd.payload, coarse_odd.bits());
    let i = (even.payload << cfg.r()) | refinement;
    Ok(DecodedMeasurement {
        t: odd.t,
        p: dequantize(&coarse_odd, j)? - dither_odd,
        p_prime: Some(dequantize(&fine, i)? - dither_even),
        kind: ReconstructionKind::RefinedEvenAndOdd,
    })
}

/// Strategy III: `(p_{2k}, p′_{2k}, p_{2k+1})`.
pub fn decode_iii(
    cfg: &StrategyConfig,
    even: &ChannelMessage,
    odd: &ChannelMessage,
    dither_even: f64,
    dither_odd: f64,
) -> Result<(f64, f64, f64)> {
    let p_even = decode_even_coarse(cfg, even)?.p;
    let d = decode_iii_odd(cfg, even, odd, dither_even, dither_odd)?;
    Ok((p_even, d.p_prime.expect("set by decode_iii_odd"), d.p))
}

/// Per-output-component dither streams for one endpoint.
#[derive(Debug, Clone)]
struct DitherBank {
    even: Vec<DitherStream>,
    odd: Vec<DitherStream>,
}

impl DitherBank {
    fn new(cfg: &StrategyConfig, outputs: usize, seed: Option<u64>) -> Self {
        let make = |spec: QuantizerSpec, base: u64| -> Vec<DitherStream> {
            (0..outputs as u64)
                .map(|c| match seed {
                    Some(s) => DitherStream::new(spec.step(), s, base + 2 * c),
                    None => DitherStream::disabled(spec.step()),
                })
                .collect()
        };
        let even = make(cfg.even_quantizer(), 1);
        let odd = match (cfg.kind, cfg.odd_quantizer()) {
            (StrategyKind::III, Some(spec)) => make(spec, 2),
            _ => Vec::new(),
        };
        Self { even, odd }
    }
}

/// Transmitter side of the channel for a vector output. Output components
/// are quantized independently, one payload each.
#[derive(Debug, Clone)]
pub struct Transmitter {
    cfg: StrategyConfig,
    dither: DitherBank,
    pending: Vec<u64>,
    next_t: u64,
}

/// What the transmitter produced for one time step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transmission {
    pub messages: Vec<ChannelMessage>,
    /// Quantizer inputs `y + d`, empty when nothing was quantized.
    pub z: Vec<f64>,
    pub saturated: bool,
}

impl Transmitter {
    /// `seed = None` disables dither.
    pub fn new(cfg: StrategyConfig, outputs: usize, seed: Option<u64>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            dither: DitherBank::new(&cfg, outputs, seed),
            pending: vec![0; outputs],
            next_t: 0,
        })
    }

    pub fn transmit(&mut self, y: &[f64], out: &mut Transmission) -> Result<()> {
        if y.len() != self.pending.len() {
            return Err(Error::Dimension(format!(
                "transmitter built for {} outputs, got {}",
                self.pending.len(),
                y.len()
            )));
        }
        let t = self.next_t;
        self.next_t += 1;
        out.messages.clear();
        out.z.clear();
        out.saturated = false;
        let even = t.is_multiple_of(2);
        for (c, &yc) in y.iter().enumerate() {
            let enc = match (self.cfg.kind, even) {
                (StrategyKind::I, _) => encode_i(&self.cfg, t, yc, self.dither.even[c].next_dither()),
                (StrategyKind::II, true) => {
                    let (e, i) = encode_even_fine(&self.cfg, t, yc, self.dither.even[c].next_dither());
                    self.pending[c] = i;
                    e
                }
                (StrategyKind::II, false) => {
                    let low = lsb(self.pending[c], self.cfg.bits)?;
                    Encoded {
                        msg: ChannelMessage {
                            t,
                            payload: fits(&self.cfg, low),
                        },
                        z: None,
                        saturated: false,
                    }
                }
                (StrategyKind::III, true) => {
                    let (e, refinement) = encode_iii_even(&self.cfg, t, yc, self.dither.even[c].next_dither());
                    self.pending[c] = refinement;
                    e
                }
                (StrategyKind::III, false) => {
                    encode_iii_odd(&self.cfg, t, self.pending[c], yc, self.dither.odd[c].next_dither())
                }
            };
            out.messages.push(enc.msg);
            if let Some(z) = enc.z {
                out.z.push(z);
            }
            out.saturated |= enc.saturated;
        }
        Ok(())
    }
}

/// Receiver side. Regenerates the transmitter's dither from the shared seed.
#[derive(Debug, Clone)]
pub struct Receiver {
    cfg: StrategyConfig,
    dither: DitherBank,
    held_msg: Vec<ChannelMessage>,
    held_dither: Vec<f64>,
}

/// Reconstructions for one time step, one entry per output component.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reception {
    pub t: u64,
    pub p: Vec<f64>,
    /// Strategy III refined even sample at odd times.
    pub p_prime: Vec<f64>,
}

impl Receiver {
    pub fn new(cfg: StrategyConfig, outputs: usize, seed: Option<u64>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            dither: DitherBank::new(&cfg, outputs, seed),
            held_msg: vec![ChannelMessage { t: 0, payload: 0 }; outputs],
            held_dither: vec![0.0; outputs],
        })
    }

    pub fn receive(&mut self, messages: &[ChannelMessage], out: &mut Reception) -> Result<()> {
        if messages.len() != self.held_msg.len() {
            return Err(Error::Dimension("message count does not match outputs".into()));
        }
        out.p.clear();
        out.p_prime.clear();
        out.t = messages.first().map_or(0, |m| m.t);
        let even = out.t.is_multiple_of(2);
        for (c, msg) in messages.iter().enumerate() {
            match (self.cfg.kind, even) {
                (StrategyKind::I, _) => {
                    let d = self.dither.even[c].next_dither();
                    out.p.push(decode_i(&self.cfg, msg, d)?.p);
                }
                (StrategyKind::II | StrategyKind::III, true) => {
                    self.held_msg[c] = *msg;
                    self.held_dither[c] = self.dither.even[c].next_dither();
                    out.p.push(decode_even_coarse(&self.cfg, msg)?.p);
                }
                (StrategyKind::II, false) => {
                    self.check_pair(c, msg)?;
                    let d = decode_ii_odd(&self.cfg, &self.held_msg[c], msg, self.held_dither[c])?;
                    out.p.push(d.p);
                }
                (StrategyKind::III, false) => {
                    self.check_pair(c, msg)?;
                    let d_odd = self.dither.odd[c].next_dither();
                    let d = decode_iii_odd(&self.cfg, &self.held_msg[c], msg, self.held_dither[c], d_odd)?;
                    out.p.push(d.p);
                    out.p_prime.push(d.p_prime.expect("set by decode_iii_odd"));
                }
            }
        }
        Ok(())
    }

    fn check_pair(&self, c: usize, odd: &ChannelMessage) -> Result<()> {
        if self.held_msg[c].t + 1 != odd.t {
            return Err(Error::Parity { expected: "even" });
        }
        Ok(())
    }
}
