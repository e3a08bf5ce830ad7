//! Fixed-point number formats and per-layer quantization schemes.
//!
//! A format holds `int_bits` for the integer part and `frac_bits` for the
//! fraction part; signed formats carry an implicit sign bit on top of the
//! data bits. Weight formats are signed (negative weights are mapped onto a
//! differential column pair by the device layer), activation formats after
//! ReLU are unsigned.
//!
//! Text notation used in configs and logs: `s1.2` / `u0.6`.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedPointFormat {
    int_bits: u32,
    frac_bits: u32,
    signed: bool,
}

impl FixedPointFormat {
    /// Builds a format; rejects the degenerate zero-data-bit case.
    pub fn new(int_bits: u32, frac_bits: u32, signed: bool) -> Result<Self> {
        if int_bits + frac_bits == 0 {
            return Err(Error::InvalidFormat {
                int_bits,
                frac_bits,
            });
        }
        Ok(FixedPointFormat {
            int_bits,
            frac_bits,
            signed,
        })
    }

    pub fn signed(int_bits: u32, frac_bits: u32) -> Result<Self> {
        Self::new(int_bits, frac_bits, true)
    }

    pub fn unsigned(int_bits: u32, frac_bits: u32) -> Result<Self> {
        Self::new(int_bits, frac_bits, false)
    }

    pub fn int_bits(&self) -> u32 {
        self.int_bits
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    /// Quantization step: 2^(-frac_bits).
    pub fn step(&self) -> f64 {
        (0.5f64).powi(self.frac_bits as i32)
    }

    /// Largest representable value: 2^int_bits - step.
    pub fn max_value(&self) -> f64 {
        (2.0f64).powi(self.int_bits as i32) - self.step()
    }

    /// Smallest representable value: -2^int_bits if signed, else 0.
    pub fn min_value(&self) -> f64 {
        if self.signed {
            -((2.0f64).powi(self.int_bits as i32))
        } else {
            0.0
        }
    }

    /// (min, max, step) of the representable set.
    pub fn representable_set(&self) -> (f64, f64, f64) {
        (self.min_value(), self.max_value(), self.step())
    }

    /// Total bit count the device mapper slices: data bits plus the sign bit.
    ///
    /// The extra signed bit also covers the asymmetric minimum: |min| is
    /// 2^(int+frac) in code units, one past the largest positive code.
    pub fn weight_data_bits(&self) -> u32 {
        self.int_bits + self.frac_bits + u32::from(self.signed)
    }

    /// Largest magnitude code a differential column can hold.
    ///
    /// Positive column: 2^(int+frac) - 1. Negative column additionally
    /// reaches 2^(int+frac) for the asymmetric minimum.
    pub fn max_magnitude_code(&self) -> u64 {
        let data = 1u64 << (self.int_bits + self.frac_bits);
        if self.signed {
            data
        } else {
            data - 1
        }
    }

    /// Nearest representable value, round-half-away-from-zero, saturating.
    pub fn quantize_value(&self, x: f64) -> f64 {
        debug_assert!(x.is_finite());
        let step = self.step();
        // f64::round ties away from zero, which is exactly our rule.
        let q = (x / step).round() * step;
        q.clamp(self.min_value(), self.max_value())
    }
}

/// Elementwise quantization; shape preserved.
pub fn quantize_tensor(t: &Tensor, fmt: FixedPointFormat) -> Tensor {
    t.map(|x| fmt.quantize_value(x))
}

impl fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.signed { 's' } else { 'u' };
        write!(f, "{}{}.{}", s, self.int_bits, self.frac_bits)
    }
}

impl FromStr for FixedPointFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad fixed-point format '{s}', expected sM.N or uM.N"));
        let (sign, rest) = match s.as_bytes().first() {
            Some(b's') => (true, &s[1..]),
            Some(b'u') => (false, &s[1..]),
            _ => return Err(bad()),
        };
        let (m, n) = rest.split_once('.').ok_or_else(bad)?;
        let int_bits: u32 = m.parse().map_err(|_| bad())?;
        let frac_bits: u32 = n.parse().map_err(|_| bad())?;
        FixedPointFormat::new(int_bits, frac_bits, sign)
    }
}

impl Serialize for FixedPointFormat {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FixedPointFormat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Per-layer fixed-point formats for activations (`qa`) and weights (`qw`).
///
/// One entry per searched layer; the trailing classifier layer of a built
/// network reuses the last entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizationScheme {
    pub qa: Vec<FixedPointFormat>,
    pub qw: Vec<FixedPointFormat>,
}

impl QuantizationScheme {
    pub fn new(qa: Vec<FixedPointFormat>, qw: Vec<FixedPointFormat>) -> Result<Self> {
        if qa.len() != qw.len() {
            return Err(Error::InvalidConfig(format!(
                "quantization scheme has {} activation formats but {} weight formats",
                qa.len(),
                qw.len()
            )));
        }
        Ok(QuantizationScheme { qa, qw })
    }

    /// Same format pair for every layer.
    pub fn uniform(qa: FixedPointFormat, qw: FixedPointFormat, layers: usize) -> Self {
        QuantizationScheme {
            qa: vec![qa; layers],
            qw: vec![qw; layers],
        }
    }

    pub fn layers(&self) -> usize {
        self.qa.len()
    }

    /// Format pair for parametric layer `i` of a network with
    /// `parametric_layers` layers; the classifier layer past the searched
    /// ones inherits the last entry.
    pub fn layer_formats(&self, i: usize) -> (FixedPointFormat, FixedPointFormat) {
        let idx = i.min(self.qa.len() - 1);
        (self.qa[idx], self.qw[idx])
    }
}
