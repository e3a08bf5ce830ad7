//! Device library: multi-level cells, bit-slicing of quantized weights, and
//! conversion of conductance-domain variation into weight-domain noise.
//!
//! A weight magnitude code is split into base-2^bits_per_cell digits, one
//! cell per digit, most significant slice first; shift-and-add reassembly at
//! the array periphery recovers the code exactly. Signed weights occupy a
//! differential column pair (one column per sign), so the sign bit costs a
//! second column rather than a cell level.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::{FixedPointFormat, QuantizationScheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceModel {
    pub name: String,
    /// Bits stored per cell (levels = 2^bits_per_cell).
    pub bits_per_cell: u32,
    pub current_min_ua: f64,
    pub current_max_ua: f64,
    /// Std-dev of the per-level Gaussian current variation, in nA.
    pub level_sigma_na: f64,
}

impl DeviceModel {
    pub fn new(
        name: &str,
        bits_per_cell: u32,
        current_min_ua: f64,
        current_max_ua: f64,
        level_sigma_na: f64,
    ) -> Result<Self> {
        let d = DeviceModel {
            name: name.to_string(),
            bits_per_cell,
            current_min_ua,
            current_max_ua,
            level_sigma_na,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits_per_cell < 1 {
            return Err(Error::InvalidConfig(format!(
                "device {}: bits_per_cell must be >= 1",
                self.name
            )));
        }
        if !(self.current_max_ua > self.current_min_ua && self.current_min_ua >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "device {}: need current_max > current_min >= 0",
                self.name
            )));
        }
        if self.level_sigma_na < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "device {}: level_sigma_na must be >= 0",
                self.name
            )));
        }
        Ok(())
    }

    pub fn levels(&self) -> u64 {
        1u64 << self.bits_per_cell
    }

    /// Variation std-dev as a fraction of the full current swing.
    /// The reference device (800 nA over [0, 16 uA]) gives 0.05.
    pub fn relative_sigma(&self) -> f64 {
        (self.level_sigma_na / 1000.0) / (self.current_max_ua - self.current_min_ua)
    }

    /// One Gaussian draw of per-cell current variation, in nA.
    pub fn sample_cell_variation<R: Rng>(&self, rng: &mut R) -> f64 {
        Normal::new(0.0, self.level_sigma_na).unwrap().sample(rng)
    }
}

/// Cells needed to hold a weight of `weight_bits` bits on this device.
pub fn devices_per_weight(weight_bits: u32, device: &DeviceModel) -> u32 {
    assert!(weight_bits >= 1, "weight_bits must be >= 1");
    weight_bits.div_ceil(device.bits_per_cell)
}

/// Splits a magnitude code into per-cell digits, most significant first.
pub fn slice_weight(w_code: u64, fmt: FixedPointFormat, device: &DeviceModel) -> Result<Vec<u64>> {
    let max = fmt.max_magnitude_code();
    if w_code > max {
        return Err(Error::CodeOutOfRange { code: w_code, max });
    }
    let n = devices_per_weight(fmt.weight_data_bits(), device) as usize;
    let base = device.levels();
    let mut slices = vec![0u64; n];
    let mut rest = w_code;
    for s in 0..n {
        slices[n - 1 - s] = rest % base;
        rest /= base;
    }
    debug_assert_eq!(rest, 0);
    Ok(slices)
}

/// Shift-and-add reassembly of `slice_weight` output.
pub fn reassemble(slices: &[u64], device: &DeviceModel) -> u64 {
    slices
        .iter()
        .fold(0u64, |acc, &d| (acc << device.bits_per_cell) | d)
}

/// Digit cap of slice `s` (significance order, 0 = least significant): a cell
/// never needs to distinguish more values than the code range leaves for it.
fn slice_digit_cap(fmt: FixedPointFormat, device: &DeviceModel, s: u32) -> u64 {
    let cap = fmt.max_magnitude_code() >> (s * device.bits_per_cell);
    cap.min(device.levels() - 1).max(1)
}

/// Weight-domain noise std-dev for one weight of format `fmt` on `device`.
///
/// Model: a cell storing digits in [0, D] spreads them over the full current
/// range, so a current error of one level-sigma reads back as a digit error
/// of relative_sigma * D. Slice s scales by 2^(s*bits_per_cell) in the
/// reassembled code, and codes convert to weights through the format step.
/// Signed weights double the variance: both differential columns are
/// perturbed independently.
pub fn weight_noise_sigma(device: &DeviceModel, fmt: FixedPointFormat) -> f64 {
    let rho = device.relative_sigma();
    let n = devices_per_weight(fmt.weight_data_bits(), device);
    let mut var_code = 0.0;
    for s in 0..n {
        let d = slice_digit_cap(fmt, device, s) as f64;
        let scale = (device.levels() as f64).powi(s as i32);
        var_code += (d * scale).powi(2);
    }
    let columns = if fmt.is_signed() { 2.0 } else { 1.0 };
    fmt.step() * rho * (var_code * columns).sqrt()
}

/// Per-parametric-layer weight noise sigmas for a scheme (the classifier
/// layer past the searched ones inherits the last format).
pub fn weight_noise_sigmas(
    device: &DeviceModel,
    scheme: &QuantizationScheme,
    parametric_layers: usize,
) -> Vec<f64> {
    (0..parametric_layers)
        .map(|i| weight_noise_sigma(device, scheme.layer_formats(i).1))
        .collect()
}

/// The searchable device set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceLibrary {
    devices: Vec<DeviceModel>,
}

impl DeviceLibrary {
    pub fn new(devices: Vec<DeviceModel>) -> Result<Self> {
        if devices.is_empty() {
            return Err(Error::InvalidConfig("device library is empty".into()));
        }
        for (i, d) in devices.iter().enumerate() {
            d.validate()?;
            if devices[..i].iter().any(|e| e.name == d.name) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate device name '{}'",
                    d.name
                )));
            }
        }
        Ok(DeviceLibrary { devices })
    }

    /// 4-bit ReRAM (0-16 uA, 800 nA level sigma) plus a binary device with
    /// the same relative sigma.
    pub fn defaults() -> Self {
        DeviceLibrary::new(vec![
            DeviceModel::new("reram4", 4, 0.0, 16.0, 800.0).unwrap(),
            DeviceModel::new("binary1", 1, 0.0, 16.0, 800.0).unwrap(),
        ])
        .unwrap()
    }

    pub fn devices(&self) -> &[DeviceModel] {
        &self.devices
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn get(&self, index: usize) -> &DeviceModel {
        &self.devices[index]
    }

    pub fn by_name(&self, name: &str) -> Option<&DeviceModel> {
        self.devices.iter().find(|d| d.name == name)
    }
}
