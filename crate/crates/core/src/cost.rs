//! Weight-stationary mapping of network layers onto the tile/PE/synaptic
//! array hierarchy and closed-form estimation of latency, energy, area, EDP,
//! TOPs, and TOPs/W.
//!
//! The model is an activity-count model: every used cell, DAC row driver,
//! column ADC, and shift-add unit is charged a per-unit energy each streamed
//! input bit, and buffer/NoC traffic is charged per byte. Inputs stream
//! bit-serially over `ceil(act_bits / dac_bits)` cycles per output position;
//! layers run sequentially (no inter-layer pipelining).

use serde::{Deserialize, Serialize};

use crate::device::{devices_per_weight, DeviceModel};
use crate::error::{Error, Result};
use crate::nn::{LayerKind, Network};
use crate::quant::{FixedPointFormat, QuantizationScheme};

/// Fallback deployment precision for full-precision searches: 16-bit signed
/// weights, 15-bit unsigned activations.
pub fn full_precision_formats() -> (FixedPointFormat, FixedPointFormat) {
    (
        FixedPointFormat::unsigned(3, 12).unwrap(),
        FixedPointFormat::signed(3, 12).unwrap(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynapticArray {
    pub rows: usize,
    pub cols: usize,
}

impl Default for SynapticArray {
    fn default() -> Self {
        SynapticArray { rows: 64, cols: 64 }
    }
}

impl SynapticArray {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 1 || self.cols < 1 {
            return Err(Error::InvalidConfig("array dimensions must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-unit cost coefficients (area in um^2, energy in pJ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitCosts {
    pub cell: f64,
    pub adc: f64,
    pub dac: f64,
    pub shift_add: f64,
    pub buffer_byte: f64,
    pub noc_hop: f64,
}

impl UnitCosts {
    fn validate(&self, what: &str) -> Result<()> {
        let vals = [
            self.cell,
            self.adc,
            self.dac,
            self.shift_add,
            self.buffer_byte,
            self.noc_hop,
        ];
        if vals.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("{what} coefficients must be positive")));
        }
        Ok(())
    }

    fn scale(&self, k: f64) -> UnitCosts {
        UnitCosts {
            cell: self.cell * k,
            adc: self.adc * k,
            dac: self.dac * k,
            shift_add: self.shift_add * k,
            buffer_byte: self.buffer_byte * k,
            noc_hop: self.noc_hop * k,
        }
    }
}

/// Technology assumptions plus per-unit cost coefficients.
///
/// Coefficients are reference values at 32 nm, 0.5 V memory rail, 1.1 V
/// chip rail, and a 4-bit ADC. Areas scale with (node/32)^2; cell and DAC
/// energies scale with the memory-rail voltage squared, the digital units
/// with the chip rail squared, and ADC energy doubles per extra ADC bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TechnologyParams {
    pub node_nm: f64,
    pub clock_ghz: f64,
    pub mem_voltage_v: f64,
    pub chip_voltage_v: f64,
    pub adc_bits: u32,
    pub dac_bits: u32,
    pub area_um2: UnitCosts,
    pub energy_pj: UnitCosts,
}

impl Default for TechnologyParams {
    fn default() -> Self {
        TechnologyParams::calibrated()
    }
}

const REF_NODE_NM: f64 = 32.0;
const REF_MEM_V: f64 = 0.5;
const REF_CHIP_V: f64 = 1.1;
const REF_ADC_BITS: u32 = 4;

impl TechnologyParams {
    /// Default preset: 32 nm, 1 GHz, 4-bit ADCs, 1-bit (bit-serial) DACs,
    /// with coefficients tuned so mid-size designs land in a realistic
    /// order of magnitude. ADC area/energy are amortized per column.
    pub fn calibrated() -> Self {
        TechnologyParams {
            node_nm: 32.0,
            clock_ghz: 1.0,
            mem_voltage_v: 0.5,
            chip_voltage_v: 1.1,
            adc_bits: 4,
            dac_bits: 1,
            area_um2: UnitCosts {
                cell: 0.05,
                adc: 60.0,
                dac: 10.0,
                shift_add: 50.0,
                buffer_byte: 0.5,
                noc_hop: 5000.0,
            },
            energy_pj: UnitCosts {
                cell: 0.001,
                adc: 10.0,
                dac: 0.5,
                shift_add: 0.2,
                buffer_byte: 1.0,
                noc_hop: 2.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.node_nm,
            self.clock_ghz,
            self.mem_voltage_v,
            self.chip_voltage_v,
        ];
        if pos.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || self.adc_bits < 1 || self.dac_bits < 1 {
            return Err(Error::InvalidConfig("technology parameters must be positive".into()));
        }
        self.area_um2.validate("area")?;
        self.energy_pj.validate("energy")
    }

    fn effective_area(&self) -> UnitCosts {
        self.area_um2.scale((self.node_nm / REF_NODE_NM).powi(2))
    }

    fn effective_energy(&self) -> UnitCosts {
        let mem = (self.mem_voltage_v / REF_MEM_V).powi(2);
        let chip = (self.chip_voltage_v / REF_CHIP_V).powi(2);
        let adc_res = (2.0f64).powi(self.adc_bits as i32 - REF_ADC_BITS as i32);
        let e = &self.energy_pj;
        UnitCosts {
            cell: e.cell * mem,
            dac: e.dac * mem,
            adc: e.adc * chip * adc_res,
            shift_add: e.shift_add * chip,
            buffer_byte: e.buffer_byte * chip,
            noc_hop: e.noc_hop * chip,
        }
    }

    /// Streamed bit-cycles needed for one input position.
    pub fn bit_cycles(&self, act_bits: u32) -> u64 {
        u64::from(act_bits.max(1).div_ceil(self.dac_bits))
    }
}

/// Placement of one layer on the synaptic arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerMapping {
    /// Array rows occupied: kernel footprint (conv) or fan-in (fc).
    pub rows_used: usize,
    /// Array columns occupied: outputs x devices-per-weight x differential
    /// factor.
    pub cols_used: usize,
    pub arrays_needed: usize,
    /// Output-pixel dot-product positions streamed through the arrays.
    pub input_positions: usize,
    pub input_elems: usize,
    pub output_elems: usize,
    pub macs: u64,
}

/// Maps one layer onto arrays: weights stay resident (weight-stationary),
/// activations stream in. Signed weight formats occupy differential column
/// pairs.
pub fn map_layer(
    kind: &LayerKind,
    in_shape: (usize, usize, usize),
    qw: FixedPointFormat,
    device: &DeviceModel,
    array: SynapticArray,
) -> LayerMapping {
    let (c, h, w) = in_shape;
    let dpw = devices_per_weight(qw.weight_data_bits(), device) as usize;
    let diff = if qw.is_signed() { 2 } else { 1 };
    let (rows, outputs, positions, output_elems, macs) = match *kind {
        LayerKind::Conv {
            filter_h,
            filter_w,
            num_filters,
            pool_after,
        } => {
            let positions = h * w;
            let (oh, ow) = if pool_after { (h / 2, w / 2) } else { (h, w) };
            (
                filter_h * filter_w * c,
                num_filters,
                positions,
                num_filters * oh * ow,
                (positions * filter_h * filter_w * c * num_filters) as u64,
            )
        }
        LayerKind::FullyConnected { neurons } => {
            let fan_in = c * h * w;
            (fan_in, neurons, 1, neurons, (fan_in * neurons) as u64)
        }
        LayerKind::Output { classes } => {
            let fan_in = c * h * w;
            (fan_in, classes, 1, classes, (fan_in * classes) as u64)
        }
    };
    let cols = outputs * dpw * diff;
    LayerMapping {
        rows_used: rows,
        cols_used: cols,
        arrays_needed: rows.div_ceil(array.rows) * cols.div_ceil(array.cols),
        input_positions: positions,
        input_elems: c * h * w,
        output_elems,
        macs,
    }
}

/// Per-layer format pair: the scheme entry, or the full-precision fallback.
fn layer_formats(quant: Option<&QuantizationScheme>, i: usize) -> (FixedPointFormat, FixedPointFormat) {
    match quant {
        Some(q) => q.layer_formats(i),
        None => full_precision_formats(),
    }
}

/// Mappings for every parametric layer of a network.
pub fn network_mappings(
    net: &Network,
    quant: Option<&QuantizationScheme>,
    device: &DeviceModel,
    array: SynapticArray,
) -> Vec<LayerMapping> {
    let shapes = net.layer_input_shapes();
    net.layers()
        .iter()
        .enumerate()
        .map(|(i, kind)| map_layer(kind, shapes[i], layer_formats(quant, i).1, device, array))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerMetrics {
    pub latency_ns: f64,
    pub energy_pj: f64,
    pub area_um2: f64,
}

/// Area of one array with its peripherals (per-column ADC share and
/// shift-add, per-row DAC).
fn array_area_um2(tech: &TechnologyParams, array: SynapticArray) -> f64 {
    let a = tech.effective_area();
    let (u, v) = (array.rows as f64, array.cols as f64);
    u * v * a.cell + v * a.adc + u * a.dac + v * a.shift_add
}

/// Closed-form latency/energy/area of one mapped layer.
pub fn estimate_layer_metrics(
    mapping: &LayerMapping,
    qa: FixedPointFormat,
    tech: &TechnologyParams,
    array: SynapticArray,
) -> LayerMetrics {
    let act_bits = qa.weight_data_bits();
    let bit_cycles = tech.bit_cycles(act_bits);
    let positions = mapping.input_positions as f64;
    let cycles = positions * bit_cycles as f64;
    let latency_ns = cycles / tech.clock_ghz;

    let e = tech.effective_energy();
    let rows = mapping.rows_used as f64;
    let cols = mapping.cols_used as f64;
    let streamed = positions * bit_cycles as f64;
    let bytes = ((mapping.input_elems + mapping.output_elems) * act_bits.div_ceil(8) as usize) as f64;
    let energy_pj = rows * cols * streamed * e.cell
        + rows * streamed * e.dac
        + cols * streamed * e.adc
        + cols * streamed * e.shift_add
        + bytes * e.buffer_byte
        + bytes * e.noc_hop;

    LayerMetrics {
        latency_ns,
        energy_pj,
        area_um2: mapping.arrays_needed as f64 * array_area_um2(tech, array),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileConfig {
    pub m: usize,
    pub n: usize,
    pub global_buffer_bytes: usize,
    pub link_bandwidth_bits_per_cycle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeConfig {
    pub p: usize,
    pub q: usize,
    pub buffer_bytes: usize,
    pub bandwidth_bits_per_cycle: usize,
}

/// The chip hierarchy: an MxN tile array of PxQ PE arrays, one synaptic
/// array per PE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipDesign {
    pub tiles: TileConfig,
    pub pes: PeConfig,
    pub array: SynapticArray,
    pub device: DeviceModel,
}

impl ChipDesign {
    pub fn array_capacity(&self) -> usize {
        self.tiles.m * self.tiles.n * self.pes.p * self.pes.q
    }
}

const HIER_GRID: [usize; 6] = [1, 2, 4, 8, 16, 32];

/// Smallest pair (a, b) from the grid with a*b >= need, preferring smaller
/// products, then squarer shapes, then smaller first dimension.
fn min_grid_cover(need: usize) -> (usize, usize) {
    let mut best: Option<(usize, usize)> = None;
    let mut best_key = (usize::MAX, usize::MAX, usize::MAX);
    for &a in &HIER_GRID {
        for &b in &HIER_GRID {
            if a * b >= need {
                let key = (a * b, a.abs_diff(b), a);
                if key < best_key {
                    best_key = key;
                    best = Some((a, b));
                }
            }
        }
    }
    best.expect("grid covers need (capped by caller)")
}

/// Picks the smallest-area hierarchy on the candidate grid whose array
/// capacity covers the network, sizing buffers to the largest inter-layer
/// feature map and link bandwidth to the peak per-cycle activation traffic.
pub fn optimize_circuit(
    net: &Network,
    quant: Option<&QuantizationScheme>,
    device: &DeviceModel,
    tech: &TechnologyParams,
    array: SynapticArray,
) -> Result<ChipDesign> {
    array.validate()?;
    tech.validate()?;
    let mappings = network_mappings(net, quant, device, array);
    let demand: usize = mappings.iter().map(|m| m.arrays_needed).sum();
    if demand == 0 {
        return Err(Error::EmptyArchitecture);
    }
    let max_cap = HIER_GRID.last().unwrap().pow(4);
    if demand > max_cap {
        return Err(Error::InvalidConfig(format!(
            "network needs {demand} arrays, above the {max_cap} the hierarchy grid reaches"
        )));
    }

    let mut global_buffer = 0usize;
    let mut pe_buffer = 0usize;
    let mut bandwidth = 0usize;
    for (i, m) in mappings.iter().enumerate() {
        let (qa, _) = layer_formats(quant, i);
        let bytes_per = qa.weight_data_bits().div_ceil(8) as usize;
        global_buffer = global_buffer.max((m.input_elems + m.output_elems) * bytes_per);
        pe_buffer = pe_buffer.max(m.rows_used * bytes_per);
        bandwidth = bandwidth.max(m.rows_used * tech.dac_bits as usize);
    }

    // For each PE grid option, the cheapest covering tile grid; keep the
    // smallest-area design, tie-broken toward fewer tiles then smaller PQ.
    let mut best: Option<(ChipDesign, (f64, usize, usize, usize))> = None;
    for &p in &HIER_GRID {
        for &q in &HIER_GRID {
            let per_tile = p * q;
            let tiles_needed = demand.div_ceil(per_tile);
            if tiles_needed > HIER_GRID.last().unwrap().pow(2) {
                continue;
            }
            let (m, n) = min_grid_cover(tiles_needed);
            let design = ChipDesign {
                tiles: TileConfig {
                    m,
                    n,
                    global_buffer_bytes: global_buffer,
                    link_bandwidth_bits_per_cycle: bandwidth,
                },
                pes: PeConfig {
                    p,
                    q,
                    buffer_bytes: pe_buffer,
                    bandwidth_bits_per_cycle: bandwidth,
                },
                array,
                device: device.clone(),
            };
            let area = chip_area_um2(&design, tech);
            let key = (area, m * n, per_tile, p);
            if best.as_ref().is_none_or(|(_, k)| key < *k) {
                best = Some((design, key));
            }
        }
    }
    Ok(best.expect("grid covers demand").0)
}

/// Physical chip area: all allocated arrays, PE and global buffers, and one
/// NoC router per tile.
pub fn chip_area_um2(design: &ChipDesign, tech: &TechnologyParams) -> f64 {
    let a = tech.effective_area();
    let arrays = design.array_capacity() as f64;
    let tiles = (design.tiles.m * design.tiles.n) as f64;
    arrays * array_area_um2(tech, design.array)
        + (design.tiles.global_buffer_bytes as f64 + arrays * design.pes.buffer_bytes as f64) * a.buffer_byte
        + tiles * a.noc_hop
}

/// Full chip metrics for a network deployed on a design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareMetrics {
    pub latency_ns: f64,
    pub energy_pj: f64,
    pub area_um2: f64,
    pub edp_pj_ns: f64,
    pub throughput_tops: f64,
    pub efficiency_tops_per_w: f64,
}

/// Sequentially accumulated layer latencies and energies plus the design's
/// physical area. Throughput counts 2 ops per MAC.
pub fn estimate_chip_metrics(
    design: &ChipDesign,
    net: &Network,
    quant: Option<&QuantizationScheme>,
    tech: &TechnologyParams,
) -> Result<HardwareMetrics> {
    let mappings = network_mappings(net, quant, &design.device, design.array);
    let demand: usize = mappings.iter().map(|m| m.arrays_needed).sum();
    if design.array_capacity() < demand {
        return Err(Error::InvalidConfig(format!(
            "design holds {} arrays but the network needs {demand}",
            design.array_capacity()
        )));
    }
    let mut latency_ns = 0.0;
    let mut energy_pj = 0.0;
    for (i, m) in mappings.iter().enumerate() {
        let (qa, _) = layer_formats(quant, i);
        let lm = estimate_layer_metrics(m, qa, tech, design.array);
        latency_ns += lm.latency_ns;
        energy_pj += lm.energy_pj;
    }
    let area_um2 = chip_area_um2(design, tech);
    let ops = 2.0 * net.mac_count() as f64;
    let throughput_tops = ops / latency_ns / 1e3;
    let power_w = energy_pj / latency_ns * 1e-3;
    Ok(HardwareMetrics {
        latency_ns,
        energy_pj,
        area_um2,
        edp_pj_ns: energy_pj * latency_ns,
        throughput_tops,
        efficiency_tops_per_w: throughput_tops / power_w,
    })
}
