//! Synaptic-operation energy accounting and a parametric memory model.
//!
//! Energies are returned in µJ from per-operation costs in pJ.
//!
//! * ANN: `E_mac * sum_l f_in^l N_l`
//! * directly coded SNN: `E_mac * T * sum_j f_in,j^1 + E_ac * sum_t sum_{l>=2} sum_j f_out,j^l o_j^l[t]`
//! * ternary-coded QT-SNN: `E_ac * sum_t sum_l sum_j f_out,j^l o_j^l[t]`
//!
//! Without spike records the spike sums collapse to `T * sparsity * fan-out total`.

use serde::Serialize;

use crate::qtsnn::{QtLayer, QtRun};
use crate::topology::LayerShape;

pub const E_MAC_PJ: f64 = 4.6;
pub const E_AC_PJ: f64 = 0.9;

const PJ_PER_UJ: f64 = 1e6;

/// Bytes charged per full-precision per-layer scalar.
pub const SIDECAR_SCALAR_BYTES: u64 = 8;
/// Full-precision scalars stored per layer (threshold ratio and scale exponent).
pub const SIDECAR_SCALARS_PER_LAYER: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyCosts {
    pub e_mac_pj: f64,
    pub e_ac_pj: f64,
}

impl Default for EnergyCosts {
    fn default() -> Self {
        Self {
            e_mac_pj: E_MAC_PJ,
            e_ac_pj: E_AC_PJ,
        }
    }
}

/// Synaptic operation counts of a network.
///
/// Layer `l` here is a synaptic layer: `fan_in_total[l] = sum_j f_in,j` over its
/// postsynaptic neurons and `fan_out_total[l] = sum_j f_out,j` over the
/// presynaptic population that drives it. For the layers handled in this crate
/// the two are equal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpCountReport {
    pub fan_in_total: Vec<f64>,
    pub fan_out_total: Vec<f64>,
    pub timesteps: u32,
    /// Network-wide average firing rate used by the closed forms.
    pub sparsity: f64,
    /// `sum_j f_in,j^1`: the directly coded first layer.
    pub first_layer_fanin: f64,
    /// Exact `sum_t sum_j f_out,j o_j[t]` per layer, when a run was recorded.
    pub recorded_synops: Option<Vec<f64>>,
}

impl OpCountReport {
    /// Closed-form counts for a stack of layers.
    pub fn from_shapes(shapes: &[LayerShape], timesteps: u32, sparsity: f64) -> Self {
        let totals: Vec<f64> = shapes.iter().map(|s| s.synapse_count() as f64).collect();
        Self {
            first_layer_fanin: totals.first().copied().unwrap_or(0.0),
            fan_in_total: totals.clone(),
            fan_out_total: totals,
            timesteps,
            sparsity,
            recorded_synops: None,
        }
    }

    /// Counts from an integer run: recorded AC operations per layer, and the
    /// run's overall firing rate.
    pub fn from_run(layers: &[QtLayer], run: &QtRun) -> Self {
        let shapes: Vec<LayerShape> = layers.iter().map(|l| l.shape).collect();
        let mut report = Self::from_shapes(&shapes, run.spikes.len() as u32, run.sparsity().overall);
        report.recorded_synops = Some(run.ops.iter().map(|c| c.ac as f64).collect());
        report
    }
}

/// `E_mac * sum_l f_in^l N_l`, in µJ.
pub fn energy_ann(counts: &OpCountReport, costs: &EnergyCosts) -> f64 {
    costs.e_mac_pj * counts.fan_in_total.iter().sum::<f64>() / PJ_PER_UJ
}

/// First layer charged as MACs every timestep, later layers as ACs per spike.
pub fn energy_dc_snn(counts: &OpCountReport, costs: &EnergyCosts) -> f64 {
    let t = f64::from(counts.timesteps);
    let mac = costs.e_mac_pj * t * counts.first_layer_fanin;
    let synops: f64 = match &counts.recorded_synops {
        Some(rec) => rec.iter().skip(1).sum(),
        None => t * counts.sparsity * counts.fan_out_total.iter().skip(1).sum::<f64>(),
    };
    (mac + costs.e_ac_pj * synops) / PJ_PER_UJ
}

/// Every layer charged as ACs per spike, in µJ.
pub fn energy_qtsnn(counts: &OpCountReport, costs: &EnergyCosts) -> f64 {
    let synops: f64 = match &counts.recorded_synops {
        Some(rec) => rec.iter().sum(),
        None => f64::from(counts.timesteps) * counts.sparsity * counts.fan_out_total.iter().sum::<f64>(),
    };
    costs.e_ac_pj * synops / PJ_PER_UJ
}

/// Itemized memory footprint in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MemoryReport {
    /// Quantized weights: `weight count * bits_w / 8`.
    pub weight_bytes: u64,
    /// Full-precision per-layer scalars.
    pub sidecar_bytes: u64,
    /// Membrane state: `neuron count * bits_u / 8 * batch`.
    pub membrane_bytes: u64,
}

impl MemoryReport {
    pub fn weights_term(&self) -> u64 {
        self.weight_bytes + self.sidecar_bytes
    }

    pub fn total(&self) -> u64 {
        self.weight_bytes + self.sidecar_bytes + self.membrane_bytes
    }

    /// Fractional saving of `self` relative to `baseline`.
    pub fn reduction_vs(&self, baseline: &MemoryReport) -> f64 {
        1.0 - self.total() as f64 / baseline.total() as f64
    }
}

fn bytes_for(count: u64, bits: u32) -> u64 {
    (count * u64::from(bits)).div_ceil(8)
}

/// Memory needed to hold the weights, per-layer scalars and a batch of membranes.
pub fn memory_footprint(shapes: &[LayerShape], bits_w: u32, bits_u: u32, batch: u32) -> MemoryReport {
    let weights: u64 = shapes.iter().map(|s| s.weight_count() as u64).sum();
    let neurons: u64 = shapes.iter().map(|s| s.output_size() as u64).sum();
    MemoryReport {
        weight_bytes: bytes_for(weights, bits_w),
        sidecar_bytes: shapes.len() as u64 * SIDECAR_SCALARS_PER_LAYER * SIDECAR_SCALAR_BYTES,
        membrane_bytes: bytes_for(neurons, bits_u) * u64::from(batch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(total: f64, t: u32, s: f64) -> OpCountReport {
        OpCountReport {
            fan_in_total: vec![total],
            fan_out_total: vec![total],
            timesteps: t,
            sparsity: s,
            first_layer_fanin: total,
            recorded_synops: None,
        }
    }

    #[test]
    fn ann_row() {
        let e = energy_ann(&single(15.19e6, 1, 0.0), &EnergyCosts::default());
        assert!((e - 69.874).abs() < 1e-9);
        assert_eq!(energy_ann(&single(0.0, 1, 0.0), &EnergyCosts::default()), 0.0);
    }

    #[test]
    fn dc_snn_row() {
        let counts = OpCountReport {
            fan_in_total: vec![1.86e6, 13.33e6],
            fan_out_total: vec![1.86e6, 13.33e6],
            timesteps: 4,
            sparsity: 0.1827,
            first_layer_fanin: 1.86e6,
            recorded_synops: None,
        };
        let e = energy_dc_snn(&counts, &EnergyCosts::default());
        assert!((e - 42.99).abs() < 0.05, "{e}");
        let silent = OpCountReport { sparsity: 0.0, ..counts.clone() };
        assert!((energy_dc_snn(&silent, &EnergyCosts::default()) - 34.224).abs() < 1e-9);
        let none = OpCountReport { timesteps: 0, ..counts };
        assert_eq!(energy_dc_snn(&none, &EnergyCosts::default()), 0.0);
    }

    #[test]
    fn qtsnn_row() {
        let e = energy_qtsnn(&single(15.19e6, 4, 0.1042), &EnergyCosts::default());
        assert!((e - 5.70).abs() < 0.01, "{e}");
    }

    #[test]
    fn memory_model_scaling() {
        let shapes = [LayerShape::dense(1000, 1000)];
        let m32 = memory_footprint(&shapes, 32, 32, 1);
        let m16 = memory_footprint(&shapes, 16, 32, 1);
        assert_eq!(m16.weight_bytes * 2, m32.weight_bytes);
        let m10 = memory_footprint(&shapes, 32, 32, 10);
        assert_eq!(m10.membrane_bytes, 10 * m32.membrane_bytes);
        assert_eq!(m10.weights_term(), m32.weights_term());
    }

    #[test]
    fn odd_bit_products_round_up() {
        assert_eq!(memory_footprint(&[LayerShape::dense(3, 1)], 3, 3, 1).weight_bytes, 2);
    }
}
