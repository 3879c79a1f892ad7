//! Layer connectivity shared by the full-precision and integer networks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Connectivity of one synaptic layer.
///
/// Weights are stored flat. Dense: `w[out * fan_in + in]`. Conv1d:
/// `w[(oc * in_channels + ic) * kernel + k]`, with neuron `oc * out_len + pos`
/// reading input `ic * in_len + pos * stride + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerShape {
    Dense {
        fan_in: usize,
        fan_out: usize,
    },
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        in_len: usize,
        kernel: usize,
        stride: usize,
    },
}

impl LayerShape {
    pub fn dense(fan_in: usize, fan_out: usize) -> Self {
        LayerShape::Dense { fan_in, fan_out }
    }

    pub fn conv1d(in_channels: usize, out_channels: usize, in_len: usize, kernel: usize, stride: usize) -> Self {
        LayerShape::Conv1d {
            in_channels,
            out_channels,
            in_len,
            kernel,
            stride,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LayerShape::Dense { fan_in, fan_out } => {
                if fan_in == 0 || fan_out == 0 {
                    return Err(Error::config("dense layer dimensions must be positive"));
                }
            }
            LayerShape::Conv1d {
                in_channels,
                out_channels,
                in_len,
                kernel,
                stride,
            } => {
                if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 {
                    return Err(Error::config("conv1d dimensions must be positive"));
                }
                if kernel > in_len {
                    return Err(Error::config(format!(
                        "conv1d kernel {kernel} longer than input {in_len}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerShape::Dense { .. } => "dense",
            LayerShape::Conv1d { .. } => "conv1d",
        }
    }

    /// Number of presynaptic neurons.
    pub fn input_size(&self) -> usize {
        match *self {
            LayerShape::Dense { fan_in, .. } => fan_in,
            LayerShape::Conv1d {
                in_channels, in_len, ..
            } => in_channels * in_len,
        }
    }

    pub fn out_len(&self) -> usize {
        match *self {
            LayerShape::Dense { fan_out, .. } => fan_out,
            LayerShape::Conv1d {
                in_len,
                kernel,
                stride,
                ..
            } => (in_len - kernel) / stride + 1,
        }
    }

    /// Number of postsynaptic neurons.
    pub fn output_size(&self) -> usize {
        match *self {
            LayerShape::Dense { fan_out, .. } => fan_out,
            LayerShape::Conv1d { out_channels, .. } => out_channels * self.out_len(),
        }
    }

    /// Synapses feeding one output neuron.
    pub fn neuron_fan_in(&self) -> usize {
        match *self {
            LayerShape::Dense { fan_in, .. } => fan_in,
            LayerShape::Conv1d {
                in_channels, kernel, ..
            } => in_channels * kernel,
        }
    }

    pub fn weight_count(&self) -> usize {
        match *self {
            LayerShape::Dense { fan_in, fan_out } => fan_in * fan_out,
            LayerShape::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => in_channels * out_channels * kernel,
        }
    }

    /// Synaptic connections used per timestep, `sum_j f_in_j` over output neurons.
    /// Equals the total presynaptic fan-out.
    pub fn synapse_count(&self) -> usize {
        self.output_size() * self.neuron_fan_in()
    }

    /// Calls `f(input_index, weight_index)` for every synapse of output neuron `out`.
    #[inline]
    pub fn for_each_synapse(&self, out: usize, mut f: impl FnMut(usize, usize)) {
        match *self {
            LayerShape::Dense { fan_in, .. } => {
                let row = out * fan_in;
                for j in 0..fan_in {
                    f(j, row + j);
                }
            }
            LayerShape::Conv1d {
                in_channels,
                in_len,
                kernel,
                stride,
                ..
            } => {
                let out_len = self.out_len();
                let oc = out / out_len;
                let pos = out % out_len;
                for ic in 0..in_channels {
                    let wbase = (oc * in_channels + ic) * kernel;
                    let ibase = ic * in_len + pos * stride;
                    for k in 0..kernel {
                        f(ibase + k, wbase + k);
                    }
                }
            }
        }
    }
}

/// Checks that each layer's output feeds the next layer's input.
pub fn check_chain(shapes: &[LayerShape]) -> Result<()> {
    if shapes.is_empty() {
        return Err(Error::config("network has no layers"));
    }
    for s in shapes {
        s.validate()?;
    }
    for (l, pair) in shapes.windows(2).enumerate() {
        if pair[0].output_size() != pair[1].input_size() {
            return Err(Error::dim(format!(
                "layer {l} emits {} spikes but layer {} expects {}",
                pair[0].output_size(),
                l + 1,
                pair[1].input_size()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv1d_sizes() {
        let c = LayerShape::conv1d(2, 3, 10, 3, 2);
        assert_eq!(c.out_len(), 4);
        assert_eq!(c.output_size(), 12);
        assert_eq!(c.input_size(), 20);
        assert_eq!(c.weight_count(), 18);
        assert_eq!(c.synapse_count(), 12 * 6);
        let mut seen = Vec::new();
        c.for_each_synapse(5, |i, w| seen.push((i, w)));
        // neuron 5 = channel 1, position 1 -> inputs start at 2
        assert_eq!(seen[0], (2, 6));
        assert_eq!(seen[3], (12, 9));
    }

    #[test]
    fn chain_checks_dimensions() {
        assert!(check_chain(&[LayerShape::dense(4, 3), LayerShape::dense(3, 2)]).is_ok());
        assert!(check_chain(&[LayerShape::dense(4, 3), LayerShape::dense(2, 2)]).is_err());
        assert!(check_chain(&[]).is_err());
        assert!(check_chain(&[LayerShape::conv1d(1, 1, 2, 3, 1)]).is_err());
    }
}
