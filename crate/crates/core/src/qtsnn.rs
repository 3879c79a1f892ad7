//! Integer-only inference for quantized ternary SNNs.
//!
//! Each layer keeps integer membranes in units of one membrane step `alpha_1`.
//! Per timestep and neuron:
//!
//! ```text
//! X = sum_j w_ij * o_j              (adds and subtracts only, o_j in {-1, 0, 1})
//! H = (X << k) + (u_prev >> 1)      (u_prev is 0 if the neuron fired last step)
//! o = +1 if H >= theta, -1 if H <= -theta, else 0
//! u = 0 if o != 0, else H saturated to the b_u-bit range
//! ```
//!
//! `k = log2(alpha_3 / alpha_1)` may be negative, in which case `X << k` is an
//! arithmetic right shift. Every arithmetic operation goes through [`Alu`],
//! which counts what it executes; it has no multiply.

use std::ops::AddAssign;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quant::{levels_per_sign, K_MAX, K_MIN};
use crate::tlif::{check_ternary_inputs, predict_class, sparsity_of, Sparsity};
use crate::topology::{check_chain, LayerShape};

/// Accumulator bounds for `X` and `H`.
pub const ACC_MIN: i64 = i32::MIN as i64;
pub const ACC_MAX: i64 = i32::MAX as i64;

/// Largest shift magnitude accepted by [`shift_scale`].
pub const MAX_SHIFT: i32 = 31;

/// `r * 2^x` as a left shift (x > 0), arithmetic right shift (x < 0) or
/// identity, saturated to the 32-bit accumulator.
pub fn shift_scale(r: i32, x: i32) -> Result<i32> {
    if x.abs() > MAX_SHIFT {
        return Err(Error::domain(format!("shift {x} outside [-31, 31]")));
    }
    Ok(shift_unchecked(r, x))
}

#[inline]
fn shift_unchecked(r: i32, x: i32) -> i32 {
    match x.cmp(&0) {
        std::cmp::Ordering::Greater => saturate_acc(i64::from(r) << x),
        std::cmp::Ordering::Less => r >> (-x),
        std::cmp::Ordering::Equal => r,
    }
}

#[inline]
fn saturate_acc(v: i64) -> i32 {
    v.clamp(ACC_MIN, ACC_MAX) as i32
}

/// Clamps a membrane value to `[-(2^(b-1) - 1), 2^(b-1) - 1]`.
pub fn saturate(h: i32, bits_u: u32) -> i32 {
    let n = ((1i64 << (bits_u - 1)) - 1) as i32;
    h.clamp(-n, n)
}

/// Integer threshold `ceil(v_th / alpha_1)`, at least 1.
pub fn threshold_code(v_th: f64, alpha_1: f64) -> Result<i32> {
    if !(v_th > 0.0 && v_th.is_finite() && alpha_1 > 0.0 && alpha_1.is_finite()) {
        return Err(Error::config(format!(
            "threshold needs positive finite v_th and alpha_1, got {v_th} and {alpha_1}"
        )));
    }
    let theta = (v_th / alpha_1).ceil();
    if theta > ACC_MAX as f64 {
        return Err(Error::config(format!("threshold {theta} exceeds the accumulator")));
    }
    Ok((theta as i32).max(1))
}

/// Operation tallies of the integer path, per layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCounts {
    /// Synaptic accumulates: one per nonzero (weight, spike) pair.
    pub ac: u64,
    /// Other additions (membrane update).
    pub add: u64,
    pub shift: u64,
    pub compare: u64,
    /// Multiplications. The integer path has no way to issue one.
    pub mul: u64,
    /// Right shifts that discarded nonzero bits.
    pub truncating_shifts: u64,
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, o: Self) {
        self.ac += o.ac;
        self.add += o.add;
        self.shift += o.shift;
        self.compare += o.compare;
        self.mul += o.mul;
        self.truncating_shifts += o.truncating_shifts;
    }
}

/// Counting integer ALU used by the inference path.
struct Alu<'a> {
    counts: &'a mut OpCounts,
}

impl Alu<'_> {
    #[inline]
    fn accumulate(&mut self, acc: i32, w: i32, spike: i8) -> i32 {
        match spike {
            1 => {
                self.counts.ac += 1;
                acc.saturating_add(w)
            }
            -1 => {
                self.counts.ac += 1;
                acc.saturating_sub(w)
            }
            _ => acc,
        }
    }

    #[inline]
    fn add(&mut self, a: i32, b: i32) -> i32 {
        self.counts.add += 1;
        a.saturating_add(b)
    }

    #[inline]
    fn shift(&mut self, r: i32, x: i32) -> i32 {
        if x == 0 {
            return r;
        }
        self.counts.shift += 1;
        if x < 0 && i64::from(r) & ((1i64 << -x) - 1) != 0 {
            self.counts.truncating_shifts += 1;
        }
        shift_unchecked(r, x)
    }

    #[inline]
    fn fire(&mut self, h: i32, theta: i32) -> i8 {
        self.counts.compare += 1;
        if h >= theta {
            return 1;
        }
        self.counts.compare += 1;
        if h <= -theta {
            -1
        } else {
            0
        }
    }
}

/// One integer layer: weight codes, scale exponent and threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct QtLayer {
    pub shape: LayerShape,
    pub w_int: Vec<i32>,
    pub k: i32,
    pub theta: i32,
    pub bits_w: u32,
    pub bits_u: u32,
    /// Provenance of `theta` (`v_th / alpha_1` before the ceiling), if known.
    pub theta_f: Option<f64>,
    /// Provenance of the weight clipping threshold, if known.
    pub alpha_w: Option<f64>,
}

impl QtLayer {
    pub fn new(shape: LayerShape, w_int: Vec<i32>, k: i32, theta: i32, bits_w: u32, bits_u: u32) -> Result<Self> {
        let layer = Self {
            shape,
            w_int,
            k,
            theta,
            bits_w,
            bits_u,
            theta_f: None,
            alpha_w: None,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        let n_w = levels_per_sign(self.bits_w)?;
        levels_per_sign(self.bits_u)?;
        if self.w_int.len() != self.shape.weight_count() {
            return Err(Error::dim(format!(
                "{} weights for a {} layer needing {}",
                self.w_int.len(),
                self.shape.kind_name(),
                self.shape.weight_count()
            )));
        }
        if let Some(w) = self.w_int.iter().find(|w| i64::from(w.abs()) > n_w) {
            return Err(Error::domain(format!(
                "weight code {w} outside the {}-bit range ±{n_w}",
                self.bits_w
            )));
        }
        if !(K_MIN..=K_MAX).contains(&self.k) {
            return Err(Error::domain(format!("k = {} outside [{K_MIN}, {K_MAX}]", self.k)));
        }
        if self.theta < 1 {
            return Err(Error::domain(format!("theta must be >= 1, got {}", self.theta)));
        }
        Ok(())
    }

    pub fn fan_in(&self) -> usize {
        self.shape.input_size()
    }

    pub fn fan_out(&self) -> usize {
        self.shape.output_size()
    }
}

/// Integer membranes and last spikes of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct QtState {
    pub u_int: Vec<i32>,
    pub last_spike: Vec<i8>,
}

impl QtState {
    pub fn zeros(n: usize) -> Self {
        Self {
            u_int: vec![0; n],
            last_spike: vec![0; n],
        }
    }
}

/// Advances one layer by one timestep.
pub fn qt_step(state: &QtState, layer: &QtLayer, in_spikes: &[i8]) -> Result<(QtState, Vec<i8>)> {
    let mut counts = OpCounts::default();
    qt_step_recorded(state, layer, in_spikes, &mut counts)
}

/// [`qt_step`] that adds the operations it performs to `counts`.
pub fn qt_step_recorded(
    state: &QtState,
    layer: &QtLayer,
    in_spikes: &[i8],
    counts: &mut OpCounts,
) -> Result<(QtState, Vec<i8>)> {
    let n = layer.fan_out();
    if state.u_int.len() != n || state.last_spike.len() != n {
        return Err(Error::dim(format!(
            "state holds {} neurons, layer has {n}",
            state.u_int.len()
        )));
    }
    if in_spikes.len() != layer.fan_in() {
        return Err(Error::dim(format!(
            "layer expects {} input spikes, got {}",
            layer.fan_in(),
            in_spikes.len()
        )));
    }
    if let Some(v) = in_spikes.iter().find(|v| !(-1..=1).contains(*v)) {
        return Err(Error::domain(format!("non-ternary input spike {v}")));
    }
    Ok(step_unchecked(state, layer, in_spikes, counts))
}

fn step_unchecked(state: &QtState, layer: &QtLayer, in_spikes: &[i8], counts: &mut OpCounts) -> (QtState, Vec<i8>) {
    let n = layer.fan_out();
    let mut alu = Alu { counts };
    let mut next = QtState::zeros(n);
    for i in 0..n {
        let mut x = 0i32;
        layer.shape.for_each_synapse(i, |j, wi| {
            let w = layer.w_int[wi];
            if w != 0 {
                x = alu.accumulate(x, w, in_spikes[j]);
            }
        });
        let carried = if state.last_spike[i] != 0 { 0 } else { state.u_int[i] };
        let drive = alu.shift(x, layer.k);
        let decay = alu.shift(carried, -1);
        let h = alu.add(drive, decay);
        let o = alu.fire(h, layer.theta);
        next.last_spike[i] = o;
        next.u_int[i] = if o != 0 { 0 } else { saturate(h, layer.bits_u) };
    }
    let spikes = next.last_spike.clone();
    (next, spikes)
}

/// Result of an integer forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct QtRun {
    pub scores: Vec<i64>,
    /// `spikes[t][l]`: output spikes of layer `l` at timestep `t`.
    pub spikes: Vec<Vec<Vec<i8>>>,
    /// `membranes[t][l]`: integer membranes of layer `l` after timestep `t`.
    pub membranes: Vec<Vec<Vec<i32>>>,
    /// Operation tallies per layer.
    pub ops: Vec<OpCounts>,
    /// AC operations per timestep (all layers).
    pub ac_per_step: Vec<u64>,
}

impl QtRun {
    pub fn predicted_class(&self) -> usize {
        predict_class(&self.scores)
    }

    pub fn total_ops(&self) -> OpCounts {
        let mut total = OpCounts::default();
        for c in &self.ops {
            total += *c;
        }
        total
    }

    pub fn sparsity(&self) -> Sparsity {
        sparsity_of(&self.spikes)
    }
}

/// Runs the integer network over `inputs` (`T x fan_in`).
pub fn qt_forward(layers: &[QtLayer], inputs: &[Vec<i8>]) -> Result<QtRun> {
    let shapes: Vec<LayerShape> = layers.iter().map(|l| l.shape).collect();
    check_chain(&shapes)?;
    for l in layers {
        l.validate()?;
    }
    if inputs.is_empty() {
        return Err(Error::config("at least one timestep of input is required"));
    }
    check_ternary_inputs(inputs, inputs.len(), shapes[0].input_size())?;

    let mut states: Vec<QtState> = layers.iter().map(|l| QtState::zeros(l.fan_out())).collect();
    let mut ops = vec![OpCounts::default(); layers.len()];
    let mut scores = vec![0i64; shapes[shapes.len() - 1].output_size()];
    let mut spikes = Vec::with_capacity(inputs.len());
    let mut membranes = Vec::with_capacity(inputs.len());
    let mut ac_per_step = Vec::with_capacity(inputs.len());

    for row in inputs {
        let before: u64 = ops.iter().map(|c| c.ac).sum();
        let mut x = row.clone();
        let mut t_spikes = Vec::with_capacity(layers.len());
        let mut t_mem = Vec::with_capacity(layers.len());
        for (l, layer) in layers.iter().enumerate() {
            let (next, out) = step_unchecked(&states[l], layer, &x, &mut ops[l]);
            t_mem.push(next.u_int.clone());
            states[l] = next;
            t_spikes.push(out.clone());
            x = out;
        }
        for (s, &o) in scores.iter_mut().zip(&x) {
            *s += i64::from(o);
        }
        ac_per_step.push(ops.iter().map(|c| c.ac).sum::<u64>() - before);
        spikes.push(t_spikes);
        membranes.push(t_mem);
    }
    Ok(QtRun {
        scores,
        spikes,
        membranes,
        ops,
        ac_per_step,
    })
}

/// Real-valued description of a layer for [`reference_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleLayer {
    pub shape: LayerShape,
    /// Real synaptic weights (`alpha_3 * w_int`).
    pub weights: Vec<f64>,
    /// Membrane step.
    pub alpha_1: f64,
    /// Real firing threshold.
    pub v_th: f64,
    pub bits_u: u32,
}

/// Result of the real-valued oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub scores: Vec<i64>,
    pub spikes: Vec<Vec<Vec<i8>>>,
    /// Real membranes (`alpha_1 * u_int`).
    pub membranes: Vec<Vec<Vec<f64>>>,
}

/// Dual-scale membrane dynamics in real arithmetic:
///
/// ```text
/// v = alpha_1 * floor(sum_j w_ij o_j / alpha_1) + alpha_1 * floor(v_prev * (1 - |o_prev|) / (2 alpha_1))
/// ```
///
/// firing against the real `v_th` and clamping silent membranes to
/// `±(2^(b_u-1) - 1) * alpha_1`. The floors mirror the arithmetic shifts of the
/// integer path. Results are exact when `alpha_1` is a power of two and the
/// weights are lattice-exact.
pub fn reference_oracle(layers: &[OracleLayer], inputs: &[Vec<i8>]) -> Result<OracleRun> {
    let shapes: Vec<LayerShape> = layers.iter().map(|l| l.shape).collect();
    check_chain(&shapes)?;
    if inputs.is_empty() {
        return Err(Error::config("at least one timestep of input is required"));
    }
    check_ternary_inputs(inputs, inputs.len(), shapes[0].input_size())?;

    let mut v: Vec<Vec<f64>> = shapes.iter().map(|s| vec![0.0; s.output_size()]).collect();
    let mut last: Vec<Vec<i8>> = shapes.iter().map(|s| vec![0; s.output_size()]).collect();
    let mut scores = vec![0i64; shapes[shapes.len() - 1].output_size()];
    let mut spikes = Vec::with_capacity(inputs.len());
    let mut membranes = Vec::with_capacity(inputs.len());

    for row in inputs {
        let mut x: Vec<f64> = row.iter().map(|&s| f64::from(s)).collect();
        let mut t_spikes = Vec::with_capacity(layers.len());
        let mut t_mem = Vec::with_capacity(layers.len());
        for (l, layer) in layers.iter().enumerate() {
            let a1 = layer.alpha_1;
            let limit = levels_per_sign(layer.bits_u)? as f64 * a1;
            let n = layer.shape.output_size();
            let mut out = vec![0i8; n];
            for i in 0..n {
                let mut current = 0.0;
                layer.shape.for_each_synapse(i, |j, wi| current += layer.weights[wi] * x[j]);
                let drive = a1 * (current / a1).floor();
                let carried = v[l][i] * (1.0 - f64::from(last[l][i].abs()));
                let decay = a1 * (carried / (2.0 * a1)).floor();
                let h = drive + decay;
                let o = if h >= layer.v_th {
                    1
                } else if h <= -layer.v_th {
                    -1
                } else {
                    0
                };
                out[i] = o;
                v[l][i] = if o != 0 { 0.0 } else { h.clamp(-limit, limit) };
            }
            last[l] = out.clone();
            t_mem.push(v[l].clone());
            t_spikes.push(out.clone());
            x = out.iter().map(|&s| f64::from(s)).collect();
        }
        for (s, o) in scores.iter_mut().zip(&x) {
            *s += *o as i64;
        }
        spikes.push(t_spikes);
        membranes.push(t_mem);
    }
    Ok(OracleRun {
        scores,
        spikes,
        membranes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_neuron(w: i32, k: i32, theta: i32) -> QtLayer {
        QtLayer::new(LayerShape::dense(1, 1), vec![w], k, theta, 8, 8).unwrap()
    }

    #[test]
    fn shift_scale_examples() {
        assert_eq!(shift_scale(3, 1).unwrap(), 6);
        assert_eq!(shift_scale(-5, -1).unwrap(), -3);
        assert_eq!(shift_scale(7, 0).unwrap(), 7);
        assert_eq!(shift_scale(i32::MAX, 1).unwrap(), i32::MAX);
        assert_eq!(shift_scale(i32::MIN, 3).unwrap(), i32::MIN);
        assert_eq!(shift_scale(1, 31).unwrap(), i32::MAX);
        assert_eq!(shift_scale(-1, -31).unwrap(), -1);
        assert!(shift_scale(1, 32).is_err());
    }

    #[test]
    fn step_positive_branch() {
        // X = 3 via three synapses of weight 1, k = 1, u_prev = 4, theta = 5
        let layer = QtLayer::new(LayerShape::dense(3, 1), vec![1, 1, 1], 1, 5, 4, 8).unwrap();
        let state = QtState {
            u_int: vec![4],
            last_spike: vec![0],
        };
        let (next, out) = qt_step(&state, &layer, &[1, 1, 1]).unwrap();
        assert_eq!(out, vec![1]);
        assert_eq!(next.u_int, vec![0]);
    }

    #[test]
    fn step_negative_branch() {
        let layer = QtLayer::new(LayerShape::dense(3, 1), vec![1, 1, 1], 1, 5, 4, 8).unwrap();
        let state = QtState {
            u_int: vec![-4],
            last_spike: vec![0],
        };
        let (next, out) = qt_step(&state, &layer, &[-1, -1, -1]).unwrap();
        assert_eq!(out, vec![-1]);
        assert_eq!(next.u_int, vec![0]);
    }

    #[test]
    fn step_zero_fixed_point() {
        let (next, out) = qt_step(&QtState::zeros(1), &one_neuron(3, 0, 2), &[0]).unwrap();
        assert_eq!(out, vec![0]);
        assert_eq!(next.u_int, vec![0]);
    }

    #[test]
    fn step_saturates_silent_membrane() {
        // H = 100 < theta = 200 but beyond the 4-bit range ±7
        let layer = QtLayer::new(LayerShape::dense(1, 1), vec![100], 0, 200, 8, 4).unwrap();
        let (next, out) = qt_step(&QtState::zeros(1), &layer, &[1]).unwrap();
        assert_eq!(out, vec![0]);
        assert_eq!(next.u_int, vec![7]);
    }

    #[test]
    fn step_rejects_bad_input() {
        let layer = one_neuron(1, 0, 1);
        assert!(matches!(
            qt_step(&QtState::zeros(1), &layer, &[2]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            qt_step(&QtState::zeros(2), &layer, &[1]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn layer_validation() {
        assert!(QtLayer::new(LayerShape::dense(1, 1), vec![8], 0, 1, 4, 4).is_err());
        assert!(QtLayer::new(LayerShape::dense(1, 1), vec![7], 9, 1, 4, 4).is_err());
        assert!(QtLayer::new(LayerShape::dense(1, 1), vec![7], 0, 0, 4, 4).is_err());
        assert!(QtLayer::new(LayerShape::dense(2, 1), vec![7], 0, 1, 4, 4).is_err());
    }

    #[test]
    fn forward_hand_trace() {
        let layer = QtLayer::new(LayerShape::dense(1, 1), vec![4], 0, 3, 4, 4).unwrap();
        let run = qt_forward(&[layer], &[vec![1], vec![0]]).unwrap();
        assert_eq!(run.spikes[0][0], vec![1]);
        assert_eq!(run.spikes[1][0], vec![0]);
        assert_eq!(run.scores, vec![1]);
        assert_eq!(run.ops[0].ac, 1);
        assert_eq!(run.ac_per_step, vec![1, 0]);
        assert_eq!(run.total_ops().mul, 0);
    }

    #[test]
    fn all_zero_input_costs_nothing() {
        let layer = QtLayer::new(LayerShape::dense(3, 2), vec![1, -2, 3, 4, 5, -6], 1, 2, 4, 4).unwrap();
        let run = qt_forward(&[layer], &vec![vec![0; 3]; 5]).unwrap();
        assert_eq!(run.scores, vec![0, 0]);
        assert_eq!(run.total_ops().ac, 0);
        assert!(run.ac_per_step.iter().all(|&c| c == 0));
    }

    #[test]
    fn threshold_code_is_ceiling() {
        assert_eq!(threshold_code(1.0, 0.25).unwrap(), 4);
        assert_eq!(threshold_code(1.1, 0.25).unwrap(), 5);
        assert_eq!(threshold_code(0.01, 0.25).unwrap(), 1);
        assert!(threshold_code(0.0, 0.25).is_err());
    }

    #[test]
    fn oracle_matches_on_hand_example() {
        let layer = QtLayer::new(LayerShape::dense(1, 1), vec![4], 0, 3, 4, 4).unwrap();
        let oracle = OracleLayer {
            shape: LayerShape::dense(1, 1),
            weights: vec![4.0 * 0.5],
            alpha_1: 0.5,
            v_th: 1.5,
            bits_u: 4,
        };
        let inputs = [vec![1], vec![0], vec![1], vec![-1]];
        let a = qt_forward(&[layer], &inputs).unwrap();
        let b = reference_oracle(&[oracle], &inputs).unwrap();
        assert_eq!(a.spikes, b.spikes);
        assert_eq!(a.scores, b.scores);
    }
}
