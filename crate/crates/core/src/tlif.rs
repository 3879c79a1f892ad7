//! Full-precision ternary leaky integrate-and-fire neurons.
//!
//! `u[t] = tau * u[t-1] * (1 - |o[t-1]|) + sum_j w_ij * o_j[t]`, firing +1 at
//! `u >= v_th` and -1 at `u <= -v_th`. Membranes are not clipped.

use crate::error::{Error, Result};
use crate::topology::{check_chain, LayerShape};

pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_V_TH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlifParams {
    pub tau: f64,
    pub v_th: f64,
}

impl Default for TlifParams {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            v_th: DEFAULT_V_TH,
        }
    }
}

impl TlifParams {
    pub fn new(tau: f64, v_th: f64) -> Result<Self> {
        let p = Self { tau, v_th };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        // infinite v_th is allowed: a pure integrator that never fires
        if !(self.v_th > 0.0) {
            return Err(Error::config(format!("v_th must be positive, got {}", self.v_th)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TlifState {
    pub u: Vec<f64>,
    pub last_spike: Vec<i8>,
}

impl TlifState {
    pub fn zeros(n: usize) -> Self {
        Self {
            u: vec![0.0; n],
            last_spike: vec![0; n],
        }
    }
}

/// Ternary firing function with symmetric thresholds.
#[inline]
pub fn fire(u: f64, v_th: f64) -> i8 {
    if u >= v_th {
        1
    } else if u <= -v_th {
        -1
    } else {
        0
    }
}

/// Advances one layer of neurons by one timestep. The returned state holds the
/// new membranes and spikes; the spikes are also returned for convenience.
pub fn tlif_step(state: &TlifState, params: &TlifParams, input_current: &[f64]) -> Result<(TlifState, Vec<i8>)> {
    let n = state.u.len();
    if state.last_spike.len() != n || input_current.len() != n {
        return Err(Error::dim(format!(
            "state has {n} neurons, last_spike {}, input {}",
            state.last_spike.len(),
            input_current.len()
        )));
    }
    let mut next = TlifState::zeros(n);
    for i in 0..n {
        let keep = f64::from(1 - state.last_spike[i].abs());
        let u = params.tau * state.u[i] * keep + input_current[i];
        next.u[i] = u;
        next.last_spike[i] = fire(u, params.v_th);
    }
    let spikes = next.last_spike.clone();
    Ok((next, spikes))
}

/// Layer shapes, timestep count and per-layer neuron parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub layers: Vec<LayerShape>,
    pub timesteps: usize,
    pub params: Vec<TlifParams>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerShape>, timesteps: usize, params: Vec<TlifParams>) -> Result<Self> {
        let spec = Self {
            layers,
            timesteps,
            params,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same neuron parameters on every layer.
    pub fn uniform(layers: Vec<LayerShape>, timesteps: usize, params: TlifParams) -> Result<Self> {
        let n = layers.len();
        Self::new(layers, timesteps, vec![params; n])
    }

    pub fn validate(&self) -> Result<()> {
        check_chain(&self.layers)?;
        if self.timesteps == 0 {
            return Err(Error::config("timesteps must be at least 1"));
        }
        if self.params.len() != self.layers.len() {
            return Err(Error::dim(format!(
                "{} layers but {} parameter sets",
                self.layers.len(),
                self.params.len()
            )));
        }
        self.params.iter().try_for_each(TlifParams::validate)
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].output_size()
    }
}

/// Everything a forward pass produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// Per-class sum of output spikes over all timesteps.
    pub scores: Vec<i64>,
    /// `spikes[t][l]` are layer `l`'s output spikes at timestep `t`.
    pub spikes: Vec<Vec<Vec<i8>>>,
    /// `membranes[t][l]` are layer `l`'s membranes after timestep `t`.
    pub membranes: Vec<Vec<Vec<f64>>>,
}

impl RunRecord {
    pub fn predicted_class(&self) -> usize {
        predict_class(&self.scores)
    }
}

/// Argmax with ties resolved toward the lowest index.
pub fn predict_class(scores: &[i64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_ternary_inputs(inputs: &[Vec<i8>], timesteps: usize, fan_in: usize) -> Result<()> {
    if inputs.len() != timesteps {
        return Err(Error::dim(format!(
            "expected {timesteps} timesteps of input, got {}",
            inputs.len()
        )));
    }
    for (t, row) in inputs.iter().enumerate() {
        if row.len() != fan_in {
            return Err(Error::dim(format!(
                "timestep {t} has {} inputs, expected {fan_in}",
                row.len()
            )));
        }
        if let Some(v) = row.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(Error::domain(format!("timestep {t} has non-ternary input {v}")));
        }
    }
    Ok(())
}

/// Runs the full-precision network over `inputs` (shape `T x fan_in`).
pub fn forward(net: &NetworkSpec, weights: &[Vec<f64>], inputs: &[Vec<i8>]) -> Result<RunRecord> {
    net.validate()?;
    if weights.len() != net.layers.len() {
        return Err(Error::dim(format!(
            "{} weight matrices for {} layers",
            weights.len(),
            net.layers.len()
        )));
    }
    for (l, (w, shape)) in weights.iter().zip(&net.layers).enumerate() {
        if w.len() != shape.weight_count() {
            return Err(Error::dim(format!(
                "layer {l} has {} weights, expected {}",
                w.len(),
                shape.weight_count()
            )));
        }
    }
    check_ternary_inputs(inputs, net.timesteps, net.input_size())?;

    let mut states: Vec<TlifState> = net
        .layers
        .iter()
        .map(|s| TlifState::zeros(s.output_size()))
        .collect();
    let mut scores = vec![0i64; net.output_size()];
    let mut spikes = Vec::with_capacity(net.timesteps);
    let mut membranes = Vec::with_capacity(net.timesteps);

    for row in inputs {
        let mut x: Vec<i8> = row.clone();
        let mut t_spikes = Vec::with_capacity(net.layers.len());
        let mut t_mem = Vec::with_capacity(net.layers.len());
        for (l, shape) in net.layers.iter().enumerate() {
            let current = synaptic_current(shape, &weights[l], &x);
            let (next, out) = tlif_step(&states[l], &net.params[l], &current)?;
            t_mem.push(next.u.clone());
            states[l] = next;
            t_spikes.push(out.clone());
            x = out;
        }
        for (s, &o) in scores.iter_mut().zip(&x) {
            *s += i64::from(o);
        }
        spikes.push(t_spikes);
        membranes.push(t_mem);
    }
    Ok(RunRecord {
        scores,
        spikes,
        membranes,
    })
}

fn synaptic_current(shape: &LayerShape, w: &[f64], x: &[i8]) -> Vec<f64> {
    (0..shape.output_size())
        .map(|i| {
            let mut acc = 0.0;
            shape.for_each_synapse(i, |j, wi| match x[j] {
                1 => acc += w[wi],
                -1 => acc -= w[wi],
                _ => {}
            });
            acc
        })
        .collect()
}

/// Fraction of nonzero spikes per layer and over the whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct Sparsity {
    pub per_layer: Vec<f64>,
    pub overall: f64,
}

pub fn count_spikes(run: &RunRecord) -> Sparsity {
    sparsity_of(&run.spikes)
}

pub(crate) fn sparsity_of(spikes: &[Vec<Vec<i8>>]) -> Sparsity {
    let layers = spikes.first().map_or(0, Vec::len);
    let mut active = vec![0usize; layers];
    let mut slots = vec![0usize; layers];
    for step in spikes {
        for (l, s) in step.iter().enumerate() {
            active[l] += s.iter().filter(|&&v| v != 0).count();
            slots[l] += s.len();
        }
    }
    let per_layer = active
        .iter()
        .zip(&slots)
        .map(|(&a, &n)| if n == 0 { 0.0 } else { a as f64 / n as f64 })
        .collect();
    let total: usize = slots.iter().sum();
    let overall = if total == 0 {
        0.0
    } else {
        active.iter().sum::<usize>() as f64 / total as f64
    };
    Sparsity { per_layer, overall }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_spike_then_reset() {
        let p = TlifParams::default();
        let s0 = TlifState::zeros(1);
        let (s1, o1) = tlif_step(&s0, &p, &[1.2]).unwrap();
        assert_eq!(o1, vec![1]);
        let (s2, o2) = tlif_step(&s1, &p, &[0.0]).unwrap();
        assert_eq!(o2, vec![0]);
        assert_eq!(s2.u, vec![0.0]);
    }

    #[test]
    fn negative_spike() {
        let (_, o) = tlif_step(&TlifState::zeros(1), &TlifParams::default(), &[-1.2]).unwrap();
        assert_eq!(o, vec![-1]);
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let p = TlifParams::default();
        let mut s = TlifState::zeros(3);
        for _ in 0..10 {
            let (n, o) = tlif_step(&s, &p, &[0.0; 3]).unwrap();
            assert_eq!(o, vec![0; 3]);
            assert_eq!(n.u, vec![0.0; 3]);
            s = n;
        }
    }

    #[test]
    fn step_checks_dimensions() {
        assert!(matches!(
            tlif_step(&TlifState::zeros(2), &TlifParams::default(), &[1.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn two_step_single_neuron_trace() {
        let net = NetworkSpec::uniform(vec![LayerShape::dense(1, 1)], 2, TlifParams::new(0.5, 1.0).unwrap())
            .unwrap();
        let run = forward(&net, &[vec![2.0]], &[vec![1], vec![0]]).unwrap();
        assert_eq!(run.membranes[0][0], vec![2.0]);
        assert_eq!(run.membranes[1][0], vec![0.0]);
        assert_eq!(run.scores, vec![1]);
        assert_eq!(count_spikes(&run).overall, 0.5);
    }

    #[test]
    fn integrator_degeneracy() {
        let p = TlifParams::new(1.0, f64::INFINITY).unwrap();
        let inputs = [0.5, -0.25, 1.0, 2.0];
        let mut s = TlifState::zeros(1);
        let mut sum = 0.0;
        for x in inputs {
            let (n, o) = tlif_step(&s, &p, &[x]).unwrap();
            sum += x;
            assert_eq!(o, vec![0]);
            assert_eq!(n.u[0], sum);
            s = n;
        }
    }

    #[test]
    fn rejects_non_ternary_input() {
        let net = NetworkSpec::uniform(vec![LayerShape::dense(1, 1)], 1, TlifParams::default()).unwrap();
        assert!(matches!(
            forward(&net, &[vec![1.0]], &[vec![2]]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn predict_prefers_lowest_index_on_ties() {
        assert_eq!(predict_class(&[0, 0, 0]), 0);
        assert_eq!(predict_class(&[1, 3, 3]), 1);
        assert_eq!(predict_class(&[-2, -1, -5]), 1);
    }

    #[test]
    fn conv1d_forward_runs() {
        let net = NetworkSpec::uniform(
            vec![LayerShape::conv1d(1, 2, 5, 3, 1), LayerShape::dense(6, 2)],
            3,
            TlifParams::default(),
        )
        .unwrap();
        let w0 = vec![1.0, 0.0, 0.0, 0.0, 0.0, -1.0];
        let w1 = vec![1.0; 12];
        let input = vec![vec![1, 0, 0, 0, 1]; 3];
        let run = forward(&net, &[w0, w1], &input).unwrap();
        // channel 0 sees input[pos], channel 1 sees -input[pos+2]
        assert_eq!(run.spikes[0][0], vec![1, 0, 0, 0, 0, -1]);
    }
}
