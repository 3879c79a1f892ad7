#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ternspike_core::qtsnn::{OracleLayer, QtLayer};
use ternspike_core::quant::levels_per_sign;
use ternspike_core::topology::LayerShape;

/// A small random integer network with its real-valued twin and an input.
pub struct QtCase {
    pub layers: Vec<QtLayer>,
    pub oracle: Vec<OracleLayer>,
    pub inputs: Vec<Vec<i8>>,
}

const BITS: [u32; 3] = [2, 4, 8];

pub fn ternary_inputs(rng: &mut impl Rng, timesteps: usize, width: usize) -> Vec<Vec<i8>> {
    (0..timesteps)
        .map(|_| (0..width).map(|_| rng.random_range(-1..=1)).collect())
        .collect()
}

/// Up to 3 dense layers of at most 16 neurons, T <= 8, bit widths from {2, 4, 8}
/// and a power-of-two membrane step.
pub fn random_qt_case(seed: u64) -> QtCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(1..=3);
    let timesteps = rng.random_range(1..=8);
    let mut width = rng.random_range(1..=16);
    let input_width = width;
    let mut layers = Vec::new();
    let mut oracle = Vec::new();
    for _ in 0..depth {
        let out = rng.random_range(1..=16);
        let shape = LayerShape::dense(width, out);
        let bits_w = BITS[rng.random_range(0..3)];
        let bits_u = BITS[rng.random_range(0..3)];
        let n_w = levels_per_sign(bits_w).unwrap() as i32;
        let w_int: Vec<i32> = (0..shape.weight_count())
            .map(|_| rng.random_range(-n_w..=n_w))
            .collect();
        let k = rng.random_range(-4..=4);
        let alpha_1 = 2f64.powi(rng.random_range(-3..=3));
        let theta = rng.random_range(1..=6);
        // any v_th in (theta - 1, theta] * alpha_1 has integer threshold theta
        let v_th = alpha_1 * (f64::from(theta) - rng.random_range(0.0..1.0));
        let weight_step = alpha_1 * 2f64.powi(k);
        oracle.push(OracleLayer {
            shape,
            weights: w_int.iter().map(|&w| f64::from(w) * weight_step).collect(),
            alpha_1,
            v_th,
            bits_u,
        });
        layers.push(QtLayer::new(shape, w_int, k, theta, bits_w, bits_u).unwrap());
        width = out;
    }
    let inputs = ternary_inputs(&mut rng, timesteps, input_width);
    QtCase {
        layers,
        oracle,
        inputs,
    }
}
