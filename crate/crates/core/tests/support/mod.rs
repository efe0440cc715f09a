//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use dripvision::tensor_nn::{Mode, Network, Tensor4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Location of one trainable scalar: (layer, array within layer, element).
pub type Coord = (usize, usize, usize);

pub fn all_coords(net: &Network<f64>) -> Vec<Coord> {
    let mut out = Vec::new();
    for (l, layer) in net.layers.iter().enumerate() {
        for (a, arr) in layer.params().iter().enumerate() {
            for e in 0..arr.len() {
                out.push((l, a, e));
            }
        }
    }
    out
}

pub fn random_coords(net: &Network<f64>, count: usize, seed: u64) -> Vec<Coord> {
    let all = all_coords(net);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| all[rng.random_range(0..all.len())]).collect()
}

fn perturb(net: &mut Network<f64>, (l, a, e): Coord, delta: f64) {
    net.layers[l].params_mut()[a][e] += delta;
}

/// Central difference `(L(p+h) - L(p-h)) / 2h` for each coordinate. The
/// loss closure receives a fresh forward-pass RNG seed each time so
/// dropout masks are identical across evaluations.
pub fn central_differences(
    net: &Network<f64>,
    coords: &[Coord],
    step: f64,
    loss: impl Fn(&mut Network<f64>) -> f64,
) -> Vec<f64> {
    coords
        .iter()
        .map(|&c| {
            let mut plus = net.clone();
            perturb(&mut plus, c, step);
            let mut minus = net.clone();
            perturb(&mut minus, c, -step);
            (loss(&mut plus) - loss(&mut minus)) / (2.0 * step)
        })
        .collect()
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-8 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Fixed random projection `Σ r·y` used as a scalar loss.
pub fn projection(dims: [usize; 4], seed: u64) -> Tensor4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dims.iter().product();
    Tensor4::from_vec(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn dot(a: &Tensor4<f64>, b: &Tensor4<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

pub fn random_input(dims: [usize; 4], seed: u64) -> Tensor4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dims.iter().product();
    Tensor4::from_vec(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Train-mode forward with a fixed dropout seed.
pub fn forward_train(net: &mut Network<f64>, x: &Tensor4<f64>, seed: u64) -> Tensor4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    net.forward(x, Mode::Train, &mut rng).unwrap().0
}

/// Analytic gradient of `Σ r·f(x)` at the given coordinates.
pub fn analytic_projection_grads(
    net: &Network<f64>,
    x: &Tensor4<f64>,
    r: &Tensor4<f64>,
    coords: &[Coord],
    seed: u64,
) -> (Vec<f64>, Tensor4<f64>) {
    let mut work = net.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, cache) = work.forward(x, Mode::Train, &mut rng).unwrap();
    let g = net.backward(&cache, r).unwrap();
    (
        coords.iter().map(|&(l, a, e)| g.layers[l][a][e]).collect(),
        g.input,
    )
}

/// Which side of every non-differentiable point the forward pass is on:
/// the sign of each leaky ReLU input and the winner of each pooling window.
/// Runs layer by layer with one RNG so dropout masks match a whole-network
/// pass with the same seed.
pub fn kink_signature(net: &Network<f64>, x: &Tensor4<f64>, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sig = Vec::new();
    let mut h = x.clone();
    for layer in &net.layers {
        match layer {
            dripvision::tensor_nn::Layer::LeakyRelu => sig.extend(h.data().iter().map(|&v| u32::from(v >= 0.0))),
            dripvision::tensor_nn::Layer::MaxPool2 => {
                let [n, rows, cols, ch] = h.dims();
                for b in 0..n {
                    for y in (0..rows - 1).step_by(2) {
                        for xx in (0..cols - 1).step_by(2) {
                            for c in 0..ch {
                                let cand = [(y, xx), (y, xx + 1), (y + 1, xx), (y + 1, xx + 1)];
                                let mut best = 0;
                                for (k, &(yy, xc)) in cand.iter().enumerate() {
                                    if h.get(b, yy, xc, c) > h.get(b, cand[best].0, cand[best].1, c) {
                                        best = k;
                                    }
                                }
                                sig.push(best as u32);
                            }
                        }
                    }
                }
            }
            _ => {}
        }
        let mut one = Network::new(vec![layer.clone()]);
        h = one.forward(&h, Mode::Train, &mut rng).unwrap().0;
    }
    sig
}

/// True when moving coordinate `c` by `±step` crosses no kink.
pub fn smooth_window(net: &Network<f64>, x: &Tensor4<f64>, seed: u64, c: Coord, step: f64) -> bool {
    let base = kink_signature(net, x, seed);
    [step, -step].iter().all(|&d| {
        let mut moved = net.clone();
        perturb(&mut moved, c, d);
        kink_signature(&moved, x, seed) == base
    })
}
