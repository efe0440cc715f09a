use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn t(dims: [usize; 4], data: &[f64]) -> Tensor4<f64> {
    Tensor4::from_vec(dims, data.to_vec()).unwrap()
}

#[test]
fn identity_pointwise_kernel() {
    let conv = Conv2d::from_parts(1, 1, 1, vec![1.0], vec![0.0]).unwrap();
    let x = t([1, 3, 3, 1], &[1., 2., 3., 4., 5., 6., 7., 8., 9.]);
    assert_eq!(conv2d(&x, &conv).unwrap(), x);
}

#[test]
fn five_by_five_ones_over_two_by_two_ones() {
    let conv = Conv2d::from_parts(5, 1, 1, vec![1.0; 25], vec![0.0]).unwrap();
    let x = t([1, 2, 2, 1], &[1.0; 4]);
    let y = conv2d(&x, &conv).unwrap();
    assert_eq!(y.data(), &[4.0; 4]);
}

#[test]
fn pointwise_two_channels_to_one() {
    let (a, b, w1, w2, c) = (0.5, -2.0, 3.0, 0.25, 0.125);
    let conv = Conv2d::from_parts(1, 2, 1, vec![w1, w2], vec![c]).unwrap();
    let y = conv2d(&t([1, 1, 1, 2], &[a, b]), &conv).unwrap();
    assert_eq!(y.data()[0], a * w1 + b * w2 + c);
}

#[test]
fn conv_rejects_channel_mismatch_and_non_finite() {
    let conv = Conv2d::<f64>::zeros(1, 2, 1).unwrap();
    assert!(matches!(conv2d(&t([1, 1, 1, 1], &[1.0]), &conv), Err(Error::Shape(_))));
    assert!(matches!(
        conv2d(&t([1, 1, 1, 2], &[f64::NAN, 1.0]), &conv),
        Err(Error::NonFinite(_))
    ));
}

#[test]
fn leaky_relu_examples() {
    let y = leaky_relu(&t([1, 1, 3, 1], &[2.0, -1.0, 0.0]));
    assert_eq!(y.data(), &[2.0, -0.1, 0.0]);
}

#[test]
fn sigmoid_examples() {
    let y = sigmoid(&t([1, 1, 2, 1], &[0.0, 100.0]));
    assert_eq!(y.data()[0], 0.5);
    assert!((y.data()[1] - 1.0).abs() < 1e-6);
    // f32 would round these to the endpoints without the clamp
    let z = sigmoid(&Tensor4::<f32>::from_vec([1, 1, 2, 1], vec![100.0, -200.0]).unwrap());
    assert!(z.data()[0] < 1.0 && z.data()[1] > 0.0);
}

#[test]
fn sigmoid_reflection_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let x: f64 = rng.random_range(-20.0..20.0);
        let a = sigmoid_scalar(-x);
        let b = 1.0 - sigmoid_scalar(x);
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn max_pool_examples() {
    let (y, _) = max_pool2(&t([1, 2, 2, 1], &[1., 2., 3., 4.])).unwrap();
    assert_eq!(y.data(), &[4.0]);
    let x: Vec<f64> = (1..=16).map(f64::from).collect();
    let (y, _) = max_pool2(&t([1, 4, 4, 1], &x)).unwrap();
    assert_eq!(y.data(), &[6., 8., 14., 16.]);
    let (y, _) = max_pool2(&t([1, 2, 4, 1], &[7.0; 8])).unwrap();
    assert_eq!(y.data(), &[7.0, 7.0]);
    assert!(matches!(max_pool2(&t([1, 3, 2, 1], &[0.0; 6])), Err(Error::Shape(_))));
}

#[test]
fn batch_norm_examples() {
    let x = t([1, 1, 2, 1], &[1.0, 3.0]);
    let mut id = BatchNorm::identity(1, 1e-5, 0.1);
    let y = batch_norm(&x, &mut id, Mode::Infer).unwrap();
    for (a, b) in y.data().iter().zip(x.data()) {
        assert!((a - b).abs() < 1e-4);
    }

    let mut bn = BatchNorm::identity(1, 1e-12, 0.1);
    let y = batch_norm(&x, &mut bn, Mode::Train).unwrap();
    assert!((y.data()[0] + 1.0).abs() < 1e-9 && (y.data()[1] - 1.0).abs() < 1e-9);

    let mut bn = BatchNorm::identity(1, 1e-12, 0.1);
    bn.gamma = vec![2.0];
    bn.beta = vec![1.0];
    let y = batch_norm(&x, &mut bn, Mode::Train).unwrap();
    assert!((y.data()[0] + 1.0).abs() < 1e-9 && (y.data()[1] - 3.0).abs() < 1e-9);
}

#[test]
fn dropout_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Tensor4::<f32>::filled([1, 1, 10, 1], 1.0).unwrap();
    assert_eq!(dropout(&x, 0.0, Mode::Train, &mut rng).unwrap(), x);
    assert_eq!(dropout(&x, 0.0, Mode::Infer, &mut rng).unwrap(), x);
    assert_eq!(dropout(&x, 0.2, Mode::Infer, &mut rng).unwrap(), x);
    assert!(matches!(dropout(&x, 1.0, Mode::Train, &mut rng), Err(Error::Param(_))));
    assert!(matches!(dropout(&x, -0.1, Mode::Infer, &mut rng), Err(Error::Param(_))));

    let big = Tensor4::<f32>::filled([1, 1000, 1000, 1], 1.0).unwrap();
    let y = dropout(&big, 0.2, Mode::Train, &mut rng).unwrap();
    let mean: f64 = y.data().iter().map(|&v| v as f64).sum::<f64>() / 1e6;
    assert!((mean - 1.0).abs() < 0.01, "mean {mean}");

    let a = dropout(&big, 0.2, Mode::Train, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let b = dropout(&big, 0.2, Mode::Train, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut net = Network::new(vec![
        Layer::Conv(Conv2d::<f64>::he_init(5, 2, 3, &mut rng).unwrap()),
        Layer::BatchNorm(BatchNorm::identity(3, 1e-5, 0.1)),
        Layer::LeakyRelu,
        Layer::MaxPool2,
        Layer::Conv(Conv2d::he_init(1, 3, 2, &mut rng).unwrap()),
        Layer::Sigmoid,
    ]);
    let x = Tensor4::from_vec([2, 4, 4, 2], (0..64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let (y, cache) = net.forward(&x, Mode::Train, &mut rng).unwrap();
    let g = net.backward(&cache, &Tensor4::zeros(y.dims()).unwrap()).unwrap();
    assert!(g.flat().all(|&v| v == 0.0));
    assert!(g.input.data().iter().all(|&v| v == 0.0));
}

#[test]
fn pointwise_conv_weight_gradient_is_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut net = Network::new(vec![Layer::Conv(Conv2d::from_parts(1, 1, 1, vec![0.7], vec![0.1]).unwrap())]);
    let x = t([1, 1, 1, 1], &[2.5]);
    let (_, cache) = net.forward(&x, Mode::Train, &mut rng).unwrap();
    let g = net.backward(&cache, &t([1, 1, 1, 1], &[1.0])).unwrap();
    assert_eq!(g.layers[0][0], vec![2.5]);
    assert_eq!(g.layers[0][1], vec![1.0]);
    assert_eq!(g.input.data(), &[0.7]);
}

#[test]
fn backward_rejects_foreign_cache() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut a = Network::<f64>::new(vec![Layer::LeakyRelu]);
    let b = Network::<f64>::new(vec![Layer::LeakyRelu, Layer::Sigmoid]);
    let x = t([1, 1, 1, 1], &[1.0]);
    let (y, cache) = a.forward(&x, Mode::Train, &mut rng).unwrap();
    assert!(matches!(b.backward(&cache, &y), Err(Error::Cache(_))));
    assert!(matches!(a.backward(&cache, &t([1, 1, 2, 1], &[0.0, 0.0])), Err(Error::Cache(_))));
}

#[test]
fn sgd_examples() {
    let mut w = [1.0f64];
    let mut v = [0.0];
    sgd_step(&mut w, &[0.5], &mut v, 0.0, 0.9).unwrap();
    assert_eq!(w, [1.0]);

    let mut w = [1.0f64];
    let mut v = [0.0];
    sgd_step(&mut w, &[0.5], &mut v, 0.1, 0.0).unwrap();
    assert!((w[0] - 0.95).abs() < 1e-15);

    let mut w = [0.0f64];
    let mut v = [0.0];
    sgd_step(&mut w, &[1.0], &mut v, 0.1, 0.9).unwrap();
    assert!((w[0] + 0.1).abs() < 1e-15);
    sgd_step(&mut w, &[1.0], &mut v, 0.1, 0.9).unwrap();
    assert!((w[0] + 0.1 + 0.19).abs() < 1e-15);

    assert!(matches!(sgd_step(&mut w, &[1.0, 2.0], &mut v, 0.1, 0.9), Err(Error::Shape(_))));
    assert!(matches!(sgd_step(&mut w, &[1.0], &mut v, -0.1, 0.9), Err(Error::Param(_))));
    assert!(matches!(sgd_step(&mut w, &[1.0], &mut v, 0.1, 1.0), Err(Error::Param(_))));
}

#[test]
fn infer_paths_are_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Tensor4::from_vec([1, 2, 2, 2], (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let mut bn = BatchNorm::<f64>::identity(2, 1e-5, 0.1);
    bn.running_mean = vec![0.2, -0.3];
    let before = bn.clone();
    let a = batch_norm(&x, &mut bn, Mode::Infer).unwrap();
    let b = batch_norm(&x, &mut bn, Mode::Infer).unwrap();
    assert_eq!(a, b);
    assert_eq!(bn, before);
}

fn small_tensor(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_is_linear(x in small_tensor(2 * 4 * 4 * 2), y in small_tensor(2 * 4 * 4 * 2),
                      w in small_tensor(25 * 2 * 3), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let conv = Conv2d::from_parts(5, 2, 3, w, vec![0.0; 3]).unwrap();
        let tx = t([2, 4, 4, 2], &x);
        let ty = t([2, 4, 4, 2], &y);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = conv2d(&t([2, 4, 4, 2], &mix), &conv).unwrap();
        let cx = conv2d(&tx, &conv).unwrap();
        let cy = conv2d(&ty, &conv).unwrap();
        for ((l, p), q) in lhs.data().iter().zip(cx.data()).zip(cy.data()) {
            prop_assert!((l - (a * p + b * q)).abs() < 1e-4);
        }
    }

    #[test]
    fn activations_monotone(mut v in small_tensor(32)) {
        v.iter_mut().for_each(|x| *x *= 30.0);
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let x = t([1, 1, 32, 1], &v);
        let r = leaky_relu(&x);
        let s = sigmoid(&x);
        for i in 1..32 {
            prop_assert!(r.data()[i] >= r.data()[i - 1]);
            prop_assert!(s.data()[i] >= s.data()[i - 1]);
        }
        prop_assert!(s.data().iter().all(|&y| y > 0.0 && y < 1.0));
    }

    #[test]
    fn pool_bounds_and_batch_permutation(v in small_tensor(3 * 4 * 4 * 2), shift in 1usize..3) {
        let x = t([3, 4, 4, 2], &v);
        let (y, _) = max_pool2(&x).unwrap();
        let global = v.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!(y.data().iter().all(|&p| p <= global));
        // every input element is bounded by its region's max
        for b in 0..3 { for r in 0..4 { for c in 0..4 { for ch in 0..2 {
            prop_assert!(x.get(b, r, c, ch) <= y.get(b, r / 2, c / 2, ch));
        }}}}
        let order: Vec<usize> = (0..3).map(|i| (i + shift) % 3).collect();
        let perm = Tensor4::concat(&order.iter().map(|&i| x.slice_batch(i)).collect::<Vec<_>>()).unwrap();
        let (py, _) = max_pool2(&perm).unwrap();
        for (k, &i) in order.iter().enumerate() {
            prop_assert_eq!(py.sample(k), y.sample(i));
        }
    }

    #[test]
    fn forward_stays_finite(v in small_tensor(1 * 8 * 8 * 3), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Network::new(vec![
            Layer::Conv(Conv2d::<f64>::he_init(5, 3, 4, &mut rng).unwrap()),
            Layer::BatchNorm(BatchNorm::identity(4, 1e-5, 0.1)),
            Layer::LeakyRelu,
            Layer::Dropout(0.2),
            Layer::MaxPool2,
            Layer::Conv(Conv2d::he_init(1, 4, 2, &mut rng).unwrap()),
            Layer::Sigmoid,
        ]);
        let x = t([1, 8, 8, 3], &v.iter().map(|a| a * 1e3).collect::<Vec<_>>());
        let (y, _) = net.forward(&x, Mode::Train, &mut rng).unwrap();
        prop_assert!(y.is_finite());
        prop_assert!(net.infer(&x).unwrap().is_finite());
    }
}
