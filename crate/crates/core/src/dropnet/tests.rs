use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::weights::{decode, encode};
use super::*;
use crate::error::Error;
use crate::tensor_nn::{Layer, Tensor4};

fn random_frames(n: usize, w: usize, seed: u64) -> Tensor4<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor4::from_vec([n, w, w, 3], (0..n * w * w * 3).map(|_| rng.random::<f32>()).collect()).unwrap()
}

fn small_config() -> NetConfig {
    NetConfig::standard(32, 4, &[4, 4, 8], 11)
}

#[test]
fn desk_geometry_gives_eight_by_eight_grid() {
    let net = DropNet::build(NetConfig::desk()).unwrap();
    let grids = net.forward(&random_frames(1, 128, 1)).unwrap();
    assert_eq!(grids.len(), 1);
    assert_eq!(grids[0].size(), 8);
    assert_eq!(grids[0].values().len(), 8 * 8 * 2);
}

#[test]
fn forward_is_deterministic_and_in_unit_interval() {
    let net = DropNet::build(small_config()).unwrap();
    let frames = random_frames(3, 32, 2);
    let a = net.forward(&frames).unwrap();
    let b = net.forward(&frames).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().flat_map(|g| g.values()).all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn build_is_deterministic_per_seed() {
    let a = DropNet::build(small_config()).unwrap();
    let b = DropNet::build(small_config()).unwrap();
    let c = DropNet::build(small_config().with_seed(12)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn batched_rows_equal_single_frame_forward() {
    let net = DropNet::build(small_config()).unwrap();
    let frames = random_frames(5, 32, 3);
    let batched = net.forward(&frames).unwrap();
    for (m, grid) in batched.iter().enumerate() {
        let single = net.forward(&frames.slice_batch(m)).unwrap();
        for (x, y) in grid.values().iter().zip(single[0].values()) {
            assert!((x - y).abs() <= 1e-5);
        }
    }
}

#[test]
fn wrong_frame_size_is_a_shape_error() {
    let net = DropNet::build(small_config()).unwrap();
    assert!(matches!(net.forward(&random_frames(1, 16, 0)), Err(Error::Shape(_))));
}

#[test]
fn param_count_matches_enumeration_of_stored_arrays() {
    for cfg in [small_config(), NetConfig::desk(), NetConfig::reference()] {
        let net = DropNet::build(cfg.clone()).unwrap();
        let mut enumerated = 0;
        for layer in &net.network.layers {
            match layer {
                Layer::Conv(c) => enumerated += c.weight.len() + c.bias.len(),
                Layer::BatchNorm(b) => enumerated += b.gamma.len() + b.beta.len(),
                _ => {}
            }
        }
        assert_eq!(net.param_count(), enumerated);
        assert_eq!(cfg.param_count(), enumerated);
    }
    assert_eq!(DropNet::build(NetConfig::reference()).unwrap().param_count(), 1_091_202);
}

#[test]
fn single_pointwise_conv_has_eight_parameters() {
    let cfg = NetConfig {
        input_size: 4,
        grid_size: 4,
        layers: vec![
            LayerSpec::Conv {
                kernel: 1,
                in_channels: 3,
                out_channels: 2,
            },
            LayerSpec::Sigmoid,
        ],
        seed: 0,
        bn_epsilon: 1e-5,
        bn_momentum: 0.1,
    };
    assert_eq!(DropNet::build(cfg).unwrap().param_count(), 8);
}

#[test]
fn weight_file_round_trip_is_bit_exact() {
    let mut net = DropNet::build(small_config()).unwrap();
    if let Layer::BatchNorm(b) = &mut net.network.layers[1] {
        b.running_mean[0] = 0.123;
        b.running_var[1] = 4.5;
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.drpw");
    save_weights(&net, &path).unwrap();
    let back = load_weights(&path).unwrap();
    assert_eq!(back.config(), net.config());
    for (a, b) in net.network.layers.iter().zip(&back.network.layers) {
        for (pa, pb) in a.params().iter().zip(b.params()) {
            let ba: Vec<u32> = pa.iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u32> = pb.iter().map(|v| v.to_bits()).collect();
            assert_eq!(ba, bb);
        }
    }
    assert_eq!(back, net);
}

#[test]
fn wrong_magic_rejected() {
    let mut bytes = encode(&DropNet::build(small_config()).unwrap()).unwrap();
    bytes[0] = b'X';
    assert!(matches!(decode(&bytes), Err(Error::Format(_))));
}

#[test]
fn corrupted_payload_fails_crc() {
    let mut bytes = encode(&DropNet::build(small_config()).unwrap()).unwrap();
    let n = bytes.len();
    bytes[n - 10] ^= 0x40;
    let err = decode(&bytes).unwrap_err();
    assert!(err.to_string().contains("CRC"), "{err}");
}

#[test]
fn truncated_file_is_io_error() {
    let bytes = encode(&DropNet::build(small_config()).unwrap()).unwrap();
    let err = decode(&bytes[..bytes.len() / 2]).unwrap_err();
    assert!(matches!(err, Error::Io(ref e) if e.kind() == std::io::ErrorKind::UnexpectedEof));
}

#[test]
fn shape_table_disagreeing_with_payload_rejected() {
    let net = DropNet::build(small_config()).unwrap();
    let mut bytes = encode(&net).unwrap();
    // Shrink the first array's declared leading dim (kernel 5 -> 4).
    let config_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let first = 12 + config_len + 4;
    let name_len = u32::from_le_bytes(bytes[first..first + 4].try_into().unwrap()) as usize;
    let dim0 = first + 4 + name_len + 1;
    bytes[dim0..dim0 + 4].copy_from_slice(&4u32.to_le_bytes());
    assert!(matches!(decode(&bytes), Err(Error::Format(_))));

    // Extra payload bytes before the checksum.
    let mut bytes = encode(&net).unwrap();
    let n = bytes.len();
    bytes.splice(n - 4..n - 4, [0u8; 8]);
    assert!(matches!(decode(&bytes), Err(Error::Format(_))));
}
