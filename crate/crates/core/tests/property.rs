//! Property tests for the algebra and container invariants.

use proptest::prelude::*;
use qcae_core::imaging::{decode_quaternion_image, encode_color_quaternion, ImageBuffer};
use qcae_core::quat::{mat4_mul_vec, Quaternion};
use qcae_core::tensor::QTensor;

fn quat_strategy() -> impl Strategy<Value = Quaternion> {
    (
        -100.0f64..100.0,
        -100.0f64..100.0,
        -100.0f64..100.0,
        -100.0f64..100.0,
    )
        .prop_map(|(r, x, y, z)| Quaternion::new(r, x, y, z))
}

proptest! {
    #[test]
    fn hamilton_norm_multiplicative(a in quat_strategy(), b in quat_strategy()) {
        let prod = a.hamilton(b);
        let scale = a.norm() * b.norm();
        prop_assert!((prod.norm() - scale).abs() <= 1e-9 * scale.max(1.0));
    }

    #[test]
    fn matrix_representation_is_left_multiplication(a in quat_strategy(), b in quat_strategy()) {
        let via_matrix = mat4_mul_vec(&a.to_real_matrix(), b.to_array());
        let direct = a.hamilton(b).to_array();
        for c in 0..4 {
            prop_assert!((via_matrix[c] - direct[c]).abs() <= 1e-9 * direct[c].abs().max(1.0));
        }
    }

    #[test]
    fn real_blocks_roundtrip(
        c in 1usize..4,
        h in 1usize..6,
        w in 1usize..6,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..4 * c * h * w).map(|_| rng.random_range(-10.0..10.0)).collect();
        let t = QTensor::from_data(c, h, w, data).unwrap();
        let back = QTensor::from_real_blocks(&t.to_real_blocks()).unwrap();
        prop_assert_eq!(t, back);
    }

    #[test]
    fn color_encode_decode_is_identity(
        h in 1usize..5,
        w in 1usize..5,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<u8> = (0..3 * h * w).map(|_| rng.random()).collect();
        let img = ImageBuffer::from_rgb(h, w, data).unwrap();
        let decoded = decode_quaternion_image(&encode_color_quaternion(&img)).unwrap();
        prop_assert_eq!(img, decoded);
    }

    #[test]
    fn elementwise_ops_preserve_shape(
        c in 1usize..4,
        h in 1usize..5,
        w in 1usize..5,
    ) {
        let t = QTensor::zeros(c, h, w).unwrap();
        prop_assert_eq!(t.add(&t).unwrap().shape(), t.shape());
        prop_assert_eq!(t.scale(2.0).shape(), t.shape());
        prop_assert_eq!(t.hadamard(&t).unwrap().shape(), t.shape());
        prop_assert_eq!(t.map(|v| v + 1.0).shape(), t.shape());
    }
}
