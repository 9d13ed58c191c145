use std::path::Path;

use eswt::{checkpoint, ppm};
use eswt_core::model::{EswtModel, ModelConfig};
use eswt_core::Shape;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ppm_bytes_survive_decode_and_encode(h in 1usize..12, w in 1usize..12, seed in any::<u64>()) {
        let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
        bytes.extend((0..h * w * 3).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 13) as u8));
        let img = ppm::decode(&bytes, Path::new("p.ppm")).unwrap();
        prop_assert_eq!(img.shape(), Shape::new(1, 3, h, w));
        prop_assert_eq!(ppm::encode(&img).unwrap(), bytes);
    }

    #[test]
    fn truncated_ppm_is_rejected(h in 1usize..6, w in 1usize..6, cut in 1usize..10) {
        let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
        bytes.extend(std::iter::repeat_n(7u8, h * w * 3));
        bytes.truncate(bytes.len() - cut.min(h * w * 3));
        prop_assert!(ppm::decode(&bytes, Path::new("p.ppm")).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), iter in 0usize..1000, t in 0u64..1000) {
        let model = EswtModel::<f32>::init(ModelConfig::tiny(), seed).unwrap();
        let bytes = checkpoint::encode(&model, iter, t);
        let ck = checkpoint::decode(&bytes, Path::new("m.ckpt")).unwrap();
        prop_assert_eq!((ck.iter, ck.adam_t), (iter, t));
        prop_assert!(ck.model == model);
        prop_assert_eq!(checkpoint::encode(&ck.model, iter, t), bytes);
    }
}
