//! Property tests over the imaging and metric layers.

use proptest::prelude::*;
use std::io::Cursor;

use faultlab_core::eval::{accuracy, cohen_kappa, per_class_accuracy, ConfusionMatrix};
use faultlab_core::fault::{FaultLabel, NUM_CLASSES};
use faultlab_core::imaging::{rsrp_to_gray, split_indices, GrayImage, RgbImage};
use faultlab_core::netpbm::{read_pgm, read_ppm, write_pgm, write_ppm};
use faultlab_core::scenario::RsrpMap;

fn gray_strategy() -> impl Strategy<Value = GrayImage> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), w * h).prop_map(move |pixels| GrayImage {
            width: w,
            height: h,
            pixels,
        })
    })
}

fn rgb_strategy() -> impl Strategy<Value = RgbImage> {
    (1usize..10, 1usize..10).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<[u8; 3]>(), w * h).prop_map(move |pixels| RgbImage {
            width: w,
            height: h,
            pixels,
        })
    })
}

proptest! {
    #[test]
    fn pgm_roundtrip_is_identity(img in gray_strategy()) {
        let mut bytes = Vec::new();
        write_pgm(&img, &mut bytes).unwrap();
        let back = read_pgm(&mut Cursor::new(bytes)).unwrap();
        prop_assert_eq!(back, img);
    }

    #[test]
    fn ppm_roundtrip_is_identity(img in rgb_strategy()) {
        let mut bytes = Vec::new();
        write_ppm(&img, &mut bytes).unwrap();
        let back = read_ppm(&mut Cursor::new(bytes)).unwrap();
        prop_assert_eq!(back, img);
    }

    #[test]
    fn gray_mapping_is_monotone(values in proptest::collection::vec(-160.0f64..-30.0, 2..64)) {
        let mut sorted = values.clone();
        sorted.sort_unstable_by(f64::total_cmp);
        let map = RsrpMap {
            width: sorted.len(),
            height: 1,
            serving_sector: vec![0; sorted.len()],
            rsrp_dbm: sorted,
        };
        let img = rsrp_to_gray(&map, -130.0, -50.0).unwrap();
        prop_assert!(img.pixels.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn metrics_stay_in_range(cells in proptest::collection::vec(0u64..40, 64)) {
        let total: u64 = cells.iter().sum();
        prop_assume!(total > 0);
        let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        for (i, v) in cells.iter().enumerate() {
            counts[i / NUM_CLASSES][i % NUM_CLASSES] = *v;
        }
        let cm = ConfusionMatrix { counts };
        let acc = accuracy(&cm);
        prop_assert!((0.0..=1.0).contains(&acc));
        let kappa = cohen_kappa(&cm).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&kappa));
        let (pca, present) = per_class_accuracy(&cm);
        let weighted: f64 = (0..NUM_CLASSES)
            .map(|k| cm.row_total(k) as f64 * pca[k])
            .sum();
        prop_assert!((weighted / total as f64 - acc).abs() < 1e-12);
        for k in 0..NUM_CLASSES {
            prop_assert_eq!(present[k], cm.row_total(k) > 0);
        }
    }

    #[test]
    fn split_partitions_and_stratifies(
        class_sizes in proptest::collection::vec(2usize..12, 2..=NUM_CLASSES),
        seed in any::<u64>(),
    ) {
        let mut labels = Vec::new();
        for (code, n) in class_sizes.iter().enumerate() {
            for _ in 0..*n {
                labels.push(FaultLabel::from_code(code as u8).unwrap());
            }
        }
        let (train, test) = split_indices(&labels, 0.7, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for (code, n) in class_sizes.iter().enumerate() {
            let label = FaultLabel::from_code(code as u8).unwrap();
            let in_train = train.iter().filter(|&&i| labels[i] == label).count();
            let in_test = test.iter().filter(|&&i| labels[i] == label).count();
            prop_assert_eq!(in_train + in_test, *n);
            prop_assert!(in_train >= 1);
            prop_assert!(in_test >= 1);
            let expected = ((0.7 * *n as f64 + 1e-9).floor() as usize).clamp(1, n - 1);
            prop_assert_eq!(in_train, expected);
        }
    }
}
