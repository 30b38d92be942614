use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use senet::data::{allocate, augment, split, AugmentConfig, Dataset, Fractions, Image, Split};
use senet::tensor::Tape;
use senet::Tensor;

fn tensor(dims: Vec<usize>, values: Vec<f64>) -> Tensor<f64> {
    Tensor::new(dims, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..6, cols in 2usize..8, scale in 0.1f64..50.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..rows * cols).map(|_| scale * rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let mut tape = Tape::new();
        let x = tape.constant(tensor(vec![rows, cols], values));
        let p = tape.softmax(x).unwrap();
        for r in 0..rows {
            let row = tape.value(p).row(r);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_output_extent(h in 2usize..9, w in 2usize..9, k in 1usize..4, cin in 1usize..3, cout in 1usize..4) {
        prop_assume!(k <= h && k <= w);
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::zeros(vec![1, h, w, cin]).unwrap());
        let kern = tape.constant(Tensor::zeros(vec![k, k, cin, cout]).unwrap());
        let y = tape.conv2d(x, kern).unwrap();
        prop_assert_eq!(tape.shape(y).dims(), &[1, h - k + 1, w - k + 1, cout]);
        let (oh, ow) = (h - k + 1, w - k + 1);
        match tape.maxpool2d(y) {
            Ok(p) => prop_assert_eq!(tape.shape(p).dims(), &[1, oh / 2, ow / 2, cout]),
            Err(_) => prop_assert!(oh < 2 || ow < 2),
        }
    }

    #[test]
    fn relu_gradient_is_a_mask(values in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        prop_assume!(values.iter().all(|v| v.abs() > 1e-9));
        let n = values.len();
        let mut tape = Tape::new();
        let x = tape.variable(tensor(vec![n], values.clone()));
        let y = tape.relu(x);
        let s = tape.sum(y);
        tape.backward(s).unwrap();
        let g = tape.grad(x).unwrap();
        for (v, d) in values.iter().zip(g) {
            prop_assert_eq!(*d, if *v > 0.0 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn allocation_adds_up_and_tracks_quotas(n in 3usize..2000, train in 0.2f64..0.9) {
        let rest = (1.0 - train) / 2.0;
        let f = Fractions { train, validation: rest, test: 1.0 - train - rest };
        let counts = allocate(n, &f);
        prop_assert_eq!(counts.iter().sum::<usize>(), n);
        prop_assert!(counts.iter().all(|&c| c >= 1));
        for (c, q) in counts.iter().zip([f.train, f.validation, f.test]) {
            let quota = q * n as f64;
            prop_assert!((*c as f64 - quota).abs() < 1.0 + 1e-9 || quota < 1.0, "{} vs {}", c, quota);
        }
    }

    #[test]
    fn split_is_a_stratified_partition(sizes in prop::collection::vec(3usize..40, 2..5), seed in any::<u64>()) {
        let groups = sizes
            .iter()
            .enumerate()
            .map(|(c, &n)| (format!("c{c}"), vec![Image::filled(1, 1, [0.0; 3]); n]))
            .collect();
        let ds = Dataset::from_images(groups).unwrap();
        let m = split(&ds, seed, Fractions::default()).unwrap();
        let mut seen = vec![0u8; ds.len()];
        for s in Split::ALL {
            for i in m.indices(s) {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&k| k == 1));
        for (c, counts) in m.class_counts().iter().enumerate() {
            prop_assert_eq!(counts.iter().sum::<usize>(), sizes[c]);
            prop_assert!(counts.iter().all(|&k| k >= 1));
        }
        prop_assert_eq!(&split(&ds, seed, Fractions::default()).unwrap(), &m);
    }

    #[test]
    fn augmentation_stays_in_range(seed in any::<u64>(), h in 3usize..12, w in 3usize..12) {
        let img = Image::new(h, w, (0..h * w * 3).map(|i| (i * 37 % 101) as f32 / 100.0).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = augment(&img, &AugmentConfig::default(), &mut rng);
        prop_assert_eq!((out.height(), out.width()), (h, w));
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
