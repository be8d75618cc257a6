use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use votestack_core::nnkernel::{
    bilstm_forward, conv1d_maxpool_forward, gru_forward, lstm_forward, probe_layer, softmax_rows,
    standard_cases, GruParams, LayerCase, LstmParams, Tensor,
};

const STEP: f64 = 1e-5;

#[test]
fn every_layer_matches_central_differences() {
    let mut failures = Vec::new();
    for case in standard_cases() {
        let tolerance = if matches!(case, LayerCase::Dense { .. }) {
            1e-6
        } else {
            1e-5
        };
        for seed in 0..10 {
            let r = probe_layer(case, seed, STEP).unwrap();
            assert!(r.coordinates > 0);
            // NaN counts as a failure
            if r.max_relative_error.is_nan() || r.max_relative_error >= tolerance {
                failures.push(r);
            }
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

fn poisoned(len: usize, dim: usize, true_length: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let data = (0..len * dim)
        .map(|i| {
            if i / dim < true_length {
                rng.gen_range(-1.0..1.0)
            } else {
                f64::NAN
            }
        })
        .collect();
    Tensor::from_vec(&[len, dim], data).unwrap()
}

#[test]
fn padding_positions_are_never_read() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for true_length in 1..=4 {
        let seq = poisoned(6, 3, true_length, &mut rng);
        let filters = Tensor::glorot(&[4, 2, 3], 6, 4, &mut rng);
        let (out, _) =
            conv1d_maxpool_forward(&seq, &filters, &Tensor::zeros(&[4]), true_length).unwrap();
        assert!(out.is_finite());
        let lstm = LstmParams::glorot(3, 5, &mut rng);
        let back = LstmParams::glorot(3, 5, &mut rng);
        assert!(lstm_forward(&seq, &lstm, true_length)
            .unwrap()
            .0
            .is_finite());
        assert!(bilstm_forward(&seq, &lstm, &back, true_length)
            .unwrap()
            .0
            .is_finite());
        let gru = GruParams::glorot(3, 5, &mut rng);
        assert!(gru_forward(&seq, &gru, true_length).unwrap().0.is_finite());
    }
}

#[test]
fn softmax_rows_are_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let k = rng.gen_range(2..8);
        let data = (0..4 * k).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let p = softmax_rows(&Tensor::from_vec(&[4, k], data).unwrap());
        for r in 0..4 {
            let row = p.row(r);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn zero_parameter_recurrences_have_zero_gradients() {
    for case in [
        LayerCase::Lstm {
            len: 3,
            dim: 2,
            hidden: 2,
            true_length: 0,
        },
        LayerCase::Gru {
            len: 3,
            dim: 2,
            hidden: 2,
            true_length: 0,
        },
    ] {
        let r = probe_layer(case, 1, STEP).unwrap();
        assert_eq!(r.max_relative_error, 0.0);
    }
}
