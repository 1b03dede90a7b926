use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn finite_difference(net: &Mlp<f64>, loss: impl Fn(&Mlp<f64>) -> f64) -> Vec<f64> {
    let h = 1e-6;
    (0..net.param_count())
        .map(|k| {
            let mut plus = net.clone();
            plus.params_mut()[k] += h;
            let mut minus = net.clone();
            minus.params_mut()[k] -= h;
            (loss(&plus) - loss(&minus)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn output_bias_only() {
    let mut net = Mlp::<f32>::zeros(&[3, 4, 2]).unwrap();
    let (_, b) = net.layer_ranges(1);
    net.params_mut()[b.start] = 1.5;
    net.params_mut()[b.start + 1] = -2.0;
    for x in [[0.0, 0.0, 0.0], [1.0, -3.0, 7.0]] {
        assert_eq!(net.forward(&x).unwrap(), vec![1.5, -2.0]);
    }
}

#[test]
fn hand_set_one_two_one() {
    // h = relu(x*[1,-1] + [0.5,0.5]); y = h.[2,3] + 0.1
    let net = Mlp::<f64>::from_params(&[1, 2, 1], vec![1.0, -1.0, 0.5, 0.5, 2.0, 3.0, 0.1]).unwrap();
    assert_eq!(net.forward(&[2.0]).unwrap(), vec![2.0 * 2.5 + 0.1]);
    let trace = net.trace(&[2.0], 1).unwrap();
    assert_eq!(trace.output(), &[5.1]);
    // the second hidden unit has pre-activation -1.5 and must be exactly 0
    let y_neg = net.forward(&[-1.0]).unwrap()[0];
    assert_eq!(y_neg, 3.0 * 1.5 + 0.1);
}

#[test]
fn dimension_errors() {
    let net = Mlp::<f32>::zeros(&[3, 2]).unwrap();
    assert!(matches!(net.forward(&[1.0]), Err(NeuralError::Dimension { .. })));
    assert!(Mlp::<f32>::zeros(&[3]).is_err());
    assert!(Mlp::<f32>::zeros(&[3, 0, 1]).is_err());
    assert!(Mlp::<f32>::from_params(&[1, 1], vec![1.0]).is_err());
}

#[test]
fn batch_forward_matches_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = Mlp::<f32>::new(&[5, 8, 8, 3], &mut rng).unwrap();
    let xs: Vec<f32> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let batch = net.forward_batch(&xs, 4).unwrap();
    for r in 0..4 {
        assert_eq!(net.forward(&xs[r * 5..(r + 1) * 5]).unwrap(), batch[r * 3..(r + 1) * 3].to_vec());
    }
    let trace = net.trace(&xs, 4).unwrap();
    for (a, b) in trace.output().iter().zip(&batch) {
        assert!((a - *b as f64).abs() < 1e-5);
    }
}

#[test]
fn zero_error_gives_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = Mlp::<f64>::new(&[4, 6, 2], &mut rng).unwrap();
    let xs: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let targets = net.forward_batch(&xs, 3).unwrap();
    let (loss, grads) = mse_loss_and_grads(&net, &xs, 3, &targets, None).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grads.iter().all(|&g| g == 0.0));
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let dims = [rng.gen_range(1..5), rng.gen_range(2..6), rng.gen_range(2..6), rng.gen_range(1..4)];
        let mut net = Mlp::<f64>::new(&dims, &mut rng).unwrap();
        // non-zero biases keep pre-activations off the rectifier's kink
        for l in 0..net.layers() {
            let (_, b) = net.layer_ranges(l);
            for p in &mut net.params_mut()[b] {
                *p = rng.gen_range(-0.5..0.5);
            }
        }
        let rows = rng.gen_range(1..6);
        let xs: Vec<f64> = (0..rows * dims[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let targets: Vec<f64> = (0..rows * dims[3]).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mask: Vec<bool> = (0..rows * dims[3]).map(|_| rng.gen_bool(0.5)).collect();
        for m in [None, Some(mask.as_slice())] {
            let (_, grads) = mse_loss_and_grads(&net, &xs, rows, &targets, m).unwrap();
            let fd = finite_difference(&net, |n| mse_loss_and_grads(n, &xs, rows, &targets, m).unwrap().0);
            assert!(rel_err(&grads, &fd) < 1e-4, "{}", rel_err(&grads, &fd));
        }
    }
}

#[test]
fn masking_equals_matching_the_prediction() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = Mlp::<f64>::new(&[3, 5, 4], &mut rng).unwrap();
    let xs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y = net.forward_batch(&xs, 2).unwrap();
    let actions = [1usize, 3];
    let mut mask = vec![false; 8];
    let mut targets = vec![0.0; 8];
    let mut full = y.clone();
    for (r, &a) in actions.iter().enumerate() {
        mask[r * 4 + a] = true;
        targets[r * 4 + a] = 0.7;
        full[r * 4 + a] = 0.7;
    }
    let (l1, g1) = mse_loss_and_grads(&net, &xs, 2, &targets, Some(&mask)).unwrap();
    let (l2, g2) = mse_loss_and_grads(&net, &xs, 2, &full, None).unwrap();
    assert!((l1 - l2).abs() < 1e-12);
    for (a, b) in g1.iter().zip(&g2) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn adam_closed_forms() {
    let mut net = Mlp::<f64>::from_params(&[1, 1], vec![0.3, -0.2]).unwrap();
    let mut adam = Adam::new(2, 0.01);
    adam.step(&mut net, &[0.0, 0.0]).unwrap();
    assert_eq!(net.params(), &[0.3, -0.2]);

    let mut adam = Adam::new(2, 0.01);
    let g = [0.5, -4.0];
    let d = adam.deltas(&g).unwrap();
    for (di, gi) in d.iter().zip(g) {
        // bias correction makes the first step lr * g / (|g| + eps)
        assert!((di - (-0.01 * gi / (gi.abs() + 1e-8))).abs() < 1e-15);
    }
    assert_eq!(adam.step_count(), 1);
    assert!(adam.deltas(&[1.0]).is_err());
}

#[test]
fn training_is_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut net = Mlp::<f32>::new(&[2, 8, 1], &mut rng).unwrap();
        let mut adam = Adam::new(net.param_count(), 0.01);
        for _ in 0..50 {
            let xs: Vec<f32> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t: Vec<f64> = xs.chunks(2).map(|c| (c[0] - c[1]) as f64).collect();
            let (_, g) = mse_loss_and_grads(&net, &xs, 4, &t, None).unwrap();
            adam.step(&mut net, &g).unwrap();
        }
        net
    };
    assert_eq!(run().to_bytes(), run().to_bytes());
}

#[test]
fn fits_a_line() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = Mlp::<f32>::new(&[1, 16, 1], &mut rng).unwrap();
    let mut adam = Adam::new(net.param_count(), 0.01);
    let xs: Vec<f32> = (0..32).map(|i| i as f32 / 16.0 - 1.0).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| 2.0 * x as f64).collect();
    let mut loss = f64::INFINITY;
    for _ in 0..2000 {
        let (l, g) = mse_loss_and_grads(&net, &xs, 32, &ys, None).unwrap();
        loss = l;
        adam.step(&mut net, &g).unwrap();
    }
    assert!(loss < 1e-3, "{loss}");
}

#[test]
fn polyak_examples() {
    let train = Mlp::<f64>::from_params(&[1, 1], vec![1.0, 1.0]).unwrap();
    let mut target = Mlp::<f64>::zeros(&[1, 1]).unwrap();
    target.polyak_update(&train, 0.005).unwrap();
    assert_eq!(target.params(), &[0.005, 0.005]);

    let mut hard = Mlp::<f64>::zeros(&[1, 1]).unwrap();
    hard.polyak_update(&train, 1.0).unwrap();
    assert_eq!(hard.params(), train.params());

    let mut geo = Mlp::<f64>::zeros(&[1, 1]).unwrap();
    for k in 1..=1000 {
        geo.polyak_update(&train, 0.005).unwrap();
        let expected = 1.0 - 0.995f64.powi(k);
        assert!((geo.params()[0] - expected).abs() < 1e-12);
    }
    assert!(target.polyak_update(&Mlp::zeros(&[2, 1]).unwrap(), 0.5).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let net = Mlp::<f32>::new(&[14, 32, 32, 26], &mut rng).unwrap();
    let bytes = net.to_bytes();
    let back = Mlp::<f32>::from_bytes(&bytes).unwrap();
    assert_eq!(back, net);
    assert_eq!(back.to_bytes(), bytes);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.bin");
    net.save(&path).unwrap();
    assert_eq!(Mlp::<f32>::load(&path).unwrap(), net);

    let mut wrong_version = bytes.clone();
    wrong_version[8] = 2;
    assert!(matches!(Mlp::<f32>::from_bytes(&wrong_version), Err(NeuralError::Checkpoint(m)) if m.contains("version")));
    assert!(Mlp::<f64>::from_bytes(&bytes).is_err());
    assert!(Mlp::<f32>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    assert!(Mlp::<f32>::from_bytes(b"garbage!").is_err());
}

proptest! {
    #[test]
    fn polyak_is_convex(a in prop::collection::vec(-10.0f64..10.0, 4), b in prop::collection::vec(-10.0f64..10.0, 4), rho in 0.0f64..=1.0) {
        let train = Mlp::<f64>::from_params(&[1, 2], a[..4].to_vec()).unwrap();
        let mut target = Mlp::<f64>::from_params(&[1, 2], b[..4].to_vec()).unwrap();
        target.polyak_update(&train, rho).unwrap();
        for k in 0..4 {
            let (lo, hi) = (a[k].min(b[k]), a[k].max(b[k]));
            prop_assert!(target.params()[k] >= lo - 1e-12 && target.params()[k] <= hi + 1e-12);
        }
    }

    #[test]
    fn forward_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::<f32>::new(&[3, 4, 2], &mut rng).unwrap();
        let x = [rng.gen_range(-1.0f32..1.0), 0.5, -0.25];
        prop_assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
    }
}
