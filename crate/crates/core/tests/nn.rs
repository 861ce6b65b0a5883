use aecif::nn::{
    batch_norm, bicubic_resize, bilinear_upsample, channel_softmax, channel_softmax_backward, conv2d, conv2d_backward,
    finite_difference_check, relu, relu_backward, resize_bilinear, resize_bilinear_backward, sigmoid,
    sigmoid_backward, BatchNorm2d, FeatureMap, GradCheckConfig, Mode, Param, Shape,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_map(rng: &mut ChaCha8Rng, shape: Shape) -> FeatureMap<f64> {
    FeatureMap::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..1.0))
}

fn random_param(rng: &mut ChaCha8Rng, name: &str, shape: &[usize]) -> Param<f64> {
    let mut p = Param::new(name, shape, 0.0, true);
    for v in &mut p.value {
        *v = rng.random_range(-1.0..1.0);
    }
    p
}

/// Direct seven-loop cross-correlation with explicit zero padding.
fn naive_conv(x: &FeatureMap<f64>, w: &Param<f64>, b: Option<&Param<f64>>, stride: usize, pad: usize) -> FeatureMap<f64> {
    let [co, ci, k, _] = [w.shape[0], w.shape[1], w.shape[2], w.shape[3]];
    let s = x.shape();
    let oh = (s.height + 2 * pad - k) / stride + 1;
    let ow = (s.width + 2 * pad - k) / stride + 1;
    FeatureMap::from_fn(Shape::new(s.batch, co, oh, ow), |n, o, y, xx| {
        let mut acc = b.map_or(0.0, |b| b.value[o]);
        for c in 0..ci {
            for ky in 0..k {
                for kx in 0..k {
                    let iy = (y * stride + ky) as isize - pad as isize;
                    let ix = (xx * stride + kx) as isize - pad as isize;
                    if iy < 0 || ix < 0 || iy >= s.height as isize || ix >= s.width as isize {
                        continue;
                    }
                    acc += w.value[((o * ci + c) * k + ky) * k + kx] * x.get(n, c, iy as usize, ix as usize);
                }
            }
        }
        acc
    })
}

#[test]
fn conv_matches_direct_loops_over_many_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..100 {
        let k = [1, 3, 5][rng.random_range(0..3)];
        let stride = rng.random_range(1..=2);
        let pad = rng.random_range(0..=k / 2);
        let h = rng.random_range(k.max(1)..12);
        let w = rng.random_range(k.max(1)..12);
        let shape = Shape::new(rng.random_range(1..3), rng.random_range(1..5), h, w);
        let x = random_map(&mut rng, shape);
        let co = rng.random_range(1..6);
        let weight = random_param(&mut rng, "w", &[co, shape.channels, k, k]);
        let bias = rng.random_bool(0.5).then(|| random_param(&mut rng, "b", &[co]));
        let fast = conv2d(&x, &weight, bias.as_ref(), stride, pad).unwrap();
        let slow = naive_conv(&x, &weight, bias.as_ref(), stride, pad);
        assert_eq!(fast.shape(), slow.shape());
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn conv_backward_is_the_adjoint() {
    // <conv(x), g> = <x, conv^T(g)> and the weight gradient is linear in x.
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..30 {
        let shape = Shape::new(2, 3, rng.random_range(3..9), rng.random_range(3..9));
        let x = random_map(&mut rng, shape);
        let w = random_param(&mut rng, "w", &[4, 3, 3, 3]);
        let stride = rng.random_range(1..=2);
        let y = conv2d(&x, &w, None, stride, 1).unwrap();
        let g = random_map(&mut rng, y.shape());
        let grads = conv2d_backward(&x, &w, stride, 1, &g).unwrap();
        let lhs: f64 = y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(grads.input.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        let wdot: f64 = w.value.iter().zip(&grads.weight).map(|(a, b)| a * b).sum();
        assert!((lhs - wdot).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }
}

#[test]
fn conv_rejects_mismatched_channels() {
    let x = FeatureMap::<f64>::zeros(Shape::new(1, 2, 5, 5));
    let w = Param::<f64>::new("w", &[1, 3, 3, 3], 0.0, true);
    assert!(conv2d(&x, &w, None, 1, 1).is_err());
}

#[test]
fn batch_norm_train_output_has_zero_mean_unit_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let x = FeatureMap::from_fn(Shape::new(4, 3, 5, 5), |_, c, _, _| 3.0 * c as f64 + rng.random_range(-2.0..2.0));
    let mut bn = BatchNorm2d::<f64>::new("bn", 3);
    let y = batch_norm(&x, &mut bn, Mode::Train, 1e-5).unwrap();
    let m = 4.0 * 25.0;
    for c in 0..3 {
        let vals: Vec<f64> = (0..4).flat_map(|n| y.plane(n, c).to_vec()).collect();
        let mean = vals.iter().sum::<f64>() / m;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
        assert!(mean.abs() < 1e-12, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-3, "var {var}");
    }
}

#[test]
fn batch_norm_running_moments_follow_momentum() {
    let x = FeatureMap::from_fn(Shape::new(2, 1, 2, 2), |n, _, y, x| (n * 4 + y * 2 + x) as f64);
    let mut bn = BatchNorm2d::<f64>::new("bn", 1);
    bn.forward_train(&x).unwrap();
    let mean = 3.5;
    let unbiased = (0..8).map(|v| (v as f64 - mean).powi(2)).sum::<f64>() / 7.0;
    let (rm, rv) = (&bn.running_mean, &bn.running_var);
    assert!((rm.value[0] - 0.1 * mean).abs() < 1e-12);
    assert!((rv.value[0] - (0.9 + 0.1 * unbiased)).abs() < 1e-12);
    // Eval mode uses running statistics, so it differs from train mode here.
    let eval = bn.forward_eval(&x).unwrap();
    let expected = (7.0 - rm.value[0]) / (rv.value[0] + 1e-5).sqrt();
    assert!((eval.get(1, 0, 1, 1) - expected).abs() < 1e-12);
}

#[test]
fn bilinear_two_by_two_to_four_by_four() {
    let x = FeatureMap::<f64>::from_vec(Shape::new(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let y = bilinear_upsample(&x, 4, 4).unwrap();
    // Half-pixel source coordinates: -0.25 clamps to 0, then 0.25, 0.75, 1.25.
    let axis = [0.0, 0.25, 0.75, 1.0];
    for (i, &fy) in axis.iter().enumerate() {
        for (j, &fx) in axis.iter().enumerate() {
            let top = 1.0 + fx;
            let bottom = 3.0 + fx;
            let expected = top + fy * (bottom - top);
            assert!((y.get(0, 0, i, j) - expected).abs() < 1e-12, "({i},{j})");
        }
    }
}

#[test]
fn bilinear_refuses_to_shrink() {
    let x = FeatureMap::<f64>::zeros(Shape::new(1, 1, 4, 4));
    assert!(bilinear_upsample(&x, 2, 4).is_err());
    assert!(resize_bilinear(&x, 2, 2).is_ok());
}

#[test]
fn bicubic_keeps_a_ramp_monotone_and_centred() {
    let x = FeatureMap::from_fn(Shape::new(1, 1, 1, 8), |_, _, _, x| x as f64);
    let y = bicubic_resize(&x, 1, 32).unwrap();
    let row = y.data();
    assert!(row.windows(2).all(|w| w[1] >= w[0]));
    // Samples whose four taps all lie inside the row reproduce the ramp exactly.
    for j in 6..26 {
        let src = (j as f64 + 0.5) / 4.0 - 0.5;
        assert!((row[j] - src).abs() < 1e-12, "{j}: {}", row[j]);
    }
}

#[test]
fn softmax_sums_to_one_and_is_shift_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let x = random_map(&mut rng, Shape::new(2, 5, 3, 4)).map(|v| 30.0 * v);
    let p = channel_softmax(&x).unwrap();
    let q = channel_softmax(&x.map(|v| v + 700.0)).unwrap();
    for n in 0..2 {
        for i in 0..12 {
            let s: f64 = (0..5).map(|c| p.plane(n, c)[i]).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
    for (a, b) in p.data().iter().zip(q.data()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(channel_softmax(&FeatureMap::<f64>::zeros(Shape::new(1, 1, 2, 2))).is_err());
}

fn check_unary(f: impl Fn(&FeatureMap<f64>) -> FeatureMap<f64>, back: impl Fn(&FeatureMap<f64>, &FeatureMap<f64>, &FeatureMap<f64>) -> FeatureMap<f64>, shape: Shape, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_map(&mut rng, shape);
    let y = f(&x);
    let g = random_map(&mut rng, y.shape());
    let analytic = back(&x, &y, &g);
    let h = 1e-6;
    for i in 0..x.data().len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += h;
        let mut xm = x.clone();
        xm.data_mut()[i] -= h;
        let lp: f64 = f(&xp).data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let lm: f64 = f(&xm).data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let numeric = (lp - lm) / (2.0 * h);
        assert!((numeric - analytic.data()[i]).abs() <= 1e-6 * (1.0 + numeric.abs()), "coord {i}");
    }
}

#[test]
fn layer_gradients_match_central_differences() {
    let shape = Shape::new(2, 3, 4, 5);
    check_unary(sigmoid, |_, y, g| sigmoid_backward(y, g), shape, 1);
    check_unary(|x| channel_softmax(x).unwrap(), |_, y, g| channel_softmax_backward(y, g).unwrap(), shape, 2);
    // Shift inputs away from the kink at zero.
    check_unary(
        |x| relu(&x.map(|v| if v.abs() < 0.05 { v + 0.1 } else { v })),
        |_, y, g| relu_backward(y, g),
        shape,
        3,
    );
    check_unary(
        |x| resize_bilinear(x, 7, 9).unwrap(),
        |x, _, g| resize_bilinear_backward(g, x.shape()).unwrap(),
        shape,
        4,
    );
    check_unary(
        |x| resize_bilinear(x, 3, 2).unwrap(),
        |x, _, g| resize_bilinear_backward(g, x.shape()).unwrap(),
        shape,
        5,
    );
}

#[test]
fn batch_norm_parameter_gradients_pass_the_checker() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let x = random_map(&mut rng, Shape::new(3, 2, 3, 3));
    let g = random_map(&mut rng, x.shape());
    let mut bn = BatchNorm2d::<f64>::new("bn", 2);
    bn.scale.value = vec![1.3, 0.7];
    bn.shift.value = vec![0.2, -0.1];
    let (_, cache) = bn.forward_train(&x).unwrap();
    let grad_x = bn.backward(&cache, &g).unwrap();
    let mut params = vec![bn.scale.clone(), bn.shift.clone()];
    let loss = |ps: &[Param<f64>]| {
        let mut probe = BatchNorm2d::<f64>::new("bn", 2);
        probe.scale.value.clone_from(&ps[0].value);
        probe.shift.value.clone_from(&ps[1].value);
        let (y, _) = probe.forward_train(&x).unwrap();
        y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
    };
    let reports = finite_difference_check(loss, &mut params, &GradCheckConfig::default()).unwrap();
    assert!(reports.iter().all(|r| r.passed), "{reports:?}");

    // Input gradient by central differences.
    let h = 1e-6;
    for i in 0..x.data().len() {
        let eval = |delta: f64| {
            let mut xp = x.clone();
            xp.data_mut()[i] += delta;
            let mut probe = bn.clone();
            let (y, _) = probe.forward_train(&xp).unwrap();
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let numeric = (eval(h) - eval(-h)) / (2.0 * h);
        assert!((numeric - grad_x.data()[i]).abs() < 1e-6, "coord {i}");
    }
}

proptest! {
    #[test]
    fn resize_preserves_constants(h in 1usize..8, w in 1usize..8, oh in 1usize..12, ow in 1usize..12, v in -5.0f64..5.0) {
        let x = FeatureMap::filled(Shape::new(1, 2, h, w), v);
        for y in [resize_bilinear(&x, oh, ow).unwrap(), bicubic_resize(&x, oh, ow).unwrap()] {
            prop_assert!(y.data().iter().all(|&u| (u - v).abs() < 1e-12));
        }
    }

    #[test]
    fn softmax_outputs_are_probabilities(values in proptest::collection::vec(-50.0f64..50.0, 12)) {
        let x = FeatureMap::from_vec(Shape::new(1, 3, 2, 2), values).unwrap();
        let p = channel_softmax(&x).unwrap();
        prop_assert!(p.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
