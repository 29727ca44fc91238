//! Differentiable building blocks: a reverse-mode tape over dense `f64`
//! tensors, the handful of layers the two networks use, and Adam.

mod adam;
mod graph;
mod tensor;

use alloc::vec::Vec;

use rand::Rng;

use crate::math;

pub use adam::{AdamConfig, AdamState};
pub use graph::{softmax_rows, BatchNormState, Graph, Mode, Value, BN_EPS, BN_MOMENTUM};
pub use tensor::Tensor;

/// Uniform samples in `+-sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor {
    let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| limit * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    Tensor::new(shape.to_vec(), data).expect("element count matches shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn conv_identity_kernel() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 1, 4], &[1.0, 2.0, 3.0, 4.0]));
        let w = g.param(t(&[1, 1, 1], &[1.0]));
        let b = g.param(t(&[1], &[0.0]));
        let y = g.conv1d(x, w, b).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn conv_box_filter_with_zero_padding() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 1, 4], &[1.0, 2.0, 3.0, 4.0]));
        let w = g.param(t(&[1, 1, 3], &[1.0, 1.0, 1.0]));
        let b = g.param(t(&[1], &[0.0]));
        let y = g.conv1d(x, w, b).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 6.0, 9.0, 7.0]);
    }

    #[test]
    fn conv_bias_broadcast() {
        let mut g = Graph::new();
        let x = g.constant(t(&[2, 1, 3], &[1.0, -2.0, 3.0, 0.5, 0.0, 9.0]));
        let w = g.param(Tensor::zeros(&[1, 1, 3]));
        let b = g.param(t(&[1], &[5.0]));
        let y = g.conv1d(x, w, b).unwrap();
        assert!(g.value(y).data().iter().all(|v| *v == 5.0));
    }

    #[test]
    fn conv_shape_errors_name_the_dimension() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[1, 2, 5]));
        let w = g.param(Tensor::zeros(&[3, 1, 3]));
        let b = g.param(Tensor::zeros(&[3]));
        match g.conv1d(x, w, b) {
            Err(crate::Error::Shape { dimension, .. }) => assert_eq!(dimension, "input channels"),
            other => panic!("unexpected {other:?}"),
        }
        let w = g.param(Tensor::zeros(&[3, 2, 2]));
        assert!(matches!(
            g.conv1d(x, w, b),
            Err(crate::Error::EvenKernel(2))
        ));
    }

    #[test]
    fn batch_norm_train_normalizes_and_affine_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..2 * 3 * 10)
            .map(|_| rng.random::<f64>() * 4.0 - 1.0)
            .collect();
        let mut g = Graph::new();
        let x = g.constant(t(&[2, 3, 10], &data));
        let gamma = g.param(Tensor::filled(&[3], 1.0));
        let beta = g.param(Tensor::zeros(&[3]));
        let mut state = BatchNormState::new(3);
        let y = g
            .batch_norm(x, gamma, beta, &mut state, Mode::Train)
            .unwrap();
        let out = g.value(y).data().to_vec();
        for ch in 0..3 {
            let vals: Vec<f64> = (0..2)
                .flat_map(|b| out[(b * 3 + ch) * 10..(b * 3 + ch + 1) * 10].to_vec())
                .collect();
            let m = math::mean(&vals);
            let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
            assert!(m.abs() < 1e-6);
            assert!(
                (v - 1.0).abs() < 1e-3,
                "eps shifts the variance slightly: {v}"
            );
        }
        assert!(state.running_var.iter().all(|v| *v >= 0.0));
        assert!(state.running_mean.iter().all(|m| *m != 0.0));

        // gamma = 2, beta = 3 on the normalized output
        let mut g2 = Graph::new();
        let x2 = g2.constant(t(&[2, 3, 10], &out));
        let gamma = g2.param(Tensor::filled(&[3], 2.0));
        let beta = g2.param(Tensor::filled(&[3], 3.0));
        let mut s2 = BatchNormState::new(3);
        let y2 = g2
            .batch_norm(x2, gamma, beta, &mut s2, Mode::Train)
            .unwrap();
        let o2 = g2.value(y2).data();
        let m = math::mean(o2);
        let sd = math::sqrt(o2.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / o2.len() as f64);
        assert!((m - 3.0).abs() < 1e-6);
        assert!((sd - 2.0).abs() < 1e-3);
    }

    #[test]
    fn batch_norm_infer_defaults_and_purity() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 1, 4], &[1.0, 2.0, 3.0, 4.0]));
        let gamma = g.param(Tensor::filled(&[1], 1.0));
        let beta = g.param(Tensor::zeros(&[1]));
        let mut state = BatchNormState::new(1);
        let before = state.clone();
        let y = g
            .batch_norm(x, gamma, beta, &mut state, Mode::Infer)
            .unwrap();
        assert_eq!(state, before);
        let s = 1.0 / math::sqrt(1.0 + BN_EPS);
        for (o, i) in g.value(y).data().iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((o - i * s).abs() < 1e-15);
        }
    }

    #[test]
    fn batch_norm_train_rejects_single_value() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 1, 1], &[1.0]));
        let gamma = g.param(Tensor::filled(&[1], 1.0));
        let beta = g.param(Tensor::zeros(&[1]));
        let mut state = BatchNormState::new(1);
        assert!(matches!(
            g.batch_norm(x, gamma, beta, &mut state, Mode::Train),
            Err(crate::Error::BatchTooSmall(1))
        ));
    }

    #[test]
    fn relu_pool_dropout() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut g = Graph::new();
        let x = g.constant(t(&[2], &[-1.0, 2.0]));
        let r = g.relu(x);
        assert_eq!(g.value(r).data(), &[0.0, 2.0]);

        let c = g.constant(Tensor::filled(&[1, 2, 5], 1.5));
        let p = g.global_avg_pool(c).unwrap();
        assert_eq!(g.value(p).shape(), &[1, 2]);
        assert!(g.value(p).data().iter().all(|v| (*v - 1.5).abs() < 1e-15));

        let same = g.dropout(c, 0.3, Mode::Infer, &mut rng).unwrap();
        assert_eq!(same, c);
        assert!(matches!(
            g.dropout(c, 1.0, Mode::Train, &mut rng),
            Err(crate::Error::InvalidDropout(_))
        ));
        let d = g.dropout(c, 0.5, Mode::Train, &mut rng).unwrap();
        assert!(g
            .value(d)
            .data()
            .iter()
            .all(|v| *v == 0.0 || (*v - 3.0).abs() < 1e-15));
    }

    #[test]
    fn cross_entropy_examples() {
        let mut g = Graph::new();
        let z = g.param(Tensor::zeros(&[1, 4]));
        let l = g.softmax_cross_entropy(z, &[2]).unwrap();
        assert!((g.value(l).data()[0] - math::ln(4.0)).abs() < 1e-12);

        let z2 = g.param(t(&[1, 2], &[10.0, -10.0]));
        let l2 = g.softmax_cross_entropy(z2, &[0]).unwrap();
        assert!(g.value(l2).data()[0] < 1e-4);

        assert!(matches!(
            g.softmax_cross_entropy(z2, &[2]),
            Err(crate::Error::LabelOutOfRange {
                label: 2,
                classes: 2
            })
        ));
    }

    #[test]
    fn cross_entropy_gradient_closed_form() {
        let mut g = Graph::new();
        let z = g.param(t(&[2, 3], &[0.5, -1.0, 2.0, 0.0, 0.0, 0.0]));
        let l = g.softmax_cross_entropy(z, &[2, 0]).unwrap();
        g.backward(l).unwrap();
        let p = softmax_rows(g.value(z).data(), 3);
        let mut expected: Vec<f64> = p.iter().map(|v| v / 2.0).collect();
        expected[2] -= 0.5;
        expected[3] -= 0.5;
        for (a, b) in g.grad(z).unwrap().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dense_closed_form_and_unreached_params_have_no_grad() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 2], &[1.0, 2.0]));
        let w = g.param(t(&[2, 2], &[1.0, 0.0, 0.5, -1.0]));
        let b = g.param(t(&[2], &[0.25, 0.0]));
        let unused = g.param(Tensor::zeros(&[3]));
        let y = g.dense(x, w, b).unwrap();
        assert_eq!(g.value(y).data(), &[1.25, -1.5]);
        let s = g.weighted_sum(y, &[1.0, 1.0]).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(w).unwrap(), &[1.0, 2.0, 1.0, 2.0]);
        assert_eq!(g.grad(b).unwrap(), &[1.0, 1.0]);
        assert!(g.grad(unused).is_none());
        assert!(g.grad(x).is_none());
    }

    #[test]
    fn concat_orders_channels_per_sample() {
        let mut g = Graph::new();
        let a = g.constant(t(&[2, 1, 2], &[1.0, 2.0, 3.0, 4.0]));
        let b = g.constant(t(&[2, 2, 2], &[5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0]));
        let c = g.concat_channels(&[a, b]).unwrap();
        assert_eq!(g.value(c).shape(), &[2, 3, 2]);
        assert_eq!(
            g.value(c).data(),
            &[1.0, 2.0, 5.0, 6.0, 7.0, 8.0, 3.0, 4.0, 9.0, 10.0, 11.0, 12.0]
        );
        let _ = vec![0; 1];
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = glorot_uniform(&[4, 3, 5], 15, 20, &mut rng);
        let limit = math::sqrt(6.0 / 35.0);
        assert!(w.data().iter().all(|v| v.abs() <= limit));
    }
}
