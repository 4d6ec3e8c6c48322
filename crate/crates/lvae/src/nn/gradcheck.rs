//! Finite-difference verification of analytic gradients.

use crate::error::{Error, Result};
use crate::nn::layer::LayerStack;
use crate::nn::tensor::Tensor;

/// Relative disagreement between an analytic and a numerical derivative.
pub fn relative_error(analytic: f64, numerical: f64) -> f64 {
    (analytic - numerical).abs() / analytic.abs().max(numerical.abs()).max(1e-12)
}

/// Checks every parameter scalar of `stack` against central finite
/// differences of `loss` and returns the worst relative error.
///
/// `loss` maps the stack output to a scalar and its gradient with respect
/// to that output. Parameter counts are perturbed exhaustively, so this is
/// meant for test-scale networks.
pub fn check_gradients<L>(
    stack: &LayerStack,
    input: &Tensor,
    loss: &L,
    epsilon: f64,
) -> Result<f64>
where
    L: Fn(&Tensor) -> (f64, Tensor),
{
    if epsilon <= 0.0 {
        return Err(Error::Validation(format!(
            "finite-difference epsilon must be positive, got {epsilon}"
        )));
    }
    let (output, cache) = stack.forward(input)?;
    let (_, upstream) = loss(&output);
    let (analytic, _) = stack.backward(&cache, &upstream)?;

    let mut work = stack.clone();
    let mut max_rel: f64 = 0.0;
    for li in 0..work.params.len() {
        for ti in 0..work.params[li].len() {
            for ei in 0..work.params[li][ti].len() {
                let original = work.params[li][ti].data()[ei];
                work.params[li][ti].data_mut()[ei] = original + epsilon;
                let (out_plus, _) = work.forward(input)?;
                let (loss_plus, _) = loss(&out_plus);
                work.params[li][ti].data_mut()[ei] = original - epsilon;
                let (out_minus, _) = work.forward(input)?;
                let (loss_minus, _) = loss(&out_minus);
                work.params[li][ti].data_mut()[ei] = original;

                let numerical = (loss_plus - loss_minus) / (2.0 * epsilon);
                max_rel = max_rel.max(relative_error(analytic[li][ti].data()[ei], numerical));
            }
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::{Activation, LayerSpec};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quadratic_loss(target: &Tensor) -> impl Fn(&Tensor) -> (f64, Tensor) + '_ {
        move |out: &Tensor| {
            let diff: Vec<f64> = out
                .data()
                .iter()
                .zip(target.data())
                .map(|(o, t)| o - t)
                .collect();
            let value = 0.5 * diff.iter().map(|d| d * d).sum::<f64>();
            (
                value,
                Tensor::new(out.shape().to_vec(), diff).unwrap(),
            )
        }
    }

    fn random_tensor(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
        let len = shape.iter().product();
        let data = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::new(shape, data).unwrap()
    }

    #[test]
    fn linear_model_with_quadratic_loss_is_exact_to_roundoff() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let stack = LayerStack::init(
            vec![LayerSpec::Dense {
                in_dim: 4,
                out_dim: 3,
            }],
            &mut rng,
        )
        .unwrap();
        let x = random_tensor(vec![4], &mut rng);
        let target = random_tensor(vec![3], &mut rng);
        let err = check_gradients(&stack, &x, &quadratic_loss(&target), 1e-4).unwrap();
        assert!(err < 1e-8, "relative error {err}");
    }

    #[test]
    fn two_layer_net_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let stack = LayerStack::init(
            vec![
                LayerSpec::Dense {
                    in_dim: 5,
                    out_dim: 6,
                },
                LayerSpec::Activation {
                    function: Activation::Sigmoid,
                },
                LayerSpec::Dense {
                    in_dim: 6,
                    out_dim: 2,
                },
            ],
            &mut rng,
        )
        .unwrap();
        let x = random_tensor(vec![5], &mut rng);
        let target = random_tensor(vec![2], &mut rng);
        let err = check_gradients(&stack, &x, &quadratic_loss(&target), 1e-4).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn zero_epsilon_is_a_validation_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let stack = LayerStack::init(
            vec![LayerSpec::Dense {
                in_dim: 1,
                out_dim: 1,
            }],
            &mut rng,
        )
        .unwrap();
        let x = Tensor::new(vec![1], vec![1.0]).unwrap();
        let err = check_gradients(&stack, &x, &quadratic_loss(&x.clone()), 0.0).unwrap_err();
        assert!(matches!(err, crate::error::Error::Validation(_)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Every layer kind used by the model passes the finite-difference
        /// check on randomized small instances.
        #[test]
        fn conv_stacks_match_central_differences(seed in 0u64..500, stride in 1usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let size = 6usize;
            let reduced = size.div_ceil(stride).div_ceil(stride);
            let layers = vec![
                LayerSpec::Conv { in_channels: 1, out_channels: 2, kernel: 3, stride },
                LayerSpec::Activation { function: Activation::Relu },
                LayerSpec::Conv { in_channels: 2, out_channels: 2, kernel: 3, stride },
                LayerSpec::Flatten,
                LayerSpec::Dense { in_dim: 2 * reduced * reduced, out_dim: 3 },
                LayerSpec::Activation { function: Activation::Sigmoid },
            ];
            let stack = LayerStack::init(layers, &mut rng).unwrap();
            let x = random_tensor(vec![1, size, size], &mut rng);
            let target = random_tensor(vec![3], &mut rng);
            let (_, cache) = stack.forward(&x).unwrap();
            prop_assume!(stack.relu_margin(&cache) > 1e-3);
            let err = check_gradients(&stack, &x, &quadratic_loss(&target), 1e-4).unwrap();
            prop_assert!(err < 1e-4, "relative error {}", err);
        }

        #[test]
        fn tconv_stacks_match_central_differences(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let layers = vec![
                LayerSpec::Dense { in_dim: 3, out_dim: 2 * 2 * 2 },
                LayerSpec::Reshape { shape: vec![2, 2, 2] },
                LayerSpec::TransposedConv { in_channels: 2, out_channels: 2, kernel: 3, stride: 2 },
                LayerSpec::Activation { function: Activation::Relu },
                LayerSpec::TransposedConv { in_channels: 2, out_channels: 1, kernel: 3, stride: 2 },
                LayerSpec::Activation { function: Activation::Sigmoid },
            ];
            let stack = LayerStack::init(layers, &mut rng).unwrap();
            let x = random_tensor(vec![3], &mut rng);
            let target = random_tensor(vec![1, 8, 8], &mut rng);
            let (_, cache) = stack.forward(&x).unwrap();
            prop_assume!(stack.relu_margin(&cache) > 1e-3);
            let err = check_gradients(&stack, &x, &quadratic_loss(&target), 1e-4).unwrap();
            prop_assert!(err < 1e-4, "relative error {}", err);
        }
    }
}
