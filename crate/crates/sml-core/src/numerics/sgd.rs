//! Plain stochastic gradient descent.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Optimizer settings. Plain SGD, no momentum or weight decay.
#[derive(Debug, Clone)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::NonPositive {
                what: "learning_rate",
                got: self.learning_rate,
            });
        }
        if self.iterations == 0 {
            return Err(Error::NonPositive {
                what: "iterations",
                got: 0.0,
            });
        }
        if self.batch_size == 0 {
            return Err(Error::NonPositive {
                what: "batch_size",
                got: 0.0,
            });
        }
        Ok(())
    }
}

/// One descent step: `params - learning_rate * grads`, elementwise.
pub fn sgd_step(params: &Tensor, grads: &Tensor, learning_rate: f64) -> Result<Tensor> {
    if params.shape() != grads.shape() {
        return Err(Error::ShapeMismatch {
            left: params.shape().to_vec(),
            right: grads.shape().to_vec(),
        });
    }
    let data = params
        .data()
        .iter()
        .zip(grads.data().iter())
        .map(|(&p, &g)| p - learning_rate * g)
        .collect();
    Tensor::from_vec(params.shape().to_vec(), data)
}

/// In-place variant used by the trainer's hot path.
pub fn sgd_step_inplace(params: &mut Tensor, grads: &Tensor, learning_rate: f64) -> Result<()> {
    if params.shape() != grads.shape() {
        return Err(Error::ShapeMismatch {
            left: params.shape().to_vec(),
            right: grads.shape().to_vec(),
        });
    }
    for (p, &g) in params.data_mut().iter_mut().zip(grads.data().iter()) {
        *p -= learning_rate * g;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::Rng;

    #[test]
    fn zero_gradient_is_identity() {
        let p = Tensor::from_vec(vec![1], vec![1.0]).unwrap();
        let g = Tensor::zeros(vec![1]);
        let next = sgd_step(&p, &g, 0.001).unwrap();
        assert_eq!(next.data(), &[1.0]);
    }

    #[test]
    fn definition_case() {
        let p = Tensor::from_vec(vec![1], vec![1.0]).unwrap();
        let g = Tensor::from_vec(vec![1], vec![1.0]).unwrap();
        let next = sgd_step(&p, &g, 0.5).unwrap();
        assert_eq!(next.data(), &[0.5]);
    }

    #[test]
    fn matches_per_element_loop_oracle_bitwise() {
        let mut rng = Rng::new(21);
        let p = rng.normal_tensor(vec![5, 7], 0.0, 1.0).unwrap();
        let g = rng.normal_tensor(vec![5, 7], 0.0, 1.0).unwrap();
        let lr = 0.123;
        let stepped = sgd_step(&p, &g, lr).unwrap();
        for i in 0..p.numel() {
            let expected = p.data()[i] - lr * g.data()[i];
            assert_eq!(stepped.data()[i], expected, "element {i}");
        }
        // in-place path agrees bitwise
        let mut q = p.clone();
        sgd_step_inplace(&mut q, &g, lr).unwrap();
        assert_eq!(q.data(), stepped.data());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = Tensor::zeros(vec![2]);
        let g = Tensor::zeros(vec![3]);
        assert!(sgd_step(&p, &g, 0.1).is_err());
    }
}
