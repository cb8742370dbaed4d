use rand::Rng;

use super::{axpy, dot, init_bound, Mode, Parameterized, Tensor};
use crate::error::{Error, Result};

/// `y = x W^T + b` for `x: [batch, in]`, `W: [out, in]`, `b: [out]`.
pub fn linear(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    input.expect_rank("linear", 2)?;
    weight.expect_rank("linear", 2)?;
    let (b, n_in) = (input.dim(0), input.dim(1));
    let n_out = weight.dim(0);
    if weight.dim(1) != n_in {
        return Err(Error::shape("linear", "in_features", weight.dim(1), n_in));
    }
    bias.expect_shape("linear", &["out_features"], &[n_out])?;
    let mut out = Tensor::zeros(&[b, n_out]);
    let y = out.data_mut();
    for bi in 0..b {
        let x = input.row(bi);
        for o in 0..n_out {
            y[bi * n_out + o] = bias.data()[o] + dot(weight.row(o), x);
        }
    }
    Ok(out)
}

/// Returns `(d_input, d_weight, d_bias)`.
pub fn linear_backward(input: &Tensor, weight: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let (b, n_in) = (input.dim(0), input.dim(1));
    let n_out = weight.dim(0);
    grad_out.expect_shape("linear_backward", &["batch", "out_features"], &[b, n_out])?;
    let mut dx = Tensor::zeros(&[b, n_in]);
    let mut dw = Tensor::zeros(&[n_out, n_in]);
    let mut db = Tensor::zeros(&[n_out]);
    for bi in 0..b {
        let x = input.row(bi);
        for o in 0..n_out {
            let g = grad_out.data()[bi * n_out + o];
            if g == 0.0 {
                continue;
            }
            db.data_mut()[o] += g;
            axpy(g, weight.row(o), &mut dx.data_mut()[bi * n_in..(bi + 1) * n_in]);
            axpy(g, x, &mut dw.data_mut()[o * n_in..(o + 1) * n_in]);
        }
    }
    Ok((dx, dw, db))
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
    cache: Vec<Tensor>,
}

impl Linear {
    pub fn new(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        let bound = init_bound(n_in);
        Self {
            weight: Tensor::uniform(&[n_out, n_in], bound, rng),
            bias: Tensor::uniform(&[n_out], bound, rng),
            cache: Vec::new(),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        weight.expect_rank("linear", 2)?;
        bias.expect_shape("linear", &["out_features"], &[weight.dim(0)])?;
        Ok(Self {
            weight,
            bias,
            cache: Vec::new(),
        })
    }

    pub fn in_features(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn out_features(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let y = self.infer(input)?;
        if mode == Mode::Train {
            self.cache.push(input.clone());
        }
        Ok(y)
    }

    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        linear(input, &self.weight, &self.bias)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self
            .cache
            .pop()
            .ok_or_else(|| Error::Invariant("linear backward without a cached train-mode forward".into()))?;
        let (dx, dw, db) = linear_backward(&input, &self.weight, grad_out)?;
        axpy(1.0, dw.data(), self.weight.grad_mut());
        axpy(1.0, db.data(), self.bias.grad_mut());
        Ok(dx)
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

impl Parameterized for Linear {
    fn params(&self) -> Vec<(String, &Tensor)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![("weight".into(), &mut self.weight), ("bias".into(), &mut self.bias)]
    }
}
