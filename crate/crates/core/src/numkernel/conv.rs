use rand::Rng;

use super::{axpy, dot, init_bound, Mode, Parameterized, Tensor};
use crate::error::{Error, Result};

pub const KERNEL_SIZE: usize = 3;

const AXES: [&str; 3] = ["batch", "channels_in", "time"];

/// Kernel-3, stride-1, zero-padding-1 cross-correlation.
///
/// `input` is `[batch, channels_in, time]`, `weight` is
/// `[channels_out, channels_in, 3]`, `bias` is `[channels_out]`. The output
/// keeps the time length of the input.
pub fn conv1d(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    input.expect_rank("conv1d", 3)?;
    weight.expect_rank("conv1d", 3)?;
    let (b, ci, t) = (input.dim(0), input.dim(1), input.dim(2));
    let co = weight.dim(0);
    weight.expect_shape("conv1d", &["channels_out", "channels_in", "kernel"], &[co, ci, KERNEL_SIZE])?;
    if let Some(bias) = bias {
        bias.expect_shape("conv1d", &["bias"], &[co])?;
    }

    let x = input.data();
    let w = weight.data();
    let mut out = Tensor::zeros(&[b, co, t]);
    let y = out.data_mut();
    for bi in 0..b {
        for o in 0..co {
            let row = &mut y[(bi * co + o) * t..(bi * co + o + 1) * t];
            if let Some(bias) = bias {
                row.fill(bias.data()[o]);
            }
            for c in 0..ci {
                let xr = &x[(bi * ci + c) * t..(bi * ci + c + 1) * t];
                let k = &w[(o * ci + c) * KERNEL_SIZE..(o * ci + c + 1) * KERNEL_SIZE];
                axpy(k[0], &xr[..t - 1], &mut row[1..]);
                axpy(k[1], xr, row);
                axpy(k[2], &xr[1..], &mut row[..t - 1]);
            }
        }
    }
    Ok(out)
}

/// Returns `(d_input, d_weight, d_bias)`.
pub fn conv1d_backward(input: &Tensor, weight: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let (b, ci, t) = (input.dim(0), input.dim(1), input.dim(2));
    let co = weight.dim(0);
    grad_out.expect_shape("conv1d_backward", &["batch", "channels_out", "time"], &[b, co, t])?;

    let x = input.data();
    let w = weight.data();
    let dy = grad_out.data();
    let mut dx = Tensor::zeros(&[b, ci, t]);
    let mut dw = Tensor::zeros(&[co, ci, KERNEL_SIZE]);
    let mut db = Tensor::zeros(&[co]);
    {
        let dxd = dx.data_mut();
        let dwd = dw.data_mut();
        let dbd = db.data_mut();
        for bi in 0..b {
            for o in 0..co {
                let d = &dy[(bi * co + o) * t..(bi * co + o + 1) * t];
                dbd[o] += d.iter().sum::<f64>();
                for c in 0..ci {
                    let xr = &x[(bi * ci + c) * t..(bi * ci + c + 1) * t];
                    let wi = (o * ci + c) * KERNEL_SIZE;
                    let k = &w[wi..wi + KERNEL_SIZE];
                    let dxr = &mut dxd[(bi * ci + c) * t..(bi * ci + c + 1) * t];
                    axpy(k[0], &d[1..], &mut dxr[..t - 1]);
                    axpy(k[1], d, dxr);
                    axpy(k[2], &d[..t - 1], &mut dxr[1..]);
                    dwd[wi] += dot(&d[1..], &xr[..t - 1]);
                    dwd[wi + 1] += dot(d, xr);
                    dwd[wi + 2] += dot(&d[..t - 1], &xr[1..]);
                }
            }
        }
    }
    Ok((dx, dw, db))
}

/// Stateful conv layer caching its inputs in train mode.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
    cache: Vec<Tensor>,
}

impl Conv1d {
    pub fn new(channels_in: usize, channels_out: usize, with_bias: bool, rng: &mut impl Rng) -> Self {
        let bound = init_bound(channels_in * KERNEL_SIZE);
        let weight = Tensor::uniform(&[channels_out, channels_in, KERNEL_SIZE], bound, rng);
        let bias = with_bias.then(|| Tensor::uniform(&[channels_out], bound, rng));
        Self {
            weight,
            bias,
            cache: Vec::new(),
        }
    }

    pub fn channels_in(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn channels_out(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let out = self.infer(input)?;
        if mode == Mode::Train {
            self.cache.push(input.clone());
        }
        Ok(out)
    }

    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        input.expect_rank("conv1d", 3)?;
        if input.dim(1) != self.channels_in() {
            return Err(Error::shape("conv1d", AXES[1], self.channels_in(), input.dim(1)));
        }
        conv1d(input, &self.weight, self.bias.as_ref())
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self
            .cache
            .pop()
            .ok_or_else(|| Error::Invariant("conv1d backward without a cached train-mode forward".into()))?;
        let (dx, dw, db) = conv1d_backward(&input, &self.weight, grad_out)?;
        axpy(1.0, dw.data(), self.weight.grad_mut());
        if let Some(bias) = &mut self.bias {
            axpy(1.0, db.data(), bias.grad_mut());
        }
        Ok(dx)
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

impl Parameterized for Conv1d {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut v = vec![("weight".to_string(), &self.weight)];
        if let Some(b) = &self.bias {
            v.push(("bias".to_string(), b));
        }
        v
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = vec![("weight".to_string(), &mut self.weight)];
        if let Some(b) = &mut self.bias {
            v.push(("bias".to_string(), b));
        }
        v
    }
}
