use rand::Rng;

use super::{axpy, dot, init_bound, Mode, Parameterized, Tensor};
use crate::error::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gate activations of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub input: Tensor,
    pub h_prev: Tensor,
    pub c_prev: Tensor,
    /// `[batch, 4 * hidden]`, activated gates in i, f, g, o order.
    pub gates: Vec<f64>,
    /// `tanh(c')`, `[batch, hidden]`.
    pub tanh_c: Vec<f64>,
}

/// One step of a four-gate LSTM cell.
///
/// `w_ih: [4d, e]`, `w_hh: [4d, d]`, `bias: [4d]`, gates ordered input,
/// forget, candidate, output:
///
/// ```text
/// c' = f * c + i * g
/// h' = o * tanh(c')
/// ```
pub fn lstm_cell(
    input: &Tensor,
    h: &Tensor,
    c: &Tensor,
    w_ih: &Tensor,
    w_hh: &Tensor,
    bias: &Tensor,
) -> Result<(Tensor, Tensor, LstmCache)> {
    input.expect_rank("lstm_cell", 2)?;
    let (b, e) = (input.dim(0), input.dim(1));
    let d = w_hh.dim(1);
    w_ih.expect_shape("lstm_cell", &["4*hidden", "input"], &[4 * d, e])?;
    w_hh.expect_shape("lstm_cell", &["4*hidden", "hidden"], &[4 * d, d])?;
    bias.expect_shape("lstm_cell", &["4*hidden"], &[4 * d])?;
    h.expect_shape("lstm_cell", &["batch", "hidden"], &[b, d])?;
    c.expect_shape("lstm_cell", &["batch", "cell"], &[b, d])?;

    let mut gates = vec![0.0; b * 4 * d];
    let mut h_new = Tensor::zeros(&[b, d]);
    let mut c_new = Tensor::zeros(&[b, d]);
    let mut tanh_c = vec![0.0; b * d];
    for bi in 0..b {
        let x = input.row(bi);
        let hp = h.row(bi);
        let g = &mut gates[bi * 4 * d..(bi + 1) * 4 * d];
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = bias.data()[k] + dot(w_ih.row(k), x) + dot(w_hh.row(k), hp);
        }
        for j in 0..d {
            let ig = sigmoid(g[j]);
            let fg = sigmoid(g[d + j]);
            let gg = g[2 * d + j].tanh();
            let og = sigmoid(g[3 * d + j]);
            g[j] = ig;
            g[d + j] = fg;
            g[2 * d + j] = gg;
            g[3 * d + j] = og;
            let cn = fg * c.data()[bi * d + j] + ig * gg;
            let tc = cn.tanh();
            c_new.data_mut()[bi * d + j] = cn;
            h_new.data_mut()[bi * d + j] = og * tc;
            tanh_c[bi * d + j] = tc;
        }
    }
    let cache = LstmCache {
        input: input.clone(),
        h_prev: h.clone(),
        c_prev: c.clone(),
        gates,
        tanh_c,
    };
    Ok((h_new, c_new, cache))
}

/// Gradients of one step.
pub struct LstmGrads {
    pub input: Tensor,
    pub h_prev: Tensor,
    pub c_prev: Tensor,
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub bias: Tensor,
}

/// Backward through one step given upstream gradients on `h'` and `c'`.
pub fn lstm_cell_backward(
    cache: &LstmCache,
    w_ih: &Tensor,
    w_hh: &Tensor,
    grad_h: &Tensor,
    grad_c: &Tensor,
) -> Result<LstmGrads> {
    let (b, e) = (cache.input.dim(0), cache.input.dim(1));
    let d = w_hh.dim(1);
    grad_h.expect_shape("lstm_cell_backward", &["batch", "hidden"], &[b, d])?;
    grad_c.expect_shape("lstm_cell_backward", &["batch", "cell"], &[b, d])?;

    let mut dgates = vec![0.0; b * 4 * d];
    let mut dc_prev = Tensor::zeros(&[b, d]);
    for bi in 0..b {
        let g = &cache.gates[bi * 4 * d..(bi + 1) * 4 * d];
        let dg = &mut dgates[bi * 4 * d..(bi + 1) * 4 * d];
        for j in 0..d {
            let (ig, fg, gg, og) = (g[j], g[d + j], g[2 * d + j], g[3 * d + j]);
            let tc = cache.tanh_c[bi * d + j];
            let dh = grad_h.data()[bi * d + j];
            let dc = grad_c.data()[bi * d + j] + dh * og * (1.0 - tc * tc);
            let cp = cache.c_prev.data()[bi * d + j];
            dg[j] = dc * gg * ig * (1.0 - ig);
            dg[d + j] = dc * cp * fg * (1.0 - fg);
            dg[2 * d + j] = dc * ig * (1.0 - gg * gg);
            dg[3 * d + j] = dh * tc * og * (1.0 - og);
            dc_prev.data_mut()[bi * d + j] = dc * fg;
        }
    }

    let mut dx = Tensor::zeros(&[b, e]);
    let mut dh_prev = Tensor::zeros(&[b, d]);
    let mut dw_ih = Tensor::zeros(&[4 * d, e]);
    let mut dw_hh = Tensor::zeros(&[4 * d, d]);
    let mut dbias = Tensor::zeros(&[4 * d]);
    for bi in 0..b {
        let x = cache.input.row(bi);
        let hp = cache.h_prev.row(bi);
        for k in 0..4 * d {
            let gk = dgates[bi * 4 * d + k];
            if gk == 0.0 {
                continue;
            }
            dbias.data_mut()[k] += gk;
            axpy(gk, w_ih.row(k), &mut dx.data_mut()[bi * e..(bi + 1) * e]);
            axpy(gk, w_hh.row(k), &mut dh_prev.data_mut()[bi * d..(bi + 1) * d]);
            axpy(gk, x, &mut dw_ih.data_mut()[k * e..(k + 1) * e]);
            axpy(gk, hp, &mut dw_hh.data_mut()[k * d..(k + 1) * d]);
        }
    }
    Ok(LstmGrads {
        input: dx,
        h_prev: dh_prev,
        c_prev: dc_prev,
        w_ih: dw_ih,
        w_hh: dw_hh,
        bias: dbias,
    })
}

/// Stateful LSTM cell; each train-mode step pushes a cache, each backward
/// pops one, so a full unrolled sequence is differentiated newest-first.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub bias: Tensor,
    cache: Vec<LstmCache>,
}

impl LstmCell {
    pub fn new(input_size: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = init_bound(hidden);
        Self {
            w_ih: Tensor::uniform(&[4 * hidden, input_size], bound, rng),
            w_hh: Tensor::uniform(&[4 * hidden, hidden], bound, rng),
            bias: Tensor::uniform(&[4 * hidden], bound, rng),
            cache: Vec::new(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.dim(1)
    }

    pub fn input_size(&self) -> usize {
        self.w_ih.dim(1)
    }

    pub fn forward(&mut self, input: &Tensor, h: &Tensor, c: &Tensor, mode: Mode) -> Result<(Tensor, Tensor)> {
        let (h, c, cache) = lstm_cell(input, h, c, &self.w_ih, &self.w_hh, &self.bias)?;
        if mode == Mode::Train {
            self.cache.push(cache);
        }
        Ok((h, c))
    }

    pub fn infer(&self, input: &Tensor, h: &Tensor, c: &Tensor) -> Result<(Tensor, Tensor)> {
        let (h, c, _) = lstm_cell(input, h, c, &self.w_ih, &self.w_hh, &self.bias)?;
        Ok((h, c))
    }

    /// Returns gradients on `(input, h_prev, c_prev)`.
    pub fn backward(&mut self, grad_h: &Tensor, grad_c: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let cache = self
            .cache
            .pop()
            .ok_or_else(|| Error::Invariant("lstm backward without a cached train-mode forward".into()))?;
        let g = lstm_cell_backward(&cache, &self.w_ih, &self.w_hh, grad_h, grad_c)?;
        axpy(1.0, g.w_ih.data(), self.w_ih.grad_mut());
        axpy(1.0, g.w_hh.data(), self.w_hh.grad_mut());
        axpy(1.0, g.bias.data(), self.bias.grad_mut());
        Ok((g.input, g.h_prev, g.c_prev))
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

impl Parameterized for LstmCell {
    fn params(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("w_ih".into(), &self.w_ih),
            ("w_hh".into(), &self.w_hh),
            ("bias".into(), &self.bias),
        ]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("w_ih".into(), &mut self.w_ih),
            ("w_hh".into(), &mut self.w_hh),
            ("bias".into(), &mut self.bias),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{finite_difference_grad, max_rel_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_everything_stays_zero() {
        let z = |s: &[usize]| Tensor::zeros(s);
        let (h, c, _) = lstm_cell(&z(&[2, 3]), &z(&[2, 4]), &z(&[2, 4]), &z(&[16, 3]), &z(&[16, 4]), &z(&[16])).unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
        assert!(c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_step_matches_hand_evaluation() {
        // e = d = 1; rows of w_ih / w_hh / bias are the i, f, g, o gates.
        let x = Tensor::new(&[1, 1], vec![0.5]).unwrap();
        let h = Tensor::new(&[1, 1], vec![-0.3]).unwrap();
        let c = Tensor::new(&[1, 1], vec![0.8]).unwrap();
        let w_ih = Tensor::new(&[4, 1], vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        let w_hh = Tensor::new(&[4, 1], vec![0.2, 0.4, -0.6, 0.1]).unwrap();
        let bias = Tensor::new(&[4], vec![0.0, 1.0, 0.1, -0.5]).unwrap();
        let (h1, c1, _) = lstm_cell(&x, &h, &c, &w_ih, &w_hh, &bias).unwrap();

        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = s(1.0 * 0.5 + 0.2 * -0.3 + 0.0);
        let f = s(-1.0 * 0.5 + 0.4 * -0.3 + 1.0);
        let g = (0.5 * 0.5 + -0.6 * -0.3 + 0.1f64).tanh();
        let o = s(2.0 * 0.5 + 0.1 * -0.3 - 0.5);
        let c_exp = f * 0.8 + i * g;
        let h_exp = o * c_exp.tanh();
        assert!((c1.data()[0] - c_exp).abs() < 1e-15);
        assert!((h1.data()[0] - h_exp).abs() < 1e-15);
    }

    #[test]
    fn hidden_mismatch_is_dimension_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cell = LstmCell::new(3, 4, &mut rng);
        let err = cell
            .infer(&Tensor::zeros(&[2, 3]), &Tensor::zeros(&[2, 5]), &Tensor::zeros(&[2, 4]))
            .unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    fn unrolled_loss(cell: &LstmCell, xs: &[Tensor], h0: &Tensor, c0: &Tensor, r: &[Tensor]) -> f64 {
        let (mut h, mut c) = (h0.clone(), c0.clone());
        let mut total = 0.0;
        for (x, rt) in xs.iter().zip(r) {
            let (hn, cn) = cell.infer(x, &h, &c).unwrap();
            total += dot(hn.data(), rt.data());
            h = hn;
            c = cn;
        }
        total + dot(c.data(), r[0].data())
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (b, e, d) = (2, 3, 4);
        let mut cell = LstmCell::new(e, d, &mut rng);
        for p in [&mut cell.w_ih, &mut cell.w_hh, &mut cell.bias] {
            *p = Tensor::uniform(p.shape(), 1.0, &mut rng);
        }
        let xs: Vec<Tensor> = (0..3).map(|_| Tensor::uniform(&[b, e], 1.0, &mut rng)).collect();
        let h0 = Tensor::uniform(&[b, d], 1.0, &mut rng);
        let c0 = Tensor::uniform(&[b, d], 1.0, &mut rng);
        let r: Vec<Tensor> = (0..3).map(|_| Tensor::uniform(&[b, d], 1.0, &mut rng)).collect();

        // forward with caches, then unwind
        let (mut h, mut c) = (h0.clone(), c0.clone());
        for x in &xs {
            let (hn, cn) = cell.forward(x, &h, &c, Mode::Train).unwrap();
            h = hn;
            c = cn;
        }
        let mut dh = Tensor::zeros(&[b, d]);
        let mut dc = r[0].clone();
        let mut dxs = Vec::new();
        for t in (0..3).rev() {
            axpy(1.0, r[t].data(), dh.data_mut());
            let (dx, dhp, dcp) = cell.backward(&dh, &dc).unwrap();
            dxs.push(dx);
            dh = dhp;
            dc = dcp;
        }
        dxs.reverse();

        let base = cell.clone();
        let nw = finite_difference_grad(
            |p| {
                let mut m = base.clone();
                m.w_ih = p.clone();
                Ok(unrolled_loss(&m, &xs, &h0, &c0, &r))
            },
            &base.w_ih,
            1e-5,
        )
        .unwrap();
        let nu = finite_difference_grad(
            |p| {
                let mut m = base.clone();
                m.w_hh = p.clone();
                Ok(unrolled_loss(&m, &xs, &h0, &c0, &r))
            },
            &base.w_hh,
            1e-5,
        )
        .unwrap();
        let nb = finite_difference_grad(
            |p| {
                let mut m = base.clone();
                m.bias = p.clone();
                Ok(unrolled_loss(&m, &xs, &h0, &c0, &r))
            },
            &base.bias,
            1e-5,
        )
        .unwrap();
        let nh0 = finite_difference_grad(|p| Ok(unrolled_loss(&base, &xs, p, &c0, &r)), &h0, 1e-5).unwrap();
        let nc0 = finite_difference_grad(|p| Ok(unrolled_loss(&base, &xs, &h0, p, &r)), &c0, 1e-5).unwrap();
        let nx1 = finite_difference_grad(
            |p| {
                let mut xs2 = xs.clone();
                xs2[1] = p.clone();
                Ok(unrolled_loss(&base, &xs2, &h0, &c0, &r))
            },
            &xs[1],
            1e-5,
        )
        .unwrap();

        let grad = |t: &Tensor| Tensor::new(t.shape(), t.grad().unwrap().to_vec()).unwrap();
        assert!(max_rel_error(&grad(&cell.w_ih), &nw) < 1e-4);
        assert!(max_rel_error(&grad(&cell.w_hh), &nu) < 1e-4);
        assert!(max_rel_error(&grad(&cell.bias), &nb) < 1e-4);
        assert!(max_rel_error(&dh, &nh0) < 1e-4);
        assert!(max_rel_error(&dc, &nc0) < 1e-4);
        assert!(max_rel_error(&dxs[1], &nx1) < 1e-4);
    }
}
