use rand::Rng;

use super::encoder::{Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::labelspace::{EmbeddingTable, END, START};
use crate::numkernel::{
    axpy, prefixed, prefixed_mut, weighted_softmax_cross_entropy, Embedding, Linear, LstmCell, Mode, Parameterized,
    Tensor,
};

/// Encoder plus label-name decoder.
///
/// The encoder features `z` initialize the decoder through two separate
/// projections, `h0 = W_h z + b_h` and `c0 = W_c z + b_c`. The decoder is an
/// LSTM over token embeddings with an output projection to the vocabulary.
#[derive(Debug, Clone)]
pub struct ShareModel {
    pub encoder: Encoder,
    pub init_h: Linear,
    pub init_c: Linear,
    pub embedding: Embedding,
    pub lstm: LstmCell,
    pub output: Linear,
    /// Per-step logit gradients of the last train-mode loss, newest last.
    pending: Vec<Tensor>,
}

/// Teacher-forced step layout for a batch of target bodies.
struct Unrolled {
    inputs: Vec<Vec<usize>>,
    targets: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
}

fn unroll(targets: &[Vec<usize>], vocab: usize) -> Result<Unrolled> {
    let b = targets.len();
    if b == 0 {
        return Err(Error::Validation("empty batch".into()));
    }
    for body in targets {
        if body.is_empty() {
            return Err(Error::Validation("target sequence body is empty".into()));
        }
        if let Some(&bad) = body.iter().find(|&&t| t >= vocab) {
            return Err(Error::Index {
                what: "target token",
                index: bad,
                limit: vocab,
            });
        }
    }
    let steps = targets.iter().map(Vec::len).max().unwrap_or(0) + 1;
    let mut u = Unrolled {
        inputs: vec![vec![END; b]; steps],
        targets: vec![vec![END; b]; steps],
        weights: vec![vec![0.0; b]; steps],
    };
    for (i, body) in targets.iter().enumerate() {
        let k = body.len();
        let w = 1.0 / ((k + 1) as f64 * b as f64);
        for t in 0..=k {
            u.inputs[t][i] = if t == 0 { START } else { body[t - 1] };
            u.targets[t][i] = if t < k { body[t] } else { END };
            u.weights[t][i] = w;
        }
    }
    Ok(u)
}

impl ShareModel {
    pub fn new(config: EncoderConfig, hidden: usize, embeddings: &EmbeddingTable, rng: &mut impl Rng) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Validation("decoder hidden size must be positive".into()));
        }
        let encoder = Encoder::new(config, rng)?;
        let d = encoder.feature_dim();
        let vocab = embeddings.vectors.dim(0);
        let init_h = Linear::new(d, hidden, rng);
        let init_c = Linear::new(d, hidden, rng);
        let embedding = Embedding::from_weight(embeddings.vectors.clone())?;
        let lstm = LstmCell::new(embeddings.dim(), hidden, rng);
        let output = Linear::new(hidden, vocab, rng);
        Ok(Self {
            encoder,
            init_h,
            init_c,
            embedding,
            lstm,
            output,
            pending: Vec::new(),
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.output.out_features()
    }

    pub fn hidden(&self) -> usize {
        self.lstm.hidden()
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.dim()
    }

    /// Eval-mode encoder features.
    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        self.encoder.infer(x)
    }

    /// Initial decoder `(h, c)` from encoder features.
    pub fn init_state(&self, z: &Tensor) -> Result<(Tensor, Tensor)> {
        Ok((self.init_h.infer(z)?, self.init_c.infer(z)?))
    }

    /// Feeds one token per batch row; returns `(logits, h', c')`.
    pub fn decoder_step(&self, tokens: &[usize], h: &Tensor, c: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let e = self.embedding.infer(tokens)?;
        let (h, c) = self.lstm.infer(&e, h, c)?;
        let logits = self.output.infer(&h)?;
        Ok((logits, h, c))
    }

    /// Teacher-forced token cross-entropy.
    ///
    /// For each body `y_1..y_k` the decoder is fed `<s>, y_1, .., y_k` and
    /// asked to predict `y_1, .., y_k, <e>`; the `k + 1` terms are averaged
    /// per sample, then over the batch. In train mode the gradients are
    /// kept for [`ShareModel::backward`].
    pub fn teacher_forced_loss(&mut self, x: &Tensor, targets: &[Vec<usize>], mode: Mode) -> Result<f64> {
        if x.ndim() == 3 && x.dim(0) != targets.len() {
            return Err(Error::shape("teacher_forced_loss", "batch", x.dim(0), targets.len()));
        }
        let u = unroll(targets, self.vocab_size())?;
        self.clear_cache();
        let z = self.encoder.forward(x, mode)?;
        let mut h = self.init_h.forward(&z, mode)?;
        let mut c = self.init_c.forward(&z, mode)?;
        let mut loss = 0.0;
        for t in 0..u.inputs.len() {
            let e = self.embedding.forward(&u.inputs[t], mode)?;
            let (hn, cn) = self.lstm.forward(&e, &h, &c, mode)?;
            let logits = self.output.forward(&hn, mode)?;
            let (l, g) = weighted_softmax_cross_entropy(&logits, &u.targets[t], &u.weights[t])?;
            loss += l;
            if mode == Mode::Train {
                self.pending.push(g);
            }
            h = hn;
            c = cn;
        }
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("teacher-forced loss is {loss}")));
        }
        Ok(loss)
    }

    /// Backpropagates the last train-mode loss through time into every
    /// parameter's gradient buffer.
    pub fn backward(&mut self) -> Result<()> {
        if self.pending.is_empty() {
            return Err(Error::Invariant("backward called without a train-mode loss".into()));
        }
        let mut dh_next: Option<Tensor> = None;
        let mut dc_next: Option<Tensor> = None;
        while let Some(dlogits) = self.pending.pop() {
            let mut dh = self.output.backward(&dlogits)?;
            if let Some(n) = &dh_next {
                axpy(1.0, n.data(), dh.data_mut());
            }
            let dc = dc_next.take().unwrap_or_else(|| Tensor::zeros(dh.shape()));
            let (dx, dh_prev, dc_prev) = self.lstm.backward(&dh, &dc)?;
            self.embedding.backward(&dx)?;
            dh_next = Some(dh_prev);
            dc_next = Some(dc_prev);
        }
        let mut dz = self.init_h.backward(&dh_next.expect("at least one step"))?;
        let dz_c = self.init_c.backward(&dc_next.expect("at least one step"))?;
        axpy(1.0, dz_c.data(), dz.data_mut());
        self.encoder.backward(&dz)?;
        Ok(())
    }

    pub fn clear_cache(&mut self) {
        self.pending.clear();
        self.encoder.clear_cache();
        self.init_h.clear_cache();
        self.init_c.clear_cache();
        self.embedding.clear_cache();
        self.lstm.clear_cache();
        self.output.clear_cache();
    }
}

impl Parameterized for ShareModel {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut v = prefixed("encoder", self.encoder.params());
        v.extend(prefixed("init_h", self.init_h.params()));
        v.extend(prefixed("init_c", self.init_c.params()));
        v.extend(prefixed("embedding", self.embedding.params()));
        v.extend(prefixed("lstm", self.lstm.params()));
        v.extend(prefixed("output", self.output.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = prefixed_mut("encoder", self.encoder.params_mut());
        v.extend(prefixed_mut("init_h", self.init_h.params_mut()));
        v.extend(prefixed_mut("init_c", self.init_c.params_mut()));
        v.extend(prefixed_mut("embedding", self.embedding.params_mut()));
        v.extend(prefixed_mut("lstm", self.lstm.params_mut()));
        v.extend(prefixed_mut("output", self.output.params_mut()));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelspace::{load_embeddings, LabelSpace};
    use crate::numkernel::{log_softmax_row, softmax_cross_entropy};
    use crate::seeded_rng;

    fn toy(seed: u64) -> (ShareModel, LabelSpace) {
        let space = LabelSpace::build(&["walk up", "walk"], &[] as &[&str]).unwrap();
        let mut rng = seeded_rng(seed);
        let emb = load_embeddings(None, &space, 3, &mut rng).unwrap();
        let cfg = EncoderConfig {
            in_channels: 2,
            widths: [3, 4],
        };
        (ShareModel::new(cfg, 5, &emb, &mut rng).unwrap(), space)
    }

    #[test]
    fn out_of_vocab_target_is_index_error() {
        let (mut m, _) = toy(1);
        let x = Tensor::zeros(&[1, 2, 6]);
        assert!(matches!(
            m.teacher_forced_loss(&x, &[vec![9]], Mode::Train),
            Err(Error::Index { .. })
        ));
    }

    #[test]
    fn uniform_logits_give_ln_m() {
        let (mut m, space) = toy(2);
        m.output.weight = Tensor::zeros(m.output.weight.shape());
        m.output.bias = Tensor::zeros(m.output.bias.shape());
        let mut rng = seeded_rng(3);
        let x = Tensor::uniform(&[2, 2, 6], 1.0, &mut rng);
        let targets: Vec<Vec<usize>> = space.sequences().iter().map(|s| s.tokens.clone()).collect();
        let loss = m.teacher_forced_loss(&x, &targets, Mode::Train).unwrap();
        assert!((loss - (space.vocab_size() as f64).ln()).abs() < 1e-12);
    }

    /// Batch of one: the loss is the plain mean of per-step cross-entropies.
    #[test]
    fn single_sample_loss_is_mean_of_steps() {
        let (mut m, space) = toy(4);
        let mut rng = seeded_rng(5);
        let x = Tensor::uniform(&[2, 2, 6], 1.0, &mut rng);
        m.teacher_forced_loss(&x, &[vec![2], vec![2]], Mode::Train).unwrap();
        m.clear_cache();

        let x1 = Tensor::uniform(&[1, 2, 6], 1.0, &mut rng);
        let body = space.sequence(0).tokens.clone();
        let loss = m.teacher_forced_loss(&x1, &[body.clone()], Mode::Eval).unwrap();

        let z = m.encode(&x1).unwrap();
        let (mut h, mut c) = m.init_state(&z).unwrap();
        let inputs: Vec<usize> = std::iter::once(START).chain(body.iter().copied()).collect();
        let outputs: Vec<usize> = body.iter().copied().chain(std::iter::once(END)).collect();
        let mut total = 0.0;
        for (&i, &o) in inputs.iter().zip(&outputs) {
            let (logits, hn, cn) = m.decoder_step(&[i], &h, &c).unwrap();
            total += softmax_cross_entropy(&logits, &[o]).unwrap().0;
            let lp = log_softmax_row(logits.row(0));
            assert!((softmax_cross_entropy(&logits, &[o]).unwrap().0 + lp[o]).abs() < 1e-15);
            h = hn;
            c = cn;
        }
        assert!((loss - total / outputs.len() as f64).abs() < 1e-14);
    }

    #[test]
    fn backward_requires_loss() {
        let (mut m, _) = toy(6);
        assert!(matches!(m.backward(), Err(Error::Invariant(_))));
    }
}
