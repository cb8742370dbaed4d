use super::{axpy, Mode, Parameterized, Tensor};
use crate::error::{Error, Result};

/// Token-id lookup table `[vocab, dim]`.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub weight: Tensor,
    cache: Vec<Vec<usize>>,
}

impl Embedding {
    pub fn from_weight(weight: Tensor) -> Result<Self> {
        weight.expect_rank("embedding", 2)?;
        Ok(Self {
            weight,
            cache: Vec::new(),
        })
    }

    pub fn vocab(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn dim(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn infer(&self, ids: &[usize]) -> Result<Tensor> {
        let (m, e) = (self.vocab(), self.dim());
        let mut data = Vec::with_capacity(ids.len() * e);
        for &id in ids {
            if id >= m {
                return Err(Error::Index {
                    what: "token id",
                    index: id,
                    limit: m,
                });
            }
            data.extend_from_slice(self.weight.row(id));
        }
        Tensor::new(&[ids.len(), e], data)
    }

    pub fn forward(&mut self, ids: &[usize], mode: Mode) -> Result<Tensor> {
        let y = self.infer(ids)?;
        if mode == Mode::Train {
            self.cache.push(ids.to_vec());
        }
        Ok(y)
    }

    /// Scatter-adds `grad_out` rows into the table gradient.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<()> {
        let ids = self
            .cache
            .pop()
            .ok_or_else(|| Error::Invariant("embedding backward without a cached train-mode forward".into()))?;
        let e = self.dim();
        grad_out.expect_shape("embedding_backward", &["batch", "dim"], &[ids.len(), e])?;
        let g = self.weight.grad_mut();
        for (i, &id) in ids.iter().enumerate() {
            axpy(1.0, grad_out.row(i), &mut g[id * e..(id + 1) * e]);
        }
        Ok(())
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

impl Parameterized for Embedding {
    fn params(&self) -> Vec<(String, &Tensor)> {
        vec![("weight".into(), &self.weight)]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![("weight".into(), &mut self.weight)]
    }
}
