use std::collections::HashMap;
use std::path::{Path, PathBuf};

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LabelSpace;
use crate::error::{Error, Result};
use crate::numkernel::{init_bound, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EmbeddingSource {
    Random,
    Pretrained {
        path: PathBuf,
        /// Vocabulary tokens that received a file vector.
        matched: usize,
        /// Tokens that appeared on more than one line (last line wins).
        duplicates: Vec<String>,
    },
}

/// One vector per vocabulary token, `[M, dim]`.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub vectors: Tensor,
    pub source: EmbeddingSource,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.vectors.dim(1)
    }

    pub fn vector(&self, token_id: usize) -> &[f64] {
        self.vectors.row(token_id)
    }
}

/// Word vectors for `space`'s vocabulary.
///
/// Tokens found in the file get its vectors, everything else (including
/// `<s>` and `<e>`) a seeded random vector. The file's dimension overrides
/// `fallback_dim`. Without a file every vector is random at `fallback_dim`.
pub fn load_embeddings(
    path: Option<&Path>,
    space: &LabelSpace,
    fallback_dim: usize,
    rng: &mut impl Rng,
) -> Result<EmbeddingTable> {
    let parsed = path.map(parse_word_vectors).transpose()?;
    let dim = parsed.as_ref().map(|p| p.dim).unwrap_or(fallback_dim);
    if dim == 0 {
        return Err(Error::Validation("embedding dimension must be positive".into()));
    }
    let mut vectors = Tensor::uniform(&[space.vocab_size(), dim], init_bound(dim), rng);
    let source = match (path, parsed) {
        (Some(path), Some(parsed)) => {
            let mut matched = 0;
            for (id, tok) in space.vocab().iter().enumerate() {
                if let Some(v) = parsed.vectors.get(tok) {
                    vectors.data_mut()[id * dim..(id + 1) * dim].copy_from_slice(v);
                    matched += 1;
                }
            }
            EmbeddingSource::Pretrained {
                path: path.to_path_buf(),
                matched,
                duplicates: parsed.duplicates,
            }
        }
        _ => EmbeddingSource::Random,
    };
    Ok(EmbeddingTable { vectors, source })
}

struct WordVectors {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    duplicates: Vec<String>,
}

fn parse_word_vectors(path: &Path) -> Result<WordVectors> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fmt_err = |line: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut dim: Option<usize> = None;
    let mut vectors = HashMap::new();
    let mut duplicates = Vec::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        // optional "count dim" header
        if first && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            first = false;
            continue;
        }
        first = false;
        let token = fields[0].to_lowercase();
        let values = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| fmt_err(lineno, format!("bad value for {token:?}: {e}")))?;
        if values.is_empty() {
            return Err(fmt_err(lineno, format!("token {token:?} has no vector")));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(fmt_err(
                    lineno,
                    format!("vector for {token:?} has {} values, expected {d}", values.len()),
                ))
            }
            _ => {}
        }
        if vectors.insert(token.clone(), values).is_some() {
            warn!("{}:{lineno}: duplicate vector for {token:?}; keeping the last one", path.display());
            duplicates.push(token);
        }
    }
    let dim = dim.ok_or_else(|| fmt_err(0, "no vectors in file".into()))?;
    Ok(WordVectors {
        dim,
        vectors,
        duplicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelspace::{END, START};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn write(dir: &tempfile::TempDir, body: &str) -> PathBuf {
        let p = dir.path().join("vec.txt");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn file_vectors_and_random_specials() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "walk 0.1 0.2\n");
        let space = LabelSpace::build(&["walk"], &[] as &[&str]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = load_embeddings(Some(&p), &space, 8, &mut rng).unwrap();
        assert_eq!(t.dim(), 2);
        let walk = space.token_id("walk").unwrap();
        assert_eq!(t.vector(walk), &[0.1, 0.2]);
        assert_eq!(t.vector(START).len(), 2);
        assert_ne!(t.vector(START), t.vector(END));
        assert!(matches!(t.source, EmbeddingSource::Pretrained { matched: 1, .. }));
    }

    #[test]
    fn no_file_is_seeded_random() {
        let space = LabelSpace::build(&["walk", "run"], &[] as &[&str]).unwrap();
        let a = load_embeddings(None, &space, 8, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = load_embeddings(None, &space, 8, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a.vectors.shape(), &[4, 8]);
        assert_eq!(a.vectors, b.vectors);
        assert_eq!(a.source, EmbeddingSource::Random);
    }

    #[test]
    fn header_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "3 2\nwalk 1 2\nrun 3 4\nwalk 5 6\n");
        let space = LabelSpace::build(&["walk", "run"], &[] as &[&str]).unwrap();
        let t = load_embeddings(Some(&p), &space, 8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(t.vector(space.token_id("walk").unwrap()), &[5.0, 6.0]);
        match t.source {
            EmbeddingSource::Pretrained { duplicates, matched, .. } => {
                assert_eq!(duplicates, vec!["walk"]);
                assert_eq!(matched, 2);
            }
            s => panic!("unexpected {s:?}"),
        }
    }

    #[test]
    fn inconsistent_lengths_report_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "walk 1 2\n\nrun 3 4 5\n");
        let space = LabelSpace::build(&["walk", "run"], &[] as &[&str]).unwrap();
        let err = load_embeddings(Some(&p), &space, 8, &mut ChaCha8Rng::seed_from_u64(6)).unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }), "{err}");
    }

    #[test]
    fn covering_file_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let vals = [0.1f64, -3.0e-7, 1.0 / 3.0, 2.5e10];
        let body = format!(
            "<s> {:e} {:e}\n<e> {:e} {:e}\nwalk {:e} {:e}\nrun {:e} {:e}\n",
            vals[0], vals[1], vals[2], vals[3], vals[3], vals[2], vals[1], vals[0]
        );
        let p = write(&dir, &body);
        let space = LabelSpace::build(&["walk", "run"], &[] as &[&str]).unwrap();
        let t = load_embeddings(Some(&p), &space, 8, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(t.vector(START)[1].to_bits(), vals[1].to_bits());
        assert_eq!(t.vector(END)[0].to_bits(), vals[2].to_bits());
        assert_eq!(t.vector(3)[1].to_bits(), vals[0].to_bits());
    }
}
