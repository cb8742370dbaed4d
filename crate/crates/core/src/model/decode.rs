//! Trie-constrained decoding.
//!
//! Every class's score is `sum_t log P(y_t | z, y_<t)` over its full path
//! `y_1..y_k, <e>`. Classes sharing a prefix share the decoder steps for
//! it: the trie is walked level by level, one batched decoder step per
//! internal node, and children inherit the parent's accumulated score.

use serde::{Deserialize, Serialize};

use super::ShareModel;
use crate::error::{Error, Result};
use crate::labelspace::LabelSpace;
use crate::numkernel::{log_softmax_row, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub class_id: usize,
    /// Total log-probability of each class's sequence, indexed by class id.
    pub class_scores: Vec<f64>,
    /// Token log-probabilities along the winning path, `<e>` included.
    pub step_log_probs: Vec<f64>,
}

/// Work done by one decode call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecodeStats {
    pub decoder_steps: usize,
    /// Largest number of partial paths held at once.
    pub max_live_paths: usize,
}

struct Partial {
    node: usize,
    h: Tensor,
    c: Tensor,
    /// Per batch row, the token log-probabilities consumed so far.
    path: Vec<Vec<f64>>,
    score: Vec<f64>,
}

/// Index of the maximum, lowest index on ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn constrained_decode(model: &ShareModel, x: &Tensor, space: &LabelSpace) -> Result<Vec<DecodeResult>> {
    constrained_decode_with_stats(model, x, space).map(|(r, _)| r)
}

pub fn constrained_decode_with_stats(
    model: &ShareModel,
    x: &Tensor,
    space: &LabelSpace,
) -> Result<(Vec<DecodeResult>, DecodeStats)> {
    let n_classes = space.num_classes();
    if n_classes == 0 {
        return Err(Error::Validation("cannot decode into an empty label space".into()));
    }
    if model.vocab_size() != space.vocab_size() {
        return Err(Error::shape("constrained_decode", "vocabulary", model.vocab_size(), space.vocab_size()));
    }
    let trie = space.trie();
    let z = model.encode(x)?;
    let batch = z.dim(0);
    let (h0, c0) = model.init_state(&z)?;

    let mut class_scores = vec![vec![f64::NEG_INFINITY; n_classes]; batch];
    let mut class_paths: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n_classes]; batch];
    let mut stats = DecodeStats::default();
    let mut frontier = vec![Partial {
        node: trie.root(),
        h: h0,
        c: c0,
        path: vec![Vec::new(); batch],
        score: vec![0.0; batch],
    }];

    while !frontier.is_empty() {
        stats.max_live_paths = stats.max_live_paths.max(frontier.len());
        let mut next = Vec::new();
        for p in frontier {
            let node = trie.node(p.node);
            let tokens = vec![node.token; batch];
            let (logits, h, c) = model.decoder_step(&tokens, &p.h, &p.c)?;
            stats.decoder_steps += 1;
            let log_probs: Vec<Vec<f64>> = (0..batch).map(|b| log_softmax_row(logits.row(b))).collect();
            for &child in &node.children {
                let child_node = trie.node(child);
                let tok = child_node.token;
                let mut score = p.score.clone();
                let mut path = p.path.clone();
                for b in 0..batch {
                    score[b] += log_probs[b][tok];
                    path[b].push(log_probs[b][tok]);
                }
                if let Some(class) = child_node.class_id {
                    for b in 0..batch {
                        class_scores[b][class] = score[b];
                        class_paths[b][class] = std::mem::take(&mut path[b]);
                    }
                } else {
                    next.push(Partial {
                        node: child,
                        h: h.clone(),
                        c: c.clone(),
                        path,
                        score,
                    });
                }
            }
        }
        frontier = next;
    }

    let results = class_scores
        .into_iter()
        .zip(class_paths)
        .map(|(scores, mut paths)| {
            let class_id = argmax_lowest(&scores);
            DecodeResult {
                class_id,
                step_log_probs: std::mem::take(&mut paths[class_id]),
                class_scores: scores,
            }
        })
        .collect();
    Ok((results, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelspace::{load_embeddings, END, START};
    use crate::model::EncoderConfig;
    use crate::numkernel::Mode;
    use crate::seeded_rng;

    fn model_for(space: &LabelSpace, seed: u64) -> ShareModel {
        let mut rng = seeded_rng(seed);
        let emb = load_embeddings(None, space, 4, &mut rng).unwrap();
        let cfg = EncoderConfig {
            in_channels: 2,
            widths: [3, 4],
        };
        let mut m = ShareModel::new(cfg, 6, &emb, &mut rng).unwrap();
        m.encoder.forward(&Tensor::uniform(&[3, 2, 7], 1.0, &mut rng), Mode::Train).unwrap();
        m.clear_cache();
        m
    }

    /// Teacher-forces one class's full sequence with fresh state.
    fn oracle(m: &ShareModel, x: &Tensor, body: &[usize]) -> f64 {
        let z = m.encode(x).unwrap();
        let (mut h, mut c) = m.init_state(&z).unwrap();
        let mut input = START;
        let mut total = 0.0;
        for &tok in body.iter().chain(std::iter::once(&END)) {
            let (logits, hn, cn) = m.decoder_step(&[input], &h, &c).unwrap();
            let row = logits.row(0);
            let max = row.iter().cloned().fold(f64::MIN, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += row[tok] - lse;
            input = tok;
            h = hn;
            c = cn;
        }
        total
    }

    #[test]
    fn single_class_always_predicted() {
        let space = LabelSpace::build(&["walk"], &[] as &[&str]).unwrap();
        let m = model_for(&space, 1);
        let mut rng = seeded_rng(2);
        let x = Tensor::uniform(&[3, 2, 7], 1.0, &mut rng);
        let res = constrained_decode(&m, &x, &space).unwrap();
        for (b, r) in res.iter().enumerate() {
            assert_eq!(r.class_id, 0);
            let xb = Tensor::new(&[1, 2, 7], x.data()[b * 14..(b + 1) * 14].to_vec()).unwrap();
            assert!((r.class_scores[0] - oracle(&m, &xb, &space.sequence(0).tokens)).abs() < 1e-12);
            assert_eq!(r.step_log_probs.len(), 2);
        }
    }

    #[test]
    fn scores_match_per_class_oracle() {
        let space = LabelSpace::build(
            &["walk upstairs", "walk downstairs", "walk", "open door 1", "open door 2", "close door"],
            &[] as &[&str],
        )
        .unwrap();
        let m = model_for(&space, 3);
        let mut rng = seeded_rng(4);
        let x = Tensor::uniform(&[2, 2, 7], 1.0, &mut rng);
        let (res, stats) = constrained_decode_with_stats(&m, &x, &space).unwrap();
        assert!(stats.decoder_steps <= space.trie().len());
        assert_eq!(stats.decoder_steps, space.trie().internal_count());
        assert!(stats.max_live_paths <= space.num_classes());
        for (b, r) in res.iter().enumerate() {
            let xb = Tensor::new(&[1, 2, 7], x.data()[b * 14..(b + 1) * 14].to_vec()).unwrap();
            for c in 0..space.num_classes() {
                let o = oracle(&m, &xb, &space.sequence(c).tokens);
                assert!((r.class_scores[c] - o).abs() < 1e-12);
            }
            let best = argmax_lowest(&r.class_scores);
            assert_eq!(r.class_id, best);
            let s: f64 = r.step_log_probs.iter().sum();
            assert!((s - r.class_scores[best]).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_go_to_lowest_class() {
        // "a b" and "a c": make b and c indistinguishable to the output layer.
        let space = LabelSpace::build(&["a c", "a b"], &[] as &[&str]).unwrap();
        let mut m = model_for(&space, 5);
        let (b, c) = (space.token_id("b").unwrap(), space.token_id("c").unwrap());
        let h = m.hidden();
        let row_b: Vec<f64> = m.output.weight.row(b).to_vec();
        m.output.weight.data_mut()[c * h..(c + 1) * h].copy_from_slice(&row_b);
        let bias_b = m.output.bias.data()[b];
        m.output.bias.data_mut()[c] = bias_b;
        let eb: Vec<f64> = m.embedding.weight.row(b).to_vec();
        let e = m.embed_dim();
        m.embedding.weight.data_mut()[c * e..(c + 1) * e].copy_from_slice(&eb);

        let mut rng = seeded_rng(6);
        let x = Tensor::uniform(&[4, 2, 7], 1.0, &mut rng);
        for r in constrained_decode(&m, &x, &space).unwrap() {
            assert_eq!(r.class_scores[0], r.class_scores[1]);
            assert_eq!(r.class_id, 0);
        }
    }

    #[test]
    fn argmax_tie_break() {
        assert_eq!(argmax_lowest(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax_lowest(&[f64::NEG_INFINITY, -1.0]), 1);
    }

    #[test]
    fn vocab_mismatch_rejected() {
        let space = LabelSpace::build(&["walk", "run"], &[] as &[&str]).unwrap();
        let m = model_for(&space, 7);
        let other = LabelSpace::build(&["walk", "run", "jump"], &[] as &[&str]).unwrap();
        assert!(constrained_decode(&m, &Tensor::zeros(&[1, 2, 7]), &other).is_err());
    }
}
