//! Activity labels as token sequences.
//!
//! Class names are tokenized into a shared vocabulary (`<s>` = 0, `<e>` = 1,
//! then tokens by first appearance) and stored in a prefix trie over
//! `<s> tokens... <e>` paths. The trie is what constrained decoding walks.

mod augment;
mod embeddings;
mod labelmap;
mod trie;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use augment::augment_label;
pub use embeddings::{load_embeddings, EmbeddingSource, EmbeddingTable};
pub use labelmap::{apply_label_map, LabelMap};
pub use trie::{Trie, TrieNode};

use crate::error::{Error, Result};

pub const START: usize = 0;
pub const END: usize = 1;
pub const START_TOKEN: &str = "<s>";
pub const END_TOKEN: &str = "<e>";

/// Lowercases, splits on whitespace and strips punctuation.
pub fn tokenize(name: &str) -> Vec<String> {
    name.split_whitespace()
        .map(|w| w.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect::<String>())
        .filter(|w| !w.is_empty())
        .collect()
}

fn is_number(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_digit())
}

/// One class's token ids, without `<s>` / `<e>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSequence {
    pub class_id: usize,
    pub tokens: Vec<usize>,
}

impl LabelSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpace {
    class_names: Vec<String>,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    sequences: Vec<LabelSequence>,
    stop_tokens: BTreeSet<usize>,
    trie: Trie,
}

impl LabelSpace {
    /// Builds the vocabulary, sequences and trie for `class_names`.
    ///
    /// Tokens listed in `stop_tokens` and bare integers are excluded from
    /// token-level augmentation; they still take part in decoding.
    pub fn build<S: AsRef<str>, T: AsRef<str>>(class_names: &[S], stop_tokens: &[T]) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::Validation("label space needs at least one class".into()));
        }
        let mut vocab = vec![START_TOKEN.to_string(), END_TOKEN.to_string()];
        let mut index: HashMap<String, usize> = vocab.iter().cloned().zip(0..).collect();
        let mut sequences = Vec::with_capacity(class_names.len());
        let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();

        for (class_id, name) in class_names.iter().enumerate() {
            let name = name.as_ref();
            let toks = tokenize(name);
            if toks.is_empty() {
                return Err(Error::Validation(format!(
                    "class {class_id} name {name:?} has no tokens"
                )));
            }
            let ids: Vec<usize> = toks
                .into_iter()
                .map(|t| {
                    let next = vocab.len();
                    *index.entry(t.clone()).or_insert_with(|| {
                        vocab.push(t);
                        next
                    })
                })
                .collect();
            if let Some(&other) = seen.get(&ids) {
                return Err(Error::LabelConflict {
                    first: class_names[other].as_ref().to_string(),
                    second: name.to_string(),
                });
            }
            seen.insert(ids.clone(), class_id);
            sequences.push(LabelSequence { class_id, tokens: ids });
        }

        let mut stop = BTreeSet::new();
        for s in stop_tokens {
            for t in tokenize(s.as_ref()) {
                if let Some(&id) = index.get(&t) {
                    stop.insert(id);
                }
            }
        }
        for (id, t) in vocab.iter().enumerate().skip(2) {
            if is_number(t) {
                stop.insert(id);
            }
        }

        let trie = Trie::build(&sequences);
        Ok(Self {
            class_names: class_names.iter().map(|s| s.as_ref().to_string()).collect(),
            vocab,
            index,
            sequences,
            stop_tokens: stop,
            trie,
        })
    }

    /// Class count `C`.
    pub fn num_classes(&self) -> usize {
        self.sequences.len()
    }

    /// Vocabulary size `M`, including `<s>` and `<e>`.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_name(&self, class_id: usize) -> &str {
        &self.class_names[class_id]
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn token(&self, id: usize) -> &str {
        &self.vocab[id]
    }

    pub fn token_id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn sequence(&self, class_id: usize) -> &LabelSequence {
        &self.sequences[class_id]
    }

    pub fn sequences(&self) -> &[LabelSequence] {
        &self.sequences
    }

    pub fn trie(&self) -> &Trie {
        &self.trie
    }

    pub fn is_stop_token(&self, id: usize) -> bool {
        self.stop_tokens.contains(&id)
    }

    pub fn stop_tokens(&self) -> impl Iterator<Item = usize> + '_ {
        self.stop_tokens.iter().copied()
    }

    /// Space-joined token strings of a token-id sequence.
    pub fn render(&self, tokens: &[usize]) -> String {
        tokens.iter().map(|&t| self.token(t)).collect::<Vec<_>>().join(" ")
    }

    /// Number of distinct meaningful tokens that occur in at least two classes.
    pub fn shared_token_count(&self) -> usize {
        let mut classes_per_token = vec![0usize; self.vocab_size()];
        for seq in &self.sequences {
            let distinct: BTreeSet<usize> = seq.tokens.iter().copied().collect();
            for t in distinct {
                classes_per_token[t] += 1;
            }
        }
        classes_per_token
            .iter()
            .enumerate()
            .filter(|&(id, &n)| n >= 2 && !self.is_stop_token(id))
            .count()
    }

    /// Hex SHA-256 over class names, vocabulary and sequences. Two spaces
    /// with equal fingerprints decode identically.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.class_names {
            h.update(b"class\0");
            h.update(name.as_bytes());
            h.update(b"\0");
        }
        for tok in &self.vocab {
            h.update(b"tok\0");
            h.update(tok.as_bytes());
            h.update(b"\0");
        }
        for seq in &self.sequences {
            h.update(b"seq\0");
            for t in &seq.tokens {
                h.update((*t as u64).to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Builds a label space; free-function form of [`LabelSpace::build`].
pub fn build_label_space<S: AsRef<str>, T: AsRef<str>>(class_names: &[S], stop_tokens: &[T]) -> Result<LabelSpace> {
    LabelSpace::build(class_names, stop_tokens)
}

/// Sequence tokens that are neither stop words nor numbers.
pub fn meaningful_tokens(seq: &LabelSequence, space: &LabelSpace) -> Vec<usize> {
    seq.tokens.iter().copied().filter(|&t| !space.is_stop_token(t)).collect()
}

/// Reads a one-entry-per-line text file, skipping blank lines.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Label file: one class name per line; line order defines the class id.
pub fn read_label_file(path: &Path) -> Result<Vec<String>> {
    let names = read_lines(path)?;
    if names.is_empty() {
        return Err(Error::Validation(format!("label file {} is empty", path.display())));
    }
    Ok(names)
}

pub fn write_label_file(path: &Path, names: &[String]) -> Result<()> {
    let mut text = names.join("\n");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const NO_STOP: &[&str] = &[];

    #[test]
    fn tokenization_rules() {
        assert_eq!(tokenize("Knees Bending (crouching)"), vec!["knees", "bending", "crouching"]);
        assert_eq!(tokenize("  open   door 1 "), vec!["open", "door", "1"]);
        assert!(tokenize(" -- ").is_empty());
    }

    #[test]
    fn shared_token_vocabulary() {
        let space = LabelSpace::build(&["open door", "open fridge"], NO_STOP).unwrap();
        assert_eq!(space.vocab_size(), 5);
        assert_eq!(space.vocab(), &["<s>", "<e>", "open", "door", "fridge"]);
        let open = space.token_id("open").unwrap();
        assert_eq!(space.sequence(0).tokens[0], open);
        assert_eq!(space.sequence(1).tokens[0], open);
    }

    #[test]
    fn single_class_single_path() {
        let space = LabelSpace::build(&["walk"], NO_STOP).unwrap();
        assert_eq!(space.num_classes(), 1);
        let trie = space.trie();
        let root = trie.node(trie.root());
        assert_eq!(root.children.len(), 1);
        let walk = trie.node(root.children[0]);
        assert_eq!(walk.token, space.token_id("walk").unwrap());
        let end = trie.node(walk.children[0]);
        assert_eq!(end.token, END);
        assert_eq!(end.class_id, Some(0));
        assert_eq!(trie.leaf_count(), 1);
    }

    #[test]
    fn walk_variants_branch_after_walk() {
        let space = LabelSpace::build(&["walk upstairs", "walk downstairs", "walk"], NO_STOP).unwrap();
        let trie = space.trie();
        let root = trie.node(trie.root());
        assert_eq!(root.children.len(), 1);
        let walk = trie.node(root.children[0]);
        let next: Vec<&str> = walk.children.iter().map(|&c| space.token(trie.node(c).token)).collect();
        assert_eq!(next, vec!["upstairs", "downstairs", "<e>"]);
        assert_eq!(trie.leaf_count(), 3);
    }

    #[test]
    fn duplicate_sequences_conflict() {
        let err = LabelSpace::build(&["Walk Up", "walk up!"], NO_STOP).unwrap_err();
        match err {
            Error::LabelConflict { first, second } => {
                assert_eq!(first, "Walk Up");
                assert_eq!(second, "walk up!");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn empty_name_rejected() {
        assert!(matches!(LabelSpace::build(&["walk", "()"], NO_STOP), Err(Error::Validation(_))));
        assert!(matches!(LabelSpace::build::<&str, &str>(&[], NO_STOP), Err(Error::Validation(_))));
    }

    #[test]
    fn meaningful_token_filtering() {
        let space = LabelSpace::build(&["open door 1", "walk", "ascending stairs", "sitting and relaxing"], &["and"]).unwrap();
        let names = |c: usize| -> Vec<&str> {
            meaningful_tokens(space.sequence(c), &space).iter().map(|&t| space.token(t)).collect()
        };
        assert_eq!(names(0), vec!["open", "door"]);
        assert_eq!(names(1), vec!["walk"]);
        assert_eq!(names(2), vec!["ascending", "stairs"]);
        assert_eq!(names(3), vec!["sitting", "relaxing"]);
    }

    #[test]
    fn rebuild_is_deterministic() {
        let names = ["open door", "close door", "open drawer 1", "open drawer 2"];
        let a = LabelSpace::build(&names, NO_STOP).unwrap();
        let b = LabelSpace::build(&names, NO_STOP).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = LabelSpace::build(&["open door", "close door"], NO_STOP).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn shared_token_counting() {
        let space = LabelSpace::build(&["open door", "open drawer", "close drawer", "walk"], NO_STOP).unwrap();
        assert_eq!(space.shared_token_count(), 2);
        let space = LabelSpace::build(&["sitting and relaxing", "jump front and back"], &["and"]).unwrap();
        assert_eq!(space.shared_token_count(), 0);
    }
}
