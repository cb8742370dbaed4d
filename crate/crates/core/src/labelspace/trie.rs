use super::{LabelSequence, END, START};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrieNode {
    pub token: usize,
    pub parent: Option<usize>,
    /// Child node indices in insertion order.
    pub children: Vec<usize>,
    /// Set on `<e>` leaves only.
    pub class_id: Option<usize>,
    pub depth: usize,
}

/// Prefix tree over `<s> tokens... <e>` paths; node 0 is the `<s>` root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trie {
    nodes: Vec<TrieNode>,
}

impl Trie {
    pub fn build(sequences: &[LabelSequence]) -> Self {
        let mut trie = Trie {
            nodes: vec![TrieNode {
                token: START,
                parent: None,
                children: Vec::new(),
                class_id: None,
                depth: 0,
            }],
        };
        for seq in sequences {
            let mut node = 0;
            for &tok in seq.tokens.iter().chain(std::iter::once(&END)) {
                node = match trie.child(node, tok) {
                    Some(c) => c,
                    None => {
                        let id = trie.nodes.len();
                        let depth = trie.nodes[node].depth + 1;
                        trie.nodes.push(TrieNode {
                            token: tok,
                            parent: Some(node),
                            children: Vec::new(),
                            class_id: None,
                            depth,
                        });
                        trie.nodes[node].children.push(id);
                        id
                    }
                };
            }
            trie.nodes[node].class_id = Some(seq.class_id);
        }
        trie
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> &TrieNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[TrieNode] {
        &self.nodes
    }

    pub fn child(&self, node: usize, token: usize) -> Option<usize> {
        self.nodes[node].children.iter().copied().find(|&c| self.nodes[c].token == token)
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.nodes[node].children.is_empty()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_empty()).count()
    }

    /// Follows `tokens` (without `<s>`) from the root.
    pub fn walk(&self, tokens: &[usize]) -> Option<usize> {
        tokens.iter().try_fold(self.root(), |n, &t| self.child(n, t))
    }

    /// Number of nodes that have children, i.e. decoder steps needed to
    /// score every class.
    pub fn internal_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.children.is_empty()).count()
    }
}
