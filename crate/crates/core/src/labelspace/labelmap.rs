use std::collections::BTreeSet;
use std::path::Path;

use super::tokenize;
use crate::error::{Error, Result};

/// Renaming of original class names to generated names with shared tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pairs: Vec<(String, String)>,
}

impl LabelMap {
    pub fn from_pairs<A: Into<String>, B: Into<String>>(pairs: impl IntoIterator<Item = (A, B)>) -> Result<Self> {
        let pairs: Vec<(String, String)> = pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect();
        let mut originals = BTreeSet::new();
        let mut generated = BTreeSet::new();
        for (orig, gen) in &pairs {
            if !originals.insert(orig.as_str()) {
                return Err(Error::Validation(format!("label map lists {orig:?} twice")));
            }
            let toks = tokenize(gen);
            if toks.iter().all(|t| t.chars().all(|c| c.is_ascii_digit())) {
                return Err(Error::Validation(format!(
                    "generated name {gen:?} for {orig:?} has no meaningful token"
                )));
            }
            if !generated.insert(toks.join(" ")) {
                return Err(Error::Validation(format!(
                    "label map is not injective: {gen:?} is generated twice"
                )));
            }
        }
        Ok(Self { pairs })
    }

    /// Tab-separated `original<TAB>generated` lines.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (orig, gen) = line.split_once('\t').ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                line: i + 1,
                msg: "expected original<TAB>generated".into(),
            })?;
            pairs.push((orig.trim().to_string(), gen.trim().to_string()));
        }
        Self::from_pairs(pairs)
    }

    pub fn identity<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::from_pairs(names.iter().map(|n| (n.as_ref().to_string(), n.as_ref().to_string())))
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn get(&self, original: &str) -> Option<&str> {
        self.pairs.iter().find(|(o, _)| o == original).map(|(_, g)| g.as_str())
    }
}

/// Renames `class_names` through `map`, preserving class order.
pub fn apply_label_map<S: AsRef<str>>(class_names: &[S], map: &LabelMap) -> Result<Vec<String>> {
    let wanted: BTreeSet<&str> = class_names.iter().map(|s| s.as_ref()).collect();
    let have: BTreeSet<&str> = map.pairs.iter().map(|(o, _)| o.as_str()).collect();
    let missing: Vec<String> = wanted.difference(&have).map(|s| s.to_string()).collect();
    let extra: Vec<String> = have.difference(&wanted).map(|s| s.to_string()).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Coverage { missing, extra });
    }
    Ok(class_names
        .iter()
        .map(|n| map.get(n.as_ref()).expect("coverage checked").to_string())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renames_in_class_order() {
        let map = LabelMap::from_pairs([("running", "leg jog fast"), ("climbing stairs", "leg up")]).unwrap();
        let out = apply_label_map(&["climbing stairs", "running"], &map).unwrap();
        assert_eq!(out, vec!["leg up", "leg jog fast"]);
    }

    #[test]
    fn identity_map_is_noop() {
        let names = ["walk", "run", "sit down"];
        let out = apply_label_map(&names, &LabelMap::identity(&names).unwrap()).unwrap();
        assert_eq!(out, names);
    }

    #[test]
    fn coverage_error_lists_both_sides() {
        let map = LabelMap::from_pairs([("walk", "leg walk"), ("swim", "arm swim")]).unwrap();
        match apply_label_map(&["walk", "run"], &map).unwrap_err() {
            Error::Coverage { missing, extra } => {
                assert_eq!(missing, vec!["run"]);
                assert_eq!(extra, vec!["swim"]);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn rejects_non_bijective_maps() {
        assert!(LabelMap::from_pairs([("a", "x y"), ("b", "X Y")]).is_err());
        assert!(LabelMap::from_pairs([("a", "x"), ("a", "y")]).is_err());
        assert!(LabelMap::from_pairs([("a", "12")]).is_err());
    }

    #[test]
    fn loads_tab_separated_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("map.tsv");
        std::fs::write(&p, "standing still\tleg still\nrunning\tleg jog fast\n\n").unwrap();
        let map = LabelMap::load(&p).unwrap();
        assert_eq!(map.get("running"), Some("leg jog fast"));
        std::fs::write(&p, "standing still leg still\n").unwrap();
        assert!(matches!(LabelMap::load(&p), Err(Error::Format { line: 1, .. })));
    }
}
