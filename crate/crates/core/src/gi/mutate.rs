//! Random edit generation over the unpatched trees.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::edit::{Edit, EditKind, NodeRef, Payload, Trees};

/// Relative frequency of each edit kind; kinds left out are never drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct EditWeights(pub Vec<(EditKind, f64)>);

impl Default for EditWeights {
    fn default() -> Self {
        EditWeights(EditKind::standard().into_iter().map(|k| (k, 1.0)).collect())
    }
}

impl EditWeights {
    pub fn only(kind: EditKind) -> EditWeights {
        EditWeights(vec![(kind, 1.0)])
    }
}

const MAX_TRIES: usize = 1000;

/// Draws edits: kind by weight, target file uniformly among writable trees
/// that have a node of the right tag, target node uniformly within it,
/// donor uniformly over every matching node of every tree.
pub struct EditSampler {
    kinds: Vec<EditKind>,
    dist: Option<WeightedIndex<f64>>,
    targets: Vec<String>,
    files: Vec<String>,
    counts: HashMap<(String, String), usize>,
}

impl EditSampler {
    pub fn new(trees: &Trees, weights: &EditWeights) -> EditSampler {
        let positive: Vec<&(EditKind, f64)> = weights.0.iter().filter(|(_, w)| *w > 0.0).collect();
        let kinds: Vec<EditKind> = positive.iter().map(|(k, _)| k.clone()).collect();
        let dist = WeightedIndex::new(positive.iter().map(|(_, w)| *w)).ok();
        let mut counts = HashMap::new();
        let mut tags: Vec<&str> = Vec::new();
        for k in &kinds {
            tags.push(k.target_tag());
            tags.extend(k.payload_tag());
        }
        for tree in trees.targets.iter().chain(&trees.ingredients) {
            for tag in &tags {
                counts.entry((tree.file.clone(), tag.to_string())).or_insert_with(|| tree.count(tag));
            }
        }
        EditSampler {
            kinds,
            dist,
            targets: trees.targets.iter().filter(|t| !t.read_only).map(|t| t.file.clone()).collect(),
            files: trees.targets.iter().chain(&trees.ingredients).map(|t| t.file.clone()).collect(),
            counts,
        }
    }

    fn count(&self, file: &str, tag: &str) -> usize {
        self.counts.get(&(file.to_string(), tag.to_string())).copied().unwrap_or(0)
    }

    /// `None` when no enabled kind has both a target and a donor.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Edit> {
        let dist = self.dist.as_ref()?;
        for _ in 0..MAX_TRIES {
            let kind = &self.kinds[dist.sample(rng)];
            let tag = kind.target_tag();
            let files: Vec<&String> = self.targets.iter().filter(|f| self.count(f, tag) > 0).collect();
            if files.is_empty() {
                continue;
            }
            let file = files[rng.gen_range(0..files.len())];
            let target = NodeRef::new(file, tag, rng.gen_range(0..self.count(file, tag)));
            let payload = if let Some(ptag) = kind.payload_tag() {
                let total: usize = self.files.iter().map(|f| self.count(f, ptag)).sum();
                if total == 0 {
                    continue;
                }
                let mut k = rng.gen_range(0..total);
                let mut chosen = None;
                for f in &self.files {
                    let n = self.count(f, ptag);
                    if k < n {
                        chosen = Some(NodeRef::new(f, ptag, k));
                        break;
                    }
                    k -= n;
                }
                Payload::Node(chosen.expect("index within total"))
            } else if let Some(lits) = kind.literals() {
                Payload::Literal(lits[rng.gen_range(0..lits.len())].to_string())
            } else {
                Payload::None
            };
            return Some(Edit { kind: kind.clone(), target, payload });
        }
        None
    }
}

pub fn random_edit<R: Rng + ?Sized>(rng: &mut R, trees: &Trees, weights: &EditWeights) -> Option<Edit> {
    EditSampler::new(trees, weights).sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gi::tree::SourceTree;
    use crate::testgen::rng_from_seed;

    fn trees() -> Trees {
        let t = SourceTree::from_toy_source("t.xml", "fn f() { a = 1 + 2; if (a < 3) { b = 4; } }").unwrap();
        let d1 = SourceTree::from_toy_source("d1.xml", "fn g() { c = 0; }").unwrap();
        let d2 = SourceTree::from_toy_source("d2.xml", "fn h() { d = 0; e = 5; }").unwrap();
        Trees::new(vec![t], vec![d1, d2])
    }

    #[test]
    fn single_kind() {
        let mut rng = rng_from_seed(1);
        let s = EditSampler::new(&trees(), &EditWeights::only(EditKind::NumericSetting));
        for _ in 0..500 {
            assert_eq!(s.sample(&mut rng).unwrap().kind, EditKind::NumericSetting);
        }
    }

    #[test]
    fn donors_come_from_every_file_and_targets_never_from_ingredients() {
        let mut rng = rng_from_seed(2);
        let s = EditSampler::new(&trees(), &EditWeights::default());
        let mut donors = std::collections::BTreeSet::new();
        for _ in 0..10_000 {
            let e = s.sample(&mut rng).unwrap();
            assert_eq!(e.target.file, "t.xml");
            if let Payload::Node(r) = e.payload {
                donors.insert(r.file);
            }
        }
        assert_eq!(donors.into_iter().collect::<Vec<_>>(), ["d1.xml", "d2.xml", "t.xml"]);
    }

    #[test]
    fn impossible_kinds_yield_none() {
        let mut rng = rng_from_seed(3);
        let t = Trees::new(vec![SourceTree::from_toy_source("t.xml", "fn f() { }").unwrap()], vec![]);
        assert!(random_edit(&mut rng, &t, &EditWeights::only(EditKind::NumericSetting)).is_none());
        assert!(random_edit(&mut rng, &t, &EditWeights(vec![])).is_none());
    }
}
