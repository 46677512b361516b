//! Knowledge triplets, masked patterns, and the indexed triplet store.
//!
//! A triplet `<head, relation, tail>` states one fact about an object class;
//! the head doubles as the class label. A [`KnowledgeSource`] holds a set of
//! triplets together with two derived indexes: `(relation, tail) -> heads`
//! for label lookup and `head -> triplets` for per-class aggregation.
//! Expansion merges newly acquired triplets into the set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical field form: trimmed, internal whitespace collapsed, lowercased.
pub fn normalize_field(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// The closed set of relations a world is configured with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct RelationVocabulary {
    relations: Vec<String>,
}

impl RelationVocabulary {
    /// Builds a vocabulary from relation names; names are normalized and
    /// must be nonempty and pairwise distinct.
    pub fn new<I, S>(relations: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = BTreeSet::new();
        let mut canonical = Vec::new();
        for relation in relations {
            let name = normalize_field(relation.as_ref());
            if name.is_empty() {
                return Err(Error::InvalidTriplet("empty relation name".into()));
            }
            if seen.insert(name.clone()) {
                canonical.push(name);
            }
        }
        if canonical.is_empty() {
            return Err(Error::InvalidTriplet("vocabulary is empty".into()));
        }
        Ok(Self {
            relations: canonical,
        })
    }

    /// Relation names in their configured order.
    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn contains(&self, canonical: &str) -> bool {
        self.relations.iter().any(|r| r == canonical)
    }

    /// Normalizes a raw relation name and checks membership.
    pub fn canonicalize(&self, raw: &str) -> Result<String> {
        let name = normalize_field(raw);
        if self.contains(&name) {
            Ok(name)
        } else {
            Err(Error::UnknownRelation(raw.to_string()))
        }
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }
}

impl Default for RelationVocabulary {
    /// The six default relations used by generated worlds.
    fn default() -> Self {
        Self::new([
            "usedfor",
            "isa",
            "madeof",
            "capableof",
            "atlocation",
            "hasproperty",
        ])
        .expect("default vocabulary is valid")
    }
}

impl TryFrom<Vec<String>> for RelationVocabulary {
    type Error = Error;

    fn try_from(value: Vec<String>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<RelationVocabulary> for Vec<String> {
    fn from(value: RelationVocabulary) -> Self {
        value.relations
    }
}

/// One knowledge item `<head, relation, tail>`.
///
/// Fields are stored in canonical form (see [`normalize_field`]), so equality
/// and ordering are insensitive to case and stray whitespace in the input.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(into = "(String, String, String)")]
pub struct Triplet {
    head: String,
    relation: String,
    tail: String,
}

impl Triplet {
    /// Validates and canonicalizes the three fields. The relation must be a
    /// member of `vocab`; all fields must be nonempty after normalization.
    pub fn new(head: &str, relation: &str, tail: &str, vocab: &RelationVocabulary) -> Result<Self> {
        let head = normalize_field(head);
        if head.is_empty() {
            return Err(Error::InvalidTriplet(format!(
                "empty head in <{head}, {relation}, {tail}>"
            )));
        }
        let relation = vocab.canonicalize(relation)?;
        let tail = normalize_field(tail);
        if tail.is_empty() {
            return Err(Error::InvalidTriplet(format!(
                "empty tail in <{head}, {relation}, {tail}>"
            )));
        }
        Ok(Self {
            head,
            relation,
            tail,
        })
    }

    pub fn head(&self) -> &str {
        &self.head
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn tail(&self) -> &str {
        &self.tail
    }

    /// The `(relation, tail)` pair, the unit the classifier scores.
    pub fn rt(&self) -> (&str, &str) {
        (&self.relation, &self.tail)
    }
}

impl From<Triplet> for (String, String, String) {
    fn from(t: Triplet) -> Self {
        (t.head, t.relation, t.tail)
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, {}>", self.head, self.relation, self.tail)
    }
}

/// A head-masked query pattern: `[MASK, relation, tail]` (confirmation) or
/// `[MASK, relation, MASK]` (exploration). The head slot is always masked,
/// the relation never is.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct MaskedTriplet {
    relation: String,
    tail: Option<String>,
}

impl MaskedTriplet {
    /// `[MASK, relation, tail]` — asks which head carries a known pair.
    pub fn confirmation(relation: &str, tail: &str) -> Self {
        Self {
            relation: normalize_field(relation),
            tail: Some(normalize_field(tail)),
        }
    }

    /// `[MASK, relation, MASK]` — asks openly along a relation.
    pub fn exploration(relation: &str) -> Self {
        Self {
            relation: normalize_field(relation),
            tail: None,
        }
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn tail(&self) -> Option<&str> {
        self.tail.as_deref()
    }

    pub fn is_exploration(&self) -> bool {
        self.tail.is_none()
    }
}

impl fmt::Display for MaskedTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.tail {
            Some(tail) => write!(f, "[MASK, {}, {}]", self.relation, tail),
            None => write!(f, "[MASK, {}, MASK]", self.relation),
        }
    }
}

/// Outcome of a [`KnowledgeSource::merge`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeStats {
    pub added: usize,
    pub duplicates: usize,
}

/// Outcome of [`KnowledgeSource::load`]: the source plus how many duplicate
/// lines were dropped.
#[derive(Debug)]
pub struct LoadReport {
    pub source: KnowledgeSource,
    pub duplicates: usize,
}

#[derive(Serialize, Deserialize)]
struct KnowledgeSourceData {
    vocabulary: Vec<String>,
    triplets: Vec<(String, String, String)>,
}

/// An indexed set of knowledge triplets over a fixed relation vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KnowledgeSourceData", into = "KnowledgeSourceData")]
pub struct KnowledgeSource {
    vocab: RelationVocabulary,
    entries: BTreeSet<Triplet>,
    index_rt: BTreeMap<(String, String), BTreeSet<String>>,
    index_head: BTreeMap<String, BTreeSet<Triplet>>,
}

impl KnowledgeSource {
    pub fn new(vocab: RelationVocabulary) -> Self {
        Self {
            vocab,
            entries: BTreeSet::new(),
            index_rt: BTreeMap::new(),
            index_head: BTreeMap::new(),
        }
    }

    pub fn vocabulary(&self) -> &RelationVocabulary {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, triplet: &Triplet) -> bool {
        self.entries.contains(triplet)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triplet> {
        self.entries.iter()
    }

    /// Distinct heads present in the source.
    pub fn heads(&self) -> impl Iterator<Item = &str> {
        self.index_head.keys().map(String::as_str)
    }

    /// All triplets carrying the given head.
    pub fn head_triplets(&self, head: &str) -> impl Iterator<Item = &Triplet> {
        self.index_head
            .get(&normalize_field(head))
            .into_iter()
            .flatten()
    }

    /// Distinct `(relation, tail)` pairs, in canonical order.
    pub fn rt_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.index_rt.keys().map(|(r, t)| (r.as_str(), t.as_str()))
    }

    /// Inserts one triplet. Returns `true` iff it was not already present.
    pub fn insert(&mut self, triplet: Triplet) -> Result<bool> {
        if !self.vocab.contains(triplet.relation()) {
            return Err(Error::UnknownRelation(triplet.relation().to_string()));
        }
        if !self.entries.insert(triplet.clone()) {
            return Ok(false);
        }
        self.index_rt
            .entry((triplet.relation.clone(), triplet.tail.clone()))
            .or_default()
            .insert(triplet.head.clone());
        self.index_head
            .entry(triplet.head.clone())
            .or_default()
            .insert(triplet);
        Ok(true)
    }

    /// Merges a batch of acquired triplets. The merge is atomic: if any
    /// triplet fails validation, the source is left untouched.
    pub fn merge<I>(&mut self, acquired: I) -> Result<MergeStats>
    where
        I: IntoIterator<Item = Triplet>,
    {
        let batch: Vec<Triplet> = acquired.into_iter().collect();
        for triplet in &batch {
            if !self.vocab.contains(triplet.relation()) {
                return Err(Error::UnknownRelation(triplet.relation().to_string()));
            }
        }
        let mut stats = MergeStats {
            added: 0,
            duplicates: 0,
        };
        for triplet in batch {
            if self.insert(triplet)? {
                stats.added += 1;
            } else {
                stats.duplicates += 1;
            }
        }
        Ok(stats)
    }

    /// Heads `h` such that `<h, relation, tail>` is in the source.
    pub fn lookup_heads(&self, relation: &str, tail: &str) -> BTreeSet<String> {
        let key = (normalize_field(relation), normalize_field(tail));
        self.index_rt.get(&key).cloned().unwrap_or_default()
    }

    /// Triplets agreeing with the pattern on every unmasked field.
    pub fn match_pattern(&self, pattern: &MaskedTriplet) -> Vec<Triplet> {
        self.entries
            .iter()
            .filter(|t| {
                t.relation() == pattern.relation()
                    && pattern.tail().map_or(true, |tail| t.tail() == tail)
            })
            .cloned()
            .collect()
    }

    /// Relation frequencies as proportions of the entry count.
    pub fn relation_frequencies(&self) -> Result<BTreeMap<String, f64>> {
        if self.entries.is_empty() {
            return Err(Error::EmptyKnowledge);
        }
        let total = self.entries.len() as f64;
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for triplet in &self.entries {
            *counts.entry(triplet.relation.clone()).or_default() += 1;
        }
        Ok(counts
            .into_iter()
            .map(|(relation, count)| (relation, count as f64 / total))
            .collect())
    }

    /// Writes the source in the triplet line format: one
    /// `head<TAB>relation<TAB>tail` record per line, LF endings, sorted
    /// canonically so repeated saves are byte-identical.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_line_format())?;
        Ok(())
    }

    /// The triplet line format as a string (see [`KnowledgeSource::save`]).
    pub fn to_line_format(&self) -> String {
        let mut out = String::new();
        for triplet in &self.entries {
            out.push_str(triplet.head());
            out.push('\t');
            out.push_str(triplet.relation());
            out.push('\t');
            out.push_str(triplet.tail());
            out.push('\n');
        }
        out
    }

    /// Loads a triplet file. Lines starting with `#` are comments; duplicate
    /// records are dropped and counted in the returned report.
    pub fn load(path: impl AsRef<Path>, vocab: RelationVocabulary) -> Result<LoadReport> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_line_format(&text, vocab, &path.display().to_string())
    }

    /// Parses the triplet line format. `origin` names the source in errors.
    pub fn from_line_format(
        text: &str,
        vocab: RelationVocabulary,
        origin: &str,
    ) -> Result<LoadReport> {
        let mut source = KnowledgeSource::new(vocab);
        let mut duplicates = 0;
        for (number, line) in text.lines().enumerate() {
            let number = number + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::TripletFile {
                    path: origin.to_string(),
                    line: number,
                    message: format!("expected 3 tab-separated fields, got {}", fields.len()),
                });
            }
            let triplet = Triplet::new(fields[0], fields[1], fields[2], source.vocabulary())
                .map_err(|e| Error::TripletFile {
                    path: origin.to_string(),
                    line: number,
                    message: e.to_string(),
                })?;
            if !source.insert(triplet)? {
                duplicates += 1;
            }
        }
        Ok(LoadReport { source, duplicates })
    }
}

impl TryFrom<KnowledgeSourceData> for KnowledgeSource {
    type Error = Error;

    fn try_from(data: KnowledgeSourceData) -> Result<Self> {
        let vocab = RelationVocabulary::new(data.vocabulary)?;
        let mut source = KnowledgeSource::new(vocab);
        for (head, relation, tail) in data.triplets {
            let triplet = Triplet::new(&head, &relation, &tail, source.vocabulary())?;
            source.insert(triplet)?;
        }
        Ok(source)
    }
}

impl From<KnowledgeSource> for KnowledgeSourceData {
    fn from(source: KnowledgeSource) -> Self {
        Self {
            vocabulary: source.vocab.relations.clone(),
            triplets: source
                .entries
                .into_iter()
                .map(|t| (t.head, t.relation, t.tail))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab() -> RelationVocabulary {
        RelationVocabulary::default()
    }

    fn t(head: &str, relation: &str, tail: &str) -> Triplet {
        Triplet::new(head, relation, tail, &vocab()).unwrap()
    }

    #[test]
    fn normalization_collapses_case_and_whitespace() {
        let a = t("  Dog ", "IsA", "large   mammal");
        let b = t("dog", "isa", "large mammal");
        assert_eq!(a, b);
        assert_eq!(a.head(), "dog");
        assert_eq!(a.tail(), "large mammal");
    }

    #[test]
    fn unknown_relation_is_rejected() {
        let err = Triplet::new("dog", "Eats", "bone", &vocab()).unwrap_err();
        assert!(matches!(err, Error::UnknownRelation(_)));
    }

    #[test]
    fn empty_fields_are_rejected() {
        assert!(Triplet::new("", "isa", "mammal", &vocab()).is_err());
        assert!(Triplet::new("dog", "isa", "  ", &vocab()).is_err());
    }

    #[test]
    fn insert_into_empty_source() {
        let mut source = KnowledgeSource::new(vocab());
        assert!(source.insert(t("dog", "isa", "mammal")).unwrap());
        assert_eq!(source.len(), 1);
    }

    #[test]
    fn insert_is_idempotent() {
        let mut source = KnowledgeSource::new(vocab());
        assert!(source.insert(t("dog", "isa", "mammal")).unwrap());
        assert!(!source.insert(t("dog", "IsA", "Mammal")).unwrap());
        assert_eq!(source.len(), 1);
    }

    #[test]
    fn insert_rejects_relation_outside_source_vocabulary() {
        let other = RelationVocabulary::new(["eats"]).unwrap();
        let alien = Triplet::new("dog", "eats", "bone", &other).unwrap();
        let mut source = KnowledgeSource::new(vocab());
        assert!(matches!(
            source.insert(alien),
            Err(Error::UnknownRelation(_))
        ));
    }

    #[test]
    fn merge_disjoint_sets() {
        let mut source = KnowledgeSource::new(vocab());
        for triplet in [
            t("dog", "isa", "mammal"),
            t("cup", "usedfor", "drinking"),
            t("cup", "madeof", "ceramic"),
        ] {
            source.insert(triplet).unwrap();
        }
        let stats = source
            .merge([t("cat", "isa", "mammal"), t("knife", "usedfor", "cutting")])
            .unwrap();
        assert_eq!(stats, MergeStats { added: 2, duplicates: 0 });
        assert_eq!(source.len(), 5);
    }

    #[test]
    fn merge_of_subset_adds_nothing() {
        let mut source = KnowledgeSource::new(vocab());
        source.insert(t("dog", "isa", "mammal")).unwrap();
        let stats = source.merge([t("dog", "isa", "mammal")]).unwrap();
        assert_eq!(stats, MergeStats { added: 0, duplicates: 1 });
        assert_eq!(source.len(), 1);
    }

    #[test]
    fn merge_counts_added_and_duplicates() {
        // Union enumerated by hand: {<dog,isa,mammal>} with
        // {<dog,isa,mammal>, <cat,isa,mammal>} gives 2 entries, 1 added.
        let mut source = KnowledgeSource::new(vocab());
        source.insert(t("dog", "isa", "mammal")).unwrap();
        let stats = source
            .merge([t("dog", "isa", "mammal"), t("cat", "isa", "mammal")])
            .unwrap();
        assert_eq!(stats, MergeStats { added: 1, duplicates: 1 });
        assert_eq!(source.len(), 2);
    }

    #[test]
    fn merge_is_atomic_on_invalid_triplet() {
        let other = RelationVocabulary::new(["eats"]).unwrap();
        let alien = Triplet::new("dog", "eats", "bone", &other).unwrap();
        let mut source = KnowledgeSource::new(vocab());
        source.insert(t("dog", "isa", "mammal")).unwrap();
        let result = source.merge([t("cat", "isa", "mammal"), alien]);
        assert!(result.is_err());
        assert_eq!(source.len(), 1, "failed merge must not half-apply");
    }

    #[test]
    fn lookup_heads_matches_examples() {
        let mut source = KnowledgeSource::new(vocab());
        source.insert(t("dog", "isa", "mammal")).unwrap();
        assert_eq!(
            source.lookup_heads("isa", "mammal"),
            BTreeSet::from(["dog".to_string()])
        );
        assert!(source.lookup_heads("usedfor", "drinking").is_empty());

        source.insert(t("cat", "isa", "mammal")).unwrap();
        assert_eq!(
            source.lookup_heads("isa", "mammal"),
            BTreeSet::from(["cat".to_string(), "dog".to_string()])
        );
    }

    #[test]
    fn match_pattern_filters_on_unmasked_fields() {
        let mut source = KnowledgeSource::new(vocab());
        source.insert(t("dog", "isa", "mammal")).unwrap();
        source.insert(t("cat", "isa", "mammal")).unwrap();
        source.insert(t("cup", "usedfor", "drinking")).unwrap();

        let confirmation = source.match_pattern(&MaskedTriplet::confirmation("isa", "mammal"));
        assert_eq!(confirmation.len(), 2);

        let exploration = source.match_pattern(&MaskedTriplet::exploration("usedfor"));
        assert_eq!(exploration, vec![t("cup", "usedfor", "drinking")]);

        assert!(source
            .match_pattern(&MaskedTriplet::exploration("madeof"))
            .is_empty());
    }

    #[test]
    fn relation_frequencies_hand_count() {
        let mut source = KnowledgeSource::new(vocab());
        source.insert(t("cup", "usedfor", "drinking")).unwrap();
        source.insert(t("knife", "usedfor", "cutting")).unwrap();
        source.insert(t("dog", "isa", "mammal")).unwrap();
        source.insert(t("cup", "madeof", "ceramic")).unwrap();
        let freq = source.relation_frequencies().unwrap();
        assert!((freq["usedfor"] - 0.5).abs() < 1e-12);
        assert!((freq["isa"] - 0.25).abs() < 1e-12);
        assert!((freq["madeof"] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn relation_frequencies_degenerate_and_empty() {
        let mut source = KnowledgeSource::new(vocab());
        assert!(matches!(
            source.relation_frequencies(),
            Err(Error::EmptyKnowledge)
        ));
        source.insert(t("dog", "isa", "mammal")).unwrap();
        let freq = source.relation_frequencies().unwrap();
        assert_eq!(freq.len(), 1);
        assert!((freq["isa"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.tsv");
        let mut source = KnowledgeSource::new(vocab());
        source.insert(t("dog", "isa", "mammal")).unwrap();
        source.insert(t("cup", "usedfor", "drinking")).unwrap();
        source.insert(t("cup", "madeof", "ceramic")).unwrap();
        source.save(&path).unwrap();

        let report = KnowledgeSource::load(&path, vocab()).unwrap();
        assert_eq!(report.source, source);
        assert_eq!(report.duplicates, 0);

        // Two saves are byte-identical.
        let first = fs::read(&path).unwrap();
        source.save(&path).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
    }

    #[test]
    fn load_reports_malformed_line_number() {
        let text = "dog\tisa\tmammal\ncup\tusedfor\n";
        let err = KnowledgeSource::from_line_format(text, vocab(), "test").unwrap_err();
        match err {
            Error::TripletFile { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn load_skips_comments_and_counts_duplicates() {
        let text = "# knowledge dump\ndog\tisa\tmammal\ndog\tisa\tmammal\n";
        let report = KnowledgeSource::from_line_format(text, vocab(), "test").unwrap();
        assert_eq!(report.source.len(), 1);
        assert_eq!(report.duplicates, 1);
    }

    fn arbitrary_triplet() -> impl Strategy<Value = Triplet> {
        let heads = prop::sample::select(vec!["dog", "cat", "cup", "saw", "pot", "fan"]);
        let relations = prop::sample::select(vec!["isa", "usedfor", "madeof"]);
        let tails = prop::sample::select(vec!["mammal", "tool", "wood", "cutting", "drinking"]);
        (heads, relations, tails).prop_map(|(h, r, tl)| t(h, r, tl))
    }

    fn arbitrary_source(max: usize) -> impl Strategy<Value = KnowledgeSource> {
        prop::collection::vec(arbitrary_triplet(), 0..max).prop_map(|triplets| {
            let mut source = KnowledgeSource::new(vocab());
            for triplet in triplets {
                source.insert(triplet).unwrap();
            }
            source
        })
    }

    proptest! {
        #[test]
        fn merge_is_monotone_union(mut left in arbitrary_source(12), right in arbitrary_source(12)) {
            let before: BTreeSet<Triplet> = left.iter().cloned().collect();
            let acquired: Vec<Triplet> = right.iter().cloned().collect();
            let stats = left.merge(acquired.clone()).unwrap();
            for triplet in before.iter().chain(acquired.iter()) {
                prop_assert!(left.contains(triplet));
            }
            prop_assert!(left.len() <= before.len() + acquired.len());
            prop_assert_eq!(stats.added + stats.duplicates, acquired.len());
        }

        #[test]
        fn indexes_cohere_with_entries(source in arbitrary_source(16)) {
            for triplet in source.iter() {
                prop_assert!(source
                    .lookup_heads(triplet.relation(), triplet.tail())
                    .contains(triplet.head()));
            }
            let heads: Vec<String> = source.heads().map(str::to_string).collect();
            for head in heads {
                for triplet in source.head_triplets(&head) {
                    prop_assert!(source.contains(triplet));
                }
            }
        }

        #[test]
        fn pattern_match_agrees_with_lookup(source in arbitrary_source(16)) {
            for (relation, tail) in source.rt_pairs().map(|(r, t)| (r.to_string(), t.to_string())).collect::<Vec<_>>() {
                let pattern = MaskedTriplet::confirmation(&relation, &tail);
                let matched: BTreeSet<String> = source
                    .match_pattern(&pattern)
                    .into_iter()
                    .map(|t| t.head().to_string())
                    .collect();
                prop_assert_eq!(matched, source.lookup_heads(&relation, &tail));
            }
        }

        #[test]
        fn frequencies_sum_to_one(source in arbitrary_source(16)) {
            prop_assume!(!source.is_empty());
            let freq = source.relation_frequencies().unwrap();
            let sum: f64 = freq.values().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(freq.values().all(|p| *p >= 0.0));
        }

        #[test]
        fn line_format_round_trips(source in arbitrary_source(16)) {
            let text = source.to_line_format();
            let report = KnowledgeSource::from_line_format(&text, vocab(), "prop").unwrap();
            prop_assert_eq!(report.source, source);
        }
    }
}
