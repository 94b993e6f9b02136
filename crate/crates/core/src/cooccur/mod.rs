//! Windowed phrase co-occurrence counts over a tokenized corpus.
//!
//! A pair `(i, j)` counts when a source match starts at `i`, a target match
//! starts at `j`, both lie in the same document and `|i - j| < W`.

mod bucket;

pub use bucket::{bucketize, bucket_label, median_count, top_k, TopK};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

use crate::{Error, Result};

pub const DEFAULT_WINDOW: usize = 200;

/// Separates documents in the token stream. Never produced by the tokenizer.
pub const SENTINEL: u32 = u32::MAX;

/// Splits text into alphanumeric runs and single punctuation characters.
/// Case is preserved.
pub fn tokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            start.get_or_insert(i);
            continue;
        }
        if let Some(s) = start.take() {
            out.push(&text[s..i]);
        }
        if !c.is_whitespace() {
            out.push(&text[i..i + c.len_utf8()]);
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}

/// Immutable token stream with a positional index on token ids.
#[derive(Debug, Clone, Default)]
pub struct CorpusIndex {
    words: HashMap<String, u32>,
    tokens: Vec<u32>,
    postings: HashMap<u32, Vec<usize>>,
    n_docs: usize,
}

impl CorpusIndex {
    pub fn build<'a, I: IntoIterator<Item = &'a str>>(docs: I) -> Self {
        let mut words: HashMap<String, u32> = HashMap::new();
        let mut tokens = Vec::new();
        let mut n_docs = 0;
        for doc in docs {
            if n_docs > 0 {
                tokens.push(SENTINEL);
            }
            n_docs += 1;
            for w in tokenize(doc) {
                let next = words.len() as u32;
                tokens.push(*words.entry(w.to_string()).or_insert(next));
            }
        }
        Self::from_parts(words, tokens, n_docs)
    }

    /// Builds from raw ids; `SENTINEL` marks document boundaries.
    pub fn from_ids(tokens: Vec<u32>) -> Self {
        let n_docs = if tokens.is_empty() { 0 } else { 1 + tokens.iter().filter(|&&t| t == SENTINEL).count() };
        Self::from_parts(HashMap::new(), tokens, n_docs)
    }

    fn from_parts(words: HashMap<String, u32>, tokens: Vec<u32>, n_docs: usize) -> Self {
        let mut postings: HashMap<u32, Vec<usize>> = HashMap::new();
        for (i, &t) in tokens.iter().enumerate() {
            if t != SENTINEL {
                postings.entry(t).or_default().push(i);
            }
        }
        Self { words, tokens, postings, n_docs }
    }

    /// Reads documents from files. `.jsonl` files hold one `{"text": ..}`
    /// object per line; other files are split into documents at blank lines.
    pub fn from_files<P: AsRef<Path>>(paths: &[P]) -> Result<Self> {
        let mut docs = Vec::new();
        for p in paths {
            let p = p.as_ref();
            let text = std::fs::read_to_string(p)?;
            if p.extension().is_some_and(|e| e == "jsonl") {
                #[derive(Deserialize)]
                struct Doc {
                    text: String,
                }
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    docs.push(serde_json::from_str::<Doc>(line)?.text);
                }
            } else {
                let mut cur = String::new();
                for line in text.lines() {
                    if line.trim().is_empty() {
                        if !cur.is_empty() {
                            docs.push(std::mem::take(&mut cur));
                        }
                    } else {
                        cur.push_str(line);
                        cur.push('\n');
                    }
                }
                if !cur.is_empty() {
                    docs.push(cur);
                }
            }
        }
        Ok(Self::build(docs.iter().map(String::as_str)))
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    /// Token count excluding sentinels.
    pub fn len(&self) -> usize {
        self.tokens.len() + 1 - self.n_docs.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Maps a phrase to ids. Words never seen in the corpus map to `None`,
    /// meaning the phrase cannot match.
    pub fn phrase(&self, text: &str) -> Result<Option<Vec<u32>>> {
        let words = tokenize(text);
        if words.is_empty() {
            return Err(Error::EmptyPhrase(text.to_string()));
        }
        Ok(words.iter().map(|w| self.words.get(*w).copied()).collect())
    }

    /// Start positions of `phrase`, ascending.
    pub fn matches(&self, phrase: &[u32]) -> Vec<usize> {
        let Some((&first, rest)) = phrase.split_first() else {
            return Vec::new();
        };
        let Some(starts) = self.postings.get(&first) else {
            return Vec::new();
        };
        starts
            .iter()
            .copied()
            .filter(|&s| self.tokens.get(s + 1..s + 1 + rest.len()).is_some_and(|w| w == rest))
            .collect()
    }

    /// Splits into at most `n` shards, cutting only at document boundaries.
    pub fn shards(&self, n: usize) -> Vec<CorpusIndex> {
        let bounds: Vec<usize> = self.tokens.iter().enumerate().filter(|(_, &t)| t == SENTINEL).map(|(i, _)| i).collect();
        let n = n.clamp(1, bounds.len() + 1);
        let target = self.tokens.len().div_ceil(n);
        let mut out = Vec::with_capacity(n);
        let mut start = 0;
        for &b in &bounds {
            if b - start >= target && out.len() + 1 < n {
                out.push(self.slice(start, b));
                start = b + 1;
            }
        }
        out.push(self.slice(start, self.tokens.len()));
        out
    }

    fn slice(&self, a: usize, b: usize) -> CorpusIndex {
        let tokens = self.tokens[a..b].to_vec();
        let n_docs = 1 + tokens.iter().filter(|&&t| t == SENTINEL).count();
        Self::from_parts(self.words.clone(), tokens, n_docs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseQuery {
    pub source: Vec<u32>,
    pub target: Vec<u32>,
    pub window: usize,
}

impl PhraseQuery {
    pub fn new(source: Vec<u32>, target: Vec<u32>, window: usize) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(Error::InvalidConfig("query phrases must be non-empty".into()));
        }
        if window == 0 {
            return Err(Error::InvalidConfig("window must be at least 1".into()));
        }
        Ok(Self { source, target, window })
    }
}

/// Exact windowed count in one pass over the two sorted match lists.
pub fn count_cooccurrence(corpus: &CorpusIndex, query: &PhraseQuery) -> u64 {
    let src = corpus.matches(&query.source);
    if src.is_empty() {
        return 0;
    }
    let same = query.source == query.target;
    let tgt = if same { src.clone() } else { corpus.matches(&query.target) };
    if tgt.is_empty() {
        return 0;
    }
    let toks = corpus.tokens();
    let w = query.window;
    // Document extent of the current source position, advanced lazily.
    let (mut doc_lo, mut doc_hi) = (0usize, 0usize);
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut total = 0u64;
    for &i in &src {
        if i >= doc_hi {
            doc_lo = toks[..i].iter().rposition(|&t| t == SENTINEL).map_or(0, |p| p + 1).max(doc_lo);
            doc_hi = toks[i..].iter().position(|&t| t == SENTINEL).map_or(toks.len(), |p| i + p);
        }
        let from = i.saturating_sub(w - 1).max(doc_lo);
        let to = i.saturating_add(w - 1).min(doc_hi - 1);
        while lo < tgt.len() && tgt[lo] < from {
            lo += 1;
        }
        hi = hi.max(lo);
        while hi < tgt.len() && tgt[hi] <= to {
            hi += 1;
        }
        total += (hi - lo) as u64;
        if same {
            total -= 1;
        }
    }
    total
}

/// Counts shards in parallel and sums.
pub fn count_sharded(shards: &[CorpusIndex], query: &PhraseQuery) -> u64 {
    shards.par_iter().map(|s| count_cooccurrence(s, query)).sum()
}

/// Input row of `annotate`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhrasePair {
    pub source: String,
    pub target: String,
    #[serde(default)]
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceRecord {
    pub source: String,
    pub target: String,
    pub relation: String,
    pub count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bucket: Option<String>,
    /// Set when the pair could not be counted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Counts every pair, in input order. Pairs with an empty phrase get a
/// record with `error` set and a zero count.
pub fn annotate(pairs: &[PhrasePair], corpus: &CorpusIndex, window: usize) -> Result<Vec<CooccurrenceRecord>> {
    if window == 0 {
        return Err(Error::InvalidConfig("window must be at least 1".into()));
    }
    Ok(pairs
        .par_iter()
        .map(|p| {
            let mut rec = CooccurrenceRecord {
                source: p.source.clone(),
                target: p.target.clone(),
                relation: p.relation.clone(),
                count: 0,
                bucket: None,
                error: None,
            };
            match (corpus.phrase(&p.source), corpus.phrase(&p.target)) {
                (Ok(Some(s)), Ok(Some(t))) => {
                    rec.count = count_cooccurrence(corpus, &PhraseQuery { source: s, target: t, window });
                }
                (Err(e), _) | (_, Err(e)) => rec.error = Some(e.to_string()),
                _ => {}
            }
            rec
        })
        .collect())
}

pub fn read_pairs(path: &Path) -> Result<Vec<PhrasePair>> {
    crate::biograph::read_jsonl(path)
}

pub fn write_records(path: &Path, records: &[CooccurrenceRecord]) -> Result<()> {
    crate::biograph::write_jsonl(path, records)
}

pub fn read_records(path: &Path) -> Result<Vec<CooccurrenceRecord>> {
    crate::biograph::read_jsonl(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(toks: &[u32], s: &[u32], t: &[u32], w: usize) -> u64 {
        let doc: Vec<usize> = toks
            .iter()
            .scan(0, |d, &x| {
                if x == SENTINEL {
                    *d += 1;
                }
                Some(*d)
            })
            .collect();
        let at = |p: &[u32], i: usize| i + p.len() <= toks.len() && &toks[i..i + p.len()] == p;
        let mut n = 0;
        for i in 0..toks.len() {
            for j in 0..toks.len() {
                if at(s, i) && at(t, j) && i.abs_diff(j) < w && doc[i] == doc[j] && !(s == t && i == j) {
                    n += 1;
                }
            }
        }
        n
    }

    fn q(s: &[u32], t: &[u32], w: usize) -> PhraseQuery {
        PhraseQuery::new(s.to_vec(), t.to_vec(), w).unwrap()
    }

    #[test]
    fn tokenizer_keeps_punctuation() {
        assert_eq!(tokenize("Paris, France's  capital."), ["Paris", ",", "France", "'", "s", "capital", "."]);
    }

    #[test]
    fn small_examples() {
        let c = CorpusIndex::build(["a b c a"]);
        let a = c.phrase("a").unwrap().unwrap();
        let b = c.phrase("b").unwrap().unwrap();
        assert_eq!(count_cooccurrence(&c, &q(&a, &b, 200)), 2);
        assert_eq!(c.phrase("zebra").unwrap(), None);
        let xy = CorpusIndex::build(["x y"]);
        assert_eq!(count_cooccurrence(&xy, &q(&[0], &[1], 1)), 0);
        assert_eq!(count_cooccurrence(&xy, &q(&[0], &[1], 2)), 1);
        assert_eq!(count_cooccurrence(&xy, &q(&[0], &[7], 2)), 0);
        assert!(c.phrase(" ,").is_ok());
        assert!(matches!(c.phrase("   "), Err(Error::EmptyPhrase(_))));
        assert!(PhraseQuery::new(vec![], vec![1], 3).is_err());
        assert!(PhraseQuery::new(vec![1], vec![1], 0).is_err());
    }

    #[test]
    fn documents_do_not_leak() {
        let c = CorpusIndex::build(["China is big", "Beijing is a city"]);
        let s = c.phrase("China").unwrap().unwrap();
        let t = c.phrase("Beijing").unwrap().unwrap();
        assert_eq!(count_cooccurrence(&c, &q(&s, &t, 200)), 0);
        assert_eq!(c.n_docs(), 2);
        assert_eq!(c.len(), 7);
    }

    #[test]
    fn self_pairs_skip_identity() {
        let c = CorpusIndex::from_ids(vec![5, 5, 5]);
        assert_eq!(count_cooccurrence(&c, &q(&[5], &[5], 10)), 6);
        let c = CorpusIndex::from_ids(vec![5, 5, 5, 5]);
        assert_eq!(count_cooccurrence(&c, &q(&[5, 5], &[5, 5], 10)), 6);
    }

    #[test]
    fn annotate_reports_failures_per_record() {
        let c = CorpusIndex::build(["North America is north of South America"]);
        let pairs = vec![
            PhrasePair { source: "North America".into(), target: "South America".into(), relation: "r".into() },
            PhrasePair { source: "...".into(), target: "".into(), relation: "r".into() },
            PhrasePair { source: "Mars".into(), target: "America".into(), relation: "r".into() },
        ];
        let recs = annotate(&pairs, &c, 200).unwrap();
        assert_eq!(recs[0].count, 1);
        assert!(recs[1].error.is_some());
        assert_eq!((recs[2].count, recs[2].error.is_none()), (0, true));
        let empty = CorpusIndex::build(Vec::<&str>::new());
        assert!(annotate(&pairs[..1], &empty, 200).unwrap().iter().all(|r| r.count == 0));
    }

    fn corpus() -> impl Strategy<Value = Vec<u32>> {
        prop::collection::vec(prop_oneof![8 => 0u32..4, 1 => Just(SENTINEL)], 0..300)
    }

    fn phrase() -> impl Strategy<Value = Vec<u32>> {
        prop::collection::vec(0u32..4, 1..3)
    }

    proptest! {
        #[test]
        fn matches_brute_force(toks in corpus(), s in phrase(), t in phrase(), w in 1usize..40) {
            let c = CorpusIndex::from_ids(toks.clone());
            prop_assert_eq!(count_cooccurrence(&c, &q(&s, &t, w)), brute(&toks, &s, &t, w));
        }

        #[test]
        fn symmetric_for_distinct_tokens(toks in corpus(), a in 0u32..4, b in 0u32..4, w in 1usize..40) {
            prop_assume!(a != b);
            let c = CorpusIndex::from_ids(toks);
            prop_assert_eq!(count_cooccurrence(&c, &q(&[a], &[b], w)), count_cooccurrence(&c, &q(&[b], &[a], w)));
        }

        #[test]
        fn shards_sum_to_whole(toks in corpus(), s in phrase(), t in phrase(), w in 1usize..40, n in 1usize..6) {
            let c = CorpusIndex::from_ids(toks.clone());
            let shards = c.shards(n);
            prop_assert_eq!(shards.iter().map(|s| s.tokens().len()).sum::<usize>() + shards.len() - 1, toks.len());
            prop_assert_eq!(count_sharded(&shards, &q(&s, &t, w)), count_cooccurrence(&c, &q(&s, &t, w)));
        }
    }
}
