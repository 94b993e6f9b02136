use serde::{Deserialize, Serialize};

/// Rouge-L precision, recall and F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_lcs(lcs: usize, hyp_len: usize, ref_len: usize) -> Self {
        let precision = if hyp_len == 0 { 0.0 } else { lcs as f64 / hyp_len as f64 };
        let recall = if ref_len == 0 { 0.0 } else { lcs as f64 / ref_len as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { precision, recall, f1 }
    }
}

/// Lowercased words with punctuation removed.
pub fn normalize_words(s: &str) -> Vec<String> {
    s.chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Longest common subsequence length, O(|a|·|b|) time and O(|b|) memory.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// Rouge-L over normalized words.
pub fn rouge_l(hypothesis: &str, reference: &str) -> RougeScore {
    rouge_l_words(&normalize_words(hypothesis), &normalize_words(reference))
}

pub fn rouge_l_words<T: PartialEq>(hyp: &[T], reference: &[T]) -> RougeScore {
    RougeScore::from_lcs(lcs_len(hyp, reference), hyp.len(), reference.len())
}
