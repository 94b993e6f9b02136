//! Word-level tokenizer with GPT-2 style leading-space pieces.
//!
//! Text is cut into pieces: a single optional leading space followed by
//! either a run of alphanumeric characters or one other character. Any
//! whitespace that cannot attach to a following piece becomes its own
//! piece. Decoding is plain concatenation, so `decode(encode(s)) == s`
//! whenever every piece of `s` is in the vocabulary.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub const EOS: u32 = 0;
pub const PAD: u32 = 1;
pub const UNK: u32 = 2;

pub const SPECIALS: [&str; 3] = ["<eos>", "<pad>", "<unk>"];

/// Refusal target used by the IDK forget loss.
pub const REFUSAL: &str = "I don't know";

/// Pieces that are always in the vocabulary even if the corpus lacks them:
/// the refusal phrase and the True/False probe answers.
pub const RESERVED: [&str; 7] = [" I", " don", "'", "t", " know", " True", " False"];

/// Splits text into tokenizer pieces.
pub fn pieces(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut iter = s.char_indices().peekable();
    while let Some((start, c)) = iter.next() {
        let mut head = c;
        if c == ' ' {
            match iter.peek() {
                Some(&(_, n)) if !n.is_whitespace() => {
                    head = n;
                    iter.next();
                }
                _ => {
                    out.push(&s[start..start + 1]);
                    continue;
                }
            }
        } else if c.is_whitespace() {
            out.push(&s[start..start + c.len_utf8()]);
            continue;
        }
        let mut end = start + if c == ' ' { 1 + head.len_utf8() } else { head.len_utf8() };
        if head.is_alphanumeric() {
            while let Some(&(i, n)) = iter.peek() {
                if !n.is_alphanumeric() {
                    break;
                }
                end = i + n.len_utf8();
                iter.next();
            }
        }
        out.push(&s[start..end]);
    }
    out
}

/// Ordered token list with its inverse map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary from text segments; each is tokenized with a
    /// leading space, as instances are during training.
    ///
    /// Specials come first, then [`RESERVED`], then corpus pieces sorted by
    /// (frequency descending, string ascending).
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut freq: HashMap<String, u64> = HashMap::new();
        for t in texts {
            for p in pieces(&format!(" {t}")) {
                *freq.entry(p.to_string()).or_default() += 1;
            }
        }
        let mut tokens: Vec<String> = SPECIALS.iter().chain(RESERVED.iter()).map(|s| s.to_string()).collect();
        let mut rest: Vec<(String, u64)> = freq.into_iter().filter(|(p, _)| !tokens.contains(p)).collect();
        rest.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        tokens.extend(rest.into_iter().map(|(p, _)| p));
        Self::from_tokens(tokens).expect("built vocabulary is well formed")
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < SPECIALS.len() || tokens[..SPECIALS.len()] != SPECIALS {
            return Err(Error::InvalidConfig("vocabulary must start with <eos>, <pad>, <unk>".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Id of a token that must exist, such as a reserved piece.
    pub fn require(&self, token: &str) -> Result<u32> {
        self.id(token).ok_or_else(|| Error::MissingToken(token.to_string()))
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    /// Encodes `s` exactly as written; unknown pieces map to [`UNK`].
    pub fn encode(&self, s: &str) -> Vec<u32> {
        pieces(s).into_iter().map(|p| self.id(p).unwrap_or(UNK)).collect()
    }

    /// Encodes a stand-alone segment (an instance, a question, an answer)
    /// with the leading space that training text carries.
    pub fn encode_segment(&self, s: &str) -> Vec<u32> {
        self.encode(&format!(" {s}"))
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter().map(|&i| self.token(i)).collect()
    }

    /// Inverse of [`Vocabulary::encode_segment`], dropping the leading space.
    pub fn decode_segment(&self, ids: &[u32]) -> String {
        let s = self.decode(ids);
        s.strip_prefix(' ').map(str::to_string).unwrap_or(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = VocabFile { tokens: self.tokens.clone() };
        fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: VocabFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        Self::from_tokens(file.tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pieces_attach_single_leading_space() {
        assert_eq!(pieces(" Which company did Ada work for? JPMorgan Chase."), [
            " Which", " company", " did", " Ada", " work", " for", "?", " JPMorgan", " Chase", "."
        ]);
        assert_eq!(pieces("Redmond, WA"), ["Redmond", ",", " WA"]);
        assert_eq!(pieces("a  b\n"), ["a", " ", " b", "\n"]);
        assert_eq!(pieces("I don't"), ["I", " don", "'", "t"]);
    }

    #[test]
    fn one_sentence_corpus() {
        let v = Vocabulary::build(["a b a"]);
        let extra: Vec<&str> = v.tokens()[SPECIALS.len() + RESERVED.len()..].iter().map(String::as_str).collect();
        assert_eq!(extra, [" a", " b"]);
    }

    #[test]
    fn refusal_is_in_vocabulary() {
        let v = Vocabulary::build(["x"]);
        assert!(!v.encode_segment(REFUSAL).contains(&UNK));
        assert_eq!(v.decode_segment(&v.encode_segment(REFUSAL)), REFUSAL);
    }

    #[test]
    fn question_answer_split_is_piecewise() {
        let v = Vocabulary::build(["Where did Ada work? Microsoft."]);
        let whole = v.encode_segment("Where did Ada work? Microsoft.");
        let mut parts = v.encode_segment("Where did Ada work?");
        parts.extend(v.encode_segment("Microsoft"));
        parts.extend(v.encode("."));
        assert_eq!(whole, parts);
    }

    proptest! {
        #[test]
        fn round_trip_on_corpus_text(s in "[A-Za-z0-9 ,.'?\n-]{0,60}") {
            let v = Vocabulary::build([s.as_str()]);
            let ids = v.encode_segment(&s);
            prop_assert!(!ids.contains(&UNK));
            prop_assert_eq!(v.decode(&ids), format!(" {s}"));
            prop_assert_eq!(v.decode_segment(&ids), s);
        }
    }
}
