use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const SEP: usize = 2;
const SPECIALS: [&str; 3] = ["<pad>", "<unk>", "<sep>"];
const VOCAB_HEADER: &str = "# protodep vocab v1";

/// Splits on whitespace; within a chunk, runs of `[A-Za-z0-9_-]` form one
/// token and every other character stands alone.
pub fn split_tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut start = None;
        for (i, c) in chunk.char_indices() {
            let word = c.is_alphanumeric() || c == '_' || c == '-';
            match (word, start) {
                (true, None) => start = Some(i),
                (true, Some(_)) => {}
                (false, s) => {
                    if let Some(s) = s {
                        out.push(&chunk[s..i]);
                    }
                    start = None;
                    out.push(&chunk[i..i + c.len_utf8()]);
                }
            }
        }
        if let Some(s) = start {
            out.push(&chunk[s..]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate vocab token '{t}'")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(SPECIALS[UNK], String::as_str)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from(VOCAB_HEADER);
        s.push('\n');
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(VOCAB_HEADER) {
            return Err(Error::Parse {
                line: 1,
                msg: "missing vocab header".into(),
            });
        }
        let tokens: Vec<String> = lines.map(str::to_owned).collect();
        if tokens.len() < SPECIALS.len() || tokens[..3] != SPECIALS {
            return Err(Error::Parse {
                line: 2,
                msg: "vocab must start with <pad>, <unk>, <sep>".into(),
            });
        }
        Vocab::from_tokens(tokens)
    }
}

/// Tokens with frequency ≥ `min_freq`, ordered by descending frequency then
/// lexicographically, after the specials `<pad>`=0, `<unk>`=1, `<sep>`=2.
pub fn build_vocab<S: AsRef<str>>(corpus: &[S], min_freq: usize) -> Result<Vocab> {
    if corpus.is_empty() {
        return Err(Error::Input("empty corpus".into()));
    }
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for text in corpus {
        for tok in split_tokens(text.as_ref()) {
            *freq.entry(tok).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = freq
        .into_iter()
        .filter(|(t, n)| *n >= min_freq.max(1) && !SPECIALS.contains(t))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens = SPECIALS
        .iter()
        .map(|s| s.to_string())
        .chain(kept.into_iter().map(|(t, _)| t.to_string()))
        .collect();
    Vocab::from_tokens(tokens)
}

/// Token ids, unknown tokens mapped to `<unk>`, truncated at `max_len`.
pub fn tokenize(text: &str, vocab: &Vocab, max_len: usize) -> Vec<usize> {
    split_tokens(text)
        .into_iter()
        .take(max_len)
        .map(|t| vocab.id(t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitting_rules() {
        assert_eq!(
            split_tokens("1> set ue-Identity to ng-5G-S-TMSI-Part1;"),
            ["1", ">", "set", "ue-Identity", "to", "ng-5G-S-TMSI-Part1", ";"]
        );
        assert!(split_tokens("   ").is_empty());
    }

    #[test]
    fn small_corpus() {
        let v = build_vocab(&["a b a"], 1).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v.token(3), "a");
        assert_eq!(v.token(4), "b");
        assert_eq!(v.id(SPECIALS[0]), PAD);
    }

    #[test]
    fn min_freq_two() {
        let v = build_vocab(&["a b a"], 2).unwrap();
        assert_eq!(v.len(), 4);
        assert!(v.contains("a") && !v.contains("b"));
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = build_vocab(&["z y x y z"], 1).unwrap();
        assert_eq!((v.token(3), v.token(4), v.token(5)), ("y", "z", "x"));
    }

    #[test]
    fn identical_corpora_identical_files() {
        let corpus = ["RRCSetupRequest includes establishmentCause", "RRC RRC"];
        let a = build_vocab(&corpus, 1).unwrap().to_text();
        let b = build_vocab(&corpus, 1).unwrap().to_text();
        assert_eq!(a, b);
        assert_eq!(Vocab::from_text(&a).unwrap(), build_vocab(&corpus, 1).unwrap());
    }

    #[test]
    fn empty_corpus_rejected() {
        let empty: [&str; 0] = [];
        assert!(matches!(build_vocab(&empty, 1), Err(Error::Input(_))));
    }

    #[test]
    fn tokenize_cases() {
        let v = build_vocab(&["establishmentCause RRC x"], 1).unwrap();
        assert!(tokenize("", &v, 4).is_empty());
        let ids = tokenize("establishmentCause RRC", &v, 8);
        assert_eq!(ids.len(), 2);
        assert!(ids.iter().all(|&i| i != UNK));
        assert_eq!(tokenize("establishmentCause RRC x", &v, 2), ids);
        assert_eq!(tokenize("unseen", &v, 2), [UNK]);
    }
}
