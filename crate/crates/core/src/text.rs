//! Tweet normalisation, vocabulary construction and id encoding.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const DEFAULT_MAX_VOCAB: usize = 25_000;
pub const DEFAULT_MAX_TOKENS: usize = 32;

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF      // mahjong .. symbols & pictographs ext-A
        | 0x2600..=0x27BF      // misc symbols, dingbats
        | 0x2B00..=0x2BFF      // arrows and stars
        | 0x231A..=0x231B
        | 0x23E9..=0x23FA
        | 0x24C2
        | 0x25AA..=0x25FE
        | 0x2190..=0x21FF
        | 0x3030 | 0x303D | 0x3297 | 0x3299
        | 0x200D               // zero-width joiner
        | 0xFE0E..=0xFE0F      // variation selectors
        | 0x20E3               // keycap
        | 0xE0020..=0xE007F    // tag characters
    )
}

fn is_url(tok: &str) -> bool {
    tok.contains("://") || tok.starts_with("www.") || tok.starts_with("http:") || tok.starts_with("https:")
}

fn trim_edges(tok: &str, keep: &[char]) -> String {
    tok.trim_matches(|c: char| !c.is_alphanumeric() && !keep.contains(&c))
        .to_string()
}

/// Lowercases, drops URLs, @-mentions and emoji, keeps hashtag words without
/// the `#`, and strips punctuation from token edges. Stop words stay.
pub fn normalize(raw: &str) -> Vec<String> {
    let lowered = raw.to_lowercase();
    let mut out = Vec::new();
    for piece in lowered.split_whitespace() {
        let piece: String = piece.chars().filter(|&c| !is_emoji(c)).collect();
        let tok = trim_edges(&piece, &['@', '#']);
        if tok.is_empty() || is_url(&tok) || tok.starts_with('@') {
            continue;
        }
        let tok: String = tok.chars().filter(|&c| c != '#' && c != '@').collect();
        let tok = trim_edges(&tok, &[]);
        if !tok.is_empty() && !is_url(&tok) {
            out.push(tok);
        }
    }
    out
}

/// Token ↔ id map with reserved `PAD = 0` and `UNK = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    to_id: HashMap<String, usize>,
    tokens: Vec<String>,
    max_size: usize,
}

impl Vocabulary {
    fn empty(max_size: usize) -> Self {
        Self {
            to_id: HashMap::new(),
            tokens: vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()],
            max_size,
        }
    }

    /// Keeps the `max_size` most frequent tokens; ties go to the token seen
    /// first in the corpus.
    pub fn build<S: AsRef<str>>(corpus: &[Vec<S>], max_size: usize) -> Self {
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        let mut order = 0usize;
        for doc in corpus {
            for tok in doc {
                let e = counts.entry(tok.as_ref()).or_insert_with(|| {
                    order += 1;
                    (0, order)
                });
                e.0 += 1;
            }
        }
        let mut ranked: Vec<(&str, usize, usize)> =
            counts.into_iter().map(|(t, (c, first))| (t, c, first)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        let mut vocab = Self::empty(max_size);
        for (tok, _, _) in ranked.into_iter().take(max_size) {
            vocab.push(tok.to_string());
        }
        vocab
    }

    fn push(&mut self, tok: String) {
        let id = self.tokens.len();
        self.to_id.insert(tok.clone(), id);
        self.tokens.push(tok);
    }

    /// Number of ids including PAD and UNK.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn id(&self, token: &str) -> usize {
        self.to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Maps tokens to ids, truncating to `max_len`. An empty post becomes a
    /// single UNK.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S], max_len: usize) -> TokenSeq {
        let max_len = max_len.max(1);
        let mut ids: Vec<usize> = tokens
            .iter()
            .take(max_len)
            .map(|t| self.id(t.as_ref()))
            .collect();
        if ids.is_empty() {
            ids.push(UNK_ID);
        }
        TokenSeq {
            ids,
            original_len: tokens.len(),
        }
    }

    /// One token per line; line `k` holds id `k + 2`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for tok in &self.tokens[2..] {
            if tok.contains(['\n', '\r']) {
                return Err(Error::Config(format!("vocabulary token {tok:?} contains a line break")));
            }
            writeln!(w, "{tok}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R, max_size: usize) -> Result<Self> {
        let mut vocab = Self::empty(max_size);
        for line in r.lines() {
            vocab.push(line?);
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(file)
    }

    pub fn load(path: &Path, max_size: usize) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(file, max_size)
    }
}

/// Encoded post: vocabulary ids plus the token count before truncation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSeq {
    pub ids: Vec<usize>,
    pub original_len: usize,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}
