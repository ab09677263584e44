//! WordPiece tokenization, question/context packing and answer alignment.
//!
//! Text is lowercased and split on whitespace; every non-alphanumeric
//! character becomes a word of its own. Words are then split into vocabulary
//! pieces greedily, longest prefix first, with `##` marking continuation
//! pieces. Every context token remembers the character range it came from so
//! answer spans can be mapped between characters and tokens in both
//! directions.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const SEP_ID: u32 = 3;
pub const CONTINUATION: &str = "##";

const RESERVED: [&str; 4] = [PAD, UNK, CLS, SEP];
const MAX_WORD_CHARS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Vocabulary> {
        for (id, want) in RESERVED.iter().enumerate() {
            if tokens.get(id).map(String::as_str) != Some(*want) {
                return Err(Error::Tokenizer(format!("token id {id} must be {want}")));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t == CONTINUATION {
                return Err(Error::Tokenizer(format!("empty token at id {i}")));
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Tokenizer(format!("duplicate token '{t}'")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    /// One token per line; the line number is the id.
    pub fn load(path: impl AsRef<Path>) -> Result<Vocabulary> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::from_tokens(text.lines().map(str::to_string).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn to_file_string(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }
}

/// A pre-tokenized word: lowercased characters plus the original character
/// index each one came from.
#[derive(Debug, Clone)]
struct Word {
    chars: Vec<char>,
    origin: Vec<usize>,
}

fn pre_tokenize(text: &str) -> Vec<Word> {
    let mut words = Vec::new();
    let mut current = Word {
        chars: Vec::new(),
        origin: Vec::new(),
    };
    let flush = |w: &mut Word, words: &mut Vec<Word>| {
        if !w.chars.is_empty() {
            words.push(std::mem::replace(
                w,
                Word {
                    chars: Vec::new(),
                    origin: Vec::new(),
                },
            ));
        }
    };
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            flush(&mut current, &mut words);
        } else if c.is_alphanumeric() {
            for lc in c.to_lowercase() {
                current.chars.push(lc);
                current.origin.push(i);
            }
        } else {
            flush(&mut current, &mut words);
            let mut p = Word {
                chars: Vec::new(),
                origin: Vec::new(),
            };
            for lc in c.to_lowercase() {
                p.chars.push(lc);
                p.origin.push(i);
            }
            words.push(p);
        }
    }
    flush(&mut current, &mut words);
    words
}

/// Lowercased whitespace/punctuation split, as used before WordPiece.
pub fn basic_tokenize(text: &str) -> Vec<String> {
    pre_tokenize(text)
        .into_iter()
        .map(|w| w.chars.into_iter().collect())
        .collect()
}

/// Frequency-based vocabulary.
///
/// After the four reserved tokens come every observed character as a word
/// start and as a `##` continuation (most frequent first), then whole words
/// seen at least `min_freq` times (most frequent first, ties alphabetical).
/// The list is cut at `max_size`. Because single characters come first,
/// every word made of seen characters can be encoded without `[UNK]`.
pub fn build_vocab<'a, I>(texts: I, max_size: usize, min_freq: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a str>,
{
    if max_size < 5 {
        return Err(Error::Tokenizer(format!("max_size must be at least 5, got {max_size}")));
    }
    let mut word_freq: HashMap<String, usize> = HashMap::new();
    let mut char_freq: HashMap<char, usize> = HashMap::new();
    for text in texts {
        for w in pre_tokenize(text) {
            for &c in &w.chars {
                *char_freq.entry(c).or_default() += 1;
            }
            *word_freq.entry(w.chars.iter().collect()).or_default() += 1;
        }
    }
    let mut chars: Vec<(char, usize)> = char_freq.into_iter().collect();
    chars.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut words: Vec<(String, usize)> = word_freq
        .into_iter()
        .filter(|(w, n)| *n >= min_freq.max(1) && w.chars().count() > 1)
        .collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
    tokens.extend(chars.iter().map(|(c, _)| c.to_string()));
    tokens.extend(chars.iter().map(|(c, _)| format!("{CONTINUATION}{c}")));
    tokens.extend(words.into_iter().map(|(w, _)| w));
    tokens.truncate(max_size);
    Vocabulary::from_tokens(tokens)
}

/// Greedy longest-prefix WordPiece split of one word, as `(token id, char range in word)`.
fn wordpiece_ids(word: &[char], v: &Vocabulary) -> Vec<(u32, usize, usize)> {
    if word.len() > MAX_WORD_CHARS {
        return vec![(UNK_ID, 0, word.len())];
    }
    let mut out = Vec::new();
    let mut start = 0;
    let mut piece = String::new();
    while start < word.len() {
        let mut found = None;
        for end in (start + 1..=word.len()).rev() {
            piece.clear();
            if start > 0 {
                piece.push_str(CONTINUATION);
            }
            piece.extend(&word[start..end]);
            if let Some(id) = v.id(&piece) {
                found = Some((id, end));
                break;
            }
        }
        match found {
            Some((id, end)) => {
                out.push((id, start, end));
                start = end;
            }
            None => return vec![(UNK_ID, 0, word.len())],
        }
    }
    out
}

/// WordPiece split of a single whitespace-free word.
pub fn wordpiece_tokenize(word: &str, v: &Vocabulary) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    wordpiece_ids(&chars, v)
        .into_iter()
        .map(|(id, _, _)| v.token(id).expect("id from vocabulary").to_string())
        .collect()
}

/// Token ids of arbitrary text (no special tokens).
pub fn encode_text(text: &str, v: &Vocabulary) -> Vec<u32> {
    pre_tokenize(text)
        .iter()
        .flat_map(|w| wordpiece_ids(&w.chars, v).into_iter().map(|(id, _, _)| id))
        .collect()
}

/// `[CLS] question [SEP] context [SEP]` padded to a fixed length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedPair {
    pub input_ids: Vec<u32>,
    /// 0 for `[CLS] Q [SEP]` and padding, 1 for `C [SEP]`.
    pub segment_ids: Vec<u8>,
    /// 1 for real tokens, 0 for padding.
    pub attention_mask: Vec<u8>,
    /// Character range in the context, for context tokens only.
    pub offsets: Vec<Option<(usize, usize)>>,
    /// Inclusive token span of the gold answer, once aligned.
    pub gold_span: Option<(usize, usize)>,
    /// Context tokens were dropped to fit the length budget.
    pub truncated: bool,
    /// First context token index.
    pub context_start: usize,
    /// Index of the closing `[SEP]` (one past the last context token).
    pub context_end: usize,
}

impl TokenizedPair {
    pub fn len(&self) -> usize {
        self.input_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_ids.is_empty()
    }

    /// Number of non-pad positions.
    pub fn real_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }

    /// Positions eligible as answer start/end: real context tokens.
    pub fn context_mask(&self) -> Vec<bool> {
        (0..self.len())
            .map(|i| i >= self.context_start && i < self.context_end && self.attention_mask[i] == 1)
            .collect()
    }

    /// Character range of the original context covered by tokens `start..=end`.
    pub fn char_range(&self, start: usize, end: usize) -> Option<(usize, usize)> {
        let (s, _) = self.offsets.get(start).copied().flatten()?;
        let (_, e) = self.offsets.get(end).copied().flatten()?;
        (s <= e).then_some((s, e))
    }

    /// Context text covered by an inclusive token window.
    pub fn window_text(&self, context: &str, start: usize, end: usize) -> Option<String> {
        let (s, e) = self.char_range(start, end)?;
        Some(context.chars().skip(s).take(e - s).collect())
    }
}

pub fn encode_pair(
    question: &str,
    context: &str,
    v: &Vocabulary,
    max_seq_len: usize,
) -> Result<TokenizedPair> {
    let q_ids = encode_text(question, v);
    if q_ids.len() + 3 > max_seq_len {
        return Err(Error::Tokenizer(format!(
            "question needs {} tokens plus 3 special tokens, budget is {max_seq_len}",
            q_ids.len()
        )));
    }
    let budget = max_seq_len - q_ids.len() - 3;

    let mut ctx: Vec<(u32, (usize, usize))> = Vec::new();
    let mut truncated = false;
    'words: for w in pre_tokenize(context) {
        for (id, s, e) in wordpiece_ids(&w.chars, v) {
            if ctx.len() == budget {
                truncated = true;
                break 'words;
            }
            ctx.push((id, (w.origin[s], w.origin[e - 1] + 1)));
        }
    }

    let mut input_ids = Vec::with_capacity(max_seq_len);
    let mut segment_ids = Vec::with_capacity(max_seq_len);
    let mut offsets = Vec::with_capacity(max_seq_len);
    input_ids.push(CLS_ID);
    input_ids.extend(&q_ids);
    input_ids.push(SEP_ID);
    segment_ids.resize(input_ids.len(), 0);
    offsets.resize(input_ids.len(), None);
    let context_start = input_ids.len();
    for (id, off) in ctx {
        input_ids.push(id);
        segment_ids.push(1);
        offsets.push(Some(off));
    }
    let context_end = input_ids.len();
    input_ids.push(SEP_ID);
    segment_ids.push(1);
    offsets.push(None);
    let real = input_ids.len();
    let mut attention_mask = vec![1u8; real];

    input_ids.resize(max_seq_len, PAD_ID);
    segment_ids.resize(max_seq_len, 0);
    offsets.resize(max_seq_len, None);
    attention_mask.resize(max_seq_len, 0);

    Ok(TokenizedPair {
        input_ids,
        segment_ids,
        attention_mask,
        offsets,
        gold_span: None,
        truncated,
        context_start,
        context_end,
    })
}

/// Smallest inclusive token window whose characters cover `[start, end)`.
///
/// `None` when part of the span lies beyond the kept context or no token
/// overlaps it.
pub fn align_answer_span(pair: &TokenizedPair, char_span: (usize, usize)) -> Option<(usize, usize)> {
    let (start, end) = char_span;
    if start >= end {
        return None;
    }
    let ctx = pair.context_start..pair.context_end;
    let first = ctx.clone().find(|&i| matches!(pair.offsets[i], Some((_, e)) if e > start))?;
    let last = ctx.rev().find(|&i| matches!(pair.offsets[i], Some((s, _)) if s < end))?;
    if first > last {
        return None;
    }
    let (cover_start, cover_end) = pair.char_range(first, last)?;
    (cover_start <= start && cover_end >= end).then_some((first, last))
}
