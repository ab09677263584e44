//! Gazetteer-based medical entity recognition and answer categorization.
//!
//! A [`Gazetteer`] maps normalized surface terms to one or more
//! `(category, semantic type)` senses. [`extract_entities`] scans text left to
//! right taking the longest term that starts and ends on a word boundary;
//! matches never overlap. [`assign_category`] and [`assign_soft_labels`] turn
//! the matches found in an answer into a hard label or a per-category
//! distribution.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use crate::corpus::CategoryLabel;
use crate::error::{Error, Result};

/// Normalization applied to both stored terms and scanned text.
pub const NORMALIZATION: &str = "lowercase+collapse-whitespace";

/// Label given to answers with no gazetteer match.
pub const FALLBACK_CATEGORY: CategoryLabel = CategoryLabel::Symptoms;

const FIXTURE_CSV: &str = include_str!("../data/gazetteer.csv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sense {
    pub category: CategoryLabel,
    pub code: String,
}

#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    terms: HashMap<String, Vec<Sense>>,
    max_term_chars: usize,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    term: String,
    category: String,
    code: String,
}

impl Gazetteer {
    /// The bundled ~100-term lexicon covering all five categories.
    pub fn fixture() -> Gazetteer {
        Gazetteer::from_csv_str(FIXTURE_CSV).expect("bundled gazetteer is valid")
    }

    pub fn from_csv_str(text: &str) -> Result<Gazetteer> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for row in reader.deserialize() {
            let row: CsvRow = row?;
            let category: CategoryLabel = row
                .category
                .parse()
                .map_err(|_| Error::Gazetteer(format!("unknown category '{}'", row.category)))?;
            entries.push((row.term, category, row.code));
        }
        build_gazetteer(entries)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Gazetteer> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Gazetteer::from_csv_str(&text)
    }

    pub fn lookup(&self, term: &str) -> &[Sense] {
        self.terms
            .get(&normalize(term))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms whose senses include `category`, sorted for determinism.
    pub fn terms_for(&self, category: CategoryLabel) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .terms
            .iter()
            .filter(|(_, senses)| senses.iter().any(|s| s.category == category))
            .map(|(t, _)| t.as_str())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Builds a gazetteer from `(term, category, semantic type)` triples.
///
/// A term may carry several senses with different categories; a repeated
/// `(term, category)` pair keeps its first code.
pub fn build_gazetteer<I, S>(entries: I) -> Result<Gazetteer>
where
    I: IntoIterator<Item = (S, CategoryLabel, S)>,
    S: AsRef<str>,
{
    let mut g = Gazetteer::default();
    for (term, category, code) in entries {
        let code = code.as_ref().trim();
        if !category.semantic_types().contains(&code) {
            return Err(Error::Gazetteer(format!(
                "semantic type {code} for '{}' is not a {category} type (expected one of {})",
                term.as_ref(),
                category.semantic_types().join(", ")
            )));
        }
        let norm = normalize(term.as_ref());
        if norm.is_empty() {
            return Err(Error::Gazetteer("empty term".into()));
        }
        g.max_term_chars = g.max_term_chars.max(norm.chars().count());
        let senses = g.terms.entry(norm).or_default();
        if !senses.iter().any(|s| s.category == category) {
            senses.push(Sense {
                category,
                code: code.to_string(),
            });
            senses.sort_by_key(|s| s.category);
        }
    }
    Ok(g)
}

/// Lowercase and collapse whitespace runs to one space, trimmed.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedicalEntity {
    pub surface: String,
    pub char_start: usize,
    pub char_end: usize,
    /// Primary sense: the first in category order.
    pub category: CategoryLabel,
    pub code: String,
    /// Every sense of the matched term, primary included.
    pub senses: Vec<Sense>,
    /// Length of the match in normalized characters.
    pub match_len: usize,
}

/// Normalized view of a text with a map back to original character indices.
struct NormalizedText {
    chars: Vec<char>,
    origin: Vec<usize>,
}

impl NormalizedText {
    fn new(text: &str) -> Self {
        let mut chars = Vec::new();
        let mut origin = Vec::new();
        let mut pending_space: Option<usize> = None;
        for (i, c) in text.chars().enumerate() {
            if c.is_whitespace() {
                if !chars.is_empty() && pending_space.is_none() {
                    pending_space = Some(i);
                }
                continue;
            }
            if let Some(sp) = pending_space.take() {
                chars.push(' ');
                origin.push(sp);
            }
            for lc in c.to_lowercase() {
                chars.push(lc);
                origin.push(i);
            }
        }
        NormalizedText { chars, origin }
    }

    fn is_word_char(&self, i: usize) -> bool {
        self.chars[i].is_alphanumeric()
    }

    fn starts_word(&self, i: usize) -> bool {
        i == 0 || !self.is_word_char(i - 1) || !self.is_word_char(i)
    }

    fn ends_word(&self, end: usize) -> bool {
        end == self.chars.len() || !self.is_word_char(end) || !self.is_word_char(end - 1)
    }
}

/// Left-to-right, longest-match-first, non-overlapping gazetteer matches.
pub fn extract_entities(text: &str, g: &Gazetteer) -> Vec<MedicalEntity> {
    let norm = NormalizedText::new(text);
    let n = norm.chars.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if norm.chars[i] == ' ' || !norm.starts_word(i) {
            i += 1;
            continue;
        }
        let longest = (i + 1..=n.min(i + g.max_term_chars))
            .rev()
            .filter(|&end| norm.ends_word(end) && norm.chars[end - 1] != ' ')
            .find_map(|end| {
                let candidate: String = norm.chars[i..end].iter().collect();
                g.terms.get(&candidate).map(|senses| (end, senses))
            });
        match longest {
            Some((end, senses)) => {
                let char_start = norm.origin[i];
                let char_end = norm.origin[end - 1] + 1;
                out.push(MedicalEntity {
                    surface: text.chars().skip(char_start).take(char_end - char_start).collect(),
                    char_start,
                    char_end,
                    category: senses[0].category,
                    code: senses[0].code.clone(),
                    senses: senses.clone(),
                    match_len: end - i,
                });
                i = end;
            }
            None => i += 1,
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CategoryAssignment {
    pub label: CategoryLabel,
    /// No entity matched; `label` is [`FALLBACK_CATEGORY`].
    pub gazetteer_miss: bool,
}

/// Per-category probabilities in `[0, 1]`; not required to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryDistribution(pub BTreeMap<CategoryLabel, f64>);

impl CategoryDistribution {
    pub fn get(&self, c: CategoryLabel) -> f64 {
        self.0.get(&c).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.values().all(|&p| p == 0.0)
    }

    /// Highest-probability category, ties to the earlier category.
    pub fn argmax(&self) -> Option<CategoryLabel> {
        let mut best: Option<(CategoryLabel, f64)> = None;
        for c in CategoryLabel::ALL {
            let p = self.get(c);
            if p > 0.0 && best.map_or(true, |(_, bp)| p > bp) {
                best = Some((c, p));
            }
        }
        best.map(|(c, _)| c)
    }
}

/// Matched character mass per category, each sense of a match counting in full.
fn category_mass(answer: &str, g: &Gazetteer) -> [usize; CategoryLabel::COUNT] {
    let mut mass = [0usize; CategoryLabel::COUNT];
    for e in extract_entities(answer, g) {
        for s in &e.senses {
            mass[s.category.index()] += e.match_len;
        }
    }
    mass
}

/// Category with the most matched characters, ties resolved in category order.
pub fn assign_category(answer: &str, g: &Gazetteer) -> CategoryAssignment {
    match assign_soft_labels(answer, g).argmax() {
        Some(label) => CategoryAssignment {
            label,
            gazetteer_miss: false,
        },
        None => CategoryAssignment {
            label: FALLBACK_CATEGORY,
            gazetteer_miss: true,
        },
    }
}

/// Matched length per category, scaled so the largest is 1.0.
pub fn assign_soft_labels(answer: &str, g: &Gazetteer) -> CategoryDistribution {
    let mass = category_mass(answer, g);
    let max = mass.iter().copied().max().unwrap_or(0);
    CategoryDistribution(
        CategoryLabel::ALL
            .into_iter()
            .map(|c| {
                let p = if max == 0 {
                    0.0
                } else {
                    mass[c.index()] as f64 / max as f64
                };
                (c, p)
            })
            .collect(),
    )
}
