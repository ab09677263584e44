//! Dataset records, splitting, class balancing and the synthetic corpus.

mod balance;
mod io;
mod split;
mod stats;
mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use balance::{compute_class_weights, oversample, ClassWeights};
pub use io::{load_jsonl, parse_jsonl, to_jsonl, write_jsonl};
pub use split::{stratified_split, DatasetSplit, SplitFractions};
pub use stats::{dataset_statistics, CategoryStats, DatasetStatistics};
pub use synthetic::{generate_synthetic_corpus, SyntheticSpec, EMRQA_CATEGORY_COUNTS};

/// The five answer categories, in the order the labelling rules list them.
///
/// The derived `Ord` follows this order; it is used as the tie-break when
/// two categories score equally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryLabel {
    Diagnosis,
    Medication,
    Symptoms,
    Procedure,
    LabReport,
}

impl CategoryLabel {
    pub const ALL: [CategoryLabel; 5] = [
        CategoryLabel::Diagnosis,
        CategoryLabel::Medication,
        CategoryLabel::Symptoms,
        CategoryLabel::Procedure,
        CategoryLabel::LabReport,
    ];

    pub const COUNT: usize = 5;

    /// UMLS semantic-type codes (TUIs) that belong to this category.
    pub fn semantic_types(self) -> &'static [&'static str] {
        match self {
            CategoryLabel::Diagnosis => &["T047", "T019", "T033"],
            CategoryLabel::Medication => &["T200", "T109", "T121"],
            CategoryLabel::Procedure => &["T060", "T061", "T058"],
            CategoryLabel::Symptoms => &["T184"],
            CategoryLabel::LabReport => &["T034", "T059"],
        }
    }

    pub fn from_semantic_type(code: &str) -> Option<CategoryLabel> {
        Self::ALL
            .into_iter()
            .find(|c| c.semantic_types().contains(&code))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<CategoryLabel> {
        Self::ALL.get(i).copied()
    }

    /// Wire name used in JSONL, CSV and reports.
    pub fn as_str(self) -> &'static str {
        match self {
            CategoryLabel::Diagnosis => "diagnosis",
            CategoryLabel::Medication => "medication",
            CategoryLabel::Symptoms => "symptoms",
            CategoryLabel::Procedure => "procedure",
            CategoryLabel::LabReport => "lab_report",
        }
    }
}

impl fmt::Display for CategoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CategoryLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown category '{s}'")))
    }
}

/// One question/context/answer example with its category label.
///
/// Character offsets count Unicode scalar values and are half-open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRecord {
    pub id: String,
    pub question: String,
    pub context: String,
    pub answer_text: String,
    pub answer_char_start: usize,
    pub answer_char_end: usize,
    pub label: CategoryLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soft_labels: Option<BTreeMap<CategoryLabel, f64>>,
    /// Further acceptable answers besides `answer_text`, if the source has them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub all_gold_answers: Option<Vec<String>>,
    /// Id of the record this one duplicates (set by oversampling).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    /// The gazetteer found no entity in the answer and the label is the fallback.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub gazetteer_miss: bool,
}

impl QaRecord {
    pub fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::Validation {
            id: self.id.clone(),
            message,
        };
        let len = self.context.chars().count();
        if self.answer_char_start >= self.answer_char_end || self.answer_char_end > len {
            return Err(invalid(format!(
                "answer offsets [{}, {}) invalid for context of {} chars",
                self.answer_char_start, self.answer_char_end, len
            )));
        }
        let selected = char_slice(&self.context, self.answer_char_start, self.answer_char_end);
        if selected != self.answer_text {
            return Err(invalid(format!(
                "offsets select {:?} but answer_text is {:?}",
                selected, self.answer_text
            )));
        }
        if let Some(soft) = &self.soft_labels {
            if let Some((cat, p)) = soft.iter().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
                return Err(invalid(format!("soft label {cat}={p} outside [0, 1]")));
            }
            let hard = soft.get(&self.label).copied().unwrap_or(0.0);
            if soft.values().any(|&p| p > hard) {
                return Err(invalid(format!(
                    "soft label of hard label {} is not the maximum",
                    self.label
                )));
            }
        }
        Ok(())
    }

    /// Every acceptable answer: the primary span first, then alternatives.
    pub fn gold_answers(&self) -> Vec<&str> {
        let mut out = vec![self.answer_text.as_str()];
        if let Some(alts) = &self.all_gold_answers {
            out.extend(
                alts.iter()
                    .map(String::as_str)
                    .filter(|a| *a != self.answer_text),
            );
        }
        out
    }

    /// Soft targets as a dense vector; one-hot on the hard label when absent.
    pub fn soft_target(&self) -> [f64; CategoryLabel::COUNT] {
        let mut t = [0.0; CategoryLabel::COUNT];
        match &self.soft_labels {
            Some(soft) => {
                for (cat, p) in soft {
                    t[cat.index()] = *p;
                }
            }
            None => t[self.label.index()] = 1.0,
        }
        t
    }
}

/// Substring by character (not byte) offsets. Out-of-range ends are clamped.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut indices = text.char_indices().map(|(b, _)| b).chain(Some(text.len()));
    let mut byte_start = text.len();
    let mut byte_end = text.len();
    for (i, b) in indices.by_ref().enumerate() {
        if i == start {
            byte_start = b;
        }
        if i == end {
            byte_end = b;
            break;
        }
    }
    if byte_start > byte_end {
        return "";
    }
    &text[byte_start..byte_end]
}

/// Count of records per category, all five categories present (zeros included).
pub fn category_counts(records: &[QaRecord]) -> BTreeMap<CategoryLabel, usize> {
    let mut counts: BTreeMap<CategoryLabel, usize> =
        CategoryLabel::ALL.into_iter().map(|c| (c, 0)).collect();
    for r in records {
        *counts.entry(r.label).or_default() += 1;
    }
    counts
}
