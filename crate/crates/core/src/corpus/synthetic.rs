use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CategoryLabel, QaRecord};
use crate::categorizer::{assign_category, Gazetteer};
use crate::error::{Error, Result};

/// Category counts of the emrQA corpus, used as the default mix.
pub const EMRQA_CATEGORY_COUNTS: [(CategoryLabel, usize); 5] = [
    (CategoryLabel::Diagnosis, 141_243),
    (CategoryLabel::Medication, 255_908),
    (CategoryLabel::Symptoms, 23_474),
    (CategoryLabel::Procedure, 20_540),
    (CategoryLabel::LabReport, 14_672),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub size: usize,
    pub mix: BTreeMap<CategoryLabel, f64>,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Category mix proportional to the emrQA category counts.
    pub fn emrqa_mix(size: usize, seed: u64) -> Self {
        let total: usize = EMRQA_CATEGORY_COUNTS.iter().map(|(_, n)| n).sum();
        SyntheticSpec {
            size,
            mix: EMRQA_CATEGORY_COUNTS
                .iter()
                .map(|&(c, n)| (c, n as f64 / total as f64))
                .collect(),
            seed,
        }
    }

    pub fn uniform(size: usize, seed: u64) -> Self {
        SyntheticSpec {
            size,
            mix: CategoryLabel::ALL.into_iter().map(|c| (c, 0.2)).collect(),
            seed,
        }
    }

    /// Exact per-category counts by largest remainder.
    pub fn category_counts(&self) -> BTreeMap<CategoryLabel, usize> {
        let mut counts = BTreeMap::new();
        let mut rems = Vec::new();
        for (&c, &p) in &self.mix {
            let ideal = self.size as f64 * p;
            counts.insert(c, ideal.floor() as usize);
            rems.push((ideal - ideal.floor(), c));
        }
        let assigned: usize = counts.values().sum();
        rems.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, c) in rems.into_iter().take(self.size.saturating_sub(assigned)) {
            *counts.get_mut(&c).expect("present") += 1;
        }
        counts
    }

    fn validate(&self) -> Result<()> {
        if self.size < 5 {
            return Err(Error::Config(format!(
                "synthetic corpus size must be at least 5, got {}",
                self.size
            )));
        }
        let sum: f64 = self.mix.values().sum();
        if self.mix.values().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "category mix must be proportions summing to 1, got sum {sum}"
            )));
        }
        Ok(())
    }
}

const DOSES: &[u32] = &[5, 10, 20, 25, 40, 50, 100, 250, 500];
const FREQUENCIES: &[&str] = &["daily", "twice daily", "at bedtime", "every 8 hours", "as needed"];
const SEVERITY: &[&str] = &["", "", "acute ", "chronic ", "severe "];
const SYMPTOM_QUALIFIERS: &[&str] = &["", "", "intermittent ", "worsening ", "mild "];

fn target_sentences(cat: CategoryLabel) -> &'static [&'static str] {
    match cat {
        CategoryLabel::Diagnosis => &[
            "The patient was diagnosed with {}.",
            "History is significant for {}.",
            "Assessment is consistent with {}.",
        ],
        CategoryLabel::Medication => &[
            "She was prescribed {}.",
            "He was started on {}.",
            "Discharge medications include {}.",
        ],
        CategoryLabel::Symptoms => &[
            "The patient reports {} for several days.",
            "He complained of {} overnight.",
            "She presented with {}.",
        ],
        CategoryLabel::Procedure => &[
            "The patient underwent {} on hospital day two.",
            "The {} was performed without complications.",
            "She was scheduled for {}.",
        ],
        CategoryLabel::LabReport => &[
            "Labs showed {}.",
            "Morning labs revealed {}.",
            "Results were notable for {}.",
        ],
    }
}

fn questions(cat: CategoryLabel) -> &'static [&'static str] {
    match cat {
        CategoryLabel::Diagnosis => &[
            "What was the patient diagnosed with?",
            "What condition does the patient have?",
            "What is the diagnosis?",
        ],
        CategoryLabel::Medication => &[
            "What medication was prescribed for {}?",
            "What medication is the patient taking?",
            "Which drug was the patient started on?",
        ],
        CategoryLabel::Symptoms => &[
            "What symptoms did the patient report?",
            "What did the patient complain of?",
        ],
        CategoryLabel::Procedure => &[
            "What procedure was performed?",
            "What procedure did the patient undergo?",
        ],
        CategoryLabel::LabReport => &["What did the labs show?", "What were the lab results?"],
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn answer_phrase(cat: CategoryLabel, term: &str, rng: &mut ChaCha8Rng) -> String {
    match cat {
        CategoryLabel::Diagnosis => format!("{}{}", SEVERITY.choose(rng).unwrap(), term),
        CategoryLabel::Medication => format!(
            "{} {}mg {}",
            capitalize(term),
            DOSES.choose(rng).unwrap(),
            FREQUENCIES.choose(rng).unwrap()
        ),
        CategoryLabel::Symptoms => format!("{}{}", SYMPTOM_QUALIFIERS.choose(rng).unwrap(), term),
        CategoryLabel::Procedure => term.to_string(),
        CategoryLabel::LabReport => {
            let whole: u32 = rng.gen_range(1..15);
            let tenth: u32 = rng.gen_range(0..10);
            format!("{term} of {whole}.{tenth}")
        }
    }
}

/// Sentence containing `phrase`; returns the sentence and the phrase's char offset in it.
fn sentence_with(cat: CategoryLabel, phrase: &str, rng: &mut ChaCha8Rng) -> (String, usize) {
    let template = target_sentences(cat).choose(rng).unwrap();
    let (before, after) = template.split_once("{}").expect("template has a slot");
    if before.is_empty() {
        let phrase = capitalize(phrase);
        (format!("{phrase}{after}"), 0)
    } else {
        (format!("{before}{phrase}{after}"), before.chars().count())
    }
}

/// Templated clinical-note records whose answers are gazetteer terms of the
/// intended category.
///
/// Each context holds the answer sentence plus one to three sentences about
/// other categories, in shuffled order. Output is fully determined by `spec`.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec, g: &Gazetteer) -> Result<Vec<QaRecord>> {
    spec.validate()?;
    let mut pools: BTreeMap<CategoryLabel, Vec<&str>> = BTreeMap::new();
    for c in CategoryLabel::ALL {
        // Only terms the gazetteer itself labels as `c`, so the generator and
        // the categorizer always agree.
        let pool: Vec<&str> = g
            .terms_for(c)
            .into_iter()
            .filter(|t| assign_category(t, g).label == c)
            .collect();
        pools.insert(c, pool);
    }
    let counts = spec.category_counts();
    for (c, &n) in &counts {
        if n > 0 && pools[c].is_empty() {
            return Err(Error::Gazetteer(format!("no terms for requested category {c}")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut plan: Vec<CategoryLabel> = counts
        .iter()
        .flat_map(|(&c, &n)| std::iter::repeat(c).take(n))
        .collect();
    plan.shuffle(&mut rng);

    let mut out = Vec::with_capacity(plan.len());
    for (i, &cat) in plan.iter().enumerate() {
        let term = *pools[&cat].choose(&mut rng).unwrap();
        let phrase = answer_phrase(cat, term, &mut rng);

        let mut others: Vec<CategoryLabel> = CategoryLabel::ALL
            .into_iter()
            .filter(|&c| c != cat && !pools[&c].is_empty())
            .collect();
        others.shuffle(&mut rng);
        let k = rng.gen_range(1..=3).min(others.len());
        let mut distractors: Vec<CategoryLabel> = others[..k].to_vec();

        let mut question = (*questions(cat).choose(&mut rng).unwrap()).to_string();
        let mut diagnosis_term = None;
        if question.contains("{}") {
            if !distractors.contains(&CategoryLabel::Diagnosis) && !pools[&CategoryLabel::Diagnosis].is_empty() {
                distractors.push(CategoryLabel::Diagnosis);
            }
            let dx = *pools[&CategoryLabel::Diagnosis].choose(&mut rng).unwrap();
            question = question.replace("{}", dx);
            diagnosis_term = Some(dx);
        }

        // (sentence, answer offset within it if this is the target)
        let mut sentences: Vec<(String, Option<usize>)> = Vec::new();
        let (target, offset) = sentence_with(cat, &phrase, &mut rng);
        sentences.push((target, Some(offset)));
        for &d in &distractors {
            let t = match (d, diagnosis_term) {
                (CategoryLabel::Diagnosis, Some(dx)) => dx,
                _ => *pools[&d].choose(&mut rng).unwrap(),
            };
            let p = answer_phrase(d, t, &mut rng);
            let (s, _) = sentence_with(d, &p, &mut rng);
            sentences.push((s, None));
        }
        sentences.shuffle(&mut rng);

        let mut context = String::new();
        let mut start = 0;
        for (s, off) in &sentences {
            if !context.is_empty() {
                context.push(' ');
            }
            if let Some(off) = off {
                start = context.chars().count() + off;
            }
            context.push_str(s);
        }
        let len = phrase.chars().count();
        let answer_text: String = context.chars().skip(start).take(len).collect();

        let record = QaRecord {
            id: format!("syn-{i:06}"),
            question,
            context,
            answer_text,
            answer_char_start: start,
            answer_char_end: start + len,
            label: cat,
            soft_labels: None,
            all_gold_answers: None,
            source_id: None,
            gazetteer_miss: false,
        };
        record.validate()?;
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{category_counts, to_jsonl};

    #[test]
    fn one_per_category_agrees_with_categorizer() {
        let g = Gazetteer::fixture();
        let recs = generate_synthetic_corpus(&SyntheticSpec::uniform(5, 11), &g).unwrap();
        assert_eq!(recs.len(), 5);
        assert!(category_counts(&recs).values().all(|&n| n == 1));
        for r in &recs {
            assert_eq!(assign_category(&r.answer_text, &g).label, r.label, "{r:?}");
        }
    }

    #[test]
    fn emrqa_mix_histogram() {
        let g = Gazetteer::fixture();
        let spec = SyntheticSpec::emrqa_mix(1000, 3);
        let recs = generate_synthetic_corpus(&spec, &g).unwrap();
        let counts = category_counts(&recs);
        for (c, p) in &spec.mix {
            let share = counts[c] as f64 / 1000.0;
            assert!((share - p).abs() <= 0.01, "{c}: {share} vs {p}");
        }
    }

    #[test]
    fn deterministic_serialization() {
        let g = Gazetteer::fixture();
        let spec = SyntheticSpec::emrqa_mix(50, 8);
        let a = to_jsonl(&generate_synthetic_corpus(&spec, &g).unwrap());
        let b = to_jsonl(&generate_synthetic_corpus(&spec, &g).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn too_small_or_bad_mix_is_rejected() {
        let g = Gazetteer::fixture();
        assert!(generate_synthetic_corpus(&SyntheticSpec::uniform(4, 0), &g).is_err());
        let mut spec = SyntheticSpec::uniform(10, 0);
        spec.mix.insert(CategoryLabel::Diagnosis, 0.5);
        assert!(generate_synthetic_corpus(&spec, &g).is_err());
    }

    #[test]
    fn category_missing_from_gazetteer_is_an_error() {
        let g = crate::categorizer::build_gazetteer([("aspirin", CategoryLabel::Medication, "T109")])
            .unwrap();
        let err = generate_synthetic_corpus(&SyntheticSpec::uniform(5, 0), &g).unwrap_err();
        assert!(err.to_string().contains("no terms"), "{err}");
    }
}
