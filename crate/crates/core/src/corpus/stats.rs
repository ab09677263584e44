use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{CategoryLabel, QaRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub qa_pairs: usize,
    pub unique_entities: usize,
}

/// Per-category pair and entity counts. Entities are distinct answer texts,
/// compared case-insensitively; the total is the column sum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStatistics {
    pub categories: BTreeMap<CategoryLabel, CategoryStats>,
    pub total_qa_pairs: usize,
    pub total_unique_entities: usize,
}

pub fn dataset_statistics(records: &[QaRecord]) -> DatasetStatistics {
    let mut entities: BTreeMap<CategoryLabel, HashSet<String>> = BTreeMap::new();
    let mut categories: BTreeMap<CategoryLabel, CategoryStats> = CategoryLabel::ALL
        .into_iter()
        .map(|c| (c, CategoryStats::default()))
        .collect();
    for r in records {
        categories.entry(r.label).or_default().qa_pairs += 1;
        entities
            .entry(r.label)
            .or_default()
            .insert(r.answer_text.to_lowercase());
    }
    for (cat, set) in &entities {
        categories.entry(*cat).or_default().unique_entities = set.len();
    }
    DatasetStatistics {
        total_qa_pairs: categories.values().map(|s| s.qa_pairs).sum(),
        total_unique_entities: categories.values().map(|s| s.unique_entities).sum(),
        categories,
    }
}
