use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{category_counts, CategoryLabel, QaRecord};
use crate::error::{Error, Result};

/// Inverse-frequency class weights, `w_i = N / (|C| * count(i))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weights: BTreeMap<CategoryLabel, f64>,
    pub counts: BTreeMap<CategoryLabel, usize>,
    pub total: usize,
    pub num_categories: usize,
}

impl ClassWeights {
    pub fn from_counts(counts: &BTreeMap<CategoryLabel, usize>) -> Result<Self> {
        for cat in CategoryLabel::ALL {
            if counts.get(&cat).copied().unwrap_or(0) == 0 {
                return Err(Error::EmptyCategory(cat.to_string()));
            }
        }
        let total: usize = counts.values().sum();
        let k = CategoryLabel::COUNT;
        let weights = counts
            .iter()
            .map(|(&cat, &n)| (cat, total as f64 / (k as f64 * n as f64)))
            .collect();
        Ok(ClassWeights {
            weights,
            counts: counts.clone(),
            total,
            num_categories: k,
        })
    }

    /// All weights 1.0; used when weighting is switched off.
    pub fn uniform() -> Self {
        ClassWeights {
            weights: CategoryLabel::ALL.into_iter().map(|c| (c, 1.0)).collect(),
            counts: CategoryLabel::ALL.into_iter().map(|c| (c, 1)).collect(),
            total: CategoryLabel::COUNT,
            num_categories: CategoryLabel::COUNT,
        }
    }

    pub fn weight(&self, cat: CategoryLabel) -> f64 {
        self.weights.get(&cat).copied().unwrap_or(1.0)
    }
}

pub fn compute_class_weights(records: &[QaRecord]) -> Result<ClassWeights> {
    ClassWeights::from_counts(&category_counts(records))
}

/// Duplicates minority-category records until every category present matches
/// the majority count.
///
/// Originals keep their order; duplicates are appended category by category,
/// cycling through a seeded shuffle of the category's records. Each duplicate
/// gets a fresh id and `source_id` pointing at the original.
pub fn oversample(records: &[QaRecord], seed: u64) -> Result<Vec<QaRecord>> {
    if records.is_empty() {
        return Err(Error::Config("cannot oversample an empty record list".into()));
    }
    let mut by_cat: BTreeMap<CategoryLabel, Vec<&QaRecord>> = BTreeMap::new();
    for r in records {
        by_cat.entry(r.label).or_default().push(r);
    }
    let majority = by_cat.values().map(Vec::len).max().unwrap_or(0);

    let mut ids: HashSet<String> = records.iter().map(|r| r.id.clone()).collect();
    let mut out = records.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for group in by_cat.values() {
        let deficit = majority - group.len();
        if deficit == 0 {
            continue;
        }
        let mut order = group.clone();
        order.shuffle(&mut rng);
        for k in 0..deficit {
            let src = order[k % order.len()];
            let mut dup = src.clone();
            let mut n = k;
            loop {
                dup.id = format!("{}#dup{}", src.id, n);
                if ids.insert(dup.id.clone()) {
                    break;
                }
                n += deficit;
            }
            dup.source_id = Some(src.id.clone());
            out.push(dup);
        }
    }
    Ok(out)
}
