use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CategoryLabel, QaRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }

    fn validate(&self) -> Result<()> {
        let f = self.as_array();
        if f.iter().any(|&x| !(x > 0.0)) || ((f.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must be positive and sum to 1, got {f:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<QaRecord>,
    pub validation: Vec<QaRecord>,
    pub test: Vec<QaRecord>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn parts(&self) -> [&[QaRecord]; 3] {
        [&self.train, &self.validation, &self.test]
    }
}

/// Stratified three-way split.
///
/// Each category is shuffled with the seed and cut into parts whose sizes are
/// the floor of the ideal share plus at most one extra record, so every
/// per-category count is within one record of `count * fraction`. The extra
/// records go to the largest fractional remainders first, filling the global
/// largest-remainder targets; remainder ties resolve by category name, then
/// by part order (train, validation, test). Within a part, records keep their
/// input order.
pub fn stratified_split(
    records: &[QaRecord],
    fractions: SplitFractions,
    seed: u64,
) -> Result<DatasetSplit> {
    fractions.validate()?;
    let fr = fractions.as_array();

    let mut by_cat: BTreeMap<CategoryLabel, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_cat.entry(r.label).or_default().push(i);
    }
    if let Some((cat, idx)) = by_cat.iter().find(|(_, v)| v.len() < 3) {
        return Err(Error::Split(format!(
            "category {cat} has {} record(s), need at least 3",
            idx.len()
        )));
    }

    let total = records.len();
    let global_target = largest_remainder(total, &fr);

    // (category, base counts, leftover)
    let mut plan: BTreeMap<CategoryLabel, [usize; 3]> = BTreeMap::new();
    let mut leftover: BTreeMap<CategoryLabel, usize> = BTreeMap::new();
    let mut candidates = Vec::new();
    for (&cat, idx) in &by_cat {
        let n = idx.len();
        let mut base = [0usize; 3];
        for p in 0..3 {
            let ideal = n as f64 * fr[p];
            base[p] = ideal.floor() as usize;
            candidates.push((ideal - ideal.floor(), cat, p));
        }
        leftover.insert(cat, n - base.iter().sum::<usize>());
        plan.insert(cat, base);
    }
    let mut assigned = [0usize; 3];
    for counts in plan.values() {
        for p in 0..3 {
            assigned[p] += counts[p];
        }
    }
    candidates.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.as_str().cmp(b.1.as_str()))
            .then(a.2.cmp(&b.2))
    });

    let mut used = vec![false; candidates.len()];
    // First pass respects the global targets; second pass places whatever is left.
    for respect_targets in [true, false] {
        for (k, &(_, cat, p)) in candidates.iter().enumerate() {
            let left = leftover.get_mut(&cat).expect("category present");
            if used[k] || *left == 0 || (respect_targets && assigned[p] >= global_target[p]) {
                continue;
            }
            used[k] = true;
            *left -= 1;
            assigned[p] += 1;
            plan.get_mut(&cat).expect("category present")[p] += 1;
        }
    }
    debug_assert!(leftover.values().all(|&l| l == 0));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut part_of = vec![0usize; total];
    for (cat, idx) in &by_cat {
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut rng);
        let counts = plan[cat];
        for (pos, &i) in shuffled.iter().enumerate() {
            part_of[i] = if pos < counts[0] {
                0
            } else if pos < counts[0] + counts[1] {
                1
            } else {
                2
            };
        }
    }

    let mut parts: [Vec<QaRecord>; 3] = Default::default();
    for (i, r) in records.iter().enumerate() {
        parts[part_of[i]].push(r.clone());
    }
    let [train, validation, test] = parts;
    Ok(DatasetSplit {
        train,
        validation,
        test,
        seed,
    })
}

/// Integer apportionment of `n` by `fractions`, largest remainder first.
fn largest_remainder(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let mut out = [0usize; 3];
    let mut rem = Vec::new();
    for p in 0..3 {
        let ideal = n as f64 * fractions[p];
        out[p] = ideal.floor() as usize;
        rem.push((ideal - ideal.floor(), p));
    }
    let mut left = n - out.iter().sum::<usize>();
    rem.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, p) in rem {
        if left == 0 {
            break;
        }
        out[p] += 1;
        left -= 1;
    }
    out
}
