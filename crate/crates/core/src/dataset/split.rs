use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::qagen::{QAPair, QAType};

use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratifyKey {
    Species,
    QaType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
    #[serde(default = "default_stratify")]
    pub stratify_by: Vec<StratifyKey>,
}

fn default_stratify() -> Vec<StratifyKey> {
    vec![StratifyKey::Species, StratifyKey::QaType]
}

impl SplitConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            test_fraction: 0.10,
            seed,
            stratify_by: default_stratify(),
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(DatasetError::InvalidConfig(format!(
                "test_fraction {} is outside (0, 1)",
                self.test_fraction
            )));
        }
        Ok(())
    }

    fn by(&self, key: StratifyKey) -> bool {
        self.stratify_by.contains(&key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Stratum {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub species: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa_type: Option<QAType>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<QAPair>,
    pub test: Vec<QAPair>,
}

/// Test-set size for a cell: `n * fraction` rounded half-up, at least one
/// once the cell has two members.
pub fn stratum_test_count(n: usize, test_fraction: f64) -> usize {
    // The epsilon keeps exact halves like 25 * 0.1 from rounding down.
    let k = (n as f64 * test_fraction + 0.5 + 1e-9).floor() as usize;
    let k = if n >= 2 { k.max(1) } else { k };
    k.min(n)
}

/// Seeded stratified train/test split.
///
/// Cells are formed by the configured stratification keys; within each cell
/// members are ordered by id, shuffled with a ChaCha8 stream seeded from
/// `cfg.seed`, and the first [`stratum_test_count`] go to test. Both halves
/// keep input order.
pub fn split_dataset(pairs: &[QAPair], cfg: &SplitConfig) -> Result<Split, DatasetError> {
    cfg.validate()?;
    let mut cells: BTreeMap<Stratum, Vec<usize>> = BTreeMap::new();
    for (i, p) in pairs.iter().enumerate() {
        let key = Stratum {
            species: cfg.by(StratifyKey::Species).then(|| p.species.clone()),
            qa_type: cfg.by(StratifyKey::QaType).then_some(p.qa_type),
        };
        cells.entry(key).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut in_test = vec![false; pairs.len()];
    for members in cells.values_mut() {
        members.sort_by(|&a, &b| (&pairs[a].id, a).cmp(&(&pairs[b].id, b)));
        members.shuffle(&mut rng);
        let k = stratum_test_count(members.len(), cfg.test_fraction);
        for &i in &members[..k] {
            in_test[i] = true;
        }
    }

    let n_test = in_test.iter().filter(|t| **t).count();
    if n_test == 0 {
        return Err(DatasetError::DegenerateSplit(pairs.len()));
    }
    let mut split = Split::default();
    for (p, t) in pairs.iter().zip(in_test) {
        if t {
            split.test.push(p.clone());
        } else {
            split.train.push(p.clone());
        }
    }
    Ok(split)
}

/// Member counts per (species, qa_type) cell.
pub fn cell_counts(pairs: &[QAPair]) -> BTreeMap<String, BTreeMap<QAType, usize>> {
    let mut out: BTreeMap<String, BTreeMap<QAType, usize>> = BTreeMap::new();
    for p in pairs {
        *out.entry(p.species.clone()).or_default().entry(p.qa_type).or_default() += 1;
    }
    out
}
