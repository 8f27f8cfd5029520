use std::collections::{HashMap, HashSet};

use crate::gateway::Gateway;
use crate::metrics::{cosine, tokenize_for_metrics, MetricError};
use crate::qagen::QAPair;

use super::DatasetError;

/// Case-folded, whitespace-collapsed question text.
pub fn question_key(question: &str) -> String {
    question
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

struct Bag {
    counts: HashMap<String, usize>,
    len: usize,
}

impl Bag {
    fn new(text: &str) -> Self {
        let tokens = tokenize_for_metrics(text);
        let len = tokens.len();
        let mut counts = HashMap::new();
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        Self { counts, len }
    }

    fn f1(&self, other: &Bag) -> f64 {
        match (self.len, other.len) {
            (0, 0) => return 1.0,
            (0, _) | (_, 0) => return 0.0,
            _ => {}
        }
        let overlap: usize = self
            .counts
            .iter()
            .map(|(k, c)| (*c).min(other.counts.get(k).copied().unwrap_or(0)))
            .sum();
        2.0 * overlap as f64 / (self.len + other.len) as f64
    }

    /// F1 can never exceed 2 min / (a + b).
    fn f1_bound(&self, other: &Bag) -> f64 {
        let total = self.len + other.len;
        if total == 0 {
            return 1.0;
        }
        2.0 * self.len.min(other.len) as f64 / total as f64
    }
}

pub(super) fn validate_threshold(t: f64) -> Result<(), DatasetError> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(DatasetError::InvalidThreshold(t))
    }
}

/// Keep-mask for `pairs`, visiting in `order` and dropping anything that
/// duplicates an already kept pair.
fn keep_mask(pairs: &[QAPair], order: &[usize], threshold: f64) -> Vec<bool> {
    let mut keep = vec![false; pairs.len()];
    let mut seen: HashSet<String> = HashSet::new();
    let mut kept_bags: Vec<Bag> = Vec::new();
    for &i in order {
        if !seen.insert(question_key(&pairs[i].question)) {
            continue;
        }
        let bag = Bag::new(&pairs[i].question);
        let near_dup = kept_bags
            .iter()
            .any(|k| bag.f1_bound(k) >= threshold && bag.f1(k) >= threshold);
        if !near_dup {
            kept_bags.push(bag);
            keep[i] = true;
        }
    }
    keep
}

fn provenance_order(pairs: &[QAPair]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&pairs[a], &pairs[b]);
        (&x.doc_id, x.segment_index, x.derived_from.is_some(), &x.id, a)
            .cmp(&(&y.doc_id, y.segment_index, y.derived_from.is_some(), &y.id, b))
    });
    order
}

/// Drop exact duplicate questions, then near-duplicates whose token-F1 with an
/// earlier question reaches `near_dup_threshold`.
///
/// "Earlier" is `(doc_id, segment_index, id)` order, with originals ahead of
/// paraphrases in the same chunk. Survivors keep their input order.
pub fn dedup_pairs(pairs: &[QAPair], near_dup_threshold: f64) -> Result<Vec<QAPair>, DatasetError> {
    validate_threshold(near_dup_threshold)?;
    let keep = keep_mask(pairs, &provenance_order(pairs), near_dup_threshold);
    Ok(filter(pairs, &keep))
}

/// Dedup where every pair with `derived_from == None` outranks every derived one.
pub(super) fn dedup_originals_first(pairs: &[QAPair], threshold: f64) -> Vec<bool> {
    let mut order = provenance_order(pairs);
    order.sort_by_key(|&i| pairs[i].derived_from.is_some());
    keep_mask(pairs, &order, threshold)
}

fn filter(pairs: &[QAPair], keep: &[bool]) -> Vec<QAPair> {
    pairs
        .iter()
        .zip(keep)
        .filter(|(_, k)| **k)
        .map(|(p, _)| p.clone())
        .collect()
}

/// Exact dedup, then drop questions whose embedding cosine with an earlier
/// kept question reaches `cosine_threshold`.
pub fn dedup_pairs_embedding(
    pairs: &[QAPair],
    gateway: &Gateway,
    cosine_threshold: f64,
) -> Result<Vec<QAPair>, DatasetError> {
    validate_threshold(cosine_threshold)?;
    // Exact pass first: threshold above any F1 disables the near-dup test.
    let order = provenance_order(pairs);
    let exact = keep_mask(pairs, &order, f64::INFINITY);
    let candidates: Vec<usize> = order.into_iter().filter(|&i| exact[i]).collect();
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let texts: Vec<String> = candidates.iter().map(|&i| pairs[i].question.clone()).collect();
    let vectors = gateway.embed_batch(&texts).map_err(MetricError::from)?;

    let mut keep = vec![false; pairs.len()];
    let mut kept: Vec<usize> = Vec::new();
    for (k, &i) in candidates.iter().enumerate() {
        let mut dup = false;
        for &j in &kept {
            if cosine(vectors[k].values(), vectors[j].values())? >= cosine_threshold {
                dup = true;
                break;
            }
        }
        if !dup {
            kept.push(k);
            keep[i] = true;
        }
    }
    Ok(filter(pairs, &keep))
}
