//! Per-sample answer quality metrics and the pass/fail judgment.
//!
//! Every lexical metric (BLEU, ROUGE, token-F1) runs on the tokens produced by
//! [`tokenize_for_metrics`].

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::gateway::{EmbeddingVector, Gateway, GatewayError};

const BLEU_MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("embedding has zero norm")]
    ZeroVector,
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Lowercase, then split on every run of non-alphanumeric characters.
pub fn tokenize_for_metrics(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn counts<T: Eq + Hash>(items: impl IntoIterator<Item = T>) -> HashMap<T, usize> {
    let mut m = HashMap::new();
    for it in items {
        *m.entry(it).or_insert(0) += 1;
    }
    m
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    if tokens.len() < n {
        return HashMap::new();
    }
    counts(tokens.windows(n))
}

/// Size of the multiset intersection.
fn clipped_overlap<K: Eq + Hash>(cand: &HashMap<K, usize>, reference: &HashMap<K, usize>) -> usize {
    cand.iter()
        .map(|(k, c)| (*c).min(reference.get(k).copied().unwrap_or(0)))
        .sum()
}

fn f1(overlap: usize, cand_total: usize, ref_total: usize) -> f64 {
    if overlap == 0 || cand_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand_total as f64;
    let r = overlap as f64 / ref_total as f64;
    2.0 * p * r / (p + r)
}

/// Sentence-level BLEU-4.
///
/// Modified n-gram precisions for n = 1..=min(4, candidate length); orders
/// with no matches are smoothed to `1 / (count + 1)`. Their geometric mean is
/// scaled by the brevity penalty `exp(1 - ref_len / cand_len)` for short
/// candidates. No unigram overlap, or one empty side, scores 0; two empty
/// sides score 1, as for ROUGE and token-F1.
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    bleu_tokens(&tokenize_for_metrics(candidate), &tokenize_for_metrics(reference))
}

pub fn bleu_tokens(cand: &[String], reference: &[String]) -> f64 {
    if cand.is_empty() && reference.is_empty() {
        return 1.0;
    }
    if cand.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let order = BLEU_MAX_ORDER.min(cand.len());
    let mut log_sum = 0.0;
    for n in 1..=order {
        let c = ngram_counts(cand, n);
        let r = ngram_counts(reference, n);
        let matched = clipped_overlap(&c, &r);
        let total = cand.len() + 1 - n;
        if matched == 0 && n == 1 {
            return 0.0;
        }
        let p = if matched == 0 {
            1.0 / (total as f64 + 1.0)
        } else {
            matched as f64 / total as f64
        };
        log_sum += p.ln();
    }
    let (c, r) = (cand.len() as f64, reference.len() as f64);
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    (bp * (log_sum / order as f64).exp()).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rouge {
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
}

/// ROUGE-1, ROUGE-2 and ROUGE-L F1 scores.
///
/// When neither side is long enough to have an n-gram of some order, that
/// order scores 1 if the token sequences are equal and 0 otherwise.
pub fn rouge(candidate: &str, reference: &str) -> Rouge {
    rouge_tokens(&tokenize_for_metrics(candidate), &tokenize_for_metrics(reference))
}

pub fn rouge_tokens(cand: &[String], reference: &[String]) -> Rouge {
    let rouge_n = |n: usize| {
        let c = ngram_counts(cand, n);
        let r = ngram_counts(reference, n);
        let (ct, rt) = (cand.len().saturating_sub(n - 1), reference.len().saturating_sub(n - 1));
        if ct == 0 && rt == 0 {
            return if cand == reference { 1.0 } else { 0.0 };
        }
        f1(clipped_overlap(&c, &r), ct, rt)
    };
    let rouge_l = if cand.is_empty() && reference.is_empty() {
        1.0
    } else {
        f1(lcs_len(cand, reference), cand.len(), reference.len())
    };
    Rouge {
        rouge1: rouge_n(1),
        rouge2: rouge_n(2),
        rouge_l,
    }
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Multiset token F1. Both empty scores 1, exactly one empty scores 0.
pub fn token_f1(candidate: &str, reference: &str) -> f64 {
    token_f1_tokens(&tokenize_for_metrics(candidate), &tokenize_for_metrics(reference))
}

pub fn token_f1_tokens(cand: &[String], reference: &[String]) -> f64 {
    match (cand.is_empty(), reference.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => f1(
            clipped_overlap(&counts(cand.iter()), &counts(reference.iter())),
            cand.len(),
            reference.len(),
        ),
    }
}

fn exact_match_form(s: &str) -> String {
    let folded = s.to_lowercase();
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(|c: char| !c.is_alphanumeric())
        .to_string()
}

/// Equality after case folding, whitespace collapsing and stripping trailing
/// punctuation.
pub fn exact_match(candidate: &str, reference: &str) -> bool {
    exact_match_form(candidate) == exact_match_form(reference)
}

/// How cosine similarity in [-1, 1] is mapped onto [0, 1].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CosineNormalization {
    /// (cos + 1) / 2
    #[default]
    Affine,
    /// max(cos, 0)
    ClampZero,
}

impl CosineNormalization {
    pub fn apply(self, cos: f64) -> f64 {
        let v = match self {
            Self::Affine => (cos + 1.0) / 2.0,
            Self::ClampZero => cos.max(0.0),
        };
        v.clamp(0.0, 1.0)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::DimensionMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(MetricError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn normalized_similarity(
    a: &EmbeddingVector,
    b: &EmbeddingVector,
    mode: CosineNormalization,
) -> Result<f64, MetricError> {
    Ok(mode.apply(cosine(a.values(), b.values())?))
}

/// Embed both texts and return their normalized cosine similarity.
pub fn embedding_similarity(
    candidate: &str,
    reference: &str,
    gateway: &Gateway,
    mode: CosineNormalization,
) -> Result<f64, MetricError> {
    let v = gateway.embed_batch(&[candidate.to_string(), reference.to_string()])?;
    normalized_similarity(&v[0], &v[1], mode)
}

/// Similarities for many (candidate, reference) pairs in batched requests.
///
/// A blank candidate scores 0 and is not sent to the endpoint.
pub fn embedding_similarities(
    pairs: &[(String, String)],
    gateway: &Gateway,
    mode: CosineNormalization,
) -> Result<Vec<f64>, MetricError> {
    let scored: Vec<usize> = (0..pairs.len())
        .filter(|&i| !pairs[i].0.trim().is_empty() && !pairs[i].1.trim().is_empty())
        .collect();
    let mut out = vec![0.0; pairs.len()];
    if scored.is_empty() {
        return Ok(out);
    }
    let texts: Vec<String> = scored
        .iter()
        .flat_map(|&i| [pairs[i].0.clone(), pairs[i].1.clone()])
        .collect();
    let vectors = gateway.embed_batch(&texts)?;
    for (k, &i) in scored.iter().enumerate() {
        out[i] = normalized_similarity(&vectors[2 * k], &vectors[2 * k + 1], mode)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JudgeThresholds {
    pub min_embedding_similarity: f64,
    pub min_token_f1: f64,
}

impl Default for JudgeThresholds {
    fn default() -> Self {
        Self {
            min_embedding_similarity: 0.80,
            min_token_f1: 0.30,
        }
    }
}

impl JudgeThresholds {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("min_embedding_similarity", self.min_embedding_similarity),
            ("min_token_f1", self.min_token_f1),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub bleu: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub token_f1: f64,
    pub embedding_similarity: f64,
    pub exact_match: bool,
    pub passed: bool,
}

impl SampleMetrics {
    /// Every metric at 0; used for responses that could not be scored.
    pub fn zero() -> Self {
        Self {
            bleu: 0.0,
            rouge1: 0.0,
            rouge2: 0.0,
            rouge_l: 0.0,
            token_f1: 0.0,
            embedding_similarity: 0.0,
            exact_match: false,
            passed: false,
        }
    }

    /// Lexical metrics of `candidate` against `reference`, with the given
    /// embedding similarity, judged against `thresholds`.
    pub fn score(candidate: &str, reference: &str, embedding_similarity: f64, thresholds: &JudgeThresholds) -> Self {
        let ct = tokenize_for_metrics(candidate);
        let rt = tokenize_for_metrics(reference);
        let r = rouge_tokens(&ct, &rt);
        let mut m = Self {
            bleu: bleu_tokens(&ct, &rt),
            rouge1: r.rouge1,
            rouge2: r.rouge2,
            rouge_l: r.rouge_l,
            token_f1: token_f1_tokens(&ct, &rt),
            embedding_similarity,
            exact_match: exact_match(candidate, reference),
            passed: false,
        };
        m.passed = judge_sample(&m, thresholds);
        m
    }
}

/// Semantic floor and lexical floor must both be met.
///
/// The `passed` field of `m` is ignored.
pub fn judge_sample(m: &SampleMetrics, t: &JudgeThresholds) -> bool {
    m.embedding_similarity >= t.min_embedding_similarity && m.token_f1 >= t.min_token_f1
}
