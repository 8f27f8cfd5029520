//! Evaluation of a model under test over held-out records, plus report
//! rendering and side-by-side comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetRecord;
use crate::gateway::{map_concurrent, ChatRequest, FinishReason, Gateway, GatewayError};
use crate::hashing::digest_parts;
use crate::metrics::{embedding_similarities, CosineNormalization, JudgeThresholds, MetricError, SampleMetrics};
use crate::qagen::QAType;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("invalid evaluation configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("comparison needs at least two reports, got {0}")]
    TooFewReports(usize),
    #[error("reports cover different test sets: {0}")]
    MismatchedTestSets(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub model_name: String,
    pub system_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub thresholds: JudgeThresholds,
    pub cosine_normalization: CosineNormalization,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            model_name: "model-under-test".into(),
            system_prompt: crate::dataset::DEFAULT_TRAINING_SYSTEM_PROMPT.into(),
            temperature: 0.0,
            max_tokens: 512,
            thresholds: JudgeThresholds::default(),
            cosine_normalization: CosineNormalization::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.max_tokens == 0 {
            return Err(EvalError::InvalidConfig("max_tokens must be > 0".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(EvalError::InvalidConfig(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.model_name.trim().is_empty() {
            return Err(EvalError::InvalidConfig("model_name is empty".into()));
        }
        self.thresholds.validate().map_err(EvalError::InvalidConfig)
    }
}

/// Means over a set of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub n: usize,
    pub mean_bleu: f64,
    pub mean_rouge1: f64,
    pub mean_rouge2: f64,
    #[serde(rename = "mean_rougeL")]
    pub mean_rouge_l: f64,
    pub mean_embedding_similarity: f64,
    pub mean_token_f1: f64,
    pub pass_rate_pct: f64,
    pub exact_match_rate: f64,
    pub truncation_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub overall: Aggregates,
    pub by_qa_type: BTreeMap<QAType, Aggregates>,
    pub by_species: BTreeMap<String, Aggregates>,
    /// SHA-256 over the sorted record ids; reports are comparable only when
    /// this and `n` agree.
    pub test_set_digest: String,
    pub config_echo: EvalConfig,
}

/// One persisted evaluation row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSample {
    pub record_id: String,
    pub qa_type: QAType,
    pub species: String,
    pub question: String,
    pub reference: String,
    pub response: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finish_reason: Option<FinishReason>,
    pub metrics: SampleMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl EvalSample {
    pub fn truncated(&self) -> bool {
        self.finish_reason == Some(FinishReason::Length)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub samples: Vec<EvalSample>,
}

pub fn aggregate<'a>(samples: impl IntoIterator<Item = &'a EvalSample>) -> Aggregates {
    let mut a = Aggregates {
        n: 0,
        mean_bleu: 0.0,
        mean_rouge1: 0.0,
        mean_rouge2: 0.0,
        mean_rouge_l: 0.0,
        mean_embedding_similarity: 0.0,
        mean_token_f1: 0.0,
        pass_rate_pct: 0.0,
        exact_match_rate: 0.0,
        truncation_count: 0,
    };
    let (mut passed, mut exact) = (0usize, 0usize);
    for s in samples {
        let m = &s.metrics;
        a.n += 1;
        a.mean_bleu += m.bleu;
        a.mean_rouge1 += m.rouge1;
        a.mean_rouge2 += m.rouge2;
        a.mean_rouge_l += m.rouge_l;
        a.mean_embedding_similarity += m.embedding_similarity;
        a.mean_token_f1 += m.token_f1;
        passed += m.passed as usize;
        exact += m.exact_match as usize;
        a.truncation_count += s.truncated() as usize;
    }
    if a.n > 0 {
        let n = a.n as f64;
        for v in [
            &mut a.mean_bleu,
            &mut a.mean_rouge1,
            &mut a.mean_rouge2,
            &mut a.mean_rouge_l,
            &mut a.mean_embedding_similarity,
            &mut a.mean_token_f1,
        ] {
            *v /= n;
        }
        a.pass_rate_pct = 100.0 * passed as f64 / n;
        a.exact_match_rate = exact as f64 / n;
    }
    a
}

pub fn test_set_digest<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.sort_unstable();
    digest_parts(ids)
}

/// Build a report from already scored samples.
pub fn build_report(samples: &[EvalSample], cfg: &EvalConfig) -> EvalReport {
    let mut by_type: BTreeMap<QAType, Vec<&EvalSample>> = BTreeMap::new();
    let mut by_species: BTreeMap<String, Vec<&EvalSample>> = BTreeMap::new();
    for s in samples {
        by_type.entry(s.qa_type).or_default().push(s);
        by_species.entry(s.species.clone()).or_default().push(s);
    }
    EvalReport {
        overall: aggregate(samples),
        by_qa_type: by_type.into_iter().map(|(k, v)| (k, aggregate(v))).collect(),
        by_species: by_species.into_iter().map(|(k, v)| (k, aggregate(v))).collect(),
        test_set_digest: test_set_digest(samples.iter().map(|s| s.record_id.as_str())),
        config_echo: cfg.clone(),
    }
}

/// Run the model under test over `test_set` and score every response.
///
/// An unreachable endpoint or rejected credential aborts the run. Any other
/// per-sample failure scores that sample 0 on every metric and records a
/// diagnostic. Truncated responses are scored as they are and counted.
pub fn evaluate_model(test_set: &[DatasetRecord], gateway: &Gateway, cfg: &EvalConfig) -> Result<Evaluation, EvalError> {
    cfg.validate()?;
    if test_set.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let mut records: Vec<&DatasetRecord> = test_set.iter().collect();
    records.sort_by(|a, b| a.id.cmp(&b.id));

    let responses = map_concurrent(&records, gateway.policy().max_in_flight, |r| {
        gateway.chat_complete(&ChatRequest {
            system_prompt: cfg.system_prompt.clone(),
            user_prompt: r.question.clone(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            model_name: cfg.model_name.clone(),
        })
    });

    let mut samples = Vec::with_capacity(records.len());
    for (r, resp) in records.iter().zip(responses) {
        let (response, finish_reason, diagnostic) = match resp {
            Ok(resp) => {
                let diag = (resp.finish_reason == FinishReason::Error)
                    .then(|| "endpoint reported finish_reason=error".to_string());
                (resp.text, Some(resp.finish_reason), diag)
            }
            Err(e) if e.is_fatal() => return Err(e.into()),
            Err(e) => (String::new(), None, Some(e.to_string())),
        };
        samples.push(EvalSample {
            record_id: r.id.clone(),
            qa_type: r.qa_type,
            species: r.species.clone(),
            question: r.question.clone(),
            reference: r.answer.clone(),
            response,
            finish_reason,
            metrics: SampleMetrics::zero(),
            diagnostic,
        });
    }

    // Samples with no response stay at zero and are not embedded.
    let scorable: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].finish_reason.is_some()).collect();
    let pairs: Vec<(String, String)> = scorable
        .iter()
        .map(|&i| (samples[i].response.clone(), samples[i].reference.clone()))
        .collect();
    let sims = embedding_similarities(&pairs, gateway, cfg.cosine_normalization)?;
    let scored: Vec<SampleMetrics> = scorable
        .par_iter()
        .zip(sims.par_iter())
        .map(|(&i, &sim)| SampleMetrics::score(&samples[i].response, &samples[i].reference, sim, &cfg.thresholds))
        .collect();
    for (&i, m) in scorable.iter().zip(scored) {
        samples[i].metrics = m;
    }

    Ok(Evaluation {
        report: build_report(&samples, cfg),
        samples,
    })
}

const METRIC_ROWS: [&str; 7] = [
    "BLEU",
    "ROUGE-1",
    "ROUGE-2",
    "ROUGE-L",
    "Embedding Similarity",
    "Token F1",
    "Overall Score (%)",
];

fn metric_values(a: &Aggregates) -> [f64; 7] {
    [
        a.mean_bleu,
        a.mean_rouge1,
        a.mean_rouge2,
        a.mean_rouge_l,
        a.mean_embedding_similarity,
        a.mean_token_f1,
        a.pass_rate_pct,
    ]
}

fn fmt_metric(row: usize, v: f64) -> String {
    if row == 6 {
        format!("{v:.2}")
    } else {
        format!("{v:.4}")
    }
}

/// Left-aligned first column, right-aligned data columns.
fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}", w = widths[0]);
            } else {
                let _ = write!(s, "  {c:>w$}", w = widths[i]);
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&rule[..cols]);
    for r in rows {
        line(r);
    }
    out
}

fn breakdown<K: ToString>(title: &str, cells: &BTreeMap<K, Aggregates>) -> String {
    let header: Vec<String> = [title, "n", "BLEU", "ROUGE-1", "ROUGE-2", "ROUGE-L", "Emb. Sim.", "Token F1", "Pass (%)"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|(k, a)| {
            let mut row = vec![k.to_string(), a.n.to_string()];
            row.extend(metric_values(a).iter().enumerate().map(|(i, v)| fmt_metric(i, *v)));
            row
        })
        .collect();
    table(&header, &rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedReport {
    pub text: String,
    pub json: String,
}

/// Plain-text tables plus a JSON document carrying the same report.
pub fn render_report(report: &EvalReport) -> RenderedReport {
    let header = vec!["Metric".to_string(), report.config_echo.model_name.clone()];
    let values = metric_values(&report.overall);
    let rows: Vec<Vec<String>> = METRIC_ROWS
        .iter()
        .enumerate()
        .map(|(i, name)| vec![name.to_string(), fmt_metric(i, values[i])])
        .collect();
    let mut text = format!("Evaluation results (n = {})\n\n", report.overall.n);
    text.push_str(&table(&header, &rows));
    text.push_str("\nBy question type\n\n");
    text.push_str(&breakdown("Type", &report.by_qa_type));
    text.push_str("\nBy species\n\n");
    text.push_str(&breakdown("Species", &report.by_species));
    let _ = writeln!(
        text,
        "\nTruncated responses: {} of {}",
        report.overall.truncation_count, report.overall.n
    );
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    RenderedReport { text, json }
}

pub fn parse_report(json: &str) -> Result<EvalReport, serde_json::Error> {
    serde_json::from_str(json)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Pass rate of the best model minus that of the worst.
    pub pass_rate_delta: f64,
    pub best_model: String,
    pub worst_model: String,
    pub text: String,
}

/// Side-by-side table of several reports over the same test set.
///
/// The delta column is, per row, the best model's value minus the worst
/// model's value, where best and worst are ranked by pass rate.
pub fn compare_models(reports: &[EvalReport]) -> Result<Comparison, EvalError> {
    if reports.len() < 2 {
        return Err(EvalError::TooFewReports(reports.len()));
    }
    let first = &reports[0];
    for r in &reports[1..] {
        if r.overall.n != first.overall.n {
            return Err(EvalError::MismatchedTestSets(format!(
                "n = {} vs n = {}",
                first.overall.n, r.overall.n
            )));
        }
        if r.test_set_digest != first.test_set_digest {
            return Err(EvalError::MismatchedTestSets(format!(
                "record digests {} vs {}",
                first.test_set_digest, r.test_set_digest
            )));
        }
    }
    // First report wins ties in both directions.
    let mut best = 0;
    let mut worst = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.overall.pass_rate_pct > reports[best].overall.pass_rate_pct {
            best = i;
        }
        if r.overall.pass_rate_pct < reports[worst].overall.pass_rate_pct {
            worst = i;
        }
    }
    let best_vals = metric_values(&reports[best].overall);
    let worst_vals = metric_values(&reports[worst].overall);

    let mut header = vec!["Metric".to_string()];
    header.extend(reports.iter().map(|r| r.config_echo.model_name.clone()));
    header.push("Delta".to_string());
    let rows: Vec<Vec<String>> = METRIC_ROWS
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut row = vec![name.to_string()];
            row.extend(reports.iter().map(|r| fmt_metric(i, metric_values(&r.overall)[i])));
            row.push(fmt_metric(i, best_vals[i] - worst_vals[i]));
            row
        })
        .collect();
    let best_model = reports[best].config_echo.model_name.clone();
    let worst_model = reports[worst].config_echo.model_name.clone();
    let mut text = format!("Model comparison (n = {})\n\n", first.overall.n);
    text.push_str(&table(&header, &rows));
    let _ = writeln!(text, "\nDelta = {best_model} minus {worst_model}");
    Ok(Comparison {
        pass_rate_delta: reports[best].overall.pass_rate_pct - reports[worst].overall.pass_rate_pct,
        best_model,
        worst_model,
        text,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use super::*;
    use crate::dataset::{serialize_record, SplitName};
    use crate::gateway::{ChatResponse, RetryPolicy, Transport, TransportError};
    use crate::qagen::{pair_id, QAPair};

    /// Deterministic pseudo-embedding: identical texts give identical vectors.
    fn embed_text(t: &str) -> Vec<f64> {
        let d = digest_parts([t]);
        d.as_bytes()[..16].iter().map(|b| *b as f64 - 70.0).collect()
    }

    enum Mode {
        Echo,
        Empty,
        Alternate,
        Malformed,
        Down,
        Truncate,
    }

    struct Mock {
        mode: Mode,
        answers: BTreeMap<String, String>,
        calls: AtomicUsize,
    }

    impl Transport for Mock {
        fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let answer = self.answers[&req.user_prompt].clone();
            let ok = |text: String, finish_reason| {
                Ok(ChatResponse {
                    text,
                    finish_reason,
                    latency_ms: 1,
                })
            };
            match self.mode {
                Mode::Echo => ok(answer, FinishReason::Stop),
                Mode::Empty => ok(String::new(), FinishReason::Stop),
                Mode::Alternate => {
                    // Even-numbered questions get the answer.
                    let k: usize = req.user_prompt.trim_end_matches('?').rsplit(' ').next().unwrap().parse().unwrap();
                    ok(if k.is_multiple_of(2) { answer } else { String::new() }, FinishReason::Stop)
                }
                Mode::Malformed => Err(TransportError::Malformed("not json".into())),
                Mode::Down => Err(TransportError::Unreachable("refused".into())),
                Mode::Truncate => {
                    let half: String = answer.chars().take(answer.chars().count() / 2).collect();
                    ok(half, FinishReason::Length)
                }
            }
        }

        fn embed(&self, _m: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, TransportError> {
            Ok(texts.iter().map(|t| embed_text(t)).collect())
        }
    }

    fn records(n: usize) -> Vec<DatasetRecord> {
        (0..n)
            .map(|k| {
                let q = format!("Which control method applies to case {k}?");
                let p = QAPair {
                    id: pair_id("d", k, &q),
                    qa_type: QAType::ALL[k % 6],
                    question: q,
                    answer: format!("Pheromone traps placed near palms in grove {k} reduce weevil numbers."),
                    doc_id: "d".into(),
                    segment_index: k,
                    species: if k % 3 == 0 { "EAB" } else { "RPW" }.into(),
                    derived_from: None,
                    needs_review: false,
                };
                serialize_record(&p, "S", SplitName::Test).unwrap()
            })
            .collect()
    }

    fn run(mode: Mode, recs: &[DatasetRecord]) -> (Result<Evaluation, EvalError>, usize) {
        let mock = Arc::new(Mock {
            mode,
            answers: recs.iter().map(|r| (r.question.clone(), r.answer.clone())).collect(),
            calls: AtomicUsize::new(0),
        });
        let policy = RetryPolicy {
            backoff_base_ms: 0,
            ..Default::default()
        };
        let g = Gateway::new(mock.clone(), policy).unwrap();
        let out = evaluate_model(recs, &g, &EvalConfig::default());
        (out, mock.calls.load(Ordering::SeqCst))
    }

    #[test]
    fn echo_scores_perfectly() {
        let recs = records(12);
        let r = run(Mode::Echo, &recs).0.unwrap().report;
        let o = &r.overall;
        for v in [o.mean_bleu, o.mean_rouge1, o.mean_rouge2, o.mean_rouge_l, o.mean_token_f1, o.mean_embedding_similarity] {
            assert_eq!(v, 1.0);
        }
        assert_eq!((o.pass_rate_pct, o.exact_match_rate, o.n), (100.0, 1.0, 12));
    }

    #[test]
    fn empty_scores_zero() {
        let r = run(Mode::Empty, &records(8)).0.unwrap().report;
        let o = &r.overall;
        for v in [o.mean_bleu, o.mean_rouge1, o.mean_rouge2, o.mean_rouge_l, o.mean_token_f1, o.mean_embedding_similarity] {
            assert_eq!(v, 0.0);
        }
        assert_eq!(o.pass_rate_pct, 0.0);
    }

    #[test]
    fn half_and_half_is_fifty() {
        let ev = run(Mode::Alternate, &records(10)).0.unwrap();
        assert_eq!(ev.report.overall.pass_rate_pct, 50.0);
        // Breakdowns partition the sample set.
        assert_eq!(ev.report.by_qa_type.values().map(|a| a.n).sum::<usize>(), 10);
        assert_eq!(ev.report.by_species.values().map(|a| a.n).sum::<usize>(), 10);
        assert_eq!(aggregate(&ev.samples), ev.report.overall);
    }

    #[test]
    fn malformed_scores_zero_with_diagnostic() {
        let (ev, calls) = run(Mode::Malformed, &records(4));
        let ev = ev.unwrap();
        assert_eq!(calls, 4);
        assert!(ev.samples.iter().all(|s| s.diagnostic.is_some() && s.metrics == SampleMetrics::zero()));
    }

    #[test]
    fn unreachable_aborts() {
        assert!(matches!(
            run(Mode::Down, &records(3)).0,
            Err(EvalError::Gateway(GatewayError::EndpointUnreachable { .. }))
        ));
    }

    #[test]
    fn truncations_counted_and_scored() {
        let r = run(Mode::Truncate, &records(6)).0.unwrap().report;
        assert_eq!(r.overall.truncation_count, 6);
        assert!(r.overall.mean_rouge1 > 0.0 && r.overall.mean_rouge1 < 1.0);
    }

    #[test]
    fn samples_sorted_by_id_and_digest_order_free() {
        let mut recs = records(9);
        let a = run(Mode::Echo, &recs).0.unwrap();
        recs.reverse();
        let b = run(Mode::Echo, &recs).0.unwrap();
        assert_eq!(a, b);
        assert!(a.samples.windows(2).all(|w| w[0].record_id < w[1].record_id));
    }

    #[test]
    fn empty_test_set_and_bad_config() {
        assert!(matches!(run(Mode::Echo, &[]).0, Err(EvalError::EmptyTestSet)));
        let cfg = EvalConfig {
            max_tokens: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    fn fixture(model: &str, vals: [f64; 7], n: usize, digest: &str) -> EvalReport {
        let overall = Aggregates {
            n,
            mean_bleu: vals[0],
            mean_rouge1: vals[1],
            mean_rouge2: vals[2],
            mean_rouge_l: vals[3],
            mean_embedding_similarity: vals[4],
            mean_token_f1: vals[5],
            pass_rate_pct: vals[6],
            exact_match_rate: 0.0,
            truncation_count: 0,
        };
        EvalReport {
            overall,
            by_qa_type: BTreeMap::new(),
            by_species: BTreeMap::new(),
            test_set_digest: digest.into(),
            config_echo: EvalConfig {
                model_name: model.into(),
                ..Default::default()
            },
        }
    }

    #[test]
    fn rendered_rows_in_order() {
        let r = fixture("Mistral 7B", [0.0966, 0.1742, 0.1618, 0.1710, 0.8650, 0.3462, 88.90], 2510, "x");
        let out = render_report(&r);
        let lines: Vec<&str> = out.text.lines().collect();
        let start = lines.iter().position(|l| l.starts_with("BLEU")).unwrap();
        let want = ["0.0966", "0.1742", "0.1618", "0.1710", "0.8650", "0.3462", "88.90"];
        for (k, (name, lit)) in METRIC_ROWS.iter().zip(want).enumerate() {
            let l = lines[start + k];
            assert!(l.starts_with(name) && l.ends_with(lit), "{l}");
        }
        assert_eq!(parse_report(&out.json).unwrap(), r);
    }

    #[test]
    fn comparison_delta_and_guards() {
        let m = fixture("Mistral 7B", [0.0966, 0.1742, 0.1618, 0.1710, 0.8650, 0.3462, 88.90], 2510, "x");
        let l = fixture("LLaMA 3.1 8B", [0.2049, 0.3680, 0.2577, 0.3338, 0.8205, 0.4060, 58.70], 2510, "x");
        let c = compare_models(&[m.clone(), l.clone()]).unwrap();
        assert_eq!(format!("{:.2}", c.pass_rate_delta), "30.20");
        let overall = c.text.lines().find(|x| x.starts_with("Overall")).unwrap();
        assert!(overall.ends_with("30.20"), "{overall}");
        assert_eq!(compare_models(&[m.clone(), m.clone()]).unwrap().pass_rate_delta, 0.0);
        let other_n = fixture("Q", [0.0; 7], 100, "x");
        assert!(matches!(compare_models(&[m.clone(), other_n]), Err(EvalError::MismatchedTestSets(_))));
        let other_ids = fixture("Q", [0.0; 7], 2510, "y");
        assert!(matches!(compare_models(&[m.clone(), other_ids]), Err(EvalError::MismatchedTestSets(_))));
        assert!(matches!(compare_models(&[m]), Err(EvalError::TooFewReports(1))));
    }
}
