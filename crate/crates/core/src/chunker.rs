//! Sentence-aligned sliding-window segmentation.
//!
//! All offsets are character (Unicode scalar) indices into `Document::text`.
//! Window sizes are in characters too: at roughly four characters per token,
//! the defaults of 4000/800 correspond to 1000-token windows with a 200-token
//! overlap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::Document;

const TERMINALS: [char; 3] = ['.', '!', '?'];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChunkError {
    #[error("target {target} is past the end of a {len}-character text")]
    TargetOutOfRange { target: usize, len: usize },
    #[error("invalid chunk config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkConfig {
    pub window_chars: usize,
    pub overlap_chars: usize,
    pub backscan_chars: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            window_chars: 4000,
            overlap_chars: 800,
            backscan_chars: 100,
        }
    }
}

impl ChunkConfig {
    pub fn new(window_chars: usize, overlap_chars: usize, backscan_chars: usize) -> Result<Self, ChunkError> {
        let cfg = Self {
            window_chars,
            overlap_chars,
            backscan_chars,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ChunkError> {
        if self.window_chars == 0 {
            return Err(ChunkError::InvalidConfig("window_chars must be > 0".into()));
        }
        if self.overlap_chars >= self.window_chars {
            return Err(ChunkError::InvalidConfig(format!(
                "overlap_chars ({}) must be < window_chars ({})",
                self.overlap_chars, self.window_chars
            )));
        }
        if self.backscan_chars > self.window_chars {
            return Err(ChunkError::InvalidConfig(format!(
                "backscan_chars ({}) must be <= window_chars ({})",
                self.backscan_chars, self.window_chars
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub segment_index: usize,
    pub species: String,
    pub char_start: usize,
    pub char_end: usize,
    pub est_tokens: usize,
    pub text: String,
}

/// Whitespace-delimited word count.
pub fn estimate_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// End offset for a window whose raw cut is `target`.
///
/// Looks back over `[target - backscan, target)` for the last `.`, `!` or `?`
/// and cuts just after it; without one the hard cut stands. Callers must clamp
/// `target` to the text length.
pub fn find_sentence_boundary(text: &str, target: usize, backscan: usize) -> Result<usize, ChunkError> {
    let chars: Vec<char> = text.chars().collect();
    boundary_in(&chars, target, backscan)
}

fn boundary_in(chars: &[char], target: usize, backscan: usize) -> Result<usize, ChunkError> {
    let len = chars.len();
    if target > len {
        return Err(ChunkError::TargetOutOfRange { target, len });
    }
    if target == len {
        return Ok(len);
    }
    let lo = target.saturating_sub(backscan);
    Ok(chars[lo..target]
        .iter()
        .rposition(|c| TERMINALS.contains(c))
        .map_or(target, |i| lo + i + 1))
}

/// Greedy left-to-right windows; every character lands in at least one chunk.
pub fn chunk_document(doc: &Document, cfg: &ChunkConfig) -> Vec<Chunk> {
    let chars: Vec<char> = doc.text.chars().collect();
    let len = chars.len();
    let mut chunks = Vec::new();
    let mut start = 0usize;

    while start < len {
        let target = start + cfg.window_chars;
        let end = if target >= len {
            len
        } else {
            // backscan <= window keeps the boundary strictly after start.
            boundary_in(&chars, target, cfg.backscan_chars).expect("target is in range")
        };
        let text: String = chars[start..end].iter().collect();
        chunks.push(Chunk {
            doc_id: doc.id.clone(),
            segment_index: chunks.len(),
            species: doc.species.clone(),
            char_start: start,
            char_end: end,
            est_tokens: estimate_tokens(&text),
            text,
        });
        if end == len {
            break;
        }
        start = end.saturating_sub(cfg.overlap_chars).max(start + 1);
    }
    chunks
}

/// Chunk every document; output keeps document order.
pub fn chunk_corpus(docs: &[Document], cfg: &ChunkConfig) -> Vec<Chunk> {
    docs.par_iter()
        .map(|d| chunk_document(d, cfg))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}
