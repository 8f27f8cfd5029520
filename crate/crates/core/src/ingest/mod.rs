//! Source document extraction and text normalization.

mod docx;
mod markdown;
mod normalize;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use docx::extract_docx;
pub use markdown::strip_markdown;
pub use normalize::normalize_text;

use crate::hashing::short_id;

/// Species label for documents missing from the species map.
pub const UNLABELED: &str = "unlabeled";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("not a zip archive: {0}")]
    NotAZipArchive(String),
    #[error("archive has no {0} part")]
    MissingDocumentPart(String),
    #[error("malformed markup in {part} at byte {position}: {detail}")]
    MalformedMarkup {
        part: String,
        position: u64,
        detail: String,
    },
    #[error("cannot read {path}: {reason}")]
    FileUnreadable { path: String, reason: String },
    #[error("unsupported format: {0:?}")]
    UnsupportedFormat(String),
    #[error("{0} is empty")]
    EmptyFile(String),
    #[error("corpus manifest line {line}: {reason}")]
    BadManifest { line: usize, reason: String },
    #[error("{path}: {source}")]
    InDocument {
        path: String,
        #[source]
        source: Box<IngestError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocFormat {
    Docx,
    PlainText,
    Markdown,
}

impl DocFormat {
    pub fn from_path(path: &str) -> Result<Self, IngestError> {
        let ext = Path::new(path)
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "docx" => Ok(Self::Docx),
            "txt" => Ok(Self::PlainText),
            "md" | "markdown" => Ok(Self::Markdown),
            _ => Err(IngestError::UnsupportedFormat(ext)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RawDocument {
    source_path: String,
    format: DocFormat,
    bytes: Vec<u8>,
}

impl RawDocument {
    /// Format is taken from the path's extension; bytes must be non-empty.
    pub fn new(source_path: impl Into<String>, bytes: Vec<u8>) -> Result<Self, IngestError> {
        let source_path = source_path.into();
        let format = DocFormat::from_path(&source_path)?;
        if bytes.is_empty() {
            return Err(IngestError::EmptyFile(source_path));
        }
        Ok(Self {
            source_path,
            format,
            bytes,
        })
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn format(&self) -> DocFormat {
        self.format
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Format-appropriate extraction, before normalization.
    pub fn extract(&self) -> Result<String, IngestError> {
        match self.format {
            DocFormat::Docx => extract_docx(&self.bytes),
            DocFormat::PlainText => Ok(String::from_utf8_lossy(&self.bytes).into_owned()),
            DocFormat::Markdown => Ok(strip_markdown(&String::from_utf8_lossy(&self.bytes))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub species: String,
    pub text: String,
    pub source_path: String,
    pub char_count: usize,
}

impl Document {
    pub fn from_raw(raw: &RawDocument, species: impl Into<String>) -> Result<Self, IngestError> {
        let text = normalize_text(&raw.extract()?);
        Ok(Self {
            id: document_id(&raw.source_path),
            species: species.into(),
            char_count: text.chars().count(),
            text,
            source_path: raw.source_path.clone(),
        })
    }
}

pub fn document_id(source_path: &str) -> String {
    short_id([source_path])
}

/// Load every path (relative paths resolve against the working directory).
///
/// Documents come back sorted by path string.
pub fn load_corpus(
    paths: &[String],
    species_map: &BTreeMap<String, String>,
) -> Result<Vec<Document>, IngestError> {
    load_corpus_from(None, paths, species_map)
}

/// Like [`load_corpus`], resolving relative paths against `base`. The path
/// spelling given in `paths` is what ends up in `source_path` and the id.
pub fn load_corpus_from(
    base: Option<&Path>,
    paths: &[String],
    species_map: &BTreeMap<String, String>,
) -> Result<Vec<Document>, IngestError> {
    let mut sorted: Vec<&String> = paths.iter().collect();
    sorted.sort();
    sorted.dedup();

    sorted
        .par_iter()
        .map(|path| {
            let resolved = match base {
                Some(b) if Path::new(path.as_str()).is_relative() => b.join(path.as_str()),
                _ => PathBuf::from(path.as_str()),
            };
            DocFormat::from_path(path)?;
            let bytes = std::fs::read(&resolved).map_err(|e| IngestError::FileUnreadable {
                path: path.to_string(),
                reason: e.to_string(),
            })?;
            let raw = RawDocument::new(path.as_str(), bytes)?;
            let species = species_map
                .get(path.as_str())
                .map(String::as_str)
                .unwrap_or(UNLABELED);
            Document::from_raw(&raw, species).map_err(|e| match e {
                IngestError::NotAZipArchive(_)
                | IngestError::MissingDocumentPart(_)
                | IngestError::MalformedMarkup { .. } => IngestError::InDocument {
                    path: path.to_string(),
                    source: Box::new(e),
                },
                other => other,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub species: String,
}

/// Parse a corpus manifest: one `path<TAB>species` record per line. Blank
/// lines and `#` comments are skipped; a missing label means [`UNLABELED`].
pub fn parse_manifest(content: &str) -> Result<Vec<ManifestEntry>, IngestError> {
    let mut entries = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(2, '\t');
        let path = fields.next().unwrap_or_default().trim();
        if path.is_empty() {
            return Err(IngestError::BadManifest {
                line: i + 1,
                reason: "empty path".into(),
            });
        }
        let species = fields
            .next()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .unwrap_or(UNLABELED);
        entries.push(ManifestEntry {
            path: path.to_string(),
            species: species.to_string(),
        });
    }
    Ok(entries)
}

/// Read a manifest file and load the corpus it declares.
pub fn load_manifest_corpus(manifest_path: &Path) -> Result<Vec<Document>, IngestError> {
    let content =
        std::fs::read_to_string(manifest_path).map_err(|e| IngestError::FileUnreadable {
            path: manifest_path.display().to_string(),
            reason: e.to_string(),
        })?;
    let entries = parse_manifest(&content)?;
    let paths: Vec<String> = entries.iter().map(|e| e.path.clone()).collect();
    let species: BTreeMap<String, String> = entries
        .into_iter()
        .map(|e| (e.path, e.species))
        .collect();
    load_corpus_from(manifest_path.parent(), &paths, &species)
}
