use std::io::{Cursor, Read};

use quick_xml::events::Event;
use quick_xml::Reader;
use zip::ZipArchive;

use super::IngestError;

pub(crate) const DOCUMENT_PART: &str = "word/document.xml";

/// Body text of a `.docx` archive.
///
/// Runs are concatenated in document order and each non-empty paragraph
/// becomes one line. Table rows are flattened to a single line with cell
/// texts joined by `"; "`. Headers, footers and footnotes live in other
/// parts and are not read.
pub fn extract_docx(bytes: &[u8]) -> Result<String, IngestError> {
    let mut archive = ZipArchive::new(Cursor::new(bytes))
        .map_err(|e| IngestError::NotAZipArchive(e.to_string()))?;
    let mut part = archive
        .by_name(DOCUMENT_PART)
        .map_err(|_| IngestError::MissingDocumentPart(DOCUMENT_PART.to_string()))?;
    let mut xml = Vec::new();
    part.read_to_end(&mut xml)
        .map_err(|e| IngestError::NotAZipArchive(format!("{DOCUMENT_PART}: {e}")))?;
    extract_document_xml(&xml)
}

#[derive(Default)]
struct TableRow {
    cells: Vec<String>,
    cell: Option<String>,
}

#[derive(Default)]
struct BodyWalker {
    lines: Vec<String>,
    paragraph: Option<String>,
    in_text: bool,
    /// Rows of the open tables, innermost last.
    rows: Vec<Option<TableRow>>,
}

impl BodyWalker {
    fn in_table(&self) -> bool {
        !self.rows.is_empty()
    }

    fn push_text(&mut self, text: &str) {
        if let Some(p) = self.paragraph.as_mut() {
            p.push_str(text);
        }
    }

    fn start(&mut self, name: &[u8]) {
        match name {
            b"w:p" => self.paragraph = Some(String::new()),
            b"w:t" => self.in_text = true,
            b"w:tbl" => self.rows.push(None),
            b"w:tr" if self.rows.len() == 1 => {
                self.rows[0] = Some(TableRow::default());
            }
            b"w:tc" if self.rows.len() == 1 => {
                if let Some(row) = self.rows[0].as_mut() {
                    row.cell = Some(String::new());
                }
            }
            _ => {}
        }
    }

    fn empty(&mut self, name: &[u8]) {
        match name {
            b"w:tab" => self.push_text("\t"),
            b"w:br" | b"w:cr" => self.push_text("\n"),
            // Self-closing paragraph: nothing to emit.
            _ => {}
        }
    }

    fn end(&mut self, name: &[u8]) {
        match name {
            b"w:t" => self.in_text = false,
            b"w:p" => {
                let text = self.paragraph.take().unwrap_or_default();
                if text.trim().is_empty() {
                    return;
                }
                if self.in_table() {
                    // Cell paragraphs (and nested tables) fold into the outer cell.
                    if let Some(cell) = self
                        .rows
                        .first_mut()
                        .and_then(|r| r.as_mut())
                        .and_then(|r| r.cell.as_mut())
                    {
                        if !cell.is_empty() {
                            cell.push(' ');
                        }
                        cell.push_str(text.trim());
                    }
                } else {
                    self.lines.push(text);
                }
            }
            b"w:tc" if self.rows.len() == 1 => {
                if let Some(row) = self.rows[0].as_mut() {
                    let cell = row.cell.take().unwrap_or_default();
                    row.cells.push(cell);
                }
            }
            b"w:tr" if self.rows.len() == 1 => {
                if let Some(row) = self.rows[0].take() {
                    let cells: Vec<&str> = row
                        .cells
                        .iter()
                        .map(|c| c.as_str())
                        .filter(|c| !c.trim().is_empty())
                        .collect();
                    if !cells.is_empty() {
                        self.lines.push(cells.join("; "));
                    }
                }
            }
            b"w:tbl" => {
                self.rows.pop();
            }
            _ => {}
        }
    }
}

pub(crate) fn extract_document_xml(xml: &[u8]) -> Result<String, IngestError> {
    let mut reader = Reader::from_reader(xml);
    let mut walker = BodyWalker::default();
    let mut depth = 0usize;
    let mut buf = Vec::new();

    let malformed = |pos: u64, detail: String| IngestError::MalformedMarkup {
        part: DOCUMENT_PART.to_string(),
        position: pos,
        detail,
    };

    loop {
        let pos = reader.buffer_position();
        match reader.read_event_into(&mut buf) {
            Ok(Event::Start(e)) => {
                depth += 1;
                walker.start(e.name().as_ref());
            }
            Ok(Event::Empty(e)) => walker.empty(e.name().as_ref()),
            Ok(Event::End(e)) => {
                depth = depth.saturating_sub(1);
                walker.end(e.name().as_ref());
            }
            Ok(Event::Text(t)) if walker.in_text => {
                let text = t
                    .unescape()
                    .map_err(|e| malformed(pos, format!("bad text in <w:t>: {e}")))?;
                walker.push_text(&text);
            }
            Ok(Event::CData(t)) if walker.in_text => {
                let text = std::str::from_utf8(&t)
                    .map_err(|e| malformed(pos, format!("non-UTF-8 CDATA: {e}")))?
                    .to_string();
                walker.push_text(&text);
            }
            Ok(Event::Eof) => break,
            Ok(_) => {}
            Err(e) => return Err(malformed(reader.error_position(), e.to_string())),
        }
        buf.clear();
    }
    if depth != 0 {
        return Err(malformed(
            reader.buffer_position(),
            format!("{depth} element(s) left unclosed at end of part"),
        ));
    }
    Ok(walker.lines.join("\n"))
}

#[cfg(test)]
pub(crate) mod testutil {
    use std::io::Write;

    use zip::write::SimpleFileOptions;
    use zip::ZipWriter;

    pub const NS: &str = r#"xmlns:w="http://schemas.openxmlformats.org/wordprocessingml/2006/main""#;

    pub fn document_xml(body: &str) -> String {
        format!(
            r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?><w:document {NS}><w:body>{body}</w:body></w:document>"#
        )
    }

    pub fn zip_parts(parts: &[(&str, &str)]) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut zip = ZipWriter::new(std::io::Cursor::new(&mut out));
            for (name, content) in parts {
                zip.start_file(*name, SimpleFileOptions::default()).unwrap();
                zip.write_all(content.as_bytes()).unwrap();
            }
            zip.finish().unwrap();
        }
        out
    }

    pub fn docx(body: &str) -> Vec<u8> {
        zip_parts(&[
            ("[Content_Types].xml", "<Types/>"),
            ("word/document.xml", &document_xml(body)),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn runs_concatenate() {
        let bytes = docx("<w:p><w:r><w:t>Hel</w:t></w:r><w:r><w:t>lo</w:t></w:r></w:p>");
        assert_eq!(extract_docx(&bytes).unwrap(), "Hello");
    }

    #[test]
    fn paragraphs_become_lines() {
        let bytes = docx("<w:p><w:r><w:t>A.</w:t></w:r></w:p><w:p/><w:p><w:r><w:t>B.</w:t></w:r></w:p>");
        assert_eq!(extract_docx(&bytes).unwrap(), "A.\nB.");
    }

    #[test]
    fn entities_tabs_and_preserved_space() {
        let bytes = docx(
            r#"<w:p><w:r><w:t xml:space="preserve">Ash &amp; elm </w:t><w:tab/><w:t>hosts</w:t></w:r></w:p>"#,
        );
        assert_eq!(extract_docx(&bytes).unwrap(), "Ash & elm \thosts");
    }

    #[test]
    fn deleted_and_field_text_skipped() {
        let bytes = docx(
            "<w:p><w:r><w:instrText>PAGE</w:instrText></w:r><w:del><w:r><w:delText>old</w:delText></w:r></w:del><w:r><w:t>new</w:t></w:r></w:p>",
        );
        assert_eq!(extract_docx(&bytes).unwrap(), "new");
    }

    #[test]
    fn tables_flatten_row_by_row() {
        let body = "<w:p><w:r><w:t>Hosts:</w:t></w:r></w:p>\
            <w:tbl><w:tr><w:tc><w:p><w:r><w:t>Species</w:t></w:r></w:p></w:tc><w:tc><w:p><w:r><w:t>Host</w:t></w:r></w:p></w:tc></w:tr>\
            <w:tr><w:tc><w:p><w:r><w:t>EAB</w:t></w:r></w:p></w:tc><w:tc><w:p><w:r><w:t>Ash</w:t></w:r></w:p><w:p><w:r><w:t>trees</w:t></w:r></w:p></w:tc></w:tr></w:tbl>\
            <w:p><w:r><w:t>After.</w:t></w:r></w:p>";
        assert_eq!(
            extract_docx(&docx(body)).unwrap(),
            "Hosts:\nSpecies; Host\nEAB; Ash trees\nAfter."
        );
    }

    #[test]
    fn truncated_archive_is_not_a_zip() {
        let bytes = docx("<w:p><w:r><w:t>x</w:t></w:r></w:p>");
        let cut = &bytes[..bytes.len() - 10];
        assert!(matches!(extract_docx(cut), Err(IngestError::NotAZipArchive(_))));
        assert!(matches!(extract_docx(b"plain text"), Err(IngestError::NotAZipArchive(_))));
    }

    #[test]
    fn missing_document_part() {
        let bytes = zip_parts(&[("word/styles.xml", "<w:styles/>")]);
        match extract_docx(&bytes) {
            Err(IngestError::MissingDocumentPart(p)) => assert_eq!(p, "word/document.xml"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_markup_is_reported() {
        let bytes = zip_parts(&[("word/document.xml", "<w:document><w:body><w:p></w:r></w:body>")]);
        assert!(matches!(
            extract_docx(&bytes),
            Err(IngestError::MalformedMarkup { .. })
        ));
        let unclosed = zip_parts(&[("word/document.xml", "<w:document><w:body><w:p>")]);
        assert!(matches!(
            extract_docx(&unclosed),
            Err(IngestError::MalformedMarkup { .. })
        ));
    }

    #[test]
    fn deterministic() {
        let bytes = docx("<w:p><w:r><w:t>same</w:t></w:r></w:p>");
        assert_eq!(extract_docx(&bytes).unwrap(), extract_docx(&bytes).unwrap());
    }
}
