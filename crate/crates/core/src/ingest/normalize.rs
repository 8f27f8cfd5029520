/// Zero-width and format characters that carry no text.
fn is_invisible_artifact(c: char) -> bool {
    matches!(
        c,
        '\u{00ad}' | '\u{200b}' | '\u{200c}' | '\u{200d}' | '\u{2060}' | '\u{feff}'
    )
}

/// Collapse whitespace, drop control characters and blank lines.
///
/// Within a line every whitespace run becomes one space; empty lines vanish so
/// paragraphs end up separated by exactly one `\n`. Letters, digits and
/// punctuation pass through untouched. The function is idempotent.
pub fn normalize_text(raw_text: &str) -> String {
    let mut out = String::with_capacity(raw_text.len());
    let mut line = String::new();
    let mut pending_space = false;

    let flush_line = |line: &mut String, out: &mut String| {
        if !line.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(line);
            line.clear();
        }
    };

    let mut chars = raw_text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\n' => {
                pending_space = false;
                flush_line(&mut line, &mut out);
            }
            '\r' if chars.peek() == Some(&'\n') => {}
            // Form feed and vertical tab are dropped, not spaced.
            c if c.is_control() && c != '\t' && c != '\r' => {}
            c if is_invisible_artifact(c) => {}
            c if c.is_whitespace() => {
                // Tabs, lone carriage returns, NBSP and friends.
                if !line.is_empty() {
                    pending_space = true;
                }
            }
            c => {
                if pending_space {
                    line.push(' ');
                    pending_space = false;
                }
                line.push(c);
            }
        }
    }
    flush_line(&mut line, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn collapses_inline_whitespace_and_blank_lines() {
        assert_eq!(normalize_text("a \t b\n\nc."), "a b\nc.");
    }

    #[test]
    fn removes_form_feed() {
        assert_eq!(normalize_text("Hello\x0cWorld"), "HelloWorld");
    }

    #[test]
    fn crlf_and_lone_cr() {
        assert_eq!(normalize_text("one\r\ntwo\rthree"), "one\ntwo three");
    }

    #[test]
    fn trims_both_ends() {
        assert_eq!(normalize_text("  \n\n  x y  \n\t"), "x y");
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text(" \t\r\n "), "");
    }

    #[test]
    fn strips_zero_width_and_nbsp() {
        assert_eq!(normalize_text("a\u{00a0}\u{00a0}b\u{200b}c\u{feff}"), "a bc");
    }

    fn kept(c: char) -> bool {
        c.is_alphanumeric() || ".!?,;:".contains(c)
    }

    proptest! {
        #[test]
        fn idempotent(s in "[ a-zA-Z.!?\\t\\r\\n\\x0b\\x0c\\x00\\u{a0}\\u{200b}é]{0,80}") {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once);
        }

        #[test]
        fn document_invariants_hold(s in "\\PC{0,60}|[ \\t\\r\\n\\x01-\\x1fa-z.]{0,60}") {
            let out = normalize_text(&s);
            prop_assert!(!out.chars().any(|c| c.is_control() && c != '\n'));
            prop_assert!(!out.contains("  "));
            prop_assert!(!out.contains("\n\n"));
            prop_assert_eq!(out.trim(), out.as_str());
        }

        #[test]
        fn never_drops_text_characters(s in "[ a-z0-9.!?,;:\\t\\n\\r]{0,80}") {
            let before: String = s.chars().filter(|&c| kept(c)).collect();
            let after: String = normalize_text(&s).chars().filter(|&c| kept(c)).collect();
            prop_assert_eq!(before, after);
        }
    }
}
