use std::fmt::Write as _;
use std::path::Path;

use super::{Annotation, Error, Sentence, TagSequence, Token};

pub const KEPT: &str = "KEPT";
pub const DROPPED: &str = "DROPPED";

pub fn read_compression_tsv(path: impl AsRef<Path>) -> Result<Vec<Sentence>, Error> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_compression_tsv(&text)
}

/// Parses `FORM<TAB>KEPT|DROPPED` lines with blank-line sentence breaks and
/// optional `# lang = xx` headers. Sentences given as bare forms are read
/// without annotation.
pub fn parse_compression_tsv(text: &str) -> Result<Vec<Sentence>, Error> {
    parse_tagged_tsv(text, Some(&[KEPT, DROPPED]))
}

/// Reads the same layout with an arbitrary tag set.
pub fn read_tagged_tsv(path: impl AsRef<Path>) -> Result<Vec<Sentence>, Error> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tagged_tsv(&text, None)
}

/// `FORM<TAB>TAG` reader; with `allowed` set, other tags are rejected.
pub fn parse_tagged_tsv(text: &str, allowed: Option<&[&str]>) -> Result<Vec<Sentence>, Error> {
    struct Pending {
        lang: Option<String>,
        header_line: usize,
        forms: Vec<String>,
        labels: Vec<Option<String>>,
    }

    fn flush(p: Pending, out: &mut Vec<Sentence>) -> Result<(), Error> {
        if p.forms.is_empty() {
            if p.lang.is_some() {
                return Err(Error::EmptySentence { line: p.header_line });
            }
            return Ok(());
        }
        let tokens = p.forms.into_iter().map(|f| Token::new(f, "_")).collect();
        let annotation = if p.labels.iter().all(Option::is_none) {
            Annotation::None
        } else {
            Annotation::Tags(TagSequence::from_names(
                p.labels.into_iter().map(Option::unwrap_or_default).collect(),
            ))
        };
        let mut s = Sentence::new(tokens, annotation);
        s.lang_code = p.lang;
        out.push(s);
        Ok(())
    }

    let empty = |line| Pending {
        lang: None,
        header_line: line,
        forms: Vec::new(),
        labels: Vec::new(),
    };
    let mut out = Vec::new();
    let mut cur = empty(0);
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(std::mem::replace(&mut cur, empty(line_no)), &mut out)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "lang" {
                    if !cur.forms.is_empty() {
                        flush(std::mem::replace(&mut cur, empty(line_no)), &mut out)?;
                    }
                    cur.lang = Some(value.trim().to_string());
                    cur.header_line = line_no;
                }
            }
            continue;
        }
        let mut cols = line.split('\t');
        let form = cols.next().unwrap_or_default().to_string();
        let label = cols.next().map(str::to_string);
        if cols.next().is_some() {
            return Err(Error::ColumnCount {
                line: line_no,
                expected: 2,
                found: line.split('\t').count(),
            });
        }
        if let (Some(label), Some(allowed)) = (label.as_deref(), allowed) {
            if !allowed.contains(&label) {
                return Err(Error::UnknownLabel {
                    line: line_no,
                    label: label.to_string(),
                });
            }
        }
        if label.is_none() && cur.labels.iter().any(Option::is_some)
            || label.is_some() && cur.labels.iter().any(Option::is_none)
        {
            return Err(Error::Malformed {
                line: line_no,
                message: "sentence mixes labeled and unlabeled tokens".into(),
            });
        }
        cur.forms.push(form);
        cur.labels.push(label);
    }
    flush(cur, &mut out)?;
    Ok(out)
}

pub fn write_compression_tsv(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        if let Some(lang) = &s.lang_code {
            let _ = writeln!(out, "# lang = {lang}");
        }
        for (i, t) in s.tokens.iter().enumerate() {
            match &s.annotation {
                Annotation::Tags(tags) => {
                    let _ = writeln!(out, "{}\t{}", t.form, tags.names[i]);
                }
                _ => {
                    let _ = writeln!(out, "{}", t.form);
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Percentage of tokens tagged `KEPT`.
pub fn compression_rate(corpus: &[Sentence]) -> Result<f64, Error> {
    let mut kept = 0usize;
    let mut total = 0usize;
    for s in corpus {
        let tags = s.tags().ok_or(Error::Untagged)?;
        kept += tags.names.iter().filter(|n| *n == KEPT).count();
        total += tags.names.len();
    }
    if total == 0 {
        return Err(Error::Untagged);
    }
    Ok(100.0 * kept as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sentence() {
        let s = parse_compression_tsv("a\tKEPT\nb\tDROPPED\n\n").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tags().unwrap().names, vec![KEPT, DROPPED]);
    }

    #[test]
    fn trailing_blank_lines() {
        let s = parse_compression_tsv("a\tKEPT\n\n\n\n").unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn language_header() {
        let s = parse_compression_tsv("# lang = fr\nle\tKEPT\n\n# lang = es\nel\tDROPPED\n").unwrap();
        assert_eq!(s[0].lang_code.as_deref(), Some("fr"));
        assert_eq!(s[1].lang_code.as_deref(), Some("es"));
    }

    #[test]
    fn unknown_label() {
        let err = parse_compression_tsv("a\tMAYBE\n").unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { line: 1, .. }));
    }

    #[test]
    fn header_without_tokens_is_empty_sentence() {
        let err = parse_compression_tsv("# lang = fr\n\na\tKEPT\n").unwrap_err();
        assert!(matches!(err, Error::EmptySentence { line: 1 }));
    }

    #[test]
    fn rate_of_ten_tokens_three_kept() {
        let mut text = String::new();
        for i in 0..10 {
            text.push_str(&format!("w{i}\t{}\n", if i < 3 { KEPT } else { DROPPED }));
            if i == 4 {
                text.push('\n');
            }
        }
        let s = parse_compression_tsv(&text).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(compression_rate(&s).unwrap(), 30.0);
    }

    #[test]
    fn rate_extremes() {
        let all = parse_compression_tsv("a\tKEPT\nb\tKEPT\n").unwrap();
        assert_eq!(compression_rate(&all).unwrap(), 100.0);
        let none = parse_compression_tsv("a\tDROPPED\n").unwrap();
        assert_eq!(compression_rate(&none).unwrap(), 0.0);
        let raw = parse_compression_tsv("a\nb\n").unwrap();
        assert!(matches!(compression_rate(&raw), Err(Error::Untagged)));
    }

    #[test]
    fn write_then_read_round_trips() {
        let text = "# lang = es\nel\tKEPT\ngato\tDROPPED\n\nx\tKEPT\n\n";
        let s = parse_compression_tsv(text).unwrap();
        assert_eq!(write_compression_tsv(&s), text);
    }
}
