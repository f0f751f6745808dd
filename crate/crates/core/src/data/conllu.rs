use std::fmt::Write as _;
use std::path::Path;

use super::{Annotation, Error, LabeledTree, Sentence, Token};
use crate::parsing::DependencyTree;

/// Reads a CoNLL-U file.
pub fn read_conllu(path: impl AsRef<Path>) -> Result<Vec<Sentence>, Error> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conllu(&text)
}

/// Parses CoNLL-U text, keeping ID, FORM, UPOS, HEAD and DEPREL.
///
/// Multiword ranges (`1-2`) and empty nodes (`1.1`) are dropped. A sentence
/// whose HEAD column is `_` throughout is read without annotation.
pub fn parse_conllu(text: &str) -> Result<Vec<Sentence>, Error> {
    let mut sentences = Vec::new();
    let mut rows: Vec<(usize, Token, String, String)> = Vec::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !rows.is_empty() {
                sentences.push(finish(std::mem::take(&mut rows))?);
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::ColumnCount {
                line: line_no,
                expected: 10,
                found: cols.len(),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let token = Token::new(cols[1], cols[3]);
        rows.push((line_no, token, cols[6].to_string(), cols[7].to_string()));
    }
    if !rows.is_empty() {
        sentences.push(finish(rows)?);
    }
    Ok(sentences)
}

fn finish(rows: Vec<(usize, Token, String, String)>) -> Result<Sentence, Error> {
    let unannotated = rows.iter().all(|(_, _, head, _)| head == "_");
    let mut tokens = Vec::with_capacity(rows.len());
    let mut heads = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (line, token, head, deprel) in rows {
        if !unannotated {
            let h: usize = head.parse().map_err(|_| Error::InvalidHead {
                line,
                value: head.clone(),
            })?;
            heads.push(h);
            labels.push(deprel);
        }
        tokens.push(token);
    }
    let annotation = if unannotated {
        Annotation::None
    } else {
        let n = heads.len();
        Annotation::Tree(LabeledTree {
            tree: DependencyTree::new(heads, vec![0; n]),
            label_names: labels,
        })
    };
    Ok(Sentence::new(tokens, annotation))
}

/// Writes sentences as CoNLL-U. Unused columns are `_`.
pub fn write_conllu(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for (i, t) in s.tokens.iter().enumerate() {
            let (head, rel) = match &s.annotation {
                Annotation::Tree(tree) => (tree.tree.heads[i].to_string(), tree.label_names[i].as_str()),
                _ => ("_".to_string(), "_"),
            };
            let upos = if t.upos.is_empty() { "_" } else { &t.upos };
            let _ = writeln!(out, "{}\t{}\t_\t{}\t_\t_\t{}\t{}\t_\t_", i + 1, t.form, upos, head, rel);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_token_sentence() {
        let text = "1\ta\t_\t_\t_\t_\t2\tdep\t_\t_\n2\tb\t_\t_\t_\t_\t0\troot\t_\t_\n";
        let s = parse_conllu(text).unwrap();
        assert_eq!(s.len(), 1);
        let Annotation::Tree(tree) = &s[0].annotation else {
            panic!("expected tree")
        };
        assert_eq!(tree.tree.heads, vec![2, 0]);
        assert_eq!(tree.label_names, vec!["dep", "root"]);
    }

    #[test]
    fn comments_and_blanks_only() {
        assert!(parse_conllu("# sent_id = 1\n\n# text = x\n\n").unwrap().is_empty());
    }

    #[test]
    fn multiword_and_empty_nodes_are_dropped() {
        let text = "# text = du x\n1-2\tdu\t_\t_\t_\t_\t_\t_\t_\t_\n\
                    1\tde\t_\tADP\t_\t_\t2\tcase\t_\t_\n\
                    2\tle\t_\tDET\t_\t_\t0\troot\t_\t_\n\
                    2.1\tx\t_\t_\t_\t_\t_\t_\t_\t_\n\n";
        let s = parse_conllu(text).unwrap();
        assert_eq!(s[0].len(), 2);
        assert_eq!(s[0].tokens[0].form, "de");
        assert_eq!(s[0].tokens[1].upos, "DET");
    }

    #[test]
    fn column_count_error_reports_line() {
        let err = parse_conllu("# c\n1\ta\t_\n").unwrap_err();
        assert!(matches!(err, Error::ColumnCount { line: 2, found: 3, .. }), "{err}");
    }

    #[test]
    fn non_integer_head() {
        let text = "1\ta\t_\t_\t_\t_\tx\tdep\t_\t_\n2\tb\t_\t_\t_\t_\t0\troot\t_\t_\n";
        assert!(matches!(parse_conllu(text), Err(Error::InvalidHead { line: 1, .. })));
    }

    #[test]
    fn write_then_read_round_trips() {
        let text = "1\ta\t_\tNOUN\t_\t_\t2\tdep\t_\t_\n2\tb\t_\tVERB\t_\t_\t0\troot\t_\t_\n\n\
                    1\tc\t_\tX\t_\t_\t0\troot\t_\t_\n\n";
        let s = parse_conllu(text).unwrap();
        assert_eq!(write_conllu(&s), text);
        assert_eq!(parse_conllu(&write_conllu(&s)).unwrap(), s);
    }
}
