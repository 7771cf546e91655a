//! Minimal CoNLL-U reader: token forms, UPOS, multi-word tokens, spacing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{MultiwordToken, TaggedDocument, TaggedToken, Upos};

const COLUMNS: usize = 10;

pub fn parse_conllu(path: impl AsRef<Path>) -> Result<Vec<TaggedDocument>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conllu_str(&text)
}

fn space_after(misc: &str) -> bool {
    !misc.split('|').any(|f| f == "SpaceAfter=No")
}

fn comment_value<'a>(comment: &'a str, key: &str) -> Option<&'a str> {
    let rest = comment.trim_start_matches('#').trim_start();
    let rest = rest.strip_prefix(key)?.trim_start();
    let rest = rest.strip_prefix('=')?;
    Some(rest.trim())
}

/// Parse CoNLL-U text into documents split at `# newdoc` comments.
///
/// Optional `# author_id = …` and `# timestamp = …` comments following a
/// `# newdoc` line attach metadata to that document.
pub fn parse_conllu_str(text: &str) -> Result<Vec<TaggedDocument>> {
    let mut docs: Vec<TaggedDocument> = Vec::new();
    // Token range still expected to belong to the pending multi-word token.
    let mut pending_mwt: Option<(u32, u32, usize)> = None;

    let current = |docs: &mut Vec<TaggedDocument>| -> usize {
        if docs.is_empty() {
            docs.push(TaggedDocument::new("doc-1"));
        }
        docs.len() - 1
    };

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            pending_mwt = None;
            continue;
        }
        if line.starts_with('#') {
            if let Some(id) = comment_value(line, "newdoc id") {
                docs.push(TaggedDocument::new(id));
            } else if line.trim_start_matches('#').trim() == "newdoc" {
                let n = docs.len() + 1;
                docs.push(TaggedDocument::new(format!("doc-{n}")));
            } else if let Some(author) = comment_value(line, "author_id") {
                let d = current(&mut docs);
                docs[d].author_id = Some(author.to_string());
            } else if let Some(ts) = comment_value(line, "timestamp") {
                let d = current(&mut docs);
                docs[d].timestamp = ts
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("bad timestamp {ts:?}")))?;
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != COLUMNS {
            return Err(Error::parse(
                lineno,
                format!(
                    "expected {COLUMNS} tab-separated columns, found {}",
                    cols.len()
                ),
            ));
        }
        let (id, form, upos, misc) = (cols[0], cols[1], cols[3], cols[9]);
        if form.is_empty() {
            return Err(Error::parse(lineno, "empty FORM"));
        }
        let d = current(&mut docs);
        let doc = &mut docs[d];

        if let Some((start, end)) = id.split_once('-') {
            let start: u32 = start
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad range id {id:?}")))?;
            let end: u32 = end
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad range id {id:?}")))?;
            if end < start {
                return Err(Error::parse(lineno, format!("bad range id {id:?}")));
            }
            doc.multiword.push(MultiwordToken {
                first: doc.tokens.len(),
                last: doc.tokens.len() + (end - start) as usize,
                surface: form.to_string(),
                space_after: space_after(misc),
            });
            pending_mwt = Some((start, end, doc.multiword.len() - 1));
            continue;
        }
        if id.contains('.') {
            // empty node of an enhanced graph; carries no surface token
            continue;
        }
        let num: u32 = id
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad token id {id:?}")))?;
        let mwt_group = match pending_mwt {
            Some((start, end, _)) if (start..=end).contains(&num) => {
                if num == end {
                    pending_mwt = None;
                }
                Some(start)
            }
            _ => None,
        };
        doc.tokens.push(TaggedToken {
            surface: form.to_string(),
            upos: Upos::parse(upos),
            mwt_group,
            space_after: space_after(misc),
        });
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, form: &str, upos: &str, misc: &str) -> String {
        format!("{id}\t{form}\t_\t{upos}\t_\t_\t_\t_\t_\t{misc}\n")
    }

    #[test]
    fn empty_input() {
        assert!(parse_conllu_str("").unwrap().is_empty());
    }

    #[test]
    fn two_tokens() {
        let src = format!(
            "# newdoc id = d1\n# text = Hold me\n{}{}",
            row("1", "Hold", "VERB", "_"),
            row("2", "me", "PRON", "SpaceAfter=No")
        );
        let docs = parse_conllu_str(&src).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].doc_id, "d1");
        assert_eq!(docs[0].tokens.len(), 2);
        assert_eq!(docs[0].tokens[0].upos, Upos::Verb);
        assert!(!docs[0].tokens[1].space_after);
    }

    #[test]
    fn multiword_tokens_share_group() {
        let src = format!(
            "# newdoc id = d\n{}{}{}{}{}",
            row("1", "I", "PRON", "_"),
            row("2", "wanna", "_", "_").replace("2\twanna", "2-3\twanna"),
            row("2", "wan", "VERB", "_"),
            row("3", "na", "PART", "_"),
            row("4", "go", "VERB", "_"),
        );
        let docs = parse_conllu_str(&src).unwrap();
        let t = &docs[0].tokens;
        assert_eq!(t.len(), 4);
        assert_eq!((t[1].mwt_group, t[2].mwt_group), (Some(2), Some(2)));
        assert_eq!(t[3].mwt_group, None);
        assert_eq!(docs[0].multiword[0].first, 1);
        assert_eq!(docs[0].multiword[0].last, 2);
        assert_eq!(docs[0].detokenize(), "I wanna go");
    }

    #[test]
    fn column_count_error_has_line() {
        let src = "# newdoc id = d\n1\tHold\t_\tVERB\n";
        match parse_conllu_str(src) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_upos_and_metadata() {
        let src = format!(
            "# newdoc id = d\n# author_id = ann\n# timestamp = 42\n{}",
            row("1", "zzz", "FOO", "_")
        );
        let docs = parse_conllu_str(&src).unwrap();
        assert_eq!(docs[0].tokens[0].upos, Upos::Unknown);
        assert_eq!(docs[0].author_id.as_deref(), Some("ann"));
        assert_eq!(docs[0].timestamp, 42);
    }
}
