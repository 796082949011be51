//! Plain-text n-gram model archive.
//!
//! ```text
//! ECLM1
//! order 4
//! smoothing witten-bell
//! vocab 3
//! <unk>
//! ...
//! tables 4
//! table 0 1
//! | 4:25 5:18
//! table 1 12
//! 4 | 5:2 6:1
//! ...
//! end
//! ```
//!
//! Each table line is a context (space separated ids, empty for the
//! unigram table), a `|`, then the `id:count` follower pairs in id order.
//! Writing a loaded model reproduces the input byte for byte.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use entcal_core::ngram::{ContextStats, CountTables};
use entcal_core::{NGramModel, Smoothing, TokenId, Vocabulary};

use crate::error::{Error, Result};

pub const MAGIC: &str = "ECLM1";

pub fn write_model<W: Write>(model: &NGramModel, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "order {}", model.order())?;
    writeln!(out, "smoothing {}", model.smoothing().name())?;
    let tokens = model.vocab().tokens();
    writeln!(out, "vocab {}", tokens.len())?;
    for t in tokens {
        writeln!(out, "{t}")?;
    }
    writeln!(out, "tables {}", model.tables().len())?;
    let mut line = String::new();
    for (k, table) in model.tables().iter().enumerate() {
        writeln!(out, "table {k} {}", table.len())?;
        for (ctx, stats) in table {
            line.clear();
            for id in ctx {
                line.push_str(&id.to_string());
                line.push(' ');
            }
            line.push('|');
            for (w, c) in stats.followers() {
                line.push_str(&format!(" {w}:{c}"));
            }
            writeln!(out, "{line}")?;
        }
    }
    writeln!(out, "end")?;
    out.flush()
}

pub fn save_model(model: &NGramModel, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    write_model(model, BufWriter::new(file)).map_err(Error::io(path))
}

pub fn load_model(path: &Path) -> Result<NGramModel> {
    let file = File::open(path).map_err(Error::io(path))?;
    read_model(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::Format {
            what: "model file",
            line: self.line,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(source)) => Err(Error::Io {
                path: "<model>".into(),
                source,
            }),
            None => Err(self.fail("unexpected end of file")),
        }
    }

    /// Reads `key value` and returns value.
    fn field(&mut self, key: &str) -> Result<String> {
        let l = self.next()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => Err(self.fail(format!("expected `{key} <value>`, found `{l}`"))),
        }
    }

    fn number<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse()
            .map_err(|_| self.fail(format!("bad number `{s}`")))
    }
}

pub fn read_model<R: BufRead>(input: R) -> Result<NGramModel> {
    let mut r = Lines {
        inner: input.lines(),
        line: 0,
    };
    let magic = r.next()?;
    if magic != MAGIC {
        return Err(r.fail(format!("expected header {MAGIC}, found `{magic}`")));
    }
    let v = r.field("order")?;
    let order: usize = r.number(&v)?;
    let name = r.field("smoothing")?;
    let smoothing =
        Smoothing::from_name(&name).ok_or_else(|| r.fail(format!("unknown smoothing `{name}`")))?;
    let v = r.field("vocab")?;
    let n: usize = r.number(&v)?;
    let mut tokens = Vec::with_capacity(n);
    for _ in 0..n {
        tokens.push(r.next()?);
    }
    let vocab = Vocabulary::from_tokens(tokens)?;
    let v = r.field("tables")?;
    let n_tables: usize = r.number(&v)?;
    let mut tables: CountTables = Vec::with_capacity(n_tables);
    for k in 0..n_tables {
        let head = r.field("table")?;
        let (idx, len) = head
            .split_once(' ')
            .ok_or_else(|| r.fail("bad table header"))?;
        if r.number::<usize>(idx)? != k {
            return Err(r.fail(format!("expected table {k}")));
        }
        let len: usize = r.number(len)?;
        let mut table = BTreeMap::new();
        for _ in 0..len {
            let l = r.next()?;
            let (ctx, followers) = l.split_once('|').ok_or_else(|| r.fail("missing `|`"))?;
            let ctx = ctx
                .split_whitespace()
                .map(|s| r.number::<TokenId>(s))
                .collect::<Result<Vec<_>>>()?;
            let followers = followers
                .split_whitespace()
                .map(|pair| {
                    let (w, c) = pair.split_once(':').ok_or_else(|| r.fail("bad follower"))?;
                    Ok((r.number::<TokenId>(w)?, r.number::<u64>(c)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let stats = ContextStats::new(followers).map_err(|e| r.fail(e.to_string()))?;
            if table.insert(ctx, stats).is_some() {
                return Err(r.fail("duplicate context"));
            }
        }
        tables.push(table);
    }
    let end = r.next()?;
    if end != "end" {
        return Err(r.fail(format!("expected `end`, found `{end}`")));
    }
    Ok(NGramModel::from_tables(vocab, order, smoothing, tables)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use entcal_core::{build_vocabulary, train_ngram, ModelProvider};

    #[test]
    fn round_trip_is_byte_identical() {
        let corpus = ["the cat sat", "the dog sat down", "a cat ran"];
        let vocab = build_vocabulary(corpus, 1).unwrap();
        let model = train_ngram(corpus, &vocab, 3).unwrap();
        let mut first = Vec::new();
        write_model(&model, &mut first).unwrap();
        let back = read_model(first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_model(&back, &mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(back, model);
        assert_eq!(back.fingerprint(), model.fingerprint());
    }

    #[test]
    fn rejects_bad_header_and_truncation() {
        assert!(matches!(
            read_model("ECLM2\n".as_bytes()),
            Err(Error::Format { line: 1, .. })
        ));
        let corpus = ["a b"];
        let vocab = build_vocabulary(corpus, 1).unwrap();
        let model = train_ngram(corpus, &vocab, 2).unwrap();
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let cut = &buf[..buf.len() - 4];
        assert!(matches!(read_model(cut), Err(Error::Format { .. })));
    }
}
