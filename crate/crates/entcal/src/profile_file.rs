//! Plain-text stable entropy profile.
//!
//! ```text
//! ECPROF1
//! U 5
//! horizon 64
//! model-hash 3f2a9c0d11e4b786
//! corpus-id corpus.txt
//! t<TAB>mu<TAB>sigma<TAB>count
//! 0<TAB>4.812345678<TAB>0.731234567<TAB>240
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use entcal_core::StableEntropyProfile;

use crate::error::{Error, Result};

pub const MAGIC: &str = "ECPROF1";
const COLUMNS: &str = "t\tmu\tsigma\tcount";

pub fn write_profile<W: Write>(p: &StableEntropyProfile, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "U {}", p.window)?;
    writeln!(out, "horizon {}", p.horizon())?;
    writeln!(out, "model-hash {:016x}", p.model_hash)?;
    writeln!(out, "corpus-id {}", p.corpus_id)?;
    writeln!(out, "{COLUMNS}")?;
    for t in 0..p.mu.len() {
        writeln!(
            out,
            "{t}\t{:.9}\t{:.9}\t{}",
            p.mu[t], p.sigma[t], p.count[t]
        )?;
    }
    out.flush()
}

pub fn save_profile(p: &StableEntropyProfile, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    write_profile(p, BufWriter::new(file)).map_err(Error::io(path))
}

pub fn load_profile(path: &Path) -> Result<StableEntropyProfile> {
    let file = File::open(path).map_err(Error::io(path))?;
    let mut text = String::new();
    std::io::Read::read_to_string(&mut BufReader::new(file), &mut text).map_err(Error::io(path))?;
    parse_profile(&text)
}

pub fn read_profile<R: BufRead>(mut input: R) -> Result<StableEntropyProfile> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|source| Error::Io {
            path: "<profile>".into(),
            source,
        })?;
    parse_profile(&text)
}

fn parse_profile(text: &str) -> Result<StableEntropyProfile> {
    let fail = |line: usize, msg: String| Error::Format {
        what: "profile file",
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = || {
        lines
            .next()
            .ok_or_else(|| fail(0, "unexpected end of file".into()))
    };

    let (n, magic) = next()?;
    if magic != MAGIC {
        return Err(fail(n, format!("expected header {MAGIC}, found `{magic}`")));
    }
    let mut field = |key: &str| -> Result<(usize, String)> {
        let (n, l) = next()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok((n, v.to_string())),
            _ => Err(fail(n, format!("expected `{key} <value>`"))),
        }
    };
    let (n, window) = field("U")?;
    let window: usize = window.parse().map_err(|_| fail(n, "bad U".into()))?;
    let (n, horizon) = field("horizon")?;
    let horizon: usize = horizon.parse().map_err(|_| fail(n, "bad horizon".into()))?;
    let (n, hash) = field("model-hash")?;
    let model_hash =
        u64::from_str_radix(&hash, 16).map_err(|_| fail(n, "bad model-hash".into()))?;
    let (_, corpus_id) = field("corpus-id")?;
    let (n, cols) = next()?;
    if cols != COLUMNS {
        return Err(fail(n, format!("expected column header `{COLUMNS}`")));
    }

    let (mut mu, mut sigma, mut count) = (Vec::new(), Vec::new(), Vec::new());
    for (n, l) in lines {
        if l.is_empty() {
            continue;
        }
        let cells: Vec<&str> = l.split('\t').collect();
        if cells.len() != 4 || cells[0] != mu.len().to_string() {
            return Err(fail(n, format!("expected row for t={}", mu.len())));
        }
        let bad = |_| fail(n, "bad number".into());
        mu.push(cells[1].parse::<f64>().map_err(bad)?);
        sigma.push(cells[2].parse::<f64>().map_err(bad)?);
        count.push(
            cells[3]
                .parse::<u64>()
                .map_err(|_| fail(n, "bad count".into()))?,
        );
    }
    if mu.len() != horizon + 1 {
        return Err(fail(
            0,
            format!("expected {} rows, found {}", horizon + 1, mu.len()),
        ));
    }
    Ok(StableEntropyProfile::new(
        mu, sigma, count, window, model_hash, corpus_id,
    )?)
}
