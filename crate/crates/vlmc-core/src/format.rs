//! Plain-text file formats.
//!
//! Tree files: the first line lists the alphabet labels separated by
//! spaces; an optional `!renewal` directive preserves a closed-form family;
//! every following line is one context record `<context> <p_0> <p_1> ...`
//! with probabilities printed as `{:.16e}` (17 significant digits, so f64
//! values round-trip exactly). Contexts are rendered in time order,
//! concatenated for single-character alphabets and comma-joined otherwise,
//! and records appear in sorted context order so output is byte-stable.
//!
//! Sample files: one line holding the whole path, concatenated characters
//! for single-character alphabets and whitespace-separated tokens
//! otherwise.

use std::collections::BTreeSet;
use std::path::Path;

use crate::alphabet::{Alphabet, Symbol, SymbolSequence};
use crate::error::{Error, Result};
use crate::sampler::{QRule, RenewalSpec};
use crate::tree::{ContextTree, ProbabilisticContextTree};

fn fmt_prob(p: f64) -> String {
    format!("{p:.16e}")
}

/// Serializes a tree to the text format. Records follow sorted context
/// order, so equal trees produce identical bytes.
pub fn render_tree(pct: &ProbabilisticContextTree) -> String {
    let alphabet = pct.alphabet();
    let mut out = alphabet.labels().join(" ");
    out.push('\n');
    if let Some(spec) = pct.renewal() {
        match spec.rule() {
            QRule::List { head, tail } => {
                let head_str = if head.is_empty() {
                    "-".to_string()
                } else {
                    head.iter().map(|&q| fmt_prob(q)).collect::<Vec<_>>().join(",")
                };
                out.push_str(&format!("!renewal list {head_str} tail {}\n", fmt_prob(*tail)));
            }
            QRule::Geometric { c, r } => {
                out.push_str(&format!("!renewal geom {} {}\n", fmt_prob(*c), fmt_prob(*r)));
            }
        }
    }
    for (ctx, row) in pct.iter() {
        out.push_str(&alphabet.render(ctx));
        for &p in row {
            out.push(' ');
            out.push_str(&fmt_prob(p));
        }
        out.push('\n');
    }
    out
}

fn parse_prob(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad probability {s:?}")))
}

fn parse_renewal_directive(rest: &str) -> Result<RenewalSpec> {
    let parts: Vec<&str> = rest.split_whitespace().collect();
    match parts.as_slice() {
        ["list", head, "tail", tail] => {
            let head = if *head == "-" {
                Vec::new()
            } else {
                head.split(',').map(parse_prob).collect::<Result<Vec<f64>>>()?
            };
            RenewalSpec::new(QRule::List { head, tail: parse_prob(tail)? })
        }
        ["geom", c, r] => {
            RenewalSpec::new(QRule::Geometric { c: parse_prob(c)?, r: parse_prob(r)? })
        }
        _ => Err(Error::Parse(format!(
            "bad renewal directive {rest:?}: expected `list <q0,q1,..|-> tail <q>` or `geom <c> <r>`"
        ))),
    }
}

/// Parses the text format produced by [`render_tree`].
pub fn parse_tree(text: &str) -> Result<ProbabilisticContextTree> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty tree file".into()))?;
    let alphabet = Alphabet::new(header.split_whitespace())?;
    let mut renewal: Option<RenewalSpec> = None;
    let mut rows: Vec<(Vec<Symbol>, Vec<f64>)> = Vec::new();
    let mut seen: BTreeSet<Vec<Symbol>> = BTreeSet::new();
    for line in lines {
        if let Some(rest) = line.strip_prefix("!renewal") {
            if renewal.is_some() {
                return Err(Error::Parse("duplicate renewal directive".into()));
            }
            if !rows.is_empty() {
                return Err(Error::Parse(
                    "renewal directive must precede the context records".into(),
                ));
            }
            if alphabet.labels() != ["0", "1"] {
                return Err(Error::Parse(
                    "renewal trees use the binary alphabet `0 1`".into(),
                ));
            }
            renewal = Some(parse_renewal_directive(rest)?);
            continue;
        }
        let mut parts = line.split_whitespace();
        let ctx_str = parts
            .next()
            .ok_or_else(|| Error::Parse("blank context record".into()))?;
        let ctx = alphabet.parse_string(ctx_str)?;
        let row = parts.map(parse_prob).collect::<Result<Vec<f64>>>()?;
        if row.len() != alphabet.size() {
            return Err(Error::Parse(format!(
                "context {ctx_str}: {} probabilities for an alphabet of size {}",
                row.len(),
                alphabet.size()
            )));
        }
        if !seen.insert(ctx.clone()) {
            return Err(Error::Parse(format!("duplicate context {ctx_str}")));
        }
        rows.push((ctx, row));
    }
    // A header-only file is the empty tree, the honest serialization of a
    // null estimate.
    let tree = match renewal {
        Some(spec) => {
            let depth = rows.iter().map(|(c, _)| c.len()).max().unwrap_or(1);
            let tree = ContextTree::new_renewal(spec, depth)?;
            if &seen != tree.context_set() {
                return Err(Error::Parse(
                    "records do not match the contexts 1, 10, 100, ... implied by the renewal directive"
                        .into(),
                ));
            }
            tree
        }
        None => ContextTree::new(alphabet, seen)?,
    };
    let pct = ProbabilisticContextTree::new(tree, rows)?;
    // Numeric garbage is rejected here; suffix violations are allowed so
    // estimated trees stay representable, and the operations that require
    // the suffix property enforce it themselves.
    let report = crate::tree::validate_tree(&pct);
    if !report.row_violations.is_empty() {
        return Err(Error::Parse(format!("invalid tree file: {report}")));
    }
    Ok(pct)
}

/// Reads and parses a tree file.
pub fn load_tree(path: impl AsRef<Path>) -> Result<ProbabilisticContextTree> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tree(&text)
}

/// Writes a tree file.
pub fn save_tree(pct: &ProbabilisticContextTree, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_tree(pct)).map_err(|e| Error::io(path, e))
}

/// Serializes a sample as one line: concatenated characters for
/// single-character alphabets, space-separated tokens otherwise.
pub fn render_sample(alphabet: &Alphabet, sample: &[Symbol]) -> String {
    let mut out = if alphabet.single_char() {
        sample.iter().map(|&s| alphabet.label(s)).collect::<String>()
    } else {
        sample
            .iter()
            .map(|&s| alphabet.label(s))
            .collect::<Vec<_>>()
            .join(" ")
    };
    out.push('\n');
    out
}

/// Parses a sample file: a line containing whitespace splits into tokens,
/// anything else reads as one symbol per character (with a whole-line
/// single-token fallback for multi-character labels).
pub fn parse_sample(alphabet: &Alphabet, text: &str) -> Result<SymbolSequence> {
    let t = text.trim();
    if t.is_empty() {
        return Err(Error::Parse("empty sample".into()));
    }
    let lookup = |unit: &str| -> Result<Symbol> {
        alphabet
            .index_of(unit)
            .ok_or_else(|| Error::Parse(format!("unknown symbol {unit:?}")))
    };
    if t.contains(char::is_whitespace) {
        let symbols = t.split_whitespace().map(lookup).collect::<Result<Vec<_>>>()?;
        return Ok(SymbolSequence::from_raw(symbols));
    }
    let by_char: Result<Vec<Symbol>> =
        t.chars().map(|c| lookup(&c.to_string())).collect();
    match by_char {
        Ok(symbols) => Ok(SymbolSequence::from_raw(symbols)),
        Err(e) => lookup(t).map(|s| SymbolSequence::from_raw(vec![s])).map_err(|_| e),
    }
}

/// Reads and parses a sample file against a known alphabet.
pub fn load_sample(alphabet: &Alphabet, path: impl AsRef<Path>) -> Result<SymbolSequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sample(alphabet, &text)
}

/// Writes a sample file.
pub fn save_sample(
    alphabet: &Alphabet,
    sample: &[Symbol],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_sample(alphabet, sample)).map_err(|e| Error::io(path, e))
}

/// How raw input text is cut into symbol units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestMode {
    /// One unit per byte, labeled by its decimal value.
    Bytes,
    /// One unit per character; whitespace, control, and comma characters
    /// are labeled `u<hex codepoint>`.
    Chars,
    /// Whitespace-separated tokens.
    Tokens,
}

/// A symbol sequence together with the alphabet discovered from the input,
/// labels in first-occurrence order.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub alphabet: Alphabet,
    pub sample: SymbolSequence,
}

fn escape_char(c: char) -> String {
    if c.is_whitespace() || c.is_control() || c == ',' {
        format!("u{:04x}", c as u32)
    } else {
        c.to_string()
    }
}

/// Converts arbitrary input into a sample over a discovered alphabet.
pub fn ingest_text(data: &[u8], mode: IngestMode) -> Result<Ingested> {
    let units: Vec<String> = match mode {
        IngestMode::Bytes => data.iter().map(|b| b.to_string()).collect(),
        IngestMode::Chars => {
            let text = std::str::from_utf8(data)
                .map_err(|e| Error::Parse(format!("input is not valid UTF-8: {e}")))?;
            text.chars().map(escape_char).collect()
        }
        IngestMode::Tokens => {
            let text = std::str::from_utf8(data)
                .map_err(|e| Error::Parse(format!("input is not valid UTF-8: {e}")))?;
            text.split_whitespace().map(str::to_string).collect()
        }
    };
    if units.is_empty() {
        return Err(Error::Parse("input contains no symbol units".into()));
    }
    let mut labels: Vec<String> = Vec::new();
    let mut index: std::collections::HashMap<&str, Symbol> = std::collections::HashMap::new();
    let mut symbols = Vec::with_capacity(units.len());
    for unit in &units {
        let next = labels.len() as Symbol;
        let s = *index.entry(unit.as_str()).or_insert_with(|| {
            labels.push(unit.clone());
            next
        });
        symbols.push(s);
    }
    let alphabet = Alphabet::new(labels)?;
    Ok(Ingested { alphabet, sample: SymbolSequence::from_raw(symbols) })
}
