//! Finite alphabets and symbol sequences.
//!
//! Symbols are stored as indices into an [`Alphabet`]; the alphabet maps
//! indices to text labels and back. A [`SymbolSequence`] is a plain vector of
//! indices; the sample `X_0..X_{n-1}` lives here.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Index of a symbol within its alphabet. Alphabets are capped at 65 536
/// symbols, so `u16` is exact.
pub type Symbol = u16;

/// Hard cap on alphabet size, matching the `Symbol` representation.
pub const MAX_ALPHABET: usize = 1 << 16;

/// An ordered finite alphabet of at least two distinct text labels.
///
/// Labels may not be empty, contain whitespace, or contain commas: contexts
/// and samples are serialized as whitespace- and comma-delimited text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    labels: Vec<String>,
    index: HashMap<String, Symbol>,
}

impl Alphabet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::InvalidAlphabet(format!(
                "need at least 2 symbols, got {}",
                labels.len()
            )));
        }
        if labels.len() > MAX_ALPHABET {
            return Err(Error::InvalidAlphabet(format!(
                "{} symbols exceeds the maximum of {MAX_ALPHABET}",
                labels.len()
            )));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::InvalidAlphabet("empty label".into()));
            }
            if label.chars().any(|c| c.is_whitespace() || c == ',') {
                return Err(Error::InvalidAlphabet(format!(
                    "label {label:?} contains whitespace or a comma"
                )));
            }
            if index.insert(label.clone(), i as Symbol).is_some() {
                return Err(Error::InvalidAlphabet(format!("duplicate label {label:?}")));
            }
        }
        Ok(Alphabet { labels, index })
    }

    /// The binary alphabet with labels "0" and "1".
    pub fn binary() -> Self {
        Alphabet::new(["0", "1"]).expect("binary alphabet is valid")
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, s: Symbol) -> &str {
        &self.labels[s as usize]
    }

    pub fn index_of(&self, label: &str) -> Option<Symbol> {
        self.index.get(label).copied()
    }

    /// True when every label is a single character, in which case sequences
    /// serialize as concatenated characters instead of separated tokens.
    pub fn single_char(&self) -> bool {
        self.labels.iter().all(|l| l.chars().count() == 1)
    }

    /// Renders a string of symbols in time order: concatenated for
    /// single-character alphabets, comma-joined otherwise.
    pub fn render(&self, symbols: &[Symbol]) -> String {
        if self.single_char() {
            symbols.iter().map(|&s| self.label(s)).collect()
        } else {
            let parts: Vec<&str> = symbols.iter().map(|&s| self.label(s)).collect();
            parts.join(",")
        }
    }

    /// Parses a string rendered by [`Alphabet::render`] back into symbols.
    pub fn parse_string(&self, text: &str) -> Result<Vec<Symbol>> {
        let units: Vec<String> = if self.single_char() {
            text.chars().map(|c| c.to_string()).collect()
        } else {
            text.split(',').map(str::to_string).collect()
        };
        units
            .iter()
            .map(|u| {
                self.index_of(u)
                    .ok_or_else(|| Error::Parse(format!("unknown symbol {u:?}")))
            })
            .collect()
    }

    /// Validates that every symbol is in range for this alphabet.
    pub fn check_symbols(&self, symbols: &[Symbol]) -> Result<()> {
        if let Some(&bad) = symbols.iter().find(|&&s| (s as usize) >= self.size()) {
            return Err(Error::InvalidSequence(format!(
                "symbol index {bad} out of range for alphabet of size {}",
                self.size()
            )));
        }
        Ok(())
    }
}

/// A finite string of symbol indices, time-ordered (index 0 is oldest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence {
    symbols: Vec<Symbol>,
}

impl SymbolSequence {
    /// Builds a sequence, validating every index against `alphabet`.
    pub fn new(symbols: Vec<Symbol>, alphabet: &Alphabet) -> Result<Self> {
        alphabet.check_symbols(&symbols)?;
        Ok(SymbolSequence { symbols })
    }

    /// Builds a sequence without range validation; callers must guarantee
    /// every index is in range for the alphabet it will be used with.
    pub fn from_raw(symbols: Vec<Symbol>) -> Self {
        SymbolSequence { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn as_slice(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn iter(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.symbols.iter().copied()
    }

    /// The suffix of the last `k` symbols, or the whole sequence if shorter.
    pub fn suffix(&self, k: usize) -> &[Symbol] {
        let start = self.symbols.len().saturating_sub(k);
        &self.symbols[start..]
    }
}

impl fmt::Display for SymbolSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} symbols]", self.symbols.len())
    }
}

impl AsRef<[Symbol]> for SymbolSequence {
    fn as_ref(&self) -> &[Symbol] {
        &self.symbols
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_and_duplicate_alphabets() {
        assert!(Alphabet::new(["a"]).is_err());
        assert!(Alphabet::new(["a", "a"]).is_err());
        assert!(Alphabet::new(["a", "b c"]).is_err());
        assert!(Alphabet::new(["a", ""]).is_err());
    }

    #[test]
    fn render_and_parse_round_trip() {
        let bin = Alphabet::binary();
        let syms = vec![1, 0, 0, 1];
        let s = bin.render(&syms);
        assert_eq!(s, "1001");
        assert_eq!(bin.parse_string(&s).unwrap(), syms);

        let toks = Alphabet::new(["lo", "hi", "mid"]).unwrap();
        let syms = vec![2, 0, 1];
        let s = toks.render(&syms);
        assert_eq!(s, "mid,lo,hi");
        assert_eq!(toks.parse_string(&s).unwrap(), syms);
    }

    #[test]
    fn sequence_validates_range() {
        let bin = Alphabet::binary();
        assert!(SymbolSequence::new(vec![0, 1, 2], &bin).is_err());
        let seq = SymbolSequence::new(vec![0, 1, 1], &bin).unwrap();
        assert_eq!(seq.suffix(2), &[1, 1]);
        assert_eq!(seq.suffix(7), &[0, 1, 1]);
    }
}
