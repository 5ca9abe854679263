//! Context trees and probabilistic context trees.
//!
//! A context tree is a set of finite strings (contexts) over an alphabet,
//! intended to satisfy the suffix property: no context is a proper suffix of
//! another. A probabilistic context tree attaches one transition distribution
//! over the alphabet to each context. Contexts are stored in time order
//! (oldest symbol first); lookup walks the past from its most recent symbol
//! backwards through a reversed-key trie, so finding the context of a past is
//! linear in the context length.
//!
//! Unbounded trees are supported only for the renewal family `{1, 10, 100,
//! ...}`, represented as a materialized finite prefix plus the closed-form
//! rule for the remaining depths.

use std::collections::BTreeSet;
use std::fmt;

use crate::alphabet::{Alphabet, Symbol};
use crate::error::{Error, Result};
use crate::sampler::RenewalSpec;

/// A single context: a nonempty string in time order (oldest first).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Context {
    symbols: Vec<Symbol>,
}

impl Context {
    pub fn new(symbols: Vec<Symbol>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidTree("context must have length >= 1".into()));
        }
        Ok(Context { symbols })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn render(&self, alphabet: &Alphabet) -> String {
        alphabet.render(&self.symbols)
    }
}

/// Reversed-key trie over a finite context set. Node 0 is the root; an edge
/// labeled `s` moves one symbol deeper into the past.
#[derive(Debug, Clone, Default)]
struct SuffixLookup {
    children: Vec<Vec<(Symbol, u32)>>,
    // Ordinal of the context ending at this node in the sorted context list,
    // or u32::MAX when the node is internal.
    ordinal: Vec<u32>,
}

const NO_CONTEXT: u32 = u32::MAX;

impl SuffixLookup {
    fn build(contexts: &BTreeSet<Vec<Symbol>>) -> Self {
        let mut lk = SuffixLookup {
            children: vec![Vec::new()],
            ordinal: vec![NO_CONTEXT],
        };
        for (ord, ctx) in contexts.iter().enumerate() {
            let mut node = 0usize;
            for &s in ctx.iter().rev() {
                node = match lk.children[node].iter().find(|(sym, _)| *sym == s) {
                    Some(&(_, child)) => child as usize,
                    None => {
                        let child = lk.children.len();
                        lk.children[node].push((s, child as u32));
                        lk.children.push(Vec::new());
                        lk.ordinal.push(NO_CONTEXT);
                        child
                    }
                };
            }
            lk.ordinal[node] = ord as u32;
        }
        lk
    }

    /// Walks `past` from its most recent symbol backwards and returns
    /// `(context_length, ordinal)` of the first (shortest) context hit.
    fn find(&self, past: &[Symbol]) -> Option<(usize, u32)> {
        let mut node = 0usize;
        for (depth, &s) in past.iter().rev().enumerate() {
            match self.children[node].iter().find(|(sym, _)| *sym == s) {
                Some(&(_, child)) => node = child as usize,
                None => return None,
            }
            if self.ordinal[node] != NO_CONTEXT {
                return Some((depth + 1, self.ordinal[node]));
            }
        }
        None
    }
}

/// A finite (or renewal-family) set of contexts over an alphabet.
///
/// Construction checks only structural sanity (nonempty contexts, symbols in
/// range); the suffix property is checked by [`validate_tree`], which reports
/// violations instead of failing, so that estimated trees, which may violate
/// it on finite samples, can still be represented and compared.
#[derive(Debug, Clone)]
pub struct ContextTree {
    alphabet: Alphabet,
    contexts: BTreeSet<Vec<Symbol>>,
    renewal: Option<RenewalSpec>,
    lookup: SuffixLookup,
}

impl ContextTree {
    pub fn new(alphabet: Alphabet, contexts: BTreeSet<Vec<Symbol>>) -> Result<Self> {
        for ctx in &contexts {
            if ctx.is_empty() {
                return Err(Error::InvalidTree("context must have length >= 1".into()));
            }
            alphabet.check_symbols(ctx)?;
        }
        let lookup = SuffixLookup::build(&contexts);
        Ok(ContextTree { alphabet, contexts, renewal: None, lookup })
    }

    /// Builds the renewal-family tree `{1, 10, ..., 10^(depth-1), ...}` with
    /// the closed-form rule attached; the alphabet is binary by construction.
    pub fn new_renewal(spec: RenewalSpec, depth: usize) -> Result<Self> {
        if depth < 1 {
            return Err(Error::Precondition("renewal depth must be >= 1".into()));
        }
        let alphabet = Alphabet::binary();
        let mut contexts = BTreeSet::new();
        for k in 0..depth {
            contexts.insert(renewal_context(k));
        }
        let lookup = SuffixLookup::build(&contexts);
        Ok(ContextTree { alphabet, contexts, renewal: Some(spec), lookup })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn context_set(&self) -> &BTreeSet<Vec<Symbol>> {
        &self.contexts
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn is_bounded(&self) -> bool {
        self.renewal.is_none()
    }

    pub fn renewal(&self) -> Option<&RenewalSpec> {
        self.renewal.as_ref()
    }

    /// Height of a bounded tree: the maximum context length (0 when empty).
    /// `None` for the unbounded renewal family.
    pub fn height(&self) -> Option<usize> {
        if self.renewal.is_some() {
            return None;
        }
        Some(self.contexts.iter().map(Vec::len).max().unwrap_or(0))
    }

    /// Materialized depth: the height of the stored context set (for renewal
    /// trees, the depth the family was materialized to).
    pub fn materialized_height(&self) -> usize {
        self.contexts.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn contains(&self, ctx: &[Symbol]) -> bool {
        if self.renewal.is_some() && is_renewal_context(ctx) {
            return true;
        }
        self.contexts.contains(ctx)
    }

    /// The context that is a suffix of `past`, if one exists within
    /// `past.len()` symbols. For pasts matching several stored contexts
    /// (possible only when the suffix property is violated), the shortest
    /// match wins.
    pub fn context_of(&self, past: &[Symbol]) -> Option<Context> {
        if self.renewal.is_some() {
            // Closed form: the context is 1 0^g where g counts the zeros
            // since the most recent 1. A past with no 1 has no context yet.
            let g = past.iter().rev().position(|&s| s == 1)?;
            let ctx = past[past.len() - g - 1..].to_vec();
            return Some(Context { symbols: ctx });
        }
        let (len, _) = self.lookup.find(past)?;
        Some(Context { symbols: past[past.len() - len..].to_vec() })
    }

    /// Like [`ContextTree::context_of`] but returns `(length, ordinal)` into
    /// the sorted context list, for materialized contexts only.
    pub(crate) fn lookup_ord(&self, past: &[Symbol]) -> Option<(usize, u32)> {
        self.lookup.find(past)
    }
}

fn renewal_context(k: usize) -> Vec<Symbol> {
    let mut ctx = vec![1];
    ctx.extend(std::iter::repeat_n(0, k));
    ctx
}

fn is_renewal_context(ctx: &[Symbol]) -> bool {
    !ctx.is_empty() && ctx[0] == 1 && ctx[1..].iter().all(|&s| s == 0)
}

/// One invalid probability row, reported by [`validate_tree`].
#[derive(Debug, Clone, PartialEq)]
pub enum RowViolation {
    /// Entry at the given symbol index is negative or not finite.
    BadEntry { context: String, value: f64 },
    /// Row sums to `sum`, outside the 1e-9 normalization tolerance.
    NotNormalized { context: String, sum: f64 },
}

/// Everything wrong with a tree; empty report means valid.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    /// Pairs (shorter, longer) where the shorter context is a proper suffix
    /// of the longer one.
    pub suffix_violations: Vec<(String, String)>,
    pub row_violations: Vec<RowViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.suffix_violations.is_empty() && self.row_violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        for (short, long) in &self.suffix_violations {
            writeln!(f, "suffix violation: {short:?} is a proper suffix of {long:?}")?;
        }
        for v in &self.row_violations {
            match v {
                RowViolation::BadEntry { context, value } => {
                    writeln!(f, "row {context:?}: entry {value} is not a probability")?
                }
                RowViolation::NotNormalized { context, sum } => {
                    writeln!(f, "row {context:?}: sums to {sum}, not 1")?
                }
            }
        }
        Ok(())
    }
}

/// The normalization tolerance for probability rows.
pub const ROW_TOLERANCE: f64 = 1e-9;

/// A context tree with one transition distribution per context.
#[derive(Debug, Clone)]
pub struct ProbabilisticContextTree {
    tree: ContextTree,
    // Sorted identically to tree.contexts iteration order.
    keys: Vec<Vec<Symbol>>,
    rows: Vec<Vec<f64>>,
}

impl ProbabilisticContextTree {
    /// Pairs every context of `tree` with a row. Rows must cover exactly the
    /// tree's contexts and have one finite entry per alphabet symbol;
    /// nonnegativity and normalization are checked by [`validate_tree`].
    pub fn new(
        tree: ContextTree,
        rows: impl IntoIterator<Item = (Vec<Symbol>, Vec<f64>)>,
    ) -> Result<Self> {
        let size = tree.alphabet().size();
        let mut map = std::collections::BTreeMap::new();
        for (ctx, row) in rows {
            if row.len() != size {
                return Err(Error::InvalidTree(format!(
                    "row for context {ctx:?} has {} entries, alphabet has {size}",
                    row.len()
                )));
            }
            if row.iter().any(|p| !p.is_finite()) {
                return Err(Error::InvalidTree(format!(
                    "row for context {ctx:?} has a non-finite entry"
                )));
            }
            if map.insert(ctx.clone(), row).is_some() {
                return Err(Error::InvalidTree(format!("duplicate row for context {ctx:?}")));
            }
        }
        let keys: Vec<Vec<Symbol>> = tree.context_set().iter().cloned().collect();
        if map.len() != keys.len() || !keys.iter().all(|k| map.contains_key(k)) {
            return Err(Error::InvalidTree(
                "rows must cover exactly the tree's contexts".into(),
            ));
        }
        let rows = keys.iter().map(|k| map.remove(k).unwrap()).collect();
        Ok(ProbabilisticContextTree { tree, keys, rows })
    }

    pub fn alphabet(&self) -> &Alphabet {
        self.tree.alphabet()
    }

    pub fn tree(&self) -> &ContextTree {
        &self.tree
    }

    pub fn is_bounded(&self) -> bool {
        self.tree.is_bounded()
    }

    pub fn height(&self) -> Option<usize> {
        self.tree.height()
    }

    pub fn renewal(&self) -> Option<&RenewalSpec> {
        self.tree.renewal()
    }

    /// Contexts with their rows, in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&[Symbol], &[f64])> {
        self.keys.iter().map(|k| k.as_slice()).zip(self.rows.iter().map(|r| r.as_slice()))
    }

    pub fn row(&self, ctx: &[Symbol]) -> Option<&[f64]> {
        let i = self.keys.binary_search_by(|k| k.as_slice().cmp(ctx)).ok()?;
        Some(&self.rows[i])
    }

    /// The transition law governing `past`, from the materialized contexts.
    pub fn law_of_past(&self, past: &[Symbol]) -> Option<&[f64]> {
        let (_, ord) = self.tree.lookup_ord(past)?;
        Some(&self.rows[ord as usize])
    }

    pub fn context_of(&self, past: &[Symbol]) -> Option<Context> {
        self.tree.context_of(past)
    }
}

/// Checks the suffix property and every probability row; violations are
/// reported, never thrown.
pub fn validate_tree(pct: &ProbabilisticContextTree) -> ValidationReport {
    let mut report = ValidationReport::default();
    let alphabet = pct.alphabet();
    // A context whose strict suffix is also a context shows up as a marked
    // ancestor on its reversed-trie path.
    for (ctx, _) in pct.iter() {
        if let Some((len, _)) = pct.tree().lookup_ord(ctx) {
            if len < ctx.len() {
                let short = &ctx[ctx.len() - len..];
                report
                    .suffix_violations
                    .push((alphabet.render(short), alphabet.render(ctx)));
            }
        }
    }
    for (ctx, row) in pct.iter() {
        let name = alphabet.render(ctx);
        if let Some(&bad) = row.iter().find(|&&p| p.is_nan() || p < 0.0) {
            report.row_violations.push(RowViolation::BadEntry { context: name.clone(), value: bad });
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOLERANCE {
            report.row_violations.push(RowViolation::NotNormalized { context: name, sum });
        }
    }
    report
}

/// The context of `past` under `pct`, or `None` when the past is too short.
pub fn context_of(pct: &ProbabilisticContextTree, past: &[Symbol]) -> Option<Context> {
    pct.context_of(past)
}

/// The tree truncated to level `k`: contexts of length <= k, plus the
/// length-k suffix of every longer context.
pub fn truncate_tree(tree: &ContextTree, k: usize) -> Result<ContextTree> {
    if k < 1 {
        return Err(Error::Precondition("truncation level must be >= 1".into()));
    }
    let mut contexts = BTreeSet::new();
    if tree.renewal().is_some() {
        // 1 0^j for j <= k-1, plus the all-zeros stub 0^k standing in for
        // every deeper context.
        for j in 0..k {
            contexts.insert(renewal_context(j));
        }
        contexts.insert(vec![0; k]);
    } else {
        for ctx in tree.context_set() {
            if ctx.len() <= k {
                contexts.insert(ctx.clone());
            } else {
                contexts.insert(ctx[ctx.len() - k..].to_vec());
            }
        }
    }
    ContextTree::new(tree.alphabet().clone(), contexts)
}

/// Set difference of two trees' contexts, rendered as label strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDiff {
    /// Contexts of the first tree absent from the second.
    pub missing: Vec<String>,
    /// Contexts of the second tree absent from the first.
    pub extra: Vec<String>,
    pub equal: bool,
}

/// Compares two trees as context sets, optionally truncating both at `k`
/// first. Unbounded trees require a truncation level.
pub fn compare_trees(a: &ContextTree, b: &ContextTree, k: Option<usize>) -> Result<TreeDiff> {
    let resolve = |t: &ContextTree| -> Result<BTreeSet<String>> {
        let t = match k {
            Some(k) => truncate_tree(t, k)?,
            None => {
                if !t.is_bounded() {
                    return Err(Error::Precondition(
                        "comparing an unbounded tree requires a truncation level".into(),
                    ));
                }
                t.clone()
            }
        };
        Ok(t.context_set().iter().map(|c| t.alphabet().render(c)).collect())
    };
    let sa = resolve(a)?;
    let sb = resolve(b)?;
    let missing: Vec<String> = sa.difference(&sb).cloned().collect();
    let extra: Vec<String> = sb.difference(&sa).cloned().collect();
    let equal = missing.is_empty() && extra.is_empty();
    Ok(TreeDiff { missing, extra, equal })
}

/// The three-context binary tree used as the worked example throughout the
/// tests and docs: contexts {1, 10, 00} with p(1|1)=0.3, p(1|10)=0.8,
/// p(1|00)=0.2.
pub fn ref_tree() -> ProbabilisticContextTree {
    let alphabet = Alphabet::binary();
    let contexts: BTreeSet<Vec<Symbol>> =
        [vec![1], vec![1, 0], vec![0, 0]].into_iter().collect();
    let tree = ContextTree::new(alphabet, contexts).unwrap();
    ProbabilisticContextTree::new(
        tree,
        [
            (vec![1], vec![0.7, 0.3]),
            (vec![1, 0], vec![0.2, 0.8]),
            (vec![0, 0], vec![0.8, 0.2]),
        ],
    )
    .unwrap()
}

/// The order-1 binary tree with uniform rows: an i.i.d. uniform source.
pub fn iid_uniform_binary() -> ProbabilisticContextTree {
    let alphabet = Alphabet::binary();
    let contexts: BTreeSet<Vec<Symbol>> = [vec![0], vec![1]].into_iter().collect();
    let tree = ContextTree::new(alphabet, contexts).unwrap();
    ProbabilisticContextTree::new(
        tree,
        [(vec![0], vec![0.5, 0.5]), (vec![1], vec![0.5, 0.5])],
    )
    .unwrap()
}
