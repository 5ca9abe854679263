//! Context-tree estimators.
//!
//! Two families. The likelihood-ratio estimator grows a candidate suffix of
//! the observed past and keeps the longest length whose statistic
//! Lambda(w) = 2 sum_{y,a} N(ywa) log[p_hat(a|yw) / p_hat(a|w)] beats a
//! log n-scaled threshold; its empirical tree collects the estimated
//! contexts over the second half of the sample. The threshold estimator
//! keeps the observed strings whose one-step gain
//! Delta(w) = max_a |p_hat(a|w) - p_hat(a|w minus its oldest symbol)|
//! exceeds delta while every longer observed extension up to length k stays
//! at or below delta.
//!
//! All logarithms are natural.

use std::collections::BTreeSet;

use crate::alphabet::{Alphabet, Symbol, SymbolSequence};
use crate::counts::{build_counts, CountTrie, NodeRef};
use crate::error::{Error, Result};
use crate::tree::{ContextTree, ProbabilisticContextTree};

/// Candidate-depth policy for the likelihood-ratio estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthMode {
    /// Depth M(n): the longest sample suffix still frequent enough.
    Random,
    /// Depth floor(c1 log n) regardless of the sample.
    Deterministic,
}

/// Constants of the likelihood-ratio estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextConfig {
    /// Candidate lengths range up to floor(c1 log n).
    pub c1: f64,
    /// A suffix of length i stays a candidate while
    /// N(suffix) > c2_count * n / sqrt(log n).
    pub c2_count: f64,
    /// A length qualifies when Lambda(suffix) > c2_prune * log n.
    pub c2_prune: f64,
    pub depth_mode: DepthMode,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            c1: 1.0,
            c2_count: 0.2,
            c2_prune: 3.0,
            depth_mode: DepthMode::Random,
        }
    }
}

impl ContextConfig {
    /// Checks that every constant is positive and finite.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c1", self.c1),
            ("c2_count", self.c2_count),
            ("c2_prune", self.c2_prune),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Precondition(format!(
                    "estimator constant {name} = {v} must be positive and finite"
                )));
            }
        }
        Ok(())
    }

    /// floor(c1 log n): the largest candidate length considered.
    pub fn candidate_cap(&self, n: usize) -> usize {
        (self.c1 * (n as f64).ln()).floor() as usize
    }

    /// Count depth needed to evaluate the statistic at every candidate.
    pub fn trie_depth(&self, n: usize) -> usize {
        self.candidate_cap(n) + 1
    }
}

/// Parameters of the threshold estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaConfig {
    /// Gain threshold. Values >= 1 are allowed and yield the empty tree,
    /// since Delta never exceeds 1.
    pub delta: f64,
    /// Maximal context length.
    pub k: usize,
}

impl Default for DeltaConfig {
    fn default() -> Self {
        DeltaConfig { delta: 0.1, k: 4 }
    }
}

impl DeltaConfig {
    /// Checks the threshold is positive and the length cap at least one.
    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(Error::Precondition(format!(
                "delta = {} must be positive and finite",
                self.delta
            )));
        }
        if self.k == 0 {
            return Err(Error::Precondition("maximal context length k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which algorithm and configuration produced an estimated tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Context(ContextConfig),
    Delta(DeltaConfig),
}

/// A finite set of estimated contexts. Unlike a generating tree, an
/// estimate may be empty or miss some pasts on finite samples; it is
/// returned as-is.
#[derive(Debug, Clone)]
pub struct EstimatedTree {
    alphabet: Alphabet,
    contexts: BTreeSet<Vec<Symbol>>,
    provenance: Provenance,
}

impl EstimatedTree {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn contexts(&self) -> &BTreeSet<Vec<Symbol>> {
        &self.contexts
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Context strings in the alphabet's rendering, sorted.
    pub fn rendered(&self) -> Vec<String> {
        self.contexts.iter().map(|c| self.alphabet.render(c)).collect()
    }

    pub fn to_context_tree(&self) -> Result<ContextTree> {
        ContextTree::new(self.alphabet.clone(), self.contexts.clone())
    }

    /// Attaches the empirical law of the sample at each estimated context.
    pub fn fitted(&self, sample: &SymbolSequence) -> Result<ProbabilisticContextTree> {
        let depth = self.contexts.iter().map(|c| c.len()).max().unwrap_or(1);
        let mut trie = CountTrie::new(self.alphabet.clone(), depth);
        for s in sample.iter() {
            trie.push(s);
        }
        let rows = self
            .contexts
            .iter()
            .map(|c| Ok((c.clone(), trie.law_hat(c)?)))
            .collect::<Result<Vec<_>>>()?;
        ProbabilisticContextTree::new(self.to_context_tree()?, rows)
    }
}

fn suffix_of(x: &[Symbol], i: usize) -> &[Symbol] {
    &x[x.len() - i..]
}

/// Lambda(w) = 2 sum_{y in A} sum_{a in A} N(ywa) log[p_hat(a|yw) / p_hat(a|w)].
///
/// Terms with N(ywa) = 0 contribute 0, and N(ywa) > 0 forces both laws in
/// the ratio to be positive, so no term is singular. The value is a
/// log-likelihood ratio of nested models, hence nonnegative; tiny negative
/// rounding residue is clamped to 0.
pub fn lambda_stat(trie: &CountTrie, w: &[Symbol]) -> Result<f64> {
    if w.len() + 2 > trie.depth() {
        return Err(Error::DepthExceeded { needed: w.len() + 2, available: trie.depth() });
    }
    let Some(node) = trie.node_of(w) else {
        return Ok(0.0);
    };
    let asize = trie.alphabet().size();
    let mut sum = 0.0;
    for (_, child) in node.children() {
        for a in 0..asize {
            let nywa = child.follow(a as Symbol);
            if nywa > 0 {
                sum += nywa as f64
                    * (child.p_hat(a as Symbol).ln() - node.p_hat(a as Symbol).ln());
            }
        }
    }
    Ok((2.0 * sum).max(0.0))
}

fn require_len(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Precondition(format!(
            "sample length {n} too short: need n >= 3 so log n thresholds are well posed"
        )));
    }
    Ok(())
}

fn m_scan(trie: &CountTrie, x: &[Symbol], cfg: &ContextConfig) -> Result<usize> {
    let n = x.len();
    let cap = cfg.candidate_cap(n).min(n);
    let threshold = cfg.c2_count * n as f64 / (n as f64).ln().sqrt();
    let mut best = 0;
    for i in 1..=cap {
        if trie.n_count(suffix_of(x, i))? as f64 > threshold {
            best = i;
        }
    }
    Ok(best)
}

/// M(n): the largest length i <= floor(c1 log n) whose sample suffix
/// satisfies N(suffix) > c2_count * n / sqrt(log n); 0 when none does.
pub fn max_candidate_length(
    trie: &CountTrie,
    sample: &SymbolSequence,
    cfg: &ContextConfig,
) -> Result<usize> {
    cfg.validate()?;
    let n = sample.len();
    require_len(n)?;
    if trie.len() != n {
        return Err(Error::Precondition(format!(
            "count trie holds {} symbols but the sample has {n}",
            trie.len()
        )));
    }
    let cap = cfg.candidate_cap(n);
    if trie.depth() < cap.min(n) {
        return Err(Error::DepthExceeded { needed: cap.min(n), available: trie.depth() });
    }
    m_scan(trie, sample.as_slice(), cfg)
}

/// Estimated context length of the past `x`, from precomputed counts of the
/// same sample. The trie depth must cover `cfg.trie_depth(x.len())`.
pub fn ell_hat_from_counts(trie: &CountTrie, x: &[Symbol], cfg: &ContextConfig) -> Result<usize> {
    cfg.validate()?;
    let n = x.len();
    require_len(n)?;
    if trie.len() != n {
        return Err(Error::Precondition(format!(
            "count trie holds {} symbols but the past has {n}",
            trie.len()
        )));
    }
    let needed = cfg.trie_depth(n).min(n + 1);
    if trie.depth() < needed {
        return Err(Error::DepthExceeded { needed, available: trie.depth() });
    }
    let d = match cfg.depth_mode {
        DepthMode::Deterministic => cfg.candidate_cap(n),
        DepthMode::Random => m_scan(trie, x, cfg)?,
    };
    let threshold = cfg.c2_prune * (n as f64).ln();
    let mut best = 0;
    for i in 1..=d.saturating_sub(1).min(n - 1) {
        if lambda_stat(trie, suffix_of(x, i))? > threshold {
            best = i;
        }
    }
    Ok(1 + best)
}

/// Estimated length of the context in force at the end of the sample:
/// 1 + the largest candidate length i < D whose Lambda statistic exceeds
/// c2_prune * log n, where D is M(n) or floor(c1 log n) per the depth mode;
/// 1 when no length qualifies.
pub fn ell_hat(sample: &SymbolSequence, alphabet: &Alphabet, cfg: &ContextConfig) -> Result<usize> {
    cfg.validate()?;
    alphabet.check_symbols(sample.as_slice())?;
    let n = sample.len();
    require_len(n)?;
    let mut trie = CountTrie::new(alphabet.clone(), cfg.trie_depth(n).min(n + 1));
    for s in sample.iter() {
        trie.push(s);
    }
    ell_hat_from_counts(&trie, sample.as_slice(), cfg)
}

/// Collects the estimated context of every prefix X_0^{j-1} for j from
/// ceil(n/2) to n: the deduplicated set of suffix strings of length
/// ell_hat(prefix). Counts grow incrementally with j, so the whole pass
/// costs O(n log n) trie steps.
pub fn empirical_tree_rissanen(
    sample: &SymbolSequence,
    alphabet: &Alphabet,
    cfg: &ContextConfig,
) -> Result<EstimatedTree> {
    cfg.validate()?;
    alphabet.check_symbols(sample.as_slice())?;
    let n = sample.len();
    if n < 6 {
        return Err(Error::Precondition(format!(
            "sample length {n} too short for the prefix sweep: need n >= 6"
        )));
    }
    let x = sample.as_slice();
    let mut trie = CountTrie::new(alphabet.clone(), cfg.trie_depth(n).min(n + 1));
    let start = n.div_ceil(2);
    let mut pushed = 0;
    let mut contexts = BTreeSet::new();
    for j in start..=n {
        while pushed < j {
            trie.push(x[pushed]);
            pushed += 1;
        }
        let ell = ell_hat_from_counts(&trie, &x[..j], cfg)?.min(j);
        contexts.insert(x[j - ell..j].to_vec());
    }
    Ok(EstimatedTree {
        alphabet: alphabet.clone(),
        contexts,
        provenance: Provenance::Context(cfg.clone()),
    })
}

/// Delta(w) = max_a |p_hat(a|w) - p_hat(a|w')| where w' drops the oldest
/// symbol of w; for |w| = 1 the comparison law is the empirical marginal.
pub fn delta_stat(trie: &CountTrie, w: &[Symbol]) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::Precondition("the gain statistic needs a nonempty string".into()));
    }
    if w.len() + 1 > trie.depth() {
        return Err(Error::DepthExceeded { needed: w.len() + 1, available: trie.depth() });
    }
    let own = trie.law_hat(w)?;
    let parent = trie.law_hat(&w[1..])?;
    Ok(own
        .iter()
        .zip(&parent)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Post-order over observed strings of length <= k: inserts w when its own
/// gain exceeds delta and no observed strict extension up to length k does;
/// returns the subtree maximum including w itself.
fn delta_scan(
    trie: &CountTrie,
    node: NodeRef<'_>,
    key_rev: &mut Vec<Symbol>,
    cfg: &DeltaConfig,
    contexts: &mut BTreeSet<Vec<Symbol>>,
) -> Result<f64> {
    let mut below = 0.0f64;
    if key_rev.len() < cfg.k {
        for (y, child) in node.children() {
            key_rev.push(y);
            below = below.max(delta_scan(trie, child, key_rev, cfg, contexts)?);
            key_rev.pop();
        }
    }
    if key_rev.is_empty() {
        return Ok(below);
    }
    let w: Vec<Symbol> = key_rev.iter().rev().copied().collect();
    let own = delta_stat(trie, &w)?;
    if own > cfg.delta && below <= cfg.delta {
        contexts.insert(w);
    }
    Ok(own.max(below))
}

/// The threshold estimator: observed strings of length 1..=k whose gain
/// exceeds delta while every observed extension up to length k stays at or
/// below delta. Length-k strings have no extensions to check.
pub fn estimate_tree_delta(
    sample: &SymbolSequence,
    alphabet: &Alphabet,
    cfg: &DeltaConfig,
) -> Result<EstimatedTree> {
    cfg.validate()?;
    alphabet.check_symbols(sample.as_slice())?;
    let n = sample.len();
    if cfg.k >= n {
        return Err(Error::Precondition(format!(
            "maximal context length k = {} must be below the sample length {n}",
            cfg.k
        )));
    }
    let trie = build_counts(sample, alphabet, cfg.k + 1)?;
    let mut contexts = BTreeSet::new();
    delta_scan(&trie, trie.root(), &mut Vec::new(), cfg, &mut contexts)?;
    Ok(EstimatedTree {
        alphabet: alphabet.clone(),
        contexts,
        provenance: Provenance::Delta(cfg.clone()),
    })
}
