//! Window counts and empirical transition probabilities.
//!
//! N(w) counts the windows X_t..X_{t+|w|-1} equal to w for t in
//! [0, n - |w|], so a length-j string has n - j + 1 windows. The empirical
//! law is p_hat(a | w) = N(wa) / sum_b N(wb), uniform when the denominator
//! vanishes; the denominator differs from N(w) only through the final
//! window, which nothing follows.
//!
//! Counts live in a trie keyed by the string read from the most recent
//! symbol backwards, so the node of `w` has the nodes of `yw` as children
//! and likelihood-ratio statistics are local to a node and its subtree.
//! Each node also stores the follow counts N(wa), accumulated one step
//! before the count itself during a push.

use crate::alphabet::{Alphabet, Symbol, SymbolSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
struct Node {
    /// Sorted (symbol one step further into the past, node index).
    children: Vec<(Symbol, u32)>,
    /// Sorted (next symbol a, N(wa)).
    follow: Vec<(Symbol, u64)>,
    count: u64,
}

impl Node {
    fn child(&self, s: Symbol) -> Option<u32> {
        self.children
            .binary_search_by_key(&s, |&(sym, _)| sym)
            .ok()
            .map(|i| self.children[i].1)
    }

    fn follow_count(&self, s: Symbol) -> u64 {
        self.follow
            .binary_search_by_key(&s, |&(sym, _)| sym)
            .map(|i| self.follow[i].1)
            .unwrap_or(0)
    }

    fn bump_follow(&mut self, s: Symbol) {
        match self.follow.binary_search_by_key(&s, |&(sym, _)| sym) {
            Ok(i) => self.follow[i].1 += 1,
            Err(i) => self.follow.insert(i, (s, 1)),
        }
    }
}

/// All window counts of a sample up to a fixed depth.
#[derive(Debug, Clone)]
pub struct CountTrie {
    alphabet: Alphabet,
    depth: usize,
    nodes: Vec<Node>,
    /// Most recent symbols, newest last, capped at `depth`.
    recent: Vec<Symbol>,
    len: usize,
}

impl CountTrie {
    pub fn new(alphabet: Alphabet, depth: usize) -> CountTrie {
        CountTrie {
            alphabet,
            depth,
            nodes: vec![Node::default()],
            recent: Vec::with_capacity(depth),
            len: 0,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Maximum counted window length.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of symbols pushed so far.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn ensure_child(&mut self, node: u32, s: Symbol) -> u32 {
        let pos = self.nodes[node as usize]
            .children
            .binary_search_by_key(&s, |&(sym, _)| sym);
        match pos {
            Ok(i) => self.nodes[node as usize].children[i].1,
            Err(i) => {
                let idx = self.nodes.len() as u32;
                self.nodes.push(Node::default());
                self.nodes[node as usize].children.insert(i, (s, idx));
                idx
            }
        }
    }

    /// Appends one symbol, updating every window count that ends at it.
    pub fn push(&mut self, s: Symbol) {
        assert!(
            (s as usize) < self.alphabet.size(),
            "symbol {s} outside alphabet of size {}",
            self.alphabet.size()
        );
        // Follow pass over the history before s: N(wa) for every suffix w.
        let mut node = 0u32;
        self.nodes[0].bump_follow(s);
        for j in 0..self.recent.len().min(self.depth) {
            let sym = self.recent[self.recent.len() - 1 - j];
            node = self.ensure_child(node, sym);
            self.nodes[node as usize].bump_follow(s);
        }
        if self.recent.len() == self.depth && self.depth > 0 {
            self.recent.remove(0);
        }
        if self.depth > 0 {
            self.recent.push(s);
        }
        self.len += 1;
        // Count pass over the history including s.
        let mut node = 0u32;
        for j in 0..self.recent.len() {
            let sym = self.recent[self.recent.len() - 1 - j];
            node = self.ensure_child(node, sym);
            self.nodes[node as usize].count += 1;
        }
    }

    fn locate(&self, w: &[Symbol]) -> Option<u32> {
        let mut node = 0u32;
        for &s in w.iter().rev() {
            node = self.nodes[node as usize].child(s)?;
        }
        Some(node)
    }

    fn check_depth(&self, w: &[Symbol]) -> Result<()> {
        if w.len() > self.depth {
            return Err(Error::DepthExceeded { needed: w.len(), available: self.depth });
        }
        Ok(())
    }

    /// N(w); the empty string counts every position.
    pub fn n_count(&self, w: &[Symbol]) -> Result<u64> {
        self.check_depth(w)?;
        if w.is_empty() {
            return Ok(self.len as u64);
        }
        Ok(self.locate(w).map(|n| self.nodes[n as usize].count).unwrap_or(0))
    }

    /// N(wa), defined for |w| up to the trie depth.
    pub fn follow_count(&self, w: &[Symbol], a: Symbol) -> Result<u64> {
        self.check_depth(w)?;
        Ok(self
            .locate(w)
            .map(|n| self.nodes[n as usize].follow_count(a))
            .unwrap_or(0))
    }

    /// p_hat(a | w) = N(wa) / sum_b N(wb), or 1/|A| when w was never
    /// followed by anything. Empty w gives the marginal frequency of a.
    pub fn p_hat(&self, a: Symbol, w: &[Symbol]) -> Result<f64> {
        self.check_depth(w)?;
        if (a as usize) >= self.alphabet.size() {
            return Err(Error::InvalidSequence(format!(
                "symbol {a} outside alphabet of size {}",
                self.alphabet.size()
            )));
        }
        match self.locate(w) {
            Some(n) => {
                let node = &self.nodes[n as usize];
                let den: u64 = node.follow.iter().map(|&(_, c)| c).sum();
                if den == 0 {
                    Ok(1.0 / self.alphabet.size() as f64)
                } else {
                    Ok(node.follow_count(a) as f64 / den as f64)
                }
            }
            None => Ok(1.0 / self.alphabet.size() as f64),
        }
    }

    /// The full empirical row (p_hat(a | w))_a.
    pub fn law_hat(&self, w: &[Symbol]) -> Result<Vec<f64>> {
        self.check_depth(w)?;
        let asize = self.alphabet.size();
        match self.locate(w) {
            Some(n) => {
                let node = &self.nodes[n as usize];
                let den: u64 = node.follow.iter().map(|&(_, c)| c).sum();
                if den == 0 {
                    return Ok(vec![1.0 / asize as f64; asize]);
                }
                Ok((0..asize)
                    .map(|a| node.follow_count(a as Symbol) as f64 / den as f64)
                    .collect())
            }
            None => Ok(vec![1.0 / asize as f64; asize]),
        }
    }

    /// Handle on the node of `w`, if the string was observed.
    pub fn node_of(&self, w: &[Symbol]) -> Option<NodeRef<'_>> {
        if w.len() > self.depth {
            return None;
        }
        self.locate(w).map(|idx| NodeRef { trie: self, idx, len: w.len() })
    }

    pub fn root(&self) -> NodeRef<'_> {
        NodeRef { trie: self, idx: 0, len: 0 }
    }

    /// Calls `f` on every observed string with length in
    /// `min_len..=max_len`, in time order (oldest symbol first), together
    /// with its node.
    pub fn visit<F: FnMut(&[Symbol], NodeRef<'_>)>(
        &self,
        min_len: usize,
        max_len: usize,
        mut f: F,
    ) {
        let max_len = max_len.min(self.depth);
        // Reversed key along the DFS path; reversed again per report.
        let mut key_rev: Vec<Symbol> = Vec::with_capacity(max_len);
        let mut stack: Vec<(u32, usize)> = vec![(0, 0)];
        let mut time_order: Vec<Symbol> = Vec::with_capacity(max_len);
        while let Some(top) = stack.last_mut() {
            let (node, child_idx) = *top;
            let children = &self.nodes[node as usize].children;
            if key_rev.len() < max_len && child_idx < children.len() {
                top.1 += 1;
                let (sym, child) = children[child_idx];
                key_rev.push(sym);
                if key_rev.len() >= min_len {
                    time_order.clear();
                    time_order.extend(key_rev.iter().rev());
                    f(
                        &time_order,
                        NodeRef { trie: self, idx: child, len: key_rev.len() },
                    );
                }
                stack.push((child, 0));
            } else {
                stack.pop();
                key_rev.pop();
            }
        }
    }
}

/// Builds the counts of a whole sample at once. The depth must satisfy
/// 1 <= depth <= n.
pub fn build_counts(
    sample: &SymbolSequence,
    alphabet: &Alphabet,
    depth: usize,
) -> Result<CountTrie> {
    if depth == 0 || depth > sample.len() {
        return Err(Error::Precondition(format!(
            "count depth {depth} outside 1..={} (sample length)",
            sample.len()
        )));
    }
    alphabet.check_symbols(sample.as_slice())?;
    let mut trie = CountTrie::new(alphabet.clone(), depth);
    for s in sample.iter() {
        trie.push(s);
    }
    Ok(trie)
}

/// A node handle exposing local counts; children extend the string one
/// symbol further into the past.
#[derive(Clone, Copy)]
pub struct NodeRef<'a> {
    trie: &'a CountTrie,
    idx: u32,
    len: usize,
}

impl<'a> NodeRef<'a> {
    /// |w| of the string this node represents.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// N(w).
    pub fn count(&self) -> u64 {
        if self.len == 0 {
            self.trie.len as u64
        } else {
            self.trie.nodes[self.idx as usize].count
        }
    }

    /// N(wa).
    pub fn follow(&self, a: Symbol) -> u64 {
        self.trie.nodes[self.idx as usize].follow_count(a)
    }

    /// sum_b N(wb).
    pub fn follow_total(&self) -> u64 {
        self.trie.nodes[self.idx as usize]
            .follow
            .iter()
            .map(|&(_, c)| c)
            .sum()
    }

    /// p_hat(a | w) with the uniform zero-denominator convention.
    pub fn p_hat(&self, a: Symbol) -> f64 {
        let den = self.follow_total();
        if den == 0 {
            1.0 / self.trie.alphabet.size() as f64
        } else {
            self.follow(a) as f64 / den as f64
        }
    }

    /// The node of `yw` for the symbol y one step further back.
    pub fn child(&self, y: Symbol) -> Option<NodeRef<'a>> {
        self.trie.nodes[self.idx as usize]
            .child(y)
            .map(|idx| NodeRef { trie: self.trie, idx, len: self.len + 1 })
    }

    /// All observed one-step extensions into the past.
    pub fn children(&self) -> impl Iterator<Item = (Symbol, NodeRef<'a>)> + '_ {
        self.trie.nodes[self.idx as usize]
            .children
            .iter()
            .map(move |&(sym, idx)| (sym, NodeRef { trie: self.trie, idx, len: self.len + 1 }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> SymbolSequence {
        let alphabet = Alphabet::binary();
        SymbolSequence::from_raw(alphabet.parse_string(s).unwrap())
    }

    fn naive_count(x: &[Symbol], w: &[Symbol]) -> u64 {
        if w.is_empty() {
            return x.len() as u64;
        }
        if w.len() > x.len() {
            return 0;
        }
        x.windows(w.len()).filter(|win| *win == w).count() as u64
    }

    #[test]
    fn five_symbol_tally() {
        let sample = seq("00010");
        let trie = build_counts(&sample, &Alphabet::binary(), 2).unwrap();
        assert_eq!(trie.n_count(&[0]).unwrap(), 4);
        assert_eq!(trie.n_count(&[1]).unwrap(), 1);
        assert_eq!(trie.n_count(&[0, 0]).unwrap(), 2);
        assert_eq!(trie.n_count(&[0, 1]).unwrap(), 1);
        assert_eq!(trie.n_count(&[1, 0]).unwrap(), 1);
        assert_eq!(trie.n_count(&[1, 1]).unwrap(), 0);
        // p_hat(1 | 0) = N(01) / (N(00) + N(01)) = 1/3.
        assert!((trie.p_hat(1, &[0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn alternating_pairs() {
        let sample = seq("0101");
        let trie = build_counts(&sample, &Alphabet::binary(), 2).unwrap();
        assert_eq!(trie.n_count(&[0, 1]).unwrap(), 2);
        assert_eq!(trie.n_count(&[1, 0]).unwrap(), 1);
        assert_eq!(trie.p_hat(1, &[0]).unwrap(), 1.0);
        assert_eq!(trie.p_hat(0, &[1]).unwrap(), 1.0);
    }

    #[test]
    fn level_totals_and_domination() {
        let sample = seq("11010011101001010010110100111010");
        let n = sample.len();
        let d = 6;
        let trie = build_counts(&sample, &Alphabet::binary(), d).unwrap();
        for j in 1..=d {
            let total: u64 = all_strings(d)
                .into_iter()
                .filter(|w| w.len() == j)
                .map(|w| trie.n_count(&w).unwrap())
                .sum();
            assert_eq!(total, (n - j + 1) as u64, "level {j}");
        }
        for w in all_strings(d - 1) {
            for a in 0..2u16 {
                let mut wa = w.clone();
                wa.push(a);
                assert!(trie.n_count(&wa).unwrap() <= trie.n_count(&w).unwrap());
            }
        }
    }

    #[test]
    fn build_rejects_bad_depth() {
        let sample = seq("0101");
        assert!(build_counts(&sample, &Alphabet::binary(), 0).is_err());
        assert!(build_counts(&sample, &Alphabet::binary(), 5).is_err());
        assert!(build_counts(&sample, &Alphabet::binary(), 4).is_ok());
    }

    #[test]
    fn counts_match_hand_tally() {
        let sample = seq("0110100110");
        let trie = build_counts(&sample, &Alphabet::binary(), 3).unwrap();
        assert_eq!(trie.n_count(&[]).unwrap(), 10);
        assert_eq!(trie.n_count(&[0]).unwrap(), 5);
        assert_eq!(trie.n_count(&[1]).unwrap(), 5);
        assert_eq!(trie.n_count(&[0, 1]).unwrap(), 3);
        assert_eq!(trie.n_count(&[1, 0]).unwrap(), 3);
        assert_eq!(trie.n_count(&[1, 1]).unwrap(), 2);
        assert_eq!(trie.n_count(&[0, 0]).unwrap(), 1);
        assert_eq!(trie.n_count(&[0, 1, 0]).unwrap(), 1);
        assert_eq!(trie.n_count(&[0, 1, 1]).unwrap(), 2);
        // p_hat(1 | 0) = N(01) / (N(00) + N(01)) = 3/4.
        assert!((trie.p_hat(1, &[0]).unwrap() - 0.75).abs() < 1e-15);
        // p_hat(0 | 01) = N(010) / (N(010) + N(011)) = 1/3.
        assert!((trie.p_hat(0, &[0, 1]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // The final window 10 is followed by nothing: denominator for w = 10
        // is N(100) + N(101) = 2 even though N(10) = 3.
        assert_eq!(
            trie.follow_count(&[1, 0], 0).unwrap() + trie.follow_count(&[1, 0], 1).unwrap(),
            2
        );
    }

    #[test]
    fn marginal_law_from_empty_string() {
        let sample = seq("0110100110");
        let trie = build_counts(&sample, &Alphabet::binary(), 2).unwrap();
        assert!((trie.p_hat(1, &[]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(trie.law_hat(&[]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn unseen_string_is_uniform() {
        let sample = seq("0000");
        let trie = build_counts(&sample, &Alphabet::binary(), 3).unwrap();
        assert_eq!(trie.n_count(&[1, 1]).unwrap(), 0);
        assert_eq!(trie.p_hat(0, &[1, 1]).unwrap(), 0.5);
        assert_eq!(trie.law_hat(&[1, 1]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn depth_limit_is_enforced() {
        let sample = seq("010101");
        let trie = build_counts(&sample, &Alphabet::binary(), 2).unwrap();
        assert!(matches!(
            trie.n_count(&[0, 1, 0]),
            Err(Error::DepthExceeded { needed: 3, available: 2 })
        ));
        assert!(trie.p_hat(0, &[0, 1, 0]).is_err());
    }

    #[test]
    fn push_equals_batch_build() {
        let sample = seq("0110100110010111");
        let batch = build_counts(&sample, &Alphabet::binary(), 4).unwrap();
        let mut inc = CountTrie::new(Alphabet::binary(), 4);
        for s in sample.iter() {
            inc.push(s);
        }
        for w in all_strings(4) {
            assert_eq!(batch.n_count(&w).unwrap(), inc.n_count(&w).unwrap(), "{w:?}");
            for a in 0..2 {
                assert_eq!(
                    batch.follow_count(&w, a).unwrap(),
                    inc.follow_count(&w, a).unwrap(),
                    "{w:?} -> {a}"
                );
            }
        }
    }

    fn all_strings(max_len: usize) -> Vec<Vec<Symbol>> {
        let mut out = vec![vec![]];
        let mut frontier = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &frontier {
                for a in 0..2 {
                    let mut v = w.clone();
                    v.push(a);
                    next.push(v);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    #[test]
    fn trie_matches_naive_oracle() {
        let sample = seq("11010011101001010010110100111010");
        let x = sample.as_slice();
        let trie = build_counts(&sample, &Alphabet::binary(), 5).unwrap();
        for w in all_strings(5) {
            assert_eq!(trie.n_count(&w).unwrap(), naive_count(x, &w), "N({w:?})");
            if w.len() < 5 {
                for a in 0..2u16 {
                    let mut wa = w.clone();
                    wa.push(a);
                    assert_eq!(
                        trie.follow_count(&w, a).unwrap(),
                        naive_count(x, &wa),
                        "N({w:?}{a})"
                    );
                }
            }
        }
    }

    #[test]
    fn follow_counts_on_deepest_nodes() {
        // Follow counts extend one past the depth: with depth 2, N(wa) is
        // still exact for |w| = 2.
        let sample = seq("0110100110");
        let trie = build_counts(&sample, &Alphabet::binary(), 2).unwrap();
        let x = sample.as_slice();
        for w in all_strings(2).into_iter().filter(|w| w.len() == 2) {
            for a in 0..2u16 {
                let mut wa = w.clone();
                wa.push(a);
                assert_eq!(trie.follow_count(&w, a).unwrap(), naive_count(x, &wa));
            }
        }
    }

    #[test]
    fn visit_enumerates_observed_strings() {
        let sample = seq("0110");
        let trie = build_counts(&sample, &Alphabet::binary(), 3).unwrap();
        let mut seen = Vec::new();
        trie.visit(1, 2, |w, node| {
            seen.push((w.to_vec(), node.count()));
        });
        seen.sort();
        assert_eq!(
            seen,
            vec![
                (vec![0], 2),
                (vec![0, 1], 1),
                (vec![1], 2),
                (vec![1, 0], 1),
                (vec![1, 1], 1),
            ]
        );
    }

    #[test]
    fn node_handles_walk_into_the_past() {
        let sample = seq("0110100110");
        let trie = build_counts(&sample, &Alphabet::binary(), 3).unwrap();
        let node = trie.node_of(&[1, 0]).unwrap();
        assert_eq!(node.count(), 3);
        // Child 0 prepends a symbol: node of 010.
        let child = node.child(0).unwrap();
        assert_eq!(child.count(), trie.n_count(&[0, 1, 0]).unwrap());
        assert_eq!(child.follow(0), trie.follow_count(&[0, 1, 0], 0).unwrap());
    }
}
