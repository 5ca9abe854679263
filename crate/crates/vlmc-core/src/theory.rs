//! Exact evaluation of the theoretical quantities attached to a tree:
//! cylinder probabilities, conditional laws of arbitrary finite pasts, the
//! canonical Markov approximation, the separation constants D_m and
//! epsilon_m, the non-nullness sequence alpha_n, the continuity rate
//! beta(k), and the two closed-form exponential bounds (deviation of the
//! empirical conditionals, and truncated-tree recovery).
//!
//! Bounded trees are evaluated through their stationary window law; the
//! renewal family through closed forms in the survival function
//! S_k = prod_{j<k}(1 - q_j) and its tails, so no truncation error enters.

use std::collections::{BTreeSet, HashMap};

use crate::alphabet::Symbol;
use crate::error::{Error, Result};
use crate::sampler::{stationary_law, RenewalSpec, StationaryLaw};
use crate::tree::{truncate_tree, ProbabilisticContextTree};

enum Source<'a> {
    Renewal(&'a RenewalSpec),
    Bounded(StationaryLaw),
}

fn source_of(pct: &ProbabilisticContextTree) -> Result<Source<'_>> {
    if pct.tree().is_empty() {
        return Err(Error::Precondition("tree has no contexts".into()));
    }
    match pct.renewal() {
        Some(spec) => Ok(Source::Renewal(spec)),
        None => Ok(Source::Bounded(stationary_law(pct)?)),
    }
}

/// Trailing zero-run length when `w` contains a 1.
fn renewal_age(w: &[Symbol]) -> Option<usize> {
    w.iter().rev().position(|&s| s == 1)
}

/// P(w) for the stationary renewal chain: S_z * R / E where z is the offset
/// of the first 1, R the kernel probability of the remainder after that
/// renewal, and E the expected gap; all-zero strings get tail_sum(j) / E.
fn renewal_cylinder(spec: &RenewalSpec, w: &[Symbol]) -> Result<f64> {
    let e = spec.expected_gap()?;
    match w.iter().position(|&s| s == 1) {
        None => Ok(spec.tail_sum(w.len())? / e),
        Some(z) => {
            let mut r = 1.0;
            let mut age = 0usize;
            for &s in &w[z + 1..] {
                let q = spec.q(age);
                if s == 1 {
                    r *= q;
                    age = 0;
                } else {
                    r *= 1.0 - q;
                    age += 1;
                }
            }
            Ok(spec.survival(z) * r / e)
        }
    }
}

fn bounded_cylinder(
    pct: &ProbabilisticContextTree,
    law: &StationaryLaw,
    w: &[Symbol],
) -> Result<f64> {
    let order = law.order();
    if w.len() <= order {
        return Ok(law.suffix_prob(w));
    }
    let mut p = law.window_prob(&w[..order]);
    for t in order..w.len() {
        if p == 0.0 {
            return Ok(0.0);
        }
        let row = pct.law_of_past(&w[..t]).ok_or_else(|| {
            Error::Precondition("tree does not determine the law of some window".into())
        })?;
        p *= row[w[t] as usize];
    }
    Ok(p)
}

fn cyl_with(pct: &ProbabilisticContextTree, src: &Source<'_>, w: &[Symbol]) -> Result<f64> {
    match src {
        Source::Renewal(spec) => renewal_cylinder(spec, w),
        Source::Bounded(law) => bounded_cylinder(pct, law, w),
    }
}

fn cond_with(pct: &ProbabilisticContextTree, src: &Source<'_>, w: &[Symbol]) -> Result<Vec<f64>> {
    let cyl = cyl_with(pct, src, w)?;
    if cyl <= 0.0 {
        return Err(Error::Precondition(format!(
            "conditioning string {:?} has probability zero",
            pct.alphabet().render(w)
        )));
    }
    match src {
        Source::Renewal(spec) => {
            let p1 = match renewal_age(w) {
                Some(g) => spec.q(g),
                None if w.is_empty() => 1.0 / spec.expected_gap()?,
                None => spec.survival(w.len()) / spec.tail_sum(w.len())?,
            };
            Ok(vec![1.0 - p1, p1])
        }
        Source::Bounded(_) => {
            if let Some(ctx) = pct.context_of(w) {
                return Ok(pct
                    .row(ctx.symbols())
                    .expect("bounded trees carry a row per context")
                    .to_vec());
            }
            let asize = pct.alphabet().size();
            let mut out = Vec::with_capacity(asize);
            let mut wa = w.to_vec();
            for a in 0..asize {
                wa.push(a as Symbol);
                out.push(cyl_with(pct, src, &wa)? / cyl);
                wa.pop();
            }
            Ok(out)
        }
    }
}

/// Stationary probability P(X_1^j = w).
pub fn cylinder_probability(pct: &ProbabilisticContextTree, w: &[Symbol]) -> Result<f64> {
    pct.alphabet().check_symbols(w)?;
    let src = source_of(pct)?;
    cyl_with(pct, &src, w)
}

/// Law of the next symbol given the finite past `w`: the context's row when
/// a context is a suffix of w, the stationary mixture of cylinder ratios
/// when w sits strictly inside the tree, the marginal of a single symbol
/// when w is empty. Errors when P(w) = 0.
pub fn conditional_law(pct: &ProbabilisticContextTree, w: &[Symbol]) -> Result<Vec<f64>> {
    pct.alphabet().check_symbols(w)?;
    let src = source_of(pct)?;
    cond_with(pct, &src, w)
}

/// The order-k canonical approximation: the tree truncated at k, original
/// rows at contexts that survive whole, the exact conditional law at the
/// length-k truncation stubs.
pub fn canonical_approximation(
    pct: &ProbabilisticContextTree,
    k: usize,
) -> Result<ProbabilisticContextTree> {
    let src = source_of(pct)?;
    let tree = truncate_tree(pct.tree(), k)?;
    let mut rows = Vec::with_capacity(tree.len());
    for ctx in tree.context_set() {
        let row = match &src {
            Source::Renewal(spec) => match renewal_age(ctx) {
                Some(g) => {
                    let q = spec.q(g);
                    vec![1.0 - q, q]
                }
                None => cond_with(pct, &src, ctx)?,
            },
            Source::Bounded(_) => {
                if pct.tree().contains(ctx) {
                    pct.row(ctx).expect("row per context").to_vec()
                } else {
                    cond_with(pct, &src, ctx)?
                }
            }
        };
        rows.push((ctx.clone(), row));
    }
    ProbabilisticContextTree::new(tree, rows)
}

/// D_m: the minimum over contexts of length <= m of the largest change in
/// the next-symbol law when the context's oldest symbol is dropped. This is
/// the separation the threshold estimator must resolve.
pub fn d_m(pct: &ProbabilisticContextTree, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Precondition("D_m needs m >= 1".into()));
    }
    let src = source_of(pct)?;
    let mut best: Option<f64> = None;
    let mut consider = |row: &[f64], parent: &[Symbol]| -> Result<()> {
        let cond = cond_with(pct, &src, parent)?;
        let gap = row
            .iter()
            .zip(&cond)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        best = Some(best.map_or(gap, |b: f64| b.min(gap)));
        Ok(())
    };
    match &src {
        Source::Renewal(spec) => {
            for j in 0..m {
                let q = spec.q(j);
                consider(&[1.0 - q, q], &vec![0; j])?;
            }
        }
        Source::Bounded(_) => {
            for (ctx, row) in pct.iter() {
                if ctx.len() <= m {
                    consider(row, &ctx[1..])?;
                }
            }
        }
    }
    best.ok_or_else(|| Error::Precondition(format!("no context of length <= {m}")))
}

/// epsilon_m: the smallest positive cylinder probability among strings of
/// length <= m. By default the strings range over contexts and truncation
/// stubs (the cylinders the recovery bound actually guards);
/// `all_strings` widens the range to every string of length <= m.
pub fn epsilon_m(pct: &ProbabilisticContextTree, m: usize, all_strings: bool) -> Result<f64> {
    if m == 0 {
        return Err(Error::Precondition("epsilon_m needs m >= 1".into()));
    }
    let src = source_of(pct)?;
    let asize = pct.alphabet().size();
    let mut candidates: BTreeSet<Vec<Symbol>> = BTreeSet::new();
    if all_strings {
        let total: usize = (1..=m)
            .map(|j| asize.checked_pow(j as u32).unwrap_or(usize::MAX))
            .fold(0usize, usize::saturating_add);
        if total > (1 << 22) {
            return Err(Error::Unsupported(format!(
                "enumerating all strings of length <= {m} over {asize} symbols is too large"
            )));
        }
        let mut frontier: Vec<Vec<Symbol>> = vec![Vec::new()];
        for _ in 0..m {
            let mut next = Vec::new();
            for w in &frontier {
                for a in 0..asize {
                    let mut v = w.clone();
                    v.push(a as Symbol);
                    candidates.insert(v.clone());
                    next.push(v);
                }
            }
            frontier = next;
        }
    } else {
        for j in 1..=m {
            for ctx in truncate_tree(pct.tree(), j)?.context_set() {
                candidates.insert(ctx.clone());
            }
        }
    }
    let mut best: Option<f64> = None;
    for w in &candidates {
        let p = cyl_with(pct, &src, w)?;
        if p > 0.0 {
            best = Some(best.map_or(p, |b: f64| b.min(p)));
        }
    }
    best.ok_or_else(|| Error::Numeric("no candidate string has positive probability".into()))
}

/// The non-nullness sequence. `alpha0` sums, over symbols, the worst-case
/// conditional probability across all contexts; `alphas[i]` is alpha_{i+1},
/// where alpha_n takes the worst string of length n and sums the infima of
/// p(a|y) over contexts y of length >= n extending it (strings extended by
/// no such context are skipped; when no context has length >= n at all,
/// alpha_n = 1). `alpha` is the exact sum of (1 - alpha_n) over all n >= 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaStats {
    pub alpha0: f64,
    pub alphas: Vec<f64>,
    pub alpha: f64,
}

impl AlphaStats {
    /// The exponential-bound constant C = alpha0 / (8e (alpha + alpha0)).
    pub fn c_constant(&self) -> f64 {
        self.alpha0 / (8.0 * std::f64::consts::E * (self.alpha + self.alpha0))
    }

    /// Upper bound 1 + 2 alpha / alpha0 on the summed loss-of-memory
    /// coefficients; a mixing diagnostic.
    pub fn rho_sum_bound(&self) -> f64 {
        1.0 + 2.0 * self.alpha / self.alpha0
    }
}

fn alpha_n_bounded(entries: &[(&[Symbol], &[f64])], asize: usize, n: usize) -> f64 {
    let mut groups: HashMap<&[Symbol], Vec<f64>> = HashMap::new();
    for (ctx, row) in entries {
        if ctx.len() >= n {
            let mins = groups
                .entry(&ctx[ctx.len() - n..])
                .or_insert_with(|| vec![f64::INFINITY; asize]);
            for a in 0..asize {
                mins[a] = mins[a].min(row[a]);
            }
        }
    }
    if groups.is_empty() {
        return 1.0;
    }
    groups
        .values()
        .map(|mins| mins.iter().sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Evaluates alpha_0, alpha_1..alpha_{n_max}, and the exact alpha sum.
pub fn alpha_stats(pct: &ProbabilisticContextTree, n_max: usize) -> Result<AlphaStats> {
    if pct.tree().is_empty() {
        return Err(Error::Precondition("tree has no contexts".into()));
    }
    if let Some(spec) = pct.renewal() {
        let a_n = |n: usize| 1.0 - spec.q_sup(n) + spec.q_inf(n);
        let alphas: Vec<f64> = (1..=n_max).map(a_n).collect();
        let alpha = match spec.rule() {
            crate::sampler::QRule::List { head, .. } => {
                (0..=head.len()).map(|n| spec.q_sup(n) - spec.q_inf(n)).sum()
            }
            crate::sampler::QRule::Geometric { c, r } => {
                if *r >= 1.0 {
                    0.0
                } else {
                    c / (1.0 - r)
                }
            }
        };
        return Ok(AlphaStats { alpha0: a_n(0), alphas, alpha });
    }
    let entries: Vec<(&[Symbol], &[f64])> = pct.iter().collect();
    let asize = pct.alphabet().size();
    let height = entries.iter().map(|(c, _)| c.len()).max().unwrap_or(0);
    let alpha0 = alpha_n_bounded(&entries, asize, 0);
    let alphas: Vec<f64> = (1..=n_max)
        .map(|n| alpha_n_bounded(&entries, asize, n))
        .collect();
    let alpha = (0..=height)
        .map(|n| 1.0 - alpha_n_bounded(&entries, asize, n))
        .sum();
    Ok(AlphaStats { alpha0, alphas, alpha })
}

/// Continuity rate: for k >= 1, the largest possible change of p(a|.)
/// between two contexts agreeing on their most recent k symbols; beta(0)
/// ranges over context pairs that differ in the most recent symbol.
pub fn beta_k(pct: &ProbabilisticContextTree, k: usize) -> Result<f64> {
    if pct.tree().is_empty() {
        return Err(Error::Precondition("tree has no contexts".into()));
    }
    if let Some(spec) = pct.renewal() {
        if k >= 1 {
            return Ok(spec.q_sup(k) - spec.q_inf(k));
        }
        let q0 = spec.q(0);
        return Ok((q0 - spec.q_sup(1)).abs().max((q0 - spec.q_inf(1)).abs()));
    }
    let asize = pct.alphabet().size();
    if k >= 1 {
        let mut groups: HashMap<&[Symbol], Vec<(f64, f64)>> = HashMap::new();
        for (ctx, row) in pct.iter() {
            if ctx.len() >= k {
                let spans = groups
                    .entry(&ctx[ctx.len() - k..])
                    .or_insert_with(|| vec![(f64::INFINITY, f64::NEG_INFINITY); asize]);
                for a in 0..asize {
                    spans[a].0 = spans[a].0.min(row[a]);
                    spans[a].1 = spans[a].1.max(row[a]);
                }
            }
        }
        return Ok(groups
            .values()
            .flat_map(|spans| spans.iter().map(|(lo, hi)| hi - lo))
            .fold(0.0, f64::max));
    }
    // beta(0): spans per most-recent symbol, compared across symbols.
    let mut groups: HashMap<Symbol, Vec<(f64, f64)>> = HashMap::new();
    for (ctx, row) in pct.iter() {
        let spans = groups
            .entry(ctx[ctx.len() - 1])
            .or_insert_with(|| vec![(f64::INFINITY, f64::NEG_INFINITY); asize]);
        for a in 0..asize {
            spans[a].0 = spans[a].0.min(row[a]);
            spans[a].1 = spans[a].1.max(row[a]);
        }
    }
    let keys: Vec<Symbol> = groups.keys().copied().collect();
    let mut best = 0.0f64;
    for &s in &keys {
        for &t in &keys {
            if s == t {
                continue;
            }
            for (hi, lo) in groups[&s].iter().zip(groups[&t].iter()) {
                best = best.max(hi.1 - lo.0);
            }
        }
    }
    Ok(best)
}

/// The smallest admissible estimator height for recovering the tree
/// truncated at K: one more than the largest, over elements x of the
/// truncated tree, of the shortest true context whose depth-K suffix
/// agreement covers x (a surviving context counts its own length).
pub fn min_k_condition(pct: &ProbabilisticContextTree, truncation: usize) -> Result<usize> {
    if pct.renewal().is_some() {
        if truncation == 0 {
            return Err(Error::Precondition("truncation level must be >= 1".into()));
        }
        // Contexts 1 0^j with j < K keep their length <= K; the stub 0^K is
        // matched by 1 0^K of length K + 1.
        return Ok(truncation + 2);
    }
    let trunc = truncate_tree(pct.tree(), truncation)?;
    let mut worst = 0usize;
    for x in trunc.context_set() {
        let need = if pct.tree().contains(x) {
            x.len()
        } else {
            pct.tree()
                .context_set()
                .iter()
                .filter(|y| y.len() >= truncation && y[y.len() - truncation..] == x[..])
                .map(|y| y.len())
                .min()
                .ok_or_else(|| {
                    Error::Precondition(format!(
                        "truncation stub {:?} matches no context",
                        pct.alphabet().render(x)
                    ))
                })?
        };
        worst = worst.max(need);
    }
    Ok(worst + 1)
}

/// Inputs of the empirical-conditional deviation bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationInputs {
    /// Sample size.
    pub n: usize,
    /// Length of the conditioning string.
    pub k: usize,
    /// Deviation threshold.
    pub t: f64,
    /// Cylinder probability of the conditioning string.
    pub p_w: f64,
    pub alphabet_size: usize,
    pub alpha0: f64,
    pub alpha: f64,
}

fn exp_constant(alpha0: f64, alpha: f64) -> f64 {
    alpha0 / (8.0 * std::f64::consts::E * (alpha + alpha0))
}

fn check_positive(pairs: &[(&str, f64)]) -> Result<()> {
    for (name, v) in pairs {
        if !v.is_finite() || *v <= 0.0 {
            return Err(Error::Precondition(format!(
                "{name} = {v} must be positive and finite"
            )));
        }
    }
    Ok(())
}

/// P(|p_hat(a|w) - p(a|w)| > t) <= 2|A| e^{1/e}
/// exp[-(n-k) (t - (|A|+1)/((n-k) p_w))^2 p_w^2 C / (4 |A|^2 (k+1))].
/// Requires (n-k) t p_w >= |A|+1; at equality the exponent vanishes and the
/// bound equals its prefactor.
pub fn deviation_bound(inp: &DeviationInputs) -> Result<f64> {
    check_positive(&[
        ("t", inp.t),
        ("p_w", inp.p_w),
        ("alpha0", inp.alpha0),
    ])?;
    if inp.alpha < 0.0 || !inp.alpha.is_finite() {
        return Err(Error::Precondition(format!(
            "alpha = {} must be nonnegative and finite",
            inp.alpha
        )));
    }
    if inp.alphabet_size < 2 {
        return Err(Error::Precondition("alphabet size must be >= 2".into()));
    }
    if inp.n <= inp.k {
        return Err(Error::Precondition(format!(
            "n = {} must exceed the string length k = {}",
            inp.n, inp.k
        )));
    }
    let a = inp.alphabet_size as f64;
    let nk = (inp.n - inp.k) as f64;
    if nk * inp.t * inp.p_w < a + 1.0 {
        return Err(Error::Precondition(format!(
            "theorem precondition not met: need n > (|A|+1)/(t p_w) + k = {}",
            (a + 1.0) / (inp.t * inp.p_w) + inp.k as f64
        )));
    }
    let c = exp_constant(inp.alpha0, inp.alpha);
    let bracket = inp.t - (a + 1.0) / (nk * inp.p_w);
    let exponent = -nk * bracket * bracket * inp.p_w * inp.p_w * c / (4.0 * a * a * (inp.k as f64 + 1.0));
    Ok(2.0 * a * (1.0f64 / std::f64::consts::E).exp() * exponent.exp())
}

/// Deviation bound for a concrete tree and conditioning string: fills p_w
/// and the alpha constants from the tree.
pub fn deviation_bound_for(
    pct: &ProbabilisticContextTree,
    w: &[Symbol],
    t: f64,
    n: usize,
) -> Result<f64> {
    let stats = alpha_stats(pct, 0)?;
    let p_w = cylinder_probability(pct, w)?;
    deviation_bound(&DeviationInputs {
        n,
        k: w.len(),
        t,
        p_w,
        alphabet_size: pct.alphabet().size(),
        alpha0: stats.alpha0,
        alpha: stats.alpha,
    })
}

/// Inputs of the truncated-tree recovery bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    /// Sample size.
    pub n: usize,
    /// Estimator height.
    pub k: usize,
    /// Truncation level K being recovered.
    pub truncation: usize,
    /// Pruning threshold.
    pub delta: f64,
    pub alphabet_size: usize,
    /// D_k of the tree.
    pub d_k: f64,
    /// epsilon_k of the tree.
    pub eps_k: f64,
    pub alpha0: f64,
    pub alpha: f64,
    /// Smallest admissible k for this truncation (from `min_k_condition`).
    pub min_k: usize,
}

/// P(estimated tree truncated at K differs from the true truncation) <=
/// 4 e^{1/e} |A|^{k+2}
/// exp[-(n-k) (min(d/2,(D_k-d)/2) - (|A|+1)/((n-k) eps_k))^2 eps_k^2 C
///     / (4 |A|^2 (k+1))].
/// Preconditions, each reported by name: k >= min_k, delta < D_k, and
/// n > 2(|A|+1)/(min(delta, D_k - delta) eps_k) + k.
pub fn recovery_bound(inp: &BoundInputs) -> Result<f64> {
    check_positive(&[
        ("delta", inp.delta),
        ("D_k", inp.d_k),
        ("eps_k", inp.eps_k),
        ("alpha0", inp.alpha0),
    ])?;
    if inp.alpha < 0.0 || !inp.alpha.is_finite() {
        return Err(Error::Precondition(format!(
            "alpha = {} must be nonnegative and finite",
            inp.alpha
        )));
    }
    if inp.alphabet_size < 2 {
        return Err(Error::Precondition("alphabet size must be >= 2".into()));
    }
    if inp.k < inp.min_k {
        return Err(Error::Precondition(format!(
            "estimator height k = {} violates the depth condition: need k >= {} for truncation level {}",
            inp.k, inp.min_k, inp.truncation
        )));
    }
    if inp.delta >= inp.d_k {
        return Err(Error::Precondition(format!(
            "threshold delta = {} must lie below D_k = {}",
            inp.delta, inp.d_k
        )));
    }
    if inp.n <= inp.k {
        return Err(Error::Precondition(format!(
            "n = {} must exceed the estimator height k = {}",
            inp.n, inp.k
        )));
    }
    let a = inp.alphabet_size as f64;
    let nk = (inp.n - inp.k) as f64;
    let margin = inp.delta.min(inp.d_k - inp.delta);
    if nk * margin * inp.eps_k <= 2.0 * (a + 1.0) {
        return Err(Error::Precondition(format!(
            "sample size n = {} is at or below the theorem lower bound {}",
            inp.n,
            2.0 * (a + 1.0) / (margin * inp.eps_k) + inp.k as f64
        )));
    }
    let c = exp_constant(inp.alpha0, inp.alpha);
    let bracket = margin / 2.0 - (a + 1.0) / (nk * inp.eps_k);
    let exponent =
        -nk * bracket * bracket * inp.eps_k * inp.eps_k * c / (4.0 * a * a * (inp.k as f64 + 1.0));
    Ok(4.0 * (1.0f64 / std::f64::consts::E).exp() * a.powi(inp.k as i32 + 2) * exponent.exp())
}

/// Recovery bound for a concrete tree: fills D_k, epsilon_k, the alpha
/// constants, and the minimal admissible height from the tree.
pub fn recovery_bound_for(
    pct: &ProbabilisticContextTree,
    truncation: usize,
    k: usize,
    delta: f64,
    n: usize,
) -> Result<f64> {
    let stats = alpha_stats(pct, 0)?;
    recovery_bound(&BoundInputs {
        n,
        k,
        truncation,
        delta,
        alphabet_size: pct.alphabet().size(),
        d_k: d_m(pct, k)?,
        eps_k: epsilon_m(pct, k, false)?,
        alpha0: stats.alpha0,
        alpha: stats.alpha,
        min_k: min_k_condition(pct, truncation)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;
    use crate::sampler::{renewal_tree, sample_path, QRule};
    use crate::tree::{compare_trees, iid_uniform_binary, ref_tree, validate_tree, ContextTree};
    use std::collections::BTreeSet;

    fn all_strings(max_len: usize) -> Vec<Vec<Symbol>> {
        let mut out: Vec<Vec<Symbol>> = vec![];
        let mut frontier = vec![Vec::new()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &frontier {
                for a in 0..2u16 {
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
    fn ref_cylinders_match_hand_values() {
        let pct = ref_tree();
        let cases = [
            (vec![1], 5.0 / 12.0),
            (vec![0], 7.0 / 12.0),
            (vec![1, 0], 7.0 / 24.0),
            (vec![0, 0], 7.0 / 24.0),
            (vec![0, 1], 7.0 / 24.0),
            (vec![1, 1], 1.0 / 8.0),
            // P(010) = P(01) * p(0 | past 01) with context "1".
            (vec![0, 1, 0], 7.0 / 24.0 * 0.7),
        ];
        for (w, want) in cases {
            let got = cylinder_probability(&pct, &w).unwrap();
            assert!((got - want).abs() < 1e-13, "{w:?}: {got} vs {want}");
        }
        for j in 1..=4 {
            let total: f64 = all_strings(j)
                .into_iter()
                .filter(|w| w.len() == j)
                .map(|w| cylinder_probability(&pct, &w).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "level {j} sums to {total}");
        }
    }

    #[test]
    fn iid_cylinder_is_product() {
        let pct = iid_uniform_binary();
        assert!((cylinder_probability(&pct, &[0, 1]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn renewal_cylinders_closed_form() {
        let spec = RenewalSpec::constant(0.5).unwrap();
        let pct = renewal_tree(&spec, 3).unwrap();
        assert!((cylinder_probability(&pct, &[1]).unwrap() - 0.5).abs() < 1e-15);
        assert!((cylinder_probability(&pct, &[0, 0, 0]).unwrap() - 0.125).abs() < 1e-15);
        assert!((cylinder_probability(&pct, &[0, 1]).unwrap() - 0.25).abs() < 1e-15);
        let total: f64 = all_strings(3)
            .into_iter()
            .filter(|w| w.len() == 3)
            .map(|w| cylinder_probability(&pct, &w).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ref_cylinder_matches_empirical_frequency() {
        let pct = ref_tree();
        let n = 1_000_000;
        let path = sample_path(&pct, n, 1234).unwrap();
        let x = path.as_slice();
        let count = x.windows(2).filter(|w| w == &[1, 0]).count() as f64;
        let freq = count / (n - 1) as f64;
        let p = cylinder_probability(&pct, &[1, 0]).unwrap();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() <= 4.0 * se, "freq {freq} vs {p}");
    }

    #[test]
    fn conditional_law_cases() {
        let pct = ref_tree();
        // Full context: the exact row.
        assert_eq!(conditional_law(&pct, &[1, 0]).unwrap(), vec![0.2, 0.8]);
        // Internal node "0": P(1|0) = P(01)/P(0) = 1/2.
        let law = conditional_law(&pct, &[0]).unwrap();
        assert!((law[1] - 0.5).abs() < 1e-13);
        // Empty past: the stationary marginal.
        let marginal = conditional_law(&pct, &[]).unwrap();
        assert!((marginal[1] - 5.0 / 12.0).abs() < 1e-13);
        // Rows sum to one.
        for w in all_strings(3) {
            let law = conditional_law(&pct, &w).unwrap();
            assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conditionals_and_cylinders_are_consistent() {
        // P(wa) = P(w) * p(a | w) for every string.
        let pct = ref_tree();
        for w in all_strings(3) {
            let pw = cylinder_probability(&pct, &w).unwrap();
            let law = conditional_law(&pct, &w).unwrap();
            for a in 0..2u16 {
                let mut wa = w.clone();
                wa.push(a);
                let pwa = cylinder_probability(&pct, &wa).unwrap();
                assert!((pwa - pw * law[a as usize]).abs() < 1e-13, "{w:?} {a}");
            }
        }
    }

    #[test]
    fn conditional_rejects_zero_probability_past() {
        let alphabet = Alphabet::binary();
        let contexts: BTreeSet<Vec<u16>> = [vec![0], vec![1]].into_iter().collect();
        let tree = ContextTree::new(alphabet, contexts).unwrap();
        let pct = ProbabilisticContextTree::new(
            tree,
            [(vec![0], vec![0.5, 0.5]), (vec![1], vec![1.0, 0.0])],
        )
        .unwrap();
        assert!(matches!(
            conditional_law(&pct, &[1, 1]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn canonical_approximation_fixed_point_at_height() {
        let pct = ref_tree();
        let canon = canonical_approximation(&pct, 2).unwrap();
        let diff = compare_trees(canon.tree(), pct.tree(), None).unwrap();
        assert!(diff.equal);
        for ((_, a), (_, b)) in canon.iter().zip(pct.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn canonical_approximation_mixes_at_stubs() {
        let pct = ref_tree();
        let canon = canonical_approximation(&pct, 1).unwrap();
        assert_eq!(
            canon.iter().map(|(c, _)| c.to_vec()).collect::<Vec<_>>(),
            vec![vec![0], vec![1]]
        );
        assert_eq!(canon.row(&[1]).unwrap(), &[0.7, 0.3]);
        let row0 = canon.row(&[0]).unwrap();
        assert!((row0[1] - 0.5).abs() < 1e-13);
        assert!(validate_tree(&canon).is_valid());
    }

    #[test]
    fn canonical_approximation_renewal_tail_mixture() {
        let spec =
            RenewalSpec::new(QRule::List { head: vec![0.5, 0.3, 0.8], tail: 0.6 }).unwrap();
        let pct = renewal_tree(&spec, 6).unwrap();
        let canon = canonical_approximation(&pct, 2).unwrap();
        let names: Vec<String> = canon.iter().map(|(c, _)| canon.alphabet().render(c)).collect();
        assert_eq!(names, vec!["00", "1", "10"]);
        assert_eq!(canon.row(&[1]).unwrap(), &[0.5, 0.5]);
        assert_eq!(canon.row(&[1, 0]).unwrap(), &[0.7, 0.3]);
        // p(1 | 00) = S_2 / (S_2 + S_3 / 0.6) = 0.35 / (0.35 + 0.07/0.6).
        let row = canon.row(&[0, 0]).unwrap();
        assert!((row[1] - 0.75).abs() < 1e-12, "stub row {row:?}");
        assert!(validate_tree(&canon).is_valid());
    }

    #[test]
    fn d_m_ref_values() {
        let pct = ref_tree();
        // Context "1" against the marginal: |0.3 - 5/12| = 7/60, and both
        // length-2 contexts give 0.3, so the minimum stays 7/60.
        for m in [1, 2, 4] {
            let d = d_m(&pct, m).unwrap();
            assert!((d - 7.0 / 60.0).abs() < 1e-13, "D_{m} = {d}");
        }
    }

    #[test]
    fn d_m_degenerate_split_is_zero() {
        // Both rows equal: dropping the oldest symbol changes nothing.
        let d = d_m(&iid_uniform_binary(), 1).unwrap();
        assert!(d.abs() < 1e-15);
    }

    #[test]
    fn d_m_errors_without_short_contexts() {
        let alphabet = Alphabet::binary();
        let contexts: BTreeSet<Vec<u16>> =
            [vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]].into_iter().collect();
        let tree = ContextTree::new(alphabet, contexts).unwrap();
        let pct = ProbabilisticContextTree::new(
            tree,
            [
                (vec![0, 0], vec![0.4, 0.6]),
                (vec![0, 1], vec![0.5, 0.5]),
                (vec![1, 0], vec![0.6, 0.4]),
                (vec![1, 1], vec![0.3, 0.7]),
            ],
        )
        .unwrap();
        assert!(d_m(&pct, 1).is_err());
        assert!(d_m(&pct, 2).is_ok());
    }

    #[test]
    fn epsilon_m_values() {
        let pct = ref_tree();
        assert!((epsilon_m(&pct, 1, false).unwrap() - 5.0 / 12.0).abs() < 1e-13);
        assert!((epsilon_m(&pct, 2, false).unwrap() - 7.0 / 24.0).abs() < 1e-13);
        // Over all strings the rare "11" cylinder enters.
        assert!((epsilon_m(&pct, 2, true).unwrap() - 1.0 / 8.0).abs() < 1e-13);
        assert!((epsilon_m(&iid_uniform_binary(), 1, false).unwrap() - 0.5).abs() < 1e-15);
        let mut last = f64::INFINITY;
        for m in 1..=5 {
            let e = epsilon_m(&pct, m, false).unwrap();
            assert!(e <= last + 1e-15, "epsilon increased at m = {m}");
            last = e;
        }
    }

    #[test]
    fn alpha_stats_ref_tree() {
        let stats = alpha_stats(&ref_tree(), 3).unwrap();
        assert!((stats.alpha0 - 0.4).abs() < 1e-15);
        assert_eq!(stats.alphas.len(), 3);
        assert!((stats.alphas[0] - 0.4).abs() < 1e-15);
        assert!((stats.alphas[1] - 1.0).abs() < 1e-15);
        assert!((stats.alphas[2] - 1.0).abs() < 1e-15);
        assert!((stats.alpha - 1.2).abs() < 1e-14);
        assert!((stats.rho_sum_bound() - 7.0).abs() < 1e-13);
        let c = stats.c_constant();
        assert!((c - 1.0 / (32.0 * std::f64::consts::E)).abs() < 1e-15);
    }

    #[test]
    fn alpha_stats_renewal_closed_forms() {
        let constant = renewal_tree(&RenewalSpec::constant(0.3).unwrap(), 4).unwrap();
        let stats = alpha_stats(&constant, 2).unwrap();
        assert!((stats.alpha0 - 1.0).abs() < 1e-15);
        assert!(stats.alphas.iter().all(|&a| (a - 1.0).abs() < 1e-15));
        assert!(stats.alpha.abs() < 1e-15);

        let spec =
            RenewalSpec::new(QRule::List { head: vec![0.5, 0.2], tail: 0.4 }).unwrap();
        let pct = renewal_tree(&spec, 4).unwrap();
        let stats = alpha_stats(&pct, 3).unwrap();
        assert!((stats.alpha0 - 0.7).abs() < 1e-15);
        assert!((stats.alphas[0] - 0.8).abs() < 1e-15);
        assert!((stats.alphas[1] - 1.0).abs() < 1e-15);
        assert!((stats.alpha - 0.5).abs() < 1e-15);
    }

    #[test]
    fn alpha_is_nonnegative_and_bounded_for_weakly_non_null_trees() {
        for pct in [ref_tree(), iid_uniform_binary()] {
            let stats = alpha_stats(&pct, 2).unwrap();
            assert!(stats.alpha0 > 0.0 && stats.alpha0 <= 1.0);
            assert!(stats.alpha >= 1.0 - stats.alpha0 - 1e-15);
        }
    }

    #[test]
    fn beta_values() {
        let pct = ref_tree();
        assert!((beta_k(&pct, 0).unwrap() - 0.5).abs() < 1e-15);
        assert!((beta_k(&pct, 1).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(beta_k(&pct, 2).unwrap(), 0.0);
        assert_eq!(beta_k(&pct, 5).unwrap(), 0.0);
        for k in 0..3 {
            assert_eq!(beta_k(&iid_uniform_binary(), k).unwrap(), 0.0);
        }
        let spec =
            RenewalSpec::new(QRule::List { head: vec![0.9, 0.1], tail: 0.5 }).unwrap();
        let pct = renewal_tree(&spec, 4).unwrap();
        assert!((beta_k(&pct, 1).unwrap() - 0.4).abs() < 1e-15);
        assert!((beta_k(&pct, 0).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn min_k_values() {
        let pct = ref_tree();
        assert_eq!(min_k_condition(&pct, 1).unwrap(), 3);
        assert_eq!(min_k_condition(&pct, 2).unwrap(), 3);
        assert_eq!(min_k_condition(&pct, 4).unwrap(), 3);
        let renewal = renewal_tree(&RenewalSpec::constant(0.5).unwrap(), 4).unwrap();
        assert_eq!(min_k_condition(&renewal, 2).unwrap(), 4);
        assert_eq!(min_k_condition(&renewal, 3).unwrap(), 5);
    }

    #[test]
    fn deviation_bound_formula() {
        let pct = ref_tree();
        let n = 1_000_000;
        let got = deviation_bound_for(&pct, &[1, 0], 0.05, n).unwrap();
        // Independent re-evaluation with the constants written out.
        let (a, t, p_w, k) = (2.0f64, 0.05f64, 7.0 / 24.0, 2.0f64);
        let c = 0.4 / (8.0 * std::f64::consts::E * (1.2 + 0.4));
        let nk = n as f64 - k;
        let bracket = t - (a + 1.0) / (nk * p_w);
        let want = 2.0
            * a
            * (1.0f64 / std::f64::consts::E).exp()
            * (-nk * bracket * bracket * p_w * p_w * c / (4.0 * a * a * (k + 1.0))).exp();
        assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
        assert!((got - 5.4918).abs() < 1e-3, "{got}");
    }

    #[test]
    fn deviation_bound_boundary_and_monotonicity() {
        // (n-k) t p_w = |A|+1 exactly: the exponent vanishes.
        let inp = DeviationInputs {
            n: 60,
            k: 0,
            t: 0.1,
            p_w: 0.5,
            alphabet_size: 2,
            alpha0: 0.4,
            alpha: 1.2,
        };
        let got = deviation_bound(&inp).unwrap();
        let want = 4.0 * (1.0f64 / std::f64::consts::E).exp();
        assert!((got - want).abs() < 1e-12);
        assert!(deviation_bound(&DeviationInputs { n: 59, ..inp.clone() }).is_err());
        let mut last = f64::INFINITY;
        for n in [100, 1000, 10_000, 100_000] {
            let b = deviation_bound(&DeviationInputs { n, ..inp.clone() }).unwrap();
            assert!(b < last);
            last = b;
        }
    }

    #[test]
    fn recovery_bound_formula() {
        let pct = ref_tree();
        let n = 1_000_000;
        let got = recovery_bound_for(&pct, 2, 3, 0.1, n).unwrap();
        let (a, delta, d_k, eps, k) = (2.0f64, 0.1f64, 7.0 / 60.0, 7.0 / 24.0, 3.0f64);
        let c = 0.4 / (8.0 * std::f64::consts::E * (1.2 + 0.4));
        let nk = n as f64 - k;
        let bracket = (delta / 2.0).min((d_k - delta) / 2.0) - (a + 1.0) / (nk * eps);
        let want = 4.0
            * (1.0f64 / std::f64::consts::E).exp()
            * a.powi(5)
            * (-nk * bracket * bracket * eps * eps * c / (4.0 * a * a * (k + 1.0))).exp();
        assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
        assert!((got - 184.72).abs() < 0.01, "{got}");
    }

    #[test]
    fn recovery_bound_preconditions_named() {
        let pct = ref_tree();
        let err = recovery_bound_for(&pct, 2, 2, 0.1, 1_000_000).unwrap_err();
        assert!(err.to_string().contains("depth condition"), "{err}");
        let err = recovery_bound_for(&pct, 2, 3, 0.12, 1_000_000).unwrap_err();
        assert!(err.to_string().contains("D_k"), "{err}");
        let err = recovery_bound_for(&pct, 2, 3, 0.1, 1_000).unwrap_err();
        assert!(err.to_string().contains("lower bound"), "{err}");
    }

    #[test]
    fn recovery_bound_minimized_at_symmetric_threshold() {
        let pct = ref_tree();
        let d_k = d_m(&pct, 3).unwrap();
        let mid = recovery_bound_for(&pct, 2, 3, d_k / 2.0, 1_000_000).unwrap();
        for delta in [0.25 * d_k, 0.4 * d_k, 0.6 * d_k, 0.75 * d_k] {
            let b = recovery_bound_for(&pct, 2, 3, delta, 1_000_000).unwrap();
            assert!(mid <= b + 1e-12, "delta {delta}: {b} < {mid}");
        }
    }

    #[test]
    fn recovery_bound_decreasing_in_n() {
        let pct = ref_tree();
        let mut last = f64::INFINITY;
        for n in [10_000, 100_000, 1_000_000, 10_000_000] {
            let b = recovery_bound_for(&pct, 2, 3, 0.06, n).unwrap();
            assert!(b < last);
            last = b;
        }
    }
}
