//! Stationary simulation of chains compatible with a context tree.
//!
//! Bounded trees of height K embed into an order-K Markov chain on the
//! windows A^K. The embedding must have a unique closed communicating class
//! and be aperiodic; its stationary law seeds the sample so the whole path is
//! stationary. The unbounded renewal family `{1, 10, 100, ...}` is simulated
//! directly through its age process: after g consecutive zeros the next
//! symbol is 1 with probability q_g. The renewal chain is positive recurrent
//! iff the q_k sum diverges; transient specs are rejected.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::alphabet::{Symbol, SymbolSequence};
use crate::error::{Error, Result};
use crate::tree::{validate_tree, ProbabilisticContextTree};

/// Maximum number of embedded states |A|^K accepted by `stationary_law`.
const MAX_STATES: usize = 1 << 20;
/// Exact linear solve below this state count, power iteration above.
const EXACT_SOLVE_STATES: usize = 4096;

/// Rule assigning the renewal probability q_k to each zero-run length k.
#[derive(Debug, Clone, PartialEq)]
pub enum QRule {
    /// Explicit initial values followed by a constant tail.
    List { head: Vec<f64>, tail: f64 },
    /// q_k = c * r^k.
    Geometric { c: f64, r: f64 },
}

/// Parameters of the renewal family: p(1 | 1 0^k) = q_k.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalSpec {
    rule: QRule,
}

impl RenewalSpec {
    pub fn new(rule: QRule) -> Result<Self> {
        let check = |v: f64, what: &str| -> Result<()> {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Precondition(format!(
                    "renewal {what} = {v} outside [0, 1]"
                )));
            }
            Ok(())
        };
        match &rule {
            QRule::List { head, tail } => {
                for &q in head {
                    check(q, "probability")?;
                }
                check(*tail, "tail probability")?;
            }
            QRule::Geometric { c, r } => {
                check(*c, "coefficient")?;
                check(*r, "ratio")?;
            }
        }
        Ok(RenewalSpec { rule })
    }

    /// The constant-q special case.
    pub fn constant(q: f64) -> Result<Self> {
        RenewalSpec::new(QRule::List { head: Vec::new(), tail: q })
    }

    pub fn rule(&self) -> &QRule {
        &self.rule
    }

    pub fn q(&self, k: usize) -> f64 {
        match &self.rule {
            QRule::List { head, tail } => head.get(k).copied().unwrap_or(*tail),
            QRule::Geometric { c, r } => c * r.powi(k as i32),
        }
    }

    /// Survival function S_k = P(gap > k) = prod_{j<k} (1 - q_j), S_0 = 1.
    pub(crate) fn survival(&self, k: usize) -> f64 {
        match &self.rule {
            QRule::List { head, tail } => {
                let h = head.len().min(k);
                let mut s: f64 = head[..h].iter().map(|q| 1.0 - q).product();
                if k > h {
                    s *= (1.0 - tail).powi((k - h) as i32);
                }
                s
            }
            QRule::Geometric { .. } => (0..k).map(|j| 1.0 - self.q(j)).product(),
        }
    }

    /// Exact tail sum sum_{k>=m} S_k for recurrent specs; the constant-tail
    /// part is a geometric series, so no truncation is involved.
    pub(crate) fn tail_sum(&self, m: usize) -> Result<f64> {
        if !check_renewal_recurrence(self) {
            return Err(Error::Transient);
        }
        let (head_len, tail) = match &self.rule {
            QRule::List { head, tail } => (head.len(), *tail),
            // Recurrent geometric means r = 1: a constant rule.
            QRule::Geometric { c, .. } => (0, *c),
        };
        let mut sum = 0.0;
        for k in m..head_len.max(m) {
            sum += self.survival(k);
        }
        let start = head_len.max(m);
        sum += self.survival(start) / tail;
        Ok(sum)
    }

    /// Expected gap between renewals, E[T] = sum_{k>=0} S_k.
    pub(crate) fn expected_gap(&self) -> Result<f64> {
        self.tail_sum(0)
    }

    /// Infimum of q_k over k >= m.
    pub(crate) fn q_inf(&self, m: usize) -> f64 {
        match &self.rule {
            QRule::List { head, tail } => head[m.min(head.len())..]
                .iter()
                .copied()
                .fold(*tail, f64::min),
            QRule::Geometric { c, r } => {
                if *r >= 1.0 {
                    c * r.powi(m as i32)
                } else {
                    0.0
                }
            }
        }
    }

    /// Supremum of q_k over k >= m.
    pub(crate) fn q_sup(&self, m: usize) -> f64 {
        match &self.rule {
            QRule::List { head, tail } => head[m.min(head.len())..]
                .iter()
                .copied()
                .fold(*tail, f64::max),
            QRule::Geometric { c, r } => c * r.powi(m as i32),
        }
    }
}

/// True iff the q_k sum diverges, i.e. the renewal chain returns to 1.
/// Decided analytically from the rule: a positive constant tail diverges, a
/// geometric tail converges unless the ratio is exactly 1 with positive c.
pub fn check_renewal_recurrence(spec: &RenewalSpec) -> bool {
    match spec.rule() {
        QRule::List { tail, .. } => *tail > 0.0,
        QRule::Geometric { c, r } => *c > 0.0 && *r >= 1.0,
    }
}

/// Materializes the renewal family to `depth` contexts 1, 10, ..., 10^(depth-1)
/// with rows p(1 | 1 0^k) = q_k, keeping the closed-form rule attached.
pub fn renewal_tree(spec: &RenewalSpec, depth: usize) -> Result<ProbabilisticContextTree> {
    let tree = crate::tree::ContextTree::new_renewal(spec.clone(), depth)?;
    let rows = tree
        .context_set()
        .iter()
        .map(|ctx| {
            let q = spec.q(ctx.len() - 1);
            (ctx.clone(), vec![1.0 - q, q])
        })
        .collect::<Vec<_>>();
    ProbabilisticContextTree::new(tree, rows)
}

/// Stationary law of the order-K window chain of a bounded tree.
///
/// States are the length-K windows in time order, encoded in base |A| with
/// the oldest symbol most significant.
#[derive(Debug, Clone)]
pub struct StationaryLaw {
    order: usize,
    alphabet_size: usize,
    pi: Vec<f64>,
}

impl StationaryLaw {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn probs(&self) -> &[f64] {
        &self.pi
    }

    /// Encodes a length-`order` window into its state index.
    pub fn encode(&self, window: &[Symbol]) -> usize {
        encode_window(window, self.alphabet_size)
    }

    /// Stationary probability of a full window.
    pub fn window_prob(&self, window: &[Symbol]) -> f64 {
        assert_eq!(window.len(), self.order);
        self.pi[self.encode(window)]
    }

    /// Stationary probability that the most recent `w.len()` symbols equal
    /// `w`, for |w| <= order: marginalizes the older coordinates.
    pub fn suffix_prob(&self, w: &[Symbol]) -> f64 {
        let j = w.len();
        assert!(j <= self.order);
        let base = self.alphabet_size.pow(j as u32);
        let offset = encode_window(w, self.alphabet_size);
        let mut total = 0.0;
        let mut idx = offset;
        while idx < self.pi.len() {
            total += self.pi[idx];
            idx += base;
        }
        total
    }
}

pub(crate) fn encode_window(window: &[Symbol], alphabet_size: usize) -> usize {
    window
        .iter()
        .fold(0usize, |acc, &s| acc * alphabet_size + s as usize)
}

fn decode_window(mut state: usize, order: usize, alphabet_size: usize) -> Vec<Symbol> {
    let mut w = vec![0 as Symbol; order];
    for i in (0..order).rev() {
        w[i] = (state % alphabet_size) as Symbol;
        state /= alphabet_size;
    }
    w
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Computes the stationary law of the embedded order-K chain.
///
/// Errors if the tree is unbounded, invalid, incomplete (some window has no
/// context suffix), reducible (several closed communicating classes), or
/// periodic. Transient windows get probability zero.
pub fn stationary_law(pct: &ProbabilisticContextTree) -> Result<StationaryLaw> {
    let Some(order) = pct.height() else {
        return Err(Error::Unsupported(
            "the unbounded renewal family has no finite window chain; use the closed-form \
             renewal helpers"
                .into(),
        ));
    };
    if order == 0 {
        return Err(Error::Precondition("tree has no contexts".into()));
    }
    let report = validate_tree(pct);
    if !report.is_valid() {
        return Err(Error::Precondition(format!("tree fails validation: {report}")));
    }
    let asize = pct.alphabet().size();
    let m = asize
        .checked_pow(order as u32)
        .filter(|&m| m <= MAX_STATES)
        .ok_or_else(|| {
            Error::Unsupported(format!(
                "window chain has more than {MAX_STATES} states (|A|={asize}, K={order})"
            ))
        })?;

    // Transition row of each window state, as indices into the tree's rows.
    let mut state_row = vec![0u32; m];
    for (s, slot) in state_row.iter_mut().enumerate() {
        let window = decode_window(s, order, asize);
        let (_, ord) = pct.tree().lookup_ord(&window).ok_or_else(|| {
            Error::Precondition(format!(
                "no context is a suffix of window {:?}; the tree does not determine a \
                 complete order-{order} chain",
                pct.alphabet().render(&window)
            ))
        })?;
        *slot = ord;
    }
    let rows: Vec<&[f64]> = pct.iter().map(|(_, r)| r).collect();
    let row_of = |s: usize| -> &[f64] { rows[state_row[s] as usize] };
    let succ = |s: usize, a: usize| -> usize { (s * asize + a) % m };

    // Strongly connected components over the positive-probability edges
    // (Kosaraju, iterative).
    let comp = {
        let mut visited = vec![false; m];
        let mut order_stack = Vec::with_capacity(m);
        for start in 0..m {
            if visited[start] {
                continue;
            }
            visited[start] = true;
            // (state, next edge index) stack yielding explicit post-order.
            let mut stack = vec![(start, 0usize)];
            while let Some(top) = stack.last_mut() {
                let s = top.0;
                let mut next = None;
                while top.1 < asize {
                    let a = top.1;
                    top.1 += 1;
                    if row_of(s)[a] > 0.0 {
                        let t = succ(s, a);
                        if !visited[t] {
                            visited[t] = true;
                            next = Some(t);
                            break;
                        }
                    }
                }
                match next {
                    Some(t) => stack.push((t, 0)),
                    None => {
                        order_stack.push(s);
                        stack.pop();
                    }
                }
            }
        }
        // Reverse adjacency.
        let mut rev: Vec<Vec<u32>> = vec![Vec::new(); m];
        for s in 0..m {
            for a in 0..asize {
                if row_of(s)[a] > 0.0 {
                    rev[succ(s, a)].push(s as u32);
                }
            }
        }
        let mut comp = vec![u32::MAX; m];
        let mut ncomp = 0u32;
        for &s in order_stack.iter().rev() {
            if comp[s] != u32::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = ncomp;
            while let Some(u) = stack.pop() {
                for &v in &rev[u] {
                    let v = v as usize;
                    if comp[v] == u32::MAX {
                        comp[v] = ncomp;
                        stack.push(v);
                    }
                }
            }
            ncomp += 1;
        }
        comp
    };

    // A class is closed iff no positive edge leaves it.
    let ncomp = comp.iter().map(|&c| c + 1).max().unwrap_or(0) as usize;
    let mut closed = vec![true; ncomp];
    for s in 0..m {
        for a in 0..asize {
            if row_of(s)[a] > 0.0 && comp[succ(s, a)] != comp[s] {
                closed[comp[s] as usize] = false;
            }
        }
    }
    let closed_ids: Vec<u32> = (0..ncomp as u32).filter(|&c| closed[c as usize]).collect();
    if closed_ids.len() != 1 {
        let mut names = Vec::new();
        for &c in &closed_ids {
            let members: Vec<String> = (0..m)
                .filter(|&s| comp[s] == c)
                .take(3)
                .map(|s| pct.alphabet().render(&decode_window(s, order, asize)))
                .collect();
            names.push(format!("{{{}, ...}}", members.join(", ")));
        }
        return Err(Error::Reducible(names.join(" and ")));
    }
    let class_id = closed_ids[0];
    let class: Vec<usize> = (0..m).filter(|&s| comp[s] == class_id).collect();

    // Period = gcd over in-class edges of (level(u) + 1 - level(v)) for BFS
    // levels; 1 means aperiodic.
    {
        let mut level = vec![i64::MIN; m];
        let mut queue = std::collections::VecDeque::new();
        level[class[0]] = 0;
        queue.push_back(class[0]);
        while let Some(u) = queue.pop_front() {
            for a in 0..asize {
                if row_of(u)[a] > 0.0 {
                    let v = succ(u, a);
                    if level[v] == i64::MIN {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        let mut g: u64 = 0;
        for &u in &class {
            for a in 0..asize {
                if row_of(u)[a] > 0.0 {
                    let v = succ(u, a);
                    let d = (level[u] + 1 - level[v]).unsigned_abs();
                    g = gcd(g, d);
                }
            }
        }
        if g != 1 {
            return Err(Error::Periodic {
                period: g as usize,
                state: pct.alphabet().render(&decode_window(class[0], order, asize)),
            });
        }
    }

    // Solve pi P = pi restricted to the closed class.
    let mc = class.len();
    let pos_in_class: std::collections::HashMap<usize, usize> =
        class.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let pi_class = if m <= EXACT_SOLVE_STATES {
        // Grassmann-Taksar-Heyman state elimination: subtraction-free, so the
        // result is accurate to componentwise relative error.
        let mut p = vec![0.0f64; mc * mc];
        for (i, &s) in class.iter().enumerate() {
            for a in 0..asize {
                let pr = row_of(s)[a];
                if pr > 0.0 {
                    let j = pos_in_class[&succ(s, a)];
                    p[i * mc + j] += pr;
                }
            }
        }
        for n in (1..mc).rev() {
            let s: f64 = (0..n).map(|j| p[n * mc + j]).sum();
            if s <= 0.0 {
                return Err(Error::Numeric("state elimination hit a zero pivot".into()));
            }
            for i in 0..n {
                p[i * mc + n] /= s;
            }
            for i in 0..n {
                let pin = p[i * mc + n];
                if pin > 0.0 {
                    for j in 0..n {
                        p[i * mc + j] += pin * p[n * mc + j];
                    }
                }
            }
        }
        let mut pi = vec![0.0f64; mc];
        pi[0] = 1.0;
        for n in 1..mc {
            pi[n] = (0..n).map(|i| pi[i] * p[i * mc + n]).sum();
        }
        let total: f64 = pi.iter().sum();
        for v in &mut pi {
            *v /= total;
        }
        pi
    } else {
        // Power iteration; aperiodic irreducible classes converge
        // geometrically.
        let mut x = vec![1.0 / mc as f64; mc];
        let mut next = vec![0.0f64; mc];
        let mut converged = false;
        for _ in 0..2_000_000 {
            next.iter_mut().for_each(|v| *v = 0.0);
            for (i, &s) in class.iter().enumerate() {
                let xi = x[i];
                if xi == 0.0 {
                    continue;
                }
                for a in 0..asize {
                    let pr = row_of(s)[a];
                    if pr > 0.0 {
                        next[pos_in_class[&succ(s, a)]] += xi * pr;
                    }
                }
            }
            let diff: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut x, &mut next);
            if diff <= 1e-13 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numeric("power iteration did not converge to 1e-13".into()));
        }
        let total: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= total);
        x
    };

    let mut pi = vec![0.0f64; m];
    for (i, &s) in class.iter().enumerate() {
        pi[s] = pi_class[i];
    }
    // Invariance residual in total variation.
    let mut residual = 0.0f64;
    let mut image = vec![0.0f64; m];
    for s in 0..m {
        if pi[s] > 0.0 {
            for a in 0..asize {
                let pr = row_of(s)[a];
                if pr > 0.0 {
                    image[succ(s, a)] += pi[s] * pr;
                }
            }
        }
    }
    for s in 0..m {
        residual += (image[s] - pi[s]).abs();
    }
    if residual > 1e-12 {
        return Err(Error::Numeric(format!(
            "stationary residual {residual:.3e} exceeds 1e-12"
        )));
    }
    if pi_class.iter().any(|&v| v <= 0.0) {
        return Err(Error::Numeric(
            "stationary law vanishes on the recurrent class".into(),
        ));
    }
    Ok(StationaryLaw { order, alphabet_size: asize, pi })
}

/// A tree prepared for repeated sampling: the stationary law (bounded case)
/// or the renewal burn-in parameters are computed once.
#[derive(Debug, Clone)]
pub struct PreparedSampler {
    kind: SamplerKind,
}

// One value lives per prepared sampler, so the variant size gap is moot.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
enum SamplerKind {
    Bounded {
        pct: ProbabilisticContextTree,
        cumulative: Vec<f64>,
        order: usize,
    },
    Renewal {
        spec: RenewalSpec,
        burn_in: usize,
    },
}

impl PreparedSampler {
    pub fn new(pct: &ProbabilisticContextTree) -> Result<Self> {
        if let Some(spec) = pct.renewal() {
            if !check_renewal_recurrence(spec) {
                return Err(Error::Transient);
            }
            let gap = spec.expected_gap()?;
            let burn_in = 10_000usize.max((100.0 * gap).ceil() as usize);
            return Ok(PreparedSampler {
                kind: SamplerKind::Renewal { spec: spec.clone(), burn_in },
            });
        }
        let law = stationary_law(pct)?;
        let mut cumulative = law.probs().to_vec();
        let mut acc = 0.0;
        for v in &mut cumulative {
            acc += *v;
            *v = acc;
        }
        Ok(PreparedSampler {
            kind: SamplerKind::Bounded { pct: pct.clone(), cumulative, order: law.order() },
        })
    }

    /// Draws a stationary path of length `n`. Deterministic in
    /// (tree, n, seed, stream).
    pub fn sample(&self, n: usize, seed: u64, stream: u64) -> SymbolSequence {
        let mut rng = replica_rng(seed, stream);
        match &self.kind {
            SamplerKind::Bounded { pct, cumulative, order } => {
                let asize = pct.alphabet().size();
                let mut out = Vec::with_capacity(n);
                let u: f64 = rng.random();
                let state = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
                let mut recent = decode_window(state, *order, asize);
                out.extend_from_slice(&recent[..(*order).min(n)]);
                while out.len() < n {
                    let row = pct
                        .law_of_past(&recent)
                        .expect("stationary_law verified completeness");
                    let s = draw(&mut rng, row);
                    out.push(s);
                    recent.rotate_left(1);
                    *recent.last_mut().unwrap() = s;
                }
                SymbolSequence::from_raw(out)
            }
            SamplerKind::Renewal { spec, burn_in } => {
                let mut out = Vec::with_capacity(n);
                // Start just after a renewal (age 0) and discard the burn-in.
                let mut age = 0usize;
                for t in 0..burn_in + n {
                    let u: f64 = rng.random();
                    let one = u < spec.q(age);
                    if t >= *burn_in {
                        out.push(one as Symbol);
                    }
                    age = if one { 0 } else { age + 1 };
                }
                SymbolSequence::from_raw(out)
            }
        }
    }
}

fn draw<R: Rng>(rng: &mut R, row: &[f64]) -> Symbol {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i as Symbol;
            }
        }
    }
    last_positive as Symbol
}

/// The replica RNG: a counter-based generator where `stream` selects an
/// independent substream of the same master seed.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Packs (grid index, replica index) into a stream id so extending the grid
/// never perturbs existing replicas.
pub fn pack_stream(n_index: usize, replica: usize) -> u64 {
    ((n_index as u64) << 32) | (replica as u64 & 0xffff_ffff)
}

/// Draws a stationary path of length `n` from the tree. Bounded trees start
/// from the exact stationary window law; the renewal family starts at a
/// renewal and discards a burn-in of max(10^4, 100 * expected gap) steps.
pub fn sample_path(pct: &ProbabilisticContextTree, n: usize, seed: u64) -> Result<SymbolSequence> {
    sample_path_stream(pct, n, seed, 0)
}

/// As [`sample_path`] with an explicit replica stream.
pub fn sample_path_stream(
    pct: &ProbabilisticContextTree,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<SymbolSequence> {
    Ok(PreparedSampler::new(pct)?.sample(n, seed, stream))
}
