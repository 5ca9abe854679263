//! Monte Carlo experiment harness: a config file names a data-generating
//! tree, a sample-size grid, a replica count, and an estimator; the runner
//! samples every (n, replica) cell on its own RNG stream, fits the
//! estimator, and reports per-replica recovery in CSV form.
//!
//! Output is deterministic for a fixed config: streams are keyed by grid
//! position and replica (never by scheduling), rows are sorted by
//! (n, replica), and wall times default to zero so bytes do not depend on
//! the machine. A calibration runner collects the sharpness statistic on
//! replicated samples and compares it against its chi-squared null law.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::alphabet::{Alphabet, Symbol};
use crate::counts::build_counts;
use crate::error::{Error, Result};
use crate::estimators::{
    ell_hat, empirical_tree_rissanen, estimate_tree_delta, lambda_stat, ContextConfig,
    DeltaConfig, DepthMode,
};
use crate::format::load_tree;
use crate::sampler::{pack_stream, renewal_tree, PreparedSampler, QRule, RenewalSpec};
use crate::tree::{iid_uniform_binary, ref_tree, truncate_tree, ProbabilisticContextTree};

/// Where the data-generating tree comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeSource {
    /// The built-in three-context example tree.
    Ref,
    /// The built-in i.i.d. uniform binary tree.
    IidUniform,
    /// A tree file on disk.
    File(PathBuf),
    /// A renewal family materialized to `depth`.
    Renewal { spec: RenewalSpec, depth: usize },
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad number {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("bad integer {s:?}")))
}

impl TreeSource {
    /// Parses a source description: `ref`, `iid`, `file:PATH` (or a bare
    /// path), `renewal(head=q0;q1, tail=q, depth=d)`, or
    /// `renewal(geom, c=.., r=.., depth=d)`. Depth defaults to 8.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        match text {
            "ref" => return Ok(TreeSource::Ref),
            "iid" => return Ok(TreeSource::IidUniform),
            _ => {}
        }
        if let Some(inner) = text.strip_prefix("renewal(").and_then(|t| t.strip_suffix(')')) {
            let mut head: Vec<f64> = Vec::new();
            let mut tail: Option<f64> = None;
            let mut c: Option<f64> = None;
            let mut r: Option<f64> = None;
            let mut depth = 8usize;
            let mut geom = false;
            for tok in inner.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                if tok == "geom" {
                    geom = true;
                    continue;
                }
                let (k, v) = tok.split_once('=').ok_or_else(|| {
                    Error::Parse(format!("renewal parameter {tok:?} is not key=value"))
                })?;
                match k.trim() {
                    "head" => {
                        let v = v.trim();
                        head = if v == "-" {
                            Vec::new()
                        } else {
                            v.split(';').map(parse_f64).collect::<Result<Vec<f64>>>()?
                        };
                    }
                    "tail" => tail = Some(parse_f64(v)?),
                    "c" => c = Some(parse_f64(v)?),
                    "r" => r = Some(parse_f64(v)?),
                    "depth" => depth = parse_usize(v)?,
                    other => {
                        return Err(Error::Parse(format!("unknown renewal parameter {other:?}")))
                    }
                }
            }
            if depth < 1 {
                return Err(Error::Parse("renewal depth must be >= 1".into()));
            }
            let spec = if geom {
                let c = c.ok_or_else(|| Error::Parse("renewal geom needs c=".into()))?;
                let r = r.ok_or_else(|| Error::Parse("renewal geom needs r=".into()))?;
                RenewalSpec::new(QRule::Geometric { c, r })?
            } else {
                let tail =
                    tail.ok_or_else(|| Error::Parse("renewal needs tail=".into()))?;
                RenewalSpec::new(QRule::List { head, tail })?
            };
            return Ok(TreeSource::Renewal { spec, depth });
        }
        let path = text.strip_prefix("file:").unwrap_or(text);
        if path.is_empty() {
            return Err(Error::Parse("empty tree source".into()));
        }
        Ok(TreeSource::File(PathBuf::from(path)))
    }

    /// Materializes the tree.
    pub fn load(&self) -> Result<ProbabilisticContextTree> {
        match self {
            TreeSource::Ref => Ok(ref_tree()),
            TreeSource::IidUniform => Ok(iid_uniform_binary()),
            TreeSource::File(path) => load_tree(path),
            TreeSource::Renewal { spec, depth } => renewal_tree(spec, *depth),
        }
    }
}

/// The estimator run on every replica. The two context variants differ only
/// in how the candidate-length range is chosen: from the data via the
/// count-threshold statistic, or deterministically as floor(c1 log n).
#[derive(Debug, Clone, PartialEq)]
pub enum AlgoSpec {
    Context(ContextConfig),
    ContextFixed(ContextConfig),
    Delta(DeltaConfig),
}

impl AlgoSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgoSpec::Context(_) => "context",
            AlgoSpec::ContextFixed(_) => "context-fixed",
            AlgoSpec::Delta(_) => "delta",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            AlgoSpec::Context(c) => {
                if !matches!(c.depth_mode, DepthMode::Random) {
                    return Err(Error::Precondition(
                        "algo `context` uses the data-driven candidate range".into(),
                    ));
                }
                c.validate()
            }
            AlgoSpec::ContextFixed(c) => {
                if !matches!(c.depth_mode, DepthMode::Deterministic) {
                    return Err(Error::Precondition(
                        "algo `context-fixed` uses the deterministic candidate range".into(),
                    ));
                }
                c.validate()
            }
            AlgoSpec::Delta(d) => d.validate(),
        }
    }
}

/// Whether per-replica wall times are measured or written as zero.
/// Zero keeps the CSV byte-identical across machines and thread counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimingMode {
    #[default]
    Zero,
    Measured,
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub tree: TreeSource,
    /// Sample sizes, strictly increasing.
    pub grid: Vec<usize>,
    /// Replicas per sample size.
    pub replicas: usize,
    /// Master seed; replica streams derive from (grid index, replica).
    pub seed: u64,
    /// Compare estimated and true trees truncated at this level; `None`
    /// compares whole trees and requires a bounded truth.
    pub truncate: Option<usize>,
    pub algo: AlgoSpec,
    pub timing: TimingMode,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Precondition("empty sample-size grid".into()));
        }
        if self.grid[0] < 1 {
            return Err(Error::Precondition("sample sizes must be >= 1".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition(
                "sample-size grid must be strictly increasing".into(),
            ));
        }
        if self.replicas < 1 {
            return Err(Error::Precondition("need at least one replica".into()));
        }
        if self.truncate == Some(0) {
            return Err(Error::Precondition("truncation level must be >= 1".into()));
        }
        self.algo.validate()
    }

    /// Parses the INI-style config text. Root keys: `tree`, `grid`,
    /// `replicas`, `seed`, `algo`, and optional `truncate` and `timing`.
    /// Sections `[context]` (keys `c1`, `c2-count`, `c2-prune`) and
    /// `[delta]` (keys `delta`, `k`) override estimator defaults. Unknown
    /// keys and sections are errors; `#` or `;` lines are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut section = String::new();
        let mut tree: Option<TreeSource> = None;
        let mut grid: Option<Vec<usize>> = None;
        let mut replicas: Option<usize> = None;
        let mut seed: Option<u64> = None;
        let mut truncate: Option<usize> = None;
        let mut algo_name: Option<String> = None;
        let mut timing: Option<TimingMode> = None;
        let mut ctx_cfg = ContextConfig::default();
        let mut delta_cfg = DeltaConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let at = |msg: String| Error::Parse(format!("line {}: {msg}", idx + 1));
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                match name.trim() {
                    "context" | "delta" => section = name.trim().to_string(),
                    other => return Err(at(format!("unknown section [{other}]"))),
                }
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| at("expected key = value".into()))?;
            let (k, v) = (k.trim(), v.trim());
            match (section.as_str(), k) {
                ("", "tree") => tree = Some(TreeSource::parse(v)?),
                ("", "grid") => {
                    grid = Some(v.split(',').map(parse_usize).collect::<Result<Vec<_>>>()?)
                }
                ("", "replicas") => replicas = Some(parse_usize(v)?),
                ("", "seed") => {
                    seed = Some(
                        v.parse::<u64>()
                            .map_err(|_| at(format!("bad seed {v:?}")))?,
                    )
                }
                ("", "truncate") => truncate = Some(parse_usize(v)?),
                ("", "algo") => algo_name = Some(v.to_string()),
                ("", "timing") => {
                    timing = Some(match v {
                        "zero" => TimingMode::Zero,
                        "measured" => TimingMode::Measured,
                        other => return Err(at(format!("unknown timing mode {other:?}"))),
                    })
                }
                ("context", "c1") => ctx_cfg.c1 = parse_f64(v)?,
                ("context", "c2-count") => ctx_cfg.c2_count = parse_f64(v)?,
                ("context", "c2-prune") => ctx_cfg.c2_prune = parse_f64(v)?,
                ("delta", "delta") => delta_cfg.delta = parse_f64(v)?,
                ("delta", "k") => delta_cfg.k = parse_usize(v)?,
                (sec, key) => {
                    let place = if sec.is_empty() {
                        "the root section".to_string()
                    } else {
                        format!("section [{sec}]")
                    };
                    return Err(at(format!("unknown key {key:?} in {place}")));
                }
            }
        }
        let missing = |what: &str| Error::Parse(format!("missing required key {what:?}"));
        let algo_name = algo_name.ok_or_else(|| missing("algo"))?;
        let algo = match algo_name.as_str() {
            "context" => {
                ctx_cfg.depth_mode = DepthMode::Random;
                AlgoSpec::Context(ctx_cfg)
            }
            "context-fixed" => {
                ctx_cfg.depth_mode = DepthMode::Deterministic;
                AlgoSpec::ContextFixed(ctx_cfg)
            }
            "delta" => AlgoSpec::Delta(delta_cfg),
            other => return Err(Error::Parse(format!("unknown algo {other:?}"))),
        };
        let cfg = ExperimentConfig {
            tree: tree.ok_or_else(|| missing("tree"))?,
            grid: grid.ok_or_else(|| missing("grid"))?,
            replicas: replicas.ok_or_else(|| missing("replicas"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            truncate,
            algo,
            timing: timing.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and parses a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::parse(&text)
    }
}

/// One replica's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RowRecord {
    pub n: usize,
    pub replica: usize,
    pub algo: &'static str,
    /// Estimated context set equals the target set (after truncation).
    pub recovered: bool,
    /// Number of estimated contexts; 0 when the replica failed.
    pub tree_size: usize,
    /// Estimated terminal context length differs from the truth's.
    pub ell_mismatch: bool,
    /// Estimation wall time; 0 under [`TimingMode::Zero`].
    pub wall_ms: f64,
}

pub const CSV_HEADER: &str = "n,replica,algo,recovered,tree_size,ell_mismatch,wall_ms";

/// All replica rows, sorted by (n, replica), plus messages from replicas
/// whose estimator returned an error.
#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub rows: Vec<RowRecord>,
    pub errors: Vec<String>,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.3}",
                r.n,
                r.replica,
                r.algo,
                r.recovered as u8,
                r.tree_size,
                r.ell_mismatch as u8,
                r.wall_ms
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    fn rate(&self, n: Option<usize>, hit: impl Fn(&RowRecord) -> bool) -> f64 {
        let sel: Vec<&RowRecord> =
            self.rows.iter().filter(|r| n.is_none_or(|n| r.n == n)).collect();
        sel.iter().filter(|r| hit(r)).count() as f64 / sel.len() as f64
    }

    /// Fraction of replicas that recovered the target set, over the whole
    /// report or one grid point. NaN when no rows match.
    pub fn recovery_rate(&self, n: Option<usize>) -> f64 {
        self.rate(n, |r| r.recovered)
    }

    /// Fraction of replicas whose terminal context length disagreed.
    pub fn mismatch_rate(&self, n: Option<usize>) -> f64 {
        self.rate(n, |r| r.ell_mismatch)
    }

    /// Per-grid-point recovery summaries, in grid order.
    pub fn summaries(&self) -> Vec<GridSummary> {
        let mut grid: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        grid.dedup();
        grid.into_iter()
            .map(|n| {
                let replicas = self.rows.iter().filter(|r| r.n == n).count();
                let p = self.recovery_rate(Some(n));
                GridSummary {
                    n,
                    replicas,
                    recovery_rate: p,
                    standard_error: (p * (1.0 - p) / replicas as f64).sqrt(),
                    mismatch_rate: self.mismatch_rate(Some(n)),
                }
            })
            .collect()
    }
}

/// Recovery frequency at one grid point with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSummary {
    pub n: usize,
    pub replicas: usize,
    pub recovery_rate: f64,
    /// sqrt(p(1 - p)/R) for the observed rate p over R replicas.
    pub standard_error: f64,
    pub mismatch_rate: f64,
}

/// Truncates every string to its last `k` symbols (deduplicating), or
/// clones the set when no level is given.
fn truncated_strings(set: &BTreeSet<Vec<Symbol>>, k: Option<usize>) -> BTreeSet<Vec<Symbol>> {
    match k {
        None => set.clone(),
        Some(k) => set
            .iter()
            .map(|c| {
                if c.len() <= k {
                    c.clone()
                } else {
                    c[c.len() - k..].to_vec()
                }
            })
            .collect(),
    }
}

/// Length of the longest element of `set` that is a suffix of `past`.
fn longest_suffix_len(set: &BTreeSet<Vec<Symbol>>, past: &[Symbol]) -> Option<usize> {
    set.iter()
        .filter(|c| c.len() <= past.len() && past[past.len() - c.len()..] == c[..])
        .map(Vec::len)
        .max()
}

struct ReplicaJob<'a> {
    pct: &'a ProbabilisticContextTree,
    sampler: &'a PreparedSampler,
    alphabet: &'a Alphabet,
    cfg: &'a ExperimentConfig,
    target: &'a BTreeSet<Vec<Symbol>>,
}

impl ReplicaJob<'_> {
    fn run(&self, n_index: usize, n: usize, replica: usize) -> (RowRecord, Option<String>) {
        let sample = self.sampler.sample(n, self.cfg.seed, pack_stream(n_index, replica));
        let start = Instant::now();
        let est = match &self.cfg.algo {
            AlgoSpec::Context(c) | AlgoSpec::ContextFixed(c) => {
                empirical_tree_rissanen(&sample, self.alphabet, c)
            }
            AlgoSpec::Delta(d) => estimate_tree_delta(&sample, self.alphabet, d),
        };
        let wall_ms = match self.cfg.timing {
            TimingMode::Zero => 0.0,
            TimingMode::Measured => start.elapsed().as_secs_f64() * 1e3,
        };
        let algo = self.cfg.algo.name();
        match est {
            Err(e) => (
                RowRecord {
                    n,
                    replica,
                    algo,
                    recovered: false,
                    tree_size: 0,
                    ell_mismatch: true,
                    wall_ms,
                },
                Some(format!("n={n} replica={replica}: {e}")),
            ),
            Ok(est) => {
                let est_set = truncated_strings(est.contexts(), self.cfg.truncate);
                let recovered = &est_set == self.target;
                let truth_len = self
                    .pct
                    .context_of(sample.as_slice())
                    .map(|c| c.len())
                    .unwrap_or(0);
                let est_len = match &self.cfg.algo {
                    AlgoSpec::Context(c) | AlgoSpec::ContextFixed(c) => {
                        ell_hat(&sample, self.alphabet, c).unwrap_or(0)
                    }
                    AlgoSpec::Delta(_) => {
                        longest_suffix_len(est.contexts(), sample.as_slice()).unwrap_or(0)
                    }
                };
                (
                    RowRecord {
                        n,
                        replica,
                        algo,
                        recovered,
                        tree_size: est.len(),
                        ell_mismatch: est_len != truth_len,
                        wall_ms,
                    },
                    None,
                )
            }
        }
    }
}

/// Runs the full grid x replicas experiment on a private thread pool
/// (`workers` = 0 uses the default parallelism). Row order and RNG streams
/// are independent of the worker count.
pub fn run_recovery_experiment(
    cfg: &ExperimentConfig,
    workers: usize,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let pct = cfg.tree.load()?;
    if !pct.is_bounded() && cfg.truncate.is_none() {
        return Err(Error::Precondition(
            "recovery against an unbounded tree requires a truncation level".into(),
        ));
    }
    let target: BTreeSet<Vec<Symbol>> = match cfg.truncate {
        Some(k) => truncate_tree(pct.tree(), k)?.context_set().clone(),
        None => pct.tree().context_set().clone(),
    };
    let sampler = PreparedSampler::new(&pct)?;
    let alphabet = pct.alphabet().clone();
    let job = ReplicaJob { pct: &pct, sampler: &sampler, alphabet: &alphabet, cfg, target: &target };
    let cells: Vec<(usize, usize, usize)> = cfg
        .grid
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| (0..cfg.replicas).map(move |r| (i, n, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    let mut results: Vec<(RowRecord, Option<String>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, n, r)| job.run(i, n, r))
            .collect()
    });
    results.sort_by_key(|(row, _)| (row.n, row.replica));
    let mut report = ExperimentReport::default();
    for (row, err) in results {
        report.rows.push(row);
        if let Some(e) = err {
            report.errors.push(e);
        }
    }
    Ok(report)
}

/// Two-sided Kolmogorov-Smirnov distance between the empirical law of
/// `sorted` (ascending) and the continuous CDF `cdf`.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let m = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / m).max((i as f64 + 1.0) / m - f);
    }
    d
}

/// Replicated sharpness statistics and their distance from the null law.
#[derive(Debug, Clone)]
pub struct CalibrationResult {
    /// One statistic per replica, sorted ascending.
    pub statistics: Vec<f64>,
    /// KS distance from the chi-squared law with |A| - 1 degrees of
    /// freedom; absent when there is only one replica, since a single
    /// draw supports no distributional verdict.
    pub ks: Option<f64>,
}

/// Samples `replicas` paths of length `n` from `pct` and collects the
/// sharpness statistic of `w` on each; under a true law that does not
/// depend on the symbol preceding `w`, the statistic is asymptotically
/// chi-squared with |A| - 1 degrees of freedom.
pub fn run_null_calibration(
    pct: &ProbabilisticContextTree,
    w: &[Symbol],
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<CalibrationResult> {
    if replicas < 1 {
        return Err(Error::Precondition("need at least one replica".into()));
    }
    pct.alphabet().check_symbols(w)?;
    let sampler = PreparedSampler::new(pct)?;
    let alphabet = pct.alphabet().clone();
    let mut statistics = (0..replicas)
        .into_par_iter()
        .map(|rep| {
            let sample = sampler.sample(n, seed, pack_stream(0, rep));
            let trie = build_counts(&sample, &alphabet, w.len() + 2)?;
            lambda_stat(&trie, w)
        })
        .collect::<Result<Vec<f64>>>()?;
    statistics.sort_by(f64::total_cmp);
    let ks = if statistics.len() < 2 {
        None
    } else {
        let df = (pct.alphabet().size() - 1) as f64;
        let chi = ChiSquared::new(df)
            .map_err(|e| Error::Numeric(format!("chi-squared with df = {df}: {e}")))?;
        Some(ks_statistic(&statistics, |x| chi.cdf(x)))
    };
    Ok(CalibrationResult { statistics, ks })
}
