//! `vlmc`: command line for chains with memory of variable length.
//!
//! The subcommands cover the full pipeline: draw stationary sample paths
//! (`simulate`), fit context trees to samples (`estimate`), dump window
//! counts (`inspect`), evaluate exact model quantities (`theory`), run
//! replicated recovery experiments (`experiment`), diff tree files
//! (`compare`), and turn raw text into sample files (`ingest`).
//!
//! Exit codes: 0 on success, 1 on precondition or input errors, 2 on I/O
//! errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vlmc_core::{
    alpha_stats, beta_k, build_counts, canonical_approximation, compare_trees, d_m,
    deviation_bound_for, empirical_tree_rissanen, epsilon_m, estimate_tree_delta, ingest_text,
    load_tree, min_k_condition, recovery_bound_for, run_recovery_experiment, save_sample,
    save_tree, Alphabet, ContextConfig, DeltaConfig, DepthMode, Error, ExperimentConfig,
    IngestMode, PreparedSampler, Result, Symbol, SymbolSequence, TreeSource,
};

#[derive(Parser)]
#[command(
    name = "vlmc",
    version,
    about = "Simulate, estimate, and analyze chains with memory of variable length"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a stationary sample path and write it as a sample file.
    Simulate {
        /// Tree file path, or a builtin source: ref, iid,
        /// renewal(head=Q0;Q1;.., tail=Q, depth=D), or
        /// renewal(geom, c=C, r=R, depth=D).
        #[arg(long)]
        tree: String,
        /// Number of symbols to draw.
        #[arg(long)]
        length: usize,
        /// Generator seed.
        #[arg(long)]
        seed: u64,
        /// Generator stream, for independent replicas under one seed.
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Output sample file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a context tree to a sample and write it with empirical rows.
    Estimate {
        /// Estimation algorithm.
        #[arg(long, value_enum)]
        algo: AlgoArg,
        /// Input sample file.
        #[arg(long)]
        sample: PathBuf,
        /// Output tree file.
        #[arg(long)]
        tree_out: PathBuf,
        /// Candidate-length constant (context algorithms).
        #[arg(long)]
        c1: Option<f64>,
        /// Candidate frequency constant (context algorithms).
        #[arg(long)]
        c2_count: Option<f64>,
        /// Pruning constant (context algorithms).
        #[arg(long)]
        c2_prune: Option<f64>,
        /// Gain threshold (delta algorithm).
        #[arg(long)]
        delta: Option<f64>,
        /// Maximum context length (delta algorithm).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Print window counts of a sample, one tab-separated line per string.
    Inspect {
        /// Input sample file.
        #[arg(long)]
        sample: PathBuf,
        /// Longest window length to count.
        #[arg(long)]
        depth: usize,
        /// Print the count of this one string instead of the full table.
        #[arg(long)]
        string: Option<String>,
    },
    /// Evaluate an exact model quantity and print one record.
    Theory {
        /// Tree file path or builtin source (as in simulate).
        #[arg(long)]
        tree: String,
        /// Quantity to evaluate.
        #[arg(long, value_enum)]
        quantity: Quantity,
        /// Length cap (dm, eps).
        #[arg(long)]
        m: Option<usize>,
        /// Scan all strings up to the cap, not only contexts and stubs (eps).
        #[arg(long)]
        all_strings: bool,
        /// Number of continuity-rate terms to report (alpha).
        #[arg(long)]
        n_max: Option<usize>,
        /// Order (beta, canonical, recovery-bound).
        #[arg(long)]
        k: Option<usize>,
        /// Conditioning string (deviation-bound).
        #[arg(long)]
        w: Option<String>,
        /// Deviation threshold (deviation-bound).
        #[arg(long)]
        t: Option<f64>,
        /// Sample length (deviation-bound, recovery-bound).
        #[arg(long)]
        n: Option<usize>,
        /// Recovery threshold (recovery-bound).
        #[arg(long)]
        delta: Option<f64>,
        /// Truncation level (recovery-bound, min-k).
        #[arg(long)]
        truncate: Option<usize>,
        /// Output tree file (canonical).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a replicated recovery experiment and write a CSV report.
    Experiment {
        /// Experiment config file.
        #[arg(long)]
        config: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Diff two tree files as context sets.
    Compare {
        /// First tree file.
        #[arg(long)]
        tree_a: PathBuf,
        /// Second tree file.
        #[arg(long)]
        tree_b: PathBuf,
        /// Truncate both trees to this length before comparing.
        #[arg(long)]
        truncate: Option<usize>,
    },
    /// Convert raw text or bytes into a sample file over a discovered
    /// alphabet.
    Ingest {
        /// Input file.
        #[arg(long)]
        input: PathBuf,
        /// How to split the input into symbol units.
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Output sample file.
        #[arg(long)]
        out: PathBuf,
        /// Also write the discovered labels, one per line in index order.
        #[arg(long)]
        alphabet_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    /// Sharpness-statistic pruning with the data-driven candidate range.
    Context,
    /// Sharpness-statistic pruning with the deterministic candidate range.
    ContextFixed,
    /// Gain-threshold scan over strings up to a fixed length.
    Delta,
}

impl AlgoArg {
    fn name(self) -> &'static str {
        match self {
            AlgoArg::Context => "context",
            AlgoArg::ContextFixed => "context-fixed",
            AlgoArg::Delta => "delta",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Quantity {
    /// Separation of each short context's row from its parent law.
    Dm,
    /// Smallest positive cylinder probability up to the cap.
    Eps,
    /// Continuity constants, their sum, and derived bound constants.
    Alpha,
    /// Oscillation of the next-symbol law beyond an order.
    Beta,
    /// Order-k canonical approximation, written as a tree file.
    Canonical,
    /// Exponential bound on one empirical transition deviation.
    DeviationBound,
    /// Exponential bound on missing the truncated tree.
    RecoveryBound,
    /// Smallest estimation depth compatible with a truncation level.
    MinK,
}

impl Quantity {
    fn name(self) -> &'static str {
        match self {
            Quantity::Dm => "dm",
            Quantity::Eps => "eps",
            Quantity::Alpha => "alpha",
            Quantity::Beta => "beta",
            Quantity::Canonical => "canonical",
            Quantity::DeviationBound => "deviation-bound",
            Quantity::RecoveryBound => "recovery-bound",
            Quantity::MinK => "min-k",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// One symbol per byte.
    Bytes,
    /// One symbol per character.
    Chars,
    /// One symbol per whitespace-separated token.
    Tokens,
}

impl From<ModeArg> for IngestMode {
    fn from(mode: ModeArg) -> IngestMode {
        match mode {
            ModeArg::Bytes => IngestMode::Bytes,
            ModeArg::Chars => IngestMode::Chars,
            ModeArg::Tokens => IngestMode::Tokens,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { tree, length, seed, stream, out } => {
            cmd_simulate(&tree, length, seed, stream, &out)
        }
        Command::Estimate { algo, sample, tree_out, c1, c2_count, c2_prune, delta, k } => {
            cmd_estimate(algo, &sample, &tree_out, c1, c2_count, c2_prune, delta, k)
        }
        Command::Inspect { sample, depth, string } => {
            cmd_inspect(&sample, depth, string.as_deref())
        }
        Command::Theory {
            tree,
            quantity,
            m,
            all_strings,
            n_max,
            k,
            w,
            t,
            n,
            delta,
            truncate,
            out,
        } => {
            let args = TheoryArgs { m, all_strings, n_max, k, w, t, n, delta, truncate, out };
            cmd_theory(&tree, quantity, args)
        }
        Command::Experiment { config, out, workers } => cmd_experiment(&config, &out, workers),
        Command::Compare { tree_a, tree_b, truncate } => cmd_compare(&tree_a, &tree_b, truncate),
        Command::Ingest { input, mode, out, alphabet_out } => {
            cmd_ingest(&input, mode, &out, alphabet_out.as_deref())
        }
    }
}

/// Reads a sample file, reconstructing its alphabet from the data:
/// whitespace-separated tokens when the line contains whitespace, one
/// character per symbol otherwise. Labels are sorted so the alphabet does
/// not depend on the order symbols first appear.
fn read_sample(path: &Path) -> Result<(Alphabet, SymbolSequence)> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(raw)
        .map_err(|e| Error::Parse(format!("{}: not valid UTF-8: {e}", path.display())))?;
    let body = text.trim();
    let mode = if body.contains(char::is_whitespace) {
        IngestMode::Tokens
    } else {
        IngestMode::Chars
    };
    let got = ingest_text(body.as_bytes(), mode)?;
    let mut labels: Vec<String> = got.alphabet.labels().to_vec();
    labels.sort();
    let alphabet = Alphabet::new(labels)?;
    let remap: Vec<Symbol> = got
        .alphabet
        .labels()
        .iter()
        .map(|l| alphabet.index_of(l).expect("sorting permutes the same label set"))
        .collect();
    let symbols = got.sample.iter().map(|s| remap[s as usize]).collect();
    Ok((alphabet, SymbolSequence::from_raw(symbols)))
}

fn cmd_simulate(tree: &str, length: usize, seed: u64, stream: u64, out: &Path) -> Result<()> {
    let pct = TreeSource::parse(tree)?.load()?;
    let sampler = PreparedSampler::new(&pct)?;
    let sample = sampler.sample(length, seed, stream);
    save_sample(pct.alphabet(), sample.as_slice(), out)?;
    println!("symbols={length} out={}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_estimate(
    algo: AlgoArg,
    sample_path: &Path,
    tree_out: &Path,
    c1: Option<f64>,
    c2_count: Option<f64>,
    c2_prune: Option<f64>,
    delta: Option<f64>,
    k: Option<usize>,
) -> Result<()> {
    let (alphabet, sample) = read_sample(sample_path)?;
    let est = match algo {
        AlgoArg::Context | AlgoArg::ContextFixed => {
            if delta.is_some() || k.is_some() {
                return Err(Error::Precondition(
                    "--delta and --k apply to the delta algorithm only".into(),
                ));
            }
            let mut cfg = ContextConfig::default();
            if algo == AlgoArg::ContextFixed {
                cfg.depth_mode = DepthMode::Deterministic;
            }
            if let Some(v) = c1 {
                cfg.c1 = v;
            }
            if let Some(v) = c2_count {
                cfg.c2_count = v;
            }
            if let Some(v) = c2_prune {
                cfg.c2_prune = v;
            }
            empirical_tree_rissanen(&sample, &alphabet, &cfg)?
        }
        AlgoArg::Delta => {
            if c1.is_some() || c2_count.is_some() || c2_prune.is_some() {
                return Err(Error::Precondition(
                    "--c1, --c2-count, and --c2-prune apply to the context algorithms only"
                        .into(),
                ));
            }
            let mut cfg = DeltaConfig::default();
            if let Some(v) = delta {
                cfg.delta = v;
            }
            if let Some(v) = k {
                cfg.k = v;
            }
            estimate_tree_delta(&sample, &alphabet, &cfg)?
        }
    };
    let fitted = est.fitted(&sample)?;
    save_tree(&fitted, tree_out)?;
    println!("algo={} contexts={} out={}", algo.name(), est.len(), tree_out.display());
    Ok(())
}

fn cmd_inspect(sample_path: &Path, depth: usize, string: Option<&str>) -> Result<()> {
    let (alphabet, sample) = read_sample(sample_path)?;
    let trie = build_counts(&sample, &alphabet, depth)?;
    if let Some(text) = string {
        let w = alphabet.parse_string(text)?;
        println!("{}\t{}", alphabet.render(&w), trie.n_count(&w)?);
        return Ok(());
    }
    let mut lines: Vec<(String, u64)> = Vec::new();
    trie.visit(1, depth, |w, node| lines.push((alphabet.render(w), node.count())));
    lines.sort();
    for (name, count) in lines {
        println!("{name}\t{count}");
    }
    Ok(())
}

struct TheoryArgs {
    m: Option<usize>,
    all_strings: bool,
    n_max: Option<usize>,
    k: Option<usize>,
    w: Option<String>,
    t: Option<f64>,
    n: Option<usize>,
    delta: Option<f64>,
    truncate: Option<usize>,
    out: Option<PathBuf>,
}

fn need<T>(v: Option<T>, flag: &str, quantity: Quantity) -> Result<T> {
    v.ok_or_else(|| {
        Error::Precondition(format!("quantity {} requires --{flag}", quantity.name()))
    })
}

fn cmd_theory(tree: &str, quantity: Quantity, args: TheoryArgs) -> Result<()> {
    let pct = TreeSource::parse(tree)?.load()?;
    let given = [
        ("m", args.m.is_some()),
        ("all-strings", args.all_strings),
        ("n-max", args.n_max.is_some()),
        ("k", args.k.is_some()),
        ("w", args.w.is_some()),
        ("t", args.t.is_some()),
        ("n", args.n.is_some()),
        ("delta", args.delta.is_some()),
        ("truncate", args.truncate.is_some()),
        ("out", args.out.is_some()),
    ];
    let allowed: &[&str] = match quantity {
        Quantity::Dm => &["m"],
        Quantity::Eps => &["m", "all-strings"],
        Quantity::Alpha => &["n-max"],
        Quantity::Beta => &["k"],
        Quantity::Canonical => &["k", "out"],
        Quantity::DeviationBound => &["w", "t", "n"],
        Quantity::RecoveryBound => &["truncate", "k", "delta", "n"],
        Quantity::MinK => &["truncate"],
    };
    for (flag, is_given) in given {
        if is_given && !allowed.contains(&flag) {
            return Err(Error::Precondition(format!(
                "--{flag} does not apply to quantity {}",
                quantity.name()
            )));
        }
    }
    let record = match quantity {
        Quantity::Dm => {
            let m = need(args.m, "m", quantity)?;
            format!("quantity=dm m={m} value={:.16e}", d_m(&pct, m)?)
        }
        Quantity::Eps => {
            let m = need(args.m, "m", quantity)?;
            format!(
                "quantity=eps m={m} all-strings={} value={:.16e}",
                args.all_strings,
                epsilon_m(&pct, m, args.all_strings)?
            )
        }
        Quantity::Alpha => {
            let n_max = args.n_max.unwrap_or(8);
            let stats = alpha_stats(&pct, n_max)?;
            let alphas = if stats.alphas.is_empty() {
                "-".to_string()
            } else {
                stats
                    .alphas
                    .iter()
                    .map(|a| format!("{a:.16e}"))
                    .collect::<Vec<_>>()
                    .join(";")
            };
            format!(
                "quantity=alpha n-max={n_max} alpha0={:.16e} alpha={:.16e} c={:.16e} \
                 rho-bound={:.16e} alphas={alphas}",
                stats.alpha0,
                stats.alpha,
                stats.c_constant(),
                stats.rho_sum_bound()
            )
        }
        Quantity::Beta => {
            let k = need(args.k, "k", quantity)?;
            format!("quantity=beta k={k} value={:.16e}", beta_k(&pct, k)?)
        }
        Quantity::Canonical => {
            let k = need(args.k, "k", quantity)?;
            let out = need(args.out, "out", quantity)?;
            let canon = canonical_approximation(&pct, k)?;
            save_tree(&canon, &out)?;
            format!(
                "quantity=canonical k={k} contexts={} out={}",
                canon.tree().len(),
                out.display()
            )
        }
        Quantity::DeviationBound => {
            let w = need(args.w, "w", quantity)?;
            let t = need(args.t, "t", quantity)?;
            let n = need(args.n, "n", quantity)?;
            let syms = pct.alphabet().parse_string(&w)?;
            format!(
                "quantity=deviation-bound w={} t={t} n={n} value={:.16e}",
                pct.alphabet().render(&syms),
                deviation_bound_for(&pct, &syms, t, n)?
            )
        }
        Quantity::RecoveryBound => {
            let truncate = need(args.truncate, "truncate", quantity)?;
            let k = need(args.k, "k", quantity)?;
            let delta = need(args.delta, "delta", quantity)?;
            let n = need(args.n, "n", quantity)?;
            format!(
                "quantity=recovery-bound truncate={truncate} k={k} delta={delta} n={n} \
                 value={:.16e}",
                recovery_bound_for(&pct, truncate, k, delta, n)?
            )
        }
        Quantity::MinK => {
            let truncate = need(args.truncate, "truncate", quantity)?;
            format!(
                "quantity=min-k truncate={truncate} value={}",
                min_k_condition(&pct, truncate)?
            )
        }
    };
    println!("{record}");
    Ok(())
}

fn cmd_experiment(config: &Path, out: &Path, workers: usize) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let report = run_recovery_experiment(&cfg, workers)?;
    report.write_csv(out)?;
    for line in &report.errors {
        eprintln!("replica failed: {line}");
    }
    for s in report.summaries() {
        println!(
            "n={} replicas={} recovery={:.4} se={:.4} mismatch={:.4}",
            s.n, s.replicas, s.recovery_rate, s.standard_error, s.mismatch_rate
        );
    }
    println!("rows={} errors={} out={}", report.rows.len(), report.errors.len(), out.display());
    Ok(())
}

fn cmd_compare(tree_a: &Path, tree_b: &Path, truncate: Option<usize>) -> Result<()> {
    let a = load_tree(tree_a)?;
    let b = load_tree(tree_b)?;
    let diff = compare_trees(a.tree(), b.tree(), truncate)?;
    println!("equal={}", diff.equal);
    for ctx in &diff.missing {
        println!("only-a\t{ctx}");
    }
    for ctx in &diff.extra {
        println!("only-b\t{ctx}");
    }
    Ok(())
}

fn cmd_ingest(input: &Path, mode: ModeArg, out: &Path, alphabet_out: Option<&Path>) -> Result<()> {
    let data = std::fs::read(input).map_err(|e| Error::io(input, e))?;
    let got = ingest_text(&data, mode.into())?;
    save_sample(&got.alphabet, got.sample.as_slice(), out)?;
    if let Some(path) = alphabet_out {
        let mut text = String::new();
        for label in got.alphabet.labels() {
            text.push_str(label);
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    println!("alphabet={} symbols={} out={}", got.alphabet.size(), got.sample.len(), out.display());
    Ok(())
}
