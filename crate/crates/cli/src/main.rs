//! `forge` - command-line front end for the corpus toolkit. One subcommand
//! per pipeline stage plus `run`, which executes a declarative recipe.
//! Logs go to standard error; data goes to the declared files (and the
//! score table to standard output).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use forge_core::cleaner::{clean_corpus, reports_to_tsv};
use forge_core::corpus::{
    load_mono, load_parallel, load_parallel_tsv, tokenize, write_parallel, write_parallel_tsv,
    ParallelCorpus,
};
use forge_core::lm::{read_arpa, write_arpa, NGramModel, Smoothing, TrainOptions};
use forge_core::metrics::{lowercase_document, score_all, Components, Metric, ScoreReport};
use forge_core::miner::{
    extract_dictionary, load_model, mine_documents, save_model, train_classifier, ProbDictionary,
    DEFAULT_PROB_FIELD,
};
use forge_core::pipeline::{clean_options, run_recipe, PipelineError};
use forge_core::restorer::restore;
use forge_core::selector::{select, train_selection_models, SelectionConfig};
use forge_core::util::write_atomic;

#[derive(Parser)]
#[command(
    name = "forge",
    version,
    about = "Corpus engineering toolkit: cleaning, mining, language models, data selection, scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Detect and repair corrupted segments, then apply the length filter.
    Clean(CleanArgs),
    /// Train an n-gram language model and write it as ARPA.
    #[command(name = "lm-train")]
    LmTrain(LmTrainArgs),
    /// Score an evaluation set with a trained model.
    Ppl(PplArgs),
    /// Train the sentence-pair similarity classifier.
    #[command(name = "train-classifier")]
    TrainClassifier(TrainClassifierArgs),
    /// Mine parallel sentences from comparable document pairs.
    Mine(MineArgs),
    /// Extract a probabilistic 1-gram dictionary from a phrase table.
    #[command(name = "extract-dict")]
    ExtractDict(ExtractDictArgs),
    /// Modified Moore-Lewis data selection.
    Select(SelectArgs),
    /// Score translations with BLEU, NIST, TER, and METEOR.
    Score(ScoreArgs),
    /// Restore casing, punctuation, and dropped tokens to lemmatizer output.
    Restore(RestoreArgs),
    /// Execute a multi-stage recipe.
    Run(RunArgs),
}

#[derive(Args)]
struct CleanArgs {
    /// Side to repair: source, target, both, or a language tag.
    #[arg(long, default_value = "source")]
    side: String,
    /// Comma-separated detectors: whole, internal, overlong.
    #[arg(long, default_value = "whole,internal,overlong")]
    patterns: String,
    #[arg(long = "max-len", default_value_t = 80)]
    max_len: usize,
    /// Minimum duplicated-run length for the internal detector.
    #[arg(long = "min-dup-len", default_value_t = 3)]
    min_dup_len: usize,
    /// Drop segments with duplications instead of repairing them.
    #[arg(long = "drop-dups")]
    drop_dups: bool,
    /// Write the per-action report TSV here.
    #[arg(long)]
    report: Option<PathBuf>,
    in_src: PathBuf,
    in_tgt: PathBuf,
    out_src: PathBuf,
    out_tgt: PathBuf,
}

#[derive(Args)]
struct LmTrainArgs {
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// kn, wb, or mle.
    #[arg(long, default_value = "kn")]
    smoothing: String,
    /// Map singleton training tokens to <unk>.
    #[arg(long)]
    unk: bool,
    corpus: PathBuf,
    model: PathBuf,
}

#[derive(Args)]
struct PplArgs {
    model: PathBuf,
    eval: PathBuf,
}

#[derive(Args)]
struct TrainClassifierArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Positive pairs as TSV (source \t target).
    positives: PathBuf,
    /// Optional negative pairs; synthesized by mispairing when absent.
    #[arg(long)]
    negatives: Option<PathBuf>,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    /// Similarity threshold in [0,1]; required, there is no sensible default.
    #[arg(long)]
    threshold: f64,
    #[arg(long, default_value_t = 0.49)]
    gap: f64,
    /// TSV listing document pairs: docA_path \t docB_path per line.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractDictArgs {
    /// 0-based score field holding the translation probability.
    #[arg(long = "prob-field", default_value_t = DEFAULT_PROB_FIELD)]
    prob_field: usize,
    phrase_table: PathBuf,
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    /// In-domain corpus TSV.
    #[arg(long = "in-domain")]
    in_domain: PathBuf,
    #[arg(long, default_value_t = 150_000)]
    sample: usize,
    /// Keep ratio in (0,1]; required, never defaulted silently.
    #[arg(long)]
    keep: f64,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Score with source-side models only.
    #[arg(long)]
    monolingual: bool,
    /// Write per-segment scores here.
    #[arg(long)]
    scores: Option<PathBuf>,
    general: PathBuf,
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// Comma-separated metrics from bleu, nist, ter, meteor.
    #[arg(long, default_value = "bleu,nist,ter,meteor")]
    metric: String,
    #[arg(long)]
    hyp: PathBuf,
    /// Comma-separated reference files.
    #[arg(long)]
    refs: String,
    /// Lowercase before scoring.
    #[arg(long)]
    lc: bool,
    /// Write the machine-readable report here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct RestoreArgs {
    orig: PathBuf,
    lemma: PathBuf,
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    recipe: PathBuf,
    /// Re-run stages even when the manifest says they are up to date.
    #[arg(long)]
    force: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("forge: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("forge: {e:#}");
            let code = e
                .downcast_ref::<PipelineError>()
                .map(|p| p.exit_code())
                .unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Clean(args) => cmd_clean(args),
        Command::LmTrain(args) => cmd_lm_train(args),
        Command::Ppl(args) => cmd_ppl(args),
        Command::TrainClassifier(args) => cmd_train_classifier(args),
        Command::Mine(args) => cmd_mine(args),
        Command::ExtractDict(args) => cmd_extract_dict(args),
        Command::Select(args) => cmd_select(args),
        Command::Score(args) => cmd_score(args),
        Command::Restore(args) => cmd_restore(args),
        Command::Run(args) => {
            let manifest = run_recipe(&args.recipe, args.force)?;
            for stage in &manifest.stages {
                eprintln!(
                    "stage {} ({}): {}{} ms",
                    stage.index,
                    stage.name,
                    if stage.skipped { "skipped, " } else { "" },
                    stage.elapsed_ms
                );
            }
            Ok(())
        }
    }
}

fn cmd_clean(args: CleanArgs) -> Result<()> {
    let corpus = load_parallel(&args.in_src, &args.in_tgt)?;
    let opts = clean_options(
        &args.side,
        &args.patterns,
        args.max_len,
        args.min_dup_len,
        args.drop_dups,
        &corpus,
    )
    .map_err(|e| anyhow!(e))?;
    let (cleaned, reports, summary) = clean_corpus(&corpus, &opts);
    write_parallel(&cleaned, &args.out_src, &args.out_tgt)?;
    if let Some(report) = &args.report {
        write_atomic(report, reports_to_tsv(&reports).as_bytes())?;
    }
    eprintln!(
        "clean: {} -> {} segments, {} affected ({:.2}% of segments, {:.2}% of tokens removed), {} dropped",
        summary.segments_in,
        summary.segments_out,
        summary.segments_affected,
        100.0 * summary.affected_segment_ratio,
        100.0 * summary.removed_token_ratio,
        summary.segments_dropped
    );
    Ok(())
}

fn cmd_lm_train(args: LmTrainArgs) -> Result<()> {
    let corpus = load_mono(&args.corpus)?;
    let smoothing = Smoothing::parse(&args.smoothing)
        .ok_or_else(|| anyhow!("unknown smoothing {:?} (expected kn, wb, or mle)", args.smoothing))?;
    let opts = TrainOptions {
        order: args.order,
        smoothing,
        map_singletons_to_unk: args.unk,
    };
    let model = NGramModel::train_with(&corpus, &opts)?;
    for &order in model.kn_fallback_orders() {
        eprintln!(
            "lm-train: order {order} count-of-count statistics degenerate; \
             used Witten-Bell for that order"
        );
    }
    write_arpa(&model, &args.model)?;
    eprintln!(
        "lm-train: order {} {} model on {} sentences -> {}",
        model.order(),
        smoothing.as_str(),
        corpus.len(),
        args.model.display()
    );
    Ok(())
}

fn cmd_ppl(args: PplArgs) -> Result<()> {
    let model = read_arpa(&args.model)?;
    let eval = load_mono(&args.eval)?;
    let report = model.perplexity(&eval)?;
    println!("sentences:      {}", eval.len());
    println!("tokens scored:  {}", report.token_count);
    println!("oov tokens:     {}", report.oov_count);
    println!("log10 prob sum: {:.6}", report.log10_prob_sum);
    println!("ppl:            {:.6}", report.ppl);
    if report.ppl_excluding_oov.is_nan() {
        println!("ppl (no oov):   n/a");
    } else {
        println!("ppl (no oov):   {:.6}", report.ppl_excluding_oov);
    }
    Ok(())
}

fn cmd_train_classifier(args: TrainClassifierArgs) -> Result<()> {
    let positives = load_parallel_tsv(&args.positives)?;
    let negatives = match &args.negatives {
        Some(path) => load_parallel_tsv(path)?.segments,
        None => Vec::new(),
    };
    let (dict, stats) = ProbDictionary::load_tsv(&args.dict)?;
    if stats.skipped > 0 {
        eprintln!(
            "train-classifier: skipped {} malformed dictionary lines",
            stats.skipped
        );
    }
    let (model, meta) = train_classifier(&positives.segments, &negatives, &dict, args.seed)?;
    save_model(&model, &meta, &args.out)?;
    eprintln!(
        "train-classifier: {} positives, {} negatives{} -> {}",
        meta.positives,
        meta.negatives,
        if meta.synthesized_negatives {
            " (synthesized)"
        } else {
            ""
        },
        args.out.display()
    );
    Ok(())
}

fn cmd_mine(args: MineArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.threshold) {
        bail!("threshold must lie in [0,1], got {}", args.threshold);
    }
    let model = load_model(&args.model)?;
    let (dict, _) = ProbDictionary::load_tsv(&args.dict)?;
    let listing = std::fs::read_to_string(&args.pairs)
        .with_context(|| format!("cannot read {}", args.pairs.display()))?;
    let mut documents = Vec::new();
    for (lineno, line) in listing.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (a_path, b_path) = line.split_once('\t').ok_or_else(|| {
            anyhow!(
                "{}:{}: expected docA_path\\tdocB_path",
                args.pairs.display(),
                lineno + 1
            )
        })?;
        documents.push((load_mono(a_path.trim())?, load_mono(b_path.trim())?));
    }
    let pair_count = documents.len();
    let mined = mine_documents(&documents, &model, &dict, args.threshold, args.gap);
    let corpus = ParallelCorpus::new(mined, "src", "tgt");
    write_parallel_tsv(&corpus, &args.out)?;
    eprintln!(
        "mine: {} document pairs -> {} segments at threshold {}",
        pair_count,
        corpus.len(),
        args.threshold
    );
    Ok(())
}

fn cmd_extract_dict(args: ExtractDictArgs) -> Result<()> {
    let (dict, stats) = extract_dictionary(&args.phrase_table, args.prob_field)?;
    dict.write_tsv(&args.out)?;
    eprintln!(
        "extract-dict: {} entries, {} malformed lines skipped -> {}",
        stats.entries,
        stats.skipped,
        args.out.display()
    );
    Ok(())
}

fn cmd_select(args: SelectArgs) -> Result<()> {
    let in_domain = load_parallel_tsv(&args.in_domain)?;
    let general = load_parallel_tsv(&args.general)?;
    let cfg = SelectionConfig {
        in_domain_sample_size: args.sample,
        keep_ratio: args.keep,
        lm_order: args.order,
        bilingual: !args.monolingual,
    };
    let models = train_selection_models(&in_domain, &general, &cfg, args.seed)?;
    let (selected, ranked) = select(&general, &cfg, &models)?;
    write_parallel_tsv(&selected, &args.out)?;
    if let Some(scores) = &args.scores {
        let mut out = String::from("segment_index\tscore\n");
        for (i, r) in ranked.iter().enumerate() {
            out.push_str(&format!("{i}\t{:.6}\n", r.score));
        }
        write_atomic(scores, out.as_bytes())?;
    }
    eprintln!(
        "select: kept {} of {} segments (ratio {})",
        selected.len(),
        general.len(),
        args.keep
    );
    Ok(())
}

fn metric_line(report: &ScoreReport) -> String {
    match (&report.metric, &report.components) {
        (Metric::Bleu, Components::Bleu(c)) => format!(
            "BLEU    {:.4}  ({:.2} x100)  BP {:.4}  precisions {}",
            report.corpus_score,
            100.0 * report.corpus_score,
            c.brevity_penalty,
            c.precisions
                .iter()
                .map(|p| format!("{p:.4}"))
                .collect::<Vec<_>>()
                .join("/")
        ),
        (Metric::Nist, Components::Nist(c)) => format!(
            "NIST    {:.4}  BP {:.4}",
            report.corpus_score, c.brevity_penalty
        ),
        (Metric::Ter, Components::Ter(c)) => format!(
            "TER     {:.4}  ({} edits / {} ref words: {} ins, {} del, {} sub, {} shifts)",
            report.corpus_score,
            c.total_edits,
            c.ref_length,
            c.insertions,
            c.deletions,
            c.substitutions,
            c.shifts
        ),
        (Metric::Meteor, Components::Meteor(c)) => format!(
            "METEOR  {:.4}  (P {:.4}, R {:.4}, {} chunks / {} matches)",
            report.corpus_score, c.precision, c.recall, c.chunks, c.matches
        ),
        _ => format!("{}  {:.4}", report.metric.as_str(), report.corpus_score),
    }
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let mut hyp = load_mono(&args.hyp)?;
    let mut refs = Vec::new();
    for path in args.refs.split(',') {
        refs.push(load_mono(path.trim())?);
    }
    if args.lc {
        hyp = lowercase_document(&hyp);
        refs = refs.iter().map(lowercase_document).collect();
    }
    let metrics: Vec<Metric> = args
        .metric
        .split(',')
        .map(|m| Metric::parse(m).ok_or_else(|| anyhow!("unknown metric {m:?}")))
        .collect::<Result<_>>()?;
    let reports = score_all(&hyp, &refs, &metrics)?;
    println!(
        "scored {} segments against {} reference(s){}",
        hyp.len(),
        refs.len(),
        if args.lc { ", lowercased" } else { "" }
    );
    for report in &reports {
        println!("{}", metric_line(report));
    }
    // The machine-readable report always comes along: to the given file,
    // or to stdout after the table.
    let json = serde_json::to_string_pretty(&reports)?;
    match &args.json {
        Some(path) => {
            write_atomic(path, json.as_bytes())?;
            eprintln!("score: report written to {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_restore(args: RestoreArgs) -> Result<()> {
    let orig = std::fs::read_to_string(&args.orig)
        .with_context(|| format!("cannot read {}", args.orig.display()))?;
    let lemma = std::fs::read_to_string(&args.lemma)
        .with_context(|| format!("cannot read {}", args.lemma.display()))?;
    let orig_lines: Vec<&str> = orig.lines().map(|l| l.trim_end_matches('\r')).collect();
    let lemma_lines: Vec<&str> = lemma.lines().map(|l| l.trim_end_matches('\r')).collect();
    if orig_lines.len() != lemma_lines.len() {
        bail!(
            "line count mismatch: {} has {} lines, {} has {}",
            args.orig.display(),
            orig_lines.len(),
            args.lemma.display(),
            lemma_lines.len()
        );
    }
    let mut out = String::new();
    for (o, l) in orig_lines.iter().zip(&lemma_lines) {
        out.push_str(&restore(&tokenize(o), &tokenize(l)).detokenized());
        out.push('\n');
    }
    write_atomic(&args.out, out.as_bytes())?;
    eprintln!(
        "restore: {} lines -> {}",
        orig_lines.len(),
        args.out.display()
    );
    Ok(())
}
