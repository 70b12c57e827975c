//! Command-line front end.
//!
//! Exit codes: 0 ok, 2 usage or configuration error, 3 data error,
//! 4 external dependency unavailable.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ideafeed_core::condition::Condition;
use ideafeed_core::corpus::{read_lines, CorpusRecord, CorpusStore};
use ideafeed_core::explain::{attribute_top, contrast_texts, suggest, SuggestContext};
use ideafeed_core::kg::{KnowledgeGraph, RemoteGraph};
use ideafeed_core::metrics::{bootstrap, Metric, MetricReport};
use ideafeed_core::scoring::{load_training_jsonl, train_quality};
use ideafeed_core::{Config, Error, Result, ScoreKind, Scorer};
use serde::Serialize;

use crate::app;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_DEPENDENCY: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "ideafeed", version, about = "Scores, explanations and diversity metrics for short messages")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "IDEAFEED_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the configured random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output format; defaults to csv for `metrics` and json otherwise.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct TextArgs {
    /// Feedback condition whose corpus scores diversity.
    #[arg(long, default_value = "SAXC")]
    pub condition: String,
    /// Message text.
    #[arg(long)]
    pub text: String,
    /// Score to explain.
    #[arg(long, default_value = "diversity")]
    pub score: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        /// Listen address; overrides the configured one.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Train the quality model and report k-fold AUCs.
    Train {
        /// JSONL file of {"text", "rating"} lines.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Where to write the model file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Quality and diversity scores for one or more messages.
    Score {
        #[arg(long, default_value = "SAXC")]
        condition: String,
        #[arg(long, required = true)]
        text: Vec<String>,
    },
    /// Word attributions, or edit attributions against an earlier version.
    Explain {
        #[command(flatten)]
        args: TextArgs,
        /// Earlier iteration of the message; switches to edit attributions.
        #[arg(long)]
        previous: Option<String>,
    },
    /// Replacement-word suggestions for the highlighted words.
    Suggest {
        #[command(flatten)]
        args: TextArgs,
    },
    /// Corpus diversity metrics with optional bootstrap.
    Metrics {
        /// Conditions to report; all initialised ones by default.
        #[arg(long)]
        condition: Vec<String>,
        /// Number of bootstrap samples (0 disables).
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
        /// Which ideations to measure.
        #[arg(long, value_enum, default_value = "all")]
        scope: Scope,
    },
    /// Load a relation TSV, or fetch terms from a live endpoint into a snapshot.
    IngestKg {
        /// TSV file to read; defaults to the configured snapshot.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Write the normalised edge list here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Terms to fetch from the live endpoint (appended to the snapshot).
        #[arg(long)]
        fetch: Vec<String>,
        #[arg(long)]
        endpoint: Option<String>,
    },
    /// Initialise condition corpora from the seed messages.
    InitCorpus {
        #[arg(long)]
        condition: Vec<String>,
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
        /// Pick a seeded random subset instead of the first messages.
        #[arg(long)]
        sample: bool,
    },
}

/// Ideations included in corpus metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scope {
    /// Seed and submitted ideations together.
    All,
    /// Submitted ideations only, with the seeds as the Chamfer prior.
    New,
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_dependency() => EXIT_DEPENDENCY,
        Error::InvalidConfig(_) | Error::InvalidCondition(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parse `args` and run the command, writing results to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| match e {
            Error::Io { path, source } => Error::InvalidConfig(format!("{}: {source}", path.display())),
            e => e,
        })?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write_err(e: std::io::Error) -> Error {
    Error::Io { path: "<stdout>".into(), source: e }
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Json { context: "output".into(), source: e })?;
    writeln!(out, "{s}").map_err(write_err)
}

fn emit_csv(out: &mut dyn Write, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| write_err(e.into());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(write_err)
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

fn parse_conditions(names: &[String]) -> Result<Vec<Condition>> {
    if names.is_empty() {
        return Ok(Condition::ALL.to_vec());
    }
    names.iter().map(|n| n.parse()).collect()
}

fn scorer_for(cfg: &Config, condition: Condition) -> Result<Scorer> {
    let embedder = app::embedder(cfg)?;
    let model = Arc::new(app::load_model(cfg)?);
    let store = app::open_store(cfg, embedder.clone())?;
    let corpus = store
        .snapshot(condition)
        .ok_or_else(|| Error::NotFound(format!("corpus for condition {condition}")))?;
    Scorer::new(embedder, model, corpus)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(&cli)?;
    let format = cli.format;
    let json = format != Some(Format::Csv);
    match cli.command {
        Command::Serve { bind } => {
            let engine = Arc::new(app::engine(&cfg)?);
            let addr = bind.unwrap_or_else(|| cfg.service.bind.clone());
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Io { path: "<runtime>".into(), source: e })?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .map_err(|e| Error::Io { path: addr.clone().into(), source: e })?;
                eprintln!("listening on {}", listener.local_addr().map(|a| a.to_string()).unwrap_or(addr));
                crate::api::serve(engine, listener).await.map_err(|e| Error::Io { path: "<server>".into(), source: e })
            })
        }
        Command::Train { data, out: model_out, folds } => {
            let data = match data {
                Some(d) => d,
                None => app::required(&cfg.paths.training, "training")?,
            };
            let model_out = match model_out {
                Some(p) => p,
                None => app::required(&cfg.paths.model, "model")?,
            };
            let mut params = cfg.model.train_params(cfg.seed);
            if let Some(k) = folds {
                params.folds = k;
            }
            let examples = load_training_jsonl(&data, params.threshold)?;
            let embedder = app::embedder(&cfg)?;
            let (model, report) = train_quality(&examples, embedder.as_ref(), &params)?;
            model.save(&model_out)?;
            if json {
                #[derive(Serialize)]
                struct TrainOutput<'a> {
                    model: String,
                    train_hash: &'a str,
                    #[serde(flatten)]
                    report: &'a ideafeed_core::scoring::TrainingReport,
                }
                emit_json(
                    out,
                    &TrainOutput { model: model_out.display().to_string(), train_hash: &model.train_hash, report: &report },
                )
            } else {
                let mut rows: Vec<Vec<String>> = report
                    .fold_aucs
                    .iter()
                    .enumerate()
                    .map(|(i, a)| vec![(i + 1).to_string(), fmt_f(*a)])
                    .collect();
                rows.push(vec!["mean".into(), fmt_f(report.mean_auc)]);
                emit_csv(out, &["fold", "auc"], rows)
            }
        }
        Command::Score { condition, text } => {
            let scorer = scorer_for(&cfg, condition.parse()?)?;
            let scores = text.iter().map(|t| scorer.score(t)).collect::<Result<Vec<_>>>()?;
            if json {
                #[derive(Serialize)]
                struct Row<'a> {
                    text: &'a str,
                    #[serde(flatten)]
                    scores: &'a ideafeed_core::ScorePair,
                }
                let rows: Vec<Row> = text.iter().zip(&scores).map(|(t, s)| Row { text: t, scores: s }).collect();
                emit_json(out, &rows)
            } else {
                let rows = text
                    .iter()
                    .zip(&scores)
                    .map(|(t, s)| {
                        vec![
                            t.clone(),
                            fmt_f(s.quality_pct),
                            fmt_f(s.diversity_pct),
                            fmt_f(s.diversity_raw),
                            fmt_f(s.display_diversity_pct),
                            s.degenerate.to_string(),
                        ]
                    })
                    .collect();
                emit_csv(
                    out,
                    &["text", "quality_pct", "diversity_pct", "diversity_raw", "display_diversity_pct", "degenerate"],
                    rows,
                )
            }
        }
        Command::Explain { args, previous } => {
            let kind: ScoreKind = args.score.parse()?;
            let scorer = scorer_for(&cfg, args.condition.parse()?)?;
            if let Some(prev) = previous {
                let c = contrast_texts(&prev, &args.text, 1, 2, &scorer, kind)?;
                if json {
                    return emit_json(out, &c);
                }
                let rows = c
                    .edits
                    .iter()
                    .map(|e| {
                        vec![
                            format!("{:?}", e.edit_kind).to_lowercase(),
                            e.token.clone(),
                            e.count.to_string(),
                            fmt_f(e.raw_benefit),
                            fmt_f(e.benefit),
                        ]
                    })
                    .collect();
                return emit_csv(out, &["edit_kind", "token", "count", "raw_benefit", "benefit"], rows);
            }
            let a = attribute_top(&args.text, &scorer, kind, cfg.explain.highlight_k)?;
            if json {
                return emit_json(out, &a);
            }
            let rows = a
                .entries
                .iter()
                .map(|e| {
                    vec![
                        e.token.clone(),
                        fmt_f(e.raw_w),
                        fmt_f(e.change_priority),
                        fmt_f(e.sub_score()),
                        a.highlighted.contains(&e.token).to_string(),
                    ]
                })
                .collect();
            emit_csv(out, &["token", "raw_w", "change_priority", "sub_score", "highlighted"], rows)
        }
        Command::Suggest { args } => {
            let kind: ScoreKind = args.score.parse()?;
            let scorer = scorer_for(&cfg, args.condition.parse()?)?;
            let kg = app::knowledge(&cfg)?;
            let a = attribute_top(&args.text, &scorer, kind, cfg.explain.highlight_k)?;
            let sc = cfg.explain.suggest_config();
            let delta_corpus = sc
                .delta_corpus
                .unwrap_or_else(|| scorer.corpus.pairwise_quantile(cfg.explain.delta_corpus_quantile));
            let ctx = SuggestContext::new(scorer.embedder.as_ref(), scorer.corpus.embeddings(), delta_corpus, &sc.anchors)?;
            let found = suggest(&args.text, &a, &scorer, kg.as_ref(), &ctx, &sc)?;
            if json {
                return emit_json(out, &found);
            }
            let rows = found
                .values()
                .flatten()
                .map(|s| {
                    vec![
                        s.source_token.clone(),
                        s.replacement_term.clone(),
                        s.relation.clone(),
                        fmt_f(s.edge_weight),
                        fmt_f(s.delta_quality_pct),
                        fmt_f(s.delta_diversity_pct),
                    ]
                })
                .collect();
            emit_csv(out, &["source_token", "replacement_term", "relation", "edge_weight", "dq", "dd"], rows)
        }
        Command::Metrics { condition, bootstrap: n_boot, scope } => {
            let conditions = parse_conditions(&condition)?;
            let dir = app::required(&cfg.paths.corpus_dir, "corpus_dir")?;
            let embedder = app::embedder(&cfg)?;
            let store = CorpusStore::open(&dir, embedder.clone())?;
            let mut reports: Vec<(Condition, MetricReport)> = Vec::new();
            for c in conditions {
                let Some(seed_count) = store.seed_count(c) else {
                    if !condition.is_empty() {
                        return Err(Error::NotFound(format!("corpus for condition {c}")));
                    }
                    continue;
                };
                let records = store.records(c)?;
                reports.extend(condition_metrics(c, &records, seed_count, scope, embedder.as_ref(), n_boot, cfg.seed)?);
            }
            if reports.is_empty() {
                return Err(Error::EmptySet);
            }
            if format == Some(Format::Json) {
                let rows: Vec<BTreeMap<&str, serde_json::Value>> = reports
                    .iter()
                    .map(|(c, r)| {
                        BTreeMap::from([
                            ("condition", serde_json::json!(c)),
                            ("metric", serde_json::json!(r.metric)),
                            ("value", serde_json::json!(r.value)),
                            ("n", serde_json::json!(r.n_points)),
                            ("bootstrap", serde_json::json!(r.bootstrap)),
                        ])
                    })
                    .collect();
                return emit_json(out, &rows);
            }
            let rows = reports
                .iter()
                .map(|(c, r)| {
                    let (m, s) = r
                        .bootstrap
                        .as_ref()
                        .map(|b| (fmt_f(b.mean), fmt_f(b.stderr)))
                        .unwrap_or_default();
                    vec![r.metric.to_string(), c.to_string(), fmt_f(r.value), r.n_points.to_string(), m, s, cfg.seed.to_string()]
                })
                .collect();
            emit_csv(out, &["metric", "condition", "value", "n", "boot_mean", "boot_stderr", "seed"], rows)
        }
        Command::IngestKg { input, out: export, fetch, endpoint } => {
            let snapshot = match input {
                Some(p) => p,
                None => app::required(&cfg.paths.kg, "kg")?,
            };
            let graph = if fetch.is_empty() {
                let (g, stats) = KnowledgeGraph::ingest(&snapshot)?;
                if let Some(p) = &export {
                    std::fs::write(p, g.export_tsv()).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                }
                if json {
                    return emit_json(out, &serde_json::json!({"path": snapshot, "terms": g.len(), "stats": stats}));
                }
                return emit_csv(
                    out,
                    &["edges", "malformed", "comments"],
                    vec![vec![stats.edges.to_string(), stats.malformed.to_string(), stats.comments.to_string()]],
                );
            } else {
                let endpoint = endpoint
                    .or_else(|| cfg.kg.endpoint.clone())
                    .ok_or_else(|| Error::InvalidConfig("--fetch needs --endpoint or kg.endpoint".into()))?;
                let remote = RemoteGraph::new(endpoint, &snapshot, Duration::from_millis(cfg.kg.fetch_delay_ms))?;
                let mut rows = Vec::new();
                for term in &fetch {
                    let edges = remote.fetch_remote(term)?;
                    rows.push(vec![term.clone(), edges.len().to_string()]);
                }
                if json {
                    let fetched: BTreeMap<&String, usize> =
                        rows.iter().map(|r| (&r[0], r[1].parse().unwrap_or(0))).collect();
                    emit_json(out, &serde_json::json!({"path": snapshot, "fetched": fetched, "requests": remote.requests()}))?;
                } else {
                    emit_csv(out, &["term", "edges"], rows)?;
                }
                remote.graph()
            };
            if let Some(p) = &export {
                std::fs::write(p, graph.export_tsv()).map_err(|e| Error::Io { path: p.clone(), source: e })?;
            }
            Ok(())
        }
        Command::InitCorpus { condition, seeds, count, sample } => {
            let conditions = parse_conditions(&condition)?;
            let dir = app::required(&cfg.paths.corpus_dir, "corpus_dir")?;
            let seeds = match seeds {
                Some(p) => p,
                None => app::required(&cfg.paths.seeds, "seeds")?,
            };
            let lines = read_lines(&seeds)?;
            let n = count.unwrap_or(cfg.service.seed_count);
            let store = CorpusStore::open(&dir, app::embedder(&cfg)?)?;
            let mut rows = Vec::new();
            for c in conditions {
                let snap = store.init_corpus(c, &lines, n, sample.then_some(cfg.seed))?;
                rows.push((c, snap.version, snap.len()));
            }
            if json {
                let v: Vec<_> = rows
                    .iter()
                    .map(|(c, v, n)| serde_json::json!({"condition": c, "version": v, "records": n}))
                    .collect();
                emit_json(out, &v)
            } else {
                let rows = rows.iter().map(|(c, v, n)| vec![c.to_string(), v.to_string(), n.to_string()]).collect();
                emit_csv(out, &["condition", "version", "records"], rows)
            }
        }
    }
}

/// Metric rows for one condition. With [`Scope::All`] dispersion and
/// disparity cover every ideation in the corpus; with [`Scope::New`] they
/// cover the submitted ones only. The repeller Chamfer distance always
/// measures submitted ideations against the seeds and is omitted when
/// nothing was submitted.
pub fn condition_metrics(
    condition: Condition,
    records: &[CorpusRecord],
    seed_count: usize,
    scope: Scope,
    embedder: &dyn ideafeed_core::Embedder,
    n_boot: usize,
    seed: u64,
) -> Result<Vec<(Condition, MetricReport)>> {
    let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
    let vectors: Vec<_> = embedder.embed_many(&texts)?.into_iter().map(|e| e.vector).collect();
    let (prior, new) = vectors.split_at(seed_count.min(vectors.len()));
    let pool: &[_] = match scope {
        Scope::All => &vectors,
        Scope::New => new,
    };
    let mut out = Vec::new();
    for metric in [Metric::DispersionSum, Metric::DispersionMean, Metric::Disparity] {
        match bootstrap(metric, pool, None, n_boot, None, seed) {
            Ok(r) => out.push((condition, r)),
            Err(Error::TooFewPoints(_)) if scope == Scope::New => {}
            Err(e) => return Err(e),
        }
    }
    if !new.is_empty() {
        out.push((condition, bootstrap(Metric::RepellerChamfer, new, Some(prior), n_boot, None, seed)?));
    }
    Ok(out)
}
