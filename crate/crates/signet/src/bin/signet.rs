//! Thin command-line front end over the signet library.
//!
//! Exit codes: 0 success, 1 fatal error, 2 partial failure under the skip
//! policy.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use signet::balance::{balance_index, discretize, predict_edge_sign, triad_census, TriadKind};
use signet::entities::{validate_entities, AliasTable, CanonicalEntity};
use signet::ingest::{load_corpus, write_corpus, OnError};
use signet::network::{
    build_temporal, diff_snapshots, export_snapshot, snapshot_from_json, ExportFormat,
    SnapshotOptions,
};
use signet::relations::{read_observations, EntityPair};
use signet::run::{parse_duration, run_pipeline, RunConfig, RunReport};

#[derive(Parser)]
#[command(name = "signet", version, about = "Signed business networks from news text")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalArgs {
    /// Key-value configuration file; flags override its settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Backend mode.
    #[arg(long, global = true, value_parser = ["live", "record", "replay"])]
    mode: Option<String>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Load, validate, deduplicate, and sort a news corpus. The input is a
    /// local file path or an http(s) URL serving the same line format.
    Ingest {
        #[arg(long)]
        input: String,
        #[arg(long, default_value = "skip", value_parser = ["fail", "skip"])]
        on_error: String,
    },
    /// Partition a corpus into business news vs stock-market noise.
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Run the zero-shot relation-extraction pipeline.
    Extract {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value = "off", value_parser = ["on", "off"])]
        context: String,
        #[arg(long, default_value = "3", value_parser = ["3", "4"])]
        classes: String,
    },
    /// Run the LLM explanation pipeline.
    Explain {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value = "off", value_parser = ["on", "off"])]
        summaries: String,
    },
    /// Aggregate an observations file into windowed snapshots.
    Build {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long, default_value = "30d")]
        window: String,
        #[arg(long, default_value = "30d")]
        stride: String,
        #[arg(long)]
        include_isolated: bool,
    },
    /// Compare two snapshot files.
    Diff {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
    },
    /// Triad census and balance index of a snapshot.
    Analyze {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
    },
    /// Predict the sign of an unobserved edge.
    Predict {
        #[arg(long)]
        snapshot: PathBuf,
        /// Entity pair as `a,b`.
        #[arg(long)]
        pair: String,
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
    },
    /// Re-serialize a snapshot as json, dot, or graphml.
    Export {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, value_parser = ["json", "dot", "graphml"])]
        format: String,
    },
    /// Validate an alias table file.
    Entities {
        #[command(subcommand)]
        command: EntitiesCommand,
    },
    /// End-to-end: ingest, filter, both pipelines, snapshots, report.
    Run(PipelineArgs),
    /// End-to-end in record mode, writing replay fixtures as it goes.
    Record(PipelineArgs),
}

#[derive(Subcommand)]
enum EntitiesCommand {
    Validate {
        #[arg(long)]
        table: PathBuf,
    },
}

#[derive(Args, Clone)]
struct PipelineArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long, value_parser = ["3", "4"])]
    classes: Option<String>,
    #[arg(long, value_parser = ["on", "off"])]
    context: Option<String>,
    #[arg(long, value_parser = ["on", "off"])]
    summaries: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    stride: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_parser = ["fail-fast", "skip"])]
    on_error: Option<String>,
}

fn load_run_config(global: &GlobalArgs) -> signet::Result<RunConfig> {
    let mut config = match &global.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    config.apply_env();
    if let Some(mode) = &global.mode {
        config.set("mode", mode, None)?;
    }
    if let Some(out) = &global.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn apply_pipeline_args(config: &mut RunConfig, args: &PipelineArgs) -> signet::Result<()> {
    if let Some(v) = &args.corpus {
        config.corpus = v.clone();
    }
    if let Some(v) = &args.table {
        config.alias_table = v.clone();
    }
    if let Some(v) = &args.fixtures {
        config.fixtures = Some(v.clone());
    }
    if let Some(v) = &args.classes {
        config.set("classes", v, None)?;
    }
    if let Some(v) = &args.context {
        config.set("context", v, None)?;
    }
    if let Some(v) = &args.summaries {
        config.set("summaries", v, None)?;
    }
    if let Some(v) = &args.window {
        config.set("window", v, None)?;
    }
    if let Some(v) = &args.stride {
        config.set("stride", v, None)?;
    }
    if let Some(v) = args.tau {
        config.set("tau", &v.to_string(), None)?;
    }
    if let Some(v) = &args.on_error {
        config.set("on_error", v, None)?;
    }
    Ok(())
}

fn write_out(path: &Path, bytes: &[u8]) -> signet::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| signet::Error::io(parent.display().to_string(), e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| signet::Error::io(path.display().to_string(), e))
}

fn report_summary(report: &RunReport, quiet: bool) {
    if quiet {
        return;
    }
    let c = &report.counts;
    eprintln!(
        "items {} (dupes {}, skipped lines {}); kept {} dropped {}; zsc obs {}; llm explanations {} obs {}; snapshots {} edges {}; issues {}",
        c.items_loaded,
        c.duplicates,
        c.lines_skipped,
        c.items_kept,
        c.items_dropped,
        c.zsc_observations,
        c.llm_explanations,
        c.llm_observations,
        c.snapshots,
        c.edges_total,
        report.issues.len()
    );
}

fn run(cli: Cli) -> signet::Result<i32> {
    let global = cli.global.clone();
    match cli.command {
        Command::Ingest { input, on_error } => {
            let policy: OnError = on_error.parse()?;
            let report = if input.starts_with("http://") || input.starts_with("https://") {
                signet::ingest::fetch_corpus(&input, std::time::Duration::from_secs(30), policy)?
            } else {
                load_corpus(Path::new(&input), policy)?
            };
            let out_dir = global.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let mut buf = Vec::new();
            write_corpus(&report.corpus, &mut buf)?;
            write_out(&out_dir.join("corpus.jsonl"), &buf)?;
            if !global.quiet {
                eprintln!(
                    "{} items ({} duplicates dropped, {} lines skipped) -> {}",
                    report.corpus.len(),
                    report.duplicates,
                    report.skipped.len(),
                    out_dir.join("corpus.jsonl").display()
                );
                for issue in &report.skipped {
                    eprintln!("  line {}: field `{}`: {}", issue.line, issue.field, issue.message);
                }
            }
            Ok(if report.skipped.is_empty() { 0 } else { 2 })
        }
        Command::Filter { input, threshold } => {
            let mut config = load_run_config(&global)?;
            config.corpus = input.clone();
            config.set("stock_threshold", &threshold.to_string(), None)?;
            let gateway = config.build_gateway()?;
            let report = load_corpus(&input, config.on_load_error)?;
            let filter = signet::ingest::StockFilterConfig {
                threshold,
                ..Default::default()
            };
            let (kept, dropped) = signet::ingest::filter_stock_news(&report.corpus, &gateway, &filter)?;
            let out_dir = config.out_dir.clone();
            let mut buf = Vec::new();
            write_corpus(&kept, &mut buf)?;
            write_out(&out_dir.join("kept.jsonl"), &buf)?;
            let mut buf = Vec::new();
            write_corpus(&dropped, &mut buf)?;
            write_out(&out_dir.join("dropped.jsonl"), &buf)?;
            if !global.quiet {
                eprintln!("kept {} dropped {}", kept.len(), dropped.len());
            }
            Ok(0)
        }
        Command::Extract {
            corpus,
            table,
            context,
            classes,
        } => {
            let mut config = load_run_config(&global)?;
            config.corpus = corpus;
            config.alias_table = table;
            config.set("context", &context, None)?;
            config.set("classes", &classes, None)?;
            config.llm_pipeline = false;
            config.validate()?;
            let gateway = config.build_gateway()?;
            let report = run_pipeline(&config, &gateway)?;
            report_summary(&report, global.quiet);
            Ok(report.exit_code())
        }
        Command::Explain {
            corpus,
            table,
            summaries,
        } => {
            let mut config = load_run_config(&global)?;
            config.corpus = corpus;
            config.alias_table = table;
            config.set("summaries", &summaries, None)?;
            config.zsc_pipeline = false;
            config.validate()?;
            let gateway = config.build_gateway()?;
            let report = run_pipeline(&config, &gateway)?;
            report_summary(&report, global.quiet);
            Ok(report.exit_code())
        }
        Command::Build {
            observations,
            window,
            stride,
            include_isolated,
        } => {
            let observations = read_observations(&observations)?;
            let network = build_temporal(
                &observations,
                parse_duration(&window)?,
                parse_duration(&stride)?,
                SnapshotOptions { include_isolated },
            )?;
            let out_dir = global.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            for (idx, snapshot) in network.snapshots.iter().enumerate() {
                write_out(
                    &out_dir.join(format!("snapshot-{idx:03}.json")),
                    &export_snapshot(snapshot, ExportFormat::Json),
                )?;
            }
            if !global.quiet {
                eprintln!(
                    "{} snapshot(s) -> {}",
                    network.snapshots.len(),
                    out_dir.display()
                );
            }
            Ok(0)
        }
        Command::Diff { before, after, tau } => {
            let before = snapshot_from_json(&std::fs::read(&before).map_err(|e| {
                signet::Error::io(before.display().to_string(), e)
            })?)?;
            let after = snapshot_from_json(&std::fs::read(&after).map_err(|e| {
                signet::Error::io(after.display().to_string(), e)
            })?)?;
            let diff = diff_snapshots(&before, &after, tau);
            let doc = serde_json::json!({
                "added": diff.added.iter().map(|e| serde_json::json!({
                    "a": e.pair.a(), "b": e.pair.b(), "weight": e.weight,
                })).collect::<Vec<_>>(),
                "removed": diff.removed.iter().map(|e| serde_json::json!({
                    "a": e.pair.a(), "b": e.pair.b(), "weight": e.weight,
                })).collect::<Vec<_>>(),
                "sign_flips": diff.sign_flips.iter().map(|f| serde_json::json!({
                    "a": f.pair.a(), "b": f.pair.b(), "before": f.before, "after": f.after,
                })).collect::<Vec<_>>(),
                "weight_deltas": diff.weight_deltas.iter().map(|(pair, (b, a))| serde_json::json!({
                    "a": pair.a(), "b": pair.b(), "before": b, "after": a,
                })).collect::<Vec<_>>(),
            });
            println!("{doc:#}");
            Ok(0)
        }
        Command::Analyze { snapshot, tau } => {
            let snapshot = snapshot_from_json(&std::fs::read(&snapshot).map_err(|e| {
                signet::Error::io(snapshot.display().to_string(), e)
            })?)?;
            let graph = discretize(&snapshot, tau);
            let census = triad_census(&graph);
            let doc = serde_json::json!({
                "nodes": graph.nodes.len(),
                "edges": graph.signed_edges.len(),
                "census": {
                    "+++": census.get(TriadKind::AllPositive),
                    "++-": census.get(TriadKind::OneNegative),
                    "+--": census.get(TriadKind::TwoNegative),
                    "---": census.get(TriadKind::AllNegative),
                },
                "triangles": census.total(),
                "balance_index": balance_index(&census),
            });
            println!("{doc:#}");
            Ok(0)
        }
        Command::Predict { snapshot, pair, tau } => {
            let snapshot = snapshot_from_json(&std::fs::read(&snapshot).map_err(|e| {
                signet::Error::io(snapshot.display().to_string(), e)
            })?)?;
            let pair: EntityPair = pair.parse()?;
            let graph = discretize(&snapshot, tau);
            let prediction = predict_edge_sign(&graph, &pair)?;
            let doc = serde_json::json!({
                "a": prediction.pair.a(),
                "b": prediction.pair.b(),
                "predicted": prediction.predicted,
                "votes": { "positive": prediction.votes.0, "negative": prediction.votes.1 },
            });
            println!("{doc:#}");
            Ok(0)
        }
        Command::Export { snapshot, format } => {
            let parsed = snapshot_from_json(&std::fs::read(&snapshot).map_err(|e| {
                signet::Error::io(snapshot.display().to_string(), e)
            })?)?;
            let format: ExportFormat = format.parse()?;
            let bytes = export_snapshot(&parsed, format);
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| signet::Error::io("<stdout>", e))?;
            Ok(0)
        }
        Command::Entities { command } => match command {
            EntitiesCommand::Validate { table } => {
                let bytes = std::fs::read(&table)
                    .map_err(|e| signet::Error::io(table.display().to_string(), e))?;
                let entities: Vec<CanonicalEntity> = serde_json::from_slice(&bytes)
                    .map_err(|e| signet::Error::InvalidArgument(format!("{}: {e}", table.display())))?;
                let entities: Vec<CanonicalEntity> = entities
                    .into_iter()
                    .map(|e| CanonicalEntity::new(e.id, e.display_name, e.aliases, e.ticker))
                    .collect();
                let conflicts = validate_entities(&entities);
                if conflicts.is_empty() {
                    if !global.quiet {
                        eprintln!("{} entities, no alias conflicts", entities.len());
                    }
                    // also exercise full construction (id shape, uniqueness)
                    AliasTable::from_entities(entities)?;
                    Ok(0)
                } else {
                    for c in &conflicts {
                        println!("conflict: alias `{}` claimed by `{}` and `{}`", c.alias, c.first, c.second);
                    }
                    Ok(1)
                }
            }
        },
        Command::Run(args) => {
            let mut config = load_run_config(&global)?;
            apply_pipeline_args(&mut config, &args)?;
            config.validate()?;
            let gateway = config.build_gateway()?;
            let report = run_pipeline(&config, &gateway)?;
            report_summary(&report, global.quiet);
            Ok(report.exit_code())
        }
        Command::Record(args) => {
            let mut config = load_run_config(&global)?;
            config.set("mode", "record", None)?;
            apply_pipeline_args(&mut config, &args)?;
            config.validate()?;
            let gateway = config.build_gateway()?;
            let report = signet::run::run_record(&config, &gateway)?;
            report_summary(&report, global.quiet);
            Ok(report.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(1)
        }
    }
}
