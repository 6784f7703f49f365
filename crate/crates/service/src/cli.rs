use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand};
use jobdup_core::eval::{self, default_grid};
use jobdup_core::pipeline::ScoreName;

use crate::app::{App, Selection};
use crate::config::ServiceConfig;
use crate::error::{Result, ServiceError};

#[derive(Debug, Parser)]
#[command(name = "jobdup", version, about = "Near-duplicate detection for job postings")]
pub struct Cli {
    /// Config file (TOML).
    #[arg(long, short, global = true, env = "JOBDUP_CONFIG", default_value = "jobdup.toml")]
    pub config: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Append postings from a JSONL file (`-` reads stdin).
    Ingest { file: PathBuf },
    /// Skill weight maintenance.
    Weights {
        #[command(subcommand)]
        action: WeightsAction,
    },
    /// Duplicate detection runs.
    Dedup {
        #[command(subcommand)]
        action: DedupAction,
    },
    /// Print the full score breakdown of one pair as JSON.
    Score { id_a: String, id_b: String },
    /// Precision, recall and F1 over a labeled pairs file.
    Eval(EvalArgs),
    /// Write `pair_id_a,pair_id_b,label,score` CSV for plotting.
    ExportPlotData {
        labeled: PathBuf,
        #[arg(long, default_value = "ts", value_parser = parse_score)]
        score: ScoreName,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP API.
    Serve,
}

#[derive(Debug, Subcommand)]
pub enum WeightsAction {
    /// Recompute document frequencies over the whole store.
    Rebuild,
}

#[derive(Debug, Subcommand)]
pub enum DedupAction {
    /// Score postings against their time-window candidates.
    Run {
        /// Only postings published on or after this date (YYYY-MM-DD).
        #[arg(long)]
        since: Option<NaiveDate>,
        /// Timestamp recorded on the decisions (RFC 3339 or YYYY-MM-DD);
        /// defaults to midnight UTC of the newest publication date.
        #[arg(long, value_parser = parse_as_of)]
        as_of: Option<DateTime<Utc>>,
    },
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub labeled: PathBuf,
    /// Score to evaluate; all eight at their configured thresholds when omitted.
    #[arg(long, value_parser = parse_score)]
    pub score: Option<ScoreName>,
    #[arg(long, requires = "score", conflicts_with = "sweep")]
    pub th: Option<f64>,
    /// Every threshold 0.00..=1.00 in steps of 0.01, plus the best-F1 row.
    #[arg(long)]
    pub sweep: bool,
    /// CSV instead of an aligned table.
    #[arg(long)]
    pub csv: bool,
}

fn parse_score(s: &str) -> std::result::Result<ScoreName, String> {
    s.parse().map_err(|e: jobdup_core::Error| e.to_string())
}

fn parse_as_of(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(|d| d.and_time(chrono::NaiveTime::MIN).and_utc())
        .map_err(|_| format!("`{s}` is neither RFC 3339 nor YYYY-MM-DD"))
}

fn out_err(e: std::io::Error) -> ServiceError {
    ServiceError::Io { path: "<stdout>".into(), source: e }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let config = ServiceConfig::load(&cli.config)?;
    let app = App::open(config)?;
    match cli.command {
        Command::Ingest { file } => {
            let report = if file.as_os_str() == "-" {
                app.ingest_jsonl(std::io::stdin().lock())?
            } else {
                let f = std::fs::File::open(&file).map_err(|e| ServiceError::io(&file, e))?;
                app.ingest_jsonl(BufReader::new(f))?
            };
            writeln!(out, "accepted {}, rejected {}", report.accepted, report.rejected.len()).map_err(out_err)?;
            for r in &report.rejected {
                let id = r.id.as_deref().unwrap_or("-");
                writeln!(out, "  line {}: {id}: {}", r.line, r.reason).map_err(out_err)?;
            }
        }
        Command::Weights { action: WeightsAction::Rebuild } => {
            let w = app.rebuild_weights()?;
            writeln!(out, "weights rebuilt: {} terms over {} postings", w.len(), w.corpus_size()).map_err(out_err)?;
        }
        Command::Dedup { action: DedupAction::Run { since, as_of } } => {
            let selection = since.map_or(Selection::All, Selection::Since);
            let s = app.dedup(selection, as_of)?;
            writeln!(
                out,
                "{} postings, {} comparisons, {} duplicates, {} unscored",
                s.postings, s.comparisons, s.duplicates, s.unscored
            )
            .map_err(out_err)?;
        }
        Command::Score { id_a, id_b } => {
            let breakdown = app.score(&id_a, &id_b)?;
            app.persist_cache()?;
            let text = serde_json::to_string_pretty(&breakdown).expect("breakdown serializes");
            writeln!(out, "{text}").map_err(out_err)?;
        }
        Command::Eval(args) => {
            let labeled = app.load_labeled(&args.labeled)?;
            let breakdowns = app.breakdowns(&labeled)?;
            app.persist_cache()?;
            let (rows, best) = match (args.score, args.th, args.sweep) {
                (score, _, true) => {
                    let report = eval::sweep(&labeled, &breakdowns, score.unwrap_or(ScoreName::Ts), &default_grid())?;
                    (report.rows, Some(report.best))
                }
                (Some(score), th, false) => {
                    let th = th.unwrap_or_else(|| app.thresholds().threshold_for(score));
                    (vec![eval::evaluate(&labeled, &breakdowns, score, th)?], None)
                }
                (None, _, false) => {
                    let rows = ScoreName::ALL
                        .iter()
                        .map(|s| eval::evaluate(&labeled, &breakdowns, *s, app.thresholds().threshold_for(*s)))
                        .collect::<jobdup_core::Result<Vec<_>>>()?;
                    (rows, None)
                }
            };
            if args.csv {
                write!(out, "{}", eval::rows_to_csv(&rows)?).map_err(out_err)?;
            } else {
                write!(out, "{}", eval::render_table(&rows)).map_err(out_err)?;
                if let Some(b) = best {
                    writeln!(out, "best F1 {:.4} at TH {:.2} (P {:.4}, R {:.4})", b.f1, b.threshold, b.precision, b.recall)
                        .map_err(out_err)?;
                }
            }
        }
        Command::ExportPlotData { labeled, score, out: path } => {
            let pairs = app.load_labeled(&labeled)?;
            let breakdowns = app.breakdowns(&pairs)?;
            app.persist_cache()?;
            let csv = eval::score_distribution_csv(&pairs, &breakdowns, score)?;
            match path {
                Some(p) => std::fs::write(&p, csv).map_err(|e| ServiceError::io(&p, e))?,
                None => write!(out, "{csv}").map_err(out_err)?,
            }
        }
        Command::Serve => {
            let runtime = tokio::runtime::Runtime::new().map_err(|e| ServiceError::Config(format!("runtime: {e}")))?;
            runtime.block_on(crate::http::serve(Arc::new(app)))?;
        }
    }
    Ok(())
}
