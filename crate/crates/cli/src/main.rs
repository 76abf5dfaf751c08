use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use kcat_core::analytics::{
    accuracy_matrix, error_report, group_by_annotator, integrate, AnnotationFile,
};
use kcat_core::linker::DEFAULT_K_MAX;
use kcat_core::session::{import_json, ExportDocument, ExportFormat};
use kcat_core::{Corpus, KnowledgeBase};
use kcat_server::{report_json, IntegrationReport, Project, ProjectConfig, SessionStore};

/// Knowledge-constrained entity typing annotation tool.
#[derive(Parser)]
#[command(name = "kcat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print how far entity linking shrinks the type space, as JSON.
    Stats(StatsArgs),
    /// Compare and merge annotators' exported files.
    #[command(subcommand)]
    Manage(Manage),
    /// Check exported json files against the knowledge base and corpus.
    Validate {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Export a stored session.
    Export {
        #[arg(long, default_value = "kcat.toml")]
        config: PathBuf,
        #[arg(long)]
        session: String,
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "kcat.toml")]
        config: PathBuf,
    },
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_K_MAX, value_parser = clap::value_parser!(usize))]
    k_max: usize,
}

#[derive(Subcommand)]
enum Manage {
    /// Pairwise accuracy between annotators, as JSON.
    Matrix {
        /// Validate labels against this knowledge base.
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Classify one annotator's labels against a reference and render a
    /// LaTeX report.
    Errors {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, required = true)]
        gold: Vec<PathBuf>,
        #[arg(long, required = true)]
        pred: Vec<PathBuf>,
        /// Write here instead of stdout; a `.json` path gets the JSON report.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Merge several annotators' labels by voting.
    Integrate {
        #[arg(long)]
        kb: PathBuf,
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// Joins the error chain, dropping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !prev.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        prev = msg;
    }
    out
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Stats(a) => {
            if a.k_max == 0 {
                bail!("--k-max must be at least 1");
            }
            let project = Project::load(&a.kb, &a.corpus, a.predictions.as_deref(), a.k_max)?;
            print!("{}", report_json(&project.reduction()?));
        }
        Command::Manage(m) => manage(m)?,
        Command::Validate { kb, corpus, files } => return validate(&kb, &corpus, &files),
        Command::Export {
            config,
            session,
            format,
            output,
        } => {
            let config = ProjectConfig::load(&config)?;
            let format: ExportFormat = format.parse()?;
            let project = Project::from_config(&config)?;
            let store = SessionStore::open(&config.data_dir)?;
            if !store.log_path(&session).is_file() {
                bail!("unknown session `{session}` in {}", store.dir().display());
            }
            let s = store.load(&project.kb, &session)?;
            let doc = project
                .corpus
                .doc(s.doc_id())
                .with_context(|| format!("document `{}` is not in the corpus", s.doc_id()))?;
            emit(output.as_deref(), &s.export(doc, format)?)?;
        }
        Command::Serve { config } => {
            let config = ProjectConfig::load(&config)?;
            tokio::runtime::Runtime::new()?.block_on(kcat_server::serve(config))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn read_export(path: &Path) -> Result<ExportDocument> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    import_json(&bytes).with_context(|| path.display().to_string())
}

/// Loads exports and merges them per annotator. Labels are checked against
/// `kb` when one is given.
fn annotation_files(paths: &[PathBuf], kb: Option<&KnowledgeBase>) -> Result<Vec<AnnotationFile>> {
    let mut files = Vec::with_capacity(paths.len());
    for p in paths {
        let export = read_export(p)?;
        let file = match kb {
            Some(kb) => AnnotationFile::from_export(&export, kb.hierarchy())
                .with_context(|| p.display().to_string())?,
            None => {
                let mut f = AnnotationFile::with_labels(
                    export.annotator.clone(),
                    export
                        .annotations
                        .iter()
                        .filter_map(|a| a.label.clone().map(|l| (a.mention_id.clone(), l))),
                );
                f.doc_ids.insert(export.doc_id.clone());
                f
            }
        };
        files.push(file);
    }
    Ok(group_by_annotator(files)?)
}

fn single_annotator(paths: &[PathBuf], kb: &KnowledgeBase, role: &str) -> Result<AnnotationFile> {
    let mut files = annotation_files(paths, Some(kb))?;
    if files.len() != 1 {
        bail!("--{role} files must all come from one annotator");
    }
    Ok(files.remove(0))
}

fn manage(m: Manage) -> Result<()> {
    match m {
        Manage::Matrix { kb, files } => {
            let kb = kb.map(KnowledgeBase::load_dir).transpose()?;
            let files = annotation_files(&files, kb.as_ref())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&accuracy_matrix(&files)?)?
            );
        }
        Manage::Errors {
            kb,
            corpus,
            gold,
            pred,
            output,
        } => {
            let kb = KnowledgeBase::load_dir(&kb)?;
            let corpus = Corpus::load(&corpus)?;
            let gold = single_annotator(&gold, &kb, "gold")?;
            let pred = single_annotator(&pred, &kb, "pred")?;
            gold.check_corpus(&corpus)?;
            pred.check_corpus(&corpus)?;
            let report = error_report(kb.hierarchy(), &gold, &pred, &corpus)?;
            let json_out = output
                .as_deref()
                .is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
            let body = if json_out {
                let mut s = serde_json::to_string_pretty(&report)?;
                s.push('\n');
                s
            } else {
                report.to_tex(&corpus)
            };
            emit(output.as_deref(), body.as_bytes())?;
            let c = &report.counts;
            eprintln!(
                "correct {} / over-specific {} / not specific {} / incorrect path {}",
                c.correct, c.over_specific, c.not_specific, c.incorrect_path
            );
        }
        Manage::Integrate { kb, files, output } => {
            let kb = KnowledgeBase::load_dir(&kb)?;
            let files = annotation_files(&files, Some(&kb))?;
            let result = integrate(kb.hierarchy(), &files)?;
            let mut s = serde_json::to_string_pretty(&IntegrationReport::new(&files, result))?;
            s.push('\n');
            emit(output.as_deref(), s.as_bytes())?;
        }
    }
    Ok(())
}

fn validate(kb: &Path, corpus: &Path, files: &[PathBuf]) -> Result<ExitCode> {
    let kb = KnowledgeBase::load_dir(kb)?;
    let corpus = Corpus::load(corpus)?;
    let mut failed = false;
    for f in files {
        match read_export(f).and_then(|e| Ok(e.validate(&kb, &corpus)?)) {
            Ok(()) => println!("ok {}", f.display()),
            Err(e) => {
                failed = true;
                println!("invalid {}: {}", f.display(), describe(&e));
            }
        }
    }
    Ok(if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match output {
        Some(p) => fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            Ok(out.flush()?)
        }
    }
}
