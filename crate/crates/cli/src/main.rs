use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use mfrkit::checker::check_model;
use mfrkit::corpus::Corpus;
use mfrkit::eval::{load_transcripts, read_scores, report_from_scores, score_all, write_scores, write_transcript, Thresholds};
use mfrkit::oracle::{solve, SearchConfig};
use mfrkit::parser::{parse_model_with_lines, parse_plan, serialize_model};
use mfrkit::pipeline::{run_strategy, BackendConfig, Strategy};
use mfrkit::validator::{trace_render, validate_plan, Mode};
use mfrkit::ProblemModel;

#[derive(Parser)]
#[command(name = "mfrkit", version, about = "Model-first planning toolkit")]
struct Cli {
    /// Task corpus root.
    #[arg(long, global = true, value_name = "DIR")]
    corpus: Option<PathBuf>,
    /// Chat-completions endpoint for the live backend.
    #[arg(long, global = true, env = "MFRKIT_ENDPOINT", value_name = "URL")]
    endpoint: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Live,
    Replay,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model and print its canonical form.
    Parse { file: PathBuf },
    /// Report semantic issues as LINE:KIND:SUBJECT:MESSAGE.
    Check { file: PathBuf },
    /// Validate a plan and print the state trace.
    Validate {
        model: PathBuf,
        plan: PathBuf,
        #[arg(long, default_value = "continue")]
        mode: Mode,
    },
    /// Find a shortest plan by breadth-first search.
    Solve {
        model: PathBuf,
        #[arg(long, default_value_t = 12)]
        max_depth: usize,
    },
    /// Run strategies on corpus tasks and write transcripts.
    Run {
        /// Task id, or `all`. Repeatable.
        #[arg(long, required = true)]
        task: Vec<String>,
        /// cot, react, mfr-two-call, mfr-single-call. Repeatable or comma separated.
        #[arg(long, required = true, value_delimiter = ',')]
        strategy: Vec<Strategy>,
        #[arg(long, value_enum)]
        backend: BackendArg,
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Model name sent to the live endpoint.
        #[arg(long, env = "MFRKIT_MODEL")]
        model: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        temperature: f64,
        #[arg(long, default_value = "transcripts")]
        out: PathBuf,
    },
    /// Score a transcript directory and write scores.json plus the report.
    Eval {
        #[arg(long)]
        transcripts: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        thresholds: Option<PathBuf>,
    },
    /// Write report.json, table.txt and plot.csv from a scores file.
    Report {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        thresholds: Option<PathBuf>,
    },
    /// List corpus task ids.
    Tasks,
}

enum Failure {
    /// The tool worked and the answer is negative.
    Domain,
    Usage(String),
    Io(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::Io)
}

fn load_model(path: &Path) -> Result<ProblemModel, Failure> {
    match parse_model_with_lines(&read(path)?) {
        Ok((model, _)) => Ok(model),
        Err(issues) => {
            for i in issues {
                println!("{i}");
            }
            Err(Failure::Domain)
        }
    }
}

fn load_thresholds(path: Option<&Path>) -> Result<Thresholds, Failure> {
    match path {
        None => Ok(Thresholds::default()),
        Some(p) => Thresholds::from_config(&read(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
    }
}

fn cmd_parse(file: &Path) -> Outcome {
    let model = load_model(file)?;
    print!("{}", serialize_model(&model));
    Ok(())
}

fn cmd_check(file: &Path) -> Outcome {
    let (model, lines) = match parse_model_with_lines(&read(file)?) {
        Ok(v) => v,
        Err(issues) => {
            for i in issues {
                println!("{i}");
            }
            return Err(Failure::Domain);
        }
    };
    let issues = check_model(&model);
    for i in &issues {
        let line = i.locator.and_then(|l| lines.line(l)).unwrap_or(0);
        println!("{line}:{}:{}:{}", i.kind, i.subject, i.message);
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(Failure::Domain)
    }
}

fn cmd_validate(model: &Path, plan: &Path, mode: Mode) -> Outcome {
    let model = load_model(model)?;
    let plan = parse_plan(&read(plan)?);
    let report = validate_plan(&model, &plan, mode);
    print!("{}", trace_render(&report, &model));
    if report.violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Domain)
    }
}

fn cmd_solve(model: &Path, max_depth: usize) -> Outcome {
    let model = load_model(model)?;
    let issues = check_model(&model);
    if !issues.is_empty() {
        for i in issues {
            eprintln!("{i}");
        }
        return Err(Failure::Domain);
    }
    match solve(&model, &SearchConfig::with_depth(max_depth)) {
        Ok((plan, stats)) => {
            match &plan {
                Some(p) => print!("```plan\n{}```\n", p.to_text()),
                None => println!("no plan within depth {max_depth}"),
            }
            println!("expanded={} frontier={} depth={}", stats.states_expanded, stats.frontier_peak, stats.depth_reached);
            if plan.is_some() {
                Ok(())
            } else {
                Err(Failure::Domain)
            }
        }
        Err(e) => {
            eprintln!("search stopped: {e}");
            Err(Failure::Domain)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    corpus: &Corpus,
    endpoint: Option<String>,
    tasks: &[String],
    strategies: &[Strategy],
    backend: BackendArg,
    fixture: Option<PathBuf>,
    model: Option<String>,
    temperature: f64,
    out: &Path,
) -> Outcome {
    let mut config = match backend {
        BackendArg::Replay => {
            let f = fixture.ok_or_else(|| Failure::Usage("--backend replay needs --fixture".into()))?;
            BackendConfig::replay(f)
        }
        BackendArg::Live => {
            let mut c = BackendConfig::live(endpoint.unwrap_or_default(), model.unwrap_or_default());
            c.api_key = std::env::var("MFRKIT_API_KEY").ok().filter(|k| !k.is_empty());
            c
        }
    };
    config.temperature = temperature;
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let backend = config.build().map_err(|e| Failure::Io(e.into()))?;

    let ids: Vec<String> = if tasks.iter().any(|t| t == "all") {
        corpus.list_tasks().map_err(|e| Failure::Io(e.into()))?
    } else {
        tasks.to_vec()
    };
    let mut failed = false;
    for id in &ids {
        let task = corpus.load_task(id).map_err(|e| match e {
            mfrkit::CorpusError::UnknownId(_) => Failure::Usage(e.to_string()),
            e => Failure::Io(e.into()),
        })?;
        for &s in strategies {
            let t = run_strategy(&task, s, backend.as_ref(), temperature);
            if let mfrkit::pipeline::Outcome::BackendFailure { error } = &t.outcome {
                eprintln!("{id} {s}: {error}");
                failed = true;
            }
            let path = write_transcript(out, &t).map_err(|e| Failure::Io(e.into()))?;
            println!("{}", path.display());
        }
    }
    if failed {
        Err(Failure::Io(anyhow::anyhow!("backend failures; see transcripts")))
    } else {
        Ok(())
    }
}

fn cmd_eval(corpus: &Corpus, transcripts: &Path, out: &Path, thresholds: Option<&Path>) -> Outcome {
    let thresholds = load_thresholds(thresholds)?;
    let records = load_transcripts(transcripts).map_err(|e| Failure::Io(e.into()))?;
    let scores = score_all(corpus, &records).map_err(|e| Failure::Io(e.into()))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_scores(&out.join("scores.json"), &scores).map_err(|e| Failure::Io(e.into()))?;
    report_from_scores(&scores, &thresholds, out).map_err(|e| Failure::Io(e.into()))?;
    print!("{}", fs::read_to_string(out.join("table.txt")).context("reading table")?);
    Ok(())
}

fn cmd_report(scores: &Path, out: &Path, thresholds: Option<&Path>) -> Outcome {
    let thresholds = load_thresholds(thresholds)?;
    let scores = read_scores(scores).map_err(|e| Failure::Io(e.into()))?;
    report_from_scores(&scores, &thresholds, out).map_err(|e| Failure::Io(e.into()))?;
    print!("{}", fs::read_to_string(out.join("table.txt")).context("reading table")?);
    Ok(())
}

fn cmd_tasks(corpus: &Corpus) -> Outcome {
    for id in corpus.list_tasks().map_err(|e| Failure::Io(e.into()))? {
        let family = mfrkit::Family::from_task_id(&id).expect("listed ids have a family");
        println!("{id}\t{family}");
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    let corpus = cli.corpus.map(Corpus::new).unwrap_or_default();
    match cli.command {
        Command::Parse { file } => cmd_parse(&file),
        Command::Check { file } => cmd_check(&file),
        Command::Validate { model, plan, mode } => cmd_validate(&model, &plan, mode),
        Command::Solve { model, max_depth } => cmd_solve(&model, max_depth),
        Command::Run { task, strategy, backend, fixture, model, temperature, out } => {
            cmd_run(&corpus, cli.endpoint, &task, &strategy, backend, fixture, model, temperature, &out)
        }
        Command::Eval { transcripts, out, thresholds } => cmd_eval(&corpus, &transcripts, &out, thresholds.as_deref()),
        Command::Report { scores, out, thresholds } => cmd_report(&scores, &out, thresholds.as_deref()),
        Command::Tasks => cmd_tasks(&corpus),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
