use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use qdlm::corpus::{parse_corpus, parse_kb, read_eval, serialize_corpus, serialize_kb, write_eval, TaskId};
use qdlm::harness::{self, Report};
use qdlm::kb::{query, Lexicon};
use qdlm::predictor::{build_api_call, predict_record, Session};
use qdlm::synthgen::{self, GenConfig, Split, Variant};
use qdlm::{ModelBundle, Result};

#[derive(Parser)]
#[command(
    name = "qdlm",
    version,
    about = "Quantized dialog language model for restaurant reservations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model bundle from a transcript corpus and its KB.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = qdlm::lm::DEFAULT_ORDER)]
        order: usize,
    },
    /// Closed-loop evaluation over JSONL records.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        eval: PathBuf,
        /// KB whose entities the test dialogs mention, if not the training KB.
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        teacher_forced: bool,
        /// Exit with status 3 if any task falls below this accuracy.
        #[arg(long)]
        min_accuracy: Option<f64>,
        /// Text table, or JSON when the name ends in `.json`.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "test")]
        name: String,
    },
    /// Generate a synthetic KB, corpus and evaluation records.
    Gen {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Comma-separated task numbers, e.g. `1,2,3` or `T1,T4`.
        #[arg(long, default_value = "1,2,3,4,5")]
        tasks: String,
        /// Training dialogs per task.
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// Test dialogs per task.
        #[arg(long, default_value_t = 500)]
        test_n: usize,
        #[arg(long, default_value_t = 50)]
        kb_size: usize,
        #[arg(long, default_value_t = 10)]
        pool_size: usize,
        #[arg(long, default_value = "base")]
        variant: Variant,
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write evaluation records for the training dialogs.
        #[arg(long)]
        train_eval: bool,
    },
    /// Rank candidates for JSONL records on stdin; prints `index<TAB>score`.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        kb: Option<PathBuf>,
    },
    /// Interactive session: type user turns, read system turns.
    Chat {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        kb: PathBuf,
    },
}

enum Failure {
    Data(qdlm::Error),
    Gate(String),
}

impl From<qdlm::Error> for Failure {
    fn from(e: qdlm::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.into())
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn load_lexicon(kb: Option<&Path>) -> Result<Option<Lexicon>> {
    match kb {
        Some(p) => Ok(Some(Lexicon::from_kb(&parse_kb(open(p)?)?))),
        None => Ok(None),
    }
}

fn parse_tasks(list: &str) -> std::result::Result<Vec<TaskId>, String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

fn run(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::Train { corpus, kb, out, order } => {
            let corpus = parse_corpus(open(&corpus)?)?;
            let kb = parse_kb(open(&kb)?)?;
            let bundle = harness::train(&corpus, &kb, order)?;
            bundle.save(&out)?;
            eprintln!("{} clusters, order {}", bundle.clusters.len(), bundle.config.order);
        }
        Command::Eval {
            model,
            eval,
            kb,
            teacher_forced,
            min_accuracy,
            report,
            name,
        } => {
            let bundle = ModelBundle::load(&model)?;
            let lexicon = bundle.runtime_lexicon(load_lexicon(kb.as_deref())?.as_ref());
            let records = read_eval(open(&eval)?)?;
            let column = harness::evaluate(Arc::new(bundle), Arc::new(lexicon), &records, teacher_forced, &name)?;
            let rep = Report::single(column);
            let text = rep.render();
            let body = if report.extension().is_some_and(|e| e == "json") {
                rep.to_json()
            } else {
                text.clone()
            };
            fs::write(&report, body)?;
            print!("{text}");
            if let (Some(min), Some(got)) = (min_accuracy, rep.min_accuracy()) {
                if got < min {
                    return Err(Failure::Gate(format!("accuracy {got:.3} below {min:.3}")));
                }
            }
        }
        Command::Gen {
            seed,
            tasks,
            n,
            test_n,
            kb_size,
            pool_size,
            variant,
            out_dir,
            train_eval,
        } => {
            let tasks = parse_tasks(&tasks).map_err(|e| Failure::Data(qdlm::Error::Generation(e)))?;
            let config = GenConfig {
                seed,
                tasks,
                n_dialogs: n,
                test_dialogs: test_n,
                kb_size,
                pool_size,
                variant,
                ..Default::default()
            };
            let generated = synthgen::generate(&config)?;
            fs::create_dir_all(&out_dir)?;
            fs::write(out_dir.join("kb.txt"), serialize_kb(&generated.kb))?;
            fs::write(out_dir.join("corpus.txt"), serialize_corpus(&generated.train))?;
            fs::write(out_dir.join("test.txt"), serialize_corpus(&generated.test))?;
            let mut splits = vec![(Split::Test, "test-eval.jsonl")];
            if train_eval {
                splits.push((Split::Train, "eval.jsonl"));
            }
            for (split, file) in splits {
                let mut w = BufWriter::new(File::create(out_dir.join(file))?);
                for i in 0..generated.dialogs(split).len() {
                    write_eval(&mut w, &generated.dialog_records(split, i))?;
                }
                w.flush()?;
            }
            eprintln!(
                "{} restaurants, {} train and {} test dialogs in {}",
                generated.kb.len(),
                generated.train.len(),
                generated.test.len(),
                out_dir.display()
            );
        }
        Command::Predict { model, kb } => {
            let bundle = ModelBundle::load(&model)?;
            let lexicon = Arc::new(bundle.runtime_lexicon(load_lexicon(kb.as_deref())?.as_ref()));
            let bundle = Arc::new(bundle);
            let records = read_eval(io::stdin().lock())?;
            let mut out = io::stdout().lock();
            for record in &records {
                let (index, score) = predict_record(bundle.clone(), lexicon.clone(), record)?.best();
                writeln!(out, "{index}\t{score}")?;
            }
        }
        Command::Chat { model, kb } => chat(&model, &kb)?,
    }
    Ok(())
}

/// Surface form of the predicted cluster under the current state.
fn realize(session: &Session) -> Option<String> {
    let dist = session.predict_distribution();
    let (&id, _) = dist.iter().fold(None, |best: Option<(_, &f64)>, (id, p)| match best {
        Some((_, bp)) if bp >= p => best,
        _ => Some((id, p)),
    })?;
    let bundle = session.bundle();
    if bundle.clusters.is_api_call(id) {
        return build_api_call(&session.state.slots).ok();
    }
    let canonical = bundle.clusters.canonical(id)?;
    let tokens = session.state.placeholder_map.lexicalize(&canonical.tokens);
    let tokens: Vec<String> = tokens
        .into_iter()
        .map(|t| {
            session
                .state
                .slots
                .iter()
                .find(|(ty, _)| ty.token() == t)
                .map_or(t, |(_, v)| v.clone())
        })
        .collect();
    Some(tokens.join(" "))
}

fn chat(model: &Path, kb_path: &Path) -> Result<()> {
    let bundle = ModelBundle::load(model)?;
    let kb = parse_kb(open(kb_path)?)?;
    let lexicon = bundle.runtime_lexicon(Some(&Lexicon::from_kb(&kb)));
    let mut session = Session::new(Arc::new(bundle), Arc::new(lexicon));
    let stdin = io::stdin();
    let mut out = io::stdout();
    write!(out, "> ")?;
    out.flush()?;
    for line in stdin.lock().lines() {
        let line = line?;
        let user = if line.trim().is_empty() {
            qdlm::text::SILENCE
        } else {
            line.trim()
        };
        session.observe_user(user);
        let reply = realize(&session).unwrap_or_else(|| "sorry, i did not get that".to_string());
        writeln!(out, "{reply}")?;
        session.observe_system(&reply);
        if qdlm::corpus::is_api_call(&reply) {
            let results = query(&kb, &session.state.slots);
            for r in &results {
                writeln!(out, "  {} (rating {})", r.name, r.get("R_rating").unwrap_or("?"))?;
            }
            if !results.is_empty() {
                session.observe_results(&results)?;
            }
        }
        write!(out, "> ")?;
        out.flush()?;
    }
    writeln!(out)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Gate(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(3)
        }
    }
}
