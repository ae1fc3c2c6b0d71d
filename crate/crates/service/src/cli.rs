//! The `inmt` command line: training, batch and interactive translation,
//! simulation, evaluation, serving and model utilities.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufRead, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use inmt_core::config::Settings;
use inmt_core::corpus::{ParallelCorpus, Split, TextCodec};
use inmt_core::decoding::{average_checkpoints, build_stat_dict, nbest_line, score_sentence};
use inmt_core::engine::Engine;
use inmt_core::eval::{evaluate, format_report, ksmr, MetricReport};
use inmt_core::inmt::{
    accept_session, apply_feedback, baseline_effort, simulate_corpus, start_session, Feedback,
};
use inmt_core::model::checkpoint::{self, Dtype};
use inmt_core::toy;
use inmt_core::training::{train, TrainData};

use crate::server::{load_engine, serve, ServerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const TRAIN_LOG_FILE: &str = "trainlog.jsonl";

#[derive(Debug, Parser)]
#[command(name = "inmt", version, about = "Interactive-predictive neural machine translation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every model-using subcommand. Precedence: flags, then
/// the config file, then built-in defaults.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set learning_rate=0.001`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub beam_size: Option<usize>,
}

impl ConfigArgs {
    pub fn settings(&self) -> Result<Settings, CliError> {
        let mut settings = match &self.config {
            Some(path) => Settings::load(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
            None => Settings::default(),
        };
        for item in &self.overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("`--set {item}`: expected KEY=VALUE")))?;
            settings.set(key.trim(), value).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        if let Some(k) = self.beam_size {
            settings.beam.beam_size = k;
        }
        settings.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(settings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ToyTask {
    /// Spelled-out digit sequences.
    Digits,
    /// The "They are lost forever ." demo corpus.
    Demo,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model directory from line-aligned corpora.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        train_src: PathBuf,
        #[arg(long)]
        train_trg: PathBuf,
        #[arg(long)]
        dev_src: PathBuf,
        #[arg(long)]
        dev_trg: PathBuf,
        /// Output model directory.
        #[arg(long)]
        out: PathBuf,
        /// Also build the statistical dictionary for unknown words.
        #[arg(long)]
        dict: bool,
    },
    /// Translate one sentence per line.
    Translate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        /// Input file (default: stdin).
        #[arg(long)]
        src: Option<PathBuf>,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print `idx ||| tokens ||| score ||| logprob` n-best lines instead.
        #[arg(long)]
        nbest: Option<usize>,
    },
    /// Terminal session: correct hypotheses character by character.
    Interactive {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        /// Save the model here after the session if it learned anything.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Simulate a user on a test set and report the effort as JSON.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        src: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Update the model after every accepted sentence.
        #[arg(long)]
        learn: bool,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// BLEU and TER of a hypothesis file against references.
    Evaluate {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Also write the reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        config: ConfigArgs,
        /// Model directory (or INMT_CHECKPOINT).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Bind address (or INMT_ADDR).
        #[arg(long)]
        addr: Option<String>,
        /// Directory served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Average checkpoint files of one architecture.
    Average {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
    },
    /// Build the statistical dictionary from a parallel corpus.
    BuildDict {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        trg: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Teacher-forced log-probability of each sentence pair.
    Score {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        trg: PathBuf,
    },
    /// Train a small synthetic model and write it with its test set.
    Toy {
        #[arg(long, value_enum, default_value = "digits")]
        task: ToyTask,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<inmt_core::Error> for CliError {
    fn from(e: inmt_core::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_RUNTIME
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train {
            config,
            train_src,
            train_trg,
            dev_src,
            dev_trg,
            out,
            dict,
        } => cmd_train(&config.settings()?, &train_src, &train_trg, &dev_src, &dev_trg, &out, dict),
        Command::Translate {
            config,
            model,
            src,
            out,
            nbest,
        } => cmd_translate(&config.settings()?, &model, src.as_deref(), out.as_deref(), nbest),
        Command::Interactive { config, model, save } => {
            let engine = load(&config.settings()?, &model)?;
            let stdin = io::stdin();
            let stdout = io::stdout();
            let engine = interactive(engine, stdin.lock(), stdout.lock())?;
            if let Some(dir) = save {
                engine.save(dir)?;
            }
            Ok(())
        }
        Command::Simulate {
            config,
            model,
            src,
            reference,
            learn,
            out,
        } => cmd_simulate(&config.settings()?, &model, &src, &reference, learn, out.as_deref()),
        Command::Evaluate { hyp, reference, json } => cmd_evaluate(&hyp, &reference, json.as_deref()),
        Command::Serve {
            config,
            model,
            addr,
            static_dir,
        } => {
            let settings = config.settings()?;
            let mut server = ServerConfig::from_settings(&settings, model);
            server.apply_env();
            if let Some(a) = addr {
                server.addr = a;
            }
            if static_dir.is_some() {
                server.static_dir = static_dir;
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(server))?;
            Ok(())
        }
        Command::Average { out, checkpoints } => {
            let models = checkpoints
                .iter()
                .map(|p| checkpoint::load(p, None))
                .collect::<inmt_core::Result<Vec<_>>>()?;
            checkpoint::save(&average_checkpoints(&models)?, out, Dtype::F64)?;
            Ok(())
        }
        Command::BuildDict { src, trg, out } => {
            let corpus = ParallelCorpus::load(src, trg, Split::Train)?;
            build_stat_dict(&corpus)?.save(out)?;
            Ok(())
        }
        Command::Score {
            config,
            model,
            src,
            trg,
        } => {
            let engine = load(&config.settings()?, &model)?;
            let corpus = ParallelCorpus::load(src, trg, Split::Test)?;
            let mut out = BufWriter::new(io::stdout().lock());
            for (s, t) in &corpus.pairs {
                let lp = score_sentence(&engine.params, &engine.source.encode(s), &engine.target.encode(t))?;
                writeln!(out, "{lp:.6}")?;
            }
            out.flush()?;
            Ok(())
        }
        Command::Toy { task, out, seed } => cmd_toy(task, &out, seed),
    }
}

fn load(settings: &Settings, dir: &Path) -> Result<Engine, CliError> {
    Ok(load_engine(dir, settings.beam.clone(), settings)?)
}

fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn cmd_train(
    settings: &Settings,
    train_src: &Path,
    train_trg: &Path,
    dev_src: &Path,
    dev_trg: &Path,
    out: &Path,
    with_dict: bool,
) -> Result<(), CliError> {
    let train_set = ParallelCorpus::load(train_src, train_trg, Split::Train)?;
    let dev = ParallelCorpus::load(dev_src, dev_trg, Split::Dev)?;
    let v = settings.vocab;
    let sources: Vec<&str> = train_set.sources().collect();
    let targets: Vec<&str> = train_set.targets().collect();
    let source = TextCodec::fit(&sources, v.max_vocab, v.min_freq, v.bpe_merges)?;
    let target = TextCodec::fit(&targets, v.max_vocab, v.min_freq, v.bpe_merges)?;
    let model = settings.model.with_vocabularies(source.vocab.len(), target.vocab.len());

    fs::create_dir_all(out)?;
    let mut log = BufWriter::new(fs::File::create(out.join(TRAIN_LOG_FILE))?);
    let data = TrainData {
        train: &train_set,
        dev: &dev,
        source: &source,
        target: &target,
    };
    let outcome = train(&data, model, &settings.train, &settings.beam, Some(&mut log))?;
    log.flush()?;

    let mut engine = Engine::new(source, target, outcome.params, settings.beam.clone())?;
    if with_dict {
        engine.dict = Some(build_stat_dict(&train_set)?);
    }
    engine.save(out)?;
    eprintln!(
        "{} updates; best dev BLEU {:.2} at update {}",
        outcome.log.losses().len(),
        outcome.log.best_bleu.unwrap_or(0.0),
        outcome.log.best_step.unwrap_or(0)
    );
    Ok(())
}

fn cmd_translate(
    settings: &Settings,
    model: &Path,
    src: Option<&Path>,
    out: Option<&Path>,
    nbest: Option<usize>,
) -> Result<(), CliError> {
    let engine = load(settings, model)?;
    let input = match src {
        Some(p) => read_lines(p)?,
        None => {
            let mut text = String::new();
            io::stdin().read_to_string(&mut text)?;
            text.lines().map(str::to_string).collect()
        }
    };
    if nbest == Some(0) {
        return Err(CliError::Usage("--nbest must be at least 1".into()));
    }
    let mut writer: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    for (i, line) in input.iter().enumerate() {
        if line.trim().is_empty() {
            if nbest.is_none() {
                writeln!(writer)?;
            }
            continue;
        }
        let translations = engine.translate(line, nbest.unwrap_or(1))?;
        match nbest {
            None => writeln!(writer, "{}", translations[0].text)?,
            Some(_) => {
                for t in &translations {
                    writeln!(writer, "{}", nbest_line(i, &t.tokens, t.hypothesis.score, t.hypothesis.log_prob))?;
                }
            }
        }
    }
    writer.flush()?;
    Ok(())
}

fn cmd_simulate(
    settings: &Settings,
    model: &Path,
    src: &Path,
    reference: &Path,
    learn: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut engine = load(settings, model)?;
    let sources = read_lines(src)?;
    let references = read_lines(reference)?;
    if sources.len() != references.len() {
        return Err(CliError::Usage(format!(
            "{} source lines but {} references",
            sources.len(),
            references.len()
        )));
    }
    let pairs: Vec<(&str, &str)> = sources.iter().map(String::as_str).zip(references.iter().map(String::as_str)).collect();
    let report = simulate_corpus(&mut engine, &pairs, learn)?;
    let baseline: Vec<_> = references.iter().map(|r| baseline_effort(r)).collect();
    eprintln!("KSMR = {:.2} (acceptance clicks included)", report.ksmr);
    eprintln!("typing baseline KSMR = {:.2}", ksmr(&baseline)?);
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match out {
        Some(p) => fs::write(p, json)?,
        None => io::stdout().write_all(json.as_bytes())?,
    }
    Ok(())
}

fn cmd_evaluate(hyp: &Path, reference: &Path, json: Option<&Path>) -> Result<(), CliError> {
    let hyps = read_lines(hyp)?;
    let refs = read_lines(reference)?;
    if hyps.len() != refs.len() {
        return Err(CliError::Usage(format!("{} hypotheses but {} references", hyps.len(), refs.len())));
    }
    let reports: Vec<MetricReport> = evaluate(&hyps, &refs)?;
    print!("{}", format_report(&reports));
    if let Some(p) = json {
        fs::write(p, serde_json::to_string_pretty(&reports)? + "\n")?;
    }
    Ok(())
}

fn cmd_toy(task: ToyTask, out: &Path, seed: u64) -> Result<(), CliError> {
    let (engine, test) = match task {
        ToyTask::Digits => {
            let data = toy::digit_task(100, 20, 100, seed);
            let (engine, log) = toy::train_digit_engine(&data, seed)?;
            eprintln!("best dev BLEU {:.2}", log.best_bleu.unwrap_or(0.0));
            (engine, data.test)
        }
        ToyTask::Demo => (toy::train_fig1_engine(seed)?, toy::fig1_corpus()),
    };
    engine.save(out)?;
    let join = |it: &mut dyn Iterator<Item = &str>| it.map(|l| format!("{l}\n")).collect::<String>();
    fs::write(out.join("test.src"), join(&mut test.sources()))?;
    fs::write(out.join("test.ref"), join(&mut test.targets()))?;
    Ok(())
}

/// Terminal loop. For each source line the hypothesis is shown; then
/// `POS CHAR` corrects the character at POS, `POS $` ends the sentence at
/// POS, an empty line accepts and `learn` accepts and updates the model.
/// An empty source line or end of input quits. Returns the (possibly
/// updated) engine.
pub fn interactive<R: BufRead, W: Write>(mut engine: Engine, input: R, mut out: W) -> Result<Engine, CliError> {
    let mut lines = input.lines();
    loop {
        write!(out, "source> ")?;
        out.flush()?;
        let Some(source) = lines.next().transpose()? else { break };
        if source.trim().is_empty() {
            break;
        }
        let mut session = match start_session(&engine, String::new(), &source) {
            Ok(s) => s,
            Err(e) => {
                writeln!(out, "error: {e}")?;
                continue;
            }
        };
        loop {
            writeln!(out, "  {}", session.hypothesis)?;
            write!(out, "edit> ")?;
            out.flush()?;
            let Some(cmd) = lines.next().transpose()? else {
                return Ok(engine);
            };
            let cmd = cmd.trim();
            if cmd.is_empty() || cmd == "learn" {
                let text = accept_session(&mut session, cmd == "learn", &mut engine)?;
                let effort = session.effort(text.chars().count());
                writeln!(
                    out,
                    "accepted: {text}  ({} keystrokes, {} mouse actions)",
                    effort.keystrokes, effort.mouse_actions
                )?;
                break;
            }
            match parse_edit(cmd) {
                Some(feedback) => {
                    if let Err(e) = apply_feedback(&mut session, feedback, &engine) {
                        writeln!(out, "error: {e}")?;
                    }
                }
                None => writeln!(out, "expected `POS CHAR`, `POS $`, `learn` or an empty line")?,
            }
        }
    }
    Ok(engine)
}

fn parse_edit(cmd: &str) -> Option<Feedback> {
    let (pos, rest) = cmd.split_once(' ')?;
    let position: usize = pos.parse().ok()?;
    if rest == "$" {
        return Some(Feedback::end(position));
    }
    let mut chars = rest.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Some(Feedback::character(position, c)),
        _ => None,
    }
}
