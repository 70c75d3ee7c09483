use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use parafuse::corpus::{load_corpus, load_questions, save_corpus, save_questions, Corpus};
use parafuse::pipeline::{tuning_report, Artifacts, BuildConfig, Engine};
use parafuse::seed::{derive_seed, STREAM_DE};
use parafuse::synthetic::SyntheticConfig;
use parafuse::textproc::{Gazetteer, LemmaLexicon, Lexicons, Stoplist, SynonymLexicon};
use parafuse::tuner::DeConfig;
use parafuse::WeightVector;

mod config;

use config::{Options, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "parafuse", version, about = "Paragraph retrieval by weighted feature fusion")]
struct Cli {
    /// Flat TOML file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    options: Options,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the four indices and both topic models.
    Build,
    /// Rank paragraphs for one question.
    Retrieve { question: String },
    /// Cross-validate weights and write the averaged weights and a report.
    Tune,
    /// Print the MRR of a weight file over the question set.
    Evaluate,
    /// Write a synthetic corpus, questions and lexicons.
    GenSynthetic {
        #[arg(long, default_value_t = 500)]
        paragraphs: usize,
        #[arg(long = "n-questions", default_value_t = 50)]
        n_questions: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// A failed stage and its exit status: 2 for bad input or configuration,
/// 1 for everything else.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    stage: &'static str,
    message: String,
}

impl Failure {
    pub fn user(stage: &'static str, message: impl ToString) -> Self {
        Failure {
            code: 2,
            stage,
            message: message.to_string(),
        }
    }

    pub fn internal(stage: &'static str, message: impl ToString) -> Self {
        Failure {
            code: 1,
            stage,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

fn user<E: fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> Failure {
    move |e| Failure::user(stage, e)
}

fn internal<E: fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> Failure {
    move |e| Failure::internal(stage, e)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("parafuse: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let options = match &cli.config {
        Some(path) => cli.options.over(Options::from_file(path)?),
        None => cli.options,
    };
    let config = RunConfig::resolve(options)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(internal("starting thread pool"))?;
    pool.install(|| match cli.command {
        Command::Build => build(&config),
        Command::Retrieve { question } => retrieve(&config, &question),
        Command::Tune => tune(&config),
        Command::Evaluate => evaluate(&config),
        Command::GenSynthetic {
            paragraphs,
            n_questions,
            out,
        } => gen_synthetic(&config, paragraphs, n_questions, &out),
    })
}

fn load_lexicons(config: &RunConfig) -> Result<Lexicons, Failure> {
    let mut lexicons = Lexicons::default();
    if let Some(p) = &config.stoplist {
        lexicons.stoplist = Stoplist::load(p).map_err(user("loading stoplist"))?;
    }
    if let Some(p) = &config.lemmas {
        lexicons.lemmas = LemmaLexicon::load(p).map_err(user("loading lemma lexicon"))?;
    }
    if let Some(p) = &config.synonyms {
        lexicons.synonyms = SynonymLexicon::load(p).map_err(user("loading synonym lexicon"))?;
    }
    if let Some(p) = &config.gazetteer {
        lexicons.gazetteer = Gazetteer::load(p).map_err(user("loading gazetteer"))?;
    }
    Ok(lexicons)
}

fn corpus(config: &RunConfig) -> Result<Corpus, Failure> {
    load_corpus(config.require(&config.corpus, "corpus")?).map_err(user("loading corpus"))
}

fn engine(config: &RunConfig) -> Result<Engine, Failure> {
    let corpus = corpus(config)?;
    let lexicons = load_lexicons(config)?;
    let artifacts = Artifacts::load(&config.index_dir, &config.model_dir).map_err(user("loading artifacts"))?;
    Engine::new(corpus, lexicons, artifacts, config.k).map_err(user("loading artifacts"))
}

fn weights(config: &RunConfig) -> Result<WeightVector, Failure> {
    match &config.weights {
        Some(p) => WeightVector::load(p).map_err(user("loading weights")),
        None => Ok(WeightVector::uniform()),
    }
}

fn build(config: &RunConfig) -> Result<(), Failure> {
    let corpus = corpus(config)?;
    let lexicons = load_lexicons(config)?;
    let build = BuildConfig {
        seed: config.seed,
        lda_iterations: config.lda_iterations,
    };
    let artifacts = Artifacts::build(&corpus, &lexicons, &build).map_err(user("building artifacts"))?;
    artifacts
        .save(&config.index_dir, &config.model_dir)
        .map_err(internal("writing artifacts"))?;
    eprintln!(
        "indexed {} paragraphs into {} and {}",
        corpus.len(),
        config.index_dir.display(),
        config.model_dir.display()
    );
    Ok(())
}

fn retrieve(config: &RunConfig, question: &str) -> Result<(), Failure> {
    let weights = weights(config)?;
    let engine = engine(config)?;
    let ranked = engine.retrieve(question, &weights).map_err(internal("ranking"))?;
    if ranked.entries.is_empty() {
        eprintln!("no candidates: the question has no indexable terms or matches nothing");
    }
    let mut out = String::from("rank\tpara_id\tscore\ttext\n");
    for (i, e) in ranked.entries.iter().enumerate() {
        let text = engine.corpus().get(&e.para_id).map_or("", |p| p.text.as_str());
        let snippet: String = text
            .chars()
            .take(120)
            .map(|c| if c.is_whitespace() { ' ' } else { c })
            .collect();
        let _ = writeln!(out, "{}\t{}\t{}\t{}", i + 1, e.para_id, e.score, snippet);
    }
    emit(&out)
}

fn tune(config: &RunConfig) -> Result<(), Failure> {
    let out = config.weights.clone().unwrap_or_else(|| PathBuf::from("weights.tsv"));
    let engine = engine(config)?;
    let questions = load_questions(config.require(&config.questions, "questions")?, engine.corpus())
        .map_err(user("loading questions"))?;
    let de = DeConfig {
        population_size: config.population_size,
        differential_weight: config.differential_weight,
        crossover_rate: config.crossover_rate,
        generations: config.generations,
        seed: derive_seed(config.seed, STREAM_DE),
    };
    de.validate().map_err(user("validating config"))?;
    let cv = engine
        .cross_validate(questions.questions(), config.folds, &de)
        .map_err(user("cross-validating"))?;
    cv.average_weights.save(&out).map_err(internal("writing weights"))?;
    write(&config.report, &tuning_report(&cv))?;
    emit(&format!(
        "mean_test_mrr\tmean_uniform_mrr\n{:?}\t{:?}\n",
        cv.mean_test_mrr, cv.mean_uniform_mrr
    ))
}

fn evaluate(config: &RunConfig) -> Result<(), Failure> {
    let weights = weights(config)?;
    if config.weights.is_none() {
        eprintln!("no weight file given; using uniform weights");
    }
    let engine = engine(config)?;
    let questions = load_questions(config.require(&config.questions, "questions")?, engine.corpus())
        .map_err(user("loading questions"))?;
    let mrr = engine
        .evaluate(questions.questions(), &weights)
        .map_err(internal("evaluating"))?;
    emit(&format!("mrr\n{mrr:?}\n"))
}

fn gen_synthetic(config: &RunConfig, paragraphs: usize, questions: usize, out: &Path) -> Result<(), Failure> {
    let data = SyntheticConfig::new(paragraphs, questions, config.seed)
        .generate()
        .map_err(user("generating"))?;
    fs::create_dir_all(out).map_err(|e| Failure::internal("writing dataset", format!("{}: {e}", out.display())))?;
    let w = internal("writing dataset");
    save_corpus(&data.corpus, out.join("corpus.jsonl"))
        .and_then(|()| save_questions(&data.questions, out.join("questions.jsonl")))
        .and_then(|()| data.lexicons.lemmas.save(out.join("lemmas.tsv")))
        .and_then(|()| data.lexicons.synonyms.save(out.join("synonyms.tsv")))
        .and_then(|()| data.lexicons.gazetteer.save(out.join("gazetteer.txt")))
        .and_then(|()| data.lexicons.stoplist.save(out.join("stoplist.txt")))
        .map_err(w)?;
    eprintln!(
        "wrote {} paragraphs and {} questions to {}",
        data.corpus.len(),
        data.questions.len(),
        out.display()
    );
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::internal("writing report", format!("{}: {e}", path.display())))
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    let mut stdout = io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Failure::internal("writing output", e)),
        _ => Ok(()),
    }
}
