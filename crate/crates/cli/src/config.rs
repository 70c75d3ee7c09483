//! Run configuration: an optional flat TOML file overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use crate::Failure;

/// Every setting that may come from the config file or a flag.
#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Corpus JSONL file.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Questions JSONL file.
    #[arg(long, global = true)]
    pub questions: Option<PathBuf>,
    /// Lemma lexicon, `surface<TAB>lemma` per line.
    #[arg(long, global = true)]
    pub lemmas: Option<PathBuf>,
    /// Synonym lexicon, `term<TAB>syn1,syn2` per line.
    #[arg(long, global = true)]
    pub synonyms: Option<PathBuf>,
    /// Stopword list, one word per line; built-in English list otherwise.
    #[arg(long, global = true)]
    pub stoplist: Option<PathBuf>,
    /// Named-entity gazetteer, one name per line.
    #[arg(long, global = true)]
    pub gazetteer: Option<PathBuf>,
    #[arg(long, global = true)]
    pub index_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model_dir: Option<PathBuf>,
    /// Weight file: read by retrieve and evaluate, written by tune (default `weights.tsv`).
    #[arg(long, global = true)]
    pub weights: Option<PathBuf>,
    /// Tuning report output.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Hits kept per query.
    #[arg(short, long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cross-validation rounds.
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    #[arg(long, global = true)]
    pub population_size: Option<usize>,
    #[arg(long, global = true)]
    pub differential_weight: Option<f64>,
    #[arg(long, global = true)]
    pub crossover_rate: Option<f64>,
    #[arg(long, global = true)]
    pub generations: Option<usize>,
    #[arg(long, global = true)]
    pub lda_iterations: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        Options { $($field: $top.$field.or($base.$field)),* }
    };
}

impl Options {
    pub fn from_file(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::user("reading config", format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::user("parsing config", format!("{}: {e}", path.display())))
    }

    /// Values from `self` win over `base`.
    pub fn over(self, base: Options) -> Options {
        let top = self;
        overlay!(base, top; corpus, questions, lemmas, synonyms, stoplist, gazetteer,
            index_dir, model_dir, weights, report, k, seed, folds, population_size,
            differential_weight, crossover_rate, generations, lda_iterations, threads)
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub questions: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub stoplist: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub index_dir: PathBuf,
    pub model_dir: PathBuf,
    pub weights: Option<PathBuf>,
    pub report: PathBuf,
    pub k: usize,
    pub seed: u64,
    pub folds: usize,
    pub population_size: usize,
    pub differential_weight: f64,
    pub crossover_rate: f64,
    pub generations: usize,
    pub lda_iterations: usize,
    pub threads: usize,
}

impl RunConfig {
    pub fn resolve(o: Options) -> Result<Self, Failure> {
        let config = RunConfig {
            corpus: o.corpus,
            questions: o.questions,
            lemmas: o.lemmas,
            synonyms: o.synonyms,
            stoplist: o.stoplist,
            gazetteer: o.gazetteer,
            index_dir: o.index_dir.unwrap_or_else(|| "index".into()),
            model_dir: o.model_dir.unwrap_or_else(|| "models".into()),
            weights: o.weights,
            report: o.report.unwrap_or_else(|| "tuning_report.tsv".into()),
            k: o.k.unwrap_or(parafuse::index::DEFAULT_DEPTH),
            seed: o.seed.unwrap_or(0),
            folds: o.folds.unwrap_or(20),
            population_size: o.population_size.unwrap_or(40),
            differential_weight: o.differential_weight.unwrap_or(0.7),
            crossover_rate: o.crossover_rate.unwrap_or(0.9),
            generations: o.generations.unwrap_or(200),
            lda_iterations: o.lda_iterations.unwrap_or(1000),
            threads: o.threads.unwrap_or(0),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), Failure> {
        let bad = |msg: &str| Err(Failure::user("validating config", msg.to_string()));
        if self.k == 0 {
            return bad("k must be positive");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if self.lda_iterations == 0 {
            return bad("lda_iterations must be positive");
        }
        Ok(())
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, Failure> {
        path.as_deref()
            .ok_or_else(|| Failure::user("validating config", format!("missing required setting `{key}`")))
    }
}
