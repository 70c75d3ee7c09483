//! End-to-end plumbing: build and persist artifacts, then answer, score and
//! tune questions against them.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{Corpus, Question};
use crate::error::{Error, Result};
use crate::features::{generate_queries, FeatureId, ParagraphProfiles, TextProfile, TopicModels};
use crate::fusion::{collect_candidates, combine, zscore_normalize, FeatureMatrix, RankedList, WeightVector};
use crate::index::{IndexSet, DEFAULT_DEPTH};
use crate::lda::{load_model, save_model, train_lda, LdaConfig};
use crate::seed::{derive_seed, lda_stream};
use crate::textproc::Lexicons;
use crate::tuner::{cross_validate, mrr, CachedQuestion, CrossValidation, DeConfig, FeatureMask};

pub const LDA_10_FILE: &str = "lda_10.flda";
pub const LDA_100_FILE: &str = "lda_100.flda";

#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    /// Top-level seed; each LDA model draws from its own derived stream.
    pub seed: u64,
    pub lda_iterations: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            seed: 0,
            lda_iterations: 1000,
        }
    }
}

/// Everything `build` writes to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub indices: IndexSet,
    pub models: TopicModels,
}

impl Artifacts {
    /// Builds the four indices and both topic models in parallel.
    pub fn build(corpus: &Corpus, lexicons: &Lexicons, config: &BuildConfig) -> Result<Self> {
        let lda = |topics: usize| {
            let cfg = LdaConfig {
                iterations: config.lda_iterations,
                ..LdaConfig::new(topics, derive_seed(config.seed, &lda_stream(topics)))
            };
            train_lda(corpus, lexicons, &cfg)
        };
        let (indices, (lda_10, lda_100)) = rayon::join(
            || IndexSet::build(corpus, lexicons),
            || rayon::join(|| lda(10), || lda(100)),
        );
        Ok(Artifacts {
            indices: indices?,
            models: TopicModels {
                lda_10: lda_10?,
                lda_100: lda_100?,
            },
        })
    }

    pub fn save(&self, index_dir: impl AsRef<Path>, model_dir: impl AsRef<Path>) -> Result<()> {
        let (index_dir, model_dir) = (index_dir.as_ref(), model_dir.as_ref());
        for dir in [index_dir, model_dir] {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        self.indices.save(index_dir)?;
        save_model(&self.models.lda_10, model_dir.join(LDA_10_FILE))?;
        save_model(&self.models.lda_100, model_dir.join(LDA_100_FILE))
    }

    pub fn load(index_dir: impl AsRef<Path>, model_dir: impl AsRef<Path>) -> Result<Self> {
        let model_dir = model_dir.as_ref();
        Ok(Artifacts {
            indices: IndexSet::load(index_dir)?,
            models: TopicModels {
                lda_10: load_model(model_dir.join(LDA_10_FILE))?,
                lda_100: load_model(model_dir.join(LDA_100_FILE))?,
            },
        })
    }
}

/// Loaded artifacts plus the per-paragraph evaluator cache.
pub struct Engine {
    corpus: Corpus,
    lexicons: Lexicons,
    artifacts: Artifacts,
    profiles: ParagraphProfiles,
    depth: usize,
}

impl Engine {
    /// Fails when the indices were built from a different corpus.
    pub fn new(corpus: Corpus, lexicons: Lexicons, artifacts: Artifacts, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("candidate depth must be positive".into()));
        }
        for index in artifacts.indices.iter() {
            let same = index.para_ids().len() == corpus.len()
                && index
                    .para_ids()
                    .iter()
                    .zip(corpus.paragraphs())
                    .all(|(id, p)| *id == p.para_id);
            if !same {
                return Err(Error::InvalidArgument(format!(
                    "{} index was built from a different corpus",
                    index.variant()
                )));
            }
        }
        let profiles = ParagraphProfiles::build(&corpus, &lexicons, &artifacts.models);
        Ok(Engine {
            corpus,
            lexicons,
            artifacts,
            profiles,
            depth,
        })
    }

    pub fn with_default_depth(corpus: Corpus, lexicons: Lexicons, artifacts: Artifacts) -> Result<Self> {
        Self::new(corpus, lexicons, artifacts, DEFAULT_DEPTH)
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn artifacts(&self) -> &Artifacts {
        &self.artifacts
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Normalized feature matrix over the question's candidate pool.
    pub fn feature_matrix(&self, q_id: &str, text: &str) -> Result<FeatureMatrix<f64>> {
        let bundle = generate_queries(text, &self.lexicons);
        if bundle.all_empty() {
            return Ok(FeatureMatrix::empty(q_id));
        }
        let profile = TextProfile::new(text, &self.lexicons, &self.artifacts.models);
        let raw = collect_candidates(
            q_id,
            &profile,
            &bundle,
            &self.artifacts.indices,
            &self.corpus,
            &self.profiles,
            self.depth,
        )?;
        Ok(zscore_normalize(&raw))
    }

    /// Feature matrices for every question, in question order.
    pub fn feature_matrices(&self, questions: &[Question]) -> Result<Vec<FeatureMatrix<f64>>> {
        questions
            .par_iter()
            .map(|q| self.feature_matrix(&q.q_id, &q.text))
            .collect()
    }

    pub fn retrieve(&self, text: &str, weights: &WeightVector<f64>) -> Result<RankedList<f64>> {
        combine(&self.feature_matrix("query", text)?, weights)
    }

    /// MRR over `questions`, ranking each with `combine`.
    pub fn evaluate(&self, questions: &[Question], weights: &WeightVector<f64>) -> Result<f64> {
        let ranked: Vec<RankedList<f64>> = self
            .feature_matrices(questions)?
            .iter()
            .map(|m| combine(m, weights))
            .collect::<Result<_>>()?;
        mrr(&ranked, questions)
    }

    pub fn cached_questions(&self, questions: &[Question]) -> Result<Vec<CachedQuestion<f64>>> {
        self.feature_matrices(questions)?
            .into_iter()
            .zip(questions)
            .map(|(m, q)| CachedQuestion::new(m, &q.gold_para_ids))
            .collect()
    }

    pub fn cross_validate(
        &self,
        questions: &[Question],
        rounds: usize,
        config: &DeConfig,
    ) -> Result<CrossValidation<f64>> {
        cross_validate(&self.cached_questions(questions)?, rounds, config, &FeatureMask::all())
    }
}

/// Tab-separated tuning report: per-round MRRs, summary, averaged weights
/// and every round's DE history, each table under a `#` section line.
pub fn tuning_report(cv: &CrossValidation<f64>) -> String {
    let mut out = String::from("# rounds\nround\ttest_mrr\tuniform_test_mrr\ttrain_mrr\n");
    for r in &cv.rounds {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.round, r.test_mrr, r.uniform_test_mrr, r.tuning.best_objective
        )
        .unwrap();
    }
    out.push_str("\n# summary\nmetric\tvalue\n");
    writeln!(out, "rounds\t{}", cv.rounds.len()).unwrap();
    writeln!(out, "mean_test_mrr\t{}", cv.mean_test_mrr).unwrap();
    writeln!(out, "mean_uniform_mrr\t{}", cv.mean_uniform_mrr).unwrap();
    out.push_str("\n# average_weights\nfeature\tweight\n");
    for f in FeatureId::ALL {
        writeln!(out, "{f}\t{}", cv.average_weights.get(f)).unwrap();
    }
    out.push_str("\n# history\nround\tgeneration\tbest_train_mrr\n");
    for r in &cv.rounds {
        for (g, v) in r.tuning.history.iter().enumerate() {
            writeln!(out, "{}\t{g}\t{v}", r.round).unwrap();
        }
    }
    out
}
