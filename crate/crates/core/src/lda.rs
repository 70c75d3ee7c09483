//! Latent Dirichlet Allocation trained by collapsed Gibbs sampling.
//!
//! Documents are paragraph texts passed through the Baseline pipeline
//! (tokenize, remove stopwords). Topic-word distributions are read from the
//! final sample as `phi[k][w] = (n_kw + beta) / (n_k + V * beta)`.
//!
//! Inference on new text folds the document in with `phi` frozen: 50 sweeps,
//! the first 20 discarded, and `theta[k] = (n_k + alpha) / (N + K * alpha)`
//! averaged over the remaining sweeps. The sampler for a text is seeded from
//! the model seed and a hash of the text, so inference is a pure function.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{read_file, Decoder, Encoder};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::{fnv1a, splitmix64};
use crate::textproc::{surfaces, Lexicons};

pub const MODEL_MAGIC: &[u8; 4] = b"FLDA";
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub const INFER_SWEEPS: usize = 50;
pub const INFER_BURN_IN: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Record the log-likelihood of every sweep.
    pub trace: bool,
}

impl LdaConfig {
    /// `alpha = 50 / K`, `beta = 0.01`, 1000 sweeps.
    pub fn new(topics: usize, seed: u64) -> Self {
        LdaConfig {
            topics,
            alpha: 50.0 / topics.max(1) as f64,
            beta: 0.01,
            iterations: 1000,
            seed,
            trace: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.topics < 2 {
            return Err(Error::InvalidArgument("LDA needs at least 2 topics".into()));
        }
        if self.topics > usize::from(u16::MAX) {
            return Err(Error::InvalidArgument("too many topics".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("LDA needs at least one iteration".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite() && self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument("alpha and beta must be positive".into()));
        }
        Ok(())
    }
}

/// Probability vector over topics.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicVector<T: Scalar = f64>(Vec<T>);

impl<T: Scalar> TopicVector<T> {
    /// Entries must be non-negative and sum to one within the scalar's tolerance.
    pub fn new(probabilities: Vec<T>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidArgument("empty topic vector".into()));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < T::zero()) {
            return Err(Error::InvalidArgument("negative topic probability".into()));
        }
        let sum: T = probabilities.iter().copied().sum();
        if (sum - T::one()).abs() > T::simplex_tolerance() {
            return Err(Error::InvalidArgument(format!("topic vector sums to {sum}")));
        }
        Ok(TopicVector(probabilities))
    }

    pub fn uniform(topics: usize) -> Self {
        let p = T::one() / T::from_usize(topics).expect("topic count is representable");
        TopicVector(vec![p; topics])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Cosine similarity of two topic vectors, in `[0, 1]`.
pub fn cosine<T: Scalar>(u: &TopicVector<T>, v: &TopicVector<T>) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let mut dot = T::zero();
    let mut nu = T::zero();
    let mut nv = T::zero();
    for (&a, &b) in u.0.iter().zip(&v.0) {
        dot = dot + a * b;
        nu = nu + a * a;
        nv = nv + b * b;
    }
    let denom = nu.sqrt() * nv.sqrt();
    if denom <= T::zero() {
        return Ok(T::zero());
    }
    Ok((dot / denom).min(T::one()).max(T::zero()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    topics: usize,
    vocabulary: Vec<String>,
    term_ids: HashMap<String, u32>,
    /// Row-major `topics x vocabulary.len()`.
    phi: Vec<f64>,
    alpha: f64,
    beta: f64,
    seed: u64,
}

impl LdaModel {
    fn from_parts(topics: usize, vocabulary: Vec<String>, phi: Vec<f64>, alpha: f64, beta: f64, seed: u64) -> Self {
        let term_ids = vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        LdaModel {
            topics,
            vocabulary,
            term_ids,
            phi,
            alpha,
            beta,
            seed,
        }
    }

    pub fn topics(&self) -> usize {
        self.topics
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.term_ids.get(term).copied()
    }

    /// Word distribution of topic `k`.
    pub fn phi_row(&self, k: usize) -> &[f64] {
        let v = self.vocabulary.len();
        &self.phi[k * v..(k + 1) * v]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Topic distribution of `text`; uniform when no token is in the vocabulary.
    pub fn infer(&self, text: &str, lexicons: &Lexicons) -> TopicVector<f64> {
        let words: Vec<u32> = lexicons
            .baseline_tokens(text)
            .iter()
            .filter_map(|t| self.term_id(&t.surface))
            .collect();
        if words.is_empty() {
            return TopicVector::uniform(self.topics);
        }
        let k_topics = self.topics;
        let v = self.vocabulary.len();
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.seed ^ fnv1a(text.as_bytes())));
        let mut counts = vec![0u32; k_topics];
        let mut z: Vec<usize> = words
            .iter()
            .map(|_| {
                let k = rng.random_range(0..k_topics);
                counts[k] += 1;
                k
            })
            .collect();
        let mut p = vec![0.0; k_topics];
        let mut theta = vec![0.0; k_topics];
        let n = words.len() as f64;
        let denom = n + k_topics as f64 * self.alpha;
        for sweep in 0..INFER_SWEEPS {
            for (i, &w) in words.iter().enumerate() {
                counts[z[i]] -= 1;
                let mut total = 0.0;
                for (k, pk) in p.iter_mut().enumerate() {
                    total += (f64::from(counts[k]) + self.alpha) * self.phi[k * v + w as usize];
                    *pk = total;
                }
                let k = sample_cumulative(&p, rng.random::<f64>() * total);
                z[i] = k;
                counts[k] += 1;
            }
            if sweep >= INFER_BURN_IN {
                for (t, &c) in theta.iter_mut().zip(&counts) {
                    *t += (f64::from(c) + self.alpha) / denom;
                }
            }
        }
        let sum: f64 = theta.iter().sum();
        for t in &mut theta {
            *t /= sum;
        }
        debug_assert!((theta.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        TopicVector(theta)
    }
}

fn sample_cumulative(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: LdaModel,
    /// Per-sweep `log p(w | z)`; empty unless tracing was requested.
    pub log_likelihood: Vec<f64>,
}

pub fn train_lda(corpus: &Corpus, lexicons: &Lexicons, config: &LdaConfig) -> Result<LdaModel> {
    train_lda_traced(corpus, lexicons, config).map(|t| t.model)
}

pub fn train_lda_traced(corpus: &Corpus, lexicons: &Lexicons, config: &LdaConfig) -> Result<TrainedModel> {
    let texts: Vec<&str> = corpus.paragraphs().iter().map(|p| p.text.as_str()).collect();
    train_on_texts(&texts, lexicons, config)
}

pub fn train_on_texts(texts: &[&str], lexicons: &Lexicons, config: &LdaConfig) -> Result<TrainedModel> {
    config.validate()?;
    let tokenized: Vec<Vec<String>> = texts
        .iter()
        .map(|t| surfaces(&lexicons.baseline_tokens(t)))
        .filter(|d| !d.is_empty())
        .collect();
    let vocabulary: Vec<String> = tokenized
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocabulary.is_empty() {
        return Err(Error::Empty("LDA vocabulary is empty after pre-processing".into()));
    }
    let ids: HashMap<&str, u32> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i as u32))
        .collect();
    let docs: Vec<Vec<u32>> = tokenized
        .iter()
        .map(|d| d.iter().map(|t| ids[t.as_str()]).collect())
        .collect();

    let mut sampler = GibbsSampler::new(&docs, vocabulary.len(), config);
    let mut log_likelihood = Vec::new();
    for _ in 0..config.iterations {
        sampler.sweep();
        if config.trace {
            log_likelihood.push(sampler.log_likelihood());
        }
    }
    let phi = sampler.phi();
    let model = LdaModel::from_parts(config.topics, vocabulary, phi, config.alpha, config.beta, config.seed);
    Ok(TrainedModel {
        model,
        log_likelihood,
    })
}

struct GibbsSampler<'a> {
    docs: &'a [Vec<u32>],
    topics: usize,
    vocab: usize,
    alpha: f64,
    beta: f64,
    z: Vec<Vec<u16>>,
    /// `docs x topics`
    doc_topic: Vec<u32>,
    /// `vocab x topics`, word-major for the inner sampling loop.
    word_topic: Vec<u32>,
    topic_total: Vec<u32>,
    rng: ChaCha8Rng,
    p: Vec<f64>,
}

impl<'a> GibbsSampler<'a> {
    fn new(docs: &'a [Vec<u32>], vocab: usize, config: &LdaConfig) -> Self {
        let k = config.topics;
        let mut s = GibbsSampler {
            docs,
            topics: k,
            vocab,
            alpha: config.alpha,
            beta: config.beta,
            z: Vec::with_capacity(docs.len()),
            doc_topic: vec![0; docs.len() * k],
            word_topic: vec![0; vocab * k],
            topic_total: vec![0; k],
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            p: vec![0.0; k],
        };
        for (d, doc) in docs.iter().enumerate() {
            let zs = doc
                .iter()
                .map(|&w| {
                    let t = s.rng.random_range(0..k);
                    s.doc_topic[d * k + t] += 1;
                    s.word_topic[w as usize * k + t] += 1;
                    s.topic_total[t] += 1;
                    t as u16
                })
                .collect();
            s.z.push(zs);
        }
        s
    }

    fn sweep(&mut self) {
        let k_topics = self.topics;
        let v_beta = self.vocab as f64 * self.beta;
        for (d, doc) in self.docs.iter().enumerate() {
            let dt = &mut self.doc_topic[d * k_topics..(d + 1) * k_topics];
            for (i, &w) in doc.iter().enumerate() {
                let w = w as usize;
                let old = self.z[d][i] as usize;
                let wt = &mut self.word_topic[w * k_topics..(w + 1) * k_topics];
                dt[old] -= 1;
                wt[old] -= 1;
                self.topic_total[old] -= 1;
                let mut total = 0.0;
                for k in 0..k_topics {
                    total += (f64::from(dt[k]) + self.alpha) * (f64::from(wt[k]) + self.beta)
                        / (f64::from(self.topic_total[k]) + v_beta);
                    self.p[k] = total;
                }
                let new = sample_cumulative(&self.p, self.rng.random::<f64>() * total);
                dt[new] += 1;
                wt[new] += 1;
                self.topic_total[new] += 1;
                self.z[d][i] = new as u16;
            }
        }
    }

    /// `log p(w | z)` with topic-word distributions integrated out.
    fn log_likelihood(&self) -> f64 {
        let k_topics = self.topics;
        let v = self.vocab as f64;
        let lg_beta = libm::lgamma(self.beta);
        let mut ll = k_topics as f64 * (libm::lgamma(v * self.beta) - v * lg_beta);
        for w in 0..self.vocab {
            for &c in &self.word_topic[w * k_topics..(w + 1) * k_topics] {
                if c > 0 {
                    ll += libm::lgamma(f64::from(c) + self.beta) - lg_beta;
                }
            }
        }
        for &n in &self.topic_total {
            ll -= libm::lgamma(f64::from(n) + v * self.beta);
        }
        ll
    }

    fn phi(&self) -> Vec<f64> {
        let k_topics = self.topics;
        let mut phi = vec![0.0; k_topics * self.vocab];
        for k in 0..k_topics {
            let denom = f64::from(self.topic_total[k]) + self.vocab as f64 * self.beta;
            let row = &mut phi[k * self.vocab..(k + 1) * self.vocab];
            for (w, p) in row.iter_mut().enumerate() {
                *p = (f64::from(self.word_topic[w * k_topics + k]) + self.beta) / denom;
            }
        }
        phi
    }
}

/// Writes the `.flda` layout:
///
/// ```text
/// "FLDA" | u32 version | u32 K | u32 V | V x str term
/// K*V x f64 phi (row-major) | f64 alpha | f64 beta | u64 seed
/// u32 crc32 of all preceding bytes
/// ```
pub fn save_model(model: &LdaModel, path: impl AsRef<Path>) -> Result<()> {
    let mut e = Encoder::new(MODEL_MAGIC, MODEL_FORMAT_VERSION);
    e.len(model.topics);
    e.len(model.vocabulary.len());
    for term in &model.vocabulary {
        e.str(term);
    }
    for &p in &model.phi {
        e.f64(p);
    }
    e.f64(model.alpha);
    e.f64(model.beta);
    e.u64(model.seed);
    e.write(path.as_ref())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LdaModel> {
    let bytes = read_file(path.as_ref())?;
    let mut d = Decoder::open(&bytes, MODEL_MAGIC, MODEL_FORMAT_VERSION)?;
    let topics = d.len()?;
    let v = d.len()?;
    if topics < 2 || v == 0 {
        return Err(Error::Corrupt(format!("bad model shape {topics} x {v}")));
    }
    let vocabulary = (0..v).map(|_| d.str()).collect::<Result<Vec<_>>>()?;
    let phi = (0..topics * v).map(|_| d.f64()).collect::<Result<Vec<_>>>()?;
    let alpha = d.f64()?;
    let beta = d.f64()?;
    let seed = d.u64()?;
    d.finish()?;
    Ok(LdaModel::from_parts(topics, vocabulary, phi, alpha, beta, seed))
}
