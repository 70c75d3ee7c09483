//! The four inverted-index variants and the TF-IDF scoring used to query them.
//!
//! Term pipelines per variant:
//!
//! | variant        | terms                                                      |
//! |----------------|------------------------------------------------------------|
//! | `Baseline`     | tokenize, remove stopwords                                 |
//! | `Lemma`        | Baseline, then lemmatize                                   |
//! | `NGrams`       | Baseline unigrams plus 2- and 3-grams of the same stream   |
//! | `NGramsCoref`  | resolve coreferences on the raw text, then `NGrams`        |
//!
//! Scoring is the classic practical TF-IDF function:
//!
//! ```text
//! confidence(q, d) = coord(q, d) * sum_{t in q and d} sqrt(tf(t, d)) * idf(t)^2 / sqrt(len(d))
//! idf(t)           = 1 + ln(n_docs / (df(t) + 1))
//! coord(q, d)      = matched distinct query terms / distinct query terms
//! ```
//!
//! Ties are broken by ascending `para_id`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::codec::{read_file, Decoder, Encoder};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::textproc::{surfaces, Lexicons};

pub const INDEX_MAGIC: &[u8; 4] = b"FIDX";
pub const INDEX_FORMAT_VERSION: u32 = 1;

/// Retrieval depth per query when none is configured.
pub const DEFAULT_DEPTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexVariant {
    Baseline,
    Lemma,
    NGrams,
    NGramsCoref,
}

impl IndexVariant {
    pub const ALL: [IndexVariant; 4] = [
        IndexVariant::Baseline,
        IndexVariant::Lemma,
        IndexVariant::NGrams,
        IndexVariant::NGramsCoref,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IndexVariant::Baseline => "baseline",
            IndexVariant::Lemma => "lemma",
            IndexVariant::NGrams => "ngrams",
            IndexVariant::NGramsCoref => "ngrams_coref",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.fidx", self.name())
    }

    fn tag(self) -> u8 {
        self as u8
    }

    fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }
}

impl fmt::Display for IndexVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IndexVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown index variant \"{s}\"")))
    }
}

/// Indexing terms of `text` under `variant`.
pub fn analyze(text: &str, variant: IndexVariant, lexicons: &Lexicons) -> Vec<String> {
    match variant {
        IndexVariant::Baseline => surfaces(&lexicons.baseline_tokens(text)),
        IndexVariant::Lemma => surfaces(&lexicons.lemma_tokens(text)),
        IndexVariant::NGrams => lexicons.ngram_terms(text),
        IndexVariant::NGramsCoref => lexicons.ngram_terms(&lexicons.resolve_coreferences(text)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    /// Ordinal of the paragraph in the index's document table.
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    variant: IndexVariant,
    para_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    postings: BTreeMap<String, Vec<Posting>>,
}

impl InvertedIndex {
    pub fn build(corpus: &Corpus, variant: IndexVariant, lexicons: &Lexicons) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("cannot index an empty corpus".into()));
        }
        let docs = corpus
            .paragraphs()
            .iter()
            .map(|p| (p.para_id.clone(), analyze(&p.text, variant, lexicons)));
        Ok(Self::from_terms(variant, docs))
    }

    /// Builds from pre-analyzed documents, in the given order.
    pub fn from_terms<I>(variant: IndexVariant, docs: I) -> Self
    where
        I: IntoIterator<Item = (String, Vec<String>)>,
    {
        let mut para_ids = Vec::new();
        let mut doc_lengths = Vec::new();
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (doc, (para_id, terms)) in docs.into_iter().enumerate() {
            let doc = u32::try_from(doc).expect("fewer than 2^32 documents");
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in &terms {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for (term, tf) in tf {
                postings.entry(term).or_default().push(Posting { doc, tf });
            }
            para_ids.push(para_id);
            doc_lengths.push(u32::try_from(terms.len()).expect("document length fits in u32"));
        }
        InvertedIndex {
            variant,
            para_ids,
            doc_lengths,
            postings,
        }
    }

    pub fn variant(&self) -> IndexVariant {
        self.variant
    }

    pub fn n_docs(&self) -> usize {
        self.para_ids.len()
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn para_id(&self, doc: u32) -> &str {
        &self.para_ids[doc as usize]
    }

    pub fn para_ids(&self) -> &[String] {
        &self.para_ids
    }

    pub fn doc_length(&self, doc: u32) -> u32 {
        self.doc_lengths[doc as usize]
    }

    /// Total number of indexed term occurrences.
    pub fn total_terms(&self) -> u64 {
        self.doc_lengths.iter().map(|&l| u64::from(l)).sum()
    }

    pub fn idf(&self, term: &str) -> f64 {
        1.0 + (self.n_docs() as f64 / (self.df(term) as f64 + 1.0)).ln()
    }
}

/// One index per variant, all built over the same corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSet {
    indices: [InvertedIndex; 4],
}

impl IndexSet {
    /// Builds the four variants in parallel.
    pub fn build(corpus: &Corpus, lexicons: &Lexicons) -> Result<Self> {
        let built: Vec<InvertedIndex> = IndexVariant::ALL
            .par_iter()
            .map(|&v| InvertedIndex::build(corpus, v, lexicons))
            .collect::<Result<_>>()?;
        Self::from_vec(built)
    }

    fn from_vec(indices: Vec<InvertedIndex>) -> Result<Self> {
        let indices: [InvertedIndex; 4] = indices
            .try_into()
            .map_err(|_| Error::InvalidArgument("exactly four indices are required".into()))?;
        for (idx, v) in indices.iter().zip(IndexVariant::ALL) {
            if idx.variant != v {
                return Err(Error::InvalidArgument(format!("expected {v} index, found {}", idx.variant)));
            }
        }
        if indices.iter().any(|i| i.para_ids != indices[0].para_ids) {
            return Err(Error::InvalidArgument("indices were built over different corpora".into()));
        }
        Ok(IndexSet { indices })
    }

    pub fn get(&self, variant: IndexVariant) -> &InvertedIndex {
        &self.indices[variant as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &InvertedIndex> {
        self.indices.iter()
    }

    /// Writes `<variant>.fidx` files into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for idx in &self.indices {
            save_index(idx, dir.join(idx.variant.file_name()))?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let loaded = IndexVariant::ALL
            .iter()
            .map(|v| load_index(dir.join(v.file_name())))
            .collect::<Result<Vec<_>>>()?;
        Self::from_vec(loaded)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub terms: Vec<String>,
    pub target: IndexVariant,
}

impl Query {
    pub fn new(terms: Vec<String>, target: IndexVariant) -> Self {
        Query { terms, target }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub para_id: String,
    pub confidence: f64,
}

/// Top-`k` paragraphs for `query`, by descending confidence then ascending id.
pub fn score_query(index: &InvertedIndex, query: &Query, k: usize) -> Result<Vec<Hit>> {
    if k == 0 {
        return Err(Error::InvalidArgument("retrieval depth k must be positive".into()));
    }
    if query.target != index.variant {
        return Err(Error::InvalidArgument(format!(
            "query targets the {} index but was run against {}",
            query.target, index.variant
        )));
    }
    let distinct: BTreeSet<&str> = query.terms.iter().map(String::as_str).collect();
    if distinct.is_empty() {
        return Ok(Vec::new());
    }
    let mut acc: HashMap<u32, (f64, u32)> = HashMap::new();
    for term in &distinct {
        let postings = index.postings(term);
        if postings.is_empty() {
            continue;
        }
        let idf = index.idf(term);
        let idf2 = idf * idf;
        for p in postings {
            let norm = 1.0 / f64::from(index.doc_length(p.doc)).sqrt();
            let e = acc.entry(p.doc).or_insert((0.0, 0));
            e.0 += f64::from(p.tf).sqrt() * idf2 * norm;
            e.1 += 1;
        }
    }
    let n_distinct = distinct.len() as f64;
    let mut hits: Vec<(u32, f64)> = acc
        .into_iter()
        .map(|(doc, (sum, matched))| (doc, f64::from(matched) / n_distinct * sum))
        .filter(|&(_, c)| c > 0.0)
        .collect();
    hits.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| index.para_id(a.0).cmp(index.para_id(b.0)))
    });
    hits.truncate(k);
    Ok(hits
        .into_iter()
        .map(|(doc, confidence)| Hit {
            para_id: index.para_id(doc).to_string(),
            confidence,
        })
        .collect())
}

/// Writes the `.fidx` layout:
///
/// ```text
/// "FIDX" | u32 version | u8 variant | u32 n_docs
/// u32 n_terms, then per term: str term | u32 n | n x (u32 doc, u32 tf)
/// n_docs x (str para_id | u32 length)
/// u32 crc32 of all preceding bytes
/// ```
pub fn save_index(index: &InvertedIndex, path: impl AsRef<Path>) -> Result<()> {
    let mut e = Encoder::new(INDEX_MAGIC, INDEX_FORMAT_VERSION);
    e.u8(index.variant.tag());
    e.len(index.n_docs());
    e.len(index.postings.len());
    for (term, postings) in &index.postings {
        e.str(term);
        e.len(postings.len());
        for p in postings {
            e.u32(p.doc);
            e.u32(p.tf);
        }
    }
    for (id, len) in index.para_ids.iter().zip(&index.doc_lengths) {
        e.str(id);
        e.u32(*len);
    }
    e.write(path.as_ref())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<InvertedIndex> {
    let bytes = read_file(path.as_ref())?;
    let mut d = Decoder::open(&bytes, INDEX_MAGIC, INDEX_FORMAT_VERSION)?;
    let tag = d.u8()?;
    let variant = IndexVariant::from_tag(tag)
        .ok_or_else(|| Error::Corrupt(format!("unknown variant tag {tag}")))?;
    let n_docs = d.len()?;
    let n_terms = d.len()?;
    let mut postings = BTreeMap::new();
    let mut totals = vec![0u64; n_docs];
    for _ in 0..n_terms {
        let term = d.str()?;
        let n = d.len()?;
        let mut list = Vec::with_capacity(n.min(n_docs));
        for _ in 0..n {
            let p = Posting {
                doc: d.u32()?,
                tf: d.u32()?,
            };
            if p.doc as usize >= n_docs || p.tf == 0 {
                return Err(Error::Corrupt(format!("bad posting for \"{term}\"")));
            }
            totals[p.doc as usize] += u64::from(p.tf);
            list.push(p);
        }
        postings.insert(term, list);
    }
    let mut para_ids = Vec::with_capacity(n_docs);
    let mut doc_lengths = Vec::with_capacity(n_docs);
    for total in totals {
        para_ids.push(d.str()?);
        let len = d.u32()?;
        if u64::from(len) != total {
            return Err(Error::Corrupt("document length disagrees with postings".into()));
        }
        doc_lengths.push(len);
    }
    d.finish()?;
    Ok(InvertedIndex {
        variant,
        para_ids,
        doc_lengths,
        postings,
    })
}
