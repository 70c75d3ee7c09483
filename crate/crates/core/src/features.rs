//! The eleven fusion features: six query generators and five evaluators.
//!
//! The order of [`FeatureId::ALL`] is the column order of every feature
//! matrix and the coordinate order of every weight vector. Files always name
//! features by their id string.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::index::{IndexVariant, Query};
use crate::lda::{cosine, LdaModel, TopicVector};
use crate::textproc::{expand_synonyms, extract_ngrams, surfaces, tokenize, Lexicons, Token};

pub const N_FEATURES: usize = 11;
pub const N_QUERY_FEATURES: usize = 6;
pub const N_EVALUATORS: usize = N_FEATURES - N_QUERY_FEATURES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureId {
    QBaseline,
    QLemma,
    QNGrams,
    QNGramsCoref,
    QNamedEntities,
    QSynonyms,
    EvCommonWords,
    EvCommon2Grams,
    EvCommon3Grams,
    EvLda10,
    EvLda100,
}

impl FeatureId {
    pub const ALL: [FeatureId; N_FEATURES] = [
        FeatureId::QBaseline,
        FeatureId::QLemma,
        FeatureId::QNGrams,
        FeatureId::QNGramsCoref,
        FeatureId::QNamedEntities,
        FeatureId::QSynonyms,
        FeatureId::EvCommonWords,
        FeatureId::EvCommon2Grams,
        FeatureId::EvCommon3Grams,
        FeatureId::EvLda10,
        FeatureId::EvLda100,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureId::QBaseline => "q_baseline",
            FeatureId::QLemma => "q_lemma",
            FeatureId::QNGrams => "q_ngrams",
            FeatureId::QNGramsCoref => "q_ngrams_coref",
            FeatureId::QNamedEntities => "q_named_entities",
            FeatureId::QSynonyms => "q_synonyms",
            FeatureId::EvCommonWords => "ev_common_1g",
            FeatureId::EvCommon2Grams => "ev_common_2g",
            FeatureId::EvCommon3Grams => "ev_common_3g",
            FeatureId::EvLda10 => "ev_lda_10",
            FeatureId::EvLda100 => "ev_lda_100",
        }
    }

    pub fn is_query(self) -> bool {
        self.index() < N_QUERY_FEATURES
    }

    /// Index a query feature runs against; `None` for evaluators.
    pub fn target(self) -> Option<IndexVariant> {
        match self {
            FeatureId::QBaseline | FeatureId::QNamedEntities | FeatureId::QSynonyms => {
                Some(IndexVariant::Baseline)
            }
            FeatureId::QLemma => Some(IndexVariant::Lemma),
            FeatureId::QNGrams => Some(IndexVariant::NGrams),
            FeatureId::QNGramsCoref => Some(IndexVariant::NGramsCoref),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureId::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature id \"{s}\"")))
    }
}

/// One query per query feature, in [`FeatureId::ALL`] order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryBundle {
    queries: [Query; N_QUERY_FEATURES],
}

impl QueryBundle {
    pub fn get(&self, feature: FeatureId) -> Option<&Query> {
        self.queries.get(feature.index())
    }

    pub fn iter(&self) -> impl Iterator<Item = (FeatureId, &Query)> {
        FeatureId::ALL.into_iter().zip(self.queries.iter())
    }

    pub fn all_empty(&self) -> bool {
        self.queries.iter().all(Query::is_empty)
    }
}

/// Builds the six queries for a question. Questions get no coreference pass.
pub fn generate_queries(question: &str, lexicons: &Lexicons) -> QueryBundle {
    let baseline = lexicons.baseline_tokens(question);
    let ngrams = lexicons.ngram_terms(question);

    let mut entity_terms = Vec::new();
    for entity in lexicons.named_entities(question) {
        let words = surfaces(&tokenize(&entity));
        entity_terms.extend(words.iter().filter(|w| !lexicons.stoplist.contains(w)).cloned());
        if words.len() > 1 {
            entity_terms.push(words.join(" "));
        }
    }

    let q = |terms: Vec<String>, feature: FeatureId| Query::new(terms, feature.target().unwrap());
    QueryBundle {
        queries: [
            q(surfaces(&baseline), FeatureId::QBaseline),
            q(surfaces(&lexicons.lemma_tokens(question)), FeatureId::QLemma),
            q(ngrams.clone(), FeatureId::QNGrams),
            q(ngrams, FeatureId::QNGramsCoref),
            q(entity_terms, FeatureId::QNamedEntities),
            q(surfaces(&expand_synonyms(&baseline, &lexicons.synonyms)), FeatureId::QSynonyms),
        ],
    }
}

fn distinct_ngrams(tokens: &[Token], n: usize) -> HashSet<String> {
    extract_ngrams(tokens, n).into_iter().collect()
}

/// Number of distinct `n`-grams shared by both token lists.
pub fn overlap_score(question: &[Token], paragraph: &[Token], n: usize) -> usize {
    let q = distinct_ngrams(question, n);
    let p = distinct_ngrams(paragraph, n);
    q.intersection(&p).count()
}

/// The two topic models behind the LDA evaluators.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModels {
    pub lda_10: LdaModel,
    pub lda_100: LdaModel,
}

impl TopicModels {
    fn both(&self) -> [&LdaModel; 2] {
        [&self.lda_10, &self.lda_100]
    }
}

/// Cosine between the inferred topic vectors of the two texts.
pub fn lda_score(model: &LdaModel, question: &str, paragraph: &str, lexicons: &Lexicons) -> f64 {
    cosine(&model.infer(question, lexicons), &model.infer(paragraph, lexicons))
        .expect("vectors from one model share a dimension")
}

/// Evaluator inputs for one text: distinct 1/2/3-gram sets and topic vectors.
#[derive(Debug, Clone)]
pub struct TextProfile {
    ngrams: [HashSet<String>; 3],
    topics: [TopicVector<f64>; 2],
}

impl TextProfile {
    pub fn new(text: &str, lexicons: &Lexicons, models: &TopicModels) -> Self {
        let tokens = lexicons.baseline_tokens(text);
        TextProfile {
            ngrams: [1, 2, 3].map(|n| distinct_ngrams(&tokens, n)),
            topics: models.both().map(|m| m.infer(text, lexicons)),
        }
    }

    /// Scores in evaluator order: common 1/2/3-grams, LDA-10, LDA-100.
    pub fn evaluate(&self, paragraph: &TextProfile) -> [f64; N_EVALUATORS] {
        let overlap = |n: usize| self.ngrams[n].intersection(&paragraph.ngrams[n]).count() as f64;
        let lda = |m: usize| {
            cosine(&self.topics[m], &paragraph.topics[m]).expect("vectors from one model share a dimension")
        };
        [overlap(0), overlap(1), overlap(2), lda(0), lda(1)]
    }
}

/// Paragraph profiles in corpus order, computed once before any question.
#[derive(Debug, Clone)]
pub struct ParagraphProfiles {
    profiles: Vec<TextProfile>,
}

impl ParagraphProfiles {
    pub fn build(corpus: &Corpus, lexicons: &Lexicons, models: &TopicModels) -> Self {
        let profiles = corpus
            .paragraphs()
            .par_iter()
            .map(|p| TextProfile::new(&p.text, lexicons, models))
            .collect();
        ParagraphProfiles { profiles }
    }

    pub fn get(&self, ordinal: usize) -> &TextProfile {
        &self.profiles[ordinal]
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lda::{train_on_texts, LdaConfig};
    use crate::textproc::{Gazetteer, LemmaLexicon, SynonymLexicon};
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> Vec<Token> {
        words.iter().enumerate().map(|(i, w)| Token::new(*w, i)).collect()
    }

    fn terms(bundle: &QueryBundle, f: FeatureId) -> Vec<String> {
        bundle.get(f).unwrap().terms.clone()
    }

    #[test]
    fn ids_round_trip_and_order() {
        assert_eq!(FeatureId::ALL.len(), 11);
        for (i, f) in FeatureId::ALL.into_iter().enumerate() {
            assert_eq!(f.index(), i);
            assert_eq!(f.as_str().parse::<FeatureId>().unwrap(), f);
            assert_eq!(f.is_query(), i < 6);
        }
        assert!("q_unknown".parse::<FeatureId>().is_err());
        assert_eq!(FeatureId::QSynonyms.target(), Some(IndexVariant::Baseline));
        assert_eq!(FeatureId::QNamedEntities.target(), Some(IndexVariant::Baseline));
        assert_eq!(FeatureId::QNGramsCoref.target(), Some(IndexVariant::NGramsCoref));
        assert_eq!(FeatureId::EvLda10.target(), None);
    }

    #[test]
    fn named_entity_query() {
        let b = generate_queries("When did the European Council meet?", &Lexicons::default());
        let got: HashSet<String> = terms(&b, FeatureId::QNamedEntities).into_iter().collect();
        let want: HashSet<String> = ["european", "council", "european council"].map(String::from).into();
        assert_eq!(got, want);
    }

    #[test]
    fn stopword_question_gives_empty_queries() {
        let b = generate_queries("What is it that they were?", &Lexicons::default());
        assert!(b.all_empty());
        assert_eq!(b.iter().count(), 6);
    }

    #[test]
    fn queries_target_their_index() {
        let mut lemmas = LemmaLexicon::new();
        lemmas.insert("quotas", "quota").unwrap();
        let mut synonyms = SynonymLexicon::new();
        synonyms.insert("fish", ["seafood"]);
        let lex = Lexicons {
            lemmas,
            synonyms,
            gazetteer: Gazetteer::new(["baltic"]),
            ..Lexicons::default()
        };
        let b = generate_queries("Which fish quotas apply in the Baltic?", &lex);
        for (f, q) in b.iter() {
            assert_eq!(Some(q.target), f.target());
        }
        assert_eq!(terms(&b, FeatureId::QBaseline), ["fish", "quotas", "apply", "baltic"]);
        assert_eq!(terms(&b, FeatureId::QLemma), ["fish", "quota", "apply", "baltic"]);
        assert_eq!(terms(&b, FeatureId::QNGrams), terms(&b, FeatureId::QNGramsCoref));
        assert!(terms(&b, FeatureId::QNGrams).contains(&"fish quotas apply".to_string()));
        assert_eq!(terms(&b, FeatureId::QNamedEntities), ["baltic"]);
        assert_eq!(
            terms(&b, FeatureId::QSynonyms),
            ["fish", "quotas", "apply", "baltic", "seafood"]
        );
    }

    #[test]
    fn overlap_examples() {
        let q = toks(&["a", "b", "c"]);
        let p = toks(&["b", "c", "d"]);
        assert_eq!(overlap_score(&q, &p, 1), 2);
        assert_eq!(overlap_score(&q, &p, 2), 1);
        let rep = toks(&["a", "a", "b"]);
        assert_eq!(overlap_score(&rep, &rep, 1), 2);
    }

    #[test]
    fn lda_score_identity_and_fallback() {
        let lex = Lexicons::default();
        let texts = ["apple banana cherry", "engine piston gear", "apple gear"];
        let cfg = LdaConfig {
            iterations: 50,
            ..LdaConfig::new(2, 3)
        };
        let model = train_on_texts(&texts, &lex, &cfg).unwrap().model;
        let s = lda_score(&model, "apple banana engine", "apple banana engine", &lex);
        assert!((s - 1.0).abs() < 1e-9);
        // both texts fall back to the uniform vector
        assert!((lda_score(&model, "zebra", "quartz", &lex) - 1.0).abs() < 1e-12);

        let models = TopicModels {
            lda_10: model.clone(),
            lda_100: model,
        };
        let a = TextProfile::new("apple banana cherry. apple banana", &lex, &models);
        let b = TextProfile::new("banana cherry apple", &lex, &models);
        let scores = a.evaluate(&b);
        assert_eq!(&scores[..3], &[3.0, 2.0, 1.0]);
        assert!(scores[3] > 0.0 && scores[3] <= 1.0);
    }

    fn word() -> impl Strategy<Value = String> {
        "[a-f]{1,2}"
    }

    proptest! {
        #[test]
        fn overlap_symmetric_and_bounded(
            q in prop::collection::vec(word(), 0..15),
            p in prop::collection::vec(word(), 0..15),
            n in 1usize..4,
        ) {
            let qt = toks(&q.iter().map(String::as_str).collect::<Vec<_>>());
            let pt = toks(&p.iter().map(String::as_str).collect::<Vec<_>>());
            let s = overlap_score(&qt, &pt, n);
            prop_assert_eq!(s, overlap_score(&pt, &qt, n));
            prop_assert!(s <= distinct_ngrams(&qt, n).len().min(distinct_ngrams(&pt, n).len()));
        }

        #[test]
        fn synonym_query_contains_baseline(
            words in prop::collection::vec(word(), 0..12),
            entries in prop::collection::vec((word(), prop::collection::vec(word(), 0..3)), 0..6),
        ) {
            let mut synonyms = SynonymLexicon::new();
            for (t, s) in &entries {
                synonyms.insert(t, s);
            }
            let lex = Lexicons { synonyms, ..Lexicons::default() };
            let b = generate_queries(&words.join(" "), &lex);
            let base = terms(&b, FeatureId::QBaseline);
            let syn = terms(&b, FeatureId::QSynonyms);
            prop_assert_eq!(&syn[..base.len()], &base[..]);
        }
    }
}
