//! Deterministic synthetic corpora with matching lexicons.
//!
//! Words are pseudo-words built from consonant-vowel syllables. Each topic
//! owns a disjoint pool of content lemmas, proper names and synonym
//! partners; a shared pool of general words and real English stopwords fills
//! the rest. Every lemma also appears in a plural `-s` form covered by the
//! generated lemma lexicon, and synonym partners never occur in paragraphs,
//! so only synonym expansion can recover a substituted question word.
//!
//! The vocabulary depends only on the number of topics. The seed drives
//! document layout, sentence content and question perturbation.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Paragraph, Question, QuestionSet};
use crate::error::{Error, Result};
use crate::seed;
use crate::textproc::{Gazetteer, LemmaLexicon, Lexicons, Stoplist, SynonymLexicon};

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const FUNCTION_WORDS: [&str; 14] = [
    "the", "of", "and", "to", "in", "for", "on", "with", "by", "was", "is", "that", "from", "at",
];
const WH_WORDS: [&str; 6] = ["What", "Which", "How", "Why", "When", "Where"];
const PRONOUNS: [&str; 2] = ["It", "They"];
// Fixed so the vocabulary is identical for every seed.
const VOCABULARY_SEED: u64 = 0x05ee_d0f7_09c5;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_paragraphs: usize,
    pub n_questions: usize,
    pub seed: u64,
    pub n_topics: usize,
    pub lemmas_per_topic: usize,
    pub general_words: usize,
    pub entities_per_topic: usize,
    /// Probability that a question word is dropped.
    pub dropout: f64,
    /// Probability that a question word with a synonym is replaced by it.
    pub synonym_rate: f64,
    /// Probability that a question content word flips singular/plural.
    pub inflection_rate: f64,
    /// Share of sentence slots filled with stopwords.
    pub stopword_rate: f64,
    /// Share of slots filled from the shared general pool.
    pub general_rate: f64,
    /// Share of topic slots drawn from a different topic than the document's.
    pub cross_topic_rate: f64,
}

impl SyntheticConfig {
    pub fn new(n_paragraphs: usize, n_questions: usize, seed: u64) -> Self {
        SyntheticConfig {
            n_paragraphs,
            n_questions,
            seed,
            n_topics: 4,
            lemmas_per_topic: 60,
            general_words: 60,
            entities_per_topic: 8,
            dropout: 0.3,
            synonym_rate: 0.5,
            inflection_rate: 0.3,
            stopword_rate: 0.3,
            general_rate: 0.15,
            cross_topic_rate: 0.1,
        }
    }

    /// Two topics with no shared words at all.
    pub fn disjoint_two_topic(n_paragraphs: usize, n_questions: usize, seed: u64) -> Self {
        SyntheticConfig {
            n_topics: 2,
            general_rate: 0.0,
            cross_topic_rate: 0.0,
            ..Self::new(n_paragraphs, n_questions, seed)
        }
    }

    pub fn generate(&self) -> Result<SyntheticDataset> {
        if self.n_paragraphs == 0 || self.n_questions == 0 {
            return Err(Error::InvalidArgument(
                "paragraph and question counts must be positive".into(),
            ));
        }
        if self.n_questions > self.n_paragraphs {
            return Err(Error::InvalidArgument(format!(
                "{} questions requested but only {} paragraphs",
                self.n_questions, self.n_paragraphs
            )));
        }
        if self.n_topics < 2 {
            return Err(Error::InvalidArgument("at least two topics are required".into()));
        }
        let vocab = Vocabulary::build(self);
        let mut rng = seed::stream_rng(self.seed, seed::STREAM_CORPUS);

        let mut paragraphs = Vec::with_capacity(self.n_paragraphs);
        let mut sentences: Vec<Vec<Vec<Word>>> = Vec::with_capacity(self.n_paragraphs);
        let mut doc = 0;
        while paragraphs.len() < self.n_paragraphs {
            doc += 1;
            let topic = rng.random_range(0..self.n_topics);
            let n = rng.random_range(3..=8).min(self.n_paragraphs - paragraphs.len());
            for number in 1..=n {
                let body = self.paragraph(&vocab, topic, &mut rng);
                paragraphs.push(Paragraph::new(format!("d{doc}"), number, render(&body)));
                sentences.push(body);
            }
        }

        let mut order: Vec<usize> = (0..self.n_paragraphs).collect();
        order.shuffle(&mut rng);
        let questions = order[..self.n_questions]
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let source = sentences[p].choose(&mut rng).expect("paragraphs have sentences");
                Question {
                    q_id: format!("q{}", i + 1),
                    text: self.question(&vocab, source, &mut rng),
                    gold_para_ids: vec![paragraphs[p].para_id.clone()],
                }
            })
            .collect();

        let corpus = Corpus::new(paragraphs)?;
        let questions = QuestionSet::new(questions, &corpus)?;
        Ok(SyntheticDataset {
            corpus,
            questions,
            lexicons: vocab.lexicons(),
            topic_vocabularies: vocab.topic_surfaces(),
        })
    }

    fn paragraph(&self, vocab: &Vocabulary, topic: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Word>> {
        let n_sentences = rng.random_range(2..=4);
        let mut seen_entity = false;
        (0..n_sentences)
            .map(|_| {
                let mut sentence = Vec::new();
                if seen_entity && rng.random_bool(0.3) {
                    sentence.push(Word::plain(PRONOUNS.choose(rng).unwrap()));
                }
                let slots = rng.random_range(6..=12);
                let mut entity_used = false;
                for _ in 0..slots {
                    let r: f64 = rng.random();
                    if r < self.stopword_rate {
                        sentence.push(Word::plain(FUNCTION_WORDS.choose(rng).unwrap()));
                    } else if r < self.stopword_rate + self.general_rate {
                        let lemma = zipf_pick(&vocab.general, rng);
                        sentence.push(Word::content(lemma, rng.random_bool(0.3)));
                    } else if !entity_used && r > 0.93 {
                        entity_used = true;
                        seen_entity = true;
                        let name = vocab.entities[topic].choose(rng).unwrap();
                        sentence.push(Word::entity(name));
                    } else {
                        let t = if rng.random_bool(self.cross_topic_rate) {
                            (topic + rng.random_range(1..self.n_topics)) % self.n_topics
                        } else {
                            topic
                        };
                        let lemma = zipf_pick(&vocab.topics[t], rng);
                        sentence.push(Word::content(lemma, rng.random_bool(0.3)));
                    }
                }
                sentence
            })
            .collect()
    }

    fn question(&self, vocab: &Vocabulary, source: &[Word], rng: &mut ChaCha8Rng) -> String {
        let mut kept: Vec<Word> = source
            .iter()
            .filter(|w| !PRONOUNS.contains(&w.text.as_str()))
            .filter(|_| !rng.random_bool(self.dropout))
            .cloned()
            .collect();
        if kept.len() < 3 {
            kept = source.iter().take(3).cloned().collect();
        }
        for w in &mut kept {
            if w.kind != WordKind::Content {
                continue;
            }
            if let Some(syn) = vocab.synonym_of(&w.lemma) {
                if rng.random_bool(self.synonym_rate) {
                    w.lemma = syn.to_string();
                }
            }
            if rng.random_bool(self.inflection_rate) {
                w.plural = !w.plural;
            }
            w.text = w.surface();
        }
        let mut text = String::from(*WH_WORDS.choose(rng).unwrap());
        for w in &kept {
            text.push(' ');
            text.push_str(&w.text);
        }
        text.push('?');
        text
    }
}

/// Generates a corpus and a question set with the default recipe.
pub fn gen_synthetic(n_paragraphs: usize, n_questions: usize, seed: u64) -> Result<(Corpus, QuestionSet)> {
    let data = SyntheticConfig::new(n_paragraphs, n_questions, seed).generate()?;
    Ok((data.corpus, data.questions))
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub corpus: Corpus,
    pub questions: QuestionSet,
    /// Default stoplist plus the generated lemma, synonym and entity lists.
    pub lexicons: Lexicons,
    /// Every lowercase surface owned by each topic.
    pub topic_vocabularies: Vec<HashSet<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WordKind {
    Function,
    Content,
    Entity,
}

#[derive(Debug, Clone)]
struct Word {
    kind: WordKind,
    lemma: String,
    plural: bool,
    text: String,
}

impl Word {
    fn plain(text: &str) -> Self {
        Word {
            kind: WordKind::Function,
            lemma: text.to_lowercase(),
            plural: false,
            text: text.to_string(),
        }
    }

    fn content(lemma: &str, plural: bool) -> Self {
        let mut w = Word {
            kind: WordKind::Content,
            lemma: lemma.to_string(),
            plural,
            text: String::new(),
        };
        w.text = w.surface();
        w
    }

    fn entity(name: &str) -> Self {
        Word {
            kind: WordKind::Entity,
            lemma: name.to_lowercase(),
            plural: false,
            text: name.to_string(),
        }
    }

    fn surface(&self) -> String {
        if self.plural {
            format!("{}s", self.lemma)
        } else {
            self.lemma.clone()
        }
    }
}

fn render(sentences: &[Vec<Word>]) -> String {
    let rendered: Vec<String> = sentences
        .iter()
        .map(|words| {
            let mut s = words.iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" ");
            if let Some(first) = s.get(..1) {
                let upper = first.to_uppercase();
                s.replace_range(..1, &upper);
            }
            s.push('.');
            s
        })
        .collect();
    rendered.join(" ")
}

/// Skewed pick: low indices are frequent, the tail is rare.
fn zipf_pick<'a>(pool: &'a [String], rng: &mut ChaCha8Rng) -> &'a str {
    let u: f64 = rng.random();
    let i = ((u * u) * pool.len() as f64) as usize;
    &pool[i.min(pool.len() - 1)]
}

struct Vocabulary {
    topics: Vec<Vec<String>>,
    general: Vec<String>,
    entities: Vec<Vec<String>>,
    /// (lemma, synonym) per topic; synonyms never appear in paragraphs.
    synonyms: Vec<Vec<(String, String)>>,
}

impl Vocabulary {
    fn build(config: &SyntheticConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(VOCABULARY_SEED);
        let stop = Stoplist::english();
        let mut used: HashSet<String> = HashSet::new();
        let mut fresh = |syllables: usize, rng: &mut ChaCha8Rng| loop {
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(*CONSONANTS.choose(rng).unwrap() as char);
                w.push(*VOWELS.choose(rng).unwrap() as char);
            }
            if !stop.contains(&w) && used.insert(w.clone()) {
                return w;
            }
        };
        let general = (0..config.general_words).map(|_| fresh(2, &mut rng)).collect();
        let mut topics = Vec::new();
        let mut entities = Vec::new();
        let mut synonyms = Vec::new();
        for _ in 0..config.n_topics {
            let lemmas: Vec<String> = (0..config.lemmas_per_topic).map(|_| fresh(3, &mut rng)).collect();
            // The more frequent half of each pool gets a synonym partner.
            let syns = lemmas[..lemmas.len() / 2]
                .iter()
                .map(|l| (l.clone(), fresh(3, &mut rng)))
                .collect();
            let names = (0..config.entities_per_topic)
                .map(|i| {
                    let mut name = capitalize(&fresh(2, &mut rng));
                    if i % 3 == 2 {
                        name = format!("{name} {}", capitalize(&fresh(3, &mut rng)));
                    }
                    name
                })
                .collect();
            topics.push(lemmas);
            synonyms.push(syns);
            entities.push(names);
        }
        Vocabulary {
            topics,
            general,
            entities,
            synonyms,
        }
    }

    fn synonym_of(&self, lemma: &str) -> Option<&str> {
        self.synonyms
            .iter()
            .flatten()
            .find_map(|(l, s)| (l == lemma).then_some(s.as_str()))
    }

    fn lexicons(&self) -> Lexicons {
        let mut lemmas = LemmaLexicon::new();
        let mut synonyms = SynonymLexicon::new();
        let all_lemmas = self
            .topics
            .iter()
            .flatten()
            .chain(&self.general)
            .chain(self.synonyms.iter().flatten().map(|(_, s)| s));
        for l in all_lemmas {
            lemmas.insert(&format!("{l}s"), l).expect("pseudo-words are tokens");
        }
        for (l, s) in self.synonyms.iter().flatten() {
            synonyms.insert(l, [s]);
            synonyms.insert(s, [l]);
        }
        Lexicons {
            stoplist: Stoplist::english(),
            lemmas,
            synonyms,
            gazetteer: Gazetteer::new(self.entities.iter().flatten()),
        }
    }

    fn topic_surfaces(&self) -> Vec<HashSet<String>> {
        (0..self.topics.len())
            .map(|t| {
                let mut set = HashSet::new();
                let lemmas = self.topics[t]
                    .iter()
                    .chain(self.synonyms[t].iter().map(|(_, s)| s));
                for l in lemmas {
                    set.insert(l.clone());
                    set.insert(format!("{l}s"));
                }
                for name in &self.entities[t] {
                    set.extend(name.split(' ').map(str::to_lowercase));
                }
                set
            })
            .collect()
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
