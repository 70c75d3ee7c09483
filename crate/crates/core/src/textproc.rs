//! Text pre-processing shared by indexing, query generation and the evaluators.
//!
//! The pipeline order is fixed: tokenize, then stopword removal, then
//! lemmatization. N-grams are always formed over the stopword-filtered stream.
//! Named-entity recognition and coreference resolution are small rule-based
//! heuristics over capitalization; they are deterministic and need no models.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Pronouns rewritten by [`resolve_coreferences`].
pub const THIRD_PERSON_PRONOUNS: [&str; 10] = [
    "he", "she", "it", "they", "him", "her", "them", "his", "its", "their",
];

/// Separator used when joining tokens into n-gram terms.
pub const NGRAM_SEPARATOR: char = ' ';

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub position: usize,
}

impl Token {
    pub fn new(surface: impl Into<String>, position: usize) -> Self {
        Token {
            surface: surface.into(),
            position,
        }
    }
}

/// Collects the surfaces of a token stream.
pub fn surfaces(tokens: &[Token]) -> Vec<String> {
    tokens.iter().map(|t| t.surface.clone()).collect()
}

/// Splits on non-alphanumeric boundaries and lowercases. Digits are kept.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(position, s)| Token::new(s.to_lowercase(), position))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist {
    words: HashSet<String>,
}

impl Stoplist {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Stoplist {
            words: words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// The English list bundled with the crate.
    pub fn english() -> Self {
        Self::new(DEFAULT_STOPWORDS.lines())
    }

    /// One lowercase word per line; blank lines ignored.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(text.lines()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut words: Vec<&String> = self.words.iter().collect();
        words.sort();
        write_lines(path.as_ref(), words.into_iter().cloned())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut body = String::new();
    for line in lines {
        body.push_str(&line);
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Order-preserving filter; positions are renumbered from zero.
pub fn remove_stopwords(tokens: &[Token], stoplist: &Stoplist) -> Vec<Token> {
    tokens
        .iter()
        .filter(|t| !stoplist.contains(&t.surface))
        .enumerate()
        .map(|(position, t)| Token::new(t.surface.clone(), position))
        .collect()
}

/// Surface-form to lemma map, read from `surface<TAB>lemma` lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaLexicon {
    map: HashMap<String, String>,
}

impl LemmaLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Both sides must be single lowercase token surfaces.
    pub fn insert(&mut self, surface: &str, lemma: &str) -> Result<()> {
        for word in [surface, lemma] {
            if !is_token_surface(word) {
                return Err(Error::InvalidArgument(format!(
                    "lemma lexicon entry \"{word}\" is not a lowercase token"
                )));
            }
        }
        self.map.insert(surface.to_string(), lemma.to_string());
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lexicon = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |message: String| Error::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (surface, lemma) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected surface<TAB>lemma".into()))?;
            lexicon
                .insert(surface.trim(), lemma.trim())
                .map_err(|e| malformed(e.to_string()))?;
        }
        Ok(lexicon)
    }

    /// Writes entries sorted by surface.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut entries: Vec<(&String, &String)> = self.map.iter().collect();
        entries.sort();
        write_lines(path.as_ref(), entries.into_iter().map(|(s, l)| format!("{s}\t{l}")))
    }

    pub fn get(&self, surface: &str) -> Option<&str> {
        self.map.get(surface).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn is_token_surface(word: &str) -> bool {
    let tokens = tokenize(word);
    tokens.len() == 1 && tokens[0].surface == word
}

/// Replaces each surface found in the lexicon; unknown surfaces pass through.
pub fn lemmatize(tokens: &[Token], lexicon: &LemmaLexicon) -> Vec<Token> {
    tokens
        .iter()
        .map(|t| match lexicon.get(&t.surface) {
            Some(lemma) => Token::new(lemma, t.position),
            None => t.clone(),
        })
        .collect()
}

/// Contiguous n-grams joined with [`NGRAM_SEPARATOR`].
pub fn extract_ngrams(tokens: &[Token], n: usize) -> Vec<String> {
    if n == 0 || tokens.len() < n {
        return Vec::new();
    }
    tokens
        .windows(n)
        .map(|w| {
            let mut gram = String::new();
            for (i, t) in w.iter().enumerate() {
                if i > 0 {
                    gram.push(NGRAM_SEPARATOR);
                }
                gram.push_str(&t.surface);
            }
            gram
        })
        .collect()
}

/// Term to synonym list. The relation is stored as given, not symmetrized.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    map: BTreeMap<String, Vec<String>>,
}

impl SynonymLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds synonyms for `term`. Self-references and repeats are dropped.
    pub fn insert<I, S>(&mut self, term: &str, synonyms: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let term = term.trim().to_lowercase();
        let entry = self.map.entry(term.clone()).or_default();
        for syn in synonyms {
            let syn = syn.as_ref().trim().to_lowercase();
            if !syn.is_empty() && syn != term && !entry.contains(&syn) {
                entry.push(syn);
            }
        }
        if entry.is_empty() {
            self.map.remove(&term);
        }
    }

    /// Reads `term<TAB>syn1,syn2,...` lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lexicon = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (term, syns) = line.split_once('\t').ok_or_else(|| Error::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected term<TAB>syn1,syn2,...".into(),
            })?;
            lexicon.insert(term, syns.split(','));
        }
        Ok(lexicon)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_lines(
            path.as_ref(),
            self.map.iter().map(|(t, syns)| format!("{t}\t{}", syns.join(","))),
        )
    }

    pub fn get(&self, term: &str) -> &[String] {
        self.map.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Returns the input followed by every synonym of every input token that is
/// not already present.
pub fn expand_synonyms(tokens: &[Token], lexicon: &SynonymLexicon) -> Vec<Token> {
    let mut out = tokens.to_vec();
    let mut seen: HashSet<String> = tokens.iter().map(|t| t.surface.clone()).collect();
    let mut next = tokens.last().map_or(0, |t| t.position + 1);
    for t in tokens {
        for syn in lexicon.get(&t.surface) {
            if seen.insert(syn.clone()) {
                out.push(Token::new(syn.clone(), next));
                next += 1;
            }
        }
    }
    out
}

/// Known entity names, matched case-insensitively on word boundaries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    // Lowercased word sequences, longest first.
    entries: Vec<Vec<String>>,
}

impl Gazetteer {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut entries: Vec<Vec<String>> = names
            .into_iter()
            .map(|n| surfaces(&tokenize(n.as_ref())))
            .filter(|words| !words.is_empty())
            .collect();
        entries.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        entries.dedup();
        Gazetteer { entries }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(text.lines()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut names: Vec<String> = self.entries.iter().map(|e| e.join(" ")).collect();
        names.sort();
        write_lines(path.as_ref(), names.into_iter())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Word<'a> {
    text: &'a str,
    start: usize,
    end: usize,
    sentence: usize,
    sentence_initial: bool,
    /// Separated from the previous word only by whitespace, same sentence.
    joined: bool,
}

fn scan_words(text: &str) -> Vec<Word<'_>> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }

    let mut words: Vec<Word<'_>> = Vec::with_capacity(spans.len());
    let mut sentence = 0;
    for (s, e) in spans {
        let (joined, sentence_initial) = match words.last() {
            None => (false, true),
            Some(prev) => {
                let gap = &text[prev.end..s];
                if gap.contains(['.', '!', '?']) {
                    sentence += 1;
                    (false, true)
                } else {
                    (gap.chars().all(char::is_whitespace), false)
                }
            }
        };
        words.push(Word {
            text: &text[s..e],
            start: s,
            end: e,
            sentence,
            sentence_initial,
            joined,
        });
    }
    words
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

/// Inclusive word-index spans of entity mentions, ordered by position.
fn entity_spans(words: &[Word<'_>], gazetteer: &Gazetteer, stoplist: &Stoplist) -> Vec<(usize, usize)> {
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    let close = |run: &mut Option<(usize, usize)>, spans: &mut Vec<(usize, usize)>| {
        if let Some((a, b)) = run.take() {
            // A lone capitalized sentence opener is not evidence of a name.
            if !(a == b && words[a].sentence_initial) {
                spans.push((a, b));
            }
        }
    };
    for (i, w) in words.iter().enumerate() {
        let candidate = is_capitalized(w.text)
            && !(w.sentence_initial && stoplist.contains(&w.text.to_lowercase()));
        if !candidate {
            close(&mut run, &mut spans);
            continue;
        }
        match run {
            Some((a, b)) if b + 1 == i && w.joined => run = Some((a, i)),
            _ => {
                close(&mut run, &mut spans);
                run = Some((i, i));
            }
        }
    }
    close(&mut run, &mut spans);

    let lower: Vec<String> = words.iter().map(|w| w.text.to_lowercase()).collect();
    let overlaps = |spans: &[(usize, usize)], a: usize, b: usize| {
        spans.iter().any(|&(x, y)| a <= y && x <= b)
    };
    let mut extra = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let hit = gazetteer.entries.iter().find(|entry| {
            let end = i + entry.len();
            end <= words.len()
                && lower[i..end] == entry[..]
                && words[i + 1..end].iter().all(|w| w.sentence == words[i].sentence)
        });
        match hit {
            Some(entry) => {
                let (a, b) = (i, i + entry.len() - 1);
                if !overlaps(&spans, a, b) {
                    extra.push((a, b));
                }
                i = b + 1;
            }
            None => i += 1,
        }
    }
    spans.extend(extra);
    spans.sort_unstable();
    spans
}

fn span_text(words: &[Word<'_>], (a, b): (usize, usize)) -> String {
    words[a..=b]
        .iter()
        .map(|w| w.text)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Rule-based entity extraction.
///
/// An entity is a maximal run of capitalized, whitespace-separated words
/// within one sentence. A run made only of a sentence's first word is
/// ignored, and a sentence-initial stopword never starts a run. Gazetteer
/// names are added wherever they occur (case-insensitive) unless they overlap
/// an entity already found. Results are in text order.
pub fn extract_named_entities(text: &str, gazetteer: &Gazetteer, stoplist: &Stoplist) -> Vec<String> {
    let words = scan_words(text);
    entity_spans(&words, gazetteer, stoplist)
        .into_iter()
        .map(|span| span_text(&words, span))
        .collect()
}

/// Rewrites third-person pronouns to the closest preceding entity mention in
/// the same sentence or the two sentences before it. Pronouns with no such
/// antecedent are left as they are.
pub fn resolve_coreferences(text: &str, gazetteer: &Gazetteer, stoplist: &Stoplist) -> String {
    let words = scan_words(text);
    let spans = entity_spans(&words, gazetteer, stoplist);
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for (i, w) in words.iter().enumerate() {
        if !THIRD_PERSON_PRONOUNS.contains(&w.text.to_lowercase().as_str()) {
            continue;
        }
        if spans.iter().any(|&(a, b)| a <= i && i <= b) {
            continue;
        }
        let antecedent = spans
            .iter()
            .rev()
            .find(|&&(_, b)| b < i && words[b].sentence + 2 >= w.sentence);
        if let Some(&span) = antecedent {
            out.push_str(&text[cursor..w.start]);
            out.push_str(&span_text(&words, span));
            cursor = w.end;
        }
    }
    out.push_str(&text[cursor..]);
    out
}

/// Every lexicon the pre-processing pipelines consult.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicons {
    pub stoplist: Stoplist,
    pub lemmas: LemmaLexicon,
    pub synonyms: SynonymLexicon,
    pub gazetteer: Gazetteer,
}

impl Default for Lexicons {
    fn default() -> Self {
        Lexicons {
            stoplist: Stoplist::english(),
            lemmas: LemmaLexicon::new(),
            synonyms: SynonymLexicon::new(),
            gazetteer: Gazetteer::default(),
        }
    }
}

impl Lexicons {
    /// tokenize then stopword removal.
    pub fn baseline_tokens(&self, text: &str) -> Vec<Token> {
        remove_stopwords(&tokenize(text), &self.stoplist)
    }

    pub fn lemma_tokens(&self, text: &str) -> Vec<Token> {
        lemmatize(&self.baseline_tokens(text), &self.lemmas)
    }

    /// Unigrams followed by 2-grams and 3-grams over the stopword-filtered stream.
    pub fn ngram_terms(&self, text: &str) -> Vec<String> {
        let tokens = self.baseline_tokens(text);
        let mut terms = surfaces(&tokens);
        terms.extend(extract_ngrams(&tokens, 2));
        terms.extend(extract_ngrams(&tokens, 3));
        terms
    }

    pub fn named_entities(&self, text: &str) -> Vec<String> {
        extract_named_entities(text, &self.gazetteer, &self.stoplist)
    }

    pub fn resolve_coreferences(&self, text: &str) -> String {
        resolve_coreferences(text, &self.gazetteer, &self.stoplist)
    }
}
