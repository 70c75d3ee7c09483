//! Paragraph corpus and question set, stored as one JSON object per line.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub doc_id: String,
    /// `docid:n`, with `n` the 1-based paragraph number inside the document.
    pub para_id: String,
    pub text: String,
}

impl Paragraph {
    pub fn new(doc_id: impl Into<String>, number: usize, text: impl Into<String>) -> Self {
        let doc_id = doc_id.into();
        Paragraph {
            para_id: format!("{doc_id}:{number}"),
            doc_id,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    paragraphs: Vec<Paragraph>,
    by_id: HashMap<String, usize>,
    token_count: Option<u64>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.paragraphs == other.paragraphs
    }
}

impl Corpus {
    /// Validates ids and texts; record order is kept.
    pub fn new(paragraphs: Vec<Paragraph>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(paragraphs.len());
        for (i, p) in paragraphs.iter().enumerate() {
            validate_paragraph(p).map_err(Error::InvalidArgument)?;
            if by_id.insert(p.para_id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "para_id",
                    id: p.para_id.clone(),
                });
            }
        }
        Ok(Corpus {
            paragraphs,
            by_id,
            token_count: None,
        })
    }

    pub fn paragraphs(&self) -> &[Paragraph] {
        &self.paragraphs
    }

    pub fn len(&self) -> usize {
        self.paragraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paragraphs.is_empty()
    }

    pub fn get(&self, para_id: &str) -> Option<&Paragraph> {
        self.by_id.get(para_id).map(|&i| &self.paragraphs[i])
    }

    /// Position of a paragraph in corpus order.
    pub fn ordinal(&self, para_id: &str) -> Option<usize> {
        self.by_id.get(para_id).copied()
    }

    pub fn contains(&self, para_id: &str) -> bool {
        self.by_id.contains_key(para_id)
    }

    /// Indexed-token total, known once an index has been built.
    pub fn token_count(&self) -> Option<u64> {
        self.token_count
    }

    pub fn set_token_count(&mut self, tokens: u64) {
        self.token_count = Some(tokens);
    }
}

fn validate_paragraph(p: &Paragraph) -> std::result::Result<(), String> {
    if p.para_id.is_empty() {
        return Err("empty para_id".into());
    }
    if p.text.trim().is_empty() {
        return Err(format!("paragraph \"{}\" has empty text", p.para_id));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub q_id: String,
    pub text: String,
    #[serde(rename = "gold")]
    pub gold_para_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuestionSet {
    questions: Vec<Question>,
}

impl QuestionSet {
    /// Checks id uniqueness, non-empty text and gold resolution against `corpus`.
    pub fn new(questions: Vec<Question>, corpus: &Corpus) -> Result<Self> {
        let mut seen = HashSet::new();
        for q in &questions {
            if q.q_id.is_empty() {
                return Err(Error::InvalidArgument("empty q_id".into()));
            }
            if !seen.insert(q.q_id.as_str()) {
                return Err(Error::DuplicateId {
                    kind: "q_id",
                    id: q.q_id.clone(),
                });
            }
            if q.text.trim().is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "question \"{}\" has empty text",
                    q.q_id
                )));
            }
            if q.gold_para_ids.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "question \"{}\" has no gold paragraph",
                    q.q_id
                )));
            }
            if let Some(missing) = q.gold_para_ids.iter().find(|g| !corpus.contains(g)) {
                return Err(Error::UnknownParagraph {
                    q_id: q.q_id.clone(),
                    para_id: missing.clone(),
                });
            }
        }
        Ok(QuestionSet { questions })
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }
}

fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push((i + 1, record));
    }
    if records.is_empty() {
        return Err(Error::Empty(format!("{} contains no records", path.display())));
    }
    Ok(records)
}

fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let records: Vec<(usize, Paragraph)> = read_records(path)?;
    let mut seen = HashSet::new();
    for (line, p) in &records {
        let malformed = |message: String| Error::Malformed {
            path: path.to_path_buf(),
            line: *line,
            message,
        };
        validate_paragraph(p).map_err(malformed)?;
        if !seen.insert(p.para_id.as_str()) {
            return Err(Error::DuplicateId {
                kind: "para_id",
                id: p.para_id.clone(),
            });
        }
    }
    Corpus::new(records.into_iter().map(|(_, p)| p).collect())
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    write_records(path.as_ref(), corpus.paragraphs())
}

pub fn load_questions(path: impl AsRef<Path>, corpus: &Corpus) -> Result<QuestionSet> {
    let records: Vec<(usize, Question)> = read_records(path.as_ref())?;
    QuestionSet::new(records.into_iter().map(|(_, q)| q).collect(), corpus)
}

pub fn save_questions(questions: &QuestionSet, path: impl AsRef<Path>) -> Result<()> {
    write_records(path.as_ref(), questions.questions())
}
