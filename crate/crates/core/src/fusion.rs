//! Candidate pooling, Z-score normalization and the weighted linear combination.
//!
//! For one question the candidate pool is the union of the top-k hits of
//! all six queries. A query feature scores a candidate with the confidence it
//! returned, or zero when that query did not return it. Each column is then
//! Z-scored over the pool (population standard deviation; constant columns
//! become zero) and the final score is `sum_j w_j * z_j`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::features::{FeatureId, ParagraphProfiles, QueryBundle, TextProfile, N_FEATURES, N_QUERY_FEATURES};
use crate::index::{score_query, IndexSet};
use crate::scalar::Scalar;

pub type FeatureRow<T> = [T; N_FEATURES];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T: Scalar> {
    q_id: String,
    candidates: Vec<String>,
    raw: Vec<FeatureRow<T>>,
    normalized: Option<Vec<FeatureRow<T>>>,
}

impl<T: Scalar> FeatureMatrix<T> {
    /// Candidates must be strictly ascending; query columns non-negative.
    pub fn new(q_id: impl Into<String>, candidates: Vec<String>, raw: Vec<FeatureRow<T>>) -> Result<Self> {
        if candidates.len() != raw.len() {
            return Err(Error::DimensionMismatch {
                left: candidates.len(),
                right: raw.len(),
            });
        }
        if candidates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("candidates must be strictly ascending".into()));
        }
        for row in &raw {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite feature score".into()));
            }
            if row[..N_QUERY_FEATURES].iter().any(|v| *v < T::zero()) {
                return Err(Error::InvalidArgument("negative query confidence".into()));
            }
        }
        Ok(FeatureMatrix {
            q_id: q_id.into(),
            candidates,
            raw,
            normalized: None,
        })
    }

    pub fn empty(q_id: impl Into<String>) -> Self {
        FeatureMatrix {
            q_id: q_id.into(),
            candidates: Vec::new(),
            raw: Vec::new(),
            normalized: Some(Vec::new()),
        }
    }

    pub fn q_id(&self) -> &str {
        &self.q_id
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn raw(&self) -> &[FeatureRow<T>] {
        &self.raw
    }

    pub fn normalized(&self) -> Option<&[FeatureRow<T>]> {
        self.normalized.as_deref()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn position(&self, para_id: &str) -> Option<usize> {
        self.candidates
            .binary_search_by(|c| c.as_str().cmp(para_id))
            .ok()
    }

    /// Same matrix in another precision; normalization is recomputed.
    pub fn cast<U: Scalar>(&self) -> FeatureMatrix<U> {
        let raw = self
            .raw
            .iter()
            .map(|row| row.map(|v| U::from_f64_lossy(v.to_f64_lossy())))
            .collect();
        let m = FeatureMatrix {
            q_id: self.q_id.clone(),
            candidates: self.candidates.clone(),
            raw,
            normalized: None,
        };
        if self.normalized.is_some() {
            zscore_normalize(&m)
        } else {
            m
        }
    }

    /// Combined score of each candidate, in candidate order.
    pub fn scores(&self, weights: &WeightVector<T>) -> Result<Vec<T>> {
        let z = self
            .normalized
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("feature matrix is not normalized".into()))?;
        Ok(z.iter().map(|row| linear_combination(row, weights)).collect())
    }
}

#[inline]
pub(crate) fn linear_combination<T: Scalar>(row: &FeatureRow<T>, weights: &WeightVector<T>) -> T {
    let mut s = T::zero();
    for (x, w) in row.iter().zip(&weights.0) {
        s = s + *w * *x;
    }
    s
}

/// Per-column Z-scores over the candidate pool.
///
/// Population standard deviation. A column whose values are all identical
/// (including any single-candidate pool) maps to zeros.
pub fn zscore_normalize<T: Scalar>(matrix: &FeatureMatrix<T>) -> FeatureMatrix<T> {
    let n = matrix.raw.len();
    let mut z = vec![[T::zero(); N_FEATURES]; n];
    if n > 0 {
        let count = T::from_usize(n).expect("pool size is representable");
        for j in 0..N_FEATURES {
            let first = matrix.raw[0][j];
            if matrix.raw.iter().all(|row| row[j] == first) {
                continue;
            }
            let mean = matrix.raw.iter().map(|row| row[j]).sum::<T>() / count;
            let var = matrix
                .raw
                .iter()
                .map(|row| {
                    let d = row[j] - mean;
                    d * d
                })
                .sum::<T>()
                / count;
            let std = var.sqrt();
            if std <= T::zero() {
                continue;
            }
            for (out, row) in z.iter_mut().zip(&matrix.raw) {
                out[j] = (row[j] - mean) / std;
            }
        }
    }
    FeatureMatrix {
        normalized: Some(z),
        ..matrix.clone()
    }
}

/// Non-negative fusion weights summing to one, in [`FeatureId::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightVector<T: Scalar>(FeatureRow<T>);

impl<T: Scalar> WeightVector<T> {
    pub fn new(weights: FeatureRow<T>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < T::zero()) {
            return Err(Error::InvalidWeights(format!("entry {w} is negative or not finite")));
        }
        let sum: T = weights.iter().copied().sum();
        if (sum - T::one()).abs() > T::simplex_tolerance() {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(WeightVector(weights))
    }

    pub fn uniform() -> Self {
        let w = T::one() / T::from_usize(N_FEATURES).unwrap();
        WeightVector([w; N_FEATURES])
    }

    pub fn one_hot(feature: FeatureId) -> Self {
        let mut w = [T::zero(); N_FEATURES];
        w[feature.index()] = T::one();
        WeightVector(w)
    }

    pub fn get(&self, feature: FeatureId) -> T {
        self.0[feature.index()]
    }

    pub fn as_array(&self) -> &FeatureRow<T> {
        &self.0
    }

    /// `feature_id<TAB>weight` lines in feature order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (f, w) in FeatureId::ALL.iter().zip(&self.0) {
            writeln!(out, "{f}\t{w}").unwrap();
        }
        out
    }

    /// Parses a weight file. Every feature must appear exactly once; blank
    /// lines, `#` comments and a `feature<TAB>weight` header are skipped.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut seen: BTreeMap<FeatureId, T> = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "feature\tweight" {
                continue;
            }
            let (id, value) = line
                .split_once('\t')
                .ok_or_else(|| Error::InvalidWeights(format!("malformed line \"{line}\"")))?;
            let feature: FeatureId = id.trim().parse()?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidWeights(format!("bad weight \"{value}\" for {feature}")))?;
            if seen.insert(feature, T::from_f64_lossy(value)).is_some() {
                return Err(Error::InvalidWeights(format!("{feature} listed twice")));
            }
        }
        let mut weights = [T::zero(); N_FEATURES];
        for f in FeatureId::ALL {
            weights[f.index()] = *seen
                .get(&f)
                .ok_or_else(|| Error::InvalidWeights(format!("missing weight for {f}")))?;
        }
        Self::new(weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry<T: Scalar> {
    pub para_id: String,
    pub score: T,
}

/// Candidates by descending score, ties by ascending `para_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList<T: Scalar> {
    pub q_id: String,
    pub entries: Vec<RankedEntry<T>>,
}

impl<T: Scalar> RankedList<T> {
    /// 1-based rank of `para_id`, if present.
    pub fn rank_of(&self, para_id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.para_id == para_id).map(|i| i + 1)
    }

    pub fn para_ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.para_id.as_str()).collect()
    }
}

/// Ranks the candidates of a normalized matrix by `sum_j w_j * z_j`.
pub fn combine<T: Scalar>(matrix: &FeatureMatrix<T>, weights: &WeightVector<T>) -> Result<RankedList<T>> {
    let scores = matrix.scores(weights)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // candidates are ascending, so index order is para_id order
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(RankedList {
        q_id: matrix.q_id.clone(),
        entries: order
            .into_iter()
            .map(|i| RankedEntry {
                para_id: matrix.candidates[i].clone(),
                score: scores[i],
            })
            .collect(),
    })
}

/// Raw feature matrix for one question: the union of the top-`k` hits of
/// every query, zero-filled where a query missed a candidate, plus all five
/// evaluator scores.
pub fn collect_candidates(
    q_id: &str,
    question: &TextProfile,
    bundle: &QueryBundle,
    indices: &IndexSet,
    corpus: &Corpus,
    paragraphs: &ParagraphProfiles,
    k: usize,
) -> Result<FeatureMatrix<f64>> {
    let mut query_scores: Vec<BTreeMap<String, f64>> = Vec::with_capacity(N_QUERY_FEATURES);
    for (feature, query) in bundle.iter() {
        let index = indices.get(feature.target().expect("bundle holds query features"));
        let hits = score_query(index, query, k)?;
        query_scores.push(hits.into_iter().map(|h| (h.para_id, h.confidence)).collect());
    }
    let pool: BTreeSet<&String> = query_scores.iter().flat_map(|m| m.keys()).collect();
    let mut candidates = Vec::with_capacity(pool.len());
    let mut raw = Vec::with_capacity(pool.len());
    for para_id in pool {
        let mut row = [0.0; N_FEATURES];
        for (j, scores) in query_scores.iter().enumerate() {
            row[j] = scores.get(para_id).copied().unwrap_or(0.0);
        }
        let ordinal = corpus
            .ordinal(para_id)
            .ok_or_else(|| Error::InvalidArgument(format!("index refers to unknown paragraph {para_id}")))?;
        row[N_QUERY_FEATURES..].copy_from_slice(&question.evaluate(paragraphs.get(ordinal)));
        candidates.push(para_id.clone());
        raw.push(row);
    }
    FeatureMatrix::new(q_id, candidates, raw)
}

/// Raw-score dump: header `q_id, para_id, <feature ids...>`, one row per
/// candidate, tab-separated. Questions with an empty pool have no rows.
pub fn write_matrices<T: Scalar>(matrices: &[FeatureMatrix<T>]) -> String {
    let mut out = String::from("q_id\tpara_id");
    for f in FeatureId::ALL {
        write!(out, "\t{f}").unwrap();
    }
    out.push('\n');
    for m in matrices {
        for (c, row) in m.candidates.iter().zip(&m.raw) {
            write!(out, "{}\t{c}", m.q_id).unwrap();
            for v in row {
                write!(out, "\t{v}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// Parses [`write_matrices`] output back into normalized matrices.
pub fn read_matrices<T: Scalar>(text: &str) -> Result<Vec<FeatureMatrix<T>>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Empty("feature matrix dump has no header".into()))?
        .split('\t')
        .collect();
    let expected: Vec<&str> = ["q_id", "para_id"]
        .into_iter()
        .chain(FeatureId::ALL.iter().map(|f| f.as_str()))
        .collect();
    if header != expected {
        return Err(Error::InvalidArgument("unexpected feature matrix header".into()));
    }
    let mut grouped: Vec<(String, Vec<String>, Vec<FeatureRow<T>>)> = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != expected.len() {
            return Err(Error::InvalidArgument(format!("bad row \"{line}\"")));
        }
        let mut row = [T::zero(); N_FEATURES];
        for (slot, v) in row.iter_mut().zip(&cols[2..]) {
            let v: f64 = v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad score \"{v}\"")))?;
            *slot = T::from_f64_lossy(v);
        }
        match grouped.last_mut() {
            Some((q, cands, rows)) if q == cols[0] => {
                cands.push(cols[1].to_string());
                rows.push(row);
            }
            _ => grouped.push((cols[0].to_string(), vec![cols[1].to_string()], vec![row])),
        }
    }
    grouped
        .into_iter()
        .map(|(q, c, r)| FeatureMatrix::new(q, c, r).map(|m| zscore_normalize(&m)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[FeatureRow<f64>]) -> FeatureMatrix<f64> {
        let ids = (0..rows.len()).map(|i| format!("p{i:03}")).collect();
        FeatureMatrix::new("q", ids, rows.to_vec()).unwrap()
    }

    fn column(values: &[f64], j: usize) -> FeatureMatrix<f64> {
        let rows: Vec<FeatureRow<f64>> = values
            .iter()
            .map(|&v| {
                let mut r = [0.0; N_FEATURES];
                r[j] = v;
                r
            })
            .collect();
        matrix(&rows)
    }

    #[test]
    fn zscore_examples() {
        let z = zscore_normalize(&column(&[1.0, 2.0, 3.0], 6));
        let got: Vec<f64> = z.normalized().unwrap().iter().map(|r| r[6]).collect();
        let s = 1.5f64.sqrt();
        for (g, w) in got.iter().zip([-s, 0.0, s]) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
        assert!((s - 1.2247).abs() < 1e-4);

        let z = zscore_normalize(&column(&[5.0, 5.0, 5.0], 6));
        assert!(z.normalized().unwrap().iter().all(|r| r.iter().all(|&v| v == 0.0)));

        let z = zscore_normalize(&column(&[0.1 + 0.2, 0.2 + 0.1, 0.30000000000000004], 2));
        assert!(z.normalized().unwrap().iter().all(|r| r[2] == 0.0));

        let single = zscore_normalize(&matrix(&[[3.0; N_FEATURES]]));
        assert_eq!(single.normalized().unwrap(), &[[0.0; N_FEATURES]]);
    }

    #[test]
    fn matrix_validation() {
        let row = [0.0; N_FEATURES];
        assert!(FeatureMatrix::new("q", vec!["b".into(), "a".into()], vec![row, row]).is_err());
        assert!(FeatureMatrix::new("q", vec!["a".into()], vec![row, row]).is_err());
        let mut neg = row;
        neg[0] = -1.0;
        assert!(FeatureMatrix::new("q", vec!["a".into()], vec![neg]).is_err());
        let mut ev_neg = row;
        ev_neg[6] = -1.0;
        assert!(FeatureMatrix::new("q", vec!["a".into()], vec![ev_neg]).is_ok());
        let unnormalized = matrix(&[row]);
        assert!(combine(&unnormalized, &WeightVector::uniform()).is_err());
    }

    #[test]
    fn weight_vector_rules() {
        assert!(WeightVector::<f64>::new([0.1; N_FEATURES]).is_err());
        let mut w = [0.0; N_FEATURES];
        w[0] = 1.2;
        w[1] = -0.2;
        assert!(WeightVector::<f64>::new(w).is_err());
        let u = WeightVector::<f64>::uniform();
        assert!((u.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let parsed = WeightVector::<f64>::from_tsv(&u.to_tsv()).unwrap();
        assert_eq!(parsed, u);
        let with_header = format!("feature\tweight\n# tuned\n{}", u.to_tsv());
        assert_eq!(WeightVector::<f64>::from_tsv(&with_header).unwrap(), u);
        let missing: String = u.to_tsv().lines().skip(1).map(|l| format!("{l}\n")).collect();
        assert!(WeightVector::<f64>::from_tsv(&missing).is_err());
        let bad_sum = u.to_tsv().replace("q_baseline\t0.09090909090909091", "q_baseline\t0.5");
        assert!(matches!(WeightVector::<f64>::from_tsv(&bad_sum), Err(Error::InvalidWeights(_))));
        let f32_parsed = WeightVector::<f32>::from_tsv(&u.to_tsv()).unwrap();
        assert_eq!(f32_parsed, WeightVector::<f32>::uniform());
    }

    #[test]
    fn one_hot_ranks_by_column() {
        let m = zscore_normalize(&column(&[0.2, 0.9, 0.5, 0.9], 3));
        let r = combine(&m, &WeightVector::one_hot(FeatureId::QNGramsCoref)).unwrap();
        assert_eq!(r.para_ids(), ["p001", "p003", "p002", "p000"]);
        assert_eq!(r.rank_of("p002"), Some(3));
    }

    #[test]
    fn zero_matrix_ranks_by_id() {
        let m = zscore_normalize(&matrix(&[[0.0; N_FEATURES]; 3]));
        let r = combine(&m, &WeightVector::uniform()).unwrap();
        assert_eq!(r.para_ids(), ["p000", "p001", "p002"]);
        assert!(r.entries.iter().all(|e| e.score == 0.0));
    }

    #[test]
    fn pooled_matrix_dump_round_trip() {
        let m = zscore_normalize(&matrix(&[
            [0.1, 0.0, 0.3, 0.0, 0.0, 1.0 / 3.0, 2.0, 1.0, 0.0, 0.5, 0.25],
            [0.0, 0.7, 0.0, 0.2, 0.0, 0.0, 1.0, 0.0, 0.0, 0.9, 0.75],
        ]));
        let text = write_matrices(&[m.clone(), FeatureMatrix::empty("q_empty")]);
        assert!(text.starts_with("q_id\tpara_id\tq_baseline\t"));
        let back = read_matrices::<f64>(&text).unwrap();
        assert_eq!(back, vec![m]);
    }
}
