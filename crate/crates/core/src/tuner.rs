//! Weight tuning: MRR objective, simplex projection, DE/rand/1/bin and
//! k-fold cross-validation.
//!
//! Feature matrices do not depend on the weights, so they are computed and
//! normalized once; every objective evaluation only re-combines cached
//! Z-scores and locates the best-ranked gold paragraph.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::Question;
use crate::error::{Error, Result};
use crate::features::{FeatureId, N_FEATURES};
use crate::fusion::{linear_combination, FeatureMatrix, FeatureRow, RankedList, WeightVector};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, round_stream};

/// Reciprocal rank of the best-ranked gold paragraph, 0 when none is listed.
pub fn reciprocal_rank<T: Scalar>(ranked: &RankedList<T>, gold: &[String]) -> T {
    gold.iter()
        .filter_map(|g| ranked.rank_of(g))
        .min()
        .map_or(T::zero(), |r| T::one() / T::from_usize(r).unwrap())
}

/// Mean reciprocal rank over `questions`, matching lists by `q_id`.
pub fn mrr<T: Scalar>(ranked: &[RankedList<T>], questions: &[Question]) -> Result<T> {
    if questions.is_empty() {
        return Err(Error::Empty("MRR over an empty question set".into()));
    }
    let by_id: HashMap<&str, &RankedList<T>> = ranked.iter().map(|r| (r.q_id.as_str(), r)).collect();
    let mut total = T::zero();
    for q in questions {
        let list = by_id
            .get(q.q_id.as_str())
            .ok_or_else(|| Error::MissingRanking(q.q_id.clone()))?;
        total = total + reciprocal_rank(list, &q.gold_para_ids);
    }
    Ok(total / T::from_usize(questions.len()).unwrap())
}

/// Which weights the optimizer may move; the rest are held at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureMask([bool; N_FEATURES]);

impl FeatureMask {
    pub fn all() -> Self {
        FeatureMask([true; N_FEATURES])
    }

    pub fn only(features: &[FeatureId]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidArgument("mask must keep at least one feature".into()));
        }
        let mut mask = [false; N_FEATURES];
        for f in features {
            mask[f.index()] = true;
        }
        Ok(FeatureMask(mask))
    }

    pub fn is_active(&self, feature: FeatureId) -> bool {
        self.0[feature.index()]
    }

    pub fn active_count(&self) -> usize {
        self.0.iter().filter(|&&a| a).count()
    }

    fn active_indices(&self) -> Vec<usize> {
        (0..N_FEATURES).filter(|&j| self.0[j]).collect()
    }

    /// Uniform weights over the active features.
    pub fn uniform<T: Scalar>(&self) -> WeightVector<T> {
        let share = T::one() / T::from_usize(self.active_count()).unwrap();
        let w = self.0.map(|a| if a { share } else { T::zero() });
        WeightVector::new(w).expect("uniform weights lie on the simplex")
    }
}

impl Default for FeatureMask {
    fn default() -> Self {
        Self::all()
    }
}

/// Clamps negatives to zero and rescales to sum one; all-zero input maps to
/// the uniform vector.
pub fn project_to_simplex<T: Scalar>(v: &FeatureRow<T>) -> WeightVector<T> {
    project_masked(v, &FeatureMask::all())
}

/// As [`project_to_simplex`], with inactive coordinates forced to zero first.
pub fn project_masked<T: Scalar>(v: &FeatureRow<T>, mask: &FeatureMask) -> WeightVector<T> {
    let mut w = [T::zero(); N_FEATURES];
    for j in 0..N_FEATURES {
        if mask.0[j] && v[j] > T::zero() && v[j].is_finite() {
            w[j] = v[j];
        }
    }
    let sum: T = w.iter().copied().sum();
    if !sum.is_finite() || sum <= T::zero() {
        return mask.uniform();
    }
    // Already normalized up to rounding: leave untouched so projection is idempotent.
    let slack = T::epsilon() * T::from_f64_lossy(64.0);
    if (sum - T::one()).abs() > slack {
        for x in &mut w {
            *x = *x / sum;
        }
    }
    WeightVector::new(w).expect("projection lands on the simplex")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeConfig {
    pub population_size: usize,
    /// Differential weight `F`, in `(0, 2]`.
    pub differential_weight: f64,
    /// Binomial crossover rate `CR`, in `[0, 1]`.
    pub crossover_rate: f64,
    pub generations: usize,
    pub seed: u64,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig {
            population_size: 40,
            differential_weight: 0.7,
            crossover_rate: 0.9,
            generations: 200,
            seed: 0,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::InvalidArgument(
                "population size must be at least 4".into(),
            ));
        }
        if !(self.differential_weight > 0.0 && self.differential_weight <= 2.0) {
            return Err(Error::InvalidArgument("differential weight must lie in (0, 2]".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::InvalidArgument("crossover rate must lie in [0, 1]".into()));
        }
        if self.generations == 0 {
            return Err(Error::InvalidArgument("at least one generation is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult<T: Scalar> {
    pub best_weights: WeightVector<T>,
    pub best_objective: T,
    /// Best objective of the initial population, then after each generation.
    pub history: Vec<T>,
}

fn individual_rng(seed: u64, generation: usize, individual: usize, population: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((generation * population + individual) as u64);
    rng
}

fn best_index<T: Scalar>(fitness: &[T]) -> usize {
    let mut best = 0;
    for (i, f) in fitness.iter().enumerate() {
        if *f > fitness[best] {
            best = i;
        }
    }
    best
}

/// Maximizes `objective` over the weight simplex with DE/rand/1/bin.
///
/// Individual 0 of the initial population is the uniform vector; the others
/// are uniform draws on `[0, 1]^11` projected to the simplex. Each generation
/// builds every trial from the population as it stood at the start of the
/// generation, so trials can be evaluated in parallel. Every random draw for
/// individual `i` in generation `g` comes from its own ChaCha stream, which
/// keeps results independent of thread count.
pub fn differential_evolution<T, F>(objective: F, config: &DeConfig, mask: &FeatureMask) -> Result<TuningResult<T>>
where
    T: Scalar,
    F: Fn(&WeightVector<T>) -> T + Sync,
{
    config.validate()?;
    let np = config.population_size;
    let active = mask.active_indices();
    let f = T::from_f64_lossy(config.differential_weight);

    let mut population: Vec<WeightVector<T>> = (0..np)
        .map(|i| {
            if i == 0 {
                return mask.uniform();
            }
            let mut rng = individual_rng(config.seed, 0, i, np);
            let mut v = [T::zero(); N_FEATURES];
            for x in &mut v {
                *x = T::from_f64_lossy(rng.random::<f64>());
            }
            project_masked(&v, mask)
        })
        .collect();
    let mut fitness: Vec<T> = population.par_iter().map(&objective).collect();
    let mut history = vec![fitness[best_index(&fitness)]];

    for generation in 1..=config.generations {
        let trials: Vec<(WeightVector<T>, T)> = (0..np)
            .into_par_iter()
            .map(|i| {
                let mut rng = individual_rng(config.seed, generation, i, np);
                let mut pick = |taken: &[usize]| loop {
                    let r = rng.random_range(0..np);
                    if r != i && !taken.contains(&r) {
                        return r;
                    }
                };
                let a = pick(&[]);
                let b = pick(&[a]);
                let c = pick(&[a, b]);
                let forced = active[rng.random_range(0..active.len())];
                let (xa, xb, xc) = (
                    population[a].as_array(),
                    population[b].as_array(),
                    population[c].as_array(),
                );
                let x = population[i].as_array();
                let mut trial = *x;
                for j in 0..N_FEATURES {
                    if j == forced || rng.random::<f64>() < config.crossover_rate {
                        trial[j] = xa[j] + f * (xb[j] - xc[j]);
                    }
                }
                let trial = project_masked(&trial, mask);
                let score = objective(&trial);
                (trial, score)
            })
            .collect();
        for (i, (trial, score)) in trials.into_iter().enumerate() {
            if score >= fitness[i] {
                population[i] = trial;
                fitness[i] = score;
            }
        }
        history.push(fitness[best_index(&fitness)]);
    }

    let best = best_index(&fitness);
    Ok(TuningResult {
        best_weights: population[best],
        best_objective: fitness[best],
        history,
    })
}

/// A question's normalized feature matrix plus the positions of its gold
/// paragraphs among the candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedQuestion<T: Scalar> {
    matrix: FeatureMatrix<T>,
    gold: Vec<usize>,
}

impl<T: Scalar> CachedQuestion<T> {
    /// `matrix` must already be normalized.
    pub fn new(matrix: FeatureMatrix<T>, gold_para_ids: &[String]) -> Result<Self> {
        if matrix.normalized().is_none() {
            return Err(Error::InvalidArgument("feature matrix is not normalized".into()));
        }
        let mut gold: Vec<usize> = gold_para_ids.iter().filter_map(|g| matrix.position(g)).collect();
        gold.sort_unstable();
        gold.dedup();
        Ok(CachedQuestion { matrix, gold })
    }

    pub fn matrix(&self) -> &FeatureMatrix<T> {
        &self.matrix
    }

    /// Gold positions in the candidate list.
    pub fn gold(&self) -> &[usize] {
        &self.gold
    }

    /// Same value as ranking with `combine` and taking the reciprocal rank,
    /// without sorting.
    pub fn reciprocal_rank(&self, weights: &WeightVector<T>) -> T {
        let z = self.matrix.normalized().expect("checked at construction");
        if self.gold.is_empty() {
            return T::zero();
        }
        let scores: Vec<T> = z.iter().map(|row| linear_combination(row, weights)).collect();
        // best gold: highest score, lowest position on ties
        let mut g = self.gold[0];
        for &c in &self.gold[1..] {
            if scores[c] > scores[g] {
                g = c;
            }
        }
        let s = scores[g];
        let ahead = scores
            .iter()
            .enumerate()
            .filter(|&(i, &x)| x > s || (x == s && i < g))
            .count();
        T::one() / T::from_usize(ahead + 1).unwrap()
    }
}

/// Mean reciprocal rank of `questions` under `weights`.
pub fn mean_reciprocal_rank<T: Scalar>(questions: &[CachedQuestion<T>], weights: &WeightVector<T>) -> T {
    let total: T = questions.iter().map(|q| q.reciprocal_rank(weights)).sum();
    total / T::from_usize(questions.len().max(1)).unwrap()
}

/// Finds weights maximizing training MRR.
pub fn tune_weights<T: Scalar>(
    train: &[CachedQuestion<T>],
    config: &DeConfig,
    mask: &FeatureMask,
) -> Result<TuningResult<T>> {
    if train.is_empty() {
        return Err(Error::Empty("no training questions".into()));
    }
    differential_evolution(|w| mean_reciprocal_rank(train, w), config, mask)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport<T: Scalar> {
    /// 1-based round number; round `r` holds out fold `r`.
    pub round: usize,
    pub test_mrr: T,
    pub uniform_test_mrr: T,
    pub tuning: TuningResult<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation<T: Scalar> {
    pub rounds: Vec<RoundReport<T>>,
    /// Mean of the per-round test MRRs.
    pub mean_test_mrr: T,
    /// Same folds, uniform weights.
    pub mean_uniform_mrr: T,
    /// Arithmetic mean of the per-round best weights.
    pub average_weights: WeightVector<T>,
}

impl<T: Scalar> CrossValidation<T> {
    pub fn fold_weights(&self) -> Vec<WeightVector<T>> {
        self.rounds.iter().map(|r| r.tuning.best_weights).collect()
    }
}

/// `rounds`-fold cross-validation over contiguous, disjoint folds in question
/// order. Round `r` tunes on every other fold with the DE stream
/// `de/round-r` derived from `config.seed` and is scored on fold `r`.
pub fn cross_validate<T: Scalar>(
    questions: &[CachedQuestion<T>],
    rounds: usize,
    config: &DeConfig,
    mask: &FeatureMask,
) -> Result<CrossValidation<T>> {
    if rounds < 2 {
        return Err(Error::InvalidArgument("cross-validation needs at least 2 rounds".into()));
    }
    let fold = questions.len() / rounds;
    if fold == 0 {
        return Err(Error::InvalidArgument(format!(
            "{} questions cannot fill {rounds} folds",
            questions.len()
        )));
    }
    if !questions.len().is_multiple_of(rounds) {
        return Err(Error::InvalidArgument(format!(
            "{} questions do not divide into {rounds} equal folds",
            questions.len()
        )));
    }
    config.validate()?;
    let reports: Vec<RoundReport<T>> = (0..rounds)
        .into_par_iter()
        .map(|r| {
            let test = &questions[r * fold..(r + 1) * fold];
            let train: Vec<CachedQuestion<T>> = questions[..r * fold]
                .iter()
                .chain(&questions[(r + 1) * fold..])
                .cloned()
                .collect();
            let round_config = DeConfig {
                seed: derive_seed(config.seed, &round_stream(r + 1)),
                ..config.clone()
            };
            let tuning = tune_weights(&train, &round_config, mask)?;
            Ok(RoundReport {
                round: r + 1,
                test_mrr: mean_reciprocal_rank(test, &tuning.best_weights),
                uniform_test_mrr: mean_reciprocal_rank(test, &WeightVector::uniform()),
                tuning,
            })
        })
        .collect::<Result<_>>()?;
    let n = T::from_usize(rounds).unwrap();
    let mean_test_mrr = reports.iter().map(|r| r.test_mrr).sum::<T>() / n;
    let mean_uniform_mrr = reports.iter().map(|r| r.uniform_test_mrr).sum::<T>() / n;
    let mut avg = [T::zero(); N_FEATURES];
    for r in &reports {
        for (a, w) in avg.iter_mut().zip(r.tuning.best_weights.as_array()) {
            *a = *a + *w;
        }
    }
    for a in &mut avg {
        *a = *a / n;
    }
    Ok(CrossValidation {
        rounds: reports,
        mean_test_mrr,
        mean_uniform_mrr,
        average_weights: WeightVector::new(avg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{combine, zscore_normalize, RankedEntry};
    use proptest::prelude::*;

    fn list(q: &str, ids: &[&str]) -> RankedList<f64> {
        RankedList {
            q_id: q.into(),
            entries: ids
                .iter()
                .enumerate()
                .map(|(i, p)| RankedEntry {
                    para_id: p.to_string(),
                    score: -(i as f64),
                })
                .collect(),
        }
    }

    fn question(q: &str, gold: &[&str]) -> Question {
        Question {
            q_id: q.into(),
            text: "?".into(),
            gold_para_ids: gold.iter().map(|g| g.to_string()).collect(),
        }
    }

    #[test]
    fn mrr_examples() {
        let qs = [question("a", &["x"]), question("b", &["y"])];
        let first = [list("a", &["x", "z"]), list("b", &["y"])];
        assert_eq!(mrr(&first, &qs).unwrap(), 1.0);
        let none = [list("a", &["z"]), list("b", &["z"])];
        assert_eq!(mrr(&none, &qs).unwrap(), 0.0);
        let mixed = [list("a", &["x"]), list("b", &["p", "q", "r", "y"])];
        assert_eq!(mrr(&mixed, &qs).unwrap(), 0.625);
        assert!(matches!(mrr(&first[..1], &qs), Err(Error::MissingRanking(id)) if id == "b"));
        // multiple gold paragraphs: the best-ranked one counts
        let multi = [question("a", &["z", "w"])];
        assert_eq!(mrr(&[list("a", &["q", "w", "z"])], &multi).unwrap(), 0.5);
    }

    #[test]
    fn projection_examples() {
        let mut v = [0.0; N_FEATURES];
        v[0] = 2.0;
        assert_eq!(project_to_simplex(&v), WeightVector::one_hot(FeatureId::QBaseline));
        assert_eq!(project_to_simplex(&[-1.0; N_FEATURES]), WeightVector::uniform());
        let mut v = [0.0; N_FEATURES];
        v[0] = 1.0;
        v[1] = 1.0;
        let p = project_to_simplex(&v);
        assert_eq!(&p.as_array()[..3], &[0.5, 0.5, 0.0]);
        let mask = FeatureMask::only(&[FeatureId::QLemma, FeatureId::QSynonyms]).unwrap();
        let masked = project_masked(&[1.0; N_FEATURES], &mask);
        assert_eq!(masked.get(FeatureId::QLemma), 0.5);
        assert_eq!(masked.get(FeatureId::QBaseline), 0.0);
        assert_eq!(project_masked(&[0.0; N_FEATURES], &mask), mask.uniform());
        assert!(FeatureMask::only(&[]).is_err());
    }

    #[test]
    fn de_config_validation() {
        let bad = |c: DeConfig| differential_evolution(|_: &WeightVector<f64>| 0.0, &c, &FeatureMask::all()).is_err();
        assert!(bad(DeConfig { population_size: 3, ..DeConfig::default() }));
        assert!(bad(DeConfig { differential_weight: 0.0, ..DeConfig::default() }));
        assert!(bad(DeConfig { differential_weight: 2.5, ..DeConfig::default() }));
        assert!(bad(DeConfig { crossover_rate: 1.5, ..DeConfig::default() }));
        assert!(bad(DeConfig { generations: 0, ..DeConfig::default() }));
    }

    #[test]
    fn de_is_deterministic_and_monotone() {
        let target = [0.3, 0.0, 0.1, 0.0, 0.2, 0.0, 0.15, 0.05, 0.1, 0.05, 0.05];
        let objective = |w: &WeightVector<f64>| {
            -w.as_array().iter().zip(&target).map(|(a, b)| (a - b).abs()).sum::<f64>()
        };
        let cfg = DeConfig {
            generations: 60,
            seed: 17,
            ..DeConfig::default()
        };
        let a = differential_evolution(objective, &cfg, &FeatureMask::all()).unwrap();
        let b = differential_evolution(objective, &cfg, &FeatureMask::all()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 61);
        assert!(a.history.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*a.history.last().unwrap(), a.best_objective);
        let c = differential_evolution(objective, &DeConfig { seed: 18, ..cfg }, &FeatureMask::all()).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn de_works_in_single_precision() {
        let objective = |w: &WeightVector<f32>| w.get(FeatureId::EvLda10);
        let cfg = DeConfig {
            generations: 80,
            seed: 5,
            ..DeConfig::default()
        };
        let r = differential_evolution(objective, &cfg, &FeatureMask::all()).unwrap();
        assert!(r.best_objective > 0.95, "{}", r.best_objective);
    }

    fn cached(rows: Vec<FeatureRow<f64>>, gold: &[&str]) -> CachedQuestion<f64> {
        let ids = (0..rows.len()).map(|i| format!("p{i:03}")).collect();
        let m = zscore_normalize(&FeatureMatrix::new("q", ids, rows).unwrap());
        let gold: Vec<String> = gold.iter().map(|g| g.to_string()).collect();
        CachedQuestion::new(m, &gold).unwrap()
    }

    #[test]
    fn cross_validation_shape_and_errors() {
        let mut row_hi = [0.0; N_FEATURES];
        row_hi[1] = 1.0;
        let row_lo = [0.0; N_FEATURES];
        let qs: Vec<_> = (0..20).map(|_| cached(vec![row_lo, row_hi], &["p001"])).collect();
        let cfg = DeConfig {
            generations: 5,
            seed: 3,
            ..DeConfig::default()
        };
        let cv = cross_validate(&qs, 4, &cfg, &FeatureMask::all()).unwrap();
        assert_eq!(cv.rounds.len(), 4);
        assert_eq!(cv.fold_weights().len(), 4);
        assert_eq!(cv.mean_test_mrr, 1.0);
        let sum: f64 = cv.average_weights.as_array().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(cross_validate(&qs, 1, &cfg, &FeatureMask::all()).is_err());
        assert!(cross_validate(&qs, 3, &cfg, &FeatureMask::all()).is_err());
        assert!(cross_validate(&qs[..3], 4, &cfg, &FeatureMask::all()).is_err());
        assert!(tune_weights::<f64>(&[], &cfg, &FeatureMask::all()).is_err());
    }

    #[test]
    fn identical_questions_give_identical_round_weights() {
        let rows = vec![
            [0.1, 0.0, 0.3, 0.0, 0.0, 0.2, 2.0, 1.0, 0.0, 0.5, 0.25],
            [0.0, 0.7, 0.0, 0.2, 0.0, 0.0, 1.0, 0.0, 0.0, 0.9, 0.75],
            [0.4, 0.1, 0.0, 0.0, 0.3, 0.1, 0.0, 2.0, 1.0, 0.1, 0.5],
        ];
        let qs: Vec<_> = (0..10).map(|_| cached(rows.clone(), &["p002"])).collect();
        let cfg = DeConfig {
            generations: 10,
            seed: 1,
            ..DeConfig::default()
        };
        let cv = cross_validate(&qs, 5, &cfg, &FeatureMask::all()).unwrap();
        // train and test folds hold the same matrix
        for r in &cv.rounds {
            assert_eq!(r.test_mrr, r.tuning.best_objective);
        }
        let mean: f64 = cv.rounds.iter().map(|r| r.test_mrr).sum::<f64>() / 5.0;
        assert_eq!(cv.mean_test_mrr, mean);
    }

    fn row_strategy() -> impl Strategy<Value = FeatureRow<f64>> {
        prop::array::uniform11(prop_oneof![Just(0.0), 0.0..3.0f64])
    }

    proptest! {
        #[test]
        fn projection_is_valid_and_idempotent(v in prop::array::uniform11(-2.0..2.0f64)) {
            let p = project_to_simplex(&v);
            prop_assert!(WeightVector::new(*p.as_array()).is_ok());
            prop_assert_eq!(project_to_simplex(p.as_array()), p);
        }

        #[test]
        fn fast_reciprocal_rank_matches_combine(
            rows in prop::collection::vec(row_strategy(), 1..12),
            gold_mask in prop::collection::vec(any::<bool>(), 12),
            w in prop::array::uniform11(0.0..1.0f64),
        ) {
            let gold: Vec<String> = (0..rows.len())
                .filter(|&i| gold_mask[i])
                .map(|i| format!("p{i:03}"))
                .collect();
            let refs: Vec<&str> = gold.iter().map(String::as_str).collect();
            let q = cached(rows, &refs);
            let w = project_to_simplex(&w);
            let ranked = combine(q.matrix(), &w).unwrap();
            prop_assert_eq!(q.reciprocal_rank(&w), reciprocal_rank(&ranked, &gold));
        }
    }
}
