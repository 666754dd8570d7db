//! Buyer data utility: exact Shapley values of seller shards for one buyer.
//!
//! Every coalition of shards is evaluated once against an [`EvalOracle`]
//! (memoized by bitmask), then each shard's value is the weighted sum of its
//! marginal contributions. [`shapley_permutation_oracle`] recomputes the same
//! quantity by brute force over all orderings and is used to check the fast
//! path.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest shard count for subset enumeration.
pub const MAX_EXACT_SHARDS: usize = 20;
/// Largest shard count for the n! permutation check.
pub const MAX_PERMUTATION_SHARDS: usize = 8;

/// One seller's dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataShard {
    pub seller_id: String,
    pub per_category_counts: BTreeMap<String, usize>,
    pub doc_ids: Vec<String>,
}

impl DataShard {
    pub fn new(
        seller_id: impl Into<String>,
        per_category_counts: BTreeMap<String, usize>,
        doc_ids: Vec<String>,
    ) -> Result<Self> {
        let total: usize = per_category_counts.values().sum();
        if total != doc_ids.len() {
            return Err(Error::validation(format!(
                "shard has {} documents but category counts sum to {total}",
                doc_ids.len()
            )));
        }
        Ok(Self {
            seller_id: seller_id.into(),
            per_category_counts,
            doc_ids,
        })
    }

    /// Shard with placeholder document ids, for count-only oracles.
    pub fn from_counts<'a>(
        seller_id: impl Into<String>,
        counts: impl IntoIterator<Item = (&'a str, usize)>,
    ) -> Self {
        let seller_id = seller_id.into();
        let per_category_counts: BTreeMap<String, usize> = counts
            .into_iter()
            .filter(|(_, c)| *c > 0)
            .map(|(k, c)| (k.to_string(), c))
            .collect();
        let doc_ids = per_category_counts
            .iter()
            .flat_map(|(cat, &c)| (0..c).map(move |i| format!("{cat}/{i:05}")))
            .map(|id| format!("{seller_id}:{id}"))
            .collect();
        Self {
            seller_id,
            per_category_counts,
            doc_ids,
        }
    }

    pub fn count(&self, category: &str) -> usize {
        self.per_category_counts.get(category).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }
}

/// A buyer's requirement: the categories it needs and its held-out test docs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub buyer_id: String,
    pub required_categories: BTreeSet<String>,
    pub test_doc_ids: Vec<String>,
}

impl TestSpec {
    pub fn new(
        buyer_id: impl Into<String>,
        required_categories: BTreeSet<String>,
        test_doc_ids: Vec<String>,
    ) -> Result<Self> {
        if required_categories.is_empty() {
            return Err(Error::validation("test spec needs at least one required category"));
        }
        Ok(Self {
            buyer_id: buyer_id.into(),
            required_categories,
            test_doc_ids,
        })
    }

    /// Spec without test documents, for oracles that only look at counts.
    pub fn for_categories<'a>(
        buyer_id: impl Into<String>,
        categories: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        Self::new(
            buyer_id,
            categories.into_iter().map(str::to_string).collect(),
            Vec::new(),
        )
    }

    /// Fails if any test document also sits in a training shard.
    pub fn check_disjoint(&self, shards: &[DataShard]) -> Result<()> {
        let test: BTreeSet<&str> = self.test_doc_ids.iter().map(String::as_str).collect();
        for shard in shards {
            if let Some(id) = shard.doc_ids.iter().find(|id| test.contains(id.as_str())) {
                return Err(Error::validation(format!(
                    "test document `{id}` of buyer {} is also in shard {}",
                    self.buyer_id, shard.seller_id
                )));
            }
        }
        Ok(())
    }
}

/// Learner a buyer wants its data valued for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    LinearSvm { epochs: usize, learning_rate: f64, l2: f64 },
    LogisticRegression { epochs: usize, learning_rate: f64, l2: f64 },
    Knn { k: usize },
    SyntheticCoverage { diminishing: f64 },
}

impl ModelKind {
    pub fn linear_svm() -> Self {
        ModelKind::LinearSvm {
            epochs: 150,
            learning_rate: 0.5,
            l2: 1e-4,
        }
    }

    pub fn logistic_regression() -> Self {
        ModelKind::LogisticRegression {
            epochs: 150,
            learning_rate: 1.0,
            l2: 1e-4,
        }
    }

    pub fn knn() -> Self {
        ModelKind::Knn { k: 5 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelKind::LinearSvm { epochs, learning_rate, l2 }
            | ModelKind::LogisticRegression { epochs, learning_rate, l2 } => {
                if epochs == 0 || learning_rate.is_nan() || learning_rate <= 0.0 || l2.is_nan() || l2 < 0.0 {
                    return Err(Error::validation(
                        "linear models need epochs >= 1, learning_rate > 0, l2 >= 0",
                    ));
                }
            }
            ModelKind::Knn { k } => {
                if k == 0 {
                    return Err(Error::validation("KNN needs k >= 1"));
                }
            }
            ModelKind::SyntheticCoverage { diminishing } => {
                if !(0.0..=1.0).contains(&diminishing) {
                    return Err(Error::validation("diminishing factor must be in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::LinearSvm { .. } => "linear_svm",
            ModelKind::LogisticRegression { .. } => "logistic_regression",
            ModelKind::Knn { .. } => "knn",
            ModelKind::SyntheticCoverage { .. } => "synthetic_coverage",
        }
    }
}

/// Coalition value `V(U, D_t, A)` in `[0, 1]`.
///
/// Implementations must be deterministic; `shards` may be empty.
pub trait EvalOracle: Sync {
    fn evaluate(&self, shards: &[&DataShard], spec: &TestSpec, model: &ModelKind) -> Result<f64>;
}

impl<O: EvalOracle + ?Sized> EvalOracle for &O {
    fn evaluate(&self, shards: &[&DataShard], spec: &TestSpec, model: &ModelKind) -> Result<f64> {
        (**self).evaluate(shards, spec, model)
    }
}

/// Wraps an oracle and counts `evaluate` calls.
pub struct CountingOracle<O> {
    inner: O,
    calls: AtomicUsize,
}

impl<O: EvalOracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }
}

impl<O: EvalOracle> EvalOracle for CountingOracle<O> {
    fn evaluate(&self, shards: &[&DataShard], spec: &TestSpec, model: &ModelKind) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.evaluate(shards, spec, model)
    }
}

/// Saturating category-coverage value:
/// `V(U) = Σ_{c ∈ required} (1 − d^{count_c(U)}) / |required|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCoverage {
    required: BTreeSet<String>,
    diminishing: f64,
}

impl SyntheticCoverage {
    pub fn value(&self, shards: &[&DataShard]) -> f64 {
        coverage_value(&self.required, self.diminishing, shards)
    }
}

pub fn synthetic_coverage_oracle(
    required_categories: BTreeSet<String>,
    diminishing: f64,
) -> Result<SyntheticCoverage> {
    if required_categories.is_empty() {
        return Err(Error::validation("coverage oracle needs a required category"));
    }
    if !(0.0..=1.0).contains(&diminishing) {
        return Err(Error::validation(format!(
            "diminishing factor {diminishing} must be in [0, 1]"
        )));
    }
    Ok(SyntheticCoverage {
        required: required_categories,
        diminishing,
    })
}

impl EvalOracle for SyntheticCoverage {
    fn evaluate(&self, shards: &[&DataShard], _spec: &TestSpec, _model: &ModelKind) -> Result<f64> {
        Ok(self.value(shards))
    }
}

pub(crate) fn coverage_value(required: &BTreeSet<String>, diminishing: f64, shards: &[&DataShard]) -> f64 {
    let total: f64 = required
        .iter()
        .map(|c| {
            let count: usize = shards.iter().map(|s| s.count(c)).sum();
            1.0 - diminishing.powi(count.min(i32::MAX as usize) as i32)
        })
        .sum();
    total / required.len() as f64
}

fn coalition(shards: &[DataShard], mask: u64) -> Vec<&DataShard> {
    shards
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, s)| s)
        .collect()
}

/// Evaluates `V` on all `2^n` coalitions, indexed by bitmask.
pub fn coalition_values(
    shards: &[DataShard],
    oracle: &dyn EvalOracle,
    spec: &TestSpec,
    model: &ModelKind,
) -> Result<Vec<f64>> {
    let n = shards.len();
    if n > MAX_EXACT_SHARDS {
        return Err(Error::Unsupported(format!(
            "{n} shards exceed exact Shapley enumeration (max {MAX_EXACT_SHARDS}); \
             merge shards or value them with the synthetic coverage oracle"
        )));
    }
    model.validate()?;
    (0..1u64 << n)
        .into_par_iter()
        .map(|mask| oracle.evaluate(&coalition(shards, mask), spec, model))
        .collect()
}

/// Exact Shapley values:
/// `φ_i = Σ_{U ⊆ D∖{i}} |U|!(n−|U|−1)!/n! · (V(U ∪ {i}) − V(U))`.
pub fn shapley_exact(
    shards: &[DataShard],
    oracle: &dyn EvalOracle,
    spec: &TestSpec,
    model: &ModelKind,
) -> Result<Vec<f64>> {
    let values = coalition_values(shards, oracle, spec, model)?;
    Ok(shapley_from_values(shards.len(), &values))
}

/// Shapley values from a full table of coalition values.
pub fn shapley_from_values(n: usize, values: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), 1 << n, "need one value per coalition");
    // |U|!(n−|U|−1)!/n! = 1 / (n · C(n−1, |U|))
    let weights: Vec<f64> = (0..n)
        .map(|s| 1.0 / (n as f64 * binomial(n - 1, s)))
        .collect();
    (0..n)
        .map(|i| {
            let bit = 1u64 << i;
            (0..1u64 << n)
                .filter(|mask| mask & bit == 0)
                .map(|mask| {
                    let size = mask.count_ones() as usize;
                    weights[size] * (values[(mask | bit) as usize] - values[mask as usize])
                })
                .sum()
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// Brute-force Shapley values averaged over all `n!` orderings.
pub fn shapley_permutation_oracle(
    shards: &[DataShard],
    oracle: &dyn EvalOracle,
    spec: &TestSpec,
    model: &ModelKind,
) -> Result<Vec<f64>> {
    let n = shards.len();
    if n > MAX_PERMUTATION_SHARDS {
        return Err(Error::Unsupported(format!(
            "{n} shards exceed the permutation check (max {MAX_PERMUTATION_SHARDS})"
        )));
    }
    model.validate()?;
    let mut memo: HashMap<u64, f64> = HashMap::new();
    let mut value = |mask: u64| -> Result<f64> {
        if let Some(v) = memo.get(&mask) {
            return Ok(*v);
        }
        let v = oracle.evaluate(&coalition(shards, mask), spec, model)?;
        memo.insert(mask, v);
        Ok(v)
    };

    let mut totals = vec![0.0; n];
    let mut orderings = 0u64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut result = Ok(());
    for_each_permutation(&mut order, 0, &mut |perm| {
        if result.is_err() {
            return;
        }
        let mut mask = 0u64;
        let mut prev = match value(0) {
            Ok(v) => v,
            Err(e) => {
                result = Err(e);
                return;
            }
        };
        for &i in perm {
            mask |= 1 << i;
            match value(mask) {
                Ok(v) => {
                    totals[i] += v - prev;
                    prev = v;
                }
                Err(e) => {
                    result = Err(e);
                    return;
                }
            }
        }
        orderings += 1;
    });
    result?;
    Ok(totals.into_iter().map(|t| t / orderings as f64).collect())
}

fn for_each_permutation(items: &mut [usize], start: usize, f: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        f(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        for_each_permutation(items, start + 1, f);
        items.swap(start, i);
    }
}

/// Clamps negatives to zero and scales to unit sum; an all-zero row stays zero.
pub fn normalize_utilities(raw: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let sum: f64 = clamped.iter().sum();
    if sum > 0.0 {
        clamped.iter().map(|v| v / sum).collect()
    } else {
        vec![0.0; raw.len()]
    }
}

/// Normalized utility `ξ_i` of every shard for one buyer.
pub fn buyer_utility(
    shards: &[DataShard],
    oracle: &dyn EvalOracle,
    spec: &TestSpec,
    model: &ModelKind,
) -> Result<Vec<f64>> {
    Ok(normalize_utilities(&shapley_exact(shards, oracle, spec, model)?))
}

/// `ξ[buyer][seller]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityMatrix {
    pub buyer_ids: Vec<String>,
    pub seller_ids: Vec<String>,
    pub xi: Vec<Vec<f64>>,
    pub normalized: bool,
}

impl UtilityMatrix {
    pub fn new(
        buyer_ids: Vec<String>,
        seller_ids: Vec<String>,
        xi: Vec<Vec<f64>>,
        normalized: bool,
    ) -> Result<Self> {
        if xi.len() != buyer_ids.len() || xi.iter().any(|r| r.len() != seller_ids.len()) {
            return Err(Error::validation("utility matrix shape does not match participant ids"));
        }
        if normalized {
            for (b, row) in buyer_ids.iter().zip(&xi) {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|v| *v < 0.0) || !(sum.abs() < 1e-12 || (sum - 1.0).abs() < 1e-9) {
                    return Err(Error::validation(format!(
                        "utility row of {b} is not normalized (sum {sum})"
                    )));
                }
            }
        }
        Ok(Self {
            buyer_ids,
            seller_ids,
            xi,
            normalized,
        })
    }

    pub fn get(&self, buyer: usize, seller: usize) -> f64 {
        self.xi[buyer][seller]
    }

    pub fn is_zero(&self) -> bool {
        self.xi.iter().flatten().all(|v| *v == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// V(U) = |covered categories| / 2 over {a, b}.
    struct HalfCoverage;

    impl EvalOracle for HalfCoverage {
        fn evaluate(&self, shards: &[&DataShard], _: &TestSpec, _: &ModelKind) -> Result<f64> {
            let covered: BTreeSet<&str> = shards
                .iter()
                .flat_map(|s| s.per_category_counts.keys().map(String::as_str))
                .collect();
            Ok(covered.len() as f64 / 2.0)
        }
    }

    fn spec(cats: &[&str]) -> TestSpec {
        TestSpec::for_categories("B1", cats.iter().copied()).unwrap()
    }

    const COVERAGE: ModelKind = ModelKind::SyntheticCoverage { diminishing: 0.5 };

    #[test]
    fn three_shard_hand_example() {
        let shards = vec![
            DataShard::from_counts("S1", [("a", 1)]),
            DataShard::from_counts("S2", [("b", 1)]),
            DataShard::from_counts("S3", [("a", 1), ("b", 1)]),
        ];
        let s = spec(&["a", "b"]);
        let phi = shapley_exact(&shards, &HalfCoverage, &s, &COVERAGE).unwrap();
        for (a, b) in phi.iter().zip([0.25, 0.25, 0.5]) {
            assert!((a - b).abs() < 1e-15, "{phi:?}");
        }
        let perm = shapley_permutation_oracle(&shards, &HalfCoverage, &s, &COVERAGE).unwrap();
        for (a, b) in phi.iter().zip(&perm) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_and_null_shards() {
        let oracle = synthetic_coverage_oracle(["a", "b"].map(String::from).into(), 0.5).unwrap();
        let shards = vec![
            DataShard::from_counts("S1", [("a", 2), ("b", 1)]),
            DataShard::from_counts("S2", [("a", 2), ("b", 1)]),
            DataShard::from_counts("S3", [("z", 7)]),
        ];
        let phi = shapley_exact(&shards, &oracle, &spec(&["a", "b"]), &COVERAGE).unwrap();
        assert_eq!(phi[0], phi[1]);
        assert_eq!(phi[2], 0.0);
    }

    #[test]
    fn single_shard_gets_its_standalone_value() {
        let oracle = synthetic_coverage_oracle(["a"].map(String::from).into(), 0.5).unwrap();
        let shards = vec![DataShard::from_counts("S1", [("a", 1)])];
        let phi = shapley_permutation_oracle(&shards, &oracle, &spec(&["a"]), &COVERAGE).unwrap();
        assert_eq!(phi, vec![0.5]);
    }

    #[test]
    fn counts_one_call_per_coalition() {
        let oracle = CountingOracle::new(HalfCoverage);
        let shards: Vec<DataShard> = (0..5)
            .map(|i| DataShard::from_counts(format!("S{i}"), [("a", i)]))
            .collect();
        shapley_exact(&shards, &oracle, &spec(&["a"]), &COVERAGE).unwrap();
        assert_eq!(oracle.calls(), 32);
    }

    #[test]
    fn size_limits() {
        let shards: Vec<DataShard> = (0..21).map(|i| DataShard::from_counts(format!("S{i}"), [])).collect();
        let err = shapley_exact(&shards, &HalfCoverage, &spec(&["a"]), &COVERAGE).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
        assert!(shapley_permutation_oracle(&shards[..9], &HalfCoverage, &spec(&["a"]), &COVERAGE).is_err());
    }

    #[test]
    fn coverage_oracle_examples() {
        let o = synthetic_coverage_oracle(["a"].map(String::from).into(), 0.5).unwrap();
        assert_eq!(o.value(&[]), 0.0);
        let one = DataShard::from_counts("S1", [("a", 1)]);
        assert_eq!(o.value(&[&one]), 0.5);
        let many = DataShard::from_counts("S1", [("a", 200)]);
        assert!((o.value(&[&many]) - 1.0).abs() < 1e-12);
        assert!(synthetic_coverage_oracle(BTreeSet::new(), 0.5).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_utilities(&[1.0, 1.0, 2.0]), vec![0.25, 0.25, 0.5]);
        assert_eq!(normalize_utilities(&[-0.3, 0.6, 0.6]), vec![0.0, 0.5, 0.5]);
        assert_eq!(normalize_utilities(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn disjointness_check() {
        let shard = DataShard::new("S1", [("a".to_string(), 1)].into(), vec!["d1".into()]).unwrap();
        let s = TestSpec::new("B1", ["a".to_string()].into(), vec!["d1".into()]).unwrap();
        assert!(s.check_disjoint(&[shard]).is_err());
        assert!(DataShard::new("S1", [("a".to_string(), 2)].into(), vec!["d1".into()]).is_err());
    }

    proptest! {
        #[test]
        fn efficiency_and_nonnegativity(counts in prop::collection::vec(prop::collection::vec(0usize..4, 3), 1..7)) {
            let cats = ["a", "b", "c"];
            let shards: Vec<DataShard> = counts
                .iter()
                .enumerate()
                .map(|(i, row)| DataShard::from_counts(format!("S{i}"), cats.iter().copied().zip(row.iter().copied())))
                .collect();
            let oracle = synthetic_coverage_oracle(cats.map(String::from).into(), 0.6).unwrap();
            let s = spec(&cats);
            let phi = shapley_exact(&shards, &oracle, &s, &COVERAGE).unwrap();
            let all: Vec<&DataShard> = shards.iter().collect();
            let grand = oracle.value(&all) - oracle.value(&[]);
            prop_assert!((phi.iter().sum::<f64>() - grand).abs() < 1e-9);
            prop_assert!(phi.iter().all(|v| *v >= -1e-15));
        }

        #[test]
        fn normalized_rows_sum_to_one_or_zero(raw in prop::collection::vec(-1.0f64..1.0, 1..8)) {
            let n = normalize_utilities(&raw);
            let sum: f64 = n.iter().sum();
            prop_assert!(n.iter().all(|v| *v >= 0.0));
            prop_assert!(sum == 0.0 || (sum - 1.0).abs() < 1e-12);
        }
    }
}
