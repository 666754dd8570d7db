//! Small deterministic text classifiers used as the coalition value `V`.
//!
//! Inputs are hashed count vectors, transformed to `log(1 + count)` and
//! L2-normalized. Linear models are one-vs-rest with a bias term, trained by
//! full-batch (sub)gradient descent from zero weights; KNN votes among the
//! `k` most cosine-similar training documents.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{featurize, Corpus, FeatureVector};
use crate::error::{Error, Result};
use crate::shapley::{coverage_value, DataShard, EvalOracle, ModelKind, TestSpec};

/// A featurized document with its label.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub features: &'a FeatureVector,
    pub label: &'a str,
}

type Sparse = Vec<(usize, f64)>;

fn transform(v: &FeatureVector) -> Sparse {
    let mut out: Sparse = v
        .entries
        .iter()
        .map(|&(i, c)| (i as usize, (1.0 + c as f64).ln()))
        .collect();
    let norm = out.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, x) in &mut out {
            *x /= norm;
        }
    }
    out
}

fn dot(w: &[f64], x: &Sparse) -> f64 {
    x.iter().map(|&(i, v)| w[i] * v).sum()
}

fn sparse_dot(a: &Sparse, b: &Sparse) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

#[derive(Clone, Copy)]
enum Loss {
    Hinge,
    Logistic,
}

/// One binary linear model: weights over the feature dimension plus a bias
/// stored in the last slot.
fn train_binary(xs: &[Sparse], ys: &[f64], dim: usize, loss: Loss, epochs: usize, lr: f64, l2: f64) -> Vec<f64> {
    let n = xs.len() as f64;
    let mut w = vec![0.0; dim + 1];
    let mut grad = vec![0.0; dim + 1];
    for _ in 0..epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, &y) in xs.iter().zip(ys) {
            let margin = y * (dot(&w, x) + w[dim]);
            let coef = match loss {
                Loss::Hinge => {
                    if margin < 1.0 {
                        -y
                    } else {
                        0.0
                    }
                }
                Loss::Logistic => -y / (1.0 + margin.exp()),
            };
            if coef != 0.0 {
                for &(i, v) in x {
                    grad[i] += coef * v;
                }
                grad[dim] += coef;
            }
        }
        for i in 0..dim {
            w[i] -= lr * (grad[i] / n + l2 * w[i]);
        }
        w[dim] -= lr * grad[dim] / n;
    }
    w
}

fn argmax(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, s) in scores.enumerate() {
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}

/// Trains `model` on `train` and returns accuracy on `test`.
///
/// An empty training set scores `1 / (number of classes in test)`.
pub fn train_and_score(model: &ModelKind, train: &[Example<'_>], test: &[Example<'_>]) -> Result<f64> {
    model.validate()?;
    if test.is_empty() {
        return Err(Error::validation("test set is empty"));
    }
    if let Some(dim) = train.iter().chain(test).map(|e| e.features.dimension).find(|d| {
        *d != test[0].features.dimension
    }) {
        return Err(Error::validation(format!(
            "feature dimension mismatch ({dim} vs {})",
            test[0].features.dimension
        )));
    }
    if train.is_empty() {
        let classes: BTreeSet<&str> = test.iter().map(|e| e.label).collect();
        return Ok(1.0 / classes.len() as f64);
    }
    let dim = test[0].features.dimension;
    let classes: Vec<&str> = train
        .iter()
        .map(|e| e.label)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let train_x: Vec<Sparse> = train.iter().map(|e| transform(e.features)).collect();
    let test_x: Vec<Sparse> = test.iter().map(|e| transform(e.features)).collect();

    let predictions: Vec<&str> = match *model {
        ModelKind::LinearSvm { epochs, learning_rate, l2 }
        | ModelKind::LogisticRegression { epochs, learning_rate, l2 } => {
            if classes.len() == 1 {
                vec![classes[0]; test.len()]
            } else {
                let loss = if matches!(model, ModelKind::LinearSvm { .. }) {
                    Loss::Hinge
                } else {
                    Loss::Logistic
                };
                let models: Vec<Vec<f64>> = classes
                    .iter()
                    .map(|c| {
                        let ys: Vec<f64> = train
                            .iter()
                            .map(|e| if e.label == *c { 1.0 } else { -1.0 })
                            .collect();
                        train_binary(&train_x, &ys, dim, loss, epochs, learning_rate, l2)
                    })
                    .collect();
                test_x
                    .iter()
                    .map(|x| classes[argmax(models.iter().map(|w| dot(w, x) + w[dim]))])
                    .collect()
            }
        }
        ModelKind::Knn { k } => test_x
            .iter()
            .map(|x| knn_predict(x, &train_x, train, k))
            .collect(),
        ModelKind::SyntheticCoverage { .. } => {
            return Err(Error::validation(
                "synthetic coverage is not a trainable model",
            ))
        }
    };
    let correct = predictions
        .iter()
        .zip(test)
        .filter(|(p, e)| **p == e.label)
        .count();
    Ok(correct as f64 / test.len() as f64)
}

fn knn_predict<'a>(x: &Sparse, train_x: &[Sparse], train: &[Example<'a>], k: usize) -> &'a str {
    let mut sims: Vec<(f64, usize)> = train_x
        .iter()
        .enumerate()
        .map(|(i, t)| (sparse_dot(x, t), i))
        .collect();
    sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut votes: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for &(s, i) in sims.iter().take(k) {
        let v = votes.entry(train[i].label).or_default();
        v.0 += 1;
        v.1 += s;
    }
    // Most votes, then larger similarity mass, then first label.
    let mut best: Option<(&str, (usize, f64))> = None;
    for (label, v) in votes {
        let better = match best {
            None => true,
            Some((_, b)) => v.0 > b.0 || (v.0 == b.0 && v.1 > b.1),
        };
        if better {
            best = Some((label, v));
        }
    }
    best.expect("train is nonempty").0
}

/// Coalition value from actually training the buyer's model on the
/// coalition's documents and scoring it on the buyer's test documents.
pub struct TrainedOracle {
    features: BTreeMap<String, FeatureVector>,
    labels: BTreeMap<String, String>,
}

impl TrainedOracle {
    pub fn new(corpus: &Corpus, dimension: usize) -> Result<Self> {
        Ok(Self {
            features: featurize(corpus, dimension)?,
            labels: corpus
                .docs()
                .iter()
                .map(|d| (d.id.clone(), d.category.clone()))
                .collect(),
        })
    }

    fn examples<'a>(&'a self, ids: impl Iterator<Item = &'a String>) -> Result<Vec<Example<'a>>> {
        ids.map(|id| match (self.features.get(id), self.labels.get(id)) {
            (Some(features), Some(label)) => Ok(Example { features, label }),
            _ => Err(Error::validation(format!("document `{id}` is not in the corpus"))),
        })
        .collect()
    }
}

impl EvalOracle for TrainedOracle {
    fn evaluate(&self, shards: &[&DataShard], spec: &TestSpec, model: &ModelKind) -> Result<f64> {
        if let ModelKind::SyntheticCoverage { diminishing } = *model {
            return Ok(coverage_value(&spec.required_categories, diminishing, shards));
        }
        let train = self.examples(shards.iter().flat_map(|s| s.doc_ids.iter()))?;
        let test = self.examples(spec.test_doc_ids.iter())?;
        train_and_score(model, &train, &test)
    }
}
