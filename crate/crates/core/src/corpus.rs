//! Labeled text corpora, the hashing featurizer and seller partitions.
//!
//! # Input layouts
//!
//! [`load_corpus`] accepts either
//!
//! * a directory with one subdirectory per category, each holding plain-text
//!   files; the document id is `<category>/<file name>`; or
//! * a tab-separated file with rows `label<TAB>text` (ids are `row-000001`,
//!   …) or `id<TAB>label<TAB>text`. Blank lines and lines starting with `#`
//!   are skipped.
//!
//! # Features
//!
//! Tokens are maximal runs of ASCII alphanumerics, lowercased. Each token is
//! hashed with 64-bit FNV-1a (offset basis `0xcbf29ce484222325`, prime
//! `0x100000001b3`) over its UTF-8 bytes and reduced modulo the dimension.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_DIMENSION: usize = 2048;
pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.2;
/// Tokens per synthetic document.
pub const SYNTHETIC_DOC_LEN: usize = 40;
/// Share of synthetic tokens drawn from the category's private vocabulary.
pub const SYNTHETIC_PRIVATE_SHARE: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub category: String,
    pub tokens: Vec<String>,
}

/// Documents sorted by id, with their ordered category set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<Document>,
    categories: Vec<String>,
}

impl Corpus {
    pub fn new(mut docs: Vec<Document>, categories: Vec<String>) -> Result<Self> {
        let cat_set: BTreeSet<&str> = categories.iter().map(String::as_str).collect();
        if cat_set.len() != categories.len() {
            return Err(Error::Corpus("duplicate category names".into()));
        }
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in docs.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::Corpus(format!("duplicate document id `{}`", pair[0].id)));
            }
        }
        if let Some(d) = docs.iter().find(|d| !cat_set.contains(d.category.as_str())) {
            return Err(Error::Corpus(format!(
                "document `{}` has unknown category `{}`",
                d.id, d.category
            )));
        }
        Ok(Self { docs, categories })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.docs
            .binary_search_by(|d| d.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.docs[i])
    }

    pub fn category_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts: BTreeMap<&str, usize> =
            self.categories.iter().map(|c| (c.as_str(), 0)).collect();
        for d in &self.docs {
            *counts.get_mut(d.category.as_str()).expect("validated") += 1;
        }
        counts
    }

    fn ids_by_category(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut by: BTreeMap<&str, Vec<&str>> =
            self.categories.iter().map(|c| (c.as_str(), Vec::new())).collect();
        for d in &self.docs {
            by.get_mut(d.category.as_str()).expect("validated").push(&d.id);
        }
        by
    }
}

/// Lowercase ASCII-alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_ascii_lowercase)
        .collect()
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let meta = fs::metadata(path)
        .map_err(|e| Error::Corpus(format!("cannot read `{}`: {e}", path.display())))?;
    if meta.is_dir() {
        load_directory(path)
    } else {
        load_delimited(path)
    }
}

fn load_directory(root: &Path) -> Result<Corpus> {
    let mut categories = Vec::new();
    let mut docs = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(root)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|e| e.path().is_dir())
        .collect();
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let category = entry.file_name().to_string_lossy().into_owned();
        let mut files: Vec<_> = fs::read_dir(entry.path())?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .filter(|e| e.path().is_file())
            .collect();
        if files.is_empty() {
            return Err(Error::Corpus(format!("category `{category}` has no documents")));
        }
        files.sort_by_key(|e| e.file_name());
        for f in files {
            let bytes = fs::read(f.path())?;
            let text = String::from_utf8_lossy(&bytes);
            docs.push(Document {
                id: format!("{category}/{}", f.file_name().to_string_lossy()),
                category: category.clone(),
                tokens: tokenize(&text),
            });
        }
        categories.push(category);
    }
    if categories.is_empty() {
        return Err(Error::Corpus(format!(
            "`{}` contains no category subdirectories",
            root.display()
        )));
    }
    Corpus::new(docs, categories)
}

fn load_delimited(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path)?;
    let mut docs = Vec::new();
    let mut categories: Vec<String> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.splitn(3, '\t').collect();
        let (id, label, body) = match fields.as_slice() {
            [label, body] => (format!("row-{:06}", lineno + 1), *label, *body),
            [id, label, body] => (id.to_string(), *label, *body),
            _ => {
                return Err(Error::Corpus(format!(
                    "line {}: expected `label<TAB>text` or `id<TAB>label<TAB>text`",
                    lineno + 1
                )))
            }
        };
        let label = label.trim();
        if label.is_empty() {
            return Err(Error::Corpus(format!("line {}: empty label", lineno + 1)));
        }
        if !categories.iter().any(|c| c == label) {
            categories.push(label.to_string());
        }
        docs.push(Document {
            id,
            category: label.to_string(),
            tokens: tokenize(body),
        });
    }
    if docs.is_empty() {
        return Err(Error::Corpus(format!("`{}` has no documents", path.display())));
    }
    categories.sort();
    Corpus::new(docs, categories)
}

/// Category names used by [`synthesize_corpus`].
pub fn synthetic_category(c: usize) -> String {
    format!("topic{c:02}")
}

/// Corpus where each category draws most tokens from its own vocabulary and
/// the rest from a shared one.
pub fn synthesize_corpus(
    num_categories: usize,
    docs_per_category: usize,
    vocab_per_category: usize,
    seed: u64,
) -> Result<Corpus> {
    if num_categories == 0 || docs_per_category == 0 || vocab_per_category == 0 {
        return Err(Error::Corpus("synthetic corpus sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let categories: Vec<String> = (0..num_categories).map(synthetic_category).collect();
    let mut docs = Vec::with_capacity(num_categories * docs_per_category);
    for (c, cat) in categories.iter().enumerate() {
        for d in 0..docs_per_category {
            let tokens = (0..SYNTHETIC_DOC_LEN)
                .map(|_| {
                    let w = rng.gen_range(0..vocab_per_category);
                    if rng.gen_bool(SYNTHETIC_PRIVATE_SHARE) {
                        format!("t{c}w{w}")
                    } else {
                        format!("sharedw{w}")
                    }
                })
                .collect();
            docs.push(Document {
                id: format!("{cat}/{d:05}"),
                category: cat.clone(),
                tokens,
            });
        }
    }
    Corpus::new(docs, categories)
}

/// Sparse token-count vector.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureVector {
    pub dimension: usize,
    /// Sorted by index; every count > 0.
    pub entries: Vec<(u32, u32)>,
}

impl FeatureVector {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn featurize_tokens(tokens: &[String], dimension: usize) -> FeatureVector {
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    for t in tokens {
        let idx = (fnv1a64(t.as_bytes()) % dimension as u64) as u32;
        *counts.entry(idx).or_default() += 1;
    }
    FeatureVector {
        dimension,
        entries: counts.into_iter().collect(),
    }
}

/// Hashes every document; `dimension` must be a power of two ≥ 256.
pub fn featurize(corpus: &Corpus, dimension: usize) -> Result<BTreeMap<String, FeatureVector>> {
    if dimension < 256 || !dimension.is_power_of_two() {
        return Err(Error::validation(format!(
            "feature dimension {dimension} must be a power of two >= 256"
        )));
    }
    Ok(corpus
        .docs()
        .par_iter()
        .map(|d| (d.id.clone(), featurize_tokens(&d.tokens, dimension)))
        .collect())
}

/// How a corpus is split among sellers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum SellerAssumption {
    /// S1 owns the monopolized category and tops up to 30%; the rest 30:20:20.
    MonopolyPlusShare = 1,
    /// S1 owns only the monopolized category; the rest 4:3:3 over S2..S4.
    MonopolyOnly = 2,
    /// Stratified even split.
    Even = 3,
}

impl TryFrom<u8> for SellerAssumption {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Self::MonopolyPlusShare),
            2 => Ok(Self::MonopolyOnly),
            3 => Ok(Self::Even),
            _ => Err(Error::validation(format!("seller assumption must be 1, 2 or 3, got {v}"))),
        }
    }
}

impl From<SellerAssumption> for u8 {
    fn from(a: SellerAssumption) -> u8 {
        a as u8
    }
}

pub const SELLER_COUNT: usize = 4;

pub fn seller_id(index: usize) -> String {
    format!("S{}", index + 1)
}

/// Document ownership plus the held-out pool that buyer test sets come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    pub assignments: BTreeMap<String, String>,
    pub holdout: Vec<String>,
}

impl PartitionPlan {
    /// Document ids owned by `seller`, sorted.
    pub fn docs_of(&self, seller: &str) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, s)| s.as_str() == seller)
            .map(|(d, _)| d.clone())
            .collect()
    }

    /// Held-out documents whose category is in `categories`.
    pub fn test_split(&self, corpus: &Corpus, categories: &BTreeSet<String>) -> Vec<String> {
        self.holdout
            .iter()
            .filter(|id| {
                corpus
                    .get(id)
                    .is_some_and(|d| categories.contains(&d.category))
            })
            .cloned()
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("# datamarket partition v1\ndoc_id,owner\n");
        for (doc, owner) in &self.assignments {
            out.push_str(&format!("{doc},{owner}\n"));
        }
        for doc in &self.holdout {
            out.push_str(&format!("{doc},holdout\n"));
        }
        out
    }
}

/// Splits `n` into parts proportional to `ratios` (largest remainder, ties to
/// the earlier part).
pub fn proportional_split(n: usize, ratios: &[usize]) -> Vec<usize> {
    let total: usize = ratios.iter().sum();
    let mut parts: Vec<usize> = ratios.iter().map(|r| n * r / total).collect();
    let mut rem: Vec<(usize, usize)> = ratios
        .iter()
        .enumerate()
        .map(|(i, r)| (n * r % total, i))
        .collect();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = n - parts.iter().sum::<usize>();
    for &(_, i) in rem.iter().take(short) {
        parts[i] += 1;
    }
    parts
}

/// Reserves a stratified holdout, then assigns the rest to four sellers.
pub fn partition(
    corpus: &Corpus,
    assumption: SellerAssumption,
    monopolized_category: &str,
    seed: u64,
) -> Result<PartitionPlan> {
    partition_with_holdout(corpus, assumption, monopolized_category, seed, DEFAULT_HOLDOUT_FRACTION)
}

pub fn partition_with_holdout(
    corpus: &Corpus,
    assumption: SellerAssumption,
    monopolized_category: &str,
    seed: u64,
    holdout_fraction: f64,
) -> Result<PartitionPlan> {
    if !corpus.categories().iter().any(|c| c == monopolized_category) {
        return Err(Error::Corpus(format!(
            "monopolized category `{monopolized_category}` is not in the corpus"
        )));
    }
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::validation("holdout fraction must be in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut holdout = Vec::new();
    // Shuffled training docs per category, in category order.
    let mut train: Vec<(&str, Vec<&str>)> = Vec::new();
    for (cat, mut ids) in corpus.ids_by_category() {
        ids.shuffle(&mut rng);
        let k = (ids.len() as f64 * holdout_fraction).round() as usize;
        holdout.extend(ids[..k].iter().map(|s| s.to_string()));
        train.push((cat, ids[k..].to_vec()));
    }
    holdout.sort();

    let total: usize = train.iter().map(|(_, ids)| ids.len()).sum();
    let mut assignments = BTreeMap::new();
    let mut assign = |ids: &[&str], seller: usize| {
        for id in ids {
            assignments.insert(id.to_string(), seller_id(seller));
        }
    };

    match assumption {
        SellerAssumption::Even => {
            for (i, (cat, ids)) in train.iter().enumerate() {
                if ids.len() < SELLER_COUNT {
                    return Err(Error::Corpus(format!(
                        "category `{cat}` has {} training documents; an even split needs at least {SELLER_COUNT}",
                        ids.len()
                    )));
                }
                // Rotate which sellers take the remainder so totals stay level.
                let mut sizes = vec![ids.len() / SELLER_COUNT; SELLER_COUNT];
                for r in 0..ids.len() % SELLER_COUNT {
                    sizes[(i + r) % SELLER_COUNT] += 1;
                }
                let mut at = 0;
                for (s, size) in sizes.into_iter().enumerate() {
                    assign(&ids[at..at + size], s);
                    at += size;
                }
            }
        }
        SellerAssumption::MonopolyPlusShare | SellerAssumption::MonopolyOnly => {
            let mono: Vec<&str> = train
                .iter()
                .find(|(c, _)| *c == monopolized_category)
                .map(|(_, ids)| ids.clone())
                .unwrap_or_default();
            let rest = interleave(
                train
                    .iter()
                    .filter(|(c, _)| *c != monopolized_category)
                    .map(|(_, ids)| ids.as_slice()),
            );
            if mono.is_empty() {
                return Err(Error::Corpus(format!(
                    "monopolized category `{monopolized_category}` has no training documents"
                )));
            }
            assign(&mono, 0);
            let sizes = if assumption == SellerAssumption::MonopolyPlusShare {
                let shares = proportional_split(total, &[3, 3, 2, 2]);
                if mono.len() > shares[0] {
                    return Err(Error::Corpus(format!(
                        "monopolized category has {} training documents but S1's 30% share is {}; \
                         need at least {} training documents in total",
                        mono.len(),
                        shares[0],
                        (mono.len() * 10).div_ceil(3)
                    )));
                }
                vec![shares[0] - mono.len(), shares[1], shares[2], shares[3]]
            } else {
                let split = proportional_split(rest.len(), &[4, 3, 3]);
                vec![0, split[0], split[1], split[2]]
            };
            if sizes[1..].contains(&0) {
                return Err(Error::Corpus(format!(
                    "{} non-monopolized training documents cannot fill sellers S2..S4",
                    rest.len()
                )));
            }
            let mut at = 0;
            for (s, size) in sizes.into_iter().enumerate() {
                assign(&rest[at..at + size], s);
                at += size;
            }
        }
    }
    Ok(PartitionPlan { assignments, holdout })
}

/// Round-robin merge so any contiguous run is close to stratified.
fn interleave<'a>(lists: impl Iterator<Item = &'a [&'a str]>) -> Vec<&'a str> {
    let lists: Vec<&[&str]> = lists.collect();
    let longest = lists.iter().map(|l| l.len()).max().unwrap_or(0);
    let mut out = Vec::new();
    for i in 0..longest {
        for l in &lists {
            if let Some(id) = l.get(i) {
                out.push(*id);
            }
        }
    }
    out
}

/// Checks the ownership invariants of a plan.
pub fn check_plan(plan: &PartitionPlan) -> Result<()> {
    let held: HashSet<&str> = plan.holdout.iter().map(String::as_str).collect();
    if let Some(id) = plan.assignments.keys().find(|d| held.contains(d.as_str())) {
        return Err(Error::validation(format!("`{id}` is both owned and held out")));
    }
    Ok(())
}
