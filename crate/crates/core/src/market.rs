//! Market scenarios: four sellers, four buyers, one negotiation per seller.
//!
//! A run partitions the corpus among the sellers, values every shard for
//! every buyer, aggregates the buyers into one alliance per seller and
//! prices each seller's data at the bargaining equilibrium.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ahp::WeightVector;
use crate::bargain::{equilibrium_price, BargainParams, EquilibriumResult};
use crate::corpus::{
    check_plan, load_corpus, partition_with_holdout, seller_id, synthesize_corpus, Corpus,
    PartitionPlan, SellerAssumption, DEFAULT_DIMENSION, DEFAULT_HOLDOUT_FRACTION, SELLER_COUNT,
};
use crate::error::{Error, Result};
use crate::learners::TrainedOracle;
use crate::quality::{seller_reserve, QualityLevel, QualityVector, DEFAULT_QUALITY_WEIGHTS};
use crate::satisfaction::{
    alliance_view, buyer_satisfaction, logistic_discount, AllianceView, DiscountParams,
    DEFAULT_SATISFACTION_WEIGHTS,
};
use crate::shapley::{
    buyer_utility, synthetic_coverage_oracle, DataShard, EvalOracle, ModelKind, TestSpec,
    UtilityMatrix,
};

pub const BUYER_COUNT: usize = 4;
/// Cap on δ_s redraws per seller.
pub const DELTA_S_MAX_DRAWS: usize = 10_000;
pub const DEFAULT_ETA: f64 = 0.1;
pub const DEFAULT_DIMINISHING: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    /// Saturating category coverage; fast and monotone.
    Synthetic,
    /// Train each buyer's model on the coalition's documents.
    Trained,
}

impl FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Self::Synthetic),
            "trained" => Ok(Self::Trained),
            _ => Err(Error::Parse(format!("oracle must be `synthetic` or `trained`, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum BuyerDemand {
    /// B1 wants category 1, B2 everything, B3 everything but category 1,
    /// B4 categories 1 to 3.
    Mixed = 1,
    /// Every buyer wants every category.
    AllCategories = 2,
}

impl TryFrom<u8> for BuyerDemand {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Self::Mixed),
            2 => Ok(Self::AllCategories),
            _ => Err(Error::validation(format!("buyer demand must be 1 or 2, got {v}"))),
        }
    }
}

impl From<BuyerDemand> for u8 {
    fn from(d: BuyerDemand) -> u8 {
        d as u8
    }
}

/// Everything a simulation run needs besides the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seller_assumption: SellerAssumption,
    pub buyer_demand: BuyerDemand,
    pub num_categories: usize,
    pub docs_per_category: usize,
    pub vocab_per_category: usize,
    pub corpus_seed: u64,
    /// Load this corpus instead of synthesizing one.
    pub corpus_path: Option<PathBuf>,
    pub seed: u64,
    pub discount_k_choices: Vec<f64>,
    pub logistic_midpoint: f64,
    pub p1: f64,
    pub eta: f64,
    pub tau: f64,
    pub budget_range: (f64, f64),
    /// Range of the pre-quality reserve `r0`.
    pub reserve_range: (f64, f64),
    pub alpha_range: (f64, f64),
    pub oracle: OracleKind,
    pub diminishing: f64,
    pub holdout_fraction: f64,
    pub dimension: usize,
    pub quality_weights: Vec<f64>,
    pub satisfaction_weights: Vec<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seller_assumption: SellerAssumption::MonopolyPlusShare,
            buyer_demand: BuyerDemand::Mixed,
            num_categories: 10,
            docs_per_category: 100,
            vocab_per_category: 30,
            corpus_seed: 7,
            corpus_path: None,
            seed: 1,
            discount_k_choices: vec![7.0, 10.0, 15.0, 20.0],
            logistic_midpoint: 0.0,
            p1: 0.9,
            eta: DEFAULT_ETA,
            tau: 0.0,
            budget_range: (600.0, 1000.0),
            reserve_range: (200.0, 400.0),
            alpha_range: (0.0, 1.0),
            oracle: OracleKind::Synthetic,
            diminishing: DEFAULT_DIMINISHING,
            holdout_fraction: DEFAULT_HOLDOUT_FRACTION,
            dimension: DEFAULT_DIMENSION,
            quality_weights: DEFAULT_QUALITY_WEIGHTS.to_vec(),
            satisfaction_weights: DEFAULT_SATISFACTION_WEIGHTS.to_vec(),
        }
    }
}

fn check_range(key: &str, (lo, hi): (f64, f64), min: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::config(key, format!("[{lo}, {hi}] is not a valid range")));
    }
    if lo < min {
        return Err(Error::config(key, format!("lower bound {lo} is below {min}")));
    }
    Ok(())
}

impl ScenarioConfig {
    /// Range checks; errors name the offending key under `scenario.`.
    pub fn validate(&self) -> Result<()> {
        if self.num_categories < 3 {
            return Err(Error::config("scenario.num_categories", "at least 3 categories are needed"));
        }
        if self.docs_per_category == 0 {
            return Err(Error::config("scenario.docs_per_category", "must be positive"));
        }
        if self.vocab_per_category == 0 {
            return Err(Error::config("scenario.vocab_per_category", "must be positive"));
        }
        if self.discount_k_choices.is_empty() {
            return Err(Error::config("scenario.discount_k_choices", "choice set is empty"));
        }
        if let Some(k) = self.discount_k_choices.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            return Err(Error::config("scenario.discount_k_choices", format!("{k} is not positive")));
        }
        if !self.logistic_midpoint.is_finite() {
            return Err(Error::config("scenario.logistic_midpoint", "must be finite"));
        }
        if !(self.p1 > 0.0 && self.p1 <= 1.0) {
            return Err(Error::config("scenario.p1", format!("{} is not a probability in (0, 1]", self.p1)));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return Err(Error::config("scenario.eta", format!("{} is not in [0, 1)", self.eta)));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::config("scenario.tau", format!("{} is not in [0, 1)", self.tau)));
        }
        check_range("scenario.budget_range", self.budget_range, 0.0)?;
        check_range("scenario.reserve_range", self.reserve_range, 0.0)?;
        check_range("scenario.alpha_range", self.alpha_range, 0.0)?;
        if !(self.diminishing > 0.0 && self.diminishing < 1.0) {
            return Err(Error::config("scenario.diminishing", format!("{} is not in (0, 1)", self.diminishing)));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::config(
                "scenario.holdout_fraction",
                format!("{} is not in (0, 1)", self.holdout_fraction),
            ));
        }
        if !self.dimension.is_power_of_two() || self.dimension < 256 {
            return Err(Error::config("scenario.dimension", format!("{} is not a power of two >= 256", self.dimension)));
        }
        self.quality_weight_vector()?;
        self.satisfaction_weight_vector()?;
        Ok(())
    }

    pub fn quality_weight_vector(&self) -> Result<WeightVector> {
        if self.quality_weights.len() != 4 {
            return Err(Error::config("scenario.quality_weights", "exactly 4 weights are needed"));
        }
        WeightVector::new(self.quality_weights.clone())
            .map_err(|e| Error::config("scenario.quality_weights", e.to_string()))
    }

    pub fn satisfaction_weight_vector(&self) -> Result<WeightVector> {
        if self.satisfaction_weights.len() != 5 {
            return Err(Error::config("scenario.satisfaction_weights", "exactly 5 weights are needed"));
        }
        WeightVector::new(self.satisfaction_weights.clone())
            .map_err(|e| Error::config("scenario.satisfaction_weights", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SellerProfile {
    pub id: String,
    pub shard: DataShard,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuyerProfile {
    pub id: String,
    pub spec: TestSpec,
    pub model: ModelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketScenario {
    pub sellers: Vec<SellerProfile>,
    pub buyers: Vec<BuyerProfile>,
    pub category_universe: Vec<String>,
}

pub fn buyer_id(index: usize) -> String {
    format!("B{}", index + 1)
}

/// Turns a partition plan into seller shards and buyer requirements.
/// Category 1 is the corpus's first category, the monopolized one.
pub fn build_scenario(cfg: &ScenarioConfig, corpus: &Corpus, plan: &PartitionPlan) -> Result<MarketScenario> {
    let cats = corpus.categories();
    if cats.len() < cfg.num_categories.max(3) {
        return Err(Error::Corpus(format!(
            "corpus has {} categories; the scenario needs at least {}",
            cats.len(),
            cfg.num_categories.max(3)
        )));
    }
    check_plan(plan)?;

    let mut sellers = Vec::with_capacity(SELLER_COUNT);
    for s in 0..SELLER_COUNT {
        let id = seller_id(s);
        let docs = plan.docs_of(&id);
        let mut counts = std::collections::BTreeMap::new();
        for d in &docs {
            let doc = corpus
                .get(d)
                .ok_or_else(|| Error::Corpus(format!("planned document `{d}` is not in the corpus")))?;
            *counts.entry(doc.category.clone()).or_insert(0) += 1;
        }
        sellers.push(SellerProfile {
            shard: DataShard::new(id.clone(), counts, docs)?,
            id,
        });
    }

    let all: BTreeSet<String> = cats.iter().cloned().collect();
    let demands: [BTreeSet<String>; BUYER_COUNT] = match cfg.buyer_demand {
        BuyerDemand::Mixed => [
            [cats[0].clone()].into(),
            all.clone(),
            all.iter().filter(|c| **c != cats[0]).cloned().collect(),
            cats[..3].iter().cloned().collect(),
        ],
        BuyerDemand::AllCategories => [all.clone(), all.clone(), all.clone(), all.clone()],
    };
    let models = [
        ModelKind::linear_svm(),
        ModelKind::linear_svm(),
        ModelKind::logistic_regression(),
        ModelKind::knn(),
    ];
    let mut buyers = Vec::with_capacity(BUYER_COUNT);
    for (i, (required, model)) in demands.into_iter().zip(models).enumerate() {
        let test = plan.test_split(corpus, &required);
        let spec = TestSpec::new(buyer_id(i), required, test)?;
        spec.check_disjoint(&sellers.iter().map(|s| s.shard.clone()).collect::<Vec<_>>())?;
        buyers.push(BuyerProfile { id: buyer_id(i), spec, model });
    }
    Ok(MarketScenario {
        sellers,
        buyers,
        category_universe: cats.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SellerDraw {
    /// Pre-quality reserve.
    pub r0: f64,
    pub alpha: f64,
    pub p2: f64,
    pub quality: QualityVector,
}

/// Stochastic inputs of one run, except δ_s which depends on the alliance
/// discount and is drawn by [`draw_delta_s`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterDraw {
    pub budgets: Vec<f64>,
    pub k: Vec<f64>,
    pub sellers: Vec<SellerDraw>,
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

pub fn sample_parameters(cfg: &ScenarioConfig, rng: &mut impl Rng) -> ParameterDraw {
    let budgets = (0..BUYER_COUNT).map(|_| uniform(rng, cfg.budget_range)).collect();
    let k = (0..BUYER_COUNT)
        .map(|_| *cfg.discount_k_choices.choose(rng).expect("validated nonempty"))
        .collect();
    let sellers = (0..SELLER_COUNT)
        .map(|_| {
            let r0 = uniform(rng, cfg.reserve_range);
            let alpha = uniform(rng, cfg.alpha_range);
            // (0, p1]: p2 must stay positive
            let p2 = cfg.p1 * (1.0 - rng.gen::<f64>());
            let mut levels = [QualityLevel::Fair; 4];
            for l in &mut levels {
                *l = *QualityLevel::ALL.choose(rng).expect("nonempty");
            }
            SellerDraw {
                r0,
                alpha,
                p2,
                quality: QualityVector::from_levels(levels),
            }
        })
        .collect();
    ParameterDraw { budgets, k, sellers }
}

/// Draws `δ_s ~ U(0, 1)` until `δ_s > δ_ηb` and `p1 > δ_s·δ_ηb`.
pub fn draw_delta_s(rng: &mut impl Rng, delta_eta_b: f64, p1: f64) -> Result<f64> {
    for _ in 0..DELTA_S_MAX_DRAWS {
        let d: f64 = rng.gen();
        if d > delta_eta_b && p1 > d * delta_eta_b {
            return Ok(d);
        }
    }
    Err(Error::config(
        "scenario",
        format!("no admissible delta_s after {DELTA_S_MAX_DRAWS} draws (delta_eta_b = {delta_eta_b}, p1 = {p1})"),
    ))
}

/// `ξ[buyer][seller]` for every buyer, from the configured oracle.
pub fn utility_matrix(
    cfg: &ScenarioConfig,
    scenario: &MarketScenario,
    trained: Option<&TrainedOracle>,
) -> Result<UtilityMatrix> {
    let shards: Vec<DataShard> = scenario.sellers.iter().map(|s| s.shard.clone()).collect();
    let rows = scenario
        .buyers
        .iter()
        .map(|b| match (cfg.oracle, trained) {
            (OracleKind::Synthetic, _) => {
                let oracle = synthetic_coverage_oracle(b.spec.required_categories.clone(), cfg.diminishing)?;
                let model = ModelKind::SyntheticCoverage {
                    diminishing: cfg.diminishing,
                };
                buyer_utility(&shards, &oracle, &b.spec, &model)
            }
            (OracleKind::Trained, Some(oracle)) => buyer_utility(&shards, oracle as &dyn EvalOracle, &b.spec, &b.model),
            (OracleKind::Trained, None) => Err(Error::validation("trained oracle requested but not built")),
        })
        .collect::<Result<Vec<_>>>()?;
    UtilityMatrix::new(
        scenario.buyers.iter().map(|b| b.id.clone()).collect(),
        scenario.sellers.iter().map(|s| s.id.clone()).collect(),
        rows,
        true,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParticipantKind {
    Seller,
    Buyer,
}

impl fmt::Display for ParticipantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Seller => "seller",
            Self::Buyer => "buyer",
        })
    }
}

/// One participant's outcome in one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub kind: ParticipantKind,
    pub id: String,
    /// `r_s` for sellers, budget `u_i` for buyers.
    pub reserve_or_budget: f64,
    /// Equilibrium price for sellers, total payment for buyers.
    pub price_or_payment: f64,
    pub extra_profit: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SellerOutcome {
    pub id: String,
    pub r_s: f64,
    pub delta_s: Option<f64>,
    pub alliance: Option<AllianceView>,
    pub params: Option<BargainParams>,
    pub result: Option<EquilibriumResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SatisfactionRow {
    pub buyer_id: String,
    pub seller_id: String,
    pub xi: f64,
    pub satisfaction: f64,
    pub discount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketRun {
    pub seed: u64,
    pub utility: UtilityMatrix,
    pub satisfaction: Vec<SatisfactionRow>,
    pub sellers: Vec<SellerOutcome>,
    pub records: Vec<RunRecord>,
}

/// Prices every seller's data and settles buyer payments.
///
/// Sellers no buyer values do not trade: their record carries price 0,
/// extra 0 and `feasible = false`. Buyer `i` pays `Σ_j ξ_ij·u_i/r_b(S_j)·P_j`
/// over the sellers it values.
pub fn run_market(
    cfg: &ScenarioConfig,
    scenario: &MarketScenario,
    xi: &UtilityMatrix,
    draw: &ParameterDraw,
    seed: u64,
) -> Result<MarketRun> {
    let nb = scenario.buyers.len();
    let ns = scenario.sellers.len();
    if draw.budgets.len() != nb || draw.k.len() != nb || draw.sellers.len() != ns {
        return Err(Error::validation("parameter draw does not match the scenario size"));
    }
    let qw = cfg.quality_weight_vector()?;
    let sw = cfg.satisfaction_weight_vector()?;

    let mut satisfaction = Vec::with_capacity(nb * ns);
    // discounts[j][i]: buyer i's discount toward seller j
    let mut discounts = vec![vec![0.0; nb]; ns];
    for (i, buyer) in scenario.buyers.iter().enumerate() {
        let dp = DiscountParams::new(draw.k[i], cfg.logistic_midpoint, cfg.eta)?;
        for (j, seller) in scenario.sellers.iter().enumerate() {
            let value = buyer_satisfaction(xi.get(i, j), &draw.sellers[j].quality, &sw)?;
            let discount = logistic_discount(value, &dp);
            discounts[j][i] = discount;
            satisfaction.push(SatisfactionRow {
                buyer_id: buyer.id.clone(),
                seller_id: seller.id.clone(),
                xi: xi.get(i, j),
                satisfaction: value,
                discount,
            });
        }
    }

    let mut sellers = Vec::with_capacity(ns);
    let mut records = Vec::with_capacity(ns + nb);
    for (j, seller) in scenario.sellers.iter().enumerate() {
        let sd = &draw.sellers[j];
        let r_s = seller_reserve(sd.r0, 0.0, &sd.quality, &qw)?.rs;
        let alliance = alliance_view(xi, &draw.budgets, &discounts[j], j, cfg.eta)?;
        let mut outcome = SellerOutcome {
            id: seller.id.clone(),
            r_s,
            delta_s: None,
            alliance: alliance.clone(),
            params: None,
            result: None,
        };
        if let Some(a) = &alliance {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1 + j as u64);
            let delta_s = draw_delta_s(&mut rng, a.delta_eta_b, cfg.p1)?;
            let params = BargainParams::new(r_s, a.r_b, delta_s, a.delta_eta_b, cfg.p1, sd.p2, sd.alpha)?
                .with_tau(cfg.tau)?;
            outcome.delta_s = Some(delta_s);
            outcome.params = Some(params);
            outcome.result = Some(equilibrium_price(&params)?);
        }
        let (price, extra, feasible) = match &outcome.result {
            Some(r) => (r.price, r.seller_extra, r.feasible),
            None => (0.0, 0.0, false),
        };
        records.push(RunRecord {
            seed,
            kind: ParticipantKind::Seller,
            id: seller.id.clone(),
            reserve_or_budget: r_s,
            price_or_payment: price,
            extra_profit: extra,
            feasible,
        });
        sellers.push(outcome);
    }

    for (i, buyer) in scenario.buyers.iter().enumerate() {
        let u = draw.budgets[i];
        let mut payment = 0.0;
        let mut traded = false;
        let mut feasible = true;
        for (j, outcome) in sellers.iter().enumerate() {
            let x = xi.get(i, j);
            if let (true, Some(a), Some(r)) = (x > 0.0, &outcome.alliance, &outcome.result) {
                payment += x * u / a.r_b * r.price;
                traded = true;
                feasible &= r.feasible;
            }
        }
        records.push(RunRecord {
            seed,
            kind: ParticipantKind::Buyer,
            id: buyer.id.clone(),
            reserve_or_budget: u,
            price_or_payment: payment,
            extra_profit: u - payment,
            feasible: traded && feasible,
        });
    }

    Ok(MarketRun {
        seed,
        utility: xi.clone(),
        satisfaction,
        sellers,
        records,
    })
}

/// A configured market: the corpus is prepared once and reused across seeds.
pub struct Market {
    cfg: ScenarioConfig,
    corpus: Corpus,
    trained: Option<TrainedOracle>,
}

impl Market {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let corpus = match &cfg.corpus_path {
            Some(path) => load_corpus(path)?,
            None => synthesize_corpus(cfg.num_categories, cfg.docs_per_category, cfg.vocab_per_category, cfg.corpus_seed)?,
        };
        let trained = match cfg.oracle {
            OracleKind::Trained => Some(TrainedOracle::new(&corpus, cfg.dimension)?),
            OracleKind::Synthetic => None,
        };
        Ok(Self { cfg, corpus, trained })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn plan(&self, seed: u64) -> Result<PartitionPlan> {
        let mono = &self.corpus.categories()[0];
        partition_with_holdout(&self.corpus, self.cfg.seller_assumption, mono, seed, self.cfg.holdout_fraction)
    }

    pub fn scenario(&self, seed: u64) -> Result<MarketScenario> {
        build_scenario(&self.cfg, &self.corpus, &self.plan(seed)?)
    }

    pub fn run_seed(&self, seed: u64) -> Result<MarketRun> {
        let scenario = self.scenario(seed)?;
        let xi = utility_matrix(&self.cfg, &scenario, self.trained.as_ref())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = sample_parameters(&self.cfg, &mut rng);
        if xi.is_zero() {
            // nobody values anything: a failed market with no trades
            return failed_run(&scenario, &xi, &draw, seed, &self.cfg);
        }
        run_market(&self.cfg, &scenario, &xi, &draw, seed)
    }

    /// Records of every seed, in seed order; runs execute in parallel.
    pub fn run_seeds(&self, seeds: &[u64]) -> Result<Vec<RunRecord>> {
        let runs: Vec<Vec<RunRecord>> = seeds
            .par_iter()
            .map(|&s| self.run_seed(s).map(|r| r.records))
            .collect::<Result<_>>()?;
        Ok(runs.into_iter().flatten().collect())
    }
}

fn failed_run(
    scenario: &MarketScenario,
    xi: &UtilityMatrix,
    draw: &ParameterDraw,
    seed: u64,
    cfg: &ScenarioConfig,
) -> Result<MarketRun> {
    let qw = cfg.quality_weight_vector()?;
    let mut records = Vec::new();
    let mut sellers = Vec::new();
    for (s, sd) in scenario.sellers.iter().zip(&draw.sellers) {
        let r_s = seller_reserve(sd.r0, 0.0, &sd.quality, &qw)?.rs;
        records.push(RunRecord {
            seed,
            kind: ParticipantKind::Seller,
            id: s.id.clone(),
            reserve_or_budget: r_s,
            price_or_payment: 0.0,
            extra_profit: 0.0,
            feasible: false,
        });
        sellers.push(SellerOutcome {
            id: s.id.clone(),
            r_s,
            delta_s: None,
            alliance: None,
            params: None,
            result: None,
        });
    }
    for (b, u) in scenario.buyers.iter().zip(&draw.budgets) {
        records.push(RunRecord {
            seed,
            kind: ParticipantKind::Buyer,
            id: b.id.clone(),
            reserve_or_budget: *u,
            price_or_payment: 0.0,
            extra_profit: *u,
            feasible: false,
        });
    }
    Ok(MarketRun {
        seed,
        utility: xi.clone(),
        satisfaction: Vec::new(),
        sellers,
        records,
    })
}

/// Seeds `base, base + 1, …`.
pub fn seed_range(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantSummary {
    pub kind: ParticipantKind,
    pub id: String,
    pub runs: usize,
    pub mean_extra: f64,
    pub median_extra: f64,
    pub stddev_extra: f64,
    pub feasibility_rate: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Per-participant statistics, sellers first, then by id. Sample standard
/// deviation; zero for a single run.
pub fn aggregate(records: &[RunRecord]) -> Result<Vec<ParticipantSummary>> {
    if records.is_empty() {
        return Err(Error::validation("no records to aggregate"));
    }
    let mut groups: std::collections::BTreeMap<(ParticipantKind, &str), Vec<&RunRecord>> = Default::default();
    for r in records {
        groups.entry((r.kind, r.id.as_str())).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|((kind, id), mut rs)| {
            rs.sort_by_key(|r| r.seed);
            let extras: Vec<f64> = rs.iter().map(|r| r.extra_profit).collect();
            let n = extras.len() as f64;
            let mean = extras.iter().sum::<f64>() / n;
            let var = if extras.len() > 1 {
                extras.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            ParticipantSummary {
                kind,
                id: id.to_string(),
                runs: extras.len(),
                mean_extra: mean,
                median_extra: median(&extras),
                stddev_extra: var.sqrt(),
                feasibility_rate: rs.iter().filter(|r| r.feasible).count() as f64 / n,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    /// Composite quality score; scales `r_s`.
    Quality,
    Alpha,
    P2,
    /// Disclosure level; scales `δ_ηb`.
    Eta,
}

impl SweepParam {
    pub const ALL: [SweepParam; 4] = [SweepParam::Quality, SweepParam::Alpha, SweepParam::P2, SweepParam::Eta];

    pub fn name(self) -> &'static str {
        match self {
            Self::Quality => "quality",
            Self::Alpha => "alpha",
            Self::P2 => "p2",
            Self::Eta => "eta",
        }
    }

    /// Expected direction of seller extra profit along the grid;
    /// buyer extra profit should move the other way.
    pub fn seller_direction(self) -> Direction {
        match self {
            Self::Eta => Direction::NonIncreasing,
            _ => Direction::NonDecreasing,
        }
    }

    /// Eleven points over the parameter's natural range.
    pub fn default_grid(self, base: &BargainParams) -> Vec<f64> {
        match self {
            Self::Quality => linspace(0.2, 1.2, 11),
            Self::Alpha => linspace(0.0, 1.0, 11),
            Self::P2 => linspace(0.05, base.p1, 11),
            Self::Eta => linspace(0.0, 0.5, 11),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("sweep parameter must be quality, alpha, p2 or eta, got `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
}

impl Direction {
    fn holds(self, values: &[f64]) -> bool {
        values.windows(2).all(|w| match self {
            Direction::NonDecreasing => w[1] >= w[0],
            Direction::NonIncreasing => w[1] <= w[0],
        })
    }

    fn reversed(self) -> Self {
        match self {
            Direction::NonDecreasing => Direction::NonIncreasing,
            Direction::NonIncreasing => Direction::NonDecreasing,
        }
    }
}

pub fn linspace(from: f64, to: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![from],
        _ => (0..steps)
            .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
            .collect(),
    }
}

/// A feasible base point where the quality, α and η directions all hold.
/// `r_s` is the reserve at quality score 1 and `delta_eta_b` is the alliance
/// discount before disclosure.
pub fn default_sweep_base() -> BargainParams {
    BargainParams::new(150.0, 1000.0, 0.5, 0.6, 0.9, 0.1, 1.0).expect("valid base point")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub seller_extra: f64,
    pub buyer_extra: f64,
    /// Empty when the point priced cleanly.
    pub flag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DirectionCheck {
    pub seller: bool,
    pub buyer: bool,
}

impl SweepTable {
    /// Monotonicity over the rows that priced; flagged invalid points are skipped.
    pub fn check(&self) -> DirectionCheck {
        let ok: Vec<&SweepRow> = self.rows.iter().filter(|r| r.seller_extra.is_finite()).collect();
        let dir = self.param.seller_direction();
        DirectionCheck {
            seller: dir.holds(&ok.iter().map(|r| r.seller_extra).collect::<Vec<_>>()),
            buyer: dir.reversed().holds(&ok.iter().map(|r| r.buyer_extra).collect::<Vec<_>>()),
        }
    }
}

/// Parameters at one sweep point, all others held at `base`.
pub fn sweep_point(base: &BargainParams, which: SweepParam, value: f64) -> BargainParams {
    let mut p = *base;
    match which {
        SweepParam::Quality => p.r_s = base.r_s * value,
        SweepParam::Alpha => p.alpha = value,
        SweepParam::P2 => p.p2 = value,
        SweepParam::Eta => p.delta_eta_b = (1.0 + value) * base.delta_eta_b,
    }
    p
}

/// Equilibrium extras along `grid`. Invalid points stay in the table with
/// NaN extras and the reason in `flag`; infeasible prices are flagged too.
pub fn sweep(base: &BargainParams, which: SweepParam, grid: &[f64]) -> Result<SweepTable> {
    base.validate()?;
    let rows = grid
        .iter()
        .map(|&value| {
            let p = sweep_point(base, which, value);
            match equilibrium_price(&p) {
                Ok(r) => SweepRow {
                    value,
                    seller_extra: r.seller_extra,
                    buyer_extra: r.buyer_extra,
                    flag: if r.feasible { String::new() } else { "infeasible".into() },
                },
                Err(e) => SweepRow {
                    value,
                    seller_extra: f64::NAN,
                    buyer_extra: f64::NAN,
                    flag: format!("invalid: {e}"),
                },
            }
        })
        .collect();
    Ok(SweepTable { param: which, rows })
}
