//! Buyer satisfaction, logistic discount factors and buyer-alliance aggregates.

use serde::Serialize;

use crate::ahp::WeightVector;
use crate::error::{Error, Result};
use crate::quality::QualityVector;
use crate::shapley::UtilityMatrix;

/// Satisfaction weights in indicator order: accuracy, completeness,
/// consistency, timeliness, buyer utility.
pub const DEFAULT_SATISFACTION_WEIGHTS: [f64; 5] = [0.27, 0.10, 0.16, 0.05, 0.42];

pub fn default_satisfaction_weights() -> WeightVector {
    WeightVector::new(DEFAULT_SATISFACTION_WEIGHTS.to_vec()).expect("defaults sum to one")
}

/// Satisfaction of one buyer with one seller's dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SatisfactionScore {
    pub buyer_id: String,
    pub seller_id: String,
    pub value: f64,
}

impl SatisfactionScore {
    pub fn compute(
        buyer_id: impl Into<String>,
        seller_id: impl Into<String>,
        xi: f64,
        q: &QualityVector,
        w5: &WeightVector,
    ) -> Result<Self> {
        Ok(Self {
            buyer_id: buyer_id.into(),
            seller_id: seller_id.into(),
            value: buyer_satisfaction(xi, q, w5)?,
        })
    }
}

/// `I = W_ξ·ξ + Σ W_i·C_i` for `ξ > 0`, and `0` for `ξ = 0`.
pub fn buyer_satisfaction(xi: f64, q: &QualityVector, w5: &WeightVector) -> Result<f64> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::validation(format!("utility ξ = {xi} is outside [0, 1]")));
    }
    if w5.len() != 5 {
        return Err(Error::validation(format!(
            "satisfaction weights need 5 entries, got {}",
            w5.len()
        )));
    }
    if xi == 0.0 {
        return Ok(0.0);
    }
    let w = w5.as_slice();
    let quality: f64 = q.scores().iter().zip(&w[..4]).map(|(c, w)| c * w).sum();
    Ok(w[4] * xi + quality)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscountParams {
    pub k: f64,
    pub midpoint: f64,
    pub eta: f64,
}

impl DiscountParams {
    pub fn new(k: f64, midpoint: f64, eta: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::validation(format!("logistic steepness k = {k} must be positive")));
        }
        if !midpoint.is_finite() {
            return Err(Error::validation("logistic midpoint must be finite"));
        }
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::validation(format!("disclosure η = {eta} must be in [0, 1)")));
        }
        Ok(Self { k, midpoint, eta })
    }
}

/// `δ = 1 − 1/(1 + e^{−k(I − midpoint)})`, in `(0, 1)`, decreasing in `I`.
pub fn logistic_discount(satisfaction: f64, p: &DiscountParams) -> f64 {
    // 1 − σ(−z) written as 1/(1 + e^{z}) to avoid cancellation.
    1.0 / (1.0 + (p.k * (satisfaction - p.midpoint)).exp())
}

/// Budget-share weighted alliance discount `Σ (u_i/Σu)·δ_i`.
pub fn alliance_discount(deltas: &[f64], budgets: &[f64]) -> Result<f64> {
    if deltas.len() != budgets.len() {
        return Err(Error::validation("discounts and budgets have different lengths"));
    }
    if budgets.iter().any(|u| !(u.is_finite() && *u >= 0.0)) {
        return Err(Error::validation("budgets must be nonnegative"));
    }
    let total: f64 = budgets.iter().sum();
    if total <= 0.0 {
        return Err(Error::validation("alliance budgets sum to zero"));
    }
    Ok(deltas.iter().zip(budgets).map(|(d, u)| d * u / total).sum())
}

/// `δ_ηb = (1 + η)·δ_b`. A result ≥ 1 is an error, never clamped.
pub fn platform_adjust(delta_b: f64, eta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::validation(format!("disclosure η = {eta} must be in [0, 1)")));
    }
    let adjusted = (1.0 + eta) * delta_b;
    if adjusted >= 1.0 {
        return Err(Error::Parameter(format!(
            "platform-adjusted discount (1 + {eta})·{delta_b} = {adjusted} is not below 1"
        )));
    }
    Ok(adjusted)
}

/// Alliance budget for one seller: `r_b = Σ_i ξ_{i,j}·u_i` over row-normalized utilities.
pub fn alliance_budget(xi: &UtilityMatrix, budgets: &[f64], seller: usize) -> Result<f64> {
    if budgets.len() != xi.buyer_ids.len() {
        return Err(Error::validation("one budget per buyer is required"));
    }
    if !xi.normalized {
        return Err(Error::validation("alliance budgets need a row-normalized utility matrix"));
    }
    if seller >= xi.seller_ids.len() {
        return Err(Error::validation(format!("seller index {seller} out of range")));
    }
    Ok(xi.xi.iter().zip(budgets).map(|(row, u)| row[seller] * u).sum())
}

/// The buyer alliance as one seller sees it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllianceView {
    pub seller_id: String,
    /// Buyers with nonzero utility for this seller.
    pub members: Vec<usize>,
    pub delta_b: f64,
    pub delta_eta_b: f64,
    pub r_b: f64,
}

/// Aggregates per-buyer discounts for `seller`. Buyers with zero utility for
/// the seller are left out of both the discount and the budget.
///
/// Returns `Ok(None)` when no buyer values the seller's data.
pub fn alliance_view(
    xi: &UtilityMatrix,
    budgets: &[f64],
    buyer_discounts: &[f64],
    seller: usize,
    eta: f64,
) -> Result<Option<AllianceView>> {
    if buyer_discounts.len() != budgets.len() {
        return Err(Error::validation("one discount per buyer is required"));
    }
    let r_b = alliance_budget(xi, budgets, seller)?;
    let members: Vec<usize> = (0..budgets.len()).filter(|&i| xi.get(i, seller) > 0.0).collect();
    if members.is_empty() {
        return Ok(None);
    }
    let deltas: Vec<f64> = members.iter().map(|&i| buyer_discounts[i]).collect();
    let weights: Vec<f64> = members.iter().map(|&i| budgets[i]).collect();
    let delta_b = alliance_discount(&deltas, &weights)?;
    let delta_eta_b = platform_adjust(delta_b, eta)?;
    Ok(Some(AllianceView {
        seller_id: xi.seller_ids[seller].clone(),
        members,
        delta_b,
        delta_eta_b,
        r_b,
    }))
}
