//! Alternating-offers bargaining between one seller and a buyer alliance
//! under one-sided uncertainty about the seller's type.
//!
//! The alliance opens with an offer, believing with probability `p1` that the
//! seller is a high-price type. After a rejection its belief drops to `p2`
//! and later stages reuse `p2`. Every stage discounts payoffs once more by
//! `delta_s` (seller) and `delta_eta_b` (alliance).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of one seller/alliance negotiation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BargainParams {
    pub r_s: f64,
    pub r_b: f64,
    pub delta_s: f64,
    pub delta_eta_b: f64,
    pub p1: f64,
    pub p2: f64,
    /// Seller's minimum acceptable margin.
    pub alpha: f64,
    /// Platform commission, taken from seller proceeds.
    #[serde(default)]
    pub tau: f64,
}

impl BargainParams {
    /// Builds and validates a parameter set with zero commission.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        r_s: f64,
        r_b: f64,
        delta_s: f64,
        delta_eta_b: f64,
        p1: f64,
        p2: f64,
        alpha: f64,
    ) -> Result<Self> {
        let p = Self {
            r_s,
            r_b,
            delta_s,
            delta_eta_b,
            p1,
            p2,
            alpha,
            tau: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        self.tau = tau;
        self.validate()?;
        Ok(self)
    }

    /// Checks the per-field ranges. The denominator condition
    /// `p1 > delta_s·delta_eta_b` is checked by [`equilibrium_price`].
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.r_s,
            self.r_b,
            self.delta_s,
            self.delta_eta_b,
            self.p1,
            self.p2,
            self.alpha,
            self.tau,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::validation("bargaining parameters must be finite"));
        }
        if self.r_s < 0.0 || self.r_b < 0.0 {
            return Err(Error::validation(format!(
                "reserve r_s = {} and budget r_b = {} must be nonnegative",
                self.r_s, self.r_b
            )));
        }
        if !(0.0..=1.0).contains(&self.delta_s) {
            return Err(Error::validation(format!("delta_s = {} must be in [0, 1]", self.delta_s)));
        }
        if !(0.0..1.0).contains(&self.delta_eta_b) {
            return Err(Error::validation(format!(
                "delta_eta_b = {} must be in [0, 1)",
                self.delta_eta_b
            )));
        }
        if !(self.p2 > 0.0 && self.p2 <= self.p1 && self.p1 <= 1.0) {
            return Err(Error::validation(format!(
                "beliefs need 0 < p2 <= p1 <= 1 (p1 = {}, p2 = {})",
                self.p1, self.p2
            )));
        }
        if self.alpha < 0.0 {
            return Err(Error::validation(format!("alpha = {} must be nonnegative", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::validation(format!("tau = {} must be in [0, 1)", self.tau)));
        }
        Ok(())
    }

    /// `p1 − delta_s·delta_eta_b`.
    pub fn denominator(&self) -> f64 {
        self.p1 - self.delta_s * self.delta_eta_b
    }

    /// Alliance's fallback when the seller turns out to be low-price:
    /// `r_b − (1 + α)·r_s`.
    fn fallback(&self) -> f64 {
        self.r_b - (1.0 + self.alpha) * self.r_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StagePayoffs {
    pub stage: u8,
    pub price: f64,
    /// Seller profit.
    pub is_profit: f64,
    /// Buyer-alliance profit.
    pub ib_profit: f64,
}

/// Discounted payoffs if `offer` is accepted at `stage` (1, 2 or 3).
pub fn stage_payoffs(params: &BargainParams, stage: u8, offer: f64) -> Result<StagePayoffs> {
    params.validate()?;
    let (belief, exponent) = match stage {
        1 => (params.p1, 0),
        2 => (params.p2, 1),
        3 => (params.p2, 2),
        _ => return Err(Error::validation(format!("stage must be 1, 2 or 3, got {stage}"))),
    };
    let ds = params.delta_s.powi(exponent);
    let db = params.delta_eta_b.powi(exponent);
    Ok(StagePayoffs {
        stage,
        price: offer,
        is_profit: ds * (offer - params.r_s),
        ib_profit: db * (belief * (params.r_b - offer) + (1.0 - belief) * params.fallback()),
    })
}

/// The alliance's stage-2 offer that leaves the seller indifferent to
/// waiting for `p3_price`: `P2 = r_s + δ_s·(P3 − r_s)`.
pub fn buyer_counteroffer(params: &BargainParams, p3_price: f64) -> f64 {
    params.r_s + params.delta_s * (p3_price - params.r_s)
}

/// Alliance's value of rejecting in stage 1 when the game continues toward
/// `p3_price`: `δ_ηb·[r_b − P2 − α(1 − p2)·r_s]` with `P2` the counteroffer.
///
/// Equilibrium pricing equates the stage-1 alliance payoff with this value.
pub fn stage_two_continuation(params: &BargainParams, p3_price: f64) -> f64 {
    let p2_price = buyer_counteroffer(params, p3_price);
    params.delta_eta_b * (params.r_b - p2_price - params.alpha * (1.0 - params.p2) * params.r_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub price: f64,
    /// `P − r_s`, or `P(1 − τ) − r_s` with a commission.
    pub seller_extra: f64,
    pub buyer_extra: f64,
    /// `r_s ≤ P ≤ r_b`.
    pub feasible: bool,
}

impl EquilibriumResult {
    pub fn from_price(params: &BargainParams, price: f64) -> Self {
        Self {
            price,
            seller_extra: price * (1.0 - params.tau) - params.r_s,
            buyer_extra: params.r_b - price,
            feasible: params.r_s <= price && price <= params.r_b,
        }
    }
}

/// Stationary equilibrium price
///
/// ```text
/// P = r_s + [(1 − δ_ηb)·r_b + (α(p1 − 1) + δ_ηb(1 − α(p2 − 1)) − 1)·r_s] / (p1 − δ_s·δ_ηb)
/// ```
///
/// Prices outside `[r_s, r_b]` are returned with `feasible = false`.
pub fn equilibrium_price(params: &BargainParams) -> Result<EquilibriumResult> {
    params.validate()?;
    let d = params.denominator();
    if d <= 0.0 {
        return Err(Error::Parameter(format!(
            "p1 = {} must exceed delta_s·delta_eta_b = {}",
            params.p1,
            params.delta_s * params.delta_eta_b
        )));
    }
    let BargainParams {
        r_s,
        r_b,
        delta_eta_b: db,
        p1,
        p2,
        alpha,
        ..
    } = *params;
    let numerator = (1.0 - db) * r_b + (alpha * (p1 - 1.0) + db * (1.0 - alpha * (p2 - 1.0)) - 1.0) * r_s;
    Ok(EquilibriumResult::from_price(params, r_s + numerator / d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    pub price: f64,
    /// Index of the iterate that was returned.
    pub iterations: usize,
}

/// Solves the stationarity condition by direct iteration: each step picks the
/// stage-1 price whose alliance payoff matches the continuation value of the
/// previous price, `IB1(P_{t+1}) = continuation(P_t)`.
///
/// The map contracts with factor `δ_s·δ_ηb / p1`. Iteration stops at the
/// first `t` with `|P_{t+1} − P_t| ≤ tol·max(1, |P_t|)`.
pub fn fixed_point_oracle(params: &BargainParams, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    params.validate()?;
    if params.denominator() <= 0.0 {
        return Err(Error::Parameter(format!(
            "p1 = {} must exceed delta_s·delta_eta_b = {}",
            params.p1,
            params.delta_s * params.delta_eta_b
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::validation("tolerance must be positive"));
    }
    let anchor = params.r_b - (1.0 - params.p1) * (1.0 + params.alpha) * params.r_s;
    let mut price = params.r_s;
    for t in 0..max_iter {
        let next = (anchor - stage_two_continuation(params, price)) / params.p1;
        if !next.is_finite() {
            return Err(Error::Numeric(format!("fixed-point iterate {} is not finite", t + 1)));
        }
        if (next - price).abs() <= tol * price.abs().max(1.0) {
            return Ok(FixedPoint { price, iterations: t });
        }
        price = next;
    }
    Err(Error::Numeric(format!(
        "fixed-point iteration did not converge in {max_iter} steps; last iterate {price}"
    )))
}

/// Complete-information alternating-offers split of a unit surplus:
/// `((1 − δ_b)/(1 − δ_b·δ_a), δ_a(1 − δ_b)/(1 − δ_b·δ_a))`.
pub fn classical_rubinstein_shares(delta_a: f64, delta_b: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&delta_a) || !(0.0..=1.0).contains(&delta_b) {
        return Err(Error::validation(format!(
            "discount factors must be in [0, 1] (delta_a = {delta_a}, delta_b = {delta_b})"
        )));
    }
    let d = 1.0 - delta_a * delta_b;
    if d <= 0.0 {
        return Err(Error::Parameter("delta_a·delta_b = 1 leaves the split undefined".into()));
    }
    Ok(((1.0 - delta_b) / d, delta_a * (1.0 - delta_b) / d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> BargainParams {
        BargainParams::new(300.0, 800.0, 0.5, 0.3, 0.9, 0.45, 0.2).unwrap()
    }

    #[test]
    fn validation() {
        assert!(BargainParams::new(300.0, 800.0, 0.5, 0.3, 0.9, 0.95, 0.2).is_err());
        assert!(BargainParams::new(300.0, 800.0, 0.5, 0.3, 0.9, 0.0, 0.2).is_err());
        assert!(BargainParams::new(300.0, 800.0, 0.5, 1.0, 0.9, 0.4, 0.2).is_err());
        assert!(BargainParams::new(-1.0, 800.0, 0.5, 0.3, 0.9, 0.4, 0.2).is_err());
        assert!(BargainParams::new(300.0, 800.0, 0.5, 0.3, 0.9, 0.4, -0.1).is_err());
        assert!(example().with_tau(1.0).is_err());
    }

    #[test]
    fn stage_one_examples() {
        let p = BargainParams::new(300.0, 800.0, 0.5, 0.3, 1.0, 1.0, 0.0).unwrap();
        let s = stage_payoffs(&p, 1, 300.0).unwrap();
        assert_eq!((s.is_profit, s.ib_profit), (0.0, 500.0));
        let s = stage_payoffs(&example(), 1, 700.0).unwrap();
        assert!((s.is_profit - 400.0).abs() < 1e-9);
        // 0.9·100 + 0.1·(800 − 360)
        assert!((s.ib_profit - 134.0).abs() < 1e-9);
    }

    #[test]
    fn later_stages_discount() {
        let p = BargainParams::new(300.0, 800.0, 0.0, 0.3, 0.9, 0.45, 0.2).unwrap();
        assert_eq!(stage_payoffs(&p, 2, 750.0).unwrap().is_profit, 0.0);
        let e = example();
        let s2 = stage_payoffs(&e, 2, 600.0).unwrap();
        let s3 = stage_payoffs(&e, 3, 600.0).unwrap();
        assert!((s2.is_profit - 150.0).abs() < 1e-12);
        assert!((s3.is_profit - 75.0).abs() < 1e-12);
        assert!((s3.ib_profit - 0.3 * s2.ib_profit).abs() < 1e-9);
        assert!(stage_payoffs(&e, 4, 600.0).is_err());
        assert!(stage_payoffs(&e, 0, 600.0).is_err());
    }

    #[test]
    fn counteroffer_examples() {
        let e = example();
        assert!((buyer_counteroffer(&e, 771.8667) - 535.93335).abs() < 1e-9);
        let mut impatient = e;
        impatient.delta_s = 0.0;
        assert_eq!(buyer_counteroffer(&impatient, 900.0), 300.0);
        let mut patient = e;
        patient.delta_s = 1.0;
        assert_eq!(buyer_counteroffer(&patient, 900.0), 900.0);
    }

    #[test]
    fn equilibrium_example() {
        let r = equilibrium_price(&example()).unwrap();
        // (500·0.7 + 300·(−0.02 + 0.3·1.11 − 1)) / 0.75 = 471.8666…
        assert!((r.price - 771.866_666_666_666_7).abs() < 1e-9);
        assert!((r.seller_extra - 471.866_666_666_666_7).abs() < 1e-9);
        assert!((r.buyer_extra - 28.133_333_333_333_3).abs() < 1e-9);
        assert!(r.feasible);
        let fp = fixed_point_oracle(&example(), 1e-13, 10_000).unwrap();
        assert!((fp.price - r.price).abs() < 1e-9);
        // P2 of the equilibrium path
        assert!((buyer_counteroffer(&example(), r.price) - 535.933_333_333_333_3).abs() < 1e-9);
    }

    #[test]
    fn trivial_equilibria() {
        let p = BargainParams::new(200.0, 700.0, 0.4, 0.0, 1.0, 0.5, 0.0).unwrap();
        assert!((equilibrium_price(&p).unwrap().price - 700.0).abs() < 1e-12);
        let bad = BargainParams::new(200.0, 700.0, 1.0, 0.9, 0.8, 0.5, 0.0).unwrap();
        assert!(matches!(equilibrium_price(&bad), Err(Error::Parameter(_))));
        assert!(matches!(fixed_point_oracle(&bad, 1e-12, 100), Err(Error::Parameter(_))));
    }

    #[test]
    fn infeasible_prices_are_flagged() {
        // Reserve above budget: the price cannot sit inside [r_s, r_b].
        let p = BargainParams::new(900.0, 800.0, 0.5, 0.3, 0.9, 0.45, 0.2).unwrap();
        let r = equilibrium_price(&p).unwrap();
        assert!(!r.feasible);
        assert!((r.seller_extra + r.buyer_extra - (800.0 - 900.0)).abs() < 1e-9);
    }

    #[test]
    fn commission_reduces_seller_proceeds() {
        let p = example().with_tau(0.1).unwrap();
        let r = equilibrium_price(&p).unwrap();
        assert!((r.seller_extra - (r.price * 0.9 - 300.0)).abs() < 1e-12);
        assert_eq!(r.price, equilibrium_price(&example()).unwrap().price);
    }

    #[test]
    fn classical_shares() {
        let (a, b) = classical_rubinstein_shares(0.9, 0.9).unwrap();
        assert!((a - 0.526_315_789_473_684_2).abs() < 1e-12);
        assert!((b - 0.473_684_210_526_315_8).abs() < 1e-12);
        assert_eq!(classical_rubinstein_shares(0.6, 0.0).unwrap(), (1.0, 0.6));
        let (a, _) = classical_rubinstein_shares(0.7, 0.7).unwrap();
        assert!((a - 1.0 / 1.7).abs() < 1e-12);
        assert!(classical_rubinstein_shares(1.0, 1.0).is_err());
    }

    #[test]
    fn classical_reduction() {
        for (ds, db) in [(0.3, 0.6), (0.9, 0.2), (0.0, 0.5), (1.0, 0.8)] {
            let p = BargainParams::new(0.0, 1.0, ds, db, 1.0, 1.0, 0.0).unwrap();
            let want = classical_rubinstein_shares(ds, db).unwrap().0;
            assert!((equilibrium_price(&p).unwrap().price - want).abs() < 1e-12);
            assert!((fixed_point_oracle(&p, 1e-14, 100_000).unwrap().price - want).abs() < 1e-12);
        }
    }

    #[test]
    fn impatient_seller_converges_in_one_step() {
        let p = BargainParams::new(300.0, 800.0, 0.0, 0.3, 0.9, 0.45, 0.2).unwrap();
        let fp = fixed_point_oracle(&p, 1e-12, 10).unwrap();
        assert_eq!(fp.iterations, 1);
        assert!((fp.price - equilibrium_price(&p).unwrap().price).abs() < 1e-9);
    }

    #[test]
    fn non_convergence_reports_last_iterate() {
        let err = fixed_point_oracle(&example(), 1e-15, 2).unwrap_err();
        assert!(matches!(&err, Error::Numeric(m) if m.contains("last iterate")), "{err}");
    }

    fn params() -> impl Strategy<Value = BargainParams> {
        (
            0.0f64..500.0,
            0.0f64..1500.0,
            0.0f64..1.0,
            0.0f64..0.95,
            0.05f64..1.0,
            0.01f64..1.0,
            0.0f64..1.0,
        )
            .prop_filter_map("denominator", |(rs, rb, ds, db, p1, f2, a)| {
                let p = BargainParams::new(rs, rb, ds, db, p1, f2 * p1, a).ok()?;
                (ds * db / p1 < 0.95).then_some(p)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn oracle_agrees_with_closed_form(p in params()) {
            let closed = equilibrium_price(&p).unwrap().price;
            let fp = fixed_point_oracle(&p, 1e-13, 1_000_000).unwrap().price;
            prop_assert!((closed - fp).abs() <= 1e-9 * closed.abs().max(1.0), "{closed} vs {fp}");
        }

        #[test]
        fn extras_sum_to_surplus(p in params()) {
            let r = equilibrium_price(&p).unwrap();
            prop_assert!((r.seller_extra + r.buyer_extra - (p.r_b - p.r_s)).abs() <= 1e-9 * p.r_b.max(1.0));
            prop_assert_eq!(r.feasible, p.r_s <= r.price && r.price <= p.r_b);
        }

        #[test]
        fn counteroffer_indifference(p in params(), p3 in 0.0f64..2000.0) {
            let is2 = stage_payoffs(&p, 2, buyer_counteroffer(&p, p3)).unwrap().is_profit;
            let is3 = stage_payoffs(&p, 3, p3).unwrap().is_profit;
            prop_assert!((is2 - is3).abs() <= 1e-12 * p3.max(1.0) * 10.0);
        }
    }
}
