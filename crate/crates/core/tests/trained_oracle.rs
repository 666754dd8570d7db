//! Smoke runs of the market with buyers' models actually trained.

use datamarket::corpus::SellerAssumption;
use datamarket::market::{utility_matrix, BuyerDemand, Market, OracleKind, ScenarioConfig};

fn small(assumption: SellerAssumption, demand: BuyerDemand) -> ScenarioConfig {
    ScenarioConfig {
        seller_assumption: assumption,
        buyer_demand: demand,
        oracle: OracleKind::Trained,
        docs_per_category: 30,
        ..ScenarioConfig::default()
    }
}

#[test]
fn trained_market_runs() {
    let market = Market::new(small(SellerAssumption::MonopolyPlusShare, BuyerDemand::Mixed)).unwrap();
    let run = market.run_seed(1).unwrap();
    assert_eq!(run.records.len(), 8);
    for row in &run.utility.xi {
        let s: f64 = row.iter().sum();
        assert!(s == 0.0 || (s - 1.0).abs() < 1e-9);
    }
    // only S1 holds the category B1 asks for
    assert!(run.utility.get(0, 0) > 0.5, "{:?}", run.utility.xi[0]);
}

#[test]
fn trained_utilities_are_deterministic() {
    let cfg = small(SellerAssumption::MonopolyOnly, BuyerDemand::Mixed);
    let market = Market::new(cfg.clone()).unwrap();
    let scenario = market.scenario(3).unwrap();
    let a = market.run_seed(3).unwrap().utility;
    let b = market.run_seed(3).unwrap().utility;
    assert_eq!(a, b);
    assert_eq!(scenario.buyers.len(), 4);
    // a count-only oracle is also available for the same scenario
    let synthetic = ScenarioConfig {
        oracle: OracleKind::Synthetic,
        ..cfg
    };
    let xi = utility_matrix(&synthetic, &scenario, None).unwrap();
    assert_eq!(xi.get(2, 0), 0.0);
}
