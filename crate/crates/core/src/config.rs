//! TOML configuration.
//!
//! ```toml
//! [scenario]          # market simulation, see ScenarioConfig
//! seller_assumption = 1
//! buyer_demand = 1
//! eta = 0.1
//! budget_range = [600, 1000]
//!
//! [bargain]           # explicit negotiation for `bargain` and `sweep`
//! r_s = 150
//! r_b = 1000
//!
//! [ahp]
//! base = 9
//! tolerance = 1e-10
//! ```
//!
//! Every section and key is optional. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ahp::{DEFAULT_BASE, DEFAULT_TOL};
use crate::bargain::BargainParams;
use crate::error::{Error, Result};
use crate::market::{default_sweep_base, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub bargain: BargainSection,
    pub ahp: AhpSection,
}

/// Overrides on top of the default sweep base point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BargainSection {
    pub r_s: Option<f64>,
    pub r_b: Option<f64>,
    pub delta_s: Option<f64>,
    pub delta_eta_b: Option<f64>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AhpSection {
    pub base: f64,
    pub tolerance: f64,
}

impl Default for AhpSection {
    fn default() -> Self {
        Self {
            base: DEFAULT_BASE,
            tolerance: DEFAULT_TOL,
        }
    }
}

impl BargainSection {
    /// Applies the overrides and checks every field, naming the bad key.
    pub fn resolve(&self) -> Result<BargainParams> {
        let b = default_sweep_base();
        let p = BargainParams {
            r_s: self.r_s.unwrap_or(b.r_s),
            r_b: self.r_b.unwrap_or(b.r_b),
            delta_s: self.delta_s.unwrap_or(b.delta_s),
            delta_eta_b: self.delta_eta_b.unwrap_or(b.delta_eta_b),
            p1: self.p1.unwrap_or(b.p1),
            p2: self.p2.unwrap_or(b.p2),
            alpha: self.alpha.unwrap_or(b.alpha),
            tau: self.tau.unwrap_or(b.tau),
        };
        let checks: [(&str, f64, bool, &str); 8] = [
            ("bargain.r_s", p.r_s, p.r_s >= 0.0, "must be nonnegative"),
            ("bargain.r_b", p.r_b, p.r_b >= 0.0, "must be nonnegative"),
            ("bargain.delta_s", p.delta_s, (0.0..=1.0).contains(&p.delta_s), "must be in [0, 1]"),
            ("bargain.delta_eta_b", p.delta_eta_b, (0.0..1.0).contains(&p.delta_eta_b), "must be in [0, 1)"),
            ("bargain.p1", p.p1, p.p1 > 0.0 && p.p1 <= 1.0, "must be in (0, 1]"),
            ("bargain.p2", p.p2, p.p2 > 0.0 && p.p2 <= p.p1, "must be in (0, p1]"),
            ("bargain.alpha", p.alpha, p.alpha >= 0.0, "must be nonnegative"),
            ("bargain.tau", p.tau, (0.0..1.0).contains(&p.tau), "must be in [0, 1)"),
        ];
        for (key, value, ok, why) in checks {
            if !(ok && value.is_finite()) {
                return Err(Error::config(key, format!("{value} {why}")));
            }
        }
        if p.denominator() <= 0.0 {
            return Err(Error::config(
                "bargain.p1",
                format!("{} must exceed delta_s·delta_eta_b = {}", p.p1, p.delta_s * p.delta_eta_b),
            ));
        }
        Ok(p)
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.bargain.resolve()?;
        if !(self.ahp.base.is_finite() && self.ahp.base > 1.0) {
            return Err(Error::config("ahp.base", format!("{} must be greater than 1", self.ahp.base)));
        }
        if !(self.ahp.tolerance > 0.0 && self.ahp.tolerance < 1.0) {
            return Err(Error::config("ahp.tolerance", format!("{} must be in (0, 1)", self.ahp.tolerance)));
        }
        Ok(())
    }
}

/// Parses and validates a configuration document.
pub fn parse_config_str(text: &str) -> Result<Config> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Parse(e.to_string()))?;
    let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        Error::config(if key == "." { String::from("<root>") } else { key }, e.inner().message().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<Config> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read config `{}`: {e}", path.display())))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SellerAssumption;
    use crate::market::{BuyerDemand, OracleKind};

    fn key_of(e: Error) -> String {
        match e {
            Error::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config_str("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.scenario.p1, 0.9);
        assert_eq!(c.scenario.discount_k_choices, vec![7.0, 10.0, 15.0, 20.0]);
        assert_eq!(c.scenario.reserve_range, (200.0, 400.0));
        let c = parse_config_str("[scenario]\n").unwrap();
        assert_eq!(c.scenario, ScenarioConfig::default());
    }

    #[test]
    fn overrides() {
        let c = parse_config_str(
            "[scenario]\nseller_assumption = 2\nbuyer_demand = 2\neta = 0.2\nbudget_range = [700, 900]\noracle = \"trained\"\n\
             [bargain]\nr_s = 300\np2 = 0.45\n[ahp]\nbase = 5\n",
        )
        .unwrap();
        assert_eq!(c.scenario.seller_assumption, SellerAssumption::MonopolyOnly);
        assert_eq!(c.scenario.buyer_demand, BuyerDemand::AllCategories);
        assert_eq!(c.scenario.eta, 0.2);
        assert_eq!(c.scenario.budget_range, (700.0, 900.0));
        assert_eq!(c.scenario.oracle, OracleKind::Trained);
        let p = c.bargain.resolve().unwrap();
        assert_eq!((p.r_s, p.p2, p.r_b), (300.0, 0.45, 1000.0));
        assert_eq!(c.ahp.base, 5.0);
    }

    #[test]
    fn range_errors_name_the_key() {
        assert_eq!(key_of(parse_config_str("[scenario]\np1 = 1.5\n").unwrap_err()), "scenario.p1");
        assert_eq!(key_of(parse_config_str("[bargain]\np2 = 0.95\n").unwrap_err()), "bargain.p2");
        assert_eq!(key_of(parse_config_str("[ahp]\nbase = 1\n").unwrap_err()), "ahp.base");
        assert_eq!(
            key_of(parse_config_str("[scenario]\nbudget_range = [900, 600]\n").unwrap_err()),
            "scenario.budget_range"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse_config_str("[scenario]\nbudgets = [1, 2]\n").unwrap_err();
        assert!(e.to_string().contains("budgets"), "{e}");
        assert_eq!(key_of(e), "scenario.budgets");
        assert!(parse_config_str("[market]\n").is_err());
        assert_eq!(key_of(parse_config_str("[scenario]\nseller_assumption = 4\n").unwrap_err()), "scenario.seller_assumption");
    }

    #[test]
    fn syntax_errors_are_parse_errors() {
        assert!(matches!(parse_config_str("[scenario\n"), Err(Error::Parse(_))));
    }
}
