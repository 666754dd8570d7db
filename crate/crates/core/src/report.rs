//! CSV and JSON output. Every file starts with a versioned schema line
//! (`# datamarket <kind> v1` for CSV, a `schema` field for JSON).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{ParticipantSummary, RunRecord, SatisfactionRow, ScenarioConfig, SweepTable};
use crate::shapley::UtilityMatrix;

pub const RECORDS_SCHEMA: &str = "# datamarket records v1";
pub const SWEEP_SCHEMA: &str = "# datamarket sweep v1";
pub const UTILITY_SCHEMA: &str = "# datamarket utility v1";
pub const SATISFACTION_SCHEMA: &str = "# datamarket satisfaction v1";
pub const SUMMARY_SCHEMA: &str = "datamarket summary v1";

pub fn records_csv(records: &[RunRecord]) -> String {
    let mut out = format!("{RECORDS_SCHEMA}\nseed,kind,id,reserve_or_budget,price_or_payment,extra_profit,feasible\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{}",
            r.seed, r.kind, r.id, r.reserve_or_budget, r.price_or_payment, r.extra_profit, r.feasible
        );
    }
    out
}

pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = format!("{SWEEP_SCHEMA}\nparam,value,seller_extra,buyer_extra,flag\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{}",
            table.param, r.value, r.seller_extra, r.buyer_extra, r.flag
        );
    }
    out
}

pub fn utility_csv(xi: &UtilityMatrix) -> String {
    let mut out = format!("{UTILITY_SCHEMA}\nbuyer,{}\n", xi.seller_ids.join(","));
    for (b, row) in xi.buyer_ids.iter().zip(&xi.xi) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        let _ = writeln!(out, "{b},{}", cells.join(","));
    }
    out
}

pub fn satisfaction_csv(rows: &[SatisfactionRow]) -> String {
    let mut out = format!("{SATISFACTION_SCHEMA}\nbuyer,seller,xi,satisfaction,discount\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6}",
            r.buyer_id, r.seller_id, r.xi, r.satisfaction, r.discount
        );
    }
    out
}

#[derive(Serialize)]
struct Summary<'a> {
    schema: &'static str,
    seeds: &'a [u64],
    scenario: &'a ScenarioConfig,
    participants: &'a [ParticipantSummary],
}

pub fn summary_json(scenario: &ScenarioConfig, seeds: &[u64], participants: &[ParticipantSummary]) -> Result<String> {
    let s = Summary {
        schema: SUMMARY_SCHEMA,
        seeds,
        scenario,
        participants,
    };
    let mut text = serde_json::to_string_pretty(&s).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create `{}`: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::Io(format!("cannot write `{}`: {e}", path.display())))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{default_sweep_base, sweep, ParticipantKind, SweepParam};

    #[test]
    fn records_layout() {
        let r = RunRecord {
            seed: 4,
            kind: ParticipantKind::Buyer,
            id: "B2".into(),
            reserve_or_budget: 800.0,
            price_or_payment: 612.25,
            extra_profit: 187.75,
            feasible: true,
        };
        let csv = records_csv(&[r]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], RECORDS_SCHEMA);
        assert_eq!(lines[1], "seed,kind,id,reserve_or_budget,price_or_payment,extra_profit,feasible");
        assert_eq!(lines[2], "4,buyer,B2,800.000000,612.250000,187.750000,true");
    }

    #[test]
    fn sweep_layout() {
        let t = sweep(&default_sweep_base(), SweepParam::Eta, &[0.0, 0.5]).unwrap();
        let csv = sweep_csv(&t);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(2).unwrap().starts_with("eta,0.000000,"));
    }

    #[test]
    fn summary_has_schema() {
        let json = summary_json(&ScenarioConfig::default(), &[1, 2], &[]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["schema"], SUMMARY_SCHEMA);
        assert_eq!(v["scenario"]["p1"], 0.9);
    }
}
