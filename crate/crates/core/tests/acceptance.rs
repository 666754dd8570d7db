//! Acceptance gate. Each test checks one criterion and prints a single
//! `criterion N ... PASS|FAIL` line with the measured values.

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use datamarket::ahp::{derive_weights, weights_from_ratios, JudgmentMatrix, RatioMatrix, DEFAULT_BASE};
use datamarket::bargain::{classical_rubinstein_shares, equilibrium_price, fixed_point_oracle, BargainParams};
use datamarket::corpus::SellerAssumption;
use datamarket::market::{
    aggregate, default_sweep_base, seed_range, sweep, BuyerDemand, Market, ParticipantKind, ScenarioConfig,
    SweepParam,
};
use datamarket::shapley::{
    coalition_values, shapley_exact, shapley_permutation_oracle, CountingOracle, DataShard, EvalOracle, ModelKind,
    TestSpec,
};
use datamarket::Result;

fn report(n: u32, name: &str, checks: &[(String, bool)], elapsed: Duration, budget: Duration) {
    let timely = elapsed <= budget;
    let pass = timely && checks.iter().all(|(_, ok)| *ok);
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(m, _)| m.as_str()).collect();
    eprintln!(
        "criterion {n} {name}: {} ({} checks, {:.3}s of {:.0}s){}",
        if pass { "PASS" } else { "FAIL" },
        checks.len(),
        elapsed.as_secs_f64(),
        budget.as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join("; ")) }
    );
    assert!(timely, "criterion {n} took {elapsed:?}, budget {budget:?}");
    assert!(failed.is_empty(), "criterion {n} failed: {failed:?}");
}

fn check(checks: &mut Vec<(String, bool)>, msg: String, ok: bool) {
    checks.push((msg, ok));
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[test]
fn criterion_1_ahp_published_matrix() {
    let start = Instant::now();
    let (w, r) = weights_from_ratios(&RatioMatrix::published_fixture()).unwrap();
    let elapsed = start.elapsed();
    let mut c = Vec::new();
    check(&mut c, format!("lambda_max {:.6} vs 5.00437", r.lambda_max), (r.lambda_max - 5.00437).abs() <= 1e-3);
    check(&mut c, format!("CI {:.7} vs 0.0010927", r.ci), (r.ci - 0.0010927).abs() <= 1e-4);
    check(&mut c, format!("CR {:.8} vs 0.00098214", r.cr), (r.cr - 0.00098214).abs() <= 1e-4);
    let published = [0.2693, 0.0950, 0.1647, 0.0516, 0.4195];
    for (i, (got, want)) in w.as_slice().iter().zip(published).enumerate() {
        check(&mut c, format!("W{} {got:.4} vs {want}", i + 1), (got - want).abs() <= 0.005);
    }
    let rounded = [0.27, 0.10, 0.16, 0.05, 0.42];
    for (i, (got, want)) in w.as_slice().iter().zip(rounded).enumerate() {
        check(
            &mut c,
            format!("rounded W{} {:.2} vs {want:.2}", i + 1, round2(*got)),
            (round2(*got) - want).abs() < 1e-9,
        );
    }
    report(1, "AHP fixture replication", &c, elapsed, Duration::from_secs(1));
}

#[test]
fn criterion_2_quality_weights() {
    let start = Instant::now();
    let (w, _) = derive_weights(&JudgmentMatrix::quality_fixture(), DEFAULT_BASE).unwrap();
    let elapsed = start.elapsed();
    let mut c = Vec::new();
    for (i, (got, want)) in w.as_slice().iter().zip([0.55, 0.13, 0.26, 0.06]).enumerate() {
        check(
            &mut c,
            format!("rounded C{} {:.2} vs {want}", i + 1, round2(*got)),
            (round2(*got) - want).abs() <= 0.01 + 1e-9,
        );
    }
    report(2, "quality-only weights", &c, elapsed, Duration::from_secs(1));
}

#[test]
fn criterion_3_classical_reduction() {
    let start = Instant::now();
    let mut c = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let ds = i as f64 / 10.0;
            let db = j as f64 / 10.0;
            let p = BargainParams::new(0.0, 1.0, ds, db, 1.0, 1.0, 0.0).unwrap();
            let got = equilibrium_price(&p).unwrap().price;
            let want = classical_rubinstein_shares(ds, db).unwrap().0;
            worst = worst.max((got - want).abs());
        }
    }
    check(&mut c, format!("max |P - (1-db)/(1-ds db)| = {worst:.2e} over 100 points"), worst <= 1e-12);
    report(3, "classical reduction", &c, start.elapsed(), Duration::from_secs(1));
}

/// Draws over the whole valid region, keeping `p1 − δ_s·δ_ηb ≥ 0.01` so the
/// iteration contracts by at most 0.99 per step.
fn random_params(rng: &mut ChaCha8Rng) -> BargainParams {
    loop {
        let r_s = rng.gen_range(0.0..500.0);
        let r_b = rng.gen_range(0.0..1500.0);
        let ds: f64 = rng.gen();
        let db: f64 = rng.gen();
        let p1 = 1.0 - rng.gen::<f64>();
        let p2 = p1 * (1.0 - rng.gen::<f64>());
        let alpha = rng.gen_range(0.0..1.0);
        if p1 - ds * db < 0.01 {
            continue;
        }
        if let Ok(p) = BargainParams::new(r_s, r_b, ds, db, p1, p2, alpha) {
            return p;
        }
    }
}

#[test]
fn criterion_4_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut worst: f64 = 0.0;
    let n = 2000;
    for _ in 0..n {
        let p = random_params(&mut rng);
        let closed = equilibrium_price(&p).unwrap().price;
        let oracle = fixed_point_oracle(&p, 1e-13, 1_000_000).unwrap().price;
        worst = worst.max((closed - oracle).abs() / closed.abs().max(1.0));
    }
    let mut c = Vec::new();
    check(&mut c, format!("max relative gap {worst:.2e} over {n} draws"), worst <= 1e-9);
    report(4, "oracle equivalence", &c, start.elapsed(), Duration::from_secs(10));
}

/// Coalition value read from a random table, keyed by the shards' indices.
struct TableGame {
    values: Vec<f64>,
}

impl EvalOracle for TableGame {
    fn evaluate(&self, shards: &[&DataShard], _: &TestSpec, _: &ModelKind) -> Result<f64> {
        let mask = shards
            .iter()
            .map(|s| 1usize << s.seller_id[1..].parse::<usize>().unwrap())
            .sum::<usize>();
        Ok(self.values[mask])
    }
}

fn players(n: usize) -> Vec<DataShard> {
    (0..n).map(|i| DataShard::from_counts(format!("P{i}"), [("x", 1)])).collect()
}

#[test]
fn criterion_5_shapley_axioms_and_oracle() {
    let start = Instant::now();
    let spec = TestSpec::for_categories("B", ["x"]).unwrap();
    let model = ModelKind::SyntheticCoverage { diminishing: 0.5 };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut c = Vec::new();
    let (mut gap, mut eff, mut sym, mut null): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let mut calls_ok = true;
    let mut instances = 0;
    for n in 1..=6usize {
        for _ in 0..40 {
            instances += 1;
            let mut values: Vec<f64> = (0..1usize << n).map(|_| rng.gen_range(-1.0..2.0)).collect();
            // last player is null, the first two are symmetric
            for m in 0..1usize << n {
                if n >= 2 && m & (1 << (n - 1)) != 0 {
                    values[m] = values[m & !(1 << (n - 1))];
                }
            }
            if n >= 3 {
                for m in 0..1usize << n {
                    let swapped = (m & !3) | ((m & 1) << 1) | ((m & 2) >> 1);
                    if swapped > m {
                        values[swapped] = values[m];
                    }
                }
            }
            let game = CountingOracle::new(TableGame { values: values.clone() });
            let shards = players(n);
            let phi = shapley_exact(&shards, &game, &spec, &model).unwrap();
            calls_ok &= game.calls() == 1 << n;
            let perm = shapley_permutation_oracle(&shards, &TableGame { values: values.clone() }, &spec, &model).unwrap();
            for (a, b) in phi.iter().zip(&perm) {
                gap = gap.max((a - b).abs());
            }
            let total: f64 = phi.iter().sum();
            eff = eff.max((total - (values[(1 << n) - 1] - values[0])).abs());
            if n >= 2 {
                null = null.max(phi[n - 1].abs());
            }
            if n >= 3 {
                sym = sym.max((phi[0] - phi[1]).abs());
            }
        }
    }
    check(&mut c, format!("exact vs permutation max gap {gap:.2e} over {instances} games"), gap <= 1e-12);
    check(&mut c, format!("efficiency max error {eff:.2e}"), eff <= 1e-12);
    check(&mut c, format!("symmetry max error {sym:.2e}"), sym <= 1e-12);
    check(&mut c, format!("null player max |phi| {null:.2e}"), null <= 1e-12);
    check(&mut c, "oracle calls equal 2^n on every run".into(), calls_ok);

    // the same properties on coverage games over real-looking shards
    let shards = vec![
        DataShard::from_counts("P0", [("a", 3), ("b", 1)]),
        DataShard::from_counts("P1", [("a", 3), ("b", 1)]),
        DataShard::from_counts("P2", [("c", 4)]),
    ];
    let spec = TestSpec::for_categories("B", ["a", "b"]).unwrap();
    let oracle = datamarket::shapley::synthetic_coverage_oracle(spec.required_categories.clone(), 0.5).unwrap();
    let counting = CountingOracle::new(&oracle);
    let phi = shapley_exact(&shards, &counting, &spec, &model).unwrap();
    let v = coalition_values(&shards, &oracle, &spec, &model).unwrap();
    check(&mut c, "coverage game: 8 oracle calls".into(), counting.calls() == 8);
    check(&mut c, format!("coverage game: efficiency {:.2e}", (phi.iter().sum::<f64>() - v[7]).abs()), (phi.iter().sum::<f64>() - v[7]).abs() <= 1e-12);
    check(&mut c, "coverage game: symmetric shards equal".into(), (phi[0] - phi[1]).abs() <= 1e-12);
    check(&mut c, "coverage game: irrelevant shard is null".into(), phi[2].abs() <= 1e-12);
    let _: BTreeSet<String> = spec.required_categories;
    report(5, "Shapley axioms and oracle", &c, start.elapsed(), Duration::from_secs(10));
}

#[test]
fn criterion_6_sensitivity_directions() {
    let start = Instant::now();
    let base = default_sweep_base();
    let mut c = Vec::new();
    for p in SweepParam::ALL {
        let grid = p.default_grid(&base);
        let t = sweep(&base, p, &grid).unwrap();
        let priced = t.rows.iter().filter(|r| r.seller_extra.is_finite()).count();
        let dc = t.check();
        let first = &t.rows[0];
        let last = &t.rows[t.rows.len() - 1];
        check(&mut c, format!("{p}: all {} points priced", grid.len()), priced == grid.len() && grid.len() == 11);
        check(
            &mut c,
            format!(
                "{p}: seller extra {:?} ({:.2} -> {:.2})",
                p.seller_direction(),
                first.seller_extra,
                last.seller_extra
            ),
            dc.seller,
        );
        check(
            &mut c,
            format!("{p}: buyer extra opposite ({:.2} -> {:.2})", first.buyer_extra, last.buyer_extra),
            dc.buyer,
        );
    }
    report(6, "sensitivity directions", &c, start.elapsed(), Duration::from_secs(5));
}

fn seller_medians(a: SellerAssumption, d: BuyerDemand) -> Vec<f64> {
    let cfg = ScenarioConfig {
        seller_assumption: a,
        buyer_demand: d,
        ..ScenarioConfig::default()
    };
    let market = Market::new(cfg).unwrap();
    let records = market.run_seeds(&seed_range(1, 200)).unwrap();
    aggregate(&records)
        .unwrap()
        .into_iter()
        .filter(|s| s.kind == ParticipantKind::Seller)
        .map(|s| s.median_extra)
        .collect()
}

#[test]
fn criterion_7_scenario_patterns() {
    let start = Instant::now();
    let mut c = Vec::new();

    let m = seller_medians(SellerAssumption::MonopolyPlusShare, BuyerDemand::Mixed);
    check(
        &mut c,
        format!("(a) S1 median {:.1} above S2..S4 {:.1?}", m[0], &m[1..]),
        m[1..].iter().all(|x| m[0] > *x),
    );
    let rel = (m[2] - m[3]).abs() / m[2].abs().max(m[3].abs());
    check(&mut c, format!("(a) S3/S4 medians differ by {:.1}%", rel * 100.0), rel < 0.25);

    let m = seller_medians(SellerAssumption::MonopolyOnly, BuyerDemand::AllCategories);
    check(
        &mut c,
        format!("(b) S1 median {:.1} below S2..S4 {:.1?}", m[0], &m[1..]),
        m[1..].iter().all(|x| m[0] < *x),
    );

    for d in [BuyerDemand::Mixed, BuyerDemand::AllCategories] {
        let m = seller_medians(SellerAssumption::Even, d);
        let hi = m.iter().cloned().fold(f64::MIN, f64::max);
        let lo = m.iter().cloned().fold(f64::MAX, f64::min);
        check(
            &mut c,
            format!("(c) demand {}: max/min seller median {:.3}", d as u8, hi / lo),
            lo > 0.0 && hi / lo < 1.5,
        );
    }
    report(7, "scenario patterns", &c, start.elapsed(), Duration::from_secs(300));
}

#[test]
fn criterion_8_end_to_end_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_datamarket"))
            .args(["simulate", "--assumption", "1", "--demand", "1", "--seeds", "20", "--seed", "42", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        (
            std::fs::read(out.join("records.csv")).unwrap(),
            std::fs::read(out.join("summary.json")).unwrap(),
        )
    };
    let (r1, s1) = run("first");
    let (r2, s2) = run("second");
    let mut c = Vec::new();
    check(&mut c, format!("records.csv identical ({} bytes)", r1.len()), r1 == r2 && !r1.is_empty());
    check(&mut c, format!("summary.json identical ({} bytes)", s1.len()), s1 == s2 && !s1.is_empty());
    report(8, "end-to-end determinism", &c, start.elapsed(), Duration::from_secs(60));
}
