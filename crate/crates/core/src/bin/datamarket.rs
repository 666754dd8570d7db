use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use datamarket::ahp::{self, JudgmentMatrix, RatioMatrix};
use datamarket::bargain::{equilibrium_price, fixed_point_oracle, BargainParams};
use datamarket::config::{parse_config, Config};
use datamarket::corpus::SellerAssumption;
use datamarket::market::{aggregate, seed_range, sweep, BuyerDemand, Market, OracleKind, SweepParam};
use datamarket::quality::{composite_score, seller_reserve, QualityVector};
use datamarket::report;
use datamarket::{Error, Result};

#[derive(Parser)]
#[command(name = "datamarket", version, about = "Data market pricing experiments")]
struct Cli {
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for written artifacts
    #[arg(long, global = true, env = "DATAMARKET_OUT", default_value = "datamarket-out")]
    out: PathBuf,

    /// Format of what is printed to stdout
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    /// Satisfaction judgments (4 quality indicators plus utility)
    Judgments5x5,
    /// Quality-only judgments
    Judgments4x4,
    /// Published 5x5 ratio matrix
    H5x5,
    /// Alias of h5x5
    Published5x5,
}

#[derive(Subcommand)]
enum Command {
    /// Derive weights and a consistency report
    Ahp {
        #[arg(long, value_enum, conflicts_with_all = ["judgments", "ratios"])]
        fixture: Option<Fixture>,
        /// Judgment matrix file with entries 0, 1, 2
        #[arg(long, conflicts_with = "ratios")]
        judgments: Option<PathBuf>,
        /// Ratio matrix file
        #[arg(long)]
        ratios: Option<PathBuf>,
    },
    /// Composite quality score and reserve price
    Quality {
        /// Four grades: accuracy, completeness, consistency, timeliness
        #[arg(long)]
        grades: String,
        #[arg(long, default_value_t = 0.0)]
        v1: f64,
        #[arg(long, default_value_t = 0.0)]
        v2: f64,
    },
    /// Buyer utility matrix of one scenario
    Utility {
        #[arg(long)]
        assumption: Option<u8>,
        #[arg(long)]
        demand: Option<u8>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        oracle: Option<OracleArg>,
    },
    /// Equilibrium price for explicit parameters
    Bargain {
        #[arg(long)]
        rs: Option<f64>,
        #[arg(long)]
        rb: Option<f64>,
        #[arg(long)]
        delta_s: Option<f64>,
        #[arg(long)]
        delta_eta_b: Option<f64>,
        #[arg(long)]
        p1: Option<f64>,
        #[arg(long)]
        p2: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Run the market over many seeds
    Simulate {
        #[arg(long)]
        assumption: Option<u8>,
        #[arg(long)]
        demand: Option<u8>,
        /// Number of seeds
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        /// First seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        oracle: Option<OracleArg>,
    },
    /// Sensitivity sweep of the equilibrium extras
    Sweep {
        #[arg(long, value_enum, default_value_t = ParamArg::All)]
        param: ParamArg,
        #[arg(long, requires = "to")]
        from: Option<f64>,
        #[arg(long, requires = "from")]
        to: Option<f64>,
        #[arg(long, default_value_t = 11)]
        steps: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Synthetic,
    Trained,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ParamArg {
    Quality,
    Alpha,
    P2,
    Eta,
    All,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("datamarket: {e}");
            match e {
                Error::Config { .. } | Error::Parse(_) | Error::Validation(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => parse_config(p),
        None => Ok(Config::default()),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn apply_scenario_flags(
    cfg: &mut Config,
    assumption: Option<u8>,
    demand: Option<u8>,
    seed: Option<u64>,
    oracle: Option<OracleArg>,
) -> Result<()> {
    if let Some(a) = assumption {
        cfg.scenario.seller_assumption = SellerAssumption::try_from(a)?;
    }
    if let Some(d) = demand {
        cfg.scenario.buyer_demand = BuyerDemand::try_from(d)?;
    }
    if let Some(s) = seed {
        cfg.scenario.seed = s;
    }
    if let Some(o) = oracle {
        cfg.scenario.oracle = match o {
            OracleArg::Synthetic => OracleKind::Synthetic,
            OracleArg::Trained => OracleKind::Trained,
        };
    }
    cfg.validate()
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ahp {
            fixture,
            judgments,
            ratios,
        } => {
            let (weights, report) = if let Some(path) = ratios {
                let h: RatioMatrix = read(&path)?.parse()?;
                weights_from_ratios_tol(&h, cfg.ahp.tolerance)?
            } else if let Some(path) = judgments {
                let j: JudgmentMatrix = read(&path)?.parse()?;
                ahp::derive_weights(&j, cfg.ahp.base)?
            } else {
                match fixture.unwrap_or(Fixture::Published5x5) {
                    Fixture::Judgments5x5 => ahp::derive_weights(&JudgmentMatrix::satisfaction_fixture(), cfg.ahp.base)?,
                    Fixture::Judgments4x4 => ahp::derive_weights(&JudgmentMatrix::quality_fixture(), cfg.ahp.base)?,
                    Fixture::H5x5 | Fixture::Published5x5 => {
                        weights_from_ratios_tol(&RatioMatrix::published_fixture(), cfg.ahp.tolerance)?
                    }
                }
            };
            if cli.format == Format::Json {
                print_json(&serde_json::json!({ "weights": weights, "consistency": report }))?;
            } else {
                println!("index,weight");
                for (i, w) in weights.as_slice().iter().enumerate() {
                    println!("{},{w:.4}", i + 1);
                }
                println!("lambda_max,{:.5}", report.lambda_max);
                println!("ci,{:.7}", report.ci);
                println!("cr,{:.8}", report.cr);
                println!("passed,{}", report.passed);
            }
        }
        Command::Quality { grades, v1, v2 } => {
            let q: QualityVector = grades.parse()?;
            let w = cfg.scenario.quality_weight_vector()?;
            let score = composite_score(&q, &w)?;
            let reserve = seller_reserve(v1, v2, &q, &w)?;
            if cli.format == Format::Json {
                print_json(&serde_json::json!({ "quality": q, "score": score, "reserve": reserve }))?;
            } else {
                println!("score,r0,rs");
                println!("{score:.6},{:.6},{:.6}", reserve.r0, reserve.rs);
            }
        }
        Command::Utility {
            assumption,
            demand,
            seed,
            oracle,
        } => {
            apply_scenario_flags(&mut cfg, assumption, demand, seed, oracle)?;
            let market = Market::new(cfg.scenario.clone())?;
            let run = market.run_seed(cfg.scenario.seed)?;
            let csv = report::utility_csv(&run.utility);
            report::write_output(&cli.out, "utility.csv", &csv)?;
            report::write_output(&cli.out, "satisfaction.csv", &report::satisfaction_csv(&run.satisfaction))?;
            if cli.format == Format::Json {
                print_json(&run.utility)?;
            } else {
                print!("{csv}");
            }
        }
        Command::Bargain {
            rs,
            rb,
            delta_s,
            delta_eta_b,
            p1,
            p2,
            alpha,
            tau,
        } => {
            let mut section = cfg.bargain;
            section.r_s = rs.or(section.r_s);
            section.r_b = rb.or(section.r_b);
            section.delta_s = delta_s.or(section.delta_s);
            section.delta_eta_b = delta_eta_b.or(section.delta_eta_b);
            section.p1 = p1.or(section.p1);
            section.p2 = p2.or(section.p2);
            section.alpha = alpha.or(section.alpha);
            section.tau = tau.or(section.tau);
            let params: BargainParams = section.resolve()?;
            let result = equilibrium_price(&params)?;
            let oracle = fixed_point_oracle(&params, 1e-13, 1_000_000)?;
            if cli.format == Format::Json {
                print_json(&serde_json::json!({ "params": params, "equilibrium": result, "oracle": oracle }))?;
            } else {
                println!("price,seller_extra,buyer_extra,feasible,oracle_price,oracle_iterations");
                println!(
                    "{:.6},{:.6},{:.6},{},{:.6},{}",
                    result.price, result.seller_extra, result.buyer_extra, result.feasible, oracle.price, oracle.iterations
                );
            }
        }
        Command::Simulate {
            assumption,
            demand,
            seeds,
            seed,
            oracle,
        } => {
            if seeds == 0 {
                return Err(Error::Validation("--seeds must be at least 1".into()));
            }
            apply_scenario_flags(&mut cfg, assumption, demand, seed, oracle)?;
            let market = Market::new(cfg.scenario.clone())?;
            let seed_list = seed_range(cfg.scenario.seed, seeds);
            let records = market.run_seeds(&seed_list)?;
            let summary = aggregate(&records)?;
            let records_path = report::write_output(&cli.out, "records.csv", &report::records_csv(&records))?;
            let summary_text = report::summary_json(&cfg.scenario, &seed_list, &summary)?;
            let summary_path = report::write_output(&cli.out, "summary.json", &summary_text)?;
            if cli.format == Format::Json {
                print!("{summary_text}");
            } else {
                println!("kind,id,runs,mean_extra,median_extra,stddev_extra,feasibility_rate");
                for s in &summary {
                    println!(
                        "{},{},{},{:.4},{:.4},{:.4},{:.4}",
                        s.kind, s.id, s.runs, s.mean_extra, s.median_extra, s.stddev_extra, s.feasibility_rate
                    );
                }
            }
            eprintln!("wrote {} and {}", records_path.display(), summary_path.display());
        }
        Command::Sweep { param, from, to, steps } => {
            let base = cfg.bargain.resolve()?;
            let params: Vec<SweepParam> = match param {
                ParamArg::All => SweepParam::ALL.to_vec(),
                ParamArg::Quality => vec![SweepParam::Quality],
                ParamArg::Alpha => vec![SweepParam::Alpha],
                ParamArg::P2 => vec![SweepParam::P2],
                ParamArg::Eta => vec![SweepParam::Eta],
            };
            if steps == 0 {
                return Err(Error::Validation("--steps must be at least 1".into()));
            }
            let mut checks = Vec::new();
            for p in params {
                let grid = match (from, to) {
                    (Some(a), Some(b)) => datamarket::market::linspace(a, b, steps),
                    _ => p.default_grid(&base),
                };
                let table = sweep(&base, p, &grid)?;
                let path = report::write_output(&cli.out, &format!("sweep_{p}.csv"), &report::sweep_csv(&table))?;
                let check = table.check();
                eprintln!("wrote {}", path.display());
                checks.push((p, check));
                if cli.format == Format::Csv {
                    print!("{}", report::sweep_csv(&table));
                }
            }
            if cli.format == Format::Json {
                let v: Vec<_> = checks
                    .iter()
                    .map(|(p, c)| serde_json::json!({ "param": p, "seller_direction_holds": c.seller, "buyer_direction_holds": c.buyer }))
                    .collect();
                print_json(&v)?;
            } else {
                for (p, c) in &checks {
                    eprintln!("{p}: seller direction {}, buyer direction {}", verdict(c.seller), verdict(c.buyer));
                }
            }
        }
    }
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "holds"
    } else {
        "violated"
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("cannot read `{}`: {e}", path.display())))
}

fn weights_from_ratios_tol(h: &RatioMatrix, tol: f64) -> Result<(ahp::WeightVector, ahp::ConsistencyReport)> {
    let (lambda, w) = ahp::principal_eigenpair(h, tol)?;
    Ok((w, ahp::consistency_check(lambda, h.order())?))
}
