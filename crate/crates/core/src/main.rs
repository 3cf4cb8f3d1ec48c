use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use cachelab::analytics::{self, GammaConvention, RateReport};
use cachelab::config::{ConfigRecord, FullCachePolicy, SystemConfig};
use cachelab::decoder::{redundant_segments, verify_transcript};
use cachelab::delivery::{self, DEFAULT_SLACK_BITS};
use cachelab::demand::DemandProfile;
use cachelab::experiments::{self, Procedure, SweepSpec};
use cachelab::network::CachedNetwork;
use cachelab::persistence::{BaselineDiff, RunRecord, RunStore};
use cachelab::placement::PlacementMode;
use cachelab::rational::{to_decimal, Exact, DISPLAY_DIGITS};

const SEED_ENV: &str = "CACHELAB_SEED";

#[derive(Parser)]
#[command(name = "cachelab", version, about = "Heterogeneous decentralized coded caching: rates, bounds and simulation")]
struct Cli {
    /// Append each evaluated configuration to this JSONL run store.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Exclude users whose cache can hold the whole library instead of rejecting the config.
    #[arg(long, global = true)]
    drop_full_cache: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Gamma {
    Floor,
    Ceil,
}

impl From<Gamma> for GammaConvention {
    fn from(g: Gamma) -> Self {
        match g {
            Gamma::Floor => GammaConvention::Floor,
            Gamma::Ceil => GammaConvention::Ceil,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Demands {
    /// The N smallest caches request distinct files; the rest are dealt round-robin.
    Worst,
    /// The `demands` list of the config file (1-based file ids).
    Explicit,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeliveryProcedure {
    Coded,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form rates and bounds as JSON.
    Rates {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "ceil")]
        gamma: Gamma,
    },
    /// Lower bounds with their maximizing parameters.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "ceil")]
        gamma: Gamma,
    },
    /// Monte-Carlo placement, delivery and decoding.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "worst")]
        demands: Demands,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// File size in bits; defaults to the config's F.
        #[arg(long)]
        file_size: Option<usize>,
        #[arg(long, value_enum, default_value = "coded")]
        procedure: DeliveryProcedure,
    },
    /// Evaluates a sweep spec and writes the CSV table.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Checks every invariant on one configuration.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "ceil")]
        gamma: Gamma,
    },
}

struct Loaded {
    record: ConfigRecord,
    config: SystemConfig,
}

fn load_config(path: &Path, drop_full_cache: bool) -> Result<Loaded> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut record: ConfigRecord = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Ok(seed) = std::env::var(SEED_ENV) {
        record.seed = seed.trim().parse().with_context(|| format!("{SEED_ENV}={seed} is not an unsigned integer"))?;
    }
    let policy = if drop_full_cache { FullCachePolicy::Drop } else { FullCachePolicy::Reject };
    let config = record.to_config(policy)?;
    if !config.dropped_users().is_empty() {
        eprintln!("dropped users with full caches: {:?}", config.dropped_users());
    }
    Ok(Loaded { record, config })
}

fn profile_for(loaded: &Loaded, demands: Demands) -> Result<DemandProfile> {
    match demands {
        Demands::Worst => Ok(DemandProfile::worst_case(&loaded.config)),
        Demands::Explicit => {
            let Some(list) = &loaded.record.demands else { bail!("--demands explicit needs a `demands` list in the config") };
            if list.len() != loaded.record.num_users {
                bail!("expected {} demands, got {}", loaded.record.num_users, list.len());
            }
            let dropped = loaded.config.dropped_users();
            let mut kept = Vec::new();
            for (i, &d) in list.iter().enumerate() {
                if dropped.contains(&(i + 1)) {
                    continue;
                }
                if d == 0 {
                    bail!("demands are 1-based; user {} requests file 0", i + 1);
                }
                kept.push(d - 1);
            }
            Ok(DemandProfile::build(&loaded.config, &kept)?)
        }
    }
}

fn record_run(store: Option<&PathBuf>, loaded: &Loaded, report: &RateReport, validation: Option<experiments::ValidationReport>) -> Result<bool> {
    let Some(path) = store else { return Ok(true) };
    let store = RunStore::new(path);
    let run = RunRecord::new(loaded.record.clone(), report.clone(), validation);
    let id = store.append(&run)?;
    eprintln!("recorded run {id} in {}", path.display());
    match store.diff_against_baseline(&run.config_hash)? {
        BaselineDiff::NoBaseline => Ok(true),
        BaselineDiff::Compared { baseline_id, changes, .. } => {
            for c in &changes {
                eprintln!("differs from baseline run {baseline_id}: {} {} -> {}", c.field, c.baseline, c.latest);
            }
            Ok(changes.is_empty())
        }
    }
}

fn report_violations(violations: &[String]) -> bool {
    for v in violations {
        eprintln!("invariant violated: {v}");
    }
    violations.is_empty()
}

fn run(cli: Cli) -> Result<bool> {
    let store = cli.store.as_ref();
    match cli.command {
        Command::Rates { config, gamma } => {
            let loaded = load_config(&config, cli.drop_full_cache)?;
            let report = RateReport::evaluate(&loaded.config, gamma.into());
            println!("{}", serde_json::to_string_pretty(&report)?);
            let ok = report_violations(&report.check_invariants(&loaded.config));
            Ok(record_run(store, &loaded, &report, None)? && ok)
        }
        Command::Bounds { config, gamma } => {
            let loaded = load_config(&config, cli.drop_full_cache)?;
            let report = RateReport::evaluate(&loaded.config, gamma.into());
            let (_, cut_s) = analytics::cut_set_bound(&loaded.config);
            let out = json!({
                "lowerBoundNew": report.lower_bound_new,
                "lowerBoundNewGamma": report.lower_bound_new_gamma,
                "lowerBoundNewWitness": report.lower_bound_new_witness,
                "cutSetBound": report.lower_bound_cut_set,
                "cutSetWitnessS": cut_s,
                "rGBD": report.r_gbd,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            let ok = report_violations(&report.check_invariants(&loaded.config));
            Ok(record_run(store, &loaded, &report, None)? && ok)
        }
        Command::Simulate { config, demands, trials, file_size, procedure } => {
            let loaded = load_config(&config, cli.drop_full_cache)?;
            let profile = profile_for(&loaded, demands)?;
            let procedure = match procedure {
                DeliveryProcedure::Coded => Procedure::Coded,
                DeliveryProcedure::Random => Procedure::Random,
            };
            let f = file_size.unwrap_or(loaded.config.file_size_bits());
            let validation =
                experiments::monte_carlo_validate(&loaded.config, &profile, trials, f, loaded.record.seed, procedure)?;
            println!("{}", serde_json::to_string_pretty(&validation)?);
            let report = RateReport::evaluate(&loaded.config, GammaConvention::default());
            let ok = validation.all_decoded();
            Ok(record_run(store, &loaded, &report, Some(validation))? && ok)
        }
        Command::Sweep { spec, out } => {
            let text = fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let spec: SweepSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
            let rows = experiments::run_sweep(&spec)?;
            let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            experiments::write_csv(&rows, &spec.curves, file)?;
            let mut ok = true;
            for row in &rows {
                let x = to_decimal(&row.x, DISPLAY_DIGITS);
                match &row.report {
                    Err(e) => eprintln!("x = {x}: skipped, {e}"),
                    Ok(r) => {
                        let config = spec.config_at(&row.x).expect("row evaluated");
                        for v in r.check_invariants(&config) {
                            eprintln!("x = {x}: invariant violated: {v}");
                            ok = false;
                        }
                    }
                }
            }
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
            Ok(ok)
        }
        Command::Verify { config, gamma } => {
            let loaded = load_config(&config, cli.drop_full_cache)?;
            verify(&loaded, gamma.into(), store)
        }
    }
}

fn verify(loaded: &Loaded, gamma: GammaConvention, store: Option<&PathBuf>) -> Result<bool> {
    let config = &loaded.config;
    let report = RateReport::evaluate(config, gamma);
    let mut all_ok = true;
    let mut check = |name: &str, ok: bool| {
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        all_ok &= ok;
    };
    let violations = report.check_invariants(config);
    for name in [
        "rGBD = min(rCD, rRD)",
        "rUncoded = rRD",
        "cut-set bound <= rGBD",
        "new lower bound <= rGBD",
        "rBaseline = rCD + deltaR1 + deltaR2",
    ] {
        check(name, !violations.iter().any(|v| v == name));
    }
    if config.num_files() < config.num_users() {
        check("rBaseline - rGBD >= deltaR1 + deltaR2 > 0", !violations.iter().any(|v| v.starts_with("rBaseline - rGBD")));
    } else {
        check("rGBD = rBaseline when N >= K", !violations.iter().any(|v| v.contains("N >= K")));
    }

    let profile = DemandProfile::worst_case(config);
    check(
        "worst-case coded rate equals rCD",
        analytics::asymptotic_coded_rate(config, &profile).total() == report.r_cd.0,
    );

    match CachedNetwork::build(config, loaded.record.seed, PlacementMode::ExactSize) {
        Ok(network) => {
            let coded = delivery::coded_delivery_hetero(&network, &profile)?;
            check("coded delivery decodes for every user", verify_transcript(&network, &profile, &coded).all_decoded());
            check("no coded segment is redundant", redundant_segments(&network, &profile, &coded).is_empty());
            if config.file_size_bits() <= 1 << 14 {
                let decoded = delivery::random_delivery(&network, &profile, DEFAULT_SLACK_BITS, loaded.record.seed)
                    .map(|t| verify_transcript(&network, &profile, &t).all_decoded());
                check("random delivery decodes for every user", decoded.unwrap_or(false));
            } else {
                println!("SKIP random delivery (F > 16384)");
            }
        }
        Err(e) => println!("SKIP bit-level checks ({e})"),
    }

    let out = json!({ "rGBD": Exact(report.r_gbd.0.clone()), "configHash": cachelab::persistence::config_hash(&loaded.record) });
    println!("{}", serde_json::to_string(&out)?);
    let baseline_ok = record_run(store, loaded, &report, None)?;
    if store.is_some() {
        check("matches stored baseline", baseline_ok);
    }
    Ok(all_ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
