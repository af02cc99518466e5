//! `tiermatch`: simulate, estimate and study tiered matching markets.
//!
//! Exit status: 0 success, 1 invalid input, 2 capacity limit, 3 failed
//! verification. Every error line starts with `error:`.

mod overrides;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use tiermatch::experiments::{preset, run_experiment, ExperimentSpec, PRESET_NAMES};
use tiermatch::oracle::{golden_file, GoldenFile};
use tiermatch::rng::rng_from_seed;
use tiermatch::{estimate, run_da_lazy, MarketConfig, Side};

const EMBEDDED_GOLDEN: &str = include_str!("../../core/tests/golden/oracle.json");

#[derive(Parser)]
#[command(name = "tiermatch", version, about = "Deferred acceptance in tiered random matching markets")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// Dotted-path JSON patch applied to the input, e.g. `men.scores.0=4`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Verb {
    /// Run man-proposing deferred acceptance once.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file (default 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for outcome.json and outcome_summary.csv.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form predictions for a balanced market.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// Directory for estimate.json and estimate.csv.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a Monte Carlo study from a spec file or a preset.
    Experiment {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Overrides runs_per_point.
        #[arg(long)]
        runs: Option<usize>,
        /// Overrides base_seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "TIERMATCH_WORKERS")]
        workers: Option<usize>,
        #[arg(long, default_value = ".")]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// List the preset and statistics behind each standard plot.
    Figures,
    /// Run the built-in self-checks.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        level: verify::Level,
        /// Golden oracle file to check instead of the built-in copy.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// Recompute the golden oracle file.
    OracleRegen {
        #[arg(long)]
        output: PathBuf,
    },
}

struct VerificationFailed(String);

impl std::fmt::Debug for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for VerificationFailed {}

fn read_json(path: &Path, overrides: &[String]) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut doc: Value = serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))?;
    overrides::apply_all(&mut doc, overrides)?;
    Ok(doc)
}

fn load_market(path: &Path, overrides: &[String]) -> Result<MarketConfig> {
    let doc = read_json(path, overrides)?;
    Ok(MarketConfig::from_json(&doc.to_string())?)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

fn simulate(config: &Path, seed: Option<u64>, output: Option<&Path>, overrides: &[String]) -> Result<()> {
    let market = load_market(config, overrides)?;
    let seed = seed.or(market.seed()).unwrap_or(0);
    let outcome = run_da_lazy(&market, &mut rng_from_seed(seed));
    for side in [Side::Man, Side::Woman] {
        let label = match side {
            Side::Man => "men",
            Side::Woman => "women",
        };
        for s in outcome.tier_summaries(side) {
            println!("{label}_rank_t{}={} (tier size {}, matched {})", s.tier + 1, s.mean_rank, s.count, s.matched);
        }
    }
    println!("total_proposals={}", outcome.total_proposals);
    if let Some(dir) = output {
        let json = serde_json::to_string_pretty(&outcome.to_json_value())? + "\n";
        write_file(dir, "outcome.json", json.as_bytes())?;
        let mut csv = Vec::new();
        outcome.write_summary_csv(&mut csv)?;
        write_file(dir, "outcome_summary.csv", &csv)?;
    }
    Ok(())
}

fn estimate_cmd(config: &Path, output: Option<&Path>, overrides: &[String]) -> Result<()> {
    let market = load_market(config, overrides)?;
    let report = estimate(&market)?;
    for (name, p) in report.predictions(&market) {
        match (p.lower, p.upper) {
            (Some(lo), Some(hi)) => println!("{name}={} [{lo}, {hi}]", p.leading),
            _ => println!("{name}={}", p.leading),
        }
    }
    if let Some(dir) = output {
        write_file(dir, "estimate.json", (report.to_json() + "\n").as_bytes())?;
        write_file(dir, "estimate.csv", &report.to_csv(&market)?)?;
    }
    Ok(())
}

fn experiment_spec(
    config: Option<&Path>,
    preset_name: Option<&str>,
    runs: Option<usize>,
    seed: Option<u64>,
    overrides: &[String],
) -> Result<ExperimentSpec> {
    let mut doc = match (config, preset_name) {
        (Some(path), _) => read_json(path, &[])?,
        (None, Some(name)) => serde_json::to_value(preset(name)?)?,
        (None, None) => bail!("pass --config or --preset"),
    };
    overrides::apply_all(&mut doc, overrides)?;
    if let Some(runs) = runs {
        doc["runs_per_point"] = runs.into();
    }
    if let Some(seed) = seed {
        doc["base_seed"] = seed.into();
    }
    Ok(ExperimentSpec::from_json(&doc.to_string())?)
}

fn figures() {
    println!("plot\tpreset\tstatistics");
    let rows = [
        ("women_tier_heatmaps", "women_two_tiers", "men_rank_avg, women_rank_t1, women_rank_t2, total_proposals"),
        ("men_tier_heatmaps", "men_two_tiers", "men_rank_t1, men_rank_t2, women_rank_avg"),
        ("match_fraction_curve", "match_distribution", "match_m1_w1 (mean, p3, p97)"),
        ("rank_by_tier", "tier_convergence", "men_rank_t*, women_rank_t* with predicted bounds"),
        ("rank_ratios", "tier_convergence", "ratios of men_rank_t* and women_rank_t*"),
        ("growing_score_curve", "match_distribution_growing_score", "match_m1_w1 (mean, p3, p97)"),
        ("core_size_dip", "unbalanced_core", "men_rank_t*, unique_partner_frac, unique_partner_frac_m*"),
    ];
    for (fig, name, stats) in rows {
        println!("{fig}\t{name}\t{stats}");
    }
    println!("available presets: {}", PRESET_NAMES.join(", "));
}

fn load_golden(path: Option<&Path>) -> Result<GoldenFile> {
    let text = match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?,
        None => EMBEDDED_GOLDEN.to_string(),
    };
    Ok(serde_json::from_str(&text)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.verb {
        Verb::Simulate {
            config,
            seed,
            output,
            common,
        } => simulate(&config, seed, output.as_deref(), &common.overrides),
        Verb::Estimate { config, output, common } => estimate_cmd(&config, output.as_deref(), &common.overrides),
        Verb::Experiment {
            config,
            preset,
            runs,
            seed,
            workers,
            output,
            common,
        } => {
            let spec = experiment_spec(config.as_deref(), preset.as_deref(), runs, seed, &common.overrides)?;
            if workers == Some(0) {
                bail!(tiermatch::Error::Config("--workers must be at least 1".into()));
            }
            let result = run_experiment(&spec, workers)?;
            let csv = result.write_outputs(&output)?;
            println!("wrote {} ({} grid points, {} runs each)", csv.display(), result.points.len(), spec.runs_per_point);
            Ok(())
        }
        Verb::Figures => {
            figures();
            Ok(())
        }
        Verb::Verify { level, golden } => {
            let checks = verify::run(level, load_golden(golden.as_deref()))?;
            for c in &checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(anyhow!(VerificationFailed(format!("verification failed: {}", failed.join(", ")))))
            }
        }
        Verb::OracleRegen { output } => {
            let file = golden_file()?;
            if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(&output, serde_json::to_string_pretty(&file)? + "\n")
                .with_context(|| format!("cannot write {}", output.display()))?;
            println!("wrote {} ({} cases)", output.display(), file.cases.len());
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<VerificationFailed>().is_some() {
        return 3;
    }
    let capacity = err
        .chain()
        .any(|e| e.downcast_ref::<tiermatch::Error>().is_some_and(|e| e.is_capacity()));
    if capacity {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let text = text.trim_start_matches("error: ");
            eprintln!("error: {}", text.trim_end());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
