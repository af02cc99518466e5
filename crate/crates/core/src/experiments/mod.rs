//! Seeded Monte Carlo studies over grids of markets.
//!
//! A study is a market template whose sizes, proportions and scores may
//! be expressions in sweep variables and in `n`. Run `r` at grid point `p`
//! draws from the stream `mix(base_seed, p, r)`, so any subset of a grid
//! can be recomputed on its own and the output does not depend on the
//! number of workers.

mod expr;
mod presets;
mod table;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use expr::{evaluate, Expr};
pub use presets::{preset, PRESET_NAMES};
pub use table::{prediction_rows, write_csv, TableRow};

use crate::da::{run_da_on_clocks, run_woman_proposing_on_clocks, SmoothnessConstants, SmoothnessReport};
use crate::error::{Error, Result};
use crate::estimators::{estimate, Prediction};
use crate::market::{ClockProfile, MarketConfig, Side, TierConfig};
use crate::rng::{point_run_rng, run_rng};
use crate::stats::Summary;
use crate::{run_da_lazy, MatchingOutcome};

/// Largest side for which explicit clock profiles are generated.
pub const EXPLICIT_PROFILE_MAX_N: usize = 5000;

/// A number or an expression string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Value(f64),
    Expr(String),
}

impl Quantity {
    fn eval(&self, vars: &BTreeMap<String, f64>) -> Result<f64> {
        match self {
            Quantity::Value(v) => Ok(*v),
            Quantity::Expr(s) => evaluate(s, vars),
        }
    }
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::Value(v)
    }
}

impl From<&str> for Quantity {
    fn from(s: &str) -> Self {
        Quantity::Expr(s.to_string())
    }
}

/// One sweep variable: either explicit `values` or `start`, `stop`, `step`
/// (both ends included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub var: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl Axis {
    pub fn list(var: &str, values: Vec<f64>) -> Self {
        Axis {
            var: var.to_string(),
            values: Some(values),
            start: None,
            stop: None,
            step: None,
        }
    }

    pub fn range(var: &str, start: f64, stop: f64, step: f64) -> Self {
        Axis {
            var: var.to_string(),
            values: None,
            start: Some(start),
            stop: Some(stop),
            step: Some(step),
        }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) if !v.is_empty() => Ok(v.clone()),
            (None, Some(start), Some(stop), Some(step)) if step > 0.0 && stop >= start => {
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                // Rounded to 12 decimals so that 0.1 + 2·0.1 prints as 0.3.
                Ok((0..count)
                    .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                    .collect())
            }
            _ => Err(Error::config(format!(
                "axis `{}` needs a non-empty `values` list or `start` ≤ `stop` with positive `step`",
                self.var
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideTemplate {
    pub proportions: Vec<Quantity>,
    pub scores: Vec<Quantity>,
}

/// Market with quantities in terms of sweep variables. `n` is evaluated
/// first; `n_men` and `n_women` default to it and every other quantity
/// may refer to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketTemplate {
    pub n: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_men: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_women: Option<Quantity>,
    pub men: SideTemplate,
    pub women: SideTemplate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatisticFlags {
    pub ranks: bool,
    pub match_types: bool,
    pub proposals: bool,
    pub core_size: bool,
    pub smoothness: bool,
}

impl Default for StatisticFlags {
    fn default() -> Self {
        StatisticFlags {
            ranks: true,
            match_types: true,
            proposals: true,
            core_size: false,
            smoothness: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub sweep: Vec<Axis>,
    pub market: MarketTemplate,
    pub runs_per_point: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub statistics: StatisticFlags,
    #[serde(default)]
    pub allow_unbalanced: bool,
}

fn integer(v: f64, what: &str) -> Result<usize> {
    let r = v.round();
    if (v - r).abs() > 1e-9 || r < 1.0 {
        return Err(Error::config(format!("{what} = {v} is not a positive integer")));
    }
    Ok(r as usize)
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs_per_point == 0 {
            return Err(Error::config("runs_per_point must be at least 1"));
        }
        self.grid().map(|_| ())
    }

    /// Sweep variable assignments in grid order: the first axis varies
    /// slowest.
    pub fn assignments(&self) -> Result<Vec<BTreeMap<String, f64>>> {
        let mut out = vec![BTreeMap::new()];
        for axis in &self.sweep {
            if axis.var == "n" {
                return Err(Error::config("`n` is reserved; sweep another variable and set n from it"));
            }
            let values = axis.points()?;
            out = out
                .into_iter()
                .flat_map(|base| {
                    values.iter().map(move |&v| {
                        let mut m = base.clone();
                        m.insert(axis.var.clone(), v);
                        m
                    })
                })
                .collect();
        }
        Ok(out)
    }

    fn config_at(&self, vars: &BTreeMap<String, f64>) -> Result<MarketConfig> {
        let t = &self.market;
        let n = integer(t.n.eval(vars)?, "n")?;
        let mut vars = vars.clone();
        vars.insert("n".into(), n as f64);
        let size = |q: &Option<Quantity>, what| match q {
            Some(q) => integer(q.eval(&vars)?, what),
            None => Ok(n),
        };
        let side = |s: &SideTemplate| -> Result<TierConfig> {
            let p = s.proportions.iter().map(|q| q.eval(&vars)).collect::<Result<Vec<_>>>()?;
            let v = s.scores.iter().map(|q| q.eval(&vars)).collect::<Result<Vec<_>>>()?;
            TierConfig::new(p, v)
        };
        MarketConfig::build(
            size(&t.n_men, "n_men")?,
            size(&t.n_women, "n_women")?,
            side(&t.men)?,
            side(&t.women)?,
            self.allow_unbalanced,
            None,
        )
    }

    /// Every grid point's market. Errors name the failing point.
    pub fn grid(&self) -> Result<Vec<MarketConfig>> {
        let grid: Vec<MarketConfig> = self
            .assignments()?
            .iter()
            .enumerate()
            .map(|(index, vars)| {
                self.config_at(vars).map_err(|e| Error::GridPoint {
                    index,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;
        if grid.is_empty() {
            return Err(Error::config("the grid is empty"));
        }
        if self.statistics.core_size {
            if let Some((index, c)) = grid
                .iter()
                .enumerate()
                .find(|(_, c)| c.n_men().max(c.n_women()) > EXPLICIT_PROFILE_MAX_N)
            {
                return Err(Error::GridPoint {
                    index,
                    source: Box::new(Error::Capacity {
                        what: "explicit profile side size",
                        needed: c.n_men().max(c.n_women()) as u128,
                        limit: EXPLICIT_PROFILE_MAX_N as u128,
                    }),
                });
            }
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticResult {
    pub name: String,
    pub summary: Summary,
    pub prediction: Option<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub config_id: usize,
    pub variables: BTreeMap<String, f64>,
    #[serde(skip)]
    pub config: MarketConfig,
    pub statistics: Vec<StatisticResult>,
}

impl PointResult {
    pub fn statistic(&self, name: &str) -> Option<&StatisticResult> {
        self.statistics.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub points: Vec<PointResult>,
}

fn push_matrix(out: &mut Vec<(String, f64)>, prefix: (&str, &str), m: &[Vec<f64>]) {
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out.push((format!("match_{}{}_{}{}", prefix.0, i + 1, prefix.1, j + 1), v));
        }
    }
}

/// Per-run statistics of one outcome. Values that are undefined in a run
/// (a tier with nobody matched) are `NaN` and skipped when summarizing.
pub fn outcome_statistics(config: &MarketConfig, flags: &StatisticFlags, o: &MatchingOutcome) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    if flags.ranks {
        for s in o.tier_summaries(Side::Man) {
            out.push((format!("men_rank_t{}", s.tier + 1), s.mean_rank));
        }
        for s in o.tier_summaries(Side::Woman) {
            out.push((format!("women_rank_t{}", s.tier + 1), s.mean_rank));
        }
        out.push(("men_rank_avg".into(), o.mean_rank(Side::Man)));
        out.push(("women_rank_avg".into(), o.mean_rank(Side::Woman)));
    }
    if flags.proposals {
        out.push(("total_proposals".into(), o.total_proposals as f64));
        out.push(("max_proposals".into(), o.max_proposals_by_any_proposer as f64));
    }
    if flags.match_types {
        push_matrix(&mut out, ("w", "m"), &o.match_type_matrix());
        push_matrix(&mut out, ("m", "w"), &o.men_match_type_matrix());
    }
    if flags.smoothness {
        let r = SmoothnessReport::from_ledger(config, o, SmoothnessConstants::default_for(config));
        out.push(("smooth".into(), if r.is_smooth { 1.0 } else { 0.0 }));
        out.push(("women_below_threshold".into(), r.women_below_threshold as f64));
        for (j, &b) in config.men().scores().iter().enumerate() {
            let p = r
                .empirical_acceptance_prob
                .iter()
                .find(|(beta, _)| *beta == b)
                .map_or(f64::NAN, |x| x.1);
            out.push((format!("accept_prob_t{}", j + 1), p));
        }
    }
    out
}

/// Fraction of men whose partner is the same in the man- and
/// woman-optimal matchings; a man unmatched in both counts as unique.
pub fn unique_partner_fractions(config: &MarketConfig, man_opt: &MatchingOutcome, woman_opt: &MatchingOutcome) -> (f64, Vec<f64>) {
    let layout = config.men_layout();
    let same = |m: usize| man_opt.matching.wife_of(m) == woman_opt.matching.wife_of(m);
    let overall = (0..layout.len()).filter(|&m| same(m)).count() as f64 / layout.len() as f64;
    let tiers = (0..layout.tier_count())
        .map(|t| layout.range(t).filter(|&m| same(m)).count() as f64 / layout.size(t) as f64)
        .collect();
    (overall, tiers)
}

fn single_run(config: &MarketConfig, flags: &StatisticFlags, rng: &mut crate::SimRng) -> Vec<(String, f64)> {
    if flags.core_size {
        let clocks = ClockProfile::generate(config, rng);
        let man_opt = run_da_on_clocks(config, &clocks);
        let woman_opt = run_woman_proposing_on_clocks(config, &clocks);
        let mut out = outcome_statistics(config, flags, &man_opt);
        let (overall, tiers) = unique_partner_fractions(config, &man_opt, &woman_opt);
        out.push(("unique_partner_frac".into(), overall));
        for (j, f) in tiers.into_iter().enumerate() {
            out.push((format!("unique_partner_frac_m{}", j + 1), f));
        }
        out
    } else {
        outcome_statistics(config, flags, &run_da_lazy(config, rng))
    }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::config(format!("cannot start {w} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Run every `(point, run)` pair and summarize. `workers = None` uses the
/// global thread pool.
pub fn run_experiment(spec: &ExperimentSpec, workers: Option<usize>) -> Result<ExperimentResult> {
    run_experiment_points(spec, None, workers)
}

/// Like [`run_experiment`] restricted to the grid points `points` (by
/// index, in the given order). Each point's values equal those of the
/// full run.
pub fn run_experiment_points(
    spec: &ExperimentSpec,
    points: Option<&[usize]>,
    workers: Option<usize>,
) -> Result<ExperimentResult> {
    if spec.runs_per_point == 0 {
        return Err(Error::config("runs_per_point must be at least 1"));
    }
    let grid = spec.grid()?;
    let assignments = spec.assignments()?;
    let selected: Vec<usize> = match points {
        Some(p) => p.to_vec(),
        None => (0..grid.len()).collect(),
    };
    if let Some(&bad) = selected.iter().find(|&&p| p >= grid.len()) {
        return Err(Error::config(format!("grid point {bad} out of range (grid has {})", grid.len())));
    }
    let runs = spec.runs_per_point;
    let flags = spec.statistics;
    let per_run: Vec<Vec<(String, f64)>> = with_workers(workers, || {
        (0..selected.len() * runs)
            .into_par_iter()
            .map(|k| {
                let (p, r) = (selected[k / runs], k % runs);
                single_run(&grid[p], &flags, &mut point_run_rng(spec.base_seed, p as u64, r as u64))
            })
            .collect()
    })?;
    let points = selected
        .iter()
        .enumerate()
        .map(|(slot, &p)| {
            let config = grid[p].clone();
            let rows = &per_run[slot * runs..(slot + 1) * runs];
            let predictions: BTreeMap<String, Prediction> = match estimate(&config) {
                Ok(rep) if config.is_balanced() => rep.predictions(&config).into_iter().collect(),
                _ => BTreeMap::new(),
            };
            let statistics = rows[0]
                .iter()
                .enumerate()
                .filter_map(|(s, (name, _))| {
                    let values: Vec<f64> = rows.iter().map(|r| r[s].1).filter(|v| !v.is_nan()).collect();
                    (!values.is_empty()).then(|| StatisticResult {
                        name: name.clone(),
                        summary: Summary::of(&values),
                        prediction: predictions.get(name).copied(),
                    })
                })
                .collect();
            PointResult {
                config_id: p,
                variables: assignments[p].clone(),
                config,
                statistics,
            }
        })
        .collect();
    Ok(ExperimentResult {
        spec: spec.clone(),
        points,
    })
}

impl ExperimentResult {
    pub fn rows(&self) -> Vec<TableRow<'_>> {
        self.points
            .iter()
            .flat_map(|p| {
                p.statistics.iter().map(move |s| TableRow {
                    config_id: p.config_id,
                    config: &p.config,
                    statistic: &s.name,
                    summary: Some(s.summary),
                    prediction: s.prediction,
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_csv(&mut buf, &self.rows())?;
        Ok(buf)
    }

    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "name": self.spec.name,
            "version": version_string(),
            "base_seed": self.spec.base_seed,
            "runs_per_point": self.spec.runs_per_point,
            "grid_points": self.points.len(),
            "spec": self.spec,
            "variables": self.points.iter().map(|p| &p.variables).collect::<Vec<_>>(),
        })
    }

    /// Write `<name>.csv` and `<name>.manifest.json` under `dir`, creating
    /// it if needed. Returns the CSV path.
    pub fn write_outputs(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.spec.name));
        std::fs::write(&csv_path, self.to_csv()?)?;
        let manifest = serde_json::to_string_pretty(&self.manifest())?;
        std::fs::write(dir.join(format!("{}.manifest.json", self.spec.name)), manifest + "\n")?;
        Ok(csv_path)
    }
}

/// `git describe`-style version recorded at build time.
pub fn version_string() -> &'static str {
    option_env!("TIERMATCH_GIT_DESCRIBE").unwrap_or(concat!("v", env!("CARGO_PKG_VERSION")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoreSizeStatistics {
    pub runs: usize,
    pub overall: Summary,
    pub by_men_tier: Vec<Summary>,
}

/// Unique-stable-partner fractions over `runs` explicit profiles.
pub fn core_size_statistics(config: &MarketConfig, runs: usize, seed: u64) -> Result<CoreSizeStatistics> {
    let side = config.n_men().max(config.n_women());
    if side > EXPLICIT_PROFILE_MAX_N {
        return Err(Error::Capacity {
            what: "explicit profile side size",
            needed: side as u128,
            limit: EXPLICIT_PROFILE_MAX_N as u128,
        });
    }
    if runs == 0 {
        return Err(Error::config("runs must be at least 1"));
    }
    let per_run: Vec<(f64, Vec<f64>)> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let clocks = ClockProfile::generate(config, &mut run_rng(seed, r as u64));
            let man_opt = run_da_on_clocks(config, &clocks);
            let woman_opt = run_woman_proposing_on_clocks(config, &clocks);
            unique_partner_fractions(config, &man_opt, &woman_opt)
        })
        .collect();
    let overall: Vec<f64> = per_run.iter().map(|r| r.0).collect();
    let by_men_tier = (0..config.men().tier_count())
        .map(|j| Summary::of(&per_run.iter().map(|r| r.1[j]).collect::<Vec<_>>()))
        .collect();
    Ok(CoreSizeStatistics {
        runs,
        overall: Summary::of(&overall),
        by_men_tier,
    })
}

/// Root of `x⁵ + x = 1` in `(0, 1)` by bisection.
pub fn solve_benchmark_root() -> f64 {
    let f = |x: f64| x.powi(5) + x - 1.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
