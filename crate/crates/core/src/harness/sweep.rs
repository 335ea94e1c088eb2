//! Multi-seed budget sweeps and their summary statistics.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_strategy, InstanceSpec, StrategyName};
use crate::pipeline::{RunParams, RunResult};
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 10] =
    ["strategy", "seed", "N_tot", "N_floor", "ER", "subspace_dist", "nu_l1", "support", "status", "wall_ms"];

#[derive(Debug, Clone, Deserialize)]
pub struct SweepConfig {
    pub instance: InstanceSpec,
    pub strategies: Vec<StrategyName>,
    /// Total source budgets, strictly increasing.
    pub budgets: Vec<u64>,
    pub seeds: u64,
    #[serde(default)]
    pub seed_offset: u64,
    /// Draw a new instance per seed (instance seed = `instance.seed + seed`)
    /// instead of reusing one instance for every run.
    #[serde(default)]
    pub fresh_instance_per_seed: bool,
    /// Per-run parameters; `n_tot` is overridden by each budget.
    #[serde(flatten)]
    pub params: RunParams,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies".into()));
        }
        if self.budgets.is_empty() || self.budgets.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Config("budget grid must be non-empty and strictly increasing".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row of the per-run CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub strategy: StrategyName,
    pub seed: u64,
    pub n_tot: u64,
    pub n_floor: u64,
    pub metrics: Option<(f64, f64, f64, usize)>,
    pub status: String,
    pub wall_ms: f64,
}

impl RunRow {
    pub fn from_result(strategy: StrategyName, n_tot: u64, n_floor: u64, r: &RunResult) -> Self {
        Self {
            strategy,
            seed: r.seed,
            n_tot,
            n_floor,
            metrics: Some((r.excess_risk, r.subspace_distance, r.nu_l1, r.support)),
            status: "ok".into(),
            wall_ms: r.wall_ms,
        }
    }

    pub fn er(&self) -> Option<f64> {
        self.metrics.map(|m| m.0)
    }

    fn record(&self) -> Vec<String> {
        let (er, dist, l1, support) = match self.metrics {
            Some((a, b, c, d)) => (a.to_string(), b.to_string(), c.to_string(), d.to_string()),
            None => Default::default(),
        };
        vec![
            self.strategy.as_str().to_string(),
            self.seed.to_string(),
            self.n_tot.to_string(),
            self.n_floor.to_string(),
            er,
            dist,
            l1,
            support,
            self.status.clone(),
            format!("{:.3}", self.wall_ms),
        ]
    }
}

pub(super) fn write_rows(path: &Path, rows: &[RunRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(CSV_HEADER)?;
    for row in rows {
        wtr.write_record(row.record())?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub strategy: StrategyName,
    pub n_tot: u64,
    pub runs: usize,
    pub median_er: Option<f64>,
    pub q1_er: Option<f64>,
    pub q3_er: Option<f64>,
}

impl SummaryRow {
    pub fn iqr(&self) -> Option<f64> {
        Some(self.q3_er? - self.q1_er?)
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
    /// Log-log slope of median ER against budget, per strategy with at least
    /// two usable budgets.
    pub slopes: Vec<(StrategyName, f64)>,
    pub files: Vec<PathBuf>,
}

/// Median of a non-empty sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// First and third quartiles, linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> Option<(f64, f64)> {
    Some((quantile(values, 0.25)?, quantile(values, 0.75)?))
}

fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Worker count from `AMTRL_THREADS`, if set to a positive integer.
fn thread_cap() -> Option<usize> {
    std::env::var("AMTRL_THREADS").ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

fn run_one(config: &SweepConfig, shared: Option<&crate::instance::GroundTruth>, job: (StrategyName, u64, u64)) -> RunRow {
    let (strategy, n_tot, seed) = job;
    let params = RunParams { n_tot, ..config.params.clone() };
    let built;
    let outcome = match shared {
        Some(gt) => run_strategy(gt, strategy, &params, seed),
        None => match config.instance.build_with_seed(config.instance.seed.wrapping_add(seed)) {
            Ok(gt) => {
                built = gt;
                run_strategy(&built, strategy, &params, seed)
            }
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(r) => RunRow::from_result(strategy, n_tot, params.n_floor, &r),
        Err(e) => {
            let status = match e {
                Error::InfeasibleBudget { .. } => "infeasible".to_string(),
                other => {
                    log::warn!("{} seed {seed} N_tot {n_tot}: {other}", strategy.as_str());
                    "error".to_string()
                }
            };
            RunRow { strategy, seed, n_tot, n_floor: params.n_floor, metrics: None, status, wall_ms: 0.0 }
        }
    }
}

/// Runs every strategy x budget x seed, then writes `runs.csv`,
/// `summary.csv`, `slopes.csv` and one `plot_<strategy>.dat` per strategy.
pub fn cmd_sweep(config: &SweepConfig, out: &Path) -> Result<SweepOutcome> {
    config.validate()?;
    let shared = if config.fresh_instance_per_seed { None } else { Some(config.instance.build()?) };
    let mut jobs = Vec::new();
    for &s in &config.strategies {
        for &n in &config.budgets {
            for seed in 0..config.seeds {
                jobs.push((s, n, config.seed_offset + seed));
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut rows: Vec<RunRow> =
        pool.install(|| jobs.par_iter().map(|&job| run_one(config, shared.as_ref(), job)).collect());
    rows.sort_by(|a, b| {
        (a.strategy.as_str(), a.n_tot, a.seed).cmp(&(b.strategy.as_str(), b.n_tot, b.seed))
    });

    let mut strategies: Vec<StrategyName> = config.strategies.clone();
    strategies.sort_by_key(|s| s.as_str());
    strategies.dedup();
    let mut summary = Vec::new();
    for &s in &strategies {
        for &n in &config.budgets {
            let ers: Vec<f64> =
                rows.iter().filter(|r| r.strategy == s && r.n_tot == n).filter_map(RunRow::er).collect();
            let q = quartiles(&ers);
            summary.push(SummaryRow {
                strategy: s,
                n_tot: n,
                runs: ers.len(),
                median_er: median(&ers),
                q1_er: q.map(|q| q.0),
                q3_er: q.map(|q| q.1),
            });
        }
    }

    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let runs_path = out.join("runs.csv");
    write_rows(&runs_path, &rows)?;
    files.push(runs_path);

    let summary_path = out.join("summary.csv");
    let mut wtr = csv::Writer::from_path(&summary_path)?;
    wtr.write_record(["strategy", "N_tot", "runs", "median_ER", "q1_ER", "q3_ER", "IQR"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in &summary {
        wtr.write_record([
            row.strategy.as_str().to_string(),
            row.n_tot.to_string(),
            row.runs.to_string(),
            opt(row.median_er),
            opt(row.q1_er),
            opt(row.q3_er),
            opt(row.iqr()),
        ])?;
    }
    wtr.flush()?;
    files.push(summary_path);

    let mut slopes = Vec::new();
    for &s in &strategies {
        let points: Vec<(f64, f64)> = summary
            .iter()
            .filter(|r| r.strategy == s)
            .filter_map(|r| Some((r.n_tot as f64, r.median_er?)))
            .collect();
        let mut text = String::from("# log_N_tot log_median_ER\n");
        for (n, er) in &points {
            if *er > 0.0 {
                text.push_str(&format!("{} {}\n", n.ln(), er.ln()));
            }
        }
        let path = out.join(format!("plot_{}.dat", s.as_str()));
        fs::write(&path, text)?;
        files.push(path);
        if let Some(slope) = loglog_slope(&points) {
            slopes.push((s, slope));
        }
    }
    let slopes_path = out.join("slopes.csv");
    let mut wtr = csv::Writer::from_path(&slopes_path)?;
    wtr.write_record(["strategy", "loglog_slope"])?;
    for (s, slope) in &slopes {
        wtr.write_record([s.as_str().to_string(), slope.to_string()])?;
    }
    wtr.flush()?;
    files.push(slopes_path);

    Ok(SweepOutcome { rows, summary, slopes, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]), Some((2.0, 4.0)));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(-1.5))).collect();
        assert!((loglog_slope(&pts).unwrap() + 1.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&pts[..1]), None);
    }
}
