//! Command implementations behind the `amtrl` binary: instance generation,
//! single runs, budget sweeps, relevance solves and the verification suite.
//!
//! Every command reads a JSON config and writes its artifacts to an output
//! directory. Errors map to process exit codes through [`exit_code`].

mod sweep;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::instance::{self, GroundTruth};
use crate::pipeline::{self, InstanceOracle, LambdaPolicy, RunParams, RunResult};
use crate::relevance::{self, LassoOptions, NormBoundReport, RelevanceVector};
use crate::serde_matrix;
use crate::{Error, Result};

pub use sweep::{cmd_sweep, loglog_slope, median, quartiles, SweepConfig, SweepOutcome, SummaryRow, CSV_HEADER};
pub use verify::{cmd_verify, Level, PropertyResult, Tolerances, VerifyConfig, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Process exit code for an error: 3 for I/O and CSV failures, 2 otherwise
/// (bad config, invalid dimensions, infeasible parameters).
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceFamily {
    Random,
    AlmostSparse,
    AlignedWorstCase,
    /// Load a previously generated instance from `path`.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub kind: InstanceFamily,
    #[serde(default)]
    pub d: usize,
    #[serde(default)]
    pub k: usize,
    #[serde(rename = "T", default)]
    pub t: usize,
    #[serde(default)]
    pub sigma_z: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_floor")]
    pub sigma_min_floor: f64,
    #[serde(default = "default_c_w")]
    pub c_w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

fn default_floor() -> f64 {
    0.5
}

fn default_c_w() -> f64 {
    1.0
}

impl InstanceSpec {
    /// Builds the instance, replacing the configured seed by `seed`.
    pub fn build_with_seed(&self, seed: u64) -> Result<GroundTruth> {
        match self.kind {
            InstanceFamily::Random => {
                instance::make_random_instance(self.d, self.k, self.t, self.sigma_z, self.sigma_min_floor, seed)
            }
            InstanceFamily::AlmostSparse => {
                Ok(instance::make_almost_sparse_instance(self.d, self.k, self.t, self.sigma_z, seed)?.0)
            }
            InstanceFamily::AlignedWorstCase => {
                let gt = instance::make_aligned_worstcase_instance(self.d, self.k, self.t, self.c_w, seed)?;
                if self.sigma_z > 0.0 {
                    let meta = gt.meta.clone();
                    GroundTruth::new(gt.b_star, gt.w_star, gt.w_target_star, self.sigma_z, meta)
                } else {
                    Ok(gt)
                }
            }
            InstanceFamily::File => {
                let path = self.path.as_ref().ok_or_else(|| Error::Config("instance kind `file` needs `path`".into()))?;
                let text = fs::read_to_string(path)?;
                GroundTruth::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
        }
    }

    pub fn build(&self) -> Result<GroundTruth> {
        self.build_with_seed(self.seed)
    }
}

/// Reads and parses a JSON config; parse failures are configuration errors.
pub fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Config of `gen`: either a bare instance spec or `{"instance": {...}}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GenConfig {
    Wrapped { instance: InstanceSpec },
    Bare(InstanceSpec),
}

impl GenConfig {
    pub fn spec(&self) -> &InstanceSpec {
        match self {
            GenConfig::Wrapped { instance } | GenConfig::Bare(instance) => instance,
        }
    }
}

/// Writes `instance.json` to `out` and returns its path.
pub fn cmd_gen(config: &GenConfig, out: &Path) -> Result<PathBuf> {
    let gt = config.spec().build()?;
    write_file(out, "instance.json", &gt.to_json()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    L1,
    L2,
    Passive,
    KnownL1,
    KnownL2,
    Multistage,
}

impl StrategyName {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyName::L1 => "l1",
            StrategyName::L2 => "l2",
            StrategyName::Passive => "passive",
            StrategyName::KnownL1 => "known_l1",
            StrategyName::KnownL2 => "known_l2",
            StrategyName::Multistage => "multistage",
        }
    }
}

/// Runs one strategy on one instance. Known-relevance strategies use the
/// instance's stored reference vector.
pub fn run_strategy(gt: &GroundTruth, strategy: StrategyName, params: &RunParams, seed: u64) -> Result<RunResult> {
    let oracle = InstanceOracle::new(gt, seed);
    let k = gt.k;
    let known = |q: f64| -> Result<RunResult> {
        let nu = gt
            .meta
            .reference_nu
            .as_ref()
            .ok_or_else(|| Error::Config("known-relevance strategies need an instance with reference_nu".into()))?;
        pipeline::run_known_nu(&oracle, k, params, seed, nu, q)
    };
    match strategy {
        StrategyName::L1 => pipeline::run_l1_amtrl(&oracle, k, params, seed),
        StrategyName::L2 => pipeline::run_l2_amtrl(&oracle, k, params, seed),
        StrategyName::Passive => pipeline::run_passive(&oracle, k, params, seed),
        StrategyName::KnownL1 => known(1.0),
        StrategyName::KnownL2 => known(2.0),
        StrategyName::Multistage => pipeline::run_multistage(&oracle, k, params, seed),
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct RunConfig {
    pub instance: InstanceSpec,
    pub strategy: StrategyName,
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub params: RunParams,
}

/// Writes `run.json` (full result) and `run.csv` (one summary row).
pub fn cmd_run(config: &RunConfig, out: &Path) -> Result<RunResult> {
    let gt = config.instance.build()?;
    let result = run_strategy(&gt, config.strategy, &config.params, config.seed)?;
    write_file(out, "run.json", &result.to_json()?)?;
    let row = sweep::RunRow::from_result(config.strategy, config.params.n_tot, config.params.n_floor, &result);
    sweep::write_rows(&out.join("run.csv"), &[row])?;
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuSolver {
    Lasso,
    MinL2,
    Lp,
    #[default]
    All,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NuSolveConfig {
    /// Explicit system; takes precedence over `instance`.
    #[serde(rename = "W", default, with = "option_matrix")]
    pub w_mat: Option<DMatrix<f64>>,
    #[serde(default, with = "serde_matrix::option_vector")]
    pub w: Option<DVector<f64>>,
    /// Otherwise the ground-truth heads of this instance are used.
    #[serde(default)]
    pub instance: Option<InstanceSpec>,
    #[serde(default)]
    pub solver: NuSolver,
    #[serde(default = "lazy")]
    pub lambda: LambdaPolicy,
}

fn lazy() -> LambdaPolicy {
    LambdaPolicy::Lazy
}

mod option_matrix {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer};

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "crate::serde_matrix::matrix")] DMatrix<f64>);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NuSolveReport {
    pub solutions: Vec<RelevanceVector>,
    pub norm_bounds: NormBoundReport,
}

/// Solves `W nu = w` with the requested solvers and writes `nu.json`.
pub fn cmd_nu_solve(config: &NuSolveConfig, out: &Path) -> Result<NuSolveReport> {
    let (w_mat, w) = match (&config.w_mat, &config.w, &config.instance) {
        (Some(m), Some(v), _) => (m.clone(), v.clone()),
        (None, None, Some(spec)) => {
            let gt = spec.build()?;
            (gt.w_star.clone(), gt.w_target_star.clone())
        }
        _ => return Err(Error::Config("nu-solve needs either `W` and `w`, or `instance`".into())),
    };
    if w_mat.nrows() != w.len() {
        return Err(Error::Config(format!("W has {} rows but w has {} entries", w_mat.nrows(), w.len())));
    }
    let mut solutions = Vec::new();
    let want = |s: NuSolver| config.solver == s || config.solver == NuSolver::All;
    if want(NuSolver::Lp) {
        solutions.push(relevance::l1_oracle_lp(&w_mat, &w)?);
    }
    if want(NuSolver::Lasso) {
        let lambda = config.lambda.resolve(&w_mat, &w)?;
        solutions.push(relevance::lasso(&w_mat, &w, lambda, &LassoOptions::default())?);
    }
    if want(NuSolver::MinL2) {
        solutions.push(relevance::min_l2_solution(&w_mat, &w)?);
    }
    let report = NuSolveReport { solutions, norm_bounds: relevance::norm_bound_check(&w_mat, &w)? };
    write_file(out, "nu.json", &serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
        assert_eq!(exit_code(&Error::Dimension("x".into())), EXIT_USAGE);
    }

    #[test]
    fn gen_config_forms() {
        let bare: GenConfig = serde_json::from_str(r#"{"kind":"random","d":4,"k":1,"T":1}"#).unwrap();
        let wrapped: GenConfig = serde_json::from_str(r#"{"instance":{"kind":"random","d":4,"k":1,"T":1}}"#).unwrap();
        assert_eq!(bare.spec(), wrapped.spec());
        assert_eq!(bare.spec().sigma_min_floor, 0.5);
    }

    #[test]
    fn known_strategy_needs_reference() {
        let gt = instance::make_random_instance(5, 1, 2, 0.0, 0.5, 1).unwrap();
        let mut bare = gt.clone();
        bare.meta.reference_nu = None;
        let params = RunParams { n_tot: 40, n_floor: 5, n_target: 20, ..Default::default() };
        assert!(run_strategy(&gt, StrategyName::KnownL1, &params, 0).is_ok());
        assert!(matches!(run_strategy(&bare, StrategyName::KnownL1, &params, 0), Err(Error::Config(_))));
    }
}
