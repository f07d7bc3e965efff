//! File-driven front door behind the `gen`, `solve`, `run`, and `bounds`
//! subcommands.
//!
//! Every behavior flows through flags and JSON configs; nothing reads
//! environment variables or wall-clock seeds, so identical invocations
//! produce byte-identical outputs. Exit statuses: 0 success, 1 I/O or parse
//! error, 2 validation error, 3 domain error.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{upper_bound_value, BoundInputs, BoundMode, BoundValue, VarMaxCSource};
use crate::envs::{make_chain, make_lower_bound_instance, make_random_mdp, LowerBoundSpec};
use crate::harness::{
    aggregate_seeds, fit_log_regression, run_experiment, DiagnosticsFlags, ExperimentParams,
    LogFit, RegretTrace, SeedSummary,
};
use crate::learner::BonusConstants;
use crate::mdp::TabularMdp;
use crate::solver::{
    optimal_values, policy_count, variance_profile, OptimalSolution, VarianceProfile,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
}

impl CliError {
    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Parse { .. } => 1,
            CliError::Validation(_) => 2,
            CliError::Domain(_) => 3,
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| CliError::Parse {
        path: path.display().to_string(),
        source,
    })
}

fn write_pretty_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Loads an MDP file and insists it is structurally valid.
pub fn load_mdp(path: &Path) -> Result<TabularMdp, CliError> {
    let mdp: TabularMdp = read_json(path)?;
    let violations = mdp.validate();
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(CliError::Validation(lines.join("; ")));
    }
    Ok(mdp)
}

/// Environment description: either a path to an MDP file or an inline
/// generator spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvSpec {
    Path(PathBuf),
    LowerBound(LowerBoundSpec),
    Chain {
        horizon: usize,
    },
    Random {
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        sparsity: f64,
        seed: u64,
    },
}

impl EnvSpec {
    pub fn build(&self) -> Result<(TabularMdp, String), CliError> {
        match self {
            EnvSpec::Path(path) => {
                let mdp = load_mdp(path)?;
                Ok((mdp, path.display().to_string()))
            }
            EnvSpec::LowerBound(spec) => {
                let (mdp, _) = make_lower_bound_instance(spec)
                    .map_err(|e| CliError::Validation(e.to_string()))?;
                let id = format!(
                    "lower_bound(S={}, A={}, H={}, L={})",
                    spec.bandit_states, spec.num_actions, spec.horizon, spec.target_variance
                );
                Ok((mdp, id))
            }
            EnvSpec::Chain { horizon } => {
                if *horizon == 0 {
                    return Err(CliError::Validation(
                        "chain horizon must be positive".into(),
                    ));
                }
                Ok((make_chain(*horizon), format!("chain(H={horizon})")))
            }
            EnvSpec::Random {
                num_states,
                num_actions,
                horizon,
                sparsity,
                seed,
            } => {
                if *num_states == 0 || *num_actions == 0 || *horizon == 0 {
                    return Err(CliError::Validation(
                        "random env dimensions must be positive".into(),
                    ));
                }
                let mdp = make_random_mdp(*num_states, *num_actions, *horizon, *sparsity, *seed);
                Ok((
                    mdp,
                    format!("random(S={num_states}, A={num_actions}, H={horizon}, seed={seed})"),
                ))
            }
        }
    }
}

/// Constants block of an experiment config; anything omitted keeps its
/// default.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstantOverrides {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c4: Option<f64>,
}

impl ConstantOverrides {
    pub fn bonus_constants(&self) -> BonusConstants {
        let d = BonusConstants::default();
        BonusConstants {
            c1: self.c1.unwrap_or(d.c1),
            c2: self.c2.unwrap_or(d.c2),
            c3: self.c3.unwrap_or(d.c3),
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    #[serde(default = "default_true")]
    pub optimism: bool,
    #[serde(default = "default_true")]
    pub surplus: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            optimism: true,
            surplus: true,
        }
    }
}

/// A `run` invocation: environment, episode count, confidence, seeds,
/// constants, diagnostics, and the output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    #[serde(rename = "K")]
    pub episodes: u64,
    pub delta: f64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub constants: ConstantOverrides,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    pub output_dir: PathBuf,
    /// Log-fit window `[lo, hi]` for the summary; defaults to `[K/2, K]`.
    #[serde(default)]
    pub log_fit_window: Option<(u64, u64)>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.episodes == 0 {
            return Err(CliError::Validation("K must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CliError::Validation(format!(
                "delta = {} outside (0, 1)",
                self.delta
            )));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Validation("seeds must be nonempty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(CliError::Validation("seeds must be distinct".into()));
        }
        Ok(())
    }
}

/// What `gen` wrote to disk.
#[derive(Debug, Clone)]
pub struct GenOutput {
    pub mdp_path: PathBuf,
    pub meta_path: Option<PathBuf>,
}

/// Generates a lower-bound instance and writes `<prefix>.mdp.json` plus the
/// sidecar `<prefix>.meta.json` (sigma, p_table, d_table).
pub fn cmd_gen_lower_bound(spec: &LowerBoundSpec, prefix: &Path) -> Result<GenOutput, CliError> {
    let (mdp, meta) =
        make_lower_bound_instance(spec).map_err(|e| CliError::Validation(e.to_string()))?;
    let mdp_path = with_suffix(prefix, ".mdp.json");
    let meta_path = with_suffix(prefix, ".meta.json");
    write_pretty_json(&mdp_path, &mdp)?;
    write_pretty_json(&meta_path, &meta)?;
    Ok(GenOutput {
        mdp_path,
        meta_path: Some(meta_path),
    })
}

pub fn cmd_gen_chain(horizon: usize, prefix: &Path) -> Result<GenOutput, CliError> {
    if horizon == 0 {
        return Err(CliError::Validation(
            "chain horizon must be positive".into(),
        ));
    }
    let mdp_path = with_suffix(prefix, ".mdp.json");
    write_pretty_json(&mdp_path, &make_chain(horizon))?;
    Ok(GenOutput {
        mdp_path,
        meta_path: None,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_gen_random(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    sparsity: f64,
    seed: u64,
    prefix: &Path,
) -> Result<GenOutput, CliError> {
    if num_states == 0 || num_actions == 0 || horizon == 0 {
        return Err(CliError::Validation("S, A, H must all be positive".into()));
    }
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(CliError::Validation(format!(
            "sparsity = {sparsity} outside (0, 1]"
        )));
    }
    let mdp_path = with_suffix(prefix, ".mdp.json");
    write_pretty_json(
        &mdp_path,
        &make_random_mdp(num_states, num_actions, horizon, sparsity, seed),
    )?;
    Ok(GenOutput {
        mdp_path,
        meta_path: None,
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

/// Solved-instance report: the optimal solution, variance profile, and
/// instance dimensions, as written by `solve` and consumed by `bounds`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub horizon: usize,
    pub num_states: usize,
    pub num_actions: usize,
    pub solution: OptimalSolution,
    pub variance: VarianceProfile,
    /// Deterministic policy count `A^(H·S)` compared against the cap.
    pub policy_count: f64,
    pub enum_cap: u64,
}

/// The subset of the solve report that `bounds` needs back.
#[derive(Debug, Clone, Deserialize)]
pub struct SolveReportInputs {
    pub horizon: usize,
    pub num_states: usize,
    pub num_actions: usize,
    pub solution: SolutionInputs,
    pub variance: VarianceInputs,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SolutionInputs {
    pub gaps: Vec<Vec<Vec<f64>>>,
    pub delta_min: Option<f64>,
    pub z_opt: Vec<(usize, usize, usize)>,
    pub z_sub: Vec<(usize, usize, usize)>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct VarianceInputs {
    pub var_max: f64,
    pub var_max_c_future: f64,
    pub var_max_c_exact: Option<f64>,
}

/// Solves an MDP file. The conditional-variance enumeration oracle runs only
/// when the policy count fits under `cap`; exceeding the cap is reported in
/// the output, not fatal.
pub fn cmd_solve(mdp_path: &Path, cap: u64, attempt_exact: bool) -> Result<SolveReport, CliError> {
    let mdp = load_mdp(mdp_path)?;
    let sol = optimal_values(&mdp);
    let count = policy_count(&mdp);
    let exact_cap = if attempt_exact && count <= cap as f64 {
        Some(cap)
    } else {
        None
    };
    let variance = variance_profile(&mdp, &sol, exact_cap);
    Ok(SolveReport {
        horizon: mdp.horizon,
        num_states: mdp.num_states,
        num_actions: mdp.num_actions,
        solution: sol,
        variance,
        policy_count: count,
        enum_cap: cap,
    })
}

/// Everything `run` leaves on disk for one config.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutput {
    pub trace_paths: Vec<PathBuf>,
    pub counts_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

/// Summary JSON written by `run`: seed aggregate plus growth diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub aggregate: SeedSummary,
    pub log_fit_window: (u64, u64),
    pub log_fit: Option<LogFit>,
    /// `R² ≥ 0.9` for the mean-curve log fit.
    pub log_fit_r2_at_least_0_9: bool,
    /// `cum(K)/√K` and `cum(K/4)/√(K/4)` on the mean curve.
    pub sqrt_normalized_at_full: f64,
    pub sqrt_normalized_at_quarter: f64,
    pub sqrt_growth_decreasing: bool,
}

/// Runs one seeded experiment per config seed (optionally in parallel) and
/// writes per-seed trace CSVs, per-seed final count tables, and the summary.
pub fn cmd_run(config: &ExperimentConfig, jobs: usize) -> Result<RunOutput, CliError> {
    config.validate()?;
    let (mdp, env_id) = config.env.build()?;
    let sol = optimal_values(&mdp);
    fs::create_dir_all(&config.output_dir)?;

    let run_one = |&seed: &u64| -> Result<RegretTrace, CliError> {
        let params = ExperimentParams {
            episodes: config.episodes,
            delta: config.delta,
            seed,
            constants: config.constants.bonus_constants(),
            diagnostics: DiagnosticsFlags {
                optimism: config.diagnostics.optimism,
                surplus: config.diagnostics.surplus,
            },
            env_id: env_id.clone(),
        };
        run_experiment(&mdp, &sol, &params).map_err(|e| CliError::Domain(e.to_string()))
    };
    let traces: Vec<RegretTrace> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Domain(e.to_string()))?;
        pool.install(|| {
            config
                .seeds
                .par_iter()
                .map(run_one)
                .collect::<Result<_, _>>()
        })?
    } else {
        config.seeds.iter().map(run_one).collect::<Result<_, _>>()?
    };

    let mut trace_paths = Vec::new();
    let mut counts_paths = Vec::new();
    for trace in &traces {
        let trace_path = config
            .output_dir
            .join(format!("seed_{}_trace.csv", trace.seed));
        let mut buf = Vec::new();
        trace.write_csv(&mut buf)?;
        fs::write(&trace_path, buf)?;
        let counts_path = config
            .output_dir
            .join(format!("seed_{}_counts.json", trace.seed));
        write_pretty_json(&counts_path, &trace.final_counts)?;
        trace_paths.push(trace_path);
        counts_paths.push(counts_path);
    }

    let aggregate = aggregate_seeds(&traces).map_err(|e| CliError::Domain(e.to_string()))?;
    let window = config
        .log_fit_window
        .unwrap_or((config.episodes.div_ceil(2).max(1), config.episodes));
    let log_fit = fit_log_regression(
        &aggregate.mean_cum_regret,
        (window.0 as usize, window.1 as usize),
    )
    .ok();
    let k = config.episodes as usize;
    let quarter = (k / 4).max(1);
    let at_full = aggregate.mean_cum_regret[k - 1] / (k as f64).sqrt();
    let at_quarter = aggregate.mean_cum_regret[quarter - 1] / (quarter as f64).sqrt();
    let summary = RunSummary {
        log_fit_window: window,
        log_fit,
        log_fit_r2_at_least_0_9: log_fit.map(|f| f.r_squared >= 0.9).unwrap_or(false),
        sqrt_normalized_at_full: at_full,
        sqrt_normalized_at_quarter: at_quarter,
        sqrt_growth_decreasing: at_full < at_quarter,
        aggregate,
    };
    let summary_path = config.output_dir.join("summary.json");
    write_pretty_json(&summary_path, &summary)?;
    Ok(RunOutput {
        trace_paths,
        counts_paths,
        summary_path,
    })
}

/// Bound-breakdown JSON written by `bounds`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub mode: BoundMode,
    pub var_max_c_source: VarMaxCSource,
    pub var_max_c: f64,
    pub w_bar: f64,
    pub iota: f64,
    pub episodes: u64,
    pub delta: f64,
    pub upper: BoundValue,
}

/// Evaluates the upper bound for a solved-instance report.
pub fn cmd_bounds(
    report_path: &Path,
    episodes: u64,
    delta: f64,
    mode: BoundMode,
    source: VarMaxCSource,
) -> Result<BoundReport, CliError> {
    let report: SolveReportInputs = read_json(report_path)?;
    if report.solution.z_sub.is_empty() || report.solution.delta_min.is_none() {
        return Err(CliError::Domain(
            "no-gaps: the solved instance has an empty suboptimal set".into(),
        ));
    }
    let var_max_c = match source {
        VarMaxCSource::FutureDp => report.variance.var_max_c_future,
        VarMaxCSource::Exact => report.variance.var_max_c_exact.ok_or_else(|| {
            CliError::Domain("report carries no exact conditional variance value".into())
        })?,
    };
    let gaps_sub: Vec<f64> = report
        .solution
        .z_sub
        .iter()
        .map(|&(h, s, a)| report.solution.gaps[h][s][a])
        .collect();
    let inputs = BoundInputs::new(
        gaps_sub,
        report.solution.z_opt.len(),
        report.solution.delta_min.expect("checked above"),
        report.horizon,
        report.num_states,
        report.num_actions,
        episodes,
        delta,
        var_max_c,
        source,
    )
    .map_err(|e| CliError::Domain(e.to_string()))?;
    Ok(BoundReport {
        mode,
        var_max_c_source: source,
        var_max_c,
        w_bar: inputs.w_bar(),
        iota: inputs.iota(),
        episodes,
        delta,
        upper: upper_bound_value(&inputs, mode),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::DEFAULT_ENUM_CAP;
    use tempfile::tempdir;

    fn tiny_spec() -> LowerBoundSpec {
        LowerBoundSpec {
            bandit_states: 1,
            num_actions: 2,
            horizon: 2,
            target_variance: 4.0,
            gaps: vec![0.0, 0.4, 0.0, 0.8],
        }
    }

    #[test]
    fn gen_solve_bounds_pipeline() {
        let dir = tempdir().unwrap();
        let prefix = dir.path().join("tiny");
        let gen = cmd_gen_lower_bound(&tiny_spec(), &prefix).unwrap();
        assert!(gen.mdp_path.exists());
        assert!(gen.meta_path.as_ref().unwrap().exists());

        let report = cmd_solve(&gen.mdp_path, DEFAULT_ENUM_CAP, true).unwrap();
        assert!((report.solution.v0_star - 0.125).abs() < 1e-12);
        assert!((report.variance.var_max - 15.0 / 64.0).abs() < 1e-10);
        assert!((report.variance.var_max_c_exact.unwrap() - 71.0 / 64.0).abs() < 1e-10);

        let report_path = dir.path().join("solved.json");
        write_pretty_json(&report_path, &report).unwrap();
        let bounds = cmd_bounds(
            &report_path,
            1000,
            0.1,
            BoundMode::Leading,
            VarMaxCSource::Exact,
        )
        .unwrap();
        // gap_term = W̄·ι·(1/0.1 + 1/0.2) with W̄ = 71/64.
        let want = (71.0 / 64.0) * bounds.iota * 15.0;
        assert!((bounds.upper.gap_term - want).abs() < 1e-9 * want);
        assert!((bounds.w_bar - 71.0 / 64.0).abs() < 1e-12);

        let full = cmd_bounds(
            &report_path,
            1000,
            0.1,
            BoundMode::FullConstants,
            VarMaxCSource::Exact,
        )
        .unwrap();
        assert!(
            (full.upper.gap_term - 48600.0 * bounds.upper.gap_term).abs()
                <= 1e-9 * full.upper.gap_term
        );
    }

    #[test]
    fn gen_rejects_bad_specs_with_validation_errors() {
        let dir = tempdir().unwrap();
        let mut spec = tiny_spec();
        spec.gaps[1] = 5.0;
        let err = cmd_gen_lower_bound(&spec, &dir.path().join("bad")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("sqrt(L)"));
    }

    #[test]
    fn solve_reports_parse_failures_with_exit_one() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("broken.mdp.json");
        fs::write(&path, "{ not json").unwrap();
        let err = cmd_solve(&path, DEFAULT_ENUM_CAP, true).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn solve_skips_the_oracle_over_the_cap() {
        let dir = tempdir().unwrap();
        let prefix = dir.path().join("tiny");
        let gen = cmd_gen_lower_bound(&tiny_spec(), &prefix).unwrap();
        // 2^(2·3) = 64 policies; a cap of 10 forces the skip.
        let report = cmd_solve(&gen.mdp_path, 10, true).unwrap();
        assert!(report.variance.var_max_c_exact.is_none());
        assert_eq!(report.policy_count, 64.0);
    }

    #[test]
    fn chain_run_writes_zero_regret_rows() {
        let dir = tempdir().unwrap();
        let config = ExperimentConfig {
            env: EnvSpec::Chain { horizon: 3 },
            episodes: 100,
            delta: 0.1,
            seeds: vec![1],
            constants: ConstantOverrides::default(),
            diagnostics: DiagnosticsConfig::default(),
            output_dir: dir.path().join("out"),
            log_fit_window: Some((50, 100)),
        };
        let out = cmd_run(&config, 1).unwrap();
        let text = fs::read_to_string(&out.trace_paths[0]).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,instant_regret,cum_regret,opt_violations,min_q_slack,max_surplus"
        );
        assert_eq!(lines.clone().count(), 100);
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 6);
            assert_eq!(fields[1].parse::<f64>().unwrap(), 0.0);
        }
        assert!(out.summary_path.exists());
    }

    #[test]
    fn identical_configs_produce_identical_csv_bytes() {
        let dir = tempdir().unwrap();
        let make = |sub: &str| ExperimentConfig {
            env: EnvSpec::LowerBound(tiny_spec()),
            episodes: 200,
            delta: 0.1,
            seeds: vec![3, 5],
            constants: ConstantOverrides::default(),
            diagnostics: DiagnosticsConfig::default(),
            output_dir: dir.path().join(sub),
            log_fit_window: None,
        };
        let a = cmd_run(&make("a"), 1).unwrap();
        let b = cmd_run(&make("b"), 2).unwrap();
        for (pa, pb) in a.trace_paths.iter().zip(&b.trace_paths) {
            assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
        }
        assert_eq!(
            fs::read(&a.summary_path).unwrap(),
            fs::read(&b.summary_path).unwrap()
        );
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let mut config = ExperimentConfig {
            env: EnvSpec::Chain { horizon: 2 },
            episodes: 10,
            delta: 0.1,
            seeds: vec![1, 1],
            constants: ConstantOverrides::default(),
            diagnostics: DiagnosticsConfig::default(),
            output_dir: PathBuf::from("unused"),
            log_fit_window: None,
        };
        assert_eq!(config.validate().unwrap_err().exit_code(), 2);
        config.seeds = vec![];
        assert!(config.validate().is_err());
        config.seeds = vec![1];
        config.delta = 1.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn bounds_requires_gaps() {
        let dir = tempdir().unwrap();
        let gen = cmd_gen_chain(3, &dir.path().join("chain")).unwrap();
        let report = cmd_solve(&gen.mdp_path, DEFAULT_ENUM_CAP, true).unwrap();
        let report_path = dir.path().join("chain_solved.json");
        write_pretty_json(&report_path, &report).unwrap();
        let err = cmd_bounds(
            &report_path,
            100,
            0.1,
            BoundMode::Leading,
            VarMaxCSource::FutureDp,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("no-gaps"));
    }
}
