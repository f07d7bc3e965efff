//! Seeded regret experiments with white-box diagnostics.
//!
//! Every episode the harness extracts the greedy policy, computes the
//! *exact* instantaneous regret by policy evaluation against the solved
//! instance (regret is defined on expected values, not sampled returns),
//! samples one trajectory, and folds it into the learner. Optimism slack and
//! surplus extrema are recorded from the post-update tables. Runs are pure
//! functions of `(mdp, K, δ, seed, flags)`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::learner::{BonusConstants, LearnerError, LearnerState};
use crate::mdp::{sample_trajectory, DeterministicPolicy, TabularMdp};
use crate::solver::{policy_evaluation, OptimalSolution};
use crate::{CountTable, Table2, Table3};

/// Default clipping multiplier for clipped surpluses.
pub const DEFAULT_CLIP_C4: f64 = 1.0 / 6.0;

/// Optimism comparisons treat differences above this as genuine violations
/// rather than floating-point noise.
pub const OPTIMISM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("instance has no positive gaps; gap-dependent quantities are undefined")]
    NoGaps,
    #[error("trace shapes disagree: {0}")]
    ShapeMismatch(String),
    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// Per-episode diagnostics toggles. Disabled diagnostics record zeros.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiagnosticsFlags {
    pub optimism: bool,
    pub surplus: bool,
}

impl Default for DiagnosticsFlags {
    fn default() -> Self {
        Self {
            optimism: true,
            surplus: true,
        }
    }
}

/// Inputs of one seeded run.
#[derive(Debug, Clone)]
pub struct ExperimentParams {
    pub episodes: u64,
    pub delta: f64,
    pub seed: u64,
    pub constants: BonusConstants,
    pub diagnostics: DiagnosticsFlags,
    pub env_id: String,
}

/// One row of a regret trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpisodeRecord {
    pub k: u64,
    pub instant_regret: f64,
    pub cum_regret: f64,
    pub opt_violations: u32,
    pub min_q_slack: f64,
    pub max_surplus: f64,
}

/// Full record of one seeded run.
#[derive(Debug, Clone, Serialize)]
pub struct RegretTrace {
    pub env_id: String,
    pub seed: u64,
    pub episodes: u64,
    pub delta: f64,
    pub records: Vec<EpisodeRecord>,
    /// Final visitation counts `n[h][s][a]` after all episodes.
    pub final_counts: CountTable,
}

impl RegretTrace {
    pub fn cum_regret_curve(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cum_regret).collect()
    }

    pub fn any_optimism_violation(&self) -> bool {
        self.records.iter().any(|r| r.opt_violations > 0)
    }

    /// CSV with the fixed header
    /// `k,instant_regret,cum_regret,opt_violations,min_q_slack,max_surplus`,
    /// one row per episode, 13 significant digits per real.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "k,instant_regret,cum_regret,opt_violations,min_q_slack,max_surplus"
        )?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.12e},{:.12e},{},{:.12e},{:.12e}",
                r.k, r.instant_regret, r.cum_regret, r.opt_violations, r.min_q_slack, r.max_surplus
            )?;
        }
        Ok(())
    }
}

/// Runs MVP for `params.episodes` episodes and returns the trace.
pub fn run_experiment(
    mdp: &TabularMdp,
    sol: &OptimalSolution,
    params: &ExperimentParams,
) -> Result<RegretTrace, HarnessError> {
    let mut learner = LearnerState::new(
        mdp.num_states,
        mdp.num_actions,
        mdp.horizon,
        params.episodes,
        params.delta,
        params.constants,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut records = Vec::with_capacity(params.episodes as usize);
    let mut cum = 0.0;
    for k in 1..=params.episodes {
        let policy = learner.greedy_policy();
        let instant = sol.v0_star - policy_evaluation(mdp, &policy).v0;
        cum += instant;
        let trajectory = sample_trajectory(mdp, &policy, &mut rng);
        learner.update(&trajectory)?;

        let (mut violations, mut min_slack) = (0u32, 0.0f64);
        if params.diagnostics.optimism {
            min_slack = f64::INFINITY;
            for h in 0..mdp.horizon {
                for s in 0..mdp.num_states {
                    for a in 0..mdp.num_actions {
                        let slack = learner.q_table()[h][s][a] - sol.q_star[h][s][a];
                        min_slack = min_slack.min(slack);
                        if slack < -OPTIMISM_TOL {
                            violations += 1;
                        }
                    }
                }
            }
        }
        let max_surplus = if params.diagnostics.surplus {
            surpluses(mdp, learner.q_table(), learner.v_table())
                .iter()
                .flatten()
                .flatten()
                .fold(f64::NEG_INFINITY, |m, &e| m.max(e))
        } else {
            0.0
        };
        records.push(EpisodeRecord {
            k,
            instant_regret: instant,
            cum_regret: cum,
            opt_violations: violations,
            min_q_slack: min_slack,
            max_surplus,
        });
    }
    Ok(RegretTrace {
        env_id: params.env_id.clone(),
        seed: params.seed,
        episodes: params.episodes,
        delta: params.delta,
        records,
        final_counts: learner.counts().clone(),
    })
}

/// Surplus of an optimistic snapshot against the true model:
/// `E[h][s][a] = Q[h][s][a] − r_h(s,a) − E_P[V[h+1]]`, the over-estimation
/// injected at that site.
pub fn surpluses(mdp: &TabularMdp, q_table: &Table3, v_table: &Table2) -> Table3 {
    assert_eq!(
        q_table.len(),
        mdp.horizon,
        "snapshot dimensions must match the mdp"
    );
    let mut out = vec![vec![vec![0.0; mdp.num_actions]; mdp.num_states]; mdp.horizon];
    for h in 0..mdp.horizon {
        for s in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                let expected_next: f64 = if h + 1 < mdp.horizon {
                    mdp.transitions[h][s][a]
                        .iter()
                        .map(|&(sp, p)| p * v_table[h + 1][sp])
                        .sum()
                } else {
                    0.0
                };
                out[h][s][a] = q_table[h][s][a] - mdp.rewards[h][s][a].mean() - expected_next;
            }
        }
    }
    out
}

/// `clip(value | threshold) = value·1{value ≥ threshold}`; the boundary is
/// kept.
pub fn clip(value: f64, threshold: f64) -> f64 {
    debug_assert!(threshold >= 0.0);
    if value >= threshold {
        value
    } else {
        0.0
    }
}

/// Surpluses together with their clipped values and thresholds.
#[derive(Debug, Clone, Serialize)]
pub struct SurplusReport {
    pub c4: f64,
    /// Conditional-total-variance value the thresholds were built from.
    pub var_max_c: f64,
    pub surplus: Table3,
    pub clipped: Table3,
    pub threshold: Table3,
}

/// Clips each surplus at `c4·Δ_min·(Var*_h(s,a)/(H² ∧ var_max_c) + 1/H)`.
///
/// Requires a nonempty suboptimal set, otherwise `Δ_min` is undefined. A
/// zero-variance site contributes only the `1/H` part of its threshold.
pub fn clipped_surpluses(
    mdp: &TabularMdp,
    surplus: &Table3,
    sol: &OptimalSolution,
    var_max_c: f64,
    c4: f64,
) -> Result<SurplusReport, HarnessError> {
    let delta_min = sol.delta_min.ok_or(HarnessError::NoGaps)?;
    let h_sq = (mdp.horizon * mdp.horizon) as f64;
    let denom = h_sq.min(var_max_c);
    let inv_h = 1.0 / mdp.horizon as f64;
    let mut clipped = vec![vec![vec![0.0; mdp.num_actions]; mdp.num_states]; mdp.horizon];
    let mut threshold = vec![vec![vec![0.0; mdp.num_actions]; mdp.num_states]; mdp.horizon];
    for h in 0..mdp.horizon {
        for s in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                let var = sol.per_step_var[h][s][a];
                let ratio = if var == 0.0 { 0.0 } else { var / denom };
                let t = c4 * delta_min * (ratio + inv_h);
                threshold[h][s][a] = t;
                clipped[h][s][a] = clip(surplus[h][s][a], t);
            }
        }
    }
    Ok(SurplusReport {
        c4,
        var_max_c,
        surplus: surplus.clone(),
        clipped,
        threshold,
    })
}

/// Least-squares fit of a cumulative-regret curve against `log k`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `cum_regret[k] ≈ intercept + slope·log k` over episodes
/// `window = [lo, hi]` (1-based, inclusive). A constant curve fits with slope
/// 0 and `R² = 0` by convention.
pub fn fit_log_regression(
    cum_regret: &[f64],
    window: (usize, usize),
) -> Result<LogFit, HarnessError> {
    let (lo, hi) = window;
    if lo < 1 || hi > cum_regret.len() || hi < lo {
        return Err(HarnessError::DegenerateWindow(format!(
            "window [{lo}, {hi}] outside [1, {}]",
            cum_regret.len()
        )));
    }
    let n = hi - lo + 1;
    if n < 10 {
        return Err(HarnessError::DegenerateWindow(format!(
            "window [{lo}, {hi}] has {n} points, need at least 10"
        )));
    }
    let nf = n as f64;
    let xs: Vec<f64> = (lo..=hi).map(|k| (k as f64).ln()).collect();
    let ys = &cum_regret[lo - 1..hi];
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if syy == 0.0 {
        return Ok(LogFit {
            slope: 0.0,
            intercept: mean_y,
            r_squared: 0.0,
        });
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res = syy - slope * sxy;
    Ok(LogFit {
        slope,
        intercept,
        r_squared: 1.0 - ss_res / syy,
    })
}

/// Pointwise statistics over traces that share `(K, env)`.
#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub env_id: String,
    pub episodes: u64,
    pub seeds: Vec<u64>,
    pub mean_cum_regret: Vec<f64>,
    pub stddev_cum_regret: Vec<f64>,
    pub mean_final_cum_regret: f64,
    /// Fraction of runs with at least one optimism violation.
    pub violation_rate: f64,
}

pub fn aggregate_seeds(traces: &[RegretTrace]) -> Result<SeedSummary, HarnessError> {
    let first = traces
        .first()
        .ok_or_else(|| HarnessError::ShapeMismatch("no traces".into()))?;
    for t in traces {
        if t.episodes != first.episodes || t.env_id != first.env_id {
            return Err(HarnessError::ShapeMismatch(format!(
                "trace (env {}, K {}) does not match (env {}, K {})",
                t.env_id, t.episodes, first.env_id, first.episodes
            )));
        }
    }
    let k = first.records.len();
    let n = traces.len() as f64;
    let mut mean = vec![0.0; k];
    for t in traces {
        for (i, r) in t.records.iter().enumerate() {
            mean[i] += r.cum_regret;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut stddev = vec![0.0; k];
    if traces.len() > 1 {
        for t in traces {
            for (i, r) in t.records.iter().enumerate() {
                let d = r.cum_regret - mean[i];
                stddev[i] += d * d;
            }
        }
        for sd in &mut stddev {
            *sd = (*sd / (n - 1.0)).sqrt();
        }
    }
    let violations = traces.iter().filter(|t| t.any_optimism_violation()).count();
    Ok(SeedSummary {
        env_id: first.env_id.clone(),
        episodes: first.episodes,
        seeds: traces.iter().map(|t| t.seed).collect(),
        mean_final_cum_regret: mean.last().copied().unwrap_or(0.0),
        mean_cum_regret: mean,
        stddev_cum_regret: stddev,
        violation_rate: violations as f64 / n,
    })
}

/// Monte Carlo tail check of the per-trajectory variance sum
/// `Σ_h Var*_h(s_h, a_h)` against the threshold `160·H²·log(4(H+1)/δ)`.
#[derive(Debug, Clone, Serialize)]
pub struct TailCheckReport {
    pub threshold: f64,
    pub exceedance_rate: f64,
    pub max_sum: f64,
    pub mean_sum: f64,
}

pub fn variance_tail_check(
    mdp: &TabularMdp,
    sol: &OptimalSolution,
    policy: &DeterministicPolicy,
    num_samples: u64,
    delta: f64,
    seed: u64,
) -> TailCheckReport {
    let h = mdp.horizon as f64;
    let threshold = 160.0 * h * h * (4.0 * (h + 1.0) / delta).ln();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0u64;
    let mut max_sum = 0.0f64;
    let mut total = 0.0;
    for _ in 0..num_samples {
        let t = sample_trajectory(mdp, policy, &mut rng);
        let sum: f64 = t
            .steps
            .iter()
            .enumerate()
            .map(|(step, st)| sol.per_step_var[step][st.state][st.action])
            .sum();
        if sum > threshold {
            exceed += 1;
        }
        max_sum = max_sum.max(sum);
        total += sum;
    }
    TailCheckReport {
        threshold,
        exceedance_rate: exceed as f64 / num_samples as f64,
        max_sum,
        mean_sum: total / num_samples as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_chain, make_lower_bound_instance, LowerBoundSpec};
    use crate::solver::{optimal_values, variance_profile};
    use rand::SeedableRng;

    fn tiny() -> (TabularMdp, OptimalSolution) {
        let spec = LowerBoundSpec {
            bandit_states: 1,
            num_actions: 2,
            horizon: 2,
            target_variance: 4.0,
            gaps: vec![0.0, 0.4, 0.0, 0.8],
        };
        let (mdp, _) = make_lower_bound_instance(&spec).unwrap();
        let sol = optimal_values(&mdp);
        (mdp, sol)
    }

    fn params(episodes: u64, seed: u64) -> ExperimentParams {
        ExperimentParams {
            episodes,
            delta: 0.1,
            seed,
            constants: BonusConstants::default(),
            diagnostics: DiagnosticsFlags::default(),
            env_id: "test".into(),
        }
    }

    #[test]
    fn chain_run_has_zero_regret() {
        let mdp = make_chain(3);
        let sol = optimal_values(&mdp);
        let trace = run_experiment(&mdp, &sol, &params(50, 3)).unwrap();
        assert_eq!(trace.records.len(), 50);
        for r in &trace.records {
            assert!(r.instant_regret.abs() < 1e-12);
            assert!(r.cum_regret.abs() < 1e-9);
        }
    }

    #[test]
    fn episode_one_regret_matches_the_all_zero_policy() {
        let (mdp, sol) = tiny();
        let trace = run_experiment(&mdp, &sol, &params(1, 0)).unwrap();
        let zero_policy = DeterministicPolicy::constant(2, 3, 0);
        let want = sol.v0_star - policy_evaluation(&mdp, &zero_policy).v0;
        assert!((trace.records[0].instant_regret - want).abs() < 1e-12);
    }

    #[test]
    fn cum_regret_is_the_prefix_sum_and_nonnegative() {
        let (mdp, sol) = tiny();
        let trace = run_experiment(&mdp, &sol, &params(300, 4)).unwrap();
        let mut acc = 0.0;
        for r in &trace.records {
            assert!(r.instant_regret >= -1e-9);
            acc += r.instant_regret;
            assert!((r.cum_regret - acc).abs() < 1e-9);
        }
        // Visitation accounting: the counts at each level sum to K.
        for h in 0..2 {
            let total: u64 = trace.final_counts[h].iter().flatten().sum();
            assert_eq!(total, 300);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let (mdp, sol) = tiny();
        let a = run_experiment(&mdp, &sol, &params(100, 9)).unwrap();
        let b = run_experiment(&mdp, &sol, &params(100, 9)).unwrap();
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.write_csv(&mut buf_a).unwrap();
        b.write_csv(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn surplus_of_crafted_snapshots() {
        let (mdp, _) = tiny();
        // Fully clamped snapshot: surplus at a zero-reward site below the
        // last level is H − 0 − H = 0.
        let q = vec![vec![vec![2.0; 2]; 3]; 2];
        let v = vec![vec![2.0; 3]; 2];
        let e = surpluses(&mdp, &q, &v);
        assert!(e[0][0][0].abs() < 1e-12);
        // At the last level there is no continuation: surplus is H − r.
        assert!((e[1][1][0] - (2.0 - 1.0)).abs() < 1e-12);

        // Fresh all-zero snapshot: surplus is −r everywhere.
        let q0 = vec![vec![vec![0.0; 2]; 3]; 2];
        let v0 = vec![vec![0.0; 3]; 2];
        let e0 = surpluses(&mdp, &q0, &v0);
        assert!((e0[1][1][1] - (-0.8)).abs() < 1e-12);
    }

    #[test]
    fn converged_chain_surplus_approaches_the_bonus() {
        use crate::learner::LearnerState;
        use crate::mdp::sample_trajectory;
        let mdp = make_chain(2);
        let mut learner = LearnerState::new(1, 1, 2, 2000, 0.1, BonusConstants::default()).unwrap();
        let policy = DeterministicPolicy::constant(2, 1, 0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..2000 {
            learner
                .update(&sample_trajectory(&mdp, &policy, &mut rng))
                .unwrap();
        }
        let e = surpluses(&mdp, learner.q_table(), learner.v_table());
        for h in 0..2 {
            let q = learner.q_table()[h][0][0];
            assert!(q < 2.0, "must be unclamped by now");
            let b = learner.bonus(h, 0, 0);
            assert!((e[h][0][0] - b).abs() < 1e-12, "level {h}");
        }
    }

    #[test]
    fn clip_keeps_the_boundary() {
        assert_eq!(clip(5.0, 3.0), 5.0);
        assert_eq!(clip(2.0, 3.0), 0.0);
        assert_eq!(clip(3.0, 3.0), 3.0);
    }

    #[test]
    fn clipped_surplus_thresholds_match_the_closed_form() {
        let (mdp, sol) = tiny();
        let profile = variance_profile(&mdp, &sol, None);
        let q = vec![vec![vec![2.0; 2]; 3]; 2];
        let v = vec![vec![2.0; 3]; 2];
        let e = surpluses(&mdp, &q, &v);
        let report =
            clipped_surpluses(&mdp, &e, &sol, profile.var_max_c_future, DEFAULT_CLIP_C4).unwrap();
        let delta_min = 0.1;
        let denom = 4.0f64.min(1.0);
        for h in 0..2 {
            for s in 0..3 {
                for a in 0..2 {
                    let var = sol.per_step_var[h][s][a];
                    let ratio = if var == 0.0 { 0.0 } else { var / denom };
                    let want = (1.0 / 6.0) * delta_min * (ratio + 0.5);
                    assert!((report.threshold[h][s][a] - want).abs() < 1e-12);
                    let c = report.clipped[h][s][a];
                    assert!(c == 0.0 || c == report.surplus[h][s][a]);
                }
            }
        }
    }

    #[test]
    fn clipping_requires_gaps_and_zero_variance_reduces_the_threshold() {
        let chain = make_chain(3);
        let chain_sol = optimal_values(&chain);
        let e = vec![vec![vec![0.0; 1]; 1]; 3];
        assert!(matches!(
            clipped_surpluses(&chain, &e, &chain_sol, 0.0, DEFAULT_CLIP_C4),
            Err(HarnessError::NoGaps)
        ));

        // Deterministic two-action chain: positive gaps, all variances zero.
        let mut two = make_chain(2);
        two.num_actions = 2;
        for h in 0..2 {
            two.transitions[h][0] = vec![vec![(0, 1.0)], vec![(0, 1.0)]];
            let r = if h == 1 { 1.0 } else { 0.0 };
            two.rewards[h][0] = vec![
                crate::mdp::FiniteRewardDist::point_mass(r),
                crate::mdp::FiniteRewardDist::point_mass(r * 0.5),
            ];
        }
        let sol2 = optimal_values(&two);
        let e2 = vec![vec![vec![0.0; 2]; 1]; 2];
        let report = clipped_surpluses(&two, &e2, &sol2, 0.0, DEFAULT_CLIP_C4).unwrap();
        let want = (1.0 / 6.0) * 0.5 / 2.0;
        for h in 0..2 {
            for a in 0..2 {
                assert!((report.threshold[h][0][a] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_fit_recovers_and_rejects() {
        let exact: Vec<f64> = (1..=1000).map(|k| 3.0 * (k as f64).ln()).collect();
        let fit = fit_log_regression(&exact, (1, 1000)).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);

        let constant = vec![5.0; 100];
        let fit = fit_log_regression(&constant, (1, 100)).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r_squared, 0.0);

        // Negative control: a linear curve still correlates with log k over a
        // short window but does not fit exactly.
        let linear: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        let fit = fit_log_regression(&linear, (500, 1000)).unwrap();
        assert!((fit.slope - 727.0361888479915).abs() < 1e-6);
        assert!((fit.r_squared - 0.9921124711504563).abs() < 1e-9);
        assert!(fit.r_squared < 1.0 - 1e-3);

        assert!(fit_log_regression(&linear, (1, 5)).is_err());
        assert!(fit_log_regression(&linear, (0, 100)).is_err());
        assert!(fit_log_regression(&linear, (999, 1001)).is_err());
    }

    #[test]
    fn aggregation_examples() {
        let (mdp, sol) = tiny();
        let t1 = run_experiment(&mdp, &sol, &params(20, 1)).unwrap();
        let summary = aggregate_seeds(&[t1.clone(), t1.clone()]).unwrap();
        assert!(summary.stddev_cum_regret.iter().all(|&sd| sd == 0.0));

        let mut t2 = t1.clone();
        t2.records.last_mut().unwrap().cum_regret = 20.0;
        let mut t3 = t1.clone();
        t3.records.last_mut().unwrap().cum_regret = 10.0;
        let summary = aggregate_seeds(&[t2, t3]).unwrap();
        assert!((summary.mean_final_cum_regret - 15.0).abs() < 1e-12);

        let mut other = t1.clone();
        other.episodes = 21;
        other.records.push(other.records[19]);
        assert!(matches!(
            aggregate_seeds(&[t1, other]),
            Err(HarnessError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn tail_check_on_chain_and_tiny() {
        let chain = make_chain(3);
        let chain_sol = optimal_values(&chain);
        let policy = DeterministicPolicy::constant(3, 1, 0);
        let report = variance_tail_check(&chain, &chain_sol, &policy, 1000, 0.1, 0);
        assert_eq!(report.exceedance_rate, 0.0);
        assert_eq!(report.max_sum, 0.0);

        let (mdp, sol) = tiny();
        let policy = DeterministicPolicy::constant(2, 3, 0);
        let report = variance_tail_check(&mdp, &sol, &policy, 10_000, 0.1, 1);
        assert!(report.exceedance_rate <= 0.1);
        // Per-trajectory sums are bounded by H times the largest per-step
        // variance.
        let q_star_max = 1.0;
        assert!(report.max_sum <= 2.0 * q_star_max + 1e-12);
        assert!(report.max_sum >= 0.0);
    }

    #[test]
    fn exact_policy_value_matches_monte_carlo() {
        let (mdp, sol) = tiny();
        let policies = [
            vec![vec![0, 0, 0], vec![0, 0, 0]],
            vec![vec![0, 1, 0], vec![0, 0, 0]],
            vec![vec![0, 0, 0], vec![0, 1, 0]],
            vec![vec![1, 1, 1], vec![1, 1, 1]],
            vec![vec![1, 0, 1], vec![0, 1, 1]],
        ];
        let n = 100_000;
        for (i, actions) in policies.into_iter().enumerate() {
            let policy = DeterministicPolicy::new(actions);
            let exact = policy_evaluation(&mdp, &policy).v0;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(70 + i as u64);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n {
                let ret = sample_trajectory(&mdp, &policy, &mut rng).total_reward();
                sum += ret;
                sum_sq += ret * ret;
            }
            let mean = sum / n as f64;
            let var = (sum_sq / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            assert!(
                (exact - mean).abs() <= 4.0 * se + 1e-9,
                "policy {i}: exact {exact}, mc {mean}, se {se}"
            );
        }
        let _ = sol;
    }
}
