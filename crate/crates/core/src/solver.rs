//! Exact dynamic-programming solvers and brute-force enumeration oracles.
//!
//! Everything here is closed-form: optimal values by backward induction, gap
//! quantities, per-step variances `Var*_h(s,a) = V[r + V*_{h+1}(s')]`, and the
//! two total-variance quantities (the best-policy expected sum, and the same
//! sum conditioned on visiting a given state at a given step). Enumeration
//! oracles over all deterministic Markov policies cross-validate the DPs on
//! small instances.

use serde::Serialize;
use thiserror::Error;

use crate::mdp::{DeterministicPolicy, TabularMdp};
use crate::{Table2, Table3};

/// Gaps at or below this threshold count as zero when splitting optimal from
/// suboptimal triples. The analysis assumes exact zeros; floating point does
/// not provide them.
pub const GAP_TOL: f64 = 1e-9;

/// States occupied with probability at or below this threshold count as
/// unreachable when conditioning.
pub const REACH_TOL: f64 = 1e-15;

/// Default ceiling on `A^(H·S)` for the enumeration oracles.
pub const DEFAULT_ENUM_CAP: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(
        "policy enumeration too large: {policies:.3e} deterministic policies exceed cap {cap}"
    )]
    TooLarge { policies: f64, cap: u64 },
    #[error("state {state} is unreachable at step {step} under the given policy")]
    Unreachable { step: usize, state: usize },
}

/// Output of [`optimal_values`]: optimal tables, gap quantities, and per-step
/// variances. Serializes with these exact field names.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalSolution {
    /// `q_star[h][s][a]`.
    pub q_star: Table3,
    /// `v_star[h][s]`.
    pub v_star: Table2,
    /// `E_{s~init}[v_star[0][s]]`.
    pub v0_star: f64,
    /// `gaps[h][s][a] = v_star[h][s] - q_star[h][s][a]`.
    pub gaps: Table3,
    /// Smallest gap above [`GAP_TOL`], absent when every action is optimal.
    pub delta_min: Option<f64>,
    /// Triples with gap ≤ [`GAP_TOL`], in `(h, s, a)` lexicographic order.
    pub z_opt: Vec<(usize, usize, usize)>,
    /// Triples with gap > [`GAP_TOL`].
    pub z_sub: Vec<(usize, usize, usize)>,
    /// `per_step_var[h][s][a] = Var[r + V*_{h+1}(s')]` under the true model.
    pub per_step_var: Table3,
}

/// Total-variance quantities for a solved instance. `w_table` is the
/// future-conditional DP value `W_h(s) = max_a (Var*_h(s,a) + Σ P W_{h+1})`;
/// `var_max_c_future` is its maximum over reachable `(h, s)`.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceProfile {
    pub var_max: f64,
    pub w_table: Table2,
    pub var_max_c_future: f64,
    /// Enumeration oracle over deterministic Markov policies; `None` when the
    /// policy count exceeds the requested cap (or no cap was given).
    pub var_max_c_exact: Option<f64>,
    /// Maximum per-step variance over all `(h, s, a)`.
    pub q_star_max: f64,
}

fn expected_sparse(row: &[(usize, f64)], values: &[f64]) -> f64 {
    row.iter().map(|&(sp, p)| p * values[sp]).sum()
}

fn variance_sparse(row: &[(usize, f64)], values: &[f64]) -> f64 {
    let mean: f64 = expected_sparse(row, values);
    let m2: f64 = row.iter().map(|&(sp, p)| p * values[sp] * values[sp]).sum();
    (m2 - mean * mean).max(0.0)
}

/// Backward induction with `V_{H+1} ≡ 0`: optimal tables, gaps, the optimal /
/// suboptimal split at tolerance [`GAP_TOL`], and per-step variances.
pub fn optimal_values(mdp: &TabularMdp) -> OptimalSolution {
    let (hh, ss, aa) = (mdp.horizon, mdp.num_states, mdp.num_actions);
    let mut q_star = vec![vec![vec![0.0; aa]; ss]; hh];
    let mut v_star = vec![vec![0.0; ss]; hh];
    let mut per_step_var = vec![vec![vec![0.0; aa]; ss]; hh];
    let mut next = vec![0.0; ss];
    for h in (0..hh).rev() {
        for s in 0..ss {
            let mut best = f64::NEG_INFINITY;
            for a in 0..aa {
                let dist = &mdp.rewards[h][s][a];
                let row = &mdp.transitions[h][s][a];
                let q = dist.mean() + expected_sparse(row, &next);
                q_star[h][s][a] = q;
                // r and s' are drawn independently, so the variances add.
                per_step_var[h][s][a] = dist.variance() + variance_sparse(row, &next);
                if q > best {
                    best = q;
                }
            }
            v_star[h][s] = best;
        }
        next.copy_from_slice(&v_star[h]);
    }
    let v0_star = mdp
        .init_dist
        .iter()
        .enumerate()
        .map(|(s, &p)| p * v_star[0][s])
        .sum();

    let mut gaps = vec![vec![vec![0.0; aa]; ss]; hh];
    let mut z_opt = Vec::new();
    let mut z_sub = Vec::new();
    let mut delta_min = f64::INFINITY;
    for h in 0..hh {
        for s in 0..ss {
            for a in 0..aa {
                let g = v_star[h][s] - q_star[h][s][a];
                gaps[h][s][a] = g;
                if g > GAP_TOL {
                    z_sub.push((h, s, a));
                    if g < delta_min {
                        delta_min = g;
                    }
                } else {
                    z_opt.push((h, s, a));
                }
            }
        }
    }
    OptimalSolution {
        q_star,
        v_star,
        v0_star,
        gaps,
        delta_min: if delta_min.is_finite() {
            Some(delta_min)
        } else {
            None
        },
        z_opt,
        z_sub,
        per_step_var,
    }
}

/// Exact policy values by backward recursion.
#[derive(Debug, Clone)]
pub struct PolicyValue {
    /// `v[h][s] = E[Σ_{t≥h} r_t | s_h = s]` under the policy.
    pub v: Table2,
    /// `E_{s~init}[v[0][s]]`.
    pub v0: f64,
}

pub fn policy_evaluation(mdp: &TabularMdp, policy: &DeterministicPolicy) -> PolicyValue {
    let (hh, ss) = (mdp.horizon, mdp.num_states);
    let mut v = vec![vec![0.0; ss]; hh];
    let mut next = vec![0.0; ss];
    for h in (0..hh).rev() {
        for s in 0..ss {
            let a = policy.action(h, s);
            v[h][s] =
                mdp.rewards[h][s][a].mean() + expected_sparse(&mdp.transitions[h][s][a], &next);
        }
        next.copy_from_slice(&v[h]);
    }
    let v0 = mdp
        .init_dist
        .iter()
        .enumerate()
        .map(|(s, &p)| p * v[0][s])
        .sum();
    PolicyValue { v, v0 }
}

/// Forward occupancy marginals under a policy: `marginals[t][s] = P[s_t = s]`
/// for `t ∈ 0..=H`. The final row is the post-episode state distribution.
pub fn state_marginals(mdp: &TabularMdp, policy: &DeterministicPolicy) -> Table2 {
    let (hh, ss) = (mdp.horizon, mdp.num_states);
    let mut out = vec![vec![0.0; ss]; hh + 1];
    out[0].copy_from_slice(&mdp.init_dist);
    for h in 0..hh {
        for s in 0..ss {
            let mass = out[h][s];
            if mass == 0.0 {
                continue;
            }
            for &(sp, p) in &mdp.transitions[h][s][policy.action(h, s)] {
                out[h + 1][sp] += mass * p;
            }
        }
    }
    out
}

/// Which `(h, s)` pairs can be occupied with positive probability under *some*
/// policy (forward support propagation, union over actions).
pub fn reachable_states(mdp: &TabularMdp) -> Vec<Vec<bool>> {
    let (hh, ss, aa) = (mdp.horizon, mdp.num_states, mdp.num_actions);
    let mut reach = vec![vec![false; ss]; hh];
    for (s, &p) in mdp.init_dist.iter().enumerate() {
        if p > 0.0 {
            reach[0][s] = true;
        }
    }
    for h in 0..hh.saturating_sub(1) {
        for s in 0..ss {
            if !reach[h][s] {
                continue;
            }
            for a in 0..aa {
                for &(sp, p) in &mdp.transitions[h][s][a] {
                    if p > 0.0 {
                        reach[h + 1][sp] = true;
                    }
                }
            }
        }
    }
    reach
}

/// Best-policy expected total variance, treating `Var*_h(s,a)` as a reward:
/// `U_h(s) = max_a (Var*_h(s,a) + Σ P U_{h+1})`, returned at the initial
/// distribution.
pub fn var_max_unconditional(mdp: &TabularMdp, sol: &OptimalSolution) -> f64 {
    let (hh, ss, aa) = (mdp.horizon, mdp.num_states, mdp.num_actions);
    let mut next = vec![0.0; ss];
    for h in (0..hh).rev() {
        let mut cur = vec![0.0; ss];
        for s in 0..ss {
            let mut best = f64::NEG_INFINITY;
            for a in 0..aa {
                let u =
                    sol.per_step_var[h][s][a] + expected_sparse(&mdp.transitions[h][s][a], &next);
                best = best.max(u);
            }
            cur[s] = best;
        }
        next = cur;
    }
    mdp.init_dist
        .iter()
        .enumerate()
        .map(|(s, &p)| p * next[s])
        .sum()
}

/// Future-conditional variance DP.
#[derive(Debug, Clone)]
pub struct FutureVariance {
    /// `w_table[h][s] = max_a (Var*_h(s,a) + Σ P W_{h+1})`.
    pub w_table: Table2,
    /// Reachability mask aligned with `w_table`.
    pub reachable: Vec<Vec<bool>>,
    /// Maximum of `w_table` over reachable `(h, s)`.
    pub max_reachable: f64,
}

/// Computes the maximum expected *future* variance sum conditioned on
/// occupying each `(h, s)`, maximized over behaviors from there on.
pub fn future_conditional_variance(mdp: &TabularMdp, sol: &OptimalSolution) -> FutureVariance {
    let (hh, ss, aa) = (mdp.horizon, mdp.num_states, mdp.num_actions);
    let mut w_table = vec![vec![0.0; ss]; hh];
    let mut next = vec![0.0; ss];
    for h in (0..hh).rev() {
        for s in 0..ss {
            let mut best = f64::NEG_INFINITY;
            for a in 0..aa {
                let w =
                    sol.per_step_var[h][s][a] + expected_sparse(&mdp.transitions[h][s][a], &next);
                best = best.max(w);
            }
            w_table[h][s] = best;
        }
        next.copy_from_slice(&w_table[h]);
    }
    let reachable = reachable_states(mdp);
    let mut max_reachable = 0.0_f64;
    for h in 0..hh {
        for s in 0..ss {
            if reachable[h][s] {
                max_reachable = max_reachable.max(w_table[h][s]);
            }
        }
    }
    FutureVariance {
        w_table,
        reachable,
        max_reachable,
    }
}

/// Policy-specific backward variance sums: `F[h][s] = Var*_h(s, π_h(s)) +
/// Σ P F[h+1]`, the expected future variance collected from `(h, s)` onward.
pub fn policy_future_variance(
    mdp: &TabularMdp,
    sol: &OptimalSolution,
    policy: &DeterministicPolicy,
) -> Table2 {
    let (hh, ss) = (mdp.horizon, mdp.num_states);
    let mut f = vec![vec![0.0; ss]; hh];
    let mut next = vec![0.0; ss];
    for h in (0..hh).rev() {
        for s in 0..ss {
            let a = policy.action(h, s);
            f[h][s] = sol.per_step_var[h][s][a] + expected_sparse(&mdp.transitions[h][s][a], &next);
        }
        next.copy_from_slice(&f[h]);
    }
    f
}

/// Expected total variance collected by a policy, `E^π[Σ_h Var*_h(s_h, a_h)]`.
pub fn policy_variance_value(
    mdp: &TabularMdp,
    sol: &OptimalSolution,
    policy: &DeterministicPolicy,
) -> f64 {
    let f = policy_future_variance(mdp, sol, policy);
    mdp.init_dist
        .iter()
        .enumerate()
        .map(|(s, &p)| p * f[0][s])
        .sum()
}

/// Expected total variance over the whole episode conditioned on occupying
/// `(step, state)` under `policy`, computed exactly as past + future.
///
/// The past term is `β_h(s) / α_h(s)` where `α` is the forward occupancy and
/// `β` accumulates occupancy-weighted variance:
/// `β_{t+1}(x') = Σ_x (β_t(x) + α_t(x)·Var*_t(x, π_t(x)))·P(x'|x, π_t(x))`.
pub fn conditional_total_variance(
    mdp: &TabularMdp,
    sol: &OptimalSolution,
    policy: &DeterministicPolicy,
    step: usize,
    state: usize,
) -> Result<f64, SolverError> {
    let ss = mdp.num_states;
    let mut alpha = mdp.init_dist.clone();
    let mut beta = vec![0.0; ss];
    for t in 0..step {
        let mut alpha_next = vec![0.0; ss];
        let mut beta_next = vec![0.0; ss];
        for x in 0..ss {
            if alpha[x] == 0.0 && beta[x] == 0.0 {
                continue;
            }
            let a = policy.action(t, x);
            let carried = beta[x] + alpha[x] * sol.per_step_var[t][x][a];
            for &(xp, p) in &mdp.transitions[t][x][a] {
                alpha_next[xp] += alpha[x] * p;
                beta_next[xp] += carried * p;
            }
        }
        alpha = alpha_next;
        beta = beta_next;
    }
    if alpha[state] <= REACH_TOL {
        return Err(SolverError::Unreachable { step, state });
    }
    let past = beta[state] / alpha[state];
    let future = policy_future_variance(mdp, sol, policy)[step][state];
    Ok(past + future)
}

/// Number of deterministic Markov policies, `A^(H·S)`, as a float so that
/// astronomically large counts stay comparable.
pub fn policy_count(mdp: &TabularMdp) -> f64 {
    (mdp.num_actions as f64).powi((mdp.horizon * mdp.num_states) as i32)
}

/// Iterates every deterministic Markov policy in mixed-radix order.
struct PolicyEnumerator {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    digits: Vec<usize>,
    done: bool,
}

impl PolicyEnumerator {
    fn new(mdp: &TabularMdp, cap: u64) -> Result<Self, SolverError> {
        let count = policy_count(mdp);
        if count > cap as f64 {
            return Err(SolverError::TooLarge {
                policies: count,
                cap,
            });
        }
        Ok(Self {
            horizon: mdp.horizon,
            num_states: mdp.num_states,
            num_actions: mdp.num_actions,
            digits: vec![0; mdp.horizon * mdp.num_states],
            done: false,
        })
    }

    fn current(&self) -> DeterministicPolicy {
        let actions = (0..self.horizon)
            .map(|h| self.digits[h * self.num_states..(h + 1) * self.num_states].to_vec())
            .collect();
        DeterministicPolicy::new(actions)
    }

    fn advance(&mut self) {
        for d in self.digits.iter_mut() {
            *d += 1;
            if *d < self.num_actions {
                return;
            }
            *d = 0;
        }
        self.done = true;
    }
}

impl Iterator for PolicyEnumerator {
    type Item = DeterministicPolicy;

    fn next(&mut self) -> Option<DeterministicPolicy> {
        if self.done {
            return None;
        }
        let policy = self.current();
        self.advance();
        Some(policy)
    }
}

/// Enumeration oracle for [`optimal_values`]: the best initial value over all
/// deterministic Markov policies.
pub fn brute_force_optimal(mdp: &TabularMdp, cap: u64) -> Result<f64, SolverError> {
    let policies = PolicyEnumerator::new(mdp, cap)?;
    Ok(policies
        .map(|p| policy_evaluation(mdp, &p).v0)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Enumeration oracle for [`var_max_unconditional`].
pub fn brute_force_var_max(
    mdp: &TabularMdp,
    sol: &OptimalSolution,
    cap: u64,
) -> Result<f64, SolverError> {
    let policies = PolicyEnumerator::new(mdp, cap)?;
    Ok(policies
        .map(|p| policy_variance_value(mdp, sol, &p))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Enumeration oracle for the conditional total variance: maximizes
/// [`conditional_total_variance`] over deterministic Markov policies and
/// reachable `(h, s)` pairs.
///
/// Whether a deterministic Markov policy attains the supremum over all
/// policies is open; this oracle certifies a lower bound in general and the
/// exact value on the generated hard family.
pub fn brute_force_var_max_conditional(
    mdp: &TabularMdp,
    sol: &OptimalSolution,
    cap: u64,
) -> Result<f64, SolverError> {
    let policies = PolicyEnumerator::new(mdp, cap)?;
    let reach = reachable_states(mdp);
    let mut best = 0.0_f64;
    for policy in policies {
        let future = policy_future_variance(mdp, sol, &policy);
        let ss = mdp.num_states;
        let mut alpha = mdp.init_dist.clone();
        let mut beta = vec![0.0; ss];
        for h in 0..mdp.horizon {
            for s in 0..ss {
                if reach[h][s] && alpha[s] > REACH_TOL {
                    best = best.max(beta[s] / alpha[s] + future[h][s]);
                }
            }
            if h + 1 == mdp.horizon {
                break;
            }
            let mut alpha_next = vec![0.0; ss];
            let mut beta_next = vec![0.0; ss];
            for x in 0..ss {
                if alpha[x] == 0.0 && beta[x] == 0.0 {
                    continue;
                }
                let a = policy.action(h, x);
                let carried = beta[x] + alpha[x] * sol.per_step_var[h][x][a];
                for &(xp, p) in &mdp.transitions[h][x][a] {
                    alpha_next[xp] += alpha[x] * p;
                    beta_next[xp] += carried * p;
                }
            }
            alpha = alpha_next;
            beta = beta_next;
        }
    }
    Ok(best)
}

/// Assembles the full variance profile. The enumeration oracle runs only when
/// `exact_cap` is given and the policy count fits under it.
pub fn variance_profile(
    mdp: &TabularMdp,
    sol: &OptimalSolution,
    exact_cap: Option<u64>,
) -> VarianceProfile {
    let var_max = var_max_unconditional(mdp, sol);
    let future = future_conditional_variance(mdp, sol);
    let var_max_c_exact =
        exact_cap.and_then(|cap| brute_force_var_max_conditional(mdp, sol, cap).ok());
    let q_star_max = sol
        .per_step_var
        .iter()
        .flatten()
        .flatten()
        .fold(0.0_f64, |m, &v| m.max(v));
    VarianceProfile {
        var_max,
        w_table: future.w_table,
        var_max_c_future: future.max_reachable,
        var_max_c_exact,
        q_star_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_chain, make_lower_bound_instance, make_random_mdp, LowerBoundSpec};
    use proptest::prelude::*;

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

    #[test]
    fn chain_solution_is_trivial() {
        let mdp = make_chain(4);
        let sol = optimal_values(&mdp);
        for h in 0..4 {
            assert!((sol.v_star[h][0] - 1.0).abs() < 1e-15);
            assert_eq!(sol.gaps[h][0][0], 0.0);
            assert_eq!(sol.per_step_var[h][0][0], 0.0);
        }
        assert!(sol.z_sub.is_empty());
        assert_eq!(sol.delta_min, None);
        assert!((sol.v0_star - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tiny_instance_solution_matches_hand_dp() {
        let (_, sol) = tiny();
        // States: 0 = main, 1 = bandit, 2 = terminal.
        assert!((sol.v0_star - 0.125).abs() < 1e-12);
        assert!((sol.gaps[1][1][1] - 0.2).abs() < 1e-12);
        assert!((sol.gaps[0][1][1] - 0.1).abs() < 1e-12);
        assert!((sol.delta_min.unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(sol.z_sub, vec![(0, 1, 1), (1, 1, 1)]);
        assert!((sol.per_step_var[0][0][0] - 7.0 / 64.0).abs() < 1e-12);
        assert!((sol.per_step_var[1][1][0] - 1.0).abs() < 1e-12);
        assert!((sol.per_step_var[1][1][1] - 0.96).abs() < 1e-12);
    }

    #[test]
    fn policy_evaluation_examples() {
        let chain = make_chain(3);
        let only = DeterministicPolicy::constant(3, 1, 0);
        assert!((policy_evaluation(&chain, &only).v0 - 1.0).abs() < 1e-15);

        let (mdp, _) = tiny();
        // Take the large-gap arm at the step-1 bandit decision.
        let bad = DeterministicPolicy::new(vec![vec![0, 0, 0], vec![0, 1, 0]]);
        assert!((policy_evaluation(&mdp, &bad).v0 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn optimal_value_dominates_every_policy() {
        for seed in 0..20u64 {
            let mdp = make_random_mdp(3, 2, 3, 0.8, seed);
            let sol = optimal_values(&mdp);
            for policy in PolicyEnumerator::new(&mdp, DEFAULT_ENUM_CAP).unwrap() {
                assert!(policy_evaluation(&mdp, &policy).v0 <= sol.v0_star + 1e-10);
            }
        }
    }

    #[test]
    fn tiny_variance_quantities() {
        let (mdp, sol) = tiny();
        assert!((var_max_unconditional(&mdp, &sol) - 15.0 / 64.0).abs() < 1e-12);

        let future = future_conditional_variance(&mdp, &sol);
        assert!((future.w_table[1][1] - 1.0).abs() < 1e-12);
        assert!((future.w_table[0][0] - 15.0 / 64.0).abs() < 1e-12);
        assert!((future.max_reachable - 1.0).abs() < 1e-12);
        // The bandit state cannot be occupied at step 0.
        assert!(!future.reachable[0][1]);
    }

    #[test]
    fn tiny_conditional_variance_and_oracles() {
        let (mdp, sol) = tiny();
        let opt = DeterministicPolicy::constant(2, 3, 0);
        let value = conditional_total_variance(&mdp, &sol, &opt, 1, 1).unwrap();
        assert!((value - 71.0 / 64.0).abs() < 1e-12);

        assert_eq!(
            conditional_total_variance(&mdp, &sol, &opt, 0, 1),
            Err(SolverError::Unreachable { step: 0, state: 1 })
        );

        let brute = brute_force_var_max_conditional(&mdp, &sol, DEFAULT_ENUM_CAP).unwrap();
        assert!((brute - 71.0 / 64.0).abs() < 1e-10);
        assert!((brute_force_optimal(&mdp, DEFAULT_ENUM_CAP).unwrap() - 0.125).abs() < 1e-10);
    }

    #[test]
    fn chain_conditional_variance_is_zero() {
        let mdp = make_chain(3);
        let sol = optimal_values(&mdp);
        let policy = DeterministicPolicy::constant(3, 1, 0);
        assert_eq!(
            conditional_total_variance(&mdp, &sol, &policy, 0, 0).unwrap(),
            0.0
        );
        assert_eq!(
            brute_force_var_max_conditional(&mdp, &sol, 100).unwrap(),
            0.0
        );
        assert_eq!(var_max_unconditional(&mdp, &sol), 0.0);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let mdp = make_random_mdp(3, 2, 3, 0.8, 0);
        // 2^9 = 512 policies.
        assert!(matches!(
            brute_force_optimal(&mdp, 511),
            Err(SolverError::TooLarge { .. })
        ));
        assert!(brute_force_optimal(&mdp, 512).is_ok());
    }

    #[test]
    fn dp_matches_enumeration_on_small_instances() {
        for seed in 0..10u64 {
            let mdp = make_random_mdp(2, 2, 2, 1.0, seed);
            let sol = optimal_values(&mdp);
            let brute = brute_force_optimal(&mdp, DEFAULT_ENUM_CAP).unwrap();
            assert!((sol.v0_star - brute).abs() < 1e-10, "seed {seed}");
            let brute_var = brute_force_var_max(&mdp, &sol, DEFAULT_ENUM_CAP).unwrap();
            assert!((var_max_unconditional(&mdp, &sol) - brute_var).abs() < 1e-10);
        }
    }

    #[test]
    fn conditional_oracle_dominates_future_dp_and_var_max() {
        for seed in 0..10u64 {
            // Point-mass initial distribution, so conditioning on the start
            // state dominates the unconditional quantity.
            let mut mdp = make_random_mdp(3, 2, 2, 0.8, seed);
            mdp.init_dist = vec![1.0, 0.0, 0.0];
            let sol = optimal_values(&mdp);
            let brute = brute_force_var_max_conditional(&mdp, &sol, DEFAULT_ENUM_CAP).unwrap();
            let future = future_conditional_variance(&mdp, &sol);
            assert!(brute >= future.max_reachable - 1e-9);
            assert!(brute >= var_max_unconditional(&mdp, &sol) - 1e-9);
        }
    }

    #[test]
    fn variance_profile_assembles_all_quantities() {
        let (mdp, sol) = tiny();
        let profile = variance_profile(&mdp, &sol, Some(DEFAULT_ENUM_CAP));
        assert!((profile.var_max - 15.0 / 64.0).abs() < 1e-12);
        assert!((profile.var_max_c_future - 1.0).abs() < 1e-12);
        assert!((profile.var_max_c_exact.unwrap() - 71.0 / 64.0).abs() < 1e-10);
        assert!((profile.q_star_max - 1.0).abs() < 1e-12);
        assert!(variance_profile(&mdp, &sol, None).var_max_c_exact.is_none());
    }

    fn scale_rewards(mdp: &TabularMdp, c: f64) -> TabularMdp {
        let mut out = mdp.clone();
        for level in &mut out.rewards {
            for row in level {
                for dist in row {
                    for atom in &mut dist.atoms {
                        atom.0 *= c;
                    }
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn prop_reward_scaling(seed in 0u64..50, c in 0.05f64..=1.0) {
            let mdp = make_random_mdp(3, 2, 3, 0.8, seed);
            let sol = optimal_values(&mdp);
            let scaled_sol = optimal_values(&scale_rewards(&mdp, c));
            prop_assert!((scaled_sol.v0_star - c * sol.v0_star).abs() < 1e-10);
            for h in 0..3 {
                for s in 0..3 {
                    for a in 0..2 {
                        let want = c * c * sol.per_step_var[h][s][a];
                        prop_assert!((scaled_sol.per_step_var[h][s][a] - want).abs() < 1e-10);
                    }
                }
            }
        }

        #[test]
        fn prop_w_table_bounded_by_h_squared(seed in 0u64..100, h in 1usize..5) {
            let mdp = make_random_mdp(3, 2, h, 0.8, seed);
            let sol = optimal_values(&mdp);
            let future = future_conditional_variance(&mdp, &sol);
            let bound = (h * h) as f64 + 1e-9;
            for row in &future.w_table {
                for &w in row {
                    prop_assert!(w <= bound);
                }
            }
        }

        #[test]
        fn prop_variance_quantities_are_bounded(seed in 100u64..160, h in 1usize..5) {
            let mdp = make_random_mdp(3, 2, h, 0.8, seed);
            let sol = optimal_values(&mdp);
            let h_sq = (h * h) as f64;
            for level in &sol.per_step_var {
                for row in level {
                    for &v in row {
                        prop_assert!((0.0..=h_sq + 1e-9).contains(&v));
                    }
                }
            }
            let profile = variance_profile(&mdp, &sol, None);
            // Both total-variance quantities sit below H times the largest
            // per-step variance.
            let cap = h as f64 * profile.q_star_max + 1e-9;
            prop_assert!(profile.var_max <= cap);
            prop_assert!(profile.var_max_c_future <= cap);
            prop_assert!(profile.q_star_max <= h_sq + 1e-9);
        }
    }
}
