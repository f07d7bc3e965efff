//! MDP data model, trajectory sampling, and structural validation.
//!
//! A [`TabularMdp`] is a finite, time-inhomogeneous MDP: per-step transition
//! rows are sparse lists of `(next_state, prob)`, rewards are finite-support
//! distributions, and the initial state is drawn from `init_dist`. All types
//! are immutable after construction and safe to share across threads; sampling
//! requires an exclusively owned random stream.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Tolerance for stochasticity checks (transition rows, reward distributions,
/// the initial distribution).
pub const PROB_TOL: f64 = 1e-12;

/// Tolerance for the bounded-total-reward check. Looser than [`PROB_TOL`] to
/// absorb floating-point error accumulated over up-to-64-step backups.
pub const TOTAL_REWARD_TOL: f64 = 1e-9;

/// A finite-support reward distribution: `(value, probability)` atoms.
///
/// Finite support keeps every moment closed-form, which the exact solvers
/// rely on; there is no sampling error in means or variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FiniteRewardDist {
    pub atoms: Vec<(f64, f64)>,
}

impl FiniteRewardDist {
    pub fn new(atoms: Vec<(f64, f64)>) -> Self {
        Self { atoms }
    }

    /// A distribution that always pays `value`.
    pub fn point_mass(value: f64) -> Self {
        Self {
            atoms: vec![(value, 1.0)],
        }
    }

    /// Pays `value` with probability `p`, otherwise 0.
    pub fn bernoulli(value: f64, p: f64) -> Self {
        Self {
            atoms: vec![(value, p), (0.0, 1.0 - p)],
        }
    }

    /// Exact mean, `Σ p_i v_i`.
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(v, p)| p * v).sum()
    }

    /// Exact second moment, `Σ p_i v_i²`.
    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|&(v, p)| p * v * v).sum()
    }

    /// Exact variance, clamped at zero against floating-point cancellation.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.second_moment() - m * m).max(0.0)
    }

    /// Largest value carried with positive probability.
    pub fn max_value(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|&&(_, p)| p > 0.0)
            .map(|&(v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    }

    /// Draw one reward by inverse CDF over the atoms.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(v, p) in &self.atoms {
            acc += p;
            if u < acc {
                return v;
            }
        }
        // Round-off can leave acc slightly below 1; fall back to the last atom.
        self.atoms.last().map(|&(v, _)| v).unwrap_or(0.0)
    }
}

/// A sparse transition row: `(next_state, prob)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

/// A finite-horizon, time-inhomogeneous MDP.
///
/// Indices are 0-based everywhere: steps `h ∈ 0..H`, states `s ∈ 0..S`,
/// actions `a ∈ 0..A`. The JSON form uses the field names shown in the serde
/// attributes; probabilities round-trip exactly through serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    #[serde(rename = "H")]
    pub horizon: usize,
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    /// `transitions[h][s][a]` is a sparse row of `(next_state, prob)`.
    pub transitions: Vec<Vec<Vec<SparseRow>>>,
    /// `rewards[h][s][a]` is the reward distribution at that site.
    pub rewards: Vec<Vec<Vec<FiniteRewardDist>>>,
    /// `init_dist[s]` is the probability that an episode starts in `s`.
    pub init_dist: Vec<f64>,
}

/// Deterministic, history-independent policy: `actions[h][s]` is the action
/// taken in state `s` at step `h`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicPolicy {
    pub actions: Vec<Vec<usize>>,
}

impl DeterministicPolicy {
    pub fn new(actions: Vec<Vec<usize>>) -> Self {
        Self { actions }
    }

    /// The policy that plays `action` everywhere.
    pub fn constant(horizon: usize, num_states: usize, action: usize) -> Self {
        Self {
            actions: vec![vec![action; num_states]; horizon],
        }
    }

    #[inline]
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h][s]
    }
}

/// One sampled step of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

/// A full sampled episode: exactly `H` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|st| st.reward).sum()
    }
}

/// A structural defect found by [`TabularMdp::validate`]. Violations are data,
/// not failures: validation never errors, it reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "check")]
pub enum Violation {
    /// Ragged or mismatched table shapes; reported first and alone because
    /// the remaining checks assume rectangular tables.
    Dimensions {
        detail: String,
    },
    TransitionRowSum {
        h: usize,
        s: usize,
        a: usize,
        sum: f64,
    },
    NegativeTransitionProb {
        h: usize,
        s: usize,
        a: usize,
        next_state: usize,
        prob: f64,
    },
    BadSuccessorIndex {
        h: usize,
        s: usize,
        a: usize,
        next_state: usize,
    },
    EmptyTransitionRow {
        h: usize,
        s: usize,
        a: usize,
    },
    RewardProbSum {
        h: usize,
        s: usize,
        a: usize,
        sum: f64,
    },
    NegativeRewardProb {
        h: usize,
        s: usize,
        a: usize,
        prob: f64,
    },
    RewardValueOutOfRange {
        h: usize,
        s: usize,
        a: usize,
        value: f64,
    },
    EmptyRewardSupport {
        h: usize,
        s: usize,
        a: usize,
    },
    NegativeInitProb {
        s: usize,
        prob: f64,
    },
    InitDistSum {
        sum: f64,
    },
    TotalRewardExceedsHorizon {
        max_total: f64,
        horizon: usize,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Dimensions { detail } => write!(f, "dimension mismatch: {detail}"),
            Violation::TransitionRowSum { h, s, a, sum } => {
                write!(
                    f,
                    "transition row at (h={h}, s={s}, a={a}) sums to {sum}, expected 1"
                )
            }
            Violation::NegativeTransitionProb {
                h,
                s,
                a,
                next_state,
                prob,
            } => write!(
                f,
                "negative transition probability {prob} at (h={h}, s={s}, a={a}) -> {next_state}"
            ),
            Violation::BadSuccessorIndex {
                h,
                s,
                a,
                next_state,
            } => {
                write!(
                    f,
                    "successor index {next_state} out of range at (h={h}, s={s}, a={a})"
                )
            }
            Violation::EmptyTransitionRow { h, s, a } => {
                write!(f, "empty transition row at (h={h}, s={s}, a={a})")
            }
            Violation::RewardProbSum { h, s, a, sum } => {
                write!(
                    f,
                    "reward probabilities at (h={h}, s={s}, a={a}) sum to {sum}, expected 1"
                )
            }
            Violation::NegativeRewardProb { h, s, a, prob } => {
                write!(
                    f,
                    "negative reward probability {prob} at (h={h}, s={s}, a={a})"
                )
            }
            Violation::RewardValueOutOfRange { h, s, a, value } => {
                write!(
                    f,
                    "reward value {value} outside [0, H] at (h={h}, s={s}, a={a})"
                )
            }
            Violation::EmptyRewardSupport { h, s, a } => {
                write!(
                    f,
                    "reward distribution with no atoms at (h={h}, s={s}, a={a})"
                )
            }
            Violation::NegativeInitProb { s, prob } => {
                write!(f, "negative initial probability {prob} at state {s}")
            }
            Violation::InitDistSum { sum } => {
                write!(f, "initial distribution sums to {sum}, expected 1")
            }
            Violation::TotalRewardExceedsHorizon { max_total, horizon } => write!(
                f,
                "maximum total path reward {max_total} exceeds the horizon bound {horizon}"
            ),
        }
    }
}

impl TabularMdp {
    /// Checks every structural invariant and returns the list of violations;
    /// an empty report means the instance is valid.
    pub fn validate(&self) -> Vec<Violation> {
        if let Err(detail) = self.check_dimensions() {
            return vec![Violation::Dimensions { detail }];
        }
        let mut out = Vec::new();
        let (hh, ss, aa) = (self.horizon, self.num_states, self.num_actions);
        for h in 0..hh {
            for s in 0..ss {
                for a in 0..aa {
                    let row = &self.transitions[h][s][a];
                    if row.is_empty() {
                        out.push(Violation::EmptyTransitionRow { h, s, a });
                        continue;
                    }
                    let mut sum = 0.0;
                    for &(next, p) in row {
                        if next >= ss {
                            out.push(Violation::BadSuccessorIndex {
                                h,
                                s,
                                a,
                                next_state: next,
                            });
                        }
                        if p < 0.0 {
                            out.push(Violation::NegativeTransitionProb {
                                h,
                                s,
                                a,
                                next_state: next,
                                prob: p,
                            });
                        }
                        sum += p;
                    }
                    if (sum - 1.0).abs() > PROB_TOL {
                        out.push(Violation::TransitionRowSum { h, s, a, sum });
                    }

                    let dist = &self.rewards[h][s][a];
                    if dist.atoms.is_empty() {
                        out.push(Violation::EmptyRewardSupport { h, s, a });
                        continue;
                    }
                    let mut rsum = 0.0;
                    for &(v, p) in &dist.atoms {
                        if p < 0.0 {
                            out.push(Violation::NegativeRewardProb { h, s, a, prob: p });
                        }
                        if v < 0.0 || v > hh as f64 + TOTAL_REWARD_TOL {
                            out.push(Violation::RewardValueOutOfRange { h, s, a, value: v });
                        }
                        rsum += p;
                    }
                    if (rsum - 1.0).abs() > PROB_TOL {
                        out.push(Violation::RewardProbSum { h, s, a, sum: rsum });
                    }
                }
            }
        }
        let mut isum = 0.0;
        for (s, &p) in self.init_dist.iter().enumerate() {
            if p < 0.0 {
                out.push(Violation::NegativeInitProb { s, prob: p });
            }
            isum += p;
        }
        if (isum - 1.0).abs() > PROB_TOL {
            out.push(Violation::InitDistSum { sum: isum });
        }
        let max_total = self.max_total_reward();
        if max_total > hh as f64 + TOTAL_REWARD_TOL {
            out.push(Violation::TotalRewardExceedsHorizon {
                max_total,
                horizon: hh,
            });
        }
        out
    }

    fn check_dimensions(&self) -> Result<(), String> {
        if self.horizon == 0 || self.num_states == 0 || self.num_actions == 0 {
            return Err("H, S, A must all be positive".into());
        }
        if self.transitions.len() != self.horizon {
            return Err(format!(
                "transitions has {} levels, expected H={}",
                self.transitions.len(),
                self.horizon
            ));
        }
        if self.rewards.len() != self.horizon {
            return Err(format!(
                "rewards has {} levels, expected H={}",
                self.rewards.len(),
                self.horizon
            ));
        }
        if self.init_dist.len() != self.num_states {
            return Err(format!(
                "init_dist has {} entries, expected S={}",
                self.init_dist.len(),
                self.num_states
            ));
        }
        for h in 0..self.horizon {
            if self.transitions[h].len() != self.num_states
                || self.rewards[h].len() != self.num_states
            {
                return Err(format!("level {h} has wrong state count"));
            }
            for s in 0..self.num_states {
                if self.transitions[h][s].len() != self.num_actions
                    || self.rewards[h][s].len() != self.num_actions
                {
                    return Err(format!("site (h={h}, s={s}) has wrong action count"));
                }
            }
        }
        Ok(())
    }

    /// Maximum total reward over all reachable trajectories, by the backward
    /// recursion `M_h(s) = max_a (max reward atom + max over supported
    /// successors of M_{h+1})`.
    pub fn max_total_reward(&self) -> f64 {
        let mut next = vec![0.0_f64; self.num_states];
        for h in (0..self.horizon).rev() {
            let mut cur = vec![f64::NEG_INFINITY; self.num_states];
            for s in 0..self.num_states {
                for a in 0..self.num_actions {
                    let follow = if h + 1 < self.horizon {
                        self.transitions[h][s][a]
                            .iter()
                            .filter(|&&(_, p)| p > 0.0)
                            .map(|&(sp, _)| next[sp])
                            .fold(f64::NEG_INFINITY, f64::max)
                            .max(0.0)
                    } else {
                        0.0
                    };
                    let m = self.rewards[h][s][a].max_value() + follow;
                    cur[s] = cur[s].max(m);
                }
            }
            next = cur;
        }
        self.init_dist
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p > 0.0)
            .map(|(s, _)| next[s])
            .fold(0.0, f64::max)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("MDP serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Samples one episode. A pure function of `(mdp, policy, rng state)`: the
/// draw order per step is fixed (reward, then next state), so identical seeds
/// yield identical trajectories.
pub fn sample_trajectory<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
    rng: &mut R,
) -> Trajectory {
    let mut steps = Vec::with_capacity(mdp.horizon);
    let mut state = sample_index(&mdp.init_dist, rng);
    for h in 0..mdp.horizon {
        let action = policy.action(h, state);
        let reward = mdp.rewards[h][state][action].sample(rng);
        steps.push(TrajectoryStep {
            state,
            action,
            reward,
        });
        if h + 1 < mdp.horizon {
            state = sample_sparse(&mdp.transitions[h][state][action], rng);
        }
    }
    Trajectory { steps }
}

fn sample_index<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn sample_sparse<R: Rng + ?Sized>(row: &[(usize, f64)], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for &(i, p) in row {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
