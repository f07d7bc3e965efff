//! Instance generators: a hard lower-bound family, random sparse MDPs, and a
//! degenerate chain fixture.
//!
//! The lower-bound family embeds one Bernoulli bandit per `(step, state)`
//! pair behind a slow drift state, so that total variance conditioned on
//! reaching a bandit state scales with the target `L` while the unconditional
//! total variance stays bounded by a constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{FiniteRewardDist, TabularMdp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("gap list has {got} entries, expected S·A·H = {expected}")]
    WrongGapCount { got: usize, expected: usize },
    #[error("gap {gap} at index {index} is negative")]
    NegativeGap { index: usize, gap: f64 },
    #[error("gap {gap} at index {index} violates the assumption gap < sqrt(L) = {sqrt_l}")]
    GapTooLarge { index: usize, gap: f64, sqrt_l: f64 },
    #[error("only {zeros} zero gaps given; realizability requires at least S·H = {needed}")]
    NotEnoughZeroGaps { zeros: usize, needed: usize },
    #[error("target variance L = {l} outside the admissible range [1, H^2] = [1, {h_sq}]")]
    TargetVarianceOutOfRange { l: f64, h_sq: f64 },
    #[error("S, A, H must all be positive")]
    EmptyDimensions,
}

/// Parameters of the hard family: `S` bandit states, `A` actions, horizon
/// `H`, a target conditional variance `L ∈ [1, H²]`, and `S·A·H` nonnegative
/// gaps of which at least `S·H` are zero (one optimal arm per group).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundSpec {
    #[serde(rename = "S")]
    pub bandit_states: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    #[serde(rename = "L")]
    pub target_variance: f64,
    pub gaps: Vec<f64>,
}

impl LowerBoundSpec {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.bandit_states == 0 || self.num_actions == 0 || self.horizon == 0 {
            return Err(EnvError::EmptyDimensions);
        }
        let h_sq = (self.horizon * self.horizon) as f64;
        if !(1.0..=h_sq).contains(&self.target_variance) {
            return Err(EnvError::TargetVarianceOutOfRange {
                l: self.target_variance,
                h_sq,
            });
        }
        let expected = self.bandit_states * self.num_actions * self.horizon;
        if self.gaps.len() != expected {
            return Err(EnvError::WrongGapCount {
                got: self.gaps.len(),
                expected,
            });
        }
        let sqrt_l = self.target_variance.sqrt();
        let mut zeros = 0usize;
        for (index, &gap) in self.gaps.iter().enumerate() {
            if gap < 0.0 || !gap.is_finite() {
                return Err(EnvError::NegativeGap { index, gap });
            }
            if gap >= sqrt_l {
                return Err(EnvError::GapTooLarge { index, gap, sqrt_l });
            }
            if gap == 0.0 {
                zeros += 1;
            }
        }
        let needed = self.bandit_states * self.horizon;
        if zeros < needed {
            return Err(EnvError::NotEnoughZeroGaps { zeros, needed });
        }
        Ok(())
    }
}

/// Construction data accompanying a generated lower-bound instance.
///
/// Indexing convention: the episode starts in the main state, so a bandit
/// state is first occupied at step `h+1` (0-based) after `h` self-loop
/// opportunities. `d_table[h][i]` is the probability of occupying bandit `i`
/// at 0-based step `h+1`, i.e. `(1/(L·S·H))·(1 − 1/(L·H))^h`. The reward
/// group `(h, i)` governs the distribution drawn when bandit `i` is occupied
/// at 0-based step `h`; group `(0, i)` is unreachable and exists only as
/// model data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundMeta {
    /// `sigma[h][i][a]` maps each bandit arm to its gap index in the spec.
    pub sigma: Vec<Vec<Vec<usize>>>,
    /// `p_table[h][i][a] = 1/2 − gap/(4√L)`, the good-outcome probability.
    pub p_table: Vec<Vec<Vec<f64>>>,
    /// `d_table[h][i]`: occupancy probability of bandit `i` at step `h+1`.
    pub d_table: Vec<Vec<f64>>,
}

/// State layout of a generated lower-bound instance: the main state is 0,
/// bandit `i` is state `i + 1`, and the terminal state is last.
pub fn lower_bound_state_layout(spec: &LowerBoundSpec) -> (usize, Vec<usize>, usize) {
    let bandits = (1..=spec.bandit_states).collect();
    (0, bandits, spec.bandit_states + 1)
}

/// Builds the hard instance for `spec`.
///
/// The main state drifts: it keeps itself with probability `1 − 1/(L·H)` and
/// moves to each bandit state with probability `1/(L·S·H)`, independent of
/// the action. Each bandit state pays `√L` with its arm probability and drops
/// into the absorbing terminal state. Main and terminal states pay zero.
pub fn make_lower_bound_instance(
    spec: &LowerBoundSpec,
) -> Result<(TabularMdp, LowerBoundMeta), EnvError> {
    spec.validate()?;
    let (s_bandit, aa, hh) = (spec.bandit_states, spec.num_actions, spec.horizon);
    let l = spec.target_variance;
    let sqrt_l = l.sqrt();
    let num_states = s_bandit + 2;
    let terminal = s_bandit + 1;
    let stay = 1.0 - 1.0 / (l * hh as f64);
    let leave = 1.0 / (l * s_bandit as f64 * hh as f64);

    let sigma = assign_gap_groups(spec);
    let mut p_table = vec![vec![vec![0.0; aa]; s_bandit]; hh];
    for h in 0..hh {
        for i in 0..s_bandit {
            for a in 0..aa {
                p_table[h][i][a] = 0.5 - spec.gaps[sigma[h][i][a]] / (4.0 * sqrt_l);
            }
        }
    }
    let mut d_table = vec![vec![0.0; s_bandit]; hh];
    for h in 0..hh {
        let d = leave * stay.powi(h as i32);
        for i in 0..s_bandit {
            d_table[h][i] = d;
        }
    }

    let mut main_row = Vec::with_capacity(s_bandit + 1);
    main_row.push((0, stay));
    for i in 0..s_bandit {
        main_row.push((i + 1, leave));
    }
    let absorb = vec![(terminal, 1.0)];

    let mut transitions = Vec::with_capacity(hh);
    let mut rewards = Vec::with_capacity(hh);
    for h in 0..hh {
        let mut t_level = Vec::with_capacity(num_states);
        let mut r_level = Vec::with_capacity(num_states);
        for s in 0..num_states {
            let row = if s == 0 {
                main_row.clone()
            } else {
                absorb.clone()
            };
            t_level.push(vec![row; aa]);
            let dists: Vec<FiniteRewardDist> = (0..aa)
                .map(|a| {
                    if s >= 1 && s <= s_bandit {
                        FiniteRewardDist::bernoulli(sqrt_l, p_table[h][s - 1][a])
                    } else {
                        FiniteRewardDist::point_mass(0.0)
                    }
                })
                .collect();
            r_level.push(dists);
        }
        transitions.push(t_level);
        rewards.push(r_level);
    }

    let mut init_dist = vec![0.0; num_states];
    init_dist[0] = 1.0;

    let mdp = TabularMdp {
        horizon: hh,
        num_states,
        num_actions: aa,
        transitions,
        rewards,
        init_dist,
    };
    Ok((
        mdp,
        LowerBoundMeta {
            sigma,
            p_table,
            d_table,
        },
    ))
}

/// Splits the gap list into `H·S` groups of `A`, each containing a zero.
///
/// When consecutive chunks of `A` already satisfy that, the assignment is the
/// identity. Otherwise one zero index is reserved per group (in index order)
/// for slot 0 and the remaining indices fill the other slots in index order.
fn assign_gap_groups(spec: &LowerBoundSpec) -> Vec<Vec<Vec<usize>>> {
    let (s_bandit, aa, hh) = (spec.bandit_states, spec.num_actions, spec.horizon);
    let groups = hh * s_bandit;
    let chunked_ok = (0..groups).all(|g| spec.gaps[g * aa..(g + 1) * aa].contains(&0.0));
    let flat: Vec<usize> = if chunked_ok {
        (0..groups * aa).collect()
    } else {
        let zero_indices: Vec<usize> = spec
            .gaps
            .iter()
            .enumerate()
            .filter(|&(_, &g)| g == 0.0)
            .map(|(i, _)| i)
            .take(groups)
            .collect();
        let mut used = vec![false; spec.gaps.len()];
        for &i in &zero_indices {
            used[i] = true;
        }
        let mut rest = (0..spec.gaps.len()).filter(|&i| !used[i]);
        let mut flat = Vec::with_capacity(groups * aa);
        for g in 0..groups {
            flat.push(zero_indices[g]);
            for _ in 1..aa {
                flat.push(rest.next().expect("gap count matches group slots"));
            }
        }
        flat
    };
    (0..hh)
        .map(|h| {
            (0..s_bandit)
                .map(|i| {
                    let g = h * s_bandit + i;
                    flat[g * aa..(g + 1) * aa].to_vec()
                })
                .collect()
        })
        .collect()
}

/// Random sparse instance generator for tests and sweeps. Rewards are
/// rescaled so the maximum total path reward never exceeds the horizon.
pub fn make_random_mdp(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    sparsity: f64,
    seed: u64,
) -> TabularMdp {
    assert!(num_states > 0 && num_actions > 0 && horizon > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = ((sparsity * num_states as f64).round() as usize).clamp(1, num_states);

    let mut transitions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut t_level = Vec::with_capacity(num_states);
        let mut r_level = Vec::with_capacity(num_states);
        for _ in 0..num_states {
            let mut t_row = Vec::with_capacity(num_actions);
            let mut r_row = Vec::with_capacity(num_actions);
            for _ in 0..num_actions {
                t_row.push(random_row(num_states, support, &mut rng));
                r_row.push(random_reward(horizon as f64, &mut rng));
            }
            t_level.push(t_row);
            r_level.push(r_row);
        }
        transitions.push(t_level);
        rewards.push(r_level);
    }
    let init_dist = random_simplex(num_states, &mut rng);

    let mut mdp = TabularMdp {
        horizon,
        num_states,
        num_actions,
        transitions,
        rewards,
        init_dist,
    };
    let max_total = mdp.max_total_reward();
    if max_total > horizon as f64 {
        let scale = horizon as f64 / max_total;
        for level in &mut mdp.rewards {
            for row in level {
                for dist in row {
                    for atom in &mut dist.atoms {
                        atom.0 *= scale;
                    }
                }
            }
        }
    }
    mdp
}

fn random_row(num_states: usize, support: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, f64)> {
    let mut indices: Vec<usize> = (0..num_states).collect();
    for j in 0..support {
        let pick = j + rng.random_range(0..num_states - j);
        indices.swap(j, pick);
    }
    let mut chosen = indices[..support].to_vec();
    chosen.sort_unstable();
    let weights = random_simplex(support, rng);
    chosen.into_iter().zip(weights).collect()
}

fn random_reward(max_value: f64, rng: &mut ChaCha8Rng) -> FiniteRewardDist {
    let atoms = rng.random_range(1..=3usize);
    let values: Vec<f64> = (0..atoms)
        .map(|_| rng.random::<f64>() * max_value)
        .collect();
    let probs = random_simplex(atoms, rng);
    FiniteRewardDist::new(values.into_iter().zip(probs).collect())
}

fn random_simplex(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>().max(1e-9)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// Degenerate sanity fixture: one state, one action, deterministic reward 1
/// at the final step and zero elsewhere. Every learner has zero regret here.
pub fn make_chain(horizon: usize) -> TabularMdp {
    assert!(horizon >= 1);
    let transitions = vec![vec![vec![vec![(0usize, 1.0)]]]; horizon];
    let rewards = (0..horizon)
        .map(|h| {
            let value = if h + 1 == horizon { 1.0 } else { 0.0 };
            vec![vec![FiniteRewardDist::point_mass(value)]]
        })
        .collect();
    TabularMdp {
        horizon,
        num_states: 1,
        num_actions: 1,
        transitions,
        rewards,
        init_dist: vec![1.0],
    }
}

/// Bernoulli KL divergence `kl(p, q) = p ln(p/q) + (1−p) ln((1−p)/(1−q))`.
pub fn kl_bernoulli(p: f64, q: f64) -> f64 {
    let term = |num: f64, den: f64| {
        if num == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            num * (num / den).ln()
        }
    };
    term(p, q) + term(1.0 - p, 1.0 - q)
}
