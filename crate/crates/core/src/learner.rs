//! Monotonic Value Propagation (MVP): an optimistic model-based learner.
//!
//! The learner keeps empirical transition counts, reward moment sums, and
//! optimistic Q/V tables. After observing each episode it walks the levels
//! from the last step down to the first: it folds the visited
//! `(state, action, successor)` into the statistics, then recomputes the
//! bonus and the min-clamped Q backup for *every* `(s, a)` at that level and
//! refreshes `V` as the row maximum. Ties in every argmax break to the lowest
//! action index so runs are reproducible.

use serde::Serialize;
use thiserror::Error;

use crate::mdp::{DeterministicPolicy, Trajectory};
use crate::{CountTable, Table2, Table3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("invalid learner parameters: {0}")]
    InvalidParameters(String),
    #[error("trajectory has {got} steps, expected H = {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Bonus multipliers `(c1, c2, c3)` for the next-value variance term, the
/// empirical reward variance term, and the `1/n` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BonusConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for BonusConstants {
    fn default() -> Self {
        Self {
            c1: 2.0,
            c2: 2.0,
            c3: 10.0,
        }
    }
}

/// All mutable learner statistics for one run.
#[derive(Debug, Clone)]
pub struct LearnerState {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    episodes: u64,
    delta: f64,
    constants: BonusConstants,
    /// `log(S·A·H·K/δ)`.
    iota: f64,
    /// Visit counts `n[h][s][a]`.
    counts: CountTable,
    /// Successor counts `succ[h][s][a][s']`; never incremented at the last
    /// level (there is no observed successor there).
    successor_counts: Vec<Vec<Vec<Vec<u64>>>>,
    /// Reward sums `θ[h][s][a]`.
    reward_sum: Table3,
    /// Squared-reward sums `κ[h][s][a]`.
    reward_sq_sum: Table3,
    /// Optimistic `Q[h][s][a] ∈ [0, H]`.
    q_table: Table3,
    /// `V[h][s] = max_a Q[h][s][a]`.
    v_table: Table2,
}

/// Diagnostic view of a learner: optimistic tables plus visit counts.
#[derive(Debug, Clone, Serialize)]
pub struct LearnerSnapshot {
    pub q_table: Table3,
    pub v_table: Table2,
    pub n: CountTable,
}

impl LearnerState {
    /// Zero-initializes all statistics and fixes `ι = log(S·A·H·K/δ)`.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        episodes: u64,
        delta: f64,
        constants: BonusConstants,
    ) -> Result<Self, LearnerError> {
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(LearnerError::InvalidParameters(
                "S, A, H must be positive".into(),
            ));
        }
        if episodes == 0 {
            return Err(LearnerError::InvalidParameters(
                "K must be at least 1".into(),
            ));
        }
        if delta.is_nan() || delta <= 0.0 || delta >= 1.0 {
            return Err(LearnerError::InvalidParameters(format!(
                "delta = {delta} outside (0, 1)"
            )));
        }
        let ratio =
            num_states as f64 * num_actions as f64 * horizon as f64 * episodes as f64 / delta;
        let iota = ratio.ln();
        if iota.is_nan() || iota <= 0.0 {
            return Err(LearnerError::InvalidParameters(format!(
                "iota = log({ratio}) is not positive"
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            episodes,
            delta,
            constants,
            iota,
            counts: vec![vec![vec![0; num_actions]; num_states]; horizon],
            successor_counts: vec![
                vec![vec![vec![0; num_states]; num_actions]; num_states];
                horizon
            ],
            reward_sum: vec![vec![vec![0.0; num_actions]; num_states]; horizon],
            reward_sq_sum: vec![vec![vec![0.0; num_actions]; num_states]; horizon],
            q_table: vec![vec![vec![0.0; num_actions]; num_states]; horizon],
            v_table: vec![vec![0.0; num_states]; horizon],
        })
    }

    pub fn iota(&self) -> f64 {
        self.iota
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn q_table(&self) -> &Table3 {
        &self.q_table
    }

    pub fn v_table(&self) -> &Table2 {
        &self.v_table
    }

    pub fn counts(&self) -> &CountTable {
        &self.counts
    }

    pub fn snapshot(&self) -> LearnerSnapshot {
        LearnerSnapshot {
            q_table: self.q_table.clone(),
            v_table: self.v_table.clone(),
            n: self.counts.clone(),
        }
    }

    /// Greedy policy from the current Q table, ties to the lowest index.
    pub fn greedy_policy(&self) -> DeterministicPolicy {
        let actions = (0..self.horizon)
            .map(|h| {
                (0..self.num_states)
                    .map(|s| argmax(&self.q_table[h][s]))
                    .collect()
            })
            .collect();
        DeterministicPolicy::new(actions)
    }

    /// Optimistic value of the next level; zero past the horizon.
    #[inline]
    fn next_value(&self, h: usize, s: usize) -> f64 {
        if h + 1 < self.horizon {
            self.v_table[h + 1][s]
        } else {
            0.0
        }
    }

    /// Three-term exploration bonus at `(h, s, a)`:
    ///
    /// `b = c1·sqrt(v̂·ι/(n∨1)) + c2·sqrt(ŵ·ι/(n∨1)) + c3·H·ι/(n∨1)`
    ///
    /// where `v̂` is the empirical variance of the next-level optimistic
    /// values under the empirical transitions and `ŵ = κ/n − (θ/n)²` is the
    /// empirical reward variance. Both empirical terms are zero before the
    /// first visit, leaving `b = c3·H·ι`, which is large enough for the
    /// min-clamp to pin Q at `H` there.
    pub fn bonus(&self, h: usize, s: usize, a: usize) -> f64 {
        let n = self.counts[h][s][a];
        let n_or_1 = n.max(1) as f64;
        let (next_var, reward_var) = if n == 0 {
            (0.0, 0.0)
        } else {
            let nf = n as f64;
            let mut mean = 0.0;
            let mut second = 0.0;
            for (sp, &c) in self.successor_counts[h][s][a].iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let w = c as f64 / nf;
                let v = self.next_value(h, sp);
                mean += w * v;
                second += w * v * v;
            }
            let r_mean = self.reward_sum[h][s][a] / nf;
            let r_second = self.reward_sq_sum[h][s][a] / nf;
            // Both can dip below zero by a rounding error.
            (
                (second - mean * mean).max(0.0),
                (r_second - r_mean * r_mean).max(0.0),
            )
        };
        let c = &self.constants;
        c.c1 * (next_var * self.iota / n_or_1).sqrt()
            + c.c2 * (reward_var * self.iota / n_or_1).sqrt()
            + c.c3 * self.horizon as f64 * self.iota / n_or_1
    }

    /// Folds one episode into the statistics and recomputes every level from
    /// the last step down: increment the visited site, then rebuild Q for all
    /// `(s, a)` at that level as `min(r̂ + E_P̂[V_{h+1}] + b, H)` and refresh V.
    pub fn update(&mut self, trajectory: &Trajectory) -> Result<(), LearnerError> {
        if trajectory.steps.len() != self.horizon {
            return Err(LearnerError::LengthMismatch {
                expected: self.horizon,
                got: trajectory.steps.len(),
            });
        }
        let h_max = self.horizon as f64;
        for h in (0..self.horizon).rev() {
            let step = trajectory.steps[h];
            let (s, a) = (step.state, step.action);
            self.counts[h][s][a] += 1;
            self.reward_sum[h][s][a] += step.reward;
            self.reward_sq_sum[h][s][a] += step.reward * step.reward;
            if h + 1 < self.horizon {
                self.successor_counts[h][s][a][trajectory.steps[h + 1].state] += 1;
            }

            for s in 0..self.num_states {
                for a in 0..self.num_actions {
                    let n = self.counts[h][s][a];
                    let backup = if n == 0 {
                        0.0
                    } else {
                        let nf = n as f64;
                        let r_hat = self.reward_sum[h][s][a] / nf;
                        let expected_next: f64 = self.successor_counts[h][s][a]
                            .iter()
                            .enumerate()
                            .filter(|&(_, &c)| c > 0)
                            .map(|(sp, &c)| c as f64 / nf * self.next_value(h, sp))
                            .sum();
                        r_hat + expected_next
                    };
                    self.q_table[h][s][a] = (backup + self.bonus(h, s, a)).min(h_max);
                }
                self.v_table[h][s] = self.q_table[h][s]
                    .iter()
                    .fold(f64::NEG_INFINITY, |m, &q| m.max(q));
            }
        }
        Ok(())
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
