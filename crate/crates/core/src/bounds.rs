//! Evaluators for the theoretical regret-bound expressions.
//!
//! The upper bound is a four-term sum over a solved instance; the lower bound
//! is the constant-free envelope `Σ (L/Δ_i)·log K` of the hard family. Both
//! exist so regret curves can be overlaid against theory: `Leading` mode
//! drops the numeric prefactors (for plots), `FullConstants` keeps them
//! (for exactness against the stated bound).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::OptimalSolution;

/// Stated prefactors of the four upper-bound terms in full-constants mode.
pub const BOUND_CONSTANTS: [f64; 4] = [48600.0, 21600.0, 270000.0, 276.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("no positive gaps: gap-dependent bounds are undefined")]
    NoGaps,
    #[error("empty gap set for the lower-bound envelope")]
    EmptyGapSet,
    #[error("invalid bound inputs: {0}")]
    BadParams(String),
}

/// Which conditional-total-variance estimate feeds the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarMaxCSource {
    /// Future-conditional DP maximum (always available).
    FutureDp,
    /// Enumeration oracle (small instances only).
    Exact,
}

/// Inputs of the upper-bound evaluator for one solved instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundInputs {
    /// Positive gaps over the suboptimal triples.
    pub gaps_sub: Vec<f64>,
    pub z_opt_count: usize,
    pub delta_min: f64,
    pub horizon: usize,
    pub num_states: usize,
    pub num_actions: usize,
    pub episodes: u64,
    pub delta: f64,
    pub var_max_c: f64,
    pub var_max_c_source: VarMaxCSource,
}

impl BoundInputs {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        gaps_sub: Vec<f64>,
        z_opt_count: usize,
        delta_min: f64,
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        episodes: u64,
        delta: f64,
        var_max_c: f64,
        var_max_c_source: VarMaxCSource,
    ) -> Result<Self, BoundsError> {
        if gaps_sub.is_empty() {
            return Err(BoundsError::NoGaps);
        }
        if gaps_sub.iter().any(|&g| g <= 0.0) {
            return Err(BoundsError::BadParams(
                "all gaps over Z_sub must be positive".into(),
            ));
        }
        if delta.is_nan() || delta <= 0.0 || delta >= 1.0 || episodes == 0 || delta_min <= 0.0 {
            return Err(BoundsError::BadParams(format!(
                "need K ≥ 1, δ ∈ (0,1), Δ_min > 0; got K={episodes}, δ={delta}, Δ_min={delta_min}"
            )));
        }
        let inputs = Self {
            gaps_sub,
            z_opt_count,
            delta_min,
            horizon,
            num_states,
            num_actions,
            episodes,
            delta,
            var_max_c,
            var_max_c_source,
        };
        let iota = inputs.iota();
        if iota.is_nan() || iota <= 0.0 {
            return Err(BoundsError::BadParams(
                "iota = log(SAHK/δ) must be positive".into(),
            ));
        }
        Ok(inputs)
    }

    /// Builds inputs from a solved instance.
    #[allow(clippy::too_many_arguments)]
    pub fn from_solution(
        sol: &OptimalSolution,
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        episodes: u64,
        delta: f64,
        var_max_c: f64,
        var_max_c_source: VarMaxCSource,
    ) -> Result<Self, BoundsError> {
        let gaps_sub: Vec<f64> = sol
            .z_sub
            .iter()
            .map(|&(h, s, a)| sol.gaps[h][s][a])
            .collect();
        let delta_min = sol.delta_min.ok_or(BoundsError::NoGaps)?;
        Self::new(
            gaps_sub,
            sol.z_opt.len(),
            delta_min,
            horizon,
            num_states,
            num_actions,
            episodes,
            delta,
            var_max_c,
            var_max_c_source,
        )
    }

    /// `ι = log(S·A·H·K/δ)`.
    pub fn iota(&self) -> f64 {
        (self.num_states as f64
            * self.num_actions as f64
            * self.horizon as f64
            * self.episodes as f64
            / self.delta)
            .ln()
    }

    /// `W̄ = min(160·H²·log(4K(H+1)/δ), var_max_c)`.
    pub fn w_bar(&self) -> f64 {
        let h = self.horizon as f64;
        let tail = 160.0 * h * h * (4.0 * self.episodes as f64 * (h + 1.0) / self.delta).ln();
        tail.min(self.var_max_c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMode {
    /// All numeric prefactors set to 1.
    Leading,
    /// Prefactors as stated: 48600, 21600, 270000, 276.
    FullConstants,
}

/// A bound with its per-term breakdown; `total` is the sum of the terms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundValue {
    pub total: f64,
    pub gap_term: f64,
    pub opt_term: f64,
    pub s2_term: f64,
    pub h5_term: f64,
}

/// Evaluates the four-term upper bound:
///
/// `C₁·Σ_{Z_sub} W̄·ι/Δ + C₂·|Z_opt|·(H² ∧ var_max_c)·ι/Δ_min
///  + C₃·S²·A·H⁴·ι·log(10·S·A·H·ι/Δ_min) + C₄·S·A·H⁵·ι`.
pub fn upper_bound_value(inputs: &BoundInputs, mode: BoundMode) -> BoundValue {
    let [c1, c2, c3, c4] = match mode {
        BoundMode::Leading => [1.0; 4],
        BoundMode::FullConstants => BOUND_CONSTANTS,
    };
    let iota = inputs.iota();
    let w_bar = inputs.w_bar();
    let s = inputs.num_states as f64;
    let a = inputs.num_actions as f64;
    let h = inputs.horizon as f64;
    let h_sq_cap = (h * h).min(inputs.var_max_c);

    let gap_term = c1
        * inputs
            .gaps_sub
            .iter()
            .map(|&g| w_bar * iota / g)
            .sum::<f64>();
    let opt_term = c2 * inputs.z_opt_count as f64 * h_sq_cap * iota / inputs.delta_min;
    let s2_term =
        c3 * s * s * a * h.powi(4) * iota * (10.0 * s * a * h * iota / inputs.delta_min).ln();
    let h5_term = c4 * s * a * h.powi(5) * iota;
    BoundValue {
        total: gap_term + opt_term + s2_term + h5_term,
        gap_term,
        opt_term,
        s2_term,
        h5_term,
    }
}

/// Constant-free lower-bound envelope `Σ_{Δ>0} (L/Δ)·log K` of the hard
/// family, in the family's own gap parameters.
pub fn lower_bound_value(gaps: &[f64], l: f64, episodes: f64) -> Result<f64, BoundsError> {
    let positive: Vec<f64> = gaps.iter().copied().filter(|&g| g > 0.0).collect();
    if positive.is_empty() {
        return Err(BoundsError::EmptyGapSet);
    }
    if episodes.is_nan() || episodes <= 1.0 || l.is_nan() || l <= 0.0 {
        return Err(BoundsError::BadParams(format!(
            "need K > 1 and L > 0; got K={episodes}, L={l}"
        )));
    }
    Ok(positive.iter().map(|&g| l / g).sum::<f64>() * episodes.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nominal(var_max_c: f64, episodes: u64, delta: f64, horizon: usize) -> BoundInputs {
        BoundInputs::new(
            vec![0.1, 0.2],
            0,
            0.1,
            horizon,
            1,
            1,
            episodes,
            delta,
            var_max_c,
            VarMaxCSource::FutureDp,
        )
        .unwrap()
    }

    #[test]
    fn leading_gap_term_is_the_plain_sum() {
        // ι = log(1·1·1·1/e⁻¹) = 1 and W̄ = min(large, 1) = 1, so the gap
        // term is 1/0.1 + 1/0.2 = 15.
        let inputs = nominal(1.0, 1, (-1.0f64).exp(), 1);
        assert!((inputs.iota() - 1.0).abs() < 1e-12);
        assert!((inputs.w_bar() - 1.0).abs() < 1e-12);
        let v = upper_bound_value(&inputs, BoundMode::Leading);
        assert!((v.gap_term - 15.0).abs() < 1e-9);
        assert!((v.total - (v.gap_term + v.opt_term + v.s2_term + v.h5_term)).abs() < 1e-9);
    }

    #[test]
    fn w_bar_picks_the_smaller_side() {
        let inputs = BoundInputs::new(
            vec![0.1, 0.2],
            10,
            0.1,
            2,
            3,
            2,
            1000,
            0.1,
            71.0 / 64.0,
            VarMaxCSource::Exact,
        )
        .unwrap();
        // 160·H²·log(4K(H+1)/δ) = 640·log(120000) ≈ 7485 dominates.
        assert!((inputs.w_bar() - 71.0 / 64.0).abs() < 1e-12);
        assert!((inputs.iota() - 120000f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn full_constants_scale_each_term() {
        let inputs = BoundInputs::new(
            vec![0.05, 0.2, 0.4],
            7,
            0.05,
            4,
            5,
            3,
            100_000,
            0.05,
            2.5,
            VarMaxCSource::FutureDp,
        )
        .unwrap();
        let lead = upper_bound_value(&inputs, BoundMode::Leading);
        let full = upper_bound_value(&inputs, BoundMode::FullConstants);
        let pairs = [
            (full.gap_term, lead.gap_term * BOUND_CONSTANTS[0]),
            (full.opt_term, lead.opt_term * BOUND_CONSTANTS[1]),
            (full.s2_term, lead.s2_term * BOUND_CONSTANTS[2]),
            (full.h5_term, lead.h5_term * BOUND_CONSTANTS[3]),
        ];
        for (got, want) in pairs {
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn upper_bound_is_monotone() {
        let base = nominal(2.0, 1000, 0.1, 3);
        let v0 = upper_bound_value(&base, BoundMode::Leading).total;
        let more_k = nominal(2.0, 10_000, 0.1, 3);
        assert!(upper_bound_value(&more_k, BoundMode::Leading).total > v0);
        let more_h = nominal(2.0, 1000, 0.1, 5);
        assert!(upper_bound_value(&more_h, BoundMode::Leading).total > v0);
        let mut smaller_gap = nominal(2.0, 1000, 0.1, 3);
        smaller_gap.delta_min = 0.01;
        smaller_gap.gaps_sub = vec![0.01, 0.2];
        assert!(upper_bound_value(&smaller_gap, BoundMode::Leading).total > v0);
    }

    #[test]
    fn lower_bound_envelope_arithmetic() {
        let e = std::f64::consts::E;
        let v = lower_bound_value(&[0.1, 0.2], 4.0, e).unwrap();
        assert!((v - 60.0).abs() < 1e-9);
        // Linear in L.
        let doubled = lower_bound_value(&[0.1, 0.2], 8.0, e).unwrap();
        assert!((doubled - 120.0).abs() < 1e-9);
        // log factor of 2 at K = e².
        let squared = lower_bound_value(&[0.1, 0.2], 4.0, e * e).unwrap();
        assert!((squared - 120.0).abs() < 1e-9);
        // Zero gaps are skipped.
        let skip = lower_bound_value(&[0.0, 0.1, 0.2, 0.0], 4.0, e).unwrap();
        assert!((skip - 60.0).abs() < 1e-9);

        assert_eq!(
            lower_bound_value(&[0.0], 4.0, e),
            Err(BoundsError::EmptyGapSet)
        );
        assert_eq!(
            lower_bound_value(&[], 4.0, e),
            Err(BoundsError::EmptyGapSet)
        );
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert_eq!(
            BoundInputs::new(
                vec![],
                0,
                0.1,
                1,
                1,
                1,
                1,
                0.5,
                1.0,
                VarMaxCSource::FutureDp
            ),
            Err(BoundsError::NoGaps)
        );
        assert!(matches!(
            BoundInputs::new(
                vec![0.1],
                0,
                0.1,
                1,
                1,
                1,
                1,
                1.5,
                1.0,
                VarMaxCSource::FutureDp
            ),
            Err(BoundsError::BadParams(_))
        ));
    }
}
