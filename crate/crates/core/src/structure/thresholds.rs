//! Thresholds, sample-size bounds and noise tolerances for the two greedy
//! learners, as functions of the class parameters `(alpha, beta, d2)`.
//! All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::model::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnThresholds {
    /// Covariance threshold `½ α² e^{-12β}`.
    pub tau: f64,
    /// `½ e^{-2β}`.
    pub delta_lc: f64,
    /// Greedy set-size bound `8 / τ²`.
    pub gamma: f64,
    /// Influence threshold `α² σ(-2β) (1 - tanh β)²`.
    pub eta: f64,
    /// Greedy iterations `⌈d₂ ln(4/η)⌉`.
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub d2: usize,
}

impl LearnThresholds {
    /// `⌈γ⌉` as a set-size cap, saturating.
    pub fn max_set(&self) -> usize {
        let g = self.gamma.ceil();
        if g >= usize::MAX as f64 {
            usize::MAX
        } else {
            g as usize
        }
    }
}

pub fn compute_thresholds(alpha: f64, beta: f64, d2: usize) -> Result<LearnThresholds> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return precondition(format!("alpha = {alpha} must be positive"));
    }
    if !(beta >= alpha && beta.is_finite()) {
        return precondition(format!("beta = {beta} must be at least alpha = {alpha}"));
    }
    let tau = 0.5 * alpha * alpha * (-12.0 * beta).exp();
    let eta = alpha * alpha * sigmoid(-2.0 * beta) * (1.0 - beta.tanh()).powi(2);
    Ok(LearnThresholds {
        tau,
        delta_lc: 0.5 * (-2.0 * beta).exp(),
        gamma: 8.0 / (tau * tau),
        eta,
        k: (d2 as f64 * (4.0 / eta).ln()).ceil() as usize,
        alpha,
        beta,
        d2,
    })
}

/// Sample-size bounds. The covariance-learner bound takes the hidden
/// constant as 1 and is usually astronomically large, so each bound is also
/// given as a natural logarithm; the plain values saturate to `+∞`.
/// The ferromagnetic bounds are NaN when `ln n + k ln(en/k) ≤ 0`, which
/// happens only for `k` far above `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBounds {
    pub m_lc: f64,
    pub ln_m_lc: f64,
    pub m_frbm: f64,
    pub ln_m_frbm: f64,
    /// Noise-robust variant (`2^{2k+5}` instead of `2^{2k+3}`).
    pub m_frbm_robust: f64,
    pub ln_m_frbm_robust: f64,
}

/// `M_lc = (ln(1/ζ) + γ ln n) 2^{2γ} / (τ² δ^{2γ})` and
/// `M_frbm = 2^{2k+c} (d₂/η)² (ln n + k ln(en/k)) ln(4/ζ)` with `c = 3` or `5`.
pub fn compute_sample_bounds(th: &LearnThresholds, n: usize, failure_prob: f64) -> Result<SampleBounds> {
    if n < 2 {
        return precondition("n must be at least 2");
    }
    if !(failure_prob > 0.0 && failure_prob < 1.0) {
        return precondition("failure probability must lie in (0, 1)");
    }
    let ln_n = (n as f64).ln();
    let ln2 = std::f64::consts::LN_2;
    let ln_m_lc = ((1.0 / failure_prob).ln() + th.gamma * ln_n).ln() + 2.0 * th.gamma * ln2
        - 2.0 * th.tau.ln()
        - 2.0 * th.gamma * th.delta_lc.ln();
    let k = th.k as f64;
    let subset_term = if th.k == 0 { 0.0 } else { k * (std::f64::consts::E * n as f64 / k).ln() };
    let ln_frbm_common = 2.0 * (th.d2 as f64 / th.eta).ln()
        + (ln_n + subset_term).ln()
        + (4.0 / failure_prob).ln().ln();
    let ln_m_frbm = (2.0 * k + 3.0) * ln2 + ln_frbm_common;
    let ln_m_frbm_robust = (2.0 * k + 5.0) * ln2 + ln_frbm_common;
    Ok(SampleBounds {
        m_lc: ln_m_lc.exp(),
        ln_m_lc,
        m_frbm: ln_m_frbm.exp(),
        ln_m_frbm,
        m_frbm_robust: ln_m_frbm_robust.exp(),
        ln_m_frbm_robust,
    })
}

/// Largest noise levels under which the learners keep their guarantees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessLimits {
    pub eps_p_max_lc: f64,
    pub rho_max_lc: f64,
    pub eps_p_max_frbm: f64,
    pub rho_max_frbm: f64,
    #[serde(with = "crate::pnorm")]
    pub p_norm: f64,
    pub n: usize,
}

pub fn compute_robustness_limits(th: &LearnThresholds, n: usize, p_norm: f64) -> Result<RobustnessLimits> {
    if !(p_norm >= 1.0) {
        return precondition(format!("p_norm = {p_norm} must be at least 1"));
    }
    let exponent = if p_norm.is_infinite() { 1.0 } else { 1.0 - 1.0 / p_norm };
    let k = th.k as f64;
    let n_f = n as f64;
    Ok(RobustnessLimits {
        eps_p_max_lc: th.tau / 2f64.powf(n_f * exponent + 5.0),
        rho_max_lc: th.tau / (128.0 * (th.gamma + 1.0)),
        eps_p_max_frbm: th.eta / 2f64.powf((n_f - k - 1.0) * exponent + k + 6.0),
        rho_max_frbm: th.eta / (8.0 * (4.0 + 2f64.powf(k + 3.0)) * (k + 2.0)),
        p_norm,
        n,
    })
}
