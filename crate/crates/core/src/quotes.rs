//! Optimal quote distances for the four utility settings.
//!
//! Every setting yields quotes of the form `delta± = half_spread ± (r - s)`,
//! where `r` is the indifference price. Distances are returned unclamped: a
//! non-positive distance is a signal to cross the spread, which the simulator
//! handles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{time_to_go, MidPriceModel};

/// Terminal inventory penalty shape `pi(s)` in `x + q s - eta q^2 pi(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    One,
    Square,
}

impl std::str::FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "1" => Ok(Penalty::One),
            "square" | "s^2" | "s2" => Ok(Penalty::Square),
            other => Err(Error::UnsupportedPenalty(other.to_string())),
        }
    }
}

impl std::fmt::Display for Penalty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Penalty::One => "one",
            Penalty::Square => "square",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Utility {
    /// Terminal PNL `x + q s`.
    Linear,
    /// `x + q s - eta q^2`.
    LinearPenalty,
    /// `x + q s - eta q^2 pi(s)`.
    GeneralPenalty(Penalty),
    /// `-exp(-gamma (x + q s - eta q^2))`.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyParams {
    /// Fill intensity at zero distance, per unit time.
    pub a: f64,
    /// Intensity decay per unit of price distance.
    pub k: f64,
    /// Exponential risk aversion; only read by the exponential setting.
    pub gamma: f64,
    /// Inventory-risk aversion.
    pub eta: f64,
    pub horizon: f64,
    pub utility: Utility,
}

impl StrategyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::param("A", "must be non-negative"));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::param("k", "must be positive"));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::param("eta", "must be non-negative"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("T", "must be positive"));
        }
        if self.utility == Utility::Exponential && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::param("gamma", "must be positive for exponential utility"));
        }
        Ok(())
    }

    /// Fill rate `A exp(-k delta)` of a limit order at distance `delta`.
    pub fn intensity(&self, delta: f64) -> f64 {
        intensity(self.a, self.k, delta)
    }

    /// `(1/gamma) ln(1 + gamma/k)`, the exponential-utility half spread at zero risk.
    pub fn risk_half_spread(&self) -> f64 {
        (self.gamma / self.k).ln_1p() / self.gamma
    }
}

pub fn intensity(a: f64, k: f64, delta: f64) -> f64 {
    a * (-k * delta).exp()
}

/// Quote state: time, mid-price, inventory, cash.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    pub t: f64,
    pub s: f64,
    pub q: i64,
    pub x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuotePair {
    pub delta_ask: f64,
    pub delta_bid: f64,
    pub spread: f64,
    pub indifference: f64,
}

impl QuotePair {
    /// Builds quotes around indifference price `r` with half spread `h`.
    pub fn around(s: f64, indifference: f64, half_spread: f64) -> Self {
        let skew = indifference - s;
        Self::from_deltas(s, half_spread + skew, half_spread - skew)
    }

    pub fn from_deltas(s: f64, delta_ask: f64, delta_bid: f64) -> Self {
        Self {
            delta_ask,
            delta_bid,
            spread: delta_ask + delta_bid,
            indifference: s + (delta_ask - delta_bid) / 2.0,
        }
    }

    pub fn ask_price(&self, s: f64) -> f64 {
        s + self.delta_ask
    }

    pub fn bid_price(&self, s: f64) -> f64 {
        s - self.delta_bid
    }
}

/// Linear utility: `delta± = 1/k ± (E[S_T] - s)`.
pub fn linear_quotes(
    model: &MidPriceModel,
    params: &StrategyParams,
    state: &MarketState,
) -> Result<QuotePair> {
    let theta1 = model.conditional_mean(state.t, state.s, params.horizon)?;
    Ok(QuotePair::around(state.s, theta1, 1.0 / params.k))
}

/// Linear utility with quadratic penalty: `delta± = 1/k + eta ± (E[S_T] - s - 2 q eta)`.
pub fn linear_penalty_quotes(
    model: &MidPriceModel,
    params: &StrategyParams,
    state: &MarketState,
) -> Result<QuotePair> {
    let theta1 = model.conditional_mean(state.t, state.s, params.horizon)?;
    let r = theta1 - 2.0 * params.eta * state.q as f64;
    Ok(QuotePair::around(state.s, r, 1.0 / params.k + params.eta))
}

/// `E[pi(S_T) | S_t = s]` for the supported penalties.
pub fn expected_penalty(
    model: &MidPriceModel,
    penalty: Penalty,
    t: f64,
    s: f64,
    horizon: f64,
) -> Result<f64> {
    match penalty {
        Penalty::One => {
            time_to_go(t, horizon)?;
            Ok(1.0)
        }
        Penalty::Square => {
            let m = model.conditional_mean(t, s, horizon)?;
            Ok(m * m + model.conditional_variance(t, horizon)?)
        }
    }
}

/// General penalty: `delta± = 1/k + eta ± (E[S_T] - s - 2 q eta E[pi(S_T)])`.
pub fn general_penalty_quotes(
    model: &MidPriceModel,
    params: &StrategyParams,
    penalty: Penalty,
    state: &MarketState,
) -> Result<QuotePair> {
    let theta1 = model.conditional_mean(state.t, state.s, params.horizon)?;
    let theta2 = expected_penalty(model, penalty, state.t, state.s, params.horizon)?;
    let r = theta1 - 2.0 * params.eta * state.q as f64 * theta2;
    Ok(QuotePair::around(state.s, r, 1.0 / params.k + params.eta))
}

/// `theta2(t) = -eta - (gamma/2) ∫_t^T sigma^2 beta^2`, always `<= -eta`.
pub fn theta2_exponential(model: &MidPriceModel, params: &StrategyParams, t: f64) -> Result<f64> {
    model.validate().map_err(|e| Error::HypothesisViolation(e.to_string()))?;
    let weight = model.conditional_variance(t, params.horizon)?;
    Ok(-params.eta - 0.5 * params.gamma * weight)
}

/// Exponential utility:
/// `delta± = (1/gamma) ln(1 + gamma/k) - theta2 ± (theta1 - s + 2 q theta2)`.
pub fn exponential_quotes(
    model: &MidPriceModel,
    params: &StrategyParams,
    state: &MarketState,
) -> Result<QuotePair> {
    let theta1 = model.conditional_mean(state.t, state.s, params.horizon)?;
    let theta2 = theta2_exponential(model, params, state.t)?;
    let r = theta1 + 2.0 * state.q as f64 * theta2;
    Ok(QuotePair::around(state.s, r, params.risk_half_spread() - theta2))
}

/// Dispatches on `params.utility`.
pub fn quotes(
    model: &MidPriceModel,
    params: &StrategyParams,
    state: &MarketState,
) -> Result<QuotePair> {
    Ok(QuoteCoefficients::at(model, params, state.t)?.quotes(params, state.s, state.q))
}

/// The price-independent part of the closed-form quotes at one instant.
///
/// Quotes at `(s, q)` follow from these with a handful of flops, which lets a
/// simulator evaluate them once per grid time instead of once per path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuoteCoefficients {
    /// `E[S_T | S_t = s] = alpha + beta s`.
    pub alpha: f64,
    pub beta: f64,
    /// `Var[S_T | S_t]`.
    pub variance: f64,
}

impl QuoteCoefficients {
    pub fn at(model: &MidPriceModel, params: &StrategyParams, t: f64) -> Result<Self> {
        if params.utility == Utility::Exponential {
            model.validate().map_err(|e| Error::HypothesisViolation(e.to_string()))?;
        }
        let (alpha, beta) = model.affine_coeffs(t, params.horizon)?;
        let variance = model.conditional_variance(t, params.horizon)?;
        Ok(Self { alpha, beta, variance })
    }

    pub fn quotes(&self, params: &StrategyParams, s: f64, q: i64) -> QuotePair {
        let theta1 = self.alpha + self.beta * s;
        let q = q as f64;
        match params.utility {
            Utility::Linear => QuotePair::around(s, theta1, 1.0 / params.k),
            Utility::LinearPenalty | Utility::GeneralPenalty(Penalty::One) => {
                QuotePair::around(s, theta1 - 2.0 * params.eta * q, 1.0 / params.k + params.eta)
            }
            Utility::GeneralPenalty(Penalty::Square) => {
                let second_moment = theta1 * theta1 + self.variance;
                let r = theta1 - 2.0 * params.eta * q * second_moment;
                QuotePair::around(s, r, 1.0 / params.k + params.eta)
            }
            Utility::Exponential => {
                let theta2 = -params.eta - 0.5 * params.gamma * self.variance;
                QuotePair::around(s, theta1 + 2.0 * q * theta2, params.risk_half_spread() - theta2)
            }
        }
    }
}

/// Explicit lower bound on the value function at `state` for `params.utility`.
pub fn value_lower_bound(
    model: &MidPriceModel,
    params: &StrategyParams,
    state: &MarketState,
) -> Result<f64> {
    let &MarketState { t, s, q, x } = state;
    let horizon = params.horizon;
    let tau = time_to_go(t, horizon)?;
    let q = q as f64;
    let theta1 = model.conditional_mean(t, s, horizon)?;
    let base_rate = params.a / (std::f64::consts::E * params.k);
    match params.utility {
        Utility::Linear => Ok(x + 2.0 * base_rate * tau + q * theta1),
        Utility::LinearPenalty => {
            Ok(x + base_rate * (2.0 - params.k * params.eta) * tau + q * theta1
                - params.eta * q * q)
        }
        Utility::GeneralPenalty(pi) => {
            let theta2 = expected_penalty(model, pi, t, s, horizon)?;
            let running = expected_penalty_integral(model, pi, t, s, horizon)?;
            Ok(x + 2.0 * base_rate * tau - params.eta * params.a / std::f64::consts::E * running
                + q * theta1
                - params.eta * q * q * theta2)
        }
        Utility::Exponential => {
            let theta0 = theta0_exponential(model, params, t)?;
            let theta2 = theta2_exponential(model, params, t)?;
            Ok(-(-params.gamma * (x + theta0 + q * theta1 + q * q * theta2)).exp())
        }
    }
}

/// `E_{t,s}[ ∫_t^T E_{u,S_u}[pi(S_T)] du ]`, integrated over `u` by Simpson.
pub fn expected_penalty_integral(
    model: &MidPriceModel,
    penalty: Penalty,
    t: f64,
    s: f64,
    horizon: f64,
) -> Result<f64> {
    let tau = time_to_go(t, horizon)?;
    match penalty {
        Penalty::One => Ok(tau),
        Penalty::Square => {
            let integrand = |u: f64| {
                // S_u | S_t = s is Gaussian with mean m_u, variance v_u.
                let (a_tu, b_tu) = model.affine_coeffs_unchecked(u - t);
                let m_u = a_tu + b_tu * s;
                let v_u = model.variance_weight(t, u);
                let (a_ut, b_ut) = model.affine_coeffs_unchecked(horizon - u);
                let v_ut = model.variance_weight(u, horizon);
                a_ut * a_ut + 2.0 * a_ut * b_ut * m_u + b_ut * b_ut * (m_u * m_u + v_u) + v_ut
            };
            Ok(crate::quadrature::simpson_to_tolerance(
                integrand,
                t,
                horizon,
                crate::model::QUADRATURE_TOL,
            ))
        }
    }
}

/// `theta0(t)` of the exponential sub-solution.
pub fn theta0_exponential(model: &MidPriceModel, params: &StrategyParams, t: f64) -> Result<f64> {
    let tau = time_to_go(t, params.horizon)?;
    let (k, gamma, a) = (params.k, params.gamma, params.a);
    let flat =
        2.0 * a / (k + gamma) * (1.0 - k / gamma * (gamma / k).ln_1p() - k * params.eta) * tau;
    let double = model.integrated_variance_weight(t, params.horizon)?;
    Ok(flat - k * gamma * a / (k + gamma) * double)
}
