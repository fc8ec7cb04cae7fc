//! Backward solver for the truncated inventory ODE system of the exact
//! exponential-utility problem under arithmetic Brownian motion:
//!
//! ```text
//! v_q'(t) = (k γ q² σ(t)² / 2 − γ q b(t)) v_q(t) − c (v_{q+1}(t) + v_{q−1}(t)),   v_q(T) = 1
//! c = A (1 + k/γ)^(−1 − k/γ)
//! ```
//!
//! The system is truncated to `|q| <= q_max` with `v_{±(q_max+1)} = 0` and
//! integrated from `T` down to `0` with classical fixed-step RK4.

use crate::error::{Error, Result};
use crate::model::{MidPriceModel, PiecewiseConstant};
use crate::quotes::{QuotePair, StrategyParams};

pub const DEFAULT_Q_MAX: i64 = 30;
pub const DEFAULT_STEPS: usize = 2000;

#[derive(Debug, Clone)]
pub struct OdeSystem {
    pub q_max: i64,
    pub n_steps: usize,
    pub params: StrategyParams,
    pub drift: PiecewiseConstant,
    pub vol: PiecewiseConstant,
}

impl OdeSystem {
    /// Builds the system for an arithmetic model; price-dependent drift is rejected.
    pub fn from_model(
        model: &MidPriceModel,
        params: StrategyParams,
        q_max: i64,
        n_steps: usize,
    ) -> Result<Self> {
        let drift = match model.dynamics {
            crate::model::Dynamics::Arithmetic { drift } => PiecewiseConstant::constant(drift),
            crate::model::Dynamics::MeanReverting { .. } => {
                return Err(Error::HypothesisViolation(
                    "the inventory ODE needs drift and volatility independent of the price".into(),
                ))
            }
        };
        let system = Self { q_max, n_steps, params, drift, vol: model.sigma.clone() };
        system.validate()?;
        Ok(system)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_max < 1 {
            return Err(Error::param("q_max", "must be at least 1"));
        }
        if self.n_steps < 1 {
            return Err(Error::param("ode_steps", "must be at least 1"));
        }
        if self.params.gamma.is_nan() || self.params.gamma <= 0.0 {
            return Err(Error::param("gamma", "must be positive for the inventory ODE"));
        }
        self.params.validate()
    }

    /// Coupling constant `A (1 + k/γ)^(−1 − k/γ)`.
    pub fn coupling(&self) -> f64 {
        let ratio = self.params.k / self.params.gamma;
        self.params.a * (-(1.0 + ratio) * ratio.ln_1p()).exp()
    }

    fn width(&self) -> usize {
        (2 * self.q_max + 1) as usize
    }

    // dv/dt at time t, written into `out`.
    fn rhs(&self, t: f64, v: &[f64], out: &mut [f64]) {
        let (k, gamma) = (self.params.k, self.params.gamma);
        let sigma = self.vol.value_at(t);
        let b = self.drift.value_at(t);
        let c = self.coupling();
        let n = v.len();
        for (i, slot) in out.iter_mut().enumerate() {
            let q = i as f64 - self.q_max as f64;
            let up = if i + 1 < n { v[i + 1] } else { 0.0 };
            let down = if i > 0 { v[i - 1] } else { 0.0 };
            let rate = 0.5 * k * gamma * q * q * sigma * sigma - gamma * q * b;
            *slot = rate * v[i] - c * (up + down);
        }
    }

    pub fn solve_backward(&self) -> Result<OdeSolution> {
        self.validate()?;
        let horizon = self.params.horizon;
        let n = self.n_steps;
        let w = self.width();
        let h = horizon / n as f64;
        let mut values = vec![0.0; (n + 1) * w];
        values[n * w..].iter_mut().for_each(|v| *v = 1.0);

        let mut k1 = vec![0.0; w];
        let mut k2 = vec![0.0; w];
        let mut k3 = vec![0.0; w];
        let mut k4 = vec![0.0; w];
        let mut tmp = vec![0.0; w];
        for i in (0..n).rev() {
            let t = horizon * (i + 1) as f64 / n as f64;
            let (head, tail) = values.split_at_mut((i + 1) * w);
            let v = &tail[..w];
            // Step of -h in time.
            self.rhs(t, v, &mut k1);
            axpy(&mut tmp, v, -0.5 * h, &k1);
            self.rhs(t - 0.5 * h, &tmp, &mut k2);
            axpy(&mut tmp, v, -0.5 * h, &k2);
            self.rhs(t - 0.5 * h, &tmp, &mut k3);
            axpy(&mut tmp, v, -h, &k3);
            self.rhs(t - h, &tmp, &mut k4);
            let next = &mut head[i * w..];
            for j in 0..w {
                let val = v[j] - h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                if !(val > 0.0 && val.is_finite()) {
                    return Err(Error::TruncationTooSmall {
                        q: j as i64 - self.q_max,
                        t: horizon * i as f64 / n as f64,
                    });
                }
                next[j] = val;
            }
        }
        Ok(OdeSolution {
            q_max: self.q_max,
            horizon,
            n_steps: n,
            half_spread: self.params.risk_half_spread(),
            k: self.params.k,
            values,
        })
    }
}

fn axpy(out: &mut [f64], base: &[f64], scale: f64, dir: &[f64]) {
    for ((o, b), d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + scale * d;
    }
}

/// Immutable solution on the uniform grid `t_i = i T / n_steps`.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    q_max: i64,
    horizon: f64,
    n_steps: usize,
    half_spread: f64,
    k: f64,
    values: Vec<f64>,
}

impl OdeSolution {
    pub fn q_max(&self) -> i64 {
        self.q_max
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |i| self.horizon * i as f64 / self.n_steps as f64)
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `v_q(t_i)` for `|q| <= q_max`.
    pub fn value(&self, i: usize, q: i64) -> f64 {
        let w = (2 * self.q_max + 1) as usize;
        self.values[i * w + (q + self.q_max) as usize]
    }

    /// All `v_q(t_i)` for `q = -q_max..=q_max`.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = (2 * self.q_max + 1) as usize;
        &self.values[i * w..(i + 1) * w]
    }

    /// `ln v_q(t)`, linearly interpolated between grid points.
    pub fn log_value(&self, t: f64, q: i64) -> f64 {
        let pos = (t / self.horizon * self.n_steps as f64).clamp(0.0, self.n_steps as f64);
        let i = (pos.floor() as usize).min(self.n_steps - 1);
        let frac = pos - i as f64;
        let lo = self.value(i, q).ln();
        if frac == 0.0 {
            return lo;
        }
        let hi = self.value(i + 1, q).ln();
        lo + frac * (hi - lo)
    }

    /// Quotes from neighbouring `v` ratios; needs both neighbours inside the truncation.
    pub fn quotes(&self, t: f64, s: f64, q: i64) -> Result<QuotePair> {
        if q.abs() >= self.q_max {
            return Err(Error::OutOfTruncation { q, q_max: self.q_max });
        }
        let here = self.log_value(t, q);
        let ask = self.half_spread + (here - self.log_value(t, q - 1)) / self.k;
        let bid = self.half_spread - (self.log_value(t, q + 1) - here) / self.k;
        Ok(QuotePair::from_deltas(s, ask, bid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quotes::Utility;
    use approx::assert_relative_eq;

    fn params(a: f64, k: f64, gamma: f64) -> StrategyParams {
        StrategyParams { a, k, gamma, eta: 0.0, horizon: 1.0, utility: Utility::Exponential }
    }

    #[test]
    fn terminal_row_is_one() {
        let m = MidPriceModel::martingale(0.05, 1.0);
        let sol = OdeSystem::from_model(&m, params(1500.0, 100.0, 1.0), 10, 100)
            .unwrap()
            .solve_backward()
            .unwrap();
        assert!(sol.row(100).iter().all(|&v| v == 1.0));
        let qp = sol.quotes(1.0, 1.0, 3).unwrap();
        assert_relative_eq!(qp.delta_ask, 1.01f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(qp.delta_bid, 1.01f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn coupling_constant() {
        let m = MidPriceModel::martingale(0.05, 1.0);
        let sys = OdeSystem::from_model(&m, params(1500.0, 100.0, 1.0), 10, 100).unwrap();
        let expected = 1500.0 * (-101.0 * 101.0f64.ln()).exp();
        assert!((sys.coupling() / expected - 1.0).abs() < 1e-12);
        let sys = OdeSystem::from_model(&m, params(1.0, 1.0, 1.0), 10, 100).unwrap();
        assert!((sys.coupling() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_volatility_matches_scalar_ode() {
        // With sigma = b = 0 and no boundary effect, every v_q equals exp(2 c (T - t)).
        let m = MidPriceModel::martingale(0.0, 1.0);
        for (a, k, gamma) in [(1.0, 1.0, 1.0), (1500.0, 100.0, 1.0)] {
            let sys = OdeSystem::from_model(&m, params(a, k, gamma), 30, 2000).unwrap();
            let c = sys.coupling();
            let sol = sys.solve_backward().unwrap();
            for (i, t) in sol.grid().enumerate().step_by(100) {
                let exact = (2.0 * c * (1.0 - t)).exp();
                for q in -5..=5 {
                    let rel = (sol.value(i, q) / exact - 1.0).abs();
                    assert!(rel < 1e-8, "q={q} t={t} rel={rel}");
                }
            }
        }
    }

    #[test]
    fn rejects_mean_reverting_models() {
        let m = MidPriceModel::mean_reverting(1.0, 1.0, 0.05, 1.0);
        assert!(matches!(
            OdeSystem::from_model(&m, params(1500.0, 100.0, 1.0), 30, 100),
            Err(Error::HypothesisViolation(_))
        ));
    }

    #[test]
    fn out_of_truncation() {
        let m = MidPriceModel::martingale(0.05, 1.0);
        let sol = OdeSystem::from_model(&m, params(1500.0, 100.0, 1.0), 5, 10)
            .unwrap()
            .solve_backward()
            .unwrap();
        assert!(sol.quotes(0.0, 1.0, 4).is_ok());
        assert!(matches!(sol.quotes(0.0, 1.0, 5), Err(Error::OutOfTruncation { .. })));
        assert!(matches!(sol.quotes(0.0, 1.0, -7), Err(Error::OutOfTruncation { .. })));
    }

    #[test]
    fn invalid_systems() {
        let m = MidPriceModel::martingale(0.05, 1.0);
        assert!(OdeSystem::from_model(&m, params(1500.0, 100.0, 1.0), 0, 100).is_err());
        assert!(OdeSystem::from_model(&m, params(1500.0, 100.0, 1.0), 3, 0).is_err());
        assert!(OdeSystem::from_model(&m, params(1500.0, 100.0, 0.0), 3, 10).is_err());
    }

    #[test]
    fn huge_coupling_reports_loss_of_positivity_or_overflow() {
        let m = MidPriceModel::martingale(0.0, 1.0);
        let sys = OdeSystem::from_model(&m, params(1e80, 1.0, 1.0), 3, 10).unwrap();
        assert!(matches!(sys.solve_backward(), Err(Error::TruncationTooSmall { .. })));
    }

    #[test]
    fn symmetric_without_drift() {
        let m = MidPriceModel::martingale(0.05, 1.0);
        let sol = OdeSystem::from_model(&m, params(1.0, 1.0, 1.0), 20, 500)
            .unwrap()
            .solve_backward()
            .unwrap();
        for i in 0..sol.len() {
            for q in 1..=20 {
                assert!((sol.value(i, q) - sol.value(i, -q)).abs() < 1e-12);
            }
        }
        let qp = sol.quotes(0.3, 1.0, 0).unwrap();
        assert!((qp.delta_ask - qp.delta_bid).abs() < 1e-12);
    }

    #[test]
    fn interpolation_is_linear_in_log() {
        let m = MidPriceModel::martingale(0.05, 1.0);
        let sol = OdeSystem::from_model(&m, params(1.0, 1.0, 1.0), 5, 4)
            .unwrap()
            .solve_backward()
            .unwrap();
        let mid = sol.log_value(0.125, 2);
        let expected = 0.5 * (sol.value(0, 2).ln() + sol.value(1, 2).ln());
        assert!((mid - expected).abs() < 1e-15);
    }
}
