//! Mid-price diffusions `dS = b(t, S) dt + sigma(t) dW`.
//!
//! Both supported dynamics are Gaussian with an affine conditional mean
//! `E[S(T) | S(t) = s] = alpha(t, T) + beta(t, T) s`, which is all the quote
//! formulas need. Prices are not floored at zero.

use crate::error::{Error, Result};
use crate::quadrature::simpson_to_tolerance;

/// Absolute tolerance used whenever a variance integral has no closed form.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Drift structure of the mid-price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dynamics {
    /// Arithmetic Brownian motion, `b(t, s) = drift`. `drift = 0` is the martingale case.
    Arithmetic { drift: f64 },
    /// Ornstein-Uhlenbeck, `b(t, s) = speed * (mean - s)`.
    MeanReverting { speed: f64, mean: f64 },
}

/// Piecewise-constant function of time.
///
/// `values[0]` applies before `breaks[0]`, `values[i]` on `[breaks[i-1], breaks[i])`
/// and the last value from the last break onwards.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn constant(value: f64) -> Self {
        Self { breaks: Vec::new(), values: vec![value] }
    }

    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::param("schedule", "need exactly one more value than breaks"));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("schedule", "breaks must be strictly increasing"));
        }
        if breaks.iter().chain(values.iter()).any(|x| !x.is_finite()) {
            return Err(Error::param("schedule", "entries must be finite"));
        }
        Ok(Self { breaks, values })
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b <= t);
        self.values[idx]
    }

    pub fn as_constant(&self) -> Option<f64> {
        (self.values.len() == 1).then(|| self.values[0])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Splits `[lo, hi]` at the breaks it contains; on each piece the function is constant.
    pub fn pieces(&self, lo: f64, hi: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        let mut start = lo;
        for (i, &b) in self.breaks.iter().enumerate() {
            if b <= start {
                continue;
            }
            if b >= hi {
                break;
            }
            out.push((start, b, self.values[i]));
            start = b;
        }
        if hi > start || out.is_empty() {
            out.push((start, hi, self.value_at(start)));
        }
        out
    }
}

/// A mid-price model: drift structure, volatility profile, and initial price.
#[derive(Debug, Clone, PartialEq)]
pub struct MidPriceModel {
    pub dynamics: Dynamics,
    pub sigma: PiecewiseConstant,
    pub s0: f64,
}

impl MidPriceModel {
    pub fn arithmetic(drift: f64, sigma: f64, s0: f64) -> Self {
        Self {
            dynamics: Dynamics::Arithmetic { drift },
            sigma: PiecewiseConstant::constant(sigma),
            s0,
        }
    }

    pub fn martingale(sigma: f64, s0: f64) -> Self {
        Self::arithmetic(0.0, sigma, s0)
    }

    pub fn mean_reverting(speed: f64, mean: f64, sigma: f64, s0: f64) -> Self {
        Self {
            dynamics: Dynamics::MeanReverting { speed, mean },
            sigma: PiecewiseConstant::constant(sigma),
            s0,
        }
    }

    pub fn with_sigma_schedule(mut self, schedule: PiecewiseConstant) -> Self {
        self.sigma = schedule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma.values().iter().any(|&v| v < 0.0) {
            return Err(Error::param("sigma", "must be non-negative"));
        }
        if !self.s0.is_finite() {
            return Err(Error::param("s0", "must be finite"));
        }
        match self.dynamics {
            Dynamics::Arithmetic { drift } if !drift.is_finite() => {
                Err(Error::param("b", "must be finite"))
            }
            Dynamics::MeanReverting { speed, .. } if !(speed > 0.0 && speed.is_finite()) => {
                Err(Error::param("a", "mean-reversion speed must be positive"))
            }
            Dynamics::MeanReverting { mean, .. } if !mean.is_finite() => {
                Err(Error::param("mu", "must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_martingale(&self) -> bool {
        matches!(self.dynamics, Dynamics::Arithmetic { drift } if drift == 0.0)
    }

    /// Drift and volatility do not depend on the price level.
    pub fn is_arithmetic(&self) -> bool {
        matches!(self.dynamics, Dynamics::Arithmetic { .. })
    }

    pub fn sigma_at(&self, t: f64) -> f64 {
        self.sigma.value_at(t)
    }

    pub fn drift_at(&self, s: f64) -> f64 {
        match self.dynamics {
            Dynamics::Arithmetic { drift } => drift,
            Dynamics::MeanReverting { speed, mean } => speed * (mean - s),
        }
    }

    /// `(alpha, beta)` with `E[S(T) | S(t) = s] = alpha + beta * s`.
    pub fn affine_coeffs(&self, t: f64, horizon: f64) -> Result<(f64, f64)> {
        let tau = time_to_go(t, horizon)?;
        Ok(self.affine_coeffs_unchecked(tau))
    }

    pub(crate) fn affine_coeffs_unchecked(&self, tau: f64) -> (f64, f64) {
        match self.dynamics {
            Dynamics::Arithmetic { drift } => (drift * tau, 1.0),
            Dynamics::MeanReverting { speed, mean } => {
                let beta = (-speed * tau).exp();
                (mean * (1.0 - beta), beta)
            }
        }
    }

    pub fn conditional_mean(&self, t: f64, s: f64, horizon: f64) -> Result<f64> {
        let (alpha, beta) = self.affine_coeffs(t, horizon)?;
        Ok(alpha + beta * s)
    }

    /// `Var[S(T) | S(t)] = ∫_t^T sigma(u)^2 beta(u, T)^2 du`, exact for piecewise-constant sigma.
    pub fn conditional_variance(&self, t: f64, horizon: f64) -> Result<f64> {
        time_to_go(t, horizon)?;
        Ok(self.variance_weight(t, horizon))
    }

    pub(crate) fn variance_weight(&self, t: f64, horizon: f64) -> f64 {
        if t >= horizon {
            return 0.0;
        }
        self.sigma
            .pieces(t, horizon)
            .into_iter()
            .map(|(lo, hi, sig)| {
                let s2 = sig * sig;
                match self.dynamics {
                    Dynamics::Arithmetic { .. } => s2 * (hi - lo),
                    Dynamics::MeanReverting { speed, .. } => {
                        let two_a = 2.0 * speed;
                        s2 * ((-two_a * (horizon - hi)).exp() - (-two_a * (horizon - lo)).exp())
                            / two_a
                    }
                }
            })
            .sum()
    }

    /// `∫_t^T ∫_z^T sigma(u)^2 beta(u, T)^2 du dz`.
    ///
    /// Closed form for constant sigma, Simpson per constant piece otherwise.
    pub fn integrated_variance_weight(&self, t: f64, horizon: f64) -> Result<f64> {
        let tau = time_to_go(t, horizon)?;
        if let Some(sig) = self.sigma.as_constant() {
            let s2 = sig * sig;
            return Ok(match self.dynamics {
                Dynamics::Arithmetic { .. } => s2 * tau * tau / 2.0,
                Dynamics::MeanReverting { speed, .. } => {
                    let two_a = 2.0 * speed;
                    s2 / two_a * (tau - (-(-two_a * tau).exp_m1()) / two_a)
                }
            });
        }
        let inner = |z: f64| self.variance_weight(z, horizon);
        Ok(self
            .sigma
            .pieces(t, horizon)
            .into_iter()
            .map(|(lo, hi, _)| simpson_to_tolerance(inner, lo, hi, QUADRATURE_TOL))
            .sum())
    }

    /// One Euler-Maruyama step: `s + b(t, s) dt + sigma(t) sqrt(dt) z`.
    pub fn step(&self, t: f64, s: f64, dt: f64, z: f64) -> f64 {
        s + self.drift_at(s) * dt + self.sigma_at(t) * dt.sqrt() * z
    }
}

pub(crate) fn time_to_go(t: f64, horizon: f64) -> Result<f64> {
    if t > horizon || t.is_nan() || horizon.is_nan() {
        return Err(Error::InvalidHorizon { t, horizon });
    }
    Ok(horizon - t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ou() -> MidPriceModel {
        MidPriceModel::mean_reverting(1.0, 0.98, 0.05, 1.0)
    }

    #[test]
    fn martingale_coeffs_are_exact() {
        let m = MidPriceModel::martingale(0.05, 1.0);
        assert_eq!(m.affine_coeffs(0.3, 1.0).unwrap(), (0.0, 1.0));
        assert_eq!(m.conditional_mean(0.0, 1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn ou_coeffs() {
        let (alpha, beta) = ou().affine_coeffs(0.0, 1.0).unwrap();
        assert_relative_eq!(alpha, 0.98 * (1.0 - (-1.0f64).exp()), max_relative = 1e-15);
        assert_relative_eq!(beta, (-1.0f64).exp(), max_relative = 1e-15);
        assert!((alpha - 0.619478).abs() < 1e-6);
        assert!((beta - 0.367879).abs() < 1e-6);
        assert!((ou().conditional_mean(0.0, 1.03, 1.0).unwrap() - 0.998394).abs() < 1e-6);
    }

    #[test]
    fn abm_with_drift() {
        let m = MidPriceModel::arithmetic(0.02, 0.05, 1.0);
        assert_eq!(m.affine_coeffs(0.0, 1.0).unwrap(), (0.02, 1.0));
        assert_relative_eq!(m.conditional_mean(0.0, 1.0, 1.0).unwrap(), 1.02);
        assert_relative_eq!(m.conditional_variance(0.0, 1.0).unwrap(), 0.0025);
    }

    #[test]
    fn variances() {
        assert_eq!(ou().conditional_variance(1.0, 1.0).unwrap(), 0.0);
        let v = ou().conditional_variance(0.0, 1.0).unwrap();
        assert_relative_eq!(v, 0.00125 * (1.0 - (-2.0f64).exp()), max_relative = 1e-14);
        assert!((v - 0.00108083).abs() < 1e-8);
    }

    #[test]
    fn horizon_errors() {
        assert!(matches!(ou().affine_coeffs(1.5, 1.0), Err(Error::InvalidHorizon { .. })));
        assert!(ou().conditional_variance(2.0, 1.0).is_err());
        assert!(ou().integrated_variance_weight(2.0, 1.0).is_err());
    }

    #[test]
    fn euler_steps() {
        let flat = MidPriceModel::martingale(0.0, 1.0);
        assert_eq!(flat.step(0.0, 1.234, 0.001, 0.7), 1.234);
        assert_relative_eq!(ou().step(0.0, 1.0, 0.001, 0.0), 0.99998, max_relative = 1e-14);
        let abm = MidPriceModel::arithmetic(0.02, 0.05, 1.0);
        let s = abm.step(0.0, 1.0, 0.001, 1.0);
        assert_relative_eq!(s, 1.0 + 0.00002 + 0.05 * 0.001f64.sqrt(), max_relative = 1e-15);
        assert!((s - 1.0016011).abs() < 1e-7);
    }

    #[test]
    fn validation() {
        assert!(MidPriceModel::mean_reverting(0.0, 1.0, 0.05, 1.0).validate().is_err());
        assert!(MidPriceModel::martingale(-0.1, 1.0).validate().is_err());
        assert!(ou().validate().is_ok());
    }

    #[test]
    fn schedule_lookup_and_pieces() {
        let p = PiecewiseConstant::new(vec![0.25, 0.5], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.value_at(0.0), 1.0);
        assert_eq!(p.value_at(0.25), 2.0);
        assert_eq!(p.value_at(0.9), 3.0);
        assert_eq!(p.pieces(0.1, 1.0), vec![(0.1, 0.25, 1.0), (0.25, 0.5, 2.0), (0.5, 1.0, 3.0)]);
        assert_eq!(p.pieces(0.3, 0.4), vec![(0.3, 0.4, 2.0)]);
        assert!(PiecewiseConstant::new(vec![0.5, 0.25], vec![1.0, 2.0, 3.0]).is_err());
        assert!(PiecewiseConstant::new(vec![0.5], vec![1.0]).is_err());
    }

    #[test]
    fn schedule_matches_constant_when_flat() {
        let flat = PiecewiseConstant::new(vec![0.3, 0.6], vec![0.05; 3]).unwrap();
        for base in [ou(), MidPriceModel::arithmetic(0.01, 0.05, 1.0)] {
            let piecewise = base.clone().with_sigma_schedule(flat.clone());
            for t in [0.0, 0.2, 0.45, 0.9] {
                assert_relative_eq!(
                    base.conditional_variance(t, 1.0).unwrap(),
                    piecewise.conditional_variance(t, 1.0).unwrap(),
                    max_relative = 1e-12
                );
                let a = base.integrated_variance_weight(t, 1.0).unwrap();
                let b = piecewise.integrated_variance_weight(t, 1.0).unwrap();
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    proptest! {
        #[test]
        fn ou_beta_increases_toward_one(speed in 0.01f64..5.0, t1 in 0.0f64..1.0, dt in 1e-3f64..0.5) {
            let m = MidPriceModel::mean_reverting(speed, 1.0, 0.05, 1.0);
            let t2 = (t1 + dt).min(1.0);
            let (_, b1) = m.affine_coeffs(t1, 1.0).unwrap();
            let (_, b2) = m.affine_coeffs(t2, 1.0).unwrap();
            prop_assert!(b1 > 0.0 && b1 <= 1.0);
            prop_assert!(t2 == t1 || b2 > b1);
            prop_assert_eq!(m.affine_coeffs(1.0, 1.0).unwrap(), (0.0, 1.0));
        }

        #[test]
        fn zero_noise_step_is_drift_step(s in -2.0f64..3.0, sigma in 0.0f64..1.0, dt in 1e-4f64..0.1) {
            let m = MidPriceModel::mean_reverting(1.5, 0.98, sigma, 1.0);
            prop_assert_eq!(m.step(0.0, s, dt, 0.0), s + 1.5 * (0.98 - s) * dt);
        }
    }
}
