//! One-day market-making simulation and Monte Carlo ensembles.
//!
//! Each step of length `T / n_steps` runs quote -> fills -> price move. A side
//! quoted at a positive distance receives a Poisson number of unit fills with
//! mean `A e^{-k delta} dt` (or, under [`FillModel::Bernoulli`], at most one
//! fill with probability `1 - exp(-A e^{-k delta} dt)`); either way the side
//! trades at least once with probability `1 - exp(-A e^{-k delta} dt)`. A side
//! quoted at a non-positive distance instead trades one unit at the mid-price.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::MidPriceModel;
use crate::ode::{OdeSolution, OdeSystem, DEFAULT_Q_MAX, DEFAULT_STEPS};
use crate::quotes::{
    self, MarketState, Penalty, QuoteCoefficients, QuotePair, StrategyParams, Utility,
};
use crate::rng::{Channel, CounterRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Linear,
    LinearPenalty,
    GeneralPenalty(Penalty),
    Exponential,
    /// Exponential utility quoted from the truncated inventory ODE.
    OdeExponential,
}

impl Strategy {
    pub fn utility(self) -> Utility {
        match self {
            Strategy::Linear => Utility::Linear,
            Strategy::LinearPenalty => Utility::LinearPenalty,
            Strategy::GeneralPenalty(pi) => Utility::GeneralPenalty(pi),
            Strategy::Exponential | Strategy::OdeExponential => Utility::Exponential,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Linear => "linear",
            Strategy::LinearPenalty => "linear_penalty",
            Strategy::GeneralPenalty(_) => "general_penalty",
            Strategy::Exponential => "exponential",
            Strategy::OdeExponential => "ode_exponential",
        }
    }
}

/// Which price model the strategy uses when computing its quotes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Belief {
    /// The simulated model itself (directional bets allowed).
    #[default]
    Model,
    /// A driftless arithmetic model with the simulated volatility.
    Martingale,
}

impl Belief {
    pub fn name(self) -> &'static str {
        match self {
            Belief::Model => "model",
            Belief::Martingale => "martingale",
        }
    }

    pub fn quoting_model(self, simulated: &MidPriceModel) -> MidPriceModel {
        match self {
            Belief::Model => simulated.clone(),
            Belief::Martingale => MidPriceModel {
                dynamics: crate::model::Dynamics::Arithmetic { drift: 0.0 },
                ..simulated.clone()
            },
        }
    }
}

/// Largest `A dt` accepted with Poisson fills; beyond it the step is too
/// coarse for the order flow and CDF inversion would underflow.
pub const MAX_FILL_MEAN: f64 = 50.0;

/// How many limit-order executions one side receives in one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillModel {
    /// Poisson count with mean `lambda dt`: the arrivals of a Poisson process
    /// over a step with frozen quotes.
    #[default]
    Poisson,
    /// At most one fill, with probability `1 - exp(-lambda dt)`.
    Bernoulli,
}

impl FillModel {
    pub fn name(self) -> &'static str {
        match self {
            FillModel::Poisson => "poisson",
            FillModel::Bernoulli => "bernoulli",
        }
    }

    /// Fill count from one uniform `u` in `[0, 1)`.
    ///
    /// Both models fill at least once exactly when `u < 1 - exp(-mean)`, so
    /// they agree on which steps trade under common random numbers.
    pub fn count(self, mean: f64, u: f64) -> u32 {
        if u >= -(-mean).exp_m1() {
            return 0;
        }
        match self {
            FillModel::Bernoulli => 1,
            FillModel::Poisson => {
                // Invert the CDF at 1 - u; stop once the remaining mass is negligible.
                let target = 1.0 - u;
                let none = (-mean).exp();
                let (mut n, mut pmf, mut cdf) = (0u32, none, none);
                while target >= cdf && pmf > f64::EPSILON * cdf {
                    n += 1;
                    pmf *= mean / f64::from(n);
                    cdf += pmf;
                }
                n.max(1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: MidPriceModel,
    pub belief: Belief,
    pub params: StrategyParams,
    pub strategy: Strategy,
    pub fill_model: FillModel,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub q0: i64,
    pub x0: f64,
    pub ode_q_max: i64,
    pub ode_steps: usize,
}

impl SimConfig {
    /// Config with the default grid (1000 steps), 20 000 paths and a flat start.
    pub fn new(
        model: MidPriceModel,
        params: StrategyParams,
        strategy: Strategy,
        seed: u64,
    ) -> Self {
        Self {
            model,
            belief: Belief::Model,
            params: StrategyParams { utility: strategy.utility(), ..params },
            strategy,
            fill_model: FillModel::Poisson,
            n_steps: 1000,
            n_paths: 20_000,
            seed,
            q0: 0,
            x0: 0.0,
            ode_q_max: DEFAULT_Q_MAX,
            ode_steps: DEFAULT_STEPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 1 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        if self.n_steps > u32::MAX as usize {
            return Err(Error::param("n_steps", "too many steps for the counter generator"));
        }
        if self.n_paths < 1 {
            return Err(Error::param("n_paths", "must be at least 1"));
        }
        if self.params.utility != self.strategy.utility() {
            return Err(Error::param("strategy", "utility does not match the strategy"));
        }
        if !self.x0.is_finite() {
            return Err(Error::param("x0", "must be finite"));
        }
        let peak_mean = self.params.a * self.params.horizon / self.n_steps as f64;
        if self.fill_model == FillModel::Poisson && peak_mean > MAX_FILL_MEAN {
            return Err(Error::param(
                "n_steps",
                format!("A dt = {peak_mean} exceeds {MAX_FILL_MEAN}; refine the time grid"),
            ));
        }
        self.model.validate()?;
        self.params.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub s: f64,
    pub delta_ask: f64,
    pub delta_bid: f64,
    pub q: i64,
    pub x: f64,
}

impl TrajectoryRow {
    pub fn pnl(&self) -> f64 {
        self.x + self.q as f64 * self.s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub pnl_final: f64,
    pub q_final: i64,
    pub x_final: f64,
    pub s_final: f64,
    pub limit_fills: u32,
    pub market_orders: u32,
    pub trajectory: Option<Vec<TrajectoryRow>>,
}

enum Quoter {
    /// Coefficients at every grid time `t_i`, `i = 0..=n_steps`.
    ClosedForm {
        model: MidPriceModel,
        grid: Vec<QuoteCoefficients>,
    },
    Ode(Arc<OdeSolution>),
}

/// A validated configuration, ready to simulate.
pub struct Simulator {
    config: SimConfig,
    quoter: Quoter,
    rng: CounterRng,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let quoting = config.belief.quoting_model(&config.model);
        let quoter = if config.strategy == Strategy::OdeExponential {
            let system =
                OdeSystem::from_model(&quoting, config.params, config.ode_q_max, config.ode_steps)?;
            Quoter::Ode(Arc::new(system.solve_backward()?))
        } else {
            let n = config.n_steps;
            let horizon = config.params.horizon;
            let grid = (0..=n)
                .map(|i| QuoteCoefficients::at(&quoting, &config.params, grid_time(horizon, i, n)))
                .collect::<Result<Vec<_>>>()?;
            Quoter::ClosedForm { model: quoting, grid }
        };
        let rng = CounterRng::new(config.seed);
        Ok(Self { config, quoter, rng })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Quotes at a grid state. The ODE quoter clamps inventory into its truncation.
    pub fn quote(&self, t: f64, s: f64, q: i64) -> QuotePair {
        match &self.quoter {
            Quoter::ClosedForm { model, .. } => {
                let state = MarketState { t, s, q, x: 0.0 };
                quotes::quotes(model, &self.config.params, &state)
                    .expect("validated model and t within the horizon")
            }
            Quoter::Ode(sol) => Self::ode_quote(sol, t, s, q),
        }
    }

    fn ode_quote(sol: &OdeSolution, t: f64, s: f64, q: i64) -> QuotePair {
        let edge = sol.q_max() - 1;
        sol.quotes(t, s, q.clamp(-edge, edge)).expect("inventory clamped into truncation")
    }

    /// Same as [`Simulator::quote`] at `t_i`, from the precomputed grid.
    fn quote_at_step(&self, i: usize, s: f64, q: i64) -> QuotePair {
        match &self.quoter {
            Quoter::ClosedForm { grid, .. } => grid[i].quotes(&self.config.params, s, q),
            Quoter::Ode(sol) => Self::ode_quote(
                sol,
                grid_time(self.config.params.horizon, i, self.config.n_steps),
                s,
                q,
            ),
        }
    }

    pub fn simulate_path(&self, path: u64, record: bool) -> PathResult {
        let cfg = &self.config;
        let n = cfg.n_steps;
        let horizon = cfg.params.horizon;
        let dt = horizon / n as f64;
        let (mut s, mut q, mut x) = (cfg.model.s0, cfg.q0, cfg.x0);
        let mut limit_fills = 0;
        let mut market_orders = 0;
        let mut rows = record.then(|| Vec::with_capacity(n + 1));

        for i in 0..n {
            let step = i as u32;
            let t = grid_time(horizon, i, n);
            let qp = self.quote_at_step(i, s, q);
            if let Some(rows) = rows.as_mut() {
                rows.push(TrajectoryRow {
                    t,
                    s,
                    delta_ask: qp.delta_ask,
                    delta_bid: qp.delta_bid,
                    q,
                    x,
                });
            }

            let fills_at = |delta: f64, channel| {
                if delta > 0.0 {
                    let mean = cfg.params.intensity(delta) * dt;
                    cfg.fill_model.count(mean, self.rng.uniform(path, step, channel))
                } else {
                    0
                }
            };
            let ask = fills_at(qp.delta_ask, Channel::AskFill);
            let bid = fills_at(qp.delta_bid, Channel::BidFill);
            let fills = settle(s, &qp, ask, bid);
            q += fills.dq;
            x += fills.dx;
            limit_fills += fills.limit_fills;
            market_orders += fills.market_orders;

            let z = self.rng.normal(path, step, Channel::PriceNoise);
            s = cfg.model.step(t, s, dt, z);
        }

        if let Some(rows) = rows.as_mut() {
            let qp = self.quote_at_step(n, s, q);
            rows.push(TrajectoryRow {
                t: horizon,
                s,
                delta_ask: qp.delta_ask,
                delta_bid: qp.delta_bid,
                q,
                x,
            });
        }

        PathResult {
            pnl_final: x + q as f64 * s,
            q_final: q,
            x_final: x,
            s_final: s,
            limit_fills,
            market_orders,
            trajectory: rows,
        }
    }

    /// All `n_paths` paths in index order. `threads = None` uses the global pool.
    pub fn run_monte_carlo(&self, threads: Option<usize>) -> Result<Vec<PathResult>> {
        let run = || {
            (0..self.config.n_paths as u64)
                .into_par_iter()
                .map(|p| self.simulate_path(p, false))
                .collect::<Vec<_>>()
        };
        match threads {
            None => Ok(run()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::param("threads", e.to_string()))?;
                Ok(pool.install(run))
            }
        }
    }
}

/// Inventory and cash changes of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepFills {
    pub dq: i64,
    pub dx: f64,
    pub limit_fills: u32,
    pub market_orders: u32,
}

/// Applies one step's executions at mid-price `s`.
///
/// A side with a positive distance trades its fill count at the quote
/// (`x += s + delta_ask` per ask fill, `x -= s - delta_bid` per bid fill). A
/// side with a non-positive distance trades one unit at `s` and ignores its count.
pub fn settle(s: f64, qp: &QuotePair, ask_fills: u32, bid_fills: u32) -> StepFills {
    let mut out = StepFills { dq: 0, dx: 0.0, limit_fills: 0, market_orders: 0 };
    if qp.delta_ask > 0.0 {
        if ask_fills > 0 {
            out.dq -= i64::from(ask_fills);
            out.dx += f64::from(ask_fills) * (s + qp.delta_ask);
            out.limit_fills += ask_fills;
        }
    } else {
        out.dq -= 1;
        out.dx += s;
        out.market_orders += 1;
    }
    if qp.delta_bid > 0.0 {
        if bid_fills > 0 {
            out.dq += i64::from(bid_fills);
            out.dx -= f64::from(bid_fills) * (s - qp.delta_bid);
            out.limit_fills += bid_fills;
        }
    } else {
        out.dq += 1;
        out.dx -= s;
        out.market_orders += 1;
    }
    out
}

fn grid_time(horizon: f64, i: usize, n: usize) -> f64 {
    horizon * i as f64 / n as f64
}

/// Probability that a limit order at distance `delta` fills at least once within `dt`.
pub fn fill_probability(params: &StrategyParams, delta: f64, dt: f64) -> f64 {
    -(-params.intensity(delta) * dt).exp_m1()
}

/// Convenience wrapper: build a simulator and run the full ensemble.
pub fn run_monte_carlo(config: &SimConfig, threads: Option<usize>) -> Result<Vec<PathResult>> {
    Simulator::new(config.clone())?.run_monte_carlo(threads)
}
