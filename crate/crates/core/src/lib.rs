//! Optimal market-making quotes under inventory risk for Gaussian mid-price
//! models, a Monte Carlo simulator of the resulting strategies, and the
//! statistics used to compare their PNL and inventory distributions.

pub mod error;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod quotes;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use model::{Dynamics, MidPriceModel, PiecewiseConstant};
pub use ode::{OdeSolution, OdeSystem};
pub use quotes::{MarketState, Penalty, QuoteCoefficients, QuotePair, StrategyParams, Utility};
pub use sim::{Belief, FillModel, PathResult, SimConfig, Simulator, Strategy, TrajectoryRow};
pub use stats::{summarize, Histogram, Moments, StatsRecord};
