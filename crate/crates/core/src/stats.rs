//! Summary statistics for PNL and terminal-inventory ensembles.
//!
//! Conventions: sample standard deviation (n - 1), skewness and non-excess
//! kurtosis from population central moments, Jarque-Bera from excess kurtosis,
//! nearest-rank quantiles. Undefined fields (zero dispersion) are `None`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub jarque_bera: Option<f64>,
}

impl Moments {
    pub fn of(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::InsufficientSample { needed: 2, got: n });
        }
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &x in samples {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let std_dev = (m2 / (nf - 1.0)).sqrt();
        let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
        let (skewness, kurtosis, jarque_bera) = if m2 > 0.0 {
            let skew = m3 / m2.powf(1.5);
            let kurt = m4 / (m2 * m2);
            (Some(skew), Some(kurt), Some(jarque_bera(nf, skew, kurt)))
        } else {
            (None, None, None)
        };
        Ok(Self { mean, std_dev, skewness, kurtosis, jarque_bera })
    }
}

/// `(n/6) (S^2 + (K - 3)^2 / 4)` with non-excess kurtosis `K`.
pub fn jarque_bera(n: f64, skewness: f64, kurtosis: f64) -> f64 {
    let excess = kurtosis - 3.0;
    n / 6.0 * (skewness * skewness + excess * excess / 4.0)
}

/// Nearest-rank quantile: the `ceil(p n)`-th order statistic.
pub fn quantile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientSample { needed: 1, got: 0 });
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param("p", "quantile level must lie in (0, 1)"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, p))
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let exact = p * n as f64;
    // Absorb representation error so that e.g. 0.05 * 100 ranks as 5.
    let rank = (exact - exact * 4.0 * f64::EPSILON).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

/// One row of a statistics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRecord {
    pub n: usize,
    pub pnl: Moments,
    /// `mean / std_dev`.
    pub sharpe: Option<f64>,
    pub var5: f64,
    pub var1: f64,
    pub inventory: Moments,
    /// 5th and 95th percentiles of terminal inventory.
    pub q_interval_90: (i64, i64),
}

/// Statistics of final PNL and terminal inventory over an ensemble.
pub fn summarize(pnl: &[f64], inventory: &[i64]) -> Result<StatsRecord> {
    if pnl.len() != inventory.len() {
        return Err(Error::param("inventory", "must have one entry per PNL sample"));
    }
    let moments = Moments::of(pnl)?;
    let inv: Vec<f64> = inventory.iter().map(|&q| q as f64).collect();
    let inv_moments = Moments::of(&inv)?;

    let mut sorted = pnl.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sorted_inv = inv;
    sorted_inv.sort_by(f64::total_cmp);

    let sharpe = (moments.std_dev > 0.0).then(|| moments.mean / moments.std_dev);
    Ok(StatsRecord {
        n: pnl.len(),
        pnl: moments,
        sharpe,
        var5: quantile_sorted(&sorted, 0.05),
        var1: quantile_sorted(&sorted, 0.01),
        inventory: inv_moments,
        q_interval_90: (
            quantile_sorted(&sorted_inv, 0.05).round() as i64,
            quantile_sorted(&sorted_inv, 0.95).round() as i64,
        ),
    })
}

/// Equal-width histogram over `[lo, hi]`; `hi` itself falls in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + i as f64 * width, self.lo + (i + 1) as f64 * width)
    }

    /// `(bin_left, bin_right, count)` triples.
    pub fn triples(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.counts.iter().enumerate().map(|(i, &c)| {
            let (l, r) = self.bin_edges(i);
            (l, r, c)
        })
    }
}

pub fn histogram(samples: &[f64], n_bins: usize, range: (f64, f64)) -> Result<Histogram> {
    let (lo, hi) = range;
    if n_bins == 0 {
        return Err(Error::param("n_bins", "must be at least 1"));
    }
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return Err(Error::DegenerateRange { lo, hi });
    }
    let mut h = Histogram { lo, hi, counts: vec![0; n_bins], underflow: 0, overflow: 0 };
    let scale = n_bins as f64 / (hi - lo);
    for &x in samples {
        if x < lo {
            h.underflow += 1;
        } else if x > hi {
            h.overflow += 1;
        } else {
            let idx = (((x - lo) * scale) as usize).min(n_bins - 1);
            h.counts[idx] += 1;
        }
    }
    Ok(h)
}
