//! Threshold exceedance intervals, per-stock scaling and shuffled controls.
//!
//! An exceedance is a day with `nu(t) > q` (strict). Intervals are the
//! differences between successive exceedance days; the stretch before the
//! first exceedance and after the last one is censored and not used.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::fitting::Cell;
use crate::seed::rng_for;
use crate::volatility::VolatilitySeries;

pub const DEFAULT_THRESHOLDS: [f64; 5] = [2.0, 2.5, 3.0, 3.5, 4.0];

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSeries {
    pub q: f64,
    pub taus: Vec<u32>,
    /// Arithmetic mean of `taus`; zero when there are none.
    pub mean_tau: f64,
    pub exceedances: usize,
    pub first_exceedance: Option<usize>,
}

impl IntervalSeries {
    /// Fewer than two exceedances: no interval could be formed.
    pub fn is_insufficient(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn scaled(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.mean_tau;
        self.taus.iter().map(move |&t| f64::from(t) / m)
    }

    /// Each interval as the scaled day cell `[(tau - 1/2) / m, (tau + 1/2) / m]`.
    pub fn scaled_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let m = self.mean_tau;
        self.taus
            .iter()
            .map(move |&t| Cell::around(f64::from(t) / m, 1.0 / m))
    }

    pub fn raw_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.taus.iter().map(|&t| Cell::around(f64::from(t), 1.0))
    }
}

pub fn extract_intervals(v: &[f64], q: f64) -> Result<IntervalSeries> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "threshold must be positive, got {q}"
        )));
    }
    let mut taus = Vec::new();
    let mut last: Option<usize> = None;
    let mut first = None;
    let mut exceedances = 0;
    for (t, &x) in v.iter().enumerate() {
        if x > q {
            exceedances += 1;
            match last {
                Some(prev) => taus.push((t - prev) as u32),
                None => first = Some(t),
            }
            last = Some(t);
        }
    }
    let mean_tau = if taus.is_empty() {
        0.0
    } else {
        taus.iter().map(|&t| f64::from(t)).sum::<f64>() / taus.len() as f64
    };
    Ok(IntervalSeries {
        q,
        taus,
        mean_tau,
        exceedances,
        first_exceedance: first,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StockIntervals {
    pub ticker: String,
    pub intervals: IntervalSeries,
}

/// One pooled interval, scaled by its own stock's mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledEntry<'a> {
    pub ticker: &'a str,
    pub position: usize,
    pub tau: u32,
    pub scaled: f64,
}

/// Intervals of many stocks at one threshold, each scaled by its own mean.
/// Members are kept in ticker order and in time order within a stock.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledIntervals {
    pub q: f64,
    pub stocks: Vec<StockIntervals>,
}

impl PooledIntervals {
    pub fn len(&self) -> usize {
        self.stocks.iter().map(|s| s.intervals.taus.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> impl Iterator<Item = ScaledEntry<'_>> {
        self.stocks.iter().flat_map(|s| {
            let m = s.intervals.mean_tau;
            s.intervals
                .taus
                .iter()
                .enumerate()
                .map(move |(position, &tau)| ScaledEntry {
                    ticker: &s.ticker,
                    position,
                    tau,
                    scaled: f64::from(tau) / m,
                })
        })
    }

    pub fn scaled_values(&self) -> Vec<f64> {
        self.entries().map(|e| e.scaled).collect()
    }

    pub fn raw_values(&self) -> Vec<f64> {
        self.entries().map(|e| f64::from(e.tau)).collect()
    }

    pub fn scaled_cells(&self) -> Vec<Cell> {
        self.stocks
            .iter()
            .flat_map(|s| s.intervals.scaled_cells())
            .collect()
    }

    pub fn raw_cells(&self) -> Vec<Cell> {
        self.stocks
            .iter()
            .flat_map(|s| s.intervals.raw_cells())
            .collect()
    }

    pub fn per_stock_means(&self) -> BTreeMap<&str, f64> {
        self.stocks
            .iter()
            .map(|s| (s.ticker.as_str(), s.intervals.mean_tau))
            .collect()
    }
}

/// Pools per-stock intervals at threshold `q`. Every member must carry at
/// least one interval at that threshold.
pub fn pool_scaled(q: f64, mut members: Vec<StockIntervals>) -> Result<PooledIntervals> {
    for m in &members {
        if m.intervals.is_insufficient() {
            return Err(Error::InvalidInput(format!(
                "{} has no intervals at q={}",
                m.ticker, m.intervals.q
            )));
        }
        if m.intervals.q != q {
            return Err(Error::InvalidInput(format!(
                "{} was extracted at q={}, pooling at q={q}",
                m.ticker, m.intervals.q
            )));
        }
    }
    members.sort_by(|a, b| a.ticker.cmp(&b.ticker));
    Ok(PooledIntervals { q, stocks: members })
}

/// Uniform random permutation of the volatility values (Fisher-Yates on a
/// ChaCha8 stream seeded from `seed`).
pub fn shuffle_control(v: &VolatilitySeries, seed: u64) -> Result<VolatilitySeries> {
    if v.is_empty() {
        return Err(Error::InvalidInput("cannot shuffle an empty series".into()));
    }
    let mut values = v.values.clone();
    values.shuffle(&mut rng_for(seed, "shuffle"));
    Ok(VolatilitySeries {
        values,
        norm_std: v.norm_std,
    })
}
