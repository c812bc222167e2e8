//! Per-stock stages shared by the CLI, tests and benchmarks.
//!
//! Each stage maps over stocks with [`map_ordered`] and keeps the corpus's
//! ticker order, so downstream reductions see the same sequence whatever the
//! parallelism.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dfa::{default_windows, dfa};
use crate::error::{Error, Result};
use crate::ingest::{Corpus, DailySeries};
use crate::intervals::{
    extract_intervals, pool_scaled, shuffle_control, PooledIntervals, StockIntervals,
};
use crate::par::{map_ordered, Parallelism};
use crate::seed::derive_seed;
use crate::volatility::{
    log_returns, normalize_volatility_with, MomentConvention, VolatilitySeries,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    #[default]
    Volume,
    Price,
}

impl SeriesKind {
    pub fn label(self) -> &'static str {
        match self {
            SeriesKind::Volume => "volume",
            SeriesKind::Price => "price",
        }
    }
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One stock's volatility, or why it could not be computed.
#[derive(Debug, Clone, PartialEq)]
pub struct StockVolatility {
    pub ticker: String,
    pub series: std::result::Result<VolatilitySeries, String>,
    /// Steps dropped for a zero on either side.
    pub dropped: usize,
}

pub fn volatility_for(
    s: &DailySeries,
    kind: SeriesKind,
    convention: MomentConvention,
) -> Result<(VolatilitySeries, usize)> {
    let x = match kind {
        SeriesKind::Volume => s.volumes(),
        SeriesKind::Price => s.closes(),
    };
    let r = log_returns(&x)?;
    Ok((normalize_volatility_with(&r, convention)?, r.dropped))
}

pub fn stock_volatilities(
    corpus: &Corpus,
    kind: SeriesKind,
    convention: MomentConvention,
    par: Parallelism,
) -> Vec<StockVolatility> {
    map_ordered(&corpus.stocks, par, |s| {
        match volatility_for(s, kind, convention) {
            Ok((v, dropped)) => StockVolatility {
                ticker: s.ticker.clone(),
                series: Ok(v),
                dropped,
            },
            Err(e) => StockVolatility {
                ticker: s.ticker.clone(),
                series: Err(e.to_string()),
                dropped: 0,
            },
        }
    })
}

/// Shuffled copies; each stock's permutation is seeded from
/// `(seed, ticker)`.
pub fn shuffled(vols: &[StockVolatility], seed: u64, par: Parallelism) -> Vec<StockVolatility> {
    map_ordered(vols, par, |v| StockVolatility {
        ticker: v.ticker.clone(),
        series: v.series.as_ref().map_err(Clone::clone).and_then(|s| {
            shuffle_control(s, derive_seed(seed, &v.ticker)).map_err(|e| e.to_string())
        }),
        dropped: v.dropped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdIntervals {
    pub q: f64,
    /// Stocks with at least one interval, pooled and scaled.
    pub pooled: Option<PooledIntervals>,
    /// Stocks with a volatility series but fewer than two exceedances.
    pub insufficient: Vec<String>,
    /// Stocks whose volatility could not be computed.
    pub failed: Vec<String>,
}

pub fn intervals_at(
    vols: &[StockVolatility],
    q: f64,
    par: Parallelism,
) -> Result<ThresholdIntervals> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "threshold must be positive, got {q}"
        )));
    }
    let extracted = map_ordered(vols, par, |v| match &v.series {
        Ok(s) => Some(extract_intervals(&s.values, q).map(|iv| StockIntervals {
            ticker: v.ticker.clone(),
            intervals: iv,
        })),
        Err(_) => None,
    });
    let mut members = Vec::new();
    let mut insufficient = Vec::new();
    let mut failed = Vec::new();
    for (v, e) in vols.iter().zip(extracted) {
        match e {
            None => failed.push(v.ticker.clone()),
            Some(r) => {
                let si = r?;
                if si.intervals.is_insufficient() {
                    insufficient.push(si.ticker);
                } else {
                    members.push(si);
                }
            }
        }
    }
    let pooled = if members.is_empty() {
        None
    } else {
        Some(pool_scaled(q, members)?)
    };
    Ok(ThresholdIntervals {
        q,
        pooled,
        insufficient,
        failed,
    })
}

/// DFA exponent per stock on its volatility series, default windows.
/// Stocks where DFA is not possible are returned with the reason.
pub fn stock_alphas(
    vols: &[StockVolatility],
    order: usize,
    par: Parallelism,
) -> (BTreeMap<String, f64>, BTreeMap<String, String>) {
    let results = map_ordered(vols, par, |v| {
        let s = v.series.as_ref().map_err(Clone::clone)?;
        default_windows(s.len())
            .and_then(|w| dfa(&s.values, order, &w))
            .map(|c| c.alpha)
            .map_err(|e| e.to_string())
    });
    let mut ok = BTreeMap::new();
    let mut failed = BTreeMap::new();
    for (v, r) in vols.iter().zip(results) {
        match r {
            Ok(a) => {
                ok.insert(v.ticker.clone(), a);
            }
            Err(e) => {
                failed.insert(v.ticker.clone(), e);
            }
        }
    }
    (ok, failed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_corpus, GeneratorKind, IidLaw, StockPlan, SynthOptions};

    fn corpus(n: usize) -> Corpus {
        synth_corpus(
            n,
            |_| StockPlan {
                kind: GeneratorKind::Iid(IidLaw::default()),
                lifetime: 1200,
            },
            &SynthOptions::default(),
            Parallelism::Sequential,
        )
        .unwrap()
        .0
    }

    #[test]
    fn stages_do_not_depend_on_parallelism() {
        let c = corpus(5);
        let a = stock_volatilities(
            &c,
            SeriesKind::Volume,
            MomentConvention::Population,
            Parallelism::Sequential,
        );
        let b = stock_volatilities(
            &c,
            SeriesKind::Volume,
            MomentConvention::Population,
            Parallelism::Threads(4),
        );
        assert_eq!(a, b);
        assert_eq!(
            shuffled(&a, 3, Parallelism::Sequential),
            shuffled(&b, 3, Parallelism::Threads(2))
        );
        let ia = intervals_at(&a, 2.0, Parallelism::Sequential).unwrap();
        let ib = intervals_at(&b, 2.0, Parallelism::Threads(3)).unwrap();
        assert_eq!(ia, ib);
        assert_eq!(ia.pooled.unwrap().stocks.len(), 5);
    }

    #[test]
    fn high_threshold_leaves_stocks_insufficient() {
        let c = corpus(3);
        let v = stock_volatilities(
            &c,
            SeriesKind::Price,
            MomentConvention::Population,
            Parallelism::Sequential,
        );
        let t = intervals_at(&v, 1e6, Parallelism::Sequential).unwrap();
        assert!(t.pooled.is_none());
        assert_eq!(t.insufficient.len(), 3);
        assert!(intervals_at(&v, 0.0, Parallelism::Sequential).is_err());
    }

    #[test]
    fn shuffling_preserves_values() {
        let c = corpus(1);
        let v = stock_volatilities(
            &c,
            SeriesKind::Volume,
            MomentConvention::Population,
            Parallelism::Sequential,
        );
        let s = shuffled(&v, 1, Parallelism::Sequential);
        let mut a = v[0].series.clone().unwrap().values;
        let mut b = s[0].series.clone().unwrap().values;
        assert_ne!(a, b);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }
}
