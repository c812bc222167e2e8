//! Financial factors, stock binning, per-bin tail exponents and cross-factor
//! correlations.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{fit_power_tail_in, log_bin_cells, FitWindow, TailFit};
use crate::ingest::{series_stats, Corpus};
use crate::intervals::IntervalSeries;
use crate::par::{map_ordered, Parallelism};
use crate::stats::pearson;

pub const DEFAULT_FACTOR_Q: f64 = 2.0;
pub const LIFETIME_SWEEP: (f64, f64) = (508.0, 5080.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Lifetime,
    Capitalization,
    Volume,
    TradingValue,
}

impl Factor {
    pub const ALL: [Factor; 4] = [
        Factor::Lifetime,
        Factor::Capitalization,
        Factor::Volume,
        Factor::TradingValue,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Factor::Lifetime => "lifetime",
            Factor::Capitalization => "capitalization",
            Factor::Volume => "volume",
            Factor::TradingValue => "trading_value",
        }
    }

    /// Size factors span decades; lifetime does not.
    pub fn is_size(self) -> bool {
        !matches!(self, Factor::Lifetime)
    }

    pub fn default_bins(self) -> usize {
        match self {
            Factor::Lifetime => 10,
            Factor::Capitalization => 8,
            Factor::Volume => 11,
            Factor::TradingValue => 9,
        }
    }

    pub fn default_scale(self) -> EdgeScale {
        if self.is_size() {
            EdgeScale::Geometric
        } else {
            EdgeScale::Linear
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Factor::ALL
            .into_iter()
            .find(|f| f.label() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown factor {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorVector {
    pub ticker: String,
    pub lifetime: usize,
    pub mean_capitalization: Option<f64>,
    pub mean_volume: f64,
    pub mean_trading_value: f64,
}

impl FactorVector {
    /// The factor's value, or `None` when undefined (absent capitalization or
    /// a non-positive size).
    pub fn value(&self, f: Factor) -> Option<f64> {
        let v = match f {
            Factor::Lifetime => Some(self.lifetime as f64),
            Factor::Capitalization => self.mean_capitalization,
            Factor::Volume => Some(self.mean_volume),
            Factor::TradingValue => Some(self.mean_trading_value),
        }?;
        (v > 0.0 && v.is_finite()).then_some(v)
    }
}

pub fn compute_factors(corpus: &Corpus, par: Parallelism) -> Result<Vec<FactorVector>> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("corpus has no stocks".into()));
    }
    map_ordered(&corpus.stocks, par, |s| {
        let st = series_stats(s)?;
        Ok(FactorVector {
            ticker: s.ticker.clone(),
            lifetime: st.lifetime,
            mean_capitalization: st.mean_capitalization,
            mean_volume: st.mean_volume,
            mean_trading_value: st.mean_trading_value,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeScale {
    Linear,
    Geometric,
}

/// `n + 1` equally spaced values from `lo` to `hi`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            if i == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / n as f64
            }
        })
        .collect()
}

/// Edges of the standard lifetime sweep, 508 to 5080 days.
pub fn lifetime_sweep_edges(n_bins: usize) -> Vec<f64> {
    linspace(LIFETIME_SWEEP.0, LIFETIME_SWEEP.1, n_bins)
}

/// `n_bins` bins covering `[min, max]` of `values`. The top edge is nudged
/// past the maximum so the largest value falls inside the last half-open bin.
pub fn edges_spanning(values: &[f64], n_bins: usize, scale: EdgeScale) -> Result<Vec<f64>> {
    if n_bins == 0 {
        return Err(Error::InvalidInput("need at least one bin".into()));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if values.is_empty() || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Insufficient(
            "no defined factor values to bin".into(),
        ));
    }
    if lo == hi {
        return Ok(vec![lo, lo.next_up()]);
    }
    let mut edges = match scale {
        EdgeScale::Linear => linspace(lo, hi, n_bins),
        EdgeScale::Geometric => {
            if lo <= 0.0 {
                return Err(Error::InvalidInput(
                    "geometric edges need positive values".into(),
                ));
            }
            linspace(lo.ln(), hi.ln(), n_bins)
                .into_iter()
                .map(f64::exp)
                .collect()
        }
    };
    edges[0] = lo;
    edges[n_bins] = hi.next_up();
    Ok(edges)
}

/// Default edges for `factor` over the observed values.
pub fn default_edges(factors: &[FactorVector], factor: Factor) -> Result<Vec<f64>> {
    let vals: Vec<f64> = factors.iter().filter_map(|f| f.value(factor)).collect();
    edges_spanning(&vals, factor.default_bins(), factor.default_scale())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorBinning {
    pub factor: Factor,
    pub edges: Vec<f64>,
    /// Tickers per bin `[edges[i], edges[i + 1])`, in input order.
    pub members: Vec<Vec<String>>,
    /// Defined value outside every bin.
    pub unbinned: Vec<String>,
    /// Factor undefined for the stock.
    pub undefined: Vec<String>,
}

impl FactorBinning {
    pub fn n_bins(&self) -> usize {
        self.members.len()
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        (self.edges[i], self.edges[i + 1])
    }
}

pub fn bin_stocks(
    factors: &[FactorVector],
    factor: Factor,
    edges: &[f64],
) -> Result<FactorBinning> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(
            "bin edges must be strictly increasing".into(),
        ));
    }
    let mut b = FactorBinning {
        factor,
        edges: edges.to_vec(),
        members: vec![Vec::new(); edges.len() - 1],
        unbinned: Vec::new(),
        undefined: Vec::new(),
    };
    for f in factors {
        let Some(v) = f.value(factor) else {
            b.undefined.push(f.ticker.clone());
            continue;
        };
        let i = edges.partition_point(|&e| e <= v);
        if i == 0 || i == edges.len() {
            b.unbinned.push(f.ticker.clone());
        } else {
            b.members[i - 1].push(f.ticker.clone());
        }
    }
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaBin {
    pub lower: f64,
    pub upper: f64,
    pub stock_count: usize,
    /// Member stocks with at least one interval at this threshold.
    pub contributing: usize,
    pub interval_count: usize,
    pub fit: Option<TailFit>,
    /// Why `fit` is absent.
    pub note: Option<String>,
}

/// Per bin: pool the members' scaled intervals, log-bin them and fit the
/// power-law tail.
pub fn gamma_by_factor(
    intervals: &BTreeMap<String, IntervalSeries>,
    binning: &FactorBinning,
    bins_per_decade: usize,
    window: &FitWindow,
) -> Vec<GammaBin> {
    (0..binning.n_bins())
        .map(|i| {
            let (lower, upper) = binning.bounds(i);
            let members = &binning.members[i];
            let usable: Vec<&IntervalSeries> = members
                .iter()
                .filter_map(|t| intervals.get(t))
                .filter(|iv| !iv.is_insufficient())
                .collect();
            let cells: Vec<_> = usable.iter().flat_map(|iv| iv.scaled_cells()).collect();
            let fitted = if cells.is_empty() {
                Err(Error::Insufficient("no intervals in bin".into()))
            } else {
                log_bin_cells(&cells, bins_per_decade)
                    .and_then(|pdf| fit_power_tail_in(&pdf, window))
            };
            GammaBin {
                lower,
                upper,
                stock_count: members.len(),
                contributing: usable.len(),
                interval_count: cells.len(),
                note: fitted.as_ref().err().map(|e| e.to_string()),
                fit: fitted.ok(),
            }
        })
        .collect()
}

/// Pairwise Pearson coefficients over stocks with every factor defined.
/// `log_space` uses `ln` of the size factors and raw lifetime; `raw` uses raw
/// values throughout. `None` marks a zero-variance factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub factors: Vec<Factor>,
    pub n_stocks: usize,
    pub log_space: Vec<Vec<Option<f64>>>,
    pub raw: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: Factor, b: Factor, log_space: bool) -> Option<f64> {
        let i = self.factors.iter().position(|&f| f == a)?;
        let j = self.factors.iter().position(|&f| f == b)?;
        if log_space {
            self.log_space[i][j]
        } else {
            self.raw[i][j]
        }
    }
}

pub fn factor_correlations(factors: &[FactorVector]) -> Result<CorrelationMatrix> {
    let complete: Vec<[f64; 4]> = factors
        .iter()
        .filter_map(|f| {
            Some([
                f.value(Factor::ALL[0])?,
                f.value(Factor::ALL[1])?,
                f.value(Factor::ALL[2])?,
                f.value(Factor::ALL[3])?,
            ])
        })
        .collect();
    if complete.len() < 3 {
        return Err(Error::Insufficient(format!(
            "{} stocks with every factor defined (need 3)",
            complete.len()
        )));
    }
    let column = |k: usize, log: bool| -> Vec<f64> {
        complete
            .iter()
            .map(|row| {
                if log && Factor::ALL[k].is_size() {
                    row[k].ln()
                } else {
                    row[k]
                }
            })
            .collect()
    };
    let matrix = |log: bool| -> Vec<Vec<Option<f64>>> {
        let cols: Vec<Vec<f64>> = (0..4).map(|k| column(k, log)).collect();
        let defined: Vec<bool> = cols.iter().map(|c| pearson(c, c).is_some()).collect();
        (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| match (i == j, defined[i] && defined[j]) {
                        (_, false) => None,
                        (true, true) => Some(1.0),
                        (false, true) => pearson(&cols[i.min(j)], &cols[i.max(j)]),
                    })
                    .collect()
            })
            .collect()
    };
    Ok(CorrelationMatrix {
        factors: Factor::ALL.to_vec(),
        n_stocks: complete.len(),
        log_space: matrix(true),
        raw: matrix(false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::DEFAULT_BINS_PER_DECADE;
    use crate::ingest::{DailyRecord, DailySeries};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn fv(ticker: &str, lifetime: usize, cap: Option<f64>, vol: f64, value: f64) -> FactorVector {
        FactorVector {
            ticker: ticker.into(),
            lifetime,
            mean_capitalization: cap,
            mean_volume: vol,
            mean_trading_value: value,
        }
    }

    #[test]
    fn constant_series_trading_value() {
        let d0 = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
        let records = (0..10)
            .map(|i| DailyRecord {
                date: d0 + chrono::Duration::days(i),
                volume: 5,
                close: 2.0,
                shares_outstanding: None,
            })
            .collect();
        let corpus = Corpus::new(
            vec![DailySeries {
                ticker: "A".into(),
                records,
            }],
            1,
        );
        let f = compute_factors(&corpus, Parallelism::Sequential).unwrap();
        assert_eq!(f[0].mean_trading_value, 10.0);
        assert_eq!(f[0].lifetime, 10);
        assert_eq!(f[0].value(Factor::Capitalization), None);
        assert!(compute_factors(&Corpus::new(vec![], 1), Parallelism::Sequential).is_err());
    }

    #[test]
    fn lifetime_sweep() {
        let e = lifetime_sweep_edges(10);
        assert_eq!(e.len(), 11);
        assert_eq!(e[0], 508.0);
        assert_eq!(e[10], 5080.0);
        assert!((e[1] - 965.2).abs() < 1e-9);
    }

    #[test]
    fn half_open_bins() {
        let f = vec![
            fv("a", 1, None, 1.0, 1.0),
            fv("b", 2, None, 1.0, 1.0),
            fv("c", 3, None, 1.0, 1.0),
            fv("d", 9, None, 1.0, 1.0),
        ];
        let b = bin_stocks(&f, Factor::Lifetime, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(b.members, vec![vec!["a"], vec!["b"], vec!["c"]]);
        assert_eq!(b.unbinned, vec!["d"]);
        let cap = bin_stocks(&f, Factor::Capitalization, &[0.0, 1.0]).unwrap();
        assert_eq!(cap.undefined.len(), 4);
        assert!(bin_stocks(&f, Factor::Lifetime, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn spanning_edges_include_the_maximum() {
        let vals = [1.0, 10.0, 1000.0];
        for scale in [EdgeScale::Linear, EdgeScale::Geometric] {
            let e = edges_spanning(&vals, 3, scale).unwrap();
            assert_eq!(e.len(), 4);
            assert!(e[3] > 1000.0);
        }
        let g = edges_spanning(&vals, 3, EdgeScale::Geometric).unwrap();
        assert!((g[1] - 10f64).abs() < 1e-9);
        assert_eq!(
            edges_spanning(&[5.0], 4, EdgeScale::Linear).unwrap().len(),
            2
        );
    }

    #[test]
    fn correlation_identity_and_exact_dependence() {
        // Constant close across stocks: trading value = 3 * volume exactly.
        let f: Vec<FactorVector> = (1..=20)
            .map(|i| {
                let v = 1000.0 * f64::from(i).powi(2);
                fv(
                    &format!("t{i}"),
                    400 + (i * 37 % 11) as usize,
                    Some(5e6 * f64::from(i)),
                    v,
                    3.0 * v,
                )
            })
            .collect();
        let m = factor_correlations(&f).unwrap();
        for k in Factor::ALL {
            assert_eq!(m.get(k, k, true), Some(1.0));
        }
        let c = m.get(Factor::TradingValue, Factor::Volume, true).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.log_space[i][j], m.log_space[j][i]);
            }
        }
    }

    #[test]
    fn zero_variance_is_undefined() {
        let f: Vec<FactorVector> = (1..=5)
            .map(|i| fv("x", 400, Some(1.0), f64::from(i), 2.0))
            .collect();
        let m = factor_correlations(&f).unwrap();
        assert_eq!(m.get(Factor::Volume, Factor::TradingValue, true), None);
        assert_eq!(m.get(Factor::Lifetime, Factor::Lifetime, false), None);
        assert!(factor_correlations(&f[..2]).is_err());
    }

    #[test]
    fn empty_bin_has_no_gamma() {
        let f = vec![fv("a", 1, None, 1.0, 1.0)];
        let b = bin_stocks(&f, Factor::Lifetime, &[5.0, 6.0]).unwrap();
        let g = gamma_by_factor(
            &BTreeMap::new(),
            &b,
            DEFAULT_BINS_PER_DECADE,
            &FitWindow::tail(1.0),
        );
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].stock_count, 0);
        assert!(g[0].fit.is_none());
    }

    proptest! {
        #[test]
        fn binning_is_a_partition(
            vals in prop::collection::vec(prop::option::of(1.0f64..1e6), 1..100),
            n_bins in 1usize..12,
        ) {
            let f: Vec<FactorVector> = vals
                .iter()
                .enumerate()
                .map(|(i, v)| fv(&i.to_string(), 400, *v, 1.0, 1.0))
                .collect();
            let defined: Vec<f64> = vals.iter().flatten().copied().collect();
            prop_assume!(!defined.is_empty());
            let edges = edges_spanning(&defined, n_bins, EdgeScale::Geometric).unwrap();
            // Narrow the range so some stocks fall outside.
            let inner = &edges[..edges.len().saturating_sub(1).max(2)];
            let b = bin_stocks(&f, Factor::Capitalization, inner).unwrap();
            let binned: usize = b.members.iter().map(Vec::len).sum();
            prop_assert_eq!(binned + b.unbinned.len() + b.undefined.len(), f.len());
            prop_assert_eq!(b.undefined.len(), vals.len() - defined.len());
        }

        #[test]
        fn pearson_bounded(xs in prop::collection::vec((1.0f64..1e4, 1.0f64..1e4, 1.0f64..1e4, 300usize..5000), 3..50)) {
            let f: Vec<FactorVector> = xs
                .iter()
                .map(|&(a, b, c, l)| fv("s", l, Some(a), b, c))
                .collect();
            if let Ok(m) = factor_correlations(&f) {
                for row in m.log_space.iter().chain(&m.raw) {
                    for v in row.iter().flatten() {
                        prop_assert!((-1.0..=1.0).contains(v));
                    }
                }
            }
        }
    }
}
