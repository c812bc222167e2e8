//! Detrended fluctuation analysis.
//!
//! The profile `Y(k) = sum_{i<=k} (x_i - mean)` is cut into `floor(N/n)`
//! boxes from the start and as many from the end, a least-squares polynomial
//! of the given order is removed from each box, and `F(n)` is the RMS of the
//! residuals over all boxes. `alpha` is the slope of `log F` against `log n`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::factors::FactorBinning;
use crate::stats::{ols, sample_std};

pub const DEFAULT_ORDER: usize = 1;
pub const DEFAULT_MIN_WINDOW: usize = 8;
pub const DEFAULT_WINDOW_COUNT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DfaCurve {
    pub window_sizes: Vec<usize>,
    pub fluctuations: Vec<f64>,
    pub alpha: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub fit_range: (usize, usize),
    pub order: usize,
}

impl DfaCurve {
    /// Above 1 the input is likely nonstationary; kept, not clamped.
    pub fn exceeds_unity(&self) -> bool {
        self.alpha > 1.0
    }
}

/// About `count` geometrically spaced sizes from 8 to `len / 4`.
pub fn default_windows(len: usize) -> Result<Vec<usize>> {
    let max = len / 4;
    if max < DEFAULT_MIN_WINDOW {
        return Err(Error::WindowRange {
            len,
            requested: vec![DEFAULT_MIN_WINDOW],
            min_window: DEFAULT_MIN_WINDOW,
            max_window: max,
        });
    }
    let (lo, hi) = ((DEFAULT_MIN_WINDOW as f64).ln(), (max as f64).ln());
    let k = DEFAULT_WINDOW_COUNT - 1;
    let mut w: Vec<usize> = (0..=k)
        .map(|i| (lo + (hi - lo) * i as f64 / k as f64).exp().round() as usize)
        .map(|n| n.clamp(DEFAULT_MIN_WINDOW, max))
        .collect();
    w.dedup();
    Ok(w)
}

/// Orthonormal polynomial basis of degree `order` on `0..n`.
fn basis(n: usize, order: usize) -> Vec<Vec<f64>> {
    let half = (n as f64 - 1.0) / 2.0;
    let t: Vec<f64> = (0..n).map(|i| (i as f64 - half) / half.max(1.0)).collect();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
    for p in 0..=order {
        let mut v: Vec<f64> = t.iter().map(|x| x.powi(p as i32)).collect();
        // Two Gram-Schmidt passes keep the basis orthogonal to rounding.
        for _ in 0..2 {
            for e in &out {
                let d: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(e).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        out.push(v);
    }
    out
}

/// Residual sum of squares after removing the projection on `basis`.
fn detrended_ss(y: &[f64], basis: &[Vec<f64>], resid: &mut Vec<f64>) -> f64 {
    resid.clear();
    resid.extend_from_slice(y);
    for e in basis {
        let d: f64 = resid.iter().zip(e).map(|(a, b)| a * b).sum();
        resid.iter_mut().zip(e).for_each(|(a, b)| *a -= d * b);
    }
    resid.iter().map(|r| r * r).sum()
}

fn check_windows(len: usize, order: usize, windows: &[usize]) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidInput("DFA order must be at least 1".into()));
    }
    let min_window = order + 2;
    let max_window = len / 4;
    let ok = !windows.is_empty()
        && windows.windows(2).all(|w| w[1] > w[0])
        && windows[0] >= min_window
        && windows[windows.len() - 1] <= max_window;
    if !ok {
        return Err(Error::WindowRange {
            len,
            requested: windows.to_vec(),
            min_window,
            max_window,
        });
    }
    Ok(())
}

/// `F(n)` for each window size.
pub fn dfa_fluctuations(series: &[f64], order: usize, windows: &[usize]) -> Result<Vec<f64>> {
    check_windows(series.len(), order, windows)?;
    if let Some(bad) = series.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite value {bad} in series"
        )));
    }
    let n_total = series.len();
    let mean = series.iter().sum::<f64>() / n_total as f64;
    let mut profile = Vec::with_capacity(n_total);
    let mut acc = 0.0;
    for v in series {
        acc += v - mean;
        profile.push(acc);
    }
    let mut resid = Vec::new();
    Ok(windows
        .iter()
        .map(|&n| {
            let b = basis(n, order);
            let boxes = n_total / n;
            let tail = n_total - boxes * n;
            let mut ss = 0.0;
            for k in 0..boxes {
                ss += detrended_ss(&profile[k * n..(k + 1) * n], &b, &mut resid);
                ss += detrended_ss(&profile[tail + k * n..tail + (k + 1) * n], &b, &mut resid);
            }
            (ss / (2 * boxes * n) as f64).sqrt()
        })
        .collect())
}

pub fn dfa(series: &[f64], order: usize, windows: &[usize]) -> Result<DfaCurve> {
    let range = match windows {
        [] => (0, 0),
        [first, .., last] => (*first, *last),
        [only] => (*only, *only),
    };
    dfa_in_range(series, order, windows, range)
}

/// DFA with the exponent fitted only over windows in `fit_range` (inclusive).
pub fn dfa_in_range(
    series: &[f64],
    order: usize,
    windows: &[usize],
    fit_range: (usize, usize),
) -> Result<DfaCurve> {
    let f = dfa_fluctuations(series, order, windows)?;
    let (x, y): (Vec<f64>, Vec<f64>) = windows
        .iter()
        .zip(&f)
        .filter(|(n, _)| (fit_range.0..=fit_range.1).contains(*n))
        .map(|(&n, &fv)| ((n as f64).ln(), fv.ln()))
        .unzip();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("zero fluctuation in fit range".into()));
    }
    if x.len() < 2 {
        return Err(Error::Insufficient(format!(
            "{} windows inside fit range {fit_range:?}",
            x.len()
        )));
    }
    let fit = ols(&x, &y).ok_or_else(|| Error::Fit("degenerate DFA regression".into()))?;
    Ok(DfaCurve {
        window_sizes: windows.to_vec(),
        fluctuations: f,
        alpha: fit.slope,
        stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        fit_range,
        order,
    })
}

/// DFA with default order and windows.
pub fn dfa_default(series: &[f64]) -> Result<DfaCurve> {
    dfa(series, DEFAULT_ORDER, &default_windows(series.len())?)
}

/// Magnitudes of increments, `|x[i+1] - x[i]|`. Their correlations expose
/// nonlinear dependence: for a linearly correlated Gaussian series the
/// magnitude series is close to uncorrelated.
pub fn magnitude_series(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| (w[1] - w[0]).abs()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_alpha: Option<f64>,
    /// Sample standard deviation; absent below two stocks.
    pub std_alpha: Option<f64>,
    pub above_unity: usize,
}

/// Groups per-stock exponents by factor bin. Members without an exponent
/// (DFA failed for them) are left out of the bin's count.
pub fn alpha_by_factor(alphas: &BTreeMap<String, f64>, binning: &FactorBinning) -> Vec<AlphaBin> {
    (0..binning.n_bins())
        .map(|i| {
            let (lower, upper) = binning.bounds(i);
            let a: Vec<f64> = binning.members[i]
                .iter()
                .filter_map(|t| alphas.get(t).copied())
                .collect();
            AlphaBin {
                lower,
                upper,
                count: a.len(),
                mean_alpha: crate::stats::mean(&a),
                std_alpha: sample_std(&a),
                above_unity: a.iter().filter(|&&v| v > 1.0).count(),
            }
        })
        .collect()
}
