//! Log-binned densities, tail fits and collapse distances.
//!
//! Return intervals are whole days, so a scaled sample `tau / <tau>` sits on a
//! per-stock lattice with spacing `1 / <tau>`. Geometric bins narrower than
//! that spacing alias (alternating empty and overfull bins). Interval data is
//! therefore binned as [`Cell`]s: each interval spreads unit mass uniformly
//! over `[(tau - 1/2), (tau + 1/2)] / <tau>`. Plain point samples go through
//! [`log_bin`].
//!
//! Fits are ordinary least squares on log densities, over bins whose mass is
//! at least `min_count`; empty and near-empty bins are left out rather than
//! floored.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{ols, LineFit};

pub const DEFAULT_BINS_PER_DECADE: usize = 8;
pub const DEFAULT_X_MIN: f64 = 1.0;
/// Bins holding less mass than this are too noisy for a log-space fit.
pub const DEFAULT_MIN_BIN_COUNT: f64 = 10.0;
pub const MIN_FIT_BINS: usize = 5;
pub const DEFAULT_SENSITIVITY_GRID: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// A sample spread uniformly over `[lo, hi]`; `lo == hi` is a point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
}

impl Cell {
    pub fn point(x: f64) -> Self {
        Cell { lo: x, hi: x }
    }

    pub fn around(center: f64, width: f64) -> Self {
        Cell {
            lo: center - width / 2.0,
            hi: center + width / 2.0,
        }
    }

    pub fn center(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedPdf {
    pub edges: Vec<f64>,
    /// Probability mass per unit length in each bin.
    pub densities: Vec<f64>,
    /// Samples whose value (cell center) lies in the bin.
    pub counts: Vec<u64>,
    /// Sample mass inside the bin; equals `counts` for point samples.
    pub mass: Vec<f64>,
    pub n_total: u64,
    /// All samples coincide; the single bin is nominal.
    pub degenerate: bool,
}

impl BinnedPdf {
    /// Wraps precomputed densities, e.g. an analytic law evaluated on edges.
    pub fn from_densities(edges: Vec<f64>, densities: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        check_edges(&edges)?;
        if densities.len() + 1 != edges.len() || mass.len() != densities.len() {
            return Err(Error::InvalidInput(
                "edges/densities/mass length mismatch".into(),
            ));
        }
        let counts = mass.iter().map(|m| m.round().max(0.0) as u64).collect();
        let n_total = mass.iter().sum::<f64>().round() as u64;
        Ok(BinnedPdf {
            edges,
            densities,
            counts,
            mass,
            n_total,
            degenerate: false,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.densities.len()
    }

    /// Geometric bin centers.
    pub fn centers(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .map(|w| (w[0] * w[1]).sqrt())
            .collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Integral of the piecewise-constant density.
    pub fn total_probability(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.widths())
            .map(|(d, w)| d * w)
            .sum()
    }
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::InvalidInput("need at least two bin edges".into()));
    }
    if edges.windows(2).any(|w| !(w[1] > w[0])) || !edges.iter().all(|e| e.is_finite()) {
        return Err(Error::InvalidInput(
            "bin edges must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Edges `lo * 10^(i / bpd)` up to the first edge strictly above `hi`.
pub fn geometric_edges(lo: f64, hi: f64, bins_per_decade: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && lo.is_finite() && hi.is_finite() && hi >= lo) {
        return Err(Error::InvalidInput(format!(
            "invalid range [{lo}, {hi}] for log bins"
        )));
    }
    if bins_per_decade == 0 {
        return Err(Error::InvalidInput(
            "bins_per_decade must be at least 1".into(),
        ));
    }
    let step = 1.0 / bins_per_decade as f64;
    let mut edges = vec![lo];
    let mut i = 1;
    loop {
        let e = lo * 10f64.powf(i as f64 * step);
        edges.push(e);
        if e > hi {
            break;
        }
        i += 1;
    }
    Ok(edges)
}

fn validate_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples to bin".into()));
    }
    if let Some(bad) = samples.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "samples must be positive, found {bad}"
        )));
    }
    Ok(())
}

/// Histogram of positive point samples on geometric bins spanning the data.
pub fn log_bin(samples: &[f64], bins_per_decade: usize) -> Result<BinnedPdf> {
    validate_samples(samples)?;
    let (lo, hi) = min_max(samples.iter().copied());
    let edges = geometric_edges(lo, hi, bins_per_decade)?;
    let mut pdf = bin_points_with_edges(samples, edges)?;
    pdf.degenerate = lo == hi;
    Ok(pdf)
}

/// Histogram of cells on geometric bins spanning all cell mass.
pub fn log_bin_cells(cells: &[Cell], bins_per_decade: usize) -> Result<BinnedPdf> {
    let edges = cell_edges(cells, bins_per_decade)?;
    let mut pdf = bin_cells_with_edges(cells, edges)?;
    pdf.degenerate = cells.iter().all(|c| *c == cells[0]);
    Ok(pdf)
}

/// Geometric edges covering every cell, for sharing across several histograms.
pub fn cell_edges(cells: &[Cell], bins_per_decade: usize) -> Result<Vec<f64>> {
    if cells.is_empty() {
        return Err(Error::InvalidInput("no samples to bin".into()));
    }
    if let Some(bad) = cells
        .iter()
        .find(|c| !(c.lo > 0.0 && c.hi >= c.lo && c.hi.is_finite()))
    {
        return Err(Error::InvalidInput(format!(
            "cells must be positive, found {bad:?}"
        )));
    }
    let lo = cells.iter().map(|c| c.lo).fold(f64::INFINITY, f64::min);
    let hi = cells.iter().map(|c| c.hi).fold(f64::NEG_INFINITY, f64::max);
    geometric_edges(lo, hi, bins_per_decade)
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    })
}

/// Bin index for half-open bins `[e_i, e_{i+1})`, or `None` outside.
fn bin_index(edges: &[f64], x: f64) -> Option<usize> {
    let i = edges.partition_point(|&e| e <= x);
    (i >= 1 && i < edges.len()).then(|| i - 1)
}

/// Point histogram on given edges. Samples outside the edges still count
/// toward `n_total`.
pub fn bin_points_with_edges(samples: &[f64], edges: Vec<f64>) -> Result<BinnedPdf> {
    check_edges(&edges)?;
    let nb = edges.len() - 1;
    let mut counts = vec![0u64; nb];
    for &x in samples {
        if let Some(i) = bin_index(&edges, x) {
            counts[i] += 1;
        }
    }
    let mass: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    Ok(finish(edges, counts, mass, samples.len()))
}

/// Cell histogram on given edges: each cell contributes the fraction of its
/// extent that overlaps a bin.
pub fn bin_cells_with_edges(cells: &[Cell], edges: Vec<f64>) -> Result<BinnedPdf> {
    check_edges(&edges)?;
    let nb = edges.len() - 1;
    let mut counts = vec![0u64; nb];
    let mut mass = vec![0.0; nb];
    for c in cells {
        if let Some(i) = bin_index(&edges, c.center()) {
            counts[i] += 1;
        }
        let width = c.hi - c.lo;
        if width <= 0.0 {
            if let Some(i) = bin_index(&edges, c.lo) {
                mass[i] += 1.0;
            }
            continue;
        }
        let mut i = edges.partition_point(|&e| e <= c.lo).saturating_sub(1);
        while i < nb && edges[i] < c.hi {
            let overlap = c.hi.min(edges[i + 1]) - c.lo.max(edges[i]);
            if overlap > 0.0 {
                mass[i] += overlap / width;
            }
            i += 1;
        }
    }
    Ok(finish(edges, counts, mass, cells.len()))
}

fn finish(edges: Vec<f64>, counts: Vec<u64>, mass: Vec<f64>, n: usize) -> BinnedPdf {
    let n_total = n as u64;
    let densities = mass
        .iter()
        .zip(edges.windows(2))
        .map(|(m, w)| {
            if n == 0 {
                0.0
            } else {
                m / (n as f64 * (w[1] - w[0]))
            }
        })
        .collect();
    BinnedPdf {
        edges,
        densities,
        counts,
        mass,
        n_total,
        degenerate: false,
    }
}

/// Which bins enter a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitWindow {
    pub x_min: f64,
    pub x_max: f64,
    pub min_count: f64,
}

impl FitWindow {
    pub fn tail(x_min: f64) -> Self {
        FitWindow {
            x_min,
            ..FitWindow::default()
        }
    }
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow {
            x_min: 0.0,
            x_max: f64::INFINITY,
            min_count: DEFAULT_MIN_BIN_COUNT,
        }
    }
}

fn select(pdf: &BinnedPdf, w: &FitWindow) -> Vec<(f64, f64)> {
    pdf.centers()
        .into_iter()
        .zip(&pdf.densities)
        .zip(&pdf.mass)
        .filter(|((c, d), m)| **m >= w.min_count && **d > 0.0 && *c >= w.x_min && *c <= w.x_max)
        .map(|((c, d), _)| (c, *d))
        .collect()
}

/// Least-squares power law `density ~ x^-gamma` on log-log axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub gamma: f64,
    pub x_min: f64,
    /// Center of the last bin used.
    pub x_max: f64,
    pub stderr: f64,
    pub n_tail: usize,
    #[serde(rename = "r2")]
    pub r_squared: f64,
    pub intercept: f64,
}

impl TailFit {
    /// Decades spanned by the fitted bin centers.
    pub fn decades(&self) -> f64 {
        (self.x_max / self.x_min).log10()
    }
}

pub fn fit_power_tail(pdf: &BinnedPdf, x_min: f64) -> Result<TailFit> {
    fit_power_tail_in(pdf, &FitWindow::tail(x_min))
}

pub fn fit_power_tail_in(pdf: &BinnedPdf, window: &FitWindow) -> Result<TailFit> {
    if !(window.x_min > 0.0) {
        return Err(Error::InvalidInput("x_min must be positive".into()));
    }
    let pts = select(pdf, window);
    if pts.len() < MIN_FIT_BINS {
        return Err(Error::Insufficient(format!(
            "{} usable tail bins at x >= {} (need {MIN_FIT_BINS})",
            pts.len(),
            window.x_min
        )));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let LineFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
        n,
    } = ols(&x, &y).ok_or_else(|| Error::Fit("degenerate regression".into()))?;
    Ok(TailFit {
        gamma: -slope,
        x_min: pts[0].0,
        x_max: pts[pts.len() - 1].0,
        stderr: slope_stderr,
        n_tail: n,
        r_squared,
        intercept,
    })
}

/// Least-squares exponential `density ~ e^(-a x)` on semi-log axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpFit {
    pub a: f64,
    pub stderr: f64,
    #[serde(rename = "r2")]
    pub r_squared: f64,
    pub n_bins: usize,
}

pub fn fit_exponential(pdf: &BinnedPdf) -> Result<ExpFit> {
    fit_exponential_in(pdf, &FitWindow::default())
}

pub fn fit_exponential_in(pdf: &BinnedPdf, window: &FitWindow) -> Result<ExpFit> {
    let pts = select(pdf, window);
    if pts.len() < MIN_FIT_BINS {
        return Err(Error::Insufficient(format!(
            "{} usable bins (need {MIN_FIT_BINS})",
            pts.len()
        )));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let fit = ols(&x, &y).ok_or_else(|| Error::Fit("degenerate regression".into()))?;
    if !(fit.slope < 0.0) {
        return Err(Error::Fit(format!(
            "fitted rate {} is not positive; data is not exponentially decaying",
            -fit.slope
        )));
    }
    Ok(ExpFit {
        a: -fit.slope,
        stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        n_bins: fit.n,
    })
}

/// Continuous maximum-likelihood (Hill-type) density exponent above `x_min`:
/// `gamma = 1 + n / sum(ln(x / x_min))`. Reported next to the least-squares
/// estimate as a cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HillFit {
    pub gamma: f64,
    pub stderr: f64,
    pub n_tail: usize,
    pub x_min: f64,
}

pub fn hill_estimator(samples: &[f64], x_min: f64) -> Result<HillFit> {
    if !(x_min > 0.0) {
        return Err(Error::InvalidInput("x_min must be positive".into()));
    }
    let (n, s) = samples
        .iter()
        .filter(|&&x| x >= x_min)
        .fold((0usize, 0.0), |(n, s), &x| (n + 1, s + (x / x_min).ln()));
    if n < 2 || s <= 0.0 {
        return Err(Error::Insufficient(format!(
            "{n} samples above x_min={x_min}"
        )));
    }
    let gamma = 1.0 + n as f64 / s;
    Ok(HillFit {
        gamma,
        stderr: (gamma - 1.0) / (n as f64).sqrt(),
        n_tail: n,
        x_min,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityPoint {
    pub x_min: f64,
    pub fit: Option<TailFit>,
}

/// Tail fits across a grid of fit-range starts.
pub fn gamma_sensitivity(pdf: &BinnedPdf, grid: &[f64], min_count: f64) -> Vec<SensitivityPoint> {
    grid.iter()
        .map(|&x_min| SensitivityPoint {
            x_min,
            fit: fit_power_tail_in(
                pdf,
                &FitWindow {
                    x_min,
                    min_count,
                    ..FitWindow::default()
                },
            )
            .ok(),
        })
        .collect()
}

/// Two-sample Kolmogorov-Smirnov statistic on point samples.
pub fn collapse_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let ca: Vec<Cell> = a.iter().map(|&x| Cell::point(x)).collect();
    let cb: Vec<Cell> = b.iter().map(|&x| Cell::point(x)).collect();
    collapse_distance_cells(&ca, &cb)
}

/// Kolmogorov-Smirnov statistic between the distributions that spread each
/// sample uniformly over its cell. Point cells reduce it to the ordinary
/// two-sample statistic.
pub fn collapse_distance_cells(a: &[Cell], b: &[Cell]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput(
            "both sample sets must be non-empty".into(),
        ));
    }
    // Events on D(x) = F_a(x) - F_b(x): (x, slope change, jump).
    let mut events: Vec<(f64, f64, f64)> = Vec::with_capacity(2 * (a.len() + b.len()));
    for (cells, sign) in [(a, 1.0), (b, -1.0)] {
        let w = sign / cells.len() as f64;
        for c in cells {
            if !(c.lo.is_finite() && c.hi.is_finite() && c.hi >= c.lo) {
                return Err(Error::InvalidInput(format!("invalid cell {c:?}")));
            }
            if c.hi > c.lo {
                let s = w / (c.hi - c.lo);
                events.push((c.lo, s, 0.0));
                events.push((c.hi, -s, 0.0));
            } else {
                events.push((c.lo, 0.0, w));
            }
        }
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (mut d, mut slope, mut last, mut best) = (0.0f64, 0.0f64, events[0].0, 0.0f64);
    let mut i = 0;
    while i < events.len() {
        let x = events[i].0;
        d += slope * (x - last);
        best = best.max(d.abs());
        while i < events.len() && events[i].0 == x {
            slope += events[i].1;
            d += events[i].2;
            i += 1;
        }
        best = best.max(d.abs());
        last = x;
    }
    Ok(best.min(1.0))
}
