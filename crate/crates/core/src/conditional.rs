//! Conditional interval densities `P_q(tau | tau0)` over octiles of the
//! preceding scaled interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{bin_cells_with_edges, cell_edges, BinnedPdf, Cell};
use crate::intervals::PooledIntervals;
use crate::stats::{spearman, spearman_critical_5pct};

pub const N_OCTILES: usize = 8;
pub const LOW_STATISTICS_PAIRS: usize = 50;
pub const GEOMETRIC_BOUNDARIES: [f64; N_OCTILES + 1] =
    [0.0, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4, 12.8, f64::INFINITY];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OctileMode {
    /// Fixed bounds doubling from 0.2.
    #[default]
    Geometric,
    /// Population octiles of the preceding intervals.
    Quantile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OctilePartition {
    pub mode: OctileMode,
    pub boundaries: [f64; N_OCTILES + 1],
}

impl OctilePartition {
    pub fn geometric() -> Self {
        OctilePartition {
            mode: OctileMode::Geometric,
            boundaries: GEOMETRIC_BOUNDARIES,
        }
    }

    /// Boundaries at the 1/8 ... 7/8 quantiles of `tau0`. On lattice data
    /// quantiles can coincide; later boundaries are then nudged up so the
    /// partition stays strictly increasing, leaving some octiles empty.
    pub fn quantile(tau0: &[f64]) -> Result<Self> {
        if tau0.is_empty() {
            return Err(Error::Insufficient("no pairs to compute octiles".into()));
        }
        let mut s = tau0.to_vec();
        s.sort_by(f64::total_cmp);
        let mut b = [0.0; N_OCTILES + 1];
        b[N_OCTILES] = f64::INFINITY;
        for k in 1..N_OCTILES {
            let idx = (k * s.len()).div_ceil(N_OCTILES).min(s.len() - 1);
            b[k] = s[idx].max(b[k - 1].next_up());
        }
        Ok(OctilePartition {
            mode: OctileMode::Quantile,
            boundaries: b,
        })
    }

    pub fn build(mode: OctileMode, tau0: &[f64]) -> Result<Self> {
        match mode {
            OctileMode::Geometric => Ok(Self::geometric()),
            OctileMode::Quantile => Self::quantile(tau0),
        }
    }

    /// Octile index `0..8` of a scaled preceding interval.
    pub fn assign(&self, tau0: f64) -> usize {
        let i = self.boundaries.partition_point(|&b| b <= tau0);
        i.clamp(1, N_OCTILES) - 1
    }

    pub fn label(i: usize) -> String {
        format!("Q{}", i + 1)
    }
}

/// Two consecutive intervals of one stock, both scaled by that stock's mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalPair {
    pub prev_scaled: f64,
    pub scaled: f64,
    pub cell: Cell,
}

/// Consecutive pairs within each stock; a stock's first interval only
/// appears as a predecessor.
pub fn interval_pairs(pooled: &PooledIntervals) -> Vec<IntervalPair> {
    let mut out = Vec::with_capacity(pooled.len());
    for s in &pooled.stocks {
        let m = s.intervals.mean_tau;
        for w in s.intervals.taus.windows(2) {
            let t = f64::from(w[1]);
            out.push(IntervalPair {
                prev_scaled: f64::from(w[0]) / m,
                scaled: t / m,
                cell: Cell::around(t / m, 1.0 / m),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OctilePdf {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
    pub pairs: usize,
    pub low_statistics: bool,
    pub pdf: BinnedPdf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalAnalysis {
    pub q: f64,
    pub partition: OctilePartition,
    pub octiles: Vec<OctilePdf>,
    /// Density of every pooled interval on the same edges.
    pub unconditional: BinnedPdf,
    /// Density of the intervals that have a predecessor.
    pub pair_marginal: BinnedPdf,
    pub total_pairs: usize,
    pub contributing_stocks: usize,
}

impl ConditionalAnalysis {
    /// Pair-count-weighted mixture of the octile densities.
    pub fn mixture(&self) -> Vec<f64> {
        let n = self.total_pairs as f64;
        let mut out = vec![0.0; self.pair_marginal.n_bins()];
        for o in &self.octiles {
            let w = o.pairs as f64 / n;
            for (acc, d) in out.iter_mut().zip(&o.pdf.densities) {
                *acc += w * d;
            }
        }
        out
    }
}

/// Conditional densities for every octile, all on one set of log-bin edges
/// spanning the pooled scaled intervals.
pub fn conditional_analysis(
    pooled: &PooledIntervals,
    mode: OctileMode,
    bins_per_decade: usize,
) -> Result<ConditionalAnalysis> {
    let pairs = interval_pairs(pooled);
    if pairs.is_empty() {
        return Err(Error::Insufficient(format!(
            "no consecutive interval pairs at q={}",
            pooled.q
        )));
    }
    let prev: Vec<f64> = pairs.iter().map(|p| p.prev_scaled).collect();
    let partition = OctilePartition::build(mode, &prev)?;
    let all_cells = pooled.scaled_cells();
    let edges = cell_edges(&all_cells, bins_per_decade)?;
    let mut groups: Vec<Vec<Cell>> = vec![Vec::new(); N_OCTILES];
    for p in &pairs {
        groups[partition.assign(p.prev_scaled)].push(p.cell);
    }
    let octiles = groups
        .iter()
        .enumerate()
        .map(|(i, cells)| {
            Ok(OctilePdf {
                label: OctilePartition::label(i),
                lower: partition.boundaries[i],
                upper: partition.boundaries[i + 1],
                pairs: cells.len(),
                low_statistics: cells.len() < LOW_STATISTICS_PAIRS,
                pdf: bin_cells_with_edges(cells, edges.clone())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pair_cells: Vec<Cell> = pairs.iter().map(|p| p.cell).collect();
    Ok(ConditionalAnalysis {
        q: pooled.q,
        partition,
        octiles,
        unconditional: bin_cells_with_edges(&all_cells, edges.clone())?,
        pair_marginal: bin_cells_with_edges(&pair_cells, edges)?,
        total_pairs: pairs.len(),
        contributing_stocks: pooled
            .stocks
            .iter()
            .filter(|s| s.intervals.taus.len() >= 2)
            .count(),
    })
}

/// Pairs whose preceding interval falls in octile `octile`, as a density.
pub fn conditional_pdf(
    pooled: &PooledIntervals,
    partition: &OctilePartition,
    octile: usize,
    bins_per_decade: usize,
) -> Result<OctilePdf> {
    if octile >= N_OCTILES {
        return Err(Error::InvalidInput(format!(
            "octile index {octile} out of range"
        )));
    }
    let cells: Vec<Cell> = interval_pairs(pooled)
        .into_iter()
        .filter(|p| partition.assign(p.prev_scaled) == octile)
        .map(|p| p.cell)
        .collect();
    let edges = cell_edges(&pooled.scaled_cells(), bins_per_decade)?;
    Ok(OctilePdf {
        label: OctilePartition::label(octile),
        lower: partition.boundaries[octile],
        upper: partition.boundaries[octile + 1],
        pairs: cells.len(),
        low_statistics: cells.len() < LOW_STATISTICS_PAIRS,
        pdf: bin_cells_with_edges(&cells, edges)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OctileSummary {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
    pub pairs: usize,
    pub mean_scaled_tau: Option<f64>,
    pub low_statistics: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemorySummary {
    pub octiles: Vec<OctileSummary>,
    /// Spearman correlation of octile index and mean scaled interval over
    /// octiles with at least [`LOW_STATISTICS_PAIRS`] pairs; needs three.
    pub spearman: Option<f64>,
    /// The same over every populated octile.
    pub spearman_all: Option<f64>,
    /// Two-sided 5% critical value for `spearman` at its octile count.
    pub spearman_critical: Option<f64>,
}

pub fn memory_summary(pairs: &[IntervalPair], partition: &OctilePartition) -> MemorySummary {
    let mut sums = [0.0f64; N_OCTILES];
    let mut counts = [0usize; N_OCTILES];
    for p in pairs {
        let i = partition.assign(p.prev_scaled);
        sums[i] += p.scaled;
        counts[i] += 1;
    }
    let octiles: Vec<OctileSummary> = (0..N_OCTILES)
        .map(|i| OctileSummary {
            label: OctilePartition::label(i),
            lower: partition.boundaries[i],
            upper: partition.boundaries[i + 1],
            pairs: counts[i],
            mean_scaled_tau: (counts[i] > 0).then(|| sums[i] / counts[i] as f64),
            low_statistics: counts[i] < LOW_STATISTICS_PAIRS,
        })
        .collect();
    let rank_corr = |min_pairs: usize| -> (Option<f64>, usize) {
        let (idx, means): (Vec<f64>, Vec<f64>) = octiles
            .iter()
            .enumerate()
            .filter(|(_, o)| o.pairs >= min_pairs.max(1))
            .filter_map(|(i, o)| Some((i as f64, o.mean_scaled_tau?)))
            .unzip();
        let n = idx.len();
        ((n >= 3).then(|| spearman(&idx, &means)).flatten(), n)
    };
    let (spearman_well, n_well) = rank_corr(LOW_STATISTICS_PAIRS);
    MemorySummary {
        spearman: spearman_well,
        spearman_all: rank_corr(1).0,
        spearman_critical: spearman_well.and_then(|_| spearman_critical_5pct(n_well)),
        octiles,
    }
}
