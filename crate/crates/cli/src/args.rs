use std::path::PathBuf;

use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Parses `A,B`.
fn pair<T: FromStr>(s: &str) -> Result<(T, T), String>
where
    T::Err: std::fmt::Display,
{
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated values, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<T>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

#[derive(Debug, Parser)]
#[command(
    name = "retint",
    version,
    about = "Return-interval statistics for daily trading records"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Raw, scaled and shuffled interval densities with tail fits.
    Intervals(IntervalsArgs),
    /// Conditional densities over octiles of the preceding interval.
    Conditional(ConditionalArgs),
    /// DFA exponents binned by each financial factor.
    Dfa(DfaArgs),
    /// Tail exponents by factor bin, factor correlations and scatter dumps.
    Factors(FactorsArgs),
    /// Write a synthetic corpus and its ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Iid,
    Fgn,
    Cascade,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeriesArg {
    Volume,
    Price,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OctilesArg {
    Geometric,
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MomentsArg {
    Population,
    Sample,
}

/// Generator settings shared by `synth` and the in-memory `--synth-*` source.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub kind: KindArg,
    pub n_stocks: usize,
    pub length: usize,
    pub lifetime_range: Option<(usize, usize)>,
    pub hurst: f64,
    pub hurst_range: Option<(f64, f64)>,
    pub sigma: f64,
    pub levels: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Directory of `<TICKER>.csv` files, or a single CSV file.
    #[arg(long, conflicts_with = "synth_kind")]
    pub data_dir: Option<PathBuf>,

    /// Generate the corpus in memory instead of loading it.
    #[arg(long, value_enum)]
    pub synth_kind: Option<KindArg>,
    #[arg(long, default_value_t = 100)]
    pub synth_n_stocks: usize,
    /// Records per synthetic stock.
    #[arg(long, default_value_t = 5000)]
    pub synth_length: usize,
    /// Spread lifetimes log-uniformly over MIN,MAX instead of `--synth-length`.
    #[arg(long, value_name = "MIN,MAX", value_parser = pair::<usize>)]
    pub synth_lifetime_range: Option<(usize, usize)>,
    #[arg(long, default_value_t = 0.8)]
    pub synth_hurst: f64,
    /// Hurst exponent rising linearly with lifetime from H0 to H1.
    #[arg(long, value_name = "H0,H1", value_parser = pair::<f64>)]
    pub synth_hurst_range: Option<(f64, f64)>,
    #[arg(long, default_value_t = 0.4)]
    pub synth_sigma: f64,
    #[arg(long)]
    pub synth_levels: Option<u32>,

    #[arg(long, value_enum, default_value_t = SeriesArg::Volume)]
    pub series: SeriesArg,
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 2.5, 3.0, 3.5, 4.0])]
    pub thresholds: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; 1 runs sequentially, 0 or absent uses every core.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value_t = 350)]
    pub min_lifetime: usize,
    /// Treat malformed rows and duplicate dates as fatal.
    #[arg(long)]
    pub strict: bool,
    /// Analyze shuffled volatility series.
    #[arg(long)]
    pub shuffled: bool,
    #[arg(long, default_value_t = 8)]
    pub bins_per_decade: usize,
    /// Start of the tail-fit range in scaled units.
    #[arg(long, default_value_t = 1.0)]
    pub x_min: f64,
    /// End of the tail-fit range in scaled units.
    #[arg(long)]
    pub x_max: Option<f64>,
    /// Minimum sample mass for a bin to enter a fit.
    #[arg(long, default_value_t = 10.0)]
    pub min_bin_count: f64,
    #[arg(long, value_enum, default_value_t = MomentsArg::Population)]
    pub moments: MomentsArg,
}

impl CommonArgs {
    pub fn generator(&self) -> Option<Generator> {
        Some(Generator {
            kind: self.synth_kind?,
            n_stocks: self.synth_n_stocks,
            length: self.synth_length,
            lifetime_range: self.synth_lifetime_range,
            hurst: self.synth_hurst,
            hurst_range: self.synth_hurst_range,
            sigma: self.synth_sigma,
            levels: self.synth_levels,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct IntervalsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Write every interval as `ticker<TAB>q<TAB>tau` to intervals.tsv.
    #[arg(long)]
    pub dump_intervals: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ConditionalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = OctilesArg::Geometric)]
    pub octiles: OctilesArg,
}

#[derive(Debug, Clone, Args)]
pub struct DfaArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Polynomial detrending order.
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    /// Bin lifetime over 508..5080 days instead of the observed range.
    #[arg(long)]
    pub lifetime_sweep: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FactorsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Threshold for the per-bin tail exponents.
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long)]
    pub lifetime_sweep: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 100)]
    pub n_stocks: usize,
    /// Records per stock.
    #[arg(long, default_value_t = 5000)]
    pub length: usize,
    /// Spread lifetimes log-uniformly over MIN,MAX instead of `--length`.
    #[arg(long, value_name = "MIN,MAX", value_parser = pair::<usize>)]
    pub lifetime_range: Option<(usize, usize)>,
    #[arg(long, default_value_t = 0.8)]
    pub hurst: f64,
    /// Hurst exponent rising linearly with lifetime from H0 to H1.
    #[arg(long, value_name = "H0,H1", value_parser = pair::<f64>)]
    pub hurst_range: Option<(f64, f64)>,
    #[arg(long, default_value_t = 0.4)]
    pub sigma: f64,
    #[arg(long)]
    pub levels: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl SynthArgs {
    pub fn generator(&self) -> Generator {
        Generator {
            kind: self.kind,
            n_stocks: self.n_stocks,
            length: self.length,
            lifetime_range: self.lifetime_range,
            hurst: self.hurst,
            hurst_range: self.hurst_range,
            sigma: self.sigma,
            levels: self.levels,
        }
    }
}
