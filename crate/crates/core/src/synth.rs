//! Synthetic series and corpora with known statistics.
//!
//! Every random draw comes from a ChaCha8 stream keyed by `(seed, label)`
//! (see [`crate::seed`]). FFTs use rustfft's scalar planner so that the fGn
//! construction does not depend on which SIMD units the host has.
//!
//! Three regimes are provided:
//! - `iid`: independent draws, the shuffled/Poisson control;
//! - `fgn`: fractional Gaussian noise by circulant embedding (linear
//!   long-range correlation only);
//! - `cascade`: a dyadic multiplicative cascade with log-normal multipliers
//!   (nonlinear, multifractal correlation).

use chrono::{Datelike, NaiveDate, Weekday};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlannerScalar;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Corpus, DailyRecord, DailySeries};
use crate::par::{map_ordered, Parallelism};
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum IidLaw {
    Normal { mean: f64, std: f64 },
    Laplace { scale: f64 },
}

impl Default for IidLaw {
    fn default() -> Self {
        IidLaw::Normal {
            mean: 0.0,
            std: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    Iid(IidLaw),
    Fgn {
        hurst: f64,
    },
    /// `levels = None` uses `ceil(log2(length))` levels.
    Cascade {
        sigma: f64,
        levels: Option<u32>,
    },
}

impl GeneratorKind {
    pub fn label(&self) -> &'static str {
        match self {
            GeneratorKind::Iid(_) => "iid",
            GeneratorKind::Fgn { .. } => "fgn",
            GeneratorKind::Cascade { .. } => "cascade",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub length: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.length < 2 {
            return bad(format!("length must be at least 2, got {}", self.length));
        }
        match self.kind {
            GeneratorKind::Iid(IidLaw::Normal { mean, std }) => {
                if !(mean.is_finite() && std > 0.0 && std.is_finite()) {
                    return bad(format!("invalid normal law mean={mean} std={std}"));
                }
            }
            GeneratorKind::Iid(IidLaw::Laplace { scale }) => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return bad(format!("invalid Laplace scale {scale}"));
                }
            }
            GeneratorKind::Fgn { hurst } => {
                if !(hurst > 0.0 && hurst < 1.0) {
                    return bad(format!("Hurst exponent must be in (0, 1), got {hurst}"));
                }
            }
            GeneratorKind::Cascade { sigma, levels } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return bad(format!("cascade sigma must be positive, got {sigma}"));
                }
                if let Some(l) = levels {
                    if !(1..=30).contains(&l) {
                        return bad(format!("cascade levels must be in 1..=30, got {l}"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The raw generator output: i.i.d. draws, fGn, or the positive cascade.
pub fn generate(spec: &GeneratorSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, spec.kind.label());
    Ok(match spec.kind {
        GeneratorKind::Iid(law) => iid(law, spec.length, &mut rng),
        GeneratorKind::Fgn { hurst } => fgn(hurst, spec.length, &mut rng)?,
        GeneratorKind::Cascade { sigma, levels } => cascade(sigma, levels, spec.length, &mut rng),
    })
}

/// Zero-mean innovations for the volume transform. The cascade is positive,
/// so it gets independent random signs: magnitudes keep the cascade's
/// correlations while the signed series is uncorrelated.
pub fn generate_signed(spec: &GeneratorSpec) -> Result<Vec<f64>> {
    let mut x = generate(spec)?;
    if let GeneratorKind::Cascade { .. } = spec.kind {
        let mut rng = rng_for(spec.seed, "cascade-sign");
        for v in &mut x {
            if rng.random::<bool>() {
                *v = -*v;
            }
        }
    }
    Ok(x)
}

fn iid(law: IidLaw, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match law {
        IidLaw::Normal { mean, std } => {
            let d = Normal::new(mean, std).expect("validated");
            (0..n).map(|_| d.sample(rng)).collect()
        }
        IidLaw::Laplace { scale } => (0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>() - 0.5;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            })
            .collect(),
    }
}

/// Autocovariance of unit-variance fGn at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Davies-Harte: embed the covariance in a circulant of size `2m`, scale
/// complex Gaussian noise by the root eigenvalues, and transform back.
fn fgn(hurst: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let m = n.next_power_of_two();
    let size = 2 * m;
    let mut buf: Vec<Complex<f64>> = (0..size)
        .map(|j| {
            let lag = if j <= m { j } else { size - j };
            Complex::new(fgn_autocovariance(hurst, lag), 0.0)
        })
        .collect();
    let fft = FftPlannerScalar::new().plan_fft_forward(size);
    fft.process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let lambda = z.re;
        if lambda < -1e-8 * size as f64 {
            return Err(Error::InvalidInput(format!(
                "circulant embedding has negative eigenvalue {lambda} at {k}"
            )));
        }
        let amp = (lambda.max(0.0) / size as f64).sqrt();
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        *z = Complex::new(amp * a, amp * b);
    }
    fft.process(&mut buf);
    Ok(buf[..n].iter().map(|z| z.re).collect())
}

/// Dyadic cascade: each of `levels` generations splits every cell in two and
/// multiplies each half by an independent `exp(N(-sigma^2/2, sigma^2))`
/// weight (mean 1). With fewer than `log2(n)` levels, leaves cover several
/// consecutive points.
fn cascade(sigma: f64, levels: Option<u32>, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let levels = levels.unwrap_or_else(|| n.next_power_of_two().trailing_zeros().max(1));
    let d = LogNormal::new(-sigma * sigma / 2.0, sigma).expect("validated");
    let mut w = vec![1.0f64];
    for _ in 0..levels {
        w = w
            .iter()
            .flat_map(|&p| [p * d.sample(rng), p * d.sample(rng)])
            .collect();
    }
    let leaves = w.len();
    (0..n)
        .map(|i| if n > leaves { w[i * leaves / n] } else { w[i] })
        .collect()
}

/// What a stock should look like; the corpus builder fills in seeds, sizes
/// and dates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StockPlan {
    pub kind: GeneratorKind,
    /// Number of daily records; the generator produces `lifetime - 1` returns.
    pub lifetime: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub seed: u64,
    /// Target standard deviation of daily log-volume changes.
    pub return_std: f64,
    /// Cap on the log-volume range; the step size shrinks to respect it so
    /// that integer volumes stay far from 0 and from overflow.
    pub max_log_span: f64,
    /// Median and log-std of the base daily volume.
    pub volume_median: f64,
    pub volume_log_std: f64,
    pub price_median: f64,
    pub price_log_std: f64,
    pub price_return_std: f64,
    pub shares_median: f64,
    pub shares_log_std: f64,
    pub start_date: NaiveDate,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            seed: 0,
            return_std: 0.03,
            max_log_span: 8.0,
            volume_median: 3e6,
            volume_log_std: 1.0,
            price_median: 20.0,
            price_log_std: 0.8,
            price_return_std: 0.02,
            shares_median: 5e7,
            shares_log_std: 1.2,
            start_date: NaiveDate::from_ymd_opt(1989, 1, 3).expect("valid date"),
        }
    }
}

/// Ground truth for one synthetic stock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedStock {
    pub ticker: String,
    pub generator: GeneratorSpec,
    pub lifetime: usize,
    /// Step size applied to the innovations.
    pub volume_step: f64,
    /// Mean of `exp(log-volume)`, i.e. the mean volume before rounding.
    pub base_volume: f64,
    pub base_close: f64,
    pub shares_outstanding: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Planted {
    pub options: SynthOptions,
    pub stocks: Vec<PlantedStock>,
}

pub fn ticker_for(index: usize) -> String {
    format!("S{index:05}")
}

/// Builds `n_stocks` synthetic stocks from `rule(index)`.
///
/// Daily volume is `round(V0 * exp(W))` where `W` is the cumulative sum of
/// scaled innovations, normalized so `mean(exp(W)) = 1`; its log return is
/// the innovation itself up to rounding, so the volatility series inherits
/// the generator's correlations. Close prices follow an independent
/// log-normal walk and shares outstanding are constant.
pub fn synth_corpus<F>(
    n_stocks: usize,
    rule: F,
    opts: &SynthOptions,
    par: Parallelism,
) -> Result<(Corpus, Planted)>
where
    F: Fn(usize) -> StockPlan + Sync,
{
    if n_stocks == 0 {
        return Err(Error::InvalidInput("n_stocks must be at least 1".into()));
    }
    let idx: Vec<usize> = (0..n_stocks).collect();
    let built = map_ordered(&idx, par, |&i| build_stock(i, rule(i), opts));
    let mut stocks = Vec::with_capacity(n_stocks);
    let mut planted = Vec::with_capacity(n_stocks);
    for r in built {
        let (s, p) = r?;
        stocks.push(s);
        planted.push(p);
    }
    let min_lifetime = stocks.iter().map(|s| s.records.len()).min().unwrap_or(0);
    Ok((
        Corpus::new(stocks, min_lifetime),
        Planted {
            options: *opts,
            stocks: planted,
        },
    ))
}

fn build_stock(
    i: usize,
    plan: StockPlan,
    opts: &SynthOptions,
) -> Result<(DailySeries, PlantedStock)> {
    if plan.lifetime < 3 {
        return Err(Error::InvalidInput(format!(
            "lifetime must be at least 3, got {}",
            plan.lifetime
        )));
    }
    let ticker = ticker_for(i);
    let generator = GeneratorSpec {
        kind: plan.kind,
        length: plan.lifetime - 1,
        seed: derive_seed(opts.seed, &ticker),
    };
    let x = generate_signed(&generator)?;
    let mut rng = rng_for(opts.seed, &format!("{ticker}/sizes"));
    let lognormal = |median: f64, s: f64, rng: &mut ChaCha8Rng| {
        LogNormal::new(median.ln(), s)
            .map_err(|e| Error::InvalidInput(format!("size law: {e}")))
            .map(|d| d.sample(rng))
    };
    let base_volume = lognormal(opts.volume_median, opts.volume_log_std, &mut rng)?;
    let base_close = lognormal(opts.price_median, opts.price_log_std, &mut rng)?;
    let shares = lognormal(opts.shares_median, opts.shares_log_std, &mut rng)?
        .round()
        .max(1.0) as u64;

    let std = crate::stats::population_variance(&x).unwrap_or(0.0).sqrt();
    let unit: Vec<f64> = if std > 0.0 {
        x.iter().map(|v| v / std).collect()
    } else {
        x
    };
    let (log_v, volume_step) = bounded_walk(&unit, opts.return_std, opts.max_log_span);

    let noise: Vec<f64> = (1..plan.lifetime)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let (log_p, _) = bounded_walk(&noise, opts.price_return_std, opts.max_log_span);

    let dates = business_days(opts.start_date, plan.lifetime);
    let records = (0..plan.lifetime)
        .map(|t| DailyRecord {
            date: dates[t],
            volume: (base_volume * log_v[t].exp()).round().max(1.0) as u64,
            close: base_close * log_p[t].exp(),
            shares_outstanding: Some(shares),
        })
        .collect();
    Ok((
        DailySeries {
            ticker: ticker.clone(),
            records,
        },
        PlantedStock {
            ticker,
            generator,
            lifetime: plan.lifetime,
            volume_step,
            base_volume,
            base_close,
            shares_outstanding: shares,
        },
    ))
}

/// Generator family for a [`Recipe`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Iid,
    Fgn,
    Cascade,
}

/// Declarative corpus layout.
///
/// Lifetimes are either fixed or stratified log-uniform over
/// `[min, max]`, which puts equal numbers of records into equal-width
/// lifetime bins. With `hurst_range`, fGn persistence rises linearly with
/// lifetime from the first to the second value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub family: Family,
    pub n_stocks: usize,
    pub lifetime: (usize, usize),
    pub hurst: f64,
    pub hurst_range: Option<(f64, f64)>,
    pub sigma: f64,
    pub levels: Option<u32>,
}

impl Recipe {
    pub fn new(family: Family, n_stocks: usize, lifetime: usize) -> Self {
        Recipe {
            family,
            n_stocks,
            lifetime: (lifetime, lifetime),
            hurst: 0.8,
            hurst_range: None,
            sigma: 0.4,
            levels: None,
        }
    }

    pub fn plan(&self, i: usize) -> StockPlan {
        let (lo, hi) = self.lifetime;
        let lifetime = if lo == hi {
            lo
        } else {
            let u = (i as f64 + 0.5) / self.n_stocks as f64;
            ((lo as f64).ln() + u * ((hi as f64).ln() - (lo as f64).ln()))
                .exp()
                .round() as usize
        };
        let hurst = match self.hurst_range {
            Some((h0, h1)) if hi > lo => h0 + (h1 - h0) * (lifetime - lo) as f64 / (hi - lo) as f64,
            _ => self.hurst,
        };
        let kind = match self.family {
            Family::Iid => GeneratorKind::Iid(IidLaw::default()),
            Family::Fgn => GeneratorKind::Fgn { hurst },
            Family::Cascade => GeneratorKind::Cascade {
                sigma: self.sigma,
                levels: self.levels,
            },
        };
        StockPlan { kind, lifetime }
    }

    pub fn build(&self, opts: &SynthOptions, par: Parallelism) -> Result<(Corpus, Planted)> {
        if self.lifetime.0 > self.lifetime.1 {
            return Err(Error::InvalidInput("lifetime range is reversed".into()));
        }
        synth_corpus(self.n_stocks, |i| self.plan(i), opts, par)
    }
}

/// `W = step * cumsum(x)` from 0, with the step reduced if `W` would span
/// more than `max_span`, shifted so `mean(exp(W)) = 1`.
fn bounded_walk(x: &[f64], step: f64, max_span: f64) -> (Vec<f64>, f64) {
    let mut c = Vec::with_capacity(x.len() + 1);
    let mut acc = 0.0;
    c.push(0.0);
    for v in x {
        acc += v;
        c.push(acc);
    }
    let (lo, hi) = c
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let span = hi - lo;
    let step = if span * step > max_span {
        max_span / span
    } else {
        step
    };
    let mid = (lo + hi) / 2.0;
    let w: Vec<f64> = c.iter().map(|v| step * (v - mid)).collect();
    let log_mean = (w.iter().map(|v| v.exp()).sum::<f64>() / w.len() as f64).ln();
    (w.iter().map(|v| v - log_mean).collect(), step)
}

fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volatility::log_returns;

    fn spec(kind: GeneratorKind, length: usize, seed: u64) -> GeneratorSpec {
        GeneratorSpec { kind, length, seed }
    }

    #[test]
    fn iid_normal_moments() {
        let x = generate(&spec(GeneratorKind::Iid(IidLaw::default()), 1 << 16, 7)).unwrap();
        let m = crate::stats::mean(&x).unwrap();
        let s = crate::stats::population_variance(&x).unwrap().sqrt();
        assert!(m.abs() < 0.02, "{m}");
        assert!((s - 1.0).abs() < 0.02, "{s}");
    }

    #[test]
    fn laplace_variance() {
        let x = generate(&spec(
            GeneratorKind::Iid(IidLaw::Laplace { scale: 1.0 }),
            1 << 16,
            3,
        ))
        .unwrap();
        let v = crate::stats::population_variance(&x).unwrap();
        assert!((v - 2.0).abs() < 0.1, "{v}");
    }

    #[test]
    fn same_seed_same_bits() {
        for kind in [
            GeneratorKind::Iid(IidLaw::default()),
            GeneratorKind::Fgn { hurst: 0.7 },
            GeneratorKind::Cascade {
                sigma: 0.4,
                levels: None,
            },
        ] {
            let a = generate(&spec(kind, 1000, 11)).unwrap();
            let b = generate(&spec(kind, 1000, 11)).unwrap();
            let c = generate(&spec(kind, 1000, 12)).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
            assert_eq!(a.len(), 1000);
        }
    }

    #[test]
    fn fgn_lag_one_autocorrelation() {
        for h in [0.3, 0.6, 0.8, 0.9] {
            let x = generate(&spec(GeneratorKind::Fgn { hurst: h }, 1 << 16, 5)).unwrap();
            let m = crate::stats::mean(&x).unwrap();
            let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
            let c1: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
            let expected = 2f64.powf(2.0 * h - 1.0) - 1.0;
            assert!(
                (c1 / c0 - expected).abs() < 0.02,
                "H={h}: {} vs {expected}",
                c1 / c0
            );
        }
    }

    #[test]
    fn fgn_autocovariance_values() {
        assert_eq!(fgn_autocovariance(0.7, 0), 1.0);
        // H = 1/2 is white noise.
        assert!(fgn_autocovariance(0.5, 3).abs() < 1e-15);
    }

    #[test]
    fn cascade_is_positive_with_unit_mean() {
        let x = generate(&spec(
            GeneratorKind::Cascade {
                sigma: 0.3,
                levels: None,
            },
            1 << 14,
            2,
        ))
        .unwrap();
        assert!(x.iter().all(|v| *v > 0.0));
        let m = crate::stats::mean(&x).unwrap();
        assert!((m - 1.0).abs() < 0.3, "{m}");
        let coarse = generate(&spec(
            GeneratorKind::Cascade {
                sigma: 0.3,
                levels: Some(2),
            },
            8,
            2,
        ))
        .unwrap();
        assert_eq!(coarse[0], coarse[1]);
        assert_eq!(coarse[6], coarse[7]);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate(&spec(GeneratorKind::Fgn { hurst: 1.0 }, 100, 0)).is_err());
        assert!(generate(&spec(GeneratorKind::Fgn { hurst: 0.5 }, 1, 0)).is_err());
        assert!(generate(&spec(
            GeneratorKind::Cascade {
                sigma: 0.3,
                levels: Some(0)
            },
            100,
            0
        ))
        .is_err());
        assert!(generate(&spec(
            GeneratorKind::Iid(IidLaw::Normal {
                mean: 0.0,
                std: 0.0
            }),
            100,
            0
        ))
        .is_err());
    }

    #[test]
    fn single_stock_corpus() {
        let plan = |_| StockPlan {
            kind: GeneratorKind::Iid(IidLaw::default()),
            lifetime: 400,
        };
        let (corpus, planted) =
            synth_corpus(1, plan, &SynthOptions::default(), Parallelism::Sequential).unwrap();
        assert_eq!(corpus.len(), 1);
        let s = &corpus.stocks[0];
        assert_eq!(s.lifetime_days(), 400);
        assert!(s.records.windows(2).all(|w| w[0].date < w[1].date));
        assert!(s.records.iter().all(|r| r.volume > 0 && r.close > 0.0));
        assert_eq!(planted.stocks[0].generator.length, 399);
        assert_eq!(
            s.records[0].date,
            NaiveDate::from_ymd_opt(1989, 1, 3).unwrap()
        );
    }

    #[test]
    fn volume_returns_track_innovations() {
        let kind = GeneratorKind::Fgn { hurst: 0.8 };
        let (corpus, planted) = synth_corpus(
            2,
            |_| StockPlan {
                kind,
                lifetime: 3000,
            },
            &SynthOptions::default(),
            Parallelism::Sequential,
        )
        .unwrap();
        for (s, p) in corpus.stocks.iter().zip(&planted.stocks) {
            let x = generate_signed(&p.generator).unwrap();
            let r = log_returns(&s.volumes()).unwrap();
            assert_eq!(r.dropped, 0);
            let c = crate::stats::pearson(&x, &r.values).unwrap();
            assert!(c > 0.999, "{c}");
        }
    }

    #[test]
    fn recipe_spreads_lifetimes_and_plants_persistence() {
        let r = Recipe {
            lifetime: (500, 5000),
            hurst_range: Some((0.6, 0.9)),
            ..Recipe::new(Family::Fgn, 10, 500)
        };
        let plans: Vec<StockPlan> = (0..10).map(|i| r.plan(i)).collect();
        assert!(plans.windows(2).all(|w| w[0].lifetime < w[1].lifetime));
        assert!(plans[0].lifetime > 500 && plans[9].lifetime < 5000);
        let h = |p: &StockPlan| match p.kind {
            GeneratorKind::Fgn { hurst } => hurst,
            _ => unreachable!(),
        };
        assert!(h(&plans[0]) > 0.6 && h(&plans[9]) < 0.9 && h(&plans[0]) < h(&plans[9]));
    }

    #[test]
    fn corpus_independent_of_parallelism() {
        let plan = |i: usize| StockPlan {
            kind: GeneratorKind::Cascade {
                sigma: 0.4,
                levels: None,
            },
            lifetime: 500 + i,
        };
        let opts = SynthOptions {
            seed: 9,
            ..SynthOptions::default()
        };
        let a = synth_corpus(6, plan, &opts, Parallelism::Sequential).unwrap();
        let b = synth_corpus(6, plan, &opts, Parallelism::Threads(3)).unwrap();
        assert_eq!(a, b);
    }
}
