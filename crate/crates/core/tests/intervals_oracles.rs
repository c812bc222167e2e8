use retint::fitting::collapse_distance_cells;
use retint::pipeline::{intervals_at, shuffled, stock_volatilities, SeriesKind, StockVolatility};
use retint::synth::{
    fgn_autocovariance, generate, Family, GeneratorKind, GeneratorSpec, Recipe, SynthOptions,
};
use retint::volatility::MomentConvention;
use retint::Parallelism;

/// Exceedance probabilities of `|x| / std(|x|) > q` for Gaussian `x`,
/// `erfc(q * sqrt(1 - 2/pi) / sqrt(2))`, computed independently.
const EXCEEDANCE: [(f64, f64); 3] = [
    (2.0, 0.227_963_831_842_742_16),
    (2.5, 0.131_804_073_032_898_93),
    (3.0, 0.070_539_474_013_252_13),
];

fn iid_vols(n_stocks: usize, length: usize) -> Vec<StockVolatility> {
    let (c, _) = Recipe::new(Family::Iid, n_stocks, length)
        .build(
            &SynthOptions {
                seed: 21,
                ..SynthOptions::default()
            },
            Parallelism::Available,
        )
        .unwrap();
    stock_volatilities(
        &c,
        SeriesKind::Volume,
        MomentConvention::Population,
        Parallelism::Available,
    )
}

#[test]
fn iid_mean_interval_matches_inverse_exceedance() {
    let vols = iid_vols(4, 100_000);
    let mut prev = 0.0;
    for (q, p) in EXCEEDANCE {
        let pooled = intervals_at(&vols, q, Parallelism::Sequential)
            .unwrap()
            .pooled
            .unwrap();
        let means = pooled.per_stock_means();
        let m = means.values().sum::<f64>() / means.len() as f64;
        assert!((m * p - 1.0).abs() < 0.03, "q={q}: mean {m} vs {}", 1.0 / p);
        // Statistically, not pathwise: higher thresholds give longer intervals.
        assert!(m > prev);
        prev = m;
    }
}

#[test]
fn shuffling_iid_series_leaves_scaled_law_unchanged() {
    let vols = iid_vols(20, 20_000);
    let shuffled = shuffled(&vols, 1, Parallelism::Available);
    let at = |v: &[StockVolatility]| {
        intervals_at(v, 2.0, Parallelism::Available)
            .unwrap()
            .pooled
            .unwrap()
            .scaled_cells()
    };
    let d = collapse_distance_cells(&at(&vols), &at(&shuffled)).unwrap();
    assert!(d < 0.03, "{d}");
}

#[test]
fn fgn_sample_autocorrelation_matches_theory() {
    for h in [0.3, 0.8] {
        let x = generate(&GeneratorSpec {
            kind: GeneratorKind::Fgn { hurst: h },
            length: 1 << 18,
            seed: 2,
        })
        .unwrap();
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        for k in [1usize, 2, 10] {
            let c = x
                .windows(k + 1)
                .map(|w| (w[0] - m) * (w[k] - m))
                .sum::<f64>()
                / n;
            let rho = c / var;
            assert!(
                (rho - fgn_autocovariance(h, k)).abs() < 0.02,
                "H={h} k={k}: {rho}"
            );
        }
    }
    // Lag-one correlation 0.5 * (2^(2H) - 2), frozen for H = 0.8.
    assert!((fgn_autocovariance(0.8, 1) - 0.515_716_566_510_398_2).abs() < 1e-12);
}
