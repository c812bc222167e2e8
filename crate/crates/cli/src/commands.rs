use std::collections::BTreeMap;
use std::fmt::Write as _;

use retint::conditional::{
    conditional_analysis, interval_pairs, memory_summary, OctileMode, LOW_STATISTICS_PAIRS,
    N_OCTILES,
};
use retint::dfa::alpha_by_factor;
use retint::factors::{
    bin_stocks, compute_factors, default_edges, factor_correlations, gamma_by_factor,
    lifetime_sweep_edges, Factor, FactorBinning, FactorVector,
};
use retint::fitting::{
    collapse_distance_cells, fit_exponential_in, fit_power_tail_in, gamma_sensitivity,
    hill_estimator, log_bin_cells, Cell, FitWindow, DEFAULT_SENSITIVITY_GRID,
};
use retint::ingest::write_corpus;
use retint::intervals::{IntervalSeries, PooledIntervals};
use retint::pipeline::{intervals_at, shuffled, stock_alphas, SeriesKind, StockVolatility};
use retint::seed::derive_seed;
use retint::stats::{ols, spearman, spearman_critical_5pct, t975};
use retint::Parallelism;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{ConditionalArgs, DfaArgs, FactorsArgs, IntervalsArgs, OctilesArg, SynthArgs};
use crate::context::{build_synthetic, recipe, Context};
use crate::output::{cell, pdf_tsv, q_tag, OutDir};
use crate::{CliError, Outcome};

/// Upper end of the per-bin tail-fit window when `--x-max` is absent.
const FACTOR_X_MAX: f64 = 10.0;
/// Largest polynomial order accepted for detrending.
const MAX_DFA_ORDER: usize = 4;

fn result_json<T: Serialize>(r: retint::Result<T>) -> Value {
    match r {
        Ok(v) => json!(v),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

/// Rank and least-squares trend of `y` against `x`. The slope's t statistic
/// is compared with the two-sided 5% critical value.
fn trend(points: &[(f64, f64)]) -> Value {
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let n = points.len();
    let fit = ols(&x, &y);
    let t = fit
        .filter(|f| f.slope_stderr > 0.0)
        .map(|f| f.slope / f.slope_stderr);
    json!({
        "n": n,
        "spearman": spearman(&x, &y),
        "spearman_critical": spearman_critical_5pct(n),
        "slope": fit.map(|f| f.slope),
        "slope_stderr": fit.map(|f| f.slope_stderr),
        "t": t,
        "t_critical": n.checked_sub(2).and_then(t975),
    })
}

fn window(ctx: &Context, default_x_max: f64) -> FitWindow {
    FitWindow {
        x_min: ctx.args.x_min,
        x_max: ctx.args.x_max.unwrap_or(default_x_max),
        min_count: ctx.args.min_bin_count,
    }
}

fn q_flags(t: &retint::pipeline::ThresholdIntervals) -> Value {
    json!({
        "q": t.q,
        "stocks": t.pooled.as_ref().map_or(0, |p| p.stocks.len()),
        "intervals": t.pooled.as_ref().map_or(0, PooledIntervals::len),
        "insufficient_stocks": t.insufficient,
        "failed_stocks": t.failed,
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(m), Value::Object(extra)) = (&mut a, b) {
        m.extend(extra);
    }
    a
}

/// Largest pairwise distance in a symmetric matrix with `None` gaps.
fn max_defined(m: &[Vec<Option<f64>>]) -> Option<f64> {
    m.iter()
        .flatten()
        .flatten()
        .copied()
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

fn pairwise_ks(cells: &[Option<Vec<Cell>>]) -> retint::Result<Vec<Vec<Option<f64>>>> {
    let n = cells.len();
    let mut m = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if let (Some(a), Some(b)) = (&cells[i], &cells[j]) {
                let d = collapse_distance_cells(a, b)?;
                m[i][j] = Some(d);
                m[j][i] = Some(d);
            }
        }
        if cells[i].is_some() {
            m[i][i] = Some(0.0);
        }
    }
    Ok(m)
}

fn tail_summary(
    cells: &[Cell],
    samples: &[f64],
    ctx: &Context,
    w: &FitWindow,
) -> retint::Result<Value> {
    let pdf = log_bin_cells(cells, ctx.args.bins_per_decade)?;
    let expo = FitWindow {
        x_min: 0.0,
        x_max: f64::INFINITY,
        min_count: w.min_count,
    };
    Ok(json!({
        "power": result_json(fit_power_tail_in(&pdf, w)),
        "exponential": result_json(fit_exponential_in(&pdf, &expo)),
        "hill": result_json(hill_estimator(samples, w.x_min)),
        "sensitivity": gamma_sensitivity(&pdf, &DEFAULT_SENSITIVITY_GRID, w.min_count),
    }))
}

pub fn intervals(a: &IntervalsArgs) -> Result<Outcome, CliError> {
    let mut ctx = Context::new(&a.common)?;
    let vols = ctx.volatilities(ctx.series_kind());
    let control = shuffled(&vols, derive_seed(ctx.args.seed, "control"), ctx.par);
    let w = window(&ctx, f64::INFINITY);
    let mut per_q = Vec::new();
    let mut scaled_cells = Vec::new();
    let mut raw_cells = Vec::new();
    let mut dump = String::from("ticker\tq\ttau\n");
    for &q in &ctx.args.thresholds.clone() {
        let t = intervals_at(&vols, q, ctx.par)?;
        let Some(pooled) = &t.pooled else {
            per_q.push(merge(q_flags(&t), json!({ "empty": true })));
            scaled_cells.push(None);
            raw_cells.push(None);
            continue;
        };
        let tag = q_tag(q);
        let sc = pooled.scaled_cells();
        let rc = pooled.raw_cells();
        ctx.emit(
            format!("pdf_q{tag}.tsv"),
            pdf_tsv(&log_bin_cells(&rc, ctx.args.bins_per_decade)?),
        );
        ctx.emit(
            format!("pdf_scaled_q{tag}.tsv"),
            pdf_tsv(&log_bin_cells(&sc, ctx.args.bins_per_decade)?),
        );
        let fits = tail_summary(&sc, &pooled.scaled_values(), &ctx, &w)?;
        let ct = intervals_at(&control, q, ctx.par)?;
        let control_json = match &ct.pooled {
            Some(cp) => {
                let cc = cp.scaled_cells();
                ctx.emit(
                    format!("pdf_shuffled_q{tag}.tsv"),
                    pdf_tsv(&log_bin_cells(&cc, ctx.args.bins_per_decade)?),
                );
                json!({
                    "intervals": cp.len(),
                    "fits": tail_summary(&cc, &cp.scaled_values(), &ctx, &w)?,
                    "ks_vs_unshuffled": collapse_distance_cells(&sc, &cc)?,
                })
            }
            None => json!({ "empty": true }),
        };
        if a.dump_intervals {
            for s in &pooled.stocks {
                for tau in &s.intervals.taus {
                    let _ = writeln!(dump, "{}\t{q}\t{tau}", s.ticker);
                }
            }
        }
        per_q.push(merge(
            q_flags(&t),
            json!({
                "empty": false,
                "mean_tau": pooled.per_stock_means(),
                "fits": fits,
                "shuffled_control": control_json,
            }),
        ));
        scaled_cells.push(Some(sc));
        raw_cells.push(Some(rc));
    }
    if scaled_cells.iter().all(Option::is_none) {
        return Err(CliError::Insufficient(
            "no stock has return intervals at any threshold".into(),
        ));
    }
    if a.dump_intervals {
        ctx.emit("intervals.tsv".into(), dump);
    }
    let scaled_ks = pairwise_ks(&scaled_cells)?;
    let raw_ks = pairwise_ks(&raw_cells)?;
    let body = json!({
        "thresholds": per_q,
        "collapse": {
            "q": ctx.args.thresholds,
            "scaled_ks": scaled_ks,
            "raw_ks": raw_ks,
            "max_scaled_ks": max_defined(&scaled_ks),
            "max_raw_ks": max_defined(&raw_ks),
        },
    });
    ctx.finish("intervals", body)
}

pub fn conditional(a: &ConditionalArgs) -> Result<Outcome, CliError> {
    let mut ctx = Context::new(&a.common)?;
    let mode = match a.octiles {
        OctilesArg::Geometric => OctileMode::Geometric,
        OctilesArg::Quantile => OctileMode::Quantile,
    };
    let vols = ctx.volatilities(ctx.series_kind());
    let mut per_q = Vec::new();
    let mut any = false;
    for &q in &ctx.args.thresholds.clone() {
        let t = intervals_at(&vols, q, ctx.par)?;
        let analysis = match &t.pooled {
            None => Err(retint::Error::Insufficient("no stock has intervals".into())),
            Some(p) => conditional_analysis(p, mode, ctx.args.bins_per_decade),
        };
        let an = match analysis {
            Ok(an) => an,
            Err(retint::Error::Insufficient(m)) => {
                per_q.push(merge(q_flags(&t), json!({ "empty": true, "note": m })));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        any = true;
        let pooled = t.pooled.as_ref().expect("analysis implies intervals");
        let tag = q_tag(q);
        for (i, o) in an.octiles.iter().enumerate() {
            ctx.emit(format!("cond_q{tag}_Q{}.tsv", i + 1), pdf_tsv(&o.pdf));
        }
        let pairs = interval_pairs(pooled);
        let memory = memory_summary(&pairs, &an.partition);
        let mut groups: Vec<Vec<Cell>> = vec![Vec::new(); N_OCTILES];
        for p in &pairs {
            groups[an.partition.assign(p.prev_scaled)].push(p.cell);
        }
        let groups: Vec<Option<Vec<Cell>>> = groups
            .into_iter()
            .map(|g| (g.len() >= LOW_STATISTICS_PAIRS).then_some(g))
            .collect();
        let ks = pairwise_ks(&groups)?;
        let mixture = an.mixture();
        let rel_err = |reference: &retint::fitting::BinnedPdf, min_mass: f64| -> Option<f64> {
            mixture
                .iter()
                .zip(&reference.densities)
                .zip(&reference.mass)
                .filter(|((_, d), m)| **m >= min_mass && **d > 0.0)
                .map(|((x, d), _)| (x - d).abs() / d)
                .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
        };
        per_q.push(merge(
            q_flags(&t),
            json!({
                "empty": false,
                "partition": an.partition,
                "total_pairs": an.total_pairs,
                "contributing_stocks": an.contributing_stocks,
                "octiles": an.octiles.iter().map(|o| json!({
                    "label": o.label,
                    "lower": o.lower,
                    "upper": o.upper,
                    "pairs": o.pairs,
                    "low_statistics": o.low_statistics,
                })).collect::<Vec<_>>(),
                "memory_summary": memory,
                "octile_ks": ks,
                "max_octile_ks": max_defined(&ks),
                "mixture": {
                    "max_rel_error_vs_pair_marginal": rel_err(&an.pair_marginal, ctx.args.min_bin_count),
                    "max_rel_error_vs_unconditional": rel_err(&an.unconditional, ctx.args.min_bin_count),
                },
            }),
        ));
    }
    if !any {
        return Err(CliError::Insufficient(
            "no consecutive interval pairs at any threshold".into(),
        ));
    }
    ctx.finish(
        "conditional",
        json!({ "octile_mode": mode, "thresholds": per_q }),
    )
}

fn binnings(
    factors: &[FactorVector],
    lifetime_sweep: bool,
) -> Result<Vec<(Factor, FactorBinning)>, CliError> {
    Factor::ALL
        .iter()
        .filter_map(|&f| {
            let edges = if f == Factor::Lifetime && lifetime_sweep {
                Ok(lifetime_sweep_edges(f.default_bins()))
            } else {
                default_edges(factors, f)
            };
            match edges {
                Ok(e) => Some(
                    bin_stocks(factors, f, &e)
                        .map(|b| (f, b))
                        .map_err(CliError::from),
                ),
                Err(retint::Error::Insufficient(_)) => None,
                Err(e) => Some(Err(e.into())),
            }
        })
        .collect()
}

fn binning_json(b: &FactorBinning) -> Value {
    json!({ "edges": b.edges, "unbinned": b.unbinned, "undefined": b.undefined })
}

fn bin_center(lower: f64, upper: f64, f: Factor) -> f64 {
    if f.is_size() {
        (lower * upper).sqrt()
    } else {
        0.5 * (lower + upper)
    }
}

pub fn dfa(a: &DfaArgs) -> Result<Outcome, CliError> {
    if a.order == 0 || a.order > MAX_DFA_ORDER {
        return Err(CliError::Config(format!(
            "--order must be between 1 and {MAX_DFA_ORDER}, got {}",
            a.order
        )));
    }
    let mut ctx = Context::new(&a.common)?;
    let factors = compute_factors(&ctx.corpus, ctx.par)?;
    let binnings = binnings(&factors, a.lifetime_sweep)?;
    let mut series = Vec::new();
    let mut tables: Vec<(Factor, String)> = binnings
        .iter()
        .map(|(f, _)| {
            (
                *f,
                String::from("series\tlower\tupper\tcount\tmean_alpha\tstd_alpha\tabove_unity\n"),
            )
        })
        .collect();
    for kind in [SeriesKind::Volume, SeriesKind::Price] {
        let vols: Vec<StockVolatility> = ctx.volatilities(kind);
        let (alphas, failed) = stock_alphas(&vols, a.order, ctx.par);
        let values: Vec<f64> = alphas.values().copied().collect();
        let mut by_factor = serde_json::Map::new();
        for ((f, b), (_, table)) in binnings.iter().zip(tables.iter_mut()) {
            let bins = alpha_by_factor(&alphas, b);
            for bin in &bins {
                let _ = writeln!(
                    table,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    kind.label(),
                    bin.lower,
                    bin.upper,
                    bin.count,
                    cell(bin.mean_alpha),
                    cell(bin.std_alpha),
                    bin.above_unity
                );
            }
            let pts: Vec<(f64, f64)> = bins
                .iter()
                .filter_map(|b| Some((bin_center(b.lower, b.upper, *f), b.mean_alpha?)))
                .collect();
            by_factor.insert(
                f.label().into(),
                json!({ "bins": bins, "trend": trend(&pts), "binning": binning_json(b) }),
            );
        }
        series.push(json!({
            "series": kind.label(),
            "stocks_with_alpha": alphas.len(),
            "mean_alpha": retint::stats::mean(&values),
            "above_unity": values.iter().filter(|&&v| v > 1.0).count(),
            "failed": failed,
            "by_factor": by_factor,
        }));
    }
    let total: usize = series
        .iter()
        .map(|s| s["stocks_with_alpha"].as_u64().unwrap_or(0) as usize)
        .sum();
    if total == 0 {
        return Err(CliError::Insufficient("DFA failed for every stock".into()));
    }
    for (f, table) in tables {
        ctx.emit(format!("dfa_alpha_by_{}.tsv", f.label()), table);
    }
    ctx.finish(
        "dfa",
        json!({ "order": a.order, "lifetime_sweep": a.lifetime_sweep, "series": series }),
    )
}

pub fn factors(a: &FactorsArgs) -> Result<Outcome, CliError> {
    if !(a.q > 0.0 && a.q.is_finite()) {
        return Err(CliError::Config(format!(
            "--q must be positive, got {}",
            a.q
        )));
    }
    let mut ctx = Context::new(&a.common)?;
    let vols = ctx.volatilities(ctx.series_kind());
    let t = intervals_at(&vols, a.q, ctx.par)?;
    let Some(pooled) = &t.pooled else {
        return Err(CliError::Insufficient(format!(
            "no stock has return intervals at q={}",
            a.q
        )));
    };
    let intervals: BTreeMap<String, IntervalSeries> = pooled
        .stocks
        .iter()
        .map(|s| (s.ticker.clone(), s.intervals.clone()))
        .collect();
    let factors = compute_factors(&ctx.corpus, ctx.par)?;
    let w = window(&ctx, FACTOR_X_MAX);
    let mut by_factor = serde_json::Map::new();
    for (f, b) in binnings(&factors, a.lifetime_sweep)? {
        let bins = gamma_by_factor(&intervals, &b, ctx.args.bins_per_decade, &w);
        let mut table = String::from(
            "lower\tupper\tstock_count\tcontributing\tinterval_count\tgamma\tstderr\tr2\tn_tail\n",
        );
        for bin in &bins {
            let _ = writeln!(
                table,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                bin.lower,
                bin.upper,
                bin.stock_count,
                bin.contributing,
                bin.interval_count,
                cell(bin.fit.map(|x| x.gamma)),
                cell(bin.fit.map(|x| x.stderr)),
                cell(bin.fit.map(|x| x.r_squared)),
                bin.fit.map(|x| x.n_tail.to_string()).unwrap_or_default(),
            );
        }
        ctx.emit(format!("gamma_by_{}.tsv", f.label()), table);
        let pts: Vec<(f64, f64)> = bins
            .iter()
            .filter_map(|x| Some((bin_center(x.lower, x.upper, f), x.fit?.gamma)))
            .collect();
        by_factor.insert(
            f.label().into(),
            json!({ "bins": bins, "trend": trend(&pts), "binning": binning_json(&b) }),
        );
    }
    for (i, fa) in Factor::ALL.iter().enumerate() {
        for fb in &Factor::ALL[i + 1..] {
            let mut s = format!("ticker\t{fa}\t{fb}\n");
            for v in &factors {
                if let (Some(x), Some(y)) = (v.value(*fa), v.value(*fb)) {
                    let _ = writeln!(s, "{}\t{x}\t{y}", v.ticker);
                }
            }
            ctx.emit(format!("scatter_{fa}_vs_{fb}.tsv"), s);
        }
    }
    let body = json!({
        "q": a.q,
        "fit_window": w,
        "lifetime_sweep": a.lifetime_sweep,
        "intervals": q_flags(&t),
        "factors": factors,
        "gamma_by_factor": by_factor,
        "correlations": result_json(factor_correlations(&factors)),
    });
    ctx.finish("factors", body)
}

pub fn synth(a: &SynthArgs) -> Result<Outcome, CliError> {
    let g = a.generator();
    let recipe = recipe(&g)?;
    let par = Parallelism::from_jobs(a.jobs);
    let (corpus, planted) = build_synthetic(&g, a.seed, par)?;
    let mut out = OutDir::create(&a.out)?;
    write_corpus(&corpus, &out.root)?;
    out.files
        .extend(corpus.stocks.iter().map(|s| format!("{}.csv", s.ticker)));
    out.write_json("planted.json", &planted)?;
    out.write_json(
        "report.json",
        &json!({ "command": "synth", "recipe": recipe, "seed": a.seed, "stocks": corpus.len() }),
    )?;
    Ok(Outcome {
        out_dir: out.root,
        files: out.files,
    })
}
