use retint::ingest::{load_corpus, Corpus, LoadOptions};
use retint::pipeline::{shuffled, stock_volatilities, SeriesKind, StockVolatility};
use retint::synth::{Family, Planted, Recipe, SynthOptions};
use retint::volatility::MomentConvention;
use retint::Parallelism;
use serde_json::{json, Value};

use crate::args::{CommonArgs, Generator, KindArg, MomentsArg, SeriesArg};
use crate::output::OutDir;
use crate::CliError;

/// Validated configuration, loaded corpus and output directory of one run.
pub struct Context<'a> {
    pub args: &'a CommonArgs,
    pub par: Parallelism,
    pub corpus: Corpus,
    pub source: Value,
    pub out: OutDir,
    pending: Vec<(String, String)>,
}

impl<'a> Context<'a> {
    pub fn new(args: &'a CommonArgs) -> Result<Self, CliError> {
        validate(args)?;
        let par = Parallelism::from_jobs(args.jobs);
        let (corpus, source) = match (&args.data_dir, args.generator()) {
            (Some(dir), None) => {
                let opts = LoadOptions {
                    min_lifetime: args.min_lifetime,
                    strict: args.strict,
                    parallelism: par,
                };
                let (corpus, summary) = load_corpus(dir, &opts)?;
                let source = json!({ "kind": "files", "load_summary": summary });
                (corpus, source)
            }
            (None, Some(g)) => {
                let (corpus, planted) = build_synthetic(&g, args.seed, par)?;
                let generated = corpus.len();
                let corpus = Corpus::new(corpus.stocks, args.min_lifetime);
                let source = json!({
                    "kind": "synthetic",
                    "recipe": recipe(&g)?,
                    "seed": planted.options.seed,
                    "generated": generated,
                    "accepted": corpus.len(),
                });
                (corpus, source)
            }
            _ => {
                return Err(CliError::Config(
                    "exactly one of --data-dir or --synth-kind is required".into(),
                ))
            }
        };
        let out = OutDir::create(&args.out)?;
        Ok(Context {
            args,
            par,
            corpus,
            source,
            out,
            pending: Vec::new(),
        })
    }

    pub fn series_kind(&self) -> SeriesKind {
        series_kind(self.args.series)
    }

    pub fn convention(&self) -> MomentConvention {
        match self.args.moments {
            MomentsArg::Population => MomentConvention::Population,
            MomentsArg::Sample => MomentConvention::Sample,
        }
    }

    /// Volatility series to analyze; shuffled when `--shuffled` is set.
    pub fn volatilities(&self, kind: SeriesKind) -> Vec<StockVolatility> {
        let v = stock_volatilities(&self.corpus, kind, self.convention(), self.par);
        if self.args.shuffled {
            shuffled(&v, self.args.seed, self.par)
        } else {
            v
        }
    }

    /// The configuration echoed into reports. Output path and thread count
    /// are left out so reports compare equal across them.
    pub fn config(&self) -> Value {
        let a = self.args;
        json!({
            "series": self.series_kind().label(),
            "thresholds": a.thresholds,
            "seed": a.seed,
            "min_lifetime": a.min_lifetime,
            "strict": a.strict,
            "shuffled": a.shuffled,
            "bins_per_decade": a.bins_per_decade,
            "x_min": a.x_min,
            "x_max": a.x_max,
            "min_bin_count": a.min_bin_count,
            "moments": self.convention(),
        })
    }

    /// Queues a file; nothing is written until [`Context::finish`].
    pub fn emit(&mut self, name: String, contents: String) {
        self.pending.push((name, contents));
    }

    pub fn finish(mut self, command: &str, mut body: Value) -> Result<crate::Outcome, CliError> {
        if let Value::Object(m) = &mut body {
            m.insert("command".into(), json!(command));
            m.insert("config".into(), self.config());
            m.insert("source".into(), self.source.clone());
            m.insert("stocks".into(), json!(self.corpus.len()));
        }
        for (name, contents) in std::mem::take(&mut self.pending) {
            self.out.write(&name, &contents)?;
        }
        self.out.write_json("report.json", &body)?;
        Ok(crate::Outcome {
            out_dir: self.out.root,
            files: self.out.files,
        })
    }
}

pub fn series_kind(s: SeriesArg) -> SeriesKind {
    match s {
        SeriesArg::Volume => SeriesKind::Volume,
        SeriesArg::Price => SeriesKind::Price,
    }
}

fn validate(a: &CommonArgs) -> Result<(), CliError> {
    let bad = |m: String| Err(CliError::Config(m));
    if a.thresholds.is_empty() {
        return bad("at least one threshold is required".into());
    }
    if let Some(q) = a.thresholds.iter().find(|q| !(**q > 0.0 && q.is_finite())) {
        return bad(format!("thresholds must be positive, got {q}"));
    }
    if a.bins_per_decade == 0 {
        return bad("--bins-per-decade must be at least 1".into());
    }
    if !(a.x_min > 0.0 && a.x_min.is_finite()) {
        return bad(format!("--x-min must be positive, got {}", a.x_min));
    }
    if let Some(x) = a.x_max {
        if !(x > a.x_min) {
            return bad(format!("--x-max {x} must exceed --x-min {}", a.x_min));
        }
    }
    if !(a.min_bin_count >= 0.0) {
        return bad("--min-bin-count must be non-negative".into());
    }
    Ok(())
}

pub fn recipe(g: &Generator) -> Result<Recipe, CliError> {
    let bad = |m: String| Err(CliError::Config(m));
    if g.n_stocks == 0 {
        return bad("number of synthetic stocks must be at least 1".into());
    }
    let lifetime = g.lifetime_range.unwrap_or((g.length, g.length));
    if lifetime.0 < 3 || lifetime.0 > lifetime.1 {
        return bad(format!("invalid synthetic lifetime range {lifetime:?}"));
    }
    if let Some((h0, h1)) = g.hurst_range {
        if g.kind != KindArg::Fgn || !(h0 > 0.0 && h0 < 1.0 && h1 > 0.0 && h1 < 1.0) {
            return bad("a Hurst range needs the fgn kind and values in (0, 1)".into());
        }
    }
    Ok(Recipe {
        family: match g.kind {
            KindArg::Iid => Family::Iid,
            KindArg::Fgn => Family::Fgn,
            KindArg::Cascade => Family::Cascade,
        },
        n_stocks: g.n_stocks,
        lifetime,
        hurst: g.hurst,
        hurst_range: g.hurst_range,
        sigma: g.sigma,
        levels: g.levels,
    })
}

pub fn build_synthetic(
    g: &Generator,
    seed: u64,
    par: Parallelism,
) -> Result<(Corpus, Planted), CliError> {
    let r = recipe(g)?;
    let opts = SynthOptions {
        seed,
        ..SynthOptions::default()
    };
    r.build(&opts, par).map_err(|e| match e {
        retint::Error::InvalidInput(m) => CliError::Config(m),
        other => CliError::Data(other),
    })
}
