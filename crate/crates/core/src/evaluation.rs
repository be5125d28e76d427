//! Normal-mixture truths, the L1 accuracy score and the decile coverage study.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::engines::rng::substream;
use crate::engines::Method;
use crate::error::{Error, Result};
use crate::estimator::{fit_density, interpolate, trapezoid, DensityEstimate, EstimateOptions};

const ACCURACY_POINTS: usize = 10_001;
const ACCURACY_SPAN_SDS: f64 = 5.0;
const QUANTILE_SPAN_SDS: f64 = 10.0;

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl NormalMixture {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("mixture: {msg}")));
        if weights.is_empty() || weights.len() != means.len() || weights.len() != sds.len() {
            return bad("weights, means and sds must be non-empty and of equal length");
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("weights must be nonnegative");
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return bad("weights must sum to one");
        }
        if means.iter().any(|m| !m.is_finite()) || sds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("means must be finite and sds positive");
        }
        Ok(NormalMixture { weights, means, sds })
    }

    /// `0.75 N(0, 1) + 0.25 N(3/2, (1/3)²)`, the eighth Marron-Wand density.
    pub fn mw8() -> Self {
        NormalMixture {
            weights: vec![0.75, 0.25],
            means: vec![0.0, 1.5],
            sds: vec![1.0, 1.0 / 3.0],
        }
    }

    /// Looks up a named preset.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "mw8" => Ok(Self::mw8()),
            other => Err(Error::InvalidConfig(format!("unknown mixture preset `{other}`"))),
        }
    }

    fn components(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((w, m), s)| (*w, *m, *s))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components().map(|(w, m, s)| w * std_normal_pdf((x - m) / s) / s).sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components().map(|(w, m, s)| w * std_normal_cdf((x - m) / s)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.components().map(|(w, m, _)| w * m).sum()
    }

    fn max_sd(&self) -> f64 {
        self.sds.iter().copied().fold(0.0, f64::max)
    }

    /// `[min μ - k max s, max μ + k max s]`.
    pub fn span(&self, k: f64) -> (f64, f64) {
        let lo = self.means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo - k * self.max_sd(), hi + k * self.max_sd())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = self.weights.len() - 1;
                for (j, w) in self.weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = j;
                        break;
                    }
                }
                let z: f64 = rng.sample(StandardNormal);
                self.means[pick] + self.sds[pick] * z
            })
            .collect()
    }

    /// Root of `cdf(x) = p` by bisection to an interval width of 1e-10.
    pub fn quantile(&self, p: f64) -> f64 {
        assert!(p > 0.0 && p < 1.0, "quantile level must lie in (0, 1)");
        let (mut lo, mut hi) = self.span(QUANTILE_SPAN_SDS);
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Population deciles `D_1..D_9`.
    pub fn deciles(&self) -> Vec<f64> {
        (1..=9).map(|j| self.quantile(j as f64 / 10.0)).collect()
    }
}

pub fn mixture_pdf(mix: &NormalMixture, x: f64) -> f64 {
    mix.pdf(x)
}

pub fn mixture_sample<R: Rng + ?Sized>(mix: &NormalMixture, n: usize, rng: &mut R) -> Vec<f64> {
    mix.sample(n, rng)
}

pub fn mixture_quantile(mix: &NormalMixture, p: f64) -> f64 {
    mix.quantile(p)
}

/// `100 (1 - ½ ∫|f - g|)` by the trapezoid rule on `ACCURACY_POINTS` equally
/// spaced points over `[lo, hi]`.
fn accuracy_score(lo: f64, hi: f64, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> f64 {
    let h = (hi - lo) / (ACCURACY_POINTS - 1) as f64;
    let xs: Vec<f64> = (0..ACCURACY_POINTS).map(|i| lo + h * i as f64).collect();
    let diffs: Vec<f64> = xs.iter().map(|&x| (f(x) - g(x)).abs()).collect();
    let l1 = trapezoid(&xs, &diffs);
    (100.0 * (1.0 - 0.5 * l1)).clamp(0.0, 100.0)
}

/// Accuracy of a grid estimate against a normal-mixture truth.
pub fn l1_accuracy(est: &DensityEstimate, mix: &NormalMixture) -> f64 {
    let (mlo, mhi) = mix.span(ACCURACY_SPAN_SDS);
    let lo = mlo.min(est.x[0]);
    let hi = mhi.max(est.x[est.x.len() - 1]);
    accuracy_score(lo, hi, |x| est.density_at(x), |x| mix.pdf(x))
}

/// Accuracy between two grid curves; symmetric in its arguments.
pub fn l1_accuracy_curves(xa: &[f64], ya: &[f64], xb: &[f64], yb: &[f64]) -> f64 {
    let lo = xa[0].min(xb[0]);
    let hi = xa[xa.len() - 1].max(xb[xb.len() - 1]);
    accuracy_score(lo, hi, |x| interpolate(xa, ya, x), |x| interpolate(xb, yb, x))
}

pub const MIN_COVERAGE_REPLICATIONS: usize = 50;

/// Empirical decile coverage percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub engine: Method,
    pub n: usize,
    pub level: f64,
    pub replications: usize,
    /// Replications whose fit failed; excluded from the percentages.
    pub failures: usize,
    pub failure_messages: Vec<String>,
    pub deciles: Vec<f64>,
    pub coverage_pct: Vec<f64>,
}

impl CoverageTable {
    pub fn mean_coverage(&self) -> f64 {
        self.coverage_pct.iter().sum::<f64>() / self.coverage_pct.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("engine,n,decile,coverage_pct\n");
        for (j, c) in self.coverage_pct.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", self.engine, self.n, j + 1, c));
        }
        out
    }
}

/// Random streams of replication `r`: one for the data, one for the fit.
fn replication_streams(r: usize) -> (u64, u64) {
    (2 * r as u64, 2 * r as u64 + 1)
}

fn replication_options(opts: &EstimateOptions, seed: u64, fit_stream: u64) -> EstimateOptions {
    let mut o = *opts;
    o.fit.seed = seed;
    o.fit.stream = fit_stream;
    o
}

#[cfg(feature = "parallel")]
fn map_replications<T: Send>(reps: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..reps).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_replications<T>(reps: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..reps).map(f).collect()
}

/// Repeats sample → fit → band at each population decile `replications`
/// times and reports how often the band covers the true density value.
pub fn coverage_experiment(
    mix: &NormalMixture,
    n: usize,
    replications: usize,
    opts: &EstimateOptions,
    seed: u64,
) -> Result<CoverageTable> {
    if replications < MIN_COVERAGE_REPLICATIONS {
        return Err(Error::InvalidConfig(format!(
            "coverage needs at least {MIN_COVERAGE_REPLICATIONS} replications, got {replications}"
        )));
    }
    opts.validate()?;
    let deciles = mix.deciles();
    coverage_with(mix, n, replications, opts.fit.method, opts.level, seed, |data, fit_stream| {
        let fitted = fit_density(data, &replication_options(opts, seed, fit_stream))?;
        deciles.iter().map(|&d| fitted.band_at(d, opts.level)).collect()
    })
}

/// Coverage harness with a pluggable interval source: `intervals(data,
/// fit_stream)` returns one `(lower, upper)` pair per population decile.
pub fn coverage_with<F>(
    mix: &NormalMixture,
    n: usize,
    replications: usize,
    engine: Method,
    level: f64,
    seed: u64,
    intervals: F,
) -> Result<CoverageTable>
where
    F: Fn(&[f64], u64) -> Result<Vec<(f64, f64)>> + Sync + Send,
{
    if replications == 0 {
        return Err(Error::InvalidConfig("replications must be positive".into()));
    }
    let deciles = mix.deciles();
    let truth: Vec<f64> = deciles.iter().map(|&d| mix.pdf(d)).collect();
    let outcomes = map_replications(replications, |r| {
        let (data_stream, fit_stream) = replication_streams(r);
        let data = mix.sample(n, &mut substream(seed, data_stream));
        let bands = intervals(&data, fit_stream)?;
        Ok::<Vec<bool>, Error>(bands.iter().zip(&truth).map(|(&(lo, hi), &t)| lo <= t && t <= hi).collect())
    });

    let mut hits = vec![0usize; deciles.len()];
    let mut ok = 0usize;
    let mut failure_messages = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(flags) => {
                ok += 1;
                for (h, f) in hits.iter_mut().zip(flags) {
                    *h += f as usize;
                }
            }
            Err(e) => failure_messages.push(format!("replication {r}: {e}")),
        }
    }
    let coverage_pct = hits
        .iter()
        .map(|&h| if ok > 0 { 100.0 * h as f64 / ok as f64 } else { f64::NAN })
        .collect();
    Ok(CoverageTable {
        engine,
        n,
        level,
        replications,
        failures: failure_messages.len(),
        failure_messages,
        deciles,
        coverage_pct,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub replication: usize,
    pub engine: Method,
    pub n: usize,
    /// `None` when the fit failed; see `error`.
    pub accuracy: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

/// Accuracy scores of repeated fits on fresh samples from `mix`.
pub fn accuracy_experiment(
    mix: &NormalMixture,
    n: usize,
    replications: usize,
    opts: &EstimateOptions,
    seed: u64,
) -> Result<Vec<AccuracyRecord>> {
    opts.validate()?;
    Ok(map_replications(replications, |r| {
        let (data_stream, fit_stream) = replication_streams(r);
        let mut rng = substream(seed, data_stream);
        let data = mix.sample(n, &mut rng);
        let o = replication_options(opts, seed, fit_stream);
        let fitted = fit_density(&data, &o);
        let (accuracy, seconds, error) = match fitted.and_then(|f| {
            let secs = f.samples.diagnostics.get("seconds").copied().unwrap_or(0.0);
            f.estimate(o.level).map(|e| (e, secs))
        }) {
            Ok((est, secs)) => (Some(l1_accuracy(&est, mix)), secs, None),
            Err(e) => (None, 0.0, Some(e.to_string())),
        };
        AccuracyRecord {
            replication: r,
            engine: opts.fit.method,
            n,
            accuracy,
            seconds,
            error,
        }
    }))
}

pub fn accuracy_csv(records: &[AccuracyRecord]) -> String {
    let mut out = String::from("replication,engine,n,accuracy,seconds\n");
    for r in records {
        let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_else(|| "NA".to_string());
        out.push_str(&format!("{},{},{},{},{}\n", r.replication, r.engine, r.n, acc, r.seconds));
    }
    out
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
