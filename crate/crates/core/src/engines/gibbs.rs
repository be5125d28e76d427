//! Slice sampling within Gibbs.
//!
//! Each sweep updates the coefficients one at a time, coefficient `j` from
//! `H((Cᵀc)_j, v_j, C_j, C_{-j} θ_{-j})` with `v = (σβ², σβ², σ², ..., σ²)`,
//! then draws `a` and `σ²` from their Inverse-Gamma full conditionals.
//! Coefficients use the freshest values of the others (Gauss-Seidel order).

use nalgebra::DMatrix;
use rand::Rng;

use super::rng::{inverse_gamma, substream};
use super::slice::{slice_update, SliceTuning};
use super::{initial_coef, FitConfig, Method, PosteriorSamples, Stopwatch};
use crate::error::{Error, Result};
use crate::model::{Hyperparameters, PoissonSplineModel};
use crate::preprocessing::GridCounts;
use crate::splines::SplineDesign;

/// `a | σ² ~ Inverse-Gamma(1, 1/σ² + 1/sσ²)`.
pub fn draw_a<R: Rng + ?Sized>(sigma2: f64, s_sigma: f64, rng: &mut R) -> f64 {
    inverse_gamma(1.0, 1.0 / sigma2 + 1.0 / (s_sigma * s_sigma), rng)
}

/// `σ² | u, a ~ Inverse-Gamma((K+1)/2, ‖u‖²/2 + 1/a)`.
pub fn draw_sigma2<R: Rng + ?Sized>(u: &[f64], a: f64, rng: &mut R) -> f64 {
    let u2: f64 = u.iter().map(|x| x * x).sum();
    inverse_gamma(0.5 * (u.len() as f64 + 1.0), 0.5 * u2 + 1.0 / a, rng)
}

/// State of the coefficient sweep with a cached linear predictor.
struct Sweep<'m> {
    model: &'m PoissonSplineModel<'m>,
    coef: Vec<f64>,
    eta: Vec<f64>,
    offset: Vec<f64>,
    evaluations: usize,
}

impl<'m> Sweep<'m> {
    fn update_coef<R: Rng + ?Sized>(&mut self, j: usize, prior_var: f64, tuning: &SliceTuning, rng: &mut R) -> Result<()> {
        let col = self.model.design.column(j);
        let x0 = self.coef[j];
        for ((o, e), c) in self.offset.iter_mut().zip(&self.eta).zip(col) {
            *o = e - x0 * c;
        }
        let s1 = self.model.ct_counts[j];
        let offset = &self.offset;
        let log_h = |x: f64| {
            let tail: f64 = col.iter().zip(offset).map(|(c, o)| (x * c + o).exp()).sum();
            s1 * x - x * x / (2.0 * prior_var) - tail
        };
        let f0 = log_h(x0);
        if !f0.is_finite() {
            return Err(Error::NonFiniteResult("coefficient conditional is not finite at the current state"));
        }
        let draw = slice_update(x0, f0, log_h, tuning, rng)?;
        self.evaluations += draw.evaluations;
        let x1 = draw.x;
        for ((e, o), c) in self.eta.iter_mut().zip(&self.offset).zip(col) {
            *e = o + x1 * c;
        }
        self.coef[j] = x1;
        Ok(())
    }
}

pub fn fit_slice(gc: &GridCounts, sd: &SplineDesign, hp: &Hyperparameters, cfg: &FitConfig) -> Result<PosteriorSamples> {
    if cfg.method != Method::Slice {
        return Err(Error::InvalidConfig("fit_slice requires method = slice".into()));
    }
    cfg.validate()?;
    let model = PoissonSplineModel::new(gc, sd, *hp)?;
    let p = model.num_coef();
    let sb2 = hp.sigma_beta * hp.sigma_beta;
    let tuning = cfg.slice_tuning();
    let mut rng = substream(cfg.seed, cfg.stream);
    let clock = Stopwatch::start();

    let coef = initial_coef(gc, p);
    let eta = model.linear_predictor(&coef);
    let mut sweep = Sweep {
        model: &model,
        coef,
        eta,
        offset: vec![0.0; gc.len()],
        evaluations: 0,
    };
    let mut sigma2 = 1.0;
    let mut a;

    let retained = cfg.retained;
    let mut coef_draws = DMatrix::zeros(retained, p);
    let mut sigma2_draws = Vec::with_capacity(retained);
    let mut a_draws = Vec::with_capacity(retained);

    for g in 0..cfg.warmup + retained {
        // fresh predictor each sweep so rounding from incremental updates does not accumulate
        sweep.eta = model.linear_predictor(&sweep.coef);
        for j in 0..p {
            let v = if j < 2 { sb2 } else { sigma2 };
            sweep.update_coef(j, v, &tuning, &mut rng)?;
        }
        a = draw_a(sigma2, hp.s_sigma, &mut rng);
        sigma2 = draw_sigma2(&sweep.coef[2..], a, &mut rng);
        if !(sigma2.is_finite() && sigma2 > 0.0 && a.is_finite() && a > 0.0) {
            return Err(Error::NonFiniteResult("variance draw is not finite"));
        }
        if g >= cfg.warmup {
            let row = g - cfg.warmup;
            for (j, &c) in sweep.coef.iter().enumerate() {
                coef_draws[(row, j)] = c;
            }
            sigma2_draws.push(sigma2);
            a_draws.push(a);
        }
    }

    let sweeps = (cfg.warmup + retained) as f64;
    let mut diagnostics = std::collections::BTreeMap::new();
    diagnostics.insert("divergences".to_string(), 0.0);
    diagnostics.insert("mean_accept".to_string(), 1.0);
    diagnostics.insert(
        "evaluations_per_update".to_string(),
        sweep.evaluations as f64 / (sweeps * p as f64),
    );
    diagnostics.insert("seconds".to_string(), clock.seconds());
    Ok(PosteriorSamples {
        coef: coef_draws,
        sigma2: sigma2_draws,
        a: a_draws,
        method: Method::Slice,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocessing::unit_grid;

    fn mean_sd(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    }

    #[test]
    fn sigma2_conditional_mean() {
        let mut rng = substream(5, 0);
        let u = [0.4, -1.2, 0.7, 0.3, 2.0];
        let a = 0.6;
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| draw_sigma2(&u, a, &mut rng)).collect();
        let (m, _) = mean_sd(&draws);
        let u2: f64 = u.iter().map(|x| x * x).sum();
        let exact = (u2 / 2.0 + 1.0 / a) / (3.0 - 1.0);
        assert!((m - exact).abs() / exact < 0.01, "{m} vs {exact}");
    }

    #[test]
    fn flat_counts_give_flat_slope() {
        let m = 41;
        let gc = GridCounts::from_counts(vec![25; m]).unwrap();
        let sd = SplineDesign::new(&unit_grid(m), 8).unwrap();
        let mut cfg = FitConfig::new(Method::Slice).with_seed(3);
        cfg.retained = 2000;
        let ps = fit_slice(&gc, &sd, &Hyperparameters::default(), &cfg).unwrap();
        let beta1: Vec<f64> = (0..ps.len()).map(|g| ps.coef[(g, 1)]).collect();
        let batches: Vec<f64> = beta1.chunks(100).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let (mean, _) = mean_sd(&beta1);
        let (_, bsd) = mean_sd(&batches);
        let se = bsd / (batches.len() as f64).sqrt();
        assert!(mean.abs() < 4.0 * se + 0.02, "β1 mean {mean}, se {se}");
    }

    #[test]
    fn deterministic_given_seed() {
        let m = 21;
        let counts = (0..m).map(|l| (l % 7) as u64 + 2).collect();
        let gc = GridCounts::from_counts(counts).unwrap();
        let sd = SplineDesign::new(&unit_grid(m), 5).unwrap();
        let mut cfg = FitConfig::new(Method::Slice).with_seed(9);
        cfg.warmup = 10;
        cfg.retained = 100;
        let a = fit_slice(&gc, &sd, &Hyperparameters::default(), &cfg).unwrap();
        let b = fit_slice(&gc, &sd, &Hyperparameters::default(), &cfg).unwrap();
        assert_eq!(a.coef, b.coef);
        assert_eq!(a.sigma2, b.sigma2);
        cfg.seed = 10;
        let c = fit_slice(&gc, &sd, &Hyperparameters::default(), &cfg).unwrap();
        assert_ne!(a.coef, c.coef);
    }

    #[test]
    fn rejects_wrong_method() {
        let gc = GridCounts::from_counts(vec![1; 21]).unwrap();
        let sd = SplineDesign::new(&unit_grid(21), 5).unwrap();
        let cfg = FitConfig::new(Method::Nuts);
        assert!(fit_slice(&gc, &sd, &Hyperparameters::default(), &cfg).is_err());
    }
}
