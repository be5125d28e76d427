//! No-U-turn Hamiltonian Monte Carlo with an identity mass matrix.
//!
//! Trajectories are grown by repeated doubling in a random direction until
//! the end points start moving towards each other or the depth cap is hit.
//! Draws within a trajectory are selected multinomially (uniform progressive
//! sampling inside subtrees, biased towards the new subtree at the top level).
//! The step size is tuned during warm-up by dual averaging.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::rng::{substream, ChainRng};
use super::{initial_coef, FitConfig, Method, PosteriorSamples, Stopwatch};
use crate::error::{Error, Result};
use crate::model::{Hyperparameters, PoissonSplineModel};
use crate::preprocessing::GridCounts;
use crate::splines::SplineDesign;

/// Energy error beyond which a transition counts as divergent.
const MAX_ENERGY_ERROR: f64 = 1000.0;
/// Fraction of post-warmup divergent transitions that aborts the fit.
const DIVERGENCE_LIMIT: f64 = 0.1;

/// A differentiable log density on `R^dim`.
pub trait LogDensity {
    fn dim(&self) -> usize;
    /// Returns `log p(q)` and writes `∇ log p(q)` into `grad`.
    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> Result<f64>;
}

impl LogDensity for PoissonSplineModel<'_> {
    fn dim(&self) -> usize {
        PoissonSplineModel::dim(self)
    }

    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.log_posterior_and_grad(q, grad)
    }
}

/// Position, momentum and cached gradient of one point on a trajectory.
#[derive(Debug, Clone)]
pub struct Phase {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub log_p: f64,
}

impl Phase {
    pub fn new<T: LogDensity + ?Sized>(target: &T, q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let mut grad = vec![0.0; q.len()];
        let log_p = target.log_density_and_grad(&q, &mut grad)?;
        Ok(Phase { q, p, grad, log_p })
    }

    pub fn hamiltonian(&self) -> f64 {
        -self.log_p + 0.5 * self.p.iter().map(|x| x * x).sum::<f64>()
    }
}

/// One leapfrog step of size `eps` (negative `eps` integrates backwards).
pub fn leapfrog<T: LogDensity + ?Sized>(target: &T, start: &Phase, eps: f64) -> Result<Phase> {
    let half = 0.5 * eps;
    let p_half: Vec<f64> = start.p.iter().zip(&start.grad).map(|(p, g)| p + half * g).collect();
    let q: Vec<f64> = start.q.iter().zip(&p_half).map(|(q, p)| q + eps * p).collect();
    let mut grad = vec![0.0; q.len()];
    let log_p = target.log_density_and_grad(&q, &mut grad)?;
    let p = p_half.iter().zip(&grad).map(|(p, g)| p + half * g).collect();
    Ok(Phase { q, p, grad, log_p })
}

struct Tree {
    minus: Phase,
    plus: Phase,
    proposal: Phase,
    log_weight: f64,
    sum_accept: f64,
    n_leapfrog: usize,
    stop: bool,
    divergent: bool,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn is_u_turn(minus: &Phase, plus: &Phase) -> bool {
    let mut dm = 0.0;
    let mut dp = 0.0;
    for i in 0..minus.q.len() {
        let span = plus.q[i] - minus.q[i];
        dm += span * minus.p[i];
        dp += span * plus.p[i];
    }
    dm < 0.0 || dp < 0.0
}

struct Integrator<'t, T: LogDensity + ?Sized> {
    target: &'t T,
    eps: f64,
    h0: f64,
}

impl<T: LogDensity + ?Sized> Integrator<'_, T> {
    fn build_tree(&self, start: &Phase, forward: bool, depth: usize, rng: &mut ChainRng) -> Tree {
        if depth == 0 {
            let step = if forward { self.eps } else { -self.eps };
            return match leapfrog(self.target, start, step) {
                Ok(next) => {
                    let log_weight = self.h0 - next.hamiltonian();
                    let divergent = log_weight.is_nan() || log_weight <= -MAX_ENERGY_ERROR;
                    let accept = if log_weight.is_nan() { 0.0 } else { log_weight.exp().min(1.0) };
                    Tree {
                        minus: next.clone(),
                        plus: next.clone(),
                        proposal: next,
                        log_weight: if log_weight.is_nan() { f64::NEG_INFINITY } else { log_weight },
                        sum_accept: accept,
                        n_leapfrog: 1,
                        stop: divergent,
                        divergent,
                    }
                }
                Err(_) => Tree {
                    minus: start.clone(),
                    plus: start.clone(),
                    proposal: start.clone(),
                    log_weight: f64::NEG_INFINITY,
                    sum_accept: 0.0,
                    n_leapfrog: 1,
                    stop: true,
                    divergent: true,
                },
            };
        }

        let inner = self.build_tree(start, forward, depth - 1, rng);
        if inner.stop {
            return inner;
        }
        let edge = if forward { &inner.plus } else { &inner.minus };
        let outer = self.build_tree(edge, forward, depth - 1, rng);

        let log_weight = log_add_exp(inner.log_weight, outer.log_weight);
        let take_outer = outer.log_weight > f64::NEG_INFINITY
            && rng.random::<f64>() < (outer.log_weight - log_weight).exp();
        let sum_accept = inner.sum_accept + outer.sum_accept;
        let n_leapfrog = inner.n_leapfrog + outer.n_leapfrog;
        let divergent = outer.divergent;
        let outer_stop = outer.stop;
        let (minus, plus, proposal) = match (forward, take_outer) {
            (true, true) => (inner.minus, outer.plus, outer.proposal),
            (true, false) => (inner.minus, outer.plus, inner.proposal),
            (false, true) => (outer.minus, inner.plus, outer.proposal),
            (false, false) => (outer.minus, inner.plus, inner.proposal),
        };
        let stop = outer_stop || is_u_turn(&minus, &plus);
        Tree {
            minus,
            plus,
            proposal,
            log_weight,
            sum_accept,
            n_leapfrog,
            stop,
            divergent,
        }
    }
}

/// Result of one NUTS transition.
#[derive(Debug, Clone)]
pub struct Transition {
    pub position: Phase,
    pub accept_stat: f64,
    pub divergent: bool,
    pub depth: usize,
    pub n_leapfrog: usize,
}

fn standard_normal_vec(dim: usize, rng: &mut ChainRng) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn transition<T: LogDensity + ?Sized>(
    target: &T,
    current: &Phase,
    eps: f64,
    max_depth: usize,
    rng: &mut ChainRng,
) -> Transition {
    let start = Phase {
        p: standard_normal_vec(current.q.len(), rng),
        ..current.clone()
    };
    let integrator = Integrator {
        target,
        eps,
        h0: start.hamiltonian(),
    };
    let mut minus = start.clone();
    let mut plus = start.clone();
    let mut proposal = start;
    let mut log_weight = 0.0;
    let mut sum_accept = 0.0;
    let mut n_leapfrog = 0;
    let mut divergent = false;
    let mut depth = 0;

    while depth < max_depth {
        let forward = rng.random::<bool>();
        let edge = if forward { &plus } else { &minus };
        let sub = integrator.build_tree(edge, forward, depth, rng);
        depth += 1;
        sum_accept += sub.sum_accept;
        n_leapfrog += sub.n_leapfrog;
        if sub.divergent {
            divergent = true;
        }
        if sub.stop {
            break;
        }
        if rng.random::<f64>() < (sub.log_weight - log_weight).exp() {
            proposal = sub.proposal;
        }
        log_weight = log_add_exp(log_weight, sub.log_weight);
        if forward {
            plus = sub.plus;
        } else {
            minus = sub.minus;
        }
        if is_u_turn(&minus, &plus) {
            break;
        }
    }
    Transition {
        position: proposal,
        accept_stat: if n_leapfrog > 0 { sum_accept / n_leapfrog as f64 } else { 0.0 },
        divergent,
        depth,
        n_leapfrog,
    }
}

/// Doubles or halves a unit step until the one-step acceptance ratio crosses 1/2.
fn initial_step_size<T: LogDensity + ?Sized>(target: &T, current: &Phase, rng: &mut ChainRng) -> f64 {
    let start = Phase {
        p: standard_normal_vec(current.q.len(), rng),
        ..current.clone()
    };
    let h0 = start.hamiltonian();
    let log_ratio = |eps: f64| match leapfrog(target, &start, eps) {
        Ok(next) => {
            let r = h0 - next.hamiltonian();
            if r.is_nan() {
                f64::NEG_INFINITY
            } else {
                r
            }
        }
        Err(_) => f64::NEG_INFINITY,
    };
    let mut eps = 1.0;
    let direction = if log_ratio(eps) > 0.5f64.ln() { 1.0 } else { -1.0 };
    for _ in 0..100 {
        let r = log_ratio(eps);
        if direction * r <= -direction * 2f64.ln() {
            break;
        }
        eps *= 2f64.powf(direction);
    }
    eps
}

/// Dual-averaging step-size adaptation.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    iteration: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(initial_eps: f64, target_accept: f64) -> Self {
        DualAveraging {
            mu: (10.0 * initial_eps).ln(),
            target: target_accept,
            h_bar: 0.0,
            log_eps: initial_eps.ln(),
            log_eps_bar: 0.0,
            iteration: 0.0,
        }
    }

    pub fn update(&mut self, accept_stat: f64) {
        self.iteration += 1.0;
        let m = self.iteration;
        let w = 1.0 / (m + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_stat);
        self.log_eps = self.mu - m.sqrt() / Self::GAMMA * self.h_bar;
        let eta = m.powf(-Self::KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
    }

    pub fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    pub fn adapted(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// Retained positions and chain statistics.
#[derive(Debug, Clone)]
pub struct NutsRun {
    pub draws: Vec<Vec<f64>>,
    pub step_size: f64,
    pub divergences: usize,
    pub mean_accept: f64,
    pub mean_depth: f64,
    pub mean_leapfrog: f64,
}

pub fn run_nuts<T: LogDensity + ?Sized>(
    target: &T,
    init: Vec<f64>,
    warmup: usize,
    retained: usize,
    target_accept: f64,
    max_depth: usize,
    rng: &mut ChainRng,
) -> Result<NutsRun> {
    let dim = target.dim();
    let mut current = Phase::new(target, init, vec![0.0; dim])?;
    let eps0 = initial_step_size(target, &current, rng);
    let mut adapt = DualAveraging::new(eps0, target_accept);
    let mut eps = eps0;

    for _ in 0..warmup {
        let t = transition(target, &current, eps, max_depth, rng);
        current = t.position;
        adapt.update(t.accept_stat);
        eps = adapt.current();
    }
    if warmup > 0 {
        eps = adapt.adapted();
    }

    let mut draws = Vec::with_capacity(retained);
    let mut divergences = 0;
    let (mut accept, mut depth, mut leapfrogs) = (0.0, 0.0, 0.0);
    for _ in 0..retained {
        let t = transition(target, &current, eps, max_depth, rng);
        current = t.position;
        if t.divergent {
            divergences += 1;
        }
        accept += t.accept_stat;
        depth += t.depth as f64;
        leapfrogs += t.n_leapfrog as f64;
        draws.push(current.q.clone());
    }
    let r = retained.max(1) as f64;
    Ok(NutsRun {
        draws,
        step_size: eps,
        divergences,
        mean_accept: accept / r,
        mean_depth: depth / r,
        mean_leapfrog: leapfrogs / r,
    })
}

pub fn fit_nuts(gc: &GridCounts, sd: &SplineDesign, hp: &Hyperparameters, cfg: &FitConfig) -> Result<PosteriorSamples> {
    if cfg.method != Method::Nuts {
        return Err(Error::InvalidConfig("fit_nuts requires method = nuts".into()));
    }
    cfg.validate()?;
    let model = PoissonSplineModel::new(gc, sd, *hp)?;
    let p = model.num_coef();
    let mut rng = substream(cfg.seed, cfg.stream);
    let clock = Stopwatch::start();

    let mut init = initial_coef(gc, p);
    init.extend([0.0, 0.0]);
    let run = run_nuts(
        &model,
        init,
        cfg.warmup,
        cfg.retained,
        cfg.nuts_target_accept,
        cfg.nuts_max_depth,
        &mut rng,
    )?;
    if run.divergences as f64 > DIVERGENCE_LIMIT * cfg.retained as f64 {
        return Err(Error::DivergenceLimit {
            divergent: run.divergences,
            total: cfg.retained,
        });
    }

    let mut coef = DMatrix::zeros(cfg.retained, p);
    let mut sigma2 = Vec::with_capacity(cfg.retained);
    let mut a = Vec::with_capacity(cfg.retained);
    for (g, q) in run.draws.iter().enumerate() {
        for j in 0..p {
            coef[(g, j)] = q[j];
        }
        sigma2.push(q[p].exp());
        a.push(q[p + 1].exp());
    }
    if sigma2.iter().chain(&a).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::NonFiniteResult("variance draw is not finite"));
    }

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("divergences".to_string(), run.divergences as f64);
    diagnostics.insert("mean_accept".to_string(), run.mean_accept);
    diagnostics.insert("step_size".to_string(), run.step_size);
    diagnostics.insert("mean_tree_depth".to_string(), run.mean_depth);
    diagnostics.insert("mean_leapfrog_steps".to_string(), run.mean_leapfrog);
    diagnostics.insert("seconds".to_string(), clock.seconds());
    Ok(PosteriorSamples {
        coef,
        sigma2,
        a,
        method: Method::Nuts,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent Gaussian with per-coordinate standard deviations.
    struct Gaussian {
        sd: Vec<f64>,
    }

    impl LogDensity for Gaussian {
        fn dim(&self) -> usize {
            self.sd.len()
        }

        fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
            let mut lp = 0.0;
            for i in 0..q.len() {
                let s2 = self.sd[i] * self.sd[i];
                lp -= q[i] * q[i] / (2.0 * s2);
                grad[i] = -q[i] / s2;
            }
            Ok(lp)
        }
    }

    #[test]
    fn leapfrog_energy_error_is_third_order() {
        let target = Gaussian { sd: vec![1.0, 0.5, 2.0] };
        let start = Phase::new(&target, vec![0.3, -0.2, 1.0], vec![0.7, 0.4, -1.1]).unwrap();
        let h0 = start.hamiltonian();
        let err = |eps: f64| (leapfrog(&target, &start, eps).unwrap().hamiltonian() - h0).abs();
        let (e1, e2) = (err(0.1), err(0.05));
        let ratio = e1 / e2;
        assert!((ratio - 8.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn leapfrog_with_momentum_flip_is_an_involution() {
        let target = Gaussian { sd: vec![1.0, 0.3, 3.0, 0.8] };
        let start = Phase::new(&target, vec![0.3, -0.2, 1.0, 2.0], vec![0.7, 0.4, -1.1, 0.2]).unwrap();
        let mut mid = leapfrog(&target, &start, 0.2).unwrap();
        mid.p.iter_mut().for_each(|p| *p = -*p);
        let mut back = leapfrog(&target, &mid, 0.2).unwrap();
        back.p.iter_mut().for_each(|p| *p = -*p);
        for i in 0..4 {
            assert!((back.q[i] - start.q[i]).abs() < 1e-14);
            assert!((back.p[i] - start.p[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn samples_prior_gaussian() {
        let sigma_beta = 2.0;
        let target = Gaussian { sd: vec![sigma_beta, sigma_beta, 0.5] };
        let mut rng = substream(21, 0);
        let run = run_nuts(&target, vec![0.0; 3], 500, 4000, 0.8, 10, &mut rng).unwrap();
        let x: Vec<f64> = run.draws.iter().map(|d| d[0]).collect();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let batches: Vec<f64> = x.chunks(200).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let bm = batches.iter().sum::<f64>() / batches.len() as f64;
        let bvar = batches.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (batches.len() as f64 - 1.0);
        let se = (bvar / batches.len() as f64).sqrt().max(sigma_beta / n.sqrt());
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
        // s.d. of the sample s.d. is about σ/√(2 n_eff); use the same batch-based n_eff
        let n_eff = (sigma_beta * sigma_beta / (se * se)).min(n);
        assert!((sd - sigma_beta).abs() < 3.0 * sigma_beta / (2.0 * n_eff).sqrt(), "sd {sd}");
        assert_eq!(run.divergences, 0);
    }

    #[test]
    fn dual_averaging_reaches_target_acceptance() {
        let target = Gaussian { sd: vec![1.0; 10] };
        let mut rng = substream(2, 0);
        let run = run_nuts(&target, vec![0.0; 10], 1000, 1000, 0.8, 10, &mut rng).unwrap();
        assert!((run.mean_accept - 0.8).abs() < 0.1, "accept {}", run.mean_accept);
    }

    #[test]
    fn log_add_exp_handles_infinities() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 1.0), 1.0);
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
