//! Poisson mixed model for grid counts.
//!
//! ```text
//! c_l | β, u      ~ Poisson(exp(β0 + β1 g_l + Σ u_k z_k(g_l)))
//! β0, β1          ~ N(0, σβ²)
//! u_k | σ²        ~ N(0, σ²)
//! σ² | a          ~ Inverse-Gamma(1/2, 1/a)
//! a               ~ Inverse-Gamma(1/2, 1/sσ²)
//! ```
//!
//! Inverse-Gamma(κ, λ) has density ∝ v^(-κ-1) exp(-λ/v). Gradient-based
//! samplers work on `(θ, ω, b)` with `ω = ln σ²` and `b = ln a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocessing::GridCounts;
use crate::splines::SplineDesign;

pub const DEFAULT_SIGMA_BETA: f64 = 1000.0;
pub const DEFAULT_S_SIGMA: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub sigma_beta: f64,
    pub s_sigma: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            sigma_beta: DEFAULT_SIGMA_BETA,
            s_sigma: DEFAULT_S_SIGMA,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.sigma_beta) && ok(self.s_sigma) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "hyperparameters must be positive and finite, got sigma_beta={} s_sigma={}",
                self.sigma_beta, self.s_sigma
            )))
        }
    }
}

/// Model parameters on their natural scale. `coef` holds `(β0, β1, u_1..u_K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    pub coef: Vec<f64>,
    pub sigma2: f64,
    pub a: f64,
}

impl ParamState {
    pub fn beta0(&self) -> f64 {
        self.coef[0]
    }

    pub fn beta1(&self) -> f64 {
        self.coef[1]
    }

    pub fn u(&self) -> &[f64] {
        &self.coef[2..]
    }

    pub fn to_unconstrained(&self) -> UnconstrainedState {
        UnconstrainedState {
            theta: self.coef.clone(),
            omega: self.sigma2.ln(),
            b: self.a.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedState {
    pub theta: Vec<f64>,
    pub omega: f64,
    pub b: f64,
}

impl UnconstrainedState {
    pub fn to_params(&self) -> ParamState {
        ParamState {
            coef: self.theta.clone(),
            sigma2: self.omega.exp(),
            a: self.b.exp(),
        }
    }

    /// Flat layout `(θ, ω, b)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.theta.clone();
        v.push(self.omega);
        v.push(self.b);
        v
    }

    pub fn from_slice(q: &[f64]) -> Self {
        let n = q.len();
        UnconstrainedState {
            theta: q[..n - 2].to_vec(),
            omega: q[n - 2],
            b: q[n - 1],
        }
    }
}

/// Log posterior of the count model, bound to one data set and design.
#[derive(Debug, Clone)]
pub struct PoissonSplineModel<'a> {
    pub counts: Vec<f64>,
    pub design: &'a SplineDesign,
    pub hyper: Hyperparameters,
    /// `Cᵀc`, the sufficient statistic of the Poisson likelihood.
    pub ct_counts: Vec<f64>,
}

impl<'a> PoissonSplineModel<'a> {
    pub fn new(gc: &GridCounts, design: &'a SplineDesign, hyper: Hyperparameters) -> Result<Self> {
        if design.design.nrows() != gc.len() {
            return Err(Error::InvalidConfig(format!(
                "design has {} rows but there are {} grid counts",
                design.design.nrows(),
                gc.len()
            )));
        }
        hyper.validate()?;
        let counts = gc.counts_f64();
        let ct_counts = (0..design.num_coef())
            .map(|j| dot(design.column(j), &counts))
            .collect();
        Ok(PoissonSplineModel {
            counts,
            design,
            hyper,
            ct_counts,
        })
    }

    pub fn num_coef(&self) -> usize {
        self.design.num_coef()
    }

    /// Dimension of the unconstrained parameter vector.
    pub fn dim(&self) -> usize {
        self.num_coef() + 2
    }

    pub fn linear_predictor(&self, theta: &[f64]) -> Vec<f64> {
        let m = self.counts.len();
        let mut eta = vec![0.0; m];
        for (j, &t) in theta.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            for (e, c) in eta.iter_mut().zip(self.design.column(j)) {
                *e += t * c;
            }
        }
        eta
    }

    fn prior_terms(&self, theta: &[f64], omega: f64, b: f64) -> f64 {
        let k = (self.num_coef() - 2) as f64;
        let sb2 = self.hyper.sigma_beta * self.hyper.sigma_beta;
        let ss2 = self.hyper.s_sigma * self.hyper.s_sigma;
        let u2: f64 = theta[2..].iter().map(|u| u * u).sum();
        -(theta[0] * theta[0] + theta[1] * theta[1]) / (2.0 * sb2)
            - 0.5 * (k + 1.0) * omega
            - (-omega).exp() * u2 / 2.0
            - b
            - (-omega - b).exp()
            - (-b).exp() / ss2
    }

    pub fn log_posterior(&self, state: &UnconstrainedState) -> Result<f64> {
        let eta = self.linear_predictor(&state.theta);
        let mut loglik = 0.0;
        for (e, c) in eta.iter().zip(&self.counts) {
            loglik += c * e - e.exp();
        }
        let lp = loglik + self.prior_terms(&state.theta, state.omega, state.b);
        if lp.is_finite() {
            Ok(lp)
        } else {
            Err(Error::NonFiniteResult("log posterior overflowed"))
        }
    }

    /// Log posterior and its gradient at flat `(θ, ω, b)`; `grad` is overwritten.
    pub fn log_posterior_and_grad(&self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        let p = self.num_coef();
        let (theta, omega, b) = (&q[..p], q[p], q[p + 1]);
        let eta = self.linear_predictor(theta);
        let mut loglik = 0.0;
        let resid: Vec<f64> = eta
            .iter()
            .zip(&self.counts)
            .map(|(e, c)| {
                let mu = e.exp();
                loglik += c * e - mu;
                c - mu
            })
            .collect();

        let sb2 = self.hyper.sigma_beta * self.hyper.sigma_beta;
        let ss2 = self.hyper.s_sigma * self.hyper.s_sigma;
        let k = (p - 2) as f64;
        let inv_s2 = (-omega).exp();
        let mut u2 = 0.0;
        for j in 0..p {
            let mut g = dot(self.design.column(j), &resid);
            if j < 2 {
                g -= theta[j] / sb2;
            } else {
                g -= inv_s2 * theta[j];
                u2 += theta[j] * theta[j];
            }
            grad[j] = g;
        }
        let e_ob = (-omega - b).exp();
        grad[p] = -0.5 * (k + 1.0) + inv_s2 * u2 / 2.0 + e_ob;
        grad[p + 1] = -1.0 + e_ob + (-b).exp() / ss2;

        let lp = loglik + self.prior_terms(theta, omega, b);
        if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            Ok(lp)
        } else {
            Err(Error::NonFiniteResult("log posterior gradient overflowed"))
        }
    }

    pub fn grad_log_posterior(&self, state: &UnconstrainedState) -> Result<Vec<f64>> {
        let q = state.to_vec();
        let mut grad = vec![0.0; q.len()];
        self.log_posterior_and_grad(&q, &mut grad)?;
        Ok(grad)
    }
}

pub fn log_posterior(
    state: &UnconstrainedState,
    gc: &GridCounts,
    sd: &SplineDesign,
    hp: &Hyperparameters,
) -> Result<f64> {
    PoissonSplineModel::new(gc, sd, *hp)?.log_posterior(state)
}

pub fn grad_log_posterior(
    state: &UnconstrainedState,
    gc: &GridCounts,
    sd: &SplineDesign,
    hp: &Hyperparameters,
) -> Result<Vec<f64>> {
    PoissonSplineModel::new(gc, sd, *hp)?.grad_log_posterior(state)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
