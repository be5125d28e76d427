//! Monte Carlo engines for the Poisson spline model.
//!
//! Two samplers target the same joint posterior over `(β, u, σ², a)`:
//! slice sampling within Gibbs, which updates one coefficient at a time from
//! its exact full conditional, and a no-U-turn sampler on the unconstrained
//! coordinates `(β, u, ln σ², ln a)`.

pub mod gibbs;
pub mod nuts;
pub mod rng;
pub mod slice;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Hyperparameters;
use crate::preprocessing::GridCounts;
use crate::splines::SplineDesign;

pub use gibbs::fit_slice;
pub use nuts::fit_nuts;
pub use slice::{sample_h, SliceTuning};

pub const MIN_RETAINED: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Slice,
    Nuts,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Slice => "slice",
            Method::Nuts => "nuts",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "slice" => Ok(Method::Slice),
            "nuts" => Ok(Method::Nuts),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub method: Method,
    pub warmup: usize,
    pub retained: usize,
    pub seed: u64,
    /// Sub-stream of `seed` used by this fit.
    pub stream: u64,
    pub slice_width: f64,
    pub slice_max_steps: usize,
    pub nuts_target_accept: f64,
    pub nuts_max_depth: usize,
}

impl FitConfig {
    /// Defaults for `method`: 100 warm-up sweeps for slice sampling, 1000
    /// warm-up iterations for NUTS, 1000 retained draws for both.
    pub fn new(method: Method) -> Self {
        FitConfig {
            method,
            warmup: match method {
                Method::Slice => 100,
                Method::Nuts => 1000,
            },
            retained: 1000,
            seed: 0,
            stream: 0,
            slice_width: 1.0,
            slice_max_steps: 50,
            nuts_target_accept: 0.8,
            nuts_max_depth: 10,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.retained < MIN_RETAINED {
            return bad(format!("retained draws must be at least {MIN_RETAINED}, got {}", self.retained));
        }
        if !(self.slice_width.is_finite() && self.slice_width > 0.0) {
            return bad(format!("slice width must be positive, got {}", self.slice_width));
        }
        if !(self.nuts_target_accept > 0.0 && self.nuts_target_accept < 1.0) {
            return bad(format!("target acceptance must lie in (0, 1), got {}", self.nuts_target_accept));
        }
        if self.nuts_max_depth == 0 {
            return bad("maximum tree depth must be at least 1".into());
        }
        Ok(())
    }

    pub fn slice_tuning(&self) -> SliceTuning {
        SliceTuning {
            width: self.slice_width,
            max_steps: self.slice_max_steps,
        }
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig::new(Method::Slice)
    }
}

/// Retained draws. Row `g` of `coef` is `(β0, β1, u_1..u_K)` of draw `g`.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub coef: DMatrix<f64>,
    pub sigma2: Vec<f64>,
    pub a: Vec<f64>,
    pub method: Method,
    pub diagnostics: BTreeMap<String, f64>,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.sigma2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma2.is_empty()
    }

    pub fn coef_row(&self, g: usize) -> Vec<f64> {
        self.coef.row(g).iter().copied().collect()
    }
}

/// Runs the engine selected by `cfg.method`.
pub fn fit(gc: &GridCounts, sd: &SplineDesign, hp: &Hyperparameters, cfg: &FitConfig) -> Result<PosteriorSamples> {
    match cfg.method {
        Method::Slice => fit_slice(gc, sd, hp, cfg),
        Method::Nuts => fit_nuts(gc, sd, hp, cfg),
    }
}

/// Starting values shared by both engines: intensity at the average count
/// level, everything else at zero, `σ² = a = 1`.
pub(crate) fn initial_coef(gc: &GridCounts, num_coef: usize) -> Vec<f64> {
    let mean = gc.counts.iter().sum::<u64>() as f64 / gc.len() as f64;
    let mut coef = vec![0.0; num_coef];
    coef[0] = (mean + 0.1).ln();
    coef
}

/// Wall-clock seconds; unavailable (reported as 0) on `wasm32`.
pub(crate) struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub(crate) fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}
